/**
 * @file specfun.hpp
 *
 * @brief Cylinder functions J_nu(z) and H2_nu(z) = J_nu(z) - i Y_nu(z) of
 * complex order and complex argument, with derivatives.
 *
 * The evaluation strategy follows the stability of the Bessel equation
 *
 *     z^2 w'' + z w' + (z^2 - nu^2) w = 0.
 *
 * J is the solution that is recessive at the origin, so it is started from
 * its power series at a small argument and continued outward along the ray
 * to z with a Taylor-series integrator of the equation. H2 is recessive at
 * infinity in the lower half plane; it is started far out (Hankel expansion
 * for moderate order, Debye expansion for large order) and continued inward.
 * In both directions the wanted solution never loses dominance, so the
 * continuation is numerically stable, including through the turning point
 * |z| ~ |nu| where whispering-gallery roots live. Above the real axis the
 * inward continuation of H2 would be unstable, so H2 = 2 J - H1 is formed
 * there with H1(z) = conj(H2(conj nu, conj z)).
 *
 * All internal work is done on log-scaled values, i.e. the true result is
 * (value, derivative) * exp(log_scale). The scaled entry points are public so
 * that callers can form products such as J_nu(a) / J_nu(b) without overflow.
 *
 * Supported domain: |nu| <= kMaxOrder, 0 < |z| <= kMaxArgument. J accepts
 * any z off the negative real axis, H2 requires Re z > 0. Negative Re(nu) is
 * handled through the reflection formulas.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <vector>

#include "mrcmt/common.hpp"
#include "mrcmt/errors.hpp"

namespace mrcmt::specfun {

inline constexpr double kMaxOrder = 5000.0;
inline constexpr double kMaxArgument = 5000.0;

/// Function value and its derivative with respect to the argument.
struct ValueDerivative {
    cplx value;
    cplx derivative;
};

/// Log-scaled value: true result is (value, derivative) * exp(log_scale).
struct ScaledValue {
    cplx value;
    cplx derivative;
    double log_scale = 0.0;

    /// Unscaled result; throws OverflowError instead of producing inf.
    ValueDerivative unscaled() const;

    /// Logarithmic derivative w'/w, independent of the scale.
    cplx log_derivative() const { return derivative / value; }
};

/// Joint evaluation of J and H2 at one (order, argument).
struct CylinderPair {
    cplx j_value;
    cplx j_derivative;
    cplx h2_value;
    cplx h2_derivative;
    cplx order;
    cplx argument;
};

namespace detail {

inline constexpr double kLn2 = 0.69314718055994530942;

/// log Gamma(z) for Re z >= 0.5 (Lanczos, g = 7). Only exp() of the result
/// is ever used, so the branch of the imaginary part is irrelevant.
inline cplx log_gamma(cplx z) {
    static constexpr std::array<double, 9> c = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (z.real() < 0.5) {
        // reflection; not needed on the production path but kept total
        return std::log(kPi / std::sin(kPi * z)) - log_gamma(1.0 - z);
    }
    if (std::abs(z) >= 15.0) {
        // Stirling series; Lanczos loses absolute accuracy for large |z|
        static constexpr std::array<double, 8> b = {
            1.0 / 12.0,         -1.0 / 360.0,      1.0 / 1260.0,        -1.0 / 1680.0,
            1.0 / 1188.0,       -691.0 / 360360.0, 1.0 / 156.0,         -3617.0 / 122400.0};
        const cplx iz = 1.0 / z, iz2 = iz * iz;
        cplx corr = 0.0, p = iz;
        for (double bk : b) {
            corr += bk * p;
            p *= iz2;
        }
        return (z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * kPi) + corr;
    }
    z -= 1.0;
    cplx a = c[0];
    const cplx t = z + 7.5;
    for (int i = 1; i < 9; ++i) a += c[i] / (z + double(i));
    return 0.5 * std::log(2.0 * kPi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

/// Keeps (w, dw) of order one by moving powers of two into log_scale.
inline void renormalize(ScaledValue& s) {
    const double m = std::max(std::abs(s.value), std::abs(s.derivative));
    if (m == 0.0 || !std::isfinite(m)) return;
    int e = 0;
    std::frexp(m, &e);
    s.value = cplx(std::ldexp(s.value.real(), -e), std::ldexp(s.value.imag(), -e));
    s.derivative =
        cplx(std::ldexp(s.derivative.real(), -e), std::ldexp(s.derivative.imag(), -e));
    s.log_scale += e * kLn2;
}

/// One Taylor step of the Bessel equation from c to c + h.
///
/// With b_n = a_n h^n the Taylor coefficients about c obey
///   c^2 (n+2)(n+1) b_{n+2} = -[c (n+1)(2n+1) h b_{n+1} + (n^2 + c^2 - nu^2) h^2 b_n
///                              + 2 c h^3 b_{n-1} + h^4 b_{n-2}].
inline void taylor_step(cplx nu2, cplx c, cplx h, ScaledValue& s) {
    const cplx h2 = h * h, h3 = h2 * h, h4 = h2 * h2;
    const cplx c2 = c * c;
    cplx bm2 = 0.0, bm1 = 0.0, b0 = s.value, b1 = s.derivative * h;
    cplx sum = b0 + b1, dsum = b1;
    for (int n = 0; n < 600; ++n) {
        const double dn = n;
        const cplx b2 = -(c * ((dn + 1.0) * (2.0 * dn + 1.0)) * h * b1 +
                          (dn * dn + c2 - nu2) * h2 * b0 + 2.0 * c * h3 * bm1 + h4 * bm2) /
                        (c2 * ((dn + 2.0) * (dn + 1.0)));
        sum += b2;
        dsum += (dn + 2.0) * b2;
        bm2 = bm1;
        bm1 = b0;
        b0 = b1;
        b1 = b2;
        if (n >= 4) {
            const double tail = (std::abs(b0) + std::abs(b1)) * (dn + 3.0);
            if (tail <= 1e-18 * (std::abs(sum) + std::abs(dsum))) break;
        }
    }
    s.value = sum;
    s.derivative = dsum / h;
}

/// Continues a solution of the Bessel equation along the segment [from, to].
inline void continue_segment(cplx nu, cplx from, cplx to, ScaledValue& s) {
    const cplx nu2 = nu * nu;
    const double anu = std::abs(nu);
    const double length = std::abs(to - from);
    if (length == 0.0) return;
    const cplx dir = (to - from) / length;
    // positions are recomputed from the travelled distance so that rounding
    // of the abscissa does not accumulate over long paths
    double travelled = 0.0;
    cplx c = from;
    for (int guard = 0; guard < 2000000; ++guard) {
        const double ac = std::abs(c);
        const double hmax = std::min(0.35 * ac, 3.0 / std::max(1.0, anu / ac));
        const bool last = length - travelled <= hmax;
        travelled = last ? length : travelled + hmax;
        const cplx next = last ? to : from + dir * travelled;
        taylor_step(nu2, c, next - c, s);
        renormalize(s);
        c = next;
        if (last) return;
    }
    throw ConvergenceError("cylinder function continuation did not terminate");
}

/// Power series of J_nu(z) (Re nu >= 0), log-scaled.
inline ScaledValue j_series(cplx nu, cplx z) {
    const cplx q = -0.25 * z * z;
    cplx term = 1.0, sum = 1.0, dsum = nu;  // dsum = sum (nu + 2k) t_k
    for (int k = 1; k < 1000; ++k) {
        term *= q / (double(k) * (nu + double(k)));
        sum += term;
        dsum += (nu + 2.0 * k) * term;
        if (std::abs(term) * (std::abs(nu) + 2.0 * k) <=
                1e-18 * (std::abs(sum) + std::abs(dsum)) &&
            double(k * k) > std::abs(q)) {
            break;
        }
    }
    const cplx p = nu * std::log(0.5 * z) - log_gamma(nu + 1.0);
    const cplx phase = std::exp(cplx(0.0, p.imag()));
    ScaledValue s{sum * phase, dsum / z * phase, p.real()};
    renormalize(s);
    return s;
}

/// Polynomials u_k(t), v_k(t) of the Debye expansions, k = 0..kTerms.
struct DebyeTable {
    static constexpr int kTerms = 16;
    std::array<std::vector<double>, kTerms + 1> u;
    std::array<std::vector<double>, kTerms + 1> v;

    DebyeTable() {
        auto deriv = [](const std::vector<double>& p) {
            std::vector<double> d(std::max<std::size_t>(p.size(), 2) - 1, 0.0);
            for (std::size_t i = 1; i < p.size(); ++i) d[i - 1] = double(i) * p[i];
            return d;
        };
        auto mul = [](const std::vector<double>& a, const std::vector<double>& b) {
            std::vector<double> r(a.size() + b.size() - 1, 0.0);
            for (std::size_t i = 0; i < a.size(); ++i)
                for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
            return r;
        };
        auto add = [](std::vector<double> a, const std::vector<double>& b, double sb) {
            if (a.size() < b.size()) a.resize(b.size(), 0.0);
            for (std::size_t i = 0; i < b.size(); ++i) a[i] += sb * b[i];
            return a;
        };
        // u_{k+1} = t^2 (1 - t^2) u_k' / 2 + (1/8) int_0^t (1 - 5 s^2) u_k(s) ds
        u[0] = {1.0};
        for (int k = 0; k < kTerms; ++k) {
            auto a = mul(mul({0.0, 0.0, 1.0}, {1.0, 0.0, -1.0}), deriv(u[k]));
            auto integrand = mul({1.0, 0.0, -5.0}, u[k]);
            std::vector<double> b(integrand.size() + 1, 0.0);
            for (std::size_t i = 0; i < integrand.size(); ++i)
                b[i + 1] = integrand[i] / double(i + 1) / 8.0;
            u[k + 1] = add(b, a, 0.5);
        }
        // v_k = u_k + t (t^2 - 1) [u_{k-1} / 2 + t u_{k-1}']
        v[0] = {1.0};
        for (int k = 1; k <= kTerms; ++k) {
            auto inner = add(mul({0.0, 1.0}, deriv(u[k - 1])), u[k - 1], 0.5);
            v[k] = add(u[k], mul({0.0, -1.0, 0.0, 1.0}, inner), 1.0);
        }
    }

    static const DebyeTable& instance() {
        static const DebyeTable table;
        return table;
    }
};

inline cplx horner(const std::vector<double>& p, cplx t) {
    cplx r = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) r = r * t + *it;
    return r;
}

/// Sums sum_k poly_k(t) / nu^k, truncated at the smallest term.
inline cplx debye_sum(const std::array<std::vector<double>, DebyeTable::kTerms + 1>& polys,
                      cplx t, cplx nu) {
    cplx sum = 1.0;
    cplx inv = 1.0;
    double last = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= DebyeTable::kTerms; ++k) {
        inv /= nu;
        const cplx term = horner(polys[k], t) * inv;
        const double at = std::abs(term);
        if (at > last) break;
        sum += term;
        last = at;
        if (at < 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

/// Debye expansion of H2 in the oscillatory zone |z| >= 2 |nu|, large |nu|.
inline ScaledValue h2_debye(cplx nu, cplx z) {
    const auto& tab = DebyeTable::instance();
    cplx w = std::sqrt(z * z - nu * nu);
    if (w.real() < 0.0) w = -w;
    const cplx t = cplx(0.0, 1.0) * nu / w;
    const cplx xi = w - nu * std::acos(nu / z) - 0.25 * kPi;
    const cplx su = debye_sum(tab.u, t, nu);
    const cplx sv = debye_sum(tab.v, t, nu);
    // exp(-i xi) carries the whole magnitude; split it into scale and phase
    const cplx e = cplx(0.0, -1.0) * xi;
    const cplx phase = std::exp(cplx(0.0, e.imag()));
    ScaledValue s;
    s.value = std::sqrt(2.0 / (kPi * w)) * su * phase;
    s.derivative = cplx(0.0, -1.0) * std::sqrt(2.0 * w / kPi) / z * sv * phase;
    s.log_scale = e.real();
    renormalize(s);
    return s;
}

/// Hankel large-argument expansion of H2 with optimal truncation.
inline ScaledValue h2_hankel(cplx nu, cplx z) {
    const cplx mu = 4.0 * nu * nu;
    const cplx omega = z - 0.5 * nu * kPi - 0.25 * kPi;
    // H2 ~ sqrt(2/(pi z)) e^{-i omega} sum c_k z^{-k},  c_k = (-i)^k a_k(nu)
    // H2' ~ sqrt(2/(pi z)) e^{-i omega} sum (-i c_k - (k - 1/2) c_{k-1}) z^{-k}
    cplx ck = 1.0, sum = 1.0, dsum = cplx(0.0, -1.0);
    cplx zk = 1.0;
    double last = std::numeric_limits<double>::infinity();
    for (int k = 1; k < 400; ++k) {
        const double odd = 2.0 * k - 1.0;
        const cplx cprev = ck;
        ck = cprev * cplx(0.0, -1.0) * (mu - odd * odd) / (8.0 * k);
        zk /= z;
        const cplx term = ck * zk;
        const cplx dterm = (cplx(0.0, -1.0) * ck - (k - 0.5) * cprev) * zk;
        const double at = std::abs(term) + std::abs(dterm);
        if (at > last && k > 2) break;
        sum += term;
        dsum += dterm;
        last = at;
        if (at < 1e-18 * (std::abs(sum) + std::abs(dsum))) break;
    }
    const cplx e = cplx(0.0, -1.0) * omega;
    const cplx pre = std::sqrt(2.0 / (kPi * z)) * std::exp(cplx(0.0, e.imag()));
    ScaledValue s{pre * sum, pre * dsum, e.real()};
    renormalize(s);
    return s;
}

inline void check_domain(cplx nu, cplx z, const char* what) {
    if (!std::isfinite(nu.real()) || !std::isfinite(nu.imag()) || !std::isfinite(z.real()) ||
        !std::isfinite(z.imag())) {
        throw RangeError(std::string(what) + ": non-finite order or argument");
    }
    if (std::abs(nu) > kMaxOrder || std::abs(z) > kMaxArgument) {
        std::ostringstream os;
        os << what << ": |order| = " << std::abs(nu) << ", |argument| = " << std::abs(z)
           << " outside supported range (" << kMaxOrder << ", " << kMaxArgument << ")";
        throw RangeError(os.str());
    }
}

/// Radius beyond which the far-field start of H2 is accurate.
inline double h2_start_radius(cplx nu) {
    const double anu = std::abs(nu);
    if (anu >= 30.0) return 2.0 * anu;
    return std::max(25.0, anu * anu / 6.0);
}

inline ScaledValue h2_start(cplx nu, cplx z) {
    return std::abs(nu) >= 30.0 ? h2_debye(nu, z) : h2_hankel(nu, z);
}

inline ScaledValue j_nonnegative(cplx nu, cplx z) {
    const double zs = 2.0 * std::sqrt(std::max(1.0, std::abs(nu + 1.0)));
    const double az = std::abs(z);
    if (az <= zs) return j_series(nu, z);
    const cplx start = z * (zs / az);
    ScaledValue s = j_series(nu, start);
    continue_segment(nu, start, z, s);
    return s;
}

/// a * sa + b * sb for two scaled values, result on the larger scale.
inline ScaledValue combine(cplx a, const ScaledValue& sa, cplx b, const ScaledValue& sb) {
    const double top = std::max(sa.log_scale, sb.log_scale);
    const double fa = std::exp(sa.log_scale - top);
    const double fb = std::exp(sb.log_scale - top);
    ScaledValue r{a * sa.value * fa + b * sb.value * fb,
                  a * sa.derivative * fa + b * sb.derivative * fb, top};
    renormalize(r);
    return r;
}

/// H2 for Im z <= 0: far-field start on the ray, then inward (H2 is dominant inward).
inline ScaledValue h2_lower(cplx nu, cplx z) {
    const double rs = h2_start_radius(nu);
    const double az = std::abs(z);
    if (az >= rs) return h2_start(nu, z);
    const cplx start = z * (rs / az);
    ScaledValue s = h2_start(nu, start);
    continue_segment(nu, start, z, s);
    return s;
}

inline ScaledValue conjugate(ScaledValue s) {
    s.value = std::conj(s.value);
    s.derivative = std::conj(s.derivative);
    return s;
}

/// H1_nu(z) = conj(H2_{conj nu}(conj z)), for Im z >= 0.
inline ScaledValue h1_upper(cplx nu, cplx z) {
    return conjugate(h2_lower(std::conj(nu), std::conj(z)));
}

/// H2 for Re nu >= 0. Above the real axis inward continuation of H2 is
/// unstable (H1 grows faster), so H2 = 2 J - H1 is used there instead; J
/// dominates H1 in that half plane and the difference keeps its accuracy.
inline ScaledValue h2_any(cplx nu, cplx z) {
    if (z.imag() <= 0.0) return h2_lower(nu, z);
    return combine(2.0, j_nonnegative(nu, z), -1.0, h1_upper(nu, z));
}

/// H1 for Re nu >= 0, any half plane.
inline ScaledValue h1_any(cplx nu, cplx z) {
    if (z.imag() >= 0.0) return h1_upper(nu, z);
    return conjugate(h2_any(std::conj(nu), std::conj(z)));
}

}  // namespace detail

inline ValueDerivative ScaledValue::unscaled() const {
    if (value == 0.0 && derivative == 0.0) return {0.0, 0.0};
    if (log_scale > 700.0) {
        const double lm = std::log(std::max(std::abs(value), std::abs(derivative)));
        if (log_scale + lm > 709.0) {
            std::ostringstream os;
            os << "cylinder function overflow: magnitude exp(" << log_scale + lm << ")";
            throw OverflowError(os.str());
        }
    }
    const double f = std::exp(log_scale);
    ValueDerivative r{value * f, derivative * f};
    if (!std::isfinite(std::abs(r.value)) || !std::isfinite(std::abs(r.derivative))) {
        throw OverflowError("cylinder function overflow");
    }
    return r;
}

/// H2_nu(z) and dH2/dz, log-scaled.
inline ScaledValue hankel2_scaled(cplx nu, cplx z) {
    detail::check_domain(nu, z, "hankel2");
    if (!(z.real() > 0.0)) throw RangeError("hankel2: argument must have positive real part");
    if (nu.real() >= 0.0) return detail::h2_any(nu, z);
    // H2_{-mu} = exp(-i mu pi) H2_mu
    const cplx mu = -nu;
    ScaledValue s = detail::h2_any(mu, z);
    const cplx f = std::exp(cplx(0.0, -kPi) * mu);
    s.value *= f;
    s.derivative *= f;
    detail::renormalize(s);
    return s;
}

/// H1_nu(z) = J_nu(z) + i Y_nu(z) and dH1/dz, log-scaled.
inline ScaledValue hankel1_scaled(cplx nu, cplx z) {
    detail::check_domain(nu, z, "hankel1");
    if (!(z.real() > 0.0)) throw RangeError("hankel1: argument must have positive real part");
    if (nu.real() >= 0.0) return detail::h1_any(nu, z);
    // H1_{-mu} = exp(i mu pi) H1_mu
    const cplx mu = -nu;
    ScaledValue s = detail::h1_any(mu, z);
    const cplx f = std::exp(cplx(0.0, kPi) * mu);
    s.value *= f;
    s.derivative *= f;
    detail::renormalize(s);
    return s;
}

/// Continues a solution of Bessel's equation of order nu from `from` to `to`
/// along a straight path. The caller is responsible for choosing a direction
/// in which the solution is dominant (J outward, H2 inward near the real axis).
inline void continue_solution(cplx nu, cplx from, cplx to, ScaledValue& s) {
    detail::continue_segment(nu, from, to, s);
}

/// J_nu(z) and dJ/dz, log-scaled.
inline ScaledValue bessel_j_scaled(cplx nu, cplx z) {
    detail::check_domain(nu, z, "bessel_j");
    if (z == 0.0) throw RangeError("bessel_j_scaled: zero argument");
    if (z.real() <= 0.0 && z.imag() == 0.0) {
        throw RangeError("bessel_j: argument on the branch cut (negative real axis)");
    }
    if (nu.real() >= 0.0) return detail::j_nonnegative(nu, z);
    // J_{-mu} = exp(i mu pi) J_mu - i sin(mu pi) H2_mu
    if (!(z.real() > 0.0)) {
        throw RangeError("bessel_j: negative order requires an argument with positive real part");
    }
    // J_{-mu} = e^{i mu pi} J_mu - i sin(mu pi) H2_mu
    //        = e^{-i mu pi} J_mu + i sin(mu pi) H1_mu
    // Both are exact; the one with less cancellation is returned.
    const cplx mu = -nu;
    const ScaledValue j = detail::j_nonnegative(mu, z);
    const cplx s = std::sin(kPi * mu);
    const cplx ep = std::exp(cplx(0.0, kPi) * mu), em = std::exp(cplx(0.0, -kPi) * mu);
    const ScaledValue h2 = detail::h2_any(mu, z);
    const ScaledValue h1 = detail::h1_any(mu, z);
    const ScaledValue f1 = detail::combine(ep, j, cplx(0.0, -1.0) * s, h2);
    const ScaledValue f2 = detail::combine(em, j, cplx(0.0, 1.0) * s, h1);
    // log of (largest term / result) for each form
    auto loss = [&](const ScaledValue& r, cplx a, cplx b, const ScaledValue& h) {
        const double ta = std::log(std::abs(a * j.value) + 1e-300) + j.log_scale;
        const double tb = std::log(std::abs(b * h.value) + 1e-300) + h.log_scale;
        return std::max(ta, tb) - (std::log(std::abs(r.value) + 1e-300) + r.log_scale);
    };
    return loss(f1, ep, s, h2) <= loss(f2, em, s, h1) ? f1 : f2;
}

/// J_nu(z) and its derivative. Accepts the z = 0 limit where it is finite.
inline ValueDerivative bessel_j(cplx nu, cplx z) {
    if (z == 0.0) {
        detail::check_domain(nu, 1.0, "bessel_j");
        if (nu == 0.0) return {1.0, 0.0};
        if (nu == 1.0) return {0.0, 0.5};
        if (nu.real() > 1.0) return {0.0, 0.0};
        throw RangeError("bessel_j: derivative singular at zero argument for this order");
    }
    return bessel_j_scaled(nu, z).unscaled();
}

/// H2_nu(z) = J_nu(z) - i Y_nu(z) and its derivative.
inline ValueDerivative hankel2(cplx nu, cplx z) { return hankel2_scaled(nu, z).unscaled(); }

/// Joint evaluation of J and H2.
inline CylinderPair cylinder_pair(cplx nu, cplx z) {
    const ValueDerivative j = bessel_j(nu, z);
    const ValueDerivative h = hankel2(nu, z);
    return {j.value, j.derivative, h.value, h.derivative, nu, z};
}

}  // namespace mrcmt::specfun
