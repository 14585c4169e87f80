/**
 * @file bendmode.hpp
 *
 * @brief Leaky whispering-gallery modes of a dielectric disk or ring.
 *
 * TE fields E_y(r, theta) = u(r) exp(-i nu theta) of a cavity of outer radius
 * R. Inside the material regions u is a combination of J_nu(n k r) and
 * H2_nu(n k r); outside the rim only the outgoing H2_nu(n_b k r) survives.
 * Matching u and du/dr at every interface gives the dispersion relation in
 * the complex angular order nu; the propagation constant along the rim is
 * gamma = nu / R.
 *
 * Residuals are written with logarithmic derivatives and ratios of scaled
 * cylinder functions, so they are meromorphic in nu and O(1) near the roots
 * regardless of how large the individual functions are.
 *
 * The radial profile of a solved mode is tabulated on a uniform grid per
 * region (values and r-derivatives), obtained by continuing each basis
 * function in its stable direction with the Taylor integrator of specfun.
 * Lookups use quintic Hermite interpolation with the second derivative taken
 * from the Bessel equation.
 *
 * Normalization: the azimuthal flux through a radial line,
 *     int_0^inf 2 Re(nu) / (k r) |u(r)|^2 dr = 2,
 * mirrors the straight-mode convention (bracket self-value 2).
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mrcmt/common.hpp"
#include "mrcmt/errors.hpp"
#include "mrcmt/specfun.hpp"
#include "mrcmt/waveguide.hpp"

namespace mrcmt::bendmode {

/// Cavity geometry. core_width == 0 means a disk.
struct BendGeometry {
    double radius = 5.0;
    double core_index = 1.5;
    double background_index = 1.0;
    double core_width = 0.0;

    bool is_disk() const { return core_width == 0.0; }
    double inner_radius() const { return radius - core_width; }

    void validate() const {
        if (!(radius > 0.0) || !std::isfinite(radius)) {
            throw ValidationError("bend: radius must be positive");
        }
        if (!(core_width >= 0.0) || !(core_width < radius)) {
            throw ValidationError("bend: core_width must satisfy 0 <= core_width < radius");
        }
        if (!(background_index >= 1.0)) {
            throw ValidationError("bend: background_index must be >= 1");
        }
        if (!(core_index > background_index)) {
            throw ValidationError("bend: core_index must exceed background_index");
        }
    }

    bool operator==(const BendGeometry&) const = default;
};

/// Exterior radiation condition. Physical modes are outgoing (H2 for
/// exp(+i omega t)); the incoming variant exists for symmetry checks.
enum class Radiation { outgoing, incoming };

/// One Newton iterate of the root search.
struct NewtonStep {
    cplx nu;
    double residual = 0.0;
};

/// Tabulated radial profile u(r) with derivative.
class RadialProfile {
public:
    /// coef * f(n k r) / f(reference), f = J or the exterior Hankel function.
    struct Term {
        bool bessel_j = true;
        cplx coef;
        specfun::ScaledValue reference;
    };

    struct Region {
        double r_lo = 0.0, r_hi = 0.0;
        double index = 1.0;
        std::vector<Term> terms;
        // uniform table on [r_lo, r_hi]
        double step = 0.0;
        std::vector<cplx> u, du;
    };

    cplx nu;
    double k = 0.0;
    Radiation radiation = Radiation::outgoing;
    std::vector<Region> regions;

    /// u and du/dr at radius r (table lookup, direct evaluation outside it).
    void evaluate(double r, cplx& u, cplx& du) const {
        if (r <= 0.0) {
            u = du = 0.0;
            return;
        }
        const Region& reg = region_for(r);
        if (r < reg.r_lo || r > reg.r_hi || reg.u.empty()) {
            direct(reg, r, u, du);
            return;
        }
        const int n = static_cast<int>(reg.u.size()) - 1;
        int i = static_cast<int>((r - reg.r_lo) / reg.step);
        i = std::clamp(i, 0, n - 1);
        const double r0 = reg.r_lo + i * reg.step;
        const double h = reg.step;
        const double t = (r - r0) / h;
        const double r1 = r0 + h;
        const cplx p0 = reg.u[i], p1 = reg.u[i + 1];
        const cplx m0 = reg.du[i], m1 = reg.du[i + 1];
        const cplx a0 = second_derivative(reg, r0, p0, m0);
        const cplx a1 = second_derivative(reg, r1, p1, m1);
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
        const double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
        const double h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        const double h3 = 0.5 * t3 - t4 + 0.5 * t5;
        const double h4 = -4 * t3 + 7 * t4 - 3 * t5;
        const double h5 = 10 * t3 - 15 * t4 + 6 * t5;
        const double d0 = -30 * t2 + 60 * t3 - 30 * t4;
        const double d1 = 1 - 18 * t2 + 32 * t3 - 15 * t4;
        const double d2 = t - 4.5 * t2 + 6 * t3 - 2.5 * t4;
        const double d3 = 1.5 * t2 - 4 * t3 + 2.5 * t4;
        const double d4 = -12 * t2 + 28 * t3 - 15 * t4;
        const double d5 = 30 * t2 - 60 * t3 + 30 * t4;
        const double hh = h * h;
        u = p0 * h0 + h * m0 * h1 + hh * a0 * h2 + hh * a1 * h3 + h * m1 * h4 + p1 * h5;
        du = (p0 * d0 + h * m0 * d1 + hh * a0 * d2 + hh * a1 * d3 + h * m1 * d4 + p1 * d5) / h;
    }

    cplx value(double r) const {
        cplx u, du;
        evaluate(r, u, du);
        return u;
    }

    /// Evaluation from the cylinder functions, bypassing the table.
    void evaluate_direct(double r, cplx& u, cplx& du) const {
        if (r <= 0.0) {
            u = du = 0.0;
            return;
        }
        direct(region_for(r), r, u, du);
    }

    void scale(cplx s) {
        for (Region& reg : regions) {
            for (Term& t : reg.terms) t.coef *= s;
            for (cplx& v : reg.u) v *= s;
            for (cplx& v : reg.du) v *= s;
        }
    }

    double table_end() const { return regions.empty() ? 0.0 : regions.back().r_hi; }

private:
    const Region& region_for(double r) const {
        for (const Region& reg : regions) {
            if (r <= reg.r_hi) return reg;
        }
        return regions.back();
    }

    cplx second_derivative(const Region& reg, double r, cplx u, cplx du) const {
        const cplx nk2 = std::pow(reg.index * k, 2);
        return -du / r - (nk2 - nu * nu / (r * r)) * u;
    }

    specfun::ScaledValue basis(const Term& t, double x) const {
        if (t.bessel_j) return specfun::bessel_j_scaled(nu, x);
        return radiation == Radiation::outgoing ? specfun::hankel2_scaled(nu, x)
                                                : specfun::hankel1_scaled(nu, x);
    }

    void direct(const Region& reg, double r, cplx& u, cplx& du) const {
        u = du = 0.0;
        const double nk = reg.index * k;
        for (const Term& t : reg.terms) {
            const specfun::ScaledValue f = basis(t, nk * r);
            const double e = f.log_scale - t.reference.log_scale;
            if (e < -700.0) continue;
            const cplx s = t.coef * std::exp(e) / t.reference.value;
            u += s * f.value;
            du += s * f.derivative * nk;
        }
    }
};

/// A solved bend mode.
struct BendMode {
    int radial_order = 0;
    cplx gamma;           ///< nu / R, rad/um
    cplx angular_order;   ///< nu
    double wavelength = 0.0;
    BendGeometry geometry;
    /// Region coefficients of the normalized profile (interior to exterior).
    std::vector<cplx> radial_coefficients;
    double normalization = 0.0;  ///< |scale| applied to reach unit flux
    std::vector<NewtonStep> newton_trace;
    std::shared_ptr<const RadialProfile> profile;

    double effective_index() const { return gamma.real() / wavenumber(wavelength); }
};

/// Numerical controls of mode solving and profile tabulation.
struct BendSolverOptions {
    double table_step = 0.005;   ///< um, fine radial table step
    double table_radius = 0.0;   ///< um, end of the fine table; 0 = 1.5 R + 6
    double coarse_step = 0.05;   ///< um, step of the far exterior table
    double root_tolerance = 1e-8;
};

namespace detail {

using specfun::ScaledValue;

inline ScaledValue outer_function(cplx nu, double x, Radiation rad) {
    return rad == Radiation::outgoing ? specfun::hankel2_scaled(nu, x)
                                      : specfun::hankel1_scaled(nu, x);
}

/// a / b for scaled values.
inline cplx ratio(const ScaledValue& a, const ScaledValue& b) {
    const double e = a.log_scale - b.log_scale;
    if (e < -700.0) return 0.0;
    return a.value / b.value * std::exp(e);
}

/// Normalized 2x2 interface system of a ring, plus the scaled basis values.
struct RingSystem {
    cplx m11, m12, m21, m22;
    cplx rho_j, rho_h;  // J(x1)/J(x2), H(x2)/H(x1)
    ScaledValue jb1, jc1, jc2, hc1, hc2, hb;
};

inline RingSystem ring_system(const BendGeometry& g, double k, cplx nu, Radiation rad) {
    const double rho = g.inner_radius(), R = g.radius;
    const double nc = g.core_index, nb = g.background_index;
    RingSystem s;
    s.jb1 = specfun::bessel_j_scaled(nu, nb * k * rho);
    s.jc1 = specfun::bessel_j_scaled(nu, nc * k * rho);
    s.jc2 = specfun::bessel_j_scaled(nu, nc * k * R);
    s.hc1 = outer_function(nu, nc * k * rho, rad);
    s.hc2 = outer_function(nu, nc * k * R, rad);
    s.hb = outer_function(nu, nb * k * R, rad);
    const cplx l1 = nb * s.jb1.log_derivative();
    const cplx l3 = nb * s.hb.log_derivative();
    s.rho_j = ratio(s.jc1, s.jc2);
    s.rho_h = ratio(s.hc2, s.hc1);
    s.m11 = s.rho_j * (nc * s.jc1.log_derivative() - l1);
    s.m12 = nc * s.hc1.log_derivative() - l1;
    s.m21 = nc * s.jc2.log_derivative() - l3;
    s.m22 = s.rho_h * (nc * s.hc2.log_derivative() - l3);
    return s;
}

}  // namespace detail

/// Scaled residual of the interface conditions; zero exactly at modal nu.
///
/// Disk: n_c J'(n_c k R)/J - n_b H'(n_b k R)/H. Ring: determinant of the
/// two-interface system with rows divided by the dominant basis values.
inline cplx dispersion_residual(const BendGeometry& g, double wavelength, cplx nu,
                                Radiation rad = Radiation::outgoing) {
    const double k = wavenumber(wavelength);
    if (g.is_disk()) {
        const auto j = specfun::bessel_j_scaled(nu, g.core_index * k * g.radius);
        const auto h = detail::outer_function(nu, g.background_index * k * g.radius, rad);
        return g.core_index * j.log_derivative() - g.background_index * h.log_derivative();
    }
    const detail::RingSystem s = detail::ring_system(g, k, nu, rad);
    return s.m11 * s.m22 - s.m12 * s.m21;
}

/// exp(-i gamma L): propagation of a bend mode along an arc of length L at r = R.
inline cplx segment_phase(const BendMode& m, double arc_length) {
    if (!(arc_length >= 0.0)) throw ValidationError("segment_phase: arc length must be >= 0");
    return std::exp(cplx(0.0, -1.0) * m.gamma * arc_length);
}

/// E_y, H_x, H_z of a bend mode at (x, z) for a cavity centred at `center`.
///
/// theta is the polar angle of (x - x_c, z - z_c), taken in
/// (reference_angle - pi, reference_angle + pi]; for non-integer nu the
/// factor exp(-i nu theta) jumps across the opposite ray, so callers place
/// reference_angle inside the region they sample. The mode travels towards
/// increasing theta.
inline FieldComponents evaluate_bend_field(const BendMode& m, double x, double z, Point center = {},
                                           double reference_angle = 0.0) {
    const double dx = x - center.x, dz = z - center.z;
    const double r = std::hypot(dx, dz);
    if (r == 0.0) throw ValidationError("evaluate_bend_field: point coincides with the cavity centre");
    const double c0 = std::cos(reference_angle), s0 = std::sin(reference_angle);
    const double theta = reference_angle + std::atan2(dz * c0 - dx * s0, dx * c0 + dz * s0);
    cplx u, du;
    m.profile->evaluate(r, u, du);
    const cplx nu = m.angular_order;
    const cplx ang = std::exp(cplx(0.0, -1.0) * nu * theta);
    const double c = dx / r, s = dz / r;
    const cplx i(0.0, 1.0);
    const cplx ddx = (du * c + i * nu * s * u / r) * ang;
    const cplx ddz = (du * s - i * nu * c * u / r) * ang;
    const double k = wavenumber(m.wavelength);
    return {u * ang, -i / k * ddz, i / k * ddx};
}

namespace detail {

/// Tabulates every term of a region by continuing each basis function in its
/// stable direction (J outward from r_lo, Hankel inward from r_hi).
inline void tabulate(RadialProfile& p, RadialProfile::Region& reg, double target_step) {
    const int n = std::max(2, static_cast<int>(std::ceil((reg.r_hi - reg.r_lo) / target_step)));
    reg.step = (reg.r_hi - reg.r_lo) / n;
    reg.u.assign(n + 1, 0.0);
    reg.du.assign(n + 1, 0.0);
    const double nk = reg.index * p.k;
    for (const auto& t : reg.terms) {
        if (t.coef == 0.0) continue;
        const bool outward = t.bessel_j;
        const int first = outward ? 0 : n;
        const int dir = outward ? 1 : -1;
        auto at = [&](int i) { return reg.r_lo + i * reg.step; };
        ScaledValue s = t.bessel_j ? specfun::bessel_j_scaled(p.nu, nk * at(first))
                                   : outer_function(p.nu, nk * at(first), p.radiation);
        for (int i = first;; i += dir) {
            if (i != first) specfun::continue_solution(p.nu, nk * at(i - dir), nk * at(i), s);
            const double e = s.log_scale - t.reference.log_scale;
            if (e > -700.0) {
                const cplx f = t.coef * std::exp(e) / t.reference.value;
                reg.u[i] += f * s.value;
                reg.du[i] += f * s.derivative * nk;
            }
            if (i == n - first) break;
        }
    }
}

/// Radial order: number of interior minima of |u| on (r_lo, R). For complex nu
/// the standing wave never vanishes exactly, so minima are often shallow;
/// those in the evanescent core (lobes below 1% of the peak) are ignored.
inline int count_radial_nodes(const RadialProfile& p, double r_lo, double radius) {
    constexpr int kSamples = 4000;
    std::vector<double> a(kSamples + 1);
    for (int j = 0; j <= kSamples; ++j) {
        a[j] = std::abs(p.value(r_lo + (radius - r_lo) * j / kSamples));
    }
    std::vector<double> left(kSamples + 1), right(kSamples + 1);
    left[0] = a[0];
    for (int j = 1; j <= kSamples; ++j) left[j] = std::max(left[j - 1], a[j]);
    right[kSamples] = a[kSamples];
    for (int j = kSamples - 1; j >= 0; --j) right[j] = std::max(right[j + 1], a[j]);
    const double floor = 1e-2 * left[kSamples];
    int nodes = 0;
    for (int j = 1; j < kSamples; ++j) {
        const double lobe = std::min(left[j], right[j]);
        if (a[j] < a[j - 1] && a[j] <= a[j + 1] && lobe > floor && a[j] < 0.95 * lobe) {
            ++nodes;
        }
    }
    return nodes;
}

/// Builds, tabulates and normalizes the radial profile of a root nu.
inline std::shared_ptr<RadialProfile> build_profile(const BendGeometry& g, double wavelength,
                                                    cplx nu, const BendSolverOptions& opt,
                                                    std::vector<cplx>& coefficients) {
    auto p = std::make_shared<RadialProfile>();
    p->nu = nu;
    p->k = wavenumber(wavelength);
    p->radiation = Radiation::outgoing;
    const double k = p->k, R = g.radius, nc = g.core_index, nb = g.background_index;
    const double r_min = std::min(opt.table_step, 0.5 * (g.is_disk() ? R : g.inner_radius()));
    const double r_fine = opt.table_radius > 0.0 ? std::max(opt.table_radius, R + opt.table_step)
                                                 : 1.5 * R + 6.0;
    const double x_far = std::min(4.0 * std::abs(nu) + 20.0, 0.98 * specfun::kMaxArgument);
    const double r_far = std::max(r_fine + 1.0, x_far / (nb * k));

    using Region = RadialProfile::Region;
    using Term = RadialProfile::Term;
    cplx u_ext;  // amplitude at the rim
    if (g.is_disk()) {
        const ScaledValue ja = specfun::bessel_j_scaled(nu, nc * k * R);
        const ScaledValue hb = outer_function(nu, nb * k * R, Radiation::outgoing);
        p->regions.push_back(Region{r_min, R, nc, {Term{true, 1.0, ja}}, 0.0, {}, {}});
        u_ext = 1.0;
        coefficients = {1.0, 1.0};
        p->regions.push_back(Region{R, r_fine, nb, {Term{false, u_ext, hb}}, 0.0, {}, {}});
        p->regions.push_back(Region{r_fine, r_far, nb, {Term{false, u_ext, hb}}, 0.0, {}, {}});
    } else {
        const RingSystem s = ring_system(g, k, nu, Radiation::outgoing);
        cplx alpha, beta;
        if (std::abs(s.m11) + std::abs(s.m12) >= std::abs(s.m21) + std::abs(s.m22)) {
            alpha = s.m12;
            beta = -s.m11;
        } else {
            alpha = s.m22;
            beta = -s.m21;
        }
        const double rho = g.inner_radius();
        const cplx u_rho = alpha * s.rho_j + beta;
        u_ext = alpha + beta * s.rho_h;
        const double rlo = std::min(r_min, 0.5 * rho);
        p->regions.push_back(Region{rlo, rho, nb, {Term{true, u_rho, s.jb1}}, 0.0, {}, {}});
        p->regions.push_back(
            Region{rho, R, nc, {Term{true, alpha, s.jc2}, Term{false, beta, s.hc1}}, 0.0, {}, {}});
        p->regions.push_back(Region{R, r_fine, nb, {Term{false, u_ext, s.hb}}, 0.0, {}, {}});
        p->regions.push_back(Region{r_fine, r_far, nb, {Term{false, u_ext, s.hb}}, 0.0, {}, {}});
        coefficients = {u_rho, alpha, beta, u_ext};
    }
    for (std::size_t i = 0; i < p->regions.size(); ++i) {
        const bool coarse = i + 1 == p->regions.size();
        tabulate(*p, p->regions[i], coarse ? opt.coarse_step : opt.table_step);
    }

    // unit azimuthal flux: int 2 Re(nu) / (k r) |u|^2 dr = 2
    double flux = 0.0;
    const double w = 2.0 * nu.real() / k;
    for (const Region& reg : p->regions) {
        for (std::size_t i = 0; i + 1 < reg.u.size(); ++i) {
            const double r0 = reg.r_lo + i * reg.step, r1 = r0 + reg.step, rm = 0.5 * (r0 + r1);
            const double f0 = std::norm(reg.u[i]) / r0, f1 = std::norm(reg.u[i + 1]) / r1;
            const double fm = std::norm(p->value(rm)) / rm;
            flux += w * reg.step / 6.0 * (f0 + 4.0 * fm + f1);
        }
    }
    // far tail: |u|^2 ~ |u(r_far)|^2 r_far / r
    flux += w * std::norm(p->regions.back().u.back());
    if (!(flux > 0.0) || !std::isfinite(flux)) {
        throw NumericalError("bend mode normalization failed (non-positive flux)");
    }
    // fix the phase so that u(R) is real and positive
    const cplx rim = p->value(R);
    const cplx phase = std::abs(rim) > 0.0 ? std::conj(rim) / std::abs(rim) : 1.0;
    const cplx sc = std::sqrt(2.0 / flux) * phase;
    p->scale(sc);
    for (cplx& c : coefficients) c *= sc;
    return p;
}

/// Newton's method with a central-difference derivative and step damping.
template <class F>
bool newton(F&& f, cplx seed, double tol, std::vector<NewtonStep>& trace, cplx& root) {
    cplx nu = seed;
    trace.clear();
    for (int it = 0; it < 60; ++it) {
        const cplx d = f(nu);
        trace.push_back({nu, std::abs(d)});
        if (!std::isfinite(std::abs(d))) return false;
        const double delta = 1e-6 * std::max(1.0, std::abs(nu));
        const cplx dd = (f(nu + delta) - f(nu - delta)) / (2.0 * delta);
        cplx step = d / dd;
        if (!std::isfinite(std::abs(step))) return false;
        const double cap = 0.1 * std::max(1.0, std::abs(nu)) / 4.0;
        if (std::abs(step) > cap) step *= cap / std::abs(step);
        nu -= step;
        if (!(nu.real() > 0.0)) return false;
        if (std::abs(step) <= 1e-13 * std::abs(nu)) {
            const double r = std::abs(f(nu));
            trace.push_back({nu, r});
            root = nu;
            return r < tol;
        }
    }
    root = nu;
    return false;
}

/// Attenuation of a root whose imaginary part is below double resolution.
///
/// With the exterior Hankel function replaced by its standing-wave part
/// (-i Y), the problem is lossless and has a real root nu_r. The exterior
/// log-derivative differs from the lossless one by exactly
///     n_b (J'Y - JY') / (Y H) ~ 2 i n_b / (pi x H(x)^2),  x = n_b k R,
/// which is evaluated in log scale; first-order perturbation then gives
/// nu = nu_r - dD/dL * delta / D'(nu_r).
inline cplx resolve_weak_loss(const BendGeometry& g, double wavelength, cplx nu) {
    const double k = wavenumber(wavelength);
    const double nb = g.background_index;
    const double x = nb * k * g.radius;
    const cplx nu_r(nu.real(), 0.0);
    const ScaledValue h = specfun::hankel2_scaled(nu_r, x);
    const double e = -2.0 * h.log_scale;
    const cplx delta = e < -740.0 ? cplx(0.0)
                                  : cplx(0.0, 2.0 * nb / (kPi * x)) / (h.value * h.value) * std::exp(e);
    cplx sensitivity = -1.0;  // dD / dL3 for the disk
    if (!g.is_disk()) {
        const RingSystem s = ring_system(g, k, nu_r, Radiation::outgoing);
        sensitivity = s.m12 - s.rho_h * s.m11;
    }
    const double step = 1e-6 * std::max(1.0, std::abs(nu));
    const cplx slope = (dispersion_residual(g, wavelength, nu_r + step) -
                        dispersion_residual(g, wavelength, nu_r - step)) / (2.0 * step);
    const cplx shift = -sensitivity * delta / slope;
    return {nu.real(), shift.imag()};
}

/// Zeros of the Airy function Ai, -a_p.
inline double airy_zero(int p) {
    static constexpr std::array<double, 10> a = {2.338107410, 4.087949444, 5.520559828,
                                                 6.786708090, 7.944133587, 9.022650853,
                                                 10.04017434, 11.00852430, 11.93601556,
                                                 12.82877675};
    if (p < 10) return a[p];
    const double t = 3.0 * kPi / 8.0 * (4.0 * (p + 1) - 1.0);
    return std::pow(t, 2.0 / 3.0) * (1.0 + 5.0 / 48.0 / (t * t));
}

/// Large-order seed for the p-th radial order of a disk of index n_c in n_b:
/// n_c k R = nu + a_p (nu/2)^(1/3) - m / sqrt(m^2 - 1), m = n_c / n_b.
inline cplx airy_seed(double x, double m, int p) {
    double nu = x;
    for (int it = 0; it < 8; ++it) {
        nu = x - airy_zero(p) * std::cbrt(std::max(nu, 1.0) / 2.0) + m / std::sqrt(m * m - 1.0);
    }
    return {std::max(nu, 0.5), -1e-3};
}

struct Candidate {
    cplx nu;
    int order;
    std::vector<NewtonStep> trace;
};

}  // namespace detail

/// Below |Im nu| / |nu| = kWeakLoss the Newton result carries no usable
/// attenuation and the perturbative estimate is used instead.
inline constexpr double kWeakLoss = 1e-9;

/// Search region of the deterministic grid scan used as fallback.
struct ScanRegion {
    double re_lo, re_hi, im_lo, im_hi, re_step, im_step;
};

inline ScanRegion default_scan_region(const BendGeometry& g, double wavelength) {
    const double x = g.core_index * wavenumber(wavelength) * g.radius;
    return {1.0, x + 3.0, -std::max(3.0, 0.08 * x), -1e-4, 0.25, 0.1};
}

/// Local minima of |residual| on a rectangular grid (deterministic order).
inline std::vector<cplx> scan_minima(const BendGeometry& g, double wavelength, const ScanRegion& s) {
    const int nr = static_cast<int>(std::ceil((s.re_hi - s.re_lo) / s.re_step)) + 1;
    const int ni = static_cast<int>(std::ceil((s.im_hi - s.im_lo) / s.im_step)) + 1;
    std::vector<double> a(static_cast<std::size_t>(nr) * ni);
    auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * ni + j]; };
    auto point = [&](int i, int j) {
        return cplx(s.re_lo + i * (s.re_hi - s.re_lo) / (nr - 1),
                    s.im_lo + j * (s.im_hi - s.im_lo) / (ni - 1));
    };
    for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < ni; ++j) {
            double v;
            try {
                v = std::abs(dispersion_residual(g, wavelength, point(i, j)));
            } catch (const NumericalError&) {
                v = std::numeric_limits<double>::infinity();
            }
            at(i, j) = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        }
    }
    std::vector<cplx> out;
    for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < ni; ++j) {
            const double v = at(i, j);
            bool minimum = std::isfinite(v);
            for (int di = -1; di <= 1 && minimum; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const int ii = i + di, jj = j + dj;
                    if (ii < 0 || jj < 0 || ii >= nr || jj >= ni) continue;
                    if (at(ii, jj) < v) {
                        minimum = false;
                        break;
                    }
                }
            }
            if (minimum) out.push_back(point(i, j));
        }
    }
    return out;
}

namespace detail {

inline BendMode make_mode(const BendGeometry& g, double wavelength, const Candidate& c,
                          std::shared_ptr<RadialProfile> profile, std::vector<cplx> coefficients) {
    BendMode m;
    m.radial_order = c.order;
    m.angular_order = c.nu;
    m.gamma = c.nu / g.radius;
    m.wavelength = wavelength;
    m.geometry = g;
    m.radial_coefficients = std::move(coefficients);
    m.normalization = std::abs(m.radial_coefficients.back());
    m.newton_trace = c.trace;
    m.profile = std::move(profile);
    return m;
}

}  // namespace detail

/// Solves the bend mode at a given angular order seed (single Newton run).
inline BendMode refine_bend_mode(const BendGeometry& g, double wavelength, cplx seed,
                                 const BendSolverOptions& opt = {}) {
    g.validate();
    auto f = [&](cplx nu) { return dispersion_residual(g, wavelength, nu); };
    detail::Candidate c;
    cplx root;
    if (!detail::newton(f, seed, opt.root_tolerance, c.trace, root)) {
        std::vector<std::string> lines;
        for (const auto& s : c.trace) {
            std::ostringstream os;
            os << "nu = " << s.nu << ", |residual| = " << s.residual;
            lines.push_back(os.str());
        }
        std::ostringstream os;
        os << "bend mode Newton search from " << seed << " did not converge";
        throw ConvergenceError(os.str(), lines);
    }
    if (std::abs(root.imag()) < kWeakLoss * std::abs(root)) {
        root = detail::resolve_weak_loss(g, wavelength, root);
    }
    c.nu = root;
    std::vector<cplx> coef;
    auto profile = detail::build_profile(g, wavelength, root, opt, coef);
    c.order = detail::count_radial_nodes(*profile, g.is_disk() ? 0.0 : g.inner_radius(), g.radius);
    return detail::make_mode(g, wavelength, c, std::move(profile), std::move(coef));
}

/// The `count` lowest radial orders p = 0 .. count-1, ordered by p.
///
/// Seeds come from the large-order Airy approximation (and, for rings, from
/// the straight slab of width w_c); if some order is still missing, a
/// deterministic grid scan of the complex plane supplies further seeds.
/// Roots are classified by their radial node count.
inline std::vector<BendMode> find_bend_modes(const BendGeometry& g, double wavelength, int count,
                                             const BendSolverOptions& opt = {}) {
    g.validate();
    if (count < 1) throw ValidationError("find_bend_modes: count must be >= 1");
    if (!(wavelength > 0.0)) throw ValidationError("find_bend_modes: wavelength must be positive");
    const double k = wavenumber(wavelength);
    const double x = g.core_index * k * g.radius;
    const double m = g.core_index / g.background_index;
    auto f = [&](cplx nu) {
        try {
            return dispersion_residual(g, wavelength, nu);
        } catch (const NumericalError&) {
            return cplx(std::numeric_limits<double>::quiet_NaN());
        }
    };

    std::vector<detail::Candidate> found;
    std::vector<std::string> log;
    auto confined = [](cplx nu) { return nu.real() > 0.0 && nu.imag() < 0.0 && -nu.imag() < 0.25 * nu.real(); };
    auto known = [&](cplx nu) {
        for (const auto& c : found) {
            if (std::abs(c.nu - nu) < 1e-6 * std::max(1.0, std::abs(nu))) return true;
        }
        return false;
    };
    auto try_seed = [&](cplx seed) {
        detail::Candidate c;
        cplx root;
        const bool ok = detail::newton(f, seed, opt.root_tolerance, c.trace, root);
        std::ostringstream os;
        os << "seed " << seed << " -> " << root << (ok ? " converged" : " failed") << " after "
           << c.trace.size() << " iterates";
        log.push_back(os.str());
        if (ok && std::abs(root.imag()) < kWeakLoss * std::abs(root)) {
            root = detail::resolve_weak_loss(g, wavelength, root);
        }
        if (!ok || !confined(root) || known(root)) return;
        c.nu = root;
        std::vector<cplx> coef;
        auto profile = detail::build_profile(g, wavelength, root, opt, coef);
        c.order = detail::count_radial_nodes(*profile, g.is_disk() ? 0.0 : g.inner_radius(), g.radius);
        found.push_back(std::move(c));
    };
    auto have_all = [&]() {
        for (int p = 0; p < count; ++p) {
            bool hit = false;
            for (const auto& c : found) hit = hit || c.order == p;
            if (!hit) return false;
        }
        return true;
    };

    std::vector<waveguide::StraightMode> slab;
    if (!g.is_disk()) {
        slab = waveguide::find_slab_modes({g.core_index, g.background_index, g.core_width}, wavelength);
    }
    for (int p = 0; p < count + 1; ++p) {
        if (p < static_cast<int>(slab.size())) {
            try_seed({slab[p].effective_index * k * (g.radius - 0.5 * g.core_width), -1e-3});
        }
        if (have_all()) break;
        try_seed(detail::airy_seed(x, m, p));
        if (have_all()) break;
    }
    if (!have_all()) {
        for (cplx seed : scan_minima(g, wavelength, default_scan_region(g, wavelength))) {
            try_seed(seed);
        }
    }

    // one mode per radial order, lowest loss first when duplicated
    std::vector<BendMode> out;
    for (int p = 0; p < count; ++p) {
        const detail::Candidate* best = nullptr;
        for (const auto& c : found) {
            if (c.order == p && (!best || c.nu.imag() > best->nu.imag())) best = &c;
        }
        if (!best) {
            int distinct = 0;
            for (int q = 0; q < 1000; ++q) {
                bool hit = false;
                for (const auto& c : found) hit = hit || c.order == q;
                if (hit) ++distinct;
            }
            std::ostringstream os;
            os << "requested " << count << " bend modes but only " << distinct
               << " well-confined radial orders exist (missing order " << p << ")";
            throw InsufficientModesError(os.str(), distinct);
        }
        std::vector<cplx> coef;
        auto profile = detail::build_profile(g, wavelength, best->nu, opt, coef);
        out.push_back(detail::make_mode(g, wavelength, *best, std::move(profile), std::move(coef)));
    }
    return out;
}

}  // namespace mrcmt::bendmode
