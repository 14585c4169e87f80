/**
 * @file waveguide.hpp
 *
 * @brief Guided TE modes of the symmetric three-layer slab waveguide.
 *
 * A core of index n_s and width w_s sits in a background of index n_b. With
 * kappa = k sqrt(n_s^2 - n^2) and g = k sqrt(n^2 - n_b^2) the q-th TE mode
 * satisfies
 *
 *     kappa w = q pi + 2 atan(g / kappa),
 *
 * whose left minus right side is strictly decreasing in the effective index
 * n on (n_b, n_s). Each root is bracketed by bisection and polished by
 * Newton's method.
 *
 * Modes are normalized to unit z-directed flux in the Z0-scaled sense,
 * (beta / k) * int |E_y|^2 dx = 1, so the symmetric bracket of a mode with
 * itself equals 2.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mrcmt/common.hpp"
#include "mrcmt/errors.hpp"

namespace mrcmt::waveguide {

/// Symmetric slab: core index n_s, background n_b, width w_s (um).
struct SlabGeometry {
    double core_index = 1.5;
    double background_index = 1.0;
    double width = 0.4;

    void validate() const {
        if (!(background_index >= 1.0)) {
            throw ValidationError("slab: background_index must be >= 1");
        }
        if (!(core_index > background_index)) {
            throw ValidationError("slab: core_index must exceed background_index");
        }
        if (!(width > 0.0) || !std::isfinite(width)) {
            throw ValidationError("slab: width must be positive");
        }
    }

    bool operator==(const SlabGeometry&) const = default;
};

/// One guided TE mode, placed with its core centred at x = center.
struct StraightMode {
    int order = 0;
    double propagation_constant = 0.0;  ///< beta (rad/um)
    double effective_index = 0.0;       ///< beta / k
    double wavelength = 0.0;            ///< um
    double kappa = 0.0;                 ///< transverse wavenumber in the core
    double decay = 0.0;                 ///< cladding decay constant
    double amplitude = 0.0;             ///< core amplitude after normalization
    double normalization = 0.0;         ///< int |E_y|^2 dx (equals 1 / n_eff)
    double center = 0.0;                ///< x of the core centre
    SlabGeometry geometry;

    double half_width() const { return 0.5 * geometry.width; }

    /// Transverse profile E_y(x) at z = 0.
    double profile(double x) const {
        const double u = x - center;
        const double d = half_width();
        const bool even = order % 2 == 0;
        if (std::abs(u) <= d) {
            return amplitude * (even ? std::cos(kappa * u) : std::sin(kappa * u));
        }
        const double edge = even ? std::cos(kappa * d) : std::sin(kappa * d);
        const double sign = (!even && u < 0.0) ? -1.0 : 1.0;
        return sign * amplitude * edge * std::exp(-decay * (std::abs(u) - d));
    }

    /// dE_y/dx at z = 0.
    double profile_derivative(double x) const {
        const double u = x - center;
        const double d = half_width();
        const bool even = order % 2 == 0;
        if (std::abs(u) <= d) {
            return amplitude * kappa * (even ? -std::sin(kappa * u) : std::cos(kappa * u));
        }
        const double edge = even ? std::cos(kappa * d) : std::sin(kappa * d);
        const double sign = (!even && u < 0.0) ? -1.0 : 1.0;
        const double side = u < 0.0 ? 1.0 : -1.0;
        return side * decay * sign * amplitude * edge * std::exp(-decay * (std::abs(u) - d));
    }

    /// Copy of the mode with its core centred at x.
    StraightMode centered_at(double x) const {
        StraightMode m = *this;
        m.center = x;
        return m;
    }
};

namespace detail {

struct SlabParameters {
    double k, kappa, decay;
};

inline SlabParameters slab_parameters(const SlabGeometry& g, double k, double n) {
    const double ns2 = g.core_index * g.core_index, nb2 = g.background_index * g.background_index;
    return {k, k * std::sqrt(std::max(0.0, ns2 - n * n)), k * std::sqrt(std::max(0.0, n * n - nb2))};
}

/// kappa w - q pi - 2 atan(g / kappa); strictly decreasing in n.
inline double dispersion(const SlabGeometry& g, double k, int q, double n) {
    const SlabParameters p = slab_parameters(g, k, n);
    return p.kappa * g.width - q * kPi - 2.0 * std::atan2(p.decay, p.kappa);
}

inline double dispersion_derivative(const SlabGeometry& g, double k, double n) {
    const SlabParameters p = slab_parameters(g, k, n);
    const double dkappa = -k * k * n / p.kappa;
    const double ddecay = k * k * n / p.decay;
    const double datan = (p.kappa * ddecay - p.decay * dkappa) / (p.kappa * p.kappa + p.decay * p.decay);
    return dkappa * g.width - 2.0 * datan;
}

}  // namespace detail

/// Normalized frequency V = k w sqrt(n_s^2 - n_b^2).
inline double v_number(const SlabGeometry& g, double wavelength) {
    return wavenumber(wavelength) * g.width *
           std::sqrt(g.core_index * g.core_index - g.background_index * g.background_index);
}

/// Number of guided TE modes: the smallest integer >= V / pi.
inline int guided_mode_count(const SlabGeometry& g, double wavelength) {
    return static_cast<int>(std::ceil(v_number(g, wavelength) / kPi));
}

/// Residual of the TE dispersion relation for a given mode.
inline double dispersion_residual(const StraightMode& m) {
    return detail::dispersion(m.geometry, wavenumber(m.wavelength), m.order, m.effective_index);
}

/// All guided TE modes ordered by descending effective index, core centred at x = 0.
inline std::vector<StraightMode> find_slab_modes(const SlabGeometry& g, double wavelength) {
    g.validate();
    if (!(wavelength > 0.0) || !std::isfinite(wavelength)) {
        throw ValidationError("slab: wavelength must be positive");
    }
    const double k = wavenumber(wavelength);
    const int count = guided_mode_count(g, wavelength);
    std::vector<StraightMode> modes;
    for (int q = 0; q < count; ++q) {
        double lo = g.background_index, hi = g.core_index;  // f(lo) > 0 > f(hi)
        if (!(detail::dispersion(g, k, q, lo) > 0.0)) break;  // at cutoff
        for (int it = 0; it < 60 && hi - lo > 1e-9 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (detail::dispersion(g, k, q, mid) > 0.0 ? lo : hi) = mid;
        }
        double n = 0.5 * (lo + hi);
        for (int it = 0; it < 20; ++it) {
            const double f = detail::dispersion(g, k, q, n);
            if (f == 0.0) break;
            double next = n - f / detail::dispersion_derivative(g, k, n);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            (detail::dispersion(g, k, q, next) > 0.0 ? lo : hi) = next;
            const bool done = std::abs(next - n) <= 1e-16 * n;
            n = next;
            if (done) break;
        }
        const detail::SlabParameters p = detail::slab_parameters(g, k, n);
        StraightMode m;
        m.order = q;
        m.effective_index = n;
        m.propagation_constant = k * n;
        m.wavelength = wavelength;
        m.kappa = p.kappa;
        m.decay = p.decay;
        m.geometry = g;
        const double d = 0.5 * g.width;
        const bool even = q % 2 == 0;
        const double edge = even ? std::cos(p.kappa * d) : std::sin(p.kappa * d);
        const double core = d + (even ? 1.0 : -1.0) * std::sin(2.0 * p.kappa * d) / (2.0 * p.kappa);
        const double unit_power = core + edge * edge / p.decay;  // int profile^2 at amplitude 1
        m.amplitude = 1.0 / std::sqrt(n * unit_power);
        m.normalization = 1.0 / n;
        modes.push_back(m);
    }
    if (modes.empty()) {
        throw NumericalError("slab: no guided TE mode found (fundamental mode must exist)");
    }
    return modes;
}

/// E_y, H_x, H_z of a straight mode at (x, z), including exp(-i beta z).
inline FieldComponents evaluate_straight_field(const StraightMode& m, double x, double z) {
    const double k = wavenumber(m.wavelength);
    const cplx phase = std::exp(cplx(0.0, -m.propagation_constant * z));
    const cplx ey = m.profile(x) * phase;
    return {ey, -m.effective_index * ey, cplx(0.0, 1.0 / k) * m.profile_derivative(x) * phase};
}

namespace detail {

/// int_{-d}^{d} of cos*cos (even) or sin*sin (odd) core profiles.
inline double core_product_integral(bool even_i, double ki, bool even_j, double kj, double d) {
    if (even_i != even_j) return 0.0;
    auto sinc_int = [d](double s) {  // int_{-d}^{d} cos(s u) du
        return std::abs(s) < 1e-12 ? 2.0 * d : 2.0 * std::sin(s * d) / s;
    };
    // cos a cos b = (cos(a-b) + cos(a+b))/2, sin a sin b = (cos(a-b) - cos(a+b))/2
    const double sign = even_i ? 1.0 : -1.0;
    return 0.5 * (sinc_int(ki - kj) + sign * sinc_int(ki + kj));
}

}  // namespace detail

/// int E_y^i E_y^j dx at z = 0, in closed form (same slab and centre).
inline double profile_overlap(const StraightMode& a, const StraightMode& b) {
    if (!(a.geometry == b.geometry) || a.center != b.center) {
        throw ValidationError("straight overlap: modes belong to different waveguides");
    }
    const bool ea = a.order % 2 == 0, eb = b.order % 2 == 0;
    if (ea != eb) return 0.0;
    const double d = a.half_width();
    const double core = detail::core_product_integral(ea, a.kappa, eb, b.kappa, d);
    const double edge_a = ea ? std::cos(a.kappa * d) : std::sin(a.kappa * d);
    const double edge_b = eb ? std::cos(b.kappa * d) : std::sin(b.kappa * d);
    const double clad = 2.0 * edge_a * edge_b / (a.decay + b.decay);
    return a.amplitude * b.amplitude * (core + clad);
}

/// Symmetric power bracket <i; j> = -int (E_y^i conj(H_x^j) + conj(E_y^j) H_x^i) dx at z = 0.
inline cplx straight_overlap(const StraightMode& i, const StraightMode& j) {
    if (std::abs(i.wavelength - j.wavelength) > 1e-12 * std::max(i.wavelength, j.wavelength)) {
        std::ostringstream os;
        os << "straight overlap: wavelength mismatch (" << i.wavelength << " vs "
           << j.wavelength << " um)";
        throw ValidationError(os.str());
    }
    // H_x = -n_eff E_y for real profiles
    return (i.effective_index + j.effective_index) * profile_overlap(i, j);
}

}  // namespace mrcmt::waveguide
