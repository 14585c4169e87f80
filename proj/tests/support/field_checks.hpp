/**
 * @file field_checks.hpp
 * @brief Field-map diagnostics shared by the resonator tests and the
 *        acceptance runner.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mrcmt/resonator.hpp"

namespace checks {

using mrcmt::resonator::DeviceSolution;
using mrcmt::resonator::FieldMap;
using mrcmt::resonator::GridSpec;

/// Largest jump of E_y across the seams z = +-z_o, relative to the largest
/// |E_y| on the seam lines, over x in [-x_max, x_max].
inline double seam_jump(const DeviceSolution& s, double x_max, int n = 400) {
    const double zo = s.coupler1.geometry.z_out;
    double jump = 0.0, scale = 0.0;
    for (double seam : {zo, -zo}) {
        GridSpec g{-x_max, x_max, seam - 1e-9, seam + 1e-9, n, 2};
        const FieldMap m = mrcmt::resonator::compose_field_map(s, g);
        for (int i = 0; i < n; ++i) {
            jump = std::max(jump, std::abs(m.values(1, i) - m.values(0, i)));
            scale = std::max({scale, std::abs(m.values(0, i)), std::abs(m.values(1, i))});
        }
    }
    return scale > 0.0 ? jump / scale : 0.0;
}

/// Depth of the radial minimum of |E_y| between the centre and the rim
/// along the ray at angle theta: min(|E| at the dip) / (smaller of the two
/// flanking maxima). Returns 1 when there is no interior dip.
inline double radial_dip(const FieldMap& m, double theta, double radius) {
    std::vector<double> prof;
    const double dr = 0.02;
    for (double r = 0.5; r <= radius; r += dr) {
        const double x = r * std::cos(theta), z = r * std::sin(theta);
        const auto ix = std::lower_bound(m.x.begin(), m.x.end(), x) - m.x.begin();
        const auto iz = std::lower_bound(m.z.begin(), m.z.end(), z) - m.z.begin();
        const auto cx = std::clamp<long>(ix, 1, static_cast<long>(m.x.size()) - 1);
        const auto cz = std::clamp<long>(iz, 1, static_cast<long>(m.z.size()) - 1);
        // bilinear interpolation of |E|
        const double tx = (x - m.x[cx - 1]) / (m.x[cx] - m.x[cx - 1]);
        const double tz = (z - m.z[cz - 1]) / (m.z[cz] - m.z[cz - 1]);
        auto a = [&](long j, long i) { return std::abs(m.values(j, i)); };
        prof.push_back((1 - tz) * ((1 - tx) * a(cz - 1, cx - 1) + tx * a(cz - 1, cx)) +
                       tz * ((1 - tx) * a(cz, cx - 1) + tx * a(cz, cx)));
    }
    const std::size_t peak = std::max_element(prof.begin(), prof.end()) - prof.begin();
    double best = 1.0;
    for (std::size_t i = 1; i + 1 < prof.size(); ++i) {
        if (!(prof[i] <= prof[i - 1] && prof[i] <= prof[i + 1])) continue;
        const double inner = *std::max_element(prof.begin(), prof.begin() + i);
        const double outer = *std::max_element(prof.begin() + i, prof.end());
        const double flank = std::min(inner, outer);
        if (flank < 0.05 * prof[peak]) continue;  // evanescent core ripple
        best = std::min(best, prof[i] / flank);
    }
    return best;
}

/// Fraction of rays (n evenly spaced angles) with a radial dip deeper than
/// `depth`; a closed nodal contour shows up on every ray.
inline double nodal_ray_fraction(const FieldMap& m, double radius, double depth = 0.5, int n = 36) {
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        if (radial_dip(m, 2.0 * mrcmt::kPi * i / n, radius) < depth) ++hits;
    }
    return static_cast<double>(hits) / n;
}

/// Largest |E_y| on the core centre line of the through (x > 0) and drop
/// (x < 0) waveguides, over |z| <= z_max.
inline std::pair<double, double> port_field_maxima(const DeviceSolution& s, double z_max, int n = 401) {
    const double xt = 0.5 * (s.coupler1.geometry.core_lo + s.coupler1.geometry.core_hi);
    const double xd = -0.5 * (s.coupler2.geometry.core_lo + s.coupler2.geometry.core_hi);
    const FieldMap t = mrcmt::resonator::compose_field_map(s, GridSpec{xt - 1e-9, xt, -z_max, z_max, 2, n});
    const FieldMap d = mrcmt::resonator::compose_field_map(s, GridSpec{xd, xd + 1e-9, -z_max, z_max, 2, n});
    return {t.values.cwiseAbs().maxCoeff(), d.values.cwiseAbs().maxCoeff()};
}

}  // namespace checks

namespace checks {

/// A closed circular nodal line: every one of 72 rays crosses a radial
/// minimum of |E_y| at most 0.7 of its flanking maxima inside the rim.
inline bool has_circular_nodal_line(const FieldMap& m, double radius) {
    return nodal_ray_fraction(m, radius, 0.7, 72) == 1.0;
}

}  // namespace checks
