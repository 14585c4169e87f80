/**
 * @file common.hpp
 *
 * @brief Shared scalar types, constants and field containers.
 *
 * Conventions used throughout mrcmt:
 *  - time dependence exp(+i omega t), propagation exp(-i beta z);
 *  - 2D TE fields: principal component E_y, magnetic components H_x, H_z;
 *  - magnetic fields are returned multiplied by the vacuum impedance Z0,
 *    i.e. H = (i / k) curl E with k = 2 pi / lambda, so E and H share units;
 *  - all lengths and wavelengths in micrometres, propagation constants in
 *    rad/um.
 */

#pragma once

#include <complex>
#include <numbers>

namespace mrcmt {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Vacuum wavenumber 2 pi / lambda.
inline double wavenumber(double wavelength) { return 2.0 * kPi / wavelength; }

/// TE field sample: E_y and Z0-scaled H_x, H_z.
struct FieldComponents {
    cplx ey{};
    cplx hx{};
    cplx hz{};
};

/// A point of the (x, z) simulation plane.
struct Point {
    double x = 0.0;
    double z = 0.0;
};

}  // namespace mrcmt
