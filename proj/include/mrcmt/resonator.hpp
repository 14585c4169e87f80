/**
 * @file resonator.hpp
 *
 * @brief Closed-loop add/drop microresonator: two couplers joined by cavity
 *        arcs, wavelength scans, resonance location and field maps.
 *
 * Global frame: the cavity is centred at the origin and its modes circulate
 * counter-clockwise. Coupler I sits at theta = 0 with the input/through
 * waveguide at x = R + g1 carrying light towards +z. Coupler II sits at
 * theta = pi with the add/drop waveguide at x = -(R + g2) carrying light
 * towards -z; its local frame is the global one rotated by pi.
 *
 * Port amplitudes of both couplers are related by
 *
 *     [b; B] = S1 [a; A],   [d; D] = S2 [c; C],
 *     c = P1 b,             a = P2 d,        P = diag(exp(-i gamma L)).
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "mrcmt/bendmode.hpp"
#include "mrcmt/coupler.hpp"
#include "mrcmt/errors.hpp"
#include "mrcmt/waveguide.hpp"

namespace mrcmt::resonator {

using bendmode::BendGeometry;
using bendmode::BendMode;
using coupler::Matrix;
using waveguide::SlabGeometry;
using waveguide::StraightMode;
using Vector = Eigen::VectorXcd;

/// Device description and numerical controls.
struct ResonatorConfig {
    BendGeometry bend{5.0, 1.5, 1.0, 0.0};
    SlabGeometry slab{1.5, 1.0, 0.4};
    double gap1 = 0.2;
    double gap2 = 0.2;
    coupler::CouplerNumerics numerics;
    int n_bend_modes = 3;
    int n_straight_modes = 1;
    /// Radial orders of the cavity modes to keep; empty means 0 .. N_b - 1.
    std::vector<int> bend_orders;

    /// z_o = -z_i of both coupler windows.
    double half_length() const {
        return numerics.half_length > 0.0 ? numerics.half_length : coupler::kDefaultHalfLength * bend.radius;
    }

    std::vector<int> selected_orders() const {
        if (!bend_orders.empty()) return bend_orders;
        std::vector<int> out(static_cast<std::size_t>(std::max(n_bend_modes, 0)));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
        return out;
    }

    void validate() const {
        bend.validate();
        slab.validate();
        if (!(gap1 > 0.0) || !(gap2 > 0.0)) throw ValidationError("resonator: gaps must be positive");
        if (n_bend_modes < 1 || n_straight_modes < 1) throw ValidationError("resonator: N_b and N_s must be >= 1");
        if (!bend_orders.empty()) {
            if (static_cast<int>(bend_orders.size()) != n_bend_modes) {
                throw ValidationError("resonator: bend_orders must list exactly N_b radial orders");
            }
            std::vector<int> sorted = bend_orders;
            std::sort(sorted.begin(), sorted.end());
            if (sorted.front() < 0 || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                throw ValidationError("resonator: bend_orders must be distinct and non-negative");
            }
        }
    }
};

/// Exterior cavity arcs between the coupler windows.
struct SegmentLengths {
    double l1 = 0.0;
    double l2 = 0.0;
    double window_angle = 0.0;  ///< theta_w = asin(z_o / R)
};

/// L1 = L2 = R (pi - 2 theta_w); windows may touch (z_o = R) but not overlap.
inline SegmentLengths segment_lengths(const ResonatorConfig& cfg) {
    const double zo = cfg.half_length();
    const double r = cfg.bend.radius;
    if (!(zo > 0.0) || zo > r) {
        std::ostringstream os;
        os << "resonator: coupler half-length " << zo << " um must lie in (0, R = " << r
           << "] um, otherwise the coupler windows overlap";
        throw ValidationError(os.str());
    }
    SegmentLengths s;
    s.window_angle = std::asin(zo / r);
    s.l1 = s.l2 = r * (kPi - 2.0 * s.window_angle);
    return s;
}

/// Port amplitudes of one loop solve.
struct LoopSolution {
    double wavelength = 0.0;
    Vector input, add, through, drop;  ///< A, C, B, D
    Vector a, b, c, d;                 ///< cavity amplitudes at the coupler ports
    double residual = 0.0;             ///< max residual of the loop equations / amplitude scale
};

namespace detail {

inline double loop_residual(const Matrix& s1, const Matrix& s2, const Vector& p1, const Vector& p2,
                            const LoopSolution& x) {
    const Eigen::Index nb = x.a.size();
    Vector in1(s1.rows()), in2(s2.rows());
    in1 << x.a, x.input;
    in2 << x.c, x.add;
    const Vector out1 = s1 * in1, out2 = s2 * in2;
    double r = 0.0;
    r = std::max(r, (out1.head(nb) - x.b).cwiseAbs().maxCoeff());
    r = std::max(r, (out1.tail(out1.size() - nb) - x.through).cwiseAbs().maxCoeff());
    r = std::max(r, (out2.head(nb) - x.d).cwiseAbs().maxCoeff());
    r = std::max(r, (out2.tail(out2.size() - nb) - x.drop).cwiseAbs().maxCoeff());
    r = std::max(r, (p1.cwiseProduct(x.b) - x.c).cwiseAbs().maxCoeff());
    r = std::max(r, (p2.cwiseProduct(x.d) - x.a).cwiseAbs().maxCoeff());
    const double scale = std::max({x.input.cwiseAbs().maxCoeff(), x.add.cwiseAbs().maxCoeff(),
                                   x.a.cwiseAbs().maxCoeff(), x.d.cwiseAbs().maxCoeff()});
    return scale > 0.0 ? r / scale : r;
}

}  // namespace detail

/// Solves the loop equations for given coupler matrices and inputs A, C.
inline LoopSolution solve_loop(const coupler::ScatteringMatrix& s1, const coupler::ScatteringMatrix& s2,
                               const std::vector<BendMode>& bends, double l1, double l2, const Vector& input,
                               const Vector& add) {
    const Eigen::Index nb = static_cast<Eigen::Index>(bends.size());
    const Eigen::Index ns = input.size();
    if (nb == 0 || s1.entries.rows() != nb + ns || s2.entries.rows() != nb + ns || add.size() != ns ||
        s1.n_bend != nb || s2.n_bend != nb) {
        throw ValidationError("solve_loop: inconsistent dimensions of S matrices, modes and inputs");
    }
    const double lambda = bends.front().wavelength;
    auto same = [lambda](double l) { return std::abs(l - lambda) <= 1e-12 * lambda; };
    if (!same(s1.wavelength) || !same(s2.wavelength)) throw ValidationError("solve_loop: wavelength mismatch");
    if (!(l1 >= 0.0) || !(l2 >= 0.0)) throw ValidationError("solve_loop: segment lengths must be >= 0");

    Vector p1(nb), p2(nb);
    for (Eigen::Index p = 0; p < nb; ++p) {
        p1(p) = bendmode::segment_phase(bends[p], l1);
        p2(p) = bendmode::segment_phase(bends[p], l2);
    }
    const Matrix& e1 = s1.entries;
    const Matrix& e2 = s2.entries;
    const Matrix s1_bb = e1.topLeftCorner(nb, nb), s1_bA = e1.topRightCorner(nb, ns);
    const Matrix s1_Bb = e1.bottomLeftCorner(ns, nb), s1_BA = e1.bottomRightCorner(ns, ns);
    const Matrix s2_dc = e2.topLeftCorner(nb, nb), s2_dC = e2.topRightCorner(nb, ns);
    const Matrix s2_Dc = e2.bottomLeftCorner(ns, nb), s2_DC = e2.bottomRightCorner(ns, ns);

    // a = P2 (S2_dc P1 (S1_bb a + S1_bA A) + S2_dC C)
    const Matrix round = p2.asDiagonal() * s2_dc * p1.asDiagonal();
    const Matrix sys = Matrix::Identity(nb, nb) - round * s1_bb;
    const Vector rhs = round * (s1_bA * input) + p2.asDiagonal() * (s2_dC * add);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Matrix>(sys).singularValues();
    if (!(sv(sv.size() - 1) > 1e-13 * std::max(1.0, sv(0)))) {
        std::ostringstream os;
        os << "solve_loop: singular loop system (I - G) at lambda = " << lambda
           << " um; unit loop gain is impossible for lossy cavity modes";
        throw ConditioningError(os.str());
    }

    LoopSolution x;
    x.wavelength = lambda;
    x.input = input;
    x.add = add;
    x.a = sys.fullPivLu().solve(rhs);
    x.b = s1_bb * x.a + s1_bA * input;
    x.through = s1_Bb * x.a + s1_BA * input;
    x.c = p1.cwiseProduct(x.b);
    x.d = s2_dc * x.c + s2_dC * add;
    x.drop = s2_Dc * x.c + s2_DC * add;
    x.residual = detail::loop_residual(e1, e2, p1, p2, x);
    return x;
}

/// Everything needed to reconstruct the field of one solved device.
struct DeviceSolution {
    ResonatorConfig config;
    std::vector<BendMode> bends;
    std::vector<StraightMode> straights;
    coupler::CouplerSolution coupler1, coupler2;
    SegmentLengths segments;
    LoopSolution loop;
};

namespace detail {

inline std::string at_wavelength(double lambda, const char* what) {
    std::ostringstream os;
    os << "at lambda = " << lambda << " um: " << what;
    return os.str();
}

/// Rethrows the active exception with the wavelength prepended, keeping its type.
[[noreturn]] inline void rethrow_at(double lambda) {
    try {
        throw;
    } catch (const ValidationError& e) {
        throw ValidationError(at_wavelength(lambda, e.what()));
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(at_wavelength(lambda, e.what()), e.trace());
    } catch (const ConditioningError& e) {
        throw ConditioningError(at_wavelength(lambda, e.what()));
    } catch (const InsufficientModesError& e) {
        throw InsufficientModesError(at_wavelength(lambda, e.what()), e.found());
    } catch (const RangeError& e) {
        throw RangeError(at_wavelength(lambda, e.what()));
    } catch (const OverflowError& e) {
        throw OverflowError(at_wavelength(lambda, e.what()));
    } catch (const NumericalError& e) {
        throw NumericalError(at_wavelength(lambda, e.what()));
    }
}

/// Cavity modes of the requested radial orders.
inline std::vector<BendMode> cavity_modes(const ResonatorConfig& cfg, double lambda) {
    const auto orders = cfg.selected_orders();
    const int highest = *std::max_element(orders.begin(), orders.end());
    const auto all = bendmode::find_bend_modes(cfg.bend, lambda, highest + 1);
    std::vector<BendMode> out;
    for (int p : orders) out.push_back(all[static_cast<std::size_t>(p)]);
    return out;
}

inline std::vector<StraightMode> straight_modes(const ResonatorConfig& cfg, double lambda) {
    auto s = waveguide::find_slab_modes(cfg.slab, lambda);
    if (static_cast<int>(s.size()) < cfg.n_straight_modes) {
        std::ostringstream os;
        os << "requested " << cfg.n_straight_modes << " straight modes but the slab guides only " << s.size();
        throw InsufficientModesError(os.str(), static_cast<int>(s.size()));
    }
    s.resize(static_cast<std::size_t>(cfg.n_straight_modes));
    return s;
}

}  // namespace detail

/// Cavity and straight modes of a configuration, as used by the device solve.
struct ModeSet {
    std::vector<BendMode> bends;
    std::vector<StraightMode> straights;
};

inline ModeSet solve_modes(const ResonatorConfig& cfg, double lambda) {
    try {
        cfg.validate();
        if (!(lambda > 0.0)) throw ValidationError("wavelength must be positive");
        return {detail::cavity_modes(cfg, lambda), detail::straight_modes(cfg, lambda)};
    } catch (...) {
        detail::rethrow_at(lambda);
    }
}

/// Fresh mode, coupler and loop solve at one wavelength.
inline DeviceSolution solve_device(const ResonatorConfig& cfg, double lambda, const Vector& input, const Vector& add) {
    try {
        cfg.validate();
        if (!(lambda > 0.0)) throw ValidationError("wavelength must be positive");
        DeviceSolution s;
        s.config = cfg;
        s.segments = segment_lengths(cfg);
        s.bends = detail::cavity_modes(cfg, lambda);
        s.straights = detail::straight_modes(cfg, lambda);
        coupler::CouplerNumerics num = cfg.numerics;
        num.half_length = cfg.half_length();
        const auto g1 = coupler::make_coupler_geometry(cfg.bend, cfg.slab, cfg.gap1, num);
        s.coupler1 = coupler::solve_coupler(s.bends, s.straights, g1, num);
        if (cfg.gap2 == cfg.gap1) {
            s.coupler2 = s.coupler1;
        } else {
            const auto g2 = coupler::make_coupler_geometry(cfg.bend, cfg.slab, cfg.gap2, num);
            s.coupler2 = coupler::solve_coupler(s.bends, s.straights, g2, num);
        }
        s.loop = solve_loop(s.coupler1.scattering, s.coupler2.scattering, s.bends, s.segments.l1, s.segments.l2,
                            input, add);
        return s;
    } catch (...) {
        detail::rethrow_at(lambda);
    }
}

/// Unit power in straight mode 0 at the input port, add port dark.
inline Vector unit_input(const ResonatorConfig& cfg) {
    Vector a = Vector::Zero(cfg.n_straight_modes);
    a(0) = 1.0;
    return a;
}

/// Powers at one wavelength of a scan.
struct SpectrumPoint {
    double wavelength = 0.0;
    std::vector<double> transmitted;  ///< P_T^q
    std::vector<double> dropped;      ///< P_D^q
    std::vector<double> cavity;       ///< |b^p|^2
    std::vector<int> cavity_orders;   ///< radial order of each cavity mode

    double total_transmitted() const { return sum(transmitted); }
    double total_dropped() const { return sum(dropped); }

private:
    static double sum(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
};

inline SpectrumPoint spectrum_point(const DeviceSolution& s) {
    SpectrumPoint p;
    p.wavelength = s.loop.wavelength;
    for (Eigen::Index q = 0; q < s.loop.through.size(); ++q) {
        p.transmitted.push_back(std::norm(s.loop.through(q)));
        p.dropped.push_back(std::norm(s.loop.drop(q)));
    }
    for (Eigen::Index i = 0; i < s.loop.b.size(); ++i) {
        p.cavity.push_back(std::norm(s.loop.b(i)));
        p.cavity_orders.push_back(s.bends[static_cast<std::size_t>(i)].radial_order);
    }
    return p;
}

/// Wavelength grid start, start + step, ... up to stop (inclusive within rounding).
inline std::vector<double> scan_wavelengths(double start, double stop, double step) {
    if (!(start > 0.0) || !(stop >= start) || !(step > 0.0)) {
        throw ValidationError("scan: need 0 < lambda_start <= lambda_stop and lambda_step > 0");
    }
    const long n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    if (n > 10'000'000) throw ValidationError("scan: too many wavelength points");
    std::vector<double> out;
    for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
}

/// Spectrum under unit input, one independent solve per wavelength. Points
/// are distributed over `workers` threads; the result does not depend on it.
inline std::vector<SpectrumPoint> compute_spectrum(const ResonatorConfig& cfg, double start, double stop, double step,
                                                   int workers = 1) {
    cfg.validate();
    const auto lambdas = scan_wavelengths(start, stop, step);
    const Vector input = unit_input(cfg);
    const Vector add = Vector::Zero(cfg.n_straight_modes);
    std::vector<SpectrumPoint> out(lambdas.size());
    std::vector<std::exception_ptr> errors(lambdas.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (std::size_t i = next++; i < lambdas.size() && !failed; i = next++) {
            try {
                out[i] = spectrum_point(solve_device(cfg, lambdas[i], input, add));
            } catch (...) {
                errors[i] = std::current_exception();
                failed = true;
            }
        }
    };
    const int n_threads = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(lambdas.size(), 1)));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

/// Vertex of the parabola through three points (x strictly increasing).
inline std::pair<double, double> parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
    const double d01 = (y1 - y0) / (x1 - x0);
    const double d12 = (y2 - y1) / (x2 - x1);
    const double a = (d12 - d01) / (x2 - x0);
    if (a == 0.0) return {x1, y1};
    const double b = d01 - a * (x0 + x1);
    const double c = y0 - (a * x0 + b) * x0;
    const double xv = -b / (2.0 * a);
    return {xv, (a * xv + b) * xv + c};
}

struct Resonance {
    double wavelength = 0.0;
    double dropped_power = 0.0;
    int dominant_order = 0;      ///< radial order of the strongest cavity mode
    std::string classification;  ///< "fundamental" or "higher order"
};

/// Interior local maxima of the total dropped power, refined by parabolic
/// interpolation and tagged by the dominant cavity mode.
inline std::vector<Resonance> find_resonances(const std::vector<SpectrumPoint>& spectrum) {
    if (spectrum.size() < 3) throw ValidationError("find_resonances: need at least 3 spectrum points");
    std::vector<Resonance> out;
    for (std::size_t i = 1; i + 1 < spectrum.size(); ++i) {
        const double y0 = spectrum[i - 1].total_dropped(), y1 = spectrum[i].total_dropped();
        const double y2 = spectrum[i + 1].total_dropped();
        if (!(y1 > y0 && y1 >= y2)) continue;
        const auto [xv, yv] = parabola_vertex(spectrum[i - 1].wavelength, y0, spectrum[i].wavelength, y1,
                                              spectrum[i + 1].wavelength, y2);
        Resonance r;
        r.wavelength = xv;
        r.dropped_power = yv;
        const auto& cav = spectrum[i].cavity;
        const auto it = std::max_element(cav.begin(), cav.end());
        r.dominant_order = cav.empty() ? 0 : spectrum[i].cavity_orders[static_cast<std::size_t>(it - cav.begin())];
        r.classification = r.dominant_order == 0 ? "fundamental" : "higher order";
        out.push_back(r);
    }
    return out;
}

/// Rectangular sampling grid for field maps.
struct GridSpec {
    double x_min = -7.5, x_max = 7.5;
    double z_min = -7.5, z_max = 7.5;
    int nx = 151, nz = 151;
};

struct FieldMap {
    std::vector<double> x, z;
    Matrix values;  ///< E_y, rows follow z, columns follow x
    double wavelength = 0.0;
};

/// Extent of the simulated domain: |x|, |z| up to the outer window edges.
inline double domain_half_width(const DeviceSolution& s) {
    return std::max(s.coupler1.geometry.x_right, s.coupler2.geometry.x_right);
}

namespace detail {

/// Linear interpolation of the CME coefficients C(z) = T(z) C(z_i).
inline Vector coefficients_at(const coupler::CouplerSolution& c, const Vector& c_in, double z) {
    const auto& zs = c.z_levels;
    const auto it = std::upper_bound(zs.begin(), zs.end(), z);
    std::size_t j = it == zs.begin() ? 0 : static_cast<std::size_t>(it - zs.begin()) - 1;
    j = std::min(j, zs.size() - 2);
    const double t = std::clamp((z - zs[j]) / (zs[j + 1] - zs[j]), 0.0, 1.0);
    return ((1.0 - t) * c.history[j] + t * c.history[j + 1]) * c_in;
}

/// Field of the cavity modes with coefficients `coef` (port amplitude over
/// modal phase), evaluated in a coupler-local frame.
inline cplx bend_sum(const std::vector<BendMode>& bends, const Vector& coef, double x, double z, double ref) {
    if (std::hypot(x, z) < 1e-12) return 0.0;
    cplx e = 0.0;
    for (std::size_t p = 0; p < bends.size(); ++p) {
        if (coef(static_cast<Eigen::Index>(p)) == 0.0) continue;
        e += coef(static_cast<Eigen::Index>(p)) * bendmode::evaluate_bend_field(bends[p], x, z, {}, ref).ey;
    }
    return e;
}

inline cplx straight_sum(const std::vector<StraightMode>& modes, const Vector& coef, double x, double z) {
    cplx e = 0.0;
    for (std::size_t q = 0; q < modes.size(); ++q) {
        e += coef(static_cast<Eigen::Index>(q)) * waveguide::evaluate_straight_field(modes[q], x, z).ey;
    }
    return e;
}

/// Local-frame field of one coupler and its surroundings on the half plane
/// x_local > 0: CMT superposition inside the window, arcs and port
/// waveguides beyond it.
struct HalfField {
    const std::vector<BendMode>* bends;
    std::vector<StraightMode> straights;  ///< centred on this coupler's core
    const coupler::CouplerSolution* sol;
    Vector cme_in;          ///< C(z_i)
    Vector arc_out;         ///< bend coefficients of the downstream arc
    Vector straight_in;     ///< straight coefficients below the window
    Vector straight_out;    ///< straight coefficients above the window
    double z_in, z_out;

    cplx operator()(double x, double z) const {
        if (z >= z_in && z <= z_out) {
            const Vector c = coefficients_at(*sol, cme_in, z);
            const Eigen::Index nb = static_cast<Eigen::Index>(bends->size());
            return bend_sum(*bends, c.head(nb), x, z, 0.0) + straight_sum(straights, c.tail(c.size() - nb), x, z);
        }
        if (z > z_out) return bend_sum(*bends, arc_out, x, z, 0.5 * kPi) + straight_sum(straights, straight_out, x, z);
        return straight_sum(straights, straight_in, x, z);
    }
};

inline HalfField half_field(const DeviceSolution& s, const coupler::CouplerSolution& c, const Vector& bend_in,
                            const Vector& bend_out, const Vector& s_in, const Vector& s_out) {
    const auto& g = c.geometry;
    const Eigen::Index nb = static_cast<Eigen::Index>(s.bends.size());
    const Eigen::Index ns = s_in.size();
    const double th_in = g.port_angle(g.z_in), th_out = g.port_angle(g.z_out);
    const cplx mi(0.0, -1.0);
    HalfField h;
    h.bends = &s.bends;
    h.straights = coupler::detail::place_straight(s.straights, g);
    h.sol = &c;
    h.z_in = g.z_in;
    h.z_out = g.z_out;
    h.cme_in.resize(nb + ns);
    h.arc_out.resize(nb);
    h.straight_in.resize(ns);
    h.straight_out.resize(ns);
    for (Eigen::Index p = 0; p < nb; ++p) {
        const cplx nu = s.bends[static_cast<std::size_t>(p)].angular_order;
        h.cme_in(p) = bend_in(p) / std::exp(mi * nu * th_in);
        h.arc_out(p) = bend_out(p) / std::exp(mi * nu * th_out);
    }
    for (Eigen::Index q = 0; q < ns; ++q) {
        const double beta = h.straights[static_cast<std::size_t>(q)].propagation_constant;
        h.straight_in(q) = s_in(q) / std::exp(mi * beta * g.z_in);
        h.straight_out(q) = s_out(q) / std::exp(mi * beta * g.z_out);
        h.cme_in(nb + q) = h.straight_in(q);
    }
    return h;
}

}  // namespace detail

/// E_y of the whole device on a rectangular grid. Each half plane (x > 0:
/// coupler I, x < 0: coupler II in its rotated frame) carries the CMT field
/// inside |z| <= z_o, the straight port fields outside, and the arc
/// downstream of its coupler (z > z_o for I, z < -z_o for II).
inline FieldMap compose_field_map(const DeviceSolution& s, const GridSpec& grid) {
    const double half = domain_half_width(s);
    if (grid.nx < 2 || grid.nz < 2 || !(grid.x_max > grid.x_min) || !(grid.z_max > grid.z_min)) {
        throw ValidationError("field map: grid must have >= 2 points per axis and increasing bounds");
    }
    if (grid.x_min < -half || grid.x_max > half || grid.z_min < -half || grid.z_max > half) {
        std::ostringstream os;
        os << "field map: grid exceeds the simulated domain [" << -half << ", " << half << "]^2 um";
        throw ValidationError(os.str());
    }
    const auto& L = s.loop;
    const detail::HalfField f1 = detail::half_field(s, s.coupler1, L.a, L.b, L.input, L.through);
    const detail::HalfField f2 = detail::half_field(s, s.coupler2, L.c, L.d, L.add, L.drop);

    FieldMap m;
    m.wavelength = L.wavelength;
    for (int i = 0; i < grid.nx; ++i) m.x.push_back(grid.x_min + (grid.x_max - grid.x_min) * i / (grid.nx - 1));
    for (int j = 0; j < grid.nz; ++j) m.z.push_back(grid.z_min + (grid.z_max - grid.z_min) * j / (grid.nz - 1));
    m.values.resize(grid.nz, grid.nx);
    for (int j = 0; j < grid.nz; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            const double x = m.x[i], z = m.z[j];
            // Downstream arcs are drawn over the whole plane on their side
            // of the windows; each coupler half plane adds its own content.
            cplx e = 0.0;
            if (x >= 0.0) {
                e += f1(x, z);
                if (z < f1.z_in) e += detail::bend_sum(s.bends, f2.arc_out, -x, -z, 0.5 * kPi);
            } else {
                e += f2(-x, -z);
                if (-z < f2.z_in) e += detail::bend_sum(s.bends, f1.arc_out, x, z, 0.5 * kPi);
            }
            m.values(j, i) = e;
        }
    }
    return m;
}

}  // namespace mrcmt::resonator
