/**
 * @file coupler.hpp
 *
 * @brief Coupled-mode model of a bent-straight waveguide coupler.
 *
 * Local frame: the cavity is centred at (x_c, 0), its rim comes closest to
 * the straight core at z = 0, and the straight core occupies
 * [x_c + R + g, x_c + R + g + w_s]. Both waveguides carry light towards +z.
 * Inside the window [x_l, x_r] x [z_i, z_o] the field is expanded into bend
 * modes (first) and straight modes (second) with z-dependent amplitudes C.
 *
 * With e(+i omega t), Z0-scaled H and relative permittivities eps, the
 * reciprocity identity applied to the expansion gives, for every test mode j,
 *
 *     sum_i M_ij dC_i/dz = -i k sum_i F_ij C_i,
 *     M_ij = -int (E_i conj(H_j) + conj(E_j) H_i) dx,
 *     F_ij =  int (eps - eps_m(i)) E_i conj(E_j) dx,
 *
 * where eps_m(i) is the permittivity of the structure that supports mode i.
 * The transfer matrix T, C(z_o) = T C(z_i), is obtained by classical RK4.
 *
 * Port amplitudes carry the local modal phase: a bend port at height z sits
 * at angle theta = asin(z / R) on the rim and has amplitude C exp(-i nu theta);
 * a straight port has C exp(-i beta z). Straight outputs are projected onto
 * the straight modes to remove the slowly decaying bend contribution.
 *
 * Cross-section integrals use composite Simpson rules on sub-intervals whose
 * ends are the material interfaces crossing the line z = const.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "mrcmt/bendmode.hpp"
#include "mrcmt/common.hpp"
#include "mrcmt/errors.hpp"
#include "mrcmt/waveguide.hpp"

namespace mrcmt::coupler {

using bendmode::BendGeometry;
using bendmode::BendMode;
using waveguide::SlabGeometry;
using waveguide::StraightMode;
using Matrix = Eigen::MatrixXcd;

/// Numerical controls and default window margins.
struct CouplerNumerics {
    double x_step = 0.005;       ///< um, cross-section quadrature step
    double z_step = 0.05;        ///< um, RK4 step
    double inner_margin = 4.0;   ///< um, window extent inside the rim
    double outer_margin = 2.0;   ///< um, window extent beyond the straight core
    double half_length = 0.0;    ///< um, z_o = -z_i; 0 means kDefaultHalfLength * R
    double max_condition = 1e10;
    double max_tail_fraction = 1e-4;
    bool verify_step = true;     ///< repeat at z_step / 2 and compare T
    double step_tolerance = 1e-6;
    int max_step_halvings = 3;   ///< adaptive refinement budget

    bool operator==(const CouplerNumerics&) const = default;
};

/// Default z_o / R. Near z = R the horizontal cuts of the bend modes carry
/// almost no z-flux and M becomes singular.
inline constexpr double kDefaultHalfLength = 0.7;

/// Window and material layout of one coupler in its local frame.
struct CouplerGeometry {
    double gap = 0.2;
    double core_lo = 0.0, core_hi = 0.0;  ///< straight core span in x
    Point cavity_center{};
    double cavity_radius = 0.0;
    double cavity_inner_radius = 0.0;     ///< 0 for a disk
    double x_left = 0.0, x_right = 0.0;
    double z_in = 0.0, z_out = 0.0;
    double x_step = 0.005, z_step = 0.05;
    double core_index = 1.5;              ///< straight core
    double cavity_index = 1.5;
    double background_index = 1.0;

    double port_angle(double z) const { return std::asin(std::clamp(z / cavity_radius, -1.0, 1.0)); }

    void validate() const {
        auto fail = [](const std::string& what) { throw ValidationError("coupler geometry: " + what); };
        if (!(x_step > 0.0) || !(z_step > 0.0)) fail("x_step and z_step must be positive");
        if (!(z_in < 0.0 && 0.0 < z_out)) fail("window must satisfy z_in < 0 < z_out");
        if (z_out > cavity_radius || -z_in > cavity_radius) fail("window half-length must not exceed R");
        if (!(core_hi > core_lo)) fail("straight core span is empty");
        if (!(gap > 0.0)) fail("gap must be positive");
        if (std::abs(core_lo - (cavity_center.x + cavity_radius) - gap) > 1e-9) {
            fail("gap inconsistent with the core position");
        }
        if (!(x_left < cavity_center.x + cavity_radius && x_right > core_hi)) {
            fail("window must contain the rim and the straight core");
        }
        if (!(x_left > cavity_center.x)) fail("window must not reach the cavity centre");
        if (cavity_center.z != 0.0) fail("cavity centre must lie on z = 0");
    }
};

/// Default window: z_o = -z_i = 0.7 R (or numerics.half_length), x from
/// inner_margin inside the rim (but at least R / 10 from the centre) to
/// outer_margin beyond the straight core.
inline CouplerGeometry make_coupler_geometry(const BendGeometry& bend, const SlabGeometry& slab, double gap,
                                             const CouplerNumerics& num = {}) {
    bend.validate();
    slab.validate();
    if (!(gap > 0.0)) throw ValidationError("coupler: gap must be positive");
    CouplerGeometry g;
    g.gap = gap;
    g.cavity_center = {0.0, 0.0};
    g.cavity_radius = bend.radius;
    g.cavity_inner_radius = bend.is_disk() ? 0.0 : bend.inner_radius();
    g.core_lo = bend.radius + gap;
    g.core_hi = g.core_lo + slab.width;
    g.x_left = std::max(bend.radius - num.inner_margin, 0.1 * bend.radius);
    g.x_right = g.core_hi + num.outer_margin;
    const double half = num.half_length > 0.0 ? num.half_length : kDefaultHalfLength * bend.radius;
    g.z_in = -half;
    g.z_out = half;
    g.x_step = num.x_step;
    g.z_step = num.z_step;
    g.core_index = slab.core_index;
    g.cavity_index = bend.core_index;
    if (slab.background_index != bend.background_index) {
        throw ValidationError("coupler: cavity and straight waveguide must share the background index");
    }
    g.background_index = bend.background_index;
    g.validate();
    return g;
}

/// M and F of the coupled mode equations at one height.
struct OverlapSystem {
    Matrix m_matrix;
    Matrix f_matrix;
    double z = 0.0;
};

/// S in port order (bend modes, then straight modes).
struct ScatteringMatrix {
    Matrix entries;
    double wavelength = 0.0;
    int n_bend = 0;
    int n_straight = 0;

    /// Largest singular value (at most 1 for a passive device, up to CMT error).
    double max_singular_value() const {
        return Eigen::JacobiSVD<Matrix>(entries).singularValues()(0);
    }
};

/// Everything the resonator needs from one coupler solve.
struct CouplerSolution {
    ScatteringMatrix scattering;
    Matrix transfer;               ///< T: C(z_o) = T C(z_i)
    std::vector<double> z_levels;  ///< RK4 nodes z_i .. z_o
    std::vector<Matrix> history;   ///< T(z) at every node
    double max_condition = 0.0;    ///< worst condition number of M seen
    double z_step_used = 0.0;      ///< RK4 step after any refinement
    CouplerGeometry geometry;
};

namespace detail {

/// Quadrature node on a cross-section with the permittivities around it.
struct Node {
    double x, weight;
    double eps, eps_bend, eps_straight;
};

inline double square(double v) { return v * v; }

/// Composite Simpson nodes over [x_l, x_r] at height z, split at interfaces.
inline std::vector<Node> cross_section(const CouplerGeometry& g, double z) {
    std::vector<double> cuts{g.x_left, g.x_right, g.core_lo, g.core_hi};
    for (double r : {g.cavity_radius, g.cavity_inner_radius}) {
        if (r > std::abs(z)) {
            const double half = std::sqrt(r * r - z * z);
            cuts.push_back(g.cavity_center.x - half);
            cuts.push_back(g.cavity_center.x + half);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> pts;
    for (double c : cuts) {
        if (c < g.x_left || c > g.x_right) continue;
        if (pts.empty() || c - pts.back() > 1e-12) pts.push_back(c);
    }
    const double nb2 = square(g.background_index);
    std::vector<Node> nodes;
    for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
        const double a = pts[s], b = pts[s + 1];
        const double mid = 0.5 * (a + b);
        const double r = std::hypot(mid - g.cavity_center.x, z - g.cavity_center.z);
        const bool in_cavity = r < g.cavity_radius && r > g.cavity_inner_radius;
        const bool in_core = mid > g.core_lo && mid < g.core_hi;
        const double eps_b = in_cavity ? square(g.cavity_index) : nb2;
        const double eps_s = in_core ? square(g.core_index) : nb2;
        const double eps = in_cavity ? eps_b : eps_s;
        int n = static_cast<int>(std::ceil((b - a) / g.x_step));
        n += n % 2;
        n = std::max(n, 2);
        const double h = (b - a) / n;
        for (int i = 0; i <= n; ++i) {
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            nodes.push_back({a + i * h, w * h / 3.0, eps, eps_b, eps_s});
        }
    }
    return nodes;
}

/// E_y and H_x of all modes on the nodes (rows: nodes, columns: modes).
inline void sample_fields(const std::vector<BendMode>& bends, const std::vector<StraightMode>& straights,
                          const CouplerGeometry& g, const std::vector<Node>& nodes, double z, Matrix& e,
                          Matrix& h) {
    const int nb = static_cast<int>(bends.size()), n = nb + static_cast<int>(straights.size());
    e.resize(static_cast<Eigen::Index>(nodes.size()), n);
    h.resize(static_cast<Eigen::Index>(nodes.size()), n);
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        const double x = nodes[r].x;
        for (int p = 0; p < nb; ++p) {
            const FieldComponents f = bendmode::evaluate_bend_field(bends[p], x, z, g.cavity_center);
            e(r, p) = f.ey;
            h(r, p) = f.hx;
        }
        for (std::size_t q = 0; q < straights.size(); ++q) {
            const FieldComponents f = waveguide::evaluate_straight_field(straights[q], x, z);
            e(r, nb + q) = f.ey;
            h(r, nb + q) = f.hx;
        }
    }
}

inline void check_wavelengths(const std::vector<BendMode>& bends, const std::vector<StraightMode>& straights) {
    if (bends.empty() || straights.empty()) throw ValidationError("coupler: need at least one bend and one straight mode");
    const double lambda = bends.front().wavelength;
    auto same = [lambda](double l) { return std::abs(l - lambda) <= 1e-12 * lambda; };
    for (const auto& b : bends) {
        if (!same(b.wavelength)) throw ValidationError("coupler: bend modes at different wavelengths");
    }
    for (const auto& s : straights) {
        if (!same(s.wavelength)) {
            std::ostringstream os;
            os << "coupler: wavelength mismatch between bend (" << lambda << " um) and straight ("
               << s.wavelength << " um) modes";
            throw ValidationError(os.str());
        }
    }
}

/// Straight modes of the slab, re-centred on the core of this coupler.
inline std::vector<StraightMode> place_straight(const std::vector<StraightMode>& modes, const CouplerGeometry& g) {
    std::vector<StraightMode> out;
    for (const auto& m : modes) out.push_back(m.centered_at(0.5 * (g.core_lo + g.core_hi)));
    return out;
}

}  // namespace detail

/// Fraction of each mode's power outside [x_l, x_r] on the symmetry plane.
/// Bend modes: azimuthal flux through the ray theta = 0, counted only up to
/// the outer turning point Re(nu) / (n_b k); beyond it the field of a leaky
/// mode is radiation that no finite window can hold.
inline std::vector<double> window_tail_fractions(const std::vector<BendMode>& bends,
                                                 const std::vector<StraightMode>& straights,
                                                 const CouplerGeometry& g) {
    std::vector<double> out;
    for (const auto& m : bends) {
        const double k = wavenumber(m.wavelength);
        const double w = 2.0 * m.angular_order.real() / k;
        const double lo = g.x_left - g.cavity_center.x, hi = g.x_right - g.cavity_center.x;
        const double end = m.profile->table_end();
        const double caustic = m.angular_order.real() / (g.background_index * k);
        double outside = 0.0, total = 0.0;
        const double dr = 2e-3;
        for (double r = 0.5 * dr; r < end; r += dr) {
            const double f = w * std::norm(m.profile->value(r)) / r * dr;
            total += f;
            if (r < lo || (r > hi && r < caustic)) outside += f;
        }
        total += w * std::norm(m.profile->value(end));
        out.push_back(outside / total);
    }
    for (const auto& s : straights) {
        const StraightMode m = s.centered_at(0.5 * (g.core_lo + g.core_hi));
        const double d = m.half_width();
        const bool even = m.order % 2 == 0;
        const double edge = m.amplitude * (even ? std::cos(m.kappa * d) : std::sin(m.kappa * d));
        // int of edge^2 exp(-2 decay t) beyond distance t0 from the core edge
        auto tail = [&](double t0) { return edge * edge * std::exp(-2.0 * m.decay * std::max(t0, 0.0)) / (2.0 * m.decay); };
        const double outside = tail(m.center - d - g.x_left) + tail(g.x_right - m.center - d);
        out.push_back(outside * m.effective_index);  // total int |E|^2 = 1 / n_eff
    }
    return out;
}

/// M and F at height z. Straight modes are placed on the core of g.
inline OverlapSystem assemble_overlaps(const std::vector<BendMode>& bends,
                                       const std::vector<StraightMode>& straights_in, const CouplerGeometry& g,
                                       double z) {
    detail::check_wavelengths(bends, straights_in);
    const auto straights = detail::place_straight(straights_in, g);
    const auto nodes = detail::cross_section(g, z);
    Matrix e, h;
    detail::sample_fields(bends, straights, g, nodes, z, e, h);
    const Eigen::Index nb = static_cast<Eigen::Index>(bends.size());
    const Eigen::Index n = e.cols();
    Eigen::VectorXd w(nodes.size()), db(nodes.size()), ds(nodes.size());
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        w(r) = nodes[r].weight;
        db(r) = nodes[r].weight * (nodes[r].eps - nodes[r].eps_bend);
        ds(r) = nodes[r].weight * (nodes[r].eps - nodes[r].eps_straight);
    }
    OverlapSystem out;
    out.z = z;
    const Matrix we = w.asDiagonal() * e;
    const Matrix wh = w.asDiagonal() * h;
    // M_ij = -sum w (E_i conj(H_j) + conj(E_j) H_i)
    out.m_matrix = -(we.transpose() * h.conjugate() + wh.transpose() * e.conjugate());
    out.f_matrix.resize(n, n);
    out.f_matrix.topRows(nb) = (db.asDiagonal() * e.leftCols(nb)).transpose() * e.conjugate();
    out.f_matrix.bottomRows(n - nb) = (ds.asDiagonal() * e.rightCols(n - nb)).transpose() * e.conjugate();
    return out;
}

namespace detail {

/// dC/dz = G C at height z; also reports cond(M).
inline Matrix cme_generator(const std::vector<BendMode>& bends, const std::vector<StraightMode>& straights,
                            const CouplerGeometry& g, double z, double k, double max_condition,
                            double& condition) {
    const OverlapSystem o = assemble_overlaps(bends, straights, g, z);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Matrix>(o.m_matrix).singularValues();
    condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(condition <= max_condition)) {
        std::ostringstream os;
        os << "coupler: overlap matrix M ill-conditioned at z = " << z << " um (condition number "
           << condition << ")";
        throw ConditioningError(os.str());
    }
    const Matrix mt = o.m_matrix.transpose();
    return mt.partialPivLu().solve(cplx(0.0, -k) * o.f_matrix.transpose());
}

}  // namespace detail

namespace detail {

/// One RK4 pass over the window with `steps` steps. With `check` the
/// generator is sampled on a quarter-step grid and the pass is repeated at
/// half the step; `change` receives the largest entrywise difference.
inline CouplerSolution rk4_pass(const std::vector<BendMode>& bends, const std::vector<StraightMode>& straights,
                                const CouplerGeometry& g, double k, int steps, double max_condition, bool check,
                                double& change) {
    const Eigen::Index n = static_cast<Eigen::Index>(bends.size() + straights.size());
    const double h = (g.z_out - g.z_in) / steps;
    const int per_step = check ? 4 : 2;
    const int samples = steps * per_step;
    auto level = [&](int j) { return j == samples ? g.z_out : g.z_in + j * h / per_step; };
    CouplerSolution sol;
    sol.geometry = g;
    std::vector<Matrix> gen(samples + 1);
    for (int j = 0; j <= samples; ++j) {
        double cond = 0.0;
        gen[j] = cme_generator(bends, straights, g, level(j), k, max_condition, cond);
        sol.max_condition = std::max(sol.max_condition, cond);
    }
    auto march = [&](int width, std::vector<Matrix>* history) {
        const double dz = h * width / per_step;
        Matrix t = Matrix::Identity(n, n);
        if (history) history->push_back(t);
        for (int j = 0; j < samples; j += width) {
            const Matrix& g0 = gen[j];
            const Matrix& gm = gen[j + width / 2];
            const Matrix& g1 = gen[j + width];
            const Matrix k1 = g0 * t;
            const Matrix k2 = gm * (t + 0.5 * dz * k1);
            const Matrix k3 = gm * (t + 0.5 * dz * k2);
            const Matrix k4 = g1 * (t + dz * k3);
            t += dz / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (history) history->push_back(t);
        }
        return t;
    };
    sol.transfer = march(per_step, &sol.history);
    for (int s = 0; s <= steps; ++s) sol.z_levels.push_back(level(s * per_step));
    sol.z_step_used = h;
    change = check ? (march(2, nullptr) - sol.transfer).cwiseAbs().maxCoeff() : 0.0;
    return sol;
}

}  // namespace detail

/// Integrates the coupled mode equations over the window with RK4 and
/// returns T(z) at every node (T(z_i) = identity).
///
/// With verify_step each pass is compared with one at half the step
/// (sharing generator samples). If they differ by more than step_tolerance
/// the step is halved, at most max_step_halvings times, before a
/// ConvergenceError is raised.
inline CouplerSolution integrate_cme(const std::vector<BendMode>& bends, const std::vector<StraightMode>& straights_in,
                                     const CouplerGeometry& g, const CouplerNumerics& num = {}) {
    g.validate();
    detail::check_wavelengths(bends, straights_in);
    const auto straights = detail::place_straight(straights_in, g);
    const double k = wavenumber(bends.front().wavelength);
    int steps = std::max(1, static_cast<int>(std::ceil((g.z_out - g.z_in) / g.z_step - 1e-9)));
    double change = 0.0;
    for (int attempt = 0;; ++attempt) {
        CouplerSolution sol =
            detail::rk4_pass(bends, straights, g, k, steps, num.max_condition, num.verify_step, change);
        if (!num.verify_step || change <= num.step_tolerance) return sol;
        if (attempt == num.max_step_halvings) break;
        steps *= 2;
    }
    std::ostringstream os;
    os << "coupler: RK4 not converged, halving the step from " << (g.z_out - g.z_in) / steps
       << " um still changes T by " << change << " (tolerance " << num.step_tolerance << ")";
    throw ConvergenceError(os.str());
}

/// Converts T into S: port phases and the straight-output projection.
inline ScatteringMatrix apply_projection(const Matrix& transfer, const std::vector<BendMode>& bends,
                                         const std::vector<StraightMode>& straights_in, const CouplerGeometry& g) {
    const auto straights = detail::place_straight(straights_in, g);
    const int nb = static_cast<int>(bends.size()), ns = static_cast<int>(straights.size());
    const OverlapSystem o = assemble_overlaps(bends, straights, g, g.z_out);
    const cplx mi(0.0, -1.0);
    Eigen::VectorXcd phase_in(nb + ns), phase_out(nb + ns);
    for (int p = 0; p < nb; ++p) {
        phase_in(p) = std::exp(mi * bends[p].angular_order * g.port_angle(g.z_in));
        phase_out(p) = std::exp(mi * bends[p].angular_order * g.port_angle(g.z_out));
    }
    for (int q = 0; q < ns; ++q) {
        phase_in(nb + q) = std::exp(mi * straights[q].propagation_constant * g.z_in);
        phase_out(nb + q) = std::exp(mi * straights[q].propagation_constant * g.z_out);
    }
    Matrix out = transfer;
    // B^q = C_s^q + sum_p C_b^p <b,p; s,q> / <s,q; s,q> at z_o
    for (int q = 0; q < ns; ++q) {
        const cplx self = o.m_matrix(nb + q, nb + q);
        for (int p = 0; p < nb; ++p) out.row(nb + q) += transfer.row(p) * (o.m_matrix(p, nb + q) / self);
    }
    ScatteringMatrix s;
    s.entries = phase_out.asDiagonal() * out * phase_in.cwiseInverse().asDiagonal();
    s.wavelength = bends.front().wavelength;
    s.n_bend = nb;
    s.n_straight = ns;
    return s;
}

/// Full coupler solve from given modes.
inline CouplerSolution solve_coupler(const std::vector<BendMode>& bends, const std::vector<StraightMode>& straights,
                                     const CouplerGeometry& g, const CouplerNumerics& num = {}) {
    detail::check_wavelengths(bends, straights);
    const auto tails = window_tail_fractions(bends, straights, g);
    for (std::size_t i = 0; i < tails.size(); ++i) {
        if (tails[i] > num.max_tail_fraction) {
            std::ostringstream os;
            os << "coupler: window too small, " << (i < bends.size() ? "bend" : "straight") << " mode "
               << (i < bends.size() ? i : i - bends.size()) << " has a power fraction of " << tails[i]
               << " outside [" << g.x_left << ", " << g.x_right << "] um";
            throw ValidationError(os.str());
        }
    }
    CouplerSolution sol = integrate_cme(bends, straights, g, num);
    sol.scattering = apply_projection(sol.transfer, bends, straights, g);
    return sol;
}

/// Thread-safe cache of mode solutions keyed by geometry and wavelength.
class ModeCache {
public:
    struct Entry {
        std::vector<BendMode> bends;
        std::vector<StraightMode> straights;
    };

    std::shared_ptr<const Entry> get(const BendGeometry& bend, const SlabGeometry& slab, double wavelength,
                                     int n_bend, int n_straight) {
        const Key key{bend.radius, bend.core_index, bend.background_index, bend.core_width,
                      slab.core_index, slab.background_index, slab.width, wavelength, n_bend, n_straight};
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        auto entry = std::make_shared<Entry>();
        entry->bends = bendmode::find_bend_modes(bend, wavelength, n_bend);
        auto straights = waveguide::find_slab_modes(slab, wavelength);
        if (static_cast<int>(straights.size()) < n_straight) {
            std::ostringstream os;
            os << "requested " << n_straight << " straight modes but the slab guides only " << straights.size();
            throw InsufficientModesError(os.str(), static_cast<int>(straights.size()));
        }
        straights.resize(n_straight);
        entry->straights = std::move(straights);
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.emplace(key, entry).first->second;
    }

private:
    using Key = std::tuple<double, double, double, double, double, double, double, double, int, int>;
    std::mutex mutex_;
    std::map<Key, std::shared_ptr<const Entry>> cache_;
};

inline ModeCache& default_mode_cache() {
    static ModeCache cache;
    return cache;
}

/// Mode solve, overlap assembly, integration and projection in one call.
inline ScatteringMatrix compute_scattering_matrix(const BendGeometry& bend, const SlabGeometry& slab, double gap,
                                                  double wavelength, int n_bend, int n_straight,
                                                  const CouplerNumerics& num = {}) {
    if (n_bend < 1 || n_straight < 1) throw ValidationError("coupler: N_b and N_s must be >= 1");
    const auto modes = default_mode_cache().get(bend, slab, wavelength, n_bend, n_straight);
    const CouplerGeometry g = make_coupler_geometry(bend, slab, gap, num);
    return solve_coupler(modes->bends, modes->straights, g, num).scattering;
}

}  // namespace mrcmt::coupler
