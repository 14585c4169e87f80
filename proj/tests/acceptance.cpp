/**
 * @file acceptance.cpp
 * @brief Acceptance runner: one PASS/FAIL line per criterion, details indented below.
 *
 * Exit status is 0 only when every criterion passes.
 */

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <random>
#include <sstream>

#include "mrcmt/resonator.hpp"
#include "oracles/bend_scan.hpp"
#include "oracles/slab_fd.hpp"
#include "support/field_checks.hpp"

using namespace mrcmt;
using namespace mrcmt::resonator;

namespace {

struct Check {
    std::string what;
    bool pass;
};

struct Verdict {
    std::vector<Check> checks;

    void add(bool pass, const std::string& what) { checks.push_back({what, pass}); }
    bool pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

constexpr double kStart = 1.035, kStop = 1.055, kStep = 2.5e-4;
constexpr double kFundamental = 1.043, kHigher = 1.04833, kOff = 1.055;

ResonatorConfig paper(int n_bend, std::vector<int> orders = {}) {
    ResonatorConfig c;
    c.n_bend_modes = n_bend;
    c.bend_orders = std::move(orders);
    return c;
}

double peak_drop(const std::vector<SpectrumPoint>& s) {
    double m = 0.0;
    for (const auto& p : s) m = std::max(m, p.total_dropped());
    return m;
}

double drop_peak_to_peak(const std::vector<SpectrumPoint>& s) {
    double lo = 1e300, hi = -1e300;
    for (const auto& p : s) {
        lo = std::min(lo, p.total_dropped());
        hi = std::max(hi, p.total_dropped());
    }
    return hi - lo;
}

bool bitwise_equal(const std::vector<SpectrumPoint>& a, const std::vector<SpectrumPoint>& b) {
    auto same = [](const std::vector<double>& x, const std::vector<double>& y) {
        return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
    };
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::memcmp(&a[i].wavelength, &b[i].wavelength, sizeof(double)) != 0 ||
            !same(a[i].transmitted, b[i].transmitted) || !same(a[i].dropped, b[i].dropped) ||
            !same(a[i].cavity, b[i].cavity)) {
            return false;
        }
    }
    return true;
}

Verdict criterion_resonances(const std::vector<SpectrumPoint>& spectrum, double elapsed) {
    Verdict v;
    const auto res = find_resonances(spectrum);
    auto nearest = [&](const std::string& cls, double target) -> const Resonance* {
        const Resonance* best = nullptr;
        for (const auto& r : res) {
            if (r.classification != cls) continue;
            if (!best || std::abs(r.wavelength - target) < std::abs(best->wavelength - target)) best = &r;
        }
        return best;
    };
    for (const auto& [cls, target] : {std::pair{std::string("fundamental"), kFundamental},
                                      std::pair{std::string("higher order"), kHigher}}) {
        const Resonance* r = nearest(cls, target);
        if (!r) {
            v.add(false, "no resonance classified " + cls);
        } else {
            v.add(std::abs(r->wavelength - target) <= 2e-3,
                  fmt("%s resonance at %.5f um (target %.5f +- 0.002), P_D = %.4f", cls.c_str(), r->wavelength,
                      target, r->dropped_power));
        }
    }
    v.add(elapsed <= 600.0, fmt("%zu-point scan took %.1f s (%.2f s per wavelength, limit 600 s)", spectrum.size(),
                                elapsed, elapsed / static_cast<double>(spectrum.size())));
    return v;
}

Verdict criterion_single_mode() {
    Verdict v;
    std::vector<std::vector<SpectrumPoint>> runs;
    for (int p = 0; p < 3; ++p) runs.push_back(compute_spectrum(paper(1, {p}), kStart, kStop, kStep));
    const double ratio = peak_drop(runs[0]) / peak_drop(runs[1]);
    v.add(ratio >= 2.0, fmt("peak P_D: TE0 only %.4f, TE1 only %.4f, ratio %.2f (need >= 2)", peak_drop(runs[0]),
                            peak_drop(runs[1]), ratio));
    const double p0 = drop_peak_to_peak(runs[0]), p2 = drop_peak_to_peak(runs[2]);
    v.add(10.0 * p2 <= p0, fmt("P_D peak-to-peak: TE0 only %.4f, TE2 only %.2e (need TE2 <= TE0 / 10)", p0, p2));
    return v;
}

Verdict criterion_mode_count(const std::vector<SpectrumPoint>& nb3) {
    Verdict v;
    const auto nb4 = compute_spectrum(paper(4), kStart, kStop, kStep);
    double worst = 0.0, at = 0.0;
    for (std::size_t i = 0; i < nb3.size(); ++i) {
        const double d = std::abs(nb4[i].total_transmitted() - nb3[i].total_transmitted());
        if (d > worst) {
            worst = d;
            at = nb3[i].wavelength;
        }
    }
    v.add(worst <= 0.02, fmt("max |P_T(N_b=4) - P_T(N_b=3)| = %.4f at %.5f um (need <= 0.02)", worst, at));
    return v;
}

Verdict criterion_field_maps() {
    Verdict v;
    const ResonatorConfig c = paper(3);
    const GridSpec grid{-6, 6, -6, 6, 241, 241};
    const double radius = c.bend.radius;
    for (double lambda : {kHigher, kFundamental}) {
        const DeviceSolution s = solve_device(c, lambda, unit_input(c), Vector::Zero(1));
        const FieldMap m = compose_field_map(s, grid);
        const double frac = checks::nodal_ray_fraction(m, radius, 0.7, 72);
        const bool expect = lambda == kHigher;
        v.add(checks::has_circular_nodal_line(m, radius) == expect,
              fmt("%.5f um: %s circular nodal line expected, %.0f%% of rays show a radial minimum", lambda,
                  expect ? "a" : "no", 100.0 * frac));
    }
    const DeviceSolution off = solve_device(c, kOff, unit_input(c), Vector::Zero(1));
    const double pt = off.loop.through.squaredNorm();
    const auto [through, drop] = checks::port_field_maxima(off, 7.0);
    v.add(pt >= 0.8, fmt("off resonance %.3f um: P_T = %.4f (need >= 0.8), port |E| through/drop = %.1f", kOff, pt,
                         through / drop));
    return v;
}

Verdict criterion_properties(const std::vector<SpectrumPoint>& nb3) {
    Verdict v;
    using cd = std::complex<double>;

    // Cylinder-function identities on a random grid.
    {
        std::mt19937_64 gen(7);
        std::uniform_real_distribution<double> nre(-20.0, 200.0), nim(-5.0, 5.0), zre(0.5, 200.0), zim(-20.0, 1.0);
        double wr = 0.0, rec = 0.0;
        int n = 0;
        while (n < 1000) {
            const cd z(zre(gen), zim(gen)), nu(nre(gen), nim(gen));
            if (std::abs(z) > 200.0) continue;
            ++n;
            const auto j = specfun::bessel_j_scaled(nu, z);
            const auto h = specfun::hankel2_scaled(nu, z);
            const double scale = std::exp(j.log_scale + h.log_scale);
            const cd w = (j.value * h.derivative - j.derivative * h.value) * scale;
            const cd expected = cd(0.0, -2.0) / (kPi * z);
            const double terms = std::abs(j.value * h.derivative) * scale;
            // Identity itself is ill-conditioned when |J H2'| >> |W|; measure relative to the terms there.
            wr = std::max(wr, std::abs(w - expected) / std::max(std::abs(expected), 1e-4 * terms));
            const auto lo = specfun::bessel_j_scaled(nu - 1.0, z), hi = specfun::bessel_j_scaled(nu + 1.0, z);
            const double top = std::max({lo.log_scale, j.log_scale, hi.log_scale});
            const cd l = lo.value * std::exp(lo.log_scale - top) + hi.value * std::exp(hi.log_scale - top);
            const cd r = 2.0 * nu / z * j.value * std::exp(j.log_scale - top);
            rec = std::max(rec, std::abs(l - r) / std::max({std::abs(l), std::abs(r),
                                                             std::abs(lo.value * std::exp(lo.log_scale - top))}));
        }
        v.add(wr <= 1e-9 && rec <= 1e-8,
              fmt("specfun: Wronskian error %.1e (<= 1e-9), recurrence error %.1e (<= 1e-8), 1000 points", wr, rec));
    }

    // Slab solver against finite differences.
    {
        double worst = 0.0;
        for (const SlabGeometry& g : {SlabGeometry{1.5, 1.0, 0.4}, SlabGeometry{1.5, 1.0, 1.2}}) {
            const auto modes = waveguide::find_slab_modes(g, kFundamental);
            const auto fd = oracle::fd_effective_indices(g, kFundamental, 1e-3);
            if (fd.size() != modes.size()) worst = 1.0;
            for (std::size_t q = 0; q < std::min(fd.size(), modes.size()); ++q) {
                worst = std::max(worst, std::abs(modes[q].effective_index - fd[q]));
            }
        }
        v.add(worst <= 1e-6, fmt("slab: max |dn_eff| vs finite differences %.1e (<= 1e-6)", worst));
    }

    // Bend roots.
    {
        const BendGeometry disk = paper(3).bend;
        const auto modes = bendmode::find_bend_modes(disk, kFundamental, 6);
        const auto roots = oracle::scan_roots({5.0, 1.5, 1.0, 0.0, kFundamental}, {20.0, 42.0, -0.7, 0.08, 89, 14});
        double residual = 0.0, match = roots.size() == modes.size() ? 0.0 : 1.0;
        bool passive = true, ordered = true;
        for (std::size_t p = 0; p < modes.size(); ++p) {
            residual = std::max(residual,
                                std::abs(bendmode::dispersion_residual(disk, kFundamental, modes[p].angular_order)));
            double best = 1e9;
            for (cd r : roots) best = std::min(best, std::abs(r - modes[p].angular_order));
            match = std::max(match, best);
            passive = passive && modes[p].gamma.imag() < 0.0;
            if (p > 0) ordered = ordered && -modes[p].gamma.imag() > -modes[p - 1].gamma.imag();
        }
        v.add(residual < 1e-8 && match <= 1e-6 && passive && ordered,
              fmt("bend roots: residual %.1e (< 1e-8), |dnu| vs brute force %.1e (<= 1e-6), passive %s, "
                  "loss increasing with order %s",
                  residual, match, passive ? "yes" : "no", ordered ? "yes" : "no"));
    }

    // Coupler.
    {
        const ResonatorConfig c = paper(3);
        const auto modes = solve_modes(c, kFundamental);
        coupler::CouplerNumerics num;
        num.verify_step = false;
        coupler::CouplerGeometry g = coupler::make_coupler_geometry(c.bend, c.slab, 0.2, num);
        auto run = [&](double h) {
            g.z_step = h;
            return coupler::integrate_cme(modes.bends, modes.straights, g, num).transfer;
        };
        const coupler::Matrix ref = run(0.1 / 8), t1 = run(0.1), t2 = run(0.05);
        const double ratio = (t1 - ref).cwiseAbs().maxCoeff() / (t2 - ref).cwiseAbs().maxCoeff();
        v.add(std::abs(ratio - 16.0) <= 0.2 * 16.0, fmt("RK4 error ratio %.2f (16 +- 20%%)", ratio));

        const auto s = coupler::compute_scattering_matrix(c.bend, c.slab, 0.2, kFundamental, 3, 1);
        v.add(s.max_singular_value() <= 1.0 + 5e-3,
              fmt("S sub-unitarity: max singular value %.4f (<= 1.005)", s.max_singular_value()));

        const auto gl = coupler::make_coupler_geometry(c.bend, c.slab, 2.0);
        const auto far = coupler::solve_coupler(modes.bends, modes.straights, gl).scattering;
        coupler::Matrix d = coupler::Matrix::Zero(4, 4);
        const double dtheta = gl.port_angle(gl.z_out) - gl.port_angle(gl.z_in);
        for (int p = 0; p < 3; ++p) d(p, p) = std::exp(cd(0.0, -1.0) * modes.bends[p].angular_order * dtheta);
        d(3, 3) = std::exp(cd(0.0, -modes.straights[0].propagation_constant) * (gl.z_out - gl.z_in));
        const double dev = (far.entries - d).cwiseAbs().maxCoeff();
        v.add(dev <= 1e-2, fmt("decoupled limit at g = 2 um: max |S - diag phases| = %.3f (<= 1e-2)", dev));
    }

    // Loop.
    {
        const ResonatorConfig c = paper(3);
        double residual = 0.0;
        for (double lambda : {kFundamental, kHigher, kOff}) {
            residual = std::max(residual, solve_device(c, lambda, unit_input(c), Vector::Zero(1)).loop.residual);
        }
        v.add(residual <= 1e-12, fmt("loop residual %.1e (<= 1e-12)", residual));

        double total = 0.0, single = 0.0, at = 0.0;
        for (const auto& p : nb3) {
            if (p.total_transmitted() + p.total_dropped() > total) {
                total = p.total_transmitted() + p.total_dropped();
                at = p.wavelength;
            }
            single = std::max({single, p.total_transmitted(), p.total_dropped()});
        }
        v.add(total <= 1.0 + 5e-3 && single <= 1.0 + 5e-3,
              fmt("power bound: max P_T + P_D = %.4f at %.5f um, max single port %.4f (<= 1.005)", total, at,
                  single));

        const DeviceSolution& base = solve_device(c, kFundamental, unit_input(c), Vector::Zero(1));
        const coupler::ScatteringMatrix& s1 = base.coupler1.scattering;
        const coupler::ScatteringMatrix& s2 = base.coupler2.scattering;
        const cd k(0.6, -1.3);
        const Vector a = Vector::Constant(1, cd(0.3, 0.4)), cc = Vector::Constant(1, cd(-0.2, 0.1));
        const auto x = solve_loop(s1, s2, base.bends, base.segments.l1, base.segments.l2, a, cc);
        const auto y = solve_loop(s1, s2, base.bends, base.segments.l1, base.segments.l2, k * a, k * cc);
        const auto z = solve_loop(s1, s2, base.bends, base.segments.l1, base.segments.l2, Vector::Zero(1),
                                  Vector::Zero(1));
        const double lin = std::max({(y.a - k * x.a).cwiseAbs().maxCoeff(),
                                     (y.through - k * x.through).cwiseAbs().maxCoeff(),
                                     (y.drop - k * x.drop).cwiseAbs().maxCoeff()}) /
                           std::abs(k);
        const double zero = std::max({z.a.cwiseAbs().maxCoeff(), z.through.cwiseAbs().maxCoeff(),
                                      z.drop.cwiseAbs().maxCoeff()});
        v.add(lin <= 1e-12 && zero == 0.0, fmt("linearity error %.1e, zero-input output %.1e", lin, zero));
    }
    return v;
}

Verdict criterion_determinism() {
    Verdict v;
    const ResonatorConfig c = paper(3);
    const auto serial = compute_spectrum(c, 1.042, 1.044, kStep, 1);
    const auto parallel = compute_spectrum(c, 1.042, 1.044, kStep, 4);
    const auto again = compute_spectrum(c, 1.042, 1.044, kStep, 1);
    v.add(bitwise_equal(serial, parallel), fmt("serial vs 4 workers over %zu points: %s", serial.size(),
                                               bitwise_equal(serial, parallel) ? "identical" : "DIFFERENT"));
    v.add(bitwise_equal(serial, again), fmt("repeated serial run: %s",
                                            bitwise_equal(serial, again) ? "identical" : "DIFFERENT"));
    return v;
}

bool report(int id, const std::string& title, const Verdict& v) {
    std::cout << (v.pass() ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << '\n';
    for (const auto& c : v.checks) std::cout << "        [" << (c.pass ? "ok" : "failed") << "] " << c.what << '\n';
    std::cout.flush();
    return v.pass();
}

template <class F>
bool guarded(int id, const std::string& title, F&& f) {
    try {
        return report(id, title, f());
    } catch (const std::exception& e) {
        Verdict v;
        v.add(false, std::string("exception: ") + e.what());
        return report(id, title, v);
    }
}

}  // namespace

int main() {
    std::vector<SpectrumPoint> nb3;
    bool ok = true;
    ok &= guarded(1, "resonance locations", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        nb3 = compute_spectrum(paper(3), kStart, kStop, kStep);
        return criterion_resonances(nb3, seconds_since(t0));
    });
    ok &= guarded(2, "single-mode hierarchy", [] { return criterion_single_mode(); });
    ok &= guarded(3, "mode-count convergence", [&] { return criterion_mode_count(nb3); });
    ok &= guarded(4, "field-map qualitative checks", [] { return criterion_field_maps(); });
    ok &= guarded(5, "property suite", [&] { return criterion_properties(nb3); });
    ok &= guarded(6, "determinism", [] { return criterion_determinism(); });
    return ok ? 0 : 1;
}
