/**
 * @file mrcmt.cpp
 * @brief Command-line front end: spectra, field maps, mode tables, coupler matrices.
 *
 * Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
 */

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "mrcmt/config.hpp"

namespace {

using namespace mrcmt;
using config::RunConfig;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Output target that disappears unless the run completes.
class Output {
public:
    explicit Output(std::string path) : path_(std::move(path)) {
        if (path_.empty() || path_ == "-") return;
        file_.open(path_, std::ios::out | std::ios::trunc);
        if (!file_) throw ValidationError("cannot open output file '" + path_ + "'");
    }
    Output(const Output&) = delete;
    Output& operator=(const Output&) = delete;

    ~Output() {
        if (committed_ || !file_.is_open()) return;
        file_.close();
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }

    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

    void commit() {
        stream().flush();
        if (!stream()) throw ValidationError("write to '" + (path_.empty() ? "stdout" : path_) + "' failed");
        if (file_.is_open()) file_.close();
        committed_ = true;
    }

private:
    std::string path_;
    std::ofstream file_;
    bool committed_ = false;
};

void log_config(const RunConfig& c) {
    std::cerr << "mrcmt: effective configuration\n";
    std::istringstream in(config::format_config(c));
    for (std::string line; std::getline(in, line);) std::cerr << "  " << line << '\n';
}

int run_spectrum(const RunConfig& c, const std::string& out_path) {
    Output out(out_path);
    const auto sp = resonator::compute_spectrum(c.device, c.scan.start, c.scan.stop, c.scan.step, c.workers);
    std::ostream& os = out.stream();
    os << "lambda_um";
    for (int q = 0; q < c.device.n_straight_modes; ++q) os << ",P_T_q" << q;
    for (int q = 0; q < c.device.n_straight_modes; ++q) os << ",P_D_q" << q;
    for (int p : c.device.selected_orders()) os << ",P_cav_p" << p;
    os << '\n';
    for (const auto& pt : sp) {
        os << num(pt.wavelength);
        for (double v : pt.transmitted) os << ',' << num(v);
        for (double v : pt.dropped) os << ',' << num(v);
        for (double v : pt.cavity) os << ',' << num(v);
        os << '\n';
    }
    out.commit();
    std::cerr << "mrcmt: " << sp.size() << " wavelength points\n";
    if (sp.size() >= 3) {
        for (const auto& r : resonator::find_resonances(sp)) {
            std::cerr << "mrcmt: resonance at " << num(r.wavelength) << " um, P_D = " << num(r.dropped_power)
                      << ", " << r.classification << " (radial order " << r.dominant_order << ")\n";
        }
    }
    return 0;
}

int run_fieldmap(const RunConfig& c, double lambda, const std::string& out_path) {
    Output out(out_path);
    const auto s = resonator::solve_device(c.device, lambda, resonator::unit_input(c.device),
                                           resonator::Vector::Zero(c.device.n_straight_modes));
    const auto m = resonator::compose_field_map(s, c.outputs.grid);
    std::ostream& os = out.stream();
    os << "x_um,z_um,abs_Ey,re_Ey,im_Ey\n";
    for (std::size_t j = 0; j < m.z.size(); ++j) {
        for (std::size_t i = 0; i < m.x.size(); ++i) {
            const cplx v = m.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            os << num(m.x[i]) << ',' << num(m.z[j]) << ',' << num(std::abs(v)) << ',' << num(v.real()) << ','
               << num(v.imag()) << '\n';
        }
    }
    out.commit();
    std::cerr << "mrcmt: field map at " << num(lambda) << " um, P_T = " << num(s.loop.through.squaredNorm())
              << ", P_D = " << num(s.loop.drop.squaredNorm()) << '\n';
    return 0;
}

int run_modes(const RunConfig& c, double lambda, const std::string& out_path) {
    Output out(out_path);
    const auto modes = resonator::solve_modes(c.device, lambda);
    const double k = wavenumber(lambda);
    const double circumference = 2.0 * kPi * c.device.bend.radius;
    std::ostream& os = out.stream();
    os << "kind,order,re_gamma_per_um,im_gamma_per_um,n_eff,roundtrip_survival\n";
    for (const auto& b : modes.bends) {
        os << "bend," << b.radial_order << ',' << num(b.gamma.real()) << ',' << num(b.gamma.imag()) << ','
           << num(b.gamma.real() / k) << ',' << num(std::exp(b.gamma.imag() * circumference)) << '\n';
    }
    for (const auto& s : modes.straights) {
        os << "straight," << s.order << ',' << num(s.propagation_constant) << ",0," << num(s.effective_index)
           << ",1\n";
    }
    out.commit();
    return 0;
}

int run_coupler(const RunConfig& c, double lambda, const std::string& out_path) {
    Output out(out_path);
    const auto s = resonator::solve_device(c.device, lambda, resonator::unit_input(c.device),
                                           resonator::Vector::Zero(c.device.n_straight_modes));
    std::vector<std::string> labels;
    for (const auto& b : s.bends) labels.push_back("bend_p" + std::to_string(b.radial_order));
    for (const auto& m : s.straights) labels.push_back("straight_q" + std::to_string(m.order));
    std::ostream& os = out.stream();
    os << "coupler,out_port,in_port,re_S,im_S,abs_S\n";
    int index = 1;
    for (const auto* sol : {&s.coupler1, &s.coupler2}) {
        const coupler::Matrix& e = sol->scattering.entries;
        for (Eigen::Index i = 0; i < e.rows(); ++i) {
            for (Eigen::Index j = 0; j < e.cols(); ++j) {
                os << index << ',' << labels[static_cast<std::size_t>(i)] << ','
                   << labels[static_cast<std::size_t>(j)] << ',' << num(e(i, j).real()) << ','
                   << num(e(i, j).imag()) << ',' << num(std::abs(e(i, j))) << '\n';
            }
        }
        ++index;
    }
    out.commit();
    return 0;
}

int run_echo(const RunConfig& c, const std::string& out_path) {
    Output out(out_path);
    out.stream() << config::format_config(c);
    out.commit();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupled-mode simulator for 2D circular microresonator add/drop filters"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::optional<int> workers;
    std::optional<double> lambda;
    app.add_option("--config", config_path, "Configuration file")->required();
    app.add_option("--workers", workers, "Worker threads for spectrum scans (overrides the config)");
    app.add_option("--out", out_path, "Output file (overrides [outputs]; '-' for standard output)");
    app.fallthrough();

    auto* spectrum = app.add_subcommand("spectrum", "Transmission/drop power spectrum");
    auto* fieldmap = app.add_subcommand("fieldmap", "|E_y| map of the full device");
    fieldmap->add_option("--lambda", lambda, "Wavelength in um")->required();
    auto* modes = app.add_subcommand("modes", "Bend and straight mode tables");
    modes->add_option("--lambda", lambda, "Wavelength in um (default: lambda_start)");
    auto* coupler = app.add_subcommand("coupler", "Scattering matrices of both couplers");
    coupler->add_option("--lambda", lambda, "Wavelength in um")->required();
    auto* echo = app.add_subcommand("config", "Print the effective configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        RunConfig c = config::load_config(config_path);
        if (workers) {
            if (*workers < 1) throw ValidationError("--workers must be >= 1");
            c.workers = *workers;
        }
        auto target = [&](const std::string& configured) { return out_path.empty() ? configured : out_path; };
        if (*echo) return run_echo(c, out_path);
        log_config(c);
        if (*spectrum) return run_spectrum(c, target(c.outputs.spectrum));
        if (*fieldmap) return run_fieldmap(c, *lambda, target(c.outputs.fieldmap));
        if (*modes) return run_modes(c, lambda.value_or(c.scan.start), target(c.outputs.modes));
        if (*coupler) return run_coupler(c, *lambda, target(c.outputs.coupler));
    } catch (const ValidationError& e) {
        std::cerr << "mrcmt: configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "mrcmt: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "mrcmt: error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitConfig;
}
