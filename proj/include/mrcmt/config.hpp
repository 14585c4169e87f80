/**
 * @file config.hpp
 * @brief Run configuration: INI-style text format, validation and echo.
 *
 * Format: flat sections `[device]`, `[scan]`, `[numerics]`, `[outputs]`,
 * one `key = value` per line, `#` starts a comment. Lengths and wavelengths
 * are in um. Only the device keys are required; everything else has a
 * default. Every problem found is reported with `file:line`, and all of
 * them are collected before throwing.
 */

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "resonator.hpp"

namespace mrcmt::config {

/// Wavelength scan in um.
struct ScanSpec {
    double start = 1.015;
    double stop = 1.060;
    double step = 2.5e-4;

    bool operator==(const ScanSpec&) const = default;
};

/// Output destinations; an empty path means standard output.
struct OutputSpec {
    std::string spectrum, fieldmap, modes, coupler;
    resonator::GridSpec grid;

    bool operator==(const OutputSpec& o) const {
        return spectrum == o.spectrum && fieldmap == o.fieldmap && modes == o.modes && coupler == o.coupler &&
               grid.x_min == o.grid.x_min && grid.x_max == o.grid.x_max && grid.z_min == o.grid.z_min &&
               grid.z_max == o.grid.z_max && grid.nx == o.grid.nx && grid.nz == o.grid.nz;
    }
};

struct RunConfig {
    resonator::ResonatorConfig device;
    ScanSpec scan;
    OutputSpec outputs;
    int workers = 1;
};

/// Malformed or invalid configuration. The message lists every problem.
class ConfigError : public ValidationError {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : ValidationError(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s;
        for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "\n" : "") + p[i];
        return s;
    }
    std::vector<std::string> problems_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Shortest text that reads back to the same double.
inline std::string format_real(double v) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline bool parse_real(std::string_view s, double& out) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_int(std::string_view s, int& out) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline bool parse_int_list(std::string_view s, std::vector<int>& out) {
    out.clear();
    if (trim(s).empty()) return true;
    while (true) {
        const auto comma = s.find(',');
        int v = 0;
        if (!parse_int(trim(s.substr(0, comma)), v)) return false;
        out.push_back(v);
        if (comma == std::string_view::npos) return true;
        s.remove_prefix(comma + 1);
    }
}

enum class Kind { real, integer, boolean, int_list, text };

struct Key {
    std::string section, name;
    Kind kind;
    bool required;
    std::function<void*(RunConfig&)> field;  // typed by kind
};

template <class T>
Key key(std::string section, std::string name, Kind kind, bool required, T& (*get)(RunConfig&)) {
    return {std::move(section), std::move(name), kind, required, [get](RunConfig& c) -> void* { return &get(c); }};
}

#define MRCMT_FIELD(type, expr) +[](RunConfig& c) -> type& { return expr; }

inline const std::vector<Key>& keys() {
    static const std::vector<Key> k = {
        key("device", "R", Kind::real, true, MRCMT_FIELD(double, c.device.bend.radius)),
        key("device", "w_c", Kind::real, true, MRCMT_FIELD(double, c.device.bend.core_width)),
        key("device", "w_s", Kind::real, true, MRCMT_FIELD(double, c.device.slab.width)),
        key("device", "g1", Kind::real, true, MRCMT_FIELD(double, c.device.gap1)),
        key("device", "g2", Kind::real, true, MRCMT_FIELD(double, c.device.gap2)),
        key("device", "n_c", Kind::real, true, MRCMT_FIELD(double, c.device.bend.core_index)),
        key("device", "n_s", Kind::real, true, MRCMT_FIELD(double, c.device.slab.core_index)),
        key("device", "n_b", Kind::real, true, MRCMT_FIELD(double, c.device.bend.background_index)),
        key("scan", "lambda_start", Kind::real, false, MRCMT_FIELD(double, c.scan.start)),
        key("scan", "lambda_stop", Kind::real, false, MRCMT_FIELD(double, c.scan.stop)),
        key("scan", "lambda_step", Kind::real, false, MRCMT_FIELD(double, c.scan.step)),
        key("numerics", "N_b", Kind::integer, false, MRCMT_FIELD(int, c.device.n_bend_modes)),
        key("numerics", "N_s", Kind::integer, false, MRCMT_FIELD(int, c.device.n_straight_modes)),
        key("numerics", "bend_orders", Kind::int_list, false, MRCMT_FIELD(std::vector<int>, c.device.bend_orders)),
        key("numerics", "x_step", Kind::real, false, MRCMT_FIELD(double, c.device.numerics.x_step)),
        key("numerics", "z_step", Kind::real, false, MRCMT_FIELD(double, c.device.numerics.z_step)),
        key("numerics", "inner_margin", Kind::real, false, MRCMT_FIELD(double, c.device.numerics.inner_margin)),
        key("numerics", "outer_margin", Kind::real, false, MRCMT_FIELD(double, c.device.numerics.outer_margin)),
        key("numerics", "z_o", Kind::real, false, MRCMT_FIELD(double, c.device.numerics.half_length)),
        key("numerics", "max_condition", Kind::real, false, MRCMT_FIELD(double, c.device.numerics.max_condition)),
        key("numerics", "max_tail_fraction", Kind::real, false,
            MRCMT_FIELD(double, c.device.numerics.max_tail_fraction)),
        key("numerics", "verify_step", Kind::boolean, false, MRCMT_FIELD(bool, c.device.numerics.verify_step)),
        key("numerics", "step_tolerance", Kind::real, false, MRCMT_FIELD(double, c.device.numerics.step_tolerance)),
        key("numerics", "max_step_halvings", Kind::integer, false,
            MRCMT_FIELD(int, c.device.numerics.max_step_halvings)),
        key("numerics", "workers", Kind::integer, false, MRCMT_FIELD(int, c.workers)),
        key("outputs", "spectrum", Kind::text, false, MRCMT_FIELD(std::string, c.outputs.spectrum)),
        key("outputs", "fieldmap", Kind::text, false, MRCMT_FIELD(std::string, c.outputs.fieldmap)),
        key("outputs", "modes", Kind::text, false, MRCMT_FIELD(std::string, c.outputs.modes)),
        key("outputs", "coupler", Kind::text, false, MRCMT_FIELD(std::string, c.outputs.coupler)),
        key("outputs", "grid_x_min", Kind::real, false, MRCMT_FIELD(double, c.outputs.grid.x_min)),
        key("outputs", "grid_x_max", Kind::real, false, MRCMT_FIELD(double, c.outputs.grid.x_max)),
        key("outputs", "grid_z_min", Kind::real, false, MRCMT_FIELD(double, c.outputs.grid.z_min)),
        key("outputs", "grid_z_max", Kind::real, false, MRCMT_FIELD(double, c.outputs.grid.z_max)),
        key("outputs", "grid_nx", Kind::integer, false, MRCMT_FIELD(int, c.outputs.grid.nx)),
        key("outputs", "grid_nz", Kind::integer, false, MRCMT_FIELD(int, c.outputs.grid.nz)),
    };
    return k;
}

#undef MRCMT_FIELD

inline const char* kind_name(Kind k) {
    switch (k) {
        case Kind::real: return "a finite number";
        case Kind::integer: return "an integer";
        case Kind::boolean: return "true or false";
        case Kind::int_list: return "a comma-separated list of integers";
        case Kind::text: return "text";
    }
    return "";
}

inline bool assign(const Key& k, RunConfig& c, std::string_view v) {
    void* f = k.field(c);
    switch (k.kind) {
        case Kind::real: return parse_real(v, *static_cast<double*>(f));
        case Kind::integer: return parse_int(v, *static_cast<int*>(f));
        case Kind::int_list: return parse_int_list(v, *static_cast<std::vector<int>*>(f));
        case Kind::text: *static_cast<std::string*>(f) = std::string(v); return true;
        case Kind::boolean:
            if (v == "true" || v == "false") {
                *static_cast<bool*>(f) = v == "true";
                return true;
            }
            return false;
    }
    return false;
}

inline std::string render(const Key& k, const RunConfig& c) {
    void* f = k.field(const_cast<RunConfig&>(c));
    switch (k.kind) {
        case Kind::real: return format_real(*static_cast<double*>(f));
        case Kind::integer: return std::to_string(*static_cast<int*>(f));
        case Kind::boolean: return *static_cast<bool*>(f) ? "true" : "false";
        case Kind::text: return *static_cast<std::string*>(f);
        case Kind::int_list: {
            std::string s;
            for (int v : *static_cast<std::vector<int>*>(f)) s += (s.empty() ? "" : ", ") + std::to_string(v);
            return s;
        }
    }
    return {};
}

/// Per-key constraints; each entry names the key it is reported against.
struct Rule {
    std::string section, name, constraint;
    std::function<bool(const RunConfig&)> ok;
};

inline const std::vector<Rule>& rules() {
    static const std::vector<Rule> r = {
        {"device", "R", "must be > 0", [](const RunConfig& c) { return c.device.bend.radius > 0.0; }},
        {"device", "w_c", "must satisfy 0 <= w_c < R (0 means a disk)",
         [](const RunConfig& c) { return c.device.bend.core_width >= 0.0 && c.device.bend.core_width < c.device.bend.radius; }},
        {"device", "w_s", "must be > 0", [](const RunConfig& c) { return c.device.slab.width > 0.0; }},
        {"device", "g1", "must be > 0", [](const RunConfig& c) { return c.device.gap1 > 0.0; }},
        {"device", "g2", "must be > 0", [](const RunConfig& c) { return c.device.gap2 > 0.0; }},
        {"device", "n_b", "must be >= 1", [](const RunConfig& c) { return c.device.bend.background_index >= 1.0; }},
        {"device", "n_c", "must exceed n_b",
         [](const RunConfig& c) { return c.device.bend.core_index > c.device.bend.background_index; }},
        {"device", "n_s", "must exceed n_b",
         [](const RunConfig& c) { return c.device.slab.core_index > c.device.bend.background_index; }},
        {"scan", "lambda_start", "must be > 0", [](const RunConfig& c) { return c.scan.start > 0.0; }},
        {"scan", "lambda_stop", "must be >= lambda_start", [](const RunConfig& c) { return c.scan.stop >= c.scan.start; }},
        {"scan", "lambda_step", "must be > 0", [](const RunConfig& c) { return c.scan.step > 0.0; }},
        {"numerics", "N_b", "must be >= 1", [](const RunConfig& c) { return c.device.n_bend_modes >= 1; }},
        {"numerics", "N_s", "must be >= 1", [](const RunConfig& c) { return c.device.n_straight_modes >= 1; }},
        {"numerics", "bend_orders", "must be empty or list N_b distinct non-negative orders",
         [](const RunConfig& c) {
             const auto& o = c.device.bend_orders;
             if (o.empty()) return true;
             const std::set<int> u(o.begin(), o.end());
             return static_cast<int>(o.size()) == c.device.n_bend_modes && u.size() == o.size() && *u.begin() >= 0;
         }},
        {"numerics", "x_step", "must be > 0", [](const RunConfig& c) { return c.device.numerics.x_step > 0.0; }},
        {"numerics", "z_step", "must be > 0", [](const RunConfig& c) { return c.device.numerics.z_step > 0.0; }},
        {"numerics", "inner_margin", "must be > 0",
         [](const RunConfig& c) { return c.device.numerics.inner_margin > 0.0; }},
        {"numerics", "outer_margin", "must be > 0",
         [](const RunConfig& c) { return c.device.numerics.outer_margin > 0.0; }},
        {"numerics", "z_o", "must satisfy 0 <= z_o <= R (0 selects the default window)",
         [](const RunConfig& c) {
             return c.device.numerics.half_length >= 0.0 && c.device.numerics.half_length <= c.device.bend.radius;
         }},
        {"numerics", "max_condition", "must be > 1",
         [](const RunConfig& c) { return c.device.numerics.max_condition > 1.0; }},
        {"numerics", "max_tail_fraction", "must lie in (0, 1)",
         [](const RunConfig& c) {
             return c.device.numerics.max_tail_fraction > 0.0 && c.device.numerics.max_tail_fraction < 1.0;
         }},
        {"numerics", "step_tolerance", "must be > 0",
         [](const RunConfig& c) { return c.device.numerics.step_tolerance > 0.0; }},
        {"numerics", "max_step_halvings", "must be >= 0",
         [](const RunConfig& c) { return c.device.numerics.max_step_halvings >= 0; }},
        {"numerics", "workers", "must be >= 1", [](const RunConfig& c) { return c.workers >= 1; }},
        {"outputs", "grid_x_max", "must exceed grid_x_min",
         [](const RunConfig& c) { return c.outputs.grid.x_max > c.outputs.grid.x_min; }},
        {"outputs", "grid_z_max", "must exceed grid_z_min",
         [](const RunConfig& c) { return c.outputs.grid.z_max > c.outputs.grid.z_min; }},
        {"outputs", "grid_nx", "must be >= 2", [](const RunConfig& c) { return c.outputs.grid.nx >= 2; }},
        {"outputs", "grid_nz", "must be >= 2", [](const RunConfig& c) { return c.outputs.grid.nz >= 2; }},
    };
    return r;
}

}  // namespace detail

/// Parses configuration text; `source` prefixes every message.
inline RunConfig parse_config(std::string_view text, const std::string& source) {
    RunConfig c;
    std::vector<std::string> problems;
    std::map<std::string, int> seen;  // "section.key" -> line
    const std::set<std::string> sections = {"device", "scan", "numerics", "outputs"};
    std::string section;
    int line_no = 0;
    auto where = [&](int line) { return source + ":" + std::to_string(line) + ": "; };

    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') {
                problems.push_back(where(line_no) + "malformed section header '" + std::string(line) + "'");
                section.clear();
                continue;
            }
            section = std::string(detail::trim(line.substr(1, line.size() - 2)));
            if (!sections.count(section)) {
                problems.push_back(where(line_no) + "unknown section [" + section +
                                   "] (expected device, scan, numerics or outputs)");
                section = "?";
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            problems.push_back(where(line_no) + "expected 'key = value', got '" + std::string(line) + "'");
            continue;
        }
        const std::string name(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (section.empty()) {
            problems.push_back(where(line_no) + "key '" + name + "' appears before any section header");
            continue;
        }
        if (section == "?") continue;  // already reported
        const auto& ks = detail::keys();
        const auto it = std::find_if(ks.begin(), ks.end(),
                                     [&](const detail::Key& k) { return k.section == section && k.name == name; });
        if (it == ks.end()) {
            problems.push_back(where(line_no) + "unknown key '" + name + "' in [" + section + "]");
            continue;
        }
        const std::string id = section + "." + name;
        if (const auto prev = seen.find(id); prev != seen.end()) {
            problems.push_back(where(line_no) + "duplicate key '" + name + "' in [" + section +
                               "] (first set on line " + std::to_string(prev->second) + ")");
            continue;
        }
        seen[id] = line_no;
        if (!detail::assign(*it, c, value)) {
            problems.push_back(where(line_no) + "[" + section + "] " + name + ": '" + std::string(value) +
                               "' is not " + detail::kind_name(it->kind));
        }
    }

    for (const auto& k : detail::keys()) {
        if (k.required && !seen.count(k.section + "." + k.name)) {
            problems.push_back(source + ": missing required key '" + k.name + "' in [" + k.section + "]");
        }
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));

    c.device.slab.background_index = c.device.bend.background_index;
    for (const auto& r : detail::rules()) {
        if (r.ok(c)) continue;
        const auto at = seen.find(r.section + "." + r.name);
        const std::string pos = at != seen.end() ? where(at->second) : source + ": ";
        problems.push_back(pos + "[" + r.section + "] " + r.name + " = " +
                           detail::render(*std::find_if(detail::keys().begin(), detail::keys().end(),
                                                        [&](const detail::Key& k) {
                                                            return k.section == r.section && k.name == r.name;
                                                        }),
                                          c) +
                           ": " + r.constraint);
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));

    // Backstop: the module-level checks.
    try {
        c.device.validate();
        resonator::segment_lengths(c.device);
    } catch (const ValidationError& e) {
        throw ConfigError({source + ": " + e.what()});
    }
    return c;
}

/// Reads and parses a configuration file.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path + ": cannot open configuration file"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

/// Effective configuration in the input format; reloading it reproduces the run.
inline std::string format_config(const RunConfig& c) {
    std::string out, section;
    for (const auto& k : detail::keys()) {
        if (k.section != section) {
            section = k.section;
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += k.name + " = " + detail::render(k, c) + "\n";
    }
    return out;
}

}  // namespace mrcmt::config
