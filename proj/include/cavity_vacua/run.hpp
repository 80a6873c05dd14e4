#pragma once

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "analytics.hpp"
#include "classical_modes.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "groundstate.hpp"
#include "quantum_model.hpp"

namespace cavity_vacua::run {

using json = nlohmann::ordered_json;

inline constexpr const char* version = "0.1.0";

// ---------------------------------------------------------------- formatting

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// A cell is either a number, text, or empty (absent value).
struct Cell {
    std::optional<double> number;
    std::optional<std::string> text;

    Cell() = default;
    Cell(double v) : number(v) {}
    Cell(std::optional<double> v) : number(v) {}
    Cell(int v) : number(double(v)) {}
    Cell(bool b) : text(b ? "true" : "false") {}
    Cell(const char* s) : text(s) {}
    Cell(std::string s) : text(std::move(s)) {}

    std::string str() const {
        if (number) return format_number(*number);
        if (text) return csv_field(*text);
        return "";
    }
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    std::string to_csv() const {
        std::string out;
        for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + csv_field(header[i]);
        out += "\r\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i].str();
            out += "\r\n";
        }
        return out;
    }
};

// ---------------------------------------------------------------- config

inline json default_config() {
    return json{
        {"model", "EDM"},
        {"params",
         {{"omega0", 1.0},
          {"omega_c", 1.0},
          {"g", 0.5},
          {"epsilon", 0.0},
          {"N", 8},
          {"lambda_bias", 1e-3},
          {"n_max", 0},
          {"xi_bar", 1.0}}},
        {"workers", 0},
    };
}

inline const std::set<std::string>& param_keys() {
    static const std::set<std::string> k{"omega0", "omega_c", "g", "alpha", "epsilon", "N",
                                         "lambda_bias", "n_max", "xi_bar"};
    return k;
}

inline json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

inline std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    std::string p;
    while (std::getline(ss, p, '.')) {
        if (p.empty()) throw SchemaError("empty component in key path '" + path + "'");
        parts.push_back(p);
    }
    if (parts.empty()) throw SchemaError("empty key path");
    return parts;
}

// Short parameter names resolve into the params object.
inline std::string resolve_path(const std::string& name) {
    if (name.find('.') != std::string::npos) return name;
    if (param_keys().count(name)) return "params." + name;
    throw SchemaError("unknown variable '" + name + "'");
}

inline void set_path(json& cfg, const std::string& path, const json& value) {
    auto parts = split_path(path);
    json* node = &cfg;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw SchemaError("'" + path + "' does not address an object member");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    if (!node->is_object()) throw SchemaError("'" + path + "' does not address an object member");
    (*node)[parts.back()] = value;
    // g and alpha are alternative spellings of one parameter
    if (parts.size() == 2 && parts[0] == "params") {
        if (parts[1] == "g") node->erase("alpha");
        if (parts[1] == "alpha") node->erase("g");
    }
}

inline void apply_override(json& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw SchemaError("override must look like key=value: '" + kv + "'");
    std::string key = kv.substr(0, eq);
    // bare parameter names (g=0.8) mean params.g; other bare keys stay top level
    if (key.find('.') == std::string::npos && param_keys().count(key)) key = "params." + key;
    set_path(cfg, key, parse_value(kv.substr(eq + 1)));
}

inline json merge_config(const json& user) {
    if (!user.is_object()) throw SchemaError("configuration must be a JSON object");
    static const std::set<std::string> sections{"model",     "params",    "geometry", "sweep",   "phase_diagram",
                                                "adiabatic", "qfunction", "polariton", "outputs", "workers"};
    json cfg = default_config();
    for (auto it = user.begin(); it != user.end(); ++it) {
        if (!sections.count(it.key())) throw SchemaError("unknown key '" + it.key() + "'");
        if (it.key() == "params") {
            if (!it.value().is_object()) throw SchemaError("'params' must be an object");
            for (auto p = it.value().begin(); p != it.value().end(); ++p) set_path(cfg, "params." + p.key(), p.value());
        } else {
            cfg[it.key()] = it.value();
        }
    }
    return cfg;
}

inline json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot read config file '" + path + "'");
    try {
        return merge_config(json::parse(in));
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("invalid JSON: ") + e.what());
    }
}

namespace detail {

inline double number(const json& j, const std::string& what) {
    if (!j.is_number()) throw SchemaError("'" + what + "' must be a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) throw SchemaError("'" + what + "' must be finite");
    return v;
}

inline int integer(const json& j, const std::string& what) {
    double v = number(j, what);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw SchemaError("'" + what + "' must be an integer");
    return int(v);
}

inline const json* find(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

inline double number_or(const json& obj, const std::string& key, double fallback, const std::string& ctx) {
    const json* v = find(obj, key);
    return v ? number(*v, ctx + "." + key) : fallback;
}

inline int integer_or(const json& obj, const std::string& key, int fallback, const std::string& ctx) {
    const json* v = find(obj, key);
    return v ? integer(*v, ctx + "." + key) : fallback;
}

inline void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!obj.is_object()) throw SchemaError("'" + ctx + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw SchemaError("unknown key '" + ctx + "." + it.key() + "'");
}

}  // namespace detail

inline ModelKind model_of(const json& cfg) {
    const json* m = detail::find(cfg, "model");
    if (!m || !m->is_string()) throw SchemaError("'model' must be a string");
    auto k = model_from_string(m->get<std::string>());
    if (!k) throw SchemaError("unknown model '" + m->get<std::string>() + "'");
    return *k;
}

inline ModelParams params_of(const json& cfg) {
    const json* pj = detail::find(cfg, "params");
    if (!pj) throw SchemaError("missing 'params'");
    detail::only_keys(*pj, param_keys(), "params");
    ModelParams p;
    p.omega0 = detail::number_or(*pj, "omega0", p.omega0, "params");
    p.omega_c = detail::number_or(*pj, "omega_c", p.omega_c, "params");
    p.epsilon = detail::number_or(*pj, "epsilon", p.epsilon, "params");
    p.N = detail::integer_or(*pj, "N", p.N, "params");
    p.lambda_bias = detail::number_or(*pj, "lambda_bias", p.lambda_bias, "params");
    p.n_max = detail::integer_or(*pj, "n_max", p.n_max, "params");
    p.xi_bar = detail::number_or(*pj, "xi_bar", p.xi_bar, "params");
    const json* g = detail::find(*pj, "g");
    const json* a = detail::find(*pj, "alpha");
    if (g && a) throw SchemaError("give either params.g or params.alpha, not both");
    if (!(p.omega_c > 0.0)) throw SchemaError("params.omega_c must be positive");
    if (a) {
        double av = detail::number(*a, "params.alpha");
        if (av < 0.0) throw SchemaError("params.alpha must be non-negative");
        p.set_alpha(av);
    } else if (g) {
        p.g = detail::number(*g, "params.g");
    }
    try {
        validate(p);
    } catch (const ArgumentError& e) {
        throw SchemaError(e.what());
    }
    return p;
}

struct GeometryConfig {
    geometry::LatticeSpec lattice;
    geometry::Boundary boundary = geometry::Boundary::InfinitePlates;
    int image_cutoff = 50;
    std::optional<double> nu;
};

inline std::optional<GeometryConfig> geometry_of(const json& cfg) {
    const json* gj = detail::find(cfg, "geometry");
    if (!gj) return std::nullopt;
    if (!gj->is_object()) throw SchemaError("'geometry' must be an object");
    const json* lat = detail::find(*gj, "lattice");
    if (!lat || !lat->is_string()) throw SchemaError("'geometry.lattice' must be a string");
    const std::string kind = lat->get<std::string>();
    const std::string ctx = "geometry";
    GeometryConfig gc;
    std::set<std::string> common{"lattice", "boundary", "image_cutoff", "nu", "d"};
    auto allow = [&](std::set<std::string> extra) {
        extra.insert(common.begin(), common.end());
        detail::only_keys(*gj, extra, ctx);
    };
    double d = detail::number_or(*gj, "d", 0.0, ctx);
    auto need_d = [&] {
        if (!detail::find(*gj, "d")) throw SchemaError("'geometry.d' is required");
        return d;
    };
    if (kind == "SlabSquare") {
        allow({"Nx", "layers"});
        gc.lattice = geometry::SlabSquare{detail::integer_or(*gj, "Nx", 10, ctx),
                                          detail::integer_or(*gj, "layers", 3, ctx), need_d()};
    } else if (kind == "LineStack") {
        allow({"N"});
        gc.lattice = geometry::LineStack{detail::integer_or(*gj, "N", 1, ctx), need_d()};
    } else if (kind == "TriangularLayer") {
        allow({"Nx"});
        gc.lattice = geometry::TriangularLayer{detail::integer_or(*gj, "Nx", 10, ctx), need_d()};
    } else if (kind == "TiltedLine") {
        allow({"N", "theta"});
        gc.lattice = geometry::TiltedLine{detail::integer_or(*gj, "N", 4, ctx), need_d(),
                                          detail::number_or(*gj, "theta", 0.0, ctx)};
    } else if (kind == "PairOfPairs") {
        allow({"dx"});
        gc.lattice = geometry::PairOfPairs{detail::number_or(*gj, "dx", 0.7, ctx), need_d()};
    } else {
        throw SchemaError("unknown lattice '" + kind + "'");
    }
    if (const json* b = detail::find(*gj, "boundary")) {
        if (!b->is_string()) throw SchemaError("'geometry.boundary' must be a string");
        std::string s = b->get<std::string>();
        if (s == "FreeSpace") gc.boundary = geometry::Boundary::FreeSpace;
        else if (s == "InfinitePlates") gc.boundary = geometry::Boundary::InfinitePlates;
        else throw SchemaError("unknown boundary '" + s + "'");
    }
    gc.image_cutoff = detail::integer_or(*gj, "image_cutoff", 50, ctx);
    if (const json* n = detail::find(*gj, "nu")) gc.nu = detail::number(*n, "geometry.nu");
    return gc;
}

inline geometry::CouplingMatrix build_coupling(const GeometryConfig& gc) {
    auto ens = geometry::build_lattice(gc.lattice, gc.boundary, gc.image_cutoff);
    auto c = geometry::coupling(ens);
    if (gc.nu) {
        if (!(*gc.nu > 0.0)) throw SchemaError("'geometry.nu' must be positive");
        c.nu = *gc.nu;
    }
    return c;
}

struct Axis {
    std::string variable;  // resolved dot path
    std::string column;
    std::vector<double> values;
};

inline Axis axis_of(const json& a, const std::string& ctx) {
    if (!a.is_object()) throw SchemaError("'" + ctx + "' must be an object");
    detail::only_keys(a, {"variable", "min", "max", "points", "scale", "values"}, ctx);
    const json* var = detail::find(a, "variable");
    if (!var || !var->is_string()) throw SchemaError("'" + ctx + ".variable' must be a string");
    Axis ax;
    std::string name = var->get<std::string>();
    ax.variable = resolve_path(name);
    ax.column = name.rfind("params.", 0) == 0 ? name.substr(7) : name;
    if (const json* vals = detail::find(a, "values")) {
        if (!vals->is_array()) throw SchemaError("'" + ctx + ".values' must be an array");
        for (const auto& v : *vals) ax.values.push_back(detail::number(v, ctx + ".values"));
    } else {
        const json* pts = detail::find(a, "points");
        if (!pts) throw SchemaError("'" + ctx + "' needs 'values' or 'min'/'max'/'points'");
        int n = detail::integer(*pts, ctx + ".points");
        double lo = detail::number_or(a, "min", std::nan(""), ctx);
        double hi = detail::number_or(a, "max", std::nan(""), ctx);
        if (std::isnan(lo) || std::isnan(hi)) throw SchemaError("'" + ctx + "' needs 'min' and 'max'");
        std::string scale = "linear";
        if (const json* s = detail::find(a, "scale")) {
            if (!s->is_string()) throw SchemaError("'" + ctx + ".scale' must be a string");
            scale = s->get<std::string>();
        }
        if (n < 2) throw SchemaError("'" + ctx + "' needs at least 2 points");
        if (scale == "linear") {
            for (int i = 0; i < n; ++i) ax.values.push_back(lo + (hi - lo) * i / (n - 1));
        } else if (scale == "log") {
            if (!(lo > 0.0 && hi > 0.0)) throw SchemaError("'" + ctx + "' log scale needs positive bounds");
            for (int i = 0; i < n; ++i) ax.values.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
        } else {
            throw SchemaError("'" + ctx + ".scale' must be 'linear' or 'log'");
        }
    }
    if (ax.values.size() < 2) throw SchemaError("'" + ctx + "' needs at least 2 points");
    return ax;
}

inline std::vector<Axis> axes_of(const json& cfg, const std::string& key = "sweep") {
    const json* s = detail::find(cfg, key);
    if (!s) throw SchemaError("missing '" + key + "'");
    std::vector<Axis> axes;
    if (s->is_object()) {
        axes.push_back(axis_of(*s, key));
    } else if (s->is_array()) {
        for (std::size_t i = 0; i < s->size(); ++i) axes.push_back(axis_of((*s)[i], key + "[" + std::to_string(i) + "]"));
    } else {
        throw SchemaError("'" + key + "' must be an axis object or an array of axes");
    }
    if (axes.empty()) throw SchemaError("'" + key + "' has no axes");
    return axes;
}

inline int worker_count(const json& cfg, std::optional<int> flag) {
    if (flag && *flag > 0) return *flag;
    if (const json* w = detail::find(cfg, "workers")) {
        int v = detail::integer(*w, "workers");
        if (v < 0) throw SchemaError("'workers' must be non-negative");
        if (v > 0) return v;
    }
    if (const char* env = std::getenv("CAVITY_VACUA_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

// ---------------------------------------------------------------- execution

// Runs task(i) for i in [0, n) on a pool; indices are claimed from a shared counter.
template <class Task>
void parallel_for(std::size_t n, int workers, Task&& task) {
    workers = std::max(1, std::min<int>(workers, int(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    auto work = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error) error = std::current_exception();
                next.store(n);
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

inline const std::vector<std::string>& point_columns() {
    static const std::vector<std::string> c{"g",  "alpha", "epsilon", "N",  "energy",     "photon_number", "mean_a",
                                            "mean_Sx", "delta_Sx2", "u2", "phi2", "S1", "Sd", "n_max_used",
                                            "converged"};
    return c;
}

struct PointResult {
    ModelParams params;
    double epsilon = 0.0;
    double energy = 0.0;
    Observables obs;
    int n_max_used = 0;
    bool converged = false;
    std::vector<double> correlations;
    int sites = 0;
};

// Solves one parameter point described by a complete config.
inline PointResult compute_point(const json& cfg) {
    const ModelKind kind = model_of(cfg);
    ModelParams p = params_of(cfg);
    auto gcfg = geometry_of(cfg);
    std::optional<geometry::CouplingMatrix> coupling;
    if (gcfg) {
        coupling = build_coupling(*gcfg);
    }
    PointResult r;
    r.epsilon = p.epsilon;

    if (kind == ModelKind::HP || kind == ModelKind::EDM || kind == ModelKind::LMG ||
        kind == ModelKind::EffectiveSpin || (kind == ModelKind::Polaron && !coupling)) {
        if (coupling) {
            p = matched_edm_params(p, *coupling);
            r.epsilon = p.epsilon;
        }
        r.params = p;
        if (kind == ModelKind::HP) {
            auto hp = analytics::hp_bogoliubov(p);
            r.energy = hp.stable ? hp.energy : std::nan("");
            r.obs.photon_number = hp.stable ? std::optional<double>(hp.gs_photon_number) : std::nullopt;
            r.obs.u2 = hp.stable ? std::optional<double>(hp.u2) : std::nullopt;
            r.obs.phi2 = hp.stable ? std::optional<double>(hp.phi2) : std::nullopt;
            r.obs.mean_a = 0.0;
            r.converged = hp.stable;
            r.obs.S1 = r.obs.Sd = std::nan("");
            r.obs.mean_Sx = r.obs.delta_Sx2 = std::nan("");
            return r;
        }
        GroundState g = ground_state(kind, p);
        r.energy = g.energy;
        r.obs = measure(g);
        r.n_max_used = g.basis.has_photons() ? g.n_max_used : 0;
        r.converged = g.converged;
        return r;
    }

    if (!coupling) {
        // uniform interaction with eta = epsilon at unit filling
        coupling = uniform_coupling(p.N, p.epsilon, 1.0);
    } else {
        if (int(coupling->size()) != p.N) p.N = int(coupling->size());
        r.epsilon = coupling->eta / coupling->nu;
    }
    r.params = p;
    GroundState g = ground_state(kind, p, &*coupling);
    r.energy = g.energy;
    r.obs = measure(g);
    r.n_max_used = g.n_max_used;
    r.converged = g.converged;
    r.sites = p.N;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < p.N; ++i)
        for (int j = i + 1; j < p.N; ++j) pairs.emplace_back(i, j);
    r.correlations = spin_correlations(g, pairs);
    return r;
}

inline std::vector<Cell> point_cells(const PointResult& r) {
    const auto& p = r.params;
    const auto& o = r.obs;
    auto num = [](double v) { return std::isnan(v) ? Cell() : Cell(v); };
    return {p.g,           p.alpha(), r.epsilon, p.N,      num(r.energy), o.photon_number, o.mean_a,
            num(o.mean_Sx), num(o.delta_Sx2), o.u2, o.phi2, num(o.S1), num(o.Sd), r.n_max_used,
            r.converged};
}

inline std::vector<std::string> correlation_columns(int sites) {
    std::vector<std::string> c;
    for (int i = 0; i < sites; ++i)
        for (int j = i + 1; j < sites; ++j) c.push_back("sxsx_" + std::to_string(i) + "_" + std::to_string(j));
    return c;
}

struct RunOutput {
    Table table;
    json manifest = json::object();
};

inline json params_json(const ModelParams& p) {
    return json{{"omega0", p.omega0}, {"omega_c", p.omega_c}, {"g", p.g},
                {"alpha", p.alpha()}, {"epsilon", p.epsilon}, {"N", p.N},
                {"lambda_bias", p.lambda_bias}, {"n_max", p.n_max}, {"xi_bar", p.xi_bar}};
}

inline json base_manifest(const std::string& subcommand, const json& cfg) {
    return json{{"tool", "cavity_vacua"},
                {"version", version},
                {"subcommand", subcommand},
                {"config", cfg},
                {"determinism",
                 "no random numbers are used; eigensolver start vectors are fixed, rows are written in axis "
                 "order, so identical configs give byte-identical CSV for any worker count"}};
}

inline RunOutput run_ground(const json& cfg) {
    PointResult r = compute_point(cfg);
    RunOutput out;
    out.table.header = point_columns();
    auto cc = correlation_columns(r.sites);
    out.table.header.insert(out.table.header.end(), cc.begin(), cc.end());
    auto row = point_cells(r);
    for (double c : r.correlations) row.emplace_back(c);
    out.table.rows.push_back(row);
    out.manifest = base_manifest("ground", cfg);
    out.manifest["params"] = params_json(r.params);
    out.manifest["converged"] = json::array({r.converged});
    return out;
}

struct SweepResult {
    std::vector<std::vector<double>> coords;
    std::vector<PointResult> points;
};

inline SweepResult sweep_points(const json& cfg, const std::vector<Axis>& axes, int workers) {
    std::vector<std::vector<double>> coords{{}};
    for (const auto& ax : axes) {
        std::vector<std::vector<double>> next;
        for (const auto& c : coords)
            for (double v : ax.values) {
                auto e = c;
                e.push_back(v);
                next.push_back(e);
            }
        coords = std::move(next);
    }
    std::vector<json> configs;
    for (const auto& c : coords) {
        json pc = cfg;
        pc.erase("sweep");
        pc.erase("phase_diagram");
        for (std::size_t k = 0; k < axes.size(); ++k) {
            const bool integral = axes[k].variable == "params.N" || axes[k].variable == "params.n_max" ||
                                  axes[k].variable.find("Nx") != std::string::npos ||
                                  axes[k].variable == "geometry.N" ||
                                  axes[k].variable.find("layers") != std::string::npos;
            set_path(pc, axes[k].variable, integral ? json(static_cast<long long>(std::llround(c[k]))) : json(c[k]));
        }
        // validate every point before any expensive work
        params_of(pc);
        model_of(pc);
        configs.push_back(std::move(pc));
    }
    SweepResult s;
    s.points.resize(configs.size());
    parallel_for(configs.size(), workers, [&](std::size_t i) { s.points[i] = compute_point(configs[i]); });
    // rows in ascending axis-value order
    std::vector<std::size_t> order(coords.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return coords[a] < coords[b]; });
    for (std::size_t i : order) s.coords.push_back(coords[i]);
    std::vector<PointResult> sorted;
    for (std::size_t i : order) sorted.push_back(std::move(s.points[i]));
    s.points = std::move(sorted);
    return s;
}

// Phase labels along the innermost axis, per group of outer-axis values.
inline std::optional<std::vector<std::string>> phase_labels(const SweepResult& s, const std::vector<Axis>& axes) {
    const std::string& inner = axes.back().variable;
    const bool coupling_axis = inner == "params.g" || inner == "params.alpha";
    const bool eps_axis = inner == "params.epsilon";
    const std::size_t len = axes.back().values.size();
    if ((!coupling_axis && !eps_axis) || len < 8) return std::nullopt;
    std::vector<std::string> labels(s.points.size());
    for (std::size_t start = 0; start < s.points.size(); start += len) {
        std::vector<SweepPoint> pts;
        for (std::size_t i = start; i < start + len; ++i) pts.push_back({s.coords[i].back(), s.points[i].obs});
        ClassifyOptions opt;
        opt.epsilon = s.points[start].epsilon;
        opt.N = s.points[start].params.N;
        opt.coupling_axis = coupling_axis;
        auto c = classify(pts, opt);
        for (std::size_t i = 0; i < len; ++i) labels[start + i] = to_string(c.labels[i]);
    }
    return labels;
}

inline RunOutput tabulate(const SweepResult& s, const std::vector<Axis>& axes, const json& cfg,
                          const std::string& subcommand) {
    RunOutput out;
    std::vector<std::size_t> extra;
    for (std::size_t k = 0; k < axes.size(); ++k) {
        const auto& cols = point_columns();
        if (std::find(cols.begin(), cols.end(), axes[k].column) == cols.end()) extra.push_back(k);
    }
    for (std::size_t k : extra) out.table.header.push_back(axes[k].column);
    for (const auto& c : point_columns()) out.table.header.push_back(c);
    int sites = s.points.empty() ? 0 : s.points.front().sites;
    for (const auto& p : s.points) sites = std::max(sites, p.sites);
    auto cc = correlation_columns(sites);
    out.table.header.insert(out.table.header.end(), cc.begin(), cc.end());
    auto labels = phase_labels(s, axes);
    if (labels) out.table.header.push_back("phase");
    json flags = json::array();
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        std::vector<Cell> row;
        for (std::size_t k : extra) row.emplace_back(s.coords[i][k]);
        auto pc = point_cells(s.points[i]);
        row.insert(row.end(), pc.begin(), pc.end());
        for (std::size_t c = 0; c < cc.size(); ++c)
            row.push_back(c < s.points[i].correlations.size() ? Cell(s.points[i].correlations[c]) : Cell());
        if (labels) row.emplace_back((*labels)[i]);
        out.table.rows.push_back(std::move(row));
        flags.push_back(s.points[i].converged);
    }
    out.manifest = base_manifest(subcommand, cfg);
    json ax = json::array();
    for (const auto& a : axes) ax.push_back(json{{"variable", a.variable}, {"values", a.values}});
    out.manifest["axes"] = ax;
    out.manifest["points"] = s.points.size();
    out.manifest["converged"] = flags;
    bool all = true;
    for (const auto& p : s.points) all = all && p.converged;
    out.manifest["all_converged"] = all;
    if (!s.points.empty()) out.manifest["params"] = params_json(s.points.front().params);
    return out;
}

inline RunOutput run_sweep(const json& cfg, int workers) {
    auto axes = axes_of(cfg, "sweep");
    auto s = sweep_points(cfg, axes, workers);
    return tabulate(s, axes, cfg, "sweep");
}

inline json default_phase_diagram() {
    return json{{"alpha", {{"min", 1e-2}, {"max", 10.0}, {"points", 40}, {"scale", "log"}}},
                {"epsilon", {{"min", -0.5}, {"max", 1.0}, {"points", 40}, {"scale", "linear"}}}};
}

// alpha x epsilon grid; labels come from classifying each epsilon row along alpha.
inline RunOutput run_phase_diagram(const json& cfg, int workers) {
    json pd = default_phase_diagram();
    if (const json* user = detail::find(cfg, "phase_diagram")) {
        detail::only_keys(*user, {"alpha", "epsilon"}, "phase_diagram");
        for (auto it = user->begin(); it != user->end(); ++it) {
            if (!it.value().is_object()) throw SchemaError("'phase_diagram." + it.key() + "' must be an object");
            for (auto f = it.value().begin(); f != it.value().end(); ++f) pd[it.key()][f.key()] = f.value();
        }
    }
    json ea = pd["epsilon"];
    ea["variable"] = "epsilon";
    json aa = pd["alpha"];
    aa["variable"] = "alpha";
    std::vector<Axis> axes{axis_of(ea, "phase_diagram.epsilon"), axis_of(aa, "phase_diagram.alpha")};
    for (std::size_t i = 1; i < axes[1].values.size(); ++i)
        if (!(axes[1].values[i] > axes[1].values[i - 1]))
            throw SchemaError("'phase_diagram.alpha' must be increasing");
    auto s = sweep_points(cfg, axes, workers);
    auto out = tabulate(s, axes, cfg, "phase-diagram");
    out.manifest["phase_diagram"] = pd;
    return out;
}

inline RunOutput run_adiabatic(const json& cfg) {
    ModelParams p = params_of(cfg);
    double lo = -10.0, hi = 10.0;
    int n = 401;
    if (const json* a = detail::find(cfg, "adiabatic")) {
        detail::only_keys(*a, {"x_min", "x_max", "points"}, "adiabatic");
        lo = detail::number_or(*a, "x_min", lo, "adiabatic");
        hi = detail::number_or(*a, "x_max", hi, "adiabatic");
        n = detail::integer_or(*a, "points", n, "adiabatic");
    }
    if (n < 2 || !(hi > lo)) throw SchemaError("'adiabatic' needs x_max > x_min and at least 2 points");
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) xs.push_back(lo + (hi - lo) * i / (n - 1));
    RunOutput out;
    out.table.header = {"X", "E0", "V_ad"};
    for (const auto& s : adiabatic_potential(p, xs)) out.table.rows.push_back({s.X, s.E0, s.V});
    out.manifest = base_manifest("adiabatic", cfg);
    out.manifest["params"] = params_json(p);
    return out;
}

inline RunOutput run_qfunction(const json& cfg) {
    const ModelKind kind = model_of(cfg);
    if (kind != ModelKind::EDM && kind != ModelKind::LMG && kind != ModelKind::EffectiveSpin &&
        kind != ModelKind::Polaron)
        throw SchemaError("qfunction needs a collective (Dicke-basis) model");
    ModelParams p = params_of(cfg);
    int n_phi = 181, n_theta = 91;
    if (const json* q = detail::find(cfg, "qfunction")) {
        detail::only_keys(*q, {"n_phi", "n_theta"}, "qfunction");
        n_phi = detail::integer_or(*q, "n_phi", n_phi, "qfunction");
        n_theta = detail::integer_or(*q, "n_theta", n_theta, "qfunction");
    }
    if (n_phi < 1 || n_theta < 2) throw SchemaError("'qfunction' grid too small");
    GroundState g = ground_state(kind, p);
    auto samples = q_function(g, q_grid(n_phi, n_theta));
    double qmax = 0.0;
    for (const auto& s : samples) qmax = std::max(qmax, s.Q);
    RunOutput out;
    out.table.header = {"theta", "phi", "Q", "Q_norm"};
    for (const auto& s : samples) out.table.rows.push_back({s.theta, s.phi, s.Q, qmax > 0 ? s.Q / qmax : 0.0});
    out.manifest = base_manifest("qfunction", cfg);
    out.manifest["params"] = params_json(p);
    out.manifest["converged"] = json::array({g.converged});
    out.manifest["Q_max"] = qmax;
    return out;
}

inline RunOutput run_geometry(const json& cfg, json& summary) {
    auto gcfg = geometry_of(cfg);
    if (!gcfg) throw SchemaError("geometry needs a 'geometry' object");
    auto c = build_coupling(*gcfg);
    RunOutput out;
    out.table.header = {"row", "col", "value"};
    for (Eigen::Index i = 0; i < c.D.rows(); ++i)
        for (Eigen::Index j = 0; j < c.D.cols(); ++j) out.table.rows.push_back({int(i), int(j), c.D(i, j)});
    summary = json{{"N", c.size()},
                   {"eta", c.eta},
                   {"nu", std::isnan(c.nu) ? json(nullptr) : json(c.nu)},
                   {"boundary", geometry::to_string(c.boundary)},
                   {"image_cutoff", c.image_cutoff},
                   {"max_truncation_residual", c.max_truncation_residual},
                   {"images_converged", c.images_converged},
                   {"max_abs_self_interaction", c.self_interaction.size() ? c.self_interaction.cwiseAbs().maxCoeff() : 0.0},
                   {"warnings", c.warnings},
                   {"config", cfg}};
    out.manifest = summary;
    return out;
}

inline RunOutput run_polariton(const json& cfg) {
    ModelParams p = params_of(cfg);
    double lo = 0.0, hi = 3.0;
    int n = 61;
    std::optional<double> eta, nu;
    if (const json* a = detail::find(cfg, "polariton")) {
        detail::only_keys(*a, {"omega_p_min", "omega_p_max", "points", "eta", "nu"}, "polariton");
        lo = detail::number_or(*a, "omega_p_min", lo, "polariton");
        hi = detail::number_or(*a, "omega_p_max", hi, "polariton");
        n = detail::integer_or(*a, "points", n, "polariton");
        if (const json* e = detail::find(*a, "eta")) eta = detail::number(*e, "polariton.eta");
        if (const json* v = detail::find(*a, "nu")) nu = detail::number(*v, "polariton.nu");
    }
    if (n < 2 || !(hi > lo) || lo < 0.0) throw SchemaError("'polariton' needs 0 <= omega_p_min < omega_p_max");
    auto gcfg = geometry_of(cfg);
    std::optional<geometry::CouplingMatrix> c;
    if (gcfg) {
        c = build_coupling(*gcfg);
        eta = c->eta;
        nu = c->nu;
    }
    if (!eta || !nu) throw SchemaError("polariton needs a geometry or polariton.eta and polariton.nu");
    RunOutput out;
    out.table.header = {"omega_p", "Omega_plus", "Omega_minus", "dark_min", "dark_max", "unstable_count"};
    auto signed_freq = [](double w2) { return w2 < 0 ? -std::sqrt(-w2) : std::sqrt(w2); };
    std::optional<classical::ModeDecomposition> base;
    if (c) base = classical::decompose(*c, {p.omega0, p.omega_c, 0.0});
    for (int i = 0; i < n; ++i) {
        double wp = lo + (hi - lo) * i / (n - 1);
        classical::ClassicalParams cp{p.omega0, p.omega_c, wp};
        auto b = classical::bright_branches(cp, *eta, *nu);
        std::vector<Cell> row{wp, b.Omega_plus, b.Omega_minus};
        if (base) {
            classical::ModeDecomposition m = *base;
            m.omega_n_sq = (p.omega0 * p.omega0 + m.eta_n.array() * wp * wp).matrix();
            auto roots = classical::full_spectrum(m, cp);
            std::vector<std::size_t> idx(roots.size());
            for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
            std::stable_sort(idx.begin(), idx.end(),
                             [&](std::size_t x, std::size_t y) { return roots[x].bright_weight > roots[y].bright_weight; });
            int unstable = 0;
            for (const auto& r : roots) unstable += r.unstable ? 1 : 0;
            if (roots.size() > 2) {
                double dmin = INFINITY, dmax = -INFINITY;
                for (std::size_t k = 2; k < idx.size(); ++k) {
                    double w = signed_freq(roots[idx[k]].omega_sq);
                    dmin = std::min(dmin, w);
                    dmax = std::max(dmax, w);
                }
                row.emplace_back(dmin);
                row.emplace_back(dmax);
            } else {
                row.emplace_back();
                row.emplace_back();
            }
            row.emplace_back(unstable);
        } else {
            row.emplace_back();
            row.emplace_back();
            row.emplace_back(b.imaginary ? 1 : 0);
        }
        out.table.rows.push_back(std::move(row));
    }
    out.manifest = base_manifest("polariton", cfg);
    out.manifest["eta"] = *eta;
    out.manifest["nu"] = *nu;
    if (base) {
        auto th = classical::instability_threshold(*base, {p.omega0, p.omega_c, 0.0});
        out.manifest["omega_p_critical"] = th ? json(*th) : json(nullptr);
    }
    return out;
}

// Formula evaluation for scripting overlays.
inline json run_analytics(const std::string& formula, const json& cfg, const json& extra) {
    ModelParams p = params_of(cfg);
    auto opt_number = [&](const char* key) -> std::optional<double> {
        if (const json* v = detail::find(extra, key)) return detail::number(*v, key);
        return std::nullopt;
    };
    json out{{"formula", formula}, {"params", params_json(p)}};
    if (formula == "critical-coupling") {
        auto gc = analytics::critical_coupling(p.omega0, p.omega_c, p.epsilon, p.N);
        out["g_c"] = gc ? json(*gc) : json(nullptr);
    } else if (formula == "mean-fields") {
        auto gc = analytics::critical_coupling(p.omega0, p.omega_c, p.epsilon, p.N);
        auto mf = analytics::mean_fields(p.g, gc.value_or(INFINITY), p.N, p.omega_c);
        out["mean_a"] = mf.mean_a;
        out["mean_Sx"] = mf.mean_Sx;
    } else if (formula == "photon-number-weak") {
        out["photon_number"] = analytics::photon_number_weak(p);
    } else if (formula == "voltage-kink") {
        out["u2_kink"] = analytics::voltage_kink(p.epsilon, p.omega0, p.omega_c);
    } else if (formula == "critical-epsilon") {
        auto c = analytics::critical_epsilon(p.alpha(), p.omega0, p.omega_c, p.N);
        out["epsilon_c"] = c.root;
        out["epsilon_c_asymptote"] = c.asymptote;
    } else if (formula == "hp") {
        auto h = analytics::hp_bogoliubov(p);
        out["Omega_plus"] = h.Omega_plus;
        out["Omega_minus"] = h.Omega_minus;
        out["Omega_plus_sq"] = h.Omega_plus_sq;
        out["Omega_minus_sq"] = h.Omega_minus_sq;
        out["stable"] = h.stable;
        out["photon_number"] = h.stable ? json(h.gs_photon_number) : json(nullptr);
        out["u2"] = h.stable ? json(h.u2) : json(nullptr);
        out["phi2"] = h.stable ? json(h.phi2) : json(nullptr);
    } else if (formula == "hp-limit") {
        out["photon_number"] = analytics::hp_photon_limit(p.epsilon);
    } else if (formula == "alpha-g") {
        out["g"] = p.g;
        out["alpha"] = p.alpha();
    } else if (formula == "bright-branches") {
        auto wp = opt_number("omega_p");
        auto eta = opt_number("eta");
        auto nu = opt_number("nu");
        if (!wp || !eta || !nu) throw SchemaError("bright-branches needs --omega-p, --eta and --nu");
        auto b = classical::bright_branches({p.omega0, p.omega_c, *wp}, *eta, *nu);
        out["Omega_plus"] = b.Omega_plus;
        out["Omega_minus"] = b.Omega_minus;
        out["imaginary"] = b.imaginary;
    } else {
        throw SchemaError("unknown formula '" + formula + "'");
    }
    return out;
}

// ---------------------------------------------------------------- output

inline std::filesystem::path prepare_output(const std::filesystem::path& dir, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::filesystem::path p = dir / name;
    std::ofstream probe(p, std::ios::app);
    if (!probe) throw IoError("cannot write '" + p.string() + "'");
    return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + p.string() + "'");
    f << text;
    if (!f) throw IoError("write failed for '" + p.string() + "'");
}

}  // namespace cavity_vacua::run
