#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cavity_vacua/errors.hpp"
#include "cavity_vacua/run.hpp"

namespace cv = cavity_vacua;
using cv::run::json;

namespace {

enum Exit { ok = 0, usage = 1, schema = 2, dimension = 3, unwritable = 4, solver = 5 };

const char* point_help =
    "CSV columns: [extra axis columns] g, alpha, epsilon, N, energy, photon_number, mean_a, mean_Sx, "
    "delta_Sx2, u2, phi2, S1, Sd, n_max_used, converged, [sxsx_i_j for per-site models], [phase].\n"
    "Absent values are empty cells. Numbers use 12 significant digits.";

struct Common {
    std::string config;
    std::string out = ".";
    int workers = 0;
    std::vector<std::string> overrides;
    // direct parameter flags, applied after the config file and before --override
    std::map<std::string, double> values;
    std::string model;
};

void add_common(CLI::App* sub, Common& c, bool with_params = true) {
    sub->add_option("--config", c.config, "JSON run configuration");
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--workers", c.workers, "worker threads (also CAVITY_VACUA_WORKERS)");
    sub->add_option("--override", c.overrides, "dot-path assignment, e.g. params.g=0.8 (repeatable)");
    if (!with_params) return;
    sub->add_option("--model", c.model, "EDM, CQEDFull, CoulombTLS, Polaron, LMG, EffectiveSpin or HP");
    const std::vector<std::pair<std::string, std::string>> flags{
        {"g", "g"},           {"alpha", "alpha"},   {"epsilon", "epsilon"},     {"N", "N"},
        {"omega0", "omega0"}, {"omega-c", "omega_c"}, {"lambda", "lambda_bias"}, {"n-max", "n_max"},
        {"xi-bar", "xi_bar"}};
    for (const auto& [flag, key] : flags) {
        sub->add_option_function<double>("--" + flag, [&c, key = key](double v) { c.values[key] = v; },
                                         "params." + key);
    }
}

json assemble(const Common& c) {
    json cfg = c.config.empty() ? cv::run::merge_config(json::object()) : cv::run::load_config(c.config);
    if (!c.model.empty()) cfg["model"] = c.model;
    for (const auto& [k, v] : c.values) {
        const bool integral = k == "N" || k == "n_max";
        cv::run::set_path(cfg, "params." + k, integral ? json(static_cast<long long>(v)) : json(v));
    }
    for (const auto& o : c.overrides) cv::run::apply_override(cfg, o);
    return cfg;
}

struct Paths {
    std::filesystem::path csv, manifest;
};

// Resolves and probes the output files so an unwritable target fails before any work.
Paths output_paths(const Common& c, const json& cfg, const std::string& name, bool summary) {
    std::string csv_name = name + ".csv";
    std::string man_name = name + (summary ? ".json" : ".manifest.json");
    if (auto o = cfg.find("outputs"); o != cfg.end() && o->is_object()) {
        if (auto f = o->find("csv"); f != o->end() && f->is_string()) csv_name = f->get<std::string>();
        if (auto f = o->find("manifest"); f != o->end() && f->is_string()) man_name = f->get<std::string>();
    }
    return {cv::run::prepare_output(c.out, csv_name), cv::run::prepare_output(c.out, man_name)};
}

void emit(const cv::run::RunOutput& out, const Paths& paths, double seconds, bool summary = false) {
    cv::run::write_text(paths.csv, out.table.to_csv());
    json m = out.manifest;
    if (!summary) {
        m["wall_time_s"] = seconds;
        m["outputs"] = json::array({paths.csv.string(), paths.manifest.string()});
    }
    cv::run::write_text(paths.manifest, m.dump(2) + "\n");
    std::cout << paths.csv.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ground states and collective modes of dipoles in a parallel-plate cavity"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cv::run::version));

    Common c;
    std::string formula;
    json analytics_extra = json::object();

    auto* geo = app.add_subcommand("geometry", "dipole-dipole coupling matrix of a lattice");
    add_common(geo, c, false);
    geo->footer("Writes geometry.csv (row, col, value) and geometry.json (N, eta, nu, boundary, image_cutoff, "
                "max_truncation_residual, images_converged, warnings).");

    auto* pol = app.add_subcommand("polariton", "classical collective modes versus plasma frequency");
    add_common(pol, c);
    pol->footer("CSV columns: omega_p, Omega_plus, Omega_minus, dark_min, dark_max, unstable_count.\n"
                "Imaginary frequencies are written as negative numbers.");

    auto* gnd = app.add_subcommand("ground", "ground state at one parameter point");
    add_common(gnd, c);
    gnd->footer(point_help);

    auto* swp = app.add_subcommand("sweep", "ground states over the cartesian product of the 'sweep' axes");
    add_common(swp, c);
    swp->footer(point_help);

    auto* pd = app.add_subcommand("phase-diagram", "alpha x epsilon grid with phase labels");
    add_common(pd, c);
    pd->footer(point_help);

    auto* adi = app.add_subcommand("adiabatic", "Born-Oppenheimer potential of the cavity coordinate");
    add_common(adi, c);
    adi->footer("CSV columns: X, E0, V_ad.");

    auto* qf = app.add_subcommand("qfunction", "Husimi function of the dipole state on the Bloch sphere");
    add_common(qf, c);
    qf->footer("CSV columns: theta, phi, Q, Q_norm (Q divided by its maximum on the grid).");

    auto* an = app.add_subcommand("analytics", "closed-form results as JSON on stdout");
    add_common(an, c);
    an->add_option("formula", formula,
                   "critical-coupling, mean-fields, photon-number-weak, voltage-kink, critical-epsilon, hp, "
                   "hp-limit, alpha-g, bright-branches")
        ->required();
    for (const char* k : {"omega-p", "eta", "nu"}) {
        std::string key = k;
        if (key == "omega-p") key = "omega_p";
        an->add_option_function<double>(std::string("--") + k,
                                        [&analytics_extra, key](double v) { analytics_extra[key] = v; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return usage;
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    try {
        json cfg = assemble(c);
        std::optional<int> flag;
        if (c.workers > 0) flag = c.workers;
        const int workers = cv::run::worker_count(cfg, flag);
        if (*an) {
            std::cout << cv::run::run_analytics(formula, cfg, analytics_extra).dump(2) << "\n";
        } else if (*geo) {
            auto paths = output_paths(c, cfg, "geometry", true);
            json summary;
            auto out = cv::run::run_geometry(cfg, summary);
            emit(out, paths, elapsed(), true);
        } else {
            const std::pair<CLI::App*, const char*> names[] = {{pol, "polariton"}, {gnd, "ground"},
                                                               {swp, "sweep"},     {pd, "phase_diagram"},
                                                               {adi, "adiabatic"}, {qf, "qfunction"}};
            const char* name = "";
            for (const auto& [sub, n] : names)
                if (*sub) name = n;
            // validate the configuration before touching the file system
            cv::run::params_of(cfg);
            cv::run::model_of(cfg);
            auto paths = output_paths(c, cfg, name, false);
            cv::run::RunOutput out;
            if (*pol) out = cv::run::run_polariton(cfg);
            else if (*gnd) out = cv::run::run_ground(cfg);
            else if (*swp) out = cv::run::run_sweep(cfg, workers);
            else if (*pd) out = cv::run::run_phase_diagram(cfg, workers);
            else if (*adi) out = cv::run::run_adiabatic(cfg);
            else out = cv::run::run_qfunction(cfg);
            emit(out, paths, elapsed());
        }
    } catch (const cv::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return schema;
    } catch (const cv::DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return dimension;
    } catch (const cv::IoError& e) {
        std::cerr << "output error: " << e.what() << "\n";
        return unwritable;
    } catch (const cv::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return solver;
    } catch (const cv::Error& e) {
        // invalid parameter values count as configuration errors
        std::cerr << "invalid input: " << e.what() << "\n";
        return schema;
    } catch (const json::exception& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return schema;
    }
    return ok;
}
