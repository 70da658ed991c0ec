// Command-line front end: configure a model, run the requested
// representations, export CSV time series, phase decompositions, static
// SVG plots and a machine-readable summary.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure
// (partial outputs are preserved).

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "lindsim/csv.hpp"
#include "lindsim/geomphase.hpp"
#include "lindsim/lindblad.hpp"
#include "lindsim/purified.hpp"
#include "lindsim/spinmodel.hpp"
#include "lindsim/strata.hpp"
#include "lindsim/svgplot.hpp"
#include "lindsim/unravel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lindsim;

namespace {

struct RunConfig {
    std::string benchmark = "paper-two-level";
    std::string model_file;
    std::string schedule_file;
    double eps = 1e-5;
    double gamma_z = 1e-3;
    double gamma_minus = 2e-3;
    double t0 = 0.0;
    double t_end = 100.125;
    int steps = 445;
    std::vector<std::string> schemes{"lindblad", "nlse"};
    int trajectories = 30;
    std::uint64_t seed = 0;
    int store_stride = 1;
    std::string phases = "none";      // none | uhlmann | sjoqvist
    std::string section = "sqrt-sigma";  // sqrt-sigma | weak-adiabatic
    std::string out_dir = "out";
    bool plots = true;
};

const std::vector<std::string> kKnownSchemes{"lindblad", "nlse", "pdp", "qsd",
                                             "closest-pure-shifted", "closest-pure-unshifted"};

Mat parse_matrix(const json& j, int dim, const std::string& what) {
    if (!j.contains("re")) throw std::runtime_error(what + ": missing 're' block");
    Mat m = Mat::Zero(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
            m(r, c) = Complex(j["re"][r][c].get<double>(),
                              j.contains("im") ? j["im"][r][c].get<double>() : 0.0);
        }
    return m;
}

struct LoadedModel {
    LindbladModel model;
    Mat rho0;
    std::string name;
};

LoadedModel load_model(const RunConfig& cfg) {
    LoadedModel out;
    if (!cfg.model_file.empty()) {
        std::ifstream in(cfg.model_file);
        if (!in) throw std::runtime_error("model file not found: " + cfg.model_file);
        json j;
        in >> j;
        const int dim = j.at("dim").get<int>();
        LindbladModel m;
        m.dim = dim;
        const Mat h = parse_matrix(j.at("hamiltonian"), dim, "hamiltonian");
        m.hamiltonian = [h](double) { return h; };
        for (const auto& jj : j.value("jumps", json::array())) {
            const Mat g = parse_matrix(jj, dim, "jump");
            m.jumps.push_back([g](double) { return g; });
            m.rates.push_back(jj.value("rate", 0.0));
        }
        out.model = std::move(m);
        out.rho0 = parse_matrix(j.at("initial"), dim, "initial");
        out.name = fs::path(cfg.model_file).stem().string();
        return out;
    }
    if (cfg.benchmark != "paper-two-level" && cfg.benchmark != "two-level")
        throw std::runtime_error("unknown benchmark: " + cfg.benchmark);
    FieldSchedule sched =
        cfg.schedule_file.empty() ? paper_schedule() : load_schedule(cfg.schedule_file);
    out.model = two_level_model(std::move(sched), cfg.gamma_z, cfg.gamma_minus);
    out.rho0 = benchmark_initial_state(cfg.eps);
    out.name = "paper-two-level";
    return out;
}

std::vector<std::string> density_columns(int n) {
    std::vector<std::string> cols{"t"};
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            cols.push_back("rho" + std::to_string(r) + std::to_string(c) + "_re");
            cols.push_back("rho" + std::to_string(r) + std::to_string(c) + "_im");
        }
    return cols;
}

void write_density_csv(const std::string& path, const std::vector<double>& times,
                       const std::vector<Mat>& rhos) {
    const int n = static_cast<int>(rhos.front().rows());
    CsvWriter csv(path, density_columns(n));
    std::vector<double> row(1 + 2 * n * n);
    for (std::size_t i = 0; i < times.size(); ++i) {
        row[0] = times[i];
        int col = 1;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                row[col++] = rhos[i](r, c).real();
                row[col++] = rhos[i](r, c).imag();
            }
        csv.row(row);
    }
}

void plot_populations(const std::string& path, const std::string& title,
                      const std::vector<double>& times, const std::vector<Mat>& rhos) {
    const int n = static_cast<int>(rhos.front().rows());
    std::vector<PlotSeries> series;
    for (int r = 0; r < n; ++r) {
        PlotSeries s{"rho_" + std::to_string(r) + std::to_string(r), times, {}};
        for (const Mat& rho : rhos) s.y.push_back(rho(r, r).real());
        series.push_back(std::move(s));
    }
    PlotSeries coh{"|rho_01|", times, {}};
    for (const Mat& rho : rhos) coh.y.push_back(std::abs(rho(0, 1)));
    series.push_back(std::move(coh));
    write_svg_plot(path, series, {.title = title, .y_label = "populations / coherence"});
}

// operator series as components on {sigma_0, sigma_x, sigma_y, sigma_z}
void phase_csv_and_plot(const fs::path& dir, const std::string& stem,
                        const std::vector<double>& times,
                        const PhaseDecomposition& dec, bool plots) {
    const char* factors[] = {"gE", "gA", "k"};
    const std::vector<std::vector<Mat>*> data{
        const_cast<std::vector<Mat>*>(&dec.g_E), const_cast<std::vector<Mat>*>(&dec.g_A),
        const_cast<std::vector<Mat>*>(&dec.k)};
    const char* comps[] = {"s0", "sx", "sy", "sz"};

    std::vector<std::string> cols{"t"};
    for (const char* f : factors)
        for (const char* c : comps) {
            cols.push_back(std::string(f) + "_" + c + "_re");
            cols.push_back(std::string(f) + "_" + c + "_im");
        }
    cols.push_back("reconstruction_residual");
    CsvWriter csv((dir / (stem + ".csv")).string(), cols);

    std::vector<PlotSeries> series_k, series_gA;
    for (int c = 0; c < 4; ++c) {
        series_k.push_back({std::string("Re k_") + comps[c], times, {}});
        series_gA.push_back({std::string("Re gA_") + comps[c], times, {}});
    }
    std::vector<double> row(cols.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        row[0] = times[i];
        int col = 1;
        for (const auto* block : data) {
            const auto a = pauli_components((*block)[i]);
            for (int c = 0; c < 4; ++c) {
                row[col++] = a[c].real();
                row[col++] = a[c].imag();
            }
        }
        row[col] = dec.reconstruction_residual[i];
        csv.row(row);
        const auto ak = pauli_components(dec.k[i]);
        const auto ag = pauli_components(dec.g_A[i]);
        for (int c = 0; c < 4; ++c) {
            series_k[c].y.push_back(ak[c].real());
            series_gA[c].y.push_back(ag[c].real());
        }
    }
    if (plots) {
        write_svg_plot((dir / (stem + "_right.svg")).string(), series_k,
                       {.title = "right geometric phase components", .y_label = "Re"});
        write_svg_plot((dir / (stem + "_left.svg")).string(), series_gA,
                       {.title = "left geometric phase components", .y_label = "Re"});
    }
}

int run_command(const RunConfig& cfg, bool dry_run) {
    std::vector<std::string> issues, warnings;

    for (const auto& s : cfg.schemes)
        if (std::find(kKnownSchemes.begin(), kKnownSchemes.end(), s) == kKnownSchemes.end())
            issues.push_back("unknown scheme: " + s);
    if (cfg.steps < 1) issues.push_back("steps must be >= 1");
    if (cfg.t_end <= cfg.t0) issues.push_back("t-end must exceed t0");
    if (cfg.trajectories < 1) issues.push_back("trajectories must be >= 1");
    if (cfg.eps <= 0 || cfg.eps >= 0.5) issues.push_back("eps must lie in (0, 0.5)");
    if (cfg.phases != "none" && cfg.phases != "uhlmann" && cfg.phases != "sjoqvist")
        issues.push_back("phases must be none, uhlmann or sjoqvist");
    if (cfg.section != "sqrt-sigma" && cfg.section != "weak-adiabatic")
        issues.push_back("section must be sqrt-sigma or weak-adiabatic");

    LoadedModel loaded;
    try {
        loaded = load_model(cfg);
        validate_model(loaded.model, cfg.t0);
        validate_density(loaded.rho0);
    } catch (const std::exception& e) {
        issues.push_back(e.what());
    }

    const double dt = (cfg.t_end - cfg.t0) / std::max(cfg.steps, 1);
    double max_jump_prob = 0.0;
    if (issues.empty()) {
        for (int i = 0; i <= 20; ++i) {
            const double t = cfg.t0 + (cfg.t_end - cfg.t0) * i / 20.0;
            for (std::size_t k = 0; k < loaded.model.jumps.size(); ++k) {
                const Mat g = loaded.model.jumps[k](t);
                const double gnorm2 = std::sqrt(hermitian_eigen(Mat(g.adjoint() * g)).eigenvalues.maxCoeff());
                max_jump_prob = std::max(max_jump_prob, loaded.model.rates[k] * gnorm2 * gnorm2 * dt);
            }
        }
        if (max_jump_prob > 0.1)
            warnings.push_back("per-step jump probability may reach " + std::to_string(max_jump_prob) +
                               " > 0.1; decrease dt");
    }

    if (dry_run) {
        std::cout << "configuration " << (issues.empty() ? "OK" : "INVALID") << "\n";
        std::cout << "  model: " << (issues.empty() ? loaded.name : "-") << "\n";
        std::cout << "  grid: t in [" << cfg.t0 << ", " << cfg.t_end << "], " << cfg.steps
                  << " steps, dt = " << dt << "\n";
        std::cout << "  estimated max per-step jump probability: " << max_jump_prob << "\n";
        for (const auto& w : warnings) std::cout << "  warning: " << w << "\n";
        for (const auto& e : issues) std::cout << "  error: " << e << "\n";
        return issues.empty() ? 0 : 2;
    }
    if (!issues.empty()) {
        for (const auto& e : issues) std::cerr << "error: " << e << "\n";
        return 2;
    }

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    const TimeGrid grid{cfg.t0, cfg.t_end, cfg.steps};
    const LindbladModel& model = loaded.model;

    json summary;
    summary["model"] = loaded.name;
    summary["grid"] = {{"t0", cfg.t0}, {"t_end", cfg.t_end}, {"steps", cfg.steps}, {"dt", dt}};
    summary["seed"] = cfg.seed;
    for (const auto& w : warnings) summary["warnings"].push_back(w);

    bool numerical_failure = false;
    auto want = [&](const std::string& s) {
        return std::find(cfg.schemes.begin(), cfg.schemes.end(), s) != cfg.schemes.end();
    };
    const bool need_nlse = want("nlse") || cfg.phases != "none";

    std::optional<DensityTrajectory> lind;
    if (want("lindblad") || want("nlse") || want("pdp") || want("qsd")) {
        lind = propagate_lindblad(model, loaded.rho0, grid);
        if (lind->failed) {
            numerical_failure = true;
            summary["lindblad"]["failure"] = lind->message;
        }
        summary["lindblad"]["max_trace_drift"] = lind->max_trace_drift;
        summary["lindblad"]["min_eigenvalue"] = lind->min_eigenvalue;
        const Mat final = lind->states.back();
        summary["lindblad"]["final_state"] = {
            {"rho00", final(0, 0).real()}, {"rho11", final(model.dim - 1, model.dim - 1).real()}};
        const auto changes = profile_change_points(lind->states, 1e-6);
        summary["lindblad"]["stratum_profile_changes"] = changes.size();
        if (want("lindblad")) {
            write_density_csv((dir / "rho_lindblad.csv").string(), lind->times, lind->states);
            if (cfg.plots)
                plot_populations((dir / "rho_lindblad.svg").string(), "reference master equation",
                                 lind->times, lind->states);
        }
    }

    std::optional<PurifiedTrajectory> pur;
    if (need_nlse) {
        pur = propagate_nlse(model, purify_initial(loaded.rho0), grid);
        if (pur->truncated) {
            numerical_failure = true;
            summary["nlse"]["failure"] = pur->message;
        }
        summary["nlse"]["max_norm_drift"] = pur->max_norm_drift;
        summary["nlse"]["substeps"] = pur->total_substeps;
        const auto times = pur->times();
        const auto rhos = pur->density_trajectory();
        write_density_csv((dir / "rho_nlse.csv").string(), times, rhos);

        // occupation probabilities |<<ij|Psi>>|^2
        std::vector<std::string> cols{"t"};
        const int n = model.dim;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                cols.push_back("p_" + std::to_string(i) + std::to_string(j));
        CsvWriter occ((dir / "psi_occupation.csv").string(), cols);
        std::vector<PlotSeries> occ_series(n * n);
        for (int c = 0; c < n * n; ++c) occ_series[c].name = cols[c + 1];
        std::vector<double> row(1 + n * n);
        for (std::size_t s = 0; s < pur->states.size(); ++s) {
            row[0] = times[s];
            for (int c = 0; c < n * n; ++c) {
                row[1 + c] = std::norm(pur->states[s].psi[c]);
                occ_series[c].x.push_back(times[s]);
                occ_series[c].y.push_back(row[1 + c]);
            }
            occ.row(row);
        }
        if (cfg.plots)
            write_svg_plot((dir / "psi_occupation.svg").string(), occ_series,
                           {.title = "purified state occupations", .y_label = "|<<ij|Psi>>|^2"});

        if (lind && !pur->truncated) {
            CsvWriter gap((dir / "gap_lindblad_nlse.csv").string(), {"t", "gap_inf"});
            PlotSeries gap_series{"|rho - tr_A Psi|", times, {}};
            double max_gap = 0.0;
            for (std::size_t s = 0; s < rhos.size(); ++s) {
                const double g = max_abs(Mat(lind->states[s] - rhos[s]));
                gap.row({times[s], g});
                gap_series.y.push_back(std::max(g, 1e-18));
                max_gap = std::max(max_gap, g);
            }
            summary["equivalence"]["max_gap_inf"] = max_gap;
            if (cfg.plots)
                write_svg_plot((dir / "gap_lindblad_nlse.svg").string(), {gap_series},
                               {.title = "master equation vs purified dynamics",
                                .y_label = "inf-norm gap", .log_y = true});
        }
    }

    for (bool shifted : {true, false}) {
        const std::string name = shifted ? "closest-pure-shifted" : "closest-pure-unshifted";
        if (!want(name)) continue;
        auto [p_small, v] = hermitian_eigen(loaded.rho0);
        const Vec psi0 = v.col(model.dim - 1);
        const auto traj = propagate_closest_pure(model, psi0, grid, shifted);
        std::vector<Mat> rhos;
        rhos.reserve(traj.states.size());
        for (const Vec& psi : traj.states) {
            const Vec u = psi.normalized();
            rhos.push_back(u * u.adjoint());
        }
        const std::string stem = shifted ? "rho_closest_pure_shifted" : "rho_closest_pure_unshifted";
        write_density_csv((dir / (stem + ".csv")).string(), traj.times, rhos);
        if (cfg.plots)
            plot_populations((dir / (stem + ".svg")).string(), name, traj.times, rhos);
    }

    for (const std::string name : {"pdp", "qsd"}) {
        if (!want(name)) continue;
        auto [p_small, v] = hermitian_eigen(loaded.rho0);
        const Vec psi0 = v.col(model.dim - 1);
        const StochasticConfig sc{cfg.trajectories, cfg.seed, cfg.store_stride};
        const TrajectoryEnsemble ens = name == std::string("pdp")
                                           ? propagate_pdp(model, psi0, grid, sc)
                                           : propagate_qsd(model, psi0, grid, sc);
        std::vector<Mat> rhos;
        rhos.reserve(ens.times.size());
        for (std::size_t s = 0; s < ens.times.size(); ++s)
            rhos.push_back(ensemble_density(ens, static_cast<int>(s)));
        write_density_csv((dir / ("rho_" + name + ".csv")).string(), ens.times, rhos);
        if (cfg.plots)
            plot_populations((dir / ("rho_" + name + ".svg")).string(),
                             name + " ensemble mean", ens.times, rhos);
        summary[name] = {{"trajectories", cfg.trajectories},
                         {"jumps", ens.jump_count},
                         {"max_step_jump_probability", ens.max_step_jump_probability},
                         {"step_size_warning", ens.step_size_warning}};
        if (lind) {
            double err = 0.0;
            const int stride = cfg.store_stride;
            for (std::size_t s = 0; s < ens.times.size(); ++s)
                err = std::max(err, max_abs(Mat(rhos[s] - lind->states[s * stride])));
            summary[name]["max_error_vs_lindblad"] = err;
        }
    }

    if (cfg.phases != "none" && pur && !pur->truncated) {
        const auto times = pur->times();
        const auto rhos = pur->density_trajectory();
        SectionTrajectory section;
        if (cfg.section == "sqrt-sigma") {
            section = section_sqrt_sigma(model, times, rhos);
        } else {
            const auto ad = adiabatic_sections(model, times, rhos);
            section = ad.weak;
            summary["phases"]["strong_section_pure"] = ad.strong_is_pure;
            summary["phases"]["strong_section_stratum_mismatch"] = ad.stratum_mismatch;
            summary["phases"]["perturbation_valid"] = ad.perturbation_valid;
        }
        const Connection kind =
            cfg.phases == "uhlmann" ? Connection::Uhlmann : Connection::Sjoqvist;
        const auto dec = decompose_phases(model, *pur, section, kind);
        summary["phases"]["connection"] = cfg.phases;
        summary["phases"]["section"] = cfg.section;
        summary["phases"]["max_reconstruction_residual"] = dec.max_reconstruction_residual;
        summary["phases"]["reconstruction_tol"] = dec.reconstruction_tol;
        summary["phases"]["max_eta_stabilizer_residual"] = dec.max_eta_stabilizer_residual;
        summary["phases"]["max_k_unitarity_error"] = dec.max_k_unitarity_error;
        if (dec.failed) {
            numerical_failure = true;
            summary["phases"]["failure"] = dec.message;
        }
        if (model.dim == 2)
            phase_csv_and_plot(dir, "phases_" + cfg.section + "_" + cfg.phases, times, dec,
                               cfg.plots);
    }

    summary["status"] = numerical_failure ? "numerical-failure" : "ok";
    std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
    std::cout << (numerical_failure ? "completed with numerical failures; " : "completed; ")
              << "outputs in " << cfg.out_dir << "\n";
    return numerical_failure ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"open quantum dynamics: master equation, purified nonlinear dynamics, "
                 "stochastic unravelings and operator-valued geometric phases"};
    app.require_subcommand(1);
    app.set_config("--config");

    RunConfig cfg;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--benchmark", cfg.benchmark, "named benchmark (paper-two-level)");
        cmd->add_option("--model-file", cfg.model_file, "JSON file with constant model matrices");
        cmd->add_option("--schedule-file", cfg.schedule_file, "override control schedule table");
        cmd->add_option("--eps", cfg.eps, "benchmark initial-state mixing parameter");
        cmd->add_option("--gamma-z", cfg.gamma_z, "dephasing rate");
        cmd->add_option("--gamma-minus", cfg.gamma_minus, "spontaneous-emission rate");
        cmd->add_option("--t0", cfg.t0, "start time");
        cmd->add_option("--t-end", cfg.t_end, "end time");
        cmd->add_option("--steps", cfg.steps, "number of grid steps");
        cmd->add_option("--schemes", cfg.schemes,
                        "lindblad, nlse, pdp, qsd, closest-pure-shifted, closest-pure-unshifted")
            ->delimiter(',');
        cmd->add_option("--trajectories", cfg.trajectories, "Monte Carlo trajectory count");
        cmd->add_option("--seed", cfg.seed, "master seed");
        cmd->add_option("--store-stride", cfg.store_stride, "store every n-th ensemble sample");
        cmd->add_option("--phases", cfg.phases, "phase connection: none, uhlmann, sjoqvist");
        cmd->add_option("--section", cfg.section, "phase section: sqrt-sigma, weak-adiabatic");
        cmd->add_option("--out", cfg.out_dir, "output directory");
        cmd->add_flag("--plots,!--no-plots", cfg.plots, "emit SVG plots");
    };

    CLI::App* run = app.add_subcommand("run", "run the configured schemes and export artifacts");
    add_common(run);
    CLI::App* validate = app.add_subcommand("validate", "dry-run configuration check");
    add_common(validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return run_command(cfg, validate->parsed());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
