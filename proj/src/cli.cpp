// Command-line surface.  Subcommands mirror the pipeline stages; every
// exception type maps to a distinct exit code so scripts can tell a bad
// config (2) from bad data (3) from a numerical failure (4).

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <tuple>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"
#ifdef _OPENMP
#include <omp.h>
#endif

#include "slipinv/io.hpp"

namespace slipinv {

namespace {

struct CliState {
  std::string config_path;
  std::string stations_path;
  std::string out;
  std::string out_dir = ".";
  std::string truth_out;
  std::string posterior_path;
  std::string selection_path;
  double err_rel = 0.0;
  double tau = 0.0;
  double c_override = 0.0;
  double a = 0.0, b = 0.0, d = 0.0;
  std::uint64_t seed = 0;
  int threads = 0;
};

bool flag_given(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* opt = cmd->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

void apply_overrides(const CLI::App* cmd, const CliState& cli,
                     ScenarioConfig& config) {
  if (flag_given(cmd, "--err-rel")) config.err_rel = cli.err_rel;
  if (flag_given(cmd, "--tau")) config.tau = cli.tau;
  if (flag_given(cmd, "--c-override")) config.c_override = cli.c_override;
  if (cli.threads > 0) {
#ifdef _OPENMP
    omp_set_num_threads(cli.threads);
#else
    std::cerr << "warning: built without OpenMP; --threads ignored\n";
#endif
  }
}

double read_selection_c(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open selection file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!j.contains("global_C") || !j["global_C"].is_number()) {
    throw DataError(path + ": no numeric global_C field");
  }
  return j["global_C"].get<double>();
}

void write_selection_json(const ScenarioConfig& config, const CSelection& sel,
                          const std::string& path) {
  nlohmann::ordered_json j;
  j["schema"] = "slipinv-selection/1";
  j["err_rel"] = config.err_rel;
  j["err_target"] = sel.err_target;
  j["global_C"] = sel.global_C;
  j["n_skipped"] = sel.n_skipped;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

// C for the standalone sweep and slip-stats subcommands: an override wins,
// then a cached selection file, then a fresh discrepancy search.
double resolve_c(const CLI::App* cmd, const CliState& cli,
                 const ScenarioConfig& config, const FaultGrid& grid,
                 const StationSet& stations, const DifferenceOperators& ops) {
  if (config.c_override) return *config.c_override;
  if (flag_given(cmd, "--selection")) return read_selection_c(cli.selection_path);
  const CSelection sel =
      select_C_global(config.box, grid, stations, config.medium, ops,
                      config.err_rel, config.depth_guard_km);
  std::cerr << "selected C = " << sel.global_C << " (err_target "
            << sel.err_target << ")\n";
  return sel.global_C;
}

std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

int dispatch(const CLI::App& app, const CliState& cli) {
  const CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();

  if (name == "synth") {
    ScenarioConfig config = load_config(cli.config_path);
    apply_overrides(cmd, cli, config);
    const StationSet layout = load_stations(cli.stations_path, false);
    const std::uint64_t seed = flag_given(cmd, "--seed") ? cli.seed : config.seed;
    const SynthResult result = synth(config, layout, seed);
    save_stations(result.stations, cli.out);
    if (!cli.truth_out.empty()) {
      write_truth_json(config, result, seed, cli.truth_out);
    }
    std::cout << "wrote " << result.stations.n() << " stations to " << cli.out
              << " (peak slip " << result.slip.cwiseAbs().maxCoeff()
              << " mm, max clean |u| "
              << result.clean.rowwise().norm().maxCoeff() << " mm)\n";
    return 0;
  }

  ScenarioConfig config = load_config(cli.config_path);
  apply_overrides(cmd, cli, config);

  if (name == "marginals") {
    const PosteriorGrid pg = read_posterior_csv(cli.posterior_path);
    const Marginals m = marginals(pg);
    std::filesystem::create_directories(cli.out_dir);
    write_marginal_csv(m.a, join(cli.out_dir, "marginal_a.csv"));
    write_marginal_csv(m.b, join(cli.out_dir, "marginal_b.csv"));
    write_marginal_csv(m.d, join(cli.out_dir, "marginal_d.csv"));
    const std::array<std::pair<const char*, const Marginal1D*>, 3> axes = {
        {{"a", &m.a}, {"b", &m.b}, {"d", &m.d}}};
    for (const auto& [label, marg] : axes) {
      const auto [mean, sd] = marginal_mean_std(*marg);
      std::cout << label << ": mean " << mean << ", std " << sd << "\n";
    }
    return 0;
  }

  const StationSet stations = load_stations(cli.stations_path);

  if (name == "select-c") {
    const FaultGrid grid = grid_from_config(config, stations);
    const DifferenceOperators ops = build_difference_ops(grid);
    const CSelection sel =
        select_C_global(config.box, grid, stations, config.medium, ops,
                        config.err_rel, config.depth_guard_km);
    write_selection_json(config, sel, cli.out);
    std::cout << "global_C = " << sel.global_C << " (err_target "
              << sel.err_target << ", " << sel.n_skipped
              << " cells skipped)\n";
    return 0;
  }

  if (name == "sweep") {
    const FaultGrid grid = grid_from_config(config, stations);
    const DifferenceOperators ops = build_difference_ops(grid);
    const double C = resolve_c(cmd, cli, config, grid, stations, ops);
    const PosteriorGrid pg = sweep(config.box, grid, stations, config.medium,
                                   ops, C, config.tau,
                                   config.depth_guard_km);
    write_posterior_csv(pg, cli.out);
    std::cout << "swept " << config.box.size() << " cells at C = " << C
              << " (" << pg.n_invalid << " invalid) -> " << cli.out << "\n";
    return 0;
  }

  if (name == "slip-stats") {
    const FaultGrid grid = grid_from_config(config, stations);
    const DifferenceOperators ops = build_difference_ops(grid);
    const double C = resolve_c(cmd, cli, config, grid, stations, ops);
    const GeometryParam m{cli.a, cli.b, cli.d};
    const ForwardSystem sys =
        assemble(m, grid, stations, config.medium, config.depth_guard_km);
    const SlipPosterior post =
        slip_posterior(sys, ops, stations.measured_u, C);
    write_slip_csv(grid, post, cli.out);
    std::cout << "slip posterior at (" << m.a << ", " << m.b << ", " << m.d
              << "): peak |mean| " << post.mean.cwiseAbs().maxCoeff()
              << " mm, std range [" << post.node_std.minCoeff() << ", "
              << post.node_std.maxCoeff() << "] mm -> " << cli.out << "\n";
    return 0;
  }

  // run: the full pipeline.
  const RunResult result = run_pipeline(config, stations);
  std::filesystem::create_directories(cli.out_dir);
  write_posterior_csv(result.posterior, join(cli.out_dir, "posterior.csv"));
  write_marginal_csv(result.marg.a, join(cli.out_dir, "marginal_a.csv"));
  write_marginal_csv(result.marg.b, join(cli.out_dir, "marginal_b.csv"));
  write_marginal_csv(result.marg.d, join(cli.out_dir, "marginal_d.csv"));
  write_slip_csv(result.grid, result.slip, join(cli.out_dir, "slip.csv"));
  write_manifest(config, stations, result, join(cli.out_dir, "manifest.json"));

  const auto [sa, sb, sd] =
      std::tuple{marginal_mean_std(result.marg.a).second,
                 marginal_mean_std(result.marg.b).second,
                 marginal_mean_std(result.marg.d).second};
  std::cout << "C = " << result.C
            << (result.used_override ? " (override)" : " (discrepancy)")
            << "\n"
            << "MAP cell (" << result.map.cell(0) << ", "
            << result.map.cell(1) << ", " << result.map.cell(2) << ") -> m = ("
            << result.map.m.a << ", " << result.map.m.b << ", "
            << result.map.m.d << ")\n"
            << "posterior std (a, b, d) = (" << sa << ", " << sb << ", " << sd
            << ")\n"
            << "wall time " << result.wall_seconds << " s; outputs in "
            << cli.out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{
      "Planar-fault geometry and slip inversion from GPS surface "
      "displacements"};
  app.require_subcommand(1);
  CliState cli;

  const auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", cli.config_path, "scenario config file")
        ->required();
  };
  const auto add_stations = [&](CLI::App* cmd) {
    cmd->add_option("-s,--stations", cli.stations_path, "station CSV")
        ->required();
  };
  const auto add_shared = [&](CLI::App* cmd) {
    cmd->add_option("--err-rel", cli.err_rel,
                    "relative discrepancy target (default 0.05)");
    cmd->add_option("--tau", cli.tau, "noise rescaling factor (default 1)");
    cmd->add_option("--c-override", cli.c_override,
                    "fixed regularization constant, skips selection");
    cmd->add_option("--threads", cli.threads, "OpenMP thread count");
  };

  CLI::App* c_synth = app.add_subcommand(
      "synth", "generate noisy synthetic displacements from a truth block");
  add_config(c_synth);
  add_stations(c_synth);
  c_synth->add_option("-o,--out", cli.out, "output station CSV")->required();
  c_synth->add_option("--truth-out", cli.truth_out, "truth sidecar JSON");
  c_synth->add_option("--seed", cli.seed, "override the config seed");
  add_shared(c_synth);

  CLI::App* c_select = app.add_subcommand(
      "select-c", "run the discrepancy search over the parameter box");
  add_config(c_select);
  add_stations(c_select);
  c_select->add_option("-o,--out", cli.out, "selection JSON")->required();
  add_shared(c_select);

  CLI::App* c_sweep = app.add_subcommand(
      "sweep", "evaluate the posterior over the parameter box");
  add_config(c_sweep);
  add_stations(c_sweep);
  c_sweep->add_option("-o,--out", cli.out, "posterior CSV")->required();
  c_sweep->add_option("--selection", cli.selection_path,
                      "reuse C from a select-c JSON");
  add_shared(c_sweep);

  CLI::App* c_marg = app.add_subcommand(
      "marginals", "integrate a swept posterior down to 1-D marginals");
  add_config(c_marg);
  c_marg->add_option("-p,--posterior", cli.posterior_path,
                     "posterior CSV from sweep or run")
      ->required();
  c_marg->add_option("--out-dir", cli.out_dir, "output directory");

  CLI::App* c_slip = app.add_subcommand(
      "slip-stats", "slip posterior mean and std at a fixed geometry");
  add_config(c_slip);
  add_stations(c_slip);
  c_slip->add_option("-o,--out", cli.out, "slip CSV")->required();
  c_slip->add_option("--a", cli.a, "plane slope a")->required();
  c_slip->add_option("--b", cli.b, "plane slope b")->required();
  c_slip->add_option("--d", cli.d, "plane intercept d (km, negative)")
      ->required();
  c_slip->add_option("--selection", cli.selection_path,
                     "reuse C from a select-c JSON");
  add_shared(c_slip);

  CLI::App* c_run =
      app.add_subcommand("run", "full pipeline: select-c, sweep, marginals, "
                                "MAP, slip posterior, manifest");
  add_config(c_run);
  add_stations(c_run);
  c_run->add_option("--out-dir", cli.out_dir, "output directory");
  add_shared(c_run);

  try {
    app.parse(argc, argv);
    return dispatch(app, cli);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace slipinv
