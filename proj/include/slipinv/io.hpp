#pragma once

// Configuration parsing, station CSV ingestion, synthetic-scenario
// generation, result serialization, and the CLI entry point.  File formats
// are documented in the README; everything written here is reproducible
// bit-for-bit from (config, station file, seed), except the timing block of
// the manifest, which is explicitly marked non-deterministic.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slipinv/posterior.hpp"

namespace slipinv {

// One Gaussian slip bump on the rectangle, in fault-trace coordinates.
struct BumpSpec {
  Vec2 center = Vec2::Zero();  // km
  double width_km = 0.0;       // Gaussian sigma
  double amplitude_mm = 0.0;   // peak slip
};

// Ground truth for synthetic data.  The generation rake may differ from the
// inversion rake in the grid spec; that mismatch is itself a scenario.
struct SyntheticTruth {
  GeometryParam m;
  Rake rake = Rake::steepest();
  std::vector<BumpSpec> bumps;
};

// Everything a run needs beyond the station file.  Serialization through
// serialize_config / load_config is lossless.
struct ScenarioConfig {
  ElasticMedium medium;

  bool center_auto = true;      // center on the displacement-weighted mean
  Vec2 center = Vec2::Zero();   // used when center_auto is false
  Vec2 half_lengths = Vec2::Zero();
  int n_side = 0;
  Rake rake = Rake::steepest();

  ParameterBox box;

  double sigma_hor = 1.0;  // synth noise when the layout has no sigmas, mm
  double sigma_ver = 3.0;
  double noise_scale = 1.0;  // multiplies synth noise draws; 0 = noise-free

  double err_rel = 0.05;
  double tau = 1.0;
  std::optional<double> c_override;
  std::uint64_t seed = 0;
  double depth_guard_km = kDefaultDepthGuardKm;

  std::optional<SyntheticTruth> truth;

  void validate() const;
};

ScenarioConfig load_config(const std::string& path);

// Canonical text form: fixed key order, full double precision.  The config
// hash in the manifest is the FNV-1a digest of this string.
std::string serialize_config(const ScenarioConfig& config);
void save_config(const ScenarioConfig& config, const std::string& path);

std::uint64_t fnv1a64(const std::string& text);

// Station CSV.  With require_u the displacement columns must be complete;
// synth layouts may leave them (and the sigma columns) empty instead, in
// which case sigmas come back as NaN for synth to fill from the config.
StationSet load_stations(const std::string& path, bool require_u = true);
void save_stations(const StationSet& stations, const std::string& path);

// Resolve the grid spec against a station set (auto center weights stations
// by displacement magnitude, falling back to the plain mean without data).
FaultGrid grid_from_config(const ScenarioConfig& config,
                           const StationSet& stations);

struct SynthResult {
  StationSet stations;      // with measured_u filled (noise added)
  SlipVector slip;          // nodal truth slip, mm
  Eigen::MatrixX3d clean;   // noise-free displacements, one row per station
};

// Forward-model the truth and add seeded Gaussian noise.  The layout's
// positions are kept; empty layout sigmas are replaced by the config noise.
SynthResult synth(const ScenarioConfig& config, const StationSet& layout,
                  std::uint64_t seed);

void write_truth_json(const ScenarioConfig& config, const SynthResult& result,
                      std::uint64_t seed, const std::string& path);

struct RunResult {
  FaultGrid grid;
  CSelection selection;      // err_target is 0 when an override skipped it
  bool used_override = false;
  double C = 0.0;
  PosteriorGrid posterior;
  Marginals marg;
  MapEstimate map;
  SlipPosterior slip;        // at the MAP geometry
  double wall_seconds = 0.0;
};

// Full pipeline: C selection (or override), sweep, marginals, MAP, slip
// posterior at the MAP.  Errors from the stages are rethrown with a stage
// label prefixed so the CLI can say where a run died.
RunResult run_pipeline(const ScenarioConfig& config,
                       const StationSet& stations);

void write_posterior_csv(const PosteriorGrid& pg, const std::string& path);

// Rebuild a posterior grid from its CSV for post-processing (marginals,
// MAP).  The tau-reweighting caches are not part of the CSV, so reweight
// and concentration need a fresh sweep instead.
PosteriorGrid read_posterior_csv(const std::string& path);

void write_marginal_csv(const Marginal1D& marginal, const std::string& path);
void write_slip_csv(const FaultGrid& grid, const SlipPosterior& slip,
                    const std::string& path);
void write_manifest(const ScenarioConfig& config, const StationSet& stations,
                    const RunResult& result, const std::string& path);

// CLI entry point (subcommands synth, select-c, sweep, marginals,
// slip-stats, run).  Returns the process exit code: 0 success, 2 config
// errors, 3 data errors, 4 numerical failures.
int run_cli(int argc, char** argv);

}  // namespace slipinv
