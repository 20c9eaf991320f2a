#include "slipinv/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace slipinv {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;

// Full-precision double formatting; %.17g round-trips every finite value.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = b + t.size();
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

bool parse_int(const std::string& s, int& out) {
  const std::string t = trim(s);
  const char* b = t.data();
  const char* e = b + t.size();
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  const std::string t = trim(s);
  const char* b = t.data();
  const char* e = b + t.size();
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

[[noreturn]] void config_fail(const std::string& path, int line,
                              const std::string& what) {
  throw ConfigError(path + ":" + std::to_string(line) + ": " + what);
}

Rake parse_rake(const std::string& value, const std::string& path, int line) {
  if (value == "steepest") return Rake::steepest();
  const auto colon = value.find(':');
  if (colon != std::string::npos) {
    const std::string kind = value.substr(0, colon);
    double v = 0.0;
    if (!parse_double(value.substr(colon + 1), v)) {
      config_fail(path, line, "bad rake angle '" + value + "'");
    }
    if (kind == "angle") return Rake::fixed(v * kPi / 180.0);
    if (kind == "angle_rad") return Rake::fixed(v);
  }
  config_fail(path, line,
              "rake must be 'steepest', 'angle:<deg>', or 'angle_rad:<rad>'");
}

std::string rake_text(const Rake& rake) {
  if (rake.mode == RakeMode::SteepestAscent) return "steepest";
  // Radians serialize losslessly; degrees would pick up a conversion ulp.
  return "angle_rad:" + fmt(rake.angle_rad);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

// Rethrow stage failures with the stage name attached, keeping the type so
// the CLI exit code still distinguishes config, data, and numerical causes.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  const auto tag = [&](const char* what) {
    return "[" + std::string(name) + "] " + what;
  };
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e.what()));
  } catch (const DataError& e) {
    throw DataError(tag(e.what()));
  } catch (const NumericalError& e) {
    throw NumericalError(tag(e.what()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ScenarioConfig::validate() const {
  medium.validate();
  if (n_side < 1) throw ConfigError("grid.n_side must be at least 1");
  if (!(half_lengths(0) > 0.0) || !(half_lengths(1) > 0.0)) {
    throw ConfigError("grid.half_lengths must be positive");
  }
  box.validate();
  if (!(sigma_hor >= 0.0) || !(sigma_ver >= 0.0)) {
    throw ConfigError("noise sigmas must be nonnegative");
  }
  if (!(noise_scale >= 0.0)) {
    throw ConfigError("noise.scale must be nonnegative");
  }
  if (!(err_rel > 0.0) || !(err_rel < 1.0)) {
    throw ConfigError("err_rel must lie in (0, 1)");
  }
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (c_override && !(*c_override > 0.0)) {
    throw ConfigError("c_override must be positive");
  }
  if (!(depth_guard_km >= 0.0)) {
    throw ConfigError("depth_guard must be nonnegative");
  }
  if (truth) {
    if (!std::isfinite(truth->m.a) || !std::isfinite(truth->m.b) ||
        !std::isfinite(truth->m.d)) {
      throw ConfigError("truth.m must be finite");
    }
    for (const BumpSpec& bump : truth->bumps) {
      if (!(bump.width_km > 0.0)) {
        throw ConfigError("truth.bump width must be positive");
      }
      if (!std::isfinite(bump.amplitude_mm)) {
        throw ConfigError("truth.bump amplitude must be finite");
      }
    }
  }
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);

  ScenarioConfig cfg;
  std::map<std::string, int> seen;  // key -> first line, to flag duplicates
  bool any_truth = false;

  const auto need = [&](const std::vector<std::string>& toks, size_t n,
                        const std::string& key, int line) {
    if (toks.size() != n) {
      config_fail(path, line,
                  key + " expects " + std::to_string(n) + " value(s), got " +
                      std::to_string(toks.size()));
    }
  };
  const auto num = [&](const std::string& tok, const std::string& key,
                       int line) {
    double v = 0.0;
    if (!parse_double(tok, v)) {
      config_fail(path, line, key + ": bad number '" + tok + "'");
    }
    return v;
  };

  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string text = trim(raw);
    if (text.empty()) continue;

    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      config_fail(path, line, "expected 'key = value'");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    const std::vector<std::string> toks = tokens(value);

    if (key != "truth.bump") {
      const auto [it, fresh] = seen.emplace(key, line);
      if (!fresh) {
        config_fail(path, line,
                    "duplicate key '" + key + "' (first at line " +
                        std::to_string(it->second) + ")");
      }
    }
    if (key.rfind("truth.", 0) == 0) {
      any_truth = true;
      if (!cfg.truth) cfg.truth.emplace();
    }

    if (key == "medium.lambda") {
      need(toks, 1, key, line);
      cfg.medium.lambda = num(toks[0], key, line);
    } else if (key == "medium.mu") {
      need(toks, 1, key, line);
      cfg.medium.mu = num(toks[0], key, line);
    } else if (key == "grid.center") {
      if (toks.size() == 1 && toks[0] == "auto") {
        cfg.center_auto = true;
      } else {
        need(toks, 2, key, line);
        cfg.center_auto = false;
        cfg.center = Vec2(num(toks[0], key, line), num(toks[1], key, line));
      }
    } else if (key == "grid.half_lengths") {
      need(toks, 2, key, line);
      cfg.half_lengths =
          Vec2(num(toks[0], key, line), num(toks[1], key, line));
    } else if (key == "grid.n_side") {
      need(toks, 1, key, line);
      if (!parse_int(toks[0], cfg.n_side)) {
        config_fail(path, line, "grid.n_side: bad integer '" + toks[0] + "'");
      }
    } else if (key == "grid.rake") {
      need(toks, 1, key, line);
      cfg.rake = parse_rake(toks[0], path, line);
    } else if (key == "box.a" || key == "box.b" || key == "box.d") {
      need(toks, 3, key, line);
      const double lo = num(toks[0], key, line);
      const double hi = num(toks[1], key, line);
      int n = 0;
      if (!parse_int(toks[2], n)) {
        config_fail(path, line, key + ": bad cell count '" + toks[2] + "'");
      }
      if (key == "box.a") {
        cfg.box.a_min = lo; cfg.box.a_max = hi; cfg.box.n_a = n;
      } else if (key == "box.b") {
        cfg.box.b_min = lo; cfg.box.b_max = hi; cfg.box.n_b = n;
      } else {
        cfg.box.d_min = lo; cfg.box.d_max = hi; cfg.box.n_d = n;
      }
    } else if (key == "noise.sigma_hor") {
      need(toks, 1, key, line);
      cfg.sigma_hor = num(toks[0], key, line);
    } else if (key == "noise.sigma_ver") {
      need(toks, 1, key, line);
      cfg.sigma_ver = num(toks[0], key, line);
    } else if (key == "noise.scale") {
      need(toks, 1, key, line);
      cfg.noise_scale = num(toks[0], key, line);
    } else if (key == "err_rel") {
      need(toks, 1, key, line);
      cfg.err_rel = num(toks[0], key, line);
    } else if (key == "tau") {
      need(toks, 1, key, line);
      cfg.tau = num(toks[0], key, line);
    } else if (key == "c_override") {
      need(toks, 1, key, line);
      cfg.c_override = num(toks[0], key, line);
    } else if (key == "seed") {
      need(toks, 1, key, line);
      if (!parse_u64(toks[0], cfg.seed)) {
        config_fail(path, line, "seed: bad integer '" + toks[0] + "'");
      }
    } else if (key == "depth_guard") {
      need(toks, 1, key, line);
      cfg.depth_guard_km = num(toks[0], key, line);
    } else if (key == "truth.m") {
      need(toks, 3, key, line);
      cfg.truth->m = GeometryParam{num(toks[0], key, line),
                                   num(toks[1], key, line),
                                   num(toks[2], key, line)};
    } else if (key == "truth.rake") {
      need(toks, 1, key, line);
      cfg.truth->rake = parse_rake(toks[0], path, line);
    } else if (key == "truth.bump") {
      need(toks, 4, key, line);
      cfg.truth->bumps.push_back(
          BumpSpec{Vec2(num(toks[0], key, line), num(toks[1], key, line)),
                   num(toks[2], key, line), num(toks[3], key, line)});
    } else {
      config_fail(path, line, "unknown key '" + key + "'");
    }
  }

  for (const char* required :
       {"grid.half_lengths", "grid.n_side", "box.a", "box.b", "box.d"}) {
    if (!seen.count(required)) {
      throw ConfigError(path + ": missing required key '" +
                        std::string(required) + "'");
    }
  }
  if (any_truth && !seen.count("truth.m")) {
    throw ConfigError(path + ": truth block without truth.m");
  }
  cfg.validate();
  return cfg;
}

std::string serialize_config(const ScenarioConfig& config) {
  std::ostringstream out;
  out << "medium.lambda = " << fmt(config.medium.lambda) << "\n";
  out << "medium.mu = " << fmt(config.medium.mu) << "\n";
  if (config.center_auto) {
    out << "grid.center = auto\n";
  } else {
    out << "grid.center = " << fmt(config.center(0)) << " "
        << fmt(config.center(1)) << "\n";
  }
  out << "grid.half_lengths = " << fmt(config.half_lengths(0)) << " "
      << fmt(config.half_lengths(1)) << "\n";
  out << "grid.n_side = " << config.n_side << "\n";
  out << "grid.rake = " << rake_text(config.rake) << "\n";
  const ParameterBox& box = config.box;
  out << "box.a = " << fmt(box.a_min) << " " << fmt(box.a_max) << " "
      << box.n_a << "\n";
  out << "box.b = " << fmt(box.b_min) << " " << fmt(box.b_max) << " "
      << box.n_b << "\n";
  out << "box.d = " << fmt(box.d_min) << " " << fmt(box.d_max) << " "
      << box.n_d << "\n";
  out << "noise.sigma_hor = " << fmt(config.sigma_hor) << "\n";
  out << "noise.sigma_ver = " << fmt(config.sigma_ver) << "\n";
  out << "noise.scale = " << fmt(config.noise_scale) << "\n";
  out << "err_rel = " << fmt(config.err_rel) << "\n";
  out << "tau = " << fmt(config.tau) << "\n";
  if (config.c_override) {
    out << "c_override = " << fmt(*config.c_override) << "\n";
  }
  out << "seed = " << config.seed << "\n";
  out << "depth_guard = " << fmt(config.depth_guard_km) << "\n";
  if (config.truth) {
    const SyntheticTruth& t = *config.truth;
    out << "truth.m = " << fmt(t.m.a) << " " << fmt(t.m.b) << " "
        << fmt(t.m.d) << "\n";
    out << "truth.rake = " << rake_text(t.rake) << "\n";
    for (const BumpSpec& bump : t.bumps) {
      out << "truth.bump = " << fmt(bump.center(0)) << " "
          << fmt(bump.center(1)) << " " << fmt(bump.width_km) << " "
          << fmt(bump.amplitude_mm) << "\n";
    }
  }
  return out.str();
}

void save_config(const ScenarioConfig& config, const std::string& path) {
  open_out(path) << serialize_config(config);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Station CSV
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kStationHeader = {
    "name",         "x1_km",         "x2_km",         "u1_mm",
    "u2_mm",        "u3_mm",         "sigma_hor_mm",  "sigma_ver_mm"};

[[noreturn]] void data_fail(const std::string& path, int line,
                            const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

StationSet load_stations(const std::string& path, bool require_u) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open station file " + path);

  std::string raw;
  int line = 0;
  if (!std::getline(in, raw)) throw DataError(path + ": empty file");
  ++line;
  {
    std::vector<std::string> header = split(trim(raw), ',');
    for (std::string& h : header) h = trim(h);
    if (header != kStationHeader) {
      std::string want;
      for (size_t i = 0; i < kStationHeader.size(); ++i) {
        want += (i ? "," : "") + kStationHeader[i];
      }
      data_fail(path, line, "header must be exactly '" + want + "'");
    }
  }

  std::vector<std::string> names;
  std::vector<Eigen::Vector2d> pos;
  std::vector<Eigen::Vector3d> u;
  std::vector<bool> has_u;
  std::vector<double> sh, sv;
  std::map<std::string, int> name_line;

  while (std::getline(in, raw)) {
    ++line;
    if (trim(raw).empty()) continue;
    std::vector<std::string> f = split(raw, ',');
    if (f.size() != 8) {
      data_fail(path, line, "expected 8 fields, got " +
                                std::to_string(f.size()));
    }
    for (std::string& x : f) x = trim(x);

    if (f[0].empty()) data_fail(path, line, "empty station name");
    const auto [it, fresh] = name_line.emplace(f[0], line);
    if (!fresh) {
      data_fail(path, line,
                "duplicate station name '" + f[0] + "' (first at line " +
                    std::to_string(it->second) + ")");
    }
    names.push_back(f[0]);

    Eigen::Vector2d p;
    if (!parse_double(f[1], p(0)) || !parse_double(f[2], p(1))) {
      data_fail(path, line, "bad coordinate");
    }
    pos.push_back(p);

    const int n_u = static_cast<int>(!f[3].empty()) + !f[4].empty() +
                    !f[5].empty();
    if (n_u == 3) {
      Eigen::Vector3d v;
      for (int c = 0; c < 3; ++c) {
        if (!parse_double(f[3 + c], v(c))) {
          data_fail(path, line, "bad displacement value '" + f[3 + c] + "'");
        }
      }
      u.push_back(v);
      has_u.push_back(true);
    } else if (n_u == 0) {
      if (require_u) data_fail(path, line, "missing displacement values");
      u.push_back(Eigen::Vector3d::Zero());
      has_u.push_back(false);
    } else {
      data_fail(path, line, "displacement must be all three values or none");
    }

    for (const int c : {6, 7}) {
      double s = std::numeric_limits<double>::quiet_NaN();
      if (!f[c].empty()) {
        if (!parse_double(f[c], s) || !(s > 0.0)) {
          data_fail(path, line, "bad sigma '" + f[c] + "'");
        }
      } else if (require_u) {
        data_fail(path, line, "missing sigma");
      }
      (c == 6 ? sh : sv).push_back(s);
    }
  }

  const int N = static_cast<int>(names.size());
  if (N == 0) throw DataError(path + ": no station rows");

  StationSet st;
  st.names = std::move(names);
  st.positions.resize(N, 2);
  st.sigma_hor.resize(N);
  st.sigma_ver.resize(N);
  const bool all_u = std::all_of(has_u.begin(), has_u.end(),
                                 [](bool b) { return b; });
  if (all_u) st.measured_u.resize(3 * N);
  for (int j = 0; j < N; ++j) {
    st.positions.row(j) = pos[j].transpose();
    st.sigma_hor(j) = sh[j];
    st.sigma_ver(j) = sv[j];
    if (all_u) st.measured_u.segment<3>(3 * j) = u[j];
  }
  return st;
}

void save_stations(const StationSet& stations, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "name,x1_km,x2_km,u1_mm,u2_mm,u3_mm,sigma_hor_mm,sigma_ver_mm\n";
  const bool with_u = stations.measured_u.size() > 0;
  for (int j = 0; j < stations.n(); ++j) {
    out << stations.names[j] << "," << fmt(stations.positions(j, 0)) << ","
        << fmt(stations.positions(j, 1));
    for (int c = 0; c < 3; ++c) {
      out << ",";
      if (with_u) out << fmt(stations.measured_u(3 * j + c));
    }
    for (const double s : {stations.sigma_hor(j), stations.sigma_ver(j)}) {
      out << ",";
      if (std::isfinite(s)) out << fmt(s);
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Synthetic scenarios
// ---------------------------------------------------------------------------

namespace {

Vec2 resolve_center(const ScenarioConfig& config, const StationSet& stations) {
  if (!config.center_auto) return config.center;
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(stations.n());
  if (stations.measured_u.size() == 3 * stations.n()) {
    for (int j = 0; j < stations.n(); ++j) {
      weights(j) = stations.measured_u.segment<3>(3 * j).norm();
    }
    if (!(weights.sum() > 0.0)) weights.setOnes();
  }
  return weighted_center(stations.positions, weights);
}

}  // namespace

FaultGrid grid_from_config(const ScenarioConfig& config,
                           const StationSet& stations) {
  return build_grid(resolve_center(config, stations), config.half_lengths,
                    config.n_side, config.rake);
}

SynthResult synth(const ScenarioConfig& config, const StationSet& layout,
                  std::uint64_t seed) {
  config.validate();
  if (!config.truth) throw ConfigError("synth requires a truth block");
  if (config.truth->bumps.empty()) {
    throw ConfigError("synth requires at least one truth.bump");
  }

  SynthResult result;
  result.stations = layout;
  for (int j = 0; j < result.stations.n(); ++j) {
    if (!std::isfinite(result.stations.sigma_hor(j))) {
      result.stations.sigma_hor(j) = config.sigma_hor;
    }
    if (!std::isfinite(result.stations.sigma_ver(j))) {
      result.stations.sigma_ver(j) = config.sigma_ver;
    }
  }
  result.stations.measured_u.resize(0);

  // The generation grid carries the truth rake, which may differ from the
  // inversion rake in the grid spec.  Assembly is fed unit sigmas so that a
  // noise-free scenario (sigma 0) can still be forward-modeled; the weights
  // never touch the predictions.
  const FaultGrid grid =
      build_grid(resolve_center(config, layout), config.half_lengths,
                 config.n_side, config.truth->rake);
  StationSet forward_st = result.stations;
  forward_st.sigma_hor.setOnes();
  forward_st.sigma_ver.setOnes();
  const ForwardSystem sys = assemble(config.truth->m, grid, forward_st,
                                     config.medium, config.depth_guard_km);

  result.slip.setZero(grid.q());
  for (int k = 0; k < grid.q(); ++k) {
    const Vec2 y = grid.node_coord(k);
    for (const BumpSpec& bump : config.truth->bumps) {
      const double r2 = (y - bump.center).squaredNorm();
      result.slip(k) +=
          bump.amplitude_mm *
          std::exp(-r2 / (2.0 * bump.width_km * bump.width_km));
    }
  }

  result.clean = predict(sys, result.slip);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const int N = result.stations.n();
  result.stations.measured_u.resize(3 * N);
  for (int j = 0; j < N; ++j) {
    for (int c = 0; c < 3; ++c) {
      const double sigma = (c < 2) ? result.stations.sigma_hor(j)
                                   : result.stations.sigma_ver(j);
      result.stations.measured_u(3 * j + c) =
          result.clean(j, c) + config.noise_scale * sigma * unit(rng);
    }
  }
  return result;
}

void write_truth_json(const ScenarioConfig& config, const SynthResult& result,
                      std::uint64_t seed, const std::string& path) {
  const SyntheticTruth& t = *config.truth;
  ordered_json j;
  j["schema"] = "slipinv-truth/1";
  j["m"] = {{"a", t.m.a}, {"b", t.m.b}, {"d", t.m.d}};
  j["generation_rake"] = rake_text(t.rake);
  ordered_json bumps = ordered_json::array();
  for (const BumpSpec& bump : t.bumps) {
    bumps.push_back({{"center_km", {bump.center(0), bump.center(1)}},
                     {"width_km", bump.width_km},
                     {"amplitude_mm", bump.amplitude_mm}});
  }
  j["bumps"] = bumps;
  j["seed"] = seed;
  j["n_stations"] = result.stations.n();
  j["peak_slip_mm"] = result.slip.cwiseAbs().maxCoeff();
  j["max_clean_displacement_mm"] =
      result.clean.rowwise().norm().maxCoeff();
  open_out(path) << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

RunResult run_pipeline(const ScenarioConfig& config,
                       const StationSet& stations) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  stations.validate();
  if (stations.measured_u.size() != 3 * stations.n()) {
    throw DataError("station set carries no measured displacements");
  }

  RunResult result;
  result.grid = grid_from_config(config, stations);
  const DifferenceOperators ops = build_difference_ops(result.grid);

  if (config.c_override) {
    result.used_override = true;
    result.C = *config.c_override;
  } else {
    result.selection = stage("select-c", [&] {
      return select_C_global(config.box, result.grid, stations, config.medium,
                             ops, config.err_rel, config.depth_guard_km);
    });
    result.C = result.selection.global_C;
  }

  result.posterior = stage("sweep", [&] {
    return sweep(config.box, result.grid, stations, config.medium, ops,
                 result.C, config.tau, config.depth_guard_km);
  });
  result.marg = stage("marginals", [&] { return marginals(result.posterior); });
  result.map = stage("map", [&] { return map_estimate(result.posterior); });
  result.slip = stage("slip-stats", [&] {
    const ForwardSystem sys = assemble(result.map.m, result.grid, stations,
                                       config.medium, config.depth_guard_km);
    return slip_posterior(sys, ops, stations.measured_u, result.C);
  });

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

// ---------------------------------------------------------------------------
// Result serialization
// ---------------------------------------------------------------------------

void write_posterior_csv(const PosteriorGrid& pg, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "a,b,d,density,log_density\n";
  const ParameterBox& box = pg.box;
  for (int ia = 0; ia < box.n_a; ++ia) {
    for (int ib = 0; ib < box.n_b; ++ib) {
      for (int id = 0; id < box.n_d; ++id) {
        const int i = box.index(ia, ib, id);
        out << fmt(box.value_a(ia)) << "," << fmt(box.value_b(ib)) << ","
            << fmt(box.value_d(id)) << "," << fmt(pg.density(i)) << ","
            << fmt(pg.log_density(i)) << "\n";
      }
    }
  }
}

PosteriorGrid read_posterior_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open posterior file " + path);
  std::string raw;
  int line = 0;
  if (!std::getline(in, raw)) throw DataError(path + ": empty file");
  ++line;
  if (trim(raw) != "a,b,d,density,log_density") {
    data_fail(path, line, "header must be 'a,b,d,density,log_density'");
  }

  std::vector<std::array<double, 5>> rows;
  std::set<double> ua, ub, ud;
  while (std::getline(in, raw)) {
    ++line;
    if (trim(raw).empty()) continue;
    std::vector<std::string> f = split(raw, ',');
    if (f.size() != 5) {
      data_fail(path, line,
                "expected 5 fields, got " + std::to_string(f.size()));
    }
    std::array<double, 5> r{};
    for (int c = 0; c < 5; ++c) {
      if (!parse_double(f[c], r[c])) {
        data_fail(path, line, "bad number '" + f[c] + "'");
      }
    }
    ua.insert(r[0]);
    ub.insert(r[1]);
    ud.insert(r[2]);
    rows.push_back(r);
  }
  if (rows.empty()) throw DataError(path + ": no posterior rows");

  PosteriorGrid pg;
  pg.box.a_min = *ua.begin(); pg.box.a_max = *ua.rbegin();
  pg.box.b_min = *ub.begin(); pg.box.b_max = *ub.rbegin();
  pg.box.d_min = *ud.begin(); pg.box.d_max = *ud.rbegin();
  pg.box.n_a = static_cast<int>(ua.size());
  pg.box.n_b = static_cast<int>(ub.size());
  pg.box.n_d = static_cast<int>(ud.size());
  if (static_cast<int>(rows.size()) != pg.box.size()) {
    throw DataError(path + ": rows do not fill the value grid (" +
                    std::to_string(rows.size()) + " of " +
                    std::to_string(pg.box.size()) + ")");
  }

  pg.density.resize(pg.box.size());
  pg.log_density.resize(pg.box.size());
  int r = 0;
  for (int ia = 0; ia < pg.box.n_a; ++ia) {
    for (int ib = 0; ib < pg.box.n_b; ++ib) {
      for (int id = 0; id < pg.box.n_d; ++id, ++r) {
        const auto& row = rows[r];
        const auto match = [](double got, double want) {
          return std::abs(got - want) <= 1e-9 * (1.0 + std::abs(want));
        };
        if (!match(row[0], pg.box.value_a(ia)) ||
            !match(row[1], pg.box.value_b(ib)) ||
            !match(row[2], pg.box.value_d(id))) {
          throw DataError(path + ": rows are not in canonical sweep order");
        }
        const int i = pg.box.index(ia, ib, id);
        pg.density(i) = row[3];
        pg.log_density(i) = row[4];
        if (!std::isfinite(row[4])) ++pg.n_invalid;
      }
    }
  }
  return pg;
}

void write_marginal_csv(const Marginal1D& marginal, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "value,density\n";
  for (int i = 0; i < marginal.values.size(); ++i) {
    out << fmt(marginal.values(i)) << "," << fmt(marginal.density(i)) << "\n";
  }
}

void write_slip_csv(const FaultGrid& grid, const SlipPosterior& slip,
                    const std::string& path) {
  std::ofstream out = open_out(path);
  out << "y1_km,y2_km,mean_mm,std_mm\n";
  for (int k = 0; k < grid.q(); ++k) {
    const Vec2 y = grid.node_coord(k);
    out << fmt(y(0)) << "," << fmt(y(1)) << "," << fmt(slip.mean(k)) << ","
        << fmt(slip.node_std(k)) << "\n";
  }
}

void write_manifest(const ScenarioConfig& config, const StationSet& stations,
                    const RunResult& result, const std::string& path) {
  char hash[20];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(serialize_config(config))));

  ordered_json j;
  j["schema"] = "slipinv-manifest/1";
  j["config_hash"] = hash;
  j["n_stations"] = stations.n();
  j["q"] = result.grid.q();
  j["box"] = {{"n_a", config.box.n_a},
              {"n_b", config.box.n_b},
              {"n_d", config.box.n_d},
              {"cells", config.box.size()}};

  ordered_json c;
  c["value"] = result.C;
  c["source"] = result.used_override ? "override" : "discrepancy";
  if (!result.used_override) {
    c["err_rel"] = config.err_rel;
    c["err_target"] = result.selection.err_target;
    c["n_skipped"] = result.selection.n_skipped;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0, sum = 0.0;
    int n = 0;
    for (int i = 0; i < result.selection.per_cell_C.size(); ++i) {
      const double v = result.selection.per_cell_C(i);
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
      ++n;
    }
    c["per_cell"] = {{"min", lo}, {"max", hi}, {"mean", sum / n}, {"n", n}};
  }
  j["c"] = c;

  j["tau"] = config.tau;
  j["sweep"] = {{"n_invalid_cells", result.posterior.n_invalid},
                {"log_normalizer", result.posterior.log_normalizer}};
  j["map"] = {{"cell",
               {result.map.cell(0), result.map.cell(1), result.map.cell(2)}},
              {"a", result.map.m.a},
              {"b", result.map.m.b},
              {"d", result.map.m.d},
              {"refined",
               {{"a", result.map.refined.a},
                {"b", result.map.refined.b},
                {"d", result.map.refined.d}}},
              {"log_density", result.map.log_density}};

  const auto [ma, sa] = marginal_mean_std(result.marg.a);
  const auto [mb, sb] = marginal_mean_std(result.marg.b);
  const auto [md, sd] = marginal_mean_std(result.marg.d);
  j["marginals"] = {{"a", {{"mean", ma}, {"std", sa}}},
                    {"b", {{"mean", mb}, {"std", sb}}},
                    {"d", {{"mean", md}, {"std", sd}}}};

  j["slip"] = {{"q", result.grid.q()},
               {"mean_peak_mm", result.slip.mean.cwiseAbs().maxCoeff()},
               {"std_min_mm", result.slip.node_std.minCoeff()},
               {"std_max_mm", result.slip.node_std.maxCoeff()}};

  // Everything above is reproducible from (config, stations, seed); timing
  // is the one non-deterministic block, kept separate on purpose.
  j["timing"] = {{"deterministic", false},
                 {"wall_seconds", result.wall_seconds}};

  open_out(path) << j.dump(2) << "\n";
}

}  // namespace slipinv
