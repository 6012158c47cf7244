#pragma once

// Config-driven experiment runner. One config describes one experiment (and
// optionally a sweep of cases); running it writes raw records, empirical and
// theory curves, a comparison report and a JSON manifest.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tlight/compare.hpp"
#include "tlight/csv.hpp"
#include "tlight/detection.hpp"
#include "tlight/estimators.hpp"
#include "tlight/modulation.hpp"
#include "tlight/optics.hpp"
#include "tlight/theory.hpp"

#ifndef TLIGHT_VERSION
#define TLIGHT_VERSION "0.0.0"
#endif

namespace tlight {

inline constexpr const char* kSoftwareVersion = TLIGHT_VERSION;
inline constexpr const char* kOutputDirEnv = "TLIGHT_OUTPUT_DIR";

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::invalid_argument(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

enum class ExperimentKind { PhaseNoiseG2, IntensityPndG2, PhotonAddedAnalytics, EntanglementScan };

struct ArmConfig {
  DwellKind dwell = DwellKind::Constant;
  bool frozen = false;
  double phi = 0.0;
};

struct PhaseNoiseSettings {
  std::vector<double> tau_c{0.01};
  ArmConfig arm1{DwellKind::Constant, false, 0.0};
  ArmConfig arm2{DwellKind::Constant, true, 0.0};
  double t_min = 1e-3;
  double t_max = 100e-3;
  double time_grid = 0.0;
  MziConfig mzi;
};

struct IntensitySettings {
  IntensityKind law = IntensityKind::Exponential;
  std::vector<double> nbar{1.91};
  DwellKind dwell = DwellKind::TruncatedExponential;
  double tau_c = 0.01;
  double t_min = 1e-3;
  double t_max = 100e-3;
  double time_grid = kPndBin;
  double i_max_factor = 20.0;
  std::vector<double> table_intensity;
  std::vector<double> table_density;
};

struct DetectionSettings {
  bool counting = false;
  double sample_period = 5e-4;
  DetectorParams params;
};

struct AnalysisSettings {
  // correlation
  double max_lag_tau_c = 5.0;
  double max_lag = 0.0;  // seconds; overrides max_lag_tau_c when > 0
  std::size_t lag_stride = 1;
  int resamples = 200;
  double g2_threshold = 0.05;
  // photon number distribution
  double pnd_bin = kPndBin;
  double tvd_threshold = 0.02;
  double g2_zero_threshold = 0.1;
  // photon-added analytics
  std::vector<double> p_function_nbar{0.5, 1.0, 2.0};
  double x_max = 4.0;
  std::size_t x_points = 401;
  double q_nbar_min = 0.05;
  double q_nbar_max = 3.0;
  std::size_t q_points = 60;
  bool q_axis_added = false;
  std::size_t pnd_check_n = 60;
  // entanglement scan
  double nbar_min = 0.0;
  double nbar_max = 5.0;
  std::size_t nbar_points = 51;
  double mu_min = 0.0;
  double mu_max = 3.0;
  std::size_t mu_points = 301;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::PhaseNoiseG2;
  std::uint64_t seed = 1;
  double duration = 0.0;
  std::string output_dir = "out";
  bool write_raw = true;
  unsigned max_parallel = 0;  // 0: hardware concurrency
  PhaseNoiseSettings phase;
  IntensitySettings intensity;
  DetectionSettings detection;
  AnalysisSettings analysis;
  nlohmann::json source;
};

struct ExperimentResult {
  std::vector<ComparisonReport> reports;
  std::vector<std::string> files;
  std::vector<std::string> warnings;

  bool all_pass() const {
    return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass; });
  }
};

inline std::string experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::PhaseNoiseG2:
      return "phase_noise_g2";
    case ExperimentKind::IntensityPndG2:
      return "intensity_pnd_g2";
    case ExperimentKind::PhotonAddedAnalytics:
      return "photon_added_analytics";
    case ExperimentKind::EntanglementScan:
      return "entanglement_scan";
  }
  return "?";
}

/// 64-bit FNV-1a, used for the config hash in manifests.
inline std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double number(const json& obj, const std::string& path, const std::string& key,
                     std::optional<double> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(join(path, key), "required field is missing");
  }
  if (!v->is_number()) throw ConfigError(join(path, key), "expected a number");
  return v->get<double>();
}

inline double positive(const json& obj, const std::string& path, const std::string& key,
                       std::optional<double> fallback = std::nullopt) {
  const double x = number(obj, path, key, fallback);
  if (!(x > 0.0)) throw ConfigError(join(path, key), "must be > 0");
  return x;
}

inline std::size_t count(const json& obj, const std::string& path, const std::string& key,
                         std::size_t fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || v->get<long long>() < 1) {
    throw ConfigError(join(path, key), "expected a positive integer");
  }
  return v->get<std::size_t>();
}

inline std::string text(const json& obj, const std::string& path, const std::string& key,
                        std::optional<std::string> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(join(path, key), "required field is missing");
  }
  if (!v->is_string()) throw ConfigError(join(path, key), "expected a string");
  return v->get<std::string>();
}

// Scalar or array of positive numbers.
inline std::vector<double> number_list(const json& obj, const std::string& path,
                                       const std::string& key,
                                       std::optional<std::vector<double>> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError(join(path, key), "required field is missing");
  }
  std::vector<double> out;
  if (v->is_number()) {
    out.push_back(v->get<double>());
  } else if (v->is_array() && !v->empty()) {
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        throw ConfigError(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
      }
      out.push_back((*v)[i].get<double>());
    }
  } else {
    throw ConfigError(join(path, key), "expected a number or a non-empty array of numbers");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0)) {
      throw ConfigError(join(path, key) + "[" + std::to_string(i) + "]", "must be > 0");
    }
  }
  return out;
}

inline const json& section(const json& obj, const std::string& key) {
  static const json kEmpty = json::object();
  const json* v = find(obj, key);
  if (!v) return kEmpty;
  if (!v->is_object()) throw ConfigError(key, "expected an object");
  return *v;
}

inline DwellKind parse_dwell(const std::string& name, const std::string& path) {
  if (name == "constant") return DwellKind::Constant;
  if (name == "exponential") return DwellKind::Exponential;
  if (name == "truncated_exponential") return DwellKind::TruncatedExponential;
  throw ConfigError(path, "unknown dwell kind '" + name + "'");
}

inline ArmConfig parse_arm(const json& obj, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  ArmConfig arm;
  arm.dwell = parse_dwell(text(obj, path, "dwell", "constant"), join(path, "dwell"));
  const std::string jumps = text(obj, path, "jumps", "uniform");
  if (jumps == "uniform") {
    arm.frozen = false;
  } else if (jumps == "frozen") {
    arm.frozen = true;
    arm.phi = number(obj, path, "phi", 0.0);
    if (!(arm.phi > -std::numbers::pi && arm.phi <= std::numbers::pi)) {
      throw ConfigError(join(path, "phi"), "must lie in (-pi, pi]");
    }
  } else {
    throw ConfigError(join(path, "jumps"), "unknown jump law '" + jumps + "'");
  }
  return arm;
}

inline DetectionSettings parse_detection(const json& obj) {
  const std::string p = "detector";
  DetectionSettings d;
  const std::string mode = text(obj, p, "mode", "counting");
  if (mode == "classical") {
    d.counting = false;
    d.sample_period = positive(obj, p, "sample_period", 5e-4);
  } else if (mode == "counting") {
    d.counting = true;
  } else {
    throw ConfigError(join(p, "mode"), "expected 'classical' or 'counting'");
  }
  d.params.efficiency = number(obj, p, "efficiency", d.params.efficiency);
  d.params.dark_rate = number(obj, p, "dark_rate", d.params.dark_rate);
  d.params.count_bin = positive(obj, p, "count_bin", d.params.count_bin);
  d.params.max_rate = positive(obj, p, "max_rate", d.params.max_rate);
  if (!(d.params.efficiency >= 0.0 && d.params.efficiency <= 1.0)) {
    throw ConfigError(join(p, "efficiency"), "must lie in [0, 1]");
  }
  if (!(d.params.dark_rate >= 0.0)) throw ConfigError(join(p, "dark_rate"), "must be >= 0");
  return d;
}

inline AnalysisSettings parse_analysis(const json& obj) {
  const std::string p = "analysis";
  AnalysisSettings a;
  a.max_lag_tau_c = positive(obj, p, "max_lag_tau_c", a.max_lag_tau_c);
  a.max_lag = number(obj, p, "max_lag", 0.0);
  a.lag_stride = count(obj, p, "lag_stride", a.lag_stride);
  a.resamples = static_cast<int>(count(obj, p, "resamples", 200));
  a.g2_threshold = positive(obj, p, "g2_threshold", a.g2_threshold);
  a.pnd_bin = positive(obj, p, "pnd_bin", a.pnd_bin);
  a.tvd_threshold = positive(obj, p, "tvd_threshold", a.tvd_threshold);
  a.g2_zero_threshold = positive(obj, p, "g2_zero_threshold", a.g2_zero_threshold);
  a.p_function_nbar = number_list(obj, p, "p_function_nbar", a.p_function_nbar);
  a.x_max = positive(obj, p, "x_max", a.x_max);
  a.x_points = count(obj, p, "x_points", a.x_points);
  a.q_nbar_min = positive(obj, p, "q_nbar_min", a.q_nbar_min);
  a.q_nbar_max = positive(obj, p, "q_nbar_max", a.q_nbar_max);
  a.q_points = count(obj, p, "q_points", a.q_points);
  const std::string axis = text(obj, p, "q_axis", "base");
  if (axis != "base" && axis != "added") throw ConfigError(join(p, "q_axis"), "expected 'base' or 'added'");
  a.q_axis_added = axis == "added";
  a.pnd_check_n = count(obj, p, "pnd_check_n", a.pnd_check_n);
  a.nbar_min = number(obj, p, "nbar_min", a.nbar_min);
  a.nbar_max = positive(obj, p, "nbar_max", a.nbar_max);
  a.nbar_points = count(obj, p, "nbar_points", a.nbar_points);
  a.mu_min = number(obj, p, "mu_min", a.mu_min);
  a.mu_max = positive(obj, p, "mu_max", a.mu_max);
  a.mu_points = count(obj, p, "mu_points", a.mu_points);
  if (a.nbar_min < 0.0) throw ConfigError(join(p, "nbar_min"), "must be >= 0");
  if (a.mu_min < 0.0) throw ConfigError(join(p, "mu_min"), "must be >= 0");
  if (!(a.nbar_max > a.nbar_min)) throw ConfigError(join(p, "nbar_max"), "must exceed nbar_min");
  if (!(a.mu_max > a.mu_min)) throw ConfigError(join(p, "mu_max"), "must exceed mu_min");
  if (!(a.q_nbar_max > a.q_nbar_min)) throw ConfigError(join(p, "q_nbar_max"), "must exceed q_nbar_min");
  if (a.q_axis_added && !(a.q_nbar_min > 1.0)) {
    throw ConfigError(join(p, "q_nbar_min"), "must exceed 1 when q_axis is 'added'");
  }
  if (a.mu_points < 2) throw ConfigError(join(p, "mu_points"), "must be >= 2");
  return a;
}

inline double mean_dwell(DwellKind kind, double tau_c, double t_min, double t_max) {
  switch (kind) {
    case DwellKind::Constant:
      return DwellDistribution::constant(tau_c).mean();
    case DwellKind::Exponential:
      return DwellDistribution::exponential(tau_c).mean();
    case DwellKind::TruncatedExponential:
      return DwellDistribution::truncated_exponential(tau_c, t_min, t_max).mean();
  }
  return tau_c;
}

inline DwellDistribution make_dwell(DwellKind kind, double tau_c, double t_min, double t_max) {
  switch (kind) {
    case DwellKind::Constant:
      return DwellDistribution::constant(tau_c);
    case DwellKind::Exponential:
      return DwellDistribution::exponential(tau_c);
    case DwellKind::TruncatedExponential:
      return DwellDistribution::truncated_exponential(tau_c, t_min, t_max);
  }
  return DwellDistribution::constant(tau_c);
}

}  // namespace detail

/// Builds a typed config from JSON, validating every field.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("(root)", "config must be a JSON object");
  ExperimentConfig c;
  c.source = j;
  const std::string kind = text(j, "", "experiment");
  if (kind == "phase_noise_g2") {
    c.kind = ExperimentKind::PhaseNoiseG2;
  } else if (kind == "intensity_pnd_g2") {
    c.kind = ExperimentKind::IntensityPndG2;
  } else if (kind == "photon_added_analytics") {
    c.kind = ExperimentKind::PhotonAddedAnalytics;
  } else if (kind == "entanglement_scan") {
    c.kind = ExperimentKind::EntanglementScan;
  } else {
    throw ConfigError("experiment", "unknown experiment '" + kind + "'");
  }
  if (const json* s = find(j, "seed")) {
    if (!s->is_number_integer() || s->get<long long>() < 0) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    c.seed = s->get<std::uint64_t>();
  }
  c.output_dir = text(j, "", "output_dir", "out/" + kind);
  if (const json* w = find(j, "write_raw")) {
    if (!w->is_boolean()) throw ConfigError("write_raw", "expected a boolean");
    c.write_raw = w->get<bool>();
  }
  if (const json* m = find(j, "max_parallel")) {
    if (!m->is_number_integer() || m->get<long long>() < 0) {
      throw ConfigError("max_parallel", "expected a non-negative integer");
    }
    c.max_parallel = m->get<unsigned>();
  }

  const json& mod = section(j, "modulation");
  const std::string mp = "modulation";
  c.analysis = parse_analysis(section(j, "analysis"));

  const bool statistical =
      c.kind == ExperimentKind::PhaseNoiseG2 || c.kind == ExperimentKind::IntensityPndG2;
  if (statistical) {
    c.duration = positive(j, "", "duration");
    c.detection = parse_detection(section(j, "detector"));
  }

  if (c.kind == ExperimentKind::PhaseNoiseG2) {
    auto& ph = c.phase;
    ph.tau_c = number_list(mod, mp, "tau_c");
    ph.arm1 = parse_arm(find(mod, "arm1") ? mod["arm1"] : json::object(), join(mp, "arm1"));
    ph.arm2 = find(mod, "arm2") ? parse_arm(mod["arm2"], join(mp, "arm2"))
                                : ArmConfig{DwellKind::Constant, true, 0.0};
    ph.t_min = positive(mod, mp, "t_min", ph.t_min);
    ph.t_max = positive(mod, mp, "t_max", ph.t_max);
    if (!(ph.t_min < ph.t_max)) throw ConfigError(join(mp, "t_min"), "must be below t_max");
    ph.time_grid = number(mod, mp, "time_grid", 0.0);
    if (ph.time_grid < 0.0) throw ConfigError(join(mp, "time_grid"), "must be >= 0");
    ph.mzi.input_intensity = positive(mod, mp, "input_intensity", 1.0);
    const std::string port = text(mod, mp, "port", "2prime");
    if (port == "1prime") {
      ph.mzi.port = OutputPort::Port1Prime;
    } else if (port == "2prime") {
      ph.mzi.port = OutputPort::Port2Prime;
    } else {
      throw ConfigError(join(mp, "port"), "expected '1prime' or '2prime'");
    }
    ph.mzi.phase_drift_rate = number(mod, mp, "phase_drift_rate", 0.0);
    for (std::size_t i = 0; i < ph.tau_c.size(); ++i) {
      for (const ArmConfig* arm : {&ph.arm1, &ph.arm2}) {
        if (arm->frozen) continue;
        const double mean = mean_dwell(arm->dwell, ph.tau_c[i], ph.t_min, ph.t_max);
        if (c.duration < 100.0 * mean) {
          throw ConfigError("duration", "must be at least 100 mean dwell times (" +
                                            std::to_string(100.0 * mean) + " s)");
        }
      }
    }
  } else if (c.kind == ExperimentKind::IntensityPndG2) {
    auto& in = c.intensity;
    const std::string law = text(mod, mp, "law");
    if (law == "degenerate") {
      in.law = IntensityKind::Degenerate;
    } else if (law == "exponential") {
      in.law = IntensityKind::Exponential;
    } else if (law == "gamma_two") {
      in.law = IntensityKind::GammaTwo;
    } else if (law == "tabulated") {
      in.law = IntensityKind::Tabulated;
      const json& table = section(mod, "table");
      const std::string tp = join(mp, "table");
      in.table_intensity = number_list(table, tp, "intensity");
      in.table_density = number_list(table, tp, "density");
    } else {
      throw ConfigError(join(mp, "law"), "unknown intensity law '" + law + "'");
    }
    in.nbar = in.law == IntensityKind::Tabulated ? std::vector<double>{1.0}
                                                 : number_list(mod, mp, "nbar");
    in.dwell = parse_dwell(text(mod, mp, "dwell", "truncated_exponential"), join(mp, "dwell"));
    in.tau_c = positive(mod, mp, "tau_c", in.tau_c);
    in.t_min = positive(mod, mp, "t_min", in.t_min);
    in.t_max = positive(mod, mp, "t_max", in.t_max);
    if (!(in.t_min < in.t_max)) throw ConfigError(join(mp, "t_min"), "must be below t_max");
    in.time_grid = number(mod, mp, "time_grid", in.time_grid);
    if (in.time_grid < 0.0) throw ConfigError(join(mp, "time_grid"), "must be >= 0");
    in.i_max_factor = positive(mod, mp, "i_max_factor", in.i_max_factor);
    if (!c.detection.counting) {
      throw ConfigError("detector.mode", "intensity_pnd_g2 needs photon counting");
    }
    if (c.duration < 100.0 * mean_dwell(in.dwell, in.tau_c, in.t_min, in.t_max)) {
      throw ConfigError("duration", "must be at least 100 mean dwell times");
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string(), std::string("JSON parse error: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

namespace detail {

struct CaseOutput {
  std::vector<ComparisonReport> reports;
  std::vector<std::string> files;
  std::vector<std::string> warnings;
  nlohmann::json info = nlohmann::json::object();
};

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path file(const std::string& name, CaseOutput& out) const {
    out.files.push_back(name);
    return root_ / name;
  }
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
};

inline std::string case_prefix(std::size_t index, std::size_t cases) {
  return cases > 1 ? "case" + std::to_string(index) + "_" : "";
}

inline double lag_range(const ExperimentConfig& c, double tau_c) {
  return c.analysis.max_lag > 0.0 ? c.analysis.max_lag : c.analysis.max_lag_tau_c * tau_c;
}

inline CaseOutput run_phase_noise_case(const ExperimentConfig& c, std::size_t index,
                                       std::size_t cases, const OutputDir& dir) {
  CaseOutput out;
  const auto& ph = c.phase;
  const double tau_c = ph.tau_c[index];
  const std::uint64_t seed = trial_seed(c.seed, index);
  const std::string prefix = case_prefix(index, cases);
  const auto dwell1 = make_dwell(ph.arm1.dwell, tau_c, ph.t_min, ph.t_max);
  const auto dwell2 = make_dwell(ph.arm2.dwell, tau_c, ph.t_min, ph.t_max);
  const auto jumps = [](const ArmConfig& a) {
    return a.frozen ? PhaseJumpLaw::frozen(a.phi) : PhaseJumpLaw::uniform_full_circle();
  };
  const auto phase1 = build_phase_trace(dwell1, jumps(ph.arm1), c.duration, derive_seed(seed, 1),
                                        ph.time_grid);
  const auto phase2 = build_phase_trace(dwell2, jumps(ph.arm2), c.duration, derive_seed(seed, 2),
                                        ph.time_grid);
  const auto intensity = mzi_output_intensity(phase1, phase2, ph.mzi);

  auto opts = CorrelatorOptions::for_coherence_time(tau_c, c.analysis.lag_stride);
  opts.resamples = c.analysis.resamples;
  opts.seed = derive_seed(seed, 5);
  const double max_lag = lag_range(c, tau_c);

  CorrelationCurve empirical;
  if (c.detection.counting) {
    auto record = simulate_counts(intensity, c.detection.params, c.duration, derive_seed(seed, 3));
    for (auto& w : record.warnings) out.warnings.push_back(prefix + w);
    const auto [a, b] = split_stream(record.counts, derive_seed(seed, 4));
    empirical = g2_cross(a, b, max_lag, opts);
    if (c.write_raw) write_counts_csv(dir.file(prefix + "counts.csv", out), record.counts);
    out.info["mean_rate_cps"] = record.mean_rate;
  } else {
    const auto samples = sample_classical(intensity, c.detection.sample_period);
    empirical = g2_from_samples(samples, c.detection.sample_period, max_lag, opts);
    if (c.write_raw) {
      std::vector<double> t(samples.size());
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<double>(i) * c.detection.sample_period;
      }
      write_columns_csv(dir.file(prefix + "samples.csv", out),
                        "time [s], intensity [photons per 450 us bin]", {"time", "intensity"},
                        {t, samples});
    }
  }

  const ArmDwell arm1 = ph.arm1.frozen ? ArmDwell{} : ArmDwell{dwell1};
  const ArmDwell arm2 = ph.arm2.frozen ? ArmDwell{} : ArmDwell{dwell2};
  CorrelationCurve theory;
  theory.lags = empirical.lags;
  for (double lag : theory.lags) theory.values.push_back(g2_phase_noise(xi_overlap(arm1, arm2, lag)));
  theory.std_error.assign(theory.lags.size(), 0.0);

  write_curve_csv(dir.file(prefix + "g2_empirical.csv", out), empirical);
  write_curve_csv(dir.file(prefix + "g2_theory.csv", out), theory);
  out.reports.push_back(compare(empirical, theory, Metric::MaxAbsDeviation,
                                c.analysis.g2_threshold,
                                prefix + "G2 vs theory (tau_c=" + std::to_string(tau_c) + " s)"));
  out.info["tau_c"] = tau_c;
  out.info["segments_arm1"] = phase1.size();
  out.info["segments_arm2"] = phase2.size();
  return out;
}

inline IntensityLaw make_law(const IntensitySettings& in, double nbar) {
  switch (in.law) {
    case IntensityKind::Degenerate:
      return IntensityLaw::degenerate(nbar);
    case IntensityKind::Exponential:
      return IntensityLaw::exponential(nbar, in.i_max_factor * nbar);
    case IntensityKind::GammaTwo:
      return IntensityLaw::gamma_two_with_mean(nbar, in.i_max_factor * nbar);
    case IntensityKind::Tabulated:
      return IntensityLaw::tabulated(in.table_intensity, in.table_density);
  }
  return IntensityLaw::degenerate(nbar);
}

inline CaseOutput run_intensity_case(const ExperimentConfig& c, std::size_t index,
                                     std::size_t cases, const OutputDir& dir) {
  CaseOutput out;
  const auto& in = c.intensity;
  const double nbar = in.nbar[index];
  const std::uint64_t seed = trial_seed(c.seed, index);
  const std::string prefix = case_prefix(index, cases);
  const IntensityLaw law = make_law(in, nbar);
  const auto dwell = make_dwell(in.dwell, in.tau_c, in.t_min, in.t_max);

  const auto trace = build_intensity_trace(law, dwell, c.duration, derive_seed(seed, 1),
                                           in.time_grid);
  if (trace.clipped_segments > 0) {
    out.warnings.push_back(prefix + std::to_string(trace.clipped_segments) +
                           " segment(s) clipped at I_max");
  }
  auto record = simulate_counts(trace.trace, c.detection.params, c.duration, derive_seed(seed, 3));
  for (auto& w : record.warnings) out.warnings.push_back(prefix + w);

  const NumberDistribution empirical_pnd = pnd_histogram(record.counts, c.analysis.pnd_bin);
  const std::size_t n_top = std::max<std::size_t>(empirical_pnd.n_max(), 1) * 2 + 20;
  NumberDistribution theory_pnd;
  switch (in.law) {
    case IntensityKind::Degenerate:
      theory_pnd = pnd_poisson(nbar, n_top);
      break;
    case IntensityKind::Exponential:
      theory_pnd = pnd_thermal(nbar, n_top);
      break;
    case IntensityKind::GammaTwo:
      theory_pnd = pnd_zeta(nbar, n_top);
      break;
    case IntensityKind::Tabulated:
      theory_pnd = pnd_from_intensity_law(law, n_top);
      break;
  }

  const auto [a, b] = split_stream(record.counts, derive_seed(seed, 4));
  auto opts = CorrelatorOptions::for_coherence_time(in.tau_c, c.analysis.lag_stride);
  opts.resamples = c.analysis.resamples;
  opts.seed = derive_seed(seed, 5);
  const CorrelationCurve g2 = g2_cross(a, b, lag_range(c, in.tau_c), opts);
  CorrelationCurve g2_theory;
  g2_theory.lags = g2.lags;
  for (double lag : g2.lags) {
    g2_theory.values.push_back(g2_intensity_modulated(law, xi_single(dwell, lag)));
  }
  g2_theory.std_error.assign(g2.lags.size(), 0.0);

  if (c.write_raw) {
    const std::size_t factor =
        static_cast<std::size_t>(std::llround(c.analysis.pnd_bin / record.counts.bin_width));
    write_counts_csv(dir.file(prefix + "counts_pnd_bins.csv", out), rebin(record.counts, factor));
  }
  write_distribution_csv(dir.file(prefix + "pnd_empirical.csv", out), empirical_pnd);
  write_distribution_csv(dir.file(prefix + "pnd_theory.csv", out), theory_pnd);
  write_curve_csv(dir.file(prefix + "g2_empirical.csv", out), g2);
  write_curve_csv(dir.file(prefix + "g2_theory.csv", out), g2_theory);

  const std::string tag = " (nbar=" + std::to_string(nbar) + ")";
  out.reports.push_back(compare(empirical_pnd, theory_pnd, Metric::TotalVariation,
                                c.analysis.tvd_threshold, prefix + "PND vs theory" + tag));
  Series zero_emp{{g2.lags.front()}, {g2.values.front()}};
  Series zero_th{{g2_theory.lags.front()}, {g2_theory.values.front()}};
  out.reports.push_back(compare(zero_emp, zero_th, Metric::MaxAbsDeviation,
                                c.analysis.g2_zero_threshold, prefix + "G2(0) vs theory" + tag));
  out.info["nbar"] = nbar;
  out.info["segments"] = trace.trace.size();
  out.info["clipped_segments"] = trace.clipped_segments;
  out.info["mean_rate_cps"] = record.mean_rate;
  out.info["pnd_bins"] = static_cast<std::size_t>(
      std::llround(static_cast<double>(record.counts.size()) * record.counts.bin_width /
                   c.analysis.pnd_bin));
  out.info["pnd_mean"] = empirical_pnd.mean;
  return out;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = lo;
    return g;
  }
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

inline double added_density_mass(const PhotonAddedState& s) {
  const auto [lo, hi] = p_function_negative_interval(s);
  std::vector<double> breaks{0.0};
  if (lo > 0.0) breaks.push_back(lo);
  breaks.push_back(hi);
  breaks.push_back(hi + 10.0 * s.nbar);
  breaks.push_back(hi + 60.0 * s.nbar);
  return integrate([&](double x) { return added_intensity_density(s, x); }, breaks,
                   {1e-13, 50});
}

inline CaseOutput run_photon_added(const ExperimentConfig& c, const OutputDir& dir) {
  CaseOutput out;
  const auto& an = c.analysis;
  const auto xs = linear_grid(0.0, an.x_max, an.x_points);

  for (const BaseState base : {BaseState::Thermal, BaseState::Zeta}) {
    const std::string name = base == BaseState::Thermal ? "thermal" : "zeta";
    std::vector<std::string> cols{"x"};
    std::vector<std::vector<double>> data{xs};
    for (double nb : an.p_function_nbar) {
      const PhotonAddedState state{base, nb, 1};
      std::vector<double> p(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) p[i] = p_function_added(state, xs[i]);
      cols.push_back("P_nbar_" + std::to_string(nb));
      data.push_back(std::move(p));

      const std::string tag = " (" + name + ", nbar=" + std::to_string(nb) + ")";
      out.reports.push_back(compare(Series{{0.0}, {added_density_mass(state)}},
                                    Series{{0.0}, {1.0}}, Metric::MaxAbsDeviation, 1e-8,
                                    "pi*P1 normalization" + tag));
      const NumberDistribution via_addition =
          add_photon(base_pnd(base, nb, an.pnd_check_n + 1));
      NumberDistribution via_quadrature = pnd_photon_added_quadrature(state, an.pnd_check_n);
      NumberDistribution trimmed = via_addition;
      trimmed.probs.resize(an.pnd_check_n + 1);
      out.reports.push_back(compare(to_series(via_quadrature), to_series(trimmed),
                                    Metric::MaxAbsDeviation, 1e-6,
                                    "photon-added PND, quadrature vs addition" + tag));
      if (base == BaseState::Thermal) {
        out.reports.push_back(compare(Series{{0.0}, {p_function_added(state, 0.0)}},
                                      Series{{0.0}, {-1.0 / (std::numbers::pi * nb * nb)}},
                                      Metric::MaxAbsDeviation, 1e-12, "P1(0)" + tag));
      }
    }
    write_columns_csv(dir.file("p_function_" + name + ".csv", out),
                      "x = |alpha|^2 [photons], P1 [1/photons]", cols, data);
  }

  // The axis is either the base-state nbar or the mean after addition; in the
  // latter case each state is evaluated at its own base nbar.
  const auto axis = linear_grid(an.q_nbar_min, an.q_nbar_max, an.q_points);
  std::vector<double> base_th(axis.size()), base_z(axis.size());
  for (std::size_t i = 0; i < axis.size(); ++i) {
    base_th[i] = an.q_axis_added ? base_nbar_for_added_mean(BaseState::Thermal, axis[i]) : axis[i];
    base_z[i] = an.q_axis_added ? base_nbar_for_added_mean(BaseState::Zeta, axis[i]) : axis[i];
  }
  const auto q_th = mandel_q_curve(BaseState::Thermal, base_th);
  const auto q_z = mandel_q_curve(BaseState::Zeta, base_z);
  std::vector<double> qt(axis.size()), qz(axis.size()), qclosed(axis.size());
  for (std::size_t i = 0; i < axis.size(); ++i) {
    qt[i] = q_th[i].second;
    qz[i] = q_z[i].second;
    qclosed[i] = mandel_q_added_thermal(base_th[i]);
  }
  write_columns_csv(dir.file("mandel_q.csv", out),
                    std::string("x = ") +
                        (an.q_axis_added ? "mean photon number after addition" : "base-state nbar") +
                        " [photons], Q [dimensionless], base nbar [photons]",
                    {"x", "q_thermal_added", "q_zeta_added", "q_thermal_closed_form",
                     "nbar_base_thermal", "nbar_base_zeta"},
                    {axis, qt, qz, qclosed, base_th, base_z});
  out.reports.push_back(compare(Series{axis, qt}, Series{axis, qclosed}, Metric::MaxAbsDeviation,
                                1e-6, "Q of photon-added thermal vs closed form"));
  return out;
}

inline CaseOutput run_entanglement_scan(const ExperimentConfig& c, const OutputDir& dir) {
  CaseOutput out;
  const auto& an = c.analysis;
  const auto nbars = linear_grid(an.nbar_min, an.nbar_max, an.nbar_points);
  const auto mus = linear_grid(an.mu_min, an.mu_max, an.mu_points);
  const double step = mus[1] - mus[0];
  std::vector<double> map_n, map_mu, map_e;
  std::vector<double> b_n, b_emp, b_th;
  for (double nb : nbars) {
    std::optional<double> first;
    for (double mu : mus) {
      const bool e = entanglement_criterion(nb, SqueezingSpec{mu});
      map_n.push_back(nb);
      map_mu.push_back(mu);
      map_e.push_back(e ? 1.0 : 0.0);
      if (e && !first) first = mu;
    }
    if (first && entanglement_boundary(nb) >= an.mu_min) {
      b_n.push_back(nb);
      b_emp.push_back(*first);
      b_th.push_back(entanglement_boundary(nb));
    }
  }
  write_columns_csv(dir.file("entanglement_map.csv", out),
                    "nbar [photons], mu [dimensionless], entangled [0/1]",
                    {"nbar", "mu", "entangled"}, {map_n, map_mu, map_e});
  write_columns_csv(dir.file("entanglement_boundary.csv", out),
                    "nbar [photons], mu [dimensionless]",
                    {"nbar", "mu_first_entangled", "mu_boundary_ln_2nbar_plus_1"},
                    {b_n, b_emp, b_th});
  if (!b_n.empty()) {
    out.reports.push_back(compare(Series{b_n, b_emp}, Series{b_n, b_th}, Metric::MaxAbsDeviation,
                                  step * (1.0 + 1e-9),
                                  "pass-region boundary vs ln(2 nbar + 1)"));
  }
  return out;
}

inline nlohmann::json report_json(const ComparisonReport& r) {
  return {{"label", r.label},
          {"metric", std::string(metric_name(r.metric))},
          {"value", r.value},
          {"threshold", r.threshold},
          {"pass", r.pass}};
}

}  // namespace detail

/// Output directory after applying the environment override.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return config.output_dir;
}

/// Runs the experiment, writes all outputs and the manifest, and returns the
/// comparison reports. Identical configs give byte-identical files.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  using namespace detail;
  const std::filesystem::path root = resolve_output_dir(config);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec || !std::filesystem::is_directory(root)) {
    throw IoError("cannot create output directory '" + root.string() + "'");
  }
  const OutputDir dir(root);

  std::vector<CaseOutput> outputs;
  if (config.kind == ExperimentKind::PhaseNoiseG2 || config.kind == ExperimentKind::IntensityPndG2) {
    const bool phase = config.kind == ExperimentKind::PhaseNoiseG2;
    const std::size_t cases = phase ? config.phase.tau_c.size() : config.intensity.nbar.size();
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t width = config.max_parallel > 0 ? config.max_parallel : hw;
    outputs.resize(cases);
    // Cases run in waves of `width`; results are merged in case order.
    for (std::size_t start = 0; start < cases; start += width) {
      std::vector<std::future<CaseOutput>> wave;
      const std::size_t stop = std::min(cases, start + width);
      for (std::size_t i = start; i < stop; ++i) {
        wave.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                  [&, i] {
                                    return phase ? run_phase_noise_case(config, i, cases, dir)
                                                 : run_intensity_case(config, i, cases, dir);
                                  }));
      }
      for (std::size_t i = start; i < stop; ++i) outputs[i] = wave[i - start].get();
    }
  } else if (config.kind == ExperimentKind::PhotonAddedAnalytics) {
    outputs.push_back(run_photon_added(config, dir));
  } else {
    outputs.push_back(run_entanglement_scan(config, dir));
  }

  ExperimentResult result;
  nlohmann::json cases = nlohmann::json::array();
  for (auto& o : outputs) {
    result.reports.insert(result.reports.end(), o.reports.begin(), o.reports.end());
    result.files.insert(result.files.end(), o.files.begin(), o.files.end());
    result.warnings.insert(result.warnings.end(), o.warnings.begin(), o.warnings.end());
    cases.push_back(o.info);
  }

  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : result.reports) reports.push_back(report_json(r));
  nlohmann::json manifest = {{"software", "tlight"},
                             {"version", kSoftwareVersion},
                             {"experiment", experiment_name(config.kind)},
                             {"seed", config.seed},
                             {"config_hash", hex64(fnv1a(config.source.dump()))},
                             {"config", config.source},
                             {"files", result.files},
                             {"cases", cases},
                             {"warnings", result.warnings},
                             {"reports", reports},
                             {"all_pass", result.all_pass()}};
  detail::write_file(root / "manifest.json", manifest.dump(2) + "\n");
  result.files.push_back("manifest.json");
  return result;
}

}  // namespace tlight
