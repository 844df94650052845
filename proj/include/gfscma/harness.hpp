#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfscma/airlink.hpp"
#include "gfscma/models.hpp"
#include "gfscma/xcorr.hpp"

namespace gfscma::harness {

using json = nlohmann::json;

constexpr double kZ95 = 1.959963984540054;
constexpr const char* kVersion = "0.1.0";

/// Wilson-interval half-width for an error count at 95% confidence.
inline double wilson_half_width(long errors, long total, double z = kZ95) {
  if (total <= 0) throw std::invalid_argument("wilson_half_width: empty sample");
  const double n = static_cast<double>(total);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  return (z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))) / (1.0 + z2 / n);
}

struct AderPoint {
  double snr_db = 0.0;
  double ader = 0.0;
  double ci_half = 0.0;
  long trials = 0;
  long misses = 0;
  long false_alarms = 0;
  std::uint64_t seed = 0;
};

/// ADER of an arbitrary detector over seeded Monte-Carlo trials. The detector
/// sees (frame, true activity); the truth argument exists for oracle baselines
/// (genie, always-off) and is ignored by real systems. ADER is the per-user
/// activity-bit error rate: (misses + false alarms) / (trials * N).
template <class Detector>
AderPoint eval_ader_with(Detector&& detector, const airlink::ScenarioConfig& cfg,
                         const scma::ScmaCodebookSet& cbs,
                         const airlink::PreambleSet& preambles, double snr_db,
                         long trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("eval_ader: trials must be >= 1");
  const double sigma = airlink::snr_to_noise_std(snr_db);
  AderPoint pt;
  pt.snr_db = snr_db;
  pt.trials = trials;
  pt.seed = seed;
  for (long t = 0; t < trials; ++t) {
    const auto draws = airlink::sample_frame_draws(cfg, seed, static_cast<std::uint64_t>(t));
    const auto frame = airlink::assemble_frame(cfg, preambles, cbs, draws, sigma);
    const airlink::ActivityVector est = detector(frame, draws.delta);
    if (static_cast<int>(est.delta.size()) != cfg.n_users)
      throw std::invalid_argument("eval_ader: detector output width mismatch");
    for (int n = 0; n < cfg.n_users; ++n) {
      if (draws.delta.delta[n] && !est.delta[n]) ++pt.misses;
      if (!draws.delta.delta[n] && est.delta[n]) ++pt.false_alarms;
    }
  }
  const long errors = pt.misses + pt.false_alarms;
  const long total = trials * cfg.n_users;
  pt.ader = static_cast<double>(errors) / static_cast<double>(total);
  pt.ci_half = wilson_half_width(errors, total);
  return pt;
}

inline AderPoint eval_ader(const models::AudSystem& sys, double snr_db, long trials,
                           std::uint64_t seed) {
  const auto preambles = models::extract_preambles(sys);
  return eval_ader_with(
      [&sys](const airlink::ReceivedFrame& frame, const airlink::ActivityVector&) {
        return models::detect(sys, frame);
      },
      sys.scenario, sys.codebooks, preambles, snr_db, trials, seed);
}

struct SweepRow {
  std::string variant;
  int n_users = 0;
  int j_count = 0;
  int l_count = 0;
  AderPoint point;
  bool ok = true;
  std::string error;
};

/// Evaluates every system at every grid point with per-point derived seeds, so
/// all systems at one point see identical (delta, h, noise, bits) draws.
inline std::vector<SweepRow> snr_sweep(
    const std::vector<std::pair<std::string, const models::AudSystem*>>& systems,
    const std::vector<double>& grid_db, long trials, std::uint64_t master_seed) {
  if (grid_db.empty()) throw std::invalid_argument("snr_sweep: empty SNR grid");
  if (systems.empty()) throw std::invalid_argument("snr_sweep: no systems");
  std::vector<SweepRow> rows;
  for (std::size_t pi = 0; pi < grid_db.size(); ++pi) {
    const std::uint64_t point_seed =
        derive_seed(master_seed, StreamPurpose::eval_point, pi);
    for (const auto& [name, sys] : systems) {
      SweepRow row;
      row.variant = name;
      row.n_users = sys->scenario.n_users;
      row.j_count = sys->scenario.j_codebooks;
      row.l_count = sys->scenario.l_per_codebook;
      try {
        row.point = eval_ader(*sys, grid_db[pi], trials, point_seed);
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
        row.point.snr_db = grid_db[pi];
        row.point.seed = point_seed;
        row.point.ader = std::numeric_limits<double>::quiet_NaN();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline std::string format_double(double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, len);
}

inline void write_ader_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "variant,n,j_count,l_count,snr_db,trials,ader,ci_half,misses,false_alarms,seed\n";
  for (const auto& r : rows) {
    out << r.variant << "," << r.n_users << "," << r.j_count << "," << r.l_count << ","
        << format_double(r.point.snr_db) << "," << r.point.trials << ","
        << format_double(r.point.ader) << "," << format_double(r.point.ci_half) << ","
        << r.point.misses << "," << r.point.false_alarms << "," << r.point.seed
        << "\n";
  }
}

inline void write_ader_csv_file(const std::vector<SweepRow>& rows,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_ader_csv(rows, out);
}

// --- experiment configuration -------------------------------------------------------

struct ConfigError : std::runtime_error {
  std::vector<std::string> problems;
  explicit ConfigError(std::vector<std::string> p)
      : std::runtime_error(join(p)), problems(std::move(p)) {}
  static std::string join(const std::vector<std::string>& p) {
    std::string msg = "invalid experiment config:";
    for (const auto& s : p) msg += "\n  " + s;
    return msg;
  }
};

struct ExperimentConfig {
  airlink::ScenarioConfig scenario;
  std::vector<models::Variant> variants;
  models::TrainConfig train;
  std::vector<double> snr_grid_db;
  long trials = 1000;
  std::string independent_kind = "gaussian";
  std::uint64_t seed = 1;

  std::vector<std::string> violations() const {
    std::vector<std::string> v = scenario.violations();
    for (const auto& s : train.violations()) v.push_back(s);
    if (variants.empty()) v.push_back("variants: at least one variant required");
    if (snr_grid_db.empty()) v.push_back("eval.snr_grid_db: must be nonempty");
    if (trials < 1) v.push_back("eval.trials: must be >= 1");
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) throw ConfigError(std::move(v));
  }

  json to_json() const {
    json vs = json::array();
    for (auto v : variants) vs.push_back(models::to_string(v));
    return json{{"scenario", scenario.to_json()},
                {"variants", std::move(vs)},
                {"train", train.to_json()},
                {"eval", json{{"snr_grid_db", snr_grid_db}, {"trials", trials}}},
                {"independent_kind", independent_kind},
                {"seed", seed}};
  }
};

/// Parses and validates, collecting every problem instead of stopping at the
/// first one.
inline ExperimentConfig parse_experiment_config(const json& j) {
  std::vector<std::string> problems;
  ExperimentConfig cfg;

  if (j.contains("scenario")) {
    try {
      cfg.scenario = airlink::ScenarioConfig::from_json(j.at("scenario"));
    } catch (const std::exception& e) {
      problems.push_back(std::string("scenario: ") + e.what());
    }
  } else {
    problems.push_back("scenario: missing");
  }

  if (j.contains("variants")) {
    try {
      for (const auto& v : j.at("variants"))
        cfg.variants.push_back(models::variant_from_string(v.get<std::string>()));
    } catch (const std::exception& e) {
      problems.push_back(std::string("variants: ") + e.what());
    }
  }

  try {
    if (j.contains("train")) cfg.train = models::TrainConfig::from_json(j.at("train"));
  } catch (const std::exception& e) {
    problems.push_back(std::string("train: ") + e.what());
  }

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    try {
      cfg.snr_grid_db = e.value("snr_grid_db", std::vector<double>{});
      cfg.trials = e.value("trials", cfg.trials);
    } catch (const std::exception& ex) {
      problems.push_back(std::string("eval: ") + ex.what());
    }
  }

  cfg.independent_kind = j.value("independent_kind", cfg.independent_kind);
  cfg.seed = j.value("seed", cfg.seed);

  for (const auto& s : cfg.violations()) problems.push_back(s);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return parse_experiment_config(j);
}

// --- experiment orchestration ----------------------------------------------------------

inline airlink::PreambleSet make_independent_set(const ExperimentConfig& cfg) {
  return models::gen_independent_preambles(
      cfg.scenario.n_users, cfg.scenario.k_p,
      models::preamble_kind_from_string(cfg.independent_kind),
      derive_seed(cfg.seed, StreamPurpose::preamble_gen), cfg.scenario.j_codebooks);
}

/// Trains one variant of the configured experiment with a per-variant derived
/// seed (the variant index keeps reruns and siblings reproducible).
inline models::AudSystem train_variant(const ExperimentConfig& cfg,
                                       models::Variant variant, std::size_t index) {
  models::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.train.seed, StreamPurpose::train_run, index);
  if (variant == models::Variant::data_aided_independent) {
    const auto frozen = make_independent_set(cfg);
    return models::train(variant, cfg.scenario, tc, &frozen);
  }
  return models::train(variant, cfg.scenario, tc);
}

struct ExperimentResult {
  std::filesystem::path dir;
  std::vector<SweepRow> ader_rows;
  json summary;
};

/// Trains (or loads) the requested variants, runs the paired sweep, and emits
/// ader.csv, xcorr.csv, summary.json, checkpoints/ and manifest.json.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  std::vector<models::AudSystem> systems;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < cfg.variants.size(); ++i) {
    const auto variant = cfg.variants[i];
    const std::string name = models::to_string(variant);
    const auto ckpt = out_dir / "checkpoints" / name;
    if (std::filesystem::exists(ckpt / "manifest.json")) {
      systems.push_back(models::load_checkpoint(ckpt));
    } else {
      systems.push_back(train_variant(cfg, variant, i));
      models::save_checkpoint(systems.back(), ckpt);
    }
    names.push_back(name);
  }

  std::vector<std::pair<std::string, const models::AudSystem*>> handles;
  for (std::size_t i = 0; i < systems.size(); ++i)
    handles.emplace_back(names[i], &systems[i]);

  ExperimentResult result;
  result.dir = out_dir;
  result.ader_rows = snr_sweep(handles, cfg.snr_grid_db, cfg.trials, cfg.seed);
  write_ader_csv_file(result.ader_rows, (out_dir / "ader.csv").string());

  json summary{{"variants", json::object()}};
  {
    std::ofstream xc(out_dir / "xcorr.csv");
    if (!xc) throw std::runtime_error("cannot write xcorr.csv");
    xc << "variant,n,j,l,avg_xcorr,intra,inter\n";
    for (std::size_t i = 0; i < systems.size(); ++i) {
      const auto rep = xcorr::analyze(models::extract_preambles(systems[i]));
      xcorr::write_csv(rep, xc, names[i]);
      json vsum = xcorr::summary_json(rep);
      if (!systems[i].loss_log.empty()) vsum["final_loss"] = systems[i].loss_log.back();
      summary["variants"][names[i]] = std::move(vsum);
    }
  }
  result.summary = summary;
  {
    std::ofstream out(out_dir / "summary.json");
    out << summary.dump(2) << "\n";
  }
  {
    json manifest{{"config", cfg.to_json()},
                  {"version", kVersion},
                  {"outputs", {"ader.csv", "xcorr.csv", "summary.json"}}};
    std::ofstream out(out_dir / "manifest.json");
    out << manifest.dump(2) << "\n";
  }
  return result;
}

}  // namespace gfscma::harness
