#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfscma/airlink.hpp"
#include "gfscma/nn.hpp"
#include "gfscma/rng.hpp"
#include "gfscma/scma.hpp"

namespace gfscma::models {

using cplx = std::complex<double>;
using json = nlohmann::json;

enum class Variant { preamble_based, data_aided_joint, data_aided_independent };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::preamble_based: return "preamble-based";
    case Variant::data_aided_joint: return "data-aided-joint";
    case Variant::data_aided_independent: return "data-aided-independent";
  }
  throw std::logic_error("unknown variant");
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "preamble-based") return Variant::preamble_based;
  if (s == "data-aided-joint") return Variant::data_aided_joint;
  if (s == "data-aided-independent") return Variant::data_aided_independent;
  throw std::invalid_argument("unknown variant tag: " + s);
}

struct TrainConfig {
  int batch_size = 32;
  int iterations = 2000;
  double snr_lo_db = 4.0;
  double snr_hi_db = 14.0;
  double learning_rate = 1e-3;
  double aux_weight = 0.5;  // lambda on the UAEN auxiliary loss
  int hidden_multiplier = 4;
  int hidden_layers = 2;
  std::uint64_t seed = 1;

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (batch_size < 1) v.push_back("train.batch: must be >= 1");
    if (iterations < 0) v.push_back("train.iterations: must be >= 0");
    if (snr_hi_db < snr_lo_db) v.push_back("train.snr range: hi must be >= lo");
    if (!(learning_rate > 0.0)) v.push_back("train.learning_rate: must be > 0");
    if (aux_weight < 0.0) v.push_back("train.aux_weight: must be >= 0");
    if (hidden_multiplier < 1) v.push_back("train.hidden_multiplier: must be >= 1");
    if (hidden_layers < 0) v.push_back("train.hidden_layers: must be >= 0");
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) {
      std::string msg = "invalid train config:";
      for (const auto& s : v) msg += "\n  " + s;
      throw std::invalid_argument(msg);
    }
  }

  json to_json() const {
    return json{{"batch", batch_size},
                {"iterations", iterations},
                {"snr_lo_db", snr_lo_db},
                {"snr_hi_db", snr_hi_db},
                {"learning_rate", learning_rate},
                {"aux_weight", aux_weight},
                {"hidden_multiplier", hidden_multiplier},
                {"hidden_layers", hidden_layers},
                {"seed", seed}};
  }

  static TrainConfig from_json(const json& j) {
    TrainConfig tc;
    tc.batch_size = j.value("batch", tc.batch_size);
    tc.iterations = j.value("iterations", tc.iterations);
    tc.snr_lo_db = j.value("snr_lo_db", tc.snr_lo_db);
    tc.snr_hi_db = j.value("snr_hi_db", tc.snr_hi_db);
    tc.learning_rate = j.value("learning_rate", tc.learning_rate);
    tc.aux_weight = j.value("aux_weight", tc.aux_weight);
    tc.hidden_multiplier = j.value("hidden_multiplier", tc.hidden_multiplier);
    tc.hidden_layers = j.value("hidden_layers", tc.hidden_layers);
    tc.seed = j.value("seed", tc.seed);
    return tc;
  }
};

// --- trainable preamble table ---------------------------------------------------

/// One trainable row per user, N x 2K_p reals laid out [Re.. | Im..]. The
/// normalization layer rescales each row to a unit-energy complex preamble, so
/// the Eq.-(3) per-user generator reduces to a gated embedding lookup.
class PreambleTable {
 public:
  PreambleTable() = default;
  PreambleTable(int n, int k_p)
      : n_(n), k_p_(k_p), values_(static_cast<std::size_t>(n) * 2 * k_p, 0.0) {}

  static PreambleTable random_init(int n, int k_p, RandomStream& rng) {
    PreambleTable t(n, k_p);
    for (double& v : t.values_) v = rng.gaussian();
    return t;
  }

  int rows() const { return n_; }
  int k_p() const { return k_p_; }
  int row_width() const { return 2 * k_p_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const double> row(int n) const {
    return {values_.data() + static_cast<std::size_t>(n) * row_width(),
            static_cast<std::size_t>(row_width())};
  }

  double row_norm(int n) const {
    double e = 0.0;
    for (double v : row(n)) e += v * v;
    return std::sqrt(e);
  }

  std::vector<cplx> normalized_row(int n) const {
    const double r = row_norm(n);
    if (r < 1e-12)
      throw std::runtime_error("preamble table row " + std::to_string(n) +
                               " is numerically zero");
    const auto v = row(n);
    std::vector<cplx> p(k_p_);
    for (int k = 0; k < k_p_; ++k) p[k] = cplx(v[k] / r, v[k_p_ + k] / r);
    return p;
  }

  /// Adjoint of the row normalization p_hat = v / |v|:
  /// dv = g/|v| - v (g.v)/|v|^3, accumulated into the flat gradient.
  void add_normalization_grad(int n, std::span<const double> g_hat,
                              std::vector<double>& grad) const {
    const auto v = row(n);
    const double r = row_norm(n);
    const double r3 = r * r * r;
    double dot = 0.0;
    for (int i = 0; i < row_width(); ++i) dot += g_hat[i] * v[i];
    double* g = grad.data() + static_cast<std::size_t>(n) * row_width();
    for (int i = 0; i < row_width(); ++i) g[i] += g_hat[i] / r - v[i] * dot / r3;
  }

 private:
  int n_ = 0;
  int k_p_ = 0;
  std::vector<double> values_;
};

/// Eq. (3): active users emit their normalized table row, inactive users the
/// zero vector.
inline std::vector<std::vector<cplx>> pgn_forward(const PreambleTable& table,
                                                  const airlink::ActivityVector& delta) {
  if (static_cast<int>(delta.delta.size()) != table.rows())
    throw std::invalid_argument("pgn_forward: activity size mismatch");
  std::vector<std::vector<cplx>> out(table.rows());
  for (int n = 0; n < table.rows(); ++n) {
    if (delta.delta[n])
      out[n] = table.normalized_row(n);
    else
      out[n].assign(table.k_p(), cplx(0.0, 0.0));
  }
  return out;
}

// --- input conditioning -----------------------------------------------------------

// Observations are rescaled to unit RMS before entering a network, so the
// heads see a stable input scale across the whole SNR range (and at pure
// noise). The epsilon keeps the all-zero frame finite.
constexpr double kAgcEps = 1e-20;

struct AgcResult {
  std::vector<double> x;  // u / scale
  double scale = 1.0;
};

inline AgcResult agc_normalize(std::vector<double> u) {
  double mean_sq = 0.0;
  for (double v : u) mean_sq += v * v;
  mean_sq /= static_cast<double>(u.size());
  AgcResult res;
  res.scale = std::sqrt(mean_sq + kAgcEps);
  for (double& v : u) v /= res.scale;
  res.x = std::move(u);
  return res;
}

/// Adjoint of agc_normalize: du = dx/s - u (dx.u) / (D s^3).
inline std::vector<double> agc_backward(std::span<const double> dx,
                                        std::span<const double> u, double s) {
  const double d = static_cast<double>(u.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += dx[i] * u[i];
  std::vector<double> du(u.size());
  const double s3 = s * s * s;
  for (std::size_t i = 0; i < u.size(); ++i) du[i] = dx[i] / s - u[i] * dot / (d * s3);
  return du;
}

inline AgcResult build_preamble_input(std::span<const cplx> y_p) {
  return agc_normalize(nn::flatten_complex(y_p));
}

inline AgcResult build_data_input(const std::vector<std::vector<cplx>>& y_d) {
  std::vector<cplx> concat;
  for (const auto& block : y_d) concat.insert(concat.end(), block.begin(), block.end());
  return agc_normalize(nn::flatten_complex(concat));
}

// --- the three receiver-side heads (Eqs. 4-6) ---------------------------------------

/// Eq. (4): soft activity from the superposed preamble alone.
inline std::vector<double> audn_preamble_forward(const nn::ParamStore& params,
                                                 std::span<const cplx> y_p) {
  const auto in = build_preamble_input(y_p);
  nn::Mat x(1, static_cast<int>(in.x.size()));
  x.data = in.x;
  return nn::forward(params.spec(), params, x).data;
}

/// Eq. (5): a-priori activity scores from the superposed data observations.
inline std::vector<double> uaen_forward(const nn::ParamStore& params,
                                        const std::vector<std::vector<cplx>>& y_d) {
  const auto in = build_data_input(y_d);
  nn::Mat x(1, static_cast<int>(in.x.size()));
  x.data = in.x;
  return nn::forward(params.spec(), params, x).data;
}

/// Eq. (6): soft activity from [alpha | flattened preamble observation].
inline std::vector<double> audn_data_aided_forward(const nn::ParamStore& params,
                                                   std::span<const double> alpha,
                                                   std::span<const cplx> y_p) {
  const auto in = build_preamble_input(y_p);
  nn::Mat x(1, static_cast<int>(alpha.size() + in.x.size()));
  for (std::size_t i = 0; i < alpha.size(); ++i) x.data[i] = alpha[i];
  for (std::size_t i = 0; i < in.x.size(); ++i) x.data[alpha.size() + i] = in.x[i];
  return nn::forward(params.spec(), params, x).data;
}

// --- assembled system ------------------------------------------------------------

/// Smallest N_m with C(K_d, N_m) >= J; (4, 6) gives the paper's N_m = 2.
inline int auto_nonzeros(int k_d, int j_layers) {
  for (int n_m = 1; n_m < k_d; ++n_m)
    if (scma::binomial(k_d, n_m) >= static_cast<std::uint64_t>(j_layers)) return n_m;
  throw std::invalid_argument("no sparse mapping fits J layers in K_d resources");
}

inline scma::ScmaCodebookSet make_codebooks(const airlink::ScenarioConfig& cfg) {
  const int n_m = auto_nonzeros(cfg.k_d, cfg.j_codebooks);
  return scma::build_codebook_set(
      scma::build_mapping_matrix(cfg.k_d, cfg.j_codebooks, n_m), cfg.m);
}

struct AudSystem {
  Variant variant;
  airlink::ScenarioConfig scenario;
  scma::ScmaCodebookSet codebooks;
  PreambleTable table;          // trainable variants
  airlink::PreambleSet frozen;  // data-aided-independent
  nn::NetworkSpec audn_spec;
  nn::ParamStore audn;
  nn::NetworkSpec uaen_spec;
  nn::ParamStore uaen;
  std::vector<double> loss_log;

  AudSystem(Variant v, airlink::ScenarioConfig cfg)
      : variant(v), scenario(std::move(cfg)), codebooks(make_codebooks(scenario)) {}

  bool has_uaen() const { return variant != Variant::preamble_based; }
  bool trains_table() const { return variant != Variant::data_aided_independent; }

  const std::vector<int>& assoc() const {
    return variant == Variant::data_aided_independent ? frozen.assoc : assoc_cache_;
  }

  void set_round_robin_assoc() {
    assoc_cache_ = airlink::round_robin_assoc(scenario.n_users, scenario.j_codebooks);
  }

 private:
  std::vector<int> assoc_cache_;
};

/// Normalized preambles plus association map, in the airlink file format.
inline airlink::PreambleSet extract_preambles(const AudSystem& sys) {
  if (sys.variant == Variant::data_aided_independent) return sys.frozen;
  airlink::PreambleSet ps;
  ps.k_p = sys.scenario.k_p;
  ps.j_codebooks = sys.scenario.j_codebooks;
  ps.assoc = sys.assoc();
  for (int n = 0; n < sys.table.rows(); ++n)
    ps.preambles.push_back(sys.table.normalized_row(n));
  return ps;
}

// --- training batches --------------------------------------------------------------

/// A batch of frames with every random draw frozen. The data observations are
/// fully assembled (they never depend on trainable parameters); the preamble
/// observation is rebuilt from the current preambles inside the graph.
struct FrameBatch {
  double sigma = 0.0;
  std::vector<airlink::FrameDraws> draws;
  std::vector<std::vector<std::vector<cplx>>> y_d;  // per item: N_d x K_d
};

inline FrameBatch make_frame_batch(const airlink::ScenarioConfig& cfg,
                                   const scma::ScmaCodebookSet& cbs,
                                   const std::vector<int>& assoc, std::uint64_t seed,
                                   std::uint64_t first_trial, int count, double sigma) {
  FrameBatch batch;
  batch.sigma = sigma;
  batch.draws.reserve(count);
  batch.y_d.reserve(count);
  for (int b = 0; b < count; ++b) {
    auto draws = airlink::sample_frame_draws(cfg, seed, first_trial + b);
    batch.y_d.push_back(airlink::superpose_data(cbs, assoc, draws.delta, draws.h,
                                                draws.bits, cfg.n_d, draws.noise_d,
                                                sigma));
    batch.draws.push_back(std::move(draws));
  }
  return batch;
}

// --- loss graph ----------------------------------------------------------------------

struct GraphGrads {
  std::vector<double> table;  // empty unless the table trains
  nn::ParamStore uaen;
  nn::ParamStore audn;
};

struct GraphResult {
  double total = 0.0;
  double main_bce = 0.0;
  double aux_bce = 0.0;
  nn::Mat soft;  // batch of soft activity estimates
};

/// Forward (and optionally backward) pass of the full training objective
///
///   L = BCE(deltahat, delta) + lambda * BCE(sigmoid(alpha), delta)
///
/// over one frozen batch. The preamble observation is rebuilt from the current
/// table (or the frozen set), so gradients reach the table through the Eq.-(1)
/// superposition, the RMS input conditioning, and the row normalization.
inline GraphResult system_loss(const AudSystem& sys, const FrameBatch& batch,
                               double aux_weight, GraphGrads* grads_out = nullptr) {
  const auto& cfg = sys.scenario;
  const int batch_size = static_cast<int>(batch.draws.size());
  const int n_users = cfg.n_users;
  const int k_p = cfg.k_p;

  // current preambles
  std::vector<std::vector<cplx>> phat(n_users);
  for (int n = 0; n < n_users; ++n)
    phat[n] = sys.trains_table() ? sys.table.normalized_row(n)
                                 : sys.frozen.preambles[n];

  // preamble observations and their conditioned inputs
  std::vector<std::vector<cplx>> y_p(batch_size);
  std::vector<std::vector<double>> u1(batch_size);
  std::vector<double> s1(batch_size);
  nn::Mat x1(batch_size, 2 * k_p);
  for (int b = 0; b < batch_size; ++b) {
    const auto& d = batch.draws[b];
    y_p[b].assign(k_p, cplx(0.0, 0.0));
    for (int n = 0; n < n_users; ++n) {
      if (!d.delta.delta[n]) continue;
      const cplx hn = d.h.h[n];
      for (int k = 0; k < k_p; ++k) y_p[b][k] += hn * phat[n][k];
    }
    for (int k = 0; k < k_p; ++k) y_p[b][k] += batch.sigma * d.noise_p[k];
    u1[b] = nn::flatten_complex(y_p[b]);
    auto agc = agc_normalize(u1[b]);
    s1[b] = agc.scale;
    std::copy(agc.x.begin(), agc.x.end(), x1.row(b).begin());
  }

  // targets
  nn::Mat targets(batch_size, n_users);
  for (int b = 0; b < batch_size; ++b)
    for (int n = 0; n < n_users; ++n)
      targets.at(b, n) = batch.draws[b].delta.delta[n];

  nn::ForwardCache uaen_cache;
  nn::Mat alpha;
  nn::Mat sig_alpha;
  if (sys.has_uaen()) {
    nn::Mat x2(batch_size, 2 * cfg.k_d * cfg.n_d);
    for (int b = 0; b < batch_size; ++b) {
      auto agc = build_data_input(batch.y_d[b]);
      std::copy(agc.x.begin(), agc.x.end(), x2.row(b).begin());
    }
    alpha = nn::forward(sys.uaen_spec, sys.uaen, x2, &uaen_cache);
    sig_alpha = nn::Mat(alpha.rows, alpha.cols);
    for (std::size_t i = 0; i < alpha.data.size(); ++i)
      sig_alpha.data[i] = nn::activate(nn::Activation::sigmoid, alpha.data[i]);
  }

  // detection head input
  nn::Mat audn_in;
  if (sys.has_uaen()) {
    audn_in = nn::Mat(batch_size, n_users + 2 * k_p);
    for (int b = 0; b < batch_size; ++b) {
      auto dst = audn_in.row(b);
      const auto arow = alpha.row(b);
      std::copy(arow.begin(), arow.end(), dst.begin());
      const auto xrow = x1.row(b);
      std::copy(xrow.begin(), xrow.end(), dst.begin() + n_users);
    }
  } else {
    audn_in = x1;
  }

  nn::ForwardCache audn_cache;
  GraphResult res;
  res.soft = nn::forward(sys.audn_spec, sys.audn, audn_in, &audn_cache);

  const nn::LossResult main = nn::bce_loss(res.soft, targets);
  res.main_bce = main.loss;
  if (sys.has_uaen()) {
    res.aux_bce = nn::bce_loss(sig_alpha, targets).loss;
  }
  res.total = res.main_bce + aux_weight * res.aux_bce;

  if (!grads_out) return res;

  // ---- backward ----
  const nn::BackwardResult audn_back =
      nn::backward(sys.audn_spec, sys.audn, audn_cache, main.grad);
  grads_out->audn = audn_back.grads;

  nn::Mat dx1(batch_size, 2 * k_p);
  if (sys.has_uaen()) {
    nn::Mat d_alpha(batch_size, n_users);
    const double inv_batch = 1.0 / batch_size;
    for (int b = 0; b < batch_size; ++b) {
      const auto din = audn_back.input_grad.row(b);
      for (int n = 0; n < n_users; ++n)
        d_alpha.at(b, n) = din[n] + aux_weight * inv_batch *
                                        (sig_alpha.at(b, n) - targets.at(b, n));
      std::copy(din.begin() + n_users, din.end(), dx1.row(b).begin());
    }
    const nn::BackwardResult uaen_back =
        nn::backward(sys.uaen_spec, sys.uaen, uaen_cache, d_alpha);
    grads_out->uaen = uaen_back.grads;
  } else {
    dx1 = audn_back.input_grad;
  }

  if (sys.trains_table()) {
    grads_out->table.assign(sys.table.values().size(), 0.0);
    std::vector<std::vector<cplx>> d_phat(n_users,
                                          std::vector<cplx>(k_p, cplx(0.0, 0.0)));
    for (int b = 0; b < batch_size; ++b) {
      const auto du1 = agc_backward(dx1.row(b), u1[b], s1[b]);
      const auto& d = batch.draws[b];
      for (int n = 0; n < n_users; ++n) {
        if (!d.delta.delta[n]) continue;
        const cplx h_conj = std::conj(d.h.h[n]);
        for (int k = 0; k < k_p; ++k) {
          const cplx dy(du1[k], du1[k_p + k]);
          d_phat[n][k] += h_conj * dy;
        }
      }
    }
    std::vector<double> g_hat(2 * k_p);
    for (int n = 0; n < n_users; ++n) {
      for (int k = 0; k < k_p; ++k) {
        g_hat[k] = d_phat[n][k].real();
        g_hat[k_p + k] = d_phat[n][k].imag();
      }
      sys.table.add_normalization_grad(n, g_hat, grads_out->table);
    }
  }
  return res;
}

// --- detection -----------------------------------------------------------------------

inline std::vector<double> soft_detect(const AudSystem& sys,
                                       const airlink::ReceivedFrame& frame) {
  if (sys.has_uaen()) {
    const auto alpha = uaen_forward(sys.uaen, frame.y_d);
    return audn_data_aided_forward(sys.audn, alpha, frame.y_p);
  }
  return audn_preamble_forward(sys.audn, frame.y_p);
}

inline airlink::ActivityVector threshold_activity(const std::vector<double>& soft,
                                                  double threshold) {
  airlink::ActivityVector est;
  est.delta.resize(soft.size());
  for (std::size_t n = 0; n < soft.size(); ++n)
    est.delta[n] = soft[n] > threshold ? 1 : 0;  // strict: ties break to inactive
  return est;
}

inline airlink::ActivityVector detect(const AudSystem& sys,
                                      const airlink::ReceivedFrame& frame,
                                      double threshold = 0.5) {
  return threshold_activity(soft_detect(sys, frame), threshold);
}

// --- training --------------------------------------------------------------------------

inline AudSystem train(Variant variant, const airlink::ScenarioConfig& scenario,
                       const TrainConfig& tc,
                       const airlink::PreambleSet* frozen = nullptr) {
  scenario.validate();
  tc.validate();

  AudSystem sys(variant, scenario);
  if (variant == Variant::data_aided_independent) {
    if (!frozen)
      throw std::invalid_argument(
          "data-aided-independent training requires a frozen preamble set");
    frozen->validate();
    if (frozen->size() != scenario.n_users || frozen->k_p != scenario.k_p)
      throw std::invalid_argument("frozen preamble set does not match scenario");
    sys.frozen = *frozen;
  } else {
    auto init = RandomStream::derive(tc.seed, StreamPurpose::table_init);
    sys.table = PreambleTable::random_init(scenario.n_users, scenario.k_p, init);
    sys.set_round_robin_assoc();
  }

  const int audn_in = sys.has_uaen() ? scenario.n_users + 2 * scenario.k_p
                                     : 2 * scenario.k_p;
  sys.audn_spec = nn::make_head_spec(audn_in, scenario.n_users,
                                     nn::Activation::sigmoid, tc.hidden_multiplier,
                                     tc.hidden_layers);
  auto audn_init = RandomStream::derive(tc.seed, StreamPurpose::weight_init, 0);
  sys.audn = nn::ParamStore::glorot_init(sys.audn_spec, audn_init);

  if (sys.has_uaen()) {
    sys.uaen_spec = nn::make_head_spec(2 * scenario.k_d * scenario.n_d,
                                       scenario.n_users, nn::Activation::identity,
                                       tc.hidden_multiplier, tc.hidden_layers);
    auto uaen_init = RandomStream::derive(tc.seed, StreamPurpose::weight_init, 1);
    sys.uaen = nn::ParamStore::glorot_init(sys.uaen_spec, uaen_init);
  }

  nn::AdamState audn_opt(sys.audn.values().size(), tc.learning_rate);
  nn::AdamState uaen_opt(sys.uaen.values().size(), tc.learning_rate);
  nn::AdamState table_opt(sys.table.values().size(), tc.learning_rate);

  auto snr_stream = RandomStream::derive(tc.seed, StreamPurpose::snr_draw);
  sys.loss_log.reserve(tc.iterations);

  GraphGrads grads;
  for (int it = 0; it < tc.iterations; ++it) {
    const double snr_db = snr_stream.uniform(tc.snr_lo_db, tc.snr_hi_db);
    const double sigma = airlink::snr_to_noise_std(snr_db);
    const FrameBatch batch = make_frame_batch(
        scenario, sys.codebooks, sys.assoc(), tc.seed,
        static_cast<std::uint64_t>(it) * tc.batch_size, tc.batch_size, sigma);
    const GraphResult res = system_loss(sys, batch, tc.aux_weight, &grads);
    if (!std::isfinite(res.total))
      throw std::runtime_error("training diverged at iteration " + std::to_string(it));
    sys.loss_log.push_back(res.total);

    adam_step(sys.audn, grads.audn, audn_opt);
    if (sys.has_uaen()) adam_step(sys.uaen, grads.uaen, uaen_opt);
    if (sys.trains_table()) {
      table_opt.step(sys.table.values(), grads.table);
    }
  }
  return sys;
}

// --- independently designed preamble sets -------------------------------------------

enum class PreambleKind { gaussian, qpsk, zadoff_chu_family };

inline PreambleKind preamble_kind_from_string(const std::string& s) {
  if (s == "gaussian") return PreambleKind::gaussian;
  if (s == "qpsk") return PreambleKind::qpsk;
  if (s == "zadoff-chu-family") return PreambleKind::zadoff_chu_family;
  throw std::invalid_argument("unknown preamble kind: " + s);
}

inline bool is_prime(int n) {
  if (n < 2) return false;
  for (int d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

inline airlink::PreambleSet gen_independent_preambles(int n, int k_p,
                                                      PreambleKind kind,
                                                      std::uint64_t seed,
                                                      int j_codebooks = 6) {
  if (n <= 0 || k_p <= 0) throw std::invalid_argument("gen_preambles: bad dimensions");
  airlink::PreambleSet ps;
  ps.k_p = k_p;
  ps.j_codebooks = j_codebooks;
  ps.assoc = airlink::round_robin_assoc(n, j_codebooks);
  auto rng = RandomStream::derive(seed, StreamPurpose::preamble_gen);

  switch (kind) {
    case PreambleKind::gaussian: {
      for (int i = 0; i < n; ++i) {
        std::vector<cplx> p(k_p);
        double energy = 0.0;
        for (auto& c : p) {
          c = rng.cgaussian();
          energy += std::norm(c);
        }
        const double scale = 1.0 / std::sqrt(energy);
        for (auto& c : p) c *= scale;
        ps.preambles.push_back(std::move(p));
      }
      break;
    }
    case PreambleKind::qpsk: {
      const double amp = 1.0 / std::sqrt(static_cast<double>(k_p));
      for (int i = 0; i < n; ++i) {
        std::vector<cplx> p(k_p);
        for (auto& c : p) {
          const int q = rng.uniform_int(4);
          const double phase = std::numbers::pi / 4.0 + q * std::numbers::pi / 2.0;
          c = std::polar(amp, phase);
        }
        ps.preambles.push_back(std::move(p));
      }
      break;
    }
    case PreambleKind::zadoff_chu_family: {
      // cyclic shifts of prime-length ZC roots; shifts of one root are
      // orthogonal, distinct roots have flat cross-correlation 1/sqrt(K_p)
      if (!is_prime(k_p))
        throw std::invalid_argument("zadoff-chu-family requires prime K_p");
      const std::uint64_t capacity =
          static_cast<std::uint64_t>(k_p - 1) * static_cast<std::uint64_t>(k_p);
      if (static_cast<std::uint64_t>(n) > capacity)
        throw std::invalid_argument("zadoff-chu-family: N exceeds (K_p-1)*K_p");
      const double amp = 1.0 / std::sqrt(static_cast<double>(k_p));
      for (int i = 0; i < n; ++i) {
        const int root = i / k_p + 1;
        const int shift = i % k_p;
        std::vector<cplx> p(k_p);
        for (int k = 0; k < k_p; ++k) {
          const long idx = (k + shift) % k_p;
          const double phase =
              -std::numbers::pi * root * idx * (idx + 1) / static_cast<double>(k_p);
          p[k] = std::polar(amp, phase);
        }
        ps.preambles.push_back(std::move(p));
      }
      break;
    }
  }
  ps.validate();
  return ps;
}

// --- checkpoints -------------------------------------------------------------------------

inline void write_loss_csv(const std::vector<double>& losses, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "iteration,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", losses[i]);
    out << i << "," << buf << "\n";
  }
}

inline void save_checkpoint(const AudSystem& sys, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest{{"variant", to_string(sys.variant)},
                {"scenario", sys.scenario.to_json()},
                {"audn_spec", sys.audn_spec.to_json()},
                {"files", json::object()}};
  manifest["files"]["audn"] = "audn.bin";
  nn::save_params(sys.audn, (dir / "audn.bin").string());
  if (sys.has_uaen()) {
    manifest["uaen_spec"] = sys.uaen_spec.to_json();
    manifest["files"]["uaen"] = "uaen.bin";
    nn::save_params(sys.uaen, (dir / "uaen.bin").string());
  }
  if (sys.variant == Variant::data_aided_independent) {
    manifest["files"]["preambles"] = "preambles.json";
    sys.frozen.save((dir / "preambles.json").string());
  } else {
    manifest["files"]["table"] = "table.bin";
    nn::save_blob(sys.table.values(), (dir / "table.bin").string());
  }
  write_loss_csv(sys.loss_log, (dir / "losses.csv").string());

  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write checkpoint manifest");
  out << manifest.dump(2) << "\n";
}

inline AudSystem load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no checkpoint manifest in " + dir.string());
  json manifest;
  in >> manifest;

  const Variant variant = variant_from_string(manifest.at("variant").get<std::string>());
  auto scenario = airlink::ScenarioConfig::from_json(manifest.at("scenario"));
  AudSystem sys(variant, std::move(scenario));

  sys.audn_spec = nn::NetworkSpec::from_json(manifest.at("audn_spec"));
  sys.audn = nn::load_params(sys.audn_spec, (dir / "audn.bin").string());
  if (sys.has_uaen()) {
    sys.uaen_spec = nn::NetworkSpec::from_json(manifest.at("uaen_spec"));
    sys.uaen = nn::load_params(sys.uaen_spec, (dir / "uaen.bin").string());
  }
  if (variant == Variant::data_aided_independent) {
    sys.frozen = airlink::PreambleSet::load((dir / "preambles.json").string());
  } else {
    sys.table = PreambleTable(sys.scenario.n_users, sys.scenario.k_p);
    sys.table.values() =
        nn::load_blob((dir / "table.bin").string(), sys.table.values().size());
    sys.set_round_robin_assoc();
  }
  return sys;
}

}  // namespace gfscma::models
