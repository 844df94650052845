#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfscma/rng.hpp"
#include "gfscma/scma.hpp"

namespace gfscma::airlink {

using cplx = std::complex<double>;
using json = nlohmann::json;

/// Static description of one contention scenario: N = J*L users, each owning
/// one preamble of length K_p and the codebook nu(n) for its N_d data blocks.
struct ScenarioConfig {
  int n_users = 0;
  int j_codebooks = 0;
  int l_per_codebook = 0;
  int k_p = 0;
  int k_d = 0;
  int n_d = 0;
  int m = 4;
  std::vector<double> activity_prob;  // per user
  double snr_db = 10.0;

  static ScenarioConfig homogeneous(int n, int j, int l, int k_p, int k_d, int n_d,
                                    int m, double p, double snr_db = 10.0) {
    ScenarioConfig cfg;
    cfg.n_users = n;
    cfg.j_codebooks = j;
    cfg.l_per_codebook = l;
    cfg.k_p = k_p;
    cfg.k_d = k_d;
    cfg.n_d = n_d;
    cfg.m = m;
    cfg.activity_prob.assign(n, p);
    cfg.snr_db = snr_db;
    return cfg;
  }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (n_users <= 0) v.push_back("scenario.n: must be positive");
    if (j_codebooks <= 0) v.push_back("scenario.j: must be positive");
    if (l_per_codebook <= 0) v.push_back("scenario.l: must be positive");
    if (n_users != j_codebooks * l_per_codebook)
      v.push_back("scenario.n: must equal j*l (got " + std::to_string(n_users) +
                  " != " + std::to_string(j_codebooks) + "*" +
                  std::to_string(l_per_codebook) + ")");
    if (k_p <= 0) v.push_back("scenario.k_p: must be positive");
    if (k_d <= 0) v.push_back("scenario.k_d: must be positive");
    if (n_d <= 0) v.push_back("scenario.n_d: must be positive");
    if (!scma::is_power_of_two(m)) v.push_back("scenario.m: must be a power of 2");
    if (static_cast<int>(activity_prob.size()) != n_users)
      v.push_back("scenario.activity_prob: needs one entry per user");
    for (double p : activity_prob)
      if (!(p >= 0.0 && p <= 1.0)) {
        v.push_back("scenario.activity_prob: entries must be in [0,1]");
        break;
      }
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) {
      std::string msg = "invalid scenario:";
      for (const auto& s : v) msg += "\n  " + s;
      throw std::invalid_argument(msg);
    }
  }

  json to_json() const {
    return json{{"n", n_users},       {"j", j_codebooks}, {"l", l_per_codebook},
                {"k_p", k_p},         {"k_d", k_d},       {"n_d", n_d},
                {"m", m},             {"snr_db", snr_db},
                {"activity_prob", activity_prob}};
  }

  /// activity_prob may be a scalar (broadcast to all users) or a per-user array.
  static ScenarioConfig from_json(const json& j) {
    ScenarioConfig cfg;
    cfg.n_users = j.at("n").get<int>();
    cfg.j_codebooks = j.at("j").get<int>();
    cfg.l_per_codebook = j.at("l").get<int>();
    cfg.k_p = j.at("k_p").get<int>();
    cfg.k_d = j.at("k_d").get<int>();
    cfg.n_d = j.at("n_d").get<int>();
    cfg.m = j.value("m", 4);
    cfg.snr_db = j.value("snr_db", 10.0);
    const auto& p = j.at("activity_prob");
    if (p.is_number())
      cfg.activity_prob.assign(std::max(cfg.n_users, 0), p.get<double>());
    else
      cfg.activity_prob = p.get<std::vector<double>>();
    return cfg;
  }
};

struct ActivityVector {
  std::vector<std::uint8_t> delta;

  int count_active() const {
    return std::accumulate(delta.begin(), delta.end(), 0);
  }
  bool operator==(const ActivityVector&) const = default;
};

struct ChannelVector {
  std::vector<cplx> h;
  bool operator==(const ChannelVector&) const = default;
};

/// Superposed observations of one frame: Eq.-(1) preamble signal and the
/// Eq.-(2) sequence of N_d data signals.
struct ReceivedFrame {
  std::vector<cplx> y_p;
  std::vector<std::vector<cplx>> y_d;
};

/// N preamble sequences plus the preamble -> codebook association nu(n).
struct PreambleSet {
  int k_p = 0;
  int j_codebooks = 0;
  std::vector<std::vector<cplx>> preambles;
  std::vector<int> assoc;

  int size() const { return static_cast<int>(preambles.size()); }

  void validate() const {
    if (preambles.size() != assoc.size())
      throw std::invalid_argument("preamble set: assoc size mismatch");
    for (const auto& p : preambles) {
      if (static_cast<int>(p.size()) != k_p)
        throw std::invalid_argument("preamble set: length mismatch");
      double e = 0.0;
      for (const cplx& c : p) e += std::norm(c);
      if (std::abs(e - 1.0) > 1e-9)
        throw std::invalid_argument("preamble set: preamble energy must be 1");
    }
    for (int a : assoc)
      if (a < 0 || a >= j_codebooks)
        throw std::invalid_argument("preamble set: assoc index out of range");
  }

  json to_json() const {
    json pre = json::array();
    for (const auto& p : preambles) {
      json vec = json::array();
      for (const cplx& c : p) vec.push_back({c.real(), c.imag()});
      pre.push_back(std::move(vec));
    }
    return json{{"K_p", k_p},
                {"N", size()},
                {"J", j_codebooks},
                {"preambles", std::move(pre)},
                {"assoc", assoc}};
  }

  static PreambleSet from_json(const json& j) {
    PreambleSet ps;
    ps.k_p = j.at("K_p").get<int>();
    ps.j_codebooks = j.at("J").get<int>();
    const int n = j.at("N").get<int>();
    const auto& pre = j.at("preambles");
    if (static_cast<int>(pre.size()) != n)
      throw std::invalid_argument("preamble json: N mismatch");
    for (const auto& vec : pre) {
      std::vector<cplx> p;
      p.reserve(vec.size());
      for (const auto& c : vec) p.emplace_back(c[0].get<double>(), c[1].get<double>());
      ps.preambles.push_back(std::move(p));
    }
    ps.assoc = j.at("assoc").get<std::vector<int>>();
    ps.validate();
    return ps;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << to_json().dump(2) << "\n";
  }

  static PreambleSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return from_json(j);
  }
};

inline std::vector<int> round_robin_assoc(int n_users, int j_codebooks) {
  std::vector<int> assoc(n_users);
  for (int n = 0; n < n_users; ++n) assoc[n] = n % j_codebooks;
  return assoc;
}

inline ActivityVector sample_activity(const ScenarioConfig& cfg, RandomStream& rng) {
  ActivityVector a;
  a.delta.resize(cfg.n_users);
  for (int n = 0; n < cfg.n_users; ++n)
    a.delta[n] = rng.bernoulli(cfg.activity_prob[n]) ? 1 : 0;
  return a;
}

/// Flat Rayleigh fading: h_n ~ CN(0, 1), independent across users.
inline ChannelVector sample_channel(const ScenarioConfig& cfg, RandomStream& rng) {
  ChannelVector ch;
  ch.h.resize(cfg.n_users);
  for (auto& h : ch.h) h = rng.cgaussian();
  return ch;
}

/// Noise std for unit-energy per-user signals: sigma = 10^(-snr_db/20),
/// complex noise CN(0, sigma^2) per sample.
inline double snr_to_noise_std(double snr_db) {
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
  return std::pow(10.0, -snr_db / 20.0);
}

inline std::vector<cplx> sample_noise(int length, double sigma, RandomStream& rng) {
  std::vector<cplx> n(length);
  for (auto& s : n) s = sigma * rng.cgaussian();
  return n;
}

/// Eq. (1) with an explicit noise realization: y_p = sum delta_n h_n p^(n) + sigma*noise.
inline std::vector<cplx> superpose_preamble(const PreambleSet& ps,
                                            const ActivityVector& delta,
                                            const ChannelVector& h,
                                            const std::vector<cplx>& unit_noise,
                                            double sigma) {
  const int n_users = ps.size();
  if (static_cast<int>(delta.delta.size()) != n_users ||
      static_cast<int>(h.h.size()) != n_users ||
      static_cast<int>(unit_noise.size()) != ps.k_p)
    throw std::invalid_argument("superpose_preamble: dimension mismatch");
  std::vector<cplx> y(ps.k_p, cplx(0.0, 0.0));
  for (int n = 0; n < n_users; ++n) {
    if (!delta.delta[n]) continue;
    const cplx hn = h.h[n];
    const auto& p = ps.preambles[n];
    for (int k = 0; k < ps.k_p; ++k) y[k] += hn * p[k];
  }
  for (int k = 0; k < ps.k_p; ++k) y[k] += sigma * unit_noise[k];
  return y;
}

/// Eq. (1), sampling the noise from `rng`.
inline std::vector<cplx> superpose_preamble(const PreambleSet& ps,
                                            const ActivityVector& delta,
                                            const ChannelVector& h, double sigma,
                                            RandomStream& rng) {
  return superpose_preamble(ps, delta, h, sample_noise(ps.k_p, 1.0, rng), sigma);
}

/// N_d blocks of log2(M) bits for one user.
using BitBlocks = std::vector<scma::SymbolBlock>;

/// Eq. (2) with explicit noise: y_i = sum delta_n h_n c_i^{nu(n)} + sigma*noise_i.
inline std::vector<std::vector<cplx>> superpose_data(
    const scma::ScmaCodebookSet& cbs, const std::vector<int>& assoc,
    const ActivityVector& delta, const ChannelVector& h,
    const std::vector<BitBlocks>& bits, int n_d,
    const std::vector<std::vector<cplx>>& unit_noise, double sigma) {
  const int n_users = static_cast<int>(assoc.size());
  if (static_cast<int>(delta.delta.size()) != n_users ||
      static_cast<int>(h.h.size()) != n_users ||
      static_cast<int>(bits.size()) != n_users ||
      static_cast<int>(unit_noise.size()) != n_d)
    throw std::invalid_argument("superpose_data: dimension mismatch");

  const int k_d = cbs.codeword_length();
  std::vector<std::vector<cplx>> y(n_d, std::vector<cplx>(k_d, cplx(0.0, 0.0)));
  for (int n = 0; n < n_users; ++n) {
    if (!delta.delta[n]) continue;
    if (static_cast<int>(bits[n].size()) != n_d)
      throw std::invalid_argument("superpose_data: missing bit blocks for active user " +
                                  std::to_string(n));
    const cplx hn = h.h[n];
    for (int i = 0; i < n_d; ++i) {
      const auto& cw = scma::encode_block(cbs, assoc[n], bits[n][i]);
      for (int k = 0; k < k_d; ++k) y[i][k] += hn * cw[k];
    }
  }
  for (int i = 0; i < n_d; ++i)
    for (int k = 0; k < k_d; ++k) y[i][k] += sigma * unit_noise[i][k];
  return y;
}

/// Eq. (2), sampling the noise from `rng`.
inline std::vector<std::vector<cplx>> superpose_data(
    const scma::ScmaCodebookSet& cbs, const std::vector<int>& assoc,
    const ActivityVector& delta, const ChannelVector& h,
    const std::vector<BitBlocks>& bits, int n_d, double sigma, RandomStream& rng) {
  std::vector<std::vector<cplx>> noise(n_d);
  for (auto& v : noise) v = sample_noise(cbs.codeword_length(), 1.0, rng);
  return superpose_data(cbs, assoc, delta, h, bits, n_d, noise, sigma);
}

/// Every random draw behind one frame. Pure function of (config, seed, trial),
/// so paired evaluations of different systems share identical draws.
struct FrameDraws {
  ActivityVector delta;
  ChannelVector h;
  std::vector<cplx> noise_p;                // unit CN(0,1)
  std::vector<std::vector<cplx>> noise_d;   // unit CN(0,1)
  std::vector<BitBlocks> bits;              // empty for inactive users
};

inline FrameDraws sample_frame_draws(const ScenarioConfig& cfg, std::uint64_t seed,
                                     std::uint64_t trial) {
  FrameDraws d;
  auto act = RandomStream::derive(seed, StreamPurpose::activity, trial);
  auto chn = RandomStream::derive(seed, StreamPurpose::channel, trial);
  auto npr = RandomStream::derive(seed, StreamPurpose::preamble_noise, trial);
  auto nda = RandomStream::derive(seed, StreamPurpose::data_noise, trial);
  auto bit = RandomStream::derive(seed, StreamPurpose::payload_bits, trial);

  d.delta = sample_activity(cfg, act);
  d.h = sample_channel(cfg, chn);
  d.noise_p = sample_noise(cfg.k_p, 1.0, npr);
  d.noise_d.resize(cfg.n_d);
  for (auto& v : d.noise_d) v = sample_noise(cfg.k_d, 1.0, nda);

  const int bits_per_block = scma::log2_int(cfg.m);
  d.bits.resize(cfg.n_users);
  for (int n = 0; n < cfg.n_users; ++n) {
    if (!d.delta.delta[n]) continue;
    d.bits[n].resize(cfg.n_d);
    for (int i = 0; i < cfg.n_d; ++i) {
      d.bits[n][i].resize(bits_per_block);
      for (int b = 0; b < bits_per_block; ++b)
        d.bits[n][i][b] = bit.bernoulli(0.5) ? 1 : 0;
    }
  }
  return d;
}

inline ReceivedFrame assemble_frame(const ScenarioConfig& cfg, const PreambleSet& ps,
                                    const scma::ScmaCodebookSet& cbs,
                                    const FrameDraws& draws, double sigma) {
  if (ps.size() != cfg.n_users || ps.k_p != cfg.k_p)
    throw std::invalid_argument("assemble_frame: preamble set does not match scenario");
  ReceivedFrame f;
  f.y_p = superpose_preamble(ps, draws.delta, draws.h, draws.noise_p, sigma);
  f.y_d = superpose_data(cbs, ps.assoc, draws.delta, draws.h, draws.bits, cfg.n_d,
                         draws.noise_d, sigma);
  return f;
}

}  // namespace gfscma::airlink
