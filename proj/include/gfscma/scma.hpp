#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gfscma::scma {

using cplx = std::complex<double>;
using json = nlohmann::json;

/// A block of log2(M) payload bits, encoded to one codeword.
using SymbolBlock = std::vector<std::uint8_t>;

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 0; i < k; ++i) r = r * static_cast<std::uint64_t>(n - i) / (i + 1);
  return r;
}

inline bool is_power_of_two(int m) { return m > 0 && (m & (m - 1)) == 0; }

inline int log2_int(int m) {
  int b = 0;
  while ((1 << b) < m) ++b;
  return b;
}

/// Binary resource-to-layer map: column j marks the N_m shared resources
/// occupied by layer j. Columns enumerate N_m-subsets of the K_d rows in
/// lexicographic order.
class MappingMatrix {
 public:
  MappingMatrix(int resources, int nonzeros, std::vector<std::vector<int>> supports)
      : resources_(resources), nonzeros_(nonzeros), supports_(std::move(supports)) {}

  int resource_count() const { return resources_; }
  int layer_count() const { return static_cast<int>(supports_.size()); }
  int nonzeros_per_layer() const { return nonzeros_; }

  /// Row indices of the ones in column `layer`, ascending.
  const std::vector<int>& support(int layer) const { return supports_.at(layer); }

  bool at(int row, int layer) const {
    const auto& s = supports_.at(layer);
    return std::binary_search(s.begin(), s.end(), row);
  }

  int row_weight(int row) const {
    int w = 0;
    for (int j = 0; j < layer_count(); ++j) w += at(row, j) ? 1 : 0;
    return w;
  }

 private:
  int resources_;
  int nonzeros_;
  std::vector<std::vector<int>> supports_;
};

inline MappingMatrix build_mapping_matrix(int k_d, int j_layers, int n_m) {
  if (k_d <= 0 || j_layers <= 0 || n_m <= 0)
    throw std::invalid_argument("build_mapping_matrix: dimensions must be positive");
  if (n_m >= k_d)
    throw std::invalid_argument("build_mapping_matrix: N_m must be < K_d");
  const std::uint64_t capacity = binomial(k_d, n_m);
  if (static_cast<std::uint64_t>(j_layers) > capacity)
    throw std::invalid_argument("build_mapping_matrix: J=" + std::to_string(j_layers) +
                                " exceeds C(K_d,N_m)=" + std::to_string(capacity));

  std::vector<std::vector<int>> supports;
  std::vector<int> comb(n_m);
  for (int i = 0; i < n_m; ++i) comb[i] = i;
  while (static_cast<int>(supports.size()) < j_layers) {
    supports.push_back(comb);
    // advance to the next N_m-subset in lexicographic order
    int i = n_m - 1;
    while (i >= 0 && comb[i] == k_d - n_m + i) --i;
    if (i < 0) break;
    ++comb[i];
    for (int t = i + 1; t < n_m; ++t) comb[t] = comb[t - 1] + 1;
  }
  return MappingMatrix(k_d, n_m, std::move(supports));
}

/// J codebooks of M sparse unit-energy codewords over K_d resources.
///
/// Codebooks are procedural: an M-PSK mother constellation rotated by the
/// layer angle j*pi/(2J), placed on the layer's mapping support. The data
/// stream only has to make codebooks distinguishable, not match a published
/// design.
class ScmaCodebookSet {
 public:
  ScmaCodebookSet(MappingMatrix mapping, int m,
                  std::vector<std::vector<std::vector<cplx>>> codewords)
      : mapping_(std::move(mapping)), m_(m), codewords_(std::move(codewords)) {}

  const MappingMatrix& mapping() const { return mapping_; }
  int layer_count() const { return mapping_.layer_count(); }
  int codeword_length() const { return mapping_.resource_count(); }
  int codebook_size() const { return m_; }
  int bits_per_block() const { return log2_int(m_); }

  const std::vector<cplx>& codeword(int layer, int message) const {
    return codewords_.at(layer).at(message);
  }

  json to_json() const {
    json cw = json::array();
    for (int j = 0; j < layer_count(); ++j) {
      for (int m = 0; m < m_; ++m) {
        json vec = json::array();
        for (const cplx& c : codewords_[j][m]) vec.push_back({c.real(), c.imag()});
        cw.push_back(std::move(vec));
      }
    }
    return json{{"K_d", codeword_length()},
                {"J", layer_count()},
                {"N_m", mapping_.nonzeros_per_layer()},
                {"M", m_},
                {"codewords", std::move(cw)}};
  }

  static ScmaCodebookSet from_json(const json& j);

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << to_json().dump(2) << "\n";
  }

  static ScmaCodebookSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return from_json(j);
  }

 private:
  MappingMatrix mapping_;
  int m_;
  std::vector<std::vector<std::vector<cplx>>> codewords_;  // [layer][message][k]
};

inline ScmaCodebookSet build_codebook_set(const MappingMatrix& mapping, int m) {
  if (!is_power_of_two(m))
    throw std::invalid_argument("build_codebook_set: M must be a power of 2");
  const int j_layers = mapping.layer_count();
  const int k_d = mapping.resource_count();
  const int n_m = mapping.nonzeros_per_layer();

  std::vector<std::vector<std::vector<cplx>>> codewords(j_layers);
  for (int j = 0; j < j_layers; ++j) {
    const double theta = j * std::numbers::pi / (2.0 * j_layers);
    codewords[j].resize(m);
    for (int msg = 0; msg < m; ++msg) {
      // M-PSK mother point; for M=4 this is the QPSK alphabet (+-1 +-i)/sqrt(2)
      const double phase =
          std::numbers::pi / m + 2.0 * std::numbers::pi * msg / m + theta;
      const cplx value = std::polar(1.0 / std::sqrt(double(n_m)), phase);
      std::vector<cplx> cw(k_d, cplx(0.0, 0.0));
      for (int row : mapping.support(j)) cw[row] = value;
      double energy = 0.0;
      for (const cplx& c : cw) energy += std::norm(c);
      const double scale = 1.0 / std::sqrt(energy);
      for (cplx& c : cw) c *= scale;
      codewords[j][msg] = std::move(cw);
    }
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b)
        if (codewords[j][a] == codewords[j][b])
          throw std::logic_error("build_codebook_set: duplicate codewords in a layer");
  }
  return ScmaCodebookSet(mapping, m, std::move(codewords));
}

inline ScmaCodebookSet ScmaCodebookSet::from_json(const json& j) {
  const int k_d = j.at("K_d").get<int>();
  const int layers = j.at("J").get<int>();
  const int n_m = j.at("N_m").get<int>();
  const int m = j.at("M").get<int>();
  const auto& cw = j.at("codewords");
  if (static_cast<int>(cw.size()) != layers * m)
    throw std::invalid_argument("codebook json: expected J*M codewords");

  std::vector<std::vector<std::vector<cplx>>> codewords(layers);
  std::vector<std::vector<int>> supports(layers);
  for (int layer = 0; layer < layers; ++layer) {
    codewords[layer].resize(m);
    for (int msg = 0; msg < m; ++msg) {
      const auto& vec = cw[layer * m + msg];
      if (static_cast<int>(vec.size()) != k_d)
        throw std::invalid_argument("codebook json: codeword length != K_d");
      std::vector<cplx> c(k_d);
      for (int k = 0; k < k_d; ++k)
        c[k] = cplx(vec[k][0].get<double>(), vec[k][1].get<double>());
      codewords[layer][msg] = std::move(c);
    }
    std::vector<int> sup;
    for (int k = 0; k < k_d; ++k)
      if (codewords[layer][0][k] != cplx(0.0, 0.0)) sup.push_back(k);
    if (static_cast<int>(sup.size()) != n_m)
      throw std::invalid_argument("codebook json: support size != N_m");
    supports[layer] = std::move(sup);
  }
  return ScmaCodebookSet(MappingMatrix(k_d, n_m, std::move(supports)), m,
                         std::move(codewords));
}

/// Big-endian bit block -> codeword index.
inline int block_to_index(const SymbolBlock& bits) {
  int idx = 0;
  for (std::uint8_t b : bits) {
    if (b > 1) throw std::invalid_argument("encode_block: bits must be 0/1");
    idx = (idx << 1) | b;
  }
  return idx;
}

/// Inverse of block_to_index, for exhaustive round-trip checks.
inline SymbolBlock index_to_block(int index, int bit_count) {
  SymbolBlock bits(bit_count);
  for (int i = 0; i < bit_count; ++i)
    bits[i] = static_cast<std::uint8_t>((index >> (bit_count - 1 - i)) & 1);
  return bits;
}

inline const std::vector<cplx>& encode_block(const ScmaCodebookSet& cbs, int layer,
                                             const SymbolBlock& block) {
  if (layer < 0 || layer >= cbs.layer_count())
    throw std::out_of_range("encode_block: layer out of range");
  if (static_cast<int>(block.size()) != cbs.bits_per_block())
    throw std::invalid_argument("encode_block: block length must be log2(M)");
  return cbs.codeword(layer, block_to_index(block));
}

}  // namespace gfscma::scma
