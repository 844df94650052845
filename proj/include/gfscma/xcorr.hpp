#pragma once

#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfscma/airlink.hpp"

namespace gfscma::xcorr {

using cplx = std::complex<double>;
using json = nlohmann::json;

/// |<a, b>| with the conjugated inner product sum a_i * conj(b_i).
inline double pair_xcorr(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("pair_xcorr: length mismatch");
  cplx acc(0.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * std::conj(b[i]);
  return std::abs(acc);
}

/// Preambles regrouped by associated codebook: member (j, l) is the l-th
/// preamble (in original index order) whose assoc points at codebook j. Works
/// for both round-robin and block association.
struct CbIndex {
  int j_count = 0;
  int l_count = 0;
  std::vector<std::vector<int>> members;  // [j][l] -> preamble index

  const std::vector<cplx>& preamble(const airlink::PreambleSet& set, int j,
                                    int l) const {
    return set.preambles[members.at(j).at(l)];
  }
};

inline CbIndex group_by_codebook(const airlink::PreambleSet& set) {
  CbIndex idx;
  idx.j_count = set.j_codebooks;
  idx.members.assign(set.j_codebooks, {});
  for (int n = 0; n < set.size(); ++n) idx.members[set.assoc[n]].push_back(n);
  idx.l_count = set.size() / set.j_codebooks;
  for (const auto& g : idx.members)
    if (static_cast<int>(g.size()) != idx.l_count)
      throw std::invalid_argument(
          "xcorr: association is not balanced (need L preambles per codebook)");
  return idx;
}

/// Average cross-correlation of preamble (j, l) against every other preamble:
/// (1/(N-1)) * (sum over all (k, m) of |<p_l^j, p_m^k>| minus the self term).
inline double avg_xcorr(const airlink::PreambleSet& set, const CbIndex& idx, int j,
                        int l) {
  const int n_total = set.size();
  const auto& p = idx.preamble(set, j, l);
  double sum = 0.0;
  for (int k = 0; k < idx.j_count; ++k)
    for (int m = 0; m < idx.l_count; ++m) sum += pair_xcorr(p, idx.preamble(set, k, m));
  sum -= pair_xcorr(p, p);
  return sum / (n_total - 1);
}

/// Intra-codebook average: (1/(L-1)) * sum over m != l of |<p_l^j, p_m^j>|.
inline double intra_cb(const airlink::PreambleSet& set, const CbIndex& idx, int j,
                       int l) {
  if (idx.l_count < 2)
    throw std::invalid_argument("intra_cb: undefined for L = 1");
  const auto& p = idx.preamble(set, j, l);
  double sum = 0.0;
  for (int m = 0; m < idx.l_count; ++m) {
    if (m == l) continue;
    sum += pair_xcorr(p, idx.preamble(set, j, m));
  }
  return sum / (idx.l_count - 1);
}

/// Inter-codebook average: (1/(N-L)) * (full double sum minus the own-codebook
/// sum). The own-codebook sum carries the self term, so it is removed with it.
inline double inter_cb(const airlink::PreambleSet& set, const CbIndex& idx, int j,
                       int l) {
  const int n_total = set.size();
  if (n_total <= idx.l_count)
    throw std::invalid_argument("inter_cb: undefined for N = L");
  const auto& p = idx.preamble(set, j, l);
  double full = 0.0;
  for (int k = 0; k < idx.j_count; ++k)
    for (int m = 0; m < idx.l_count; ++m) full += pair_xcorr(p, idx.preamble(set, k, m));
  double own = 0.0;
  for (int m = 0; m < idx.l_count; ++m) own += pair_xcorr(p, idx.preamble(set, j, m));
  return (full - own) / (n_total - idx.l_count);
}

inline double avg_xcorr(const airlink::PreambleSet& set, int j, int l) {
  return avg_xcorr(set, group_by_codebook(set), j, l);
}
inline double intra_cb(const airlink::PreambleSet& set, int j, int l) {
  return intra_cb(set, group_by_codebook(set), j, l);
}
inline double inter_cb(const airlink::PreambleSet& set, int j, int l) {
  return inter_cb(set, group_by_codebook(set), j, l);
}

enum class GammaKind { finite, infinite, undefined };

struct XcorrReport {
  struct Row {
    int n;  // block index L*j + l
    int j;
    int l;
    double avg;
    double intra;
    double inter;
  };
  std::vector<Row> rows;
  double r_intra = 0.0;  // mean of intra over all (j, l)
  double r_inter = 0.0;  // mean of inter over all (j, l)
  GammaKind kind = GammaKind::finite;
  double gamma = 0.0;    // +inf when r_inter == 0 < r_intra, NaN when undefined
};

inline XcorrReport analyze(const airlink::PreambleSet& set) {
  const CbIndex idx = group_by_codebook(set);
  XcorrReport rep;
  for (int j = 0; j < idx.j_count; ++j) {
    for (int l = 0; l < idx.l_count; ++l) {
      XcorrReport::Row row;
      row.n = idx.l_count * j + l;
      row.j = j;
      row.l = l;
      row.avg = avg_xcorr(set, idx, j, l);
      row.intra = intra_cb(set, idx, j, l);
      row.inter = inter_cb(set, idx, j, l);
      rep.rows.push_back(row);
      rep.r_intra += row.intra;
      rep.r_inter += row.inter;
    }
  }
  const double count = static_cast<double>(idx.j_count) * idx.l_count;
  rep.r_intra /= count;
  rep.r_inter /= count;
  if (rep.r_inter > 0.0) {
    rep.kind = GammaKind::finite;
    rep.gamma = rep.r_intra / rep.r_inter;
  } else if (rep.r_intra > 0.0) {
    rep.kind = GammaKind::infinite;
    rep.gamma = std::numeric_limits<double>::infinity();
  } else {
    // An orthonormal set: maximally good, neither homogeneous nor heterogeneous.
    rep.kind = GammaKind::undefined;
    rep.gamma = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

inline double heterogeneity(const airlink::PreambleSet& set) {
  return analyze(set).gamma;
}

// --- report output ---------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, len);
}

inline void write_csv(const XcorrReport& rep, std::ostream& out,
                      const std::string& variant_prefix = "") {
  for (const auto& row : rep.rows) {
    if (!variant_prefix.empty()) out << variant_prefix << ",";
    out << row.n << "," << row.j << "," << row.l << "," << format_double(row.avg)
        << "," << format_double(row.intra) << "," << format_double(row.inter)
        << "\n";
  }
}

inline void write_csv_file(const XcorrReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "n,j,l,avg_xcorr,intra,inter\n";
  write_csv(rep, out);
}

inline json summary_json(const XcorrReport& rep) {
  json j{{"R_intra", rep.r_intra}, {"R_inter", rep.r_inter}};
  switch (rep.kind) {
    case GammaKind::finite:
      j["gamma"] = rep.gamma;
      break;
    case GammaKind::infinite:
      j["gamma"] = "inf";
      break;
    case GammaKind::undefined:
      j["gamma"] = nullptr;
      break;
  }
  return j;
}

}  // namespace gfscma::xcorr
