#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "gfscma/harness.hpp"
#include "gfscma/models.hpp"

using namespace gfscma;
using airlink::cplx;

namespace {

airlink::ScenarioConfig desk_config(double p = 0.25) {
  return airlink::ScenarioConfig::homogeneous(12, 6, 2, 8, 4, 4, 4, p);
}

// small enough that spot finite differences stay cheap
airlink::ScenarioConfig tiny_config() {
  return airlink::ScenarioConfig::homogeneous(6, 3, 2, 4, 4, 2, 4, 0.3);
}

models::TrainConfig quick_train(int iterations, std::uint64_t seed = 1) {
  models::TrainConfig tc;
  tc.iterations = iterations;
  tc.batch_size = 16;
  tc.seed = seed;
  return tc;
}

// one desk-scale jointly trained system, shared across tests in this file
const models::AudSystem& desk_joint_system() {
  static const models::AudSystem sys = [] {
    return models::train(models::Variant::data_aided_joint, desk_config(),
                         quick_train(2000, 42));
  }();
  return sys;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace

TEST(PreambleTable, PgnGatesRowsByActivity) {
  auto rng = RandomStream(5);
  const auto table = models::PreambleTable::random_init(4, 6, rng);

  airlink::ActivityVector all_off{std::vector<std::uint8_t>(4, 0)};
  for (const auto& p : models::pgn_forward(table, all_off))
    for (const cplx& v : p) EXPECT_EQ(v, cplx(0.0, 0.0));

  airlink::ActivityVector one_on{std::vector<std::uint8_t>(4, 0)};
  one_on.delta[2] = 1;
  const auto out = models::pgn_forward(table, one_on);
  double energy = 0.0;
  for (const cplx& v : out[2]) energy += std::norm(v);
  EXPECT_NEAR(energy, 1.0, 1e-9);
  for (const cplx& v : out[0]) EXPECT_EQ(v, cplx(0.0, 0.0));
}

TEST(PreambleTable, NormalizationGradientMatchesFiniteDifferences) {
  // scalar probe f = sum_k Re(phat_k) + 2 Im(phat_k) through the row
  // normalization, checked against central differences
  auto rng = RandomStream(6);
  auto table = models::PreambleTable::random_init(3, 5, rng);
  const int row = 1;

  std::vector<double> g_hat(table.row_width());
  for (int k = 0; k < table.k_p(); ++k) {
    g_hat[k] = 1.0;
    g_hat[table.k_p() + k] = 2.0;
  }
  std::vector<double> analytic(table.values().size(), 0.0);
  table.add_normalization_grad(row, g_hat, analytic);

  auto probe = [&](const models::PreambleTable& t) {
    double f = 0.0;
    for (const cplx& v : t.normalized_row(row)) f += v.real() + 2.0 * v.imag();
    return f;
  };
  const double eps = 1e-6;
  for (int i = 0; i < table.row_width(); ++i) {
    const std::size_t idx = static_cast<std::size_t>(row) * table.row_width() + i;
    const double saved = table.values()[idx];
    table.values()[idx] = saved + eps;
    const double fp = probe(table);
    table.values()[idx] = saved - eps;
    const double fm = probe(table);
    table.values()[idx] = saved;
    EXPECT_LT(rel_err(analytic[idx], (fp - fm) / (2 * eps)), 1e-6);
  }
}

TEST(Heads, PreambleAudnShapesAndZeroNetwork) {
  // paper setup: N = 48, K_p = 16 -> input 32, output 48
  const auto spec = nn::make_head_spec(32, 48, nn::Activation::sigmoid);
  nn::ParamStore zero(spec);
  std::vector<cplx> y_p(16, cplx(0.4, -0.7));
  const auto soft = models::audn_preamble_forward(zero, y_p);
  ASSERT_EQ(soft.size(), 48u);
  for (double v : soft) EXPECT_DOUBLE_EQ(v, 0.5);

  auto rng = RandomStream(7);
  auto params = nn::ParamStore::glorot_init(spec, rng);
  EXPECT_EQ(models::audn_preamble_forward(params, y_p),
            models::audn_preamble_forward(params, y_p));
}

TEST(Heads, UaenShapesZeroNetworkAndOrderSensitivity) {
  // paper setup: K_d = 4, N_d = 16 -> input width 128
  const auto spec = nn::make_head_spec(128, 48, nn::Activation::identity);
  EXPECT_EQ(spec.input_width(), 2 * 4 * 16);

  nn::ParamStore zero(spec);
  std::vector<std::vector<cplx>> y_d(16, std::vector<cplx>(4));
  auto rng = RandomStream(8);
  for (auto& block : y_d)
    for (auto& v : block) v = rng.cgaussian();
  const auto alpha = models::uaen_forward(zero, y_d);
  ASSERT_EQ(alpha.size(), 48u);
  for (double v : alpha) EXPECT_DOUBLE_EQ(v, 0.0);

  auto params = nn::ParamStore::glorot_init(spec, rng);
  auto swapped = y_d;
  std::swap(swapped[0], swapped[1]);
  EXPECT_NE(models::uaen_forward(params, y_d), models::uaen_forward(params, swapped));
}

TEST(Heads, DataAidedAudnWidth) {
  // N = 48 plus flattened K_p = 16 preamble -> 48 + 32 = 80
  const auto spec = nn::make_head_spec(80, 48, nn::Activation::sigmoid);
  EXPECT_EQ(spec.input_width(), 80);
  nn::ParamStore zero(spec);
  std::vector<double> alpha(48, 0.3);
  std::vector<cplx> y_p(16, cplx(-0.1, 0.2));
  const auto soft = models::audn_data_aided_forward(zero, alpha, y_p);
  ASSERT_EQ(soft.size(), 48u);
  for (double v : soft) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Graph, FullDataAidedLossGradientMatchesFiniteDifferences) {
  // spot-check the analytic gradient of the complete training objective
  // (PGN normalization -> superposition -> AGC -> UAEN -> AUDN -> BCE)
  const auto scenario = tiny_config();
  models::AudSystem sys =
      models::train(models::Variant::data_aided_joint, scenario, quick_train(0, 3));

  const auto batch = models::make_frame_batch(
      scenario, sys.codebooks, sys.assoc(), 11, 0, 3,
      airlink::snr_to_noise_std(8.0));
  const double lambda = 0.5;

  models::GraphGrads grads;
  models::system_loss(sys, batch, lambda, &grads);

  auto loss_at = [&] {
    return models::system_loss(sys, batch, lambda).total;
  };
  const double eps = 1e-5;

  auto spot_check = [&](std::vector<double>& params, const std::vector<double>& grad,
                        const char* name) {
    auto pick = RandomStream(91);
    for (int probe = 0; probe < 25; ++probe) {
      const std::size_t i = static_cast<std::size_t>(pick.uniform() * params.size());
      const double saved = params[i];
      params[i] = saved + eps;
      const double lp = loss_at();
      params[i] = saved - eps;
      const double lm = loss_at();
      params[i] = saved;
      const double numeric = (lp - lm) / (2 * eps);
      EXPECT_LT(rel_err(grad[i], numeric), 1e-3)
          << name << " index " << i << " analytic " << grad[i] << " numeric "
          << numeric;
    }
  };

  spot_check(sys.table.values(), grads.table, "table");
  spot_check(sys.uaen.values(), grads.uaen.values(), "uaen");
  spot_check(sys.audn.values(), grads.audn.values(), "audn");
}

TEST(Training, DeskLossDropsAfterTwoThousandIterations) {
  const auto& sys = desk_joint_system();
  ASSERT_EQ(sys.loss_log.size(), 2000u);
  EXPECT_LT(sys.loss_log.back(), sys.loss_log.front());
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 50; ++i) {
    head += sys.loss_log[i];
    tail += sys.loss_log[sys.loss_log.size() - 50 + i];
  }
  EXPECT_LT(tail, 0.5 * head);
}

TEST(Training, JointVariantMovesThePreambleTable) {
  const auto& sys = desk_joint_system();
  auto init_stream = RandomStream::derive(42, StreamPurpose::table_init);
  const auto initial =
      models::PreambleTable::random_init(12, 8, init_stream);
  double max_delta = 0.0;
  for (std::size_t i = 0; i < initial.values().size(); ++i)
    max_delta = std::max(max_delta,
                         std::abs(initial.values()[i] - sys.table.values()[i]));
  EXPECT_GT(max_delta, 1e-6);
}

TEST(Training, IndependentVariantNeverTouchesTheFrozenSet) {
  const auto frozen = models::gen_independent_preambles(
      12, 8, models::PreambleKind::gaussian, 9, 6);
  const auto sys = models::train(models::Variant::data_aided_independent,
                                 desk_config(), quick_train(120, 5), &frozen);
  EXPECT_EQ(sys.frozen.preambles, frozen.preambles);
  EXPECT_EQ(sys.frozen.assoc, frozen.assoc);
  EXPECT_EQ(models::extract_preambles(sys).preambles, frozen.preambles);
}

TEST(Training, IndependentVariantRequiresFrozenSet) {
  EXPECT_THROW(models::train(models::Variant::data_aided_independent, desk_config(),
                             quick_train(1, 1)),
               std::invalid_argument);
}

TEST(Training, DivergenceGuardAborts) {
  auto tc = quick_train(10, 1);
  tc.learning_rate = std::numeric_limits<double>::infinity();
  EXPECT_THROW(
      models::train(models::Variant::data_aided_joint, desk_config(), tc),
      std::runtime_error);
}

TEST(Detect, StrictThresholdAtOneHalf) {
  EXPECT_EQ(models::threshold_activity({0.49, 0.51}, 0.5).delta,
            (std::vector<std::uint8_t>{0, 1}));
  // exact ties break to inactive
  EXPECT_EQ(models::threshold_activity({0.5, 0.5, 0.5}, 0.5).delta,
            (std::vector<std::uint8_t>{0, 0, 0}));
  EXPECT_EQ(models::threshold_activity({1.0, 0.0, 1.0}, 0.5).delta,
            (std::vector<std::uint8_t>{1, 0, 1}));
}

TEST(Detect, RaisingThresholdNeverAddsFalseAlarms) {
  const auto& sys = desk_joint_system();
  const auto cfg = sys.scenario;
  const auto preambles = models::extract_preambles(sys);
  const double sigma = airlink::snr_to_noise_std(10.0);

  long prev_false_alarms = std::numeric_limits<long>::max();
  for (double thr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    long false_alarms = 0;
    for (int t = 0; t < 200; ++t) {
      const auto draws = airlink::sample_frame_draws(cfg, 1234, t);
      const auto frame = airlink::assemble_frame(cfg, preambles, sys.codebooks, draws, sigma);
      const auto est = models::detect(sys, frame, thr);
      for (int n = 0; n < cfg.n_users; ++n)
        if (!draws.delta.delta[n] && est.delta[n]) ++false_alarms;
    }
    EXPECT_LE(false_alarms, prev_false_alarms);
    prev_false_alarms = false_alarms;
  }
}

TEST(Detect, NoSignalFloorMatchesMajorityPredictor)
{
  // at -40 dB the observation carries nothing; a trained system must fall
  // back to the always-majority rate min(p, 1-p)
  const auto& sys = desk_joint_system();
  const auto point = harness::eval_ader(sys, -40.0, 4000, 777);
  const double floor = 0.25;  // min(p, 1-p) at p = 0.25
  EXPECT_NEAR(point.ader, floor, 0.1 * floor);
}

TEST(ExtractPreambles, RowsAreUnitEnergyAndRoundTrip) {
  const auto& sys = desk_joint_system();
  const auto ps = models::extract_preambles(sys);
  EXPECT_NO_THROW(ps.validate());
  ASSERT_EQ(ps.size(), 12);
  for (const auto& p : ps.preambles) {
    double energy = 0.0;
    for (const cplx& v : p) energy += std::norm(v);
    EXPECT_NEAR(energy, 1.0, 1e-9);
  }
  const std::string path = testing::TempDir() + "gfscma_preambles.json";
  ps.save(path);
  const auto restored = airlink::PreambleSet::load(path);
  EXPECT_EQ(restored.preambles, ps.preambles);
  EXPECT_EQ(restored.assoc, ps.assoc);
}

TEST(GenPreambles, GaussianSetsAreUnitEnergyAndSeeded) {
  const auto ps = models::gen_independent_preambles(
      48, 16, models::PreambleKind::gaussian, 21, 6);
  ASSERT_EQ(ps.size(), 48);
  for (const auto& p : ps.preambles) {
    double energy = 0.0;
    for (const cplx& v : p) energy += std::norm(v);
    EXPECT_NEAR(energy, 1.0, 1e-12);
  }
  const auto again = models::gen_independent_preambles(
      48, 16, models::PreambleKind::gaussian, 21, 6);
  EXPECT_EQ(ps.preambles, again.preambles);
  const auto other = models::gen_independent_preambles(
      48, 16, models::PreambleKind::gaussian, 22, 6);
  EXPECT_NE(ps.preambles, other.preambles);
}

TEST(GenPreambles, QpskSymbolsHaveConstantModulus) {
  const auto ps =
      models::gen_independent_preambles(8, 16, models::PreambleKind::qpsk, 4, 4);
  const double amp = 1.0 / 4.0;  // 1/sqrt(16)
  for (const auto& p : ps.preambles)
    for (const cplx& v : p) EXPECT_NEAR(std::abs(v), amp, 1e-12);
}

TEST(GenPreambles, ZadoffChuShiftsAreOrthogonal) {
  // same root, shifts 0 and 1 at prime K_p = 13
  const auto ps = models::gen_independent_preambles(
      13, 13, models::PreambleKind::zadoff_chu_family, 1, 1);
  EXPECT_NEAR(xcorr::pair_xcorr(ps.preambles[0], ps.preambles[1]), 0.0, 1e-12);
  EXPECT_NEAR(xcorr::pair_xcorr(ps.preambles[3], ps.preambles[9]), 0.0, 1e-12);
  // and every sequence keeps unit energy
  for (const auto& p : ps.preambles) {
    double energy = 0.0;
    for (const cplx& v : p) energy += std::norm(v);
    EXPECT_NEAR(energy, 1.0, 1e-12);
  }
}

TEST(GenPreambles, ZadoffChuRequiresPrimeLength) {
  EXPECT_THROW(models::gen_independent_preambles(
                   4, 12, models::PreambleKind::zadoff_chu_family, 1, 2),
               std::invalid_argument);
  EXPECT_THROW(models::gen_independent_preambles(
                   200, 13, models::PreambleKind::zadoff_chu_family, 1, 2),
               std::invalid_argument);
}

TEST(Checkpoint, RoundTripPreservesBehaviourBitExactly) {
  const auto& sys = desk_joint_system();
  const std::string dir = testing::TempDir() + "gfscma_ckpt";
  models::save_checkpoint(sys, dir);
  const auto restored = models::load_checkpoint(dir);

  EXPECT_EQ(restored.variant, sys.variant);
  EXPECT_EQ(restored.audn.values(), sys.audn.values());
  EXPECT_EQ(restored.uaen.values(), sys.uaen.values());
  EXPECT_EQ(restored.table.values(), sys.table.values());

  const auto draws = airlink::sample_frame_draws(sys.scenario, 5, 0);
  const auto frame = airlink::assemble_frame(
      sys.scenario, models::extract_preambles(sys), sys.codebooks, draws,
      airlink::snr_to_noise_std(10.0));
  EXPECT_EQ(models::soft_detect(sys, frame), models::soft_detect(restored, frame));
}

TEST(Checkpoint, IndependentVariantKeepsFrozenSet) {
  const auto frozen = models::gen_independent_preambles(
      12, 8, models::PreambleKind::gaussian, 77, 6);
  const auto sys = models::train(models::Variant::data_aided_independent,
                                 desk_config(), quick_train(30, 6), &frozen);
  const std::string dir = testing::TempDir() + "gfscma_ckpt_indep";
  models::save_checkpoint(sys, dir);
  const auto restored = models::load_checkpoint(dir);
  EXPECT_EQ(restored.frozen.preambles, frozen.preambles);
  EXPECT_EQ(restored.frozen.assoc, frozen.assoc);
}
