#include <gtest/gtest.h>

#include <complex>
#include <set>
#include <vector>

#include "gfscma/scma.hpp"

using namespace gfscma;
using scma::cplx;

TEST(MappingMatrix, EnumeratesAllPairsForPaperShape) {
  const auto m = scma::build_mapping_matrix(4, 6, 2);
  ASSERT_EQ(m.resource_count(), 4);
  ASSERT_EQ(m.layer_count(), 6);
  ASSERT_EQ(m.nonzeros_per_layer(), 2);

  // C(4,2) = 6 forces the full enumeration of 2-subsets, lexicographic
  const std::vector<std::vector<int>> expected = {{0, 1}, {0, 2}, {0, 3},
                                                  {1, 2}, {1, 3}, {2, 3}};
  for (int j = 0; j < 6; ++j) EXPECT_EQ(m.support(j), expected[j]);

  for (int row = 0; row < 4; ++row) EXPECT_EQ(m.row_weight(row), 3);

  std::set<std::vector<int>> distinct;
  for (int j = 0; j < 6; ++j) distinct.insert(m.support(j));
  EXPECT_EQ(distinct.size(), 6u);
}

TEST(MappingMatrix, RejectsOverCapacity) {
  EXPECT_THROW(scma::build_mapping_matrix(4, 7, 2), std::invalid_argument);
}

TEST(MappingMatrix, RejectsDenseLayers) {
  EXPECT_THROW(scma::build_mapping_matrix(4, 2, 4), std::invalid_argument);
  EXPECT_THROW(scma::build_mapping_matrix(4, 2, 5), std::invalid_argument);
}

TEST(MappingMatrix, SingletonSupportsAreUnitColumns) {
  const auto m = scma::build_mapping_matrix(3, 3, 1);
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(m.support(j), std::vector<int>{j});
    EXPECT_EQ(m.row_weight(j), 1);
  }
}

TEST(MappingMatrix, RowWeightSumEqualsLayersTimesNonzeros) {
  for (auto [kd, j, nm] : {std::tuple{4, 6, 2}, {5, 10, 2}, {6, 15, 4}}) {
    const auto m = scma::build_mapping_matrix(kd, j, nm);
    int total = 0;
    for (int row = 0; row < kd; ++row) total += m.row_weight(row);
    EXPECT_EQ(total, j * nm);
  }
}

TEST(CodebookSet, SparsityMatchesMappingColumns) {
  const auto mapping = scma::build_mapping_matrix(4, 6, 2);
  const auto cbs = scma::build_codebook_set(mapping, 4);
  for (int j = 0; j < 6; ++j) {
    for (int m = 0; m < 4; ++m) {
      const auto& cw = cbs.codeword(j, m);
      std::vector<int> support;
      for (int k = 0; k < 4; ++k)
        if (cw[k] != cplx(0.0, 0.0)) support.push_back(k);
      EXPECT_EQ(support, mapping.support(j)) << "layer " << j << " message " << m;
    }
  }
}

TEST(CodebookSet, UnitEnergyCodewords) {
  const auto cbs = scma::build_codebook_set(scma::build_mapping_matrix(4, 6, 2), 4);
  for (int j = 0; j < 6; ++j) {
    for (int m = 0; m < 4; ++m) {
      double energy = 0.0;
      for (const cplx& c : cbs.codeword(j, m)) energy += std::norm(c);
      EXPECT_NEAR(energy, 1.0, 1e-12);
    }
  }
}

TEST(CodebookSet, CodewordsWithinLayerDistinct) {
  const auto cbs = scma::build_codebook_set(scma::build_mapping_matrix(4, 6, 2), 4);
  for (int j = 0; j < 6; ++j)
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        EXPECT_NE(cbs.codeword(j, a), cbs.codeword(j, b));
}

TEST(CodebookSet, RejectsNonPowerOfTwoSize) {
  const auto mapping = scma::build_mapping_matrix(4, 6, 2);
  EXPECT_THROW(scma::build_codebook_set(mapping, 3), std::invalid_argument);
  EXPECT_THROW(scma::build_codebook_set(mapping, 6), std::invalid_argument);
}

TEST(EncodeBlock, BigEndianIndexing) {
  const auto cbs = scma::build_codebook_set(scma::build_mapping_matrix(4, 6, 2), 4);
  EXPECT_EQ(scma::encode_block(cbs, 0, {0, 0}), cbs.codeword(0, 0));
  EXPECT_EQ(scma::encode_block(cbs, 5, {1, 1}), cbs.codeword(5, 3));
  EXPECT_EQ(scma::encode_block(cbs, 2, {1, 0}), cbs.codeword(2, 2));
}

TEST(EncodeBlock, ExhaustiveRoundTrip) {
  const auto cbs = scma::build_codebook_set(scma::build_mapping_matrix(4, 6, 2), 4);
  for (int j = 0; j < cbs.layer_count(); ++j) {
    for (int m = 0; m < cbs.codebook_size(); ++m) {
      const auto bits = scma::index_to_block(m, cbs.bits_per_block());
      EXPECT_EQ(scma::encode_block(cbs, j, bits), cbs.codeword(j, m));
    }
  }
}

TEST(EncodeBlock, RejectsBadInput) {
  const auto cbs = scma::build_codebook_set(scma::build_mapping_matrix(4, 6, 2), 4);
  EXPECT_THROW(scma::encode_block(cbs, 6, {0, 0}), std::out_of_range);
  EXPECT_THROW(scma::encode_block(cbs, -1, {0, 0}), std::out_of_range);
  EXPECT_THROW(scma::encode_block(cbs, 0, {0}), std::invalid_argument);
  EXPECT_THROW(scma::encode_block(cbs, 0, {0, 2}), std::invalid_argument);
}

TEST(CodebookSet, JsonRoundTrip) {
  const auto cbs = scma::build_codebook_set(scma::build_mapping_matrix(4, 6, 2), 4);
  const auto restored = scma::ScmaCodebookSet::from_json(cbs.to_json());
  ASSERT_EQ(restored.layer_count(), cbs.layer_count());
  ASSERT_EQ(restored.codebook_size(), cbs.codebook_size());
  for (int j = 0; j < 6; ++j) {
    EXPECT_EQ(restored.mapping().support(j), cbs.mapping().support(j));
    for (int m = 0; m < 4; ++m) EXPECT_EQ(restored.codeword(j, m), cbs.codeword(j, m));
  }
}
