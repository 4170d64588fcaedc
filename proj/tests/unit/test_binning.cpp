#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "coordsim/binning.hpp"
#include "test_support.hpp"

using namespace coordsim;
using namespace coordsim::binning;
using prob::JointPMF;
using prob::Rng;
namespace ct = coordsim::testing;

namespace {

double seq_prob(const JointPMF& joint, const Symbols& a, const Symbols& b) {
  const std::size_t qb = joint.axes()[1].size;
  double p = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) p *= joint[a[i] * qb + b[i]];
  return p;
}

// Exhaustive MAP over every sequence with the given bin, first maximum in
// lexicographic order.
Symbols brute_map(std::uint32_t bin, const Symbols& side, const RandomBinning& binning, const JointPMF& joint) {
  Symbols best(binning.n, 0);
  double best_p = -1.0;
  for (std::size_t idx = 0; idx < binning.map.size(); ++idx) {
    if (binning.map[idx] != bin) continue;
    const auto a = sequence_at(idx, binning.alphabet, binning.n);
    const double p = seq_prob(joint, a, side);
    if (p > best_p * (1 + 1e-9)) {
      best_p = p;
      best = a;
    }
  }
  return best;
}

// D(P_{A^n K} || P_{A^n} x Unif) straight from the definition.
double brute_extraction_kl(const RandomBinning& binning, const JointPMF& joint) {
  const std::size_t qa = joint.axes()[0].size, qb = joint.axes()[1].size;
  const std::size_t n = binning.n;
  const std::size_t sa = state_count(qa, n), sb = state_count(qb, n);
  double kl = 0.0;
  for (std::size_t ai = 0; ai < sa; ++ai) {
    const auto a = sequence_at(ai, qa, n);
    std::map<std::uint32_t, double> pk;
    double pa = 0.0;
    for (std::size_t bi = 0; bi < sb; ++bi) {
      const double p = seq_prob(joint, a, sequence_at(bi, qb, n));
      pk[binning.map[bi]] += p;
      pa += p;
    }
    for (const auto& [k, p] : pk)
      if (p > 0) kl += p * std::log2(p / (pa / static_cast<double>(binning.bins)));
  }
  return kl;
}

Symbols random_seq(std::size_t n, std::size_t q, Rng& rng) {
  Symbols s(n);
  for (auto& v : s) v = static_cast<std::uint32_t>(rng.below(q));
  return s;
}

const JointPMF kPerfect({{"A", 2}, {"B", 2}}, {0.5, 0.0, 0.0, 0.5});

}  // namespace

TEST(Sequences, CountIndexAndCap) {
  EXPECT_EQ(state_count(2, 10), 1024u);
  EXPECT_EQ(state_count(3, 0), 1u);
  EXPECT_THROW(state_count(2, 15), BinningError);
  EXPECT_EQ(sequence_at(5, 2, 3), (Symbols{1, 0, 1}));
  for (std::size_t i = 0; i < 81; ++i) EXPECT_EQ(sequence_index(sequence_at(i, 3, 4), 3), i);
}

TEST(RandomBinning, BinCountAndMembership) {
  Rng rng(1);
  const auto b = RandomBinning::draw(10, 2, 0.3, rng);
  EXPECT_EQ(b.bins, 8u);
  ASSERT_EQ(b.map.size(), 1024u);
  std::size_t total = 0;
  for (std::uint32_t bin = 1; bin <= b.bins; ++bin) {
    for (auto idx : b.members[bin - 1]) EXPECT_EQ(b.map[idx], bin);
    total += b.members[bin - 1].size();
  }
  EXPECT_EQ(total, 1024u);
  for (auto m : b.map) {
    EXPECT_GE(m, 1u);
    EXPECT_LE(m, 8u);
  }
  EXPECT_EQ(RandomBinning::draw(4, 2, 0.0, rng).bins, 1u);
  EXPECT_EQ(RandomBinning::draw(4, 2, 0.25, rng).bins, 2u);
  EXPECT_THROW(RandomBinning::draw(4, 2, -0.1, rng), BinningError);
}

TEST(SwDecode, IdentityBinningIsAlwaysRight) {
  Rng rng(2);
  const auto joint = dsbs(0.3);
  const auto b = RandomBinning::identity(6, 2);
  for (int t = 0; t < 200; ++t) {
    const auto a = random_seq(6, 2, rng);
    const auto side = random_seq(6, 2, rng);
    EXPECT_EQ(sw_decode(b.bin_of(a), side, b, joint).estimate, a);
  }
}

TEST(SwDecode, PerfectSideInformationAtAnyRate) {
  Rng rng(3);
  for (double rate : {0.0, 0.1, 0.5}) {
    const auto b = RandomBinning::draw(8, 2, rate, rng);
    for (int t = 0; t < 100; ++t) {
      const auto a = random_seq(8, 2, rng);
      EXPECT_EQ(sw_decode(b.bin_of(a), a, b, kPerfect).estimate, a);
    }
    EXPECT_EQ(sw_error_rate(b, kPerfect, 100, rng).error_rate, 0.0);
  }
}

TEST(SwDecode, MatchesExhaustiveMap) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto joint = ct::random_joint({{"A", 3}, {"B", 2}}, rng);
    const auto b = RandomBinning::draw(5, 3, 0.8, rng);
    const auto a = random_seq(5, 3, rng);
    const auto side = random_seq(5, 2, rng);
    const auto bin = b.bin_of(a);
    EXPECT_EQ(sw_decode(bin, side, b, joint).estimate, brute_map(bin, side, b, joint));
  }
}

TEST(SwDecode, TiesGoToLexicographicallySmallest) {
  Rng rng(5);
  const auto joint = JointPMF::uniform({{"A", 2}, {"B", 2}});
  const auto b = RandomBinning::draw(6, 2, 0.5, rng);
  for (std::uint32_t bin = 1; bin <= b.bins; ++bin) {
    if (b.members[bin - 1].empty()) continue;
    const auto r = sw_decode(bin, Symbols(6, 1), b, joint);
    EXPECT_EQ(r.estimate, sequence_at(b.members[bin - 1].front(), 2, 6));
  }
}

TEST(SwDecode, EmptyBinIsFlagged) {
  RandomBinning b = RandomBinning::identity(2, 2);
  b.bins = 5;
  b.members.resize(5);
  const auto r = sw_decode(5, Symbols{0, 1}, b, dsbs(0.1));
  EXPECT_TRUE(r.empty_bin);
  EXPECT_EQ(r.estimate, (Symbols{0, 0}));
  EXPECT_THROW(sw_decode(6, Symbols{0, 1}, b, dsbs(0.1)), BinningError);
}

TEST(SwDecode, Deterministic) {
  Rng r1(6), r2(6);
  const auto b1 = RandomBinning::draw(8, 2, 0.4, r1);
  const auto b2 = RandomBinning::draw(8, 2, 0.4, r2);
  EXPECT_EQ(b1.map, b2.map);
  Rng s1(7), s2(7);
  EXPECT_EQ(sw_error_rate(b1, dsbs(0.1), 200, s1).error_rate, sw_error_rate(b2, dsbs(0.1), 200, s2).error_rate);
}

TEST(Extraction, SingleBinHasZeroDivergence) {
  Rng rng(8);
  const auto joint = ct::random_joint({{"A", 2}, {"B", 3}}, rng);
  EXPECT_EQ(extraction_kl(RandomBinning::draw(4, 3, 0.0, rng), joint), 0.0);
}

TEST(Extraction, IdentityBinningClosedForm) {
  Rng rng(9);
  for (int t = 0; t < 5; ++t) {
    const auto joint = ct::random_joint({{"A", 2}, {"B", 2}}, rng);
    const std::size_t n = 6;
    const double expected =
        static_cast<double>(n) * (prob::mutual_information(joint, {"A"}, {"B"}) + 1.0 -
                                  prob::entropy(prob::marginalize(joint, {"B"})));
    EXPECT_NEAR(extraction_kl(RandomBinning::identity(n, 2), joint), expected, 1e-10);
  }
}

TEST(Extraction, MatchesDefinition) {
  Rng rng(10);
  for (int t = 0; t < 10; ++t) {
    const auto joint = ct::random_joint({{"A", 3}, {"B", 2}}, rng);
    const auto b = RandomBinning::draw(4, 2, 0.5, rng);
    const double kl = extraction_kl(b, joint);
    EXPECT_NEAR(kl, brute_extraction_kl(b, joint), 1e-12);
    EXPECT_GE(kl, 0.0);
  }
}

TEST(Extraction, IndependentUniformSourceGetsCloserToUniform) {
  const JointPMF indep({{"A", 2}, {"B", 2}}, {0.3, 0.3, 0.2, 0.2});
  double last = std::numeric_limits<double>::infinity();
  for (std::size_t n : {4u, 8u, 12u}) {
    Rng rng(11);
    double mean = 0.0;
    for (int t = 0; t < 40; ++t) mean += extraction_kl(RandomBinning::draw(n, 2, 0.3, rng), indep);
    mean /= 40;
    EXPECT_LT(mean, last) << "n=" << n;
    last = mean;
  }
}

TEST(Regimes, SlepianWolfAboveVersusBelowThreshold) {
  RegimeSweep sweep;
  sweep.n_list = {10};
  sweep.rates = {0.3, 0.8};
  sweep.replicates = 30;
  sweep.draws = 200;
  sweep.seed = 12;
  const auto rows = verify_lemma_regimes(dsbs(0.1), sweep);
  ASSERT_EQ(rows.size(), 4u);
  const auto& below = rows[0];
  const auto& above = rows[1];
  ASSERT_EQ(below.lemma, Lemma::SlepianWolf);
  EXPECT_EQ(below.rate, 0.3);
  std::size_t lower = 0;
  for (std::size_t r = 0; r < sweep.replicates; ++r) lower += above.per_replicate[r] < below.per_replicate[r];
  EXPECT_GE(lower, 28u);
  EXPECT_LT(above.error_rate, below.error_rate);
  EXPECT_GT(below.std_error, 0.0);
}

TEST(Regimes, DeterministicAcrossRuns) {
  RegimeSweep sweep;
  sweep.n_list = {4, 6};
  sweep.rates = {0.5};
  sweep.replicates = 10;
  sweep.draws = 50;
  const auto a = verify_lemma_regimes(dsbs(0.2), sweep);
  const auto b = verify_lemma_regimes(dsbs(0.2), sweep);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].per_replicate, b[i].per_replicate);
}

TEST(Regimes, ErrorFallsWithBlockLengthAboveThreshold) {
  RegimeSweep sweep;
  sweep.n_list = {4, 6, 8, 10, 12};
  sweep.rates = {0.8};
  sweep.replicates = 20;
  sweep.draws = 200;
  sweep.seed = 13;
  const auto rows = verify_lemma_regimes(dsbs(0.1), sweep);
  std::vector<double> ns, errs;
  for (const auto& r : rows)
    if (r.lemma == Lemma::SlepianWolf) {
      ns.push_back(static_cast<double>(r.n));
      errs.push_back(r.error_rate);
    }
  EXPECT_LE(spearman(ns, errs), 0.0);
}

TEST(Regimes, ConstantSideInformationThresholdIsSourceEntropy) {
  // With a useless B, decoding needs R above H(A) = 1.
  const JointPMF joint({{"A", 2}, {"B", 1}}, {0.5, 0.5});
  RegimeSweep sweep;
  sweep.n_list = {8};
  sweep.rates = {0.5, 1.5};
  sweep.replicates = 10;
  sweep.draws = 200;
  const auto rows = verify_lemma_regimes(joint, sweep);
  EXPECT_GT(rows[0].error_rate, 0.9);
  EXPECT_LT(rows[1].error_rate, 0.1);
}

TEST(Spearman, KnownValues) {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> up = {10, 20, 30, 40};
  const std::vector<double> down = {4, 3, 2, 1};
  EXPECT_NEAR(spearman(x, up), 1.0, 1e-15);
  EXPECT_NEAR(spearman(x, down), -1.0, 1e-15);
  const std::vector<double> tied = {1, 2, 2, 3};
  EXPECT_NEAR(spearman(tied, x), 4.5 / std::sqrt(22.5), 1e-15);
  EXPECT_EQ(spearman(x, std::vector<double>(4, 7.0)), 0.0);
  EXPECT_THROW(spearman(x, std::vector<double>{1.0}), BinningError);
}

TEST(Dsbs, Law) {
  const auto j = dsbs(0.1);
  EXPECT_NEAR(prob::conditional_entropy(j, {"A"}, {"B"}), ct::h2(0.1), 1e-14);
  EXPECT_THROW(dsbs(1.5), BinningError);
}
