#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "coordsim/codec.hpp"
#include "coordsim/index_sets.hpp"
#include "test_support.hpp"

using namespace coordsim;
using namespace coordsim::polar;
using prob::ConditionalPMF;
using prob::JointPMF;
namespace ct = coordsim::testing;

namespace {

PolarizedEntropyProfile synthetic(std::size_t n, std::initializer_list<std::vector<double>> families) {
  PolarizedEntropyProfile p;
  p.n = n;
  p.samples = 1;
  std::size_t f = 0;
  for (const auto& fam : families) {
    p.family[f].mean = fam;
    p.family[f].std_error.assign(n, 0.0);
    ++f;
  }
  return p;
}

// delta = 2^(-8^0.25) ~ 0.31, so 0.5 is neither low nor very high.
const PolarParams kSmall{8, 0.25, 1};

PolarizedEntropyProfile reference_profile() {
  return synthetic(8, {
                          {1, 1, 1, 1, 0.5, 1, 0, 0},  // H(S_j | S^j-1)
                          {1, 1, 0, 0, 0.5, 0, 0.5, 0},  // H(S_j | S^j-1 Y)
                          {1, 1, 0, 0, 0, 0, 1, 0},  // H(Z_j | Z^j-1 X U)
                          {1, 1, 1, 0, 0, 0, 0, 0},  // H(Z_j | Z^j-1 X)
                          {1, 0, 0, 0, 0, 1, 1, 0},  // H(Z_j | Z^j-1 U X Y V)
                      });
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("coordsim_test_" + name + "_" + std::to_string(::getpid()));
}

}  // namespace

TEST(IndexSets, ThresholdingOfReferenceProfile) {
  const auto s = build_index_sets(reference_profile(), kSmall);
  EXPECT_EQ(s.a1, (IndexSet{0, 1}));
  EXPECT_EQ(s.a2, (IndexSet{2, 3, 5}));
  EXPECT_EQ(s.a3, (IndexSet{4, 6}));
  EXPECT_EQ(s.a4, (IndexSet{7}));
  EXPECT_EQ(s.b1, (IndexSet{0, 1, 6}));
  EXPECT_TRUE(s.b2.empty());
  EXPECT_EQ(s.b3, (IndexSet{2}));
  EXPECT_EQ(s.b4, (IndexSet{3, 4, 5, 7}));
  EXPECT_EQ(s.bp1, (IndexSet{0, 6}));
  EXPECT_EQ(s.b1_private(), (IndexSet{1}));
  EXPECT_EQ(s.ap3, (IndexSet{2, 3}));
  EXPECT_EQ(s.bp3, (IndexSet{5}));
  EXPECT_TRUE(s.ap2.empty());
  EXPECT_EQ(s.b2_reassigned, 1u);
  EXPECT_EQ(s.bp1_violations, 1u);
  EXPECT_EQ(s.nesting_violations, 1u);
  EXPECT_EQ(validate_sets(s), "");
}

TEST(IndexSets, CapacityShortfallReportsSizes) {
  auto p = reference_profile();
  p.family[kSGivenPastY].mean[5] = 1.0;  // moves 5 from A2 to A1
  try {
    build_index_sets(p, kSmall);
    FAIL();
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.a2(), 2u);
    EXPECT_EQ(e.a3(), 2u);
    EXPECT_EQ(e.b3(), 1u);
  }
}

TEST(IndexSets, ValidatorCatchesBrokenPartitions) {
  auto s = build_index_sets(reference_profile(), kSmall);
  auto broken = s;
  broken.a4.push_back(0);
  EXPECT_NE(validate_sets(broken), "");
  broken = s;
  broken.bp3 = {2};
  EXPECT_NE(validate_sets(broken), "");
  broken = s;
  broken.bp1.push_back(3);
  EXPECT_NE(validate_sets(broken), "");
}

TEST(IndexSets, NoiselessChannelHasNoEquivocationSets) {
  const auto m = ct::bundled_model("noiseless_w_eq_u");
  const PolarParams params{64, 0.25, 2000};
  const auto c = construct(m, params, 1);
  EXPECT_TRUE(c.sets.a1.empty());
  EXPECT_TRUE(c.sets.a3.empty());
  EXPECT_EQ(validate_sets(c.sets), "");
}

TEST(IndexSets, UselessChannelWithInformativeAuxiliaryIsOverCapacity) {
  const SourceModel m(JointPMF::uniform({{"U", 2}}), JointPMF::uniform({{"X", 2}}),
                      ConditionalPMF({{"X", 2}}, {{"Y", 2}}, {0.5, 0.5, 0.5, 0.5}),
                      ConditionalPMF({{"X", 2}, {"U", 2}}, {{"W", 2}}, {1, 0, 0, 1, 1, 0, 0, 1}),
                      ConditionalPMF({{"W", 2}, {"Y", 2}}, {{"V", 2}}, {1, 0, 1, 0, 0, 1, 0, 1}));
  EXPECT_THROW(construct(m, {64, 0.25, 500}, 1), CapacityError);
}

TEST(IndexSets, PartitionInvariantsOnBundledModel) {
  const auto m = ct::bundled_model("bsc_constant_w");
  for (std::size_t n : {64u, 256u}) {
    const auto c = construct(m, {n, 0.25, 2000}, 3);
    EXPECT_EQ(validate_sets(c.sets), "") << "n=" << n;
    EXPECT_EQ(c.sets.a1.size() + c.sets.a2.size() + c.sets.a3.size() + c.sets.a4.size(), n);
    // W is constant, so every Z index is frozen.
    EXPECT_EQ(c.sets.b4.size(), n);
  }
}

TEST(RateReport, MatchesCommonRandomnessDraw) {
  const auto s = build_index_sets(reference_profile(), kSmall);
  prob::Rng rng(1);
  for (std::size_t k : {2u, 3u, 8u, 50u}) {
    const auto r = rate_report(s, k);
    const auto cr = codec::CommonRandomness::draw(s, k, rng);
    EXPECT_NEAR(r.common_randomness * static_cast<double>(k * s.n), static_cast<double>(cr.bit_count()), 1e-9);
    EXPECT_NEAR(r.side_channel * static_cast<double>(k * s.n), static_cast<double>(s.a3.size() + s.b3.size()), 1e-9);
    EXPECT_NEAR(r.local_randomness * static_cast<double>(k * s.n),
                static_cast<double>(s.a2.size() + (k - 1) * s.ap2.size()), 1e-9);
  }
}

TEST(RateReport, ApproachesLimitAsOneOverK) {
  const auto s = build_index_sets(reference_profile(), kSmall);
  const double gap = static_cast<double>(s.a3.size() + s.b3.size() - s.bp1.size()) / static_cast<double>(s.n);
  double last_side = 1.0;
  for (std::size_t k = 1; k <= 64; k *= 2) {
    const auto r = rate_report(s, k);
    EXPECT_NEAR(r.common_randomness, r.common_randomness_limit - gap / static_cast<double>(k), 1e-12);
    EXPECT_LE(r.side_channel, 1.0 / static_cast<double>(k) + 1e-12);
    EXPECT_LT(r.side_channel, last_side);
    last_side = r.side_channel;
  }
  EXPECT_THROW(rate_report(s, 0), PolarError);
}

TEST(Json, SetsCarryIndexBase) {
  const auto j = to_json(build_index_sets(reference_profile(), kSmall));
  EXPECT_EQ(j.at("index_base"), 0);
  EXPECT_EQ(j.at("A3"), (nlohmann::json{4, 6}));
}

TEST(Cache, RoundTripIsExact) {
  const auto m = ct::bundled_model("bsc_constant_w");
  const PolarParams params{64, 0.25, 500};
  const auto c = construct(m, params, 4);
  const CacheKey key{64, 0.25, 500, 4, model_fingerprint(m)};
  const auto path = temp_file("cache_roundtrip");
  write_sets_cache(path, key, c);
  const auto back = read_sets_cache(path, key);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(to_json(back->sets).dump(), to_json(c.sets).dump());
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    EXPECT_EQ(back->profile.family[f].mean, c.profile.family[f].mean);
    EXPECT_EQ(back->profile.family[f].std_error, c.profile.family[f].std_error);
    EXPECT_EQ(back->profile.total_std_error[f], c.profile.total_std_error[f]);
  }
  std::filesystem::remove(path);
}

TEST(Cache, KeyMismatchAndMissingFileGiveNothing) {
  const auto m = ct::bundled_model("bsc_constant_w");
  const auto c = construct(m, {64, 0.25, 300}, 5);
  const CacheKey key{64, 0.25, 300, 5, model_fingerprint(m)};
  const auto path = temp_file("cache_key");
  write_sets_cache(path, key, c);
  auto other = key;
  other.seed = 6;
  EXPECT_FALSE(read_sets_cache(path, other).has_value());
  other = key;
  other.model_hash ^= 1;
  EXPECT_FALSE(read_sets_cache(path, other).has_value());
  std::filesystem::remove(path);
  EXPECT_FALSE(read_sets_cache(path, key).has_value());
}

TEST(Cache, HeaderIsLittleEndianAndTruncationIsDetected) {
  const auto m = ct::bundled_model("bsc_constant_w");
  const auto c = construct(m, {64, 0.25, 300}, 7);
  const CacheKey key{64, 0.25, 300, 7, model_fingerprint(m)};
  const auto path = temp_file("cache_header");
  write_sets_cache(path, key, c);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 4), "CSIX");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(8, 8), std::string("\x40\x00\x00\x00\x00\x00\x00\x00", 8));  // n = 64
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  EXPECT_THROW(read_sets_cache(path, key), PolarError);
  std::filesystem::remove(path);
}

TEST(Cache, FingerprintTracksModelContent) {
  const auto a = ct::bundled_model("bsc_constant_w");
  const auto b = ct::bundled_model("noiseless_w_eq_u");
  EXPECT_EQ(model_fingerprint(a), model_fingerprint(ct::bundled_model("bsc_constant_w")));
  EXPECT_NE(model_fingerprint(a), model_fingerprint(b));
}
