#pragma once

// Partitions of the polarized indices that drive encoding and decoding.
//
// S-side (signal X):   A1 = V_X ∩ H_{X|Y}    common randomness
//                      A2 = V_X \ H_{X|Y}    local randomness / chained payload
//                      A3 = H_{X|Y} \ V_X    drawn, then chained to the next block
//                      A4 = the rest         drawn
// Z-side (auxiliary W): B1 = V_{W|XU} ∩ H_{W|X}, B2 = V_{W|XU} \ H_{W|X},
//                      B3 = H_{W|X} \ V_{W|XU}, B4 = complement of H_{W|X}.
// A'3 and B'3 are the lowest-index disjoint subsets of A2 that carry the
// chained bits; A'2 is what remains of A2.
//
// All indices are 0-based and sorted ascending.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "coordsim/polar.hpp"

namespace coordsim::polar {

using IndexSet = std::vector<std::uint32_t>;

class CapacityError : public std::runtime_error {
 public:
  CapacityError(std::size_t a2, std::size_t a3, std::size_t b3);
  std::size_t a2() const noexcept { return a2_; }
  std::size_t a3() const noexcept { return a3_; }
  std::size_t b3() const noexcept { return b3_; }

 private:
  std::size_t a2_, a3_, b3_;
};

struct PolarIndexSets {
  std::size_t n = 0;
  IndexSet a1, a2, a3, a4;
  IndexSet b1, b2, b3, b4;
  IndexSet bp1;  // B'1, subset of B1 filled from the shared key C-bar'
  IndexSet ap2, ap3, bp3;

  // Finite-sample anomalies; nonzero values are reported, not fatal.
  std::size_t b2_reassigned = 0;        // indices of B2 moved into B1
  std::size_t bp1_violations = 0;       // very-high entropy given UXYV but outside B1
  std::size_t nesting_violations = 0;   // H_{X|Y} not contained in H_X

  /// B1 \ B'1.
  IndexSet b1_private() const;
};

/// Thresholds the profile at delta = 2^(-n^beta) and forms every set.
/// Throws CapacityError if |A2| < |A3| + |B3|.
PolarIndexSets build_index_sets(const PolarizedEntropyProfile& profile, const PolarParams& params);

/// Checks the partition and subset invariants; returns an empty string when
/// they hold, otherwise a description of the first violation.
std::string validate_sets(const PolarIndexSets& sets);

struct RateReport {
  std::size_t k = 0;
  double common_randomness = 0.0;  // bits per channel use
  double side_channel = 0.0;
  double local_randomness = 0.0;
  double common_randomness_limit = 0.0;  // k -> infinity
};

RateReport rate_report(const PolarIndexSets& sets, std::size_t k);

nlohmann::json to_json(const PolarIndexSets& sets);
nlohmann::json to_json(const RateReport& r);

// ------------------------------------------------------------------------
// Binary cache: "CSIX" magic, u32 version, then n, beta, mc_samples, seed and
// a model fingerprint, followed by each set as a u32 count and u32 indices,
// the anomaly counters, and the profile as f64 arrays. Little-endian.

struct CacheKey {
  std::uint64_t n = 0;
  double beta = 0.0;
  std::uint64_t mc_samples = 0;
  std::uint64_t seed = 0;
  std::uint64_t model_hash = 0;
  bool operator==(const CacheKey&) const = default;
};

inline constexpr std::uint32_t kCacheVersion = 1;

/// FNV-1a of the canonical JSON form of the model.
std::uint64_t model_fingerprint(const SourceModel& m);

struct Construction {
  PolarizedEntropyProfile profile;
  PolarIndexSets sets;
};

/// estimate_profile followed by build_index_sets.
Construction construct(const SourceModel& m, const PolarParams& params, std::uint64_t seed);

void write_sets_cache(const std::filesystem::path& path, const CacheKey& key, const Construction& c);

/// Returns nullopt if the file is missing or was built for a different key.
/// Throws PolarError on a corrupt file.
std::optional<Construction> read_sets_cache(const std::filesystem::path& path, const CacheKey& key);

}  // namespace coordsim::polar
