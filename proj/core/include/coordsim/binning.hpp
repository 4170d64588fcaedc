#pragma once

// Brute-force oracles for random binning at tiny blocklengths: MAP
// Slepian-Wolf decoding with side information and exact randomness
// extraction divergence.
//
// Sequences over an alphabet of size q are indexed lexicographically,
// index = sum_i a_i q^(n-1-i), so numeric order is lexicographic order.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coordsim/prob.hpp"

namespace coordsim::binning {

using Symbols = std::vector<std::uint32_t>;

inline constexpr std::size_t kMaxStates = 16384;

class BinningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// q^n, or a BinningError if it exceeds kMaxStates.
std::size_t state_count(std::size_t alphabet, std::size_t n);
std::size_t sequence_index(std::span<const std::uint32_t> seq, std::size_t alphabet);
Symbols sequence_at(std::size_t index, std::size_t alphabet, std::size_t n);

struct RandomBinning {
  std::size_t n = 0;
  std::size_t alphabet = 2;
  double rate = 0.0;
  std::size_t bins = 1;                        // 2^ceil(nR)
  std::vector<std::uint32_t> map;              // sequence index -> bin in 1..bins
  std::vector<std::vector<std::uint32_t>> members;  // bin-1 -> ascending sequence indices

  /// Every sequence gets an independent uniform bin.
  static RandomBinning draw(std::size_t n, std::size_t alphabet, double rate, prob::Rng& rng);
  /// One bin per sequence (rate log2 q).
  static RandomBinning identity(std::size_t n, std::size_t alphabet);

  std::uint32_t bin_of(std::span<const std::uint32_t> seq) const;
};

struct SwDecodeResult {
  Symbols estimate;
  bool empty_bin = false;
};

/// MAP estimate of a^n from its bin and the side information b^n under the
/// i.i.d. law `joint` over (A, B). Ties go to the lexicographically first
/// sequence; an empty bin yields the all-zero sequence with the flag set.
SwDecodeResult sw_decode(std::uint32_t bin, std::span<const std::uint32_t> side, const RandomBinning& binning,
                         const prob::JointPMF& joint);

/// Exact D(P_{A^n K} || P_{A^n} Q_K) in bits, K = bin of B^n, Q_K uniform.
double extraction_kl(const RandomBinning& binning_over_b, const prob::JointPMF& joint);

struct SwErrorEstimate {
  double error_rate = 0.0;
  double empty_bin_rate = 0.0;
};

/// Monte-Carlo decoding error of one binning over `draws` source pairs.
SwErrorEstimate sw_error_rate(const RandomBinning& binning_over_a, const prob::JointPMF& joint, std::size_t draws,
                              prob::Rng& rng);

enum class Lemma { SlepianWolf, Extraction };
const char* lemma_name(Lemma l);

struct BinningTrialStats {
  Lemma lemma = Lemma::SlepianWolf;
  std::size_t n = 0;
  double rate = 0.0;
  std::size_t replicates = 0;
  double error_rate = 0.0;     // Slepian-Wolf rows
  double kl_to_uniform = 0.0;  // extraction rows
  double std_error = 0.0;      // of the replicate mean
  double empty_bin_rate = 0.0;
  std::vector<double> per_replicate;
};

struct RegimeSweep {
  std::vector<std::size_t> n_list;
  std::vector<double> rates;
  std::size_t replicates = 100;
  std::size_t draws = 400;  // source pairs per binning for the error estimate
  std::uint64_t seed = 1;
};

/// For each (lemma, n, rate): `replicates` independent binnings. Replicate r
/// uses the same binning seed and the same source draws at every rate, so
/// rows at equal n are paired.
std::vector<BinningTrialStats> verify_lemma_regimes(const prob::JointPMF& joint, const RegimeSweep& sweep);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

/// DSBS(p): uniform A, B = A xor Bern(p), axes ("A", "B").
prob::JointPMF dsbs(double p);

}  // namespace coordsim::binning
