#pragma once

// Block-Markov coordination codec. Blocks are numbered 1..k as in the
// algorithms; vectors indexed by block use position i-1 for block i.
//
// Block i draws its auxiliary Z with evidence (x_(i), u_(i-1)), so the
// signal of block i never sees u_(i). The coordinated single-letter tuple of
// block i is therefore (u_(i-1), x_(i), y_(i), v_(i)).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "coordsim/index_sets.hpp"
#include "coordsim/polar.hpp"

namespace coordsim::codec {

using polar::Bits;
using polar::PolarIndexSets;
using polar::SourceModel;
using polar::Symbols;

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonRandomness {
  std::vector<Bits> c;        // C_i, |A1| bits, blocks 1..k
  std::vector<Bits> c_prime;  // C'_i, |B1 \ B'1| bits, blocks 1..k
  Bits c_bar_prime;           // C-bar', |B'1| bits, reused by every block
  std::vector<Bits> k_keys;   // K_i, |A3| bits, i = 1..k-1
  std::vector<Bits> kp_keys;  // K'_i, |B3| bits, i = 1..k-1

  static CommonRandomness draw(const PolarIndexSets& sets, std::size_t k, prob::Rng& rng);
  std::size_t blocks() const { return c.size(); }
  /// Total number of uniform bits.
  std::size_t bit_count() const;
};

struct BlockTranscript {
  Symbols u;       // u_(i), unseen by the encoder while it forms block i
  Symbols u_prev;  // u_(i-1), the evidence of z_(i)
  Bits s, z;       // polarized vectors drawn by the encoder
  Bits x, w;       // x = s G_n, w = z G_n
  Symbols y;
  Bits s_hat, z_hat, w_hat;
  Symbols v;
  bool s_ok = false;
  bool z_ok = false;
};

struct SideChannelPayload {
  Bits s_last_a3;  // S_(k)[A3]
  Bits z_last_b3;  // Z_(k)[B3]
};

/// Bitwise XOR. Throws CodecError on a length mismatch.
Bits one_time_pad(std::span<const std::uint8_t> bits, std::span<const std::uint8_t> key);

struct Encoded {
  std::vector<BlockTranscript> blocks;  // k entries
  SideChannelPayload payload;
};

/// `u` holds u_(0) .. u_(k); u_(0) is the dummy block.
Encoded encode(const SourceModel& m, const PolarIndexSets& sets, const std::vector<Symbols>& u,
               const CommonRandomness& cr, prob::Rng& local);

/// Memoryless channel applied symbol by symbol.
Symbols transmit(const SourceModel& m, std::span<const std::uint8_t> x, prob::Rng& rng);

/// Fills s_hat, z_hat, w_hat and v for every block from the y fields, in
/// reverse block order. Success flags compare against the encoder's s, z.
void decode(const SourceModel& m, const PolarIndexSets& sets, const SideChannelPayload& payload,
            const CommonRandomness& cr, std::vector<BlockTranscript>& blocks, prob::Rng& rng);

// ------------------------------------------------------------------------
// Statistics

/// Flat code of a (u, x, y, v) tuple in the row-major order of the (U,X,Y,V) joint.
std::size_t tuple_code(const SourceModel& m, std::uint32_t u, std::uint8_t x, std::uint32_t y, std::uint32_t v);

/// Empirical (U,X,Y,V) counts over blocks [first, last] (1-based, inclusive).
std::vector<double> tuple_histogram(const SourceModel& m, const std::vector<BlockTranscript>& blocks, std::size_t first,
                                    std::size_t last);

/// Target (U, X, Y, V) law of the model.
prob::JointPMF coordination_target(const SourceModel& m);

/// Accumulates the joint histogram of position-aligned tuples of blocks i-1
/// and i, pooled over block pairs within [first, last].
class ConsecutivePairCounts {
 public:
  explicit ConsecutivePairCounts(const SourceModel& m);
  void add(const std::vector<BlockTranscript>& blocks, std::size_t first, std::size_t last);
  std::size_t samples() const { return samples_; }
  /// Plug-in estimate in bits.
  double mutual_information() const;

 private:
  const SourceModel* model_;
  std::size_t cells_;
  std::vector<double> counts_;
  std::size_t samples_ = 0;
};

/// Plug-in I(A;B) in bits from a row-major rows x cols count table.
double plugin_mutual_information(std::span<const double> counts, std::size_t rows, std::size_t cols);

struct DivergenceCertificate {
  double value = 0.0;      // sum over A1 u A2 of 1 - H(S_j|S^j-1) plus over B1 of 1 - H(Z_j|Z^j-1 X U)
  double std_error = 0.0;  // root-sum-square of the per-index standard errors
  double bound = 0.0;      // 2 n delta
};

DivergenceCertificate divergence_certificate(const polar::PolarizedEntropyProfile& profile,
                                             const PolarIndexSets& sets, const polar::PolarParams& params);

// ------------------------------------------------------------------------
// End to end

struct TrialResult {
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double s_error_rate = 0.0;  // fraction of blocks with s_hat != s
  double w_error_rate = 0.0;  // fraction of blocks with z_hat != z
  double tv_estimate = 0.0;   // Σ|p̂ - p| over (U,X,Y,V), blocks 1..k-1
  double mi_consecutive = 0.0;
  double cr_rate = 0.0;
  double side_rate = 0.0;
  double d1_plus_d2 = 0.0;
};

struct TrialOptions {
  bool keep_blocks = false;
};

struct TrialOutput {
  TrialResult result;
  std::vector<BlockTranscript> blocks;  // empty unless keep_blocks
};

/// One full run: draw sources and common randomness, encode, transmit,
/// decode and score. Every random stream derives from `seed`.
TrialOutput run_trial(const SourceModel& m, const polar::Construction& construction, const polar::PolarParams& params,
                      std::size_t k, std::uint64_t seed, const TrialOptions& options = {});

/// Runs one trial per seed in parallel; results follow the order of `seeds`.
std::vector<TrialResult> run_end_to_end(const SourceModel& m, const polar::Construction& construction,
                                        const polar::PolarParams& params, std::size_t k,
                                        std::span<const std::uint64_t> seeds);

nlohmann::json to_json(const TrialResult& r);

}  // namespace coordsim::codec
