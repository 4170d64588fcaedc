#pragma once

// Binary source polarization: the transform S = X G_n with G_n = F^{(x)m}
// (no bit-reversal), successive-cancellation conditional probabilities and
// Monte-Carlo estimation of the per-index conditional entropies.
//
// Indices are 0-based in code; index j here is index j+1 in the usual
// 1-based notation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "coordsim/prob.hpp"

namespace coordsim::polar {

using Bits = std::vector<std::uint8_t>;
using Symbols = std::vector<std::uint32_t>;

class PolarError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PolarParams {
  std::size_t n = 1024;
  double beta = 0.25;
  std::size_t mc_samples = 20000;

  void validate() const;
  std::size_t log2n() const;
  /// delta_n = 2^(-n^beta)
  double delta() const { return std::exp2(-std::pow(static_cast<double>(n), beta)); }
};

bool is_power_of_two(std::size_t n);

/// Single-letter law P_U P_X P_{W|XU} P_{Y|X} P_{V|WY}; X and W are binary.
struct SourceModel {
  prob::JointPMF u_prior;        // U
  prob::JointPMF x_prior;        // X
  prob::ConditionalPMF channel;  // Y | X
  prob::ConditionalPMF w_rule;   // W | X U
  prob::ConditionalPMF v_rule;   // V | W Y

  SourceModel(prob::JointPMF u_prior, prob::JointPMF x_prior, prob::ConditionalPMF channel,
              prob::ConditionalPMF w_rule, prob::ConditionalPMF v_rule);

  std::size_t u_size() const { return u_prior.cells(); }
  std::size_t y_size() const { return channel.cols(); }
  std::size_t v_size() const { return v_rule.cols(); }

  double p_x1() const { return x_prior[1]; }
  double p_w1_given_xu(std::uint8_t x, std::uint32_t u) const { return w_rule(x * u_size() + u, 1); }
  double p_w1_given_x(std::uint8_t x) const;
  double p_y_given_x(std::uint32_t y, std::uint8_t x) const { return channel(x, y); }
  double p_v_given_wy(std::uint32_t v, std::uint8_t w, std::uint32_t y) const {
    return v_rule(w * y_size() + y, v);
  }

  /// Full (U, X, W, Y, V) joint.
  prob::JointPMF joint() const;
};

nlohmann::json to_json(const SourceModel& m);
SourceModel model_from_json(const nlohmann::json& j);

/// In-place multiplication by G_n over GF(2). Self-inverse.
void polar_transform_inplace(std::span<std::uint8_t> bits);
Bits polar_transform(std::span<const std::uint8_t> bits);

// ------------------------------------------------------------------------
// Successive cancellation
//
// Evidence for each symbol is carried as d = P(bit=0) - P(bit=1) in [-1, 1].
// Bit-level checks combine as d_a d_b; repeated observations of one bit as
// (d_a + d_b) / (1 + d_a d_b). Both are exact.

/// Decision callback: given index j and P(U_j = 1 | u^{j-1}, evidence),
/// returns the bit to fix at index j.
class ScEngine {
 public:
  explicit ScEngine(std::size_t n);

  std::size_t size() const { return n_; }

  /// Runs the successive-cancellation pass. `x_out` receives u G_n for the
  /// decided bits u (the reconstructed signal domain).
  template <typename Decide>
  void run(std::span<const double> evidence, std::span<std::uint8_t> x_out, Decide&& decide) {
    if (evidence.size() != n_ || x_out.size() != n_) throw PolarError("evidence length mismatch");
    recurse(0, evidence.data(), x_out.data(), 0, decide);
  }

 private:
  template <typename Decide>
  void recurse(std::size_t level, const double* in, std::uint8_t* out, std::size_t first, Decide& decide) {
    const std::size_t len = n_ >> level;
    if (len == 1) {
      const double p1 = std::clamp(0.5 * (1.0 - in[0]), 0.0, 1.0);
      out[0] = static_cast<std::uint8_t>(decide(first, p1) & 1u);
      return;
    }
    const std::size_t h = len / 2;
    double* buf = scratch_[level + 1].data();
    for (std::size_t i = 0; i < h; ++i) buf[i] = in[i] * in[i + h];
    recurse(level + 1, buf, out, first, decide);
    for (std::size_t i = 0; i < h; ++i) buf[i] = combine(out[i] ? -in[i] : in[i], in[i + h]);
    recurse(level + 1, buf, out + h, first + h, decide);
    for (std::size_t i = 0; i < h; ++i) out[i] ^= out[i + h];
  }

  static double combine(double a, double b) {
    const double den = 1.0 + a * b;
    if (den <= 0.0) return 0.0;  // contradictory evidence on a zero-probability path
    return std::clamp((a + b) / den, -1.0, 1.0);
  }

  std::size_t n_;
  std::vector<std::vector<double>> scratch_;
};

/// Per-symbol evidence for X: prior only, or posterior given y.
std::vector<double> x_evidence(const SourceModel& m, std::size_t n);
std::vector<double> x_evidence(const SourceModel& m, std::span<const std::uint32_t> y);

enum class WSide { XU, X, UXYV };

/// Per-symbol evidence for W given the selected side information.
std::vector<double> w_evidence(const SourceModel& m, WSide side, std::span<const std::uint8_t> x,
                               std::span<const std::uint32_t> u, std::span<const std::uint32_t> y = {},
                               std::span<const std::uint32_t> v = {});

/// P(S_j = 1 | s^{j-1} [, y^n]) with prefix.size() == j.
double sc_probability_x(const SourceModel& m, std::size_t n, std::size_t j, std::span<const std::uint8_t> prefix,
                        std::span<const std::uint32_t> y_obs = {});

/// P(Z_j = 1 | z^{j-1}, side) with prefix.size() == j.
double sc_probability_w(const SourceModel& m, std::size_t n, std::size_t j, std::span<const std::uint8_t> prefix,
                        WSide side, std::span<const std::uint8_t> x, std::span<const std::uint32_t> u,
                        std::span<const std::uint32_t> y = {}, std::span<const std::uint32_t> v = {});

// ------------------------------------------------------------------------
// Entropy profile

enum Family : std::size_t {
  kSGivenPast = 0,        // H(S_j | S^{j-1})
  kSGivenPastY = 1,       // H(S_j | S^{j-1} Y^n)
  kZGivenPastXU = 2,      // H(Z_j | Z^{j-1} X^n U^n)
  kZGivenPastX = 3,       // H(Z_j | Z^{j-1} X^n)
  kZGivenPastUXYV = 4,    // H(Z_j | Z^{j-1} U^n X^n Y^n V^n)
  kFamilyCount = 5,
};

const char* family_name(std::size_t f);

struct EntropyEstimate {
  std::vector<double> mean;
  std::vector<double> std_error;
};

struct PolarizedEntropyProfile {
  std::size_t n = 0;
  std::size_t samples = 0;
  EntropyEstimate family[kFamilyCount];

  // Standard error of sum_j H_j, from the per-sample totals.
  double total_std_error[kFamilyCount] = {0, 0, 0, 0, 0};

  /// (1/n) sum_j of the estimates for one family.
  double average(std::size_t f) const;
};

/// One i.i.d. block drawn from the model.
struct ModelBlock {
  Symbols u;
  Bits x;
  Bits w;
  Symbols y;
  Symbols v;
};
ModelBlock draw_block(const SourceModel& m, std::size_t n, prob::Rng& rng);

/// Monte-Carlo estimate along the true path; chunks of samples are seeded
/// from `seed` independently of the worker count.
PolarizedEntropyProfile estimate_profile(const SourceModel& m, const PolarParams& params, std::uint64_t seed);

nlohmann::json to_json(const PolarizedEntropyProfile& p);

}  // namespace coordsim::polar
