#pragma once

// Finite-alphabet probability tables and the information measures used
// throughout coordsim. All logarithms are base 2.
//
// Total variation follows the unnormalized L1 convention
//     V(p, q) = sum |p - q|        in [0, 2]
// which is the convention under which the coupling inequality
// V(P_A, P_A') <= 2 P{A != A'} and the entropy continuity bound
// |H(P) - H(P')| <= eps log(|A| / eps), eps <= 1/2, hold together.
// Use tv_halved() for the [0, 1] convention.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coordsim::prob {

inline constexpr double kNormTolerance = 1e-12;
inline constexpr std::size_t kMaxCells = 1'000'000;
inline constexpr double kInfiniteDivergence = std::numeric_limits<double>::infinity();

class ProbError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Alphabet {
  std::string name;
  std::size_t size = 1;

  bool operator==(const Alphabet&) const = default;
};

using AxisList = std::vector<std::string>;

/// Product of alphabet sizes; throws when the product exceeds kMaxCells.
std::size_t cell_count(std::span<const Alphabet> axes);

/// Dense joint pmf over a labeled product of alphabets, row-major with the
/// first axis varying slowest.
class JointPMF {
 public:
  JointPMF(std::vector<Alphabet> axes, std::vector<double> table);

  static JointPMF normalized(std::vector<Alphabet> axes, std::vector<double> weights);
  static JointPMF uniform(std::vector<Alphabet> axes);
  static JointPMF point_mass(std::vector<Alphabet> axes, std::span<const std::size_t> symbols);

  const std::vector<Alphabet>& axes() const noexcept { return axes_; }
  std::span<const double> table() const noexcept { return table_; }
  std::size_t rank() const noexcept { return axes_.size(); }
  std::size_t cells() const noexcept { return table_.size(); }

  bool has_axis(std::string_view name) const noexcept;
  std::size_t axis_index(std::string_view name) const;
  const Alphabet& axis(std::string_view name) const { return axes_[axis_index(name)]; }
  AxisList axis_names() const;

  std::size_t flat_index(std::span<const std::size_t> symbols) const;
  std::vector<std::size_t> symbols_of(std::size_t flat) const;
  double at(std::span<const std::size_t> symbols) const { return table_[flat_index(symbols)]; }
  double operator[](std::size_t flat) const { return table_[flat]; }

 private:
  std::vector<Alphabet> axes_;
  std::vector<double> table_;
};

/// Conditional pmf P(out | given): one unit-normalized row per assignment of
/// the given axes. Rows that came from zero-mass conditioning events are
/// filled uniformly and flagged.
class ConditionalPMF {
 public:
  ConditionalPMF(std::vector<Alphabet> given, std::vector<Alphabet> out, std::vector<double> table,
                 std::vector<bool> flagged = {});

  static ConditionalPMF from_weights(std::vector<Alphabet> given, std::vector<Alphabet> out,
                                     std::vector<double> weights);

  const std::vector<Alphabet>& given_axes() const noexcept { return given_; }
  const std::vector<Alphabet>& out_axes() const noexcept { return out_; }
  std::span<const double> table() const noexcept { return table_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<const double> row(std::size_t r) const { return {table_.data() + r * cols_, cols_}; }
  double operator()(std::size_t r, std::size_t c) const { return table_[r * cols_ + c]; }
  bool flagged(std::size_t r) const { return flagged_[r]; }
  std::size_t flagged_count() const noexcept;

  /// Flat row index for an assignment of the given axes.
  std::size_t row_index(std::span<const std::size_t> given_symbols) const;

 private:
  std::vector<Alphabet> given_;
  std::vector<Alphabet> out_;
  std::vector<double> table_;
  std::vector<bool> flagged_;
  std::size_t rows_ = 1;
  std::size_t cols_ = 1;
};

JointPMF marginalize(const JointPMF& p, const AxisList& keep);
JointPMF compose(const JointPMF& p, const ConditionalPMF& c);
ConditionalPMF condition(const JointPMF& p, const AxisList& out, const AxisList& given);

double entropy(const JointPMF& p);
double entropy(std::span<const double> pmf);
double binary_entropy(double p);
double conditional_entropy(const JointPMF& p, const AxisList& out, const AxisList& given);
double mutual_information(const JointPMF& p, const AxisList& a, const AxisList& b,
                          const AxisList& given = {});

double total_variation(const JointPMF& p, const JointPMF& q);
double total_variation(std::span<const double> p, std::span<const double> q);
double tv_halved(const JointPMF& p, const JointPMF& q);
double kl_divergence(const JointPMF& p, const JointPMF& q);
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Seeded 64-bit generator. uniform() is built from the raw 64-bit output so
/// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint8_t bit() { return static_cast<std::uint8_t>(engine_() >> 63); }
  std::size_t below(std::size_t bound);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Inverse-CDF draw from a probability vector using one uniform variate.
std::size_t sample_index(std::span<const double> pmf, double u);
std::size_t sample_index(std::span<const double> pmf, Rng& rng);
std::vector<std::size_t> sample(const JointPMF& p, Rng& rng);
std::size_t sample(const ConditionalPMF& c, std::size_t row, Rng& rng);

}  // namespace coordsim::prob
