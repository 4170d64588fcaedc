#include "coordsim/prob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace coordsim::prob {
namespace {

void check_axes(std::span<const Alphabet> axes) {
  std::set<std::string_view> seen;
  for (const auto& a : axes) {
    if (a.size < 1) throw ProbError("alphabet '" + a.name + "' must have at least one symbol");
    if (!seen.insert(a.name).second) throw ProbError("duplicate axis label '" + a.name + "'");
  }
}

std::vector<std::size_t> strides_of(std::span<const Alphabet> axes) {
  std::vector<std::size_t> s(axes.size(), 1);
  for (std::size_t i = axes.size(); i-- > 1;) s[i - 1] = s[i] * axes[i].size;
  return s;
}

// For every cell of p, the flat index of the same assignment restricted to
// `sub` (in the order given by `sub`).
std::vector<std::size_t> projection_map(const JointPMF& p, const AxisList& sub) {
  std::vector<std::size_t> pos;
  std::vector<Alphabet> sub_axes;
  for (const auto& name : sub) {
    pos.push_back(p.axis_index(name));
    sub_axes.push_back(p.axes()[pos.back()]);
  }
  const auto sub_strides = strides_of(sub_axes);
  std::vector<std::size_t> map(p.cells(), 0);
  std::vector<std::size_t> sym(p.rank(), 0);
  for (std::size_t f = 0; f < p.cells(); ++f) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < pos.size(); ++k) idx += sym[pos[k]] * sub_strides[k];
    map[f] = idx;
    for (std::size_t a = p.rank(); a-- > 0;) {
      if (++sym[a] < p.axes()[a].size) break;
      sym[a] = 0;
    }
  }
  return map;
}

std::vector<double> marginal_table(const JointPMF& p, const AxisList& keep, std::size_t size) {
  std::vector<double> out(size, 0.0);
  const auto map = projection_map(p, keep);
  for (std::size_t f = 0; f < p.cells(); ++f) out[map[f]] += p[f];
  return out;
}

double subset_entropy(const JointPMF& p, const AxisList& axes) {
  if (axes.empty()) return 0.0;
  std::vector<Alphabet> sub;
  for (const auto& n : axes) sub.push_back(p.axis(n));
  return entropy(marginal_table(p, axes, cell_count(sub)));
}

AxisList join(const AxisList& a, const AxisList& b) {
  AxisList r = a;
  for (const auto& n : b) {
    if (std::find(r.begin(), r.end(), n) != r.end())
      throw ProbError("axis '" + n + "' appears in more than one argument set");
    r.push_back(n);
  }
  return r;
}

void check_same_axes(const JointPMF& p, const JointPMF& q) {
  if (p.axes() != q.axes()) throw ProbError("pmfs are defined over different axes");
}

}  // namespace

std::size_t cell_count(std::span<const Alphabet> axes) {
  std::size_t n = 1;
  for (const auto& a : axes) {
    if (a.size == 0 || n > kMaxCells / a.size)
      throw ProbError("alphabet product exceeds the dense table cap of 1e6 cells");
    n *= a.size;
  }
  return n;
}

// ---------------------------------------------------------------- JointPMF

JointPMF::JointPMF(std::vector<Alphabet> axes, std::vector<double> table)
    : axes_(std::move(axes)), table_(std::move(table)) {
  check_axes(axes_);
  if (table_.size() != cell_count(axes_))
    throw ProbError("table has " + std::to_string(table_.size()) + " entries, expected " +
                    std::to_string(cell_count(axes_)));
  double sum = 0.0;
  for (double v : table_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ProbError("pmf entries must be finite and nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormTolerance)
    throw ProbError("pmf normalization violated: entries sum to " + std::to_string(sum));
}

JointPMF JointPMF::normalized(std::vector<Alphabet> axes, std::vector<double> weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw ProbError("cannot normalize weights with zero total mass");
  for (auto& w : weights) w /= sum;
  return JointPMF(std::move(axes), std::move(weights));
}

JointPMF JointPMF::uniform(std::vector<Alphabet> axes) {
  const std::size_t n = cell_count(axes);
  return JointPMF(std::move(axes), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

JointPMF JointPMF::point_mass(std::vector<Alphabet> axes, std::span<const std::size_t> symbols) {
  if (symbols.size() != axes.size()) throw ProbError("symbol tuple has wrong arity");
  std::vector<double> t(cell_count(axes), 0.0);
  std::size_t f = 0;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (symbols[i] >= axes[i].size) throw ProbError("symbol out of range on axis '" + axes[i].name + "'");
    f = f * axes[i].size + symbols[i];
  }
  t[f] = 1.0;
  return JointPMF(std::move(axes), std::move(t));
}

bool JointPMF::has_axis(std::string_view name) const noexcept {
  return std::any_of(axes_.begin(), axes_.end(), [&](const Alphabet& a) { return a.name == name; });
}

std::size_t JointPMF::axis_index(std::string_view name) const {
  for (std::size_t i = 0; i < axes_.size(); ++i)
    if (axes_[i].name == name) return i;
  throw ProbError("unknown axis label '" + std::string(name) + "'");
}

AxisList JointPMF::axis_names() const {
  AxisList names;
  for (const auto& a : axes_) names.push_back(a.name);
  return names;
}

std::size_t JointPMF::flat_index(std::span<const std::size_t> symbols) const {
  if (symbols.size() != axes_.size()) throw ProbError("symbol tuple has wrong arity");
  std::size_t f = 0;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (symbols[i] >= axes_[i].size) throw ProbError("symbol out of range on axis '" + axes_[i].name + "'");
    f = f * axes_[i].size + symbols[i];
  }
  return f;
}

std::vector<std::size_t> JointPMF::symbols_of(std::size_t flat) const {
  std::vector<std::size_t> s(axes_.size(), 0);
  for (std::size_t i = axes_.size(); i-- > 0;) {
    s[i] = flat % axes_[i].size;
    flat /= axes_[i].size;
  }
  return s;
}

// ----------------------------------------------------------- ConditionalPMF

ConditionalPMF::ConditionalPMF(std::vector<Alphabet> given, std::vector<Alphabet> out,
                               std::vector<double> table, std::vector<bool> flagged)
    : given_(std::move(given)), out_(std::move(out)), table_(std::move(table)), flagged_(std::move(flagged)) {
  std::vector<Alphabet> all = given_;
  all.insert(all.end(), out_.begin(), out_.end());
  check_axes(all);
  if (out_.empty()) throw ProbError("conditional pmf needs at least one output axis");
  rows_ = cell_count(given_);
  cols_ = cell_count(out_);
  cell_count(all);
  if (table_.size() != rows_ * cols_)
    throw ProbError("conditional table has " + std::to_string(table_.size()) + " entries, expected " +
                    std::to_string(rows_ * cols_));
  if (flagged_.empty()) flagged_.assign(rows_, false);
  if (flagged_.size() != rows_) throw ProbError("flag vector does not match row count");
  for (std::size_t r = 0; r < rows_; ++r) {
    double sum = 0.0;
    for (double v : row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ProbError("conditional entries must be finite and nonnegative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kNormTolerance)
      throw ProbError("conditional row " + std::to_string(r) + " normalization violated: sums to " +
                      std::to_string(sum));
  }
}

ConditionalPMF ConditionalPMF::from_weights(std::vector<Alphabet> given, std::vector<Alphabet> out,
                                            std::vector<double> weights) {
  const std::size_t cols = cell_count(out);
  if (cols == 0 || weights.size() % cols != 0) throw ProbError("weight table shape mismatch");
  std::vector<bool> flags(weights.size() / cols, false);
  for (std::size_t r = 0; r * cols < weights.size(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += weights[r * cols + c];
    for (std::size_t c = 0; c < cols; ++c)
      weights[r * cols + c] = s > 0.0 ? weights[r * cols + c] / s : 1.0 / static_cast<double>(cols);
    flags[r] = !(s > 0.0);
  }
  return ConditionalPMF(std::move(given), std::move(out), std::move(weights), std::move(flags));
}

std::size_t ConditionalPMF::flagged_count() const noexcept {
  return static_cast<std::size_t>(std::count(flagged_.begin(), flagged_.end(), true));
}

std::size_t ConditionalPMF::row_index(std::span<const std::size_t> given_symbols) const {
  if (given_symbols.size() != given_.size()) throw ProbError("given tuple has wrong arity");
  std::size_t r = 0;
  for (std::size_t i = 0; i < given_.size(); ++i) {
    if (given_symbols[i] >= given_[i].size) throw ProbError("given symbol out of range");
    r = r * given_[i].size + given_symbols[i];
  }
  return r;
}

// ---------------------------------------------------------------- algebra

JointPMF marginalize(const JointPMF& p, const AxisList& keep) {
  if (keep.empty()) throw ProbError("marginalize needs a nonempty axis set");
  std::vector<Alphabet> axes;
  for (const auto& n : keep) axes.push_back(p.axis(n));
  check_axes(axes);
  auto table = marginal_table(p, keep, cell_count(axes));
  return JointPMF::normalized(std::move(axes), std::move(table));
}

JointPMF compose(const JointPMF& p, const ConditionalPMF& c) {
  AxisList given;
  for (const auto& a : c.given_axes()) {
    if (!p.has_axis(a.name)) throw ProbError("conditional given-axis '" + a.name + "' not present in pmf");
    if (p.axis(a.name).size != a.size) throw ProbError("shape mismatch on axis '" + a.name + "'");
    given.push_back(a.name);
  }
  for (const auto& a : c.out_axes())
    if (p.has_axis(a.name)) throw ProbError("axis collision: '" + a.name + "' already in pmf");

  std::vector<Alphabet> axes = p.axes();
  axes.insert(axes.end(), c.out_axes().begin(), c.out_axes().end());
  const std::size_t cols = c.cols();
  std::vector<double> table(cell_count(axes), 0.0);
  const auto rowmap = given.empty() ? std::vector<std::size_t>(p.cells(), 0) : projection_map(p, given);
  for (std::size_t f = 0; f < p.cells(); ++f) {
    const auto row = c.row(rowmap[f]);
    for (std::size_t k = 0; k < cols; ++k) table[f * cols + k] = p[f] * row[k];
  }
  return JointPMF::normalized(std::move(axes), std::move(table));
}

ConditionalPMF condition(const JointPMF& p, const AxisList& out, const AxisList& given) {
  const AxisList all = join(given, out);
  std::vector<Alphabet> g, o;
  for (const auto& n : given) g.push_back(p.axis(n));
  for (const auto& n : out) o.push_back(p.axis(n));
  std::vector<Alphabet> ga = g;
  ga.insert(ga.end(), o.begin(), o.end());
  auto weights = marginal_table(p, all, cell_count(ga));
  return ConditionalPMF::from_weights(std::move(g), std::move(o), std::move(weights));
}

// --------------------------------------------------------------- measures

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double entropy(std::span<const double> pmf) {
  double h = 0.0;
  for (double v : pmf)
    if (v > 0.0) h -= v * std::log2(v);
  return std::max(h, 0.0);
}

double entropy(const JointPMF& p) { return entropy(p.table()); }

double conditional_entropy(const JointPMF& p, const AxisList& out, const AxisList& given) {
  const double h = subset_entropy(p, join(out, given)) - subset_entropy(p, given);
  return std::max(h, 0.0);
}

double mutual_information(const JointPMF& p, const AxisList& a, const AxisList& b, const AxisList& given) {
  const double mi = subset_entropy(p, join(a, given)) + subset_entropy(p, join(b, given)) -
                    subset_entropy(p, join(join(a, b), given)) - subset_entropy(p, given);
  return std::max(mi, 0.0);
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ProbError("total variation of vectors of different length");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s;
}

double total_variation(const JointPMF& p, const JointPMF& q) {
  check_same_axes(p, q);
  return total_variation(p.table(), q.table());
}

double tv_halved(const JointPMF& p, const JointPMF& q) { return 0.5 * total_variation(p, q); }

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ProbError("divergence of vectors of different length");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInfiniteDivergence;
    d += p[i] * std::log2(p[i] / q[i]);
  }
  return std::max(d, 0.0);
}

double kl_divergence(const JointPMF& p, const JointPMF& q) {
  check_same_axes(p, q);
  return kl_divergence(p.table(), q.table());
}

// --------------------------------------------------------------- sampling

std::size_t Rng::below(std::size_t bound) {
  if (bound <= 1) return 0;
  return static_cast<std::size_t>(uniform() * static_cast<double>(bound)) % bound;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t sample_index(std::span<const double> pmf, double u) {
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (pmf[i] <= 0.0) continue;
    acc += pmf[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

std::size_t sample_index(std::span<const double> pmf, Rng& rng) { return sample_index(pmf, rng.uniform()); }

std::vector<std::size_t> sample(const JointPMF& p, Rng& rng) { return p.symbols_of(sample_index(p.table(), rng)); }

std::size_t sample(const ConditionalPMF& c, std::size_t row, Rng& rng) { return sample_index(c.row(row), rng); }

}  // namespace coordsim::prob
