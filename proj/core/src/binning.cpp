#include "coordsim/binning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coordsim/parallel.hpp"

namespace coordsim::binning {

std::size_t state_count(std::size_t alphabet, std::size_t n) {
  if (alphabet < 1) throw BinningError("alphabet must be nonempty");
  std::size_t s = 1;
  for (std::size_t i = 0; i < n; ++i) {
    s *= alphabet;
    if (s > kMaxStates)
      throw BinningError("brute force over " + std::to_string(alphabet) + "^" + std::to_string(n) +
                         " sequences exceeds the cap of " + std::to_string(kMaxStates) + "; reduce n");
  }
  return s;
}

std::size_t sequence_index(std::span<const std::uint32_t> seq, std::size_t alphabet) {
  std::size_t idx = 0;
  for (auto a : seq) idx = idx * alphabet + a;
  return idx;
}

Symbols sequence_at(std::size_t index, std::size_t alphabet, std::size_t n) {
  Symbols s(n);
  for (std::size_t i = n; i-- > 0;) {
    s[i] = static_cast<std::uint32_t>(index % alphabet);
    index /= alphabet;
  }
  return s;
}

namespace {

std::size_t bin_count(std::size_t n, double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw BinningError("rate must be finite and nonnegative");
  // Guard against n*R landing a rounding error above an integer.
  const double bits = std::ceil(static_cast<double>(n) * rate - 1e-9);
  if (bits > 30) throw BinningError("too many bins");
  return std::size_t{1} << static_cast<std::size_t>(std::max(bits, 0.0));
}

void fill_members(RandomBinning& b) {
  b.members.assign(b.bins, {});
  for (std::size_t s = 0; s < b.map.size(); ++s) b.members[b.map[s] - 1].push_back(static_cast<std::uint32_t>(s));
}

// Log-likelihoods of sequences that differ by a permutation round
// differently; scores this close count as tied.
constexpr double kScoreTieTolerance = 1e-9;

void check_joint(const prob::JointPMF& joint) {
  if (joint.rank() != 2) throw BinningError("joint law must have exactly two axes (A, B)");
}

}  // namespace

RandomBinning RandomBinning::draw(std::size_t n, std::size_t alphabet, double rate, prob::Rng& rng) {
  RandomBinning b;
  b.n = n;
  b.alphabet = alphabet;
  b.rate = rate;
  b.bins = bin_count(n, rate);
  b.map.resize(state_count(alphabet, n));
  for (auto& m : b.map) m = static_cast<std::uint32_t>(rng.below(b.bins) + 1);
  fill_members(b);
  return b;
}

RandomBinning RandomBinning::identity(std::size_t n, std::size_t alphabet) {
  RandomBinning b;
  b.n = n;
  b.alphabet = alphabet;
  b.rate = std::log2(static_cast<double>(alphabet));
  b.bins = state_count(alphabet, n);
  b.map.resize(b.bins);
  std::iota(b.map.begin(), b.map.end(), 1u);
  fill_members(b);
  return b;
}

std::uint32_t RandomBinning::bin_of(std::span<const std::uint32_t> seq) const {
  if (seq.size() != n) throw BinningError("sequence length differs from the binning");
  return map[sequence_index(seq, alphabet)];
}

SwDecodeResult sw_decode(std::uint32_t bin, std::span<const std::uint32_t> side, const RandomBinning& binning,
                         const prob::JointPMF& joint) {
  check_joint(joint);
  const std::size_t qa = joint.axes()[0].size, qb = joint.axes()[1].size;
  if (qa != binning.alphabet) throw BinningError("binning alphabet differs from A");
  if (side.size() != binning.n) throw BinningError("side information length differs from the binning");
  if (bin < 1 || bin > binning.bins) throw BinningError("bin index out of range");

  SwDecodeResult r;
  const auto& members = binning.members[bin - 1];
  if (members.empty()) {
    r.estimate.assign(binning.n, 0);
    r.empty_bin = true;
    return r;
  }
  std::vector<double> logp(qa * qb);
  for (std::size_t i = 0; i < logp.size(); ++i) {
    const double p = joint.table()[i];
    logp[i] = p > 0.0 ? std::log2(p) : -std::numeric_limits<double>::infinity();
  }
  double best = -std::numeric_limits<double>::infinity();
  std::uint32_t best_idx = members.front();
  for (auto idx : members) {
    double score = 0.0;
    std::size_t rest = idx;
    for (std::size_t i = binning.n; i-- > 0;) {
      score += logp[(rest % qa) * qb + side[i]];
      rest /= qa;
    }
    if (score > best + kScoreTieTolerance) {
      best = score;
      best_idx = idx;
    }
  }
  r.estimate = sequence_at(best_idx, qa, binning.n);
  return r;
}

double extraction_kl(const RandomBinning& binning, const prob::JointPMF& joint) {
  check_joint(joint);
  const std::size_t qa = joint.axes()[0].size, qb = joint.axes()[1].size;
  if (qb != binning.alphabet) throw BinningError("binning alphabet differs from B");
  const std::size_t n = binning.n;
  const std::size_t sa = state_count(qa, n);
  const std::size_t sb = state_count(qb, n);
  const auto t = joint.table();
  const double log_m = std::log2(static_cast<double>(binning.bins));

  std::vector<double> pab(sb), next(sb), pk(binning.bins);
  double kl = 0.0;
  for (std::size_t a_idx = 0; a_idx < sa; ++a_idx) {
    const Symbols a = sequence_at(a_idx, qa, n);
    // P(a^n, b^n) for every b^n, built one position at a time.
    std::size_t len = 1;
    pab[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < len; ++s)
        for (std::size_t b = 0; b < qb; ++b) next[s * qb + b] = pab[s] * t[a[i] * qb + b];
      len *= qb;
      std::swap(pab, next);
    }
    std::fill(pk.begin(), pk.end(), 0.0);
    double pa = 0.0;
    for (std::size_t b = 0; b < sb; ++b) {
      pk[binning.map[b] - 1] += pab[b];
      pa += pab[b];
    }
    if (pa <= 0.0) continue;
    for (double p : pk)
      if (p > 0.0) kl += p * (std::log2(p / pa) + log_m);
  }
  return std::max(kl, 0.0);
}

SwErrorEstimate sw_error_rate(const RandomBinning& binning, const prob::JointPMF& joint, std::size_t draws,
                              prob::Rng& rng) {
  check_joint(joint);
  if (draws == 0) throw BinningError("need at least one source draw");
  const std::size_t qb = joint.axes()[1].size;
  SwErrorEstimate e;
  Symbols a(binning.n), b(binning.n);
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t i = 0; i < binning.n; ++i) {
      const std::size_t cell = prob::sample_index(joint.table(), rng);
      a[i] = static_cast<std::uint32_t>(cell / qb);
      b[i] = static_cast<std::uint32_t>(cell % qb);
    }
    const auto r = sw_decode(binning.bin_of(a), b, binning, joint);
    e.error_rate += r.estimate != a ? 1.0 : 0.0;
    e.empty_bin_rate += r.empty_bin ? 1.0 : 0.0;
  }
  e.error_rate /= static_cast<double>(draws);
  e.empty_bin_rate /= static_cast<double>(draws);
  return e;
}

const char* lemma_name(Lemma l) { return l == Lemma::SlepianWolf ? "slepian_wolf" : "extraction"; }

namespace {

void summarize(BinningTrialStats& s) {
  const double r = static_cast<double>(s.per_replicate.size());
  double mean = 0.0;
  for (double v : s.per_replicate) mean += v;
  mean /= r;
  double ss = 0.0;
  for (double v : s.per_replicate) ss += (v - mean) * (v - mean);
  s.std_error = r > 1 ? std::sqrt(ss / (r - 1) / r) : 0.0;
  if (s.lemma == Lemma::SlepianWolf) s.error_rate = mean;
  else s.kl_to_uniform = mean;
}

}  // namespace

std::vector<BinningTrialStats> verify_lemma_regimes(const prob::JointPMF& joint, const RegimeSweep& sweep) {
  check_joint(joint);
  if (sweep.replicates == 0) throw BinningError("need at least one replicate");
  const std::size_t qa = joint.axes()[0].size, qb = joint.axes()[1].size;
  for (auto n : sweep.n_list) {
    state_count(qa, n);
    state_count(qb, n);
  }

  std::vector<BinningTrialStats> rows;
  for (Lemma lemma : {Lemma::SlepianWolf, Lemma::Extraction})
    for (auto n : sweep.n_list)
      for (double rate : sweep.rates) {
        BinningTrialStats s;
        s.lemma = lemma;
        s.n = n;
        s.rate = rate;
        s.replicates = sweep.replicates;
        s.per_replicate.assign(sweep.replicates, 0.0);
        rows.push_back(std::move(s));
      }

  std::vector<double> empty(rows.size() * sweep.replicates, 0.0);
  parallel_for(rows.size() * sweep.replicates, [&](std::size_t job) {
    const std::size_t row = job / sweep.replicates;
    const std::size_t rep = job % sweep.replicates;
    auto& s = rows[row];
    const std::uint64_t base = prob::derive_seed(sweep.seed, (static_cast<std::uint64_t>(s.n) << 32) | rep);
    prob::Rng bin_rng(prob::derive_seed(base, 1));
    if (s.lemma == Lemma::SlepianWolf) {
      prob::Rng src_rng(prob::derive_seed(base, 2));
      const auto b = RandomBinning::draw(s.n, qa, s.rate, bin_rng);
      const auto e = sw_error_rate(b, joint, sweep.draws, src_rng);
      s.per_replicate[rep] = e.error_rate;
      empty[job] = e.empty_bin_rate;
    } else {
      const auto b = RandomBinning::draw(s.n, qb, s.rate, bin_rng);
      s.per_replicate[rep] = extraction_kl(b, joint);
    }
  });

  for (std::size_t row = 0; row < rows.size(); ++row) {
    summarize(rows[row]);
    double e = 0.0;
    for (std::size_t r = 0; r < sweep.replicates; ++r) e += empty[row * sweep.replicates + r];
    rows[row].empty_bin_rate = e / static_cast<double>(sweep.replicates);
  }
  return rows;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw BinningError("spearman needs two equal-length samples");
  const auto rx = ranks(x), ry = ranks(y);
  const double m = (static_cast<double>(x.size()) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - m) * (ry[i] - m);
    sxx += (rx[i] - m) * (rx[i] - m);
    syy += (ry[i] - m) * (ry[i] - m);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

prob::JointPMF dsbs(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw BinningError("crossover must lie in [0, 1]");
  return prob::JointPMF({{"A", 2}, {"B", 2}}, {0.5 * (1 - p), 0.5 * p, 0.5 * p, 0.5 * (1 - p)});
}

}  // namespace coordsim::binning
