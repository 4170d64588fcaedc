#include "coordsim/polar.hpp"

#include <bit>

#include "coordsim/parallel.hpp"
#include "coordsim/prob_json.hpp"

namespace coordsim::polar {

using prob::Alphabet;
using prob::ConditionalPMF;
using prob::JointPMF;

bool is_power_of_two(std::size_t n) { return n >= 1 && std::has_single_bit(n); }

void PolarParams::validate() const {
  if (n < 2 || !is_power_of_two(n)) throw PolarError("n must be a power of two >= 2, got " + std::to_string(n));
  if (!(beta > 0.0 && beta < 0.5)) throw PolarError("beta must lie in (0, 1/2)");
  if (mc_samples < 1) throw PolarError("mc_samples must be positive");
}

std::size_t PolarParams::log2n() const { return static_cast<std::size_t>(std::countr_zero(n)); }

// ----------------------------------------------------------------- model

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw PolarError("source model: " + what);
}

bool axes_are(const std::vector<Alphabet>& axes, std::initializer_list<const char*> names) {
  if (axes.size() != names.size()) return false;
  std::size_t i = 0;
  for (const char* n : names)
    if (axes[i++].name != n) return false;
  return true;
}

}  // namespace

SourceModel::SourceModel(JointPMF up, JointPMF xp, ConditionalPMF ch, ConditionalPMF wr, ConditionalPMF vr)
    : u_prior(std::move(up)), x_prior(std::move(xp)), channel(std::move(ch)), w_rule(std::move(wr)),
      v_rule(std::move(vr)) {
  require(axes_are(u_prior.axes(), {"U"}), "u_prior must be a pmf over axis U");
  require(axes_are(x_prior.axes(), {"X"}) && x_prior.cells() == 2, "x_prior must be a pmf over binary X");
  require(axes_are(channel.given_axes(), {"X"}) && axes_are(channel.out_axes(), {"Y"}), "channel must be Y|X");
  require(channel.rows() == 2, "channel input must be binary");
  require(axes_are(w_rule.given_axes(), {"X", "U"}) && axes_are(w_rule.out_axes(), {"W"}), "w_rule must be W|X,U");
  require(w_rule.cols() == 2, "W must be binary");
  require(w_rule.given_axes()[1].size == u_size(), "w_rule U alphabet does not match u_prior");
  require(axes_are(v_rule.given_axes(), {"W", "Y"}) && axes_are(v_rule.out_axes(), {"V"}), "v_rule must be V|W,Y");
  require(v_rule.given_axes()[0].size == 2 && v_rule.given_axes()[1].size == y_size(),
          "v_rule alphabets do not match (W, Y)");
}

double SourceModel::p_w1_given_x(std::uint8_t x) const {
  double p = 0.0;
  for (std::size_t u = 0; u < u_size(); ++u) p += u_prior[u] * p_w1_given_xu(x, static_cast<std::uint32_t>(u));
  return p;
}

JointPMF SourceModel::joint() const {
  const ConditionalPMF x_free({}, x_prior.axes(), std::vector<double>(x_prior.table().begin(), x_prior.table().end()));
  // w_rule is indexed (X, U); reorder to condition on (U, X) as laid out in the joint.
  std::vector<double> w_ux(u_size() * 2 * 2);
  for (std::size_t u = 0; u < u_size(); ++u)
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t w = 0; w < 2; ++w) w_ux[(u * 2 + x) * 2 + w] = w_rule(x * u_size() + u, w);
  const ConditionalPMF w_given_ux({{"U", u_size()}, {"X", 2}}, {{"W", 2}}, std::move(w_ux));
  auto j = prob::compose(prob::compose(u_prior, x_free), w_given_ux);
  return prob::compose(prob::compose(j, channel), v_rule);
}

nlohmann::json to_json(const SourceModel& m) {
  return {{"u_prior", prob::to_json(m.u_prior)},
          {"x_prior", prob::to_json(m.x_prior)},
          {"channel", prob::to_json(m.channel)},
          {"w_rule", prob::to_json(m.w_rule)},
          {"v_rule", prob::to_json(m.v_rule)}};
}

SourceModel model_from_json(const nlohmann::json& j) {
  for (const char* k : {"u_prior", "x_prior", "channel", "w_rule", "v_rule"})
    if (!j.contains(k)) throw PolarError(std::string("source model lacks '") + k + "'");
  return SourceModel(prob::joint_from_json(j.at("u_prior")), prob::joint_from_json(j.at("x_prior")),
                     prob::conditional_from_json(j.at("channel")), prob::conditional_from_json(j.at("w_rule")),
                     prob::conditional_from_json(j.at("v_rule")));
}

// ------------------------------------------------------------- transform

void polar_transform_inplace(std::span<std::uint8_t> bits) {
  const std::size_t n = bits.size();
  if (!is_power_of_two(n)) throw PolarError("polar transform length must be a power of two");
  for (std::size_t h = 1; h < n; h *= 2)
    for (std::size_t i = 0; i < n; i += 2 * h)
      for (std::size_t j = i; j < i + h; ++j) bits[j] ^= bits[j + h];
}

Bits polar_transform(std::span<const std::uint8_t> bits) {
  Bits out(bits.begin(), bits.end());
  polar_transform_inplace(out);
  return out;
}

// -------------------------------------------------------------------- SC

ScEngine::ScEngine(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) throw PolarError("SC block length must be a power of two");
  const auto levels = static_cast<std::size_t>(std::countr_zero(n));
  scratch_.resize(levels + 1);
  for (std::size_t l = 1; l <= levels; ++l) scratch_[l].resize(n >> l);
}

std::vector<double> x_evidence(const SourceModel& m, std::size_t n) {
  return std::vector<double>(n, 1.0 - 2.0 * m.p_x1());
}

std::vector<double> x_evidence(const SourceModel& m, std::span<const std::uint32_t> y) {
  std::vector<double> d(y.size());
  const double p0 = 1.0 - m.p_x1(), p1 = m.p_x1();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = p0 * m.p_y_given_x(y[i], 0);
    const double b = p1 * m.p_y_given_x(y[i], 1);
    d[i] = a + b > 0.0 ? (a - b) / (a + b) : 0.0;
  }
  return d;
}

std::vector<double> w_evidence(const SourceModel& m, WSide side, std::span<const std::uint8_t> x,
                               std::span<const std::uint32_t> u, std::span<const std::uint32_t> y,
                               std::span<const std::uint32_t> v) {
  const std::size_t n = x.size();
  if (side != WSide::X && u.size() != n) throw PolarError("W evidence needs u of block length");
  if (side == WSide::UXYV && (y.size() != n || v.size() != n)) throw PolarError("W evidence needs y and v");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    double p1 = 0.0;
    switch (side) {
      case WSide::XU:
        p1 = m.p_w1_given_xu(x[i], u[i]);
        break;
      case WSide::X:
        p1 = m.p_w1_given_x(x[i]);
        break;
      case WSide::UXYV: {
        const double a = (1.0 - m.p_w1_given_xu(x[i], u[i])) * m.p_v_given_wy(v[i], 0, y[i]);
        const double b = m.p_w1_given_xu(x[i], u[i]) * m.p_v_given_wy(v[i], 1, y[i]);
        p1 = a + b > 0.0 ? b / (a + b) : 0.5;
        break;
      }
    }
    d[i] = 1.0 - 2.0 * p1;
  }
  return d;
}

namespace {

double probability_at(std::span<const double> evidence, std::size_t j, std::span<const std::uint8_t> prefix) {
  if (prefix.size() != j || j >= evidence.size()) throw PolarError("prefix length must equal the queried index");
  ScEngine engine(evidence.size());
  Bits x(evidence.size());
  double result = 0.0;
  engine.run(evidence, x, [&](std::size_t idx, double p1) -> unsigned {
    if (idx < j) return prefix[idx];
    if (idx == j) result = p1;
    return 0;
  });
  return result;
}

}  // namespace

double sc_probability_x(const SourceModel& m, std::size_t n, std::size_t j, std::span<const std::uint8_t> prefix,
                        std::span<const std::uint32_t> y_obs) {
  if (!y_obs.empty() && y_obs.size() != n) throw PolarError("observation length must equal n");
  return probability_at(y_obs.empty() ? x_evidence(m, n) : x_evidence(m, y_obs), j, prefix);
}

double sc_probability_w(const SourceModel& m, std::size_t n, std::size_t j, std::span<const std::uint8_t> prefix,
                        WSide side, std::span<const std::uint8_t> x, std::span<const std::uint32_t> u,
                        std::span<const std::uint32_t> y, std::span<const std::uint32_t> v) {
  if (x.size() != n) throw PolarError("side information length must equal n");
  return probability_at(w_evidence(m, side, x, u, y, v), j, prefix);
}

// --------------------------------------------------------------- profile

const char* family_name(std::size_t f) {
  static const char* names[kFamilyCount] = {"H(S_j|S^j-1)", "H(S_j|S^j-1,Y^n)", "H(Z_j|Z^j-1,X^n,U^n)",
                                            "H(Z_j|Z^j-1,X^n)", "H(Z_j|Z^j-1,U^n,X^n,Y^n,V^n)"};
  return f < kFamilyCount ? names[f] : "?";
}

double PolarizedEntropyProfile::average(std::size_t f) const {
  double s = 0.0;
  for (double v : family[f].mean) s += v;
  return n ? s / static_cast<double>(n) : 0.0;
}

ModelBlock draw_block(const SourceModel& m, std::size_t n, prob::Rng& rng) {
  ModelBlock b{Symbols(n), Bits(n), Bits(n), Symbols(n), Symbols(n)};
  for (std::size_t i = 0; i < n; ++i) {
    b.u[i] = static_cast<std::uint32_t>(prob::sample_index(m.u_prior.table(), rng));
    b.x[i] = static_cast<std::uint8_t>(prob::sample_index(m.x_prior.table(), rng));
    b.w[i] = rng.uniform() < m.p_w1_given_xu(b.x[i], b.u[i]) ? 1 : 0;
    b.y[i] = static_cast<std::uint32_t>(prob::sample(m.channel, b.x[i], rng));
    b.v[i] = static_cast<std::uint32_t>(prob::sample(m.v_rule, b.w[i] * m.y_size() + b.y[i], rng));
  }
  return b;
}

namespace {

constexpr std::size_t kChunkSamples = 128;

struct ChunkSums {
  std::vector<double> sum[kFamilyCount];
  std::vector<double> sumsq[kFamilyCount];
  double total_sum[kFamilyCount] = {};
  double total_sumsq[kFamilyCount] = {};
};

}  // namespace

PolarizedEntropyProfile estimate_profile(const SourceModel& m, const PolarParams& params, std::uint64_t seed) {
  params.validate();
  const std::size_t n = params.n;
  const std::size_t chunks = (params.mc_samples + kChunkSamples - 1) / kChunkSamples;
  std::vector<ChunkSums> partial(chunks);

  parallel_for(chunks, [&](std::size_t c) {
    ChunkSums& acc = partial[c];
    for (std::size_t f = 0; f < kFamilyCount; ++f) {
      acc.sum[f].assign(n, 0.0);
      acc.sumsq[f].assign(n, 0.0);
    }
    prob::Rng rng(prob::derive_seed(seed, c));
    ScEngine engine(n);
    Bits scratch(n);
    const std::size_t begin = c * kChunkSamples;
    const std::size_t end = std::min(params.mc_samples, begin + kChunkSamples);
    const auto prior = x_evidence(m, n);
    for (std::size_t s = begin; s < end; ++s) {
      const ModelBlock blk = draw_block(m, n, rng);
      const Bits s_true = polar_transform(blk.x);
      const Bits z_true = polar_transform(blk.w);
      const std::vector<double> evidence[kFamilyCount] = {
          prior,
          x_evidence(m, blk.y),
          w_evidence(m, WSide::XU, blk.x, blk.u),
          w_evidence(m, WSide::X, blk.x, blk.u),
          w_evidence(m, WSide::UXYV, blk.x, blk.u, blk.y, blk.v),
      };
      for (std::size_t f = 0; f < kFamilyCount; ++f) {
        const Bits& path = f < kZGivenPastXU ? s_true : z_true;
        double total = 0.0;
        engine.run(evidence[f], scratch, [&](std::size_t j, double p1) -> unsigned {
          const double h = prob::binary_entropy(p1);
          acc.sum[f][j] += h;
          acc.sumsq[f][j] += h * h;
          total += h;
          return path[j];
        });
        acc.total_sum[f] += total;
        acc.total_sumsq[f] += total * total;
      }
    }
  });

  PolarizedEntropyProfile prof;
  prof.n = n;
  prof.samples = params.mc_samples;
  const double N = static_cast<double>(params.mc_samples);
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    double tsum = 0.0, tsumsq = 0.0;
    for (const auto& p : partial) {
      for (std::size_t j = 0; j < n; ++j) {
        sum[j] += p.sum[f][j];
        sumsq[j] += p.sumsq[f][j];
      }
      tsum += p.total_sum[f];
      tsumsq += p.total_sumsq[f];
    }
    auto& est = prof.family[f];
    est.mean.resize(n);
    est.std_error.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double mean = sum[j] / N;
      const double var = N > 1 ? std::max(sumsq[j] / N - mean * mean, 0.0) * N / (N - 1) : 0.0;
      est.mean[j] = std::clamp(mean, 0.0, 1.0);
      est.std_error[j] = std::sqrt(var / N);
    }
    const double tmean = tsum / N;
    const double tvar = N > 1 ? std::max(tsumsq / N - tmean * tmean, 0.0) * N / (N - 1) : 0.0;
    prof.total_std_error[f] = std::sqrt(tvar / N);
  }
  return prof;
}

nlohmann::json to_json(const PolarizedEntropyProfile& p) {
  nlohmann::json fam = nlohmann::json::array();
  for (std::size_t f = 0; f < kFamilyCount; ++f)
    fam.push_back({{"name", family_name(f)},
                   {"mean", p.family[f].mean},
                   {"std_error", p.family[f].std_error},
                   {"average", p.average(f)},
                   {"total_std_error", p.total_std_error[f]}});
  return {{"n", p.n}, {"samples", p.samples}, {"families", fam}};
}

}  // namespace coordsim::polar
