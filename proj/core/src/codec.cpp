#include "coordsim/codec.hpp"

#include <cmath>

#include "coordsim/parallel.hpp"

namespace coordsim::codec {

using polar::IndexSet;
using polar::ScEngine;
using polar::WSide;

namespace {

Bits random_bits(std::size_t count, prob::Rng& rng) {
  Bits b(count);
  for (auto& v : b) v = rng.bit();
  return b;
}

enum Role : std::uint8_t { kFixed, kSample, kDecide };

// Bit assignment plan for one polarized vector.
struct Plan {
  std::vector<std::uint8_t> role;
  Bits value;

  explicit Plan(std::size_t n) : role(n, kSample), value(n, 0) {}

  void fix(const IndexSet& where, std::span<const std::uint8_t> bits) {
    if (where.size() != bits.size()) throw CodecError("bit count does not match index set size");
    for (std::size_t t = 0; t < where.size(); ++t) {
      role[where[t]] = kFixed;
      value[where[t]] = bits[t] & 1u;
    }
  }
  void mark(const IndexSet& where, Role r) {
    for (auto j : where) role[j] = r;
  }
};

Bits gather(const Bits& v, const IndexSet& where) {
  Bits out(where.size());
  for (std::size_t t = 0; t < where.size(); ++t) out[t] = v[where[t]];
  return out;
}

// Runs SC on `evidence` following `plan`; sampled bits use `rng`, decided
// bits take the hard decision P(1) > 1/2. Returns (u, u G_n).
std::pair<Bits, Bits> realize(ScEngine& engine, std::span<const double> evidence, const Plan& plan, prob::Rng* rng) {
  const std::size_t n = engine.size();
  Bits u(n), x(n);
  engine.run(evidence, x, [&](std::size_t j, double p1) -> unsigned {
    std::uint8_t b = 0;
    switch (plan.role[j]) {
      case kFixed:
        b = plan.value[j];
        break;
      case kSample:
        b = rng->uniform() < p1 ? 1 : 0;
        break;
      case kDecide:
        b = p1 > 0.5 ? 1 : 0;
        break;
    }
    u[j] = b;
    return b;
  });
  return {std::move(u), std::move(x)};
}

void check_block(const Symbols& b, std::size_t n, const char* what) {
  if (b.size() != n) throw CodecError(std::string(what) + " block has the wrong length");
}

}  // namespace

CommonRandomness CommonRandomness::draw(const PolarIndexSets& sets, std::size_t k, prob::Rng& rng) {
  if (k < 2) throw CodecError("chaining needs at least two blocks");
  CommonRandomness cr;
  const std::size_t b1p = sets.b1.size() - sets.bp1.size();
  for (std::size_t i = 0; i < k; ++i) {
    cr.c.push_back(random_bits(sets.a1.size(), rng));
    cr.c_prime.push_back(random_bits(b1p, rng));
  }
  cr.c_bar_prime = random_bits(sets.bp1.size(), rng);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    cr.k_keys.push_back(random_bits(sets.a3.size(), rng));
    cr.kp_keys.push_back(random_bits(sets.b3.size(), rng));
  }
  return cr;
}

std::size_t CommonRandomness::bit_count() const {
  std::size_t total = c_bar_prime.size();
  for (const auto* group : {&c, &c_prime, &k_keys, &kp_keys})
    for (const auto& b : *group) total += b.size();
  return total;
}

Bits one_time_pad(std::span<const std::uint8_t> bits, std::span<const std::uint8_t> key) {
  if (bits.size() != key.size()) throw CodecError("one-time pad length mismatch");
  Bits out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = (bits[i] ^ key[i]) & 1u;
  return out;
}

Encoded encode(const SourceModel& m, const PolarIndexSets& sets, const std::vector<Symbols>& u,
               const CommonRandomness& cr, prob::Rng& local) {
  if (u.size() < 3) throw CodecError("encoder needs u_(0) .. u_(k) with k >= 2");
  const std::size_t k = u.size() - 1;
  const std::size_t n = sets.n;
  if (cr.blocks() != k) throw CodecError("common randomness drawn for a different number of blocks");
  for (const auto& b : u) check_block(b, n, "source");

  ScEngine engine(n);
  const auto prior = polar::x_evidence(m, n);
  const IndexSet b1_private = sets.b1_private();
  Encoded out;
  out.blocks.resize(k);

  for (std::size_t i = 1; i <= k; ++i) {
    BlockTranscript& t = out.blocks[i - 1];
    t.u = u[i];
    t.u_prev = u[i - 1];

    Plan sp(n);
    sp.fix(sets.a1, cr.c[i - 1]);
    if (i == 1) {
      sp.fix(sets.a2, random_bits(sets.a2.size(), local));
    } else {
      const BlockTranscript& prev = out.blocks[i - 2];
      sp.fix(sets.ap2, random_bits(sets.ap2.size(), local));
      sp.fix(sets.ap3, one_time_pad(gather(prev.s, sets.a3), cr.k_keys[i - 2]));
      sp.fix(sets.bp3, one_time_pad(gather(prev.z, sets.b3), cr.kp_keys[i - 2]));
    }
    std::tie(t.s, t.x) = realize(engine, prior, sp, &local);

    Plan zp(n);
    zp.fix(sets.bp1, cr.c_bar_prime);
    zp.fix(b1_private, cr.c_prime[i - 1]);
    const auto w_ev = polar::w_evidence(m, WSide::XU, t.x, t.u_prev);
    std::tie(t.z, t.w) = realize(engine, w_ev, zp, &local);
  }
  out.payload.s_last_a3 = gather(out.blocks.back().s, sets.a3);
  out.payload.z_last_b3 = gather(out.blocks.back().z, sets.b3);
  return out;
}

Symbols transmit(const SourceModel& m, std::span<const std::uint8_t> x, prob::Rng& rng) {
  Symbols y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = static_cast<std::uint32_t>(prob::sample(m.channel, x[i], rng));
  return y;
}

void decode(const SourceModel& m, const PolarIndexSets& sets, const SideChannelPayload& payload,
            const CommonRandomness& cr, std::vector<BlockTranscript>& blocks, prob::Rng& rng) {
  const std::size_t k = blocks.size();
  const std::size_t n = sets.n;
  if (k < 2 || cr.blocks() != k) throw CodecError("decoder block count mismatch");
  if (payload.s_last_a3.size() != sets.a3.size() || payload.z_last_b3.size() != sets.b3.size())
    throw CodecError("side-channel payload has the wrong size");

  ScEngine engine(n);
  const IndexSet b1_private = sets.b1_private();
  for (std::size_t i = k; i >= 1; --i) {
    BlockTranscript& t = blocks[i - 1];
    check_block(t.y, n, "channel output");

    Plan sp(n);
    sp.mark(sets.a2, kDecide);
    sp.mark(sets.a4, kDecide);
    sp.fix(sets.a1, cr.c[i - 1]);
    Plan zp(n);
    zp.mark(sets.b4, kDecide);
    zp.fix(sets.bp1, cr.c_bar_prime);
    zp.fix(b1_private, cr.c_prime[i - 1]);
    if (i == k) {
      sp.fix(sets.a3, payload.s_last_a3);
      zp.fix(sets.b3, payload.z_last_b3);
    } else {
      const Bits& next = blocks[i].s_hat;
      sp.fix(sets.a3, one_time_pad(gather(next, sets.ap3), cr.k_keys[i - 1]));
      zp.fix(sets.b3, one_time_pad(gather(next, sets.bp3), cr.kp_keys[i - 1]));
    }

    Bits x_hat;
    std::tie(t.s_hat, x_hat) = realize(engine, polar::x_evidence(m, t.y), sp, nullptr);
    const auto w_ev = polar::w_evidence(m, WSide::X, x_hat, {});
    std::tie(t.z_hat, t.w_hat) = realize(engine, w_ev, zp, nullptr);

    t.v.resize(n);
    for (std::size_t j = 0; j < n; ++j)
      t.v[j] = static_cast<std::uint32_t>(prob::sample(m.v_rule, t.w_hat[j] * m.y_size() + t.y[j], rng));
    t.s_ok = !t.s.empty() && t.s_hat == t.s;
    t.z_ok = !t.z.empty() && t.z_hat == t.z;
  }
}

// ------------------------------------------------------------- statistics

std::size_t tuple_code(const SourceModel& m, std::uint32_t u, std::uint8_t x, std::uint32_t y, std::uint32_t v) {
  return ((static_cast<std::size_t>(u) * 2 + x) * m.y_size() + y) * m.v_size() + v;
}

std::vector<double> tuple_histogram(const SourceModel& m, const std::vector<BlockTranscript>& blocks, std::size_t first,
                                    std::size_t last) {
  if (first < 1 || last > blocks.size() || first > last) throw CodecError("block range out of bounds");
  std::vector<double> counts(m.u_size() * 2 * m.y_size() * m.v_size(), 0.0);
  for (std::size_t i = first; i <= last; ++i) {
    const auto& t = blocks[i - 1];
    for (std::size_t j = 0; j < t.x.size(); ++j) counts[tuple_code(m, t.u_prev[j], t.x[j], t.y[j], t.v[j])] += 1.0;
  }
  return counts;
}

prob::JointPMF coordination_target(const SourceModel& m) { return prob::marginalize(m.joint(), {"U", "X", "Y", "V"}); }

ConsecutivePairCounts::ConsecutivePairCounts(const SourceModel& m)
    : model_(&m), cells_(m.u_size() * 2 * m.y_size() * m.v_size()) {
  if (cells_ * cells_ > prob::kMaxCells) throw CodecError("pair histogram exceeds the table cap");
  counts_.assign(cells_ * cells_, 0.0);
}

void ConsecutivePairCounts::add(const std::vector<BlockTranscript>& blocks, std::size_t first, std::size_t last) {
  if (first < 1 || last > blocks.size() || first > last) throw CodecError("block range out of bounds");
  for (std::size_t i = first + 1; i <= last; ++i) {
    const auto& a = blocks[i - 2];
    const auto& b = blocks[i - 1];
    for (std::size_t j = 0; j < a.x.size(); ++j) {
      const auto ca = tuple_code(*model_, a.u_prev[j], a.x[j], a.y[j], a.v[j]);
      const auto cb = tuple_code(*model_, b.u_prev[j], b.x[j], b.y[j], b.v[j]);
      counts_[ca * cells_ + cb] += 1.0;
      ++samples_;
    }
  }
}

double ConsecutivePairCounts::mutual_information() const {
  return plugin_mutual_information(counts_, cells_, cells_);
}

double plugin_mutual_information(std::span<const double> counts, std::size_t rows, std::size_t cols) {
  if (counts.size() != rows * cols) throw CodecError("count table shape mismatch");
  double total = 0.0;
  std::vector<double> r(rows, 0.0), c(cols, 0.0);
  for (std::size_t a = 0; a < rows; ++a)
    for (std::size_t b = 0; b < cols; ++b) {
      const double v = counts[a * cols + b];
      r[a] += v;
      c[b] += v;
      total += v;
    }
  if (total <= 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t a = 0; a < rows; ++a)
    for (std::size_t b = 0; b < cols; ++b) {
      const double v = counts[a * cols + b];
      if (v > 0.0) mi += v / total * std::log2(v * total / (r[a] * c[b]));
    }
  return std::max(mi, 0.0);
}

DivergenceCertificate divergence_certificate(const polar::PolarizedEntropyProfile& profile,
                                             const PolarIndexSets& sets, const polar::PolarParams& params) {
  DivergenceCertificate d;
  double var = 0.0;
  auto add = [&](const IndexSet& where, std::size_t family) {
    for (auto j : where) {
      d.value += 1.0 - profile.family[family].mean[j];
      var += profile.family[family].std_error[j] * profile.family[family].std_error[j];
    }
  };
  add(sets.a1, polar::kSGivenPast);
  add(sets.a2, polar::kSGivenPast);
  add(sets.b1, polar::kZGivenPastXU);
  d.std_error = std::sqrt(var);
  d.bound = 2.0 * static_cast<double>(params.n) * params.delta();
  return d;
}

// ------------------------------------------------------------ end to end

TrialOutput run_trial(const SourceModel& m, const polar::Construction& construction, const polar::PolarParams& params,
                      std::size_t k, std::uint64_t seed, const TrialOptions& options) {
  const auto& sets = construction.sets;
  const std::size_t n = sets.n;
  if (n != params.n) throw CodecError("construction block length differs from parameters");

  prob::Rng cr_rng(prob::derive_seed(seed, 1));
  prob::Rng src_rng(prob::derive_seed(seed, 2));
  prob::Rng enc_rng(prob::derive_seed(seed, 3));
  prob::Rng ch_rng(prob::derive_seed(seed, 4));
  prob::Rng dec_rng(prob::derive_seed(seed, 5));

  const auto cr = CommonRandomness::draw(sets, k, cr_rng);
  std::vector<Symbols> u(k + 1, Symbols(n));
  for (auto& s : u[0]) s = static_cast<std::uint32_t>(src_rng.below(m.u_size()));
  for (std::size_t i = 1; i <= k; ++i)
    for (auto& s : u[i]) s = static_cast<std::uint32_t>(prob::sample_index(m.u_prior.table(), src_rng));

  Encoded enc = encode(m, sets, u, cr, enc_rng);
  for (auto& t : enc.blocks) t.y = transmit(m, t.x, ch_rng);
  decode(m, sets, enc.payload, cr, enc.blocks, dec_rng);

  TrialOutput out;
  TrialResult& r = out.result;
  r.n = n;
  r.k = k;
  r.seed = seed;
  std::size_t s_bad = 0, z_bad = 0;
  for (const auto& t : enc.blocks) {
    s_bad += t.s_ok ? 0 : 1;
    z_bad += t.z_ok ? 0 : 1;
  }
  r.s_error_rate = static_cast<double>(s_bad) / static_cast<double>(k);
  r.w_error_rate = static_cast<double>(z_bad) / static_cast<double>(k);

  auto hist = tuple_histogram(m, enc.blocks, 1, k - 1);
  const double total = static_cast<double>((k - 1) * n);
  for (auto& h : hist) h /= total;
  r.tv_estimate = prob::total_variation(hist, coordination_target(m).table());

  ConsecutivePairCounts pairs(m);
  pairs.add(enc.blocks, 1, k - 1);
  r.mi_consecutive = pairs.mutual_information();

  const auto rates = polar::rate_report(sets, k);
  r.cr_rate = rates.common_randomness;
  r.side_rate = rates.side_channel;
  r.d1_plus_d2 = divergence_certificate(construction.profile, sets, params).value;
  if (options.keep_blocks) out.blocks = std::move(enc.blocks);
  return out;
}

std::vector<TrialResult> run_end_to_end(const SourceModel& m, const polar::Construction& construction,
                                        const polar::PolarParams& params, std::size_t k,
                                        std::span<const std::uint64_t> seeds) {
  std::vector<TrialResult> results(seeds.size());
  parallel_for(seeds.size(),
               [&](std::size_t t) { results[t] = run_trial(m, construction, params, k, seeds[t]).result; });
  return results;
}

nlohmann::json to_json(const TrialResult& r) {
  return {{"n", r.n},
          {"k", r.k},
          {"seed", r.seed},
          {"s_error_rate", r.s_error_rate},
          {"w_error_rate", r.w_error_rate},
          {"tv_estimate", r.tv_estimate},
          {"mi_consecutive", r.mi_consecutive},
          {"cr_rate", r.cr_rate},
          {"side_rate", r.side_rate},
          {"d1_plus_d2", r.d1_plus_d2}};
}

}  // namespace coordsim::codec
