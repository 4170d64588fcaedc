// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: coordsim_acceptance [--known-failures 4,10,11]
// The exit status is nonzero when a criterion outside the known-failure list
// fails. Known failures are still printed as FAIL.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "coordsim/binning.hpp"
#include "coordsim/codec.hpp"
#include "coordsim/harness.hpp"
#include "coordsim/index_sets.hpp"
#include "coordsim/region.hpp"
#include "test_support.hpp"

using namespace coordsim;
using coordsim::testing::bundled_model;
using coordsim::testing::h2;
using coordsim::testing::random_joint;
using coordsim::testing::random_planted;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const double kH01 = h2(0.1);

// Constructions shared between criteria.
struct Shared {
  polar::SourceModel bsc = bundled_model("bsc_constant_w");
  std::optional<polar::Construction> bsc1024;
  std::optional<std::string> bsc1024_error;
  double bsc1024_seconds = 0.0;

  const polar::Construction* construction_1024() {
    if (!bsc1024 && !bsc1024_error) {
      const auto t0 = std::chrono::steady_clock::now();
      polar::PolarParams p;
      p.n = 1024;
      p.mc_samples = 20000;
      try {
        bsc1024 = polar::construct(bsc, p, 1);
      } catch (const polar::CapacityError& e) {
        bsc1024_error = e.what();
      }
      bsc1024_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return bsc1024 ? &*bsc1024 : nullptr;
  }
};

Outcome lemma_suite() {
  prob::Rng rng(101);
  const std::size_t instances = 200;
  double worst_tv = 0.0, worst_kl = 0.0, worst_l3 = -1e9, worst_l4 = -1e9;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto p = random_joint({{"A", 4}}, rng);
    const auto q = random_joint({{"A", 4}}, rng);
    const auto ch = testing::random_conditional({{"A", 4}}, {{"B", 3}}, rng);
    worst_tv = std::max(worst_tv, std::abs(prob::total_variation(prob::compose(p, ch), prob::compose(q, ch)) -
                                           prob::total_variation(p, q)));
    worst_kl = std::max(worst_kl, std::abs(prob::kl_divergence(prob::compose(p, ch), prob::compose(q, ch)) -
                                           prob::kl_divergence(p, q)));

    // Entropy continuity on a pair at distance eps <= 1/2.
    const double mix = 0.25 * rng.uniform();
    std::vector<double> r(4);
    for (std::size_t i = 0; i < 4; ++i) r[i] = (1 - mix) * p.table()[i] + mix * q.table()[i];
    const prob::JointPMF pr({{"A", 4}}, r);
    const double eps = prob::total_variation(p, pr);
    if (eps > 0.0 && eps <= 0.5)
      worst_l3 = std::max(worst_l3, std::abs(prob::entropy(p) - prob::entropy(pr)) - eps * std::log2(4.0 / eps));

    // Some a has conditionals within twice the joint distance.
    const auto pab = random_joint({{"A", 3}, {"B", 3}}, rng);
    const auto qab = random_joint({{"A", 3}, {"B", 3}}, rng);
    const double e2 = prob::total_variation(pab, qab);
    const auto cp = prob::condition(pab, {"B"}, {"A"});
    const auto cq = prob::condition(qab, {"B"}, {"A"});
    double best = 1e9;
    for (std::size_t a = 0; a < 3; ++a) best = std::min(best, prob::total_variation(cp.row(a), cq.row(a)));
    worst_l4 = std::max(worst_l4, best - 2.0 * e2);
  }
  const bool ok = worst_tv <= 1e-10 && worst_kl <= 1e-10 && worst_l3 <= 0.0 && worst_l4 <= 0.0;
  return {ok, fmt("%zu instances; max |dTV| %.2e, max |dKL| %.2e, continuity margin %.3f, scan margin %.3f",
                  instances, worst_tv, worst_kl, worst_l3, worst_l4)};
}

Outcome pinsker_and_nesting() {
  prob::Rng rng(202);
  std::size_t pinsker_bad = 0, gap_bad = 0, nesting_bad = 0, feasible = 0;
  double worst_gap = 0.0;
  for (std::size_t t = 0; t < 100; ++t) {
    const auto inst = random_planted(rng);
    const auto other = random_planted(rng);
    const auto p = inst.target.joint();
    const auto q = region::induced_joint(inst.target, other.aux);
    const auto q4 = prob::marginalize(q, {"U", "X", "Y", "V"});
    const double kl = prob::kl_divergence(p, q4);
    if (prob::total_variation(p, q4) > std::sqrt(2.0 * std::log(2.0) * kl) + 1e-12) ++pinsker_bad;

    const auto v = region::evaluate(inst.target, inst.aux);
    const auto induced = region::induced_joint(inst.target, inst.aux);
    const double hx_wy = prob::conditional_entropy(induced, {"X"}, {"W", "Y"});
    const double gap = std::abs((v.inner_rate - v.outer_rate) - hx_wy);
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-9 || v.inner_rate - v.outer_rate < -1e-12) ++gap_bad;
    if (v.feasible) {
      ++feasible;
      if (!region::empirical_region_check(inst.target, inst.aux)) ++nesting_bad;
    }
  }
  return {pinsker_bad == 0 && gap_bad == 0 && nesting_bad == 0,
          fmt("100 decompositions; Pinsker violations %zu, rate-gap mismatches %zu (max %.1e), %zu feasible of which "
              "%zu rejected by the empirical check",
              pinsker_bad, gap_bad, worst_gap, feasible, nesting_bad)};
}

Outcome planted_recovery() {
  const auto m = bundled_model("planted_w2");
  const auto target = harness::target_from_model(m);
  const auto planted = region::evaluate(target, harness::aux_from_model(m));
  region::SearchBudget budget;
  budget.restarts = 32;
  const auto v = region::search_auxiliary(target, 2, budget);
  const double drate = std::abs(v.inner_rate - planted.inner_rate);
  return {v.residual <= 1e-4 && drate <= 0.05,
          fmt("residual %.2e (<= 1e-4), inner rate %.4f vs planted %.4f (diff %.4f <= 0.05), %zu/%zu restarts feasible",
              v.residual, v.inner_rate, planted.inner_rate, drate, v.feasible_restarts, v.restarts)};
}

Outcome polarization_limits(Shared& sh) {
  const auto* c = sh.construction_1024();
  if (!c) return {false, "CapacityError: " + *sh.bsc1024_error};
  const auto& s = c->sets;
  const double n = static_cast<double>(s.n);
  const double a13 = static_cast<double>(s.a1.size() + s.a3.size()) / n;
  const double a12 = static_cast<double>(s.a1.size() + s.a2.size()) / n;
  const bool cap = s.a2.size() >= s.a3.size() + s.b3.size();
  const bool ok = std::abs(a13 - kH01) <= 0.05 && std::abs(a12 - 1.0) <= 0.05 && cap && sh.bsc1024_seconds < 300;
  polar::PolarParams p;
  return {ok, fmt("|A1uA3|/n = %.4f (target %.4f +- 0.05), |A1uA2|/n = %.4f, |A2| = %zu >= |A3|+|B3| = %zu, "
                  "delta = %.4f, %.1f s",
                  a13, kH01, a12, s.a2.size(), s.a3.size() + s.b3.size(), p.delta(), sh.bsc1024_seconds)};
}

Outcome entropy_conservation(Shared& sh) {
  const auto* c = sh.construction_1024();
  if (!c) return {false, "construction failed"};
  const double hs = c->profile.average(polar::kSGivenPast);
  const double hsy = c->profile.average(polar::kSGivenPastY);
  return {std::abs(hs - 1.0) <= 0.02 && std::abs(hsy - kH01) <= 0.02,
          fmt("mean H(S_j|S^j-1) = %.4f (1 +- 0.02), mean H(S_j|S^j-1,Y^n) = %.4f (%.4f +- 0.02)", hs, hsy, kH01)};
}

Outcome noiseless_codec() {
  const auto m = bundled_model("noiseless_w_eq_u");
  polar::PolarParams p;
  p.n = 256;
  const auto c = polar::construct(m, p, 1);
  const std::size_t k = 4, trials = 100;
  std::size_t exact = 0;
  const std::size_t rows = 2 * m.y_size(), vs = m.v_size();
  std::vector<double> counts(rows * vs, 0.0);
  std::size_t symbols = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    auto out = codec::run_trial(m, c, p, k, 1000 + t, {.keep_blocks = true});
    bool all = true;
    for (const auto& b : out.blocks) {
      all = all && b.s_ok && b.z_ok;
      for (std::size_t j = 0; j < b.v.size(); ++j) counts[(b.w_hat[j] * m.y_size() + b.y[j]) * vs + b.v[j]] += 1.0;
      symbols += b.v.size();
    }
    exact += all ? 1 : 0;
  }
  double chi2 = 0.0;
  std::size_t dof = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t v = 0; v < vs; ++v) total += counts[r * vs + v];
    if (total == 0.0) continue;
    dof += vs - 1;
    for (std::size_t v = 0; v < vs; ++v) {
      const double e = total * m.v_rule(r, v);
      if (e > 0.0) chi2 += (counts[r * vs + v] - e) * (counts[r * vs + v] - e) / e;
    }
  }
  const double pval = boost::math::cdf(boost::math::complement(boost::math::chi_squared(double(dof)), chi2));
  return {exact == trials && symbols >= 100000 && pval > 0.01,
          fmt("%zu/%zu trials recovered every s and z; chi2 = %.2f on %zu dof over %zu symbols, p = %.3f (> 0.01)",
              exact, trials, chi2, dof, symbols, pval)};
}

Outcome noisy_trend(Shared& sh) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto* c1024 = sh.construction_1024();
  if (!c1024) return {false, "construction failed"};
  polar::PolarParams p256;
  p256.n = 256;
  const auto c256 = polar::construct(sh.bsc, p256, 1);
  polar::PolarParams p1024;
  p1024.n = 1024;
  std::vector<std::uint64_t> seeds(10);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = 1 + i;
  const auto r256 = codec::run_end_to_end(sh.bsc, c256, p256, 8, seeds);
  const auto r1024 = codec::run_end_to_end(sh.bsc, *c1024, p1024, 8, seeds);
  std::size_t better = 0;
  double worst_mi = 0.0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    better += r1024[i].tv_estimate <= r256[i].tv_estimate ? 1 : 0;
    worst_mi = std::max(worst_mi, r1024[i].mi_consecutive);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() + sh.bsc1024_seconds;
  return {better >= 8 && worst_mi <= 0.05 && secs < 600,
          fmt("TV(n=1024) <= TV(n=256) in %zu/10 paired seeds (need 8), max consecutive-block MI %.4f bits (<= 0.05), "
              "%.1f s",
              better, worst_mi, secs)};
}

Outcome causality_audit() {
  prob::Rng pick(808);
  std::size_t violations = 0, downstream_changes = 0;
  const char* names[] = {"noiseless_w_eq_u", "bsc_constant_w"};
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const auto m = bundled_model(names[trial % 2]);
    polar::PolarParams p;
    p.n = 64;
    p.mc_samples = 2000;
    const auto c = polar::construct(m, p, 7);
    const std::size_t k = 5;
    prob::Rng cr_rng(prob::derive_seed(trial, 1)), src(prob::derive_seed(trial, 2));
    const auto cr = codec::CommonRandomness::draw(c.sets, k, cr_rng);
    std::vector<polar::Symbols> u(k + 1, polar::Symbols(p.n));
    for (auto& blk : u)
      for (auto& s : blk) s = static_cast<std::uint32_t>(src.below(m.u_size()));
    prob::Rng e1(prob::derive_seed(trial, 3));
    const auto base = codec::encode(m, c.sets, u, cr, e1);

    const std::size_t i = 1 + pick.below(k);
    auto flipped = u;
    for (std::size_t j = 0; j < p.n; ++j)
      if (pick.bit()) flipped[i][j] = (flipped[i][j] + 1) % static_cast<std::uint32_t>(m.u_size());
    prob::Rng e2(prob::derive_seed(trial, 3));
    const auto alt = codec::encode(m, c.sets, flipped, cr, e2);
    for (std::size_t b = 1; b <= i; ++b)
      if (alt.blocks[b - 1].x != base.blocks[b - 1].x) ++violations;
    for (std::size_t b = i + 1; b <= k; ++b)
      if (alt.blocks[b - 1].x != base.blocks[b - 1].x || alt.blocks[b - 1].z != base.blocks[b - 1].z)
        ++downstream_changes;
  }
  return {violations == 0, fmt("20 differential trials: %zu blocks x_(1..i) changed after flipping u_(i); "
                               "%zu later blocks changed (the flip is observable downstream)",
                               violations, downstream_changes)};
}

Outcome divergence_certificate(Shared& sh) {
  const auto* c = sh.construction_1024();
  if (!c) return {false, "construction failed"};
  polar::PolarParams p;
  p.n = 1024;
  const auto d = codec::divergence_certificate(c->profile, c->sets, p);
  return {d.value <= d.bound + 3.0 * d.std_error,
          fmt("D1+D2 = %.4g <= 2 n delta + 3 se = %.4g + 3 x %.2g", d.value, d.bound, d.std_error)};
}

Outcome rate_consistency(Shared& sh) {
  const auto* c = sh.construction_1024();
  if (!c) return {false, "construction failed"};
  const auto rates = polar::rate_report(c->sets, 16);
  const auto ledger =
      region::binning_rate_ledger(harness::target_from_model(sh.bsc), harness::aux_from_model(sh.bsc));
  const double diff = std::abs(rates.common_randomness - ledger.r0_lower_bound);
  return {diff <= 0.08, fmt("codec CR rate %.4f vs ledger R0 bound %.4f at k=16 (diff %.4f <= 0.08)",
                            rates.common_randomness, ledger.r0_lower_bound, diff)};
}

Outcome binning_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto joint = binning::dsbs(0.1);
  binning::RegimeSweep sw{{12}, {0.3, 0.8}, 100, 400, 11};
  const auto rows = binning::verify_lemma_regimes(joint, sw);
  const binning::BinningTrialStats *lo = nullptr, *hi = nullptr;
  for (const auto& r : rows)
    if (r.lemma == binning::Lemma::SlepianWolf) (r.rate < 0.5 ? lo : hi) = &r;
  std::size_t paired_wins = 0;
  for (std::size_t i = 0; i < hi->per_replicate.size(); ++i)
    paired_wins += hi->per_replicate[i] < lo->per_replicate[i] ? 1 : 0;

  binning::RegimeSweep ex{{4, 8, 12}, {0.2}, 100, 1, 12};
  auto extraction = [&](const prob::JointPMF& j) {
    std::vector<double> kl;
    for (const auto& r : binning::verify_lemma_regimes(j, ex))
      if (r.lemma == binning::Lemma::Extraction) kl.push_back(r.kl_to_uniform);
    return kl;
  };
  const auto kl = extraction(joint);
  const bool mono = kl.size() == 3 && kl[1] < kl[0] && kl[2] < kl[1];
  // Reported alongside: the same sweep with B independent of A.
  const auto ind = extraction(prob::JointPMF({{"A", 2}, {"B", 2}}, {0.25, 0.25, 0.25, 0.25}));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {hi->error_rate < lo->error_rate && mono && secs < 300,
          fmt("SW error R=0.8: %.4f < R=0.3: %.4f (lower in %zu/100 pairs); DSBS extraction KL at R=0.2, "
              "n=4,8,12: %.4f, %.4f, %.4f (must decrease); with B independent of A: %.2e, %.2e, %.2e; %.1f s",
              hi->error_rate, lo->error_rate, paired_wins, kl[0], kl[1], kl[2], ind[0], ind[1], ind[2], secs)};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> known;
  for (int a = 1; a + 1 < argc; ++a)
    if (std::string(argv[a]) == "--known-failures") known = parse_list(argv[a + 1]);

  Shared shared;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"lemma identities and bounds", lemma_suite},
      {"Pinsker and region nesting", pinsker_and_nesting},
      {"planted witness recovery", planted_recovery},
      {"polarization set fractions", [&] { return polarization_limits(shared); }},
      {"entropy conservation", [&] { return entropy_conservation(shared); }},
      {"noiseless codec correctness", noiseless_codec},
      {"noisy codec trend", [&] { return noisy_trend(shared); }},
      {"strict causality audit", causality_audit},
      {"divergence certificate", [&] { return divergence_certificate(shared); }},
      {"rate consistency", [&] { return rate_consistency(shared); }},
      {"binning oracle", binning_oracle},
  };

  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.1f s]%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(), secs,
                !o.pass && known.count(id) ? " (known failure)" : "");
    std::fflush(stdout);
    if (!o.pass && !known.count(id)) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
