#include "coordsim/region.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>

#include "coordsim/parallel.hpp"
#include "coordsim/prob_json.hpp"

namespace coordsim::region {

using prob::Alphabet;
using prob::AxisList;
using prob::ProbError;

namespace {

void expect_axes(const std::vector<Alphabet>& axes, std::initializer_list<const char*> names, const char* what) {
  if (axes.size() != names.size()) throw ProbError(std::string(what) + ": unexpected axis count");
  std::size_t i = 0;
  for (const char* n : names) {
    if (axes[i].name != n) throw ProbError(std::string(what) + ": expected axis '" + n + "', found '" + axes[i].name + "'");
    ++i;
  }
}

ConditionalPMF independent_of_nothing(const JointPMF& p) {
  return ConditionalPMF({}, p.axes(), std::vector<double>(p.table().begin(), p.table().end()));
}

}  // namespace

// --------------------------------------------------------------- target

CoordinationTarget::CoordinationTarget(JointPMF pu, JointPMF px, ConditionalPMF ch, ConditionalPMF rule)
    : p_u(std::move(pu)), p_x(std::move(px)), channel(std::move(ch)), action_rule(std::move(rule)) {
  expect_axes(p_u.axes(), {"U"}, "source prior");
  expect_axes(p_x.axes(), {"X"}, "input prior");
  expect_axes(channel.given_axes(), {"X"}, "channel given axes");
  expect_axes(channel.out_axes(), {"Y"}, "channel output axes");
  expect_axes(action_rule.given_axes(), {"U", "X", "Y"}, "action rule given axes");
  expect_axes(action_rule.out_axes(), {"V"}, "action rule output axes");
  if (channel.given_axes()[0].size != x_size()) throw ProbError("channel input alphabet does not match P_X");
  if (action_rule.given_axes()[0].size != u_size() || action_rule.given_axes()[1].size != x_size() ||
      action_rule.given_axes()[2].size != y_size())
    throw ProbError("action rule alphabets do not match (U, X, Y)");
}

JointPMF CoordinationTarget::joint() const {
  auto ux = prob::compose(p_u, independent_of_nothing(p_x));
  return prob::compose(prob::compose(ux, channel), action_rule);
}

FactorizationError::FactorizationError(std::string condition, double amount)
    : std::runtime_error("target factorization violated (" + condition + "): deviation " + std::to_string(amount)),
      condition_(std::move(condition)),
      amount_(amount) {}

CoordinationTarget check_target_factorization(const JointPMF& joint, const ConditionalPMF& channel, double tol) {
  for (const char* n : {"U", "X", "Y", "V"})
    if (!joint.has_axis(n)) throw ProbError(std::string("target joint lacks axis '") + n + "'");
  if (joint.rank() != 4) throw ProbError("target joint must have exactly the axes U, X, Y, V");
  const JointPMF j = prob::marginalize(joint, {"U", "X", "Y", "V"});

  const double iux = prob::mutual_information(j, {"U"}, {"X"});
  if (iux > tol) throw FactorizationError("independence", iux);

  expect_axes(channel.given_axes(), {"X"}, "channel given axes");
  expect_axes(channel.out_axes(), {"Y"}, "channel output axes");
  const auto px = prob::marginalize(j, {"X"});
  const auto y_given_x = prob::condition(j, {"Y"}, {"X"});
  if (y_given_x.rows() != channel.rows() || y_given_x.cols() != channel.cols())
    throw FactorizationError("channel", 2.0);
  double worst = 0.0;
  for (std::size_t x = 0; x < channel.rows(); ++x) {
    if (!(px[x] > 0.0)) continue;
    worst = std::max(worst, prob::total_variation(y_given_x.row(x), channel.row(x)));
  }
  if (worst > tol) throw FactorizationError("channel", worst);

  return CoordinationTarget(prob::marginalize(j, {"U"}), px, channel, prob::condition(j, {"V"}, {"U", "X", "Y"}));
}

// ---------------------------------------------------------- evaluation

std::size_t cardinality_bound(const CoordinationTarget& t) {
  return t.u_size() * t.x_size() * t.y_size() * t.v_size() + 4;
}

JointPMF induced_joint(const CoordinationTarget& target, const AuxiliaryDecomposition& aux) {
  expect_axes(aux.p_w_given_ux.given_axes(), {"U", "X"}, "P_{W|UX} given axes");
  expect_axes(aux.p_w_given_ux.out_axes(), {"W"}, "P_{W|UX} output axes");
  expect_axes(aux.p_v_given_wy.given_axes(), {"W", "Y"}, "P_{V|WY} given axes");
  expect_axes(aux.p_v_given_wy.out_axes(), {"V"}, "P_{V|WY} output axes");
  if (aux.p_w_given_ux.cols() != aux.w_size || aux.p_v_given_wy.given_axes()[0].size != aux.w_size)
    throw ProbError("auxiliary alphabet size mismatch");
  auto ux = prob::compose(target.p_u, independent_of_nothing(target.p_x));
  auto uxw = prob::compose(ux, aux.p_w_given_ux);
  auto uxwy = prob::compose(uxw, target.channel);
  return prob::compose(uxwy, aux.p_v_given_wy);
}

RegionVerdict evaluate(const CoordinationTarget& target, const AuxiliaryDecomposition& aux, double tol) {
  const auto joint = induced_joint(target, aux);
  RegionVerdict v{.witness = aux};
  v.residual = prob::total_variation(prob::marginalize(joint, {"U", "X", "Y", "V"}), target.joint());
  v.info_slack = prob::mutual_information(joint, {"W", "X"}, {"Y"}) - prob::mutual_information(joint, {"W", "X"}, {"U"});
  v.outer_rate = prob::mutual_information(joint, {"W"}, {"U", "X", "V"}, {"Y"});
  v.inner_rate = v.outer_rate + prob::conditional_entropy(joint, {"X"}, {"W", "Y"});
  v.feasible = v.residual <= tol && v.info_slack >= -kInfoSlackTolerance;
  return v;
}

ConstraintPair equivalent_constraint_check(const JointPMF& induced) {
  ConstraintPair c;
  c.lhs = prob::mutual_information(induced, {"W"}, {"U"}, {"X"});
  c.rhs = prob::mutual_information(induced, {"X"}, {"Y"});
  const double direct = prob::mutual_information(induced, {"W", "X"}, {"Y"}) -
                        prob::mutual_information(induced, {"W", "X"}, {"U"});
  const double equivalent = c.rhs - c.lhs;
  const bool agree = (direct >= -1e-9 && equivalent >= -1e-9) || (direct < 1e-9 && equivalent < 1e-9);
  if (!agree)
    throw ProbError("information constraint forms disagree: I(WX;Y)-I(WX;U)=" + std::to_string(direct) +
                    ", I(X;Y)-I(W;U|X)=" + std::to_string(equivalent));
  return c;
}

bool empirical_region_check(const CoordinationTarget& target, const AuxiliaryDecomposition& aux, double tol) {
  const auto v = evaluate(target, aux, tol);
  return v.residual <= tol && v.info_slack >= -kInfoSlackTolerance;
}

// -------------------------------------------------------------- search

namespace {

// Euclidean projection of v onto the probability simplex.
void project_simplex(std::span<double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - t > 0.0) theta = t;
  }
  for (auto& x : v) x = std::max(x - theta, 0.0);
}

class BilinearFit {
 public:
  BilinearFit(const CoordinationTarget& t, std::size_t nw)
      : nu_(t.u_size()), nx_(t.x_size()), ny_(t.y_size()), nv_(t.v_size()), nw_(nw) {
    weight_.resize(nu_ * nx_ * ny_);
    target_.resize(nu_ * nx_ * ny_ * nv_);
    for (std::size_t u = 0; u < nu_; ++u)
      for (std::size_t x = 0; x < nx_; ++x)
        for (std::size_t y = 0; y < ny_; ++y) {
          const std::size_t r = (u * nx_ + x) * ny_ + y;
          weight_[r] = t.p_u[u] * t.p_x[x] * t.channel(x, y);
          for (std::size_t v = 0; v < nv_; ++v) target_[r * nv_ + v] = t.action_rule(r, v);
        }
  }

  std::size_t a_rows() const { return nu_ * nx_; }
  std::size_t b_rows() const { return nw_ * ny_; }

  // Weighted squared error; fills residual_ as a side effect.
  double objective(const std::vector<double>& a, const std::vector<double>& b) {
    residual_.assign(target_.size(), 0.0);
    double f = 0.0;
    for (std::size_t ux = 0; ux < nu_ * nx_; ++ux)
      for (std::size_t y = 0; y < ny_; ++y) {
        const std::size_t r = ux * ny_ + y;
        for (std::size_t v = 0; v < nv_; ++v) {
          double m = 0.0;
          for (std::size_t w = 0; w < nw_; ++w) m += a[ux * nw_ + w] * b[(w * ny_ + y) * nv_ + v];
          const double d = m - target_[r * nv_ + v];
          residual_[r * nv_ + v] = d;
          f += weight_[r] * d * d;
        }
      }
    return f;
  }

  double l1_residual() const {
    double s = 0.0;
    for (std::size_t r = 0; r < weight_.size(); ++r)
      for (std::size_t v = 0; v < nv_; ++v) s += weight_[r] * std::abs(residual_[r * nv_ + v]);
    return s;
  }

  std::vector<double> grad_a(const std::vector<double>& b) const {
    std::vector<double> g(nu_ * nx_ * nw_, 0.0);
    for (std::size_t ux = 0; ux < nu_ * nx_; ++ux)
      for (std::size_t y = 0; y < ny_; ++y) {
        const std::size_t r = ux * ny_ + y;
        for (std::size_t w = 0; w < nw_; ++w) {
          double s = 0.0;
          for (std::size_t v = 0; v < nv_; ++v) s += residual_[r * nv_ + v] * b[(w * ny_ + y) * nv_ + v];
          g[ux * nw_ + w] += 2.0 * weight_[r] * s;
        }
      }
    return g;
  }

  std::vector<double> grad_b(const std::vector<double>& a) const {
    std::vector<double> g(nw_ * ny_ * nv_, 0.0);
    for (std::size_t ux = 0; ux < nu_ * nx_; ++ux)
      for (std::size_t y = 0; y < ny_; ++y) {
        const std::size_t r = ux * ny_ + y;
        for (std::size_t w = 0; w < nw_; ++w) {
          const double c = 2.0 * weight_[r] * a[ux * nw_ + w];
          if (c == 0.0) continue;
          for (std::size_t v = 0; v < nv_; ++v) g[(w * ny_ + y) * nv_ + v] += c * residual_[r * nv_ + v];
        }
      }
    return g;
  }

  std::size_t nw() const { return nw_; }
  std::size_t nv() const { return nv_; }

 private:
  std::size_t nu_, nx_, ny_, nv_, nw_;
  std::vector<double> weight_;
  std::vector<double> target_;
  std::vector<double> residual_;
};

// One projected-gradient step with backtracking on block `p` (rows of width
// `cols`). Returns the new objective value.
template <typename Grad, typename Obj>
double projected_step(std::vector<double>& p, std::size_t cols, double& step, double f0, Grad&& grad, Obj&& obj) {
  const auto g = grad();
  std::vector<double> cand(p.size());
  for (int attempt = 0; attempt < 60; ++attempt) {
    for (std::size_t i = 0; i < p.size(); ++i) cand[i] = p[i] - step * g[i];
    for (std::size_t r = 0; r * cols < cand.size(); ++r) project_simplex({cand.data() + r * cols, cols});
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = cand[i] - p[i];
      lin += g[i] * d;
      quad += d * d;
    }
    const double f1 = obj(cand);
    if (f1 <= f0 + lin + quad / (2.0 * step) + 1e-18) {
      p.swap(cand);
      step = std::min(step * 2.0, 1e6);
      return f1;
    }
    step *= 0.5;
  }
  return f0;
}

std::vector<double> random_rows(std::size_t rows, std::size_t cols, prob::Rng& rng) {
  std::vector<double> m(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      m[r * cols + c] = -std::log(1.0 - rng.uniform());
      s += m[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) m[r * cols + c] /= s;
  }
  return m;
}

AuxiliaryDecomposition make_aux(const CoordinationTarget& t, std::size_t nw, std::vector<double> a,
                                std::vector<double> b) {
  // Re-normalize rows exactly after projection round-off.
  auto renorm = [](std::vector<double>& m, std::size_t cols) {
    for (std::size_t r = 0; r * cols < m.size(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) m[r * cols + c] /= s;
    }
  };
  renorm(a, nw);
  renorm(b, t.v_size());
  return AuxiliaryDecomposition{
      nw,
      ConditionalPMF({{"U", t.u_size()}, {"X", t.x_size()}}, {{"W", nw}}, std::move(a)),
      ConditionalPMF({{"W", nw}, {"Y", t.y_size()}}, {{"V", t.v_size()}}, std::move(b))};
}

RegionVerdict single_restart(const CoordinationTarget& t, std::size_t nw, const SearchBudget& budget, double tol,
                             std::uint64_t seed) {
  prob::Rng rng(seed);
  BilinearFit fit(t, nw);
  auto a = random_rows(fit.a_rows(), nw, rng);
  auto b = random_rows(fit.b_rows(), fit.nv(), rng);
  double step_a = 1.0, step_b = 1.0;
  double f = fit.objective(a, b);
  double last_check = f;
  for (std::size_t it = 0; it < budget.iterations; ++it) {
    for (std::size_t s = 0; s < budget.inner_steps; ++s)
      f = projected_step(a, nw, step_a, f, [&] { fit.objective(a, b); return fit.grad_a(b); },
                         [&](const std::vector<double>& cand) { return fit.objective(cand, b); });
    for (std::size_t s = 0; s < budget.inner_steps; ++s)
      f = projected_step(b, fit.nv(), step_b, f, [&] { fit.objective(a, b); return fit.grad_b(a); },
                         [&](const std::vector<double>& cand) { return fit.objective(a, cand); });
    if (it % 25 == 24) {
      fit.objective(a, b);
      if (fit.l1_residual() <= tol * 1e-3) break;
      if (last_check - f <= 1e-15 * std::max(1.0, last_check)) break;
      last_check = f;
    }
  }
  return evaluate(t, make_aux(t, nw, std::move(a), std::move(b)), tol);
}

bool better(const RegionVerdict& a, const RegionVerdict& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) {
    if (a.inner_rate != b.inner_rate) return a.inner_rate < b.inner_rate;
    return a.residual < b.residual;
  }
  if (a.residual != b.residual) return a.residual < b.residual;
  return a.inner_rate < b.inner_rate;
}

}  // namespace

RegionVerdict search_auxiliary(const CoordinationTarget& target, std::size_t w_size, const SearchBudget& budget,
                               double tol) {
  if (w_size < 1 || w_size > cardinality_bound(target))
    throw ProbError("auxiliary size " + std::to_string(w_size) + " outside [1, " +
                    std::to_string(cardinality_bound(target)) + "]");
  const std::size_t restarts = std::max<std::size_t>(budget.restarts, 1);
  std::vector<std::optional<RegionVerdict>> results(restarts);
  parallel_for(restarts, [&](std::size_t r) {
    results[r] = single_restart(target, w_size, budget, tol, prob::derive_seed(budget.seed, r));
  });
  RegionVerdict best = *results[0];
  std::size_t feasible = 0;
  for (const auto& r : results) {
    feasible += r->feasible ? 1 : 0;
    if (better(*r, best)) best = *r;
  }
  best.restarts = restarts;
  best.feasible_restarts = feasible;
  return best;
}

RegionVerdict sweep_auxiliary(const CoordinationTarget& target, std::size_t max_w_size, const SearchBudget& budget,
                              double tol) {
  max_w_size = std::min(max_w_size, cardinality_bound(target));
  std::optional<RegionVerdict> best;
  for (std::size_t w = 1; w <= max_w_size; ++w) {
    auto v = search_auxiliary(target, w, budget, tol);
    if (v.feasible) return v;
    if (!best || better(v, *best)) best = std::move(v);
  }
  return *best;
}

// -------------------------------------------------------------- ledger

EmptyWindow::EmptyWindow(std::string window)
    : std::runtime_error("empty rate window for " + window + ": operating point infeasible"), window_(std::move(window)) {}

RateLedger binning_rate_ledger(const CoordinationTarget& target, const AuxiliaryDecomposition& aux) {
  const auto j = induced_joint(target, aux);
  RateLedger l;
  l.h_x = prob::conditional_entropy(j, {"X"}, {});
  l.h_x_given_y = prob::conditional_entropy(j, {"X"}, {"Y"});
  l.h_w_given_xu = prob::conditional_entropy(j, {"W"}, {"X", "U"});
  l.h_w_given_x = prob::conditional_entropy(j, {"W"}, {"X"});
  l.h_w_given_uxyv = prob::conditional_entropy(j, {"W"}, {"U", "X", "Y", "V"});
  l.i_wu_given_x = prob::mutual_information(j, {"W"}, {"U"}, {"X"});
  l.i_xy = prob::mutual_information(j, {"X"}, {"Y"});
  l.h_wx_given_y = prob::conditional_entropy(j, {"W", "X"}, {"Y"});
  if (std::abs(l.h_wx_given_y - (l.h_x_given_y + l.h_w_given_x)) > 1e-9)
    throw ProbError("Markov identity H(WX|Y) = H(X|Y) + H(W|X) violated by the induced joint");

  const double m = kWindowMargin;
  const double gap = l.i_wu_given_x;
  // R1 > H(X|Y), R1 + R2 < H(X), R2 >= R4 > I(W;U|X)
  l.r1 = {l.h_x_given_y + m, l.h_x - gap - m};
  l.r2 = {gap + m, l.i_xy - m};
  // R3 + R~ < H(W|XU); a zero-rate binning is admissible when the entropy is zero.
  l.r3 = {0.0, l.h_w_given_xu > m ? l.h_w_given_xu - m : 0.0};
  l.r_tilde = {0.0, l.h_w_given_uxyv > m ? l.h_w_given_uxyv - m : 0.0};
  // R3 + R4 + R~ > H(W|X), R4 <= R2
  l.r4 = {l.h_w_given_x > m ? gap + m : 0.0, l.i_xy - m};

  l.corner[0] = l.h_x_given_y;
  l.corner[1] = l.i_xy;
  l.corner[2] = std::max(l.h_w_given_xu - l.h_w_given_uxyv, 0.0);
  l.corner[3] = gap;
  l.corner[4] = l.h_w_given_uxyv;
  l.r0_lower_bound = l.h_x_given_y + l.h_w_given_x - l.h_w_given_uxyv;

  const std::pair<const char*, const RateWindow*> windows[] = {
      {"R1", &l.r1}, {"R2", &l.r2}, {"R3", &l.r3}, {"R4", &l.r4}, {"R~", &l.r_tilde}};
  for (const auto& [name, w] : windows)
    if (w->empty()) throw EmptyWindow(name);
  return l;
}

std::string format_ledger(const RateLedger& l) {
  std::ostringstream os;
  char buf[160];
  auto line = [&](const char* label, double v) {
    std::snprintf(buf, sizeof buf, "  %-18s %10.6f\n", label, v);
    os << buf;
  };
  auto window = [&](const char* label, const RateWindow& w) {
    std::snprintf(buf, sizeof buf, "  %-18s [%9.6f, %9.6f]\n", label, w.lower, w.upper);
    os << buf;
  };
  os << "entropy terms (bits)\n";
  line("H(X)", l.h_x);
  line("H(X|Y)", l.h_x_given_y);
  line("H(W|XU)", l.h_w_given_xu);
  line("H(W|X)", l.h_w_given_x);
  line("H(W|UXYV)", l.h_w_given_uxyv);
  line("I(W;U|X)", l.i_wu_given_x);
  line("I(X;Y)", l.i_xy);
  os << "rate windows\n";
  window("R1", l.r1);
  window("R2", l.r2);
  window("R3", l.r3);
  window("R4", l.r4);
  window("R~", l.r_tilde);
  os << "common randomness\n";
  line("R0 >", l.r0_lower_bound);
  return os.str();
}

// ---------------------------------------------------------------- json

nlohmann::json to_json(const CoordinationTarget& t) {
  return {{"p_u", prob::to_json(t.p_u)},
          {"p_x", prob::to_json(t.p_x)},
          {"channel", prob::to_json(t.channel)},
          {"action_rule", prob::to_json(t.action_rule)}};
}

nlohmann::json to_json(const AuxiliaryDecomposition& a) {
  return {{"w_size", a.w_size},
          {"p_w_given_ux", prob::to_json(a.p_w_given_ux)},
          {"p_v_given_wy", prob::to_json(a.p_v_given_wy)}};
}

nlohmann::json to_json(const RegionVerdict& v) {
  return {{"feasible", v.feasible},       {"residual", v.residual},     {"info_slack", v.info_slack},
          {"inner_rate", v.inner_rate},   {"outer_rate", v.outer_rate}, {"witness", to_json(v.witness)},
          {"restarts", v.restarts},       {"feasible_restarts", v.feasible_restarts},
          {"verdict_label", v.feasible ? "feasible" : "not found within budget"}};
}

nlohmann::json to_json(const RateLedger& l) {
  auto w = [](const RateWindow& r) { return nlohmann::json{{"lower", r.lower}, {"upper", r.upper}}; };
  return {{"H_X", l.h_x},
          {"H_X_given_Y", l.h_x_given_y},
          {"H_W_given_XU", l.h_w_given_xu},
          {"H_W_given_X", l.h_w_given_x},
          {"H_W_given_UXYV", l.h_w_given_uxyv},
          {"I_WU_given_X", l.i_wu_given_x},
          {"I_XY", l.i_xy},
          {"H_WX_given_Y", l.h_wx_given_y},
          {"windows", {{"R1", w(l.r1)}, {"R2", w(l.r2)}, {"R3", w(l.r3)}, {"R4", w(l.r4)}, {"R_tilde", w(l.r_tilde)}}},
          {"corner", std::vector<double>(std::begin(l.corner), std::end(l.corner))},
          {"R0_lower_bound", l.r0_lower_bound}};
}

CoordinationTarget target_from_json(const nlohmann::json& j) {
  for (const char* k : {"p_u", "p_x", "channel", "action_rule"})
    if (!j.contains(k)) throw ProbError(std::string("coordination target lacks '") + k + "'");
  return CoordinationTarget(prob::joint_from_json(j.at("p_u")), prob::joint_from_json(j.at("p_x")),
                            prob::conditional_from_json(j.at("channel")),
                            prob::conditional_from_json(j.at("action_rule")));
}

AuxiliaryDecomposition aux_from_json(const nlohmann::json& j) {
  auto w = prob::conditional_from_json(j.at("p_w_given_ux"));
  return AuxiliaryDecomposition{w.cols(), std::move(w), prob::conditional_from_json(j.at("p_v_given_wy"))};
}

}  // namespace coordsim::region
