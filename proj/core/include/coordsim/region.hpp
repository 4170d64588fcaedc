#pragma once

// Membership tests for the strong coordination inner/outer regions and the
// empirical coordination region, plus the common-randomness rate ledger of
// the random binning scheme.
//
// Axis labels are fixed: "U" source, "X" channel input, "Y" channel output,
// "V" action, "W" auxiliary.

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "coordsim/prob.hpp"

namespace coordsim::region {

using prob::ConditionalPMF;
using prob::JointPMF;

inline constexpr double kDefaultTolerance = 1e-6;
// Closure of the region: the information constraint is accepted down to this slack.
inline constexpr double kInfoSlackTolerance = 1e-9;
inline constexpr double kWindowMargin = 1e-9;

struct CoordinationTarget {
  JointPMF p_u;
  JointPMF p_x;
  ConditionalPMF channel;      // Y | X
  ConditionalPMF action_rule;  // V | U X Y

  /// Validates axis labels and shapes.
  CoordinationTarget(JointPMF p_u, JointPMF p_x, ConditionalPMF channel, ConditionalPMF action_rule);

  /// P_U P_X P_{Y|X} P_{V|UXY} over axes (U, X, Y, V).
  JointPMF joint() const;
  std::size_t u_size() const { return p_u.cells(); }
  std::size_t x_size() const { return p_x.cells(); }
  std::size_t y_size() const { return channel.cols(); }
  std::size_t v_size() const { return action_rule.cols(); }
};

class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(std::string condition, double amount);
  const std::string& condition() const noexcept { return condition_; }
  double amount() const noexcept { return amount_; }

 private:
  std::string condition_;
  double amount_;
};

/// Checks that a joint over (U, X, Y, V) factors as P_U P_X P_{Y|X} P_{V|UXY}
/// with the given channel. Throws FactorizationError("independence", I(U;X))
/// or FactorizationError("channel", worst row TV).
CoordinationTarget check_target_factorization(const JointPMF& joint, const ConditionalPMF& channel,
                                              double tol = 1e-9);

struct AuxiliaryDecomposition {
  std::size_t w_size = 1;
  ConditionalPMF p_w_given_ux;  // W | U X
  ConditionalPMF p_v_given_wy;  // V | W Y
};

/// |U||X||Y||V| + 4.
std::size_t cardinality_bound(const CoordinationTarget& target);

/// P_U P_X P_{W|UX} P_{Y|X} P_{V|WY} over axes (U, X, W, Y, V).
JointPMF induced_joint(const CoordinationTarget& target, const AuxiliaryDecomposition& aux);

struct RegionVerdict {
  bool feasible = false;
  double residual = 0.0;    // TV between the induced and the target (U,X,Y,V) law
  double info_slack = 0.0;  // I(WX;Y) - I(WX;U)
  double inner_rate = 0.0;  // I(W;UXV|Y) + H(X|WY)
  double outer_rate = 0.0;  // I(W;UXV|Y)
  AuxiliaryDecomposition witness;
  // Search bookkeeping; zero for a direct evaluation.
  std::size_t restarts = 0;
  std::size_t feasible_restarts = 0;
};

RegionVerdict evaluate(const CoordinationTarget& target, const AuxiliaryDecomposition& aux,
                       double tol = kDefaultTolerance);

/// The Markov structure makes I(WX;U) <= I(WX;Y) equivalent to
/// I(W;U|X) <= I(X;Y). Returns (I(W;U|X), I(X;Y)) computed on an induced
/// (U,X,W,Y,V) joint and throws ProbError if the two forms disagree in sign.
struct ConstraintPair {
  double lhs = 0.0;
  double rhs = 0.0;
};
ConstraintPair equivalent_constraint_check(const JointPMF& induced);

/// Same information test as evaluate(), without any rate condition.
bool empirical_region_check(const CoordinationTarget& target, const AuxiliaryDecomposition& aux,
                            double tol = kDefaultTolerance);

struct SearchBudget {
  std::size_t restarts = 32;
  std::size_t iterations = 2000;
  std::size_t inner_steps = 4;
  std::uint64_t seed = 1;
};

/// Alternating projected-gradient minimization of the (U,X,Y,V) mismatch over
/// P_{W|UX} and P_{V|WY}, with independent random restarts. Among feasible
/// candidates the one with the smallest inner rate is returned; otherwise the
/// one with the smallest residual. An infeasible verdict only means that no
/// witness was found within the budget.
RegionVerdict search_auxiliary(const CoordinationTarget& target, std::size_t w_size,
                               const SearchBudget& budget = {}, double tol = kDefaultTolerance);

/// Runs search_auxiliary for |W| = 1, 2, ... max_w_size and stops at the first
/// feasible size.
RegionVerdict sweep_auxiliary(const CoordinationTarget& target, std::size_t max_w_size,
                              const SearchBudget& budget = {}, double tol = kDefaultTolerance);

/// Closed interval of admissible values for one binning rate. Strict
/// inequalities are tightened by kWindowMargin.
struct RateWindow {
  double lower = 0.0;
  double upper = 0.0;
  bool empty() const { return lower > upper; }
};

class EmptyWindow : public std::runtime_error {
 public:
  explicit EmptyWindow(std::string window);
  const std::string& window() const noexcept { return window_; }

 private:
  std::string window_;
};

struct RateLedger {
  double h_x = 0.0;
  double h_x_given_y = 0.0;
  double h_w_given_xu = 0.0;
  double h_w_given_x = 0.0;
  double h_w_given_uxyv = 0.0;
  double i_wu_given_x = 0.0;
  double i_xy = 0.0;
  double h_wx_given_y = 0.0;  // equals H(X|Y) + H(W|X) under W - X - Y
  RateWindow r1, r2, r3, r4, r_tilde;
  // Limit point (R1, R2, R3, R4, R~) at which R0 = R1 + R3 + R4 attains its bound.
  double corner[5] = {0, 0, 0, 0, 0};
  double r0_lower_bound = 0.0;  // H(X|Y) + H(W|X) - H(W|UXYV)
};

/// Entropy terms, per-rate windows and the R0 bound for a decomposition.
/// Throws EmptyWindow when some window is empty.
RateLedger binning_rate_ledger(const CoordinationTarget& target, const AuxiliaryDecomposition& aux);
std::string format_ledger(const RateLedger& ledger);

nlohmann::json to_json(const CoordinationTarget& t);
nlohmann::json to_json(const AuxiliaryDecomposition& a);
nlohmann::json to_json(const RegionVerdict& v);
nlohmann::json to_json(const RateLedger& l);
CoordinationTarget target_from_json(const nlohmann::json& j);
AuxiliaryDecomposition aux_from_json(const nlohmann::json& j);

}  // namespace coordsim::region
