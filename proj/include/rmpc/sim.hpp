#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "rmpc/mpc.hpp"

namespace rmpc {

enum class WSampler { Zero, Uniform, Vertex, Adversarial };
enum class RealizationSampler { FixedVertex, FixedHull, PerStepHull };

/// One closed-loop run: states has T+1 entries, the per-step vectors T.
struct SimTrace {
  std::vector<int> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> disturbances;
  std::vector<Eigen::VectorXd> wtilde;  // total uncertainty proxy per step
  std::vector<bool> feasible;
  std::vector<bool> backup_used;
  std::vector<bool> in_XN;
  std::vector<double> objectives;  // NaN on backup steps
  std::vector<double> margins;     // min row slack of X and U per step
  std::string realization_desc;

  double min_margin() const;
  /// First t with x_t inside the terminal set, or -1.
  int terminal_entry_time(const HPolytope& XN, double tol = 1e-7) const;
};

/// Runs Algorithm-style closed loop for T steps. Deterministic given seed.
/// Throws InitializationError when x0 is infeasible and InvariantViolation
/// when any constraint margin falls below -1e-7.
SimTrace simulate(const UncertainSystem& system, Controller& controller,
                  const TrueRealization& realization, WSampler w_sampler,
                  const Eigen::VectorXd& x0, int T, unsigned seed);

/// Applies the stored t = 0 policy (never re-solving) for t < N, then the
/// terminal gain K. Same invariant checks as simulate.
SimTrace open_loop_safe_run(const UncertainSystem& system,
                            Controller& controller,
                            const TrueRealization& realization,
                            WSampler w_sampler, const Eigen::VectorXd& x0,
                            int T, unsigned seed);

struct LyapunovReport {
  std::vector<int> times;          // t >= N
  std::vector<double> delta_V;     // V_{t+1} - V_t
  std::vector<double> xPx;         // stage Lyapunov candidate
  std::vector<double> wtilde_inf;  // uncertainty proxy magnitude
  bool nominal_decrease = true;    // dV < 0 whenever wtilde == 0, |x| > 1e-6
  double sigma_envelope = 0.0;     // max (dV + xPx) / ||wtilde|| observed
};

LyapunovReport lyapunov_report(const SimTrace& trace,
                               const UncertainSystem& system);

/// Deterministic uncertainty realization draw for Monte-Carlo suites.
TrueRealization sample_realization(const UncertainSystem& system,
                                   RealizationSampler kind, unsigned seed,
                                   int T = 0);

/// One disturbance draw (seeded per call site); adversarial picks the
/// support point of W along the currently most-stressed state facet.
Eigen::VectorXd sample_w(const UncertainSystem& system, WSampler kind,
                         std::mt19937_64& rng,
                         const Eigen::VectorXd& x_next_nominal);

/// CSV serialization of a trace (header row, one line per step).
std::string trace_csv(const SimTrace& trace);

}  // namespace rmpc
