#pragma once

#include <Eigen/Dense>
#include <string>

#include "rmpc/prediction.hpp"

namespace rmpc {

enum class BoundsMethod { Exact, Efficient };

/// Offline per-row tightening bounds for one horizon length.
/// Norm convention: p = infinity for vectors / induced matrix norms, so the
/// dual norm is the 1-norm of row vectors.
struct TighteningBounds {
  int Nt = 0;
  BoundsMethod method = BoundsMethod::Exact;
  int N_cut = 0;  // Efficient only
  Eigen::VectorXd t0, t1, t2, t3, tw, tdA, tdB;
  Eigen::VectorXd td1, td2, td3;  // td1 = tdA + t1, etc.
  double w_max = 0.0;

  void finalize();  // derives td1/td2/td3 and checks nonnegativity
};

/// Exact vertex-tuple enumeration of the offline bounds.
TighteningBounds bounds_exact(const UncertainSystem& system,
                              const HorizonStacks& stacks, int workers = 0);

/// Cut-off horizon variant: exact tuples below N_cut, analytic binomial
/// tail above. Equals bounds_exact when N_cut == Nt.
TighteningBounds bounds_efficient(const UncertainSystem& system,
                                  const HorizonStacks& stacks, int N_cut,
                                  int workers = 0);

/// Per-row (tdA, tdB) vertex maxima (shared by both methods).
void bounds_delta(const UncertainSystem& system, const HorizonStacks& stacks,
                  Eigen::VectorXd& tdA, Eigen::VectorXd& tdB);

/// Infinity-norm radius of W.
double disturbance_w_max(const UncertainSystem& system);

struct SoundnessReport {
  int samples = 0;
  int violations = 0;
  double max_violation = 0.0;  // positive value means true LHS > surrogate
  double max_slack = 0.0;      // largest surrogate - true margin seen
};

/// Monte-Carlo check that the bound-based surrogate dominates the raw
/// robust constraint row-wise for sampled realizations and inputs.
SoundnessReport soundness_check(const TighteningBounds& bounds,
                                const UncertainSystem& system,
                                const HorizonStacks& stacks, int samples,
                                unsigned seed = 1);

}  // namespace rmpc
