#include "rmpc/sim.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "rmpc/errors.hpp"

namespace rmpc {

namespace {

constexpr double kMarginTol = -1e-7;

double state_margin(const HPolytope& X, const Eigen::VectorXd& x) {
  return (X.h() - X.H() * x).minCoeff();
}

Eigen::MatrixXd random_hull_point(const std::vector<Eigen::MatrixXd>& verts,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd w(verts.size());
  for (int i = 0; i < w.size(); ++i) w(i) = -std::log(unif(rng) + 1e-300);
  w /= w.sum();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(verts.front().rows(),
                                              verts.front().cols());
  for (std::size_t i = 0; i < verts.size(); ++i) out += w(i) * verts[i];
  return out;
}

void check_margin(double margin, int t) {
  if (margin < kMarginTol)
    throw InvariantViolation("constraint margin " + std::to_string(margin) +
                             " at t=" + std::to_string(t));
}

}  // namespace

double SimTrace::min_margin() const {
  double lo = std::numeric_limits<double>::infinity();
  for (double m : margins) lo = std::min(lo, m);
  return lo;
}

int SimTrace::terminal_entry_time(const HPolytope& XN, double tol) const {
  for (std::size_t t = 0; t < states.size(); ++t)
    if (XN.contains(states[t], tol)) return static_cast<int>(t);
  return -1;
}

TrueRealization sample_realization(const UncertainSystem& system,
                                   RealizationSampler kind, unsigned seed,
                                   int T) {
  std::mt19937_64 rng(seed);
  TrueRealization r;
  switch (kind) {
    case RealizationSampler::FixedVertex: {
      std::uniform_int_distribution<int> ja(0, system.na() - 1);
      std::uniform_int_distribution<int> kb(0, system.nb() - 1);
      r.deltaA_true = system.deltaA_vertices()[ja(rng)];
      r.deltaB_true = system.deltaB_vertices()[kb(rng)];
      break;
    }
    case RealizationSampler::FixedHull:
      r.deltaA_true = random_hull_point(system.deltaA_vertices(), rng);
      r.deltaB_true = random_hull_point(system.deltaB_vertices(), rng);
      break;
    case RealizationSampler::PerStepHull: {
      r.deltaA_true = random_hull_point(system.deltaA_vertices(), rng);
      r.deltaB_true = random_hull_point(system.deltaB_vertices(), rng);
      for (int t = 0; t < T; ++t) {
        r.deltaA_seq.push_back(
            random_hull_point(system.deltaA_vertices(), rng));
        r.deltaB_seq.push_back(
            random_hull_point(system.deltaB_vertices(), rng));
      }
      break;
    }
  }
  return r;
}

Eigen::VectorXd sample_w(const UncertainSystem& system, WSampler kind,
                         std::mt19937_64& rng,
                         const Eigen::VectorXd& x_next_nominal) {
  const int d = system.d();
  const HPolytope& W = system.W();
  switch (kind) {
    case WSampler::Zero:
      return Eigen::VectorXd::Zero(d);
    case WSampler::Uniform: {
      Eigen::VectorXd lo(d), hi(d);
      for (int i = 0; i < d; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        e(i) = 1.0;
        hi(i) = W.support(e);
        lo(i) = -W.support(-e);
      }
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (int tries = 0; tries < 256; ++tries) {
        Eigen::VectorXd w(d);
        for (int i = 0; i < d; ++i) w(i) = lo(i) + (hi(i) - lo(i)) * unif(rng);
        if (W.contains(w, 1e-12)) return w;
      }
      return Eigen::VectorXd::Zero(d);
    }
    case WSampler::Vertex: {
      Eigen::VectorXd s(d);
      for (int i = 0; i < d; ++i) s(i) = (rng() & 1u) ? 1.0 : -1.0;
      return W.support_point(s);
    }
    case WSampler::Adversarial: {
      const Eigen::MatrixXd& Hx = system.X().H();
      Eigen::Index worst = 0;
      (Hx * x_next_nominal - system.X().h()).maxCoeff(&worst);
      return W.support_point(Hx.row(worst).transpose());
    }
  }
  throw ConfigError("sample_w: unknown sampler");
}

SimTrace simulate(const UncertainSystem& system, Controller& controller,
                  const TrueRealization& realization, WSampler w_sampler,
                  const Eigen::VectorXd& x0, int T, unsigned seed) {
  if (T < 1) throw RangeError("simulate: T must be >= 1");
  controller.reset();
  std::mt19937_64 rng(seed);
  const HPolytope& XN = controller.terminal().XN;

  SimTrace trace;
  trace.states.push_back(x0);
  Eigen::VectorXd x = x0;
  for (int t = 0; t < T; ++t) {
    const StepResult res = controller.step(x, t);
    const Eigen::VectorXd& u = res.applied_u;
    const double margin = std::min(state_margin(system.X(), x),
                                   (system.U().h() - system.U().H() * u)
                                       .minCoeff());
    check_margin(margin, t);

    const Eigen::VectorXd x_next_nom =
        (system.A_bar() + realization.dA_at(t)) * x +
        (system.B_bar() + realization.dB_at(t)) * u;
    const Eigen::VectorXd w = sample_w(system, w_sampler, rng, x_next_nom);
    const Eigen::VectorXd x_next = x_next_nom + w;

    trace.times.push_back(t);
    trace.inputs.push_back(u);
    trace.disturbances.push_back(w);
    trace.wtilde.push_back(x_next - system.A_bar() * x -
                           system.B_bar() * u);
    trace.feasible.push_back(res.feasible);
    trace.backup_used.push_back(res.backup_t_f >= 0);
    trace.in_XN.push_back(XN.contains(x, 1e-7));
    trace.objectives.push_back(
        res.objective.value_or(std::numeric_limits<double>::quiet_NaN()));
    trace.margins.push_back(margin);
    trace.states.push_back(x_next);
    x = x_next;
  }
  check_margin(state_margin(system.X(), x), T);
  return trace;
}

SimTrace open_loop_safe_run(const UncertainSystem& system,
                            Controller& controller,
                            const TrueRealization& realization,
                            WSampler w_sampler, const Eigen::VectorXd& x0,
                            int T, unsigned seed) {
  if (T < 1) throw RangeError("open_loop_safe_run: T must be >= 1");
  controller.reset();
  std::mt19937_64 rng(seed);
  const HPolytope& XN = controller.terminal().XN;
  const Eigen::MatrixXd& K = controller.terminal().K;
  const int N = system.N();

  const StepResult first = controller.step(x0, 0);  // InitializationError here
  const AffinePolicy policy = *first.policy;

  SimTrace trace;
  trace.realization_desc = "open-loop safe run";
  std::vector<Eigen::VectorXd> xs{x0};
  std::vector<Eigen::VectorXd> us;
  Eigen::VectorXd x = x0;
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd u;
    if (t == 0)
      u = first.applied_u;
    else if (t < N)
      u = evaluate_policy(policy, system, xs, us, x, t);
    else
      u = K * x;
    const double margin = std::min(state_margin(system.X(), x),
                                   (system.U().h() - system.U().H() * u)
                                       .minCoeff());
    check_margin(margin, t);

    const Eigen::VectorXd x_next_nom =
        (system.A_bar() + realization.dA_at(t)) * x +
        (system.B_bar() + realization.dB_at(t)) * u;
    const Eigen::VectorXd w = sample_w(system, w_sampler, rng, x_next_nom);
    const Eigen::VectorXd x_next = x_next_nom + w;

    trace.times.push_back(t);
    trace.inputs.push_back(u);
    trace.disturbances.push_back(w);
    trace.wtilde.push_back(x_next - system.A_bar() * x -
                           system.B_bar() * u);
    trace.feasible.push_back(t == 0);
    trace.backup_used.push_back(t > 0 && t < N);
    trace.in_XN.push_back(XN.contains(x, 1e-7));
    trace.objectives.push_back(
        t == 0 ? first.objective.value_or(
                     std::numeric_limits<double>::quiet_NaN())
               : std::numeric_limits<double>::quiet_NaN());
    trace.margins.push_back(margin);
    us.push_back(u);
    xs.push_back(x_next);
    trace.states.push_back(x_next);
    x = x_next;
  }
  check_margin(state_margin(system.X(), x), T);
  return trace;
}

LyapunovReport lyapunov_report(const SimTrace& trace,
                               const UncertainSystem& system) {
  const int N = system.N();
  const int T = static_cast<int>(trace.times.size());
  if (T < N + 2)
    throw RangeError("lyapunov_report: trace must extend beyond t = N");
  LyapunovReport rep;
  for (int t = N; t + 1 < T; ++t) {
    const double Vt = trace.objectives[t];
    const double Vt1 = trace.objectives[t + 1];
    if (std::isnan(Vt) || std::isnan(Vt1)) continue;
    const Eigen::VectorXd& x = trace.states[t];
    const double dV = Vt1 - Vt;
    const double wti = trace.wtilde[t].lpNorm<Eigen::Infinity>();
    rep.times.push_back(t);
    rep.delta_V.push_back(dV);
    rep.xPx.push_back(x.dot(system.P() * x));
    rep.wtilde_inf.push_back(wti);
    if (wti < 1e-12) {
      if (x.lpNorm<Eigen::Infinity>() > 1e-6 && dV >= 0.0)
        rep.nominal_decrease = false;
    } else {
      rep.sigma_envelope =
          std::max(rep.sigma_envelope, (dV + rep.xPx.back()) / wti);
    }
  }
  return rep;
}

std::string trace_csv(const SimTrace& trace) {
  std::ostringstream os;
  os.precision(17);
  const int d = trace.states.empty() ? 0
                                     : static_cast<int>(trace.states[0].size());
  const int m = trace.inputs.empty() ? 0
                                     : static_cast<int>(trace.inputs[0].size());
  os << "t";
  for (int i = 0; i < d; ++i) os << ",x" << (i + 1);
  for (int i = 0; i < m; ++i) os << ",u" << (i + 1);
  for (int i = 0; i < d; ++i) os << ",w" << (i + 1);
  for (int i = 0; i < d; ++i) os << ",wtilde" << (i + 1);
  os << ",feasible,backup,in_XN,objective,margin\n";
  for (std::size_t t = 0; t < trace.times.size(); ++t) {
    os << trace.times[t];
    for (int i = 0; i < d; ++i) os << "," << trace.states[t](i);
    for (int i = 0; i < m; ++i) os << "," << trace.inputs[t](i);
    for (int i = 0; i < d; ++i) os << "," << trace.disturbances[t](i);
    for (int i = 0; i < d; ++i) os << "," << trace.wtilde[t](i);
    os << "," << (trace.feasible[t] ? 1 : 0) << ","
       << (trace.backup_used[t] ? 1 : 0) << "," << (trace.in_XN[t] ? 1 : 0)
       << "," << trace.objectives[t] << "," << trace.margins[t] << "\n";
  }
  return os.str();
}

}  // namespace rmpc
