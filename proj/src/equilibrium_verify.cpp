/*
 Copyright 2026 The zsgames Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "zsgames/equilibrium_verify.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

#include "zsgames/constrained.hpp"
#include "zsgames/derivatives.hpp"
#include "zsgames/fbne_solver.hpp"
#include "zsgames/olne_solver.hpp"

namespace zsg {

namespace {

double opt_max(const std::optional<double>& v) { return v ? *v : 0.0; }

void merge_opt(std::optional<double>& into, const std::optional<double>& from) {
  if (from) into = std::max(into.value_or(0.0), *from);
}

// Unsmoothed complementarity residual phi(a, b) = a + b - sqrt(a^2 + b^2);
// zero exactly when a >= 0, b >= 0 and a*b = 0.
double fischer_burmeister(double a, double b) { return a + b - std::hypot(a, b); }

struct BoundTerms {
  Vector stat_correction;  // -nu_lower + nu_upper, added to the own-control row
  double comp_lower = 0.0;
  double comp_upper = 0.0;
  double negativity = 0.0;
};

BoundTerms bound_terms(const GameDefinition& game, const Trajectory& traj,
                       const MultiplierSet& m, int agent, int t) {
  const int mi = game.control_dim(agent);
  BoundTerms out;
  out.stat_correction = Vector::Zero(mi);
  if (!game.bounds) return out;
  const StageBounds& sb = game.stage_bounds(agent, t);
  Vector nu_lo = Vector::Zero(mi), nu_hi = Vector::Zero(mi);
  if (m.has_bound_multipliers()) {
    nu_lo = m.nu_lower(agent, t);
    nu_hi = m.nu_upper(agent, t);
  }
  out.stat_correction = nu_hi - nu_lo;
  const Vector& u = traj.u(agent, t);
  for (int j = 0; j < mi; ++j) {
    out.comp_lower = std::max(out.comp_lower,
                              std::abs(fischer_burmeister(u(j) - sb.lower(j), nu_lo(j))));
    out.comp_upper = std::max(out.comp_upper,
                              std::abs(fischer_burmeister(sb.upper(j) - u(j), nu_hi(j))));
    out.negativity = std::max({out.negativity, -nu_lo(j), -nu_hi(j), 0.0});
  }
  return out;
}

}  // namespace

double ResidualFamilies::max() const {
  double v = std::max({state_stationarity, own_control, terminal, dynamics});
  v = std::max({v, opt_max(cross_control), opt_max(policy_constraint),
                opt_max(complementarity_lower), opt_max(complementarity_upper),
                opt_max(multiplier_negativity)});
  return v;
}

void ResidualFamilies::merge(const ResidualFamilies& o) {
  state_stationarity = std::max(state_stationarity, o.state_stationarity);
  own_control = std::max(own_control, o.own_control);
  terminal = std::max(terminal, o.terminal);
  dynamics = std::max(dynamics, o.dynamics);
  merge_opt(cross_control, o.cross_control);
  merge_opt(policy_constraint, o.policy_constraint);
  merge_opt(complementarity_lower, o.complementarity_lower);
  merge_opt(complementarity_upper, o.complementarity_upper);
  merge_opt(multiplier_negativity, o.multiplier_negativity);
}

KktResidualReport ol_first_order_report(const GameDefinition& game, const Trajectory& traj,
                                        const std::optional<MultiplierSet>& multipliers,
                                        double tol) {
  MultiplierSet m;
  if (multipliers) {
    m = *multipliers;
  } else {
    auto [l1, l2] = recover_ol_costates(game, traj);
    m.lambda1 = std::move(l1);
    m.lambda2 = std::move(l2);
  }

  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, /*with_dynamics_curvature=*/false, DerivativeOrder::First);
  const int K = game.horizon;

  KktResidualReport report;
  report.tolerance = tol;
  report.per_stage.resize(K + 1);
  const bool bounded = game.bounds.has_value();

  for (int t = 1; t <= K; ++t) {
    const StageDerivatives& sd = derivs.at(t);
    ResidualFamilies& fam = report.per_stage[t - 1].families;
    report.per_stage[t - 1].stage = t;

    if (t >= 2) {
      const Vector ss1 = sd.grad_x() + sd.A.transpose() * m.lambda1[t - 1] - m.lambda1[t - 2];
      const Vector ss2 = -sd.grad_x() + sd.A.transpose() * m.lambda2[t - 1] - m.lambda2[t - 2];
      fam.state_stationarity =
          std::max(ss1.lpNorm<Eigen::Infinity>(), ss2.lpNorm<Eigen::Infinity>());
    }

    Vector c1 = sd.grad_u1() + sd.B1.transpose() * m.lambda1[t - 1];
    Vector c2 = -sd.grad_u2() + sd.B2.transpose() * m.lambda2[t - 1];
    if (bounded) {
      const BoundTerms b1 = bound_terms(game, traj, m, 1, t);
      const BoundTerms b2 = bound_terms(game, traj, m, 2, t);
      c1 += b1.stat_correction;
      c2 += b2.stat_correction;
      fam.complementarity_lower = std::max(b1.comp_lower, b2.comp_lower);
      fam.complementarity_upper = std::max(b1.comp_upper, b2.comp_upper);
      fam.multiplier_negativity = std::max(b1.negativity, b2.negativity);
    }
    fam.own_control = std::max(c1.lpNorm<Eigen::Infinity>(), c2.lpNorm<Eigen::Infinity>());

    const Vector defect =
        traj.x(t + 1) - game.dynamics(t, traj.x(t), traj.u1(t), traj.u2(t));
    fam.dynamics = defect.lpNorm<Eigen::Infinity>();

    report.families.merge(fam);
  }

  ResidualFamilies& last = report.per_stage[K].families;
  report.per_stage[K].stage = K + 1;
  const Vector term1 = derivs.terminal.grad - m.lambda1[K - 1];
  const Vector term2 = -derivs.terminal.grad - m.lambda2[K - 1];
  last.terminal = std::max(term1.lpNorm<Eigen::Infinity>(), term2.lpNorm<Eigen::Infinity>());
  report.families.merge(last);

  report.lambda_negation_max = m.max_lambda_negation();
  report.pass = report.families.max() <= tol;
  return report;
}

KktResidualReport fb_first_order_report(const GameDefinition& game, const Trajectory& traj,
                                        const AffinePolicySet& policies1,
                                        const AffinePolicySet& policies2,
                                        const std::optional<MultiplierSet>& multipliers,
                                        double tol) {
  MultiplierSet m;
  if (multipliers) {
    m = *multipliers;
  } else if (game.bounds) {
    m = recover_constrained_multipliers(game, traj, &policies1, &policies2);
  } else {
    m = recover_fb_multipliers(game, traj, policies1, policies2);
  }

  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, /*with_dynamics_curvature=*/false, DerivativeOrder::First);
  const int K = game.horizon;
  const bool bounded = game.bounds.has_value();
  const bool has_psi = m.has_psi();

  KktResidualReport report;
  report.tolerance = tol;
  report.per_stage.resize(K + 1);

  for (int t = 1; t <= K; ++t) {
    const StageDerivatives& sd = derivs.at(t);
    ResidualFamilies& fam = report.per_stage[t - 1].families;
    report.per_stage[t - 1].stage = t;

    if (t >= 2) {
      Vector psi1 = has_psi ? m.psi(1, t) : Vector::Zero(game.control_dim(2));
      Vector psi2 = has_psi ? m.psi(2, t) : Vector::Zero(game.control_dim(1));

      const Vector ss1 = sd.grad_x() + sd.A.transpose() * m.lambda1[t - 1] - m.lambda1[t - 2] +
                         policies2.at(t).gain.transpose() * psi1;
      const Vector ss2 = -sd.grad_x() + sd.A.transpose() * m.lambda2[t - 1] - m.lambda2[t - 2] +
                         policies1.at(t).gain.transpose() * psi2;
      fam.state_stationarity =
          std::max(ss1.lpNorm<Eigen::Infinity>(), ss2.lpNorm<Eigen::Infinity>());

      const Vector x1r = sd.grad_u2() + sd.B2.transpose() * m.lambda1[t - 1] - psi1;
      const Vector x2r = -sd.grad_u1() + sd.B1.transpose() * m.lambda2[t - 1] - psi2;
      fam.cross_control =
          std::max(x1r.lpNorm<Eigen::Infinity>(), x2r.lpNorm<Eigen::Infinity>());

      const Vector pc1 = traj.u1(t) - policies1.at(t)(traj.x(t));
      const Vector pc2 = traj.u2(t) - policies2.at(t)(traj.x(t));
      fam.policy_constraint =
          std::max(pc1.lpNorm<Eigen::Infinity>(), pc2.lpNorm<Eigen::Infinity>());
    }

    Vector c1 = sd.grad_u1() + sd.B1.transpose() * m.lambda1[t - 1];
    Vector c2 = -sd.grad_u2() + sd.B2.transpose() * m.lambda2[t - 1];
    if (bounded) {
      const BoundTerms b1 = bound_terms(game, traj, m, 1, t);
      const BoundTerms b2 = bound_terms(game, traj, m, 2, t);
      c1 += b1.stat_correction;
      c2 += b2.stat_correction;
      fam.complementarity_lower = std::max(b1.comp_lower, b2.comp_lower);
      fam.complementarity_upper = std::max(b1.comp_upper, b2.comp_upper);
      fam.multiplier_negativity = std::max(b1.negativity, b2.negativity);
    }
    fam.own_control = std::max(c1.lpNorm<Eigen::Infinity>(), c2.lpNorm<Eigen::Infinity>());

    const Vector defect =
        traj.x(t + 1) - game.dynamics(t, traj.x(t), traj.u1(t), traj.u2(t));
    fam.dynamics = defect.lpNorm<Eigen::Infinity>();

    report.families.merge(fam);
  }

  ResidualFamilies& last = report.per_stage[K].families;
  report.per_stage[K].stage = K + 1;
  const Vector term1 = derivs.terminal.grad - m.lambda1[K - 1];
  const Vector term2 = -derivs.terminal.grad - m.lambda2[K - 1];
  last.terminal = std::max(term1.lpNorm<Eigen::Infinity>(), term2.lpNorm<Eigen::Infinity>());
  report.families.merge(last);

  report.lambda_negation_max = m.max_lambda_negation();
  report.psi_max = m.max_psi_norm();
  report.pass = report.families.max() <= tol;
  return report;
}

CriticalConeBasis build_critical_cone(const GameDefinition& game, const Trajectory& traj,
                                      CriticalConeBasis::Structure structure, int agent,
                                      const AffinePolicySet* policies1,
                                      const AffinePolicySet* policies2,
                                      double weak_active_tol,
                                      const std::optional<MultiplierSet>& multipliers) {
  const int K = game.horizon, n = game.state_dim;
  const int mi = game.control_dim(agent), mo = game.control_dim(agent == 1 ? 2 : 1);
  const bool feedback = structure == CriticalConeBasis::Structure::Feedback;

  const AffinePolicySet* opp_policy = nullptr;
  if (feedback) {
    if (policies1 == nullptr || policies2 == nullptr)
      throw InputError("build_critical_cone: feedback cones require both policy sets");
    opp_policy = (agent == 1) ? policies2 : policies1;
  }

  CriticalConeBasis cone;
  cone.structure = structure;
  cone.agent = agent;
  cone.K = K;
  cone.n = n;
  cone.m_own = mi;
  cone.m_opp = mo;

  bool drop_policy_rows = !feedback;
  if (feedback) {
    MultiplierSet m;
    if (multipliers) {
      m = *multipliers;
    } else if (game.bounds) {
      m = recover_constrained_multipliers(game, traj, policies1, policies2);
    } else {
      m = recover_fb_multipliers(game, traj, *policies1, *policies2);
    }
    double psi_norm = 0.0;
    if (m.has_psi())
      for (int s = 2; s <= K; ++s)
        psi_norm = std::max(psi_norm, m.psi(agent, s).lpNorm<Eigen::Infinity>());
    drop_policy_rows = psi_norm <= weak_active_tol;
    cone.policy_rows_dropped = drop_policy_rows;
  }

  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, /*with_dynamics_curvature=*/false, DerivativeOrder::First);

  cone.basis = Matrix::Zero(cone.layout_dim(), K * mi);
  int col = 0;
  for (int t = 1; t <= K; ++t) {
    for (int j = 0; j < mi; ++j, ++col) {
      auto c = cone.basis.col(col);
      c(cone.off_own(t) + j) = 1.0;
      // Linearized rollout of the impulse; d_x1 = 0 so stages before t stay 0.
      Vector dx = Vector::Zero(n);
      for (int s = t; s <= K; ++s) {
        const StageDerivatives& sd = derivs.at(s);
        const Matrix& B_own = (agent == 1) ? sd.B1 : sd.B2;
        const Matrix& B_opp = (agent == 1) ? sd.B2 : sd.B1;
        Vector du_opp;
        if (feedback && !drop_policy_rows && s >= 2) {
          du_opp = opp_policy->at(s).gain * dx;
          c.segment(cone.off_opp(s), mo) = du_opp;
        }
        Vector dx_next = sd.A * dx;
        if (s == t) dx_next += B_own.col(j);
        if (feedback && !drop_policy_rows && s >= 2) dx_next += B_opp * du_opp;
        dx = dx_next;
        c.segment(cone.off_x(s + 1), n) = dx;
      }
    }
  }

  // Certify the constructed columns against the cone's linear constraints.
  double resid = 0.0;
  for (int cidx = 0; cidx < cone.basis.cols(); ++cidx) {
    const auto c = cone.basis.col(cidx);
    Vector dx_prev = Vector::Zero(n);
    for (int s = 1; s <= K; ++s) {
      const StageDerivatives& sd = derivs.at(s);
      const Matrix& B_own = (agent == 1) ? sd.B1 : sd.B2;
      const Matrix& B_opp = (agent == 1) ? sd.B2 : sd.B1;
      Vector rhs = sd.A * dx_prev + B_own * c.segment(cone.off_own(s), mi);
      if (feedback && s >= 2) {
        const Vector du_opp = c.segment(cone.off_opp(s), mo);
        rhs += B_opp * du_opp;
        if (!drop_policy_rows) {
          resid = std::max(resid, (du_opp - opp_policy->at(s).gain * dx_prev)
                                      .lpNorm<Eigen::Infinity>());
        }
      }
      const Vector dx_s1 = c.segment(cone.off_x(s + 1), n);
      resid = std::max(resid, (dx_s1 - rhs).lpNorm<Eigen::Infinity>());
      dx_prev = dx_s1;
    }
  }
  cone.constraint_residual = resid;

  Matrix normalized = cone.basis;
  for (int cidx = 0; cidx < normalized.cols(); ++cidx) {
    const double nrm = normalized.col(cidx).norm();
    if (nrm > 0) normalized.col(cidx) /= nrm;
  }
  Eigen::JacobiSVD<Matrix> svd(normalized);
  cone.min_singular_value = svd.singularValues().minCoeff();
  return cone;
}

const char* to_string(SecondOrderReport::Classification c) {
  switch (c) {
    case SecondOrderReport::Classification::Sufficient: return "sufficient";
    case SecondOrderReport::Classification::NecessaryOnly: return "necessary-only";
    case SecondOrderReport::Classification::Fails: return "fails";
  }
  return "unknown";
}

SecondOrderReport second_order_report(const GameDefinition& game, const Trajectory& traj,
                                      const MultiplierSet& multipliers,
                                      const CriticalConeBasis& cone, int agent,
                                      double pd_tol_scale, bool include_dynamics_curvature) {
  if (cone.agent != agent)
    throw InputError("second_order_report: cone was built for the other agent");
  const int K = game.horizon, n = game.state_dim;
  const int m1 = game.control_dims[0], m2 = game.control_dims[1];
  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, include_dynamics_curvature, DerivativeOrder::Second);

  const int ncols = static_cast<int>(cone.basis.cols());
  const double sigma = (agent == 1) ? 1.0 : -1.0;

  // Stage slices (d_x, d_u1, d_u2) of every basis column, in the Hessian's
  // stacked order.
  std::vector<Matrix> slices(K, Matrix::Zero(n + m1 + m2, ncols));
  for (int c = 0; c < ncols; ++c) {
    for (int t = 1; t <= K; ++t) {
      auto slice = slices[t - 1].col(c);
      if (t >= 2) slice.segment(0, n) = cone.basis.col(c).segment(cone.off_x(t), n);
      const int own_off = (agent == 1) ? n : n + m1;
      slice.segment(own_off, cone.m_own) =
          cone.basis.col(c).segment(cone.off_own(t), cone.m_own);
      if (cone.structure == CriticalConeBasis::Structure::Feedback && t >= 2) {
        const int opp_off = (agent == 1) ? n + m1 : n;
        slice.segment(opp_off, cone.m_opp) =
            cone.basis.col(c).segment(cone.off_opp(t), cone.m_opp);
      }
    }
  }

  Matrix P = Matrix::Zero(ncols, ncols);
  for (int t = 1; t <= K; ++t) {
    const Matrix W = stage_lagrangian_hessian(agent, derivs.at(t),
                                              multipliers.lambda(agent, t), std::nullopt,
                                              include_dynamics_curvature);
    P += slices[t - 1].transpose() * W * slices[t - 1];
  }
  Matrix Xf(n, ncols);
  for (int c = 0; c < ncols; ++c)
    Xf.col(c) = cone.basis.col(c).segment(cone.off_x(K + 1), n);
  P += sigma * Xf.transpose() * derivs.terminal.hess * Xf;
  P = 0.5 * (P + P.transpose()).eval();

  SecondOrderReport rep;
  rep.agent = agent;
  rep.structure = cone.structure;
  rep.cone_dim = ncols;
  rep.projected = P;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(P);
  rep.min_eig = eig.eigenvalues().minCoeff();
  rep.pd_tol = pd_tol_scale * (1.0 + P.operatorNorm());
  if (rep.min_eig > rep.pd_tol) {
    rep.classification = SecondOrderReport::Classification::Sufficient;
  } else if (rep.min_eig < -rep.pd_tol) {
    rep.classification = SecondOrderReport::Classification::Fails;
  } else {
    rep.classification = SecondOrderReport::Classification::NecessaryOnly;
  }
  return rep;
}

FbConeConstraints make_fb_cone_constraints(const GameDefinition& game, const Trajectory& traj,
                                           int agent, const AffinePolicySet& opponent_policy,
                                           bool policy_rows_active) {
  const GameDerivatives derivs =
      evaluate_derivatives(game, traj, /*with_dynamics_curvature=*/false, DerivativeOrder::First);
  FbConeConstraints fc;
  fc.agent = agent;
  fc.K = game.horizon;
  fc.n = game.state_dim;
  fc.m_own = game.control_dim(agent);
  fc.m_opp = game.control_dim(agent == 1 ? 2 : 1);
  fc.policy_rows_active = policy_rows_active;
  fc.A.resize(fc.K);
  fc.B_own.resize(fc.K);
  fc.B_opp.resize(fc.K);
  fc.opp_gain.resize(fc.K);
  for (int t = 1; t <= fc.K; ++t) {
    const StageDerivatives& sd = derivs.at(t);
    fc.A[t - 1] = sd.A;
    fc.B_own[t - 1] = (agent == 1) ? sd.B1 : sd.B2;
    fc.B_opp[t - 1] = (agent == 1) ? sd.B2 : sd.B1;
    fc.opp_gain[t - 1] = opponent_policy.at(t).gain;
  }
  return fc;
}

ConeContainment cone_containment_check(const CriticalConeBasis& ol_cone,
                                       const FbConeConstraints& fb, double tol) {
  if (ol_cone.structure != CriticalConeBasis::Structure::OpenLoop)
    throw InputError("cone_containment_check expects an open-loop cone");
  if (ol_cone.agent != fb.agent || ol_cone.K != fb.K || ol_cone.n != fb.n)
    throw InputError("cone_containment_check: cone/constraint mismatch");
  const int K = fb.K, n = fb.n, mi = fb.m_own;

  double resid = 0.0;
  for (int c = 0; c < ol_cone.basis.cols(); ++c) {
    const auto col = ol_cone.basis.col(c);
    // Lift with zero opponent directions: d_u_opp = 0 for all stages.
    Vector dx_prev = Vector::Zero(n);
    for (int s = 1; s <= K; ++s) {
      const Vector dx_s1 = col.segment(ol_cone.off_x(s + 1), n);
      const Vector du_own = col.segment(ol_cone.off_own(s), mi);
      const Vector dyn_gap = dx_s1 - fb.A[s - 1] * dx_prev - fb.B_own[s - 1] * du_own;
      resid = std::max(resid, dyn_gap.lpNorm<Eigen::Infinity>());
      if (fb.policy_rows_active && s >= 2) {
        // Lifted value of d_u_opp is zero, so the row residual is |gain * d_x|.
        resid = std::max(resid,
                         (fb.opp_gain[s - 1] * dx_prev).lpNorm<Eigen::Infinity>());
      }
      dx_prev = dx_s1;
    }
  }
  return ConeContainment{resid <= tol, resid};
}

const char* to_string(AuditVerdict v) {
  switch (v) {
    case AuditVerdict::OlneCertified: return "olne-certified";
    case AuditVerdict::NecessaryOnly: return "necessary-only";
    case AuditVerdict::Inconsistent: return "inconsistent";
    case AuditVerdict::Refused: return "refused";
  }
  return "unknown";
}

Theorem1Audit theorem1_audit(const GameDefinition& game, const AffinePolicySet& policies1,
                             const AffinePolicySet& policies2, const Trajectory& traj,
                             const Theorem1Tolerances& tol) {
  Theorem1Audit audit;

  const MultiplierSet fb_mult = recover_fb_multipliers(game, traj, policies1, policies2);
  audit.fb_report =
      fb_first_order_report(game, traj, policies1, policies2, fb_mult, tol.fb_residual);
  if (!audit.fb_report.pass) {
    audit.verdict = AuditVerdict::Refused;
    audit.refusal_reason = "feedback first-order residual " +
                           std::to_string(audit.fb_report.families.max()) +
                           " exceeds tolerance";
    return audit;
  }

  audit.lambda_negation_max = fb_mult.max_lambda_negation();
  audit.psi_max = fb_mult.max_psi_norm();
  audit.cascade_pass =
      audit.lambda_negation_max <= tol.cascade && audit.psi_max <= tol.cascade;

  audit.ol_report = ol_first_order_report(game, traj, std::nullopt, tol.ol_residual);
  audit.ol_first_order_pass = audit.ol_report.pass;

  auto [l1, l2] = recover_ol_costates(game, traj);
  MultiplierSet ol_mult;
  ol_mult.lambda1 = std::move(l1);
  ol_mult.lambda2 = std::move(l2);

  // Once the cascade has been verified, the weak-activity classification for
  // the cone build is taken at the cascade tolerance.
  const double drop_tol = std::max(tol.weak_active, tol.cascade);
  bool all_fb_sufficient = true, all_ol_sufficient = true;
  for (int agent = 1; agent <= 2; ++agent) {
    const CriticalConeBasis fb_cone =
        build_critical_cone(game, traj, CriticalConeBasis::Structure::Feedback, agent,
                            &policies1, &policies2, drop_tol, fb_mult);
    const CriticalConeBasis ol_cone = build_critical_cone(
        game, traj, CriticalConeBasis::Structure::OpenLoop, agent);
    audit.fb_second_order[agent - 1] =
        second_order_report(game, traj, fb_mult, fb_cone, agent, tol.pd_tol_scale);
    audit.ol_second_order[agent - 1] =
        second_order_report(game, traj, ol_mult, ol_cone, agent, tol.pd_tol_scale);

    const FbConeConstraints fc = make_fb_cone_constraints(
        game, traj, agent, agent == 1 ? policies2 : policies1,
        /*policy_rows_active=*/!fb_cone.policy_rows_dropped);
    audit.containment[agent - 1] = cone_containment_check(ol_cone, fc, tol.containment);

    using C = SecondOrderReport::Classification;
    if (audit.fb_second_order[agent - 1].classification != C::Sufficient)
      all_fb_sufficient = false;
    if (audit.ol_second_order[agent - 1].classification != C::Sufficient)
      all_ol_sufficient = false;
  }
  audit.containment_pass = audit.containment[0].contained && audit.containment[1].contained;

  if (!audit.cascade_pass || !audit.ol_first_order_pass || !audit.containment_pass) {
    audit.verdict = AuditVerdict::Inconsistent;
  } else if (all_fb_sufficient) {
    audit.verdict = all_ol_sufficient ? AuditVerdict::OlneCertified : AuditVerdict::Inconsistent;
  } else {
    audit.verdict = AuditVerdict::NecessaryOnly;
  }
  return audit;
}

Theorem1ConverseAudit theorem1_converse_audit(const GameDefinition& game, const Trajectory& traj,
                                              const std::optional<MultiplierSet>& multipliers,
                                              const Theorem1ConverseTolerances& tol) {
  Theorem1ConverseAudit audit;
  audit.ol_report = ol_first_order_report(game, traj, multipliers, tol.ol_residual);
  if (!audit.ol_report.pass) {
    audit.refused = true;
    audit.refusal_reason = "open-loop first-order residual " +
                           std::to_string(audit.ol_report.families.max()) +
                           " exceeds tolerance";
    return audit;
  }
  audit.refused = false;

  MultiplierSet m;
  if (multipliers) {
    m = *multipliers;
  } else {
    auto [l1, l2] = recover_ol_costates(game, traj);
    m.lambda1 = std::move(l1);
    m.lambda2 = std::move(l2);
  }
  // Embed with psi = 0 explicitly.
  const int K = game.horizon;
  if (K >= 2) {
    m.psi1.assign(K - 1, Vector::Zero(game.control_dim(2)));
    m.psi2.assign(K - 1, Vector::Zero(game.control_dim(1)));
  }
  const AffinePolicySet emb1 = embed_open_loop(traj, 1);
  const AffinePolicySet emb2 = embed_open_loop(traj, 2);
  audit.fb_report = fb_first_order_report(game, traj, emb1, emb2, m, tol.fb_residual);
  audit.pass = audit.fb_report.pass;
  return audit;
}

}  // namespace zsg
