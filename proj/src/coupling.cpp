#include "porofs/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

namespace porofs {

namespace {

double euclidean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Volume-weighted L2 norm of a cellwise-constant field.
double cell_l2(const std::vector<CellGeometry>& geo, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t c = 0; c < v.size(); ++c) s += geo[c].volume * v[c] * v[c];
  return std::sqrt(s);
}

void check_state(const HexMesh& mesh, const SplitState& s, const char* who) {
  const bool ok = static_cast<int>(s.p.size()) == mesh.n_cells() &&
                  static_cast<int>(s.z.size()) == mesh.n_faces() &&
                  static_cast<int>(s.u.size()) == 3 * mesh.n_vertices() &&
                  s.gauss.size() == static_cast<std::size_t>(mesh.n_cells()) * kGaussPerCell;
  if (!ok) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s: state field sizes do not match the mesh", who);
    throw InvalidArgument(buf);
  }
}

}  // namespace

SplitState make_initial_state(const HexMesh& mesh, const MaterialModel& model, double p0) {
  SplitState s;
  s.p.assign(static_cast<std::size_t>(mesh.n_cells()), p0);
  s.z.assign(static_cast<std::size_t>(mesh.n_faces()), 0.0);
  s.u.assign(static_cast<std::size_t>(3 * mesh.n_vertices()), 0.0);
  s.gauss.assign(static_cast<std::size_t>(mesh.n_cells()) * kGaussPerCell, GaussPointState{});
  for (auto& g : s.gauss) g.sigma = model.alpha * (-p0);
  return s;
}

IterationDiff iteration_difference(const HexMesh& mesh, const std::vector<CellGeometry>& geo,
                                   const MaterialModel& model, double C, const SymTensor2& B,
                                   const SplitState& curr, const SplitState& prev) {
  (void)model;
  check_state(mesh, curr, "iteration_difference");
  check_state(mesh, prev, "iteration_difference");

  const int nc = mesh.n_cells();
  IterationDiff d;
  d.dp.resize(curr.p.size());
  for (std::size_t i = 0; i < curr.p.size(); ++i) d.dp[i] = curr.p[i] - prev.p[i];
  d.dz.resize(curr.z.size());
  for (std::size_t i = 0; i < curr.z.size(); ++i) d.dz[i] = curr.z[i] - prev.z[i];
  d.du.resize(curr.u.size());
  for (std::size_t i = 0; i < curr.u.size(); ++i) d.du[i] = curr.u[i] - prev.u[i];

  const std::size_t ng = curr.gauss.size();
  d.dsigma.resize(ng);
  d.deps.resize(ng);
  d.deps_p.resize(ng);
  d.dphi_p.resize(ng);
  d.dzeta.resize(ng);
  d.dzeta_f.resize(ng);
  for (int c = 0; c < nc; ++c) {
    for (int q = 0; q < kGaussPerCell; ++q) {
      const std::size_t g = static_cast<std::size_t>(c) * kGaussPerCell + q;
      d.dsigma[g] = curr.gauss[g].sigma - prev.gauss[g].sigma;
      d.deps[g] = strain_at_gauss(mesh, geo, c, q, d.du);
      d.deps_p[g] = curr.gauss[g].eps_p - prev.gauss[g].eps_p;
      d.dphi_p[g] = curr.gauss[g].phi_p - prev.gauss[g].phi_p;
      d.dzeta[g] = C * d.dp[c] + C / 3.0 * ddot(B, d.dsigma[g]) + d.dphi_p[g];
      d.dzeta_f[g] = C * d.dp[c];
    }
  }

  d.norm_dp = cell_l2(geo, d.dp);
  d.norm_p = cell_l2(geo, curr.p);
  d.norm_du = euclidean(d.du);
  d.norm_u = euclidean(curr.u);
  return d;
}

const std::vector<std::string>& contraction_report_columns() {
  static const std::vector<std::string> cols = {
      "metric_sigma",    "pressure_term",      "darcy_term",
      "compliance_term", "zeta_term",          "phi_gap_term",
      "bracket",         "rhs_prev",           "cross_term",
      "ledger_lhs",      "ledger_gap",         "quadratic_remainder",
      "closure_residual", "compliance_elastic", "plastic_work",
      "phi_lag_pressure", "phi_pressure",       "stress_phi_cross",
      "content_gap_term", "content_identity_gap", "young_rhs",
      "young_slack",     "galerkin_residual",  "contraction_ratio",
      "scale",           "rel_dp",             "rel_du"};
  return cols;
}

std::vector<double> contraction_report_values(const ContractionReport& r) {
  return {r.metric_sigma,    r.pressure_term,      r.darcy_term,
          r.compliance_term, r.zeta_term,          r.phi_gap_term,
          r.bracket,         r.rhs_prev,           r.cross_term,
          r.ledger_lhs,      r.ledger_gap,         r.quadratic_remainder,
          r.closure_residual, r.compliance_elastic, r.plastic_work,
          r.phi_lag_pressure, r.phi_pressure,       r.stress_phi_cross,
          r.content_gap_term, r.content_identity_gap, r.young_rhs,
          r.young_slack,     r.galerkin_residual,  r.contraction_ratio,
          r.scale,           r.rel_dp,             r.rel_du};
}

ContractionReport contraction_report(const HexMesh& mesh, const DofMap& dm,
                                     const std::vector<CellGeometry>& geo,
                                     const MaterialModel& model, double C, const SymTensor2& B,
                                     const FlowSystem& sys, const IterationDiff& diff,
                                     const IterationDiff& diff_prev,
                                     const std::vector<Tensor4>& tangents, int m) {
  if (diff.dsigma.size() != diff_prev.dsigma.size() || diff.dsigma.size() != tangents.size())
    throw InvalidArgument("contraction_report: difference/tangent sizes disagree");

  const Tensor4 D_inv = invert6(model.D);

  double s2 = 0.0, sprev2 = 0.0, zeta2 = 0.0, phi2 = 0.0, gap2 = 0.0, phigap2 = 0.0;
  double pr2 = 0.0, cross_sum = 0.0, lag_phi_p = 0.0, phi_press = 0.0, s_phi = 0.0;
  double sf_phi = 0.0, x_el = 0.0, x_ep = 0.0, work_p = 0.0, galerkin = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const double dp_c = diff.dp[c];
    pr2 += geo[c].volume * dp_c * dp_c;
    for (int q = 0; q < kGaussPerCell; ++q) {
      const std::size_t g = static_cast<std::size_t>(c) * kGaussPerCell + q;
      const double w = geo[c].pt[q].wdetJ;
      const double s = ddot(B, diff.dsigma[g]);
      const double s_prev = ddot(B, diff_prev.dsigma[g]);
      const double dphi = diff.dphi_p[g];
      const double dphi_f = 0.0;  // plastic porosity never moves during the flow solve
      const double gap = diff.dzeta[g] - diff.dzeta_f[g];

      s2 += w * s * s;
      sprev2 += w * s_prev * s_prev;
      zeta2 += w * diff.dzeta[g] * diff.dzeta[g];
      phi2 += w * dphi * dphi;
      gap2 += w * gap * gap;
      phigap2 += w * (dphi - dphi_f) * (dphi - dphi_f);
      cross_sum += w * s_prev * dp_c;
      lag_phi_p += w * diff_prev.dphi_p[g] * dp_c;
      phi_press += w * dphi * dp_c;
      s_phi += w * s * dphi;
      sf_phi += w * s * dphi_f;
      x_el += w * ddot(diff.dsigma[g], apply4(D_inv, diff.dsigma[g]));
      x_ep += w * ddot(diff.dsigma[g], apply4(invert6(tangents[g]), diff.dsigma[g]));
      work_p += w * ddot(diff.dsigma[g], diff.deps_p[g]);
      galerkin += w * ddot(diff.dsigma[g], diff.deps[g]);
    }
  }

  // dt ||kappa^{-1/2} dz||^2 through the assembled operator, so the Darcy row
  // difference A_zz dz = B' dp closes the ledger to the solver residual.
  std::vector<double> dz_free(static_cast<std::size_t>(dm.n_flux), 0.0);
  for (int f = 0; f < mesh.n_faces(); ++f)
    if (dm.flux_dof[f] >= 0) dz_free[dm.flux_dof[f]] = diff.dz[f];
  const std::vector<double> Adz = sys.A_zz.matvec(dz_free);
  double zAz = 0.0;
  for (std::size_t i = 0; i < dz_free.size(); ++i) zAz += dz_free[i] * Adz[i];

  ContractionReport r;
  r.m = m;
  r.metric_sigma = C / 6.0 * s2;
  r.pressure_term = C / 2.0 * pr2;
  r.darcy_term = sys.dt * zAz;
  r.compliance_term = x_ep;
  r.zeta_term = 0.5 / C * zeta2;
  r.phi_gap_term = 1.0 / C * phigap2;
  r.content_gap_term = 1.0 / C * gap2;
  r.bracket = r.content_gap_term + 0.5 / C * phi2 + sf_phi / 3.0;
  r.rhs_prev = C / 6.0 * sprev2;
  r.cross_term = -C / 3.0 * cross_sum;

  r.ledger_lhs = r.metric_sigma + r.pressure_term + r.darcy_term + r.compliance_term +
                 r.zeta_term + r.phi_gap_term - r.bracket;
  r.ledger_gap = r.ledger_lhs - r.cross_term;
  r.compliance_elastic = x_el;
  r.plastic_work = work_p;
  r.phi_lag_pressure = lag_phi_p;
  r.phi_pressure = phi_press;
  r.stress_phi_cross = s_phi;
  r.quadratic_remainder = C / 9.0 * s2 - s_phi / 3.0 + phi_press - lag_phi_p +
                          (x_ep - x_el) - work_p;
  r.closure_residual = r.ledger_gap - r.quadratic_remainder;

  r.content_identity_gap =
      r.content_gap_term - r.phi_gap_term - 2.0 / 3.0 * (s_phi - sf_phi) - C / 9.0 * s2;

  r.young_rhs = r.rhs_prev + C / 6.0 * pr2;
  r.young_slack = r.young_rhs - r.cross_term;
  r.galerkin_residual = galerkin;
  r.contraction_ratio = r.rhs_prev > 0.0 ? r.metric_sigma / r.rhs_prev : 0.0;

  const double mags[] = {std::fabs(r.metric_sigma), std::fabs(r.pressure_term),
                         std::fabs(r.darcy_term),   std::fabs(r.compliance_term),
                         std::fabs(r.zeta_term),    std::fabs(r.phi_gap_term),
                         std::fabs(r.bracket),      std::fabs(r.rhs_prev),
                         std::fabs(r.cross_term)};
  r.scale = *std::max_element(std::begin(mags), std::end(mags));

  r.rel_dp = diff.norm_dp / (diff.norm_p > 0.0 ? diff.norm_p : 1.0);
  r.rel_du = diff.norm_du / (diff.norm_u > 0.0 ? diff.norm_u : 1.0);
  return r;
}

bool convergence_criterion(const IterationDiff& diff, double bracket, double bracket_initial,
                           const CouplingControls& controls) {
  const double rel_dp = diff.norm_dp / (diff.norm_p > 0.0 ? diff.norm_p : 1.0);
  const double rel_du = diff.norm_du / (diff.norm_u > 0.0 ? diff.norm_u : 1.0);
  const double bracket_tol =
      std::max(controls.tol_bracket * bracket_initial, controls.bracket_abs);
  return rel_dp <= controls.tol && rel_du <= controls.tol && bracket <= bracket_tol;
}

CoupledDriver::CoupledDriver(const HexMesh& mesh, const DofMap& dm,
                             const std::vector<CellGeometry>& geo,
                             const std::vector<FaceGeometry>& fgeo, const MaterialModel& model,
                             const Scenario& scenario, const CouplingControls& controls)
    : mesh_(mesh),
      dm_(dm),
      geo_(geo),
      fgeo_(fgeo),
      model_(model),
      scenario_(scenario),
      controls_(controls),
      C_(storage_constant(model)),
      B_(skempton_tensor(model, invert6(model.D), storage_constant(model))),
      mech_(mesh, dm, geo, fgeo, model) {
  model_.validate();
  if (controls_.max_iters < 2) throw InvalidArgument("coupling: max_iters must be >= 2");
}

StepResult CoupledDriver::step(const SplitState& state_n, double dt) {
  check_state(mesh_, state_n, "fixed_stress_step");
  if (!(dt > 0.0)) throw InvalidArgument("fixed_stress_step: dt must be positive");
  if (!flow_ || dt != flow_dt_) {
    flow_.emplace(mesh_, dm_, geo_, fgeo_, model_, C_, B_, dt);
    flow_dt_ = dt;
  }

  StepResult out;
  SplitState prev = state_n;
  prev.iteration = 0;
  IterationDiff d_prev;
  std::vector<double> u0_free(static_cast<std::size_t>(dm_.n_disp), 0.0);

  for (int k = 1; k <= controls_.max_iters; ++k) {
    FlowInputs in;
    in.p_n = &state_n.p;
    in.states_n = &state_n.gauss;
    in.states_lagged = &prev.gauss;  // k = 1 lags the time-level state itself
    in.source = scenario_.source;
    in.dirichlet_pressure = scenario_.dirichlet_pressure;
    in.gravity = scenario_.gravity;
    FlowSolution fs = flow_->solve(in);
    out.flow_residual = std::max(out.flow_residual, fs.solver_residual);

    SplitState cur;
    cur.p = std::move(fs.p);
    cur.z.assign(static_cast<std::size_t>(mesh_.n_faces()), 0.0);
    for (int f = 0; f < mesh_.n_faces(); ++f)
      if (dm_.flux_dof[f] >= 0) cur.z[f] = fs.z[dm_.flux_dof[f]];

    for (int v = 0; v < mesh_.n_vertices(); ++v)
      for (int i = 0; i < 3; ++i)
        if (dm_.disp_dof[v][i] >= 0) u0_free[dm_.disp_dof[v][i]] = prev.u[3 * v + i];
    MechResult mr = mech_.solve(cur.p, state_n.gauss, scenario_.traction, scenario_.gravity,
                                &u0_free, controls_.tol_newton, controls_.max_newton);
    out.mech_residual = std::max(out.mech_residual, mr.residual);

    cur.u = expand_displacement(mesh_, dm_, mr.u);
    cur.gauss = std::move(mr.states);
    cur.time = state_n.time + dt;
    cur.step = state_n.step + 1;
    cur.iteration = k;
    out.iterations = k;

    if (k == 1) {
      out.norm_p1 = cell_l2(geo_, cur.p);
      out.norm_u1 = euclidean(cur.u);
      d_prev = iteration_difference(mesh_, geo_, model_, C_, B_, cur, prev);
      prev = std::move(cur);
      continue;
    }

    IterationDiff d = iteration_difference(mesh_, geo_, model_, C_, B_, cur, prev);
    ContractionReport rep = contraction_report(mesh_, dm_, geo_, model_, C_, B_,
                                               flow_->system(), d, d_prev, mr.tangents, k);
    out.reports.push_back(rep);
    if (k == 2) out.bracket_initial = rep.bracket;

    const bool done = k >= controls_.min_iters &&
                      convergence_criterion(d, rep.bracket, out.bracket_initial, controls_);
    d_prev = std::move(d);
    prev = std::move(cur);
    if (done) {
      out.converged = true;
      break;
    }
  }

  out.state = std::move(prev);
  return out;
}

SplitState CoupledDriver::equilibrate(const SplitState& state0) {
  check_state(mesh_, state0, "equilibrate");
  MechResult mr = mech_.solve(state0.p, state0.gauss, scenario_.traction, scenario_.gravity,
                              nullptr, controls_.tol_newton, controls_.max_newton);
  SplitState s = state0;
  s.u = expand_displacement(mesh_, dm_, mr.u);
  s.gauss = std::move(mr.states);
  return s;
}

TransientResult run_transient(const HexMesh& mesh, const DofMap& dm,
                              const std::vector<CellGeometry>& geo,
                              const std::vector<FaceGeometry>& fgeo, const MaterialModel& model,
                              const Scenario& scenario, const CouplingControls& controls,
                              const SplitState& initial, double dt, int n_steps,
                              const std::function<void(const SplitState&, const StepSummary&)>&
                                  on_step) {
  TransientResult result;
  if (n_steps < 1) throw InvalidArgument("run_transient: n_steps must be >= 1");

  CoupledDriver driver(mesh, dm, geo, fgeo, model, scenario, controls);
  SplitState state = initial;
  if (controls.equilibrate) state = driver.equilibrate(state);

  for (int n = 1; n <= n_steps; ++n) {
    StepResult r;
    try {
      r = driver.step(state, dt);
    } catch (const Error& e) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "step %d: %s", n, e.what());
      result.error = buf;
      break;
    }

    StepSummary s;
    s.step = n;
    s.time = state.time + dt;
    s.dt = dt;
    s.iterations = r.iterations;
    s.converged = r.converged;
    s.bracket_initial = r.bracket_initial;
    if (!r.reports.empty()) {
      s.rel_dp_final = r.reports.back().rel_dp;
      s.rel_du_final = r.reports.back().rel_du;
    }
    for (const auto& rep : r.reports)
      if (rep.m >= 3) s.max_ratio = std::max(s.max_ratio, rep.contraction_ratio);
    s.flow_residual = r.flow_residual;
    s.mech_residual = r.mech_residual;

    std::vector<double> z_free(static_cast<std::size_t>(dm.n_flux), 0.0);
    for (int f = 0; f < mesh.n_faces(); ++f)
      if (dm.flux_dof[f] >= 0) z_free[dm.flux_dof[f]] = r.state.z[f];
    const std::vector<double> mres =
        local_mass_residual(mesh, dm, geo, driver.storage(), driver.skempton(), dt, r.state.p,
                            r.state.gauss, state.p, state.gauss, z_free, scenario.source);
    for (double v : mres) s.mass_residual_max = std::max(s.mass_residual_max, std::fabs(v));

    result.steps.push_back(s);
    for (const auto& rep : r.reports) {
      result.reports.push_back(rep);
      result.report_step.push_back(n);
    }

    if (!r.converged) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "step %d: coupling did not converge in %d iterations", n,
                    r.iterations);
      result.error = buf;
      state = std::move(r.state);
      break;
    }

    state = std::move(r.state);
    if (on_step) on_step(state, s);
  }

  result.final_state = std::move(state);
  result.completed = result.error.empty() && static_cast<int>(result.steps.size()) == n_steps;
  return result;
}

}  // namespace porofs
