#include <cmath>
#include <cstdio>

#include "porofs/cli_io.hpp"

namespace porofs {

namespace {

/// Deterministic LCG so verify output never varies between runs.
struct Lcg {
  unsigned long long s = 0x2545F4914F6CDD1Dull;
  double next() {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<double>((s >> 11) & ((1ull << 52) - 1)) / static_cast<double>(1ull << 52);
  }
  double sym() { return 2.0 * next() - 1.0; }
};

struct SuiteRun {
  int checks = 0;
  std::string first_failure;

  void check(bool ok, const std::string& what) {
    ++checks;
    if (!ok && first_failure.empty()) first_failure = what;
  }
  void close(bool ok, const std::string& what, double measured, double allowed) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s (measured %.3e, allowed %.3e)", what.c_str(), measured,
                  allowed);
    check(ok, buf);
  }
  VerifyResult result(const std::string& name) const {
    VerifyResult r;
    r.name = name;
    r.passed = first_failure.empty();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%d checks", checks);
    r.detail = r.passed ? buf : first_failure;
    return r;
  }
};

VerifyResult suite_tensor() {
  SuiteRun s;
  Lcg rng;

  // Inverse round trip on a well-conditioned stiffness.
  const Tensor4 D = isotropic_stiffness(5e9, 0.3);
  const Tensor4 Dinv = invert6(D);
  for (int rep = 0; rep < 10; ++rep) {
    SymTensor2 x{};
    for (int i = 0; i < 6; ++i) x[i] = rng.sym();
    const SymTensor2 y = apply4(D, apply4(Dinv, x));
    double err = 0.0, nrm = 0.0;
    for (int i = 0; i < 6; ++i) {
      err = std::max(err, std::fabs(y[i] - x[i]));
      nrm = std::max(nrm, std::fabs(x[i]));
    }
    s.close(err <= 1e-12 * nrm, "invert6 round trip", err, 1e-12 * nrm);
  }

  // Mandel double contraction equals the componentwise double sum.
  for (int rep = 0; rep < 10; ++rep) {
    SymTensor2 a{}, b{};
    for (int i = 0; i < 6; ++i) {
      a[i] = rng.sym();
      b[i] = rng.sym();
    }
    const Mat3 A = a.to_matrix(), Bm = b.to_matrix();
    double full = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) full += A[i][j] * Bm[i][j];
    s.close(std::fabs(ddot(a, b) - full) <= 1e-13 * (1.0 + std::fabs(full)),
            "ddot equals component sum", std::fabs(ddot(a, b) - full), 1e-13);
  }

  // Volumetric and deviatoric projectors resolve the identity.
  const Tensor4 P = Tensor4::vol_projector() + Tensor4::dev_projector();
  double gap = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) gap = std::max(gap, std::fabs(P(i, j) - (i == j ? 1.0 : 0.0)));
  s.close(gap <= 1e-15, "projector completeness", gap, 1e-15);

  // Matrix round trip preserves the Frobenius norm.
  for (int rep = 0; rep < 5; ++rep) {
    SymTensor2 a{};
    for (int i = 0; i < 6; ++i) a[i] = rng.sym();
    const SymTensor2 back = SymTensor2::from_matrix(a.to_matrix());
    double err = 0.0;
    for (int i = 0; i < 6; ++i) err = std::max(err, std::fabs(back[i] - a[i]));
    s.close(err <= 1e-15, "matrix round trip", err, 1e-15);
    const Mat3 A = a.to_matrix();
    double fro = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) fro += A[i][j] * A[i][j];
    s.close(std::fabs(a.norm() - std::sqrt(fro)) <= 1e-13 * (1.0 + a.norm()),
            "Mandel norm is Frobenius", std::fabs(a.norm() - std::sqrt(fro)), 1e-13);
  }
  return s.result("tensor");
}

VerifyResult suite_material() {
  SuiteRun s;
  Lcg rng;

  for (int rep = 0; rep < 5; ++rep) {
    const double E = 1e9 * (0.5 + rng.next());
    const double nu = 0.05 + 0.4 * rng.next();
    const double a = 0.3 + 0.7 * rng.next();
    const double M = 1e9 * (0.5 + rng.next());
    MaterialModel m;
    m.D = isotropic_stiffness(E, nu);
    m.alpha = a * SymTensor2::identity();
    m.M = M;
    m.K_perm = Mat3{{{1e-15, 0, 0}, {0, 1e-15, 0}, {0, 0, 1e-15}}};
    m.mu = 1e-3;
    m.rho0 = 1000;
    m.rho_r = 2650;
    m.phi0 = 0.2;

    // Closed forms for the isotropic case: C = 1/M + a^2/K, B = a/(K C) I.
    const double K = E / (3.0 * (1.0 - 2.0 * nu));
    const double C = storage_constant(m);
    const double C_ref = 1.0 / M + a * a / K;
    s.close(std::fabs(C - C_ref) <= 1e-12 * C_ref, "storage constant closed form",
            std::fabs(C - C_ref), 1e-12 * C_ref);
    const SymTensor2 B = skempton_tensor(m, invert6(m.D), C);
    const double b_ref = a / (K * C);
    for (int i = 0; i < 3; ++i)
      s.close(std::fabs(B[i] - b_ref) <= 1e-12 * b_ref, "pressure-stress tensor closed form",
              std::fabs(B[i] - b_ref), 1e-12 * b_ref);
    for (int i = 3; i < 6; ++i)
      s.check(std::fabs(B[i]) <= 1e-15 * b_ref, "pressure-stress tensor has no shear");
  }

  // Radial return closed form for the deviatoric model, one loaded point.
  {
    MaterialModel m;
    m.D = isotropic_stiffness(1e9, 0.25);
    m.alpha = SymTensor2::identity();
    m.M = 1e9;
    m.K_perm = Mat3{{{1e-15, 0, 0}, {0, 1e-15, 0}, {0, 0, 1e-15}}};
    m.mu = 1e-3;
    m.rho0 = 1000;
    m.rho_r = 2650;
    m.phi0 = 0.2;
    m.plasticity.type = PlasticityType::von_mises;
    m.plasticity.yield_stress = 1e6;
    m.plasticity.hardening = 5e7;
    const double G = 1e9 / (2.0 * 1.25);

    SymTensor2 eps{};
    eps[5] = 3e-3;  // Mandel shear component
    const ReturnMapResult r = return_map(eps, GaussPointState{}, m);
    const double dev_trial = (apply4(m.D, eps)).deviator().norm();
    const double f_trial = dev_trial - std::sqrt(2.0 / 3.0) * 1e6;
    const double dgamma = f_trial / (2.0 * G + (2.0 / 3.0) * 5e7);
    const double dev_ref = dev_trial - 2.0 * G * dgamma;
    s.check(r.plastic, "shear load must yield");
    s.close(std::fabs(r.sigma.deviator().norm() - dev_ref) <= 1e-9 * dev_ref,
            "radial return magnitude", std::fabs(r.sigma.deviator().norm() - dev_ref),
            1e-9 * dev_ref);
    s.check(r.state.phi_p == 0.0, "deviatoric flow keeps plastic porosity at zero");
  }

  // Cone flow moves porosity in proportion to the trace of plastic strain.
  {
    MaterialModel m;
    m.D = isotropic_stiffness(1e9, 0.25);
    m.alpha = SymTensor2::identity();
    m.M = 1e9;
    m.K_perm = Mat3{{{1e-15, 0, 0}, {0, 1e-15, 0}, {0, 0, 1e-15}}};
    m.mu = 1e-3;
    m.rho0 = 1000;
    m.rho_r = 2650;
    m.phi0 = 0.2;
    m.plasticity.type = PlasticityType::drucker_prager;
    m.plasticity.cohesion = 3e5;
    m.plasticity.friction = 0.4;
    m.plasticity.hardening = 1e8;
    m.plasticity.beta_p = 0.6;

    // Deviatoric-dominant state: the projection stays on the cone, away
    // from the apex.
    SymTensor2 eps{};
    eps[0] = 2e-3;
    eps[1] = eps[2] = -8e-4;
    const ReturnMapResult r = return_map(eps, GaussPointState{}, m);
    s.check(r.plastic, "triaxial load must yield");
    const double tr = r.state.eps_p.trace();
    s.check(tr > 0.0, "cone flow must dilate");
    s.close(std::fabs(r.state.phi_p - 0.6 * tr) <= 1e-12 * std::fabs(0.6 * tr),
            "plastic porosity proportional to dilation", std::fabs(r.state.phi_p - 0.6 * tr),
            1e-12 * 0.6 * tr);
  }
  return s.result("material");
}

MaterialModel canned_model(double alpha_iso) {
  MaterialModel m;
  m.D = isotropic_stiffness(1e9, 0.25);
  m.alpha = alpha_iso * SymTensor2::identity();
  m.M = 1e9;
  m.K_perm = Mat3{{{1e-15, 0, 0}, {0, 1e-15, 0}, {0, 0, 1e-15}}};
  m.mu = 1e-3;
  m.rho0 = 1000;
  m.rho_r = 2650;
  m.phi0 = 0.2;
  return m;
}

struct CannedRig {
  HexMesh mesh;
  DofMap dm;
  std::vector<CellGeometry> geo;
  std::vector<FaceGeometry> fgeo;

  explicit CannedRig(int n) : mesh(generate_brick(n, n, n, {0, 0, 0, 1, 1, 1}, 0.0)) {
    BoundaryRules rules;
    for (int s2 = 0; s2 < 6; ++s2) {
      rules.flow[s2] = FlowBC::neumann;
      rules.mech[s2] = MechBC::dirichlet;
    }
    rules.flow[0] = FlowBC::dirichlet;
    classify_boundary(mesh, rules);
    dm = build_dofmap(mesh);
    geo = build_cell_geometry(mesh);
    fgeo = build_face_geometry(mesh);
  }
};

VerifyResult suite_flow() {
  SuiteRun s;
  CannedRig rig(2);
  const MaterialModel model = canned_model(0.8);
  const double C = storage_constant(model);
  const SymTensor2 B = skempton_tensor(model, invert6(model.D), C);
  const double dt = 1.0;

  const SplitState s0 = make_initial_state(rig.mesh, model, 1e6);
  FlowInputs in;
  in.p_n = &s0.p;
  in.states_n = &s0.gauss;
  in.states_lagged = &s0.gauss;
  in.dirichlet_pressure = [](const Vec3&) { return 0.0; };

  FlowSolver solver(rig.mesh, rig.dm, rig.geo, rig.fgeo, model, C, B, dt);
  const FlowSolution sol = solver.solve(in);
  s.close(sol.solver_residual <= 1e-10, "flow solve residual", sol.solver_residual, 1e-10);

  // Short-time drawdown: the drained layer discharges and the mesh loses
  // fluid overall. Pointwise monotonicity is not a property of the lowest-
  // order mixed discretization, so only the integrated content is checked.
  double p_min = 1e6, accum = 0.0;
  for (int c = 0; c < rig.mesh.n_cells(); ++c) {
    p_min = std::min(p_min, sol.p[static_cast<std::size_t>(c)]);
    accum += C * rig.geo[static_cast<std::size_t>(c)].volume *
             (sol.p[static_cast<std::size_t>(c)] - 1e6);
  }
  s.check(p_min < 0.999e6, "drained layer discharges");
  s.check(accum < 0.0, "total fluid content decreases");

  // Conservation against the lagged stress: the mixed solve satisfies the
  // mass row exactly, so the cellwise defect is solver-level small.
  const std::vector<double> res =
      local_mass_residual(rig.mesh, rig.dm, rig.geo, C, B, dt, sol.p, s0.gauss, s0.p,
                          s0.gauss, sol.z, nullptr);
  double cell_scale = 0.0;
  for (int c = 0; c < rig.mesh.n_cells(); ++c)
    cell_scale = std::max(cell_scale, C * rig.geo[static_cast<std::size_t>(c)].volume * 1e6);
  for (double r : res)
    s.close(std::fabs(r) <= 1e-9 * cell_scale, "local mass residual", std::fabs(r),
            1e-9 * cell_scale);
  return s.result("flow");
}

VerifyResult suite_mech() {
  SuiteRun s;
  HexMesh mesh = generate_brick(2, 2, 2, {0, 0, 0, 1, 1, 1}, 0.0);
  BoundaryRules rules;
  for (int s2 = 0; s2 < 6; ++s2) {
    rules.flow[s2] = FlowBC::neumann;
    rules.mech[s2] = MechBC::dirichlet;
  }
  rules.mech[5] = MechBC::neumann;
  classify_boundary(mesh, rules);
  const DofMap dm = build_dofmap(mesh);
  const auto geo = build_cell_geometry(mesh);
  const auto fgeo = build_face_geometry(mesh);
  const MaterialModel model = canned_model(0.8);

  const double tz = -3e6;
  MechSolver mech(mesh, dm, geo, fgeo, model);
  const std::vector<double> p(static_cast<std::size_t>(mesh.n_cells()), 0.0);
  const GaussField states(static_cast<std::size_t>(mesh.n_cells()) * kGaussPerCell);
  const MechResult r =
      mech.solve(p, states, [tz](const Vec3&, Side) { return Vec3{0.0, 0.0, tz}; }, false);
  s.check(r.converged, "elastic solve converges");
  s.close(r.residual <= 1e-10, "elastic Newton residual", r.residual, 1e-10);

  // Global equilibrium: constrained reactions balance the applied load.
  double rz = 0.0;
  for (std::size_t i = 2; i < r.reactions.size(); i += 3) rz += r.reactions[i];
  const double applied = tz * 1.0;  // unit face area
  s.close(std::fabs(rz + applied) <= 1e-9 * std::fabs(applied), "reaction balance",
          std::fabs(rz + applied), 1e-9 * std::fabs(applied));
  return s.result("mech");
}

VerifyResult suite_coupling() {
  SuiteRun s;
  CannedRig rig(3);
  const MaterialModel model = canned_model(0.8);
  Scenario sc;
  sc.dirichlet_pressure = [](const Vec3&) { return 0.0; };
  CouplingControls ctl;
  ctl.tol = 1e-11;
  CoupledDriver driver(rig.mesh, rig.dm, rig.geo, rig.fgeo, model, sc, ctl);
  const StepResult r = driver.step(make_initial_state(rig.mesh, model, 1e6), 1.0);
  s.check(r.converged, "canned drawdown converges");
  s.check(r.reports.size() >= 5, "enough coupling iterations to observe decay");

  for (const auto& rep : r.reports) {
    const double rel = std::max({rep.rel_dp, rep.rel_du, 1e-15});
    const double tol_closure = rep.scale * std::max(1e-10, 3e-14 / rel);
    s.close(std::fabs(rep.closure_residual) <= tol_closure, "ledger closure",
            std::fabs(rep.closure_residual), tol_closure);
    s.check(rep.metric_sigma <= rep.rhs_prev * (1.0 + 1e-8),
            "stress metric bounded by previous iterate");
    if (rep.m >= 3) s.check(rep.contraction_ratio < 1.0, "contraction ratio below one");
    s.check(rep.young_slack >= -1e-12 * rep.scale, "quadratic bound slack nonnegative");
    s.close(std::fabs(rep.quadratic_remainder - 2.0 / 3.0 * rep.metric_sigma) <=
                1e-9 * rep.metric_sigma + 1e-300,
            "elastic remainder equals two thirds of the metric",
            std::fabs(rep.quadratic_remainder - 2.0 / 3.0 * rep.metric_sigma),
            1e-9 * rep.metric_sigma);
  }

  // Decoupled control: a vanishing coupling tensor finishes in two
  // iterations with an exactly zero report.
  const MaterialModel m0 = canned_model(0.0);
  CoupledDriver d0(rig.mesh, rig.dm, rig.geo, rig.fgeo, m0, sc, CouplingControls{});
  const StepResult r0 = d0.step(make_initial_state(rig.mesh, m0, 1e6), 1.0);
  s.check(r0.converged && r0.iterations == 2, "decoupled run takes exactly two iterations");
  if (!r0.reports.empty())
    for (double v : contraction_report_values(r0.reports.front()))
      s.check(v == 0.0, "decoupled report is exactly zero");
  return s.result("coupling");
}

}  // namespace

std::vector<VerifyResult> run_verify_suites(const std::string& filter) {
  std::vector<VerifyResult> out;
  auto want = [&](const char* name) {
    return filter.empty() || std::string(name).find(filter) != std::string::npos;
  };
  if (want("tensor")) out.push_back(suite_tensor());
  if (want("material")) out.push_back(suite_material());
  if (want("flow")) out.push_back(suite_flow());
  if (want("mech")) out.push_back(suite_mech());
  if (want("coupling")) out.push_back(suite_coupling());
  return out;
}

}  // namespace porofs
