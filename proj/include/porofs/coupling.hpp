#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "porofs/flow_fem.hpp"
#include "porofs/mech_fem.hpp"

namespace porofs {

/// One coupling iterate (or a committed time level): cell pressures, face
/// fluxes (constrained faces hold exact zeros), full vertex displacements
/// (constrained components hold exact zeros), and quadrature-point states
/// whose sigma is the total stress.
struct SplitState {
  std::vector<double> p;  // n_cells
  std::vector<double> z;  // n_faces, owner-outward normal flux density
  std::vector<double> u;  // 3*n_vertices
  GaussField gauss;       // n_cells*kGaussPerCell
  double time = 0.0;
  int step = 0;       // time level
  int iteration = 0;  // coupling iterate that produced this state (0 = committed)
};

/// Uniform-pressure state at zero strain: sigma = -alpha*p0 everywhere, so the
/// constitutive relation holds exactly before the first step.
SplitState make_initial_state(const HexMesh& mesh, const MaterialModel& model, double p0);

/// Componentwise change between two coupling iterates at one time level,
/// plus the flow-solve-only changes: the flow solve carries the pressure
/// (dp_f = dp) but moves neither stress nor plastic porosity, so
/// dzeta_f = C*dp per quadrature point.
struct IterationDiff {
  std::vector<double> dp;  // n_cells
  std::vector<double> dz;  // n_faces
  std::vector<double> du;  // 3*n_vertices
  std::vector<SymTensor2> dsigma;  // per quadrature point, total stress
  std::vector<SymTensor2> deps;    // total strain
  std::vector<SymTensor2> deps_p;
  std::vector<double> dphi_p;
  std::vector<double> dzeta;    // C*dp + (C/3) B:dsigma + dphi_p
  std::vector<double> dzeta_f;  // C*dp

  // Volume-weighted L2 pressure norms and Euclidean displacement norms of the
  // change and of the newer iterate, for the stopping criterion.
  double norm_dp = 0.0, norm_p = 0.0;
  double norm_du = 0.0, norm_u = 0.0;
};

IterationDiff iteration_difference(const HexMesh& mesh, const std::vector<CellGeometry>& geo,
                                   const MaterialModel& model, double C, const SymTensor2& B,
                                   const SplitState& curr, const SplitState& prev);

/// Every term of the per-iteration energy ledger, all volume integrals taken
/// with the shared cell quadrature and the Darcy term taken through the
/// assembled flux operator so the numbers are the ones the solvers saw.
///
/// Writing lhs = metric_sigma + pressure_term + darcy_term + compliance_term
/// + zeta_term + phi_gap_term - bracket, the discrete equations give exactly
///   lhs - cross_term = (C/9)||B:ds||^2 - (1/3)(B:ds, dphi_p) + (dphi_p, dp)
///                      - (dphi_p_prev, dp) + (compliance_term - compliance_elastic)
///                      - (ds : deps_p),
/// which collapses to (C/9)||B:ds||^2 when plasticity is inactive. A plain
/// balance lhs = cross_term therefore overshoots by that quadratic remainder;
/// quadratic_remainder carries its value and closure_residual the measured
/// defect of the full identity, so assembly and solver consistency are
/// verifiable on any run.
struct ContractionReport {
  int m = 0;  // coupling iteration the change leads into (reports start at m = 2)

  double metric_sigma = 0.0;     // (C/6)||B:ds||^2
  double pressure_term = 0.0;    // (C/2)||dp||^2
  double darcy_term = 0.0;       // dt * dz' A_zz dz = dt ||kappa^{-1/2} dz||^2
  double compliance_term = 0.0;  // (ds : Dep^{-1} ds), current-iterate tangents
  double zeta_term = 0.0;        // (1/2C)||dzeta||^2
  double phi_gap_term = 0.0;     // (1/C)||dphi_p - dphi_p_f||^2
  double bracket = 0.0;          // (1/C)||dzeta - dzeta_f||^2 + (1/2C)||dphi_p||^2
                                 //   + (1/3)(B:ds, dphi_p_f)
  double rhs_prev = 0.0;         // (C/6)||B:ds_prev||^2
  double cross_term = 0.0;       // -(C/3)(B:ds_prev, dp)

  double ledger_lhs = 0.0;            // six terms above minus bracket
  double ledger_gap = 0.0;            // ledger_lhs - cross_term
  double quadratic_remainder = 0.0;   // exact value the gap must take
  double closure_residual = 0.0;      // ledger_gap - quadratic_remainder

  double compliance_elastic = 0.0;  // (ds : D^{-1} ds), drained stiffness
  double plastic_work = 0.0;        // (ds : deps_p)
  double phi_lag_pressure = 0.0;    // (dphi_p_prev, dp)
  double phi_pressure = 0.0;        // (dphi_p, dp)
  double stress_phi_cross = 0.0;    // (B:ds, dphi_p)

  double content_gap_term = 0.0;    // (1/C)||dzeta - dzeta_f||^2
  double content_identity_gap = 0.0;  // content_gap_term - phi_gap_term
                                      //   - (2/3)(B:ds, dphi_p - dphi_p_f)
                                      //   - (C/9)||B:ds||^2; zero up to roundoff

  double young_rhs = 0.0;    // (C/6)||B:ds_prev||^2 + (C/6)||dp||^2
  double young_slack = 0.0;  // young_rhs - cross_term, nonnegative

  double galerkin_residual = 0.0;  // (ds : deps); zero up to the Newton tolerance
  double contraction_ratio = 0.0;  // metric_sigma / rhs_prev (0 when rhs_prev = 0)
  double scale = 0.0;              // max |term| over the nine ledger fields

  double rel_dp = 0.0, rel_du = 0.0;  // stopping-criterion values
};

/// Column order of ContractionReport fields in CSV and text reports.
const std::vector<std::string>& contraction_report_columns();
std::vector<double> contraction_report_values(const ContractionReport& r);

ContractionReport contraction_report(const HexMesh& mesh, const DofMap& dm,
                                     const std::vector<CellGeometry>& geo,
                                     const MaterialModel& model, double C, const SymTensor2& B,
                                     const FlowSystem& sys, const IterationDiff& diff,
                                     const IterationDiff& diff_prev,
                                     const std::vector<Tensor4>& tangents, int m);

struct CouplingControls {
  double tol = 1e-8;          // relative iterate-change threshold for p and u
  double tol_bracket = 1e-8;  // bracket threshold relative to the step's first bracket
  double bracket_abs = 0.0;   // absolute bracket floor (J); 0 disables
  int max_iters = 60;
  int min_iters = 2;  // convergence is never declared before the second iterate
  double tol_newton = 1e-10;
  int max_newton = 25;
  bool equilibrate = false;  // solve mechanics once at t = 0 before stepping
};

/// True iff rel_dp <= tol, rel_du <= tol, and bracket <= the larger of
/// tol_bracket * bracket_initial and bracket_abs. Relative norms fall back to
/// absolute ones when the reference norm is zero.
bool convergence_criterion(const IterationDiff& diff, double bracket, double bracket_initial,
                           const CouplingControls& controls);

/// Boundary data and forcing for a run; all fields time-independent.
/// Default-constructed callbacks mean zero.
struct Scenario {
  ScalarField source;              // volumetric fluid source (1/s)
  ScalarField dirichlet_pressure;  // g on flow-Dirichlet faces (Pa)
  TractionField traction;          // on mech-Neumann faces (Pa)
  bool gravity = false;
};

struct StepResult {
  SplitState state;  // final iterate (committed by the caller on success)
  std::vector<ContractionReport> reports;  // m = 2 .. iterations
  int iterations = 0;
  bool converged = false;
  double bracket_initial = 0.0;
  double norm_p1 = 0.0, norm_u1 = 0.0;  // absolute norms after the first iterate
  double flow_residual = 0.0;           // max relative saddle residual over iterates
  double mech_residual = 0.0;           // max relative Newton residual over iterates
};

/// Owns the factored flow operator and the mechanics solver, both reused
/// across iterations and time steps. One step runs iterates m = 1, 2, ...:
/// the flow solve lags total stress and plastic porosity from iterate m-1
/// (the time-level state for m = 1), the mechanics solve freezes the fresh
/// pressure, and plastic history restarts from the time-level state every
/// iterate. Reaching max_iters returns converged = false with the reports
/// intact; subsolver failures propagate as exceptions.
class CoupledDriver {
 public:
  CoupledDriver(const HexMesh& mesh, const DofMap& dm, const std::vector<CellGeometry>& geo,
                const std::vector<FaceGeometry>& fgeo, const MaterialModel& model,
                const Scenario& scenario, const CouplingControls& controls);

  StepResult step(const SplitState& state_n, double dt);

  /// Mechanics-only solve at the given pressure field; used for the optional
  /// equilibration pass before time stepping.
  SplitState equilibrate(const SplitState& state0);

  double storage() const { return C_; }
  const SymTensor2& skempton() const { return B_; }
  const MechSolver& mechanics() const { return mech_; }
  const FlowSolver* flow() const { return flow_ ? &*flow_ : nullptr; }

 private:
  const HexMesh& mesh_;
  const DofMap& dm_;
  const std::vector<CellGeometry>& geo_;
  const std::vector<FaceGeometry>& fgeo_;
  const MaterialModel& model_;
  Scenario scenario_;
  CouplingControls controls_;
  double C_;
  SymTensor2 B_;
  MechSolver mech_;
  std::optional<FlowSolver> flow_;  // rebuilt when dt changes
  double flow_dt_ = 0.0;
};

struct StepSummary {
  int step = 0;
  double time = 0.0;
  double dt = 0.0;
  int iterations = 0;
  bool converged = false;
  double bracket_initial = 0.0;
  double rel_dp_final = 0.0, rel_du_final = 0.0;
  double max_ratio = 0.0;           // max contraction_ratio over m >= 3
  double mass_residual_max = 0.0;   // max |local mass residual| after commit
  double flow_residual = 0.0;
  double mech_residual = 0.0;
};

struct TransientResult {
  std::vector<StepSummary> steps;
  std::vector<ContractionReport> reports;  // tagged by report_step below
  std::vector<int> report_step;            // reports[i] belongs to step report_step[i]
  SplitState final_state;
  bool completed = false;
  std::string error;  // set when a step failed; history above is partial
};

/// Marches n_steps Backward Euler steps of size dt from `initial`, invoking
/// on_step after each committed step (for snapshot/report persistence). A
/// step that fails to converge or throws stops the march; everything
/// committed so far stays in the result.
TransientResult run_transient(const HexMesh& mesh, const DofMap& dm,
                              const std::vector<CellGeometry>& geo,
                              const std::vector<FaceGeometry>& fgeo, const MaterialModel& model,
                              const Scenario& scenario, const CouplingControls& controls,
                              const SplitState& initial, double dt, int n_steps,
                              const std::function<void(const SplitState&, const StepSummary&)>&
                                  on_step = nullptr);

}  // namespace porofs
