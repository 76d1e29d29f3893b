#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "porofs/coupling.hpp"

namespace porofs {

/// Configuration or validation problem; the message carries the line number
/// for grammar errors and the dotted key name for value errors.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Parsed run description. Line-oriented grammar:
///   [section]            sections: mesh material time coupling scenario output
///   key = value          '#' starts a comment; blank lines ignored
/// Unknown sections or keys are rejected with their line number; duplicate
/// keys are rejected. Every field has a default, so an empty document is a
/// valid (if inert) configuration. The full key table ships in the README.
struct RunConfig {
  // [mesh]
  int nx = 1, ny = 1, nz = 1;
  std::array<double, 6> box{0.0, 0.0, 0.0, 1.0, 1.0, 1.0};
  double distortion = 0.0;
  std::array<FlowBC, 6> flow_bc{FlowBC::neumann,  FlowBC::neumann, FlowBC::neumann,
                                FlowBC::neumann,  FlowBC::neumann, FlowBC::neumann};
  std::array<MechBC, 6> mech_bc{MechBC::dirichlet, MechBC::dirichlet, MechBC::dirichlet,
                                MechBC::dirichlet, MechBC::dirichlet, MechBC::dirichlet};

  // [material]  Either youngs_modulus/poisson or the six stiffness rows.
  double youngs_modulus = 1e9;
  double poisson = 0.25;
  bool has_stiffness_rows = false;
  std::array<std::array<double, 6>, 6> stiffness{};  // engineering Voigt rows
  std::array<double, 6> biot_alpha{1.0, 1.0, 1.0, 0.0, 0.0, 0.0};  // Voigt comps
  double biot_modulus = 1e9;
  std::array<double, 3> permeability{1e-15, 1e-15, 1e-15};  // m^2, diagonal
  double viscosity = 1e-3;                                  // Pa*s
  double fluid_compressibility = 0.0;                       // 1/Pa
  double fluid_density = 1000.0;
  double solid_density = 2650.0;
  double porosity = 0.2;
  Plasticity plasticity;

  // [time]
  double dt = 1.0;
  int n_steps = 1;

  // [coupling]
  CouplingControls controls;

  // [scenario]
  double initial_pressure = 0.0;
  double boundary_pressure = 0.0;  // on all flow-Dirichlet sides
  std::array<std::optional<double>, 6> side_pressure;  // per-side override
  std::array<std::optional<Vec3>, 6> side_traction;    // on mech-Neumann sides
  double source = 0.0;  // uniform volumetric rate (1/s)
  bool gravity = false;

  // [output]
  std::string directory = "out";
  int vtk_every = 0;  // write a snapshot every N steps; 0 disables
};

/// Parses and fully validates; physical values are checked against the
/// material invariants here, at parse time.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Effective configuration, every value included, as "section.key = value"
/// strings in a fixed order. This is the provenance block echoed into CSVs.
std::vector<std::string> config_echo(const RunConfig& cfg);

MaterialModel config_material(const RunConfig& cfg);
BoundaryRules config_rules(const RunConfig& cfg);
CouplingControls config_controls(const RunConfig& cfg);
/// Boundary pressure lambdas classify positions against the box planes;
/// boundary faces are never distorted, so the match is exact.
Scenario config_scenario(const RunConfig& cfg);

/// Legacy VTK text snapshot: unstructured hexahedra (type 12), cell pressure,
/// cell stress invariants (mean stress, deviatoric magnitude), point
/// displacement vectors.
void write_vtk(const std::string& path, const HexMesh& mesh, const SplitState& state);

/// CSV reports. Columns are fixed; the header row carries a format_version
/// column (currently 1) and the provenance block precedes it as '#' comments.
/// Identical configurations produce byte-identical files.
void write_steps_csv(const std::string& path, const std::vector<std::string>& provenance,
                     const std::vector<StepSummary>& steps);
void write_iterations_csv(const std::string& path,
                          const std::vector<std::string>& provenance,
                          const std::vector<std::pair<int, ContractionReport>>& rows);

/// Renders an iterations CSV back into a plain-text per-step summary of the
/// measured contraction ratios.
std::string render_report(const std::string& csv_text);

struct RunOutcome {
  bool completed = false;
  std::string error;
  int steps_done = 0;
  int total_iterations = 0;
  double final_max_ratio = 0.0;
  std::string steps_csv;
  std::string iterations_csv;
  int snapshots = 0;
};

/// Executes a configured transient run: builds the problem, time-steps,
/// writes CSV reports (also for partial failures) and VTK snapshots.
/// out_override, when nonempty, replaces cfg.directory.
RunOutcome run_from_config(const RunConfig& cfg, const std::string& out_override = "");

struct VerifyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Built-in property suites (tensor algebra oracles, material closed forms,
/// conservation, equilibrium, and the coupling ledger on a canned elastic
/// case). Empty filter runs everything; otherwise substring match on names.
std::vector<VerifyResult> run_verify_suites(const std::string& filter = "");

/// Validates PORO_THREADS if set: returns 0 when unset, the value when it is
/// a positive integer, and throws ConfigError otherwise. This build assembles
/// serially; the variable is accepted for interface stability and ignored.
int poro_threads_from_env();

}  // namespace porofs
