#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgfem/solver.hpp"

namespace mfgfem {

/// Configuration error; `line` is 0 when the problem is not tied to one line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Raw `key = value` entries with the line each came from.
struct ConfigEntry {
  std::string value;
  int line = 0;
};
using ConfigMap = std::map<std::string, ConfigEntry>;

/// Parses flat `key = value` text. '#' starts a comment, blank lines are
/// ignored, keys may contain dots. Duplicate keys are an error.
ConfigMap parse_config_text(std::istream& in);

enum class LambdaSchedule { None, Fixed, Coupled };
enum class ReferenceMode { Auto, Pdi, Regularized };

struct ControlSpec {
  std::string drift;  // "b1,b2" or a built-in vector field name
  std::string cost;   // number or a built-in scalar field name
};

struct ExperimentConfig {
  DomainTag domain = DomainTag::UnitSquare;
  int level_min = 4;
  int level_max = 4;
  double gamma = 1.0;

  LambdaSchedule schedule = LambdaSchedule::None;
  double lambda = 0.0;      // fixed schedule
  double lambda_c = 1.0;    // coupled schedule: c h^(2 gamma / 3)
  std::vector<double> lambda_list;  // study-lambda

  std::string hamiltonian_preset = "max_norm";  // used when `controls` is empty
  std::vector<ControlSpec> controls;
  QpMode qp_mode = QpMode::ActiveSetEnumeration;

  double nu = 1.0;
  double sigma = 0.5;
  StabilizationMode stabilization = StabilizationMode::EdgeAligned;

  CouplingKind coupling_kind = CouplingKind::LocalLinear;
  double kappa = 1.0;
  double rho_scale = 0.0;
  std::string coupling_F0 = "0";

  std::string source_g0 = "1";
  std::string source_g1 = "0";

  SolverConfig solver;

  int finer_levels = 2;
  ReferenceMode reference_mode = ReferenceMode::Auto;

  bool write_vtk = false;
  bool timing = true;
  unsigned long seed = 0;

  /// Lambda for a mesh of size h under the configured schedule (nullopt: unregularized).
  std::optional<double> lambda_for(double h) const;
  /// Coupled schedule value c h^(2 gamma / 3), whatever the configured schedule.
  double coupled_lambda(double h) const;
  /// Problem on the given level built from this configuration.
  MfgProblem make_problem(int level, std::optional<double> lambda) const;
  /// Same on an existing space (keeps mesh nesting for error evaluation).
  MfgProblem make_problem(SpacePtr space, std::optional<double> lambda) const;
  std::shared_ptr<const PolyhedralHamiltonian> make_hamiltonian() const;
};

/// Builds and validates a configuration; unknown keys and bad values raise
/// ConfigError with the offending line.
ExperimentConfig make_experiment_config(const ConfigMap& entries);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);
ExperimentConfig parse_experiment_config(const std::string& text);

/// Mesh size h_k of a level (maximum element diameter).
double level_mesh_size(DomainTag domain, int level);

/// Constant ("0.5"), or a built-in field name.
ScalarField parse_scalar_field(const std::string& spec, int dim);
/// Constant components ("1,0"), a single constant in 1D, or a built-in name.
VectorField parse_vector_field(const std::string& spec, int dim);

}  // namespace mfgfem
