#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfgfem/config.hpp"
#include "mfgfem/diagnostics.hpp"

namespace mfgfem {

struct RunOptions {
  int threads = 1;
  /// Overrides solver.fallback from the configuration when set.
  bool fallback = false;
};

/// One row of table.csv. Failed solves keep `error` and NaN measurements.
struct LevelRow {
  int level = 0;
  double h = 0.0;
  std::optional<double> lambda;
  double err_u_h1 = 0.0;
  double err_m_l2 = 0.0;
  double r1_dual = 0.0;
  double r2_dual = 0.0;
  int outer_iters = 0;
  double seconds = 0.0;
  std::string error;

  bool ok() const { return error.empty(); }
};

/// One row of joint.csv: a distance between two of the four solutions
/// (continuous, regularized, discrete, discrete regularized) at one level.
struct JointRow {
  int level = 0;
  double h = 0.0;
  double lambda = 0.0;
  std::string leg;  // top, left, bottom, total
  double value = 0.0;
};

struct ReferenceInfo {
  int level = 0;
  std::optional<double> lambda;  // nullopt: unregularized path
  ResidualReport residuals;
  int outer_iters = 0;
};

struct StudyResult {
  std::vector<LevelRow> rows;
  std::vector<std::pair<std::string, RateFit>> fits;
  std::vector<JointRow> joint;
  ReferenceInfo reference;
  std::vector<std::string> notes;
};

struct SolveReport {
  MfgProblem problem;
  MfgSolution solution;
  ResidualReport residuals;
  NonnegativityReport nonnegativity;
  double h = 0.0;
  double seconds = 0.0;
};

/// Single solve on config.level (level.min must equal level.max).
SolveReport run_solve(const ExperimentConfig& config, const RunOptions& options = {});
/// Fixed level, one regularized solve per entry of lambda.list, errors against the
/// unregularized solution on the same mesh.
StudyResult study_lambda(const ExperimentConfig& config, const RunOptions& options = {});
/// Levels level.min..level.max with the configured schedule, errors against a
/// solution on level.max + reference.finer_levels.
StudyResult study_h(const ExperimentConfig& config, const RunOptions& options = {});
/// Per level, the four legs of the regularization/discretization diagram with
/// lambda_k from the coupled schedule.
StudyResult study_joint(const ExperimentConfig& config, const RunOptions& options = {});

/// level,h,lambda,err_u_h1,err_m_l2,r1_dual,r2_dual,outer_iters,seconds
void write_table_csv(std::ostream& os, const StudyResult& result, bool timing);
/// level,h,lambda,leg,value
void write_joint_csv(std::ostream& os, const StudyResult& result);
void write_solve_report(std::ostream& os, const ExperimentConfig& config, const SolveReport& report);
void write_study_report(std::ostream& os, const std::string& kind, const ExperimentConfig& config,
                        const StudyResult& result);

/// Runs one CLI command ("solve", "study-h", "study-lambda", "study-joint") and
/// writes its artifacts into `out_dir`. Returns the process exit code: 0 on
/// success, 1 on solver failure, 2 on configuration errors.
int run_command(const std::string& command, const std::filesystem::path& config_file,
                const std::filesystem::path& out_dir, const RunOptions& options = {});

}  // namespace mfgfem
