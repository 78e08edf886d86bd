#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mfgfem/experiments.hpp"

using namespace mfgfem;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mfgfem_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MFGFEM_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int config_error_line(const std::string& text) {
  try {
    parse_experiment_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

const char* kBench = R"(domain = unit_interval
hamiltonian.preset = abs
nu = 1
coupling.kappa = 1
source.g0 = 1
output.timing = false
)";

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("config parsing") {
    const ExperimentConfig c = parse_experiment_config(
        "# comment\ndomain = lshape\nlevel.min = 2\nlevel.max = 4\n"
        "lambda.schedule = coupled  # trailing\nlambda.c = 0.5\nhamiltonian.control.1.b = 1,0\n"
        "hamiltonian.control.1.f = 0.25\nhamiltonian.control.2.b = rotation\nhamiltonian.control.2.f = 0\n");
    CHECK(c.domain == DomainTag::LShape);
    CHECK(c.level_min == 2);
    CHECK(c.level_max == 4);
    CHECK(c.gamma == doctest::Approx(2.0 / 3));
    CHECK(c.schedule == LambdaSchedule::Coupled);
    CHECK(c.controls.size() == 2);
    CHECK(c.make_hamiltonian()->size() == 2);

    const ExperimentConfig f = parse_experiment_config("lambda = 1/16\n");
    CHECK(f.schedule == LambdaSchedule::Fixed);
    CHECK(f.lambda == 1.0 / 16);
  }

  TEST_CASE("config errors carry line numbers") {
    CHECK(config_error_line("domain = unit_square\nfoo = 1\n") == 2);
    CHECK(config_error_line("nu = 1\n\nnu = 2\n") == 3);
    CHECK(config_error_line("level = x\n") == 1);
    CHECK(config_error_line("domain = unit_square\nthis line has no equals sign\n") == 2);
    CHECK(config_error_line("gamma = 1.5\n") == 1);
    CHECK(config_error_line("lambda.c = -1\n") == 1);
    CHECK(config_error_line("reference.finer_levels = 1\n") == 1);
    CHECK_THROWS_AS(parse_experiment_config("level.min = 4\nlevel.max = 3\n"), ConfigError);
  }

  TEST_CASE("coupled schedule") {
    ExperimentConfig c = parse_experiment_config("lambda.schedule = coupled\nlambda.c = 0.7\ngamma = 0.9\n");
    for (int k = 1; k <= 6; ++k) {
      const double h = level_mesh_size(DomainTag::UnitSquare, k);
      CHECK(h == doctest::Approx(std::sqrt(2.0) * std::pow(0.5, k)));
      CHECK(std::abs(*c.lambda_for(h) - 0.7 * std::pow(h, 2 * 0.9 / 3)) <= 1e-15);
      CHECK(metrics(*build_level(DomainTag::UnitSquare, k)).h_max == doctest::Approx(h).epsilon(1e-14));
    }
    CHECK(level_mesh_size(DomainTag::UnitInterval, 3) == 0.125);
  }

  TEST_CASE("study-lambda with a single control gives zero error") {
    ExperimentConfig c = parse_experiment_config(
        "domain = unit_interval\nlevel = 5\nhamiltonian.control.1.b = 1\nhamiltonian.control.1.f = 0.5\n"
        "lambda.list = 0.25, 0.0625, 0.015625\noutput.timing = false\n");
    const StudyResult r = study_lambda(c);
    REQUIRE(r.rows.size() == 3);
    for (const LevelRow& row : r.rows) {
      CHECK(row.ok());
      CHECK(row.err_m_l2 < 1e-12);
    }
  }

  TEST_CASE("study-lambda with one entry") {
    ExperimentConfig c = parse_experiment_config(std::string(kBench) + "level = 4\nlambda.list = 0.25\n");
    const StudyResult r = study_lambda(c);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].err_m_l2 >= 0.0);
    CHECK(r.fits.empty());
  }

  TEST_CASE("single-level study-h has rows and no fit") {
    ExperimentConfig c = parse_experiment_config(std::string(kBench) + "level = 3\nlambda.schedule = coupled\n");
    const StudyResult r = study_h(c);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].ok());
    CHECK(r.fits.empty());
    CHECK(r.rows[0].lambda.value() == doctest::Approx(std::pow(0.125, 2.0 / 3)).epsilon(1e-15));
  }

  TEST_CASE("single-control study-h has the P1 rate") {
    ExperimentConfig c = parse_experiment_config(
        "domain = unit_square\nlevel.min = 2\nlevel.max = 5\nhamiltonian.control.1.b = 0.6,0.3\n"
        "hamiltonian.control.1.f = 0\nlambda = 1/16\nreference.mode = regularized\noutput.timing = false\n");
    const StudyResult r = study_h(c);
    double slope = 0.0;
    for (const auto& [name, fit] : r.fits)
      if (name == "err_u_h1") slope = fit.slope;
    CHECK(slope == doctest::Approx(1.0).epsilon(0.15));
  }

  TEST_CASE("study-joint legs") {
    ExperimentConfig zero = parse_experiment_config(
        "domain = unit_square\nlevel.min = 2\nlevel.max = 3\nsource.g0 = 0\nlambda.schedule = coupled\n");
    for (const JointRow& j : study_joint(zero).joint) CHECK(j.value == 0.0);

    ExperimentConfig c =
        parse_experiment_config(std::string(kBench) + "level.min = 3\nlevel.max = 6\nlambda.schedule = coupled\n");
    const StudyResult r = study_joint(c);
    std::map<int, std::map<std::string, double>> legs;
    for (const JointRow& j : r.joint) legs[j.level][j.leg] = j.value;
    REQUIRE(legs.size() == 4);
    for (auto& [level, l] : legs) {
      CHECK(l.at("bottom") > 0.0);
      CHECK(l.at("top") > 0.0);
      CHECK(l.at("total") <= l.at("top") + l.at("left") + l.at("bottom") + 1e-9);
    }
  }

  TEST_CASE("study-joint bottom leg agrees with study-lambda") {
    ExperimentConfig c =
        parse_experiment_config(std::string(kBench) + "level.min = 6\nlevel.max = 9\nlambda.schedule = coupled\n");
    const StudyResult r = study_joint(c);
    double slope = 0.0;
    for (const auto& [name, fit] : r.fits)
      if (name == "bottom_vs_lambda") slope = fit.slope;
    CHECK(slope >= 0.45);

    double bottom6 = -1.0;
    for (const JointRow& j : r.joint)
      if (j.level == 6 && j.leg == "bottom") bottom6 = j.value;
    ExperimentConfig l = parse_experiment_config(std::string(kBench) + "level = 6\nlambda.list = 0.0625\n");
    const StudyResult lr = study_lambda(l);
    REQUIRE(lr.rows.size() == 1);
    CHECK(bottom6 == doctest::Approx(lr.rows[0].err_m_l2).epsilon(1e-9));
  }

  TEST_CASE("table csv format") {
    StudyResult r;
    LevelRow row;
    row.level = 3;
    row.h = 0.125;
    row.seconds = 1.5;
    r.rows.push_back(row);
    std::ostringstream a, b;
    write_table_csv(a, r, false);
    CHECK(a.str().rfind("level,h,lambda,err_u_h1,err_m_l2,r1_dual,r2_dual,outer_iters,seconds\n3,", 0) == 0);
    CHECK(a.str().find(",none,") != std::string::npos);
    CHECK(a.str().substr(a.str().size() - 3) == ",0\n");
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes and artifacts") {
    const fs::path dir = scratch("cli");
    const fs::path configs = MFGFEM_CONFIG_DIR;

    CHECK(run_cli("solve --config " + (configs / "zero.cfg").string() + " --out " + (dir / "zero").string()) == 0);
    const std::string zero_report = slurp(dir / "zero" / "report.txt");
    CHECK(zero_report.find("outer_iterations: 1\n") != std::string::npos);
    CHECK(fs::exists(dir / "zero" / "u.csv"));
    CHECK(fs::exists(dir / "zero" / "m.csv"));

    CHECK(run_cli("solve --config " + (configs / "bench1d.cfg").string() + " --out " + (dir / "bench").string()) == 0);
    CHECK(slurp(dir / "bench" / "report.txt").find("residual_certificate:") != std::string::npos);

    const fs::path bad = write_file(dir / "bad.cfg", "domain = unit_square\nlevel = three\n");
    CHECK(run_cli("solve --config " + bad.string() + " --out " + (dir / "bad").string()) == 2);
    CHECK(run_cli("solve --config " + (dir / "missing.cfg").string()) == 2);
    CHECK(run_cli("frobnicate --config " + bad.string()) == 2);

    // An unconverged solve is a solver failure.
    const fs::path tight = write_file(dir / "tight.cfg", std::string(kBench) + "level = 5\nlambda = 0.01\nsolver.outer_max = 1\n");
    CHECK(run_cli("solve --config " + tight.string() + " --out " + (dir / "tight").string()) == 1);
  }

  TEST_CASE("reproducible tables") {
    const fs::path dir = scratch("repro");
    const fs::path cfg = write_file(dir / "study.cfg", std::string(kBench) + "level.min = 2\nlevel.max = 4\nlambda.schedule = coupled\nseed = 3\n");
    REQUIRE(run_cli("study-h --config " + cfg.string() + " --out " + (dir / "a").string() + " --threads 2") == 0);
    REQUIRE(run_cli("study-h --config " + cfg.string() + " --out " + (dir / "b").string()) == 0);
    CHECK(slurp(dir / "a" / "table.csv") == slurp(dir / "b" / "table.csv"));
    CHECK(slurp(dir / "a" / "rates.csv") == slurp(dir / "b" / "rates.csv"));
    CHECK_FALSE(slurp(dir / "a" / "table.csv").empty());
  }
}
