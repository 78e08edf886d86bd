#include "mfgfem/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mfgfem {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string current;
  std::istringstream is(s);
  while (std::getline(is, current, sep)) parts.push_back(trim(current));
  return parts;
}

std::optional<double> to_double(std::string_view s) {
  const auto slash = s.find('/');
  if (slash != std::string_view::npos) {
    const auto num = to_double(trim(s.substr(0, slash)));
    const auto den = to_double(trim(s.substr(slash + 1)));
    if (!num || !den || *den == 0.0) return std::nullopt;
    return *num / *den;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

double get_double(const ConfigEntry& e, const std::string& key) {
  const auto v = to_double(e.value);
  if (!v) throw ConfigError(key + ": expected a number, got '" + e.value + "'", e.line);
  return *v;
}

int get_int(const ConfigEntry& e, const std::string& key) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (ec != std::errc() || ptr != e.value.data() + e.value.size()) {
    throw ConfigError(key + ": expected an integer, got '" + e.value + "'", e.line);
  }
  return v;
}

bool get_bool(const ConfigEntry& e, const std::string& key) {
  if (e.value == "true" || e.value == "yes" || e.value == "on" || e.value == "1") return true;
  if (e.value == "false" || e.value == "no" || e.value == "off" || e.value == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + e.value + "'", e.line);
}

SmallVec to_small(const Point& p, int dim) {
  SmallVec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = p[static_cast<std::size_t>(i)];
  return v;
}

Point to_point(const SmallVec& x) { return Point{x[0], x.size() > 1 ? x[1] : 0.0}; }

}  // namespace

ConfigMap parse_config_text(std::istream& in) {
  ConfigMap map;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + text + "'", line);
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line);
    if (value.empty()) throw ConfigError(key + ": empty value", line);
    for (char c : key) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_')) {
        throw ConfigError("invalid character in key '" + key + "'", line);
      }
    }
    if (map.count(key)) {
      throw ConfigError("duplicate key '" + key + "' (first on line " + std::to_string(map[key].line) + ")", line);
    }
    map[key] = ConfigEntry{value, line};
  }
  return map;
}

ScalarField parse_scalar_field(const std::string& spec, int dim) {
  if (const auto v = to_double(spec)) return constant_field(*v);
  if (auto f = builtin_scalar_field(spec, dim)) return *f;
  throw std::invalid_argument("unknown scalar field '" + spec + "'");
}

VectorField parse_vector_field(const std::string& spec, int dim) {
  const auto parts = split(spec, ',');
  std::vector<double> values;
  for (const auto& p : parts) {
    const auto v = to_double(p);
    if (!v) {
      values.clear();
      break;
    }
    values.push_back(*v);
  }
  if (!values.empty()) {
    if (values.size() == 1 && values[0] == 0.0) return constant_vector_field(0.0, 0.0);
    if (static_cast<int>(values.size()) != dim) {
      throw std::invalid_argument("vector '" + spec + "' needs " + std::to_string(dim) + " components");
    }
    return constant_vector_field(values[0], dim > 1 ? values[1] : 0.0);
  }
  if (auto f = builtin_vector_field(spec, dim)) return *f;
  throw std::invalid_argument("unknown vector field '" + spec + "'");
}

double level_mesh_size(DomainTag domain, int level) {
  const double scale = std::ldexp(1.0, -level);
  switch (domain) {
    case DomainTag::UnitInterval: return scale;
    case DomainTag::UnitSquare: return std::sqrt(2.0) * scale;
    case DomainTag::LShape: return std::sqrt(2.0) * 0.5 * scale;
  }
  return scale;
}

double ExperimentConfig::coupled_lambda(double h) const {
  return lambda_c * std::pow(h, 2.0 * gamma / 3.0);
}

std::optional<double> ExperimentConfig::lambda_for(double h) const {
  switch (schedule) {
    case LambdaSchedule::None: return std::nullopt;
    case LambdaSchedule::Fixed: return lambda;
    case LambdaSchedule::Coupled: return coupled_lambda(h);
  }
  return std::nullopt;
}

std::shared_ptr<const PolyhedralHamiltonian> ExperimentConfig::make_hamiltonian() const {
  const int dim = domain_dimension(domain);
  if (controls.empty()) {
    if (hamiltonian_preset == "max_norm") {
      return std::make_shared<PolyhedralHamiltonian>(PolyhedralHamiltonian::max_norm(dim));
    }
    if (hamiltonian_preset == "abs") {
      if (dim != 1) throw ConfigError("hamiltonian.preset = abs needs a one-dimensional domain");
      return std::make_shared<PolyhedralHamiltonian>(PolyhedralHamiltonian::absolute_value());
    }
    throw ConfigError("unknown hamiltonian preset '" + hamiltonian_preset + "'");
  }
  std::vector<Control> list;
  for (std::size_t i = 0; i < controls.size(); ++i) {
    const ControlSpec& spec = controls[i];
    const std::string name = "hamiltonian.control." + std::to_string(i + 1);
    VectorField b;
    ScalarField f;
    try {
      b = parse_vector_field(spec.drift, dim);
      f = parse_scalar_field(spec.cost, dim);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(name + ": " + e.what());
    }
    const bool b_const = !builtin_vector_field(spec.drift, dim).has_value();
    const bool f_const = to_double(spec.cost).has_value();
    if (b_const && f_const) {
      list.push_back(Control::make_constant(to_small(b(Point{0.0, 0.0}), dim), f(Point{0.0, 0.0})));
      continue;
    }
    Control c;
    c.drift = [b, dim](const SmallVec& x) { return to_small(b(to_point(x)), dim); };
    c.cost = [f](const SmallVec& x) { return f(to_point(x)); };
    list.push_back(std::move(c));
  }
  return std::make_shared<PolyhedralHamiltonian>(dim, std::move(list));
}

MfgProblem ExperimentConfig::make_problem(int level, std::optional<double> lam) const {
  return make_problem(std::make_shared<P1Space>(build_level(domain, level)), lam);
}

MfgProblem ExperimentConfig::make_problem(SpacePtr space, std::optional<double> lam) const {
  const int dim = domain_dimension(domain);
  if (!space || space->mesh().domain() != domain) throw ConfigError("space does not match the configured domain");
  MfgProblem p;
  p.space = std::move(space);
  p.nu = nu;
  p.hamiltonian = make_hamiltonian();
  p.lambda = lam;
  p.sigma = sigma;
  p.stabilization = stabilization;
  p.qp_mode = qp_mode;
  p.coupling.kind = coupling_kind;
  p.coupling.kappa = kappa;
  p.coupling.rho_scale = rho_scale;
  try {
    p.coupling.F0 = parse_scalar_field(coupling_F0, dim);
    p.source.g0 = parse_scalar_field(source_g0, dim);
    p.source.g1 = parse_vector_field(source_g1, dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  p.source.has_g1 = source_g1 != "0";
  return p;
}

ExperimentConfig make_experiment_config(const ConfigMap& entries) {
  ExperimentConfig c;
  bool gamma_given = false;
  bool level_given = false;
  bool range_given = false;
  std::map<int, ControlSpec> controls;
  std::map<int, int> control_lines;

  for (const auto& [key, e] : entries) {
    const std::string& v = e.value;
    if (key == "domain") {
      const auto tag = parse_domain_tag(v);
      if (!tag) throw ConfigError("domain: unknown domain '" + v + "'", e.line);
      c.domain = *tag;
    } else if (key == "level") {
      c.level_min = c.level_max = get_int(e, key);
      level_given = true;
    } else if (key == "level.min") {
      c.level_min = get_int(e, key);
      range_given = true;
    } else if (key == "level.max") {
      c.level_max = get_int(e, key);
      range_given = true;
    } else if (key == "gamma") {
      c.gamma = get_double(e, key);
      gamma_given = true;
      if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]", e.line);
    } else if (key == "lambda") {
      if (v == "none") {
        c.schedule = LambdaSchedule::None;
      } else {
        c.lambda = get_double(e, key);
        c.schedule = LambdaSchedule::Fixed;
        if (!(c.lambda > 0.0 && c.lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1]", e.line);
      }
    } else if (key == "lambda.schedule") {
      if (v == "none") c.schedule = LambdaSchedule::None;
      else if (v == "fixed") c.schedule = LambdaSchedule::Fixed;
      else if (v == "coupled") c.schedule = LambdaSchedule::Coupled;
      else throw ConfigError("lambda.schedule: expected none, fixed or coupled", e.line);
    } else if (key == "lambda.c") {
      c.lambda_c = get_double(e, key);
      if (!(c.lambda_c > 0.0)) throw ConfigError("lambda.c must be positive", e.line);
    } else if (key == "lambda.list") {
      c.lambda_list.clear();
      for (const auto& part : split(v, ',')) {
        const auto x = to_double(part);
        if (!x || !(*x > 0.0 && *x <= 1.0)) {
          throw ConfigError("lambda.list: entries must be numbers in (0, 1]", e.line);
        }
        c.lambda_list.push_back(*x);
      }
    } else if (key == "hamiltonian.preset") {
      c.hamiltonian_preset = v;
    } else if (key == "hamiltonian.qp") {
      if (v == "enumeration") c.qp_mode = QpMode::ActiveSetEnumeration;
      else if (v == "projected_gradient") c.qp_mode = QpMode::ProjectedGradient;
      else throw ConfigError("hamiltonian.qp: expected enumeration or projected_gradient", e.line);
    } else if (key.rfind("hamiltonian.control.", 0) == 0) {
      const auto parts = split(key, '.');
      if (parts.size() != 4 || (parts[3] != "b" && parts[3] != "f")) {
        throw ConfigError("expected hamiltonian.control.<i>.b or .f", e.line);
      }
      const auto index = to_double(parts[2]);
      if (!index || *index < 1.0 || std::floor(*index) != *index) {
        throw ConfigError("control index must be a positive integer", e.line);
      }
      auto& spec = controls[static_cast<int>(*index)];
      (parts[3] == "b" ? spec.drift : spec.cost) = v;
      control_lines[static_cast<int>(*index)] = e.line;
    } else if (key == "nu") {
      c.nu = get_double(e, key);
      if (!(c.nu > 0.0)) throw ConfigError("nu must be positive", e.line);
    } else if (key == "sigma") {
      c.sigma = get_double(e, key);
      if (!(c.sigma >= 0.0)) throw ConfigError("sigma must be nonnegative", e.line);
    } else if (key == "stabilization") {
      const auto mode = parse_stabilization_mode(v);
      if (!mode) throw ConfigError("stabilization: expected none, isotropic or edge_aligned", e.line);
      c.stabilization = *mode;
    } else if (key == "coupling.kind") {
      const auto kind = parse_coupling_kind(v);
      if (!kind) throw ConfigError("coupling.kind: expected local_linear or local_saturating", e.line);
      c.coupling_kind = *kind;
    } else if (key == "coupling.kappa") {
      c.kappa = get_double(e, key);
      if (!(c.kappa > 0.0)) throw ConfigError("coupling.kappa must be positive", e.line);
    } else if (key == "coupling.rho_scale") {
      c.rho_scale = get_double(e, key);
      if (!(c.rho_scale >= 0.0)) throw ConfigError("coupling.rho_scale must be nonnegative", e.line);
    } else if (key == "coupling.F0") {
      c.coupling_F0 = v;
    } else if (key == "source.g0") {
      c.source_g0 = v;
    } else if (key == "source.g1") {
      c.source_g1 = v;
    } else if (key == "solver.outer_tol") {
      c.solver.outer_tol = get_double(e, key);
    } else if (key == "solver.outer_max") {
      c.solver.outer_max = get_int(e, key);
    } else if (key == "solver.theta") {
      c.solver.theta = get_double(e, key);
    } else if (key == "solver.inner_tol") {
      c.solver.inner_tol = get_double(e, key);
    } else if (key == "solver.inner_max") {
      c.solver.inner_max = get_int(e, key);
    } else if (key == "solver.linesearch") {
      c.solver.linesearch = get_bool(e, key);
    } else if (key == "solver.max_sigma_escalations") {
      c.solver.max_sigma_escalations = get_int(e, key);
    } else if (key == "solver.fallback") {
      c.solver.fallback = get_bool(e, key);
    } else if (key == "reference.finer_levels") {
      c.finer_levels = get_int(e, key);
      if (c.finer_levels < 2) throw ConfigError("reference.finer_levels must be at least 2", e.line);
    } else if (key == "reference.mode") {
      if (v == "auto") c.reference_mode = ReferenceMode::Auto;
      else if (v == "pdi") c.reference_mode = ReferenceMode::Pdi;
      else if (v == "regularized") c.reference_mode = ReferenceMode::Regularized;
      else throw ConfigError("reference.mode: expected auto, pdi or regularized", e.line);
    } else if (key == "output.vtk") {
      c.write_vtk = get_bool(e, key);
    } else if (key == "output.timing") {
      c.timing = get_bool(e, key);
    } else if (key == "seed") {
      const auto s = to_double(v);
      if (!s || *s < 0.0 || std::floor(*s) != *s) throw ConfigError("seed must be a nonnegative integer", e.line);
      c.seed = static_cast<unsigned long>(*s);
    } else {
      throw ConfigError("unknown key '" + key + "'", e.line);
    }
  }

  if (level_given && range_given) throw ConfigError("use either 'level' or 'level.min'/'level.max'");
  if (c.level_min < 0 || c.level_max > 12) throw ConfigError("levels must lie in 0..12");
  if (c.level_min > c.level_max) throw ConfigError("level.min exceeds level.max");
  if (!gamma_given && c.domain == DomainTag::LShape) c.gamma = 2.0 / 3.0;

  int expected = 1;
  for (const auto& [index, spec] : controls) {
    const int line = control_lines[index];
    if (index != expected) throw ConfigError("control indices must be 1, 2, ... without gaps", line);
    if (spec.drift.empty() || spec.cost.empty()) {
      throw ConfigError("control " + std::to_string(index) + " needs both .b and .f", line);
    }
    c.controls.push_back(spec);
    ++expected;
  }
  const auto preset = entries.find("hamiltonian.preset");
  if (!c.controls.empty() && preset != entries.end()) {
    throw ConfigError("hamiltonian.preset conflicts with explicit controls", preset->second.line);
  }
  if (c.schedule == LambdaSchedule::Fixed && !(c.lambda > 0.0)) {
    throw ConfigError("lambda.schedule = fixed needs 'lambda'");
  }
  try {
    c.solver.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
  // Resolve field names and controls now so that mistakes surface as config errors.
  const int dim = domain_dimension(c.domain);
  const auto check_field = [&](const char* key, auto&& parse) {
    try {
      parse();
    } catch (const std::invalid_argument& err) {
      const auto it = entries.find(key);
      throw ConfigError(std::string(key) + ": " + err.what(), it == entries.end() ? 0 : it->second.line);
    }
  };
  check_field("coupling.F0", [&] { parse_scalar_field(c.coupling_F0, dim); });
  check_field("source.g0", [&] { parse_scalar_field(c.source_g0, dim); });
  check_field("source.g1", [&] { parse_vector_field(c.source_g1, dim); });
  try {
    c.make_hamiltonian();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("hamiltonian: ") + err.what());
  }
  return c;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  std::istringstream is(text);
  return make_experiment_config(parse_config_text(is));
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file '" + file.string() + "'");
  return make_experiment_config(parse_config_text(in));
}

}  // namespace mfgfem
