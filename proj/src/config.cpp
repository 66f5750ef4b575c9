#include "kamnf/config.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "kamnf/diophantine.hpp"
#include "kamnf/errors.hpp"

namespace kam {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& message) {
  throw ConfigError(field + ": " + message);
}

const Json* find(const Json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

void require_object(const Json& j, const std::string& field) {
  if (!j.is_object()) fail(field, "must be a JSON object");
}

void check_keys(const Json& j, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* candidate : allowed) {
      if (it.key() == candidate) {
        known = true;
        break;
      }
    }
    if (!known) {
      fail(prefix.empty() ? it.key() : prefix + "." + it.key(), "unknown key");
    }
  }
}

double get_number(const Json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "must be a number");
  return j.get<double>();
}

int get_int(const Json& j, const std::string& field) {
  if (!j.is_number_integer()) fail(field, "must be an integer");
  const auto wide = j.get<std::int64_t>();
  if (wide < std::numeric_limits<int>::min() ||
      wide > std::numeric_limits<int>::max()) {
    fail(field, "out of range");
  }
  return static_cast<int>(wide);
}

std::uint64_t get_seed(const Json& j, const std::string& field) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  fail(field, "must be a non-negative integer");
}

std::vector<double> get_number_array(const Json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      fail(field + "[" + std::to_string(i) + "]", "must be a number");
    }
    out.push_back(j[i].get<double>());
  }
  return out;
}

std::vector<int> get_int_array(const Json& j, const std::string& field,
                               std::size_t expected) {
  if (!j.is_array() || j.size() != expected) {
    fail(field,
         "must be an integer array of length " + std::to_string(expected));
  }
  std::vector<int> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(get_int(j[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

FourierTaylorSeries cosine_shape(int dim, int K, int M,
                                 const std::vector<int>& mode) {
  std::vector<int> negated(mode);
  for (int& entry : negated) entry = -entry;
  const std::vector<int> powers(static_cast<std::size_t>(dim), 0);
  return FourierTaylorSeries(dim, K, M,
                             {{make_index(mode, powers), Complex(0.5)},
                              {make_index(negated, powers), Complex(0.5)}});
}

// f0 = omega.r + |r|^2/2 as a series; with S = Id the presets expose the
// standard unit-twist rotator.
FourierTaylorSeries rotator_f0(const std::vector<double>& omega, int K, int M) {
  const int d = static_cast<int>(omega.size());
  std::vector<Term> terms;
  std::vector<int> k(static_cast<std::size_t>(d), 0);
  for (int i = 0; i < d; ++i) {
    std::vector<int> linear(static_cast<std::size_t>(d), 0);
    linear[static_cast<std::size_t>(i)] = 1;
    terms.push_back({make_index(k, linear),
                     Complex(omega[static_cast<std::size_t>(i)])});
    std::vector<int> quadratic(static_cast<std::size_t>(d), 0);
    quadratic[static_cast<std::size_t>(i)] = 2;
    terms.push_back({make_index(k, quadratic), Complex(0.5)});
  }
  return FourierTaylorSeries(d, K, M, std::move(terms));
}

void materialize_preset(RunConfig& config) {
  const int K = config.fourier_cutoff;
  const int M = config.taylor_degree;
  config.f0 = rotator_f0(config.omega, K, M);
  if (config.preset == "pendulum") {
    config.f1 = cosine_shape(1, K, M, {1});
  } else {
    config.f1 = cosine_shape(2, K, M, {1, 1});
  }
}

FourierTaylorSeries load_series_spec(const Json& spec, const std::string& field,
                                     const std::filesystem::path& base_dir) {
  if (spec.is_string()) {
    const auto path = base_dir / spec.get<std::string>();
    std::ifstream in(path);
    if (!in.good()) fail(field, "cannot open series file '" + path.string() + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::parse_error& e) {
      fail(field, std::string("invalid JSON in series file: ") + e.what());
    }
    return series_from_json(j, field);
  }
  if (spec.is_object()) return series_from_json(spec, field);
  fail(field, "must be a series object or a path string");
}

TermIndex zero_action_index(int dim, int axis, int power) {
  std::vector<int> k(static_cast<std::size_t>(dim), 0);
  std::vector<int> m(static_cast<std::size_t>(dim), 0);
  m[static_cast<std::size_t>(axis)] = power;
  return make_index(k, m);
}

}  // namespace

Json series_to_json(const FourierTaylorSeries& f) {
  Json terms = Json::array();
  for (const Term& term : f.terms()) {
    Json k = Json::array();
    Json m = Json::array();
    for (int a = 0; a < f.dim(); ++a) {
      k.push_back(static_cast<int>(term.index.k[static_cast<std::size_t>(a)]));
      m.push_back(static_cast<int>(term.index.m[static_cast<std::size_t>(a)]));
    }
    terms.push_back({{"k", k},
                     {"m", m},
                     {"re", term.coeff.real()},
                     {"im", term.coeff.imag()}});
  }
  return Json{{"dim", f.dim()},
              {"fourier_cutoff", f.fourier_cutoff()},
              {"taylor_degree", f.taylor_degree()},
              {"terms", terms}};
}

FourierTaylorSeries series_from_json(const Json& j, const std::string& field) {
  require_object(j, field);
  check_keys(j, field, {"dim", "fourier_cutoff", "taylor_degree", "terms"});
  const Json* dim_j = find(j, "dim");
  const Json* cutoff_j = find(j, "fourier_cutoff");
  const Json* degree_j = find(j, "taylor_degree");
  const Json* terms_j = find(j, "terms");
  if (!dim_j) fail(field + ".dim", "required");
  if (!cutoff_j) fail(field + ".fourier_cutoff", "required");
  if (!degree_j) fail(field + ".taylor_degree", "required");
  if (!terms_j) fail(field + ".terms", "required");

  const int dim = get_int(*dim_j, field + ".dim");
  if (dim < 1 || dim > kMaxDim) {
    fail(field + ".dim", "must be between 1 and " + std::to_string(kMaxDim));
  }
  const int cutoff = get_int(*cutoff_j, field + ".fourier_cutoff");
  if (cutoff < 0 || cutoff > kMaxFourierCutoff) {
    fail(field + ".fourier_cutoff",
         "must be between 0 and " + std::to_string(kMaxFourierCutoff));
  }
  const int degree = get_int(*degree_j, field + ".taylor_degree");
  if (degree < 0 || degree > kMaxTaylorDegree) {
    fail(field + ".taylor_degree",
         "must be between 0 and " + std::to_string(kMaxTaylorDegree));
  }
  if (!terms_j->is_array()) fail(field + ".terms", "must be an array");

  std::vector<Term> terms;
  terms.reserve(terms_j->size());
  for (std::size_t i = 0; i < terms_j->size(); ++i) {
    const std::string where = field + ".terms[" + std::to_string(i) + "]";
    const Json& t = (*terms_j)[i];
    require_object(t, where);
    check_keys(t, where, {"k", "m", "re", "im"});
    const Json* k_j = find(t, "k");
    const Json* m_j = find(t, "m");
    const Json* re_j = find(t, "re");
    if (!k_j) fail(where + ".k", "required");
    if (!m_j) fail(where + ".m", "required");
    if (!re_j) fail(where + ".re", "required");
    const auto k = get_int_array(*k_j, where + ".k",
                                 static_cast<std::size_t>(dim));
    const auto m = get_int_array(*m_j, where + ".m",
                                 static_cast<std::size_t>(dim));
    int m_sum = 0;
    for (int a = 0; a < dim; ++a) {
      if (std::abs(k[static_cast<std::size_t>(a)]) > cutoff) {
        fail(where + ".k", "exceeds fourier_cutoff");
      }
      if (m[static_cast<std::size_t>(a)] < 0) {
        fail(where + ".m", "powers must be non-negative");
      }
      m_sum += m[static_cast<std::size_t>(a)];
    }
    if (m_sum > degree) fail(where + ".m", "total degree exceeds taylor_degree");
    const double re = get_number(*re_j, where + ".re");
    const Json* im_j = find(t, "im");
    const double im = im_j ? get_number(*im_j, where + ".im") : 0.0;
    terms.push_back({make_index(k, m), Complex(re, im)});
  }
  return FourierTaylorSeries(dim, cutoff, degree, std::move(terms));
}

std::vector<std::string> registry_names() { return {"pendulum", "golden2d"}; }

RunConfig registry_config(const std::string& name) {
  RunConfig config;
  config.preset = name;
  if (name == "pendulum") {
    config.omega = {1.0};
    config.tau = 0.5;
    config.epsilon0 = 1e-4;
    config.schedule.C = 1.0;
  } else if (name == "golden2d") {
    config.omega = {1.0, 0.5 * (1.0 + std::sqrt(5.0))};
    config.tau = 1.0;
    config.epsilon0 = 1e-5;
    config.schedule.C = 0.2;
  } else {
    fail("hamiltonian", "unknown registry entry '" + name +
                            "' (available: pendulum, golden2d)");
  }
  materialize_preset(config);
  return config;
}

RunConfig parse_config_json(const Json& j,
                            const std::filesystem::path& base_dir) {
  require_object(j, "config");
  check_keys(j, "",
             {"hamiltonian", "omega", "epsilon0", "tau", "kmax",
              "fourier_cutoff", "taylor_degree", "rho", "delta", "schedule",
              "verify", "out_dir"});
  const Json* ham = find(j, "hamiltonian");
  if (!ham) fail("hamiltonian", "required");

  RunConfig config;
  bool from_registry = false;
  FourierTaylorSeries raw_f0;
  FourierTaylorSeries raw_f1;
  if (ham->is_string()) {
    config = registry_config(ham->get<std::string>());
    from_registry = true;
  } else if (ham->is_object()) {
    check_keys(*ham, "hamiltonian", {"f0", "f1"});
    const Json* f0_j = find(*ham, "f0");
    const Json* f1_j = find(*ham, "f1");
    if (!f0_j) fail("hamiltonian.f0", "required");
    if (!f1_j) fail("hamiltonian.f1", "required");
    raw_f0 = load_series_spec(*f0_j, "hamiltonian.f0", base_dir);
    raw_f1 = load_series_spec(*f1_j, "hamiltonian.f1", base_dir);
    if (raw_f1.dim() != raw_f0.dim()) {
      fail("hamiltonian.f1", "dimension differs from f0");
    }
  } else {
    fail("hamiltonian",
         "must be a registry name or an object with f0 and f1");
  }

  if (const Json* omega = find(j, "omega")) {
    if (from_registry) fail("omega", "fixed by the registry entry; remove it");
    config.omega = get_number_array(*omega, "omega");
    if (config.omega.empty() ||
        config.omega.size() > static_cast<std::size_t>(kMaxDim)) {
      fail("omega", "length must be between 1 and " + std::to_string(kMaxDim));
    }
    for (double value : config.omega) {
      if (!std::isfinite(value)) fail("omega", "entries must be finite");
    }
  } else if (!from_registry) {
    fail("omega", "required for an explicit hamiltonian");
  }

  if (const Json* v = find(j, "epsilon0")) {
    config.epsilon0 = get_number(*v, "epsilon0");
    if (!(config.epsilon0 >= 0.0) || !std::isfinite(config.epsilon0)) {
      fail("epsilon0", "must be a finite non-negative number");
    }
  }
  if (const Json* v = find(j, "tau")) {
    config.tau = get_number(*v, "tau");
    if (!(config.tau > 0.0) || !std::isfinite(config.tau)) {
      fail("tau", "must be a finite positive number");
    }
  }
  if (const Json* v = find(j, "kmax")) {
    config.certify_kmax = get_int(*v, "kmax");
    if (config.certify_kmax < 1) fail("kmax", "must be at least 1");
  }
  if (const Json* v = find(j, "fourier_cutoff")) {
    config.fourier_cutoff = get_int(*v, "fourier_cutoff");
    if (config.fourier_cutoff < 1 ||
        config.fourier_cutoff > kMaxFourierCutoff) {
      fail("fourier_cutoff",
           "must be between 1 and " + std::to_string(kMaxFourierCutoff));
    }
  }
  if (const Json* v = find(j, "taylor_degree")) {
    config.taylor_degree = get_int(*v, "taylor_degree");
    if (config.taylor_degree < 2 || config.taylor_degree > kMaxTaylorDegree) {
      fail("taylor_degree",
           "must be between 2 and " + std::to_string(kMaxTaylorDegree));
    }
  }
  if (const Json* v = find(j, "rho")) {
    config.rho = get_number(*v, "rho");
    if (!(config.rho > 0.0) || !std::isfinite(config.rho)) {
      fail("rho", "must be a finite positive number");
    }
  }
  if (const Json* v = find(j, "delta")) {
    config.delta_strip = get_number(*v, "delta");
    if (!(config.delta_strip > 0.0) || !std::isfinite(config.delta_strip)) {
      fail("delta", "must be a finite positive number");
    }
  }
  if (const Json* v = find(j, "schedule")) {
    require_object(*v, "schedule");
    check_keys(*v, "schedule", {"C", "max_steps", "stop_tol", "eta0"});
    if (const Json* c = find(*v, "C")) {
      config.schedule.C = get_number(*c, "schedule.C");
      if (!(config.schedule.C > 0.0) || !std::isfinite(config.schedule.C)) {
        fail("schedule.C", "must be a finite positive number");
      }
    }
    if (const Json* c = find(*v, "max_steps")) {
      config.schedule.max_steps = get_int(*c, "schedule.max_steps");
      if (config.schedule.max_steps < 0) {
        fail("schedule.max_steps", "must be non-negative");
      }
    }
    if (const Json* c = find(*v, "stop_tol")) {
      config.schedule.stop_tol = get_number(*c, "schedule.stop_tol");
      if (!(config.schedule.stop_tol >= 0.0)) {
        fail("schedule.stop_tol", "must be non-negative");
      }
    }
    if (const Json* c = find(*v, "eta0")) {
      config.schedule.eta0 = get_number(*c, "schedule.eta0");
      if (!(config.schedule.eta0 >= 0.0)) {
        fail("schedule.eta0", "must be non-negative");
      }
    }
  }
  if (const Json* v = find(j, "verify")) {
    require_object(*v, "verify");
    check_keys(*v, "verify",
               {"flow_T", "flow_dt", "theta0", "grid_per_axis",
                "symplectic_samples", "seed"});
    if (const Json* c = find(*v, "flow_T")) {
      config.verify.flow_T = get_number(*c, "verify.flow_T");
      if (!(config.verify.flow_T > 0.0)) {
        fail("verify.flow_T", "must be positive");
      }
    }
    if (const Json* c = find(*v, "flow_dt")) {
      config.verify.flow_dt = get_number(*c, "verify.flow_dt");
      if (!(config.verify.flow_dt > 0.0)) {
        fail("verify.flow_dt", "must be positive");
      }
    }
    if (const Json* c = find(*v, "theta0")) {
      config.verify.theta0 = get_number_array(*c, "verify.theta0");
    }
    if (const Json* c = find(*v, "grid_per_axis")) {
      config.verify.grid_per_axis = get_int(*c, "verify.grid_per_axis");
      if (config.verify.grid_per_axis < 2) {
        fail("verify.grid_per_axis", "must be at least 2");
      }
    }
    if (const Json* c = find(*v, "symplectic_samples")) {
      config.verify.symplectic_samples =
          get_int(*c, "verify.symplectic_samples");
      if (config.verify.symplectic_samples < 1) {
        fail("verify.symplectic_samples", "must be at least 1");
      }
    }
    if (const Json* c = find(*v, "seed")) {
      config.verify.seed = get_seed(*c, "verify.seed");
    }
  }
  if (const Json* v = find(j, "out_dir")) {
    if (!v->is_string() || v->get<std::string>().empty()) {
      fail("out_dir", "must be a non-empty string");
    }
    config.out_dir = v->get<std::string>();
  }

  if (config.certify_kmax < config.fourier_cutoff) {
    fail("kmax",
         "must be at least fourier_cutoff so the certificate covers every "
         "retained mode");
  }

  if (from_registry) {
    // The preset series depend on the (possibly overridden) cutoffs.
    materialize_preset(config);
  } else {
    if (config.fourier_cutoff < std::max(raw_f0.fourier_cutoff(),
                                         raw_f1.fourier_cutoff())) {
      fail("fourier_cutoff", "smaller than the cutoff of the supplied series");
    }
    if (config.taylor_degree <
        std::max(raw_f0.taylor_degree(), raw_f1.taylor_degree())) {
      fail("taylor_degree", "smaller than the degree of the supplied series");
    }
    if (static_cast<int>(config.omega.size()) != raw_f0.dim()) {
      fail("omega", "length must match the series dimension");
    }
    auto widen = [&](const FourierTaylorSeries& f) {
      std::vector<Term> terms(f.terms().begin(), f.terms().end());
      return FourierTaylorSeries(f.dim(), config.fourier_cutoff,
                                 config.taylor_degree, std::move(terms));
    };
    config.f0 = widen(raw_f0);
    config.f1 = widen(raw_f1);
  }

  const auto dim = config.omega.size();
  if (config.verify.theta0.empty()) {
    config.verify.theta0.assign(dim, 0.3);
  } else if (config.verify.theta0.size() != dim) {
    fail("verify.theta0", "length must match the Hamiltonian dimension");
  }
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) fail("config", "cannot open file '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config_json(j, path.parent_path());
}

Json config_to_json(const RunConfig& config) {
  Json j;
  if (!config.preset.empty()) {
    j["hamiltonian"] = config.preset;
  } else {
    j["hamiltonian"] = Json{{"f0", series_to_json(config.f0)},
                            {"f1", series_to_json(config.f1)}};
    j["omega"] = config.omega;
  }
  j["epsilon0"] = config.epsilon0;
  j["tau"] = config.tau;
  j["kmax"] = config.certify_kmax;
  j["fourier_cutoff"] = config.fourier_cutoff;
  j["taylor_degree"] = config.taylor_degree;
  j["rho"] = config.rho;
  j["delta"] = config.delta_strip;
  j["schedule"] = Json{{"C", config.schedule.C},
                       {"max_steps", config.schedule.max_steps},
                       {"stop_tol", config.schedule.stop_tol},
                       {"eta0", config.schedule.eta0}};
  j["verify"] = Json{{"flow_T", config.verify.flow_T},
                     {"flow_dt", config.verify.flow_dt},
                     {"theta0", config.verify.theta0},
                     {"grid_per_axis", config.verify.grid_per_axis},
                     {"symplectic_samples", config.verify.symplectic_samples},
                     {"seed", config.verify.seed}};
  j["out_dir"] = config.out_dir.string();
  return j;
}

KolmogorovForm build_initial_form(const RunConfig& config) {
  RunConfig resolved;
  const RunConfig* cfg = &config;
  if (!config.preset.empty() && config.f0.dim() == 0) {
    resolved = config;
    materialize_preset(resolved);
    cfg = &resolved;
  }
  const int d = static_cast<int>(cfg->omega.size());
  if (cfg->f0.dim() != d || cfg->f1.dim() != d) {
    fail("omega", "length must match the Hamiltonian dimension");
  }
  const int K = cfg->fourier_cutoff;
  const int M = cfg->taylor_degree;

  for (const Term& term : cfg->f0.terms()) {
    if (term.index.k_sup() != 0) {
      fail("hamiltonian.f0", "must not depend on the angle");
    }
    if (std::abs(term.coeff.imag()) >
        1e-13 * (1.0 + std::abs(term.coeff.real()))) {
      fail("hamiltonian.f0", "coefficients must be real");
    }
  }

  const double offset =
      cfg->f0.coeff(zero_action_index(d, 0, 0)).real();
  std::vector<double> gradient(static_cast<std::size_t>(d), 0.0);
  double omega_scale = 0.0;
  for (int i = 0; i < d; ++i) {
    gradient[static_cast<std::size_t>(i)] =
        cfg->f0.coeff(zero_action_index(d, i, 1)).real();
    omega_scale = std::max(omega_scale,
                           std::abs(cfg->omega[static_cast<std::size_t>(i)]));
  }
  for (int i = 0; i < d; ++i) {
    if (std::abs(gradient[static_cast<std::size_t>(i)] -
                 cfg->omega[static_cast<std::size_t>(i)]) >
        1e-9 * (1.0 + omega_scale)) {
      std::ostringstream msg;
      msg << "must equal the r-gradient of f0 at r = 0 (component " << i
          << " of the gradient is " << gradient[static_cast<std::size_t>(i)]
          << ")";
      fail("omega", msg.str());
    }
  }

  std::vector<FourierTaylorSeries> S;
  S.reserve(static_cast<std::size_t>(d) * static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    for (int jj = 0; jj < d; ++jj) {
      double value = 0.0;
      if (i == jj) {
        value = 2.0 * cfg->f0.coeff(zero_action_index(d, i, 2)).real();
      } else {
        std::vector<int> k(static_cast<std::size_t>(d), 0);
        std::vector<int> m(static_cast<std::size_t>(d), 0);
        m[static_cast<std::size_t>(i)] = 1;
        m[static_cast<std::size_t>(jj)] = 1;
        value = cfg->f0.coeff(make_index(k, m)).real();
      }
      S.push_back(value == 0.0
                      ? FourierTaylorSeries::zero(d, K, M)
                      : FourierTaylorSeries::constant(d, K, M, Complex(value)));
    }
  }

  std::vector<Term> cubic_terms;
  for (const Term& term : cfg->f0.terms()) {
    if (term.index.degree() >= 3) cubic_terms.push_back(term);
  }
  FourierTaylorSeries g(d, K, M, std::move(cubic_terms));

  const AnalyticityDomain domain{cfg->rho, cfg->delta_strip};
  const double shape_norm = strip_norm_majorant(cfg->f1, domain);
  FourierTaylorSeries h = FourierTaylorSeries::zero(d, K, M);
  double epsilon = 0.0;
  if (shape_norm > 0.0 && cfg->epsilon0 > 0.0) {
    h = scale(cfg->f1, Complex(1.0 / shape_norm));
    epsilon = cfg->epsilon0 * shape_norm;
  }

  auto omega = FrequencyVector::certify(cfg->omega, cfg->tau,
                                        cfg->certify_kmax);
  return KolmogorovForm(offset, std::move(omega), std::move(S), epsilon,
                        std::move(h), std::move(g), domain);
}

Json form_to_json(const KolmogorovForm& form) {
  const auto& cert = form.omega().certificate();
  if (!cert.has_value()) {
    throw ValidationError(
        "form serialization requires a certified frequency vector");
  }
  const int d = form.dim();
  Json S = Json::array();
  for (int i = 0; i < d; ++i) {
    for (int jj = 0; jj < d; ++jj) {
      S.push_back(series_to_json(form.S(i, jj)));
    }
  }
  std::vector<double> omega(form.omega().components().begin(),
                            form.omega().components().end());
  return Json{{"energy_offset", form.energy_offset()},
              {"omega", omega},
              {"tau", cert->tau},
              {"kmax", cert->scan_depth},
              {"epsilon", form.epsilon()},
              {"rho", form.domain().rho},
              {"delta", form.domain().delta_strip},
              {"S", S},
              {"h", series_to_json(form.h())},
              {"g", series_to_json(form.g())}};
}

KolmogorovForm form_from_json(const Json& j) {
  require_object(j, "form");
  check_keys(j, "form",
             {"energy_offset", "omega", "tau", "kmax", "epsilon", "rho",
              "delta", "S", "h", "g"});
  for (const char* key :
       {"energy_offset", "omega", "tau", "kmax", "epsilon", "rho", "delta",
        "S", "h", "g"}) {
    if (!find(j, key)) fail(std::string("form.") + key, "required");
  }
  const auto omega_values = get_number_array(j["omega"], "form.omega");
  const double tau = get_number(j["tau"], "form.tau");
  const int kmax = get_int(j["kmax"], "form.kmax");
  const int d = static_cast<int>(omega_values.size());
  const Json& S_j = j["S"];
  if (!S_j.is_array() ||
      S_j.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(d)) {
    fail("form.S", "must be an array of dim*dim series");
  }
  std::vector<FourierTaylorSeries> S;
  S.reserve(S_j.size());
  for (std::size_t i = 0; i < S_j.size(); ++i) {
    S.push_back(series_from_json(S_j[i], "form.S[" + std::to_string(i) + "]"));
  }
  auto omega = FrequencyVector::certify(omega_values, tau, kmax);
  return KolmogorovForm(
      get_number(j["energy_offset"], "form.energy_offset"), std::move(omega),
      std::move(S), get_number(j["epsilon"], "form.epsilon"),
      series_from_json(j["h"], "form.h"), series_from_json(j["g"], "form.g"),
      AnalyticityDomain{get_number(j["rho"], "form.rho"),
                        get_number(j["delta"], "form.delta")});
}

Json map_to_json(const ComposedMap& map) {
  const int d = map.dim();
  if (d == 0) {
    throw ValidationError("cannot serialize a dimension-zero placeholder map");
  }
  Json W = Json::array();
  Json A = Json::array();
  Json B = Json::array();
  for (int i = 0; i < d; ++i) {
    W.push_back(series_to_json(map.angle_shift(i)));
    A.push_back(series_to_json(map.action_offset(i)));
    for (int jj = 0; jj < d; ++jj) {
      B.push_back(series_to_json(map.action_matrix(i, jj)));
    }
  }
  return Json{{"dim", d},
              {"fourier_cutoff", map.fourier_cutoff()},
              {"taylor_degree", map.taylor_degree()},
              {"rho", map.domain().rho},
              {"delta", map.domain().delta_strip},
              {"angle_shift", W},
              {"action_offset", A},
              {"action_matrix", B},
              {"deviations", map.deviations()}};
}

ComposedMap map_from_json(const Json& j) {
  require_object(j, "map");
  check_keys(j, "map",
             {"dim", "fourier_cutoff", "taylor_degree", "rho", "delta",
              "angle_shift", "action_offset", "action_matrix", "deviations"});
  for (const char* key :
       {"dim", "fourier_cutoff", "taylor_degree", "rho", "delta",
        "angle_shift", "action_offset", "action_matrix", "deviations"}) {
    if (!find(j, key)) fail(std::string("map.") + key, "required");
  }
  const int d = get_int(j["dim"], "map.dim");
  auto load_block = [&](const char* key, std::size_t expected) {
    const Json& block = j[key];
    if (!block.is_array() || block.size() != expected) {
      fail(std::string("map.") + key,
           "must be an array of " + std::to_string(expected) + " series");
    }
    std::vector<FourierTaylorSeries> out;
    out.reserve(expected);
    for (std::size_t i = 0; i < expected; ++i) {
      out.push_back(series_from_json(
          block[i], std::string("map.") + key + "[" + std::to_string(i) + "]"));
    }
    return out;
  };
  if (d < 1 || d > kMaxDim) fail("map.dim", "out of range");
  const auto dd = static_cast<std::size_t>(d);
  auto W = load_block("angle_shift", dd);
  auto A = load_block("action_offset", dd);
  auto B = load_block("action_matrix", dd * dd);
  auto deviations = get_number_array(j["deviations"], "map.deviations");
  return ComposedMap::from_parts(
      d, get_int(j["fourier_cutoff"], "map.fourier_cutoff"),
      get_int(j["taylor_degree"], "map.taylor_degree"),
      AnalyticityDomain{get_number(j["rho"], "map.rho"),
                        get_number(j["delta"], "map.delta")},
      std::move(W), std::move(A), std::move(B), std::move(deviations));
}

}  // namespace kam
