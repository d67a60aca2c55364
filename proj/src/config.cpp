#include "sitegp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sitegp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

class Reader {
 public:
  Reader(const ParsedConfig& cfg, const std::string& origin)
      : cfg_(cfg), origin_(origin) {}

  bool has(const std::string& sec, const std::string& key) {
    auto it = cfg_.sections.find(sec);
    if (it == cfg_.sections.end()) return false;
    return it->second.count(key) > 0;
  }

  std::string get(const std::string& sec, const std::string& key,
                  const std::string& fallback) {
    consumed_.insert(sec + "\n" + key);
    auto it = cfg_.sections.find(sec);
    if (it == cfg_.sections.end()) return fallback;
    auto jt = it->second.find(key);
    if (jt == it->second.end()) return fallback;
    return unquote(jt->second);
  }

  double get_num(const std::string& sec, const std::string& key,
                 double fallback) {
    const std::string v = get(sec, key, "");
    if (v.empty()) return fallback;
    try {
      std::size_t used = 0;
      double out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key " + sec + "." + key +
                        " is not a number: '" + v + "'");
    }
  }

  // Every key in the file must have been consumed by a get().
  void check_unknown() const {
    for (const auto& [sec, kv] : cfg_.sections) {
      for (const auto& [key, value] : kv) {
        (void)value;
        if (!consumed_.count(sec + "\n" + key)) {
          throw ConfigError(origin_ + ": unknown key '" +
                            (sec.empty() ? key : sec + "." + key) + "'");
        }
      }
    }
  }

 private:
  const ParsedConfig& cfg_;
  std::string origin_;
  std::set<std::string> consumed_;
};

KernelSpec kernel_from(Reader& r, const std::string& sec) {
  const std::string type = r.get(sec, "type", "matern32");
  const double variance = r.get_num(sec, "variance", 1.0);
  const double lengthscale = r.get_num(sec, "lengthscale", 1.0);
  const double frequency = r.get_num(sec, "frequency", 1.0);
  if (type == "matern12") return KernelSpec::matern12(variance, lengthscale);
  if (type == "matern32") return KernelSpec::matern32(variance, lengthscale);
  if (type == "matern52") return KernelSpec::matern52(variance, lengthscale);
  if (type == "matern72") return KernelSpec::matern72(variance, lengthscale);
  if (type == "cosine") return KernelSpec::cosine(variance, frequency);
  if (type == "quasiperiodic") {
    return KernelSpec::quasi_periodic(variance, lengthscale, frequency);
  }
  throw ConfigError("unknown kernel type '" + type + "' in [" + sec + "]");
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text,
                               const std::string& origin) {
  ParsedConfig out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      out.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (out.sections[section].count(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    }
    out.sections[section][key] = value;
  }
  return out;
}

KernelSpec ExperimentConfig::model_kernel() const {
  if (likelihood.kind == Likelihood::Kind::HeteroscedasticGaussian) {
    KernelSpec second = kernel2 ? *kernel2 : kernel;
    return KernelSpec::stack({kernel, second});
  }
  return kernel;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  ParsedConfig parsed = parse_config_text(buf.str(), path);
  Reader r(parsed, path);

  const int version = static_cast<int>(r.get_num("", "schema_version", -1));
  if (version != 1) {
    throw ConfigError(path + ": schema_version must be 1");
  }

  ExperimentConfig cfg;
  cfg.kernel = kernel_from(r, "kernel");
  if (parsed.sections.count("kernel2")) {
    cfg.kernel2 = kernel_from(r, "kernel2");
  }

  const std::string lik = r.get("likelihood", "type", "gaussian");
  if (lik == "gaussian") {
    cfg.likelihood =
        Likelihood::gaussian(r.get_num("likelihood", "noise_variance", 0.1));
  } else if (lik == "bernoulli") {
    cfg.likelihood = Likelihood::bernoulli_logit();
  } else if (lik == "poisson") {
    cfg.likelihood =
        Likelihood::poisson_log(r.get_num("likelihood", "bin_width", 1.0));
  } else if (lik == "heteroscedastic") {
    cfg.likelihood = Likelihood::heteroscedastic_gaussian();
  } else {
    throw ConfigError(path + ": unknown likelihood '" + lik + "'");
  }

  cfg.num_inducing = static_cast<int>(r.get_num("model", "m", 20));
  cfg.num_inducing_spatial = static_cast<int>(r.get_num("model", "mz", 0));
  if (r.has("model", "mx")) {
    cfg.num_inducing = static_cast<int>(r.get_num("model", "mx", 20));
  }

  cfg.algorithm = parse_algorithm(r.get("inference", "algorithm", "cvi"));
  cfg.params.rho = r.get_num("inference", "rho", 1.0);
  cfg.params.alpha = r.get_num("inference", "alpha", 1.0);
  cfg.params.parallel = r.get("inference", "parallel", "true") != "false";
  // Sequential PEP on non-conjugate likelihoods defaults to damping 0.5.
  const bool nonconjugate = lik != "gaussian";
  const double default_damping =
      (cfg.algorithm == Algorithm::Pep && !cfg.params.parallel && nonconjugate)
          ? 0.5
          : 1.0;
  cfg.params.damping = r.get_num("inference", "damping", default_damping);
  cfg.params.validate();

  cfg.train.iterations = static_cast<int>(r.get_num("train", "iterations", 500));
  cfg.train.learning_rate = r.get_num("train", "learning_rate", 0.01);
  cfg.train.fd_epsilon = r.get_num("train", "fd_epsilon", 1e-4);
  cfg.train.objective = parse_objective(r.get("train", "objective", "elbo"));
  cfg.train.cubature_order =
      static_cast<int>(r.get_num("train", "cubature_order", 20));
  cfg.train.algorithm = cfg.algorithm;
  cfg.train.params = cfg.params;

  cfg.source = r.get("data", "source", "generator");
  cfg.task = r.get("data", "task", "conjugate-matern");
  cfg.path = r.get("data", "path", "");
  cfg.spatial_locations_path = r.get("data", "spatial_locations", "");
  cfg.n = static_cast<int>(r.get_num("data", "n", 200));
  if (cfg.source == "generator" && !r.has("data", "seed")) {
    throw ConfigError(path + ": data.seed is mandatory for generators");
  }
  cfg.seed = static_cast<std::uint64_t>(r.get_num("data", "seed", 1));
  cfg.train.seed = cfg.seed;
  if (cfg.source == "csv") {
    if (cfg.path.empty()) throw ConfigError(path + ": data.path required");
    std::ifstream probe(cfg.path);
    if (!probe) {
      throw ConfigError(path + ": referenced data file '" + cfg.path +
                        "' does not exist");
    }
  } else if (cfg.source != "generator") {
    throw ConfigError(path + ": data.source must be generator or csv");
  }
  if (!cfg.spatial_locations_path.empty()) {
    std::ifstream probe(cfg.spatial_locations_path);
    if (!probe) {
      throw ConfigError(path + ": spatial locations file '" +
                        cfg.spatial_locations_path + "' does not exist");
    }
  }

  cfg.cv_folds = static_cast<int>(r.get_num("cv", "folds", 10));
  if (cfg.cv_folds < 2) throw ConfigError(path + ": cv.folds must be >= 2");
  cfg.output_dir = r.get("output", "dir", "out");

  r.check_unknown();
  return cfg;
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config '" + path + "'");
  out << "schema_version = 1\n\n";
  auto kernel_block = [&](const char* sec, const KernelSpec& k) {
    out << "[" << sec << "]\n";
    out << "type = \"" << k.name() << "\"\n";
    out << "variance = " << k.variance << "\n";
    if (k.kind != KernelSpec::Kind::Cosine) {
      out << "lengthscale = " << k.lengthscale << "\n";
    }
    if (k.kind == KernelSpec::Kind::Cosine ||
        k.kind == KernelSpec::Kind::QuasiPeriodic) {
      out << "frequency = " << k.frequency << "\n";
    }
    out << "\n";
  };
  kernel_block("kernel", cfg.kernel);
  if (cfg.kernel2) kernel_block("kernel2", *cfg.kernel2);
  out << "[likelihood]\n";
  out << "type = \"" << cfg.likelihood.name() << "\"\n";
  if (cfg.likelihood.kind == Likelihood::Kind::Gaussian) {
    out << "noise_variance = " << cfg.likelihood.noise_variance << "\n";
  }
  if (cfg.likelihood.kind == Likelihood::Kind::PoissonLog) {
    out << "bin_width = " << cfg.likelihood.bin_width << "\n";
  }
  out << "\n[model]\nm = " << cfg.num_inducing << "\n";
  if (cfg.num_inducing_spatial > 0) {
    out << "mz = " << cfg.num_inducing_spatial << "\n";
  }
  out << "\n[inference]\nalgorithm = \"" << algorithm_name(cfg.algorithm)
      << "\"\nrho = " << cfg.params.rho << "\nalpha = " << cfg.params.alpha
      << "\ndamping = " << cfg.params.damping << "\nparallel = "
      << (cfg.params.parallel ? "true" : "false") << "\n";
  out << "\n[train]\niterations = " << cfg.train.iterations
      << "\nlearning_rate = " << cfg.train.learning_rate
      << "\nfd_epsilon = " << cfg.train.fd_epsilon << "\nobjective = \""
      << objective_name(cfg.train.objective) << "\"\ncubature_order = "
      << cfg.train.cubature_order << "\n";
  out << "\n[data]\nsource = \"" << cfg.source << "\"\n";
  out << "task = \"" << cfg.task << "\"\n";
  if (!cfg.path.empty()) out << "path = \"" << cfg.path << "\"\n";
  if (!cfg.spatial_locations_path.empty()) {
    out << "spatial_locations = \"" << cfg.spatial_locations_path << "\"\n";
  }
  out << "n = " << cfg.n << "\nseed = " << cfg.seed << "\n";
  out << "\n[cv]\nfolds = " << cfg.cv_folds << "\n";
  out << "\n[output]\ndir = \"" << cfg.output_dir << "\"\n";
}

}  // namespace sitegp
