#include "sitegp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace sitegp {

Dataset Dataset::rows(const std::vector<int>& idx) const {
  Dataset out;
  out.x.resize(idx.size());
  out.y.resize(idx.size());
  out.r.resize(static_cast<long>(idx.size()), r.cols());
  out.sort_permutation.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.x(i) = x(idx[i]);
    out.y(i) = y(idx[i]);
    if (r.cols() > 0) out.r.row(i) = r.row(idx[i]);
    out.sort_permutation[i] = sort_permutation[idx[i]];
  }
  return out;
}

namespace {

Dataset sort_by_x(VectorXd x, MatrixXd r, VectorXd y) {
  const int n = static_cast<int>(x.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return x(a) < x(b); });
  Dataset out;
  out.x.resize(n);
  out.y.resize(n);
  out.r.resize(n, r.cols());
  out.sort_permutation.resize(n);
  for (int i = 0; i < n; ++i) {
    out.x(i) = x(order[i]);
    out.y(i) = y(order[i]);
    if (r.cols() > 0) out.r.row(i) = r.row(order[i]);
    out.sort_permutation[i] = order[i];
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

Dataset load_csv(const std::string& path, const Likelihood& lik) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty data file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header.size() < 2 || header.front() != "x" || header.back() != "y") {
    throw ConfigError("expected header x[,r1..rp],y in " + path);
  }
  const int p = static_cast<int>(header.size()) - 2;
  std::vector<double> xs, ys;
  std::vector<double> rs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> vals;
    for (const auto& f : fields) {
      try {
        std::size_t used = 0;
        double v = std::stod(f, &used);
        if (used != f.size()) throw std::invalid_argument(f);
        vals.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": malformed number '" + f + "'");
      }
    }
    for (double v : vals) {
      if (!std::isfinite(v)) {
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": non-finite value");
      }
    }
    try {
      lik.check_observation(vals.back());
    } catch (const LikelihoodDomainError& e) {
      throw LikelihoodDomainError(path + ":" + std::to_string(lineno) + ": " +
                                  e.what());
    }
    xs.push_back(vals.front());
    for (int j = 0; j < p; ++j) rs.push_back(vals[1 + j]);
    ys.push_back(vals.back());
  }
  const int n = static_cast<int>(xs.size());
  if (n == 0) throw ConfigError("no data rows in " + path);
  VectorXd x = Eigen::Map<VectorXd>(xs.data(), n);
  VectorXd y = Eigen::Map<VectorXd>(ys.data(), n);
  MatrixXd r(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) r(i, j) = rs[static_cast<std::size_t>(i) * p + j];
  }
  return sort_by_x(std::move(x), std::move(r), std::move(y));
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "x";
  for (int j = 0; j < data.r.cols(); ++j) out << ",r" << (j + 1);
  out << ",y\n";
  char buf[64];
  for (int i = 0; i < data.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", data.x(i));
    out << buf;
    for (int j = 0; j < data.r.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.r(i, j));
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", data.y(i));
    out << ',' << buf << '\n';
  }
}

MatrixXd sample_state_trajectory(const LtiSde& sde, const VectorXd& x_sorted,
                                 Rng& rng) {
  const int n = static_cast<int>(x_sorted.size());
  const int d = sde.d;
  MatrixXd states(n, d);
  auto draw = [&](const MatrixXd& cov) {
    VectorXd eps(d);
    for (int k = 0; k < d; ++k) eps(k) = rng.normal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(cov));
    VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return MatrixXd(es.eigenvectors() * ev.asDiagonal()) * eps;
  };
  VectorXd s = draw(sde.P0);
  states.row(0) = s.transpose();
  for (int i = 1; i < n; ++i) {
    const double dz = x_sorted(i) - x_sorted(i - 1);
    MatrixXd a = expm(sde.F * dz);
    MatrixXd q = symmetrize(sde.P0 - a * sde.P0 * a.transpose());
    s = a * s + draw(q);
    states.row(i) = s.transpose();
  }
  return states;
}

namespace {

VectorXd sorted_uniform(int n, double lo, double hi, Rng& rng) {
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.uniform(lo, hi);
  std::sort(x.data(), x.data() + n);
  return x;
}

Dataset make_binary_sign(int n, Rng rng) {
  // y(x) = sign{ 12 sin(4 pi x) / (0.25 pi x + 1) + noise }, mapped to {0,1}.
  VectorXd x = sorted_uniform(n, 0.0, 10.0, rng);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double g = 12.0 * std::sin(4.0 * M_PI * x(i)) /
                     (0.25 * M_PI * x(i) + 1.0);
    const double v = g + 0.01 * rng.normal();
    y(i) = v >= 0.0 ? 1.0 : 0.0;
  }
  Dataset out;
  out.x = std::move(x);
  out.y = std::move(y);
  out.r.resize(n, 0);
  out.sort_permutation.resize(n);
  std::iota(out.sort_permutation.begin(), out.sort_permutation.end(), 0);
  return out;
}

Dataset make_poisson_cox(int n, Rng rng) {
  // Counts in equal bins with log intensity drawn from a Matern-5/2 GP.
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = (i + 0.5) / n * 10.0;
  LtiSde sde = to_state_space(KernelSpec::matern52(1.0, 1.5));
  MatrixXd states = sample_state_trajectory(sde, x, rng);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double f = (sde.H * states.row(i).transpose())(0);
    y(i) = static_cast<double>(rng.poisson(std::exp(f)));
  }
  Dataset out;
  out.x = std::move(x);
  out.y = std::move(y);
  out.r.resize(n, 0);
  out.sort_permutation.resize(n);
  std::iota(out.sort_permutation.begin(), out.sort_permutation.end(), 0);
  return out;
}

Dataset make_heteroscedastic(int n, Rng rng) {
  VectorXd x = sorted_uniform(n, 0.0, 8.0, rng);
  LtiSde mean_sde = to_state_space(KernelSpec::matern32(1.0, 1.0));
  LtiSde scale_sde = to_state_space(KernelSpec::matern32(1.0, 2.0));
  Rng rng2 = rng.stream(stream_id("scale"));
  MatrixXd s1 = sample_state_trajectory(mean_sde, x, rng);
  MatrixXd s2 = sample_state_trajectory(scale_sde, x, rng2);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double f1 = (mean_sde.H * s1.row(i).transpose())(0);
    const double f2 = (scale_sde.H * s2.row(i).transpose())(0);
    const double scale = std::log1p(std::exp(f2));
    y(i) = f1 + scale * rng.normal();
  }
  Dataset out;
  out.x = std::move(x);
  out.y = std::move(y);
  out.r.resize(n, 0);
  out.sort_permutation.resize(n);
  std::iota(out.sort_permutation.begin(), out.sort_permutation.end(), 0);
  return out;
}

Dataset make_banana_like(int n, Rng rng) {
  // 2-D classification with a curved boundary; x plays time, r space.
  VectorXd x(n), r(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = rng.uniform(-2.5, 2.5);
    r(i) = rng.uniform(-2.5, 2.5);
  }
  std::sort(x.data(), x.data() + n);
  for (int i = 0; i < n; ++i) {
    const double f =
        2.0 * (r(i) - 0.7 * x(i) * x(i) + 1.0) * (0.8 - 0.5 * r(i));
    const double prob = 1.0 / (1.0 + std::exp(-3.0 * f));
    y(i) = rng.uniform() < prob ? 1.0 : 0.0;
  }
  Dataset out;
  out.x = std::move(x);
  out.y = std::move(y);
  out.r.resize(n, 1);
  out.r.col(0) = r;
  out.sort_permutation.resize(n);
  std::iota(out.sort_permutation.begin(), out.sort_permutation.end(), 0);
  return out;
}

Dataset make_conjugate_matern(int n, Rng rng) {
  // Matern-3/2 draw with known hyperparameters (ell = 1.5, sigma^2 = 2)
  // plus Gaussian noise 0.1; the recovery tests rely on these constants.
  VectorXd x = sorted_uniform(n, 0.0, 30.0, rng);
  LtiSde sde = to_state_space(KernelSpec::matern32(2.0, 1.5));
  MatrixXd states = sample_state_trajectory(sde, x, rng);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double f = (sde.H * states.row(i).transpose())(0);
    y(i) = f + std::sqrt(0.1) * rng.normal();
  }
  Dataset out;
  out.x = std::move(x);
  out.y = std::move(y);
  out.r.resize(n, 0);
  out.sort_permutation.resize(n);
  std::iota(out.sort_permutation.begin(), out.sort_permutation.end(), 0);
  return out;
}

}  // namespace

Dataset generate(const std::string& task, int n, std::uint64_t seed) {
  if (n <= 0) throw ParameterError("generator size must be positive");
  Rng rng(seed, stream_id(task));
  if (task == "binary-sign") return make_binary_sign(n, rng);
  if (task == "poisson-cox") return make_poisson_cox(n, rng);
  if (task == "heteroscedastic") return make_heteroscedastic(n, rng);
  if (task == "banana-like-2d") return make_banana_like(n, rng);
  if (task == "conjugate-matern") return make_conjugate_matern(n, rng);
  throw ConfigError("unknown task '" + task + "'");
}

Likelihood task_likelihood(const std::string& task) {
  if (task == "binary-sign" || task == "banana-like-2d") {
    return Likelihood::bernoulli_logit();
  }
  if (task == "poisson-cox") return Likelihood::poisson_log();
  if (task == "heteroscedastic") return Likelihood::heteroscedastic_gaussian();
  if (task == "conjugate-matern") return Likelihood::gaussian(0.1);
  throw ConfigError("unknown task '" + task + "'");
}

KernelSpec task_kernel(const std::string& task) {
  if (task == "binary-sign") return KernelSpec::matern72(1.0, 0.5);
  if (task == "poisson-cox") return KernelSpec::matern52(1.0, 1.5);
  if (task == "heteroscedastic") {
    return KernelSpec::stack(
        {KernelSpec::matern32(1.0, 1.0), KernelSpec::matern32(1.0, 2.0)});
  }
  if (task == "banana-like-2d") return KernelSpec::matern52(1.0, 1.0);
  if (task == "conjugate-matern") return KernelSpec::matern32(2.0, 1.5);
  throw ConfigError("unknown task '" + task + "'");
}

}  // namespace sitegp
