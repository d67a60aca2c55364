// Data ingestion and synthetic task generators.
#pragma once

#include <string>

#include "sitegp/likelihoods.hpp"
#include "sitegp/kernels.hpp"
#include "sitegp/rng.hpp"

namespace sitegp {

struct Dataset {
  VectorXd x;            // sorted temporal inputs
  MatrixXd r;            // N x p spatial inputs (0 columns when absent)
  VectorXd y;
  std::vector<int> sort_permutation;  // original row of each sorted entry

  int size() const { return static_cast<int>(x.size()); }
  bool has_spatial() const { return r.cols() > 0; }
  Dataset rows(const std::vector<int>& idx) const;
};

// CSV with header x[,r1..rp],y. Rows are validated, sorted by x, and the
// original order retained in sort_permutation. Malformed rows report their
// 1-based line number; y values are checked against the likelihood domain.
Dataset load_csv(const std::string& path, const Likelihood& lik);
void save_csv(const std::string& path, const Dataset& data);

// Deterministic synthetic tasks. Valid names: binary-sign, poisson-cox,
// heteroscedastic, banana-like-2d, conjugate-matern.
Dataset generate(const std::string& task, int n, std::uint64_t seed);

// Likelihood each generator task targets.
Likelihood task_likelihood(const std::string& task);
// Reasonable starting kernel for a task.
KernelSpec task_kernel(const std::string& task);

// Exact draw of SDE states along sorted inputs (used by the generators and
// by simulation-based tests).
MatrixXd sample_state_trajectory(const LtiSde& sde, const VectorXd& x_sorted,
                                 Rng& rng);

}  // namespace sitegp
