// Experiment configuration: a small sectioned key/value text format with a
// versioned schema. Unknown keys are errors by design.
#pragma once

#include <map>
#include <optional>
#include <string>

#include "sitegp/dataset.hpp"
#include "sitegp/inference.hpp"

namespace sitegp {

struct ExperimentConfig {
  KernelSpec kernel = KernelSpec::matern32(1.0, 1.0);
  std::optional<KernelSpec> kernel2;  // second latent for heteroscedastic
  Likelihood likelihood = Likelihood::gaussian(0.1);
  int num_inducing = 20;   // temporal M
  int num_inducing_spatial = 0;  // M_z (> 0 activates the 2-D model)
  Algorithm algorithm = Algorithm::Cvi;
  InferenceParams params;
  TrainConfig train;
  // data
  std::string source = "generator";  // generator | csv
  std::string task = "conjugate-matern";
  std::string path;
  std::string spatial_locations_path;  // optional CSV of z_r rows
  int n = 200;
  std::uint64_t seed = 1;
  int cv_folds = 10;
  std::string output_dir = "out";

  // Kernel actually used by the model (stacks in kernel2 for the
  // heteroscedastic likelihood).
  KernelSpec model_kernel() const;
};

ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& cfg);

// Raw parsed file: section -> key -> value, with every key consumption
// tracked so leftovers can be reported.
struct ParsedConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;
};
ParsedConfig parse_config_text(const std::string& text,
                               const std::string& origin);

}  // namespace sitegp
