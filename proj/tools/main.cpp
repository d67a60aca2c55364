// Command-line front end: fit, predict, evaluate, compare, sweep-m.
#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

#include "sitegp/experiment.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string algorithm;
  double alpha = -1.0;
  double rho = -1.0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "experiment config file")
      ->required();
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "override data/experiment seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--algorithm", o.algorithm, "cvi|pep|pl|eks");
  cmd->add_option("--alpha", o.alpha, "PEP power in (0,1]");
  cmd->add_option("--rho", o.rho, "CVI step size in (0,1]");
}

sitegp::ExperimentConfig load_with_overrides(const CommonOpts& o) {
  sitegp::ExperimentConfig cfg = sitegp::load_config(o.config_path);
  if (o.seed_set) {
    cfg.seed = o.seed;
    cfg.train.seed = o.seed;
  }
  if (!o.algorithm.empty()) {
    cfg.algorithm = sitegp::parse_algorithm(o.algorithm);
    cfg.train.algorithm = cfg.algorithm;
  }
  if (o.alpha > 0.0) {
    cfg.params.alpha = o.alpha;
    cfg.train.params.alpha = o.alpha;
  }
  if (o.rho > 0.0) {
    cfg.params.rho = o.rho;
    cfg.train.params.rho = o.rho;
  }
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  cfg.params.validate();
  return cfg;
}

void emit_error(const std::exception& e) {
  nlohmann::ordered_json j;
  j["error"] = e.what();
  std::cerr << j.dump(2) << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Site-based approximate inference for sparse Markovian GPs"};
  app.require_subcommand(1);

  CommonOpts fit_o, run_o, predict_o, eval_o, compare_o, sweep_o;
  std::string query_csv, predictions_csv, m_list = "4,8,16,32";

  auto* cmd_fit = app.add_subcommand("fit", "train on the full data set");
  add_common(cmd_fit, fit_o);
  auto* cmd_run =
      app.add_subcommand("run", "cross-validated train/test experiment");
  add_common(cmd_run, run_o);
  auto* cmd_predict =
      app.add_subcommand("predict", "fit then predict at query inputs");
  add_common(cmd_predict, predict_o);
  cmd_predict->add_option("--query", query_csv, "CSV of query inputs")
      ->required();
  auto* cmd_eval = app.add_subcommand(
      "evaluate", "recompute metrics from an emitted predictions CSV");
  add_common(cmd_eval, eval_o);
  cmd_eval->add_option("--predictions", predictions_csv, "predictions CSV")
      ->required();
  auto* cmd_compare =
      app.add_subcommand("compare", "cross-validated algorithm comparison");
  add_common(cmd_compare, compare_o);
  auto* cmd_sweep =
      app.add_subcommand("sweep-m", "inducing-count sweep (NLML/NLPD/error)");
  add_common(cmd_sweep, sweep_o);
  cmd_sweep->add_option("--m-list", m_list, "comma-separated inducing counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_fit->parsed()) {
      auto cfg = load_with_overrides(fit_o);
      sitegp::run_fit(cfg, cfg.output_dir);
    } else if (cmd_run->parsed()) {
      auto cfg = load_with_overrides(run_o);
      sitegp::run_experiment(cfg, cfg.output_dir);
    } else if (cmd_predict->parsed()) {
      auto cfg = load_with_overrides(predict_o);
      sitegp::run_predict(cfg, query_csv, cfg.output_dir);
    } else if (cmd_eval->parsed()) {
      auto cfg = load_with_overrides(eval_o);
      sitegp::Metrics m = sitegp::run_evaluate(cfg, predictions_csv,
                                               cfg.output_dir);
      std::cout << "nlpd=" << m.nlpd << " rmse=" << m.rmse
                << " error_rate=" << m.error_rate << std::endl;
    } else if (cmd_compare->parsed()) {
      auto cfg = load_with_overrides(compare_o);
      sitegp::run_compare(cfg, cfg.output_dir);
    } else if (cmd_sweep->parsed()) {
      auto cfg = load_with_overrides(sweep_o);
      std::vector<int> ms;
      std::stringstream ss(m_list);
      std::string tok;
      while (std::getline(ss, tok, ',')) ms.push_back(std::stoi(tok));
      sitegp::run_sweep_m(cfg, ms, cfg.output_dir);
    }
  } catch (const std::exception& e) {
    emit_error(e);
    return 1;
  }
  return 0;
}
