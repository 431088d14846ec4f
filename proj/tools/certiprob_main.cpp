#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "certiprob/certiprob.h"

namespace {

int exit_code(cp_status s) {
  if (s == CP_OK) return 0;
  std::cerr << "error: " << cp_last_error() << "\n";
  return s == CP_ERR_CONFIG || s == CP_ERR_INVALID_ARGUMENT ? 1 : 2;
}

std::string reference() {
  char* text = nullptr;
  if (cp_config_reference(&text) != CP_OK) return {};
  std::string s(text);
  cp_string_free(text);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-minimizing training and sequential certification of probabilistic robustness"};
  app.footer(reference());
  app.set_version_flag("--version", std::string(cp_version()));
  app.require_subcommand(1);

  std::string config, out, checkpoint, data_root;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  const auto common = [&](CLI::App* sub, bool wants_checkpoint) {
    sub->add_option("--config", config, "config file (TOML-style)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the global seed");
    sub->add_option("--workers", workers, "worker threads for certification and attacks")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory (overrides config `out`)");
    sub->add_option("--data-root", data_root, "base directory for data paths (overrides CERTIPROB_DATA)");
    if (wants_checkpoint) sub->add_option("--checkpoint", checkpoint, "model checkpoint (default <out>/model.cprb)");
  };
  auto* train = app.add_subcommand("train", "train a model and write checkpoint, log and resolved config");
  auto* certify = app.add_subcommand("certify", "certify every test input and write the certification report");
  auto* attack = app.add_subcommand("attack", "run the configured attacks and write defence outcomes");
  auto* eval = app.add_subcommand("eval", "certify, attack, then report");
  auto* report = app.add_subcommand("report", "recompute metrics from the logs of a run directory");
  common(train, false);
  common(certify, true);
  common(attack, true);
  common(eval, true);
  std::string run_dir;
  report->add_option("run_dir", run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  cp_run_options opts{};
  opts.config_path = config.empty() ? nullptr : config.c_str();
  opts.out_dir = out.empty() ? nullptr : out.c_str();
  opts.checkpoint = checkpoint.empty() ? nullptr : checkpoint.c_str();
  opts.data_root = data_root.empty() ? nullptr : data_root.c_str();
  for (auto* sub : {train, certify, attack, eval})
    if (sub->parsed() && sub->count("--seed")) {
      opts.has_seed = 1;
      opts.seed = seed;
    }
  opts.workers = workers;

  if (train->parsed()) return exit_code(cp_run_train(&opts));
  if (certify->parsed()) return exit_code(cp_run_certify(&opts));
  if (attack->parsed()) return exit_code(cp_run_attack(&opts));
  if (eval->parsed()) return exit_code(cp_run_eval(&opts));

  opts.out_dir = run_dir.c_str();
  char* text = nullptr;
  const cp_status s = cp_run_report(&opts, &text);
  if (s == CP_OK) {
    std::cout << text;
    cp_string_free(text);
  }
  return exit_code(s);
}
