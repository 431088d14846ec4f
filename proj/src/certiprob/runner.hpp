#pragma once

#include <optional>
#include <string>
#include <utility>

#include "certiprob/checkpoint.hpp"
#include "certiprob/config.hpp"
#include "certiprob/dataio.hpp"

namespace certiprob {

inline constexpr const char* kVersion = "certiprob 0.1.0";

struct RunOptions {
  std::string config_path;  // empty: all defaults
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;         // overrides the config's `out` when non-empty
  std::string checkpoint;  // certify/attack; empty: <out>/model.cprb
  std::string data_root;   // overrides CERTIPROB_DATA and data.root when non-empty
};

/// Loads the config named by the options and applies the overrides.
RunConfig resolve_config(const RunOptions& opts);

/// Train and test sets for a resolved config. Missing files raise
/// ErrorCode::kConfig naming the key and path.
std::pair<Dataset, Dataset> load_datasets(const RunConfig& config);

ModelSpec model_for(const RunConfig& config, const Dataset& data);

void cmd_train(const RunConfig& config);
/// An empty checkpoint path selects <out>/model.cprb.
void cmd_certify(const RunConfig& config, const std::string& checkpoint_path);
void cmd_attack(const RunConfig& config, const std::string& checkpoint_path);
void cmd_eval(const RunConfig& config, const std::string& checkpoint_path);

/// Recomputes every metric from the JSON-lines logs in `run_dir`, writes
/// report.txt, report.json and report.csv there, and returns the text table.
std::string cmd_report(const std::string& run_dir);

/// Maps an exception to the CLI exit code: 1 for configuration or argument
/// errors, 2 for everything else.
int exit_code_for(const std::exception& e);

}  // namespace certiprob
