#pragma once

// The subcommands behind the CLI, callable directly from tests. Exit codes
// are a stable contract: 0 success, 1 usage error, 2 input error, 3 backend
// error (including partial degradation).

#include <memory>
#include <optional>
#include <string>

#include "treecrit/gateway.hpp"
#include "treecrit/store.hpp"

namespace treecrit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitBackend = 3;

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;  // mock | remote
  std::optional<int> parallelism;
};

// Loads the config file and applies overrides; throws ConfigError/IoError.
RunConfig resolve_config(const std::string& config_file, const CliOverrides& overrides);

std::unique_ptr<TextBackend> make_backend(const RunConfig& config);
std::unique_ptr<Grader> make_grader(const RunConfig& config, TextBackend& backend);

// One tree dump per question into out_dir (<id>.tree.jsonl).
int cmd_search(const std::string& questions_file, const std::string& config_file,
               const std::string& out_dir, const CliOverrides& overrides = {});

// Mines every *.tree.jsonl under tree_dir (sorted) into one sample file.
int cmd_mine(const std::string& tree_dir, const std::string& config_file,
             const std::string& out_file, const CliOverrides& overrides = {});

// Filters a sample file; writes the kept samples and <out>.report.json.
int cmd_filter(const std::string& samples_file, const std::string& config_file,
               const std::string& out_file, const CliOverrides& overrides = {});

// Batch actor-critic inference; writes traces, <out>.report.json and prints
// the per-iteration table.
int cmd_infer(const std::string& questions_file, const std::string& config_file,
              const std::string& out_file, const CliOverrides& overrides = {});

// Evaluates loss records (one JSON object per line); prints one result line
// per record, or writes them to out_file when given.
int cmd_losses(const std::string& record_file, const std::string& out_file = "");

}  // namespace treecrit
