#pragma once

// Flat-file persistence. Every output file is line-delimited JSON records
// with a first-line header carrying the schema version and a hash of the
// configuration that produced it. Writes go through a temp file + rename.

#include <stdexcept>
#include <string>
#include <vector>

#include "treecrit/mcts.hpp"
#include "treecrit/refine.hpp"
#include "treecrit/types.hpp"

#include <json.hpp>

namespace treecrit {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

std::string config_hash(const SearchConfig& config);

nlohmann::json make_header(const SearchConfig& config);

// Run-level settings: backend wiring and worker pool on top of SearchConfig.
// Loaded from a key = value document; TREECRIT_BASE_URL overrides base_url
// and the API token is only ever read from the environment.
struct RunConfig {
  SearchConfig search;
  std::string backend = "mock";  // mock | remote
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model = "actor";
  std::string critic_model;  // empty = same as model
  std::string api_token_env = "TREECRIT_API_TOKEN";
  std::string script_file;         // scripted backend table
  std::string mock_default = "fail";  // echo | fail
  std::string templates_dir;
  std::string grader = "normalized";  // normalized | judge
  int parallelism = 1;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text, const std::string& origin);
std::string dump_run_config(const RunConfig& config);

void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Questions are read strictly: any malformed line, duplicate id, or empty
// id/text aborts with an IoError naming the line.
std::vector<Question> read_questions(const std::string& path);
void write_questions(const std::string& path, const std::vector<Question>& questions);

struct SampleFile {
  std::vector<CritiqueSample> samples;
  std::vector<int> malformed_lines;  // 1-based, skipped
};
SampleFile read_samples(const std::string& path);
void write_samples(const std::string& path, const SearchConfig& config,
                   const std::vector<CritiqueSample>& samples);

void write_tree(const std::string& path, const SearchTree& tree, const SearchConfig& config);
struct TreeFile {
  SearchTree tree;
  SearchConfig config;
};
TreeFile read_tree(const std::string& path);

void write_traces(const std::string& path, const SearchConfig& config,
                  const std::vector<RefinementTrace>& traces);

void write_json_file(const std::string& path, const nlohmann::json& j);

// Filesystem-safe fragment of an id for use in dump filenames.
std::string sanitize_filename(const std::string& id);

}  // namespace treecrit
