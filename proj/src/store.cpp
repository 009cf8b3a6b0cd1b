#include "treecrit/store.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "treecrit/hash.hpp"

namespace treecrit {

using nlohmann::json;

std::string config_hash(const SearchConfig& config) {
  json j = config;
  return hex64(fnv1a64(j.dump()));
}

json make_header(const SearchConfig& config) {
  return json{{"record", "header"}, {"schema_version", kSchemaVersion}, {"config_hash", config_hash(config)}};
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key " + key + ": expected a boolean, got \"" + value + "\"");
}

long long parse_int(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected an integer, got \"" + value + "\"");
  }
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected a number, got \"" + value + "\"");
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + " line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));

    SearchConfig& s = config.search;
    if (key == "n_expand") s.n_expand = static_cast<int>(parse_int(value, key));
    else if (key == "m_rollouts") s.m_rollouts = static_cast<int>(parse_int(value, key));
    else if (key == "step_token_cap") s.step_token_cap = static_cast<int>(parse_int(value, key));
    else if (key == "max_path_tokens") s.max_path_tokens = static_cast<int>(parse_int(value, key));
    else if (key == "search_iterations") s.search_iterations = static_cast<int>(parse_int(value, key));
    else if (key == "temperature") s.temperature = parse_double(value, key);
    else if (key == "seed") s.seed = static_cast<std::uint64_t>(parse_int(value, key));
    else if (key == "refine_attempts") s.refine_attempts = static_cast<int>(parse_int(value, key));
    else if (key == "keep_threshold") s.keep_threshold = static_cast<int>(parse_int(value, key));
    else if (key == "score_threshold") s.score_threshold = parse_double(value, key);
    else if (key == "max_refine_iters") s.max_refine_iters = static_cast<int>(parse_int(value, key));
    else if (key == "loss_weight") s.loss_weight = parse_double(value, key);
    else if (key == "use_ucb") s.use_ucb = parse_bool(value, key);
    else if (key == "ucb_c") s.ucb_c = parse_double(value, key);
    else if (key == "mine_rollouts") s.mine_rollouts = parse_bool(value, key);
    else if (key == "positives_all_correct") s.positives_all_correct = parse_bool(value, key);
    else if (key == "answer_marker") s.answer_marker = value;
    else if (key == "backend") config.backend = value;
    else if (key == "base_url") config.base_url = value;
    else if (key == "model") config.model = value;
    else if (key == "critic_model") config.critic_model = value;
    else if (key == "api_token_env") config.api_token_env = value;
    else if (key == "script_file") config.script_file = value;
    else if (key == "mock_default") config.mock_default = value;
    else if (key == "templates_dir") config.templates_dir = value;
    else if (key == "grader") config.grader = value;
    else if (key == "parallelism") config.parallelism = static_cast<int>(parse_int(value, key));
    else throw ConfigError(origin + " line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
  }

  if (config.backend != "mock" && config.backend != "remote")
    throw ConfigError(origin + ": backend must be mock or remote");
  if (config.mock_default != "echo" && config.mock_default != "fail")
    throw ConfigError(origin + ": mock_default must be echo or fail");
  if (config.grader != "normalized" && config.grader != "judge")
    throw ConfigError(origin + ": grader must be normalized or judge");
  if (config.parallelism < 1) throw ConfigError(origin + ": parallelism must be >= 1");

  // Environment overrides: only the endpoint and (elsewhere) the API token.
  if (const char* url = std::getenv("TREECRIT_BASE_URL"); url && *url) config.base_url = url;
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::string dump_run_config(const RunConfig& config) {
  std::ostringstream out;
  json s = config.search;
  for (auto it = s.begin(); it != s.end(); ++it) {
    out << it.key() << " = ";
    if (it.value().is_string()) out << it.value().get<std::string>();
    else out << it.value().dump();
    out << '\n';
  }
  out << "backend = " << config.backend << '\n';
  out << "base_url = " << config.base_url << '\n';
  out << "model = " << config.model << '\n';
  if (!config.critic_model.empty()) out << "critic_model = " << config.critic_model << '\n';
  out << "api_token_env = " << config.api_token_env << '\n';
  if (!config.script_file.empty()) out << "script_file = " << config.script_file << '\n';
  out << "mock_default = " << config.mock_default << '\n';
  if (!config.templates_dir.empty()) out << "templates_dir = " << config.templates_dir << '\n';
  out << "grader = " << config.grader << '\n';
  out << "parallelism = " << config.parallelism << '\n';
  return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write file: " + tmp.string());
    out << content;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

bool is_header(const json& j) {
  return j.is_object() && j.value("record", std::string{}) == "header";
}

}  // namespace

std::vector<Question> read_questions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open questions file: " + path);
  std::vector<Question> questions;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (is_header(j)) continue;
    Question q;
    try {
      q = j.get<Question>();
    } catch (const json::exception& e) {
      throw IoError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (q.id.empty())
      throw IoError(path + " line " + std::to_string(line_no) + ": question id is empty");
    if (q.text.empty())
      throw IoError(path + " line " + std::to_string(line_no) + ": question text is empty");
    if (!ids.insert(q.id).second)
      throw IoError(path + " line " + std::to_string(line_no) + ": duplicate question id " + q.id);
    questions.push_back(std::move(q));
  }
  return questions;
}

void write_questions(const std::string& path, const std::vector<Question>& questions) {
  std::string out;
  for (const Question& q : questions) {
    out += json(q).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

SampleFile read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open samples file: " + path);
  SampleFile file;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      file.malformed_lines.push_back(line_no);
      continue;
    }
    if (is_header(j)) continue;
    try {
      file.samples.push_back(j.get<CritiqueSample>());
    } catch (const json::exception&) {
      file.malformed_lines.push_back(line_no);
    }
  }
  return file;
}

void write_samples(const std::string& path, const SearchConfig& config,
                   const std::vector<CritiqueSample>& samples) {
  std::string out = make_header(config).dump();
  out += '\n';
  for (const CritiqueSample& s : samples) {
    out += json(s).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_tree(const std::string& path, const SearchTree& tree, const SearchConfig& config) {
  json header = make_header(config);
  header["question"] = tree.question;
  header["config"] = config;
  header["rng_seed"] = tree.rng_seed;
  header["iteration_count"] = tree.iteration_count;
  header["partial"] = tree.partial;
  header["no_reference"] = tree.no_reference;

  std::string out = header.dump();
  out += '\n';
  for (const Node& n : tree.nodes) {
    json record = n;
    record["record"] = "node";
    out += record.dump();
    out += '\n';
  }
  for (const auto& [node_id, paths] : tree.rollouts) {
    for (const ReasoningPath& p : paths) {
      json record{{"record", "rollout"}, {"node_id", node_id}, {"path", p}};
      out += record.dump();
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

TreeFile read_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tree file: " + path);
  TreeFile file;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    std::string record = j.value("record", std::string{});
    try {
      if (record == "header") {
        file.tree.question = j.at("question").get<Question>();
        file.config = j.at("config").get<SearchConfig>();
        file.tree.rng_seed = j.value("rng_seed", std::uint64_t{0});
        file.tree.iteration_count = j.value("iteration_count", 0);
        file.tree.partial = j.value("partial", false);
        file.tree.no_reference = j.value("no_reference", false);
        have_header = true;
      } else if (record == "node") {
        file.tree.nodes.push_back(j.get<Node>());
      } else if (record == "rollout") {
        file.tree.rollouts[j.at("node_id").get<NodeId>()].push_back(
            j.at("path").get<ReasoningPath>());
      } else {
        throw IoError(path + " line " + std::to_string(line_no) + ": unknown record \"" + record +
                      "\"");
      }
    } catch (const json::exception& e) {
      throw IoError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw IoError(path + ": missing header record");
  for (std::size_t i = 0; i < file.tree.nodes.size(); ++i) {
    if (file.tree.nodes[i].node_id != static_cast<NodeId>(i))
      throw IoError(path + ": node records out of order or non-dense");
  }
  if (file.tree.nodes.empty()) throw IoError(path + ": tree has no nodes");
  return file;
}

void write_traces(const std::string& path, const SearchConfig& config,
                  const std::vector<RefinementTrace>& traces) {
  std::string out = make_header(config).dump();
  out += '\n';
  for (const RefinementTrace& t : traces) {
    out += json(t).dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_json_file(const std::string& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

std::string sanitize_filename(const std::string& id) {
  std::string out;
  out.reserve(id.size());
  for (char c : id) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') {
      out += c;
    } else {
      out += '_';
    }
  }
  return out.empty() ? "_" : out;
}

}  // namespace treecrit
