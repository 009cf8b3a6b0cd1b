#include "treecrit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "treecrit/critique.hpp"
#include "treecrit/filter.hpp"
#include "treecrit/hash.hpp"
#include "treecrit/losses.hpp"
#include "treecrit/mcts.hpp"
#include "treecrit/parallel.hpp"
#include "treecrit/refine.hpp"
#include "treecrit/remote.hpp"

namespace treecrit {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig resolve_config(const std::string& config_file, const CliOverrides& overrides) {
  RunConfig config = load_run_config(config_file);
  if (overrides.seed) config.search.seed = *overrides.seed;
  if (overrides.backend) {
    if (*overrides.backend != "mock" && *overrides.backend != "remote")
      throw ConfigError("--backend must be mock or remote");
    config.backend = *overrides.backend;
  }
  if (overrides.parallelism) {
    if (*overrides.parallelism < 1) throw ConfigError("--parallelism must be >= 1");
    config.parallelism = *overrides.parallelism;
  }
  std::vector<std::string> errors = validate(config.search);
  if (!errors.empty()) {
    std::string all = "invalid configuration:";
    for (const std::string& e : errors) all += "\n  " + e;
    throw ConfigError(all);
  }
  return config;
}

std::unique_ptr<TextBackend> make_backend(const RunConfig& config) {
  if (config.backend == "mock") {
    Script script;
    if (!config.script_file.empty()) {
      try {
        script = Script::load(config.script_file);
      } catch (const GatewayError& e) {
        throw ConfigError(e.what());
      }
    }
    MockOptions options;
    options.step_token_cap = config.search.step_token_cap;
    options.answer_marker = config.search.answer_marker;
    options.default_behavior =
        config.mock_default == "echo" ? MockDefault::echo : MockDefault::fail;
    options.seed = config.search.seed;
    return std::make_unique<ScriptedBackend>(std::move(script), std::move(options));
  }

  RemoteOptions options;
  options.base_url = config.base_url;
  options.model = config.model;
  options.critic_model = config.critic_model;
  options.api_token_env = config.api_token_env;
  options.temperature = config.search.temperature;
  options.step_token_cap = config.search.step_token_cap;
  options.answer_marker = config.search.answer_marker;
  options.seed = config.search.seed;
  options.templates = config.templates_dir.empty() ? PromptTemplates::defaults()
                                                   : PromptTemplates::load_dir(config.templates_dir);
  return std::make_unique<RemoteBackend>(std::move(options));
}

std::unique_ptr<Grader> make_grader(const RunConfig& config, TextBackend& backend) {
  if (config.grader == "judge") return std::make_unique<JudgeGrader>(backend);
  return std::make_unique<NormalizedMatchGrader>();
}

namespace {

// Per-question seed so concurrent searches stay order-independent.
std::uint64_t question_seed(std::uint64_t master, const std::string& qid) {
  return mix64(fnv1a64(qid, master ^ 0x9e3779b97f4a7c15ULL));
}

}  // namespace

int cmd_search(const std::string& questions_file, const std::string& config_file,
               const std::string& out_dir, const CliOverrides& overrides) {
  try {
    RunConfig config = resolve_config(config_file, overrides);
    std::vector<Question> questions = read_questions(questions_file);
    std::unique_ptr<TextBackend> backend = make_backend(config);
    std::unique_ptr<Grader> grader = make_grader(config, *backend);

    struct Outcome {
      SearchTree tree;
      SearchConfig config;
    };
    std::vector<Outcome> outcomes =
        parallel_map(questions, config.parallelism, [&](const Question& q, std::size_t) {
          SearchConfig qconfig = config.search;
          qconfig.seed = question_seed(config.search.seed, q.id);
          SearchEngine engine(*backend, *grader, qconfig);
          return Outcome{engine.run(q), qconfig};
        });

    int partial = 0;
    for (const Outcome& o : outcomes) {
      fs::path out = fs::path(out_dir) / (sanitize_filename(o.tree.question.id) + ".tree.jsonl");
      write_tree(out.string(), o.tree, o.config);
      if (o.tree.partial) ++partial;
      std::cerr << "[search] " << o.tree.question.id << ": nodes=" << o.tree.nodes.size()
                << " iterations=" << o.tree.iteration_count
                << (o.tree.partial ? " (partial)" : "")
                << (o.tree.no_reference ? " (no-reference)" : "") << '\n';
    }
    std::cerr << "[search] wrote " << outcomes.size() << " trees to " << out_dir;
    if (partial > 0) std::cerr << " (" << partial << " partial)";
    std::cerr << '\n';
    return partial > 0 ? kExitBackend : kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const GatewayError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kExitBackend;
  }
}

int cmd_mine(const std::string& tree_dir, const std::string& config_file,
             const std::string& out_file, const CliOverrides& overrides) {
  try {
    RunConfig config = resolve_config(config_file, overrides);
    std::unique_ptr<TextBackend> backend = make_backend(config);
    std::unique_ptr<Grader> grader = make_grader(config, *backend);

    if (!fs::is_directory(tree_dir)) throw IoError("tree directory not found: " + tree_dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(tree_dir)) {
      if (!entry.is_regular_file()) continue;
      std::string name = entry.path().filename().string();
      if (name.ends_with(".tree.jsonl")) files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());

    MiningStats stats;
    int malformed_files = 0;
    std::vector<CritiqueSample> all;
    for (const std::string& file : files) {
      TreeFile tf;
      try {
        tf = read_tree(file);
      } catch (const IoError& e) {
        ++malformed_files;
        std::cerr << "[mine] skipping malformed tree file: " << e.what() << '\n';
        continue;
      }
      std::vector<CritiqueSample> samples = mine_tree(tf.tree, *backend, *grader, config.search, stats);
      all.insert(all.end(), std::make_move_iterator(samples.begin()),
                 std::make_move_iterator(samples.end()));
    }
    write_samples(out_file, config.search, all);
    std::cerr << "[mine] trees=" << stats.trees << " no_reference=" << stats.no_reference_trees
              << " positives=" << stats.positives << " negatives=" << stats.negatives
              << " duplicates_removed=" << stats.duplicates_removed
              << " skipped=" << stats.skipped_annotations
              << " transport_failures=" << stats.transport_failures
              << " malformed_files=" << malformed_files << '\n';
    return stats.transport_failures > 0 ? kExitBackend : kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const GatewayError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kExitBackend;
  }
}

int cmd_filter(const std::string& samples_file, const std::string& config_file,
               const std::string& out_file, const CliOverrides& overrides) {
  try {
    RunConfig config = resolve_config(config_file, overrides);
    std::unique_ptr<TextBackend> backend = make_backend(config);
    std::unique_ptr<Grader> grader = make_grader(config, *backend);

    SampleFile input = read_samples(samples_file);
    for (int line : input.malformed_lines)
      std::cerr << "[filter] skipping malformed record at line " << line << '\n';

    FilterResult result =
        filter_dataset(input.samples, *backend, *grader, config.search, config.parallelism);
    result.report.malformed_lines = input.malformed_lines;

    write_samples(out_file, config.search, result.samples);
    write_json_file(out_file + ".report.json", result.report);
    std::cerr << "[filter] in=" << result.report.input_records
              << " positives=" << result.report.positives
              << " kept_negatives=" << result.report.kept_negatives
              << " discarded=" << result.report.discarded
              << " undetermined=" << result.report.undetermined << '\n';
    return result.report.undetermined > 0 ? kExitBackend : kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const GatewayError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kExitBackend;
  }
}

int cmd_infer(const std::string& questions_file, const std::string& config_file,
              const std::string& out_file, const CliOverrides& overrides) {
  try {
    RunConfig config = resolve_config(config_file, overrides);
    std::vector<Question> questions = read_questions(questions_file);
    for (const Question& q : questions)
      if (q.ground_truth.empty())
        throw IoError("question " + q.id + " has no ground_truth; batch evaluation needs one");

    std::unique_ptr<TextBackend> backend = make_backend(config);
    std::unique_ptr<Grader> grader = make_grader(config, *backend);

    BatchEvalResult result =
        batch_eval(questions, *backend, *grader, config.search, config.parallelism);
    write_traces(out_file, config.search, result.traces);
    write_json_file(out_file + ".report.json", result.report);
    std::cout << format_report(result.report);
    return result.report.errors > 0 ? kExitBackend : kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const GatewayError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kExitBackend;
  }
}

int cmd_losses(const std::string& record_file, const std::string& out_file) {
  std::ifstream in(record_file);
  if (!in) {
    std::cerr << "error: cannot open record file: " << record_file << '\n';
    return kExitInput;
  }
  std::string line;
  int line_no = 0;
  int failures = 0;
  std::string output;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json result;
    try {
      json j = json::parse(line);
      if (j.is_object() && j.value("record", std::string{}) == "header") continue;

      std::optional<double> lm;
      if (j.contains("probs")) {
        TokenProbSequence seq{j.at("probs").get<std::vector<double>>()};
        lm = lm_loss(seq);
        result["lm_loss"] = *lm;
      }
      std::optional<double> score;
      if (j.contains("v") && j.contains("v_hat")) {
        ScoreLossResult r = score_loss(j.at("v").get<int>(), j.at("v_hat").get<double>());
        score = r.value;
        result["score_loss"] = r.value;
        result["clamped"] = r.clamped;
      }
      if (lm && score) {
        double lambda = j.value("lambda", 1.0);
        result["total_loss"] = total_loss(*lm, *score, lambda);
      }
      if (result.empty())
        throw std::domain_error("record carries neither probs nor (v, v_hat)");
    } catch (const std::exception& e) {
      std::cerr << record_file << " line " << line_no << ": " << e.what() << '\n';
      ++failures;
      continue;
    }
    result["line"] = line_no;
    output += result.dump();
    output += '\n';
  }
  if (out_file.empty()) {
    std::cout << output;
  } else {
    write_file_atomic(out_file, output);
  }
  return failures > 0 ? kExitInput : kExitOk;
}

}  // namespace treecrit
