#include <optional>
#include <string>

#include <CLI11.hpp>

#include "treecrit/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"step-level reasoning search, critique mining and actor-critic refinement"};
  app.require_subcommand(1);

  std::string config_file;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<int> parallelism;

  auto add_common = [&](CLI::App* cmd, bool out_required = true) {
    cmd->add_option("--config", config_file, "run configuration file")->required();
    cmd->add_option("--out", out, "output path")->required(out_required);
    cmd->add_option("--seed", seed, "override the configured seed");
    cmd->add_option("--backend", backend, "override the configured backend")
        ->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_option("--parallelism", parallelism, "override the worker count")
        ->check(CLI::PositiveNumber);
  };

  std::string questions_file;
  CLI::App* search = app.add_subcommand("search", "build one reasoning tree per question");
  search->add_option("questions", questions_file, "question file (one JSON record per line)")
      ->required();
  add_common(search);

  std::string tree_dir;
  CLI::App* mine = app.add_subcommand("mine", "mine critique samples from tree dumps");
  mine->add_option("trees", tree_dir, "directory of *.tree.jsonl dumps")->required();
  add_common(mine);

  std::string samples_file;
  CLI::App* filter = app.add_subcommand("filter", "keep critiques that make refinement succeed");
  filter->add_option("samples", samples_file, "mined sample file")->required();
  add_common(filter);

  std::string infer_questions;
  CLI::App* infer = app.add_subcommand("infer", "iterative actor-critic inference over questions");
  infer->add_option("questions", infer_questions, "question file with ground truths")->required();
  add_common(infer);

  std::string record_file;
  std::string losses_out;
  CLI::App* losses = app.add_subcommand("losses", "evaluate loss records");
  losses->add_option("records", record_file, "loss record file (one JSON object per line)")
      ->required();
  losses->add_option("--out", losses_out, "write results here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return treecrit::kExitUsage;
  }

  treecrit::CliOverrides overrides{seed, backend, parallelism};
  if (search->parsed()) return treecrit::cmd_search(questions_file, config_file, out, overrides);
  if (mine->parsed()) return treecrit::cmd_mine(tree_dir, config_file, out, overrides);
  if (filter->parsed()) return treecrit::cmd_filter(samples_file, config_file, out, overrides);
  if (infer->parsed()) return treecrit::cmd_infer(infer_questions, config_file, out, overrides);
  if (losses->parsed()) return treecrit::cmd_losses(record_file, losses_out);
  return treecrit::kExitUsage;
}
