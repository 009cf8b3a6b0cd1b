#pragma once

// Chat-completions backend for OpenAI-compatible servers. Prompts carry the
// question text plus an image content part when the question references one;
// transport failures retry with exponential backoff before surfacing.

#include <optional>
#include <string>
#include <vector>

#include "treecrit/gateway.hpp"

#include <json.hpp>

namespace treecrit {

struct RemoteOptions {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model = "actor";
  std::string critic_model;  // empty = same endpoint model as the actor
  std::string api_token_env = "TREECRIT_API_TOKEN";
  int max_retries = 3;       // retries after the first attempt
  int backoff_base_ms = 250;
  int timeout_sec = 120;
  double temperature = 0.7;
  int step_token_cap = 30;
  int max_answer_tokens = 512;
  std::string answer_marker = kDefaultAnswerMarker;
  PromptTemplates templates = PromptTemplates::defaults();
  std::uint64_t seed = 0;
};

class RemoteBackend final : public TextBackend {
 public:
  explicit RemoteBackend(RemoteOptions options);

  std::vector<Step> generate_steps(const GenerationRequest& req) override;
  ReasoningPath rollout(const Question& question, const std::vector<Step>& prior_steps, int budget,
                        std::uint64_t sample_index) override;
  CriticVerdict critique(const Question& question, const ReasoningPath& answer) override;
  ReasoningPath refine(const Question& question, const ReasoningPath& answer,
                       const std::string& critique, std::uint64_t attempt) override;
  std::string annotate(const Question& question, const DivergencePair& pair) override;
  bool judge(const std::string& predicted, const std::string& ground_truth) override;

  using TextBackend::refine;
  using TextBackend::rollout;

 private:
  RemoteOptions options_;
  std::string host_;
  int port_ = 80;
  std::string path_prefix_;

  std::vector<std::string> chat(const nlohmann::json& messages, int n, double temperature,
                                int max_tokens, const std::optional<std::string>& stop,
                                std::uint64_t seed, const std::string& model);
  nlohmann::json user_message(const Question* question, const std::string& text) const;
  ReasoningPath parse_whole_answer(const Question& question, const std::string& reply,
                                   PathSource source) const;
};

}  // namespace treecrit
