#include "treecrit/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "treecrit/hash.hpp"

namespace treecrit {

using nlohmann::json;

namespace {

void parse_base_url(const std::string& url, std::string& host, int& port, std::string& prefix) {
  std::string rest = url;
  if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  } else if (rest.rfind("https://", 0) == 0) {
    throw GatewayError("https endpoints are not supported; use an http proxy or gateway");
  }
  std::size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  prefix = slash == std::string::npos ? std::string{} : rest.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  std::size_t colon = hostport.rfind(':');
  if (colon == std::string::npos) {
    host = hostport;
    port = 80;
  } else {
    host = hostport.substr(0, colon);
    port = std::stoi(hostport.substr(colon + 1));
  }
  if (host.empty()) throw GatewayError("invalid base_url: " + url);
}

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

RemoteBackend::RemoteBackend(RemoteOptions options) : options_(std::move(options)) {
  parse_base_url(options_.base_url, host_, port_, path_prefix_);
}

json RemoteBackend::user_message(const Question* question, const std::string& text) const {
  if (question && question->image_ref) {
    json parts = json::array();
    parts.push_back(json{{"type", "image_url"}, {"image_url", {{"url", *question->image_ref}}}});
    parts.push_back(json{{"type", "text"}, {"text", text}});
    return json{{"role", "user"}, {"content", parts}};
  }
  return json{{"role", "user"}, {"content", text}};
}

std::vector<std::string> RemoteBackend::chat(const json& messages, int n, double temperature,
                                             int max_tokens, const std::optional<std::string>& stop,
                                             std::uint64_t seed, const std::string& model) {
  json request{{"model", model},
               {"messages", messages},
               {"temperature", temperature},
               {"max_tokens", max_tokens},
               {"n", n},
               {"seed", seed}};
  if (stop) request["stop"] = json::array({*stop});
  std::string body = request.dump();

  httplib::Headers headers;
  if (const char* token = std::getenv(options_.api_token_env.c_str()); token && *token)
    headers.emplace("Authorization", std::string("Bearer ") + token);

  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = std::chrono::milliseconds(options_.backoff_base_ms << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(host_, port_);
    client.set_connection_timeout(options_.timeout_sec, 0);
    client.set_read_timeout(options_.timeout_sec, 0);
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "server returned status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw TransportError("chat request rejected with status " + std::to_string(res->status) +
                           ": " + res->body);

    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw MalformedReplyError(std::string("chat response is not JSON: ") + e.what());
    }
    if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty())
      throw MalformedReplyError("chat response has no choices");
    std::vector<std::string> contents;
    for (const json& choice : reply["choices"]) {
      const json& content = choice.at("message").at("content");
      contents.push_back(content.is_string() ? content.get<std::string>() : content.dump());
    }
    return contents;
  }
  throw TransportError("chat request failed after " + std::to_string(options_.max_retries + 1) +
                       " attempts: " + last_error);
}

namespace {

std::string compose_step_prompt(const Question& question, const std::vector<Step>& prior,
                                const std::string& marker) {
  std::string p = question.text;
  p += "\n\nThink step by step. Continue with exactly one short reasoning step.";
  p += "\nWhen the answer is settled, finish with a line \"" + marker + " <answer>\".";
  if (!prior.empty()) {
    p += "\n\nReasoning so far:\n";
    p += render_steps(prior);
  }
  p += "\n\nNext step:";
  return p;
}

}  // namespace

std::vector<Step> RemoteBackend::generate_steps(const GenerationRequest& req) {
  std::string prompt = compose_step_prompt(req.question, req.prior_steps, options_.answer_marker);
  json messages = json::array({user_message(&req.question, prompt)});
  std::uint64_t seed = fnv1a64(req.question.id, options_.seed);
  seed = fnv1a64_mix(seed, hash_texts(step_texts(req.prior_steps)));

  std::optional<std::string> stop;
  if (req.stop_at_step_boundary) stop = "\n";
  std::vector<std::string> replies = chat(messages, req.n_samples, req.temperature,
                                          req.max_new_tokens * 4, stop, seed, options_.model);
  std::vector<Step> steps;
  steps.reserve(replies.size());
  for (const std::string& raw : replies)
    steps.push_back(make_step(first_step_text(raw), req.max_new_tokens, options_.answer_marker));
  return steps;
}

ReasoningPath RemoteBackend::rollout(const Question& question, const std::vector<Step>& prior_steps,
                                     int budget, std::uint64_t sample_index) {
  if (auto done = completed_path(question, prior_steps, options_.answer_marker)) return *done;

  ReasoningPath path;
  path.question_id = question.id;
  path.steps = prior_steps;
  path.source = PathSource::rollout;

  int used = 0;
  while (used < budget) {
    GenerationRequest req;
    req.question = question;
    req.prior_steps = path.steps;
    req.max_new_tokens = std::min(options_.step_token_cap, budget - used);
    req.temperature = options_.temperature;
    req.n_samples = 1;
    req.stop_at_step_boundary = true;

    std::string prompt = compose_step_prompt(question, path.steps, options_.answer_marker);
    json messages = json::array({user_message(&question, prompt)});
    std::uint64_t seed = fnv1a64(question.id, options_.seed);
    seed = fnv1a64_mix(seed, hash_texts(step_texts(path.steps)));
    seed = fnv1a64_mix(seed, sample_index);
    std::vector<std::string> replies =
        chat(messages, 1, options_.temperature, req.max_new_tokens * 4, std::string("\n"), seed,
             options_.model);
    Step step = make_step(first_step_text(replies.front()), req.max_new_tokens, options_.answer_marker);
    if (step.text.empty() && !step.is_terminal) break;  // server produced nothing usable
    used += step.token_count;
    path.steps.push_back(step);
    if (step.is_terminal) break;
  }
  if (!path.steps.empty() && path.steps.back().is_terminal)
    path.final_answer = extract_marked_answer(path.steps.back().text, options_.answer_marker);
  return path;
}

ReasoningPath RemoteBackend::parse_whole_answer(const Question& question, const std::string& reply,
                                                PathSource source) const {
  ReasoningPath path;
  path.question_id = question.id;
  path.source = source;
  std::istringstream in(reply);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trimmed(line);
    if (t.empty()) continue;
    Step step = make_step(t, options_.step_token_cap, options_.answer_marker);
    path.steps.push_back(step);
    if (step.is_terminal) break;
  }
  if (!path.steps.empty() && path.steps.back().is_terminal)
    path.final_answer = extract_marked_answer(path.steps.back().text, options_.answer_marker);
  return path;
}

CriticVerdict RemoteBackend::critique(const Question& question, const ReasoningPath& answer) {
  std::string prompt = build_critic_prompt(options_.templates, question, answer);
  json messages = json::array({user_message(&question, prompt)});
  std::string model = options_.critic_model.empty() ? options_.model : options_.critic_model;
  // The critic decodes greedily.
  std::vector<std::string> replies =
      chat(messages, 1, 0.0, options_.max_answer_tokens, std::nullopt,
           fnv1a64(question.id, options_.seed), model);
  return parse_critic_reply(replies.front());
}

ReasoningPath RemoteBackend::refine(const Question& question, const ReasoningPath& answer,
                                    const std::string& critique, std::uint64_t attempt) {
  std::string prompt = build_actor_prompt(options_.templates, question, answer, critique);
  json messages = json::array({user_message(&question, prompt)});
  std::uint64_t seed = fnv1a64(question.id, options_.seed);
  seed = fnv1a64_mix(seed, hash_texts(step_texts(answer.steps)));
  seed = fnv1a64_mix(seed, attempt);
  std::vector<std::string> replies = chat(messages, 1, options_.temperature,
                                          options_.max_answer_tokens, std::nullopt, seed,
                                          options_.model);
  return parse_whole_answer(question, replies.front(), PathSource::refined);
}

std::string RemoteBackend::annotate(const Question& question, const DivergencePair& pair) {
  std::string prompt = build_annotator_prompt(options_.templates, question, pair);
  json messages = json::array({user_message(&question, prompt)});
  // Annotation decodes greedily as well.
  std::vector<std::string> replies =
      chat(messages, 1, 0.0, options_.max_answer_tokens, std::nullopt,
           fnv1a64(question.id, options_.seed), options_.model);
  std::string text = trimmed(replies.front());
  if (text.empty()) throw EmptyReplyError("annotator returned empty text");

  std::optional<std::string> reference_answer;
  if (!pair.branch_a.empty())
    reference_answer = extract_marked_answer(pair.branch_a.back().text, options_.answer_marker);
  if (reference_answer) text = redact_answer(std::move(text), *reference_answer);
  return text;
}

bool RemoteBackend::judge(const std::string& predicted, const std::string& ground_truth) {
  std::string prompt =
      "Decide whether these two answers to the same question mean the same thing.\n"
      "Reply with exactly one word: yes or no.\n\n"
      "Answer 1: " + predicted + "\nAnswer 2: " + ground_truth + "\n";
  json messages = json::array({user_message(nullptr, prompt)});
  std::vector<std::string> replies =
      chat(messages, 1, 0.0, 8, std::nullopt, fnv1a64(predicted + "\x1f" + ground_truth), options_.model);
  std::string reply = trimmed(replies.front());
  for (char& c : reply) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (reply.rfind("yes", 0) == 0) return true;
  if (reply.rfind("no", 0) == 0) return false;
  throw MalformedReplyError("judge reply is neither yes nor no: " + reply);
}

}  // namespace treecrit
