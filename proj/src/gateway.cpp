#include "treecrit/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "treecrit/hash.hpp"

namespace treecrit {

using nlohmann::json;

void to_json(json& j, const CriticVerdict& v) {
  j = json{{"critique", v.critique}, {"score", v.score}};
}

void from_json(const json& j, CriticVerdict& v) {
  j.at("critique").get_to(v.critique);
  j.at("score").get_to(v.score);
}

// ---------------------------------------------------------------------------
// Step construction
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Cut after the cap-th whitespace-delimited word; the result is a byte
// prefix of the input.
std::string truncate_tokens(const std::string& text, int cap) {
  if (cap <= 0) return std::string{};
  int words = 0;
  bool in_word = false;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    bool space = (i == text.size()) || std::isspace(static_cast<unsigned char>(text[i]));
    if (!space && !in_word) {
      in_word = true;
      ++words;
    } else if (space && in_word) {
      in_word = false;
      if (words == cap) return text.substr(0, i);
    }
  }
  return text;
}

constexpr const char* kEosToken = "<eos>";

}  // namespace

bool contains_marker(std::string_view text, std::string_view marker) {
  if (marker.empty()) return false;
  return to_lower(text).find(to_lower(marker)) != std::string::npos;
}

Step make_step(const std::string& raw, int token_cap, const std::string& marker) {
  std::string text = trim(raw);
  std::string lowered = to_lower(text);
  if (lowered == kEosToken) return Step{std::string{}, 0, true};

  text = truncate_tokens(text, token_cap);
  bool terminal = false;
  lowered = to_lower(text);
  if (lowered.size() >= 5 && lowered.ends_with(kEosToken)) {
    terminal = true;
    text = trim(text.substr(0, text.size() - 5));
  }
  if (contains_marker(text, marker)) terminal = true;
  return Step{text, count_tokens(text), terminal};
}

std::string first_step_text(const std::string& raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\n') return raw.substr(0, i);
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == raw.size() || std::isspace(static_cast<unsigned char>(raw[i + 1])))) {
      return raw.substr(0, i + 1);
    }
  }
  return raw;
}

std::optional<std::string> extract_marked_answer(const std::string& text, const std::string& marker) {
  if (marker.empty()) return std::nullopt;
  std::string lowered = to_lower(text);
  std::string lowered_marker = to_lower(marker);
  std::size_t pos = lowered.rfind(lowered_marker);
  if (pos == std::string::npos) return std::nullopt;
  std::string rest = trim(text.substr(pos + marker.size()));
  while (!rest.empty() && (rest.back() == '.' || rest.back() == '!' || rest.back() == '?'))
    rest.pop_back();
  rest = trim(rest);
  if (rest.empty()) return std::nullopt;
  return rest;
}

std::optional<ReasoningPath> completed_path(const Question& question,
                                            const std::vector<Step>& prior_steps,
                                            const std::string& marker) {
  if (prior_steps.empty() || !prior_steps.back().is_terminal) return std::nullopt;
  ReasoningPath path;
  path.question_id = question.id;
  path.steps = prior_steps;
  path.final_answer = extract_marked_answer(prior_steps.back().text, marker);
  path.source = PathSource::rollout;
  return path;
}

// ---------------------------------------------------------------------------
// Grading
// ---------------------------------------------------------------------------

namespace {

// Canonical form for plain decimal literals; returns nullopt for anything else.
std::optional<std::string> canonical_numeral(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool negative = false;
  if (s[i] == '+' || s[i] == '-') {
    negative = (s[i] == '-');
    ++i;
  }
  std::string int_part, frac_part;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) int_part += s[i++];
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) frac_part += s[i++];
  }
  if (i != s.size()) return std::nullopt;
  if (int_part.empty() && frac_part.empty()) return std::nullopt;

  std::size_t nz = int_part.find_first_not_of('0');
  int_part = (nz == std::string::npos) ? "0" : int_part.substr(nz);
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();

  std::string out = int_part.empty() ? "0" : int_part;
  if (!frac_part.empty()) out += "." + frac_part;
  if (negative && out != "0") out.insert(out.begin(), '-');
  return out;
}

}  // namespace

std::string normalize_answer(std::string_view answer) {
  std::string s = trim(answer);
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == '!' ||
                        s.back() == '?' || s.back() == ';' || s.back() == ':')) {
    s.pop_back();
    s = trim(s);
  }
  s = to_lower(s);
  if (auto numeral = canonical_numeral(s)) return *numeral;
  return s;
}

bool grade_answers(const std::string& predicted, const std::string& ground_truth) {
  return normalize_answer(predicted) == normalize_answer(ground_truth);
}

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.actor =
      "You are given an image, a question, your previous step-by-step answer, and a "
      "critique of that answer.\n"
      "Rewrite the step-by-step reasoning and correct the mistake the critique points "
      "out.\n"
      "Write one short reasoning step per line and end with a line \"Final answer: "
      "<answer>\".\n"
      "\n"
      "Question: {question}\n"
      "\n"
      "Previous answer:\n"
      "{reasoning}\n"
      "\n"
      "Critique:\n"
      "{critique}\n";
  t.critic =
      "You are a careful reviewer of step-by-step reasoning about an image.\n"
      "Check each step of the answer below for perception or reasoning mistakes.\n"
      "If every step is sound, reply exactly: No corrections needed.\n"
      "Otherwise, point out the first mistaken step and explain the mistake without "
      "stating the correct final answer.\n"
      "End your reply with a line \"SCORE: <number between 0 and 1>\" giving the "
      "probability that the final answer is correct.\n"
      "\n"
      "Question: {question}\n"
      "\n"
      "Answer:\n"
      "{reasoning}\n";
  t.annotator =
      "Two solutions to the same question agree up to a point and then diverge. Branch "
      "A ends in the correct final answer; branch B ends in a wrong one.\n"
      "Compare the two branches and write a short critique that identifies the specific "
      "mistake branch B makes at or after the divergence point, and how to avoid it.\n"
      "Do not state branch A's final answer.\n"
      "\n"
      "Question: {question}\n"
      "\n"
      "Branch A (correct):\n"
      "{branch_a}\n"
      "\n"
      "Branch B (incorrect):\n"
      "{branch_b}\n";
  return t;
}

PromptTemplates PromptTemplates::load_dir(const std::string& dir) {
  PromptTemplates t = defaults();
  auto read_if_present = [&dir](const char* name, std::string& target) {
    std::filesystem::path p = std::filesystem::path(dir) / name;
    std::ifstream in(p);
    if (!in) return;
    std::ostringstream ss;
    ss << in.rdbuf();
    target = ss.str();
  };
  read_if_present("actor.txt", t.actor);
  read_if_present("critic.txt", t.critic);
  read_if_present("annotator.txt", t.annotator);
  return t;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values) {
  std::string out = tmpl;
  for (const auto& [key, value] : values) {
    std::string placeholder = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = out.find(placeholder, pos)) != std::string::npos) {
      out.replace(pos, placeholder.size(), value);
      pos += value.size();
    }
  }
  return out;
}

std::string render_steps(const std::vector<Step>& steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) out += '\n';
    out += steps[i].text;
  }
  return out;
}

std::string build_actor_prompt(const PromptTemplates& t, const Question& q,
                               const ReasoningPath& answer, const std::string& critique) {
  return render_template(t.actor, {{"question", q.text},
                                   {"reasoning", render_steps(answer.steps)},
                                   {"critique", critique}});
}

std::string build_critic_prompt(const PromptTemplates& t, const Question& q,
                                const ReasoningPath& answer) {
  return render_template(t.critic,
                         {{"question", q.text}, {"reasoning", render_steps(answer.steps)}});
}

std::string build_annotator_prompt(const PromptTemplates& t, const Question& q,
                                   const DivergencePair& pair) {
  return render_template(t.annotator, {{"question", q.text},
                                       {"branch_a", render_steps(pair.branch_a)},
                                       {"branch_b", render_steps(pair.branch_b)}});
}

std::string redact_answer(std::string text, const std::string& answer) {
  if (answer.empty()) return text;
  std::size_t pos = 0;
  const std::string token = kRedactionToken;
  while ((pos = text.find(answer, pos)) != std::string::npos) {
    text.replace(pos, answer.size(), token);
    pos += token.size();
  }
  return text;
}

namespace {

// Matches "SCORE: <float>" (case-insensitive); returns the value on success.
std::optional<double> parse_score_line(const std::string& line) {
  std::string t = trim(line);
  if (t.size() < 6) return std::nullopt;
  if (to_lower(t.substr(0, 5)) != "score") return std::nullopt;
  std::size_t i = 5;
  while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
  if (i >= t.size() || t[i] != ':') return std::nullopt;
  ++i;
  const char* begin = t.c_str() + i;
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  if (end == begin) return std::nullopt;
  std::string rest = trim(std::string(end));
  if (!rest.empty()) return std::nullopt;
  return value;
}

}  // namespace

CriticVerdict parse_critic_reply(const std::string& reply) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : reply) {
    if (c == '\n') {
      lines.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  lines.push_back(current);

  std::optional<double> score;
  std::size_t score_line = lines.size();
  for (std::size_t i = lines.size(); i-- > 0;) {
    if (auto s = parse_score_line(lines[i])) {
      score = s;
      score_line = i;
      break;
    }
  }

  std::string critique;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i == score_line) continue;
    if (!critique.empty()) critique += '\n';
    critique += lines[i];
  }
  critique = trim(critique);
  if (critique.empty()) throw MalformedReplyError("critic reply has no critique text");

  CriticVerdict verdict;
  verdict.critique = critique;
  if (score) {
    verdict.score = std::clamp(*score, 0.0, 1.0);
  } else {
    // Fallback for critics without a score head.
    verdict.score = (critique == kNoCorrectionsNeeded) ? 1.0 : 0.0;
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Script
// ---------------------------------------------------------------------------

void Script::add_steps(const std::string& qid, const std::vector<std::string>& prefix,
                       std::vector<std::string> items) {
  steps_[Key{qid, hash_texts(prefix)}] = items;
  records_.push_back(json{{"question_id", qid}, {"kind", "steps"}, {"prefix", prefix}, {"items", items}});
}

void Script::add_rollout(const std::string& qid, const std::vector<std::string>& prefix,
                         std::vector<std::vector<std::string>> paths) {
  rollouts_[Key{qid, hash_texts(prefix)}] = paths;
  records_.push_back(json{{"question_id", qid}, {"kind", "rollout"}, {"prefix", prefix}, {"paths", paths}});
}

void Script::add_critique(const std::string& qid, const std::vector<std::string>& answer_steps,
                          std::vector<CriticVerdict> verdicts) {
  critiques_[Key{qid, hash_texts(answer_steps)}] = verdicts;
  records_.push_back(
      json{{"question_id", qid}, {"kind", "critique"}, {"prefix", answer_steps}, {"verdicts", verdicts}});
}

void Script::add_refine(const std::string& qid, const std::vector<std::string>& answer_steps,
                        std::vector<std::vector<std::string>> paths) {
  refinements_[Key{qid, hash_texts(answer_steps)}] = paths;
  records_.push_back(
      json{{"question_id", qid}, {"kind", "refine"}, {"prefix", answer_steps}, {"paths", paths}});
}

void Script::add_annotation(const std::string& qid, const std::vector<std::string>& branch_a,
                            const std::vector<std::string>& branch_b,
                            std::vector<std::string> items) {
  annotations_[Key{qid, annotate_hash(branch_a, branch_b)}] = items;
  records_.push_back(json{{"question_id", qid},
                          {"kind", "annotate"},
                          {"branch_a", branch_a},
                          {"branch_b", branch_b},
                          {"items", items}});
}

void Script::add_judge(const std::string& predicted, const std::string& ground_truth, bool match) {
  judgments_[Key{std::string{}, hash_texts({predicted, ground_truth})}] = match;
  records_.push_back(json{{"question_id", ""},
                          {"kind", "judge"},
                          {"predicted", predicted},
                          {"ground_truth", ground_truth},
                          {"match", match}});
}

std::uint64_t Script::annotate_hash(const std::vector<std::string>& branch_a,
                                    const std::vector<std::string>& branch_b) {
  std::vector<std::string> combined = branch_a;
  combined.push_back("\x1e");
  combined.insert(combined.end(), branch_b.begin(), branch_b.end());
  return hash_texts(combined);
}

Script Script::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GatewayError("cannot open script file: " + path);
  Script script;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw GatewayError("script " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    std::string kind = j.value("kind", std::string{});
    std::string qid = j.value("question_id", std::string{});
    if (kind == "steps") {
      script.add_steps(qid, j.at("prefix").get<std::vector<std::string>>(),
                       j.at("items").get<std::vector<std::string>>());
    } else if (kind == "rollout") {
      script.add_rollout(qid, j.at("prefix").get<std::vector<std::string>>(),
                         j.at("paths").get<std::vector<std::vector<std::string>>>());
    } else if (kind == "critique") {
      script.add_critique(qid, j.at("prefix").get<std::vector<std::string>>(),
                          j.at("verdicts").get<std::vector<CriticVerdict>>());
    } else if (kind == "refine") {
      script.add_refine(qid, j.at("prefix").get<std::vector<std::string>>(),
                        j.at("paths").get<std::vector<std::vector<std::string>>>());
    } else if (kind == "annotate") {
      script.add_annotation(qid, j.at("branch_a").get<std::vector<std::string>>(),
                            j.at("branch_b").get<std::vector<std::string>>(),
                            j.at("items").get<std::vector<std::string>>());
    } else if (kind == "judge") {
      script.add_judge(j.at("predicted").get<std::string>(),
                       j.at("ground_truth").get<std::string>(), j.at("match").get<bool>());
    } else {
      throw GatewayError("script " + path + " line " + std::to_string(line_no) +
                         ": unknown kind \"" + kind + "\"");
    }
  }
  return script;
}

void Script::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw GatewayError("cannot write script file: " + path);
  for (const json& record : records_) out << record.dump() << '\n';
}

json Script::to_json_lines() const {
  return json(records_);
}

const std::vector<std::string>* Script::find_steps(const Key& k) const {
  auto it = steps_.find(k);
  return it == steps_.end() ? nullptr : &it->second;
}

const std::vector<std::vector<std::string>>* Script::find_rollout(const Key& k) const {
  auto it = rollouts_.find(k);
  return it == rollouts_.end() ? nullptr : &it->second;
}

const std::vector<CriticVerdict>* Script::find_critique(const Key& k) const {
  auto it = critiques_.find(k);
  return it == critiques_.end() ? nullptr : &it->second;
}

const std::vector<std::vector<std::string>>* Script::find_refine(const Key& k) const {
  auto it = refinements_.find(k);
  return it == refinements_.end() ? nullptr : &it->second;
}

const std::vector<std::string>* Script::find_annotation(const Key& k) const {
  auto it = annotations_.find(k);
  return it == annotations_.end() ? nullptr : &it->second;
}

const bool* Script::find_judgment(const Key& k) const {
  auto it = judgments_.find(k);
  return it == judgments_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// ScriptedBackend
// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(Script script, MockOptions options)
    : script_(std::move(script)), options_(std::move(options)) {}

void ScriptedBackend::miss(const std::string& what, const Script::Key& key) const {
  throw ScriptMissError("no scripted " + what + " for question \"" + key.question_id +
                        "\" prefix " + hex64(key.prefix_hash));
}

std::vector<Step> ScriptedBackend::generate_steps(const GenerationRequest& req) {
  ++generate_calls_;
  Script::Key key{req.question.id, hash_texts(step_texts(req.prior_steps))};
  const auto* items = script_.find_steps(key);
  if (!items && options_.default_behavior == MockDefault::fail) miss("steps", key);

  std::vector<Step> out;
  out.reserve(static_cast<std::size_t>(req.n_samples));
  for (int i = 0; i < req.n_samples; ++i) {
    std::string raw;
    if (items && !items->empty()) {
      raw = (*items)[static_cast<std::size_t>(i) % items->size()];
    } else {
      std::uint64_t h = mix64(key.prefix_hash ^ options_.seed ^ static_cast<std::uint64_t>(i));
      raw = "Consider case " + hex64(h).substr(0, 6) + "-" + std::to_string(i) + ".";
    }
    if (raw == kTransportErrorToken) throw TransportError("scripted transport failure");
    out.push_back(make_step(raw, req.max_new_tokens, options_.answer_marker));
  }
  return out;
}

ReasoningPath ScriptedBackend::assemble_path(const Question& question, const std::vector<Step>& prior,
                                             const std::vector<std::string>& completion, int budget,
                                             PathSource source) const {
  ReasoningPath path;
  path.question_id = question.id;
  path.steps = prior;
  path.source = source;
  int used = 0;
  for (const std::string& text : completion) {
    if (text == kTransportErrorToken) throw TransportError("scripted transport failure");
    int remaining = budget - used;
    if (remaining <= 0) break;
    Step step = make_step(text, std::min(options_.step_token_cap, remaining), options_.answer_marker);
    path.steps.push_back(step);
    used += step.token_count;
    if (step.is_terminal) break;
  }
  if (!path.steps.empty() && path.steps.back().is_terminal)
    path.final_answer = extract_marked_answer(path.steps.back().text, options_.answer_marker);
  return path;
}

ReasoningPath ScriptedBackend::rollout(const Question& question, const std::vector<Step>& prior_steps,
                                       int budget, std::uint64_t sample_index) {
  ++rollout_calls_;
  if (auto done = completed_path(question, prior_steps, options_.answer_marker)) return *done;

  Script::Key key{question.id, hash_texts(step_texts(prior_steps))};
  const auto* paths = script_.find_rollout(key);
  std::vector<std::string> completion;
  if (paths && !paths->empty()) {
    completion = (*paths)[sample_index % paths->size()];
  } else if (options_.default_behavior == MockDefault::echo) {
    completion = {std::string(options_.answer_marker) + " unknown"};
  } else {
    miss("rollout", key);
  }
  return assemble_path(question, prior_steps, completion, budget, PathSource::rollout);
}

CriticVerdict ScriptedBackend::critique(const Question& question, const ReasoningPath& answer) {
  ++critique_calls_;
  Script::Key key{question.id, hash_texts(step_texts(answer.steps))};
  const auto* verdicts = script_.find_critique(key);
  if (verdicts && !verdicts->empty()) {
    CriticVerdict v = verdicts->front();
    if (v.critique == kTransportErrorToken) throw TransportError("scripted transport failure");
    return v;
  }
  if (options_.default_behavior == MockDefault::fail) miss("critique", key);
  // Echo mode plays a self-consistent critic: correct answers pass, others fail.
  bool correct = answer.final_answer && grade_answers(*answer.final_answer, question.ground_truth);
  if (correct) return CriticVerdict{kNoCorrectionsNeeded, 1.0};
  return CriticVerdict{"The final answer does not follow from the steps; recheck the reasoning.", 0.0};
}

ReasoningPath ScriptedBackend::refine(const Question& question, const ReasoningPath& answer,
                                      const std::string& critique, std::uint64_t attempt) {
  ++refine_calls_;
  (void)critique;
  Script::Key key{question.id, hash_texts(step_texts(answer.steps))};
  const auto* paths = script_.find_refine(key);
  if (!paths || paths->empty()) {
    if (options_.default_behavior == MockDefault::fail) miss("refine", key);
    ReasoningPath echoed = answer;
    echoed.question_id = question.id;
    echoed.source = PathSource::refined;
    return echoed;
  }
  const auto& texts = (*paths)[attempt % paths->size()];
  return assemble_path(question, {}, texts, std::numeric_limits<int>::max(), PathSource::refined);
}

std::string ScriptedBackend::annotate(const Question& question, const DivergencePair& pair) {
  ++annotate_calls_;
  Script::Key key{question.id,
                  Script::annotate_hash(step_texts(pair.branch_a), step_texts(pair.branch_b))};
  const auto* items = script_.find_annotation(key);
  std::string text;
  if (items && !items->empty()) {
    text = items->front();
  } else if (options_.default_behavior == MockDefault::echo) {
    text = "Branch B goes wrong at its first step after the shared prefix; re-examine that step.";
  } else {
    miss("annotation", key);
  }
  if (text == kTransportErrorToken) throw TransportError("scripted transport failure");
  if (trim(text).empty()) throw EmptyReplyError("annotator returned empty text");

  std::optional<std::string> reference_answer;
  if (!pair.branch_a.empty())
    reference_answer = extract_marked_answer(pair.branch_a.back().text, options_.answer_marker);
  if (reference_answer) text = redact_answer(std::move(text), *reference_answer);
  return text;
}

bool ScriptedBackend::judge(const std::string& predicted, const std::string& ground_truth) {
  ++judge_calls_;
  Script::Key key{std::string{}, hash_texts({predicted, ground_truth})};
  if (const bool* match = script_.find_judgment(key)) return *match;
  if (options_.default_behavior == MockDefault::fail) miss("judgment", key);
  return grade_answers(predicted, ground_truth);
}

ScriptedBackend::CallCounts ScriptedBackend::call_counts() const {
  return CallCounts{generate_calls_.load(), rollout_calls_.load(), critique_calls_.load(),
                    refine_calls_.load(),   annotate_calls_.load(), judge_calls_.load()};
}

}  // namespace treecrit
