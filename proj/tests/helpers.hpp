#pragma once

// Shared fixtures for the test suites: temp directories, tiny generators,
// and scripted-environment builders.

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "treecrit/gateway.hpp"
#include "treecrit/mcts.hpp"
#include "treecrit/types.hpp"

namespace treecrit::test {

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("treecrit_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Question make_question(const std::string& id, const std::string& gt,
                              const std::string& text = "") {
  Question q;
  q.id = id;
  q.text = text.empty() ? ("What is the value shown for " + id + "?") : text;
  q.ground_truth = gt;
  return q;
}

inline Step step_of(const std::string& text, bool terminal = false) {
  return Step{text, count_tokens(text), terminal};
}

inline std::vector<Step> steps_of(const std::vector<std::string>& texts) {
  std::vector<Step> out;
  for (const auto& t : texts) {
    bool terminal = contains_marker(t, kDefaultAnswerMarker);
    out.push_back(step_of(t, terminal));
  }
  return out;
}

inline ReasoningPath path_of(const std::string& qid, const std::vector<std::string>& texts,
                             PathSource source = PathSource::search_tree) {
  ReasoningPath p;
  p.question_id = qid;
  p.steps = steps_of(texts);
  p.source = source;
  if (!p.steps.empty() && p.steps.back().is_terminal)
    p.final_answer = extract_marked_answer(p.steps.back().text, kDefaultAnswerMarker);
  return p;
}

inline std::string random_word(std::mt19937_64& rng) {
  static const char* words[] = {"read", "chart", "axis",  "bar",   "sum",  "count",
                                "blue", "red",   "left",  "right", "peak", "label",
                                "cell", "row",   "total", "half",  "area", "line"};
  return words[rng() % (sizeof(words) / sizeof(words[0]))];
}

inline std::string random_sentence(std::mt19937_64& rng, int words) {
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += random_word(rng);
  }
  out += '.';
  return out;
}

}  // namespace treecrit::test
