#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace listrank {

class Permutation;

namespace prompting {

inline constexpr std::size_t kMaxWindow = 100;

// Listwise instruction prompt. Parsed from text in which the passage block
// is written as a `[1] {title 1} {passage 1}` line, optional example lines,
// and a closing `[{num}] ...` line. The `[1]` line is the shape used for
// every passage. Header and footer may reference {num} and {query}.
class PromptTemplate {
public:
  static PromptTemplate standard();
  static PromptTemplate parse(std::string_view text);
  static PromptTemplate load(const std::filesystem::path &path);

  const std::string &header() const { return header_; }
  const std::string &passage_line() const { return passage_line_; }
  const std::string &footer() const { return footer_; }

private:
  std::string header_;
  std::string passage_line_; // uses {i}, {title}, {passage}
  std::string footer_;
};

// The embedded default template text.
std::string_view standard_template_text();

struct PromptBudget {
  std::size_t max_units = 4096;
  std::size_t per_passage_cap = 120;
  void validate() const;
};

struct PromptPassage {
  std::string_view title;
  std::string_view body;
};

struct RenderedPrompt {
  std::string text;
  std::size_t passage_cap = 0; // cap in effect after budget fitting
  std::size_t units = 0;
};

// Collapses whitespace runs into single spaces and keeps at most `max_words`
// words.
std::string truncate_words(std::string_view text, std::size_t max_words);

std::size_t count_words(std::string_view text);

// ceil(words * 1.5)
std::size_t estimate_units(std::string_view text);

// Renders a window with identifiers [1]..[n]. Halves the per-passage cap
// (floor 8) until the estimate fits the budget; throws when it cannot.
RenderedPrompt render(const PromptTemplate &tmpl, std::string_view query,
                      std::span<const PromptPassage> passages,
                      const PromptBudget &budget);

// "[4] > [5] > [2]" style completion.
std::string render_completion(const Permutation &permutation);

} // namespace prompting
} // namespace listrank
