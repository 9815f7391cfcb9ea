#include "listrank/prompting.hpp"

#include <algorithm>
#include <vector>

#include "listrank/error.hpp"
#include "listrank/file_util.hpp"
#include "listrank/rank_parser.hpp"

namespace listrank::prompting {

namespace {

constexpr std::string_view kStandardTemplate =
    "USER: I will provide you with {num} passages, each\n"
    "indicated by a numerical identifier []. Rank the\n"
    "passages based on their relevance to the search\n"
    "query: {query}.\n"
    "[1] {title 1} {passage 1}\n"
    "[2] {title 2} {passage 2}\n"
    "...\n"
    "[{num}] {passage {num}}\n"
    "Search Query: {query}.\n"
    "Rank the {num} passages above based on their\n"
    "relevance to the search query. All the passages\n"
    "should be included and listed using identifiers, in\n"
    "descending order of relevance. The output format\n"
    "should be [] > [], e.g., [4] > [2]. Only respond\n"
    "with the ranking results, do not say any word\n"
    "or explain.";

constexpr std::size_t kMinPassageCap = 8;

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string join_lines(std::span<const std::string_view> lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i)
      out += '\n';
    out += lines[i];
  }
  return out;
}

void replace_all(std::string &s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

struct Binding {
  std::string_view name;
  std::string_view value;
};

// Single pass over `text`, so substituted values are never rescanned.
std::string substitute(std::string_view text,
                       std::initializer_list<Binding> bindings) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      auto close = text.find('}', i);
      if (close != std::string_view::npos) {
        auto name = text.substr(i + 1, close - i - 1);
        auto it = std::find_if(bindings.begin(), bindings.end(),
                               [&](const Binding &b) { return b.name == name; });
        if (it != bindings.end()) {
          out += it->value;
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

} // namespace

std::string_view standard_template_text() { return kStandardTemplate; }

PromptTemplate PromptTemplate::standard() { return parse(kStandardTemplate); }

PromptTemplate PromptTemplate::parse(std::string_view text) {
  // Trailing newline in a template file is not part of the prompt.
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
    text.remove_suffix(1);
  auto lines = split_lines(text);
  for (auto &line : lines)
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
  auto first = std::find_if(lines.begin(), lines.end(), [](std::string_view l) {
    return l.starts_with("[1]") && l.find("{passage 1}") != l.npos;
  });
  if (first == lines.end())
    throw ParseError("template has no '[1] ... {passage 1}' line");
  auto last = std::find_if(first, lines.end(), [](std::string_view l) {
    return l.starts_with("[{num}]");
  });
  if (last == lines.end())
    throw ParseError("template has no closing '[{num}] ...' line");

  PromptTemplate t;
  t.header_ = join_lines({lines.begin(), first});
  t.footer_ = join_lines({last + 1, lines.end()});
  std::string line(*first);
  line.replace(0, 3, "[{i}]");
  replace_all(line, "{title 1}", "{title}");
  replace_all(line, "{passage 1}", "{passage}");
  t.passage_line_ = std::move(line);
  return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path &path) {
  try {
    return parse(read_file(path));
  } catch (const Error &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void PromptBudget::validate() const {
  if (max_units == 0)
    throw Error("prompt budget max_units must be > 0");
  if (per_passage_cap == 0)
    throw Error("prompt budget per_passage_cap must be > 0");
}

std::string truncate_words(std::string_view text, std::size_t max_words) {
  std::string out;
  std::size_t words = 0;
  std::size_t i = 0;
  while (i < text.size() && words < max_words) {
    while (i < text.size() && is_space(text[i]))
      ++i;
    if (i == text.size())
      break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j]))
      ++j;
    if (words)
      out += ' ';
    out.append(text.substr(i, j - i));
    ++words;
    i = j;
  }
  return out;
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

std::size_t estimate_units(std::string_view text) {
  return (3 * count_words(text) + 1) / 2;
}

namespace {

std::string render_with_cap(const PromptTemplate &tmpl, std::string_view query,
                            std::span<const PromptPassage> passages,
                            std::size_t cap) {
  const std::string num = std::to_string(passages.size());
  const std::string clean_query =
      truncate_words(query, static_cast<std::size_t>(-1));
  std::string out;
  auto append_block = [&](const std::string &block) {
    if (block.empty())
      return;
    if (!out.empty())
      out += '\n';
    out += substitute(block, {{"num", num}, {"query", clean_query}});
  };
  append_block(tmpl.header());
  for (std::size_t i = 0; i < passages.size(); ++i) {
    const std::string id = std::to_string(i + 1);
    const std::string title =
        truncate_words(passages[i].title, static_cast<std::size_t>(-1));
    const std::string body = truncate_words(passages[i].body, cap);
    if (!out.empty())
      out += '\n';
    out += substitute(tmpl.passage_line(),
                      {{"i", id}, {"title", title}, {"passage", body}});
  }
  append_block(tmpl.footer());
  return out;
}

} // namespace

RenderedPrompt render(const PromptTemplate &tmpl, std::string_view query,
                      std::span<const PromptPassage> passages,
                      const PromptBudget &budget) {
  budget.validate();
  if (passages.empty())
    throw Error("cannot render a prompt for an empty window");
  if (passages.size() > kMaxWindow)
    throw Error("window of " + std::to_string(passages.size()) +
                " passages exceeds the maximum of " +
                std::to_string(kMaxWindow));
  std::size_t cap = budget.per_passage_cap;
  for (;;) {
    RenderedPrompt prompt{render_with_cap(tmpl, query, passages, cap), cap, 0};
    prompt.units = estimate_units(prompt.text);
    if (prompt.units <= budget.max_units)
      return prompt;
    if (cap <= kMinPassageCap)
      throw Error("prompt needs " + std::to_string(prompt.units) +
                  " units at a passage cap of " + std::to_string(cap) +
                  ", budget is " + std::to_string(budget.max_units));
    cap = std::max(cap / 2, kMinPassageCap);
  }
}

std::string render_completion(const Permutation &permutation) {
  std::string out;
  for (std::size_t i = 0; i < permutation.size(); ++i) {
    if (i)
      out += " > ";
    out += '[';
    out += std::to_string(permutation.order()[i]);
    out += ']';
  }
  return out;
}

} // namespace listrank::prompting
