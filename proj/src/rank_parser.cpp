#include "listrank/rank_parser.hpp"

#include <algorithm>
#include <limits>

namespace listrank {

Permutation::Permutation(std::vector<int> order) : order_(std::move(order)) {
  if (!is_valid(order_))
    throw Error("not a permutation of 1.." + std::to_string(order_.size()));
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i)
    order[i] = static_cast<int>(i + 1);
  return Permutation(std::move(order));
}

bool Permutation::is_valid(std::span<const int> order) {
  std::vector<char> seen(order.size() + 1, 0);
  for (int v : order) {
    if (v < 1 || static_cast<std::size_t>(v) > order.size() || seen[v])
      return false;
    seen[v] = 1;
  }
  return true;
}

Permutation Permutation::inverse() const {
  std::vector<int> inv(order_.size());
  for (std::size_t j = 0; j < order_.size(); ++j)
    inv[order_[j] - 1] = static_cast<int>(j + 1);
  return Permutation(std::move(inv));
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < order_.size(); ++i)
    if (order_[i] != static_cast<int>(i + 1))
      return false;
  return true;
}

namespace rank_parser {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

struct Identifier {
  std::size_t value; // saturated; anything past int range is out of range
  std::size_t begin; // position of the digit run
  std::size_t end;
};

std::vector<Identifier> extract(std::string_view text) {
  constexpr std::size_t kSaturate = std::numeric_limits<int>::max();
  std::vector<Identifier> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::size_t value = 0;
    while (j < text.size() && is_digit(text[j])) {
      value = std::min(kSaturate, value * 10 + static_cast<std::size_t>(
                                                   text[j] - '0'));
      ++j;
    }
    ids.push_back({value, i, j});
    i = j;
  }
  return ids;
}

// Counts stretches of the trimmed completion that deviate from the
// canonical "[a] > [b] > ..." form: text before the first bracketed
// identifier, after the last one, any separator other than " > ", and
// identifiers written without brackets or with leading zeros.
std::size_t count_garbage(std::string_view text,
                          const std::vector<Identifier> &ids) {
  std::size_t lo = 0;
  std::size_t hi = text.size();
  while (lo < hi && is_space(text[lo]))
    ++lo;
  while (hi > lo && is_space(text[hi - 1]))
    --hi;
  std::size_t garbage = 0;
  std::size_t cursor = lo; // end of the last canonical token
  bool any_token = false;
  for (const auto &id : ids) {
    const bool bracketed = id.begin > lo && text[id.begin - 1] == '[' &&
                           id.end < hi && text[id.end] == ']';
    const bool leading_zero = text[id.begin] == '0';
    if (!bracketed || leading_zero)
      continue; // absorbed into the surrounding gap
    const std::size_t token_begin = id.begin - 1;
    auto gap = text.substr(cursor, token_begin - cursor);
    if (any_token ? gap != " > " : !gap.empty())
      ++garbage;
    cursor = id.end + 1;
    any_token = true;
  }
  if (cursor < hi)
    ++garbage;
  return garbage;
}

} // namespace

ParseReport parse(std::string_view completion, std::size_t n) {
  if (n == 0)
    throw Error("window size must be >= 1");
  const auto ids = extract(completion);
  ParseAnomalies anomalies;
  anomalies.garbage_text = count_garbage(completion, ids);

  std::vector<char> seen_in_range(n + 1, 0);
  std::vector<std::size_t> seen_out_of_range;
  std::vector<int> order;
  order.reserve(n);
  for (const auto &id : ids) {
    if (id.value >= 1 && id.value <= n) {
      if (seen_in_range[id.value]) {
        ++anomalies.duplicate;
        continue;
      }
      seen_in_range[id.value] = 1;
      order.push_back(static_cast<int>(id.value));
    } else {
      if (std::find(seen_out_of_range.begin(), seen_out_of_range.end(),
                    id.value) != seen_out_of_range.end()) {
        ++anomalies.duplicate;
        continue;
      }
      seen_out_of_range.push_back(id.value);
      ++anomalies.out_of_range;
    }
  }
  if (order.empty())
    throw ParseError("completion contains no identifier in [1, " +
                     std::to_string(n) + "]");
  for (std::size_t v = 1; v <= n; ++v)
    if (!seen_in_range[v]) {
      order.push_back(static_cast<int>(v));
      ++anomalies.missing;
    }
  ParseReport report{Permutation(std::move(order)), false, anomalies};
  report.repaired = anomalies.total() > 0;
  return report;
}

std::vector<std::string> to_ranked_list(const Permutation &permutation,
                                        std::span<const std::string> window) {
  return permutation.apply(window);
}

} // namespace rank_parser
} // namespace listrank
