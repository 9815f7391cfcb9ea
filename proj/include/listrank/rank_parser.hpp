#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "listrank/error.hpp"

namespace listrank {

// A bijection on {1..n}, stored as the 1-based slot order a listwise model
// emits: order()[j] is the window slot placed at output position j.
class Permutation {
public:
  // Throws unless `order` is a bijection on {1..order.size()}.
  explicit Permutation(std::vector<int> order);
  static Permutation identity(std::size_t n);

  static bool is_valid(std::span<const int> order);

  const std::vector<int> &order() const { return order_; }
  std::size_t size() const { return order_.size(); }
  Permutation inverse() const;
  bool is_identity() const;

  // out[j] = items[order[j] - 1]
  template <typename T>
  std::vector<T> apply(std::span<const T> items) const {
    if (items.size() != order_.size())
      throw Error("permutation of size " + std::to_string(order_.size()) +
                  " applied to " + std::to_string(items.size()) + " items");
    std::vector<T> out;
    out.reserve(items.size());
    for (int slot : order_)
      out.push_back(items[static_cast<std::size_t>(slot - 1)]);
    return out;
  }

  bool operator==(const Permutation &) const = default;

private:
  std::vector<int> order_;
};

struct ParseAnomalies {
  std::size_t duplicate = 0;    // repeated identifiers dropped
  std::size_t out_of_range = 0; // identifiers outside [1, n] dropped
  std::size_t missing = 0;      // identifiers appended in ascending order
  std::size_t garbage_text = 0; // stretches of text outside "[a] > [b]" form
  std::size_t total() const {
    return duplicate + out_of_range + missing + garbage_text;
  }
  bool operator==(const ParseAnomalies &) const = default;
};

struct ParseReport {
  Permutation permutation;
  bool repaired = false;
  ParseAnomalies anomalies;
};

namespace rank_parser {

// Extracts every maximal digit run in order, keeps the first occurrence of
// each value, drops values outside [1, n], then appends the missing values in
// ascending order. Throws ParseError when no identifier survives.
ParseReport parse(std::string_view completion, std::size_t n);

// Reorders window ids by a parsed permutation.
std::vector<std::string> to_ranked_list(const Permutation &permutation,
                                        std::span<const std::string> window);

} // namespace rank_parser
} // namespace listrank
