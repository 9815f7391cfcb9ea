#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "listrank/corpus_io.hpp"

namespace listrank::analysis {

// Which judged passages count as relevant: grade >= g, or grade == g.
struct GradeFilter {
  enum class Mode { at_least, exactly };
  Mode mode = Mode::at_least;
  int grade = 1;

  bool accepts(int g) const {
    return mode == Mode::at_least ? g >= grade : g == grade;
  }
  std::string to_string() const;
  // "1", "2", "3" select an exact level; "min:1" a lower bound.
  static GradeFilter parse(std::string_view text);
};

// counts(y, x): relevant passages at first-stage position y and reranked
// position x, both 0-based and below k.
class MovementMatrix {
public:
  explicit MovementMatrix(std::size_t k = 0, GradeFilter filter = {});

  std::size_t k() const { return k_; }
  const GradeFilter &filter() const { return filter_; }
  std::uint64_t at(std::size_t y, std::size_t x) const;
  void add(std::size_t y, std::size_t x, std::uint64_t count = 1);
  std::uint64_t total() const;

  // Relevant pairs inside top-k before but not after, and the reverse.
  std::size_t left_top_k = 0;
  std::size_t entered_top_k = 0;

  bool same_counts(const MovementMatrix &other) const {
    return k_ == other.k_ && counts_ == other.counts_;
  }

private:
  std::size_t k_;
  GradeFilter filter_;
  std::vector<std::uint64_t> counts_;
};

// Both runs must hold the same queries, each with the same passage ids.
MovementMatrix movement_matrix(const Run &before, const Run &after,
                               const Qrels &qrels, std::size_t k,
                               const GradeFilter &filter = {});

struct BlockStats {
  std::size_t block_size = 0; // n
  std::size_t stride = 0;     // m
  double diagonal_block_mass = 0.0; // inside some [b m, b m + n)^2 block
  double long_promotion_mass = 0.0; // reranked position x < y - n
};

// Both fractions are 0 for an empty matrix.
BlockStats block_stats(const MovementMatrix &matrix, std::size_t n,
                       std::size_t m);

// Header row "1,...,k" then k rows of k counts.
void write_csv(const MovementMatrix &matrix, std::ostream &out);
void export_matrix(const MovementMatrix &matrix,
                   const std::filesystem::path &path);
MovementMatrix read_csv(std::istream &in);
MovementMatrix import_matrix(const std::filesystem::path &path);

} // namespace listrank::analysis
