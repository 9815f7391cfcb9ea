#include "listrank/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "listrank/error.hpp"
#include "listrank/file_util.hpp"

namespace listrank::analysis {

std::string GradeFilter::to_string() const {
  return (mode == Mode::at_least ? "min:" : "") + std::to_string(grade);
}

GradeFilter GradeFilter::parse(std::string_view text) {
  GradeFilter f;
  std::string_view digits = text;
  if (text.starts_with("min:")) {
    f.mode = Mode::at_least;
    digits = text.substr(4);
  } else {
    f.mode = Mode::exactly;
  }
  auto [ptr, ec] =
      std::from_chars(digits.data(), digits.data() + digits.size(), f.grade);
  if (ec != std::errc() || ptr != digits.data() + digits.size() ||
      f.grade < 1 || f.grade > kMaxGrade)
    throw Error("grade filter '" + std::string(text) +
                "' must be 1, 2, 3 or min:<1-3>");
  return f;
}

MovementMatrix::MovementMatrix(std::size_t k, GradeFilter filter)
    : k_(k), filter_(filter), counts_(k * k, 0) {}

std::uint64_t MovementMatrix::at(std::size_t y, std::size_t x) const {
  return counts_.at(y * k_ + x);
}

void MovementMatrix::add(std::size_t y, std::size_t x, std::uint64_t count) {
  counts_.at(y * k_ + x) += count;
}

std::uint64_t MovementMatrix::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts_)
    sum += c;
  return sum;
}

MovementMatrix movement_matrix(const Run &before, const Run &after,
                               const Qrels &qrels, std::size_t k,
                               const GradeFilter &filter) {
  if (k == 0)
    throw Error("movement matrix cutoff must be >= 1");
  if (before.size() != after.size())
    throw Error("runs cover different query sets (" +
                std::to_string(before.size()) + " vs " +
                std::to_string(after.size()) + " queries)");
  MovementMatrix matrix(k, filter);
  for (const auto &b : before) {
    const auto *a = find_list(after, b.query_id);
    if (!a)
      throw Error("query " + b.query_id + " missing from the reranked run");
    if (a->entries.size() != b.entries.size())
      throw Error("query " + b.query_id + ": runs hold different passages");
    std::unordered_map<std::string_view, std::size_t> after_pos;
    for (std::size_t i = 0; i < a->entries.size(); ++i)
      after_pos.emplace(a->entries[i].passage_id, i);
    for (const auto &e : b.entries)
      if (!after_pos.count(e.passage_id))
        throw Error("query " + b.query_id + ": passage '" + e.passage_id +
                    "' missing after reranking");
    const auto *judged = qrels.judgments(b.query_id);
    if (!judged)
      continue;
    auto relevant = [&](const std::string &pid) {
      auto it = judged->find(pid);
      return it != judged->end() && filter.accepts(it->second);
    };
    for (std::size_t y = 0; y < b.entries.size(); ++y) {
      const auto &pid = b.entries[y].passage_id;
      if (!relevant(pid))
        continue;
      const std::size_t x = after_pos.at(pid);
      if (y < k && x < k)
        matrix.add(y, x);
      else if (y < k)
        ++matrix.left_top_k;
      else if (x < k)
        ++matrix.entered_top_k;
    }
  }
  return matrix;
}

BlockStats block_stats(const MovementMatrix &matrix, std::size_t n,
                       std::size_t m) {
  if (n < 1 || m < 1)
    throw Error("block size and stride must be >= 1");
  BlockStats stats;
  stats.block_size = n;
  stats.stride = m;
  const auto total = matrix.total();
  if (total == 0)
    return stats;
  std::uint64_t in_block = 0;
  std::uint64_t long_promotion = 0;
  for (std::size_t y = 0; y < matrix.k(); ++y)
    for (std::size_t x = 0; x < matrix.k(); ++x) {
      const auto c = matrix.at(y, x);
      if (!c)
        continue;
      const auto lo = std::min(x, y);
      const auto hi = std::max(x, y);
      // The last block starting at or before lo is the only candidate.
      if ((lo / m) * m + n > hi)
        in_block += c;
      if (x + n < y)
        long_promotion += c;
    }
  stats.diagonal_block_mass =
      static_cast<double>(in_block) / static_cast<double>(total);
  stats.long_promotion_mass =
      static_cast<double>(long_promotion) / static_cast<double>(total);
  return stats;
}

void write_csv(const MovementMatrix &matrix, std::ostream &out) {
  const auto k = matrix.k();
  for (std::size_t x = 0; x < k; ++x)
    out << (x ? "," : "") << x + 1;
  out << '\n';
  for (std::size_t y = 0; y < k; ++y) {
    for (std::size_t x = 0; x < k; ++x)
      out << (x ? "," : "") << matrix.at(y, x);
    out << '\n';
  }
}

void export_matrix(const MovementMatrix &matrix,
                   const std::filesystem::path &path) {
  write_file_atomic(path, [&](std::ostream &out) { write_csv(matrix, out); });
}

namespace {

std::vector<std::uint64_t> parse_row(const std::string &line,
                                     std::size_t lineno) {
  std::vector<std::uint64_t> values;
  std::size_t start = 0;
  while (start <= line.size()) {
    auto comma = line.find(',', start);
    auto end = comma == std::string::npos ? line.size() : comma;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(line.data() + start, line.data() + end, v);
    if (ec != std::errc() || ptr != line.data() + end)
      throw ParseError("expected a non-negative integer", lineno);
    values.push_back(v);
    if (comma == std::string::npos)
      break;
    start = comma + 1;
  }
  return values;
}

} // namespace

MovementMatrix read_csv(std::istream &in) {
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("empty matrix file");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  const auto header = parse_row(line, 1);
  const std::size_t k = header.size();
  for (std::size_t x = 0; x < k; ++x)
    if (header[x] != x + 1)
      throw ParseError("header must list positions 1..k", 1);
  MovementMatrix matrix(k);
  std::size_t y = 0;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (y >= k)
      throw ParseError("more than k rows", lineno);
    const auto row = parse_row(line, lineno);
    if (row.size() != k)
      throw ParseError("row has " + std::to_string(row.size()) +
                           " columns, expected " + std::to_string(k),
                       lineno);
    for (std::size_t x = 0; x < k; ++x)
      matrix.add(y, x, row[x]);
    ++y;
  }
  if (y != k)
    throw ParseError("expected " + std::to_string(k) + " rows, found " +
                     std::to_string(y));
  return matrix;
}

MovementMatrix import_matrix(const std::filesystem::path &path) {
  auto in = open_input(path);
  return read_csv(in);
}

} // namespace listrank::analysis
