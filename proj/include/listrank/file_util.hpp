#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

namespace listrank {

// Writes through a temporary sibling file and renames it over `path`, so a
// failed write never leaves a partial artifact behind.
void write_file_atomic(const std::filesystem::path &path,
                       const std::function<void(std::ostream &)> &writer);

std::string read_file(const std::filesystem::path &path);

// Opens `path` for reading or throws an Error naming it.
std::ifstream open_input(const std::filesystem::path &path);

// 64-bit FNV-1a, stable across platforms and runs.
class StableHash {
public:
  StableHash &add(std::string_view bytes);
  StableHash &add(std::uint64_t value);
  std::uint64_t value() const { return state_; }

private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

// splitmix64: small deterministic generator whose output does not depend on
// the standard library implementation.
class SplitMix64 {
public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t operator()();
  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  // Uniform real in [0, 1).
  double unit();
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

private:
  std::uint64_t state_;
};

template <typename Container>
void seeded_shuffle(Container &items, SplitMix64 &rng) {
  using std::swap;
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.below(i));
    swap(items[i - 1], items[j]);
  }
}

// Runs fn(i) for i in [0, count) on up to `workers` threads. Exceptions from
// fn are rethrown on the calling thread after all workers join.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)> &fn);

} // namespace listrank
