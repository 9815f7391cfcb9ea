#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "listrank/corpus_io.hpp"

namespace listrank::metrics {

enum class Gain { linear, exponential };

struct MetricReport {
  std::string name; // e.g. "ndcg@10"
  std::size_t cutoff = 0;
  std::map<std::string, double> per_query;
  double mean = 0.0;
  std::vector<std::string> excluded; // queries without any relevant judgment
};

// DCG over the run's top k with g(r) = r or 2^r - 1 and a log2(i + 1)
// discount, divided by the ideal DCG over all judged passages of the query.
// Unjudged passages count as grade 0. Only queries present in both inputs
// are scored; throws when there are none.
MetricReport ndcg_at_k(const Run &run, const Qrels &qrels, std::size_t k,
                       Gain gain = Gain::linear);

// Fraction of the top k with any judgment (grade 0 included). The
// denominator is always k.
MetricReport judged_at_k(const Run &run, const Qrels &qrels, std::size_t k);

// Union of judgments. Throws listing every pair whose grades disagree.
Qrels merge_qrels(const Qrels &base, const Qrels &additions);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0; // two-tailed, floored at kMinPValue
  std::size_t n = 0;
  double mean_difference = 0.0;
};

inline constexpr double kMinPValue = 1e-12;

// Paired t-test on per-query differences a - b. A zero-variance difference
// gives t = 0, p = 1 when the mean is zero, otherwise t = +-inf and p at the
// floor.
TTestResult paired_ttest(const MetricReport &a, const MetricReport &b);

// Regularized incomplete beta I_x(a, b), by continued fraction.
double incomplete_beta(double a, double b, double x);

// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_tailed(double t, double dof);

// Parses "ndcg@10", "ndcg_exp@10" or "judged@10" and evaluates it.
MetricReport evaluate(const std::string &metric, const Run &run,
                      const Qrels &qrels);

} // namespace listrank::metrics
