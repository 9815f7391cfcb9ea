#include "listrank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "listrank/error.hpp"

namespace listrank::metrics {

namespace {

double gain_of(int grade, Gain gain) {
  if (grade <= 0)
    return 0.0;
  return gain == Gain::linear ? static_cast<double>(grade)
                              : std::exp2(static_cast<double>(grade)) - 1.0;
}

double discount(std::size_t position) { // 1-based
  return 1.0 / std::log2(static_cast<double>(position) + 1.0);
}

void finish(MetricReport &report) {
  double sum = 0.0;
  for (const auto &[q, v] : report.per_query)
    sum += v;
  report.mean = report.per_query.empty()
                    ? 0.0
                    : sum / static_cast<double>(report.per_query.size());
}

void check_cutoff(std::size_t k) {
  if (k < 1)
    throw Error("metric cutoff must be >= 1");
}

void check_overlap(const Run &run, const Qrels &qrels) {
  for (const auto &list : run)
    if (qrels.has_query(list.query_id))
      return;
  throw Error("run and qrels share no query");
}

} // namespace

MetricReport ndcg_at_k(const Run &run, const Qrels &qrels, std::size_t k,
                       Gain gain) {
  check_cutoff(k);
  check_overlap(run, qrels);
  MetricReport report;
  report.name = (gain == Gain::linear ? "ndcg@" : "ndcg_exp@") +
                std::to_string(k);
  report.cutoff = k;
  for (const auto &list : run) {
    const auto *judged = qrels.judgments(list.query_id);
    if (!judged)
      continue;
    std::vector<int> grades;
    grades.reserve(judged->size());
    for (const auto &[pid, g] : *judged)
      grades.push_back(g);
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double ideal = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i)
      ideal += gain_of(grades[i], gain) * discount(i + 1);
    if (ideal <= 0.0) {
      report.excluded.push_back(list.query_id);
      continue;
    }
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, list.entries.size()); ++i) {
      auto it = judged->find(list.entries[i].passage_id);
      if (it != judged->end())
        dcg += gain_of(it->second, gain) * discount(i + 1);
    }
    report.per_query[list.query_id] = dcg / ideal;
  }
  finish(report);
  return report;
}

MetricReport judged_at_k(const Run &run, const Qrels &qrels, std::size_t k) {
  check_cutoff(k);
  check_overlap(run, qrels);
  MetricReport report;
  report.name = "judged@" + std::to_string(k);
  report.cutoff = k;
  for (const auto &list : run) {
    const auto *judged = qrels.judgments(list.query_id);
    if (!judged)
      continue;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, list.entries.size()); ++i)
      hits += judged->count(list.entries[i].passage_id);
    report.per_query[list.query_id] =
        static_cast<double>(hits) / static_cast<double>(k);
  }
  finish(report);
  return report;
}

Qrels merge_qrels(const Qrels &base, const Qrels &additions) {
  Qrels merged = base;
  std::string conflicts;
  std::size_t conflict_count = 0;
  for (const auto &j : additions.to_vector()) {
    auto existing = base.grade(j.query_id, j.passage_id);
    if (!existing) {
      merged.add(j);
    } else if (*existing != j.grade) {
      ++conflict_count;
      if (conflict_count <= 20)
        conflicts += " (" + j.query_id + ", " + j.passage_id + ": " +
                     std::to_string(*existing) + " vs " +
                     std::to_string(j.grade) + ")";
    }
  }
  if (conflict_count)
    throw Error(std::to_string(conflict_count) +
                " conflicting judgment(s):" + conflicts +
                (conflict_count > 20 ? " ..." : ""));
  return merged;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0)
    return 0.0;
  if (x >= 1.0)
    return 1.0;
  auto continued_fraction = [](double a, double b, double x) {
    constexpr int kMaxIterations = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny)
      d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
      const double m2 = 2.0 * m;
      double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
      d = 1.0 + aa * d;
      if (std::fabs(d) < kTiny)
        d = kTiny;
      c = 1.0 + aa / c;
      if (std::fabs(c) < kTiny)
        c = kTiny;
      d = 1.0 / d;
      h *= d * c;
      aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
      d = 1.0 + aa * d;
      if (std::fabs(d) < kTiny)
        d = kTiny;
      c = 1.0 + aa / c;
      if (std::fabs(c) < kTiny)
        c = kTiny;
      d = 1.0 / d;
      const double delta = d * c;
      h *= delta;
      if (std::fabs(delta - 1.0) < kEps)
        break;
    }
    return h;
  };
  const double log_front = std::lgamma(a + b) - std::lgamma(a) -
                           std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * continued_fraction(a, b, x) / a;
  return 1.0 - front * continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_tailed(double t, double dof) {
  if (!(dof > 0.0))
    throw Error("degrees of freedom must be positive");
  if (std::isinf(t))
    return 0.0;
  const double x = dof / (dof + t * t);
  return incomplete_beta(dof / 2.0, 0.5, x);
}

TTestResult paired_ttest(const MetricReport &a, const MetricReport &b) {
  if (a.per_query.size() != b.per_query.size())
    throw Error("paired t-test needs identical query sets (" +
                std::to_string(a.per_query.size()) + " vs " +
                std::to_string(b.per_query.size()) + " queries)");
  std::vector<double> diffs;
  diffs.reserve(a.per_query.size());
  auto ib = b.per_query.begin();
  for (const auto &[q, va] : a.per_query) {
    if (ib->first != q)
      throw Error("paired t-test: query '" + q + "' missing from one report");
    diffs.push_back(va - ib->second);
    ++ib;
  }
  TTestResult r;
  r.n = diffs.size();
  if (r.n < 2)
    throw Error("paired t-test needs at least 2 queries");
  const double n = static_cast<double>(r.n);
  double mean = 0.0;
  for (double d : diffs)
    mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : diffs)
    ss += (d - mean) * (d - mean);
  const double variance = ss / (n - 1.0);
  r.mean_difference = mean;
  // Differences below rounding noise are treated as exactly constant.
  const double scale = std::max(1.0, std::fabs(mean));
  const double tolerance = 1e-12 * scale;
  if (std::sqrt(variance) <= tolerance) {
    if (std::fabs(mean) <= tolerance) {
      r.t = 0.0;
      r.p_value = 1.0;
    } else {
      r.t = mean > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
      r.p_value = kMinPValue;
    }
    return r;
  }
  r.t = mean / std::sqrt(variance / n);
  r.p_value = std::max(kMinPValue, student_t_two_tailed(r.t, n - 1.0));
  return r;
}

MetricReport evaluate(const std::string &metric, const Run &run,
                      const Qrels &qrels) {
  auto at = metric.find('@');
  if (at == std::string::npos || at + 1 == metric.size())
    throw Error("metric '" + metric + "' must look like name@k");
  const auto name = metric.substr(0, at);
  std::size_t k = 0;
  try {
    std::size_t used = 0;
    k = std::stoul(metric.substr(at + 1), &used);
    if (used != metric.size() - at - 1)
      throw std::invalid_argument("trailing");
  } catch (const std::exception &) {
    throw Error("metric '" + metric + "' has an invalid cutoff");
  }
  if (name == "ndcg")
    return ndcg_at_k(run, qrels, k, Gain::linear);
  if (name == "ndcg_exp")
    return ndcg_at_k(run, qrels, k, Gain::exponential);
  if (name == "judged")
    return judged_at_k(run, qrels, k);
  throw Error("unknown metric '" + name + "' (ndcg, ndcg_exp, judged)");
}

} // namespace listrank::metrics
