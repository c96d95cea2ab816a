#include "mvg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "mvg/error.hpp"

namespace mvg {

QrelSet QrelSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open qrels file: " + path.string());
  QrelSet qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 3 tab-separated columns");
    }
    const std::string rel_str = line.substr(tab2 + 1);
    long rel = 0;
    try {
      std::size_t consumed = 0;
      rel = std::stol(rel_str, &consumed);
      if (consumed != rel_str.size()) throw std::invalid_argument(rel_str);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": non-numeric relevance '" + rel_str + "'");
    }
    if (rel <= 0) continue;
    qrels.relevant[line.substr(0, tab1)].insert(line.substr(tab1 + 1, tab2 - tab1 - 1));
  }
  return qrels;
}

double recall_at_k(const RetrievalResult& result, const std::set<std::string>& relevant,
                   std::size_t k) {
  if (relevant.empty()) throw EvalError("recall undefined for an empty relevance set");
  const std::size_t depth = std::min(k, result.ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (relevant.count(result.ranked[i].doc_id)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double average_precision_at_k(const RetrievalResult& result,
                              const std::set<std::string>& relevant, std::size_t k) {
  if (relevant.empty()) throw EvalError("average precision undefined for an empty relevance set");
  const std::size_t depth = std::min(k, result.ranked.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (relevant.count(result.ranked[i].doc_id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  const std::size_t denom = std::min(relevant.size(), k);
  return sum / static_cast<double>(denom);
}

MacroResult macro_metrics(const std::vector<RetrievalResult>& results, const QrelSet& qrels,
                          std::size_t k) {
  MacroResult macro;
  double recall_sum = 0.0;
  double ap_sum = 0.0;
  for (const auto& result : results) {
    auto it = qrels.relevant.find(result.query_id);
    if (it == qrels.relevant.end() || it->second.empty()) {
      ++macro.n_skipped;
      continue;
    }
    const double r = recall_at_k(result, it->second, k);
    const double ap = average_precision_at_k(result, it->second, k);
    macro.query_ids.push_back(result.query_id);
    macro.per_query_recall.push_back(r);
    macro.per_query_ap.push_back(ap);
    recall_sum += r;
    ap_sum += ap;
  }
  if (macro.query_ids.empty()) throw EvalError("no evaluable queries");
  macro.recall_mean = recall_sum / static_cast<double>(macro.query_ids.size());
  macro.ap_mean = ap_sum / static_cast<double>(macro.query_ids.size());
  return macro;
}

namespace {

// P(X <= m) for X ~ Binomial(n, 1/2). Incremental terms stay exact in double
// for small n (1/32 at n=5, not exp(-5 log 2)); log-space above 900 trials.
double binom_half_cdf(std::size_t m, std::size_t n) {
  if (m >= n) return 1.0;
  if (n <= 900) {
    double term = std::exp2(-static_cast<double>(n));  // C(n,0) / 2^n
    double cdf = term;
    for (std::size_t i = 0; i < m; ++i) {
      term *= static_cast<double>(n - i) / static_cast<double>(i + 1);
      cdf += term;
    }
    return std::min(cdf, 1.0);
  }
  const double log2n = static_cast<double>(n) * std::log(2.0);
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logs(m + 1);
  for (std::size_t i = 0; i <= m; ++i) {
    logs[i] = std::lgamma(static_cast<double>(n) + 1.0) -
              std::lgamma(static_cast<double>(i) + 1.0) -
              std::lgamma(static_cast<double>(n - i) + 1.0) - log2n;
    max_log = std::max(max_log, logs[i]);
  }
  double sum = 0.0;
  for (const double l : logs) sum += std::exp(l - max_log);
  return std::min(std::exp(max_log) * sum, 1.0);
}

}  // namespace

SignTestResult macro_sign_test(std::span<const double> diffs) {
  SignTestResult test;
  for (const double d : diffs) {
    if (!std::isfinite(d)) throw EvalError("non-finite difference in sign test");
    if (d > 0.0) {
      ++test.n_positive;
    } else if (d < 0.0) {
      ++test.n_negative;
    } else {
      ++test.n_zero;
    }
  }
  const std::size_t n = test.n_positive + test.n_negative;
  if (n == 0) {
    test.degenerate = true;
    test.p_value = 1.0;
    return test;
  }
  const std::size_t tail = std::min(test.n_positive, test.n_negative);
  test.p_value = std::min(2.0 * std::min(binom_half_cdf(tail, n), 0.5), 1.0);
  return test;
}

double diversity(const std::vector<std::vector<float>>& vectors) {
  if (vectors.empty()) throw EvalError("diversity undefined for an empty set");
  const std::size_t dim = vectors.front().size();
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (const auto& v : vectors) {
    if (v.size() != dim) throw DataError("dimension mismatch in diversity");
    for (std::size_t j = 0; j < dim; ++j) {
      lo[j] = std::min(lo[j], static_cast<double>(v[j]));
      hi[j] = std::max(hi[j], static_cast<double>(v[j]));
    }
  }
  double log_sum = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double side = hi[j] - lo[j];
    if (side <= 0.0) return 0.0;
    log_sum += std::log(side);
  }
  return std::exp(log_sum / static_cast<double>(dim));
}

void write_trec_run(const std::filesystem::path& path,
                    const std::vector<RetrievalResult>& results, const std::string& run_tag) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write run file: " + path.string());
  char score_buf[64];
  for (const auto& result : results) {
    for (std::size_t rank = 0; rank < result.ranked.size(); ++rank) {
      const auto& hit = result.ranked[rank];
      std::snprintf(score_buf, sizeof(score_buf), "%.8f", hit.score);
      out << result.query_id << " Q0 " << hit.doc_id << ' ' << rank + 1 << ' ' << score_buf
          << ' ' << run_tag << '\n';
    }
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<RetrievalResult> read_trec_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open run file: " + path.string());
  std::vector<RetrievalResult> results;
  std::string last_query;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream iss(line);
    std::string query_id, q0, doc_id, tag;
    std::size_t rank = 0;
    double score = 0.0;
    if (!(iss >> query_id >> q0 >> doc_id >> rank >> score >> tag)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": malformed run line");
    }
    if (results.empty() || query_id != last_query) {
      results.push_back({query_id, {}});
      last_query = query_id;
    }
    results.back().ranked.push_back({doc_id, score});
  }
  return results;
}

}  // namespace mvg
