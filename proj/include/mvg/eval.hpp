#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mvg/index.hpp"

namespace mvg {

// Relevance judgments: query -> set of relevant doc ids. Built from the
// positive edges of a held-out relevance file; rows with non-positive
// relevance are dropped.
struct QrelSet {
  std::map<std::string, std::set<std::string>> relevant;

  // TSV: query_id<TAB>doc_id<TAB>relevance (positive integer, typically 1).
  static QrelSet load(const std::filesystem::path& path);
};

// |top-k of ranking that are relevant| / |relevant|.
double recall_at_k(const RetrievalResult& result, const std::set<std::string>& relevant,
                   std::size_t k);

// (1 / min(|relevant|, k)) * sum over relevant hits at rank i <= k of
// precision@i. A perfect ranking scores exactly 1.
double average_precision_at_k(const RetrievalResult& result,
                              const std::set<std::string>& relevant, std::size_t k);

struct MacroResult {
  double recall_mean = 0.0;  // raw fraction; multiply by 100 for percentage
  double ap_mean = 0.0;
  std::vector<std::string> query_ids;  // evaluated queries, result order
  std::vector<double> per_query_recall;
  std::vector<double> per_query_ap;
  std::size_t n_skipped = 0;  // queries without relevance judgments
};

// Unweighted macro average over queries with judgments; queries absent from
// the qrels are skipped and counted.
MacroResult macro_metrics(const std::vector<RetrievalResult>& results, const QrelSet& qrels,
                          std::size_t k);

struct SignTestResult {
  double p_value = 1.0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::size_t n_zero = 0;
  bool degenerate = false;  // every diff was zero
};

// Exact two-sided binomial sign test on per-query metric differences.
// Zeros are discarded; p = 2 * min(BinomCDF(min(n+, n-); n+ + n-, 1/2), 1/2).
SignTestResult macro_sign_test(std::span<const double> diffs);

// Geometric mean of the axis-aligned bounding-box side lengths of a point
// set; zero when any side collapses. Computed in log space.
double diversity(const std::vector<std::vector<float>>& vectors);

// TREC run lines: `query_id Q0 doc_id rank score run_tag`.
void write_trec_run(const std::filesystem::path& path,
                    const std::vector<RetrievalResult>& results, const std::string& run_tag);
std::vector<RetrievalResult> read_trec_run(const std::filesystem::path& path);

}  // namespace mvg
