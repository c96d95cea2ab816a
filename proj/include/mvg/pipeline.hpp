#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvg/eval.hpp"

namespace mvg {

// Configuration shared by the augment and pipeline commands. Exactly one of
// m_avg / m_total must be set.
struct PipelineConfig {
  std::filesystem::path doc_embeddings;
  std::filesystem::path query_embeddings;  // training queries
  std::filesystem::path relevance;
  std::filesystem::path test_query_embeddings;  // pipeline only
  std::filesystem::path qrels;                  // pipeline only
  std::filesystem::path out_dir;

  double beta = 0.5;
  std::optional<double> m_avg;
  std::optional<std::uint64_t> m_total;
  std::uint64_t seed = 42;
  std::uint32_t max_iters = 100;
  std::vector<std::size_t> k_values = {10, 100};
  bool uniform_weights = false;
  unsigned threads = 1;
  std::string run_tag = "mvg-flat";
};

// Ingest -> budget -> clustering. Writes behavioral.mvge(.ids) and
// manifest.json under out_dir; returns the manifest.
nlohmann::json cmd_augment(const PipelineConfig& config);

// Full offline pipeline plus paired evaluation: augments, builds semantic-only
// and augmented indexes, searches the test queries with both, evaluates
// against the qrels, and writes run/report/comparison files. Returns the
// comparison report (per-metric deltas and sign tests).
nlohmann::json cmd_pipeline(const PipelineConfig& config);

// Evaluation report for one run: raw and x100 metric values per k, query
// counts, and (when a baseline is supplied) exact sign tests on per-query
// differences.
nlohmann::json make_eval_report(const std::vector<RetrievalResult>& results,
                                const QrelSet& qrels, const std::vector<std::size_t>& k_values,
                                const std::vector<RetrievalResult>* baseline = nullptr);

}  // namespace mvg
