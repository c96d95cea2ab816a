#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mvg {

// Ingest accounting for a relevance TSV load.
struct GraphLoadReport {
  std::size_t lines = 0;
  std::size_t kept_edges = 0;
  std::size_t dropped_nonpositive = 0;
  std::size_t merged_duplicates = 0;
};

struct QueryWeight {
  std::string query_id;
  double weight;
};

// Weighted bipartite query->document edges. Non-positive weights are dropped
// at ingest, duplicate (query, doc) pairs merge by weight sum, and adjacency
// lists are kept sorted by query id so downstream consumers see a canonical
// order regardless of file order. Immutable after finalize().
class RelevanceGraph {
 public:
  // TSV format: query_id<TAB>doc_id<TAB>weight, UTF-8, '.' decimal, no header.
  static RelevanceGraph load(const std::filesystem::path& path,
                             GraphLoadReport* report = nullptr);

  void add_edge(std::string_view query_id, std::string_view doc_id, double weight);
  void finalize();

  std::size_t edge_count() const { return edge_count_; }
  const std::vector<std::string>& doc_ids() const { return doc_order_; }
  // Empty span when the document is absent from the graph.
  std::span<const QueryWeight> queries_of(std::string_view doc_id) const;

 private:
  bool finalized_ = false;
  std::size_t edge_count_ = 0;
  std::unordered_map<std::string, std::unordered_map<std::string, double>> building_;
  std::unordered_map<std::string, std::vector<QueryWeight>> adjacency_;
  std::vector<std::string> doc_order_;  // sorted doc ids
  GraphLoadReport* active_report_ = nullptr;
};

// Distinct-query count n_d per document; documents absent from the graph are
// absent from the map.
std::map<std::string, std::size_t> doc_query_counts(const RelevanceGraph& graph);

}  // namespace mvg
