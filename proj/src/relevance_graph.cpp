#include "mvg/relevance_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mvg/error.hpp"

namespace mvg {

void RelevanceGraph::add_edge(std::string_view query_id, std::string_view doc_id,
                              double weight) {
  if (!(weight > 0.0)) {  // also drops NaN
    if (active_report_) ++active_report_->dropped_nonpositive;
    return;
  }
  auto& per_doc = building_[std::string(doc_id)];
  auto [it, inserted] = per_doc.emplace(std::string(query_id), weight);
  if (!inserted) {
    it->second += weight;
    if (active_report_) ++active_report_->merged_duplicates;
  } else {
    ++edge_count_;
  }
  finalized_ = false;
}

void RelevanceGraph::finalize() {
  adjacency_.clear();
  doc_order_.clear();
  doc_order_.reserve(building_.size());
  for (auto& [doc, queries] : building_) {
    doc_order_.push_back(doc);
    auto& list = adjacency_[doc];
    list.reserve(queries.size());
    for (auto& [query, weight] : queries) {
      list.push_back({query, weight});
    }
    std::sort(list.begin(), list.end(),
              [](const QueryWeight& a, const QueryWeight& b) { return a.query_id < b.query_id; });
  }
  std::sort(doc_order_.begin(), doc_order_.end());
  finalized_ = true;
}

std::span<const QueryWeight> RelevanceGraph::queries_of(std::string_view doc_id) const {
  if (!finalized_) throw DataError("relevance graph queried before finalize()");
  auto it = adjacency_.find(std::string(doc_id));
  if (it == adjacency_.end()) return {};
  return {it->second.data(), it->second.size()};
}

RelevanceGraph RelevanceGraph::load(const std::filesystem::path& path,
                                    GraphLoadReport* report) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open relevance file: " + path.string());

  GraphLoadReport local;
  RelevanceGraph graph;
  graph.active_report_ = &local;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    ++local.lines;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 3 tab-separated columns");
    }
    const std::string query_id = line.substr(0, tab1);
    const std::string doc_id = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string weight_str = line.substr(tab2 + 1);
    double weight = 0.0;
    std::size_t consumed = 0;
    try {
      weight = std::stod(weight_str, &consumed);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": non-numeric weight '" + weight_str + "'");
    }
    if (consumed != weight_str.size() || !std::isfinite(weight)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": non-numeric weight '" + weight_str + "'");
    }
    graph.add_edge(query_id, doc_id, weight);
  }

  graph.active_report_ = nullptr;
  graph.finalize();
  local.kept_edges = graph.edge_count();
  if (report) *report = local;
  return graph;
}

std::map<std::string, std::size_t> doc_query_counts(const RelevanceGraph& graph) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : graph.doc_ids()) {
    counts[doc] = graph.queries_of(doc).size();
  }
  return counts;
}

}  // namespace mvg
