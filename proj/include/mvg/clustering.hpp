#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvg/budget.hpp"
#include "mvg/embedding_store.hpp"
#include "mvg/relevance_graph.hpp"

namespace mvg {

// One relevant query for a document: unit vector plus positive weight.
struct WeightedQuery {
  std::span<const float> vec;
  double weight = 1.0;
};

// Behavioral vectors learned for one document. The fixed semantic center is
// not stored here; it lives in the document embedding store.
struct BehavioralSet {
  std::string doc_id;
  std::vector<std::vector<float>> centers;  // unit vectors, count <= m_d
};

struct ClusterResult {
  std::vector<std::vector<float>> centers;
  std::uint32_t iterations = 0;
  bool converged = false;
  // Objective value after initial centers, then after each Lloyd iteration.
  std::vector<double> objective_trace;
};

// Sum over queries of w_q * max over {doc_vec} + centers of the dot product.
double objective(std::span<const float> doc_vec,
                 const std::vector<std::vector<float>>& centers,
                 const std::vector<WeightedQuery>& queries);

// Constrained weighted spherical k-means over one document's queries:
// cluster 0 is pinned to the semantic vector, clusters 1..m_d are learned.
// Queries start in uniformly random clusters; the loop alternates argmax
// reassignment (ties to the smallest index) with weight-normalized mean
// updates until the assignment matrix stops changing or max_iters passes.
// Clusters that end empty, or whose weighted mean degenerates below 1e-10,
// are dropped. The PRNG stream is derived from (seed, doc_key), so results
// do not depend on processing order.
ClusterResult mvg_cluster(std::span<const float> doc_vec,
                          const std::vector<WeightedQuery>& queries, std::size_t m_d,
                          std::uint64_t seed, std::uint64_t doc_key,
                          std::uint32_t max_iters = 100);

struct DocClusterStats {
  std::uint32_t iterations = 0;
  bool converged = false;
  std::size_t centers_kept = 0;
};

struct AugmentOptions {
  std::uint64_t seed = 42;
  std::uint32_t max_iters = 100;
  unsigned threads = 1;
  bool uniform_weights = false;  // treat every edge weight as 1.0
};

struct AugmentResult {
  std::map<std::string, BehavioralSet> sets;       // docs with at least one center
  std::map<std::string, DocClusterStats> stats;    // every doc with m_d > 0
  std::size_t total_centers = 0;
};

// Runs mvg_cluster for every document with a positive allocation. Outputs are
// bit-identical for any thread count: documents are seeded individually and
// written to preallocated slots.
AugmentResult augment_all(const EmbeddingStore& docs, const EmbeddingStore& queries,
                          const RelevanceGraph& graph, const BudgetPlan& plan,
                          const AugmentOptions& options);

// Behavioral vectors as an embedding store with ids `<doc_id>#b<j>`, j >= 1.
EmbeddingStore behavioral_to_store(const AugmentResult& result, std::uint32_t dim);

// Inverse of behavioral_to_store: groups rows by document, validating that
// every referenced document exists in the document store.
std::map<std::string, BehavioralSet> behavioral_from_store(const EmbeddingStore& behavioral,
                                                           const EmbeddingStore& docs);

}  // namespace mvg
