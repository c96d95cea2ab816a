#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvg/budget.hpp"
#include "mvg/embedding_store.hpp"
#include "mvg/eval.hpp"
#include "mvg/relevance_graph.hpp"
#include "mvg/rng.hpp"

namespace mvg {

// How many queries each synthetic document receives.
struct QueryLaw {
  enum class Kind { Fixed, PowerLaw } kind = Kind::Fixed;
  std::size_t fixed_n = 10;
  // Truncated continuous power law with density ~ x^-exponent on
  // [n_min, n_max], floored to an integer count.
  double exponent = 1.5;
  std::size_t n_min = 1;
  std::size_t n_max = 100;
};

struct GenerativeConfig {
  std::size_t doc_count = 0;
  std::uint32_t dim = 8;
  PypParams pyp;
  double kappa = 50.0;  // shared concentration for every intent cluster
  QueryLaw law;
  std::uint64_t seed = 42;
  // 0: intents arise from the seating process. J > 0: exactly J intents per
  // document, queries assigned uniformly at random among them.
  std::size_t fixed_intents = 0;
  double train_fraction = 0.8;   // per-document query split
  double max_mean_cos = 0.5;     // pairwise separation of a doc's intent means
};

struct Seating {
  std::vector<std::uint32_t> tables;  // 1-based table index per customer
  std::uint32_t table_count = 0;
};

// Sequential seating draws: customer n+1 joins occupied table k with
// probability (T_{n,k} - beta) / (n + alpha) and opens a new table with
// probability (alpha + beta * T_n) / (n + alpha).
Seating pyp_sample_seating(const PypParams& params, std::size_t n, Rng& rng);

// One draw from the von Mises-Fisher distribution on the unit sphere via
// rejection sampling on the tangent-normal decomposition. kappa = 0 yields
// the uniform sphere distribution.
std::vector<float> sample_vmf(std::span<const float> mu, double kappa, Rng& rng);

std::vector<float> uniform_unit_vector(std::uint32_t dim, Rng& rng);

struct DocGroundTruth {
  std::vector<std::vector<float>> means;            // one per observed intent
  std::map<std::string, std::uint32_t> assignment;  // query id -> 1-based intent
};

struct SyntheticDataset {
  EmbeddingStore docs;
  EmbeddingStore train_queries;
  EmbeddingStore test_queries;
  RelevanceGraph graph;  // training edges, weight 1.0
  QrelSet qrels;         // held-out queries -> generating doc
  std::map<std::string, DocGroundTruth> truth;
};

// Per document: draw a query count, seat queries into intent clusters, draw
// intent means uniformly on the sphere (resampled until pairwise cosine stays
// below max_mean_cos), then draw each query from vMF around its intent mean.
// The document's semantic vector is the normalized mean of its training
// queries, standing in for a converged single-vector encoder. Deterministic
// given the seed: every document consumes an independent derived stream.
SyntheticDataset generate_dataset(const GenerativeConfig& config);

// Writes docs.mvge, queries_train.mvge, queries_test.mvge (+ .ids sidecars),
// relevance.tsv, qrels.tsv, and ground_truth.json under out_dir.
void write_dataset(const SyntheticDataset& dataset, const GenerativeConfig& config,
                   const std::filesystem::path& out_dir);

struct MonteCarloTables {
  double mean = 0.0;
  double stderr_mean = 0.0;
};

// Sample mean and standard error of the occupied-table count over independent
// seatings. Trials use derived per-trial streams and integer accumulation, so
// the result is identical for any thread count.
MonteCarloTables monte_carlo_tables(const PypParams& params, std::size_t n, std::size_t trials,
                                    std::uint64_t seed, unsigned threads = 1);

}  // namespace mvg
