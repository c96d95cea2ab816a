#include "mvg/clustering.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "mvg/error.hpp"
#include "mvg/rng.hpp"

namespace mvg {
namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

// Center storage for one Lloyd run. valid=false marks clusters that never
// received members; their slots do not participate in assignment.
struct Center {
  std::vector<float> vec;
  bool valid = false;
};

double run_objective(std::span<const float> doc_vec, const std::vector<Center>& centers,
                     const std::vector<WeightedQuery>& queries) {
  double total = 0.0;
  for (const auto& q : queries) {
    double best = dot(q.vec, doc_vec);
    for (const auto& c : centers) {
      if (!c.valid) continue;
      best = std::max(best, dot(q.vec, {c.vec.data(), c.vec.size()}));
    }
    total += q.weight * best;
  }
  return total;
}

}  // namespace

double objective(std::span<const float> doc_vec,
                 const std::vector<std::vector<float>>& centers,
                 const std::vector<WeightedQuery>& queries) {
  const std::size_t dim = doc_vec.size();
  for (const auto& c : centers) {
    if (c.size() != dim) throw DataError("center dimension mismatch in objective");
  }
  double total = 0.0;
  for (const auto& q : queries) {
    if (q.vec.size() != dim) throw DataError("query dimension mismatch in objective");
    double best = dot(q.vec, doc_vec);
    for (const auto& c : centers) {
      best = std::max(best, dot(q.vec, {c.data(), c.size()}));
    }
    total += q.weight * best;
  }
  return total;
}

ClusterResult mvg_cluster(std::span<const float> doc_vec,
                          const std::vector<WeightedQuery>& queries, std::size_t m_d,
                          std::uint64_t seed, std::uint64_t doc_key,
                          std::uint32_t max_iters) {
  if (max_iters == 0) throw ParamError("max_iters must be positive");
  if (m_d > queries.size()) {
    throw ParamError("cannot learn " + std::to_string(m_d) + " centers from " +
                     std::to_string(queries.size()) + " queries");
  }
  ClusterResult result;
  if (m_d == 0) return result;

  const std::size_t dim = doc_vec.size();
  for (const auto& q : queries) {
    if (q.vec.size() != dim) throw DataError("query dimension mismatch in mvg_cluster");
  }

  Rng rng = Rng::substream(seed, doc_key);

  // Random initial assignment over clusters {0..m_d}; 0 is the semantic slot.
  std::vector<std::uint32_t> assign(queries.size());
  for (auto& a : assign) {
    a = static_cast<std::uint32_t>(rng.next_below(m_d + 1));
  }

  std::vector<Center> centers(m_d);
  std::vector<double> mean_acc(m_d * dim);
  std::vector<double> weight_acc(m_d);

  // Recomputes behavioral centers from the current assignment. Clusters with
  // no members keep their previous vector (a later pass may repopulate them);
  // degenerate means invalidate the cluster.
  auto update_centers = [&]() {
    std::fill(mean_acc.begin(), mean_acc.end(), 0.0);
    std::fill(weight_acc.begin(), weight_acc.end(), 0.0);
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const std::uint32_t a = assign[qi];
      if (a == 0) continue;
      const std::size_t j = a - 1;
      const auto& q = queries[qi];
      weight_acc[j] += q.weight;
      double* acc = mean_acc.data() + j * dim;
      for (std::size_t t = 0; t < dim; ++t) {
        acc[t] += q.weight * static_cast<double>(q.vec[t]);
      }
    }
    for (std::size_t j = 0; j < m_d; ++j) {
      if (weight_acc[j] <= 0.0) continue;  // empty: keep previous state
      const double* acc = mean_acc.data() + j * dim;
      double sumsq = 0.0;
      for (std::size_t t = 0; t < dim; ++t) sumsq += acc[t] * acc[t];
      const double norm = std::sqrt(sumsq);
      if (norm < 1e-10) {
        centers[j].valid = false;  // no spherical mean exists
        continue;
      }
      centers[j].valid = true;
      centers[j].vec.resize(dim);
      for (std::size_t t = 0; t < dim; ++t) {
        centers[j].vec[t] = static_cast<float>(acc[t] / norm);
      }
    }
  };

  update_centers();
  result.objective_trace.push_back(run_objective(doc_vec, centers, queries));

  std::vector<std::uint32_t> next(queries.size());
  for (std::uint32_t iter = 1; iter <= max_iters; ++iter) {
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const auto& q = queries[qi];
      double best = dot(q.vec, doc_vec);
      std::uint32_t best_j = 0;  // ties resolve to the semantic center
      for (std::size_t j = 0; j < m_d; ++j) {
        if (!centers[j].valid) continue;
        const double score = dot(q.vec, {centers[j].vec.data(), dim});
        if (score > best) {
          best = score;
          best_j = static_cast<std::uint32_t>(j + 1);
        }
      }
      next[qi] = best_j;
    }
    result.iterations = iter;
    if (next == assign) {
      result.converged = true;
      result.objective_trace.push_back(run_objective(doc_vec, centers, queries));
      break;
    }
    assign.swap(next);
    update_centers();
    result.objective_trace.push_back(run_objective(doc_vec, centers, queries));
  }

  // Drop clusters that ended empty (or never formed).
  std::vector<bool> occupied(m_d, false);
  for (const auto a : assign) {
    if (a > 0) occupied[a - 1] = true;
  }
  for (std::size_t j = 0; j < m_d; ++j) {
    if (centers[j].valid && occupied[j]) {
      result.centers.push_back(std::move(centers[j].vec));
    }
  }
  return result;
}

AugmentResult augment_all(const EmbeddingStore& docs, const EmbeddingStore& queries,
                          const RelevanceGraph& graph, const BudgetPlan& plan,
                          const AugmentOptions& options) {
  struct Job {
    std::size_t doc_index;
    const std::string* doc_id;
    std::uint64_t m_d;
  };
  std::vector<Job> jobs;
  jobs.reserve(plan.allocations.size());
  for (const auto& [doc_id, m_d] : plan.allocations) {
    if (m_d == 0) continue;
    const auto idx = docs.find(doc_id);
    if (!idx) throw DataError("document id '" + doc_id + "' not found in embedding store");
    jobs.push_back({*idx, &doc_id, m_d});
  }

  // Resolve query vectors up front so worker threads only read.
  struct Resolved {
    std::vector<WeightedQuery> queries;
  };
  std::vector<Resolved> inputs(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto adjacency = graph.queries_of(*jobs[i].doc_id);
    auto& list = inputs[i].queries;
    list.reserve(adjacency.size());
    for (const auto& qw : adjacency) {
      const auto qidx = queries.find(qw.query_id);
      if (!qidx) {
        throw DataError("query id '" + qw.query_id + "' not found in embedding store");
      }
      list.push_back({queries.row(*qidx), options.uniform_weights ? 1.0 : qw.weight});
    }
  }

  std::vector<ClusterResult> outputs(jobs.size());
  auto worker_body = [&](std::size_t i) {
    const Job& job = jobs[i];
    outputs[i] = mvg_cluster(docs.row(job.doc_index), inputs[i].queries,
                             static_cast<std::size_t>(job.m_d), options.seed, job.doc_index,
                             options.max_iters);
  };

  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1 || jobs.size() <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) worker_body(i);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    const unsigned n_threads = std::min<std::size_t>(threads, jobs.size());
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = cursor.fetch_add(1);
          if (i >= jobs.size()) return;
          worker_body(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  AugmentResult result;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& out = outputs[i];
    DocClusterStats stats;
    stats.iterations = out.iterations;
    stats.converged = out.converged;
    stats.centers_kept = out.centers.size();
    result.stats.emplace(*jobs[i].doc_id, stats);
    result.total_centers += out.centers.size();
    if (!out.centers.empty()) {
      result.sets.emplace(*jobs[i].doc_id,
                          BehavioralSet{*jobs[i].doc_id, std::move(out.centers)});
    }
  }
  return result;
}

EmbeddingStore behavioral_to_store(const AugmentResult& result, std::uint32_t dim) {
  EmbeddingStore store(dim);
  for (const auto& [doc_id, set] : result.sets) {
    for (std::size_t j = 0; j < set.centers.size(); ++j) {
      store.append(doc_id + "#b" + std::to_string(j + 1),
                   {set.centers[j].data(), set.centers[j].size()});
    }
  }
  return store;
}

std::map<std::string, BehavioralSet> behavioral_from_store(const EmbeddingStore& behavioral,
                                                           const EmbeddingStore& docs) {
  std::map<std::string, BehavioralSet> sets;
  for (std::size_t i = 0; i < behavioral.size(); ++i) {
    const std::string& full_id = behavioral.id(i);
    const auto pos = full_id.rfind("#b");
    if (pos == std::string::npos || pos == 0 || pos + 2 >= full_id.size()) {
      throw DataError("behavioral id '" + full_id + "' lacks a '#b<j>' suffix");
    }
    const std::string doc_id = full_id.substr(0, pos);
    if (!docs.find(doc_id)) {
      throw DataError("behavioral vector references unknown document '" + doc_id + "'");
    }
    auto& set = sets[doc_id];
    set.doc_id = doc_id;
    const auto r = behavioral.row(i);
    set.centers.emplace_back(r.begin(), r.end());
  }
  return sets;
}

}  // namespace mvg
