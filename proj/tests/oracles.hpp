#pragma once

// Independent reference implementations used to check the library. These are
// deliberately naive (enumeration, double loops, textbook formulas) and share
// no code with the implementation paths they verify.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

struct WeightedVec {
  std::vector<float> vec;
  double weight;
};

// Optimal constrained-clustering objective by exhausting every assignment of
// queries to clusters {0..m}. Cluster 0 contributes sum w * (v . doc_vec);
// cluster j >= 1 contributes the norm of its weighted vector sum (the value
// attained by the normalized weighted mean).
inline double best_assignment_objective(const std::vector<float>& doc_vec,
                                        const std::vector<WeightedVec>& queries,
                                        std::size_t m) {
  const std::size_t n = queries.size();
  const std::size_t dim = doc_vec.size();
  std::vector<std::size_t> assign(n, 0);
  double best = -1e300;
  for (;;) {
    double value = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      std::vector<double> sum(dim, 0.0);
      for (std::size_t q = 0; q < n; ++q) {
        if (assign[q] != j) continue;
        for (std::size_t t = 0; t < dim; ++t) {
          sum[t] += queries[q].weight * static_cast<double>(queries[q].vec[t]);
        }
      }
      double norm_sq = 0.0;
      for (const double s : sum) norm_sq += s * s;
      value += std::sqrt(norm_sq);
    }
    for (std::size_t q = 0; q < n; ++q) {
      if (assign[q] != 0) continue;
      double d = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        d += static_cast<double>(queries[q].vec[t]) * static_cast<double>(doc_vec[t]);
      }
      value += queries[q].weight * d;
    }
    best = std::max(best, value);

    std::size_t pos = 0;
    while (pos < n && assign[pos] == m) {
      assign[pos] = 0;
      ++pos;
    }
    if (pos == n) break;
    ++assign[pos];
  }
  return best;
}

// Naive max-sim retrieval: per document, max dot over its own vector list;
// rank by (score desc, doc id asc); truncate to k.
struct Ranked {
  std::string doc_id;
  double score;
};

inline std::vector<Ranked> brute_force_search(
    const std::vector<float>& query,
    const std::vector<std::pair<std::string, std::vector<std::vector<float>>>>& doc_vectors,
    std::size_t k) {
  std::vector<Ranked> scored;
  scored.reserve(doc_vectors.size());
  for (const auto& [doc_id, vectors] : doc_vectors) {
    double best = -1e300;
    for (const auto& v : vectors) {
      double d = 0.0;
      for (std::size_t t = 0; t < v.size(); ++t) {
        d += static_cast<double>(query[t]) * static_cast<double>(v[t]);
      }
      best = std::max(best, d);
    }
    scored.push_back({doc_id, best});
  }
  std::sort(scored.begin(), scored.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

// Exact Binomial(n, 1/2) lower tail via a Pascal row in long double;
// usable for n up to a few hundred.
inline double binom_half_cdf(std::size_t m, std::size_t n) {
  std::vector<long double> row(n + 1, 0.0L);
  row[0] = 1.0L;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = i; j > 0; --j) row[j] += row[j - 1];
  }
  long double tail = 0.0L;
  for (std::size_t j = 0; j <= std::min(m, n); ++j) tail += row[j];
  return static_cast<double>(tail / std::pow(2.0L, static_cast<long double>(n)));
}

// Mean resultant length of a vMF distribution on the unit sphere in r
// dimensions: A_r(kappa) = I_{r/2}(kappa) / I_{r/2-1}(kappa).
inline double vmf_mean_resultant(double kappa, unsigned r) {
  return std::cyl_bessel_i(r / 2.0, kappa) / std::cyl_bessel_i(r / 2.0 - 1.0, kappa);
}

// Expected tables by direct summation of new-table probabilities:
// E[T_n] = sum over steps of P(open new table), computed from the exact
// marginal E[T_i] recursion E[T_{i+1}] = E[T_i] + (alpha + beta E[T_i])/(i + alpha).
inline double expected_tables_recursion(double alpha, double beta, std::uint64_t n) {
  double expected = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    expected += (alpha + beta * expected) / (static_cast<double>(i) + alpha);
  }
  return expected;
}

}  // namespace oracle
