#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace mvg {

// Seating-process concentration parameters. The seating formula and table
// expectations require beta strictly inside (0, 1); the budget allocator
// accepts the closed endpoints as interpolation limits.
struct PypParams {
  double alpha = 1.0;
  double beta = 0.5;
};

// Expected number of occupied tables after n customers:
//   (alpha/beta) * (prod_{j=1..n} (alpha+beta+j-1)/(alpha+j-1) - 1)
// Direct product for small n; log-space product above 10^4 terms.
double expected_tables_exact(const PypParams& params, std::uint64_t n);

// Asymptotic form Gamma(alpha+1) / (beta * Gamma(alpha+beta)) * n^beta.
double expected_tables_asymptotic(const PypParams& params, std::uint64_t n);

// Per-document behavioral vector counts, sum bounded by the total budget.
struct BudgetPlan {
  // Only positive allocations are stored; m_of() reads absent docs as 0.
  std::map<std::string, std::uint64_t> allocations;
  std::uint64_t total_budget = 0;

  std::uint64_t m_of(const std::string& doc_id) const {
    auto it = allocations.find(doc_id);
    return it == allocations.end() ? 0 : it->second;
  }
  std::uint64_t allocated() const;
};

// Splits budget M across documents with scores n_d^beta (0^0 := 0) by
// largest-remainder apportionment. Deterministic: remainder ties break by
// larger n_d, then lexicographically smaller doc id. Each allocation is
// capped at n_d; capped docs release budget to later rounds until the budget
// is exhausted or every document is capped.
BudgetPlan allocate_budget(const std::map<std::string, std::size_t>& counts, double beta,
                           std::uint64_t total_budget);

// M = round(m_avg * corpus_doc_count), then allocate_budget. The corpus count
// covers all documents, including those absent from the relevance graph.
BudgetPlan budget_from_average(const std::map<std::string, std::size_t>& counts, double beta,
                               double m_avg, std::size_t corpus_doc_count);

// Fractions of the allocated budget landing on the head/torso/tail thirds of
// documents ranked by n_d (descending, ties by id). All zeros when nothing
// was allocated.
struct BudgetShares {
  double head = 0.0;
  double torso = 0.0;
  double tail = 0.0;
};
BudgetShares budget_shares(const std::map<std::string, std::size_t>& counts,
                           const BudgetPlan& plan);

// TSV report: '#' summary lines (M, beta, allocated total, budget shares of
// the head/torso/tail thirds of documents ranked by n_d), then one
// `doc_id<TAB>n_d<TAB>m_d` row per document, ordered by (n_d desc, id asc).
std::string render_budget_report(const std::map<std::string, std::size_t>& counts,
                                 const BudgetPlan& plan, double beta,
                                 const std::string& basis_note);

}  // namespace mvg
