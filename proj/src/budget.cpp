#include "mvg/budget.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "mvg/error.hpp"

namespace mvg {
namespace {

void validate_pyp(const PypParams& params) {
  if (!(params.alpha > 0.0)) throw ParamError("alpha must be > 0");
  if (!(params.beta > 0.0 && params.beta < 1.0)) {
    throw ParamError("beta must lie in (0, 1) for seating-process math");
  }
}

}  // namespace

double expected_tables_exact(const PypParams& params, std::uint64_t n) {
  validate_pyp(params);
  if (n == 0) return 0.0;
  const double alpha = params.alpha;
  const double beta = params.beta;
  if (n <= 10000) {
    double prod = 1.0;
    for (std::uint64_t j = 1; j <= n; ++j) {
      const double base = alpha + static_cast<double>(j) - 1.0;
      prod *= (base + beta) / base;
    }
    return (alpha / beta) * (prod - 1.0);
  }
  double log_prod = 0.0;
  for (std::uint64_t j = 1; j <= n; ++j) {
    const double base = alpha + static_cast<double>(j) - 1.0;
    log_prod += std::log1p(beta / base);
  }
  return (alpha / beta) * std::expm1(log_prod);
}

double expected_tables_asymptotic(const PypParams& params, std::uint64_t n) {
  validate_pyp(params);
  if (n == 0) throw ParamError("asymptotic table count requires n >= 1");
  const double alpha = params.alpha;
  const double beta = params.beta;
  const double coeff = std::exp(std::lgamma(alpha + 1.0) - std::lgamma(alpha + beta)) / beta;
  return coeff * std::pow(static_cast<double>(n), beta);
}

std::uint64_t BudgetPlan::allocated() const {
  std::uint64_t sum = 0;
  for (const auto& [doc, m] : allocations) sum += m;
  return sum;
}

BudgetPlan allocate_budget(const std::map<std::string, std::size_t>& counts, double beta,
                           std::uint64_t total_budget) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ParamError("beta must lie in [0, 1]");

  struct Doc {
    const std::string* id;
    std::size_t n;
    double score;
    std::uint64_t m = 0;
    double frac = 0.0;  // scratch for remainder rounds
  };
  std::vector<Doc> docs;
  docs.reserve(counts.size());
  for (const auto& [id, n] : counts) {
    if (n == 0) continue;  // 0^0 := 0, empty docs never receive budget
    docs.push_back({&id, n, std::pow(static_cast<double>(n), beta)});
  }

  BudgetPlan plan;
  plan.total_budget = total_budget;

  std::uint64_t remaining = total_budget;
  std::vector<Doc*> active;
  active.reserve(docs.size());
  while (remaining > 0) {
    active.clear();
    double score_sum = 0.0;
    for (auto& d : docs) {
      if (d.m < d.n) {
        active.push_back(&d);
        score_sum += d.score;
      }
    }
    if (active.empty() || !(score_sum > 0.0)) break;

    const double scale = static_cast<double>(remaining) / score_sum;
    for (Doc* d : active) {
      const double target = scale * d->score;
      const double fl = std::floor(target);
      auto add = static_cast<std::uint64_t>(fl);
      add = std::min<std::uint64_t>(add, d->n - d->m);
      add = std::min(add, remaining);
      d->m += add;
      remaining -= add;
      d->frac = target - fl;
    }
    if (remaining == 0) break;

    // Largest fractional remainder, ties by larger n_d then smaller id.
    std::sort(active.begin(), active.end(), [](const Doc* a, const Doc* b) {
      if (a->frac != b->frac) return a->frac > b->frac;
      if (a->n != b->n) return a->n > b->n;
      return *a->id < *b->id;
    });
    bool assigned = false;
    for (Doc* d : active) {
      if (remaining == 0) break;
      if (d->m < d->n) {
        ++d->m;
        --remaining;
        assigned = true;
      }
    }
    if (!assigned) break;
  }

  for (const auto& d : docs) {
    if (d.m > 0) plan.allocations.emplace(*d.id, d.m);
  }
  return plan;
}

BudgetPlan budget_from_average(const std::map<std::string, std::size_t>& counts, double beta,
                               double m_avg, std::size_t corpus_doc_count) {
  if (!(m_avg >= 0.0)) throw ParamError("m_avg must be >= 0");
  const auto total = static_cast<std::uint64_t>(
      std::llround(m_avg * static_cast<double>(corpus_doc_count)));
  return allocate_budget(counts, beta, total);
}

namespace {

struct ReportRow {
  const std::string* doc;
  std::size_t n;
  std::uint64_t m;
};

std::vector<ReportRow> ranked_rows(const std::map<std::string, std::size_t>& counts,
                                   const BudgetPlan& plan) {
  std::vector<ReportRow> rows;
  rows.reserve(counts.size());
  for (const auto& [doc, n] : counts) rows.push_back({&doc, n, plan.m_of(doc)});
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.n != b.n) return a.n > b.n;
    return *a.doc < *b.doc;
  });
  return rows;
}

}  // namespace

BudgetShares budget_shares(const std::map<std::string, std::size_t>& counts,
                           const BudgetPlan& plan) {
  const auto rows = ranked_rows(counts, plan);
  // Head/torso/tail = top/middle/bottom thirds of documents by n_d.
  const std::size_t head_end = rows.size() / 3;
  const std::size_t torso_end = 2 * rows.size() / 3;
  std::uint64_t groups[3] = {0, 0, 0};
  std::uint64_t total_m = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int group = i < head_end ? 0 : (i < torso_end ? 1 : 2);
    groups[group] += rows[i].m;
    total_m += rows[i].m;
  }
  BudgetShares shares;
  if (total_m > 0) {
    const auto denom = static_cast<double>(total_m);
    shares.head = static_cast<double>(groups[0]) / denom;
    shares.torso = static_cast<double>(groups[1]) / denom;
    shares.tail = static_cast<double>(groups[2]) / denom;
  }
  return shares;
}

std::string render_budget_report(const std::map<std::string, std::size_t>& counts,
                                 const BudgetPlan& plan, double beta,
                                 const std::string& basis_note) {
  const auto rows = ranked_rows(counts, plan);
  const BudgetShares shares = budget_shares(counts, plan);
  std::uint64_t total_m = 0;
  for (const auto& row : rows) total_m += row.m;

  std::string text;
  if (!basis_note.empty()) text += "# budget basis: " + basis_note + "\n";
  char summary[240];
  std::snprintf(summary, sizeof(summary),
                "# M=%llu beta=%.6g sum_m=%llu head_share=%.6f torso_share=%.6f "
                "tail_share=%.6f\n",
                static_cast<unsigned long long>(plan.total_budget), beta,
                static_cast<unsigned long long>(total_m), shares.head, shares.torso,
                shares.tail);
  text += summary;
  for (const auto& row : rows) {
    text += *row.doc;
    text += '\t';
    text += std::to_string(row.n);
    text += '\t';
    text += std::to_string(row.m);
    text += '\n';
  }
  return text;
}

}  // namespace mvg
