#include "mvg/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "mvg/budget.hpp"
#include "mvg/clustering.hpp"
#include "mvg/error.hpp"
#include "mvg/index.hpp"
#include "mvg/relevance_graph.hpp"

namespace mvg {
namespace {

void validate(const PipelineConfig& config) {
  if (config.m_avg.has_value() == config.m_total.has_value()) {
    throw ParamError("exactly one of m_avg / total budget must be given");
  }
  if (config.k_values.empty()) throw ParamError("at least one k value required");
  for (const auto k : config.k_values) {
    if (k == 0) throw ParamError("k values must be positive");
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

struct AugmentArtifacts {
  EmbeddingStore docs;
  EmbeddingStore queries;
  AugmentResult augmented;
  nlohmann::json manifest;
};

AugmentArtifacts run_augment(const PipelineConfig& config) {
  validate(config);
  std::filesystem::create_directories(config.out_dir);

  EmbeddingStore docs = EmbeddingStore::load(config.doc_embeddings);
  EmbeddingStore queries = EmbeddingStore::load(config.query_embeddings);
  GraphLoadReport report;
  RelevanceGraph graph = RelevanceGraph::load(config.relevance, &report);

  const auto counts = doc_query_counts(graph);
  const BudgetPlan plan =
      config.m_avg ? budget_from_average(counts, config.beta, *config.m_avg, docs.size())
                   : allocate_budget(counts, config.beta, *config.m_total);

  AugmentOptions options;
  options.seed = config.seed;
  options.max_iters = config.max_iters;
  options.threads = config.threads;
  options.uniform_weights = config.uniform_weights;
  AugmentResult augmented = augment_all(docs, queries, graph, plan, options);

  const EmbeddingStore behavioral = behavioral_to_store(augmented, docs.dim());
  behavioral.save(config.out_dir / "behavioral.mvge");

  nlohmann::json manifest;
  manifest["seed"] = config.seed;
  manifest["beta"] = config.beta;
  manifest["max_iters"] = config.max_iters;
  manifest["uniform_weights"] = config.uniform_weights;
  manifest["rng"] = "splitmix64 substream keyed by (seed, interned doc index)";
  if (config.m_avg) {
    manifest["m_avg"] = *config.m_avg;
    manifest["m_avg_basis"] = "whole-corpus document count";
  }
  manifest["budget"] = {{"total", plan.total_budget}, {"allocated", plan.allocated()}};
  manifest["graph"] = {{"lines", report.lines},
                       {"kept_edges", report.kept_edges},
                       {"dropped_nonpositive", report.dropped_nonpositive},
                       {"merged_duplicates", report.merged_duplicates}};
  manifest["doc_count"] = docs.size();
  manifest["query_count"] = queries.size();
  manifest["behavioral_vectors"] = augmented.total_centers;
  manifest["index_size_ratio"] =
      docs.empty() ? 0.0
                   : 1.0 + static_cast<double>(augmented.total_centers) /
                               static_cast<double>(docs.size());
  nlohmann::json convergence = nlohmann::json::object();
  for (const auto& [doc_id, stats] : augmented.stats) {
    convergence[doc_id] = {{"converged", stats.converged},
                           {"iterations", stats.iterations},
                           {"centers", stats.centers_kept}};
  }
  manifest["convergence"] = std::move(convergence);
  write_json(config.out_dir / "manifest.json", manifest);

  return {std::move(docs), std::move(queries), std::move(augmented), std::move(manifest)};
}

nlohmann::json metric_entry(double raw) {
  return {{"raw", raw}, {"pct", 100.0 * raw}};
}

nlohmann::json sign_test_json(const SignTestResult& test) {
  return {{"p_value", test.p_value},
          {"n_positive", test.n_positive},
          {"n_negative", test.n_negative},
          {"n_zero", test.n_zero},
          {"degenerate", test.degenerate}};
}

}  // namespace

nlohmann::json make_eval_report(const std::vector<RetrievalResult>& results,
                                const QrelSet& qrels, const std::vector<std::size_t>& k_values,
                                const std::vector<RetrievalResult>* baseline) {
  nlohmann::json report;
  report["conventions"] = {
      {"recall_denominator", "n_relevant"},
      {"ap_normalizer", "min(n_relevant, k)"},
      {"aggregation", "unweighted macro average over judged queries"}};
  report["k_values"] = k_values;

  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json significance = nlohmann::json::object();
  std::size_t n_queries = 0;
  std::size_t n_skipped = 0;
  for (const auto k : k_values) {
    const MacroResult macro = macro_metrics(results, qrels, k);
    n_queries = macro.query_ids.size();
    n_skipped = macro.n_skipped;
    const std::string suffix = "@" + std::to_string(k);
    metrics["recall" + suffix] = metric_entry(macro.recall_mean);
    metrics["map" + suffix] = metric_entry(macro.ap_mean);

    if (baseline != nullptr) {
      const MacroResult base = macro_metrics(*baseline, qrels, k);
      std::map<std::string, std::pair<double, double>> base_by_query;
      for (std::size_t i = 0; i < base.query_ids.size(); ++i) {
        base_by_query[base.query_ids[i]] = {base.per_query_recall[i], base.per_query_ap[i]};
      }
      std::vector<double> recall_diffs;
      std::vector<double> ap_diffs;
      for (std::size_t i = 0; i < macro.query_ids.size(); ++i) {
        auto it = base_by_query.find(macro.query_ids[i]);
        if (it == base_by_query.end()) continue;
        recall_diffs.push_back(macro.per_query_recall[i] - it->second.first);
        ap_diffs.push_back(macro.per_query_ap[i] - it->second.second);
      }
      significance["recall" + suffix] = sign_test_json(macro_sign_test(recall_diffs));
      significance["map" + suffix] = sign_test_json(macro_sign_test(ap_diffs));
    }
  }
  report["metrics"] = std::move(metrics);
  report["n_queries"] = n_queries;
  report["n_skipped"] = n_skipped;
  if (baseline != nullptr) report["significance_vs_baseline"] = std::move(significance);
  return report;
}

nlohmann::json cmd_augment(const PipelineConfig& config) {
  return run_augment(config).manifest;
}

nlohmann::json cmd_pipeline(const PipelineConfig& config) {
  AugmentArtifacts artifacts = run_augment(config);

  const VectorIndex semantic = VectorIndex::build(artifacts.docs, {});
  std::map<std::string, BehavioralSet> sets;
  for (const auto& [doc_id, set] : artifacts.augmented.sets) sets.emplace(doc_id, set);
  const VectorIndex augmented = VectorIndex::build(artifacts.docs, sets);
  semantic.save(config.out_dir / "index_semantic.mvgi");
  augmented.save(config.out_dir / "index_augmented.mvgi");

  const EmbeddingStore test_queries = EmbeddingStore::load(config.test_query_embeddings);
  const QrelSet qrels = QrelSet::load(config.qrels);

  const std::size_t depth = *std::max_element(config.k_values.begin(), config.k_values.end());
  const auto baseline_runs = semantic.search_batch(test_queries, depth, config.threads);
  const auto augmented_runs = augmented.search_batch(test_queries, depth, config.threads);
  write_trec_run(config.out_dir / "run_baseline.trec", baseline_runs, config.run_tag);
  write_trec_run(config.out_dir / "run_augmented.trec", augmented_runs, config.run_tag);

  const nlohmann::json base_report = make_eval_report(baseline_runs, qrels, config.k_values);
  const nlohmann::json aug_report =
      make_eval_report(augmented_runs, qrels, config.k_values, &baseline_runs);
  write_json(config.out_dir / "report_baseline.json", base_report);
  write_json(config.out_dir / "report_augmented.json", aug_report);

  nlohmann::json comparison;
  comparison["baseline"] = base_report["metrics"];
  comparison["augmented"] = aug_report["metrics"];
  comparison["significance"] = aug_report["significance_vs_baseline"];
  comparison["index"] = {{"semantic_entries", semantic.entry_count()},
                         {"augmented_entries", augmented.entry_count()},
                         {"size_ratio", augmented.stats().size_ratio}};
  nlohmann::json deltas = nlohmann::json::object();
  for (const auto& [name, value] : aug_report["metrics"].items()) {
    deltas[name] = {{"pct", value["pct"].get<double>() -
                               base_report["metrics"][name]["pct"].get<double>()}};
  }
  comparison["delta"] = std::move(deltas);
  write_json(config.out_dir / "comparison.json", comparison);
  return comparison;
}

}  // namespace mvg
