#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mvg/budget.hpp"
#include "mvg/clustering.hpp"
#include "mvg/embedding_store.hpp"
#include "mvg/error.hpp"
#include "mvg/eval.hpp"
#include "mvg/index.hpp"
#include "mvg/pipeline.hpp"
#include "mvg/relevance_graph.hpp"
#include "mvg/synth.hpp"

namespace {

using nlohmann::json;

void emit(const json& value, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << value.dump(2) << '\n';
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw mvg::FormatError("cannot write " + out_path);
  out << value.dump(2) << '\n';
}

int run_ingest_check(const std::string& embeddings, const std::string& relevance,
                     const std::string& out_path) {
  json report = json::object();
  if (!embeddings.empty()) {
    const auto store = mvg::EmbeddingStore::load(embeddings);
    double max_dev = 0.0;
    for (std::size_t i = 0; i < store.size(); ++i) {
      double sumsq = 0.0;
      for (const float v : store.row(i)) sumsq += static_cast<double>(v) * v;
      max_dev = std::max(max_dev, std::abs(std::sqrt(sumsq) - 1.0));
    }
    report["embeddings"] = {{"path", embeddings},
                            {"dim", store.dim()},
                            {"count", store.size()},
                            {"max_norm_deviation", max_dev}};
  }
  if (!relevance.empty()) {
    mvg::GraphLoadReport load_report;
    const auto graph = mvg::RelevanceGraph::load(relevance, &load_report);
    report["relevance"] = {{"path", relevance},
                           {"lines", load_report.lines},
                           {"kept_edges", load_report.kept_edges},
                           {"dropped_nonpositive", load_report.dropped_nonpositive},
                           {"merged_duplicates", load_report.merged_duplicates},
                           {"documents", graph.doc_ids().size()}};
  }
  emit(report, out_path);
  return 0;
}

int run_budget_report(const std::string& relevance, const std::string& docs_path, double beta,
                      std::optional<double> m_avg, std::optional<std::uint64_t> m_total,
                      const std::string& out_path) {
  const auto graph = mvg::RelevanceGraph::load(relevance);
  const auto counts = mvg::doc_query_counts(graph);

  std::size_t corpus = counts.size();
  if (!docs_path.empty()) {
    corpus = mvg::EmbeddingStore::load(docs_path).size();
  }
  if (m_avg.has_value() == m_total.has_value()) {
    throw mvg::ParamError("exactly one of --m-avg / --m-total must be given");
  }
  const auto plan = m_avg ? mvg::budget_from_average(counts, beta, *m_avg, corpus)
                          : mvg::allocate_budget(counts, beta, *m_total);

  std::string basis;
  if (m_avg) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "m_avg=%.6g x whole-corpus document count (%zu docs)",
                  *m_avg, corpus);
    basis = buf;
  }
  const std::string text = mvg::render_budget_report(counts, plan, beta, basis);

  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw mvg::FormatError("cannot write " + out_path);
    out << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavioral vector augmentation for dense retrieval"};
  app.require_subcommand(1);

  // ingest-check
  std::string ic_embeddings, ic_relevance, ic_out;
  auto* ingest_check = app.add_subcommand("ingest-check", "Validate embedding/relevance files");
  ingest_check->add_option("--embeddings", ic_embeddings, "MVGE embedding file");
  ingest_check->add_option("--relevance", ic_relevance, "Relevance TSV");
  ingest_check->add_option("--out", ic_out, "Write the JSON report here instead of stdout");

  // budget-report
  std::string br_relevance, br_docs, br_out;
  double br_beta = 0.5;
  std::optional<double> br_m_avg;
  std::optional<std::uint64_t> br_m_total;
  auto* budget_report =
      app.add_subcommand("budget-report", "Per-document budget allocation as TSV");
  budget_report->add_option("--relevance", br_relevance, "Relevance TSV")->required();
  budget_report->add_option("--docs", br_docs, "Document MVGE (corpus count for m_avg)");
  budget_report->add_option("--beta", br_beta, "Allocation exponent in [0,1]");
  budget_report->add_option("--m-avg", br_m_avg, "Average behavioral vectors per document");
  budget_report->add_option("--m-total", br_m_total, "Total behavioral vector budget");
  budget_report->add_option("--out", br_out, "Write the TSV here instead of stdout");

  // shared pipeline-style config
  mvg::PipelineConfig config;
  std::optional<double> opt_m_avg;
  std::optional<std::uint64_t> opt_m_total;
  std::string docs_path, queries_path, relevance_path, test_queries_path, qrels_path, out_dir;

  auto add_augment_options = [&](CLI::App* cmd) {
    cmd->add_option("--docs", docs_path, "Document MVGE")->required();
    cmd->add_option("--queries", queries_path, "Training query MVGE")->required();
    cmd->add_option("--relevance", relevance_path, "Relevance TSV")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--beta", config.beta, "Allocation exponent in [0,1]");
    cmd->add_option("--m-avg", opt_m_avg, "Average behavioral vectors per document");
    cmd->add_option("--m-total", opt_m_total, "Total behavioral vector budget");
    cmd->add_option("--seed", config.seed, "PRNG seed");
    cmd->add_option("--max-iters", config.max_iters, "Clustering iteration cap");
    cmd->add_option("--threads", config.threads, "Worker threads");
    cmd->add_flag("--uniform-weights", config.uniform_weights,
                  "Treat every relevance edge weight as 1.0");
  };

  auto* augment = app.add_subcommand("augment", "Learn behavioral vectors");
  add_augment_options(augment);

  auto* pipeline =
      app.add_subcommand("pipeline", "Augment, index, search, and evaluate both arms");
  add_augment_options(pipeline);
  pipeline->add_option("--test-queries", test_queries_path, "Held-out query MVGE")->required();
  pipeline->add_option("--qrels", qrels_path, "Qrels TSV")->required();
  pipeline->add_option("--k", config.k_values, "Evaluation depths")->delimiter(',');
  pipeline->add_option("--run-tag", config.run_tag, "Tag for TREC run lines");

  // build-index
  std::string bi_docs, bi_behavioral, bi_out;
  auto* build_index = app.add_subcommand("build-index", "Build a flat exact index");
  build_index->add_option("--docs", bi_docs, "Document MVGE")->required();
  build_index->add_option("--behavioral", bi_behavioral, "Behavioral MVGE (optional)");
  build_index->add_option("--out", bi_out, "Index output path")->required();

  // search
  std::string s_index, s_queries, s_out, s_tag = "mvg-flat";
  std::size_t s_k = 100;
  unsigned s_threads = 1;
  auto* search = app.add_subcommand("search", "Top-k retrieval to a TREC run file");
  search->add_option("--index", s_index, "Index file")->required();
  search->add_option("--queries", s_queries, "Query MVGE")->required();
  search->add_option("--k", s_k, "Retrieval depth");
  search->add_option("--out", s_out, "Run file output path")->required();
  search->add_option("--run-tag", s_tag, "Tag for TREC run lines");
  search->add_option("--threads", s_threads, "Worker threads");

  // eval
  std::string e_run, e_qrels, e_baseline, e_out;
  std::vector<std::size_t> e_k = {10, 100};
  auto* eval = app.add_subcommand("eval", "Score a run file against qrels");
  eval->add_option("--run", e_run, "TREC run file")->required();
  eval->add_option("--qrels", e_qrels, "Qrels TSV")->required();
  eval->add_option("--baseline", e_baseline, "Baseline run for significance testing");
  eval->add_option("--k", e_k, "Evaluation depths")->delimiter(',');
  eval->add_option("--out", e_out, "Write the JSON report here instead of stdout");

  // simulate
  mvg::GenerativeConfig gen;
  std::string sim_out;
  std::size_t sim_fixed_n = 0;
  double sim_exponent = 0.0;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("--out", sim_out, "Output directory")->required();
  simulate->add_option("--docs", gen.doc_count, "Document count")->required();
  simulate->add_option("--dim", gen.dim, "Vector dimensionality");
  simulate->add_option("--alpha", gen.pyp.alpha, "Seating concentration alpha");
  simulate->add_option("--beta", gen.pyp.beta, "Seating discount beta");
  simulate->add_option("--kappa", gen.kappa, "vMF concentration");
  simulate->add_option("--queries-per-doc", sim_fixed_n, "Fixed query count per document");
  simulate->add_option("--power-law", sim_exponent,
                       "Power-law exponent for per-document query counts");
  simulate->add_option("--n-min", gen.law.n_min, "Power-law minimum query count");
  simulate->add_option("--n-max", gen.law.n_max, "Power-law maximum query count");
  simulate->add_option("--intents", gen.fixed_intents,
                       "Fixed intents per document (0 = seating process)");
  simulate->add_option("--train-frac", gen.train_fraction, "Per-document training split");
  simulate->add_option("--max-mean-cos", gen.max_mean_cos, "Intent mean separation bound");
  simulate->add_option("--seed", gen.seed, "PRNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest_check->parsed()) {
      if (ic_embeddings.empty() && ic_relevance.empty()) {
        throw mvg::ParamError("ingest-check needs --embeddings and/or --relevance");
      }
      return run_ingest_check(ic_embeddings, ic_relevance, ic_out);
    }
    if (budget_report->parsed()) {
      return run_budget_report(br_relevance, br_docs, br_beta, br_m_avg, br_m_total, br_out);
    }
    if (augment->parsed() || pipeline->parsed()) {
      config.doc_embeddings = docs_path;
      config.query_embeddings = queries_path;
      config.relevance = relevance_path;
      config.out_dir = out_dir;
      if (opt_m_avg && opt_m_total) {
        throw mvg::ParamError("--m-avg and --m-total are mutually exclusive");
      }
      config.m_avg = opt_m_avg;
      config.m_total = opt_m_total;
      if (!config.m_avg && !config.m_total) config.m_avg = 0.3;
      if (augment->parsed()) {
        mvg::cmd_augment(config);
        return 0;
      }
      config.test_query_embeddings = test_queries_path;
      config.qrels = qrels_path;
      mvg::cmd_pipeline(config);
      return 0;
    }
    if (build_index->parsed()) {
      const auto docs = mvg::EmbeddingStore::load(bi_docs);
      std::map<std::string, mvg::BehavioralSet> sets;
      if (!bi_behavioral.empty()) {
        sets = mvg::behavioral_from_store(mvg::EmbeddingStore::load(bi_behavioral), docs);
      }
      const auto index = mvg::VectorIndex::build(docs, sets);
      index.save(bi_out);
      const auto stats = index.stats();
      emit(json{{"doc_count", stats.doc_count},
                {"entry_count", stats.entry_count},
                {"payload_bytes", stats.payload_bytes},
                {"size_ratio", stats.size_ratio}},
           "");
      return 0;
    }
    if (search->parsed()) {
      const auto index = mvg::VectorIndex::load(s_index);
      const auto queries = mvg::EmbeddingStore::load(s_queries);
      const auto results = index.search_batch(queries, s_k, s_threads);
      mvg::write_trec_run(s_out, results, s_tag);
      return 0;
    }
    if (eval->parsed()) {
      const auto results = mvg::read_trec_run(e_run);
      const auto qrels = mvg::QrelSet::load(e_qrels);
      json report;
      if (e_baseline.empty()) {
        report = mvg::make_eval_report(results, qrels, e_k);
      } else {
        const auto baseline = mvg::read_trec_run(e_baseline);
        report = mvg::make_eval_report(results, qrels, e_k, &baseline);
      }
      emit(report, e_out);
      return 0;
    }
    if (simulate->parsed()) {
      if (sim_fixed_n > 0 && sim_exponent > 0.0) {
        throw mvg::ParamError("--queries-per-doc and --power-law are mutually exclusive");
      }
      if (sim_exponent > 0.0) {
        gen.law.kind = mvg::QueryLaw::Kind::PowerLaw;
        gen.law.exponent = sim_exponent;
      } else {
        gen.law.kind = mvg::QueryLaw::Kind::Fixed;
        gen.law.fixed_n = sim_fixed_n > 0 ? sim_fixed_n : 10;
      }
      const auto dataset = mvg::generate_dataset(gen);
      mvg::write_dataset(dataset, gen, sim_out);
      return 0;
    }
  } catch (const mvg::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 2;
  } catch (const mvg::ParamError& e) {
    std::cerr << "param error: " << e.what() << '\n';
    return 4;
  } catch (const mvg::Error& e) {  // DataError, EvalError
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
