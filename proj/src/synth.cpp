#include "mvg/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mvg/error.hpp"

namespace mvg {
namespace {

void validate_pyp(const PypParams& params) {
  if (!(params.alpha > 0.0)) throw ParamError("alpha must be > 0");
  if (!(params.beta > 0.0 && params.beta < 1.0)) {
    throw ParamError("beta must lie in (0, 1) for the seating process");
  }
}

std::string doc_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "d%06zu", i);
  return buf;
}

std::string query_name(std::size_t doc, std::size_t q) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "q%06zu_%05zu", doc, q);
  return buf;
}

std::size_t draw_query_count(const QueryLaw& law, Rng& rng) {
  switch (law.kind) {
    case QueryLaw::Kind::Fixed:
      return law.fixed_n;
    case QueryLaw::Kind::PowerLaw: {
      const double u = rng.next_double();
      const auto lo = static_cast<double>(law.n_min);
      const auto hi = static_cast<double>(law.n_max);
      double x;
      if (std::abs(law.exponent - 1.0) < 1e-12) {
        x = lo * std::pow(hi / lo, u);
      } else {
        const double p = 1.0 - law.exponent;
        x = std::pow(std::pow(lo, p) + u * (std::pow(hi, p) - std::pow(lo, p)), 1.0 / p);
      }
      const auto n = static_cast<std::size_t>(std::floor(x));
      return std::clamp(n, law.n_min, law.n_max);
    }
  }
  throw ParamError("unknown query law");
}

void validate_config(const GenerativeConfig& config) {
  if (config.dim < 2) throw ParamError("generator requires dim >= 2");
  if (!(config.kappa >= 0.0)) throw ParamError("kappa must be >= 0");
  if (config.fixed_intents == 0) validate_pyp(config.pyp);
  if (!(config.train_fraction >= 0.0 && config.train_fraction <= 1.0)) {
    throw ParamError("train fraction must lie in [0, 1]");
  }
  if (!(config.max_mean_cos > -1.0 && config.max_mean_cos <= 1.0)) {
    throw ParamError("mean separation cosine must lie in (-1, 1]");
  }
  switch (config.law.kind) {
    case QueryLaw::Kind::Fixed:
      if (config.law.fixed_n == 0) throw ParamError("fixed query count must be >= 1");
      break;
    case QueryLaw::Kind::PowerLaw:
      if (config.law.n_min == 0 || config.law.n_min > config.law.n_max) {
        throw ParamError("power-law query range requires 1 <= n_min <= n_max");
      }
      break;
  }
}

}  // namespace

Seating pyp_sample_seating(const PypParams& params, std::size_t n, Rng& rng) {
  validate_pyp(params);
  Seating seating;
  seating.tables.reserve(n);
  std::vector<std::size_t> occupancy;  // customers at table k (0-based)
  for (std::size_t customer = 0; customer < n; ++customer) {
    const auto seated = static_cast<double>(customer);
    const double denom = seated + params.alpha;
    const double u = rng.next_double() * denom;
    double cumulative = 0.0;
    std::uint32_t chosen = 0;  // 0 means "new table"
    for (std::size_t k = 0; k < occupancy.size(); ++k) {
      cumulative += static_cast<double>(occupancy[k]) - params.beta;
      if (u < cumulative) {
        chosen = static_cast<std::uint32_t>(k + 1);
        break;
      }
    }
    if (chosen == 0) {
      occupancy.push_back(1);
      chosen = static_cast<std::uint32_t>(occupancy.size());
    } else {
      ++occupancy[chosen - 1];
    }
    seating.tables.push_back(chosen);
  }
  seating.table_count = static_cast<std::uint32_t>(occupancy.size());
  return seating;
}

std::vector<float> uniform_unit_vector(std::uint32_t dim, Rng& rng) {
  std::vector<float> v(dim);
  for (;;) {
    double sumsq = 0.0;
    std::vector<double> z(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      z[i] = rng.next_normal();
      sumsq += z[i] * z[i];
    }
    const double norm = std::sqrt(sumsq);
    if (norm < 1e-12) continue;
    for (std::uint32_t i = 0; i < dim; ++i) {
      v[i] = static_cast<float>(z[i] / norm);
    }
    return v;
  }
}

std::vector<float> sample_vmf(std::span<const float> mu, double kappa, Rng& rng) {
  const auto dim = static_cast<std::uint32_t>(mu.size());
  if (dim < 2) throw ParamError("vMF sampling requires dim >= 2");
  if (!(kappa >= 0.0)) throw ParamError("kappa must be >= 0");
  double mu_norm_sq = 0.0;
  for (const float m : mu) mu_norm_sq += static_cast<double>(m) * static_cast<double>(m);
  if (std::abs(std::sqrt(mu_norm_sq) - 1.0) > 1e-4) {
    throw DataError("vMF mean direction must be a unit vector");
  }
  if (kappa == 0.0) return uniform_unit_vector(dim, rng);

  // Wood's envelope for the cosine w between sample and mean.
  const double r1 = static_cast<double>(dim) - 1.0;
  const double b = r1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + r1 * r1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + r1 * std::log(1.0 - x0 * x0);
  double w = 0.0;
  for (;;) {
    const double z = rng.next_beta(r1 / 2.0, r1 / 2.0);
    const double u = 1.0 - rng.next_double();  // (0, 1]
    w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    if (kappa * w + r1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
  }

  // Uniform tangent direction orthogonal to mu.
  std::vector<double> tangent(dim);
  for (;;) {
    double proj = 0.0;
    for (std::uint32_t i = 0; i < dim; ++i) {
      tangent[i] = rng.next_normal();
      proj += tangent[i] * static_cast<double>(mu[i]);
    }
    double sumsq = 0.0;
    for (std::uint32_t i = 0; i < dim; ++i) {
      tangent[i] -= proj * static_cast<double>(mu[i]);
      sumsq += tangent[i] * tangent[i];
    }
    const double norm = std::sqrt(sumsq);
    if (norm < 1e-12) continue;
    for (std::uint32_t i = 0; i < dim; ++i) tangent[i] /= norm;
    break;
  }

  const double sin_part = std::sqrt(std::max(0.0, 1.0 - w * w));
  std::vector<float> sample(dim);
  double sumsq = 0.0;
  for (std::uint32_t i = 0; i < dim; ++i) {
    const double value = w * static_cast<double>(mu[i]) + sin_part * tangent[i];
    sample[i] = static_cast<float>(value);
    sumsq += value * value;
  }
  const double norm = std::sqrt(sumsq);
  for (std::uint32_t i = 0; i < dim; ++i) {
    sample[i] = static_cast<float>(sample[i] / norm);
  }
  return sample;
}

SyntheticDataset generate_dataset(const GenerativeConfig& config) {
  validate_config(config);

  SyntheticDataset data{EmbeddingStore(config.dim), EmbeddingStore(config.dim),
                        EmbeddingStore(config.dim), RelevanceGraph{}, QrelSet{}, {}};

  for (std::size_t d = 0; d < config.doc_count; ++d) {
    Rng rng = Rng::substream(config.seed, d);
    const std::string doc_id = doc_name(d);
    DocGroundTruth truth;

    const std::size_t n_queries = draw_query_count(config.law, rng);

    auto draw_separated_mean = [&]() {
      for (int attempt = 0; attempt < 10000; ++attempt) {
        auto candidate = uniform_unit_vector(config.dim, rng);
        bool ok = true;
        for (const auto& existing : truth.means) {
          double cos = 0.0;
          for (std::uint32_t i = 0; i < config.dim; ++i) {
            cos += static_cast<double>(candidate[i]) * static_cast<double>(existing[i]);
          }
          if (cos >= config.max_mean_cos) {
            ok = false;
            break;
          }
        }
        if (ok) return candidate;
      }
      throw ParamError("could not place a separated intent mean; relax max_mean_cos or dim");
    };

    // Intent index per query, 1-based.
    std::vector<std::uint32_t> intent_of(n_queries);
    if (config.fixed_intents > 0) {
      for (std::size_t j = 0; j < config.fixed_intents; ++j) {
        truth.means.push_back(draw_separated_mean());
      }
      for (auto& intent : intent_of) {
        intent = static_cast<std::uint32_t>(rng.next_below(config.fixed_intents)) + 1;
      }
    } else {
      const Seating seating = pyp_sample_seating(config.pyp, n_queries, rng);
      intent_of = seating.tables;
      for (std::uint32_t j = 0; j < seating.table_count; ++j) {
        truth.means.push_back(draw_separated_mean());
      }
    }

    // Draw query vectors; split the prefix into training, the rest held out.
    auto train_count = static_cast<std::size_t>(
        std::llround(config.train_fraction * static_cast<double>(n_queries)));
    train_count = std::clamp<std::size_t>(std::max<std::size_t>(train_count, 1), 1, n_queries);

    std::vector<double> mean_acc(config.dim, 0.0);
    for (std::size_t q = 0; q < n_queries; ++q) {
      const auto& mu = truth.means[intent_of[q] - 1];
      const auto vec = sample_vmf({mu.data(), mu.size()}, config.kappa, rng);
      const std::string query_id = query_name(d, q);
      truth.assignment[query_id] = intent_of[q];
      if (q < train_count) {
        data.train_queries.append(query_id, {vec.data(), vec.size()});
        data.graph.add_edge(query_id, doc_id, 1.0);
        for (std::uint32_t i = 0; i < config.dim; ++i) {
          mean_acc[i] += static_cast<double>(vec[i]);
        }
      } else {
        data.test_queries.append(query_id, {vec.data(), vec.size()});
        data.qrels.relevant[query_id].insert(doc_id);
      }
    }

    double norm_sq = 0.0;
    for (const double v : mean_acc) norm_sq += v * v;
    std::vector<float> doc_vec(config.dim);
    if (std::sqrt(norm_sq) < 1e-8) {
      // Training queries cancelled out; fall back to the first one.
      const auto first = data.train_queries.row(data.train_queries.size() - train_count);
      std::copy(first.begin(), first.end(), doc_vec.begin());
    } else {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (std::uint32_t i = 0; i < config.dim; ++i) {
        doc_vec[i] = static_cast<float>(mean_acc[i] * inv);
      }
    }
    data.docs.append(doc_id, {doc_vec.data(), doc_vec.size()});
    data.truth.emplace(doc_id, std::move(truth));
  }

  data.graph.finalize();
  return data;
}

void write_dataset(const SyntheticDataset& dataset, const GenerativeConfig& config,
                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  dataset.docs.save(out_dir / "docs.mvge");
  dataset.train_queries.save(out_dir / "queries_train.mvge");
  dataset.test_queries.save(out_dir / "queries_test.mvge");

  {
    std::ofstream out(out_dir / "relevance.tsv", std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write relevance.tsv");
    // One pass over docs in sorted order keeps the file deterministic.
    for (const auto& doc : dataset.graph.doc_ids()) {
      for (const auto& qw : dataset.graph.queries_of(doc)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", qw.weight);
        out << qw.query_id << '\t' << doc << '\t' << buf << '\n';
      }
    }
  }
  {
    std::ofstream out(out_dir / "qrels.tsv", std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write qrels.tsv");
    for (const auto& [query, docs] : dataset.qrels.relevant) {
      for (const auto& doc : docs) {
        out << query << '\t' << doc << '\t' << 1 << '\n';
      }
    }
  }
  {
    nlohmann::json truth;
    truth["dim"] = config.dim;
    truth["kappa"] = config.kappa;
    truth["seed"] = config.seed;
    truth["fixed_intents"] = config.fixed_intents;
    truth["train_fraction"] = config.train_fraction;
    if (config.fixed_intents == 0) {
      truth["pyp"] = {{"alpha", config.pyp.alpha}, {"beta", config.pyp.beta}};
    }
    nlohmann::json docs = nlohmann::json::object();
    for (const auto& [doc_id, doc_truth] : dataset.truth) {
      nlohmann::json entry;
      entry["means"] = doc_truth.means;
      entry["assignment"] = doc_truth.assignment;
      // Bounding-box diversity of the doc's queries, the skew statistic the
      // generator is meant to reproduce.
      std::vector<std::vector<float>> vecs;
      vecs.reserve(doc_truth.assignment.size());
      for (const auto& [query_id, intent] : doc_truth.assignment) {
        (void)intent;
        const auto idx = dataset.train_queries.find(query_id);
        const auto row = idx ? dataset.train_queries.row(*idx)
                             : dataset.test_queries.row(*dataset.test_queries.find(query_id));
        vecs.emplace_back(row.begin(), row.end());
      }
      entry["n_queries"] = vecs.size();
      entry["query_diversity"] = diversity(vecs);
      docs[doc_id] = std::move(entry);
    }
    truth["docs"] = std::move(docs);
    std::ofstream out(out_dir / "ground_truth.json", std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write ground_truth.json");
    out << truth.dump(2) << '\n';
  }
}

MonteCarloTables monte_carlo_tables(const PypParams& params, std::size_t n, std::size_t trials,
                                    std::uint64_t seed, unsigned threads) {
  validate_pyp(params);
  if (trials < 2) throw ParamError("monte carlo estimation requires trials >= 2");

  std::vector<std::uint32_t> table_counts(trials);
  auto body = [&](std::size_t t) {
    Rng rng = Rng::substream(seed, t);
    table_counts[t] = pyp_sample_seating(params, n, rng).table_count;
  };

  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), trials));
  if (n_threads <= 1) {
    for (std::size_t t = 0; t < trials; ++t) body(t);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t t = cursor.fetch_add(1);
          if (t >= trials) return;
          body(t);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  // Integer sums make the reduction independent of thread scheduling.
  unsigned long long sum = 0;
  unsigned long long sum_sq = 0;
  for (const auto c : table_counts) {
    sum += c;
    sum_sq += static_cast<unsigned long long>(c) * c;
  }
  const auto t = static_cast<double>(trials);
  MonteCarloTables result;
  result.mean = static_cast<double>(sum) / t;
  const double variance =
      (static_cast<double>(sum_sq) - static_cast<double>(sum) * result.mean) / (t - 1.0);
  result.stderr_mean = std::sqrt(std::max(0.0, variance) / t);
  return result;
}

}  // namespace mvg
