#include "mvg/index.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "mvg/error.hpp"

namespace mvg {
namespace {

constexpr char kMagic[4] = {'M', 'V', 'G', 'I'};
constexpr std::uint32_t kVersion = 1;

double dot(std::span<const float> a, const float* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

VectorIndex VectorIndex::build(const EmbeddingStore& docs,
                               const std::map<std::string, BehavioralSet>& behavioral) {
  VectorIndex index;
  index.dim_ = docs.dim();
  index.doc_ids_ = docs.ids();

  std::size_t extra = 0;
  for (const auto& [doc_id, set] : behavioral) {
    if (!docs.find(doc_id)) {
      throw DataError("behavioral set references unknown document '" + doc_id + "'");
    }
    extra += set.centers.size();
  }

  const std::size_t total = docs.size() + extra;
  index.vecs_.reserve(total * index.dim_);
  index.entry_doc_.reserve(total);
  index.origins_.reserve(total);

  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto row = docs.row(i);
    index.vecs_.insert(index.vecs_.end(), row.begin(), row.end());
    index.entry_doc_.push_back(i);
    index.origins_.push_back(0);
  }
  for (const auto& [doc_id, set] : behavioral) {
    const std::size_t slot = *docs.find(doc_id);
    for (std::size_t j = 0; j < set.centers.size(); ++j) {
      const auto& c = set.centers[j];
      if (c.size() != index.dim_) {
        throw DataError("behavioral vector dimension mismatch for document '" + doc_id + "'");
      }
      index.vecs_.insert(index.vecs_.end(), c.begin(), c.end());
      index.entry_doc_.push_back(slot);
      index.origins_.push_back(static_cast<std::uint32_t>(j + 1));
    }
  }

  // Lexicographic rank per doc slot, used for deterministic tie-breaks.
  std::vector<std::size_t> order(index.doc_ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return index.doc_ids_[a] < index.doc_ids_[b];
  });
  index.lex_rank_.resize(order.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    index.lex_rank_[order[rank]] = rank;
  }
  return index;
}

VectorIndex::Stats VectorIndex::stats() const {
  Stats s;
  s.doc_count = doc_ids_.size();
  s.entry_count = origins_.size();
  s.payload_bytes = vecs_.size() * sizeof(float);
  s.size_ratio = doc_ids_.empty()
                     ? 0.0
                     : static_cast<double>(s.entry_count) / static_cast<double>(s.doc_count);
  return s;
}

std::vector<double> VectorIndex::score_all_docs(std::span<const float> query_vec) const {
  if (query_vec.size() != dim_) throw DataError("query dimension mismatch in search");
  std::vector<double> best(doc_ids_.size(), -std::numeric_limits<double>::infinity());
  const float* base = vecs_.data();
  for (std::size_t e = 0; e < entry_doc_.size(); ++e) {
    const double score = dot(query_vec, base + e * dim_, dim_);
    double& slot = best[entry_doc_[e]];
    if (score > slot) slot = score;
  }
  return best;
}

RetrievalResult VectorIndex::search(std::span<const float> query_vec, std::size_t k,
                                    std::string_view query_id) const {
  if (k == 0) throw ParamError("k must be positive");
  const std::vector<double> best = score_all_docs(query_vec);

  std::vector<std::size_t> docs(doc_ids_.size());
  std::iota(docs.begin(), docs.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    if (best[a] != best[b]) return best[a] > best[b];
    return lex_rank_[a] < lex_rank_[b];
  };
  const std::size_t take = std::min(k, docs.size());
  std::partial_sort(docs.begin(), docs.begin() + take, docs.end(), better);

  RetrievalResult result;
  result.query_id = std::string(query_id);
  result.ranked.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    result.ranked.push_back({doc_ids_[docs[i]], best[docs[i]]});
  }
  return result;
}

std::vector<RetrievalResult> VectorIndex::search_batch(const EmbeddingStore& queries,
                                                       std::size_t k, unsigned threads) const {
  std::vector<RetrievalResult> results(queries.size());
  auto body = [&](std::size_t i) { results[i] = search(queries.row(i), k, queries.id(i)); };

  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), queries.size()));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) body(i);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = cursor.fetch_add(1);
          if (i >= queries.size()) return;
          body(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return results;
}

void VectorIndex::save(const std::filesystem::path& path) const {
  // Id table: each referenced doc once, in slot order.
  std::vector<std::uint64_t> id_offset(doc_ids_.size());
  std::string table;
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    id_offset[i] = table.size();
    const auto len = static_cast<std::uint32_t>(doc_ids_[i].size());
    table.append(reinterpret_cast<const char*>(&len), sizeof(len));
    table.append(doc_ids_[i]);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write index file: " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, dim_);
  write_pod(out, static_cast<std::uint64_t>(origins_.size()));
  write_pod(out, static_cast<std::uint64_t>(table.size()));
  for (std::size_t e = 0; e < origins_.size(); ++e) {
    if (origins_[e] > 255) {
      throw DataError("origin byte overflow: document has more than 255 behavioral vectors");
    }
    out.write(reinterpret_cast<const char*>(vecs_.data() + e * dim_),
              static_cast<std::streamsize>(dim_ * sizeof(float)));
    write_pod(out, id_offset[entry_doc_[e]]);
    write_pod(out, static_cast<std::uint8_t>(origins_[e]));
  }
  out.write(table.data(), static_cast<std::streamsize>(table.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open index file: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic in " + path.string() + " (expected MVGI)");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw FormatError("unsupported MVGI version " + std::to_string(version));
  }
  const auto dim = read_pod<std::uint32_t>(in);
  const auto entry_count = read_pod<std::uint64_t>(in);
  const auto table_bytes = read_pod<std::uint64_t>(in);
  if (!in || dim == 0) throw FormatError("bad header in " + path.string());

  std::vector<float> vecs(static_cast<std::size_t>(entry_count) * dim);
  std::vector<std::uint64_t> offsets(entry_count);
  std::vector<std::uint8_t> origin_bytes(entry_count);
  for (std::uint64_t e = 0; e < entry_count; ++e) {
    in.read(reinterpret_cast<char*>(vecs.data() + e * dim),
            static_cast<std::streamsize>(dim * sizeof(float)));
    offsets[e] = read_pod<std::uint64_t>(in);
    origin_bytes[e] = read_pod<std::uint8_t>(in);
  }
  std::string table(table_bytes, '\0');
  in.read(table.data(), static_cast<std::streamsize>(table_bytes));
  if (!in) throw FormatError("truncated index file: " + path.string());

  VectorIndex index;
  index.dim_ = dim;
  index.vecs_ = std::move(vecs);
  index.origins_.assign(origin_bytes.begin(), origin_bytes.end());
  index.entry_doc_.resize(entry_count);

  std::map<std::uint64_t, std::size_t> slot_of_offset;
  for (std::uint64_t e = 0; e < entry_count; ++e) {
    const std::uint64_t off = offsets[e];
    auto it = slot_of_offset.find(off);
    if (it == slot_of_offset.end()) {
      if (off + sizeof(std::uint32_t) > table.size()) {
        throw FormatError("id-table offset out of range in " + path.string());
      }
      std::uint32_t len = 0;
      std::memcpy(&len, table.data() + off, sizeof(len));
      if (off + sizeof(len) + len > table.size()) {
        throw FormatError("id-table entry out of range in " + path.string());
      }
      it = slot_of_offset.emplace(off, index.doc_ids_.size()).first;
      index.doc_ids_.emplace_back(table.substr(off + sizeof(len), len));
    }
    index.entry_doc_[e] = it->second;
  }

  std::vector<std::size_t> order(index.doc_ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return index.doc_ids_[a] < index.doc_ids_[b];
  });
  index.lex_rank_.resize(order.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    index.lex_rank_[order[rank]] = rank;
  }
  return index;
}

std::vector<RawHit> FlatBackend::query_top(std::span<const float> query_vec,
                                           std::size_t m) const {
  if (index_ == nullptr) throw DataError("backend queried before insert_all");
  if (query_vec.size() != index_->dim()) throw DataError("query dimension mismatch in search");
  std::vector<RawHit> hits;
  hits.reserve(index_->entry_count());
  for (std::size_t e = 0; e < index_->entry_count(); ++e) {
    double acc = 0.0;
    const auto v = index_->entry_vec(e);
    for (std::size_t i = 0; i < v.size(); ++i) {
      acc += static_cast<double>(query_vec[i]) * static_cast<double>(v[i]);
    }
    hits.push_back({e, acc});
  }
  const std::size_t take = std::min(m, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + take, hits.end(),
                    [](const RawHit& a, const RawHit& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.entry < b.entry;
                    });
  hits.resize(take);
  return hits;
}

RetrievalResult search_with_backend(const VectorIndex& index, const AnnBackend& backend,
                                    std::span<const float> query_vec, std::size_t k,
                                    std::string_view query_id) {
  if (k == 0) throw ParamError("k must be positive");
  const auto hits = backend.query_top(query_vec, 4 * k);

  // Keep each document's best raw hit.
  std::map<std::size_t, double> best;
  for (const auto& hit : hits) {
    const std::size_t slot = index.entry_doc(hit.entry);
    auto [it, inserted] = best.emplace(slot, hit.score);
    if (!inserted && hit.score > it->second) it->second = hit.score;
  }

  std::vector<ScoredDoc> ranked;
  ranked.reserve(best.size());
  for (const auto& [slot, score] : best) {
    ranked.push_back({index.doc_ids()[slot], score});
  }
  std::sort(ranked.begin(), ranked.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (ranked.size() > k) ranked.resize(k);

  RetrievalResult result;
  result.query_id = std::string(query_id);
  result.ranked = std::move(ranked);
  return result;
}

}  // namespace mvg
