#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvg/clustering.hpp"
#include "mvg/embedding_store.hpp"

namespace mvg {

struct ScoredDoc {
  std::string doc_id;
  double score;  // cosine of unit vectors, in [-1, 1]
};

struct RetrievalResult {
  std::string query_id;
  std::vector<ScoredDoc> ranked;  // distinct docs, scores non-increasing
};

// Flat exact index over semantic + behavioral vectors. A document's score for
// a query is the max dot product over all of its entries; the scan computes
// per-document maxima directly, so deduplication is exact. Ranking ties break
// by lexicographic doc id. Immutable after build; concurrent searches are safe.
//
// On-disk format ("MVGI", little-endian):
//   magic "MVGI" | u32 version=1 | u32 dim | u64 entry_count | u64 id_table_bytes
//   entries: dim float32 | u64 id-table offset | u8 origin (0 semantic, j behavioral)
//   id table: per referenced doc, u32 length + bytes
// Behavioral ordinals above 255 do not fit the origin byte and are rejected.
class VectorIndex {
 public:
  static VectorIndex build(const EmbeddingStore& docs,
                           const std::map<std::string, BehavioralSet>& behavioral);

  static VectorIndex load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::uint32_t dim() const { return dim_; }
  std::size_t doc_count() const { return doc_ids_.size(); }
  std::size_t entry_count() const { return origins_.size(); }

  struct Stats {
    std::size_t doc_count = 0;
    std::size_t entry_count = 0;
    std::size_t payload_bytes = 0;  // vector payload only
    double size_ratio = 0.0;        // entries per document vs semantic-only
  };
  Stats stats() const;

  RetrievalResult search(std::span<const float> query_vec, std::size_t k,
                         std::string_view query_id = {}) const;
  std::vector<RetrievalResult> search_batch(const EmbeddingStore& queries, std::size_t k,
                                            unsigned threads = 1) const;

  // Max-sim score of every document for one query (indexed by doc slot).
  std::vector<double> score_all_docs(std::span<const float> query_vec) const;

  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  std::span<const float> entry_vec(std::size_t e) const { return {vecs_.data() + e * dim_, dim_}; }
  std::size_t entry_doc(std::size_t e) const { return entry_doc_[e]; }
  std::uint32_t entry_origin(std::size_t e) const { return origins_[e]; }

 private:
  VectorIndex() = default;

  std::uint32_t dim_ = 0;
  std::vector<float> vecs_;             // entry_count * dim
  std::vector<std::size_t> entry_doc_;  // entry -> doc slot
  std::vector<std::uint32_t> origins_;  // 0 = semantic, j >= 1 = behavioral ordinal
  std::vector<std::string> doc_ids_;    // doc slot -> id (store order)
  std::vector<std::size_t> lex_rank_;   // doc slot -> rank of id in sorted order
};

// Raw (entry, score) hit from a nearest-neighbor backend, before dedup.
struct RawHit {
  std::size_t entry;
  double score;
};

// Pluggable retrieval backend: implementations index raw entries and answer
// top-m queries over them. Approximate structures can sit behind this without
// touching ranking semantics.
class AnnBackend {
 public:
  virtual ~AnnBackend() = default;
  virtual void insert_all(const VectorIndex& index) = 0;
  virtual std::vector<RawHit> query_top(std::span<const float> query_vec,
                                        std::size_t m) const = 0;
};

// Exact backend: scores every entry, returns the m best.
class FlatBackend final : public AnnBackend {
 public:
  void insert_all(const VectorIndex& index) override { index_ = &index; }
  std::vector<RawHit> query_top(std::span<const float> query_vec,
                                std::size_t m) const override;

 private:
  const VectorIndex* index_ = nullptr;
};

// Retrieval through a backend: over-fetches 4k raw entries (duplicates
// possible), keeps each document's best hit, truncates to k unique docs.
RetrievalResult search_with_backend(const VectorIndex& index, const AnnBackend& backend,
                                    std::span<const float> query_vec, std::size_t k,
                                    std::string_view query_id = {});

}  // namespace mvg
