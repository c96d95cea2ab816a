#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mvg {

// Id-addressed matrix of unit float32 vectors. Rows are renormalized at
// ingest (zero rows rejected); ids are opaque strings interned to dense
// row indices. Immutable once loaded, safe to share across threads.
//
// On-disk format ("MVGE", little-endian):
//   magic "MVGE" | u32 version=1 | u32 dim | u64 count | count*dim float32
// with a sidecar `<path>.ids` holding count newline-terminated UTF-8 ids.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::uint32_t dim);

  static EmbeddingStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Validates, renormalizes when the norm strays from 1, and interns the id.
  // Rows that are already unit to within 1e-6 are stored untouched, so a
  // save/load round trip is bit-identical.
  void append(std::string_view id, std::span<const float> vec);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<std::size_t> find(std::string_view id) const;

  const std::vector<float>& data() const { return data_; }

 private:
  std::uint32_t dim_;
  std::vector<float> data_;  // row-major, size() * dim_
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mvg
