#include "mvg/embedding_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mvg/error.hpp"

namespace mvg {
namespace {

constexpr char kMagic[4] = {'M', 'V', 'G', 'E'};
constexpr std::uint32_t kVersion = 1;

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

EmbeddingStore::EmbeddingStore(std::uint32_t dim) : dim_(dim) {
  if (dim == 0) throw ParamError("embedding dimension must be positive");
}

void EmbeddingStore::append(std::string_view id, std::span<const float> vec) {
  if (vec.size() != dim_) {
    throw DataError("vector for id '" + std::string(id) + "' has dimension " +
                    std::to_string(vec.size()) + ", store expects " + std::to_string(dim_));
  }
  double sumsq = 0.0;
  for (float v : vec) {
    if (!std::isfinite(v)) {
      throw DataError("non-finite value in row " + std::to_string(ids_.size()) +
                      " (id '" + std::string(id) + "')");
    }
    sumsq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sumsq);
  if (norm < 1e-8) {
    throw DataError("zero-norm row " + std::to_string(ids_.size()) + " (id '" +
                    std::string(id) + "') has no direction");
  }
  if (!index_.emplace(std::string(id), ids_.size()).second) {
    throw DataError("duplicate id '" + std::string(id) + "'");
  }
  ids_.emplace_back(id);
  const std::size_t offset = data_.size();
  data_.resize(offset + dim_);
  if (std::abs(norm - 1.0) <= 1e-6) {
    std::memcpy(data_.data() + offset, vec.data(), dim_ * sizeof(float));
  } else {
    const double inv = 1.0 / norm;
    for (std::uint32_t j = 0; j < dim_; ++j) {
      data_[offset + j] = static_cast<float>(vec[j] * inv);
    }
  }
}

std::optional<std::size_t> EmbeddingStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open embedding file: " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic in " + path.string() + " (expected MVGE)");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw FormatError("unsupported MVGE version " + std::to_string(version) + " in " +
                      path.string());
  }
  const auto dim = read_pod<std::uint32_t>(in);
  const auto count = read_pod<std::uint64_t>(in);
  if (!in) throw FormatError("truncated header in " + path.string());
  if (dim == 0) throw FormatError("dimension must be positive in " + path.string());

  std::vector<float> raw(static_cast<std::size_t>(count) * dim);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != raw.size() * sizeof(float)) {
    throw FormatError("row-count mismatch in " + path.string() + ": expected " +
                      std::to_string(count) + " rows of dim " + std::to_string(dim));
  }
  in.peek();
  if (!in.eof()) throw FormatError("trailing bytes in " + path.string());

  const std::filesystem::path ids_path = path.string() + ".ids";
  std::ifstream ids_in(ids_path);
  if (!ids_in) throw FormatError("cannot open id sidecar: " + ids_path.string());
  std::vector<std::string> ids;
  ids.reserve(count);
  std::string line;
  while (std::getline(ids_in, line)) ids.push_back(line);
  if (ids.size() != count) {
    throw FormatError("id sidecar " + ids_path.string() + " has " + std::to_string(ids.size()) +
                      " ids, expected " + std::to_string(count));
  }

  EmbeddingStore store(dim);
  store.data_.reserve(raw.size());
  for (std::uint64_t i = 0; i < count; ++i) {
    store.append(ids[i], {raw.data() + i * dim, dim});
  }
  return store;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write embedding file: " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, dim_);
  write_pod(out, static_cast<std::uint64_t>(ids_.size()));
  out.write(reinterpret_cast<const char*>(data_.data()),
            static_cast<std::streamsize>(data_.size() * sizeof(float)));
  if (!out) throw FormatError("write failed: " + path.string());

  std::ofstream ids_out(path.string() + ".ids", std::ios::binary | std::ios::trunc);
  if (!ids_out) throw FormatError("cannot write id sidecar: " + path.string() + ".ids");
  for (const auto& id : ids_) {
    ids_out << id << '\n';
  }
  if (!ids_out) throw FormatError("write failed: " + path.string() + ".ids");
}

}  // namespace mvg
