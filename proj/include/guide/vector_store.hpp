#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "guide/topo_map.hpp"

namespace guide {

inline constexpr std::size_t kDefaultEmbeddingDim = 64;

/// Unit-norm embedding. Construction does not normalize; use normalized().
struct Embedding {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;
  bool is_unit(double tol = 1e-9) const;
  bool operator==(const Embedding&) const = default;
};

/// Throws std::invalid_argument on a zero or non-finite vector.
Embedding normalized(std::vector<double> values);

enum class StoreKind { kEnvironment, kNavigational };
std::string_view to_string(StoreKind kind);
StoreKind store_kind_from_string(std::string_view s);

struct RecordMeta {
  NodeId node;
  Heading orientation;
  StoreKind kind = StoreKind::kEnvironment;
  std::string source;
  bool operator==(const RecordMeta&) const = default;
};

struct EmbeddingRecord {
  std::string id;
  Embedding embedding;
  RecordMeta meta;
  bool operator==(const EmbeddingRecord&) const = default;
};

struct QueryResult {
  EmbeddingRecord record;
  double similarity = 0.0;
};

class VectorStoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// dot(a, b) / (|a| |b|). Throws std::invalid_argument on dimension mismatch or a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

/// Exact cosine top-k store. The environment store is append-only; the
/// navigational store also supports removal. Readers share, writers exclude.
class VectorStore {
 public:
  explicit VectorStore(StoreKind kind, std::size_t dim = kDefaultEmbeddingDim);
  VectorStore(const VectorStore& other);
  VectorStore& operator=(const VectorStore& other);
  VectorStore(VectorStore&& other) noexcept;
  VectorStore& operator=(VectorStore&& other) noexcept;

  StoreKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  /// Throws VectorStoreError on duplicate id, wrong dimension, kind mismatch or a non-unit vector.
  void insert(EmbeddingRecord record);
  /// Throws VectorStoreError on unknown id or on the environment store.
  void remove(const std::string& id);
  void clear();

  /// Copy of the record with `id`; throws VectorStoreError when absent.
  EmbeddingRecord get(const std::string& id) const;
  bool contains(const std::string& id) const;
  /// Record whose metadata matches (node, orientation), lowest id first.
  std::optional<EmbeddingRecord> find_by_meta(const NodeId& node, Heading orientation) const;
  /// Snapshot sorted by id.
  std::vector<EmbeddingRecord> records() const;

  /// k best records by similarity descending, ties by id ascending. The scoring
  /// scan runs OpenMP-parallel; results are identical to query_top_k_reference.
  /// Throws VectorStoreError on an empty store, std::invalid_argument on k < 1.
  std::vector<QueryResult> query_top_k(const Embedding& probe, int k) const;
  /// Serial exhaustive scan kept as the test oracle and benchmark baseline.
  std::vector<QueryResult> query_top_k_reference(const Embedding& probe, int k) const;

 private:
  StoreKind kind_;
  std::size_t dim_;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  mutable std::shared_mutex mutex_;
};

/// Writes one JSON object per line: id, values, node, orientation, kind, source.
void persist_store(const VectorStore& store, const std::string& path);
std::string store_to_jsonl(const VectorStore& store);
/// Throws VectorStoreError naming the 1-based line for malformed input.
VectorStore load_store(const std::string& path, StoreKind kind, std::size_t dim = kDefaultEmbeddingDim);
VectorStore store_from_jsonl(std::string_view text, StoreKind kind, std::size_t dim = kDefaultEmbeddingDim);

/// Deterministic stand-in for an image/text encoder.
///
/// base  = normalize(dim polar-gaussian draws from xoshiro256++ seeded with fnv1a64(descriptor))
/// noise = normalize(dim draws from xoshiro256++ seeded with fnv1a64(descriptor + "#" + seed))
/// out   = sigma == 0 ? base : normalize(base + sigma * noise)
///
/// The noise direction is unit length, so sigma is the perturbation magnitude
/// relative to the unit base vector.
Embedding stub_embed(std::string_view descriptor, double noise_sigma, std::uint64_t seed,
                     std::size_t dim = kDefaultEmbeddingDim);

/// "node:<id>/dir:<deg>"
std::string place_descriptor(const NodeId& node, Heading heading);

}  // namespace guide
