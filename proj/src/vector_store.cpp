#include "guide/vector_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "guide/rng.hpp"

namespace guide {

using json = nlohmann::json;

double PolarGaussian::operator()(Xoshiro256pp& rng) {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * rng.uniform01() - 1.0;
    v = 2.0 * rng.uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

bool result_before(const QueryResult& a, const QueryResult& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.record.id < b.record.id;
}

std::vector<double> gaussian_vector(std::uint64_t seed, std::size_t dim) {
  Xoshiro256pp rng(seed);
  PolarGaussian gauss;
  std::vector<double> v(dim);
  for (auto& x : v) x = gauss(rng);
  return v;
}

}  // namespace

double Embedding::norm() const { return std::sqrt(dot(values, values)); }

bool Embedding::is_unit(double tol) const {
  if (!std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); })) {
    return false;
  }
  return std::abs(norm() - 1.0) <= tol;
}

Embedding normalized(std::vector<double> values) {
  const double n = std::sqrt(dot(values, values));
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("cannot normalize a zero or non-finite vector");
  for (auto& x : values) x /= n;
  return Embedding{std::move(values)};
}

std::string_view to_string(StoreKind kind) {
  return kind == StoreKind::kEnvironment ? "environment" : "navigational";
}

StoreKind store_kind_from_string(std::string_view s) {
  if (s == "environment") return StoreKind::kEnvironment;
  if (s == "navigational") return StoreKind::kNavigational;
  throw std::invalid_argument("unknown store kind '" + std::string(s) + "'");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine similarity of a zero vector");
  return dot(a, b) / (na * nb);
}

VectorStore::VectorStore(StoreKind kind, std::size_t dim) : kind_(kind), dim_(dim) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
}

VectorStore::VectorStore(const VectorStore& other) {
  std::shared_lock lock(other.mutex_);
  kind_ = other.kind_;
  dim_ = other.dim_;
  records_ = other.records_;
  index_ = other.index_;
}

VectorStore& VectorStore::operator=(const VectorStore& other) {
  if (this == &other) return *this;
  VectorStore copy(other);
  *this = std::move(copy);
  return *this;
}

VectorStore::VectorStore(VectorStore&& other) noexcept
    : kind_(other.kind_),
      dim_(other.dim_),
      records_(std::move(other.records_)),
      index_(std::move(other.index_)) {}

VectorStore& VectorStore::operator=(VectorStore&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  kind_ = other.kind_;
  dim_ = other.dim_;
  records_ = std::move(other.records_);
  index_ = std::move(other.index_);
  return *this;
}

std::size_t VectorStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

void VectorStore::insert(EmbeddingRecord record) {
  if (record.id.empty()) throw VectorStoreError("record id must not be empty");
  if (record.embedding.dim() != dim_) {
    throw VectorStoreError("record '" + record.id + "' has dimension " +
                           std::to_string(record.embedding.dim()) + ", store expects " +
                           std::to_string(dim_));
  }
  if (!record.embedding.is_unit()) {
    throw VectorStoreError("record '" + record.id + "' embedding is not unit-normalized");
  }
  if (record.meta.kind != kind_) {
    throw VectorStoreError("record '" + record.id + "' is " + std::string(to_string(record.meta.kind)) +
                           ", store is " + std::string(to_string(kind_)));
  }
  std::unique_lock lock(mutex_);
  if (index_.contains(record.id)) throw VectorStoreError("duplicate record id '" + record.id + "'");
  index_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

void VectorStore::remove(const std::string& id) {
  if (kind_ == StoreKind::kEnvironment) {
    throw VectorStoreError("the environment store is append-only");
  }
  std::unique_lock lock(mutex_);
  auto it = index_.find(id);
  if (it == index_.end()) throw VectorStoreError("unknown record id '" + id + "'");
  const std::size_t pos = it->second;
  index_.erase(it);
  if (pos + 1 != records_.size()) {
    records_[pos] = std::move(records_.back());
    index_[records_[pos].id] = pos;
  }
  records_.pop_back();
}

void VectorStore::clear() {
  std::unique_lock lock(mutex_);
  records_.clear();
  index_.clear();
}

EmbeddingRecord VectorStore::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(id);
  if (it == index_.end()) throw VectorStoreError("unknown record id '" + id + "'");
  return records_[it->second];
}

bool VectorStore::contains(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return index_.contains(id);
}

std::optional<EmbeddingRecord> VectorStore::find_by_meta(const NodeId& node, Heading orientation) const {
  std::shared_lock lock(mutex_);
  const EmbeddingRecord* best = nullptr;
  for (const auto& r : records_) {
    if (r.meta.node == node && r.meta.orientation == orientation && (!best || r.id < best->id)) {
      best = &r;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

std::vector<EmbeddingRecord> VectorStore::records() const {
  std::shared_lock lock(mutex_);
  std::vector<EmbeddingRecord> out = records_;
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<QueryResult> VectorStore::query_top_k(const Embedding& probe, int k) const {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  std::shared_lock lock(mutex_);
  if (records_.empty()) throw VectorStoreError("query on an empty store");
  if (probe.dim() != dim_) throw std::invalid_argument("probe dimension mismatch");
  if (!(probe.norm() > 0.0)) throw std::invalid_argument("cosine similarity of a zero vector");

  const auto n = static_cast<std::ptrdiff_t>(records_.size());
  std::vector<double> scores(records_.size());
  const std::span<const double> p(probe.values);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    scores[i] = cosine_similarity(p, std::span<const double>(records_[i].embedding.values));
  }

  std::vector<std::size_t> order(records_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return records_[a].id < records_[b].id;
                    });
  std::vector<QueryResult> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({records_[order[i]], scores[order[i]]});
  return out;
}

std::vector<QueryResult> VectorStore::query_top_k_reference(const Embedding& probe, int k) const {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  std::shared_lock lock(mutex_);
  if (records_.empty()) throw VectorStoreError("query on an empty store");
  std::vector<QueryResult> all;
  all.reserve(records_.size());
  for (const auto& r : records_) all.push_back({r, cosine_similarity(probe, r.embedding)});
  std::sort(all.begin(), all.end(), result_before);
  if (all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
  return all;
}

std::string store_to_jsonl(const VectorStore& store) {
  std::string out;
  for (const auto& r : store.records()) {
    json j;
    j["id"] = r.id;
    j["values"] = r.embedding.values;
    j["node"] = r.meta.node.str();
    j["orientation"] = r.meta.orientation.degrees();
    j["kind"] = std::string(to_string(r.meta.kind));
    j["source"] = r.meta.source;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void persist_store(const VectorStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw VectorStoreError("cannot write store file '" + path + "'");
  out << store_to_jsonl(store);
  if (!out) throw VectorStoreError("write failed for '" + path + "'");
}

VectorStore store_from_jsonl(std::string_view text, StoreKind kind, std::size_t dim) {
  VectorStore store(kind, dim);
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& why) {
      return VectorStoreError("line " + std::to_string(line_no) + ": " + why);
    };
    EmbeddingRecord r;
    try {
      const json j = json::parse(line);
      r.id = j.at("id").get<std::string>();
      r.embedding.values = j.at("values").get<std::vector<double>>();
      r.meta.node = NodeId(j.at("node").get<std::string>());
      r.meta.orientation = Heading::from_degrees(j.at("orientation").get<int>());
      r.meta.kind = store_kind_from_string(j.at("kind").get<std::string>());
      r.meta.source = j.value("source", std::string());
    } catch (const std::exception& e) {
      throw fail(std::string("malformed record: ") + e.what());
    }
    if (r.embedding.dim() != dim) {
      throw fail("record has " + std::to_string(r.embedding.dim()) + " values, expected " +
                 std::to_string(dim));
    }
    try {
      store.insert(std::move(r));
    } catch (const VectorStoreError& e) {
      throw fail(e.what());
    }
  }
  return store;
}

VectorStore load_store(const std::string& path, StoreKind kind, std::size_t dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VectorStoreError("cannot open store file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return store_from_jsonl(ss.str(), kind, dim);
}

Embedding stub_embed(std::string_view descriptor, double noise_sigma, std::uint64_t seed,
                     std::size_t dim) {
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  Embedding base = normalized(gaussian_vector(fnv1a64(descriptor), dim));
  if (noise_sigma == 0.0) return base;
  const std::string noise_key = std::string(descriptor) + "#" + std::to_string(seed);
  const Embedding eps = normalized(gaussian_vector(fnv1a64(noise_key), dim));
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = base.values[i] + noise_sigma * eps.values[i];
  return normalized(std::move(v));
}

std::string place_descriptor(const NodeId& node, Heading heading) {
  return "node:" + node.str() + "/dir:" + std::to_string(heading.degrees());
}

}  // namespace guide
