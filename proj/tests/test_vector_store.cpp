#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>
#include <unistd.h>

#include "guide/rng.hpp"
#include "guide/vector_store.hpp"
#include "support/oracles.hpp"

using namespace guide;

namespace {

EmbeddingRecord record(std::string id, Embedding e, StoreKind kind = StoreKind::kEnvironment, const char* node = "A",
                       int deg = 0) {
  return {std::move(id), std::move(e), {NodeId(node), Heading::from_degrees(deg), kind, "test"}};
}

VectorStore random_store(std::mt19937_64& rng, std::size_t n, std::size_t dim, StoreKind kind) {
  VectorStore s(kind, dim);
  std::uniform_int_distribution<int> deg(0, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string node = "N" + std::to_string(i % 37);
    s.insert(record("r" + std::to_string(i), oracle::random_unit(rng, dim), kind, node.c_str(), 90 * deg(rng)));
  }
  return s;
}

// Exhaustive scan in long double, ranked by (similarity desc, id asc).
std::vector<std::string> oracle_ranking(const VectorStore& store, const Embedding& probe, std::size_t k) {
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& r : store.records()) scored.emplace_back(oracle::oracle_cosine(probe.values, r.embedding.values), r.id);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) ids.push_back(scored[i].second);
  return ids;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("guide_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Cosine, HandValues) {
  const std::vector<double> x{1, 0}, y{0, 1};
  EXPECT_NEAR(cosine_similarity(x, x), 1.0, 1e-9);
  EXPECT_NEAR(cosine_similarity(x, y), 0.0, 1e-9);
  const Embedding d = normalized({1, 1});
  // 0.70710678 is 1/sqrt(2) printed to eight places; the exact value sits 1.19e-9 above it.
  EXPECT_NEAR(cosine_similarity(d.values, x), 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_EQ(std::round(cosine_similarity(d.values, x) * 1e8) / 1e8, 0.70710678);
  EXPECT_EQ(cosine_similarity(d.values, x), cosine_similarity(x, d.values));
  EXPECT_NEAR(cosine_similarity(std::vector<double>{3, 4}, std::vector<double>{6, 8}), 1.0, 1e-12);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}), std::invalid_argument);
  EXPECT_THROW(normalized({0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(normalized({NAN, 1}), std::invalid_argument);
}

TEST(Store, InsertQueryDelete) {
  VectorStore s(StoreKind::kNavigational, 2);
  s.insert(record("x", normalized({1, 0}), StoreKind::kNavigational));
  s.insert(record("y", normalized({1, 1}), StoreKind::kNavigational));
  auto top = s.query_top_k(normalized({1, 0}), 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].record.id, "x");
  EXPECT_NEAR(top[0].similarity, 1.0, 1e-12);
  EXPECT_THROW(s.insert(record("x", normalized({0, 1}), StoreKind::kNavigational)), VectorStoreError);
  s.remove("x");
  top = s.query_top_k(normalized({1, 0}), 5);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].record.id, "y");
  EXPECT_THROW(s.remove("x"), VectorStoreError);
  EXPECT_THROW(s.get("x"), VectorStoreError);
}

TEST(Store, InsertValidation) {
  VectorStore s(StoreKind::kEnvironment, 3);
  EXPECT_THROW(s.insert(record("a", normalized({1, 0}))), VectorStoreError);
  EXPECT_THROW(s.insert(record("a", Embedding{{1, 1, 0}})), VectorStoreError);
  EXPECT_THROW(s.insert(record("a", normalized({1, 0, 0}), StoreKind::kNavigational)), VectorStoreError);
  EXPECT_THROW(s.insert(record("", normalized({1, 0, 0}))), VectorStoreError);
  s.insert(record("a", normalized({1, 0, 0})));
  EXPECT_THROW(s.remove("a"), VectorStoreError);
  EXPECT_EQ(s.size(), 1u);
}

TEST(Store, QueryErrorsAndSingleRecord) {
  VectorStore s(StoreKind::kEnvironment, 2);
  EXPECT_THROW(s.query_top_k(normalized({1, 0}), 1), VectorStoreError);
  s.insert(record("only", normalized({0, 1})));
  EXPECT_EQ(s.query_top_k(normalized({1, 0}), 3).at(0).record.id, "only");
  EXPECT_EQ(s.query_top_k(normalized({-1, -1}), 1).at(0).record.id, "only");
  EXPECT_THROW(s.query_top_k(normalized({1, 0}), 0), std::invalid_argument);
  EXPECT_THROW(s.query_top_k(normalized({1, 0, 0}), 1), std::invalid_argument);
}

TEST(Store, TiesBreakById) {
  VectorStore s(StoreKind::kEnvironment, 2);
  s.insert(record("m", normalized({1, 1})));
  s.insert(record("b", normalized({1, 1})));
  s.insert(record("z", normalized({1, 1})));
  const auto top = s.query_top_k(normalized({1, 0}), 3);
  EXPECT_EQ(top[0].record.id, "b");
  EXPECT_EQ(top[1].record.id, "m");
  EXPECT_EQ(top[2].record.id, "z");
}

TEST(Store, ThousandRecordsRetrievable) {
  std::mt19937_64 rng(3);
  const VectorStore s = random_store(rng, 1000, 64, StoreKind::kEnvironment);
  EXPECT_EQ(s.size(), 1000u);
  for (int i = 0; i < 1000; ++i) {
    const EmbeddingRecord r = s.get("r" + std::to_string(i));
    EXPECT_TRUE(r.embedding.is_unit());
    const auto top = s.query_top_k(r.embedding, 1);
    EXPECT_EQ(top[0].record.id, r.id);
    EXPECT_NEAR(top[0].similarity, 1.0, 1e-12);
  }
}

TEST(Store, MatchesExhaustiveScanOracle) {
  std::mt19937_64 rng(17);
  for (std::size_t n : {1u, 7u, 100u, 1000u}) {
    VectorStore s = random_store(rng, n, 64, StoreKind::kEnvironment);
    // A few exact duplicates exercise the id tie-break.
    for (int d = 0; d < 5 && n > 1; ++d) {
      EmbeddingRecord dup = s.get("r" + std::to_string(d));
      dup.id = "dup" + std::to_string(d);
      s.insert(dup);
    }
    for (int probe = 0; probe < 100; ++probe) {
      const Embedding p = probe % 10 == 0 ? s.get("r0").embedding : oracle::random_unit(rng, 64);
      for (int k : {1, 5, 20}) {
        const auto got = s.query_top_k(p, k);
        const auto want = oracle_ranking(s, p, k);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
          ASSERT_EQ(got[i].record.id, want[i]) << "n=" << n << " k=" << k << " rank " << i;
          ASSERT_TRUE(got[i].record.embedding.is_unit());
          if (i) {
            ASSERT_GE(got[i - 1].similarity, got[i].similarity);
          }
        }
        const auto ref = s.query_top_k_reference(p, k);
        ASSERT_EQ(ref.size(), got.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
          ASSERT_EQ(ref[i].record.id, got[i].record.id);
          ASSERT_EQ(ref[i].similarity, got[i].similarity);
        }
      }
    }
  }
}

TEST(Store, FindByMeta) {
  VectorStore s(StoreKind::kEnvironment, 2);
  s.insert(record("b", normalized({1, 0}), StoreKind::kEnvironment, "A", 90));
  s.insert(record("a", normalized({0, 1}), StoreKind::kEnvironment, "A", 90));
  EXPECT_EQ(s.find_by_meta(NodeId("A"), Heading::from_degrees(90))->id, "a");
  EXPECT_FALSE(s.find_by_meta(NodeId("A"), Heading::from_degrees(0)));
}

TEST(Store, CopyIsIndependent) {
  VectorStore a(StoreKind::kNavigational, 2);
  a.insert(record("x", normalized({1, 0}), StoreKind::kNavigational));
  VectorStore b = a;
  b.remove("x");
  EXPECT_TRUE(a.contains("x"));
  EXPECT_FALSE(b.contains("x"));
}

TEST(Persistence, EmptyFileGivesEmptyStore) {
  EXPECT_TRUE(store_from_jsonl("", StoreKind::kEnvironment).empty());
  EXPECT_TRUE(store_from_jsonl("\n\n", StoreKind::kEnvironment).empty());
}

TEST(Persistence, RoundTripProperty) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> size(0, 40), dim(1, 16);
  for (int trial = 0; trial < 100; ++trial) {
    const StoreKind kind = trial % 2 ? StoreKind::kNavigational : StoreKind::kEnvironment;
    const std::size_t d = dim(rng);
    const VectorStore s = random_store(rng, size(rng), d, kind);
    const VectorStore back = store_from_jsonl(store_to_jsonl(s), kind, d);
    ASSERT_EQ(back.records(), s.records());
  }
}

TEST(Persistence, FileRoundTrip) {
  std::mt19937_64 rng(29);
  const VectorStore s = random_store(rng, 50, 64, StoreKind::kEnvironment);
  const auto path = temp_file("store.jsonl");
  persist_store(s, path.string());
  const VectorStore back = load_store(path.string(), StoreKind::kEnvironment);
  std::filesystem::remove(path);
  EXPECT_EQ(back.records(), s.records());
  EXPECT_THROW(load_store("/nonexistent/store.jsonl", StoreKind::kEnvironment), VectorStoreError);
}

TEST(Persistence, MalformedLinesNameTheLine) {
  std::mt19937_64 rng(31);
  const VectorStore s = random_store(rng, 2, 64, StoreKind::kEnvironment);
  std::string text = store_to_jsonl(s);
  auto expect_line = [](const std::string& body, const std::string& line) {
    try {
      store_from_jsonl(body, StoreKind::kEnvironment, 64);
      FAIL() << "expected an error";
    } catch (const VectorStoreError& e) {
      EXPECT_NE(std::string(e.what()).find("line " + line), std::string::npos) << e.what();
    }
  };
  expect_line(text + "{not json}\n", "3");
  std::vector<double> short_values(63, 0.0);
  short_values[0] = 1.0;
  nlohmann::json j = {{"id", "short"}, {"values", short_values}, {"node", "A"}, {"orientation", 0}, {"kind", "environment"}};
  expect_line(text + j.dump() + "\n", "3");
  nlohmann::json bad_dir = nlohmann::json::parse(text.substr(0, text.find('\n')));
  bad_dir["id"] = "other";
  bad_dir["orientation"] = 45;
  expect_line(bad_dir.dump() + "\n", "1");
  // Same id twice.
  expect_line(text + text.substr(0, text.find('\n') + 1), "3");
}

TEST(StubEmbed, DeterministicAndUnit) {
  const Embedding a = stub_embed("node:A/dir:0", 0.0, 1);
  const Embedding b = stub_embed("node:A/dir:0", 0.0, 999);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.dim(), kDefaultEmbeddingDim);
  EXPECT_TRUE(a.is_unit());
  EXPECT_NEAR(cosine_similarity(a, b), 1.0, 1e-12);
  EXPECT_EQ(stub_embed("x", 0.1, 5), stub_embed("x", 0.1, 5));
  EXPECT_NE(stub_embed("x", 0.1, 5), stub_embed("x", 0.1, 6));
  EXPECT_THROW(stub_embed("x", -0.1, 5), std::invalid_argument);
  EXPECT_EQ(place_descriptor(NodeId("B"), Heading::from_degrees(270)), "node:B/dir:270");
}

TEST(StubEmbed, BaseVectorFollowsDocumentedConstruction) {
  // Rebuild the sigma=0 vector from the documented recipe: polar gaussian draws
  // from xoshiro256++ seeded with fnv1a64(descriptor), then normalized.
  const std::string desc = "node:K/dir:90";
  Xoshiro256pp rng(fnv1a64(desc));
  std::vector<double> v;
  while (v.size() < 8) {
    double u, w, s;
    do {
      u = 2.0 * rng.uniform01() - 1.0;
      w = 2.0 * rng.uniform01() - 1.0;
      s = u * u + w * w;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    v.push_back(u * f);
    v.push_back(w * f);
  }
  const Embedding want = normalized(v);
  const Embedding got = stub_embed(desc, 0.0, 0, 8);
  ASSERT_EQ(got.dim(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(got.values[i], want.values[i], 1e-15);
}

TEST(StubEmbed, DistinctDescriptorsNearlyOrthogonal) {
  int below = 0;
  const int pairs = 10000;
  for (int i = 0; i < pairs; ++i) {
    const auto a = stub_embed("place-" + std::to_string(2 * i), 0.0, 0);
    const auto b = stub_embed("place-" + std::to_string(2 * i + 1), 0.0, 0);
    if (cosine_similarity(a, b) < 0.5) ++below;
  }
  EXPECT_GE(below, static_cast<int>(0.999 * pairs));
}

TEST(StubEmbed, NoiseCalibration) {
  double sum = 0.0, min = 1.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const std::string d = "node:N" + std::to_string(i) + "/dir:0";
    const double c = cosine_similarity(stub_embed(d, 0.0, 0), stub_embed(d, 0.1, static_cast<std::uint64_t>(i)));
    sum += c;
    min = std::min(min, c);
  }
  EXPECT_GT(sum / n, 0.99);
  // |noise| = sigma exactly, so the angle is bounded by asin(0.1).
  EXPECT_GE(min, std::cos(std::asin(0.1)) - 1e-12);
}

TEST(Rng, ReferenceValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  std::uint64_t state = 0;
  EXPECT_EQ(splitmix64_next(state), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64_next(state), 0x6e789e6aa1b965f4ULL);
}

TEST(Rng, XoshiroMatchesReferenceStep) {
  // One step of the published xoshiro256++ recurrence on the splitmix-filled state.
  std::uint64_t sm = 42, s[4];
  for (auto& w : s) w = splitmix64_next(sm);
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  Xoshiro256pp rng(42);
  for (int i = 0; i < 4; ++i) {
    const std::uint64_t want = rotl(s[0] + s[3], 23) + s[0];
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    EXPECT_EQ(rng(), want);
  }
}

TEST(Rng, UniformAndBelowRanges) {
  Xoshiro256pp rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
  }
}
