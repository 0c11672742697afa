// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Vector representations h_n of iteration texts and the drift measure
// 1 - cos(h_n, h_{n-1}).
//
// The default embedder is offline and bit-stable. For every character n-gram
// g of the text (n in gram_lengths, grams taken over Unicode scalar values
// and encoded as UTF-8):
//
//   h      = fnv1a64(le64(hash_seed) || utf8(g))
//   h      = splitmix64_finalize(h)
//   index  = h mod dimension
//   sign   = +1 if bit 63 of h is clear, else -1
//   v[index] += sign
//
// and the accumulated vector is L2-normalized. FNV-1a uses the standard
// 64-bit offset basis 0xcbf29ce484222325 and prime 0x100000001b3.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mirrorloop/error.hpp"
#include "mirrorloop/textmetrics.hpp"
#include "mirrorloop/transport.hpp"
#include "mirrorloop/utf8.hpp"

namespace mirrorloop {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
inline constexpr std::uint64_t kDefaultHashSeed = 0x6d6972726f726c70ULL;

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = kFnvOffsetBasis) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t seeded_gram_hash(std::uint64_t seed,
                                      std::string_view gram_utf8) {
  char le[8];
  for (int i = 0; i < 8; ++i) le[i] = static_cast<char>((seed >> (8 * i)) & 0xFF);
  std::uint64_t h = fnv1a64(std::string_view(le, 8));
  h = fnv1a64(gram_utf8, h);
  return splitmix64_finalize(h);
}

// Either the zero vector or an L2-normalized vector of finite components.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  static EmbeddingVector zero(std::size_t dimension) {
    EmbeddingVector v;
    v.components_.assign(dimension, 0.0);
    return v;
  }

  // Normalizes raw; rejects non-finite components.
  static EmbeddingVector from_raw(std::vector<double> raw) {
    double sq = 0.0;
    for (double x : raw) {
      if (!std::isfinite(x)) {
        throw PreconditionError("embedding component is not finite");
      }
      sq += x * x;
    }
    EmbeddingVector v;
    if (sq > 0.0) {
      const double norm = std::sqrt(sq);
      for (double& x : raw) x /= norm;
      v.norm_ = 1.0;
    }
    v.components_ = std::move(raw);
    return v;
  }

  std::size_t dimension() const noexcept { return components_.size(); }
  const std::vector<double>& components() const noexcept { return components_; }
  double norm() const noexcept { return norm_; }
  bool is_zero() const noexcept { return norm_ == 0.0; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> components_;
  double norm_ = 0.0;
};

enum class EmbedderKind { kHashing, kRemote };

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::kHashing;
  std::size_t dimension = 256;
  std::set<std::size_t> gram_lengths = {3, 4, 5};
  std::uint64_t hash_seed = kDefaultHashSeed;
  // Remote kind only.
  std::optional<std::string> model_name;
  std::string endpoint = "https://api.openai.com/v1/embeddings";
  std::string api_key_env = "OPENAI_API_KEY";

  void validate() const {
    if (dimension < 16) throw ConfigError("embedder dimension must be >= 16");
    if (kind == EmbedderKind::kHashing) {
      if (gram_lengths.empty()) {
        throw ConfigError("hashing embedder needs at least one gram length");
      }
      if (gram_lengths.contains(0)) {
        throw ConfigError("gram lengths must be >= 1");
      }
    } else if (!model_name || model_name->empty()) {
      throw ConfigError("remote embedder needs model_name");
    }
  }
};

inline EmbeddingVector hashing_embed(const EmbedderSpec& spec,
                                     const IterationText& t) {
  std::vector<double> acc(spec.dimension, 0.0);
  const auto s = t.scalars();
  std::string gram;
  for (std::size_t n : spec.gram_lengths) {
    if (n == 0 || s.size() < n) continue;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      gram.clear();
      for (std::size_t k = i; k < i + n; ++k) utf8::append(gram, s[k]);
      const std::uint64_t h = seeded_gram_hash(spec.hash_seed, gram);
      const std::size_t index = static_cast<std::size_t>(h % spec.dimension);
      acc[index] += (h >> 63) != 0 ? -1.0 : 1.0;
    }
  }
  return EmbeddingVector::from_raw(std::move(acc));
}

// 1 - cosine. One zero vector gives 1.0, two zero vectors give 0.0.
inline double embedding_drift(const EmbeddingVector& a,
                              const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw PreconditionError("embedding_drift: dimension mismatch (" +
                            std::to_string(a.dimension()) + " vs " +
                            std::to_string(b.dimension()) + ")");
  }
  if (a.is_zero() && b.is_zero()) return 0.0;
  if (a.is_zero() || b.is_zero()) return 1.0;
  double dot = 0.0;
  const auto& x = a.components();
  const auto& y = b.components();
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  dot = std::clamp(dot, -1.0, 1.0);
  return std::clamp(1.0 - dot, 0.0, 2.0);
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual const EmbedderSpec& spec() const = 0;
  virtual EmbeddingVector embed(const IterationText& t) = 0;
};

class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(EmbedderSpec spec = {}) : spec_(std::move(spec)) {
    spec_.kind = EmbedderKind::kHashing;
    spec_.validate();
  }
  const EmbedderSpec& spec() const override { return spec_; }
  EmbeddingVector embed(const IterationText& t) override {
    return hashing_embed(spec_, t);
  }

 private:
  EmbedderSpec spec_;
};

// Calls an OpenAI-compatible embeddings endpoint:
//   request  {"model": <model_name>, "input": <text>}
//   response {"data": [{"embedding": [..]}]}
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(EmbedderSpec spec, std::shared_ptr<Transport> transport,
                 std::string api_key, RetryPolicy retry = {},
                 std::shared_ptr<RateLimiter> limiter = nullptr,
                 Sleeper sleeper = real_sleeper())
      : spec_(std::move(spec)),
        transport_(std::move(transport)),
        api_key_(std::move(api_key)),
        retry_(retry),
        limiter_(std::move(limiter)),
        sleeper_(std::move(sleeper)) {
    spec_.kind = EmbedderKind::kRemote;
    spec_.validate();
  }

  const EmbedderSpec& spec() const override { return spec_; }

  EmbeddingVector embed(const IterationText& t) override {
    if (t.empty()) return EmbeddingVector::zero(spec_.dimension);
    HttpRequest req;
    req.url = spec_.endpoint;
    req.headers["Content-Type"] = "application/json";
    req.headers["Authorization"] = "Bearer " + api_key_;
    req.body = nlohmann::json{{"model", *spec_.model_name},
                              {"input", t.content()}}
                   .dump();
    auto result = post_with_retry(*transport_, req, retry_, "embedder",
                                  limiter_.get(), sleeper_);
    std::vector<double> raw;
    try {
      auto body = nlohmann::json::parse(result.response.body);
      raw = body.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(ProviderError::Kind::kMalformedResponse, "embedder",
                          std::string("malformed embedding payload: ") + e.what(),
                          result.attempts, result.response.status,
                          result.response.body);
    }
    if (raw.size() != spec_.dimension) {
      throw ProviderError(ProviderError::Kind::kConfiguration, "embedder",
                          "embedding dimension " + std::to_string(raw.size()) +
                              " does not match configured " +
                              std::to_string(spec_.dimension),
                          result.attempts, result.response.status);
    }
    return EmbeddingVector::from_raw(std::move(raw));
  }

 private:
  EmbedderSpec spec_;
  std::shared_ptr<Transport> transport_;
  std::string api_key_;
  RetryPolicy retry_;
  std::shared_ptr<RateLimiter> limiter_;
  Sleeper sleeper_;
};

}  // namespace mirrorloop
