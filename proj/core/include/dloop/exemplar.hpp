#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dloop {

struct Exemplar {
  std::string id;
  std::vector<std::string> tags;
  std::string goal_text;
  std::string output_text;
  std::vector<float> embedding;

  friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

struct ExemplarFields {
  std::string id;
  std::vector<std::string> tags;
  std::string goal_text;
  std::string output_text;
};

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  /// Unit-length vector of `dimension()` floats.
  [[nodiscard]] virtual std::vector<float> embed(std::string_view text) const = 0;
  [[nodiscard]] virtual std::size_t dimension() const = 0;
  [[nodiscard]] virtual std::string id() const = 0;
};

/// Seeded feature hashing of lower-cased word trigrams. Texts shorter than
/// three words hash as a single feature.
class HashingEmbeddingProvider final : public EmbeddingProvider {
public:
  explicit HashingEmbeddingProvider(std::uint64_t seed = 0x9e3779b97f4a7c15ULL,
                                    std::size_t dimension = 32);

  [[nodiscard]] std::vector<float> embed(std::string_view text) const override;
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }
  [[nodiscard]] std::string id() const override;

private:
  std::uint64_t seed_;
  std::size_t dimension_;
};

/// Lower-cased alphanumeric words of `text`.
std::vector<std::string> embedding_tokens(std::string_view text);

/// Cosine similarity accumulated in double precision.
double cosine(std::span<const float> a, std::span<const float> b);

struct ScoredExemplar {
  Exemplar exemplar;
  double similarity = 0.0;
};

inline constexpr std::size_t kDefaultExemplarCount = 2;
inline constexpr std::string_view kEmbeddingCacheFile = ".embeddings.json";

enum class CachePolicy { Use, Reembed };

/// Golden examples with an exact linear-scan cosine retrieval.
class ExemplarStore {
public:
  explicit ExemplarStore(std::shared_ptr<const EmbeddingProvider> provider);
  ExemplarStore(ExemplarStore&& other) noexcept;
  ExemplarStore& operator=(ExemplarStore&& other) noexcept;

  /// Reads every `*.json` exemplar document in `dir`. Cached vectors are
  /// reused when the sidecar matches the provider; a mismatched sidecar is a
  /// ProviderError unless `policy` is Reembed.
  static ExemplarStore load_directory(const std::filesystem::path& dir,
                                      std::shared_ptr<const EmbeddingProvider> provider,
                                      CachePolicy policy = CachePolicy::Use);

  Exemplar ingest(ExemplarFields fields);
  /// Inserts a pre-embedded exemplar; the vector must match the dimension
  /// and have unit norm.
  Exemplar insert(Exemplar exemplar);

  /// min(k, size()) results, similarity descending, then id ascending.
  [[nodiscard]] std::vector<ScoredExemplar> retrieve(std::string_view query,
                                                     std::size_t k = kDefaultExemplarCount) const;
  [[nodiscard]] std::vector<ScoredExemplar> retrieve_vector(std::span<const float> query,
                                                            std::size_t k) const;

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::vector<Exemplar> all() const;
  [[nodiscard]] const EmbeddingProvider& provider() const noexcept { return *provider_; }

  void write_cache(const std::filesystem::path& dir) const;

private:
  std::shared_ptr<const EmbeddingProvider> provider_;
  mutable std::shared_mutex mutex_;
  std::vector<Exemplar> exemplars_;
};

}  // namespace dloop
