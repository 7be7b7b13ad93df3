#include "dloop/exemplar.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dloop/error.hpp"

namespace dloop {

namespace {

std::uint64_t fnv1a(std::uint64_t seed, std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // final avalanche so nearby seeds spread
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

bool unit_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::abs(std::sqrt(sum) - 1.0) <= 1e-6;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> embedding_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

HashingEmbeddingProvider::HashingEmbeddingProvider(std::uint64_t seed, std::size_t dimension)
    : seed_(seed), dimension_(dimension) {
  if (dimension_ == 0) throw ProviderError("embedding dimension must be positive");
}

std::string HashingEmbeddingProvider::id() const {
  return fmt::format("hashing-trigram-v1:{:016x}", seed_);
}

std::vector<float> HashingEmbeddingProvider::embed(std::string_view text) const {
  const auto tokens = embedding_tokens(text);
  if (tokens.empty()) throw ProviderError("cannot embed text without words");

  std::vector<std::string> features;
  if (tokens.size() < 3) {
    std::string joined;
    for (const auto& t : tokens) joined += (joined.empty() ? "" : " ") + t;
    features.push_back(std::move(joined));
  } else {
    for (std::size_t i = 0; i + 2 < tokens.size(); ++i) {
      features.push_back(tokens[i] + ' ' + tokens[i + 1] + ' ' + tokens[i + 2]);
    }
  }

  std::vector<double> acc(dimension_, 0.0);
  for (const auto& f : features) {
    const auto h = fnv1a(seed_, f);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    const double weight = 1.0 + static_cast<double>((h >> 40) & 0xff) / 256.0;
    acc[h % dimension_] += sign * weight;
  }
  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw ProviderError("embedding collapsed to the zero vector");

  std::vector<float> out(dimension_);
  for (std::size_t i = 0; i < dimension_; ++i) out[i] = static_cast<float>(acc[i] / norm);
  return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ProviderError("cosine of vectors with different dimensions");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

ExemplarStore::ExemplarStore(std::shared_ptr<const EmbeddingProvider> provider)
    : provider_(std::move(provider)) {
  if (!provider_) throw ProviderError("exemplar store needs an embedding provider");
}

ExemplarStore::ExemplarStore(ExemplarStore&& other) noexcept
    : provider_(std::move(other.provider_)), exemplars_(std::move(other.exemplars_)) {}

ExemplarStore& ExemplarStore::operator=(ExemplarStore&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    provider_ = std::move(other.provider_);
    exemplars_ = std::move(other.exemplars_);
  }
  return *this;
}

Exemplar ExemplarStore::ingest(ExemplarFields fields) {
  if (fields.goal_text.empty()) throw ProviderError("exemplar goal_text must not be empty");
  if (fields.output_text.empty()) throw ProviderError("exemplar output_text must not be empty");
  {
    std::shared_lock lock(mutex_);
    for (const auto& e : exemplars_) {
      if (e.id == fields.id) throw DuplicateId(fields.id);
    }
  }
  Exemplar e{std::move(fields.id), std::move(fields.tags), std::move(fields.goal_text),
             std::move(fields.output_text), {}};
  e.embedding = provider_->embed(e.goal_text);
  return insert(std::move(e));
}

Exemplar ExemplarStore::insert(Exemplar exemplar) {
  if (exemplar.embedding.size() != provider_->dimension()) {
    throw ProviderError(fmt::format("exemplar {} has dimension {}, store expects {}", exemplar.id,
                                    exemplar.embedding.size(), provider_->dimension()));
  }
  if (!unit_norm(exemplar.embedding)) {
    throw ProviderError("exemplar " + exemplar.id + " embedding is not unit length");
  }
  std::unique_lock lock(mutex_);
  for (const auto& e : exemplars_) {
    if (e.id == exemplar.id) throw DuplicateId(exemplar.id);
  }
  exemplars_.push_back(exemplar);
  return exemplar;
}

std::vector<ScoredExemplar> ExemplarStore::retrieve(std::string_view query, std::size_t k) const {
  {
    std::shared_lock lock(mutex_);
    if (exemplars_.empty() || k == 0) return {};
  }
  const auto q = provider_->embed(query);
  return retrieve_vector(q, k);
}

std::vector<ScoredExemplar> ExemplarStore::retrieve_vector(std::span<const float> query,
                                                           std::size_t k) const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<double, const Exemplar*>> scored;
  scored.reserve(exemplars_.size());
  for (const auto& e : exemplars_) scored.emplace_back(cosine(query, e.embedding), &e);
  const auto n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second->id < b.second->id;
                    });
  std::vector<ScoredExemplar> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({*scored[i].second, scored[i].first});
  return out;
}

std::size_t ExemplarStore::size() const {
  std::shared_lock lock(mutex_);
  return exemplars_.size();
}

std::vector<Exemplar> ExemplarStore::all() const {
  std::shared_lock lock(mutex_);
  return exemplars_;
}

ExemplarStore ExemplarStore::load_directory(const std::filesystem::path& dir,
                                            std::shared_ptr<const EmbeddingProvider> provider,
                                            CachePolicy policy) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  ExemplarStore store(std::move(provider));

  std::map<std::string, std::vector<float>> cached;
  const auto cache_path = dir / std::string(kEmbeddingCacheFile);
  if (std::filesystem::exists(cache_path)) {
    const auto cache = read_json(cache_path);
    const bool matches =
        cache.value("provider_id", std::string{}) == store.provider_->id() &&
        cache.value("dimension", std::size_t{0}) == store.provider_->dimension();
    if (!matches && policy == CachePolicy::Use) {
      throw ProviderError("embedding cache in " + dir.string() +
                          " was built by a different provider; re-embed explicitly");
    }
    if (matches && policy == CachePolicy::Use) {
      cached = cache.at("vectors").get<std::map<std::string, std::vector<float>>>();
    }
  }

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (entry.is_regular_file() && p.extension() == ".json" &&
        p.filename() != std::string(kEmbeddingCacheFile)) {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());

  for (const auto& path : files) {
    const auto j = read_json(path);
    ExemplarFields f;
    try {
      f.id = j.at("id").get<std::string>();
      f.tags = j.value("tags", std::vector<std::string>{});
      f.goal_text = j.at("goal_text").get<std::string>();
      f.output_text = j.at("output_text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("invalid exemplar " + path.string() + ": " + e.what());
    }
    if (auto it = cached.find(f.id); it != cached.end()) {
      store.insert(Exemplar{std::move(f.id), std::move(f.tags), std::move(f.goal_text),
                            std::move(f.output_text), it->second});
    } else {
      store.ingest(std::move(f));
    }
  }
  return store;
}

void ExemplarStore::write_cache(const std::filesystem::path& dir) const {
  nlohmann::json vectors = nlohmann::json::object();
  {
    std::shared_lock lock(mutex_);
    for (const auto& e : exemplars_) vectors[e.id] = e.embedding;
  }
  const nlohmann::json cache{{"provider_id", provider_->id()},
                             {"dimension", provider_->dimension()},
                             {"vectors", std::move(vectors)}};
  const auto path = dir / std::string(kEmbeddingCacheFile);
  std::ofstream out(path);
  out << cache.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace dloop
