#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vvgen/feature.hpp"
#include "vvgen/spec_corpus.hpp"

namespace vvgen {

inline constexpr std::size_t kDefaultChunkSize = 1000;
inline constexpr std::size_t kDefaultChunkOverlap = 100;
inline constexpr std::size_t kDefaultTopK = 3;
inline constexpr std::size_t kLocalHashDims = 256;

/// A window of the source measured in characters (UTF-8 code points).
struct Chunk {
  int id = 0;
  std::string text;
  Span span;                   // byte offsets in the source
  std::size_t char_start = 0;  // code-point offset of the first character
  std::size_t char_length = 0;
};

std::vector<Chunk> chunk_text(std::string_view text, std::size_t chunk_size = kDefaultChunkSize,
                              std::size_t overlap = kDefaultChunkOverlap);

struct Embedding {
  std::vector<double> values;
  std::size_t dims() const noexcept { return values.size(); }
  bool operator==(const Embedding&) const = default;
};

double l2_norm(const Embedding& v);
/// Cosine similarity; 0 when either side is the zero vector.
double cosine_similarity(const Embedding& a, const Embedding& b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string tag() const = 0;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual std::vector<Embedding> embed_batch(std::span<const std::string> texts) const;
};

/// Token-count embedding: lowercase, split on non-[a-z0-9], FNV-1a each token
/// into 256 buckets, count, L2-normalise. Empty text maps to the zero vector.
class LocalHashEmbedder final : public EmbeddingProvider {
 public:
  std::string tag() const override { return "local-hash"; }
  Embedding embed(std::string_view text) const override;
};

struct RemoteEmbeddingConfig {
  std::string url;  // absolute URL of the embeddings endpoint
  std::string model;
  std::string auth_env_var;
  std::chrono::seconds timeout{120};
  std::size_t batch_size = 64;
};

/// POSTs {input: [...], model} and reads {data: [{embedding: [...]}]}.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(RemoteEmbeddingConfig config) : config_(std::move(config)) {}
  std::string tag() const override { return "remote:" + config_.model; }
  Embedding embed(std::string_view text) const override;
  std::vector<Embedding> embed_batch(std::span<const std::string> texts) const override;

 private:
  RemoteEmbeddingConfig config_;
};

struct StoreEntry {
  int chunk_id = 0;
  Embedding vector;
  Span span;
  std::string text;
};

class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(std::string provider_tag) : provider_tag_(std::move(provider_tag)) {}

  /// Rejects duplicate ids and vectors whose dims differ from earlier entries.
  void add(StoreEntry entry);

  const std::vector<StoreEntry>& entries() const noexcept { return entries_; }
  const std::string& provider_tag() const noexcept { return provider_tag_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dims() const noexcept { return entries_.empty() ? 0 : entries_.front().vector.dims(); }
  const StoreEntry* find(int chunk_id) const;

 private:
  std::string provider_tag_;
  std::vector<StoreEntry> entries_;
  std::unordered_map<int, std::size_t> by_id_;
};

VectorStore build_store(std::string_view text, const EmbeddingProvider& provider,
                        std::size_t chunk_size = kDefaultChunkSize,
                        std::size_t overlap = kDefaultChunkOverlap);

/// `store.jsonl` (id, span, vector, text_digest), `chunks.jsonl` (id, text), `meta.json`.
void save_store(const VectorStore& store, const std::filesystem::path& dir);
VectorStore load_store(const std::filesystem::path& dir);

struct RetrievalResult {
  int chunk_id = 0;
  double score = 0.0;
  std::string text;
};

/// Exact scan. Results sorted by score descending, then chunk id ascending.
std::vector<RetrievalResult> similarity_search(const VectorStore& store, const Embedding& query,
                                               std::size_t k);

enum class RagMode { Manual, Similarity };
std::string_view to_string(RagMode mode) noexcept;
RagMode parse_rag_mode(std::string_view name);

struct RetrievedContext {
  std::string text;
  std::vector<std::string> provenance;  // "section:<key>" or "chunk:<id>"
  bool empty_store = false;
};

RetrievedContext retrieve_context(const SpecIndex& index, const VectorStore& store,
                                  const FeatureSpec& feature, RagMode mode, std::size_t k,
                                  const EmbeddingProvider& provider);

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const Json& config);

}  // namespace vvgen
