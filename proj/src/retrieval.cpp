#include "vvgen/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "vvgen/error.hpp"
#include "vvgen/http.hpp"

namespace vvgen {

namespace {

bool is_char_start(unsigned char byte) { return (byte & 0xC0) != 0x80; }

std::uint64_t fnv1a(std::string_view token) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

bool is_token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

}  // namespace

std::vector<Chunk> chunk_text(std::string_view text, std::size_t chunk_size, std::size_t overlap) {
  if (chunk_size == 0) throw Error(ErrorCode::InvalidParams, "chunk_size must be positive");
  if (overlap >= chunk_size) {
    throw Error(ErrorCode::InvalidParams, "overlap " + std::to_string(overlap) +
                                              " must be smaller than chunk_size " +
                                              std::to_string(chunk_size));
  }
  if (text.empty()) throw Error(ErrorCode::InvalidParams, "cannot chunk empty text");

  std::vector<std::size_t> char_offsets;
  char_offsets.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i == 0 || is_char_start(static_cast<unsigned char>(text[i]))) char_offsets.push_back(i);
  }
  const std::size_t n = char_offsets.size();
  const std::size_t step = chunk_size - overlap;
  auto byte_at = [&](std::size_t ch) { return ch < n ? char_offsets[ch] : text.size(); };

  std::vector<Chunk> chunks;
  for (std::size_t start = 0;; start += step) {
    const std::size_t end = std::min(start + chunk_size, n);
    Chunk c;
    c.id = static_cast<int>(chunks.size());
    c.span = {byte_at(start), byte_at(end)};
    c.text = std::string(text.substr(c.span.start, c.span.end - c.span.start));
    c.char_start = start;
    c.char_length = end - start;
    chunks.push_back(std::move(c));
    if (end == n) break;
  }
  return chunks;
}

double l2_norm(const Embedding& v) {
  double sum = 0.0;
  for (double x : v.values) sum += x * x;
  return std::sqrt(sum);
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dims() != b.dims()) {
    throw Error(ErrorCode::DimsMismatch,
                std::to_string(a.dims()) + " vs " + std::to_string(b.dims()));
  }
  double dot = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    aa += a.values[i] * a.values[i];
    bb += b.values[i] * b.values[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return dot / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<Embedding> EmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

Embedding LocalHashEmbedder::embed(std::string_view text) const {
  Embedding v{std::vector<double>(kLocalHashDims, 0.0)};
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      v.values[fnv1a(token) % kLocalHashDims] += 1.0;
      token.clear();
    }
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw >= 'A' && raw <= 'Z' ? raw - 'A' + 'a' : raw);
    if (is_token_char(c)) {
      token.push_back(static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();

  const double norm = l2_norm(v);
  if (norm > 0.0) {
    for (double& x : v.values) x /= norm;
  }
  return v;
}

Embedding RemoteEmbedder::embed(std::string_view text) const {
  const std::string one(text);
  return embed_batch(std::span<const std::string>(&one, 1)).front();
}

std::vector<Embedding> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
  std::optional<std::string> token;
  if (!config_.auth_env_var.empty()) {
    token = token_from_env(config_.auth_env_var);
    if (!token) throw Error(ErrorCode::AuthMissing, "environment variable " + config_.auth_env_var);
  }

  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += config_.batch_size) {
    const std::size_t end = std::min(begin + config_.batch_size, texts.size());
    Json req = {{"input", Json::array()}, {"model", config_.model}};
    for (std::size_t i = begin; i < end; ++i) req["input"].push_back(texts[i]);

    std::string transport_error;
    const auto res = http_post_json(config_.url, req.dump(), token, config_.timeout, &transport_error);
    if (!res) throw Error(ErrorCode::ProviderUnreachable, config_.url + ": " + transport_error);
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::ProviderUnreachable,
                  config_.url + " returned HTTP " + std::to_string(res->status));
    }

    try {
      const Json doc = Json::parse(res->body);
      const auto& data = doc.at("data");
      if (data.size() != end - begin) {
        throw Error(ErrorCode::MalformedResponse, "embedding count does not match input count");
      }
      std::vector<Embedding> batch(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
        if (slot >= batch.size()) throw Error(ErrorCode::MalformedResponse, "embedding index out of range");
        batch[slot].values = data[i].at("embedding").get<std::vector<double>>();
      }
      for (auto& e : batch) out.push_back(std::move(e));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::MalformedResponse, e.what());
    }
  }
  return out;
}

void VectorStore::add(StoreEntry entry) {
  if (!entries_.empty() && entry.vector.dims() != dims()) {
    throw Error(ErrorCode::DimsMismatch, "store has dims " + std::to_string(dims()) +
                                             ", entry has " + std::to_string(entry.vector.dims()));
  }
  if (!by_id_.emplace(entry.chunk_id, entries_.size()).second) {
    throw Error(ErrorCode::InvalidParams, "duplicate chunk id " + std::to_string(entry.chunk_id));
  }
  entries_.push_back(std::move(entry));
}

const StoreEntry* VectorStore::find(int chunk_id) const {
  auto it = by_id_.find(chunk_id);
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

VectorStore build_store(std::string_view text, const EmbeddingProvider& provider,
                        std::size_t chunk_size, std::size_t overlap) {
  auto chunks = chunk_text(text, chunk_size, overlap);
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  auto vectors = provider.embed_batch(texts);

  VectorStore store(provider.tag());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    store.add({chunks[i].id, std::move(vectors[i]), chunks[i].span, std::move(chunks[i].text)});
  }
  return store;
}

void save_store(const VectorStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<Json> records;
  std::vector<Json> texts;
  for (const auto& e : store.entries()) {
    records.push_back({{"id", e.chunk_id},
                       {"span", {e.span.start, e.span.end}},
                       {"vector", e.vector.values},
                       {"text_digest", sha256_hex(e.text)}});
    texts.push_back({{"id", e.chunk_id}, {"text", e.text}});
  }
  write_jsonl(dir / "store.jsonl", records);
  write_jsonl(dir / "chunks.jsonl", texts);
  const Json meta = {{"provider_tag", store.provider_tag()},
                     {"dims", store.dims()},
                     {"count", store.size()}};
  write_file(dir / "meta.json", meta.dump(2) + "\n");
}

VectorStore load_store(const std::filesystem::path& dir) {
  const Json meta = Json::parse(read_file(dir / "meta.json"));
  std::unordered_map<int, std::string> texts;
  for (const auto& row : read_jsonl(dir / "chunks.jsonl")) {
    texts[row.at("id").get<int>()] = row.at("text").get<std::string>();
  }

  VectorStore store(meta.at("provider_tag").get<std::string>());
  for (const auto& row : read_jsonl(dir / "store.jsonl")) {
    StoreEntry e;
    e.chunk_id = row.at("id").get<int>();
    e.span = {row.at("span").at(0).get<std::size_t>(), row.at("span").at(1).get<std::size_t>()};
    e.vector.values = row.at("vector").get<std::vector<double>>();
    auto it = texts.find(e.chunk_id);
    if (it == texts.end()) {
      throw Error(ErrorCode::UnreadableFile, "chunk text missing for id " + std::to_string(e.chunk_id));
    }
    e.text = std::move(it->second);
    if (sha256_hex(e.text) != row.at("text_digest").get<std::string>()) {
      throw Error(ErrorCode::UnreadableFile, "chunk text digest mismatch for id " + std::to_string(e.chunk_id));
    }
    store.add(std::move(e));
  }
  return store;
}

std::vector<RetrievalResult> similarity_search(const VectorStore& store, const Embedding& query,
                                               std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidParams, "k must be at least 1");
  if (!store.empty() && query.dims() != store.dims()) {
    throw Error(ErrorCode::DimsMismatch, "query dims " + std::to_string(query.dims()) +
                                             ", store dims " + std::to_string(store.dims()));
  }

  std::vector<RetrievalResult> scored;
  scored.reserve(store.size());
  for (const auto& e : store.entries()) {
    scored.push_back({e.chunk_id, cosine_similarity(query, e.vector), {}});
  }
  const auto better = [](const RetrievalResult& a, const RetrievalResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk_id < b.chunk_id;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    better);
  scored.resize(n);
  for (auto& r : scored) r.text = store.find(r.chunk_id)->text;
  return scored;
}

std::string_view to_string(RagMode mode) noexcept {
  return mode == RagMode::Manual ? "manual" : "similarity";
}

RagMode parse_rag_mode(std::string_view name) {
  if (name == "manual") return RagMode::Manual;
  if (name == "similarity") return RagMode::Similarity;
  throw Error(ErrorCode::InvalidConfig, "unknown RAG mode '" + std::string(name) + "'");
}

RetrievedContext retrieve_context(const SpecIndex& index, const VectorStore& store,
                                  const FeatureSpec& feature, RagMode mode, std::size_t k,
                                  const EmbeddingProvider& provider) {
  RetrievedContext ctx;
  if (mode == RagMode::Manual) {
    const auto& section = lookup_section(index, feature.section_key);
    ctx.text = section.body;
    ctx.provenance.push_back("section:" + section.key);
    return ctx;
  }

  if (store.empty()) {
    ctx.empty_store = true;
    return ctx;
  }
  const auto results = similarity_search(store, provider.embed(request_sentence(feature)), k);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i > 0) ctx.text += "\n\n";
    ctx.text += results[i].text;
    ctx.provenance.push_back("chunk:" + std::to_string(results[i].chunk_id));
  }
  return ctx;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const Json& config) {
  const std::string kind = config.value("provider", "local-hash");
  if (kind == "local-hash") return std::make_unique<LocalHashEmbedder>();
  if (kind == "remote") {
    RemoteEmbeddingConfig rc;
    rc.url = config.at("url").get<std::string>();
    rc.model = config.at("model").get<std::string>();
    rc.auth_env_var = config.value("auth_env", "");
    rc.timeout = std::chrono::seconds(config.value("timeout_s", 120));
    rc.batch_size = config.value("batch_size", std::size_t{64});
    return std::make_unique<RemoteEmbedder>(std::move(rc));
  }
  throw Error(ErrorCode::InvalidConfig, "unknown embedding provider '" + kind + "'");
}

}  // namespace vvgen
