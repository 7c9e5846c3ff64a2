#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "imgscan/rate_limit.hpp"
#include "imgscan/registry_types.hpp"

namespace imgscan {

struct HttpOptions {
    std::string user_agent = "imgscan/0.1 (+https://localhost/scan-contact)";
    int connect_timeout_ms = 5000;
    int read_timeout_ms = 30000;
    int retries_on_429 = 3;
    int backoff_base_ms = 250;
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::multimap<std::string, std::string> headers;

    std::optional<std::string> header(const std::string& name) const;
};

// Byte-stream consumer for blob transfers. begin() is called again when a
// truncated transfer is retried.
struct BlobSink {
    std::function<void()> begin = [] {};
    std::function<void(std::string_view)> write;
    std::function<void()> done = [] {};
};

BlobSink make_string_sink(std::string& out);

// Speaks the Registry v2 HTTP API against one endpoint. Instances are
// shareable across workers; rate state is synchronized internally.
class RegistryClient {
  public:
    RegistryClient(RegistryEndpoint endpoint, HttpOptions options = {});

    const RegistryEndpoint& endpoint() const { return endpoint_; }

    // GET /v2/_catalog with n=cap; never walks pagination past cap names.
    std::vector<std::string> list_repositories(unsigned cap = 100);

    std::vector<std::string> list_tags(const std::string& repository);

    // Manifest lists resolve to the linux/amd64 entry (first entry as
    // fallback) and are re-fetched, so callers always see a single-platform
    // manifest.
    Manifest fetch_manifest(const ImageRef& ref);

    ImageConfig fetch_config(const ImageRef& ref, const Manifest& manifest);

    // Streams the blob through `sink` while hashing; completes only when the
    // received bytes hash to layer.digest. A truncated transfer is retried
    // once.
    void fetch_blob(const ImageRef& ref, const LayerDescriptor& layer, BlobSink sink);

  private:
    HttpResponse get(const std::string& path, const std::vector<std::pair<std::string, std::string>>& headers,
                     const std::string& repository_scope);
    HttpResponse get_raw(const std::string& path,
                         const std::vector<std::pair<std::string, std::string>>& headers,
                         const std::optional<std::string>& token);
    std::optional<std::string> obtain_token(const std::string& challenge,
                                            const std::string& repository_scope);

    RegistryEndpoint endpoint_;
    HttpOptions options_;
    std::shared_ptr<TokenBucket> bucket_;
    std::shared_ptr<TransferGate> gate_;
    std::mutex token_mu_;
    std::map<std::string, std::string> scope_tokens_;

    friend class HubClient;
};

// Docker Hub REST API (repository search and tag listing).
class HubClient {
  public:
    explicit HubClient(std::string api_base_url, HttpOptions options = {});

    // Deduplicated summaries tagged with source_query=term. Pagination runs
    // until `result_limit` results or exhaustion; a server-side result cap
    // is surfaced via capped(), not an error.
    std::vector<RepoSummary> search(const std::string& term, unsigned result_limit);

    // Tag names plus per-tag last_updated metadata.
    std::pair<std::vector<std::string>, std::map<std::string, std::optional<std::string>>>
    list_tags(const std::string& repository);

    bool capped() const { return capped_; }

  private:
    HttpResponse get(const std::string& path_and_query);

    std::string base_;
    HttpOptions options_;
    std::shared_ptr<TokenBucket> bucket_;
    bool capped_ = false;
};

enum class TagSelectMode { Hub, Private };

// Pure total function: "latest" wins when present; otherwise Hub mode picks
// the newest last-changed timestamp and private mode the natural-sort
// maximum. Empty input selects nothing (empty repository, skipped).
std::optional<std::string> select_tag(const std::vector<std::string>& tags,
                                      const std::map<std::string, std::optional<std::string>>& per_tag_meta,
                                      TagSelectMode mode);

inline constexpr uint64_t kDefaultLayerBudgetBytes = 250'000'000;

// Seeded uniform shuffle, then greedy accept while the running size total
// stays within budget.
std::vector<LayerDescriptor> sample_layers(const std::vector<LayerDescriptor>& layers,
                                           uint64_t budget_bytes, uint64_t seed);

}  // namespace imgscan
