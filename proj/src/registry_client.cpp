#include "imgscan/registry_client.hpp"

#include <httplib.h>

#include <algorithm>
#include <thread>

#include <nlohmann/json.hpp>

#include "imgscan/common.hpp"
#include "imgscan/digest.hpp"
#include "imgscan/natsort.hpp"
#include "imgscan/rng.hpp"

namespace imgscan {

using nlohmann::json;

const char* layer_media_name(LayerMediaKind kind) {
    switch (kind) {
    case LayerMediaKind::Tar: return "tar";
    case LayerMediaKind::TarGzip: return "tar+gzip";
    case LayerMediaKind::TarZstd: return "tar+zstd";
    }
    return "?";
}

const char* query_group_name(QueryGroup g) {
    switch (g) {
    case QueryGroup::Standard: return "standard";
    case QueryGroup::Iiot: return "iiot";
    case QueryGroup::None: return "none";
    }
    return "?";
}

std::optional<std::string> HttpResponse::header(const std::string& name) const {
    auto lowered = to_lower(name);
    for (const auto& [k, v] : headers) {
        if (to_lower(k) == lowered) return v;
    }
    return std::nullopt;
}

namespace {

constexpr const char* kAcceptManifest =
    "application/vnd.docker.distribution.manifest.v2+json, "
    "application/vnd.oci.image.manifest.v1+json, "
    "application/vnd.docker.distribution.manifest.list.v2+json, "
    "application/vnd.oci.image.index.v1+json";

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    size_t path_start = scheme_end == std::string::npos ? url.find('/')
                                                        : url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::unique_ptr<httplib::Client> make_client(const std::string& base, const HttpOptions& opts,
                                             bool verify_tls) {
    auto cli = std::make_unique<httplib::Client>(base);
    cli->set_connection_timeout(0, opts.connect_timeout_ms * 1000);
    cli->set_read_timeout(opts.read_timeout_ms / 1000, opts.read_timeout_ms % 1000 * 1000);
    cli->set_follow_location(true);
    cli->enable_server_certificate_verification(verify_tls);
    return cli;
}

HttpResponse run_get(const std::string& base, const std::string& path, const httplib::Headers& headers,
                     const HttpOptions& opts, bool verify_tls) {
    auto cli = make_client(base, opts, verify_tls);
    auto res = cli->Get(path, headers);
    if (!res) throw ScanError(ErrorKind::Unreachable, base + path + ": " + to_string(res.error()));
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    out.headers.insert(res->headers.begin(), res->headers.end());
    return out;
}

// 429s back off and retry within the configured budget.
HttpResponse run_get_with_backoff(const std::string& base, const std::string& path,
                                  const httplib::Headers& headers, const HttpOptions& opts,
                                  bool verify_tls) {
    int attempt = 0;
    while (true) {
        auto res = run_get(base, path, headers, opts, verify_tls);
        if (res.status != 429) return res;
        if (attempt >= opts.retries_on_429)
            throw ScanError(ErrorKind::RateLimited, base + path + ": 429 after retries");
        std::this_thread::sleep_for(std::chrono::milliseconds(opts.backoff_base_ms << attempt));
        ++attempt;
    }
}

std::optional<LayerMediaKind> media_kind_from_type(const std::string& media_type) {
    if (media_type == "application/vnd.docker.image.rootfs.diff.tar.gzip" ||
        media_type == "application/vnd.oci.image.layer.v1.tar+gzip" ||
        media_type == "application/vnd.oci.image.layer.nondistributable.v1.tar+gzip")
        return LayerMediaKind::TarGzip;
    if (media_type == "application/vnd.oci.image.layer.v1.tar" ||
        media_type == "application/vnd.docker.image.rootfs.diff.tar")
        return LayerMediaKind::Tar;
    if (media_type == "application/vnd.oci.image.layer.v1.tar+zstd" ||
        media_type == "application/vnd.docker.image.rootfs.diff.tar.zstd")
        return LayerMediaKind::TarZstd;
    return std::nullopt;
}

// RFC 6750-ish challenge: Bearer realm="...",service="...",scope="..."
std::map<std::string, std::string> parse_challenge_params(const std::string& challenge) {
    std::map<std::string, std::string> params;
    size_t pos = challenge.find(' ');
    std::string rest = pos == std::string::npos ? "" : challenge.substr(pos + 1);
    for (auto& piece : split(rest, ',')) {
        auto eq = piece.find('=');
        if (eq == std::string::npos) continue;
        std::string key = trim(piece.substr(0, eq));
        std::string val = trim(piece.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
            val = val.substr(1, val.size() - 2);
        params[to_lower(key)] = val;
    }
    return params;
}

}  // namespace

BlobSink make_string_sink(std::string& out) {
    BlobSink sink;
    sink.begin = [&out] { out.clear(); };
    sink.write = [&out](std::string_view chunk) { out.append(chunk); };
    return sink;
}

RegistryClient::RegistryClient(RegistryEndpoint endpoint, HttpOptions options)
    : endpoint_(std::move(endpoint)),
      options_(std::move(options)),
      bucket_(std::make_shared<TokenBucket>(endpoint_.rate_policy.max_requests_per_second)),
      gate_(std::make_shared<TransferGate>(endpoint_.rate_policy.max_concurrent_transfers)) {}

HttpResponse RegistryClient::get_raw(const std::string& path,
                                     const std::vector<std::pair<std::string, std::string>>& headers,
                                     const std::optional<std::string>& token) {
    bucket_->acquire();
    httplib::Headers h;
    h.emplace("User-Agent", options_.user_agent);
    for (const auto& [k, v] : headers) h.emplace(k, v);
    if (token)
        h.emplace("Authorization", "Bearer " + *token);
    else if (endpoint_.bearer_token)
        h.emplace("Authorization", "Bearer " + *endpoint_.bearer_token);
    return run_get_with_backoff(endpoint_.base_url(), path, h, options_, endpoint_.verify_tls);
}

std::optional<std::string> RegistryClient::obtain_token(const std::string& challenge,
                                                        const std::string& repository_scope) {
    auto params = parse_challenge_params(challenge);
    auto realm = params.find("realm");
    if (realm == params.end()) return std::nullopt;
    auto [base, path] = split_url(realm->second);
    std::string query = path;
    char sep = query.find('?') == std::string::npos ? '?' : '&';
    if (params.count("service")) {
        query += sep + std::string("service=") + params["service"];
        sep = '&';
    }
    std::string scope = params.count("scope") ? params["scope"]
                                              : "repository:" + repository_scope + ":pull";
    query += sep + std::string("scope=") + scope;

    httplib::Headers h{{"User-Agent", options_.user_agent}};
    auto res = run_get(base, query, h, options_, endpoint_.verify_tls);
    if (res.status != 200) return std::nullopt;
    try {
        auto doc = json::parse(res.body);
        if (doc.contains("token")) return doc["token"].get<std::string>();
        if (doc.contains("access_token")) return doc["access_token"].get<std::string>();
    } catch (const json::exception&) {
    }
    return std::nullopt;
}

HttpResponse RegistryClient::get(const std::string& path,
                                 const std::vector<std::pair<std::string, std::string>>& headers,
                                 const std::string& repository_scope) {
    std::optional<std::string> cached;
    {
        std::lock_guard lk(token_mu_);
        auto it = scope_tokens_.find(repository_scope);
        if (it != scope_tokens_.end()) cached = it->second;
    }
    auto res = get_raw(path, headers, cached);
    if (res.status != 401) return res;

    // Anonymous bearer-token flow; no credential guessing.
    auto challenge = res.header("WWW-Authenticate");
    if (!challenge || to_lower(challenge->substr(0, 6)) != "bearer") return res;
    auto token = obtain_token(*challenge, repository_scope);
    if (!token) return res;
    {
        std::lock_guard lk(token_mu_);
        scope_tokens_[repository_scope] = *token;
    }
    return get_raw(path, headers, token);
}

std::vector<std::string> RegistryClient::list_repositories(unsigned cap) {
    std::vector<std::string> names;
    std::string path = "/v2/_catalog?n=" + std::to_string(cap);
    while (names.size() < cap) {
        auto res = get(path, {}, "catalog");
        if (res.status == 401) throw ScanError(ErrorKind::AuthRequired, "catalog requires auth");
        if (res.status != 200)
            throw ScanError(ErrorKind::ProtocolError,
                            "catalog: HTTP " + std::to_string(res.status));
        json doc;
        try {
            doc = json::parse(res.body);
        } catch (const json::exception&) {
            throw ScanError(ErrorKind::ProtocolError, "catalog: response is not a registry body");
        }
        if (!doc.contains("repositories") || !doc["repositories"].is_array())
            throw ScanError(ErrorKind::ProtocolError, "catalog: missing repositories list");
        for (const auto& name : doc["repositories"]) {
            if (names.size() >= cap) break;
            names.push_back(name.get<std::string>());
        }
        if (names.size() >= cap) break;

        auto link = res.header("Link");
        if (!link) break;
        auto lt = link->find('<');
        auto gt = link->find('>');
        if (lt == std::string::npos || gt == std::string::npos || gt <= lt) break;
        path = link->substr(lt + 1, gt - lt - 1);
        if (auto split = split_url(path); !split.path.empty()) path = split.path;
    }
    return names;
}

std::vector<std::string> RegistryClient::list_tags(const std::string& repository) {
    auto res = get("/v2/" + repository + "/tags/list", {}, repository);
    if (res.status == 401) throw ScanError(ErrorKind::AuthRequired, repository + ": tags require auth");
    if (res.status == 404) return {};
    if (res.status != 200)
        throw ScanError(ErrorKind::ProtocolError,
                        repository + ": tags/list HTTP " + std::to_string(res.status));
    try {
        auto doc = json::parse(res.body);
        std::vector<std::string> tags;
        if (doc.contains("tags") && doc["tags"].is_array())
            for (const auto& t : doc["tags"]) tags.push_back(t.get<std::string>());
        return tags;
    } catch (const json::exception&) {
        throw ScanError(ErrorKind::ProtocolError, repository + ": tags/list body unparsable");
    }
}

namespace {

Manifest parse_single_manifest(const json& doc, SchemaKind kind) {
    Manifest manifest;
    manifest.schema_kind = kind;
    if (!doc.contains("config") || !doc.contains("layers"))
        throw ScanError(ErrorKind::UnsupportedSchema, "manifest missing config/layers");
    manifest.config_digest = doc["config"].value("digest", "");
    for (const auto& layer : doc["layers"]) {
        LayerDescriptor desc;
        desc.digest = layer.value("digest", "");
        desc.size = layer.value("size", uint64_t{0});
        auto media = media_kind_from_type(layer.value("mediaType", ""));
        desc.media_kind = media.value_or(LayerMediaKind::TarGzip);
        if (!is_wellformed_digest(desc.digest))
            throw ScanError(ErrorKind::ProtocolError, "malformed layer digest " + desc.digest);
        manifest.layers.push_back(std::move(desc));
    }
    if (!is_wellformed_digest(manifest.config_digest))
        throw ScanError(ErrorKind::ProtocolError, "malformed config digest");
    return manifest;
}

}  // namespace

Manifest RegistryClient::fetch_manifest(const ImageRef& ref) {
    auto res = get("/v2/" + ref.repository + "/manifests/" + ref.reference(),
                   {{"Accept", kAcceptManifest}}, ref.repository);
    if (res.status == 404) throw ScanError(ErrorKind::NotFound, ref.display());
    if (res.status != 200)
        throw ScanError(ErrorKind::ProtocolError,
                        ref.display() + ": manifest HTTP " + std::to_string(res.status));

    std::string content_type = res.header("Content-Type").value_or("");
    json doc;
    try {
        doc = json::parse(res.body);
    } catch (const json::exception&) {
        throw ScanError(ErrorKind::UnsupportedSchema, ref.display() + ": manifest unparsable");
    }

    bool is_list = content_type == "application/vnd.docker.distribution.manifest.list.v2+json" ||
                   content_type == "application/vnd.oci.image.index.v1+json" ||
                   doc.contains("manifests");
    if (is_list) {
        // Multi-platform image: pick linux/amd64, falling back to the first
        // entry, and fetch that manifest by digest.
        if (!doc.contains("manifests") || doc["manifests"].empty())
            throw ScanError(ErrorKind::UnsupportedSchema, ref.display() + ": empty manifest list");
        std::string chosen;
        for (const auto& entry : doc["manifests"]) {
            auto platform = entry.value("platform", json::object());
            if (platform.value("os", "") == "linux" &&
                platform.value("architecture", "") == "amd64") {
                chosen = entry.value("digest", "");
                break;
            }
        }
        if (chosen.empty()) chosen = doc["manifests"][0].value("digest", "");
        ImageRef by_digest = ref;
        by_digest.digest = chosen;
        by_digest.tag.reset();
        return fetch_manifest(by_digest);
    }

    if (doc.value("schemaVersion", 0) != 2)
        throw ScanError(ErrorKind::UnsupportedSchema,
                        ref.display() + ": unsupported schema version");
    SchemaKind kind = content_type == "application/vnd.oci.image.manifest.v1+json"
                          ? SchemaKind::Oci
                          : SchemaKind::V2Schema2;
    return parse_single_manifest(doc, kind);
}

ImageConfig RegistryClient::fetch_config(const ImageRef& ref, const Manifest& manifest) {
    std::string body;
    auto sink = make_string_sink(body);
    LayerDescriptor pseudo;
    pseudo.digest = manifest.config_digest;
    fetch_blob(ref, pseudo, sink);

    ImageConfig config;
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception&) {
        throw ScanError(ErrorKind::ProtocolError, ref.display() + ": config blob unparsable");
    }
    config.created = doc.value("created", "");
    if (doc.contains("config") && doc["config"].is_object()) {
        const auto& c = doc["config"];
        if (c.contains("Env") && c["Env"].is_array())
            for (const auto& e : c["Env"]) config.env.push_back(e.get<std::string>());
    }
    if (doc.contains("history") && doc["history"].is_array()) {
        for (const auto& h : doc["history"]) {
            HistoryEntry entry;
            entry.created = h.value("created", "");
            entry.created_by = h.value("created_by", "");
            entry.empty_layer = h.value("empty_layer", false);
            config.history.push_back(std::move(entry));
        }
    }
    config.history_layer_mismatch =
        !config.history.empty() && config.layer_history().size() != manifest.layers.size();
    return config;
}

void RegistryClient::fetch_blob(const ImageRef& ref, const LayerDescriptor& layer, BlobSink sink) {
    if (!is_wellformed_digest(layer.digest))
        throw ScanError(ErrorKind::ProtocolError, "malformed blob digest " + layer.digest);
    std::string path = "/v2/" + ref.repository + "/blobs/" + layer.digest;

    auto attempt = [&]() -> bool {
        TransferGate::Scoped scoped(*gate_);
        bucket_->acquire();

        std::optional<std::string> token;
        {
            std::lock_guard lk(token_mu_);
            auto it = scope_tokens_.find(ref.repository);
            if (it != scope_tokens_.end()) token = it->second;
        }

        httplib::Headers h{{"User-Agent", options_.user_agent}};
        if (token)
            h.emplace("Authorization", "Bearer " + *token);
        else if (endpoint_.bearer_token)
            h.emplace("Authorization", "Bearer " + *endpoint_.bearer_token);

        sink.begin();
        Sha256 hasher;
        auto cli = make_client(endpoint_.base_url(), options_, endpoint_.verify_tls);
        int status = 0;
        auto res = cli->Get(
            path, h,
            [&](const httplib::Response& response) {
                status = response.status;
                return true;
            },
            [&](const char* data, size_t len) {
                if (status == 200) {
                    hasher.update({data, len});
                    sink.write({data, len});
                }
                return true;
            });
        if (!res) {
            if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Canceled)
                return false;  // truncated mid-stream; retry once
            throw ScanError(ErrorKind::Unreachable, ref.display() + ": " + to_string(res.error()));
        }
        if (status == 401) {
            // One token round-trip, then replay the transfer.
            auto probe = get("/v2/" + ref.repository + "/blobs/" + layer.digest, {}, ref.repository);
            if (probe.status != 200)
                throw ScanError(ErrorKind::AuthRequired, ref.display() + ": blob requires auth");
            sink.begin();
            Sha256 replay;
            replay.update(probe.body);
            if ("sha256:" + replay.finish_hex() != layer.digest)
                throw ScanError(ErrorKind::IntegrityError, ref.display() + ": digest mismatch");
            sink.write(probe.body);
            sink.done();
            return true;
        }
        if (status == 404) throw ScanError(ErrorKind::NotFound, ref.display() + ": blob missing");
        if (status != 200)
            throw ScanError(ErrorKind::ProtocolError,
                            ref.display() + ": blob HTTP " + std::to_string(status));
        if ("sha256:" + hasher.finish_hex() != layer.digest)
            throw ScanError(ErrorKind::IntegrityError,
                            ref.display() + ": digest mismatch for " + layer.digest);
        sink.done();
        return true;
    };

    if (!attempt()) {
        if (!attempt())
            throw ScanError(ErrorKind::PartialTransfer, ref.display() + ": truncated twice");
    }
}

HubClient::HubClient(std::string api_base_url, HttpOptions options)
    : base_(std::move(api_base_url)),
      options_(std::move(options)),
      bucket_(std::make_shared<TokenBucket>(8.0)) {}

HttpResponse HubClient::get(const std::string& path_and_query) {
    bucket_->acquire();
    httplib::Headers h{{"User-Agent", options_.user_agent}};
    return run_get_with_backoff(base_, path_and_query, h, options_, true);
}

std::vector<RepoSummary> HubClient::search(const std::string& term, unsigned result_limit) {
    if (term.empty()) throw ScanError(ErrorKind::Config, "empty search term");
    if (result_limit > 10000) throw ScanError(ErrorKind::Config, "result limit above Hub cap");

    std::vector<RepoSummary> out;
    std::vector<std::string> seen;
    std::string path = "/v2/search/repositories?query=" + term + "&page_size=100";
    capped_ = false;
    while (out.size() < result_limit) {
        auto res = get(path);
        if (res.status == 404) break;
        if (res.status != 200)
            throw ScanError(ErrorKind::ProtocolError,
                            "hub search HTTP " + std::to_string(res.status));
        json doc;
        try {
            doc = json::parse(res.body);
        } catch (const json::exception&) {
            throw ScanError(ErrorKind::ProtocolError, "hub search body unparsable");
        }
        uint64_t count = doc.value("count", uint64_t{0});
        if (count > 10000) capped_ = true;  // API result cap, surfaced not fatal
        for (const auto& item : doc.value("results", json::array())) {
            if (out.size() >= result_limit) break;
            RepoSummary summary;
            summary.name = item.value("repo_name", item.value("name", ""));
            if (summary.name.empty()) continue;
            if (std::find(seen.begin(), seen.end(), summary.name) != seen.end()) continue;
            seen.push_back(summary.name);
            if (item.contains("last_updated") && item["last_updated"].is_string())
                summary.last_updated = item["last_updated"].get<std::string>();
            summary.source_query = term;
            out.push_back(std::move(summary));
        }
        if (!doc.contains("next") || doc["next"].is_null()) break;
        auto next = doc["next"].get<std::string>();
        if (next.empty()) break;
        path = split_url(next).path;
    }
    return out;
}

std::pair<std::vector<std::string>, std::map<std::string, std::optional<std::string>>>
HubClient::list_tags(const std::string& repository) {
    std::string repo = repository.find('/') == std::string::npos ? "library/" + repository
                                                                 : repository;
    std::vector<std::string> tags;
    std::map<std::string, std::optional<std::string>> meta;
    std::string path = "/v2/repositories/" + repo + "/tags?page_size=100";
    while (true) {
        auto res = get(path);
        if (res.status == 404) break;
        if (res.status != 200)
            throw ScanError(ErrorKind::ProtocolError, "hub tags HTTP " + std::to_string(res.status));
        json doc;
        try {
            doc = json::parse(res.body);
        } catch (const json::exception&) {
            throw ScanError(ErrorKind::ProtocolError, "hub tags body unparsable");
        }
        for (const auto& item : doc.value("results", json::array())) {
            std::string name = item.value("name", "");
            if (name.empty()) continue;
            tags.push_back(name);
            if (item.contains("last_updated") && item["last_updated"].is_string())
                meta[name] = item["last_updated"].get<std::string>();
            else
                meta[name] = std::nullopt;
        }
        if (!doc.contains("next") || doc["next"].is_null()) break;
        auto next = doc["next"].get<std::string>();
        if (next.empty()) break;
        path = split_url(next).path;
    }
    return {tags, meta};
}

std::optional<std::string> select_tag(
    const std::vector<std::string>& tags,
    const std::map<std::string, std::optional<std::string>>& per_tag_meta, TagSelectMode mode) {
    if (tags.empty()) return std::nullopt;
    for (const auto& t : tags) {
        if (t == "latest") return t;
    }
    if (mode == TagSelectMode::Private) {
        return *std::max_element(tags.begin(), tags.end(), natural_less);
    }
    // Hub: newest last-changed timestamp wins; missing timestamps sort
    // oldest, ties break by natural order for determinism.
    const std::string* best = &tags.front();
    auto meta_of = [&](const std::string& t) -> std::optional<std::string> {
        auto it = per_tag_meta.find(t);
        return it == per_tag_meta.end() ? std::nullopt : it->second;
    };
    for (const auto& t : tags) {
        auto cur = meta_of(t);
        auto top = meta_of(*best);
        bool newer = false;
        if (cur && (!top || *cur > *top))
            newer = true;
        else if (static_cast<bool>(cur) == static_cast<bool>(top) && (!cur || *cur == *top))
            newer = natural_less(*best, t);
        if (newer) best = &t;
    }
    return *best;
}

std::vector<LayerDescriptor> sample_layers(const std::vector<LayerDescriptor>& layers,
                                           uint64_t budget_bytes, uint64_t seed) {
    std::vector<LayerDescriptor> shuffled = layers;
    seeded_shuffle(shuffled, seed);
    std::vector<LayerDescriptor> selected;
    uint64_t total = 0;
    for (auto& layer : shuffled) {
        if (total + layer.size <= budget_bytes) {
            total += layer.size;
            selected.push_back(std::move(layer));
        }
    }
    return selected;
}

}  // namespace imgscan
