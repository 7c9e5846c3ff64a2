#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace imgscan {

struct RatePolicy {
    double max_requests_per_second = 4.0;
    unsigned max_concurrent_transfers = 1;
};

enum class Scheme { Http, Https };

struct RegistryEndpoint {
    std::string host;
    uint16_t port = 5000;
    Scheme scheme = Scheme::Http;
    std::optional<std::string> bearer_token;
    RatePolicy rate_policy;
    bool verify_tls = true;

    std::string base_url() const {
        return std::string(scheme == Scheme::Https ? "https://" : "http://") + host + ":" +
               std::to_string(port);
    }
    std::string address() const { return host + ":" + std::to_string(port); }
};

struct ImageRef {
    RegistryEndpoint endpoint;
    std::string repository;  // "namespace/name" on Hub
    std::optional<std::string> tag;
    std::optional<std::string> digest;

    std::string reference() const { return digest ? *digest : tag.value_or("latest"); }
    std::string display() const {
        return endpoint.address() + "/" + repository + (tag ? ":" + *tag : "") +
               (digest ? "@" + *digest : "");
    }
};

enum class SchemaKind { V2Schema2, Oci, ManifestList };

enum class LayerMediaKind { Tar, TarGzip, TarZstd };
const char* layer_media_name(LayerMediaKind kind);

struct LayerDescriptor {
    std::string digest;
    uint64_t size = 0;
    LayerMediaKind media_kind = LayerMediaKind::TarGzip;
};

struct Manifest {
    SchemaKind schema_kind = SchemaKind::V2Schema2;
    std::string config_digest;
    std::vector<LayerDescriptor> layers;
};

struct HistoryEntry {
    std::string created;     // RFC 3339 as shipped in the config blob
    std::string created_by;
    bool empty_layer = false;
};

struct ImageConfig {
    std::vector<std::string> env;  // NAME=VALUE
    std::vector<HistoryEntry> history;
    std::string created;
    bool history_layer_mismatch = false;  // recorded warning, not a failure

    // History entries describing non-empty layers, positionally aligned with
    // the manifest layer list.
    std::vector<const HistoryEntry*> layer_history() const {
        std::vector<const HistoryEntry*> out;
        for (const auto& h : history) {
            if (!h.empty_layer) out.push_back(&h);
        }
        return out;
    }
};

enum class QueryGroup { Standard, Iiot, None };
const char* query_group_name(QueryGroup g);

struct RepoSummary {
    std::string name;
    std::optional<std::string> last_updated;
    std::string source_query;
    QueryGroup query_group = QueryGroup::None;
};

}  // namespace imgscan
