#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "imgscan/discovery.hpp"
#include "imgscan/registry_types.hpp"
#include "imgscan/rules.hpp"

namespace imgscan {

enum class OwnerKind { HubNamespace, RegistryAddress };
const char* owner_kind_name(OwnerKind k);

struct OwnerKey {
    OwnerKind kind = OwnerKind::RegistryAddress;
    std::string value;

    std::string display() const { return std::string(owner_kind_name(kind)) + ":" + value; }
    auto operator<=>(const OwnerKey&) const = default;
};

OwnerKey owner_for_hub_repository(const std::string& repository);
OwnerKey owner_for_registry(const std::string& registry_address);

struct ImageRecord {
    std::string reference;  // endpoint/repo:tag
    std::string repository;
    std::string selected_tag;
    OwnerKey owner;
    bool from_hub = false;
    std::set<std::string> query_groups;  // groups whose terms discovered the repo
    std::vector<std::string> layer_digests;  // stacking order
    ImageConfig config;
    std::string manifest_config_digest;
};

struct LayerRecord {
    std::string digest;
    uint64_t size = 0;
    std::string media;
    bool extracted = false;
    std::string error;
};

struct ErrorRecord {
    std::string context;
    std::string message;
};

// Append-only directory store; one writer per campaign, snapshot readers.
class CampaignStore {
  public:
    explicit CampaignStore(std::string dir);

    void init_campaign(const std::string& config_echo_json, const std::string& ruleset_hash,
                       int64_t started_at);

    void append_probe(const ProbeResult& result);
    void append_image(const ImageRecord& image);
    void append_layer(const LayerRecord& layer);
    void append_match(const RawMatch& match);
    void append_error(const std::string& context, const std::string& message);

    std::vector<ProbeResult> load_probes() const;
    std::vector<ImageRecord> load_images() const;
    std::vector<LayerRecord> load_layers() const;
    std::vector<RawMatch> load_matches() const;

    struct CampaignMeta {
        std::string config_echo;
        std::string ruleset_hash;
        int64_t started_at = 0;
    };
    std::optional<CampaignMeta> load_meta() const;

    const std::string& dir() const { return dir_; }
    std::string path(const std::string& name) const;

  private:
    void append_line(const std::string& file, const std::string& line);

    std::string dir_;
    std::mutex write_mu_;
};

}  // namespace imgscan
