#include "imgscan/store.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "imgscan/common.hpp"

namespace imgscan {

using nlohmann::json;
namespace fs = std::filesystem;

const char* owner_kind_name(OwnerKind k) {
    return k == OwnerKind::HubNamespace ? "hub-namespace" : "registry-address";
}

OwnerKey owner_for_hub_repository(const std::string& repository) {
    auto slash = repository.find('/');
    std::string ns = slash == std::string::npos ? "library" : repository.substr(0, slash);
    return OwnerKey{OwnerKind::HubNamespace, ns};
}

OwnerKey owner_for_registry(const std::string& registry_address) {
    return OwnerKey{OwnerKind::RegistryAddress, registry_address};
}

CampaignStore::CampaignStore(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

std::string CampaignStore::path(const std::string& name) const {
    return (fs::path(dir_) / name).string();
}

void CampaignStore::append_line(const std::string& file, const std::string& line) {
    std::lock_guard lk(write_mu_);
    std::ofstream out(path(file), std::ios::binary | std::ios::app);
    if (!out) throw ScanError(ErrorKind::Io, "cannot append to " + path(file));
    out << line << "\n";
}

void CampaignStore::init_campaign(const std::string& config_echo_json,
                                  const std::string& ruleset_hash, int64_t started_at) {
    json meta;
    meta["config_echo"] = config_echo_json;
    meta["ruleset_hash"] = ruleset_hash;
    meta["started_at"] = started_at;
    write_file(path("campaign.json"), meta.dump(2) + "\n");
}

void CampaignStore::append_probe(const ProbeResult& result) {
    json line;
    line["address"] = result.target.address;
    line["port"] = result.target.port;
    line["outcome"] = probe_outcome_name(result.outcome);
    if (result.api_version_header) line["api_version_header"] = *result.api_version_header;
    line["latency_ms"] = result.latency_ms;
    append_line("probes.jsonl", line.dump());
}

void CampaignStore::append_image(const ImageRecord& image) {
    json line;
    line["reference"] = image.reference;
    line["repository"] = image.repository;
    line["selected_tag"] = image.selected_tag;
    line["owner_kind"] = owner_kind_name(image.owner.kind);
    line["owner"] = image.owner.value;
    line["from_hub"] = image.from_hub;
    line["query_groups"] = image.query_groups;
    line["layers"] = image.layer_digests;
    line["config_digest"] = image.manifest_config_digest;
    line["env"] = image.config.env;
    line["created"] = image.config.created;
    line["history"] = json::array();
    for (const auto& h : image.config.history) {
        json entry;
        entry["created"] = h.created;
        entry["created_by"] = h.created_by;
        entry["empty_layer"] = h.empty_layer;
        line["history"].push_back(std::move(entry));
    }
    line["history_layer_mismatch"] = image.config.history_layer_mismatch;
    append_line("images.jsonl", line.dump());
}

void CampaignStore::append_layer(const LayerRecord& layer) {
    json line;
    line["digest"] = layer.digest;
    line["size"] = layer.size;
    line["media"] = layer.media;
    line["extracted"] = layer.extracted;
    if (!layer.error.empty()) line["error"] = layer.error;
    append_line("layers.jsonl", line.dump());
}

void CampaignStore::append_match(const RawMatch& match) {
    json line;
    line["rule_id"] = match.rule_id;
    line["domain"] = domain_name(match.domain);
    // Raw bytes survive the round trip via base64; reports redact instead.
    line["matched_b64"] = base64_encode(match.matched_text);
    line["origin"] = origin_name(match.origin);
    line["locator_b64"] = base64_encode(match.locator);
    line["byte_offset"] = match.byte_offset;
    line["layer_digest"] = match.layer_digest;
    line["image"] = match.image;
    line["found_at"] = match.found_at;
    line["truncated"] = match.truncated;
    append_line("matches.jsonl", line.dump());
}

void CampaignStore::append_error(const std::string& context, const std::string& message) {
    json line;
    line["context"] = context;
    line["message"] = message;
    append_line("errors.jsonl", line.dump());
}

namespace {

std::vector<json> read_jsonl(const std::string& file) {
    std::vector<json> out;
    std::ifstream in(file, std::ios::binary);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(json::parse(line));
    }
    return out;
}

}  // namespace

std::vector<ProbeResult> CampaignStore::load_probes() const {
    std::vector<ProbeResult> out;
    for (const auto& line : read_jsonl(path("probes.jsonl"))) {
        ProbeResult r;
        r.target.address = line.value("address", "");
        r.target.port = line.value("port", uint16_t{5000});
        auto outcome = line.value("outcome", "closed");
        for (auto o : {ProbeOutcome::RegistryHttp, ProbeOutcome::RegistryHttps,
                       ProbeOutcome::OpenNotRegistry, ProbeOutcome::Closed, ProbeOutcome::Timeout}) {
            if (outcome == probe_outcome_name(o)) r.outcome = o;
        }
        if (line.contains("api_version_header"))
            r.api_version_header = line["api_version_header"].get<std::string>();
        r.latency_ms = line.value("latency_ms", int64_t{0});
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ImageRecord> CampaignStore::load_images() const {
    std::vector<ImageRecord> out;
    for (const auto& line : read_jsonl(path("images.jsonl"))) {
        ImageRecord image;
        image.reference = line.value("reference", "");
        image.repository = line.value("repository", "");
        image.selected_tag = line.value("selected_tag", "");
        image.owner.kind = line.value("owner_kind", "") == "hub-namespace"
                               ? OwnerKind::HubNamespace
                               : OwnerKind::RegistryAddress;
        image.owner.value = line.value("owner", "");
        image.from_hub = line.value("from_hub", false);
        if (line.contains("query_groups"))
            image.query_groups = line["query_groups"].get<std::set<std::string>>();
        if (line.contains("layers"))
            image.layer_digests = line["layers"].get<std::vector<std::string>>();
        image.manifest_config_digest = line.value("config_digest", "");
        if (line.contains("env")) image.config.env = line["env"].get<std::vector<std::string>>();
        image.config.created = line.value("created", "");
        for (const auto& h : line.value("history", json::array())) {
            HistoryEntry entry;
            entry.created = h.value("created", "");
            entry.created_by = h.value("created_by", "");
            entry.empty_layer = h.value("empty_layer", false);
            image.config.history.push_back(std::move(entry));
        }
        image.config.history_layer_mismatch = line.value("history_layer_mismatch", false);
        out.push_back(std::move(image));
    }
    return out;
}

std::vector<LayerRecord> CampaignStore::load_layers() const {
    std::vector<LayerRecord> out;
    for (const auto& line : read_jsonl(path("layers.jsonl"))) {
        LayerRecord layer;
        layer.digest = line.value("digest", "");
        layer.size = line.value("size", uint64_t{0});
        layer.media = line.value("media", "");
        layer.extracted = line.value("extracted", false);
        layer.error = line.value("error", "");
        out.push_back(std::move(layer));
    }
    return out;
}

std::vector<RawMatch> CampaignStore::load_matches() const {
    std::vector<RawMatch> out;
    for (const auto& line : read_jsonl(path("matches.jsonl"))) {
        RawMatch m;
        m.rule_id = line.value("rule_id", "");
        if (auto d = domain_from_name(line.value("domain", ""))) m.domain = *d;
        m.matched_text = base64_decode(line.value("matched_b64", ""));
        m.origin = line.value("origin", "file") == "env" ? MatchOrigin::Env : MatchOrigin::File;
        m.locator = base64_decode(line.value("locator_b64", ""));
        m.byte_offset = line.value("byte_offset", uint64_t{0});
        m.layer_digest = line.value("layer_digest", "");
        m.image = line.value("image", "");
        m.found_at = line.value("found_at", int64_t{0});
        m.truncated = line.value("truncated", false);
        out.push_back(std::move(m));
    }
    return out;
}

std::optional<CampaignStore::CampaignMeta> CampaignStore::load_meta() const {
    auto file = path("campaign.json");
    if (!fs::exists(file)) return std::nullopt;
    try {
        auto doc = json::parse(read_file(file));
        CampaignMeta meta;
        meta.config_echo = doc.value("config_echo", "");
        meta.ruleset_hash = doc.value("ruleset_hash", "");
        meta.started_at = doc.value("started_at", int64_t{0});
        return meta;
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

}  // namespace imgscan
