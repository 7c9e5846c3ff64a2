#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imgscan/config.hpp"
#include "imgscan/discovery.hpp"
#include "imgscan/layer_extract.hpp"
#include "imgscan/registry_client.hpp"
#include "imgscan/store.hpp"
#include "imgscan/validate.hpp"

namespace imgscan {

struct PipelineCounters {
    uint64_t images = 0;
    uint64_t layers_selected = 0;
    uint64_t layers_fetched = 0;
    uint64_t layers_deduped = 0;
    uint64_t file_matches = 0;
    uint64_t env_matches = 0;
    uint64_t errors = 0;
};

// Scans private registry endpoints: catalog (capped), one tag per
// repository, manifests and configs, then randomly sampled layers within
// the per-registry byte budget.
PipelineCounters scan_registries(const ScanConfig& config,
                                 const std::vector<RegistryEndpoint>& endpoints,
                                 CampaignStore& store);

// Scans Docker Hub: query groups -> repositories -> one tag each -> all
// distinct layers (dedup across the campaign).
PipelineCounters scan_hub(const ScanConfig& config, CampaignStore& store);

struct ValidateSummary {
    uint64_t distinct_input = 0;
    uint64_t passed = 0;
    uint64_t certificates = 0;
    std::string funnel_path;
};

// Re-runs the filter cascade over stored matches, writing verdicts,
// redacted secrets, the funnel table, and certificate records.
ValidateSummary run_validate(const ScanConfig& config, CampaignStore& store);

struct CorrelateSummary {
    uint64_t fingerprints = 0;
    uint64_t unverifiable_keys = 0;
    uint64_t matched_hosts = 0;
    uint64_t compromised_certificates = 0;
    uint64_t skipped_rows = 0;
};

CorrelateSummary run_correlate(const ScanConfig& config, CampaignStore& store,
                               const std::string& observations_file);

struct ProbeSummary {
    ScanStats stats;
    std::map<ProbeOutcome, uint64_t> outcomes;
};

ProbeSummary run_probe(const ScanConfig& config, const std::vector<ProbeTarget>& targets,
                       const Blocklist& blocklist, CampaignStore& store, Prober* prober = nullptr);

// Emits report views under <store>/report. Redaction is the default;
// unredacted output requires the explicit flag and prints a warning.
void emit_report(CampaignStore& store, bool unredacted = false);

// Loads validated secrets by joining stored matches with the verdict file
// written by run_validate.
std::vector<ValidatedSecret> load_validated_secrets(CampaignStore& store);

}  // namespace imgscan
