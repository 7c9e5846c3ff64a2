#include <CLI11.hpp>

#include <ctime>
#include <iostream>

#include "imgscan/common.hpp"
#include "imgscan/config.hpp"
#include "imgscan/discovery.hpp"
#include "imgscan/pipeline.hpp"
#include "imgscan/rules.hpp"

using namespace imgscan;

namespace {

struct GlobalFlags {
    std::string config_file;
    std::string store_dir = "campaign";
    std::string cache_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    uint64_t budget_bytes = 0;
    std::string blocklist_file;
    std::string rules_file;
    std::string kompromat_dir;
    std::string root_stores_dir;
    bool unredacted = false;
};

ScanConfig make_config(const GlobalFlags& flags) {
    ScanConfig config = flags.config_file.empty() ? ScanConfig{} : ScanConfig::load(flags.config_file);
    if (flags.seed_set) config.seed = flags.seed;
    if (flags.budget_bytes > 0) config.layer_budget_bytes = flags.budget_bytes;
    if (!flags.cache_dir.empty()) config.cache_dir = flags.cache_dir;
    if (!flags.rules_file.empty()) config.rules_file = flags.rules_file;
    if (!flags.kompromat_dir.empty()) config.kompromat_dir = flags.kompromat_dir;
    if (!flags.root_stores_dir.empty()) config.root_stores_dir = flags.root_stores_dir;
    return config;
}

void ensure_campaign(CampaignStore& store, const ScanConfig& config) {
    if (!store.load_meta()) {
        auto rules = load_rules(config.rules_file);
        store.init_campaign(config.to_json(), rules.content_hash(),
                            static_cast<int64_t>(std::time(nullptr)));
    }
}

std::vector<RegistryEndpoint> parse_endpoints(const std::vector<std::string>& specs,
                                              const ScanConfig& config) {
    std::vector<RegistryEndpoint> endpoints;
    for (const auto& spec : specs) {
        RegistryEndpoint ep;
        std::string rest = spec;
        if (rest.rfind("https://", 0) == 0) {
            ep.scheme = Scheme::Https;
            ep.port = 443;
            rest = rest.substr(8);
        } else if (rest.rfind("http://", 0) == 0) {
            ep.scheme = Scheme::Http;
            rest = rest.substr(7);
        }
        auto colon = rest.rfind(':');
        if (colon != std::string::npos && colon + 1 < rest.size()) {
            ep.host = rest.substr(0, colon);
            ep.port = static_cast<uint16_t>(std::stoul(rest.substr(colon + 1)));
        } else {
            ep.host = rest;
        }
        ep.rate_policy = config.private_rate_policy;
        endpoints.push_back(std::move(ep));
    }
    return endpoints;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Container-image secret scanning toolkit"};
    app.require_subcommand(1);

    GlobalFlags flags;
    app.add_option("--config", flags.config_file, "Configuration file (JSON)");
    app.add_option("--store", flags.store_dir, "Campaign store directory");
    app.add_option("--cache-dir", flags.cache_dir, "Content-addressed blob cache directory");
    auto* seed_opt = app.add_option("--seed", flags.seed, "Deterministic RNG seed");
    app.add_option("--budget-bytes", flags.budget_bytes, "Per-registry layer byte budget");
    app.add_option("--blocklist", flags.blocklist_file, "Blocklist file (addresses and CIDRs)");
    app.add_option("--rules", flags.rules_file, "Rule file replacing the built-in set");
    app.add_option("--kompromat-dir", flags.kompromat_dir, "Known-compromised key corpus directory");
    app.add_option("--root-stores", flags.root_stores_dir, "Directory of root store PEM bundles");
    app.add_flag("--unredacted", flags.unredacted, "Emit secret bodies in reports (use with care)");

    // probe
    auto* probe_cmd = app.add_subcommand("probe", "Probe targets for Registry v2 endpoints");
    std::string targets_file;
    probe_cmd->add_option("--targets", targets_file, "Target file: address[:port] per line")
        ->required();

    // scan-registry
    auto* scan_registry_cmd =
        app.add_subcommand("scan-registry", "Scan private registry endpoints");
    std::vector<std::string> endpoint_specs;
    std::string endpoints_file;
    scan_registry_cmd->add_option("--endpoint", endpoint_specs,
                                  "Endpoint ([http[s]://]host[:port]); repeatable");
    scan_registry_cmd->add_option("--endpoints-file", endpoints_file,
                                  "File with one endpoint per line");

    // scan-hub
    auto* scan_hub_cmd = app.add_subcommand("scan-hub", "Search Docker Hub and scan found images");

    // validate
    auto* validate_cmd =
        app.add_subcommand("validate", "Run the false-positive filter cascade on stored matches");

    // correlate
    auto* correlate_cmd =
        app.add_subcommand("correlate", "Join leaked-key fingerprints against host observations");
    std::string observations_file;
    correlate_cmd->add_option("--observations", observations_file, "Host observation CSV")
        ->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "Emit report views from the campaign store");

    // rules
    auto* rules_cmd = app.add_subcommand("rules", "Dump the active ruleset for auditing");

    CLI11_PARSE(app, argc, argv);
    flags.seed_set = seed_opt->count() > 0;

    bool had_errors = false;
    try {
        ScanConfig config = make_config(flags);

        if (rules_cmd->parsed()) {
            auto rules = load_rules(config.rules_file);
            std::cout << dump_rules_json(rules);
            return 0;
        }

        CampaignStore store(flags.store_dir);
        ensure_campaign(store, config);

        if (probe_cmd->parsed()) {
            auto targets = load_targets_file(targets_file);
            Blocklist blocklist;
            if (!flags.blocklist_file.empty())
                blocklist = Blocklist::from_file(flags.blocklist_file);
            auto summary = run_probe(config, targets, blocklist, store);
            std::cout << "probed " << summary.stats.dispatched << " targets ("
                      << summary.stats.dropped_blocklisted << " blocklisted, "
                      << summary.stats.dropped_invalid << " invalid dropped)\n";
            for (const auto& [outcome, count] : summary.outcomes)
                std::cout << "  " << probe_outcome_name(outcome) << ": " << count << "\n";
        } else if (scan_registry_cmd->parsed()) {
            auto endpoints = parse_endpoints(endpoint_specs, config);
            if (!endpoints_file.empty()) {
                for (const auto& target : load_targets_file(endpoints_file)) {
                    RegistryEndpoint ep;
                    ep.host = target.address;
                    ep.port = target.port;
                    ep.rate_policy = config.private_rate_policy;
                    endpoints.push_back(std::move(ep));
                }
            }
            if (endpoints.empty())
                throw ScanError(ErrorKind::Config, "no endpoints given (e.g. --endpoint host:5000)");
            auto counters = scan_registries(config, endpoints, store);
            std::cout << "images " << counters.images << ", layers fetched "
                      << counters.layers_fetched << " (deduped " << counters.layers_deduped
                      << "), matches " << counters.file_matches + counters.env_matches
                      << ", errors " << counters.errors << "\n";
            had_errors = counters.errors > 0;
        } else if (scan_hub_cmd->parsed()) {
            auto counters = scan_hub(config, store);
            std::cout << "images " << counters.images << ", layers fetched "
                      << counters.layers_fetched << " (deduped " << counters.layers_deduped
                      << "), matches " << counters.file_matches + counters.env_matches
                      << ", errors " << counters.errors << "\n";
            had_errors = counters.errors > 0;
        } else if (validate_cmd->parsed()) {
            auto summary = run_validate(config, store);
            std::cout << "distinct matches " << summary.distinct_input << ", passed "
                      << summary.passed << ", certificates " << summary.certificates
                      << "\nfunnel: " << summary.funnel_path << "\n";
        } else if (correlate_cmd->parsed()) {
            auto summary = run_correlate(config, store, observations_file);
            std::cout << "fingerprints " << summary.fingerprints << " (unverifiable "
                      << summary.unverifiable_keys << "), matched hosts " << summary.matched_hosts
                      << ", compromised certificates " << summary.compromised_certificates;
            if (summary.skipped_rows) std::cout << ", skipped rows " << summary.skipped_rows;
            std::cout << "\n";
        } else if (report_cmd->parsed()) {
            if (flags.unredacted)
                std::cerr << "WARNING: emitting unredacted secret bodies; handle the report "
                             "directory as sensitive material\n";
            emit_report(store, flags.unredacted);
            std::cout << "report written to " << store.dir() << "/report\n";
        }
    } catch (const ScanError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Config || e.kind() == ErrorKind::LoadError ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return had_errors ? 2 : 0;
}
