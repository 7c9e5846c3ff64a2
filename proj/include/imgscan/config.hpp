#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imgscan/registry_types.hpp"
#include "imgscan/validate.hpp"

namespace imgscan {

struct SearchTerm {
    std::string term;
    std::vector<std::string> variants;  // derived spellings, queried as-is

    std::vector<std::string> all_queries() const {
        std::vector<std::string> out{term};
        out.insert(out.end(), variants.begin(), variants.end());
        return out;
    }
};

struct QueryGroupConfig {
    std::string name;  // "standard" / "iiot" / custom
    std::vector<SearchTerm> terms;
};

// Shipped query groups: trending protocols/technologies and (Industrial)
// IoT protocol names, including spelling variants.
std::vector<QueryGroupConfig> default_query_groups();

struct ScanConfig {
    std::string user_agent = "imgscan/0.1 (+https://localhost/scan-contact)";
    std::string contact_url = "https://localhost/scan-contact";

    // Docker Hub
    std::string hub_api_url = "https://hub.docker.com";
    std::string hub_registry_host = "registry-1.docker.io";
    uint16_t hub_registry_port = 443;
    bool hub_registry_https = true;
    uint64_t hub_daily_pull_budget = 800;  // free plan; pro allows 5000
    unsigned search_result_limit = 1000;   // per term; Hub caps results at 10000

    // Private registries
    RatePolicy private_rate_policy{4.0, 1};
    unsigned catalog_cap = 100;
    uint64_t layer_budget_bytes = kDefaultLayerBudgetBytes_;
    bool verify_tls = true;

    // Pipeline
    uint64_t seed = 0;
    unsigned workers = 4;
    std::optional<std::string> cache_dir;
    std::optional<std::string> rules_file;
    std::optional<std::string> kompromat_dir;
    std::optional<std::string> root_stores_dir;
    std::optional<std::string> path_rules_file;

    // Validation
    NgramParams ngram;
    SequenceParams sequence;

    std::vector<QueryGroupConfig> query_groups = default_query_groups();

    static constexpr uint64_t kDefaultLayerBudgetBytes_ = 250'000'000;

    static ScanConfig load(const std::string& path);
    std::string to_json() const;  // config echo for report headers
};

}  // namespace imgscan
