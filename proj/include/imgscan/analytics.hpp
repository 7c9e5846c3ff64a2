#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "imgscan/store.hpp"
#include "imgscan/validate.hpp"

namespace imgscan {

enum class OperationKind { File, Exec, Both, Unknown };
const char* operation_kind_name(OperationKind k);

struct OperationClass {
    OperationKind kind = OperationKind::Unknown;
    std::vector<std::string> commands;  // ssh-keygen, openssh-install, git, wget, curl, other
};

// Classifies the Dockerfile step behind one manifest layer: ADD/COPY
// directives are file operations, shell/RUN forms are exec; exec commands
// are tokenized on shell separators and scanned for flagged commands.
OperationClass attribute_history(const ImageConfig& config, size_t layer_index);

OperationClass combine_operations(const std::vector<OperationClass>& classes);

struct OwnerAggregation {
    std::map<uint64_t, uint64_t> histogram;  // owner_count -> secret_count
    std::map<DistinctKey, std::set<OwnerKey>> owners;
    std::map<DistinctKey, bool> inherited;  // multi-owner via a shared base layer
};

// Owner sets resolve occurrences through the layer-digest join: every image
// containing an occurrence layer owns the secret.
OwnerAggregation aggregate_owners(const std::vector<ValidatedSecret>& secrets,
                                  const std::vector<ImageRecord>& images);

struct PathBucket {
    std::string prefix;
    uint64_t count = 0;
};

struct PathHistogram {
    std::vector<PathBucket> private_key;
    std::vector<PathBucket> api;
    uint64_t env_private_key = 0;
    uint64_t env_api = 0;
};

PathHistogram path_histogram(const std::vector<ValidatedSecret>& secrets, size_t top_k);

struct Share {
    uint64_t affected = 0;
    uint64_t population = 0;

    double pct() const { return population == 0 ? 0.0 : 100.0 * affected / population; }
};

struct OriginSplit {
    Share hub;
    Share private_registries;
    // Group comparison: images found by both query groups are excluded.
    Share standard_only;
    Share iiot_only;
    uint64_t both_groups_excluded = 0;
};

OriginSplit origin_split(const std::vector<ValidatedSecret>& secrets,
                         const std::vector<ImageRecord>& images);

// Per-secret operation attribution over every layer carrying an occurrence.
std::map<DistinctKey, OperationClass> attribute_secret_operations(
    const std::vector<ValidatedSecret>& secrets, const std::vector<ImageRecord>& images);

}  // namespace imgscan
