#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>

#include "support/mock_servers.hpp"

namespace imgscan::testsupport {

// Synthetic image corpus with planted secrets and decoys, served by a mock
// registry. The planting manifest keys secrets by (rule_id, sha256 hex of
// the matched text) so scan output can be compared exactly.
struct PlantedCorpus {
    std::set<std::pair<std::string, std::string>> expected_valid;
    std::set<std::pair<std::string, std::string>> expected_decoys;
    std::string kompromat_dir;
    std::string shared_base_layer_digest;
    size_t images = 0;
    size_t layers = 0;
    uint64_t total_layer_bytes = 0;
};

PlantedCorpus build_planted_corpus(MockRegistry& registry, const std::string& scratch_dir,
                                   uint64_t filler_bytes_per_layer = 5u << 20);

}  // namespace imgscan::testsupport
