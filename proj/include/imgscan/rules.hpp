#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace imgscan {

struct ImageConfig;

enum class Domain {
    PrivateKey,
    ApiCloud,
    ApiFinancial,
    ApiSocial,
    ApiIot,
    Accompanying,
};

const char* domain_name(Domain d);
std::optional<Domain> domain_from_name(std::string_view name);
bool is_api_domain(Domain d);

enum class SourceTag { Meli, TruffleHog, Own };
const char* source_tag_name(SourceTag s);

// One detection pattern. Rules that expect a service token before the
// secret additionally carry the split form used against environment
// variables: the prefix is tested on the variable name, the secret part on
// its value, and the gap quantifier between them is dropped.
struct Rule {
    std::string id;  // "<domain>.<name>[.<subordinate>]"
    Domain domain = Domain::ApiCloud;
    std::string name;
    std::string subordinate;
    std::string pattern;
    SourceTag source = SourceTag::Own;
    bool ambiguous = false;
    std::optional<std::string> context_prefix;
    std::string secret_part;  // equals pattern when no prefix split exists
    int capture_group = 0;    // group holding the secret; 0 = whole match
    // Literal fragments hard-coded in the pattern; n-grams over these are
    // excluded from the frequency model.
    std::vector<std::string> fixed_parts;
    // Optional literal pre-scan anchors; a window is only run through the
    // full pattern when one is present. Anchors must be substrings of every
    // possible match.
    std::vector<std::string> prefilter;
    bool prefilter_ci = false;

    struct Compiled;
    std::shared_ptr<const Compiled> compiled;  // set by compile_rules
};

class RuleSet {
  public:
    RuleSet() = default;
    explicit RuleSet(std::vector<Rule> rules);

    const std::vector<Rule>& all() const { return rules_; }
    std::vector<const Rule*> by_domain(Domain d) const;
    const Rule* find(std::string_view id) const;
    size_t size() const { return rules_.size(); }

    // Stable content hash echoed into report headers.
    const std::string& content_hash() const { return hash_; }

  private:
    std::vector<Rule> rules_;
    std::string hash_;
};

// Pattern source as handed to the regex engine: literal mid-class dashes
// written after a range (accepted by Go/PCRE, rejected by Boost) are
// escaped. Semantics are unchanged; stored patterns stay verbatim.
std::string portable_regex_source(const std::string& pattern);

// Built-in default set (every row of the shipped table, ambiguous rows
// included).
RuleSet default_ruleset();

// Loads a rule file, replacing the default set; absent path loads the
// default. Throws ScanError(LoadError) on duplicate ids or bad patterns.
RuleSet load_rules(const std::optional<std::string>& path);

std::string dump_rules_json(const RuleSet& rules);

enum class MatchOrigin { File, Env };
const char* origin_name(MatchOrigin o);

struct RawMatch {
    std::string rule_id;
    Domain domain = Domain::ApiCloud;
    std::string matched_text;  // secret capture when the rule defines one
    MatchOrigin origin = MatchOrigin::File;
    std::string locator;       // file path or variable name
    uint64_t byte_offset = 0;  // within the file; 0 for env
    std::string layer_digest;  // empty for env matches
    std::string image;         // repository reference that triggered the scan
    int64_t found_at = 0;      // unix seconds
    bool truncated = false;
};

struct DistinctKey {
    std::string rule_id;
    std::string text_hash;  // sha256 hex over matched_text

    auto operator<=>(const DistinctKey&) const = default;
};

DistinctKey distinct_key_for(const RawMatch& m);

struct FileLocator {
    std::string path;
    std::string layer_digest;
    std::string image;
};

// Streaming matcher constants: matches up to the overlap length are found
// exactly once even when they span a window seam.
inline constexpr size_t kMatchWindowBytes = 1 << 20;
inline constexpr size_t kMatchOverlapBytes = 64 << 10;
inline constexpr size_t kMaxMatchBytes = 64 << 10;

std::vector<RawMatch> match_content(std::string_view content, const RuleSet& rules,
                                    const FileLocator& where);

std::vector<RawMatch> match_env(const ImageConfig& config, const RuleSet& rules,
                                const std::string& image);

std::map<DistinctKey, std::vector<RawMatch>> distinct(const std::vector<RawMatch>& matches);

}  // namespace imgscan
