#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "imgscan/rules.hpp"

namespace imgscan {

enum class FilterStage { Unparsable, Kompromat, FilePath, Sequence, Ngram, AmbiguousRule, Passed };
const char* filter_stage_name(FilterStage s);

struct FilterVerdict {
    DistinctKey key;
    FilterStage stage = FilterStage::Passed;
    std::string detail;
};

enum class KompromatCategory { Rfc, SoftwareTest, TestVector };
const char* kompromat_category_name(KompromatCategory c);

// Known-compromised key corpus, looked up by canonical base64 body.
class KompromatIndex {
  public:
    void add(std::string_view pem_text, KompromatCategory category, const std::string& source);

    // Directory snapshot with manifest.json: {"entries":[{"path":...,
    // "category":"rfc|software-test|test-vector"}]}.
    static KompromatIndex load_dir(const std::string& dir);

    struct Hit {
        KompromatCategory category;
        std::string source;
    };
    std::optional<Hit> lookup(std::string_view matched_text) const;
    size_t size() const { return entries_.size(); }

  private:
    std::map<std::string, Hit> entries_;  // canonical body -> hit
};

// Static path rules (shipped config) plus rules learned from kompromat
// verdicts of the current campaign.
struct PathRuleSet {
    std::vector<std::string> static_globs;
    std::vector<std::string> extensions;     // lowercased, no dot
    std::set<std::string> learned_dirs;      // exact directories of kompromat hits
    std::set<std::string> learned_parents;   // ancestors with > 2/3 test-key ratio

    // Reason string when the path is filtered, nullopt otherwise.
    std::optional<std::string> match(const std::string& path) const;
};

PathRuleSet default_static_path_rules();
PathRuleSet load_static_path_rules(const std::string& path);

struct NgramParams {
    int n_min = 4;
    int n_max = 6;
    double threshold_factor = 10.0;
};

// Character-gram frequency model over the secret captures of all distinct
// API matches of a campaign. Grams over fixed pattern fragments and
// digit-only grams are excluded. The model is frozen before verdicts.
class NgramModel {
  public:
    NgramModel() = default;

    const NgramParams& params() const { return params_; }
    double mean() const;
    uint64_t count_of(const std::string& gram) const;
    bool excluded(const std::string& gram) const { return excluded_.count(gram) > 0; }
    size_t distinct_grams() const { return counts_.size(); }

    // Highest-count gram contained in `text` that is not excluded; used for
    // verdict details and diagnostics.
    std::optional<std::pair<std::string, uint64_t>> hottest_gram(const std::string& text) const;

  private:
    NgramParams params_;
    std::map<std::string, uint64_t> counts_;
    std::set<std::string> excluded_;
    uint64_t total_ = 0;

    friend NgramModel build_ngram_model(const std::vector<std::string>&, const NgramParams&,
                                        const RuleSet&);
    friend bool ngram_hit(const std::string&, const NgramModel&, std::string*);
};

NgramModel build_ngram_model(const std::vector<std::string>& api_distinct_texts,
                             const NgramParams& params, const RuleSet& rules);

bool ngram_hit(const std::string& text, const NgramModel& model, std::string* detail);

// Sequence filter: keyword, ascending/descending run of four, or three
// repeating characters, over the secret capture.
struct SequenceParams {
    std::vector<std::string> keywords = {"EXAMPLE", "SAMPLE", "TEST", "PLACEHOLDER", "DUMMY",
                                         "XXXX"};
    int run_length = 4;     // ascending / descending
    int repeat_length = 3;  // identical consecutive
};

bool sequence_hit(const std::string& text, const SequenceParams& params, std::string* detail);

// Learned path rules: exact directories of kompromat hits plus every
// ancestor where strictly more than 2/3 of the keys beneath are test keys.
PathRuleSet derive_path_rules(
    const std::map<DistinctKey, std::vector<RawMatch>>& key_matches,
    const std::set<DistinctKey>& kompromat_keys, const PathRuleSet& static_rules);

struct CascadeConfig {
    NgramParams ngram;
    SequenceParams sequence;
    PathRuleSet static_paths;  // learned rules are derived per campaign
    RuleSet rules;             // for ambiguity flags and fixed pattern parts
};

struct ValidatedSecret {
    DistinctKey key;
    Domain domain = Domain::PrivateKey;
    std::string rule_id;
    std::string matched_text;  // representative; redaction happens at emit time
    std::vector<RawMatch> occurrences;
    bool unverifiable = false;  // encrypted / underivable private keys
    std::set<std::string> owners;  // filled by reporting
};

struct FunnelCell {
    uint64_t terminal = 0;
    uint64_t parallel = 0;  // would-have-caught count (Fig.-2-style accounting)
};

struct Funnel {
    // (stage, domain, origin) -> counts; input/passed tracked per domain+origin.
    std::map<std::tuple<FilterStage, Domain, MatchOrigin>, FunnelCell> cells;
    std::map<std::pair<Domain, MatchOrigin>, uint64_t> input;
    std::map<std::pair<Domain, MatchOrigin>, uint64_t> passed;
};

struct CascadeResult {
    std::vector<ValidatedSecret> secrets;
    std::map<DistinctKey, FilterVerdict> verdicts;
    std::map<DistinctKey, std::vector<FilterStage>> would_catch;
    Funnel funnel;
    PathRuleSet path_rules;  // static + learned, for reporting
    double ngram_mean = 0.0;
    size_t ngram_distinct = 0;
};

// Full cascade. Private keys: parsable -> kompromat -> path. API secrets:
// ambiguous-rule -> sequence -> ngram -> path. Accompanying-material
// matches must not be passed in. Deterministic for fixed inputs.
CascadeResult run_cascade(const std::map<DistinctKey, std::vector<RawMatch>>& by_key,
                          const KompromatIndex& kompromat, const CascadeConfig& config);

}  // namespace imgscan
