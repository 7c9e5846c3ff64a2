#include "imgscan/validate.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "imgscan/common.hpp"
#include "imgscan/key_material.hpp"
#include "imgscan/pathspec.hpp"

namespace imgscan {

using nlohmann::json;

const char* filter_stage_name(FilterStage s) {
    switch (s) {
    case FilterStage::Unparsable: return "unparsable";
    case FilterStage::Kompromat: return "kompromat";
    case FilterStage::FilePath: return "file-path";
    case FilterStage::Sequence: return "sequence";
    case FilterStage::Ngram: return "ngram";
    case FilterStage::AmbiguousRule: return "ambiguous-rule";
    case FilterStage::Passed: return "passed";
    }
    return "?";
}

const char* kompromat_category_name(KompromatCategory c) {
    switch (c) {
    case KompromatCategory::Rfc: return "rfc";
    case KompromatCategory::SoftwareTest: return "software-test";
    case KompromatCategory::TestVector: return "test-vector";
    }
    return "?";
}

static std::optional<KompromatCategory> kompromat_category_from(std::string_view s) {
    if (s == "rfc") return KompromatCategory::Rfc;
    if (s == "software-test") return KompromatCategory::SoftwareTest;
    if (s == "test-vector") return KompromatCategory::TestVector;
    return std::nullopt;
}

void KompromatIndex::add(std::string_view pem_text, KompromatCategory category,
                         const std::string& source) {
    auto canonical = canonical_key_body(pem_text);
    if (canonical.empty()) return;
    entries_.emplace(std::move(canonical), Hit{category, source});
}

KompromatIndex KompromatIndex::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    KompromatIndex index;
    auto manifest_path = (fs::path(dir) / "manifest.json").string();
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw ScanError(ErrorKind::LoadError, manifest_path + ": " + e.what());
    }
    for (const auto& entry : manifest.value("entries", json::array())) {
        auto rel = entry.value("path", "");
        auto category = kompromat_category_from(entry.value("category", ""));
        if (rel.empty() || !category)
            throw ScanError(ErrorKind::LoadError, manifest_path + ": bad entry");
        auto file = (fs::path(dir) / rel).string();
        index.add(read_file(file), *category, rel);
    }
    return index;
}

std::optional<KompromatIndex::Hit> KompromatIndex::lookup(std::string_view matched_text) const {
    auto canonical = canonical_key_body(matched_text);
    auto it = entries_.find(canonical);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> PathRuleSet::match(const std::string& path) const {
    for (const auto& glob : static_globs) {
        if (glob_match(glob, path)) return "static glob " + glob;
    }
    if (!extensions.empty()) {
        auto ext = path_extension(path);
        for (const auto& e : extensions) {
            if (ext == e) return "database-file extension ." + e;
        }
    }
    auto dir = path_dirname(path);
    if (learned_dirs.count(dir)) return "directory of known test keys " + dir;
    for (const auto& parent : learned_parents) {
        if (dir == parent || dir_contains(parent, path)) return "learned parent " + parent;
    }
    return std::nullopt;
}

PathRuleSet default_static_path_rules() {
    PathRuleSet rules;
    rules.static_globs = {"/var/lib/*", "*/.cache/pip/*", "/var/opt/mssql/*"};
    rules.extensions = {"db", "dbf"};
    return rules;
}

PathRuleSet load_static_path_rules(const std::string& path) {
    // One glob per line; "ext:" lines list database-file extensions.
    PathRuleSet rules;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto entry = trim(line);
        if (entry.empty()) continue;
        if (entry.rfind("ext:", 0) == 0) {
            auto ext = to_lower(trim(entry.substr(4)));
            if (!ext.empty() && ext.front() == '.') ext = ext.substr(1);
            if (!ext.empty()) rules.extensions.push_back(ext);
        } else {
            rules.static_globs.push_back(entry);
        }
    }
    return rules;
}

bool sequence_hit(const std::string& text, const SequenceParams& params, std::string* detail) {
    for (const auto& keyword : params.keywords) {
        if (contains_ci(text, keyword)) {
            if (detail) *detail = "keyword " + keyword;
            return true;
        }
    }
    auto is_digit = [](unsigned char c) { return c >= '0' && c <= '9'; };
    auto is_letter = [](unsigned char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    };
    auto same_class = [&](unsigned char a, unsigned char b) {
        return (is_digit(a) && is_digit(b)) || (is_letter(a) && is_letter(b));
    };

    int asc = 1, desc = 1, rep = 1;
    for (size_t i = 1; i < text.size(); ++i) {
        auto prev = static_cast<unsigned char>(text[i - 1]);
        auto cur = static_cast<unsigned char>(text[i]);
        bool classed = same_class(prev, cur);
        asc = classed && cur == prev + 1 ? asc + 1 : 1;
        desc = classed && cur + 1 == prev ? desc + 1 : 1;
        rep = cur == prev ? rep + 1 : 1;
        if (asc >= params.run_length) {
            if (detail)
                *detail = "ascending run '" +
                          text.substr(i + 1 - static_cast<size_t>(asc), static_cast<size_t>(asc)) +
                          "'";
            return true;
        }
        if (desc >= params.run_length) {
            if (detail)
                *detail = "descending run '" +
                          text.substr(i + 1 - static_cast<size_t>(desc), static_cast<size_t>(desc)) +
                          "'";
            return true;
        }
        if (rep >= params.repeat_length) {
            if (detail) *detail = std::string("repeat run '") + text[i] + "'";
            return true;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// n-gram model

namespace {

bool digits_only(std::string_view gram) {
    for (char c : gram) {
        if (c < '0' || c > '9') return false;
    }
    return true;
}

template <typename Fn>
void for_each_gram(const std::string& text, const NgramParams& params, Fn&& fn) {
    for (int n = params.n_min; n <= params.n_max; ++n) {
        if (n <= 0 || text.size() < static_cast<size_t>(n)) continue;
        for (size_t i = 0; i + static_cast<size_t>(n) <= text.size(); ++i) {
            fn(text.substr(i, static_cast<size_t>(n)));
        }
    }
}

}  // namespace

double NgramModel::mean() const {
    if (counts_.empty()) return 0.0;
    return static_cast<double>(total_) / static_cast<double>(counts_.size());
}

uint64_t NgramModel::count_of(const std::string& gram) const {
    auto it = counts_.find(gram);
    return it == counts_.end() ? 0 : it->second;
}

std::optional<std::pair<std::string, uint64_t>> NgramModel::hottest_gram(
    const std::string& text) const {
    std::optional<std::pair<std::string, uint64_t>> best;
    for_each_gram(text, params_, [&](const std::string& gram) {
        if (excluded_.count(gram)) return;
        auto it = counts_.find(gram);
        if (it == counts_.end()) return;
        if (!best || it->second > best->second) best = {gram, it->second};
    });
    return best;
}

NgramModel build_ngram_model(const std::vector<std::string>& api_distinct_texts,
                             const NgramParams& params, const RuleSet& rules) {
    NgramModel model;
    model.params_ = params;

    // Grams over fixed pattern fragments never count.
    for (const auto& rule : rules.all()) {
        for (const auto& fixed : rule.fixed_parts) {
            for_each_gram(fixed, params,
                          [&](const std::string& gram) { model.excluded_.insert(gram); });
        }
    }

    for (const auto& text : api_distinct_texts) {
        for_each_gram(text, params, [&](const std::string& gram) {
            if (digits_only(gram) || model.excluded_.count(gram)) return;
            ++model.counts_[gram];
            ++model.total_;
        });
    }
    return model;
}

bool ngram_hit(const std::string& text, const NgramModel& model, std::string* detail) {
    double threshold = model.params_.threshold_factor * model.mean();
    bool hit = false;
    for_each_gram(text, model.params_, [&](const std::string& gram) {
        if (hit || digits_only(gram) || model.excluded_.count(gram)) return;
        auto it = model.counts_.find(gram);
        if (it != model.counts_.end() && static_cast<double>(it->second) > threshold) {
            hit = true;
            if (detail)
                *detail = "gram '" + gram + "' count " + std::to_string(it->second) +
                          " above threshold";
        }
    });
    return hit;
}

// ---------------------------------------------------------------------------
// Learned path rules

PathRuleSet derive_path_rules(const std::map<DistinctKey, std::vector<RawMatch>>& key_matches,
                              const std::set<DistinctKey>& kompromat_keys,
                              const PathRuleSet& static_rules) {
    PathRuleSet rules = static_rules;

    // Directories touched by each key, by distinct identity.
    std::map<std::string, std::set<const DistinctKey*>> keys_beneath;
    std::map<std::string, std::set<const DistinctKey*>> test_keys_beneath;

    for (const auto& [key, occurrences] : key_matches) {
        bool is_test = kompromat_keys.count(key) > 0;
        std::set<std::string> dirs;
        for (const auto& occ : occurrences) {
            if (occ.origin != MatchOrigin::File) continue;
            dirs.insert(path_dirname(occ.locator));
        }
        for (const auto& dir : dirs) {
            if (is_test) rules.learned_dirs.insert(dir);
            keys_beneath[dir].insert(&key);
            if (is_test) test_keys_beneath[dir].insert(&key);
            for (const auto& ancestor : path_ancestors(dir)) {
                keys_beneath[ancestor].insert(&key);
                if (is_test) test_keys_beneath[ancestor].insert(&key);
            }
        }
    }

    // Strictly more than 2/3 of the keys beneath must be test keys.
    for (const auto& [dir, all] : keys_beneath) {
        auto it = test_keys_beneath.find(dir);
        if (it == test_keys_beneath.end()) continue;
        uint64_t tests = it->second.size();
        uint64_t total = all.size();
        if (tests * 3 > total * 2) rules.learned_parents.insert(dir);
    }
    return rules;
}

// ---------------------------------------------------------------------------
// Cascade

namespace {

MatchOrigin bucket_origin(const std::vector<RawMatch>& occurrences) {
    for (const auto& occ : occurrences) {
        if (occ.origin == MatchOrigin::File) return MatchOrigin::File;
    }
    return MatchOrigin::Env;
}

// Filtered only when every file occurrence sits in a filtered location;
// env occurrences are never path-filtered.
std::optional<std::string> path_verdict(const std::vector<RawMatch>& occurrences,
                                        const PathRuleSet& rules) {
    bool any_file = false;
    std::string last_reason;
    for (const auto& occ : occurrences) {
        if (occ.origin != MatchOrigin::File) return std::nullopt;
        any_file = true;
        auto reason = rules.match(occ.locator);
        if (!reason) return std::nullopt;
        last_reason = *reason;
    }
    if (!any_file) return std::nullopt;
    return last_reason;
}

}  // namespace

CascadeResult run_cascade(const std::map<DistinctKey, std::vector<RawMatch>>& by_key,
                          const KompromatIndex& kompromat, const CascadeConfig& config) {
    CascadeResult result;

    struct KeyState {
        const DistinctKey* key;
        const std::vector<RawMatch>* occurrences;
        Domain domain;
        MatchOrigin origin;
        KeyParseResult parse;  // private keys only
        std::optional<KompromatIndex::Hit> kompromat;
    };

    std::vector<KeyState> keys;
    std::vector<KeyState> apis;

    for (const auto& [key, occurrences] : by_key) {
        if (occurrences.empty()) continue;
        Domain domain = occurrences.front().domain;
        if (domain == Domain::Accompanying)
            throw ScanError(ErrorKind::Config,
                            "accompanying-material matches do not enter the cascade");
        KeyState state{&key, &occurrences, domain, bucket_origin(occurrences), {}, std::nullopt};
        result.funnel.input[{domain, state.origin}]++;
        if (domain == Domain::PrivateKey) {
            state.parse = parse_private_key_material(occurrences.front().matched_text);
            state.kompromat = kompromat.lookup(occurrences.front().matched_text);
            keys.push_back(std::move(state));
        } else {
            apis.push_back(std::move(state));
        }
    }

    // Path rules learn from this campaign's kompromat verdicts. Only
    // parsable keys count toward the 2/3 ratio.
    std::map<DistinctKey, std::vector<RawMatch>> parsable_keys;
    std::set<DistinctKey> kompromat_hits;
    for (const auto& state : keys) {
        if (!state.parse.parsable) continue;
        parsable_keys[*state.key] = *state.occurrences;
        if (state.kompromat) kompromat_hits.insert(*state.key);
    }
    result.path_rules = derive_path_rules(parsable_keys, kompromat_hits, config.static_paths);

    // The frequency model freezes over all distinct API matches before any
    // n-gram verdict (campaign-wide barrier).
    const RuleSet rules = config.rules.size() > 0 ? config.rules : default_ruleset();

    std::vector<std::string> api_texts;
    api_texts.reserve(apis.size());
    for (const auto& state : apis) api_texts.push_back(state.occurrences->front().matched_text);
    auto model = build_ngram_model(api_texts, config.ngram, rules);
    result.ngram_mean = model.mean();
    result.ngram_distinct = model.distinct_grams();

    auto record = [&](const KeyState& state, FilterStage stage, const std::string& detail,
                      std::vector<std::pair<FilterStage, std::string>>& would) {
        FilterVerdict verdict;
        verdict.key = *state.key;
        verdict.stage = stage;
        verdict.detail = detail;
        result.verdicts[*state.key] = verdict;
        auto& catches = result.would_catch[*state.key];
        for (auto& [s, d] : would) {
            catches.push_back(s);
            result.funnel.cells[{s, state.domain, state.origin}].parallel++;
        }
        if (stage == FilterStage::Passed)
            result.funnel.passed[{state.domain, state.origin}]++;
        else
            result.funnel.cells[{stage, state.domain, state.origin}].terminal++;
    };

    for (const auto& state : keys) {
        std::vector<std::pair<FilterStage, std::string>> would;
        if (!state.parse.parsable)
            would.emplace_back(FilterStage::Unparsable, state.parse.detail);
        if (state.kompromat)
            would.emplace_back(FilterStage::Kompromat,
                               std::string(kompromat_category_name(state.kompromat->category)) +
                                   " (" + state.kompromat->source + ")");
        if (auto reason = path_verdict(*state.occurrences, result.path_rules))
            would.emplace_back(FilterStage::FilePath, *reason);

        if (would.empty()) {
            record(state, FilterStage::Passed, state.parse.detail, would);
            ValidatedSecret secret;
            secret.key = *state.key;
            secret.domain = state.domain;
            secret.rule_id = state.occurrences->front().rule_id;
            secret.matched_text = state.occurrences->front().matched_text;
            secret.occurrences = *state.occurrences;
            secret.unverifiable = state.parse.encrypted || !state.parse.pkey;
            result.secrets.push_back(std::move(secret));
        } else {
            // Terminal verdict follows the fixed order even though several
            // filters may catch the match.
            record(state, would.front().first, would.front().second, would);
        }
    }

    for (const auto& state : apis) {
        const auto& text = state.occurrences->front().matched_text;
        const Rule* rule = rules.find(state.occurrences->front().rule_id);
        std::vector<std::pair<FilterStage, std::string>> would;

        bool ambiguous = rule ? rule->ambiguous : false;
        if (ambiguous) would.emplace_back(FilterStage::AmbiguousRule, "rule excluded from validation");

        std::string detail;
        if (sequence_hit(text, config.sequence, &detail))
            would.emplace_back(FilterStage::Sequence, detail);
        if (ngram_hit(text, model, &detail)) would.emplace_back(FilterStage::Ngram, detail);
        if (auto reason = path_verdict(*state.occurrences, result.path_rules))
            would.emplace_back(FilterStage::FilePath, *reason);

        if (would.empty()) {
            record(state, FilterStage::Passed, "", would);
            ValidatedSecret secret;
            secret.key = *state.key;
            secret.domain = state.domain;
            secret.rule_id = state.occurrences->front().rule_id;
            secret.matched_text = text;
            secret.occurrences = *state.occurrences;
            result.secrets.push_back(std::move(secret));
        } else {
            record(state, would.front().first, would.front().second, would);
        }
    }

    return result;
}

}  // namespace imgscan
