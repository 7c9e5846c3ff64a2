#include "imgscan/rules.hpp"

#include <boost/regex.hpp>
#include <algorithm>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "imgscan/common.hpp"
#include "imgscan/digest.hpp"
#include "imgscan/registry_types.hpp"

namespace imgscan {

using nlohmann::json;

const char* domain_name(Domain d) {
    switch (d) {
    case Domain::PrivateKey: return "private-key";
    case Domain::ApiCloud: return "api-cloud";
    case Domain::ApiFinancial: return "api-financial";
    case Domain::ApiSocial: return "api-social";
    case Domain::ApiIot: return "api-iot";
    case Domain::Accompanying: return "accompanying";
    }
    return "?";
}

std::optional<Domain> domain_from_name(std::string_view name) {
    for (Domain d : {Domain::PrivateKey, Domain::ApiCloud, Domain::ApiFinancial, Domain::ApiSocial,
                     Domain::ApiIot, Domain::Accompanying}) {
        if (name == domain_name(d)) return d;
    }
    return std::nullopt;
}

bool is_api_domain(Domain d) {
    return d == Domain::ApiCloud || d == Domain::ApiFinancial || d == Domain::ApiSocial ||
           d == Domain::ApiIot;
}

const char* source_tag_name(SourceTag s) {
    switch (s) {
    case SourceTag::Meli: return "meli";
    case SourceTag::TruffleHog: return "trufflehog";
    case SourceTag::Own: return "own";
    }
    return "?";
}

static std::optional<SourceTag> source_tag_from_name(std::string_view s) {
    if (s == "meli") return SourceTag::Meli;
    if (s == "trufflehog") return SourceTag::TruffleHog;
    if (s == "own") return SourceTag::Own;
    return std::nullopt;
}

const char* origin_name(MatchOrigin o) { return o == MatchOrigin::File ? "file" : "env"; }

struct Rule::Compiled {
    boost::regex full;
    boost::regex prefix;  // empty when no env split
    boost::regex secret;
    std::vector<std::string> prefilter_lowered;
};

std::vector<Rule> builtin_rule_table();  // rules_data.cpp

// Some upstream patterns write a literal dash mid-class right after a range
// ("[a-zA-Z-0-9]"), which Go and PCRE accept but Boost rejects as a range.
// Escape such dashes before compiling; the stored pattern stays verbatim.
std::string portable_regex_source(const std::string& pattern) {
    std::string out;
    out.reserve(pattern.size());
    size_t i = 0;
    bool in_class = false;
    bool atom_available = false;  // a left operand for a range exists
    while (i < pattern.size()) {
        char c = pattern[i];
        if (c == '\\' && i + 1 < pattern.size()) {
            out.append(pattern, i, 2);
            i += 2;
            if (in_class) atom_available = true;
            continue;
        }
        if (!in_class) {
            out.push_back(c);
            ++i;
            if (c == '[') {
                in_class = true;
                atom_available = false;
                if (i < pattern.size() && pattern[i] == '^') {
                    out.push_back('^');
                    ++i;
                }
            }
            continue;
        }
        if (c == ']') {
            in_class = false;
            out.push_back(c);
            ++i;
            continue;
        }
        if (c == '-') {
            bool at_end = i + 1 < pattern.size() && pattern[i + 1] == ']';
            if (atom_available && !at_end) {
                // Consume a well-formed range x-y.
                out.push_back('-');
                ++i;
                if (i < pattern.size()) {
                    if (pattern[i] == '\\' && i + 1 < pattern.size()) {
                        out.append(pattern, i, 2);
                        i += 2;
                    } else {
                        out.push_back(pattern[i]);
                        ++i;
                    }
                }
                atom_available = false;  // range consumed, dash next would be literal
                continue;
            }
            out.append(atom_available ? "-" : "\\-");
            ++i;
            continue;
        }
        out.push_back(c);
        ++i;
        atom_available = true;
    }
    return out;
}

namespace {

void compile_rule(Rule& rule) {
    auto compiled = std::make_shared<Rule::Compiled>();
    try {
        compiled->full.assign(portable_regex_source(rule.pattern), boost::regex::perl);
        if (rule.context_prefix) {
            compiled->prefix.assign(portable_regex_source(*rule.context_prefix), boost::regex::perl);
            compiled->secret.assign(portable_regex_source(rule.secret_part), boost::regex::perl);
        }
    } catch (const boost::regex_error& e) {
        throw ScanError(ErrorKind::LoadError,
                        "rule '" + rule.id + "': pattern does not compile: " + e.what());
    }
    if (rule.prefilter_ci) {
        for (const auto& a : rule.prefilter) compiled->prefilter_lowered.push_back(to_lower(a));
    }
    rule.compiled = std::move(compiled);
}

std::vector<Rule> compile_all(std::vector<Rule> rules) {
    std::unordered_set<std::string> ids;
    for (auto& rule : rules) {
        if (rule.id.empty()) throw ScanError(ErrorKind::LoadError, "rule with empty id");
        if (!ids.insert(rule.id).second)
            throw ScanError(ErrorKind::LoadError, "duplicate rule id '" + rule.id + "'");
        compile_rule(rule);
    }
    return rules;
}

constexpr auto kMatchFlags = boost::regex_constants::match_not_dot_newline;

bool window_may_contain(const Rule& rule, std::string_view window,
                        const std::string& window_lower) {
    if (rule.prefilter.empty()) return true;
    if (rule.prefilter_ci) {
        for (const auto& anchor : rule.compiled->prefilter_lowered) {
            if (window_lower.find(anchor) != std::string::npos) return true;
        }
    } else {
        for (const auto& anchor : rule.prefilter) {
            if (window.find(anchor) != std::string_view::npos) return true;
        }
    }
    return false;
}

}  // namespace

RuleSet::RuleSet(std::vector<Rule> rules) : rules_(compile_all(std::move(rules))) {
    Sha256 h;
    for (const auto& r : rules_) {
        h.update(r.id);
        h.update("\x1f");
        h.update(r.pattern);
        h.update("\x1f");
        h.update(r.ambiguous ? "1" : "0");
        h.update("\x1e");
    }
    hash_ = h.finish_hex();
}

std::vector<const Rule*> RuleSet::by_domain(Domain d) const {
    std::vector<const Rule*> out;
    for (const auto& r : rules_) {
        if (r.domain == d) out.push_back(&r);
    }
    return out;
}

const Rule* RuleSet::find(std::string_view id) const {
    for (const auto& r : rules_) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

RuleSet default_ruleset() { return RuleSet(builtin_rule_table()); }

RuleSet load_rules(const std::optional<std::string>& path) {
    if (!path) return default_ruleset();
    json doc;
    try {
        doc = json::parse(read_file(*path));
    } catch (const json::exception& e) {
        throw ScanError(ErrorKind::LoadError, std::string("rule file: ") + e.what());
    }
    if (!doc.contains("rules") || !doc["rules"].is_array())
        throw ScanError(ErrorKind::LoadError, "rule file: missing 'rules' array");
    std::vector<Rule> rules;
    for (const auto& entry : doc["rules"]) {
        Rule r;
        r.id = entry.value("id", "");
        auto dom = domain_from_name(entry.value("domain", ""));
        if (!dom)
            throw ScanError(ErrorKind::LoadError,
                            "rule '" + r.id + "': unknown domain '" + entry.value("domain", "") + "'");
        r.domain = *dom;
        r.name = entry.value("name", r.id);
        r.subordinate = entry.value("subordinate", "");
        r.pattern = entry.value("pattern", "");
        if (r.pattern.empty())
            throw ScanError(ErrorKind::LoadError, "rule '" + r.id + "': empty pattern");
        auto src = source_tag_from_name(entry.value("source", "own"));
        r.source = src.value_or(SourceTag::Own);
        r.ambiguous = entry.value("ambiguous", false);
        if (entry.contains("context_prefix") && !entry["context_prefix"].is_null())
            r.context_prefix = entry["context_prefix"].get<std::string>();
        r.secret_part = entry.value("secret_part", r.pattern);
        r.capture_group = entry.value("capture_group", 0);
        if (entry.contains("fixed_parts"))
            r.fixed_parts = entry["fixed_parts"].get<std::vector<std::string>>();
        if (entry.contains("prefilter"))
            r.prefilter = entry["prefilter"].get<std::vector<std::string>>();
        r.prefilter_ci = entry.value("prefilter_ci", false);
        rules.push_back(std::move(r));
    }
    return RuleSet(std::move(rules));
}

std::string dump_rules_json(const RuleSet& rules) {
    json doc;
    doc["rules"] = json::array();
    for (const auto& r : rules.all()) {
        json entry;
        entry["id"] = r.id;
        entry["domain"] = domain_name(r.domain);
        entry["name"] = r.name;
        if (!r.subordinate.empty()) entry["subordinate"] = r.subordinate;
        entry["pattern"] = r.pattern;
        entry["source"] = source_tag_name(r.source);
        entry["ambiguous"] = r.ambiguous;
        if (r.context_prefix) entry["context_prefix"] = *r.context_prefix;
        entry["secret_part"] = r.secret_part;
        entry["capture_group"] = r.capture_group;
        entry["fixed_parts"] = r.fixed_parts;
        entry["prefilter"] = r.prefilter;
        entry["prefilter_ci"] = r.prefilter_ci;
        doc["rules"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

DistinctKey distinct_key_for(const RawMatch& m) {
    return DistinctKey{m.rule_id, sha256_hex(m.matched_text)};
}

std::vector<RawMatch> match_content(std::string_view content, const RuleSet& rules,
                                    const FileLocator& where) {
    std::vector<RawMatch> out;
    if (content.empty()) return out;

    const size_t step = kMatchWindowBytes - kMatchOverlapBytes;
    // Seam dedup: a match inside the overlap is reported by two windows.
    std::set<std::pair<const Rule*, uint64_t>> seen;
    std::string window_lower;

    size_t start = 0;
    while (true) {
        size_t end = std::min(content.size(), start + kMatchWindowBytes);
        std::string_view window = content.substr(start, end - start);

        window_lower.assign(window);
        for (char& c : window_lower)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

        auto flags = kMatchFlags;
        if (start > 0) flags |= boost::regex_constants::match_prev_avail;

        for (const auto& rule : rules.all()) {
            if (!window_may_contain(rule, window, window_lower)) continue;
            boost::cregex_iterator it(window.data(), window.data() + window.size(),
                                      rule.compiled->full, flags);
            boost::cregex_iterator last;
            for (; it != last; ++it) {
                const auto& m = *it;
                uint64_t match_offset =
                    static_cast<uint64_t>(m[0].first - content.data());
                if (!seen.insert({&rule, match_offset}).second) continue;

                int g = rule.capture_group;
                if (g > 0 && !(g < static_cast<int>(m.size()) && m[g].matched)) g = 0;
                std::string text(m[g].first, m[g].second);
                uint64_t text_offset = static_cast<uint64_t>(m[g].first - content.data());

                RawMatch raw;
                raw.rule_id = rule.id;
                raw.domain = rule.domain;
                raw.truncated = text.size() > kMaxMatchBytes;
                if (raw.truncated) text.resize(kMaxMatchBytes);
                raw.matched_text = std::move(text);
                raw.origin = MatchOrigin::File;
                raw.locator = where.path;
                raw.byte_offset = text_offset;
                raw.layer_digest = where.layer_digest;
                raw.image = where.image;
                out.push_back(std::move(raw));
            }
        }

        if (end == content.size()) break;
        start += step;
    }
    return out;
}

std::vector<RawMatch> match_env(const ImageConfig& config, const RuleSet& rules,
                                const std::string& image) {
    std::vector<RawMatch> out;
    for (const auto& var : config.env) {
        size_t eq = var.find('=');
        std::string name = eq == std::string::npos ? var : var.substr(0, eq);
        std::string value = eq == std::string::npos ? std::string{} : var.substr(eq + 1);
        if (value.empty()) continue;

        for (const auto& rule : rules.all()) {
            if (rule.context_prefix) {
                // Split mode: the service token must appear in the variable
                // name, the secret shape in its value.
                if (!boost::regex_search(name, rule.compiled->prefix, kMatchFlags)) continue;
                boost::smatch m;
                if (!boost::regex_search(value, m, rule.compiled->secret, kMatchFlags)) continue;
                int g = m.size() > 1 && m[1].matched ? 1 : 0;
                RawMatch raw;
                raw.rule_id = rule.id;
                raw.domain = rule.domain;
                raw.matched_text = m[g].str();
                raw.origin = MatchOrigin::Env;
                raw.locator = name;
                raw.image = image;
                out.push_back(std::move(raw));
            } else {
                boost::sregex_iterator it(value.begin(), value.end(), rule.compiled->full,
                                          kMatchFlags);
                boost::sregex_iterator last;
                for (; it != last; ++it) {
                    const auto& m = *it;
                    int g = rule.capture_group;
                    if (g > 0 && !(g < static_cast<int>(m.size()) && m[g].matched)) g = 0;
                    RawMatch raw;
                    raw.rule_id = rule.id;
                    raw.domain = rule.domain;
                    raw.matched_text = m[g].str();
                    raw.origin = MatchOrigin::Env;
                    raw.locator = name;
                    raw.image = image;
                    out.push_back(std::move(raw));
                }
            }
        }
    }
    return out;
}

std::map<DistinctKey, std::vector<RawMatch>> distinct(const std::vector<RawMatch>& matches) {
    std::map<DistinctKey, std::vector<RawMatch>> out;
    for (const auto& m : matches) out[distinct_key_for(m)].push_back(m);
    return out;
}

}  // namespace imgscan
