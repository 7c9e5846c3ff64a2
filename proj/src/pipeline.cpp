#include "imgscan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "imgscan/analytics.hpp"
#include "imgscan/common.hpp"
#include "imgscan/crypto_analysis.hpp"
#include "imgscan/digest.hpp"
#include "imgscan/key_material.hpp"
#include "imgscan/pathspec.hpp"

namespace imgscan {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

HttpOptions http_options(const ScanConfig& config) {
    HttpOptions opts;
    opts.user_agent = config.user_agent;
    return opts;
}

RuleSet campaign_rules(const ScanConfig& config) { return load_rules(config.rules_file); }

struct LayerWork {
    LayerDescriptor descriptor;
    ImageRef ref;  // first image that referenced the layer
};

// Fetches (through the cache when configured), verifies, extracts, and
// matches one layer. All discovered matches land in the store.
void process_layer(RegistryClient& client, const LayerWork& work, const RuleSet& rules,
                   const ScanConfig& config, CampaignStore& store, BlobCache* cache,
                   PipelineCounters& counters, std::mutex& counter_mu) {
    const auto& layer = work.descriptor;
    LayerRecord record;
    record.digest = layer.digest;
    record.size = layer.size;
    record.media = layer_media_name(layer.media_kind);

    try {
        std::unique_ptr<ByteSource> raw;
        std::string in_memory;
        if (cache) {
            if (!cache->has(layer.digest)) {
                BlobCache::Writer writer(*cache, layer.digest);
                uint64_t total = 0;
                BlobSink sink;
                sink.begin = [&] { total = 0; };
                sink.write = [&](std::string_view chunk) {
                    writer.write(chunk);
                    total += chunk.size();
                };
                client.fetch_blob(work.ref, layer, std::move(sink));
                writer.commit(total);
                {
                    std::lock_guard lk(counter_mu);
                    ++counters.layers_fetched;
                }
            }
            raw = cache->open(layer.digest);
        } else {
            auto sink = make_string_sink(in_memory);
            client.fetch_blob(work.ref, layer, std::move(sink));
            {
                std::lock_guard lk(counter_mu);
                ++counters.layers_fetched;
            }
            raw = std::make_unique<MemorySource>(in_memory);
        }

        auto tar = decompress_layer(std::move(raw), layer.media_kind, layer.digest);
        ExtractLimits limits;
        int64_t now = static_cast<int64_t>(std::time(nullptr));
        auto stats = extract_layer(*tar, layer.digest, layer.size, limits, [&](FileEntry&& entry) {
            FileLocator where{entry.path, layer.digest, work.ref.display()};
            auto matches = match_content(entry.content, rules, where);
            for (auto& m : matches) {
                m.found_at = now;
                store.append_match(m);
            }
            if (!matches.empty()) {
                std::lock_guard lk(counter_mu);
                counters.file_matches += matches.size();
            }
        });
        for (const auto& warning : stats.warnings) store.append_error(layer.digest, warning);
        record.extracted = true;
    } catch (const ScanError& e) {
        record.error = e.what();
        store.append_error(layer.digest, e.what());
        std::lock_guard lk(counter_mu);
        ++counters.errors;
    }
    store.append_layer(record);
}

void process_layers_parallel(RegistryClient& client, const std::vector<LayerWork>& work,
                             const RuleSet& rules, const ScanConfig& config, CampaignStore& store,
                             BlobCache* cache, PipelineCounters& counters,
                             std::mutex& counter_mu) {
    std::atomic<size_t> next{0};
    unsigned workers = std::max(1u, config.workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<size_t>(workers, work.size()); ++w) {
        pool.emplace_back([&] {
            while (true) {
                size_t idx = next.fetch_add(1);
                if (idx >= work.size()) return;
                process_layer(client, work[idx], rules, config, store, cache, counters,
                              counter_mu);
            }
        });
    }
    for (auto& t : pool) t.join();
}

// Tag metadata is unavailable on the v2 API; private mode uses natural
// order only.
std::optional<ImageRecord> collect_image(RegistryClient& client, const std::string& repo,
                                         TagSelectMode mode,
                                         const std::map<std::string, std::optional<std::string>>& meta,
                                         const std::vector<std::string>& tags,
                                         CampaignStore& store, const RuleSet& rules,
                                         PipelineCounters& counters,
                                         std::vector<LayerWork>& layer_sink) {
    auto tag = select_tag(tags, meta, mode);
    if (!tag) return std::nullopt;  // empty repository, nothing to scan

    ImageRef ref;
    ref.endpoint = client.endpoint();
    ref.repository = repo;
    ref.tag = tag;

    auto manifest = client.fetch_manifest(ref);
    auto config = client.fetch_config(ref, manifest);

    ImageRecord image;
    image.reference = ref.display();
    image.repository = repo;
    image.selected_tag = *tag;
    image.manifest_config_digest = manifest.config_digest;
    for (const auto& layer : manifest.layers) {
        image.layer_digests.push_back(layer.digest);
        layer_sink.push_back({layer, ref});
    }
    image.config = config;
    if (config.history_layer_mismatch)
        store.append_error(image.reference, "history/layer count mismatch; attribution unknown");

    auto env_matches = match_env(config, rules, image.reference);
    int64_t now = static_cast<int64_t>(std::time(nullptr));
    for (auto& m : env_matches) {
        m.found_at = now;
        store.append_match(m);
    }
    counters.env_matches += env_matches.size();
    ++counters.images;
    return image;
}

}  // namespace

PipelineCounters scan_registries(const ScanConfig& config,
                                 const std::vector<RegistryEndpoint>& endpoints,
                                 CampaignStore& store) {
    PipelineCounters counters;
    std::mutex counter_mu;
    auto rules = campaign_rules(config);
    DedupStore dedup;
    std::unique_ptr<BlobCache> cache;
    if (config.cache_dir) cache = std::make_unique<BlobCache>(*config.cache_dir);

    for (const auto& endpoint_base : endpoints) {
        RegistryEndpoint endpoint = endpoint_base;
        endpoint.rate_policy = config.private_rate_policy;
        endpoint.verify_tls = config.verify_tls;
        RegistryClient client(endpoint, http_options(config));

        std::vector<LayerWork> endpoint_layers;
        std::map<std::string, LayerWork> distinct_layers;
        try {
            auto repos = client.list_repositories(config.catalog_cap);
            for (const auto& repo : repos) {
                try {
                    auto tags = client.list_tags(repo);
                    std::vector<LayerWork> image_layers;
                    auto image = collect_image(client, repo, TagSelectMode::Private, {}, tags,
                                               store, rules, counters, image_layers);
                    if (!image) continue;
                    image->owner = owner_for_registry(endpoint.address());
                    image->from_hub = false;
                    store.append_image(*image);
                    for (auto& work : image_layers) distinct_layers.emplace(work.descriptor.digest, work);
                } catch (const ScanError& e) {
                    store.append_error(endpoint.address() + "/" + repo, e.what());
                    ++counters.errors;
                }
            }
        } catch (const ScanError& e) {
            store.append_error(endpoint.address(), e.what());
            ++counters.errors;
            continue;
        }

        // Per-registry byte budget over the distinct layers of the chosen
        // images, randomly sampled.
        std::vector<LayerDescriptor> descriptors;
        for (const auto& [digest, work] : distinct_layers) descriptors.push_back(work.descriptor);
        auto sampled = sample_layers(descriptors, config.layer_budget_bytes, config.seed);
        counters.layers_selected += sampled.size();

        std::vector<LayerWork> to_fetch;
        for (const auto& layer : sampled) {
            if (dedup.check_and_mark(layer.digest) == DedupState::Seen) {
                std::lock_guard lk(counter_mu);
                ++counters.layers_deduped;
                continue;
            }
            to_fetch.push_back(distinct_layers.at(layer.digest));
        }
        process_layers_parallel(client, to_fetch, rules, config, store, cache.get(), counters,
                                counter_mu);
    }
    return counters;
}

PipelineCounters scan_hub(const ScanConfig& config, CampaignStore& store) {
    PipelineCounters counters;
    std::mutex counter_mu;
    auto rules = campaign_rules(config);
    DedupStore dedup;
    std::unique_ptr<BlobCache> cache;
    if (config.cache_dir) cache = std::make_unique<BlobCache>(*config.cache_dir);

    HubClient hub(config.hub_api_url, http_options(config));

    // Query groups -> deduplicated repositories, remembering every group
    // that discovered each repo (the both-groups set is excluded from the
    // group comparison later).
    std::map<std::string, std::set<std::string>> repo_groups;
    std::map<std::string, std::string> repo_source_query;
    for (const auto& group : config.query_groups) {
        for (const auto& term : group.terms) {
            for (const auto& query : term.all_queries()) {
                try {
                    auto results = hub.search(query, config.search_result_limit);
                    for (const auto& summary : results) {
                        repo_groups[summary.name].insert(group.name);
                        repo_source_query.emplace(summary.name, query);
                    }
                } catch (const ScanError& e) {
                    store.append_error("hub-search:" + query, e.what());
                    ++counters.errors;
                }
            }
        }
    }

    RegistryEndpoint hub_registry;
    hub_registry.host = config.hub_registry_host;
    hub_registry.port = config.hub_registry_port;
    hub_registry.scheme = config.hub_registry_https ? Scheme::Https : Scheme::Http;
    hub_registry.rate_policy = {8.0, 4};
    hub_registry.verify_tls = config.verify_tls;
    RegistryClient client(hub_registry, http_options(config));

    uint64_t pulls = 0;
    std::vector<LayerWork> to_fetch;
    for (const auto& [repo, groups] : repo_groups) {
        if (pulls >= config.hub_daily_pull_budget) {
            store.append_error("hub", "daily pull budget exhausted; remaining repositories skipped");
            break;
        }
        try {
            auto [tags, meta] = hub.list_tags(repo);
            std::vector<LayerWork> image_layers;
            auto image = collect_image(client, repo.find('/') == std::string::npos
                                                   ? "library/" + repo
                                                   : repo,
                                       TagSelectMode::Hub, meta, tags, store, rules, counters,
                                       image_layers);
            if (!image) continue;
            ++pulls;
            image->owner = owner_for_hub_repository(repo);
            image->from_hub = true;
            image->query_groups = groups;
            store.append_image(*image);
            for (auto& work : image_layers) {
                if (dedup.check_and_mark(work.descriptor.digest) == DedupState::Seen) {
                    ++counters.layers_deduped;
                    continue;
                }
                to_fetch.push_back(work);
            }
        } catch (const ScanError& e) {
            store.append_error("hub/" + repo, e.what());
            ++counters.errors;
        }
    }
    counters.layers_selected += to_fetch.size();
    process_layers_parallel(client, to_fetch, rules, config, store, cache.get(), counters,
                            counter_mu);
    return counters;
}

// ---------------------------------------------------------------------------
// Validation over the stored campaign

namespace {

std::string funnel_to_tsv(const Funnel& funnel) {
    std::ostringstream out;
    out << "domain\torigin\tstage\tterminal\tparallel\n";
    static const FilterStage stages[] = {FilterStage::Unparsable,  FilterStage::Kompromat,
                                         FilterStage::FilePath,    FilterStage::Sequence,
                                         FilterStage::Ngram,       FilterStage::AmbiguousRule};
    static const Domain domains[] = {Domain::PrivateKey, Domain::ApiCloud, Domain::ApiFinancial,
                                     Domain::ApiSocial, Domain::ApiIot};
    static const MatchOrigin origins[] = {MatchOrigin::File, MatchOrigin::Env};
    for (Domain d : domains) {
        for (MatchOrigin o : origins) {
            auto input_it = funnel.input.find({d, o});
            uint64_t input = input_it == funnel.input.end() ? 0 : input_it->second;
            auto passed_it = funnel.passed.find({d, o});
            uint64_t passed = passed_it == funnel.passed.end() ? 0 : passed_it->second;
            if (input == 0) continue;
            out << domain_name(d) << "\t" << origin_name(o) << "\tinput\t" << input << "\t0\n";
            for (FilterStage s : stages) {
                auto it = funnel.cells.find({s, d, o});
                if (it == funnel.cells.end()) continue;
                out << domain_name(d) << "\t" << origin_name(o) << "\t" << filter_stage_name(s)
                    << "\t" << it->second.terminal << "\t" << it->second.parallel << "\n";
            }
            out << domain_name(d) << "\t" << origin_name(o) << "\tpassed\t" << passed << "\t0\n";
        }
    }
    return out.str();
}

json redacted_secret_json(const ValidatedSecret& secret) {
    json line;
    line["rule_id"] = secret.rule_id;
    line["domain"] = domain_name(secret.domain);
    line["sha256"] = secret.key.text_hash;
    line["length"] = secret.matched_text.size();
    line["unverifiable"] = secret.unverifiable;
    line["occurrences"] = json::array();
    for (const auto& occ : secret.occurrences) {
        json o;
        o["origin"] = origin_name(occ.origin);
        o["locator"] = display_lossy(occ.locator);
        if (!occ.layer_digest.empty()) o["layer_digest"] = occ.layer_digest;
        o["image"] = occ.image;
        line["occurrences"].push_back(std::move(o));
    }
    return line;
}

int64_t layer_created_instant(const ImageRecord& image, const std::string& layer_digest) {
    auto pos = std::find(image.layer_digests.begin(), image.layer_digests.end(), layer_digest);
    if (pos == image.layer_digests.end()) return -1;
    size_t index = static_cast<size_t>(pos - image.layer_digests.begin());
    auto aligned = image.config.layer_history();
    if (image.config.history_layer_mismatch || index >= aligned.size()) return -1;
    return parse_rfc3339(aligned[index]->created);
}

}  // namespace

std::vector<ValidatedSecret> load_validated_secrets(CampaignStore& store) {
    auto verdict_file = store.path("verdicts.jsonl");
    if (!fs::exists(verdict_file))
        throw ScanError(ErrorKind::Config, "no verdicts found; run validate first");

    std::set<std::pair<std::string, std::string>> passed;
    std::map<std::pair<std::string, std::string>, bool> unverifiable;
    std::ifstream in(verdict_file, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto doc = json::parse(line);
        if (doc.value("stage", "") == "passed")
            passed.insert({doc.value("rule_id", ""), doc.value("sha256", "")});
        if (doc.value("unverifiable", false))
            unverifiable[{doc.value("rule_id", ""), doc.value("sha256", "")}] = true;
    }

    auto matches = store.load_matches();
    auto grouped = distinct(matches);
    std::vector<ValidatedSecret> secrets;
    for (const auto& [key, occurrences] : grouped) {
        if (!passed.count({key.rule_id, key.text_hash})) continue;
        ValidatedSecret secret;
        secret.key = key;
        secret.domain = occurrences.front().domain;
        secret.rule_id = key.rule_id;
        secret.matched_text = occurrences.front().matched_text;
        secret.occurrences = occurrences;
        auto it = unverifiable.find({key.rule_id, key.text_hash});
        secret.unverifiable = it != unverifiable.end() && it->second;
        secrets.push_back(std::move(secret));
    }
    return secrets;
}

ValidateSummary run_validate(const ScanConfig& config, CampaignStore& store) {
    ValidateSummary summary;
    auto rules = campaign_rules(config);
    auto matches = store.load_matches();
    auto images = store.load_images();

    // Accompanying material routes to certificate analysis, never through
    // the cascade.
    std::vector<RawMatch> secret_matches;
    std::vector<RawMatch> accompanying;
    for (auto& m : matches) {
        if (m.domain == Domain::Accompanying)
            accompanying.push_back(std::move(m));
        else
            secret_matches.push_back(std::move(m));
    }

    CascadeConfig cascade_config;
    cascade_config.ngram = config.ngram;
    cascade_config.sequence = config.sequence;
    cascade_config.static_paths = config.path_rules_file
                                      ? load_static_path_rules(*config.path_rules_file)
                                      : default_static_path_rules();
    cascade_config.rules = rules;

    KompromatIndex kompromat;
    if (config.kompromat_dir) kompromat = KompromatIndex::load_dir(*config.kompromat_dir);

    auto grouped = distinct(secret_matches);
    auto result = run_cascade(grouped, kompromat, cascade_config);
    summary.distinct_input = grouped.size();
    summary.passed = result.secrets.size();

    // verdicts.jsonl: one line per distinct key, sorted by map order.
    {
        std::ostringstream out;
        for (const auto& [key, verdict] : result.verdicts) {
            json line;
            line["rule_id"] = key.rule_id;
            line["sha256"] = key.text_hash;
            line["stage"] = filter_stage_name(verdict.stage);
            line["detail"] = verdict.detail;
            auto wc = result.would_catch.find(key);
            line["would_catch"] = json::array();
            if (wc != result.would_catch.end()) {
                for (auto stage : wc->second) line["would_catch"].push_back(filter_stage_name(stage));
            }
            for (const auto& secret : result.secrets) {
                if (secret.key == key) {
                    line["unverifiable"] = secret.unverifiable;
                    break;
                }
            }
            out << line.dump() << "\n";
        }
        write_file(store.path("verdicts.jsonl"), out.str());
    }

    // secrets.jsonl: redacted by construction (sha256 + rule + length).
    {
        std::ostringstream out;
        for (const auto& secret : result.secrets) out << redacted_secret_json(secret).dump() << "\n";
        write_file(store.path("secrets.jsonl"), out.str());
    }

    auto funnel = funnel_to_tsv(result.funnel);
    write_file(store.path("funnel.tsv"), funnel);
    summary.funnel_path = store.path("funnel.tsv");

    // Methodology echo (parameters the paper redacts are pinned here).
    {
        json meta;
        meta["ngram_min"] = config.ngram.n_min;
        meta["ngram_max"] = config.ngram.n_max;
        meta["ngram_threshold_factor"] = config.ngram.threshold_factor;
        meta["ngram_mean"] = result.ngram_mean;
        meta["ngram_distinct_grams"] = result.ngram_distinct;
        meta["kompromat_entries"] = kompromat.size();
        meta["learned_dirs"] = result.path_rules.learned_dirs.size();
        meta["learned_parents"] = result.path_rules.learned_parents.size();
        meta["sequence_keywords"] = config.sequence.keywords;
        meta["env_split_note"] =
            "env split maps the service token onto the variable name and drops the gap quantifier";
        meta["platform_note"] = "multi-platform images resolve to linux/amd64 (first entry fallback)";
        write_file(store.path("validation_meta.json"), meta.dump(2) + "\n");
    }

    // Certificates from accompanying-material matches.
    {
        auto meta = store.load_meta();
        int64_t download_time = meta ? meta->started_at : 0;
        RootStoreBundle bundle;
        if (config.root_stores_dir) bundle = RootStoreBundle::load_dir(*config.root_stores_dir);

        std::map<std::string, std::vector<const ImageRecord*>> by_layer;
        for (const auto& image : images)
            for (const auto& digest : image.layer_digests) by_layer[digest].push_back(&image);

        std::vector<CertificateRecord> records;
        for (const auto& m : accompanying) {
            if (m.rule_id != "accompanying.pem-certificate") continue;
            auto record = parse_certificate(m.matched_text);
            record.image = m.image;
            record.layer_digest = m.layer_digest;
            record.path = m.locator;
            if (!m.layer_digest.empty()) {
                auto it = by_layer.find(m.layer_digest);
                if (it != by_layer.end() && !it->second.empty()) {
                    int64_t created = layer_created_instant(*it->second.front(), m.layer_digest);
                    if (created >= 0) record.layer_created = created;
                }
            }
            records.push_back(std::move(record));
        }
        for (auto& record : records) {
            if (record.parse_ok) record.trust_class = classify_trust(record, bundle, records);
        }

        std::ostringstream out;
        for (const auto& record : records) {
            json line;
            line["subject"] = record.subject_dn;
            line["issuer"] = record.issuer_dn;
            line["not_before"] = record.not_before;
            line["not_after"] = record.not_after;
            line["spki_sha256"] = to_hex(record.spki_fingerprint);
            line["trust_class"] = trust_class_name(record.trust_class);
            line["key_usages"] = record.key_usages;
            line["extended_usages"] = record.extended_usages;
            line["usages_unconstrained"] = record.usages_unconstrained;
            auto vd = check_validity(record, ValidityInstant::DownloadTime, download_time);
            auto vc = check_validity(record, ValidityInstant::LayerCreated, download_time);
            line["valid_at_download"] = vd ? json(*vd) : json();
            line["valid_at_layer_created"] = vc ? json(*vc) : json();
            line["image"] = record.image;
            line["layer_digest"] = record.layer_digest;
            line["path"] = display_lossy(record.path);
            line["parse_ok"] = record.parse_ok;
            out << line.dump() << "\n";
        }
        write_file(store.path("certs.jsonl"), out.str());
        summary.certificates = records.size();
    }
    return summary;
}

CorrelateSummary run_correlate(const ScanConfig& config, CampaignStore& store,
                               const std::string& observations_file) {
    CorrelateSummary summary;
    auto secrets = load_validated_secrets(store);

    std::vector<KeyFingerprint> fingerprints;
    for (const auto& secret : secrets) {
        if (secret.domain != Domain::PrivateKey) continue;
        auto parsed = parse_private_key_material(secret.matched_text);
        if (!parsed.parsable || parsed.encrypted || !parsed.pkey) {
            ++summary.unverifiable_keys;
            continue;
        }
        try {
            fingerprints.push_back(fingerprint_parsed_key(parsed));
        } catch (const ScanError&) {
            ++summary.unverifiable_keys;
        }
    }
    summary.fingerprints = fingerprints.size();

    auto observations = load_observations(observations_file);
    summary.skipped_rows = observations.skipped_malformed;
    auto table = correlate_hosts(fingerprints, observations.rows);

    std::ostringstream out;
    out << "protocol\tscan_date\tunique_hosts\tunique_keys\n";
    for (const auto& [bucket, cell] : table) {
        out << bucket.first << "\t" << bucket.second << "\t" << cell.unique_hosts << "\t"
            << cell.unique_keys << "\n";
        summary.matched_hosts += cell.unique_hosts;
    }
    write_file(store.path("correlation.tsv"), out.str());

    // Compromised certificates: SPKI join between leaked keys and stored
    // certificate records.
    auto certs_file = store.path("certs.jsonl");
    if (fs::exists(certs_file)) {
        std::set<std::string> spki;
        for (const auto& fp : fingerprints) spki.insert(to_hex(fp.spki_sha256));
        std::ostringstream certs_out;
        certs_out << "spki_sha256\tsubject\ttrust_class\timage\tpath\n";
        std::ifstream in(certs_file, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto doc = json::parse(line);
            if (!spki.count(doc.value("spki_sha256", ""))) continue;
            ++summary.compromised_certificates;
            certs_out << doc.value("spki_sha256", "") << "\t" << doc.value("subject", "") << "\t"
                      << doc.value("trust_class", "") << "\t" << doc.value("image", "") << "\t"
                      << doc.value("path", "") << "\n";
        }
        write_file(store.path("compromised_certs.tsv"), certs_out.str());
    }
    return summary;
}

ProbeSummary run_probe(const ScanConfig& config, const std::vector<ProbeTarget>& targets,
                       const Blocklist& blocklist, CampaignStore& store, Prober* prober) {
    ProbeSummary summary;
    HttpProber default_prober(config.user_agent);
    Prober& active = prober ? *prober : default_prober;
    ScanPolicy policy;
    policy.shuffle_seed = config.seed;
    summary.stats = scan_targets(targets, blocklist, policy, active, [&](const ProbeResult& r) {
        store.append_probe(r);
        summary.outcomes[r.outcome]++;
    });
    return summary;
}

// ---------------------------------------------------------------------------
// Report emission

void emit_report(CampaignStore& store, bool unredacted) {
    auto report_dir = fs::path(store.dir()) / "report";
    fs::create_directories(report_dir);

    auto secrets = load_validated_secrets(store);
    std::sort(secrets.begin(), secrets.end(),
              [](const ValidatedSecret& a, const ValidatedSecret& b) { return a.key < b.key; });
    auto images = store.load_images();

    auto owners = aggregate_owners(secrets, images);
    auto histogram = path_histogram(secrets, 7);
    auto origins = origin_split(secrets, images);
    auto operations = attribute_secret_operations(secrets, images);

    {
        std::ostringstream out;
        for (const auto& secret : secrets) {
            auto line = redacted_secret_json(secret);
            auto it = owners.owners.find(secret.key);
            line["owner_count"] = it == owners.owners.end() ? 0 : it->second.size();
            line["inherited"] = owners.inherited.count(secret.key) && owners.inherited.at(secret.key);
            auto op = operations.find(secret.key);
            if (op != operations.end()) {
                line["operation"] = operation_kind_name(op->second.kind);
                line["commands"] = op->second.commands;
            }
            if (unredacted) line["matched_b64"] = base64_encode(secret.matched_text);
            out << line.dump() << "\n";
        }
        write_file((report_dir / "secrets.jsonl").string(), out.str());
    }

    {
        std::ostringstream out;
        out << "owner_count\tsecret_count\n";
        for (const auto& [count, secrets_n] : owners.histogram)
            out << count << "\t" << secrets_n << "\n";
        uint64_t inherited = 0;
        for (const auto& [key, flag] : owners.inherited)
            if (flag) ++inherited;
        out << "# inherited_multi_owner\t" << inherited << "\n";
        write_file((report_dir / "owners.tsv").string(), out.str());
    }

    {
        std::ostringstream out;
        out << "domain\tpath\tcount\n";
        for (const auto& bucket : histogram.private_key)
            out << "private-key\t" << display_lossy(bucket.prefix) << "\t" << bucket.count << "\n";
        for (const auto& bucket : histogram.api)
            out << "api\t" << display_lossy(bucket.prefix) << "\t" << bucket.count << "\n";
        out << "private-key\t<env>\t" << histogram.env_private_key << "\n";
        out << "api\t<env>\t" << histogram.env_api << "\n";
        write_file((report_dir / "paths.tsv").string(), out.str());
    }

    {
        // Percentages always ship with numerator and denominator.
        std::ostringstream out;
        out << "population\taffected\ttotal\tpct\n";
        auto row = [&](const char* name, const Share& share) {
            out << name << "\t" << share.affected << "\t" << share.population << "\t"
                << share.pct() << "\n";
        };
        row("hub", origins.hub);
        row("private", origins.private_registries);
        row("standard-only", origins.standard_only);
        row("iiot-only", origins.iiot_only);
        out << "# images_in_both_groups_excluded\t" << origins.both_groups_excluded << "\n";
        write_file((report_dir / "origin.tsv").string(), out.str());
    }

    {
        std::ostringstream out;
        out << "rule_id\tsha256\toperation\tcommands\n";
        for (const auto& secret : secrets) {
            auto it = operations.find(secret.key);
            if (it == operations.end()) continue;
            out << secret.rule_id << "\t" << secret.key.text_hash << "\t"
                << operation_kind_name(it->second.kind) << "\t";
            for (size_t i = 0; i < it->second.commands.size(); ++i) {
                if (i) out << ",";
                out << it->second.commands[i];
            }
            out << "\n";
        }
        write_file((report_dir / "operations.tsv").string(), out.str());
    }

    for (const char* name : {"funnel.tsv", "correlation.tsv", "compromised_certs.tsv"}) {
        if (fs::exists(store.path(name)))
            fs::copy_file(store.path(name), report_dir / name,
                          fs::copy_options::overwrite_existing);
    }

    {
        auto meta = store.load_meta();
        std::ostringstream out;
        out << "campaign_dir\t" << store.dir() << "\n";
        if (meta) out << "ruleset_hash\t" << meta->ruleset_hash << "\n";
        out << "secrets\t" << secrets.size() << "\n";
        out << "images\t" << images.size() << "\n";
        out << "redaction\t" << (unredacted ? "OFF" : "on") << "\n";
        out << "generated_at\t" << std::time(nullptr) << "\n";
        write_file((report_dir / "summary.tsv").string(), out.str());
    }
}

}  // namespace imgscan
