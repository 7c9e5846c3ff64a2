#include "imgscan/config.hpp"

#include <nlohmann/json.hpp>

#include "imgscan/common.hpp"

namespace imgscan {

using nlohmann::json;

namespace {

SearchTerm plain(const char* term) { return SearchTerm{term, {}}; }

SearchTerm spelled(const char* term, std::initializer_list<const char*> variants) {
    SearchTerm t{term, {}};
    for (const char* v : variants) t.variants.emplace_back(v);
    return t;
}

}  // namespace

std::vector<QueryGroupConfig> default_query_groups() {
    QueryGroupConfig standard;
    standard.name = "standard";
    standard.terms = {
        plain("tls"), plain("ipp"), plain("css"), plain("imap"), plain("html"), plain("mysql"),
        plain("oracle"), plain("mariadb"), plain("memcached"), plain("elasticsearch"),
        plain("ssh"), plain("vpn"), plain("sql"), plain("pptp"), plain("java"), plain("mssql"),
        plain("heroku"), plain("ansible"), plain("terraform"),
        spelled("c++", {"c+", "c", "c "}),
        plain("dns"), plain("irc"), plain("php"), plain("xmpp"), plain("bash"), plain("redis"),
        plain("docker"), plain("xamarin"), plain("postgresql"),
        spelled("ibm db2", {"ibmdb2", "ibm+db2"}),
        plain("ftp"), plain("aws"), plain("quic"), plain("yarn"), plain("ipmi"), plain("shell"),
        plain("puppet"), plain("firebase"), plain("kubernetes"),
        spelled("unity 3d", {"unity+3d", "unity3d"}),
        plain("rdp"), plain("gcp"), plain("http"), plain("deno"), plain("samba"), plain("proxy"),
        plain("pulumi"), plain("dynamodb"), plain("javascript"),
        spelled("ibm cloud", {"ibmcloud", "ibm+cloud"}),
        plain("vnc"), plain("git"), plain("smtp"), plain("chef"), plain("rsync"), plain("telnet"),
        plain("python"), plain("cassandra"), plain("typescript"),
        spelled("node.js", {"node js", "node+js", "nodejs"}),
        plain("smb"), plain("k8s"), plain("pop3"), plain("flow"), plain("ipsec"), plain("sqlite"),
        plain("mongodb"), plain("couchbase"), plain("powershell"),
        spelled("ibm watson", {"ibm+watson", "ibmwatson"}),
    };

    QueryGroupConfig iiot;
    iiot.name = "iiot";
    iiot.terms = {
        plain("atg"), plain("mqtt"), plain("codesys"),
        spelled("ff-hse", {"ff hse", "ff+hse", "ffhse"}),
        spelled("iec-61850", {"iec+61850", "iec61850", "iec 61850"}),
        plain("dnp3"), plain("cspv4"), plain("proconos"),
        spelled("fl-net", {"fl net", "flnet", "fl+net"}),
        spelled("zigbee-ip", {"zigbeeip", "zigbee ip", "zigbee+ip"}),
        plain("srtp"), plain("bacnet"), plain("ethercat"),
        spelled("hart-ip", {"hart+ip", "hartip", "hart ip"}),
        spelled("ansi c12.22", {"ansi c12 22", "ansi+c12+22", "ansic1222"}),
        plain("iccp"), plain("modbus"), plain("profinet"),
        spelled("iec-104", {"iec 104", "iec104", "iec+104"}),
        spelled("ethernet/ip", {"ethernet+ip", "ethernetip", "ethernet ip"}),
        plain("amqp"), plain("siemens"),
        spelled("pc worx", {"pcworx", "pc+worx"}),
        spelled("omron fins", {"omron+fins", "omronfins"}),
        spelled("red lion crimson v3", {"redlioncrimsonv3", "red+lion+crimson+v3"}),
        plain("coap"), plain("tridium"),
        spelled("opc-ua", {"opcua", "opc+ua", "opc ua"}),
        spelled("melsec-q", {"melsecq", "melsec q", "melsec+q"}),
        spelled("automatic tank gauge", {"automatic+tank+gauge", "automatictankgauge"}),
    };

    return {standard, iiot};
}

ScanConfig ScanConfig::load(const std::string& path) {
    ScanConfig config;
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ScanError(ErrorKind::Config, path + ": " + e.what());
    }
    config.user_agent = doc.value("user_agent", config.user_agent);
    config.contact_url = doc.value("contact_url", config.contact_url);
    if (doc.contains("contact_url") && !doc.contains("user_agent"))
        config.user_agent = "imgscan/0.1 (+" + config.contact_url + ")";
    config.hub_api_url = doc.value("hub_api_url", config.hub_api_url);
    config.hub_registry_host = doc.value("hub_registry_host", config.hub_registry_host);
    config.hub_registry_port = doc.value("hub_registry_port", config.hub_registry_port);
    config.hub_registry_https = doc.value("hub_registry_https", config.hub_registry_https);
    config.hub_daily_pull_budget = doc.value("hub_daily_pull_budget", config.hub_daily_pull_budget);
    config.search_result_limit = doc.value("search_result_limit", config.search_result_limit);
    config.private_rate_policy.max_requests_per_second =
        doc.value("private_max_requests_per_second",
                  config.private_rate_policy.max_requests_per_second);
    config.private_rate_policy.max_concurrent_transfers =
        doc.value("private_max_concurrent_transfers",
                  config.private_rate_policy.max_concurrent_transfers);
    config.catalog_cap = doc.value("catalog_cap", config.catalog_cap);
    config.layer_budget_bytes = doc.value("layer_budget_bytes", config.layer_budget_bytes);
    config.verify_tls = doc.value("verify_tls", config.verify_tls);
    config.seed = doc.value("seed", config.seed);
    config.workers = doc.value("workers", config.workers);
    if (doc.contains("cache_dir")) config.cache_dir = doc["cache_dir"].get<std::string>();
    if (doc.contains("rules_file")) config.rules_file = doc["rules_file"].get<std::string>();
    if (doc.contains("kompromat_dir")) config.kompromat_dir = doc["kompromat_dir"].get<std::string>();
    if (doc.contains("root_stores_dir"))
        config.root_stores_dir = doc["root_stores_dir"].get<std::string>();
    if (doc.contains("path_rules_file"))
        config.path_rules_file = doc["path_rules_file"].get<std::string>();
    config.ngram.n_min = doc.value("ngram_min", config.ngram.n_min);
    config.ngram.n_max = doc.value("ngram_max", config.ngram.n_max);
    config.ngram.threshold_factor = doc.value("ngram_threshold_factor",
                                              config.ngram.threshold_factor);
    if (doc.contains("sequence_keywords"))
        config.sequence.keywords = doc["sequence_keywords"].get<std::vector<std::string>>();

    if (doc.contains("query_groups")) {
        config.query_groups.clear();
        for (const auto& group : doc["query_groups"]) {
            QueryGroupConfig g;
            g.name = group.value("name", "custom");
            for (const auto& term : group.value("terms", json::array())) {
                SearchTerm t;
                if (term.is_string()) {
                    t.term = term.get<std::string>();
                } else {
                    t.term = term.value("term", "");
                    if (term.contains("variants"))
                        t.variants = term["variants"].get<std::vector<std::string>>();
                }
                if (!t.term.empty()) g.terms.push_back(std::move(t));
            }
            config.query_groups.push_back(std::move(g));
        }
    }
    return config;
}

std::string ScanConfig::to_json() const {
    json doc;
    doc["user_agent"] = user_agent;
    doc["contact_url"] = contact_url;
    doc["hub_api_url"] = hub_api_url;
    doc["hub_registry_host"] = hub_registry_host;
    doc["hub_registry_port"] = hub_registry_port;
    doc["hub_registry_https"] = hub_registry_https;
    doc["hub_daily_pull_budget"] = hub_daily_pull_budget;
    doc["search_result_limit"] = search_result_limit;
    doc["private_max_requests_per_second"] = private_rate_policy.max_requests_per_second;
    doc["private_max_concurrent_transfers"] = private_rate_policy.max_concurrent_transfers;
    doc["catalog_cap"] = catalog_cap;
    doc["layer_budget_bytes"] = layer_budget_bytes;
    doc["verify_tls"] = verify_tls;
    doc["seed"] = seed;
    doc["workers"] = workers;
    if (cache_dir) doc["cache_dir"] = *cache_dir;
    if (rules_file) doc["rules_file"] = *rules_file;
    if (kompromat_dir) doc["kompromat_dir"] = *kompromat_dir;
    if (root_stores_dir) doc["root_stores_dir"] = *root_stores_dir;
    if (path_rules_file) doc["path_rules_file"] = *path_rules_file;
    doc["ngram_min"] = ngram.n_min;
    doc["ngram_max"] = ngram.n_max;
    doc["ngram_threshold_factor"] = ngram.threshold_factor;
    doc["sequence_keywords"] = sequence.keywords;
    doc["query_groups"] = json::array();
    for (const auto& group : query_groups) {
        json g;
        g["name"] = group.name;
        g["terms"] = json::array();
        for (const auto& term : group.terms) {
            json t;
            t["term"] = term.term;
            if (!term.variants.empty()) t["variants"] = term.variants;
            g["terms"].push_back(std::move(t));
        }
        doc["query_groups"].push_back(std::move(g));
    }
    return doc.dump(2) + "\n";
}

}  // namespace imgscan
