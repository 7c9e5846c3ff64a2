#include "imgscan/discovery.hpp"

#include <httplib.h>

#include <cctype>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "imgscan/common.hpp"
#include "imgscan/rate_limit.hpp"
#include "imgscan/rng.hpp"

namespace imgscan {

const char* probe_outcome_name(ProbeOutcome o) {
    switch (o) {
    case ProbeOutcome::RegistryHttp: return "registry-http";
    case ProbeOutcome::RegistryHttps: return "registry-https";
    case ProbeOutcome::OpenNotRegistry: return "open-not-registry";
    case ProbeOutcome::Closed: return "closed";
    case ProbeOutcome::Timeout: return "timeout";
    }
    return "?";
}

namespace {

std::optional<uint32_t> parse_ipv4(const std::string& s) {
    uint32_t parts[4];
    int idx = 0;
    size_t start = 0;
    for (int i = 0; i < 4; ++i) {
        size_t dot = i == 3 ? s.size() : s.find('.', start);
        if (dot == std::string::npos) return std::nullopt;
        auto piece = s.substr(start, dot - start);
        if (piece.empty() || piece.size() > 3) return std::nullopt;
        for (char c : piece)
            if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        unsigned long v = std::stoul(piece);
        if (v > 255) return std::nullopt;
        parts[idx++] = static_cast<uint32_t>(v);
        start = dot + 1;
    }
    return parts[0] << 24 | parts[1] << 16 | parts[2] << 8 | parts[3];
}

bool valid_hostname(const std::string& s) {
    if (s.empty() || s.size() > 253) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-')) return false;
    }
    return true;
}

}  // namespace

bool is_valid_probe_address(const std::string& address) {
    return parse_ipv4(address).has_value() || valid_hostname(address);
}

void Blocklist::add(const std::string& raw) {
    auto entry = trim(raw);
    if (entry.empty()) return;
    auto slash = entry.find('/');
    if (slash != std::string::npos) {
        auto net = parse_ipv4(entry.substr(0, slash));
        int bits = -1;
        try {
            bits = std::stoi(entry.substr(slash + 1));
        } catch (...) {
        }
        if (net && bits >= 0 && bits <= 32) {
            uint32_t mask = bits == 0 ? 0 : ~uint32_t{0} << (32 - bits);
            cidrs_.emplace_back(*net & mask, mask);
            return;
        }
    }
    exact_.insert(entry);
}

Blocklist Blocklist::from_file(const std::string& path) {
    Blocklist bl;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        bl.add(line);
    }
    return bl;
}

bool Blocklist::contains(const std::string& address) const {
    if (exact_.count(address)) return true;
    if (auto ip = parse_ipv4(address)) {
        for (const auto& [net, mask] : cidrs_) {
            if ((*ip & mask) == net) return true;
        }
    }
    return false;
}

std::vector<ProbeTarget> load_targets_file(const std::string& path, uint16_t default_port) {
    std::vector<ProbeTarget> targets;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto entry = trim(line);
        if (entry.empty()) continue;
        ProbeTarget t;
        t.port = default_port;
        auto colon = entry.rfind(':');
        if (colon != std::string::npos && colon + 1 < entry.size()) {
            bool digits = true;
            for (size_t i = colon + 1; i < entry.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(entry[i]))) digits = false;
            if (digits) {
                t.port = static_cast<uint16_t>(std::stoul(entry.substr(colon + 1)));
                entry = entry.substr(0, colon);
            }
        }
        t.address = entry;
        targets.push_back(std::move(t));
    }
    return targets;
}

namespace {

struct AttemptOutcome {
    bool got_http_response = false;
    bool looks_like_registry = false;
    bool timed_out = false;
    std::optional<std::string> api_version_header;
};

// A v2 base endpoint answers 200 or 401 and identifies itself via the
// Distribution API version header or a parseable registry error document.
bool registry_shaped_body(const std::string& body) {
    try {
        auto doc = nlohmann::json::parse(body);
        return doc.is_object() && doc.contains("errors") && doc["errors"].is_array();
    } catch (const nlohmann::json::exception&) {
        return false;
    }
}

AttemptOutcome attempt_scheme(const ProbeTarget& target, bool https,
                              std::chrono::milliseconds timeout, const std::string& user_agent) {
    AttemptOutcome out;
    std::string base = (https ? std::string("https://") : std::string("http://")) + target.address +
                       ":" + std::to_string(target.port);
    httplib::Client cli(base);
    auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
    cli.set_connection_timeout(0, usec.count());
    cli.set_read_timeout(0, usec.count());
    cli.enable_server_certificate_verification(false);
    auto res = cli.Get("/v2/", httplib::Headers{{"User-Agent", user_agent}});
    if (!res) {
        out.timed_out = res.error() == httplib::Error::ConnectionTimeout;
        return out;
    }
    out.got_http_response = true;
    auto header = res->get_header_value("Docker-Distribution-Api-Version");
    if (!header.empty()) out.api_version_header = header;
    if (res->status == 200 || res->status == 401) {
        out.looks_like_registry = !header.empty() || registry_shaped_body(res->body);
    }
    return out;
}

}  // namespace

ProbeResult HttpProber::probe(const ProbeTarget& target, std::chrono::milliseconds timeout) {
    ProbeResult result;
    result.target = target;
    auto started = std::chrono::steady_clock::now();

    auto http = attempt_scheme(target, false, timeout, user_agent_);
    if (http.looks_like_registry) {
        result.outcome = ProbeOutcome::RegistryHttp;
        result.api_version_header = http.api_version_header;
    } else {
        auto https = attempt_scheme(target, true, timeout, user_agent_);
        if (https.looks_like_registry) {
            result.outcome = ProbeOutcome::RegistryHttps;
            result.api_version_header = https.api_version_header;
        } else if (http.got_http_response || https.got_http_response) {
            result.outcome = ProbeOutcome::OpenNotRegistry;
        } else if (http.timed_out || https.timed_out) {
            result.outcome = ProbeOutcome::Timeout;
        } else {
            result.outcome = ProbeOutcome::Closed;
        }
    }
    result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    return result;
}

ScanStats scan_targets(const std::vector<ProbeTarget>& targets, const Blocklist& blocklist,
                       const ScanPolicy& policy, Prober& prober,
                       const std::function<void(const ProbeResult&)>& on_result) {
    if (policy.max_rate <= 0) throw ScanError(ErrorKind::Config, "max_rate must be positive");

    ScanStats stats;
    std::vector<ProbeTarget> queue;
    queue.reserve(targets.size());
    for (const auto& t : targets) {
        if (!is_valid_probe_address(t.address)) {
            ++stats.dropped_invalid;
            continue;
        }
        if (blocklist.contains(t.address)) {
            ++stats.dropped_blocklisted;
            continue;
        }
        queue.push_back(t);
    }
    seeded_shuffle(queue, policy.shuffle_seed);

    TokenBucket bucket(policy.max_rate);
    std::mutex result_mu;
    std::mutex queue_mu;
    size_t next = 0;

    unsigned workers = std::max(1u, policy.max_in_flight);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                size_t idx;
                {
                    std::lock_guard lk(queue_mu);
                    if (next >= queue.size()) return;
                    idx = next++;
                }
                bucket.acquire();
                auto result = prober.probe(queue[idx], policy.timeout);
                std::lock_guard lk(result_mu);
                on_result(result);
            }
        });
    }
    for (auto& t : pool) t.join();
    stats.dispatched = queue.size();
    return stats;
}

}  // namespace imgscan
