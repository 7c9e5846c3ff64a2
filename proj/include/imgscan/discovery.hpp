#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace imgscan {

struct ProbeTarget {
    std::string address;  // IP or hostname
    uint16_t port = 5000;

    std::string display() const { return address + ":" + std::to_string(port); }
};

bool is_valid_probe_address(const std::string& address);

enum class ProbeOutcome { RegistryHttp, RegistryHttps, OpenNotRegistry, Closed, Timeout };
const char* probe_outcome_name(ProbeOutcome o);

struct ProbeResult {
    ProbeTarget target;
    ProbeOutcome outcome = ProbeOutcome::Closed;
    std::optional<std::string> api_version_header;
    int64_t latency_ms = 0;
};

// Exact addresses plus IPv4 CIDR ranges; file format is one entry per line
// with '#' comments.
class Blocklist {
  public:
    void add(const std::string& entry);
    static Blocklist from_file(const std::string& path);

    bool contains(const std::string& address) const;
    size_t size() const { return exact_.size() + cidrs_.size(); }

  private:
    std::set<std::string> exact_;
    std::vector<std::pair<uint32_t, uint32_t>> cidrs_;  // (network, mask)
};

std::vector<ProbeTarget> load_targets_file(const std::string& path, uint16_t default_port = 5000);

// Transport seam: tests swap in an instrumented prober to assert that
// blocklisted targets never see traffic.
class Prober {
  public:
    virtual ~Prober() = default;
    virtual ProbeResult probe(const ProbeTarget& target, std::chrono::milliseconds timeout) = 0;
};

// GET /v2/ over HTTP, classify, and retry over HTTPS (certificate checks
// off: probing classifies, it does not trust).
class HttpProber : public Prober {
  public:
    explicit HttpProber(std::string user_agent = "imgscan/0.1 (+https://localhost/scan-contact)")
        : user_agent_(std::move(user_agent)) {}
    ProbeResult probe(const ProbeTarget& target, std::chrono::milliseconds timeout) override;

  private:
    std::string user_agent_;
};

struct ScanPolicy {
    double max_rate = 10.0;  // probes per second
    uint64_t shuffle_seed = 0;
    unsigned max_in_flight = 8;
    std::chrono::milliseconds timeout{3000};
};

struct ScanStats {
    size_t dispatched = 0;
    size_t dropped_blocklisted = 0;
    size_t dropped_invalid = 0;
};

// Emits probes in seeded-shuffled order; blocklisted targets are dropped
// before any packet is sent. Results arrive on the callback in completion
// order, each exactly once.
ScanStats scan_targets(const std::vector<ProbeTarget>& targets, const Blocklist& blocklist,
                       const ScanPolicy& policy, Prober& prober,
                       const std::function<void(const ProbeResult&)>& on_result);

}  // namespace imgscan
