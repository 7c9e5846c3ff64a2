#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace imgscan::testsupport {

// In-process Registry v2 mock. Serves catalog (honoring n= with Link
// pagination), tags, manifests (plus manifest lists), and blobs.
class MockRegistry {
  public:
    MockRegistry();
    ~MockRegistry();

    // Builds a single-platform image from gzipped layer bytes and registers
    // it under repo:tag. Returns the manifest digest.
    std::string add_image(const std::string& repo, const std::string& tag,
                          const std::vector<std::string>& layer_blobs,
                          const std::vector<std::string>& env,
                          const std::vector<std::pair<std::string, bool>>& history = {},
                          const std::string& created = "2022-08-01T00:00:00Z");

    void add_manifest_list(const std::string& repo, const std::string& tag,
                           const std::vector<std::pair<std::string, std::string>>& platform_digests);

    void add_empty_repo(const std::string& repo);

    void corrupt_blob(const std::string& digest);  // flip one byte when serving
    void truncate_blob(const std::string& digest, size_t serve_bytes, int times);
    void set_catalog_page_size(size_t n) { catalog_page_size_ = n; }
    void require_token_auth(bool on) { token_auth_ = on; }
    void always_429(bool on) { always_429_ = on; }
    void fail_429_times(int n) { remaining_429_ = n; }

    int start();  // returns bound port
    void stop();

    std::string base_url() const;
    int port() const { return port_; }

    int peak_concurrent_blob_transfers() const { return peak_concurrent_.load(); }
    uint64_t blob_requests() const { return blob_requests_.load(); }

  private:
    void install_routes();

    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;

    std::map<std::string, std::string> blobs_;             // digest -> bytes
    std::map<std::string, std::string> manifests_;         // digest -> manifest json
    std::map<std::string, std::string> manifest_types_;    // digest -> media type
    std::map<std::string, std::map<std::string, std::string>> repo_tags_;  // repo -> tag -> digest
    std::vector<std::string> repo_order_;
    std::set<std::string> corrupted_;
    std::map<std::string, std::pair<size_t, int>> truncated_;
    size_t catalog_page_size_ = 0;  // 0 = honor n param exactly
    bool token_auth_ = false;
    bool always_429_ = false;
    std::atomic<int> remaining_429_{0};
    std::atomic<int> concurrent_{0};
    std::atomic<int> peak_concurrent_{0};
    std::atomic<uint64_t> blob_requests_{0};
};

// Docker Hub API mock: repository search with pagination and per-repo tag
// listings carrying last_updated.
class MockHub {
  public:
    MockHub();
    ~MockHub();

    void add_search_result(const std::string& term, const std::vector<std::string>& repos);
    void set_search_count_cap(uint64_t reported_count);
    void add_tags(const std::string& repo,
                  const std::vector<std::pair<std::string, std::string>>& tag_and_updated);
    void set_page_size(size_t n) { page_size_ = n; }

    int start();
    void stop();
    std::string base_url() const;

  private:
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
    size_t page_size_ = 2;
    uint64_t count_cap_ = 0;
    std::map<std::string, std::vector<std::string>> search_;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> tags_;
};

// Plain HTML server (open-not-registry classification fixture).
class MockHtmlServer {
  public:
    MockHtmlServer();
    ~MockHtmlServer();
    int start();
    void stop();

  private:
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

// HTTPS-only registry base endpoint (probe classification fixture). Serves
// GET /v2/ over TLS with a self-signed certificate.
class MockTlsRegistry {
  public:
    MockTlsRegistry();
    ~MockTlsRegistry();
    int start();
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

int find_free_port();

}  // namespace imgscan::testsupport
