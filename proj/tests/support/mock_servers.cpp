#include "support/mock_servers.hpp"

#include <httplib.h>

#include <cstdio>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "imgscan/common.hpp"
#include "imgscan/digest.hpp"
#include "support/pki_fixtures.hpp"

namespace imgscan::testsupport {

using nlohmann::json;

namespace {

constexpr const char* kApiVersionHeader = "Docker-Distribution-Api-Version";

void start_server(httplib::Server& server, std::thread& thread, int& port) {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();
}

void stop_server(httplib::Server& server, std::thread& thread) {
    server.stop();
    if (thread.joinable()) thread.join();
}

}  // namespace

MockRegistry::MockRegistry() : server_(std::make_unique<httplib::Server>()) { install_routes(); }

MockRegistry::~MockRegistry() { stop(); }

int MockRegistry::start() {
    start_server(*server_, thread_, port_);
    return port_;
}

void MockRegistry::stop() { stop_server(*server_, thread_); }

std::string MockRegistry::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

std::string MockRegistry::add_image(const std::string& repo, const std::string& tag,
                                    const std::vector<std::string>& layer_blobs,
                                    const std::vector<std::string>& env,
                                    const std::vector<std::pair<std::string, bool>>& history,
                                    const std::string& created) {
    json config;
    config["created"] = created;
    config["config"]["Env"] = env;
    config["history"] = json::array();
    if (history.empty()) {
        for (size_t i = 0; i < layer_blobs.size(); ++i) {
            json h;
            h["created"] = created;
            h["created_by"] = "/bin/sh -c #(nop) ADD file:layer" + std::to_string(i) + " in /";
            h["empty_layer"] = false;
            config["history"].push_back(std::move(h));
        }
    } else {
        for (const auto& [created_by, empty_layer] : history) {
            json h;
            h["created"] = created;
            h["created_by"] = created_by;
            h["empty_layer"] = empty_layer;
            config["history"].push_back(std::move(h));
        }
    }
    std::string config_bytes = config.dump();
    std::string config_digest = make_digest(config_bytes);
    blobs_[config_digest] = config_bytes;

    json manifest;
    manifest["schemaVersion"] = 2;
    manifest["mediaType"] = "application/vnd.docker.distribution.manifest.v2+json";
    manifest["config"]["digest"] = config_digest;
    manifest["config"]["size"] = config_bytes.size();
    manifest["config"]["mediaType"] = "application/vnd.docker.container.image.v1+json";
    manifest["layers"] = json::array();
    for (const auto& blob : layer_blobs) {
        auto digest = make_digest(blob);
        blobs_[digest] = blob;
        json layer;
        layer["digest"] = digest;
        layer["size"] = blob.size();
        layer["mediaType"] = "application/vnd.docker.image.rootfs.diff.tar.gzip";
        manifest["layers"].push_back(std::move(layer));
    }
    std::string manifest_bytes = manifest.dump();
    std::string manifest_digest = make_digest(manifest_bytes);
    manifests_[manifest_digest] = manifest_bytes;
    manifest_types_[manifest_digest] = "application/vnd.docker.distribution.manifest.v2+json";
    if (!repo_tags_.count(repo)) repo_order_.push_back(repo);
    repo_tags_[repo][tag] = manifest_digest;
    return manifest_digest;
}

void MockRegistry::add_manifest_list(
    const std::string& repo, const std::string& tag,
    const std::vector<std::pair<std::string, std::string>>& platform_digests) {
    json list;
    list["schemaVersion"] = 2;
    list["mediaType"] = "application/vnd.docker.distribution.manifest.list.v2+json";
    list["manifests"] = json::array();
    for (const auto& [platform, digest] : platform_digests) {
        auto slash = platform.find('/');
        json entry;
        entry["digest"] = digest;
        entry["platform"]["os"] = platform.substr(0, slash);
        entry["platform"]["architecture"] = platform.substr(slash + 1);
        list["manifests"].push_back(std::move(entry));
    }
    std::string bytes = list.dump();
    std::string digest = make_digest(bytes);
    manifests_[digest] = bytes;
    manifest_types_[digest] = "application/vnd.docker.distribution.manifest.list.v2+json";
    if (!repo_tags_.count(repo)) repo_order_.push_back(repo);
    repo_tags_[repo][tag] = digest;
}

void MockRegistry::add_empty_repo(const std::string& repo) {
    if (!repo_tags_.count(repo)) repo_order_.push_back(repo);
    repo_tags_[repo];
}

void MockRegistry::corrupt_blob(const std::string& digest) { corrupted_.insert(digest); }

void MockRegistry::truncate_blob(const std::string& digest, size_t serve_bytes, int times) {
    truncated_[digest] = {serve_bytes, times};
}

void MockRegistry::install_routes() {
    auto check_auth = [this](const httplib::Request& req, httplib::Response& res) {
        if (!token_auth_) return true;
        if (req.get_header_value("Authorization") == "Bearer mocktoken") return true;
        res.status = 401;
        res.set_header(kApiVersionHeader, "registry/2.0");
        res.set_header("WWW-Authenticate", "Bearer realm=\"" + base_url() +
                                               "/token\",service=\"mock-registry\"");
        res.set_content(R"({"errors":[{"code":"UNAUTHORIZED","message":"authentication required"}]})",
                        "application/json");
        return false;
    };

    server_->Get("/token", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"token":"mocktoken"})", "application/json");
    });

    server_->Get("/v2/", [this, check_auth](const httplib::Request& req, httplib::Response& res) {
        if (!check_auth(req, res)) return;
        res.set_header(kApiVersionHeader, "registry/2.0");
        res.set_content("{}", "application/json");
    });

    server_->Get("/v2/_catalog", [this, check_auth](const httplib::Request& req,
                                                    httplib::Response& res) {
        if (always_429_ || remaining_429_.fetch_sub(1) > 0) {
            res.status = 429;
            return;
        }
        remaining_429_ = 0;
        if (!check_auth(req, res)) return;
        size_t n = repo_order_.size();
        if (req.has_param("n")) n = std::stoul(req.get_param_value("n"));
        if (catalog_page_size_ > 0) n = std::min(n, catalog_page_size_);
        size_t start = 0;
        if (req.has_param("last")) {
            auto last = req.get_param_value("last");
            for (size_t i = 0; i < repo_order_.size(); ++i) {
                if (repo_order_[i] == last) {
                    start = i + 1;
                    break;
                }
            }
        }
        json body;
        body["repositories"] = json::array();
        size_t end = std::min(repo_order_.size(), start + n);
        for (size_t i = start; i < end; ++i) body["repositories"].push_back(repo_order_[i]);
        if (end < repo_order_.size()) {
            res.set_header("Link", "</v2/_catalog?n=" + std::to_string(n) +
                                       "&last=" + repo_order_[end - 1] + ">; rel=\"next\"");
        }
        res.set_header(kApiVersionHeader, "registry/2.0");
        res.set_content(body.dump(), "application/json");
    });

    server_->Get(R"(/v2/(.+)/tags/list)", [this, check_auth](const httplib::Request& req,
                                                             httplib::Response& res) {
        if (!check_auth(req, res)) return;
        auto repo = req.matches[1].str();
        auto it = repo_tags_.find(repo);
        if (it == repo_tags_.end()) {
            res.status = 404;
            res.set_content(R"({"errors":[{"code":"NAME_UNKNOWN"}]})", "application/json");
            return;
        }
        json body;
        body["name"] = repo;
        body["tags"] = json::array();
        for (const auto& [tag, digest] : it->second) body["tags"].push_back(tag);
        res.set_header(kApiVersionHeader, "registry/2.0");
        res.set_content(body.dump(), "application/json");
    });

    server_->Get(R"(/v2/(.+)/manifests/(.+))", [this, check_auth](const httplib::Request& req,
                                                                  httplib::Response& res) {
        if (!check_auth(req, res)) return;
        auto repo = req.matches[1].str();
        auto ref = req.matches[2].str();
        std::string digest;
        if (ref.rfind("sha256:", 0) == 0) {
            digest = ref;
        } else {
            auto it = repo_tags_.find(repo);
            if (it != repo_tags_.end()) {
                auto tag_it = it->second.find(ref);
                if (tag_it != it->second.end()) digest = tag_it->second;
            }
        }
        auto found = manifests_.find(digest);
        if (found == manifests_.end()) {
            res.status = 404;
            res.set_content(R"({"errors":[{"code":"MANIFEST_UNKNOWN"}]})", "application/json");
            return;
        }
        res.set_header(kApiVersionHeader, "registry/2.0");
        res.set_header("Docker-Content-Digest", digest);
        res.set_content(found->second, manifest_types_.at(digest).c_str());
    });

    server_->Get(R"(/v2/(.+)/blobs/(sha256:[0-9a-f]{64}))",
                 [this, check_auth](const httplib::Request& req, httplib::Response& res) {
                     if (!check_auth(req, res)) return;
                     auto digest = req.matches[2].str();
                     auto it = blobs_.find(digest);
                     if (it == blobs_.end()) {
                         res.status = 404;
                         res.set_content(R"({"errors":[{"code":"BLOB_UNKNOWN"}]})",
                                         "application/json");
                         return;
                     }
                     blob_requests_.fetch_add(1);
                     int now = concurrent_.fetch_add(1) + 1;
                     int peak = peak_concurrent_.load();
                     while (peak < now && !peak_concurrent_.compare_exchange_weak(peak, now)) {
                     }

                     std::string body = it->second;
                     if (corrupted_.count(digest) && !body.empty()) body[body.size() / 2] ^= 0x01;

                     auto trunc = truncated_.find(digest);
                     if (trunc != truncated_.end() && trunc->second.second > 0) {
                         --trunc->second.second;
                         size_t serve = std::min(trunc->second.first, body.size());
                         res.set_content_provider(
                             body.size(), "application/octet-stream",
                             [body, serve](size_t offset, size_t, httplib::DataSink& sink) {
                                 if (offset >= serve) return false;  // drop mid-transfer
                                 sink.write(body.data() + offset,
                                            std::min(serve - offset, size_t{4096}));
                                 return true;
                             },
                             [this](bool) { concurrent_.fetch_sub(1); });
                         return;
                     }

                     // Slow the transfer slightly so concurrency is observable.
                     res.set_content_provider(
                         body.size(), "application/octet-stream",
                         [body](size_t offset, size_t, httplib::DataSink& sink) {
                             std::this_thread::sleep_for(std::chrono::milliseconds(1));
                             sink.write(body.data() + offset,
                                        std::min(body.size() - offset, size_t{64 << 10}));
                             return true;
                         },
                         [this](bool) { concurrent_.fetch_sub(1); });
                 });
}

// ---------------------------------------------------------------------------

MockHub::MockHub() : server_(std::make_unique<httplib::Server>()) {
    server_->Get("/v2/search/repositories",
                 [this](const httplib::Request& req, httplib::Response& res) {
                     auto query = req.get_param_value("query");
                     size_t page = req.has_param("page") ? std::stoul(req.get_param_value("page")) : 1;
                     auto it = search_.find(query);
                     json body;
                     if (it == search_.end()) {
                         body["count"] = 0;
                         body["results"] = json::array();
                         res.set_content(body.dump(), "application/json");
                         return;
                     }
                     const auto& repos = it->second;
                     size_t start = (page - 1) * page_size_;
                     size_t end = std::min(repos.size(), start + page_size_);
                     body["count"] = count_cap_ > 0 ? count_cap_ : repos.size();
                     body["results"] = json::array();
                     for (size_t i = start; i < end; ++i) {
                         json item;
                         item["repo_name"] = repos[i];
                         body["results"].push_back(std::move(item));
                     }
                     if (end < repos.size()) {
                         body["next"] = "http://127.0.0.1:" + std::to_string(port_) +
                                        "/v2/search/repositories?query=" + query +
                                        "&page=" + std::to_string(page + 1);
                     } else {
                         body["next"] = nullptr;
                     }
                     res.set_content(body.dump(), "application/json");
                 });

    server_->Get(R"(/v2/repositories/(.+)/tags)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                     auto repo = req.matches[1].str();
                     auto it = tags_.find(repo);
                     if (it == tags_.end()) {
                         res.status = 404;
                         return;
                     }
                     size_t page = req.has_param("page") ? std::stoul(req.get_param_value("page")) : 1;
                     size_t start = (page - 1) * 100;
                     size_t end = std::min(it->second.size(), start + 100);
                     json body;
                     body["count"] = it->second.size();
                     body["results"] = json::array();
                     for (size_t i = start; i < end; ++i) {
                         json item;
                         item["name"] = it->second[i].first;
                         if (!it->second[i].second.empty())
                             item["last_updated"] = it->second[i].second;
                         body["results"].push_back(std::move(item));
                     }
                     body["next"] = nullptr;
                     res.set_content(body.dump(), "application/json");
                 });
}

MockHub::~MockHub() { stop(); }

void MockHub::add_search_result(const std::string& term, const std::vector<std::string>& repos) {
    search_[term] = repos;
}

void MockHub::set_search_count_cap(uint64_t reported_count) { count_cap_ = reported_count; }

void MockHub::add_tags(const std::string& repo,
                       const std::vector<std::pair<std::string, std::string>>& tag_and_updated) {
    tags_[repo] = tag_and_updated;
}

int MockHub::start() {
    start_server(*server_, thread_, port_);
    return port_;
}

void MockHub::stop() { stop_server(*server_, thread_); }

std::string MockHub::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

// ---------------------------------------------------------------------------

MockHtmlServer::MockHtmlServer() : server_(std::make_unique<httplib::Server>()) {
    auto page = [](const httplib::Request&, httplib::Response& res) {
        res.set_content("<html><body>hello</body></html>", "text/html");
    };
    server_->Get("/", page);
    server_->Get("/v2/", page);
}

MockHtmlServer::~MockHtmlServer() { stop(); }

int MockHtmlServer::start() {
    start_server(*server_, thread_, port_);
    return port_;
}

void MockHtmlServer::stop() { stop_server(*server_, thread_); }

// ---------------------------------------------------------------------------

struct MockTlsRegistry::Impl {
    std::string cert_path;
    std::string key_path;
    std::unique_ptr<httplib::SSLServer> server;
    std::thread thread;
};

MockTlsRegistry::MockTlsRegistry() : impl_(std::make_unique<Impl>()) {
    namespace fs = std::filesystem;
    auto key = generate_rsa(2048);
    CertSpec spec;
    spec.subject_cn = "mock-tls-registry";
    spec.not_before = 0;
    spec.not_after = 4102444800;  // 2100-01-01
    auto dir = fs::temp_directory_path() / ("imgscan-tls-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    impl_->cert_path = (dir / "cert.pem").string();
    impl_->key_path = (dir / "key.pem").string();
    write_file(impl_->cert_path, make_cert_pem(key, spec));
    write_file(impl_->key_path, key.pem_pkcs8());
    impl_->server =
        std::make_unique<httplib::SSLServer>(impl_->cert_path.c_str(), impl_->key_path.c_str());
    impl_->server->Get("/v2/", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Docker-Distribution-Api-Version", "registry/2.0");
        res.set_content("{}", "application/json");
    });
}

MockTlsRegistry::~MockTlsRegistry() { stop(); }

int MockTlsRegistry::start() {
    port_ = impl_->server->bind_to_any_port("127.0.0.1");
    impl_->thread = std::thread([this] { impl_->server->listen_after_bind(); });
    impl_->server->wait_until_ready();
    return port_;
}

void MockTlsRegistry::stop() {
    if (impl_->server) impl_->server->stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int find_free_port() {
    httplib::Server probe;
    int port = probe.bind_to_any_port("127.0.0.1");
    probe.stop();
    return port;
}

}  // namespace imgscan::testsupport
