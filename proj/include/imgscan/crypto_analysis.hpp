#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "imgscan/key_material.hpp"

namespace imgscan {

enum class TrustClass { SelfSigned, PrivateCa, PublicCa, Unclassified };
const char* trust_class_name(TrustClass t);

struct CertificateRecord {
    std::string subject_dn;         // raw RFC 2253 form
    std::string issuer_dn;
    std::string subject_normalized;
    std::string issuer_normalized;
    int64_t not_before = 0;  // unix seconds
    int64_t not_after = 0;
    std::string spki_fingerprint;  // 32 raw bytes (sha256 over DER SPKI)
    std::set<std::string> key_usages;
    std::set<std::string> extended_usages;
    bool usages_unconstrained = false;  // no usage extensions present
    TrustClass trust_class = TrustClass::Unclassified;
    bool parse_ok = false;
    std::string parse_detail;

    // Provenance
    std::string image;
    std::string layer_digest;
    std::string path;
    std::optional<int64_t> layer_created;

    std::shared_ptr<void> x509;  // X509*, kept for chain building
};

// Parses a PEM certificate match. Parse failures come back with
// parse_ok=false and trust_class Unclassified rather than throwing.
CertificateRecord parse_certificate(std::string_view pem_text);

// Named root stores (android, ios-macos, nss, openjdk, oraclejdk, windows):
// a directory of PEM bundle files, one per store.
class RootStoreBundle {
  public:
    static RootStoreBundle load_dir(const std::string& dir);
    void add_store(const std::string& name, const std::string& pem_bundle);

    bool empty() const { return roots_.empty(); }
    size_t size() const { return roots_.size(); }
    const std::vector<CertificateRecord>& roots() const { return roots_; }
    std::vector<std::string> store_names() const;

  private:
    std::vector<CertificateRecord> roots_;
    std::vector<std::pair<std::string, size_t>> stores_;  // name -> count
};

// Self-signed iff normalized subject == issuer or the certificate verifies
// its own signature; public-CA iff a signature chain through the corpus
// pool terminates at a bundled root (time is deliberately not checked
// here); private-CA otherwise.
TrustClass classify_trust(const CertificateRecord& record, const RootStoreBundle& bundle,
                          const std::vector<CertificateRecord>& pool);

enum class ValidityInstant { DownloadTime, LayerCreated };

// not_before <= t <= not_after; nullopt when the layer timestamp is unknown.
std::optional<bool> check_validity(const CertificateRecord& record, ValidityInstant at,
                                   int64_t download_time);

struct HostObservation {
    std::string address;
    uint16_t port = 0;
    std::string protocol;
    std::string fingerprint;  // 32 raw bytes
    enum class Kind { TlsSpki, SshHostKey } kind = Kind::TlsSpki;
    std::string scan_date;  // YYYY-MM-DD
};

struct ObservationLoad {
    std::vector<HostObservation> rows;
    uint64_t skipped_malformed = 0;
};

// Delimited text with a required header row:
// address,port,protocol,kind,fingerprint_hex,scan_date
ObservationLoad load_observations(const std::string& path);
ObservationLoad parse_observations(std::string_view content, const std::string& origin);

struct CorrelationCell {
    uint64_t unique_hosts = 0;
    uint64_t unique_keys = 0;
};

// Exact join of key fingerprints against host observations, respecting the
// fingerprint kind, bucketed by (protocol, scan_date).
std::map<std::pair<std::string, std::string>, CorrelationCell> correlate_hosts(
    const std::vector<KeyFingerprint>& fingerprints,
    const std::vector<HostObservation>& observations);

// Certificates whose SPKI fingerprint matches a leaked private key: the
// compromised-certificate set.
std::vector<const CertificateRecord*> link_cert_key(
    const std::vector<CertificateRecord>& certificates,
    const std::vector<KeyFingerprint>& fingerprints);

int64_t parse_rfc3339(const std::string& timestamp);  // -1 on failure

}  // namespace imgscan
