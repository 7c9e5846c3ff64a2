#include "imgscan/crypto_analysis.hpp"

#include <openssl/asn1.h>
#include <openssl/bio.h>
#include <openssl/evp.h>
#include <openssl/obj_mac.h>
#include <openssl/pem.h>
#include <openssl/x509.h>
#include <openssl/x509v3.h>

#include <algorithm>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <sstream>

#include "imgscan/common.hpp"
#include "imgscan/digest.hpp"

namespace imgscan {

namespace fs = std::filesystem;

const char* trust_class_name(TrustClass t) {
    switch (t) {
    case TrustClass::SelfSigned: return "self-signed";
    case TrustClass::PrivateCa: return "private-ca";
    case TrustClass::PublicCa: return "public-ca";
    case TrustClass::Unclassified: return "unclassified";
    }
    return "?";
}

namespace {

std::shared_ptr<void> wrap_x509(X509* cert) {
    return std::shared_ptr<void>(cert, [](void* p) { X509_free(static_cast<X509*>(p)); });
}

X509* as_x509(const CertificateRecord& record) {
    return static_cast<X509*>(record.x509.get());
}

std::string name_oneline(X509_NAME* name) {
    BIO* bio = BIO_new(BIO_s_mem());
    X509_NAME_print_ex(bio, name, 0, XN_FLAG_RFC2253);
    char* data = nullptr;
    long len = BIO_get_mem_data(bio, &data);
    std::string out(data, static_cast<size_t>(len));
    BIO_free(bio);
    return out;
}

// DN comparison tolerant of case and insignificant whitespace.
std::string normalize_dn(const std::string& dn) {
    std::string out;
    out.reserve(dn.size());
    for (char c : dn) {
        if (c == ' ' || c == '\t') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

int64_t asn1_time_to_unix(const ASN1_TIME* t) {
    if (!t) return 0;
    struct tm tm_value;
    std::memset(&tm_value, 0, sizeof tm_value);
    if (ASN1_TIME_to_tm(t, &tm_value) != 1) return 0;
    return static_cast<int64_t>(timegm(&tm_value));
}

std::string spki_sha256_of(X509* cert) {
    X509_PUBKEY* pub = X509_get_X509_PUBKEY(cert);
    unsigned char* der = nullptr;
    int len = i2d_X509_PUBKEY(pub, &der);
    if (len <= 0) return {};
    std::string out = sha256_raw(std::string_view(reinterpret_cast<char*>(der),
                                                  static_cast<size_t>(len)));
    OPENSSL_free(der);
    return out;
}

std::string cert_sha256(X509* cert) {
    unsigned char* der = nullptr;
    int len = i2d_X509(cert, &der);
    if (len <= 0) return {};
    std::string out = sha256_raw(std::string_view(reinterpret_cast<char*>(der),
                                                  static_cast<size_t>(len)));
    OPENSSL_free(der);
    return out;
}

void extract_usages_into(CertificateRecord& record, X509* cert) {
    static const std::pair<uint32_t, const char*> usage_bits[] = {
        {KU_DIGITAL_SIGNATURE, "digitalSignature"}, {KU_NON_REPUDIATION, "nonRepudiation"},
        {KU_KEY_ENCIPHERMENT, "keyEncipherment"},   {KU_DATA_ENCIPHERMENT, "dataEncipherment"},
        {KU_KEY_AGREEMENT, "keyAgreement"},         {KU_KEY_CERT_SIGN, "keyCertSign"},
        {KU_CRL_SIGN, "cRLSign"},                   {KU_ENCIPHER_ONLY, "encipherOnly"},
        {KU_DECIPHER_ONLY, "decipherOnly"},
    };
    bool have_ku = X509_get_extension_flags(cert) & EXFLAG_KUSAGE;
    bool have_eku = X509_get_extension_flags(cert) & EXFLAG_XKUSAGE;
    if (have_ku) {
        uint32_t usage = X509_get_key_usage(cert);
        for (const auto& [bit, label] : usage_bits) {
            if (usage & bit) record.key_usages.insert(label);
        }
    }
    if (have_eku) {
        auto* eku = static_cast<EXTENDED_KEY_USAGE*>(
            X509_get_ext_d2i(cert, NID_ext_key_usage, nullptr, nullptr));
        if (eku) {
            for (int i = 0; i < sk_ASN1_OBJECT_num(eku); ++i) {
                ASN1_OBJECT* obj = sk_ASN1_OBJECT_value(eku, i);
                int nid = OBJ_obj2nid(obj);
                switch (nid) {
                case NID_server_auth: record.extended_usages.insert("serverAuth"); break;
                case NID_client_auth: record.extended_usages.insert("clientAuth"); break;
                case NID_code_sign: record.extended_usages.insert("codeSigning"); break;
                case NID_email_protect: record.extended_usages.insert("emailProtection"); break;
                case NID_time_stamp: record.extended_usages.insert("timeStamping"); break;
                case NID_OCSP_sign: record.extended_usages.insert("OCSPSigning"); break;
                default: {
                    char buf[80];
                    OBJ_obj2txt(buf, sizeof buf, obj, 1);
                    record.extended_usages.insert(buf);
                }
                }
            }
            sk_ASN1_OBJECT_pop_free(eku, ASN1_OBJECT_free);
        }
    }
    record.usages_unconstrained = !have_ku && !have_eku;
}

}  // namespace

CertificateRecord parse_certificate(std::string_view pem_text) {
    CertificateRecord record;
    BIO* bio = BIO_new_mem_buf(pem_text.data(), static_cast<int>(pem_text.size()));
    X509* cert = PEM_read_bio_X509(bio, nullptr, nullptr, nullptr);
    BIO_free(bio);
    if (!cert) {
        record.parse_detail = "PEM/X509 parse failed";
        return record;
    }
    record.x509 = wrap_x509(cert);
    record.parse_ok = true;
    record.subject_dn = name_oneline(X509_get_subject_name(cert));
    record.issuer_dn = name_oneline(X509_get_issuer_name(cert));
    record.subject_normalized = normalize_dn(record.subject_dn);
    record.issuer_normalized = normalize_dn(record.issuer_dn);
    record.not_before = asn1_time_to_unix(X509_get0_notBefore(cert));
    record.not_after = asn1_time_to_unix(X509_get0_notAfter(cert));
    record.spki_fingerprint = spki_sha256_of(cert);
    extract_usages_into(record, cert);
    return record;
}

RootStoreBundle RootStoreBundle::load_dir(const std::string& dir) {
    RootStoreBundle bundle;
    if (!fs::exists(dir)) return bundle;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        bundle.add_store(file.stem().string(), read_file(file.string()));
    }
    return bundle;
}

void RootStoreBundle::add_store(const std::string& name, const std::string& pem_bundle) {
    size_t added = 0;
    BIO* bio = BIO_new_mem_buf(pem_bundle.data(), static_cast<int>(pem_bundle.size()));
    while (X509* cert = PEM_read_bio_X509(bio, nullptr, nullptr, nullptr)) {
        CertificateRecord record;
        record.x509 = wrap_x509(cert);
        record.parse_ok = true;
        record.subject_dn = name_oneline(X509_get_subject_name(cert));
        record.subject_normalized = normalize_dn(record.subject_dn);
        record.issuer_normalized =
            normalize_dn(name_oneline(X509_get_issuer_name(cert)));
        record.spki_fingerprint = spki_sha256_of(cert);
        roots_.push_back(std::move(record));
        ++added;
    }
    BIO_free(bio);
    stores_.emplace_back(name, added);
}

std::vector<std::string> RootStoreBundle::store_names() const {
    std::vector<std::string> names;
    for (const auto& [name, count] : stores_) names.push_back(name);
    return names;
}

namespace {

bool signature_verifies(X509* subject, X509* issuer) {
    EVP_PKEY* key = X509_get_pubkey(issuer);
    if (!key) return false;
    bool ok = X509_verify(subject, key) == 1;
    EVP_PKEY_free(key);
    return ok;
}

}  // namespace

TrustClass classify_trust(const CertificateRecord& record, const RootStoreBundle& bundle,
                          const std::vector<CertificateRecord>& pool) {
    X509* cert = as_x509(record);
    if (!cert) return TrustClass::Unclassified;

    if (record.subject_normalized == record.issuer_normalized ||
        signature_verifies(cert, cert))
        return TrustClass::SelfSigned;

    // Signature-only chain walk (validity is measured separately at two
    // instants); visited set guards against cross-signed loops.
    std::set<std::string> visited;
    const CertificateRecord* current = &record;
    visited.insert(cert_sha256(cert));
    for (int depth = 0; depth < 8; ++depth) {
        X509* cur = as_x509(*current);
        // A bundled root that signs the current certificate settles it.
        for (const auto& root : bundle.roots()) {
            if (root.subject_normalized != current->issuer_normalized) continue;
            if (signature_verifies(cur, as_x509(root))) return TrustClass::PublicCa;
        }
        const CertificateRecord* next = nullptr;
        for (const auto& candidate : pool) {
            if (!candidate.parse_ok) continue;
            if (candidate.subject_normalized != current->issuer_normalized) continue;
            X509* cand = as_x509(candidate);
            if (!cand || !signature_verifies(cur, cand)) continue;
            auto id = cert_sha256(cand);
            if (visited.count(id)) continue;  // loop guard
            visited.insert(id);
            next = &candidate;
            break;
        }
        if (!next) return TrustClass::PrivateCa;
        if (next->subject_normalized == next->issuer_normalized) {
            // Reached a self-signed anchor not present in the bundle.
            return TrustClass::PrivateCa;
        }
        current = next;
    }
    return TrustClass::PrivateCa;
}

std::optional<bool> check_validity(const CertificateRecord& record, ValidityInstant at,
                                   int64_t download_time) {
    int64_t t;
    if (at == ValidityInstant::DownloadTime) {
        t = download_time;
    } else {
        if (!record.layer_created) return std::nullopt;
        t = *record.layer_created;
    }
    return record.not_before <= t && t <= record.not_after;
}

ObservationLoad parse_observations(std::string_view content, const std::string& origin) {
    ObservationLoad load;
    std::istringstream in{std::string(content)};
    std::string line;
    if (!std::getline(in, line))
        throw ScanError(ErrorKind::LoadError, origin + ": empty observation file");
    auto header = split(trim(line), ',');
    const std::vector<std::string> expected = {"address", "port",            "protocol",
                                               "kind",    "fingerprint_hex", "scan_date"};
    if (std::vector<std::string>(header.begin(), header.end()) != expected)
        throw ScanError(ErrorKind::LoadError, origin + ": unexpected header row");

    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty()) continue;
        auto cols = split(t, ',');
        if (cols.size() != 6) {
            ++load.skipped_malformed;
            continue;
        }
        HostObservation row;
        row.address = cols[0];
        try {
            row.port = static_cast<uint16_t>(std::stoul(cols[1]));
        } catch (...) {
            ++load.skipped_malformed;
            continue;
        }
        row.protocol = cols[2];
        if (cols[3] == "tls-spki")
            row.kind = HostObservation::Kind::TlsSpki;
        else if (cols[3] == "ssh-hostkey")
            row.kind = HostObservation::Kind::SshHostKey;
        else {
            ++load.skipped_malformed;
            continue;
        }
        auto raw = from_hex(cols[4]);
        if (!raw || raw->size() != 32) {
            ++load.skipped_malformed;
            continue;
        }
        row.fingerprint = *raw;
        row.scan_date = cols[5];
        load.rows.push_back(std::move(row));
    }
    return load;
}

ObservationLoad load_observations(const std::string& path) {
    return parse_observations(read_file(path), path);
}

std::map<std::pair<std::string, std::string>, CorrelationCell> correlate_hosts(
    const std::vector<KeyFingerprint>& fingerprints,
    const std::vector<HostObservation>& observations) {
    std::set<std::string> spki, ssh;
    for (const auto& fp : fingerprints) {
        if (!fp.spki_sha256.empty()) spki.insert(fp.spki_sha256);
        if (!fp.ssh_sha256.empty()) ssh.insert(fp.ssh_sha256);
    }

    std::map<std::pair<std::string, std::string>, std::set<std::string>> hosts;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> keys;
    for (const auto& row : observations) {
        const auto& wanted = row.kind == HostObservation::Kind::TlsSpki ? spki : ssh;
        if (!wanted.count(row.fingerprint)) continue;
        auto bucket = std::make_pair(row.protocol, row.scan_date);
        hosts[bucket].insert(row.address);
        keys[bucket].insert(row.fingerprint);
    }

    std::map<std::pair<std::string, std::string>, CorrelationCell> out;
    for (const auto& [bucket, addresses] : hosts) {
        out[bucket].unique_hosts = addresses.size();
        out[bucket].unique_keys = keys[bucket].size();
    }
    return out;
}

std::vector<const CertificateRecord*> link_cert_key(
    const std::vector<CertificateRecord>& certificates,
    const std::vector<KeyFingerprint>& fingerprints) {
    std::set<std::string> spki;
    for (const auto& fp : fingerprints) spki.insert(fp.spki_sha256);
    std::vector<const CertificateRecord*> out;
    for (const auto& cert : certificates) {
        if (cert.parse_ok && spki.count(cert.spki_fingerprint)) out.push_back(&cert);
    }
    return out;
}

int64_t parse_rfc3339(const std::string& timestamp) {
    // Accepts "YYYY-MM-DDTHH:MM:SS" with optional fraction and 'Z'/offset.
    if (timestamp.size() < 19) return -1;
    struct tm tm_value;
    std::memset(&tm_value, 0, sizeof tm_value);
    if (sscanf(timestamp.c_str(), "%d-%d-%dT%d:%d:%d", &tm_value.tm_year, &tm_value.tm_mon,
               &tm_value.tm_mday, &tm_value.tm_hour, &tm_value.tm_min, &tm_value.tm_sec) != 6)
        return -1;
    tm_value.tm_year -= 1900;
    tm_value.tm_mon -= 1;
    int64_t base = static_cast<int64_t>(timegm(&tm_value));
    // Apply a trailing +hh:mm / -hh:mm offset when present.
    auto rest = timestamp.substr(19);
    size_t sign_pos = rest.find_first_of("+-");
    if (sign_pos != std::string::npos && rest.size() >= sign_pos + 6) {
        int oh = 0, om = 0;
        if (sscanf(rest.c_str() + sign_pos + 1, "%2d:%2d", &oh, &om) == 2) {
            int64_t offset = oh * 3600 + om * 60;
            base += rest[sign_pos] == '+' ? -offset : offset;
        }
    }
    return base;
}

}  // namespace imgscan
