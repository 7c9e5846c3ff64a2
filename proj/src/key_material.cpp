#include "imgscan/key_material.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>
#include <openssl/pkcs7.h>
#include <openssl/x509.h>

#include <cstring>
#include <sstream>
#include <vector>

#include "imgscan/common.hpp"
#include "imgscan/digest.hpp"

namespace imgscan {

namespace {

std::shared_ptr<void> wrap_pkey(EVP_PKEY* pkey) {
    return std::shared_ptr<void>(pkey, [](void* p) { EVP_PKEY_free(static_cast<EVP_PKEY*>(p)); });
}

struct PemBlock {
    std::string label;  // text between BEGIN and the closing dashes
    std::string body;   // canonical base64 (headers and whitespace stripped)
    bool has_encryption_headers = false;
    bool found = false;
};

PemBlock parse_pem_block(std::string_view text) {
    PemBlock block;
    std::istringstream in{std::string(text)};
    std::string line;
    bool inside = false;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (!inside) {
            if (t.rfind("-----", 0) == 0 && t.find("BEGIN") != std::string::npos) {
                inside = true;
                block.found = true;
                auto begin_pos = t.find("BEGIN");
                auto rest = t.substr(begin_pos + 5);
                auto dash = rest.find("-----");
                block.label = trim(dash == std::string::npos ? rest : rest.substr(0, dash));
            }
            continue;
        }
        if (t.rfind("-----", 0) == 0 && t.find("END") != std::string::npos) break;
        if (t.find(':') != std::string::npos) {  // RFC 1421 header (Proc-Type, DEK-Info, ...)
            if (contains_ci(t, "ENCRYPTED") || starts_with_ci(t, "dek-info"))
                block.has_encryption_headers = true;
            continue;
        }
        if (t.empty()) continue;
        if (t.front() == '=' && t.size() <= 5) continue;  // OpenPGP armor CRC
        for (char c : t) {
            if (!std::isspace(static_cast<unsigned char>(c))) block.body.push_back(c);
        }
    }
    return block;
}

// ---- openssh-key-v1 ------------------------------------------------------

struct SshReader {
    std::string_view data;
    size_t pos = 0;

    bool u32(uint32_t& out) {
        if (pos + 4 > data.size()) return false;
        out = static_cast<uint32_t>(static_cast<unsigned char>(data[pos])) << 24 |
              static_cast<uint32_t>(static_cast<unsigned char>(data[pos + 1])) << 16 |
              static_cast<uint32_t>(static_cast<unsigned char>(data[pos + 2])) << 8 |
              static_cast<uint32_t>(static_cast<unsigned char>(data[pos + 3]));
        pos += 4;
        return true;
    }

    bool str(std::string_view& out) {
        uint32_t len;
        if (!u32(len)) return false;
        if (pos + len > data.size()) return false;
        out = data.substr(pos, len);
        pos += len;
        return true;
    }
};

EVP_PKEY* rsa_from_components(std::string_view n, std::string_view e, std::string_view d,
                              std::string_view p, std::string_view q) {
    EVP_PKEY* result = nullptr;
    BIGNUM* bn_n = BN_bin2bn(reinterpret_cast<const unsigned char*>(n.data()),
                             static_cast<int>(n.size()), nullptr);
    BIGNUM* bn_e = BN_bin2bn(reinterpret_cast<const unsigned char*>(e.data()),
                             static_cast<int>(e.size()), nullptr);
    BIGNUM* bn_d = BN_bin2bn(reinterpret_cast<const unsigned char*>(d.data()),
                             static_cast<int>(d.size()), nullptr);
    BIGNUM* bn_p = BN_bin2bn(reinterpret_cast<const unsigned char*>(p.data()),
                             static_cast<int>(p.size()), nullptr);
    BIGNUM* bn_q = BN_bin2bn(reinterpret_cast<const unsigned char*>(q.data()),
                             static_cast<int>(q.size()), nullptr);
    OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
    if (bld && bn_n && bn_e && bn_d && bn_p && bn_q) {
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_N, bn_n);
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_E, bn_e);
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_D, bn_d);
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_FACTOR1, bn_p);
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_FACTOR2, bn_q);
        OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);
        EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new_from_name(nullptr, "RSA", nullptr);
        if (params && ctx && EVP_PKEY_fromdata_init(ctx) == 1) {
            EVP_PKEY* pkey = nullptr;
            if (EVP_PKEY_fromdata(ctx, &pkey, EVP_PKEY_KEYPAIR, params) == 1) result = pkey;
        }
        EVP_PKEY_CTX_free(ctx);
        OSSL_PARAM_free(params);
    }
    OSSL_PARAM_BLD_free(bld);
    BN_free(bn_n);
    BN_free(bn_e);
    BN_free(bn_d);
    BN_free(bn_p);
    BN_free(bn_q);
    return result;
}

KeyParseResult parse_openssh(const PemBlock& block) {
    KeyParseResult result;
    result.kind = "openssh";
    auto raw = base64_decode(block.body);
    constexpr std::string_view magic = "openssh-key-v1";
    if (raw.size() < magic.size() + 1 || std::string_view(raw).substr(0, magic.size()) != magic ||
        raw[magic.size()] != '\0') {
        result.detail = "bad openssh magic";
        return result;
    }
    SshReader reader{std::string_view(raw).substr(magic.size() + 1)};
    std::string_view cipher, kdf, kdfopts;
    uint32_t nkeys = 0;
    if (!reader.str(cipher) || !reader.str(kdf) || !reader.str(kdfopts) || !reader.u32(nkeys) ||
        nkeys == 0) {
        result.detail = "truncated openssh structure";
        return result;
    }
    for (uint32_t i = 0; i < nkeys; ++i) {
        std::string_view pub;
        if (!reader.str(pub)) {
            result.detail = "truncated openssh public section";
            return result;
        }
    }
    std::string_view priv;
    if (!reader.str(priv)) {
        result.detail = "truncated openssh private section";
        return result;
    }
    result.parsable = true;
    if (cipher != "none") {
        result.encrypted = true;
        result.detail = "openssh cipher " + std::string(cipher);
        return result;
    }
    SshReader pr{priv};
    uint32_t check1 = 0, check2 = 0;
    std::string_view keytype;
    if (!pr.u32(check1) || !pr.u32(check2) || check1 != check2 || !pr.str(keytype)) {
        result.parsable = false;
        result.detail = "openssh check bytes mismatch";
        return result;
    }
    result.detail = std::string(keytype);
    if (keytype == "ssh-ed25519") {
        std::string_view pub, privpub;
        if (pr.str(pub) && pr.str(privpub) && privpub.size() == 64) {
            EVP_PKEY* pkey = EVP_PKEY_new_raw_private_key(
                EVP_PKEY_ED25519, nullptr, reinterpret_cast<const unsigned char*>(privpub.data()),
                32);
            if (pkey) result.pkey = wrap_pkey(pkey);
        }
    } else if (keytype == "ssh-rsa") {
        std::string_view n, e, d, iqmp, p, q;
        if (pr.str(n) && pr.str(e) && pr.str(d) && pr.str(iqmp) && pr.str(p) && pr.str(q)) {
            if (EVP_PKEY* pkey = rsa_from_components(n, e, d, p, q)) result.pkey = wrap_pkey(pkey);
        }
    }
    // Other key types stay parsable without a derived public key.
    return result;
}

KeyParseResult parse_pgp(const PemBlock& block) {
    KeyParseResult result;
    result.kind = "pgp";
    auto raw = base64_decode(block.body);
    if (raw.size() < 4) {
        result.detail = "armor too short";
        return result;
    }
    unsigned char first = static_cast<unsigned char>(raw[0]);
    if (!(first & 0x80)) {
        result.detail = "not an OpenPGP packet";
        return result;
    }
    int tag = first & 0x40 ? first & 0x3f : (first >> 2) & 0x0f;
    if (tag != 5 && tag != 7) {  // secret key / secret subkey
        result.detail = "unexpected OpenPGP packet tag " + std::to_string(tag);
        return result;
    }
    result.parsable = true;
    // Fingerprint derivation for PGP material is not supported; treat as
    // unverifiable.
    result.encrypted = true;
    result.detail = "pgp secret key packet";
    return result;
}

KeyParseResult parse_xml_key(std::string_view text) {
    KeyParseResult result;
    result.kind = "xml";
    if (contains_ci(text, "<RSAKeyValue>") || contains_ci(text, "<DSAKeyValue>")) {
        bool ok = contains_ci(text, "<Modulus>") && contains_ci(text, "</Modulus>") &&
                  contains_ci(text, "<Exponent>") && contains_ci(text, "</Exponent>");
        result.parsable = ok;
        result.encrypted = ok;  // no DER form; cannot derive a fingerprint
        result.detail = ok ? "xml rsa/dsa key" : "missing modulus/exponent elements";
        return result;
    }
    if (contains_ci(text, "<ECKeyValue>")) {
        bool ok = contains_ci(text, "Curve");
        result.parsable = ok;
        result.encrypted = ok;
        result.detail = ok ? "xml ec key" : "missing curve element";
        return result;
    }
    result.detail = "unknown xml key element";
    return result;
}

KeyParseResult parse_der_private_key(const std::string& der, const char* kind) {
    KeyParseResult result;
    result.kind = kind;
    if (der.empty()) {
        result.detail = "empty base64 body";
        return result;
    }
    const auto* p = reinterpret_cast<const unsigned char*>(der.data());
    EVP_PKEY* pkey = d2i_AutoPrivateKey(nullptr, &p, static_cast<long>(der.size()));
    if (!pkey) {
        result.detail = "DER structure invalid";
        return result;
    }
    result.parsable = true;
    result.pkey = wrap_pkey(pkey);
    return result;
}

}  // namespace

std::string canonical_key_body(std::string_view matched_text) {
    auto block = parse_pem_block(matched_text);
    if (block.found && !block.body.empty()) return block.body;
    std::string out;
    for (char c : matched_text) {
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    return out;
}

KeyParseResult parse_private_key_material(std::string_view text) {
    if (contains_ci(text, "<RSAKeyValue>") || contains_ci(text, "<DSAKeyValue>") ||
        contains_ci(text, "<ECKeyValue>"))
        return parse_xml_key(text);

    auto block = parse_pem_block(text);
    if (!block.found) {
        KeyParseResult result;
        result.detail = "no PEM block";
        return result;
    }
    auto label = to_lower(block.label);

    if (label.find("openssh") != std::string::npos) return parse_openssh(block);
    if (label.find("pgp") != std::string::npos) return parse_pgp(block);

    if (label.find("pkcs7") != std::string::npos) {
        KeyParseResult result;
        result.kind = "pkcs7";
        auto der = base64_decode(block.body);
        const auto* p = reinterpret_cast<const unsigned char*>(der.data());
        PKCS7* p7 = d2i_PKCS7(nullptr, &p, static_cast<long>(der.size()));
        if (p7) {
            PKCS7_free(p7);
            result.parsable = true;
            result.encrypted = true;  // container format, nothing to fingerprint
            result.detail = "pkcs7 container";
        } else {
            result.detail = "pkcs7 structure invalid";
        }
        return result;
    }

    if (label.find("encrypted private key") != std::string::npos) {
        KeyParseResult result;
        result.kind = "pkcs8";
        auto der = base64_decode(block.body);
        const auto* p = reinterpret_cast<const unsigned char*>(der.data());
        X509_SIG* sig = d2i_X509_SIG(nullptr, &p, static_cast<long>(der.size()));
        if (sig) {
            X509_SIG_free(sig);
            result.parsable = true;
            result.encrypted = true;
            result.detail = "encrypted pkcs8";
        } else {
            result.detail = "encrypted pkcs8 structure invalid";
        }
        return result;
    }

    if (block.has_encryption_headers) {
        // PEM-level encryption (Proc-Type / DEK-Info): the payload is
        // ciphertext, so structural DER parsing cannot apply.
        KeyParseResult result;
        result.kind = label.find("rsa") != std::string::npos  ? "pkcs1"
                      : label.find("ec") != std::string::npos ? "sec1"
                                                              : "pem";
        auto der = base64_decode(block.body);
        result.parsable = der.size() >= 64;
        result.encrypted = result.parsable;
        result.detail = result.parsable ? "pem-level encrypted key" : "ciphertext too short";
        return result;
    }

    const char* kind = label.find("rsa") != std::string::npos   ? "pkcs1"
                       : label.find("ec") != std::string::npos  ? "sec1"
                       : label.find("dsa") != std::string::npos ? "dsa"
                                                                : "pkcs8";
    return parse_der_private_key(base64_decode(block.body), kind);
}

namespace {

void put_ssh_string(std::string& out, std::string_view s) {
    uint32_t len = static_cast<uint32_t>(s.size());
    out.push_back(static_cast<char>(len >> 24 & 0xff));
    out.push_back(static_cast<char>(len >> 16 & 0xff));
    out.push_back(static_cast<char>(len >> 8 & 0xff));
    out.push_back(static_cast<char>(len & 0xff));
    out.append(s);
}

std::string bn_to_mpint(const BIGNUM* bn) {
    int n = BN_num_bytes(bn);
    std::string bytes(static_cast<size_t>(n), '\0');
    BN_bn2bin(bn, reinterpret_cast<unsigned char*>(bytes.data()));
    // mpint: prepend 0x00 when the high bit is set
    if (!bytes.empty() && static_cast<unsigned char>(bytes[0]) & 0x80)
        bytes.insert(bytes.begin(), '\0');
    return bytes;
}

std::string ssh_wire_public(EVP_PKEY* pkey, std::string& algorithm) {
    std::string blob;
    int base_id = EVP_PKEY_get_base_id(pkey);
    if (base_id == EVP_PKEY_RSA) {
        algorithm = "rsa";
        BIGNUM *n = nullptr, *e = nullptr;
        EVP_PKEY_get_bn_param(pkey, OSSL_PKEY_PARAM_RSA_N, &n);
        EVP_PKEY_get_bn_param(pkey, OSSL_PKEY_PARAM_RSA_E, &e);
        if (!n || !e) throw ScanError(ErrorKind::Unverifiable, "rsa components unavailable");
        put_ssh_string(blob, "ssh-rsa");
        put_ssh_string(blob, bn_to_mpint(e));
        put_ssh_string(blob, bn_to_mpint(n));
        BN_free(n);
        BN_free(e);
        return blob;
    }
    if (base_id == EVP_PKEY_ED25519) {
        algorithm = "ed25519";
        unsigned char raw[64];
        size_t len = sizeof raw;
        if (EVP_PKEY_get_raw_public_key(pkey, raw, &len) != 1)
            throw ScanError(ErrorKind::Unverifiable, "ed25519 public unavailable");
        put_ssh_string(blob, "ssh-ed25519");
        put_ssh_string(blob, std::string_view(reinterpret_cast<char*>(raw), len));
        return blob;
    }
    if (base_id == EVP_PKEY_EC) {
        char group[64] = {0};
        size_t glen = 0;
        if (EVP_PKEY_get_utf8_string_param(pkey, OSSL_PKEY_PARAM_GROUP_NAME, group, sizeof group,
                                           &glen) != 1)
            throw ScanError(ErrorKind::Unverifiable, "ec group unavailable");
        std::string curve = std::string(group) == "prime256v1" ? "nistp256"
                            : std::string(group) == "secp384r1" ? "nistp384"
                            : std::string(group) == "secp521r1" ? "nistp521"
                                                                : "";
        if (curve.empty()) throw ScanError(ErrorKind::Unverifiable, "uncommon ec curve");
        algorithm = "ecdsa-" + curve;
        unsigned char point[256];
        size_t plen = 0;
        if (EVP_PKEY_get_octet_string_param(pkey, OSSL_PKEY_PARAM_ENCODED_PUBLIC_KEY, point,
                                            sizeof point, &plen) != 1)
            throw ScanError(ErrorKind::Unverifiable, "ec point unavailable");
        put_ssh_string(blob, "ecdsa-sha2-" + curve);
        put_ssh_string(blob, curve);
        put_ssh_string(blob, std::string_view(reinterpret_cast<char*>(point), plen));
        return blob;
    }
    if (base_id == EVP_PKEY_DSA) {
        algorithm = "dsa";
        BIGNUM *p = nullptr, *q = nullptr, *g = nullptr, *y = nullptr;
        EVP_PKEY_get_bn_param(pkey, OSSL_PKEY_PARAM_FFC_P, &p);
        EVP_PKEY_get_bn_param(pkey, OSSL_PKEY_PARAM_FFC_Q, &q);
        EVP_PKEY_get_bn_param(pkey, OSSL_PKEY_PARAM_FFC_G, &g);
        EVP_PKEY_get_bn_param(pkey, OSSL_PKEY_PARAM_PUB_KEY, &y);
        if (!p || !q || !g || !y) throw ScanError(ErrorKind::Unverifiable, "dsa components unavailable");
        put_ssh_string(blob, "ssh-dss");
        put_ssh_string(blob, bn_to_mpint(p));
        put_ssh_string(blob, bn_to_mpint(q));
        put_ssh_string(blob, bn_to_mpint(g));
        put_ssh_string(blob, bn_to_mpint(y));
        BN_free(p);
        BN_free(q);
        BN_free(g);
        BN_free(y);
        return blob;
    }
    throw ScanError(ErrorKind::Unverifiable, "unsupported key algorithm");
}

}  // namespace

KeyFingerprint fingerprint_parsed_key(const KeyParseResult& key) {
    if (!key.parsable || key.encrypted || !key.pkey)
        throw ScanError(ErrorKind::Unverifiable, "no derivable public key (" + key.detail + ")");
    auto* pkey = static_cast<EVP_PKEY*>(key.pkey.get());

    unsigned char* der = nullptr;
    int der_len = i2d_PUBKEY(pkey, &der);
    if (der_len <= 0) throw ScanError(ErrorKind::Unverifiable, "SPKI encoding failed");
    std::string spki(reinterpret_cast<char*>(der), static_cast<size_t>(der_len));
    OPENSSL_free(der);

    KeyFingerprint fp;
    fp.spki_sha256 = sha256_raw(spki);
    std::string algorithm;
    fp.ssh_sha256 = sha256_raw(ssh_wire_public(pkey, algorithm));
    fp.key_algorithm = algorithm;
    return fp;
}

}  // namespace imgscan
