#include "support/pki_fixtures.hpp"

#include <openssl/asn1.h>
#include <openssl/bio.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>
#include <openssl/x509v3.h>

#include <stdexcept>

#include "imgscan/common.hpp"

namespace imgscan::testsupport {

namespace {

std::shared_ptr<void> wrap(EVP_PKEY* pkey) {
    if (!pkey) throw std::runtime_error("key generation failed");
    return std::shared_ptr<void>(pkey, [](void* p) { EVP_PKEY_free(static_cast<EVP_PKEY*>(p)); });
}

EVP_PKEY* raw(const TestKey& key) { return static_cast<EVP_PKEY*>(key.pkey.get()); }

std::string bio_to_string(BIO* bio) {
    char* data = nullptr;
    long len = BIO_get_mem_data(bio, &data);
    std::string out(data, static_cast<size_t>(len));
    BIO_free(bio);
    return out;
}

}  // namespace

TestKey generate_rsa(int bits) {
    return {wrap(EVP_PKEY_Q_keygen(nullptr, nullptr, "RSA", static_cast<size_t>(bits)))};
}

TestKey generate_ec_p256() {
    return {wrap(EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256"))};
}

TestKey generate_ed25519() {
    return {wrap(EVP_PKEY_Q_keygen(nullptr, nullptr, "ED25519"))};
}

std::string TestKey::pem_pkcs8() const {
    BIO* bio = BIO_new(BIO_s_mem());
    PEM_write_bio_PKCS8PrivateKey(bio, raw(*this), nullptr, nullptr, 0, nullptr, nullptr);
    return bio_to_string(bio);
}

std::string TestKey::pem_traditional() const {
    BIO* bio = BIO_new(BIO_s_mem());
    PEM_write_bio_PrivateKey_traditional(bio, raw(*this), nullptr, nullptr, 0, nullptr, nullptr);
    return bio_to_string(bio);
}

std::string TestKey::pem_public() const {
    BIO* bio = BIO_new(BIO_s_mem());
    PEM_write_bio_PUBKEY(bio, raw(*this));
    return bio_to_string(bio);
}

std::string TestKey::pem_pkcs8_encrypted(const std::string& passphrase) const {
    BIO* bio = BIO_new(BIO_s_mem());
    PEM_write_bio_PKCS8PrivateKey(bio, raw(*this), EVP_aes_256_cbc(), passphrase.c_str(),
                                  static_cast<int>(passphrase.size()), nullptr, nullptr);
    return bio_to_string(bio);
}

namespace {

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v >> 24 & 0xff));
    out.push_back(static_cast<char>(v >> 16 & 0xff));
    out.push_back(static_cast<char>(v >> 8 & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

void put_string(std::string& out, std::string_view s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.append(s);
}

std::string wrap_pem(const std::string& label, const std::string& der_or_blob) {
    auto b64 = imgscan::base64_encode(der_or_blob);
    std::string out = "-----BEGIN " + label + "-----\n";
    for (size_t i = 0; i < b64.size(); i += 70) {
        out += b64.substr(i, 70);
        out += "\n";
    }
    out += "-----END " + label + "-----\n";
    return out;
}

}  // namespace

std::string openssh_private_pem(const TestKey& key, const std::string& comment) {
    unsigned char pub[32], priv[32];
    size_t publen = sizeof pub, privlen = sizeof priv;
    if (EVP_PKEY_get_raw_public_key(raw(key), pub, &publen) != 1 ||
        EVP_PKEY_get_raw_private_key(raw(key), priv, &privlen) != 1)
        throw std::runtime_error("openssh fixture needs an ed25519 key");

    std::string pub_blob;
    put_string(pub_blob, "ssh-ed25519");
    put_string(pub_blob, std::string_view(reinterpret_cast<char*>(pub), publen));

    std::string secret;
    secret.append(std::string_view(reinterpret_cast<char*>(priv), privlen));
    secret.append(std::string_view(reinterpret_cast<char*>(pub), publen));

    std::string private_block;
    put_u32(private_block, 0x01020304);  // checkint pair
    put_u32(private_block, 0x01020304);
    put_string(private_block, "ssh-ed25519");
    put_string(private_block, std::string_view(reinterpret_cast<char*>(pub), publen));
    put_string(private_block, secret);
    put_string(private_block, comment);
    uint8_t pad = 1;
    while (private_block.size() % 8 != 0) private_block.push_back(static_cast<char>(pad++));

    std::string blob = "openssh-key-v1";
    blob.push_back('\0');
    put_string(blob, "none");  // cipher
    put_string(blob, "none");  // kdf
    put_string(blob, "");      // kdf options
    put_u32(blob, 1);          // number of keys
    put_string(blob, pub_blob);
    put_string(blob, private_block);

    return wrap_pem("OPENSSH PRIVATE KEY", blob);
}

std::string make_cert_pem(const TestKey& subject_key, const CertSpec& spec) {
    X509* cert = X509_new();
    X509_set_version(cert, 2);
    ASN1_INTEGER_set(X509_get_serialNumber(cert), static_cast<long>(std::rand() % 100000 + 1));

    X509_NAME* subject = X509_NAME_new();
    X509_NAME_add_entry_by_txt(subject, "CN", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>(spec.subject_cn.c_str()),
                               -1, -1, 0);
    X509_set_subject_name(cert, subject);

    std::string issuer_cn = spec.issuer_key ? spec.issuer_cn : spec.subject_cn;
    X509_NAME* issuer = X509_NAME_new();
    X509_NAME_add_entry_by_txt(issuer, "CN", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>(issuer_cn.c_str()), -1, -1,
                               0);
    X509_set_issuer_name(cert, issuer);

    ASN1_TIME_set(X509_getm_notBefore(cert), static_cast<time_t>(spec.not_before));
    ASN1_TIME_set(X509_getm_notAfter(cert), static_cast<time_t>(spec.not_after));
    X509_set_pubkey(cert, raw(subject_key));

    X509V3_CTX ctx;
    X509V3_set_ctx_nodb(&ctx);
    X509V3_set_ctx(&ctx, cert, cert, nullptr, nullptr, 0);
    auto add_ext = [&](int nid, const char* value) {
        X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
        if (ext) {
            X509_add_ext(cert, ext, -1);
            X509_EXTENSION_free(ext);
        }
    };
    add_ext(NID_basic_constraints, spec.is_ca ? "critical,CA:TRUE" : "critical,CA:FALSE");
    if (spec.is_ca) add_ext(NID_key_usage, "critical,keyCertSign,cRLSign");
    std::string eku;
    if (spec.eku_server_auth) eku = "serverAuth";
    if (spec.eku_code_signing) eku += eku.empty() ? "codeSigning" : ",codeSigning";
    if (!eku.empty()) add_ext(NID_ext_key_usage, eku.c_str());

    EVP_PKEY* signer = spec.issuer_key ? raw(*spec.issuer_key) : raw(subject_key);
    const EVP_MD* md =
        EVP_PKEY_get_base_id(signer) == EVP_PKEY_ED25519 ? nullptr : EVP_sha256();
    if (X509_sign(cert, signer, md) == 0) {
        X509_free(cert);
        X509_NAME_free(subject);
        X509_NAME_free(issuer);
        throw std::runtime_error("certificate signing failed");
    }

    BIO* bio = BIO_new(BIO_s_mem());
    PEM_write_bio_X509(bio, cert);
    X509_free(cert);
    X509_NAME_free(subject);
    X509_NAME_free(issuer);
    return bio_to_string(bio);
}

}  // namespace imgscan::testsupport
