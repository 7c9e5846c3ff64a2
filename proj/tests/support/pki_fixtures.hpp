#pragma once

#include <cstdint>
#include <memory>
#include <string>

namespace imgscan::testsupport {

// Freshly generated key material for fixtures; PEM accessors cover the
// encodings the scanner must treat as the same key.
struct TestKey {
    std::shared_ptr<void> pkey;  // EVP_PKEY*

    std::string pem_pkcs8() const;
    std::string pem_traditional() const;  // PKCS#1 / SEC1
    std::string pem_public() const;
    std::string pem_pkcs8_encrypted(const std::string& passphrase) const;
};

TestKey generate_rsa(int bits = 2048);
TestKey generate_ec_p256();
TestKey generate_ed25519();

// openssh-key-v1 serialization (unencrypted) for ed25519 keys, as written
// by current ssh-keygen.
std::string openssh_private_pem(const TestKey& key, const std::string& comment = "fixture");

struct CertSpec {
    std::string subject_cn = "fixture";
    int64_t not_before = 0;
    int64_t not_after = 0;
    bool is_ca = false;
    bool eku_server_auth = false;
    bool eku_code_signing = false;
    // Self-signed when issuer_key is null.
    const TestKey* issuer_key = nullptr;
    std::string issuer_cn;
};

std::string make_cert_pem(const TestKey& subject_key, const CertSpec& spec);

}  // namespace imgscan::testsupport
