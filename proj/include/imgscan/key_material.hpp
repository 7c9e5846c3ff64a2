#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace imgscan {

// Result of structurally parsing private-key material. `pkey` holds an
// EVP_PKEY for unencrypted keys whose public half can be derived; encrypted
// or container formats parse without one.
struct KeyParseResult {
    bool parsable = false;
    bool encrypted = false;  // parsable but unverifiable
    std::string kind;        // pkcs1 | pkcs8 | sec1 | dsa | openssh | pgp | pkcs7 | xml
    std::string detail;
    std::shared_ptr<void> pkey;  // EVP_PKEY*, shared deleter
};

KeyParseResult parse_private_key_material(std::string_view matched_text);

// Canonical form for known-compromised lookups: the base64 payload with
// encapsulation boundaries, RFC 1421 headers, PGP CRC line, and all
// whitespace removed. Non-PEM material canonicalizes to its
// whitespace-stripped body.
std::string canonical_key_body(std::string_view matched_text);

struct KeyFingerprint {
    std::string spki_sha256;  // 32 raw bytes over the DER SubjectPublicKeyInfo
    std::string ssh_sha256;   // 32 raw bytes over the SSH wire-format public key
    std::string key_algorithm;
};

// Derives both fingerprint forms from a parsed, unencrypted key.
// Throws ScanError(Unverifiable) when no public key can be derived.
KeyFingerprint fingerprint_parsed_key(const KeyParseResult& key);

}  // namespace imgscan
