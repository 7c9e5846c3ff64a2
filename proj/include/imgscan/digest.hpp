#pragma once

#include <string>
#include <string_view>

namespace imgscan {

// Incremental SHA-256 used to verify blob transfers while streaming.
class Sha256 {
  public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view bytes);
    std::string finish_hex();

  private:
    void* ctx_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_raw(std::string_view bytes);  // 32 raw bytes

// Content addresses follow the registry convention "sha256:<64 hex>".
bool is_wellformed_digest(std::string_view digest);
std::string make_digest(std::string_view bytes);

}  // namespace imgscan
