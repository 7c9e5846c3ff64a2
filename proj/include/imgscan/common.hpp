#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace imgscan {

enum class ErrorKind {
    Config,
    RateLimited,
    Unreachable,
    AuthRequired,
    ProtocolError,
    NotFound,
    UnsupportedSchema,
    IntegrityError,
    PartialTransfer,
    ExtractionError,
    LoadError,
    Unverifiable,
    Io,
};

const char* error_kind_name(ErrorKind kind);

class ScanError : public std::runtime_error {
  public:
    ScanError(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

std::string to_hex(const void* data, size_t len);
std::string to_hex(const std::string& bytes);
std::optional<std::string> from_hex(std::string_view hex);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);

// Replaces bytes that are not printable ASCII so raw (possibly non-UTF-8)
// paths and match bodies stay loggable.
std::string display_lossy(std::string_view raw);

std::string base64_decode(std::string_view text);  // ignores whitespace
std::string base64_encode(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace imgscan
