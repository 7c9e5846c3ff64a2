#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace imgscan {

struct NormalizedPath {
    std::string path;     // absolute, single separators, no "." / ".." components
    bool escaped = false; // true when ".." components tried to climb past the root
};

// Normalizes a raw tar member name to an absolute path inside the layer
// root. ".." never escapes: climbing past "/" is clamped and flagged.
NormalizedPath normalize_tar_path(std::string_view raw);

std::string path_dirname(std::string_view path);
std::string path_basename(std::string_view path);
std::string path_extension(std::string_view path);  // without dot, lowercased

// All ancestor directories of a directory, nearest first, ending with "/".
std::vector<std::string> path_ancestors(std::string_view dir);

// True when `path` lies in `dir` or any directory beneath it.
bool dir_contains(std::string_view dir, std::string_view path);

// fnmatch-style glob where '*' crosses path separators and '?' matches one
// byte; this makes "/var/lib/*" cover arbitrarily deep entries.
bool glob_match(std::string_view pattern, std::string_view path);

}  // namespace imgscan
