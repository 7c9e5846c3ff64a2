#pragma once

#include <string>
#include <vector>

namespace imgscan::testsupport {

struct TarEntry {
    std::string path;
    std::string content;
    char typeflag = '0';  // '0' regular, '2' symlink, '5' dir, ...
    std::string linkname;
};

// Minimal ustar writer for fixtures; paths longer than 100 bytes use a GNU
// 'L' longname record.
std::string build_tar(const std::vector<TarEntry>& entries);

std::string tar_file(const std::string& path, const std::string& content);

}  // namespace imgscan::testsupport
