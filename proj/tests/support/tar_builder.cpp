#include "support/tar_builder.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>

namespace imgscan::testsupport {

namespace {

void write_octal(char* field, size_t len, uint64_t value) {
    std::snprintf(field, len, "%0*llo", static_cast<int>(len - 1),
                  static_cast<unsigned long long>(value));
}

std::string make_header(const std::string& name, uint64_t size, char typeflag,
                        const std::string& linkname) {
    std::string hdr(512, '\0');
    std::memcpy(hdr.data(), name.data(), std::min<size_t>(name.size(), 100));
    write_octal(hdr.data() + 100, 8, 0644);  // mode
    write_octal(hdr.data() + 108, 8, 0);     // uid
    write_octal(hdr.data() + 116, 8, 0);     // gid
    write_octal(hdr.data() + 124, 12, size);
    write_octal(hdr.data() + 136, 12, 0);  // mtime
    hdr[156] = typeflag;
    std::memcpy(hdr.data() + 157, linkname.data(), std::min<size_t>(linkname.size(), 100));
    std::memcpy(hdr.data() + 257, "ustar", 5);
    hdr[263] = '0';
    hdr[264] = '0';
    // checksum over the header with the checksum field as spaces
    std::memset(hdr.data() + 148, ' ', 8);
    unsigned long sum = 0;
    for (unsigned char c : hdr) sum += c;
    std::snprintf(hdr.data() + 148, 8, "%06lo", sum);
    hdr[154] = '\0';
    hdr[155] = ' ';
    return hdr;
}

void append_padded(std::string& out, const std::string& content) {
    out += content;
    size_t pad = (512 - content.size() % 512) % 512;
    out.append(pad, '\0');
}

}  // namespace

std::string build_tar(const std::vector<TarEntry>& entries) {
    std::string out;
    for (const auto& entry : entries) {
        if (entry.path.size() > 100) {
            out += make_header("././@LongLink", entry.path.size(), 'L', "");
            append_padded(out, entry.path);
        }
        auto name = entry.path.size() > 100 ? entry.path.substr(0, 100) : entry.path;
        bool has_data = entry.typeflag == '0' || entry.typeflag == '\0' || entry.typeflag == '7';
        out += make_header(name, has_data ? entry.content.size() : 0, entry.typeflag,
                           entry.linkname);
        if (has_data) append_padded(out, entry.content);
    }
    out.append(1024, '\0');
    return out;
}

std::string tar_file(const std::string& path, const std::string& content) {
    return build_tar({TarEntry{path, content}});
}

}  // namespace imgscan::testsupport
