#include "imgscan/layer_extract.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>

#ifdef IMGSCAN_HAVE_LZMA
#include <lzma.h>
#endif
#ifdef IMGSCAN_HAVE_BZ2
#include "bzlib_compat.h"
#endif

#include <nlohmann/json.hpp>

#include "imgscan/common.hpp"
#include "imgscan/digest.hpp"
#include "imgscan/pathspec.hpp"

namespace imgscan {

namespace fs = std::filesystem;

size_t MemorySource::read(char* buf, size_t n) {
    size_t avail = data_.size() - pos_;
    size_t take = std::min(n, avail);
    std::memcpy(buf, data_.data() + pos_, take);
    pos_ += take;
    return take;
}

FileSource::FileSource(const std::string& path) : file_(std::fopen(path.c_str(), "rb")) {
    if (!file_) throw ScanError(ErrorKind::Io, "cannot open " + path);
}

FileSource::~FileSource() {
    if (file_) std::fclose(static_cast<FILE*>(file_));
}

size_t FileSource::read(char* buf, size_t n) {
    return std::fread(buf, 1, n, static_cast<FILE*>(file_));
}

ArchiveKind detect_archive(std::string_view data) {
    auto byte = [&](size_t i) { return static_cast<unsigned char>(data[i]); };
    if (data.size() >= 2 && byte(0) == 0x1f && byte(1) == 0x8b) return ArchiveKind::Gzip;
    if (data.size() >= 4 && data.substr(0, 2) == "PK" &&
        ((byte(2) == 3 && byte(3) == 4) || (byte(2) == 5 && byte(3) == 6)))
        return ArchiveKind::Zip;
    if (data.size() >= 4 && data.substr(0, 3) == "BZh" && byte(3) >= '1' && byte(3) <= '9')
        return ArchiveKind::Bzip2;
    if (data.size() >= 6 && byte(0) == 0xfd && data.substr(1, 4) == "7zXZ" && byte(5) == 0x00)
        return ArchiveKind::Xz;
    if (data.size() >= 512) {
        if (data.substr(257, 5) == "ustar") return ArchiveKind::Tar;
        // Pre-POSIX tars carry no magic; fall back to header checksum.
        unsigned long stored = 0;
        bool octal = false;
        for (size_t i = 148; i < 156; ++i) {
            char c = data[i];
            if (c >= '0' && c <= '7') {
                stored = stored * 8 + static_cast<unsigned long>(c - '0');
                octal = true;
            } else if (c != ' ' && c != '\0') {
                octal = false;
                break;
            }
        }
        if (octal && stored != 0) {
            unsigned long sum = 0;
            for (size_t i = 0; i < 512; ++i)
                sum += i >= 148 && i < 156 ? ' ' : byte(i);
            if (sum == stored) return ArchiveKind::Tar;
        }
    }
    return ArchiveKind::None;
}

// ---------------------------------------------------------------------------
// Decompressors

namespace {

class GzipSource : public ByteSource {
  public:
    GzipSource(std::unique_ptr<ByteSource> inner, std::string layer_digest)
        : inner_(std::move(inner)), layer_digest_(std::move(layer_digest)) {
        std::memset(&strm_, 0, sizeof strm_);
        if (inflateInit2(&strm_, 15 + 32) != Z_OK)
            throw ScanError(ErrorKind::ExtractionError, layer_digest_ + ": inflate init failed");
        active_ = true;
    }

    ~GzipSource() override {
        if (active_) inflateEnd(&strm_);
    }

    size_t read(char* buf, size_t n) override {
        if (finished_) return 0;
        strm_.next_out = reinterpret_cast<Bytef*>(buf);
        strm_.avail_out = static_cast<uInt>(n);
        while (strm_.avail_out > 0) {
            if (strm_.avail_in == 0 && !input_done_) {
                size_t got = inner_->read(in_buf_, sizeof in_buf_);
                if (got == 0) input_done_ = true;
                strm_.next_in = reinterpret_cast<Bytef*>(in_buf_);
                strm_.avail_in = static_cast<uInt>(got);
            }
            int rc = inflate(&strm_, Z_NO_FLUSH);
            if (rc == Z_STREAM_END) {
                finished_ = true;
                break;
            }
            if (rc != Z_OK && rc != Z_BUF_ERROR)
                throw ScanError(ErrorKind::ExtractionError,
                                layer_digest_ + ": corrupt gzip stream");
            if (rc == Z_BUF_ERROR && input_done_) {
                // Truncated compressed stream.
                throw ScanError(ErrorKind::ExtractionError,
                                layer_digest_ + ": truncated gzip stream");
            }
        }
        return n - strm_.avail_out;
    }

  private:
    std::unique_ptr<ByteSource> inner_;
    std::string layer_digest_;
    z_stream strm_;
    char in_buf_[64 << 10];
    bool active_ = false;
    bool input_done_ = false;
    bool finished_ = false;
};

uint16_t rd16(std::string_view d, size_t off) {
    return static_cast<uint16_t>(static_cast<unsigned char>(d[off]) |
                                 static_cast<unsigned char>(d[off + 1]) << 8);
}

uint32_t rd32(std::string_view d, size_t off) {
    return static_cast<uint32_t>(static_cast<unsigned char>(d[off])) |
           static_cast<uint32_t>(static_cast<unsigned char>(d[off + 1])) << 8 |
           static_cast<uint32_t>(static_cast<unsigned char>(d[off + 2])) << 16 |
           static_cast<uint32_t>(static_cast<unsigned char>(d[off + 3])) << 24;
}

std::pair<std::string, bool> inflate_raw(std::string_view in, uint64_t max_out) {
    z_stream strm;
    std::memset(&strm, 0, sizeof strm);
    if (inflateInit2(&strm, -15) != Z_OK)
        throw ScanError(ErrorKind::ExtractionError, "inflate init failed");
    std::string out;
    char buf[64 << 10];
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
    strm.avail_in = static_cast<uInt>(in.size());
    bool truncated = false;
    int rc = Z_OK;
    do {
        strm.next_out = reinterpret_cast<Bytef*>(buf);
        strm.avail_out = sizeof buf;
        rc = inflate(&strm, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&strm);
            throw ScanError(ErrorKind::ExtractionError, "corrupt deflate stream");
        }
        size_t produced = sizeof buf - strm.avail_out;
        if (out.size() + produced > max_out) {
            out.append(buf, max_out - out.size());
            truncated = true;
            break;
        }
        out.append(buf, produced);
        if (rc == Z_STREAM_END) break;
        if (strm.avail_in == 0 && produced == 0) {
            inflateEnd(&strm);
            throw ScanError(ErrorKind::ExtractionError, "truncated deflate stream");
        }
    } while (true);
    inflateEnd(&strm);
    return {std::move(out), truncated};
}

}  // namespace

std::pair<std::string, bool> gzip_decompress(std::string_view in, uint64_t max_out) {
    auto mem = std::make_unique<MemorySource>(in);
    GzipSource src(std::move(mem), "buffer");
    std::string out;
    char buf[64 << 10];
    bool truncated = false;
    while (true) {
        size_t got = src.read(buf, sizeof buf);
        if (got == 0) break;
        if (out.size() + got > max_out) {
            out.append(buf, max_out - out.size());
            truncated = true;
            break;
        }
        out.append(buf, got);
    }
    return {std::move(out), truncated};
}

std::string gzip_compress(std::string_view in, int level) {
    z_stream strm;
    std::memset(&strm, 0, sizeof strm);
    if (deflateInit2(&strm, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw ScanError(ErrorKind::ExtractionError, "deflate init failed");
    std::string out;
    char buf[64 << 10];
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
    strm.avail_in = static_cast<uInt>(in.size());
    int rc;
    do {
        strm.next_out = reinterpret_cast<Bytef*>(buf);
        strm.avail_out = sizeof buf;
        rc = deflate(&strm, Z_FINISH);
        out.append(buf, sizeof buf - strm.avail_out);
    } while (rc != Z_STREAM_END);
    deflateEnd(&strm);
    return out;
}

std::pair<std::string, bool> xz_decompress(std::string_view in, uint64_t max_out) {
#ifdef IMGSCAN_HAVE_LZMA
    lzma_stream strm = LZMA_STREAM_INIT;
    if (lzma_stream_decoder(&strm, UINT64_MAX, 0) != LZMA_OK)
        throw ScanError(ErrorKind::ExtractionError, "lzma init failed");
    std::string out;
    char buf[64 << 10];
    strm.next_in = reinterpret_cast<const uint8_t*>(in.data());
    strm.avail_in = in.size();
    bool truncated = false;
    while (true) {
        strm.next_out = reinterpret_cast<uint8_t*>(buf);
        strm.avail_out = sizeof buf;
        lzma_ret rc = lzma_code(&strm, LZMA_FINISH);
        size_t produced = sizeof buf - strm.avail_out;
        if (out.size() + produced > max_out) {
            out.append(buf, max_out - out.size());
            truncated = true;
            break;
        }
        out.append(buf, produced);
        if (rc == LZMA_STREAM_END) break;
        if (rc != LZMA_OK) {
            lzma_end(&strm);
            throw ScanError(ErrorKind::ExtractionError, "corrupt xz stream");
        }
        if (produced == 0 && strm.avail_in == 0) {
            lzma_end(&strm);
            throw ScanError(ErrorKind::ExtractionError, "truncated xz stream");
        }
    }
    lzma_end(&strm);
    return {std::move(out), truncated};
#else
    (void)in;
    (void)max_out;
    throw ScanError(ErrorKind::ExtractionError, "xz support not built");
#endif
}

std::pair<std::string, bool> bzip2_decompress(std::string_view in, uint64_t max_out) {
#ifdef IMGSCAN_HAVE_BZ2
    bz_stream strm;
    std::memset(&strm, 0, sizeof strm);
    if (BZ2_bzDecompressInit(&strm, 0, 0) != BZ_OK)
        throw ScanError(ErrorKind::ExtractionError, "bzip2 init failed");
    std::string out;
    char buf[64 << 10];
    strm.next_in = const_cast<char*>(in.data());
    strm.avail_in = static_cast<unsigned>(in.size());
    bool truncated = false;
    while (true) {
        strm.next_out = buf;
        strm.avail_out = sizeof buf;
        int rc = BZ2_bzDecompress(&strm);
        size_t produced = sizeof buf - strm.avail_out;
        if (out.size() + produced > max_out) {
            out.append(buf, max_out - out.size());
            truncated = true;
            break;
        }
        out.append(buf, produced);
        if (rc == BZ_STREAM_END) break;
        if (rc != BZ_OK) {
            BZ2_bzDecompressEnd(&strm);
            throw ScanError(ErrorKind::ExtractionError, "corrupt bzip2 stream");
        }
        if (produced == 0 && strm.avail_in == 0) {
            BZ2_bzDecompressEnd(&strm);
            throw ScanError(ErrorKind::ExtractionError, "truncated bzip2 stream");
        }
    }
    BZ2_bzDecompressEnd(&strm);
    return {std::move(out), truncated};
#else
    (void)in;
    (void)max_out;
    throw ScanError(ErrorKind::ExtractionError, "bzip2 support not built");
#endif
}

std::unique_ptr<ByteSource> decompress_layer(std::unique_ptr<ByteSource> blob,
                                             LayerMediaKind media_kind,
                                             const std::string& layer_digest) {
    switch (media_kind) {
    case LayerMediaKind::Tar:
        return blob;
    case LayerMediaKind::TarGzip:
        return std::make_unique<GzipSource>(std::move(blob), layer_digest);
    case LayerMediaKind::TarZstd:
        throw ScanError(ErrorKind::ExtractionError,
                        layer_digest + ": zstd layers are not supported in this build");
    }
    throw ScanError(ErrorKind::ExtractionError, layer_digest + ": unknown media kind");
}

// ---------------------------------------------------------------------------
// Tar traversal

namespace {

struct BufferedSource {
    ByteSource& src;

    size_t read_fully(char* buf, size_t n) {
        size_t got = 0;
        while (got < n) {
            size_t r = src.read(buf + got, n - got);
            if (r == 0) break;
            got += r;
        }
        return got;
    }

    bool read_exact(char* buf, size_t n) { return read_fully(buf, n) == n; }

    bool skip(uint64_t n) {
        char buf[64 << 10];
        while (n > 0) {
            size_t take = static_cast<size_t>(std::min<uint64_t>(n, sizeof buf));
            size_t r = src.read(buf, take);
            if (r == 0) return false;
            n -= r;
        }
        return true;
    }
};

uint64_t parse_tar_size(const char* field, size_t len) {
    if (static_cast<unsigned char>(field[0]) & 0x80) {
        // GNU base-256
        uint64_t v = static_cast<unsigned char>(field[0]) & 0x7f;
        for (size_t i = 1; i < len; ++i) v = v << 8 | static_cast<unsigned char>(field[i]);
        return v;
    }
    uint64_t v = 0;
    for (size_t i = 0; i < len; ++i) {
        char c = field[i];
        if (c == ' ' || c == '\0') {
            if (v > 0 || i > 0) break;
            continue;
        }
        if (c < '0' || c > '7') break;
        v = v * 8 + static_cast<uint64_t>(c - '0');
    }
    return v;
}

bool checksum_ok(const char* hdr) {
    unsigned long stored = static_cast<unsigned long>(parse_tar_size(hdr + 148, 8));
    unsigned long sum = 0;
    long signed_sum = 0;
    for (size_t i = 0; i < 512; ++i) {
        unsigned char u = i >= 148 && i < 156 ? ' ' : static_cast<unsigned char>(hdr[i]);
        sum += u;
        signed_sum += i >= 148 && i < 156 ? ' ' : static_cast<signed char>(hdr[i]);
    }
    return sum == stored || static_cast<unsigned long>(signed_sum) == stored;
}

bool all_zero(const char* buf, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (buf[i] != 0) return false;
    return true;
}

std::string field_str(const char* data, size_t len) {
    size_t n = 0;
    while (n < len && data[n] != '\0') ++n;
    return std::string(data, n);
}

struct PaxOverrides {
    std::optional<std::string> path;
    std::optional<uint64_t> size;
};

PaxOverrides parse_pax(const std::string& body) {
    PaxOverrides out;
    size_t pos = 0;
    while (pos < body.size()) {
        size_t sp = body.find(' ', pos);
        if (sp == std::string::npos) break;
        unsigned long rec_len = 0;
        try {
            rec_len = std::stoul(body.substr(pos, sp - pos));
        } catch (...) {
            break;
        }
        if (rec_len == 0 || pos + rec_len > body.size()) break;
        std::string record = body.substr(sp + 1, pos + rec_len - sp - 2);  // strip '\n'
        auto eq = record.find('=');
        if (eq != std::string::npos) {
            auto key = record.substr(0, eq);
            auto value = record.substr(eq + 1);
            if (key == "path") out.path = value;
            if (key == "size") {
                try {
                    out.size = std::stoull(value);
                } catch (...) {
                }
            }
        }
        pos += rec_len;
    }
    return out;
}

std::string strip_archive_suffix(const std::string& path) {
    static const std::pair<const char*, const char*> suffixes[] = {
        {".tgz", ".tar"}, {".txz", ".tar"}, {".tbz2", ".tar"},
        {".gz", ""},      {".xz", ""},      {".bz2", ""},
    };
    for (const auto& [suffix, replacement] : suffixes) {
        size_t n = std::strlen(suffix);
        if (path.size() > n && path.substr(path.size() - n) == suffix)
            return path.substr(0, path.size() - n) + replacement;
    }
    return path + ".extracted";
}

void extract_from_bytes(std::string_view bytes, const std::string& container_path,
                        const std::vector<std::string>& chain, int member_depth,
                        const std::string& layer_digest, const ExtractLimits& limits,
                        uint64_t& budget_left, const EntrySink& sink, ExtractStats& stats);

// Yields the entry and, when it is itself an archive within depth budget,
// recurses into it.
void emit_entry(FileEntry&& entry, const ExtractLimits& limits, uint64_t& budget_left,
                const EntrySink& sink, ExtractStats& stats) {
    FileEntry copy = entry;
    ++stats.regular_files;
    sink(std::move(entry));
    if (copy.depth < limits.max_depth && detect_archive(copy.content) != ArchiveKind::None) {
        extract_nested(copy, limits, budget_left, sink, stats);
    }
}

void walk_tar_members(ByteSource& tar, const std::vector<std::string>& chain, int member_depth,
                      const std::string& layer_digest, const ExtractLimits& limits,
                      uint64_t& budget_left, const EntrySink& sink, ExtractStats& stats) {
    BufferedSource reader{tar};
    char hdr[512];
    std::optional<std::string> pending_longname;
    PaxOverrides pending_pax;

    while (true) {
        if (!reader.read_exact(hdr, sizeof hdr)) break;  // EOF / trailing garbage tolerated
        if (all_zero(hdr, sizeof hdr)) break;
        if (!checksum_ok(hdr)) {
            stats.warnings.push_back(layer_digest + ": malformed tar header, traversal stopped");
            break;
        }

        std::string name = field_str(hdr, 100);
        std::string prefix = field_str(hdr + 345, 155);
        if (!prefix.empty() && std::string_view(hdr + 257, 5) == "ustar")
            name = prefix + "/" + name;
        uint64_t size = parse_tar_size(hdr + 124, 12);
        char typeflag = hdr[156];
        uint64_t padded = (size + 511) / 512 * 512;

        if (typeflag == 'L' || typeflag == 'x' || typeflag == 'g') {
            std::string body(size, '\0');
            if (!reader.read_exact(body.data(), static_cast<size_t>(size))) break;
            if (!reader.skip(padded - size)) break;
            if (typeflag == 'L') {
                while (!body.empty() && body.back() == '\0') body.pop_back();
                pending_longname = body;
            } else {
                auto pax = parse_pax(body);
                if (typeflag == 'x') {
                    pending_pax = pax;
                } else if (pax.path || pax.size) {
                    pending_pax = pax;  // global overrides treated like local ones
                }
            }
            continue;
        }
        if (typeflag == 'K') {  // GNU long link target, irrelevant for regular files
            if (!reader.skip(padded)) break;
            continue;
        }

        std::string raw_path = pending_pax.path ? *pending_pax.path
                                                : pending_longname ? *pending_longname : name;
        if (pending_pax.size) {
            size = *pending_pax.size;
            padded = (size + 511) / 512 * 512;
        }
        pending_longname.reset();
        pending_pax = {};

        bool regular = typeflag == '0' || typeflag == '\0' || typeflag == '7';
        if (!regular) {
            ++stats.skipped_special;
            if (!reader.skip(padded)) break;
            continue;
        }

        if (path_basename(raw_path).rfind(".wh.", 0) == 0) {
            ++stats.whiteouts;
            if (!reader.skip(padded)) break;
            continue;
        }

        if (size > budget_left)
            throw ScanError(ErrorKind::ExtractionError,
                            layer_digest + ": decompressed size exceeds expansion budget");
        budget_left -= size;

        auto normalized = normalize_tar_path(raw_path);
        if (normalized.escaped) ++stats.escaped_paths;

        FileEntry entry;
        entry.path = normalized.path;
        entry.size = size;
        entry.layer_digest = layer_digest;
        entry.archive_chain = chain;
        entry.depth = member_depth;
        uint64_t keep = std::min<uint64_t>(size, limits.per_file_cap);
        entry.truncated = keep < size;
        entry.content.resize(static_cast<size_t>(keep));
        size_t got = reader.read_fully(entry.content.data(), entry.content.size());
        if (got < entry.content.size()) {
            stats.warnings.push_back(layer_digest + ": truncated tar entry " + entry.path);
            // Stream ended early; yield what was actually read.
            entry.content.resize(got);
            entry.truncated = true;
            emit_entry(std::move(entry), limits, budget_left, sink, stats);
            break;
        }
        if (!reader.skip(padded - keep)) {
            emit_entry(std::move(entry), limits, budget_left, sink, stats);
            break;
        }
        emit_entry(std::move(entry), limits, budget_left, sink, stats);
    }
}

void walk_zip_members(std::string_view data, const std::vector<std::string>& chain,
                      int member_depth, const std::string& layer_digest,
                      const ExtractLimits& limits, uint64_t& budget_left, const EntrySink& sink,
                      ExtractStats& stats) {
    // End-of-central-directory record sits in the trailing 64 KiB + 22.
    if (data.size() < 22) throw ScanError(ErrorKind::ExtractionError, "zip too small");
    size_t scan_start = data.size() >= (66000 + 22) ? data.size() - 66000 - 22 : 0;
    size_t eocd = std::string_view::npos;
    for (size_t i = data.size() - 21; i-- > scan_start;) {
        if (data[i] == 'P' && data[i + 1] == 'K' && data[i + 2] == '\x05' && data[i + 3] == '\x06') {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string_view::npos)
        throw ScanError(ErrorKind::ExtractionError, "zip central directory missing");
    uint16_t entries = rd16(data, eocd + 10);
    uint32_t cd_offset = rd32(data, eocd + 16);

    size_t pos = cd_offset;
    for (uint16_t i = 0; i < entries; ++i) {
        if (pos + 46 > data.size() || data.substr(pos, 4) != std::string_view("PK\x01\x02", 4))
            throw ScanError(ErrorKind::ExtractionError, "zip central directory corrupt");
        uint16_t flags = rd16(data, pos + 8);
        uint16_t method = rd16(data, pos + 10);
        uint32_t comp_size = rd32(data, pos + 20);
        uint32_t uncomp_size = rd32(data, pos + 24);
        uint16_t name_len = rd16(data, pos + 28);
        uint16_t extra_len = rd16(data, pos + 30);
        uint16_t comment_len = rd16(data, pos + 32);
        uint32_t local_offset = rd32(data, pos + 42);
        std::string name(data.substr(pos + 46, name_len));
        pos += 46 + name_len + extra_len + comment_len;

        if (!name.empty() && name.back() == '/') continue;  // directory
        if (flags & 0x1) {
            stats.warnings.push_back(layer_digest + ": encrypted zip member " + name + " skipped");
            continue;
        }
        if (local_offset + 30 > data.size()) {
            stats.warnings.push_back(layer_digest + ": zip member offset out of range");
            continue;
        }
        uint16_t lname = rd16(data, local_offset + 26);
        uint16_t lextra = rd16(data, local_offset + 28);
        size_t data_off = local_offset + 30 + lname + lextra;
        if (data_off + comp_size > data.size()) {
            stats.warnings.push_back(layer_digest + ": zip member data out of range");
            continue;
        }

        if (uncomp_size > budget_left)
            throw ScanError(ErrorKind::ExtractionError,
                            layer_digest + ": decompressed size exceeds expansion budget");

        std::string content;
        bool truncated = false;
        uint64_t cap = std::min<uint64_t>(limits.per_file_cap, budget_left);
        try {
            if (method == 0) {
                uint64_t keep = std::min<uint64_t>(comp_size, cap);
                content.assign(data.substr(data_off, static_cast<size_t>(keep)));
                truncated = keep < comp_size;
            } else if (method == 8) {
                auto [bytes, cut] = inflate_raw(data.substr(data_off, comp_size), cap);
                content = std::move(bytes);
                truncated = cut;
            } else {
                stats.warnings.push_back(layer_digest + ": zip method " + std::to_string(method) +
                                         " unsupported for " + name);
                continue;
            }
        } catch (const ScanError& e) {
            ++stats.nested_failures;
            stats.warnings.push_back(layer_digest + ": " + name + ": " + e.what());
            continue;
        }
        budget_left -= uncomp_size;

        auto normalized = normalize_tar_path(name);
        if (normalized.escaped) ++stats.escaped_paths;

        FileEntry entry;
        entry.path = normalized.path;
        entry.size = uncomp_size;
        entry.content = std::move(content);
        entry.layer_digest = layer_digest;
        entry.archive_chain = chain;
        entry.depth = member_depth;
        entry.truncated = truncated;
        emit_entry(std::move(entry), limits, budget_left, sink, stats);
    }
}

void extract_from_bytes(std::string_view bytes, const std::string& container_path,
                        const std::vector<std::string>& chain, int member_depth,
                        const std::string& layer_digest, const ExtractLimits& limits,
                        uint64_t& budget_left, const EntrySink& sink, ExtractStats& stats) {
    switch (detect_archive(bytes)) {
    case ArchiveKind::Tar: {
        MemorySource src(bytes);
        walk_tar_members(src, chain, member_depth, layer_digest, limits, budget_left, sink, stats);
        return;
    }
    case ArchiveKind::Zip:
        walk_zip_members(bytes, chain, member_depth, layer_digest, limits, budget_left, sink,
                         stats);
        return;
    case ArchiveKind::Gzip:
    case ArchiveKind::Xz:
    case ArchiveKind::Bzip2: {
        auto kind = detect_archive(bytes);
        uint64_t cap = std::min<uint64_t>(budget_left, limits.per_file_cap);
        auto [inner, truncated] = kind == ArchiveKind::Gzip ? gzip_decompress(bytes, cap)
                                  : kind == ArchiveKind::Xz ? xz_decompress(bytes, cap)
                                                            : bzip2_decompress(bytes, cap);
        budget_left -= std::min<uint64_t>(inner.size(), budget_left);
        // A compressed tar counts as a single containment level: the
        // wrapper file is the archive, its members surface directly.
        if (!truncated && detect_archive(inner) == ArchiveKind::Tar) {
            MemorySource src(inner);
            walk_tar_members(src, chain, member_depth, layer_digest, limits, budget_left, sink,
                             stats);
            return;
        }
        FileEntry entry;
        entry.path = strip_archive_suffix(container_path);
        entry.size = inner.size();
        entry.content = std::move(inner);
        entry.layer_digest = layer_digest;
        entry.archive_chain = chain;
        entry.depth = member_depth;
        entry.truncated = truncated;
        emit_entry(std::move(entry), limits, budget_left, sink, stats);
        return;
    }
    case ArchiveKind::None:
        return;
    }
}

}  // namespace

void extract_nested(const FileEntry& entry, const ExtractLimits& limits, uint64_t& budget_left,
                    const EntrySink& sink, ExtractStats& stats) {
    if (entry.depth >= limits.max_depth) return;
    auto chain = entry.archive_chain;
    chain.push_back(entry.path);
    ++stats.nested_archives;
    try {
        extract_from_bytes(entry.content, entry.path, chain, entry.depth + 1, entry.layer_digest,
                           limits, budget_left, sink, stats);
    } catch (const ScanError& e) {
        if (std::string_view(e.what()).find("expansion budget") != std::string_view::npos)
            throw;  // zip-bomb guard aborts the whole layer
        ++stats.nested_failures;
        stats.warnings.push_back(entry.layer_digest + ": " + entry.path + ": " + e.what());
    }
}

ExtractStats extract_layer(ByteSource& tar_stream, const std::string& layer_digest,
                           uint64_t declared_size, const ExtractLimits& limits,
                           const EntrySink& sink) {
    ExtractStats stats;
    uint64_t floor = 1ull << 20;
    uint64_t budget = std::max(declared_size, floor) * limits.expansion_factor;
    walk_tar_members(tar_stream, {}, 0, layer_digest, limits, budget, sink, stats);
    return stats;
}

DedupState DedupStore::check_and_mark(const std::string& digest) {
    std::lock_guard lk(mu_);
    return seen_.insert(digest).second ? DedupState::Fresh : DedupState::Seen;
}

size_t DedupStore::size() const {
    std::lock_guard lk(mu_);
    return seen_.size();
}

// ---------------------------------------------------------------------------
// Blob cache

BlobCache::BlobCache(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(fs::path(dir_) / "blobs" / "sha256");
}

std::string BlobCache::blob_path(const std::string& digest) const {
    std::string hex = digest.rfind("sha256:", 0) == 0 ? digest.substr(7) : digest;
    return (fs::path(dir_) / "blobs" / "sha256" / hex).string();
}

bool BlobCache::has(const std::string& digest) const { return fs::exists(blob_path(digest)); }

std::unique_ptr<ByteSource> BlobCache::open(const std::string& digest) const {
    return std::make_unique<FileSource>(blob_path(digest));
}

BlobCache::Writer::Writer(BlobCache& cache, std::string digest)
    : cache_(cache), digest_(std::move(digest)) {
    tmp_path_ = cache_.blob_path(digest_) + ".tmp";
    file_ = std::fopen(tmp_path_.c_str(), "wb");
    if (!file_) throw ScanError(ErrorKind::Io, "cannot write " + tmp_path_);
}

BlobCache::Writer::~Writer() {
    if (file_) {
        std::fclose(static_cast<FILE*>(file_));
        std::remove(tmp_path_.c_str());
    }
}

void BlobCache::Writer::write(std::string_view chunk) {
    if (!file_) throw ScanError(ErrorKind::Io, "writer already finished");
    std::fwrite(chunk.data(), 1, chunk.size(), static_cast<FILE*>(file_));
}

void BlobCache::Writer::commit(uint64_t size) {
    std::fclose(static_cast<FILE*>(file_));
    file_ = nullptr;
    fs::rename(tmp_path_, cache_.blob_path(digest_));
    std::lock_guard lk(cache_.index_mu_);
    nlohmann::json line;
    line["digest"] = digest_;
    line["size"] = size;
    auto index = fs::path(cache_.dir_) / "index.jsonl";
    auto* f = std::fopen(index.string().c_str(), "ab");
    if (f) {
        auto text = line.dump() + "\n";
        std::fwrite(text.data(), 1, text.size(), f);
        std::fclose(f);
    }
}

void BlobCache::Writer::abort() {
    if (file_) {
        std::fclose(static_cast<FILE*>(file_));
        file_ = nullptr;
        std::remove(tmp_path_.c_str());
    }
}

}  // namespace imgscan
