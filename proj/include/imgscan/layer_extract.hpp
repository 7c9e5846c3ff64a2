#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "imgscan/registry_types.hpp"

namespace imgscan {

// Pull-based byte stream; read returns 0 at end of stream.
class ByteSource {
  public:
    virtual ~ByteSource() = default;
    virtual size_t read(char* buf, size_t n) = 0;
};

class MemorySource : public ByteSource {
  public:
    explicit MemorySource(std::string_view data) : data_(data) {}
    size_t read(char* buf, size_t n) override;

  private:
    std::string_view data_;
    size_t pos_ = 0;
};

class FileSource : public ByteSource {
  public:
    explicit FileSource(const std::string& path);
    ~FileSource() override;
    size_t read(char* buf, size_t n) override;

  private:
    void* file_;
};

enum class ArchiveKind { Tar, Gzip, Zip, Bzip2, Xz, None };
ArchiveKind detect_archive(std::string_view head_and_body);

// One file yielded by layer traversal. depth == archive_chain length; files
// straight out of the layer tar sit at depth 0.
struct FileEntry {
    std::string path;  // normalized, absolute within the layer root
    uint64_t size = 0;
    std::string content;  // capped at limits.per_file_cap (truncated flag set)
    std::string layer_digest;
    std::vector<std::string> archive_chain;
    int depth = 0;
    bool truncated = false;
};

struct ExtractLimits {
    uint64_t per_file_cap = 64ull << 20;   // match window per file
    uint64_t expansion_factor = 10;        // decompressed <= factor x declared size
    int max_depth = 3;
};

struct ExtractStats {
    uint64_t regular_files = 0;
    uint64_t skipped_special = 0;  // links, devices, fifos, dirs, sparse
    uint64_t whiteouts = 0;
    uint64_t nested_archives = 0;
    uint64_t nested_failures = 0;
    uint64_t escaped_paths = 0;
    std::vector<std::string> warnings;
};

using EntrySink = std::function<void(FileEntry&&)>;

// Wraps a compressed blob stream for transparent decompression.
// Unsupported codecs (zstd in this build) raise ExtractionError.
std::unique_ptr<ByteSource> decompress_layer(std::unique_ptr<ByteSource> blob,
                                             LayerMediaKind media_kind,
                                             const std::string& layer_digest);

// Walks a layer tar, yielding regular files only; nested archives are
// opened recursively up to limits.max_depth. Violating the expansion budget
// aborts the layer with ExtractionError.
ExtractStats extract_layer(ByteSource& tar_stream, const std::string& layer_digest,
                           uint64_t declared_size, const ExtractLimits& limits,
                           const EntrySink& sink);

// Opens one already-yielded entry if it is an archive; yields inner entries
// with the chain extended. Corrupt inner archives are recorded and skipped.
void extract_nested(const FileEntry& entry, const ExtractLimits& limits, uint64_t& budget_left,
                    const EntrySink& sink, ExtractStats& stats);

// Whole-buffer decompressors used for nested archives; they stop at
// max_out and report truncation via the bool.
std::pair<std::string, bool> gzip_decompress(std::string_view in, uint64_t max_out);
std::pair<std::string, bool> xz_decompress(std::string_view in, uint64_t max_out);
std::pair<std::string, bool> bzip2_decompress(std::string_view in, uint64_t max_out);
std::string gzip_compress(std::string_view in, int level = 6);

enum class DedupState { Fresh, Seen };

// Campaign-wide layer dedup: the first check of a digest wins, all later
// checks (any thread) observe Seen.
class DedupStore {
  public:
    DedupState check_and_mark(const std::string& digest);
    size_t size() const;

  private:
    mutable std::mutex mu_;
    std::unordered_set<std::string> seen_;
};

// On-disk content-addressed blob cache so campaigns can resume without
// refetching. Files are named by digest under <dir>/blobs with an index at
// <dir>/index.jsonl.
class BlobCache {
  public:
    explicit BlobCache(std::string dir);

    bool has(const std::string& digest) const;
    std::unique_ptr<ByteSource> open(const std::string& digest) const;
    std::string blob_path(const std::string& digest) const;

    class Writer {
      public:
        Writer(BlobCache& cache, std::string digest);
        ~Writer();
        void write(std::string_view chunk);
        void commit(uint64_t size);
        void abort();

      private:
        BlobCache& cache_;
        std::string digest_;
        std::string tmp_path_;
        void* file_ = nullptr;
    };

  private:
    std::string dir_;
    std::mutex index_mu_;

    friend class Writer;
};

}  // namespace imgscan
