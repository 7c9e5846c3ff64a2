#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "imgscan/common.hpp"
#include "imgscan/digest.hpp"
#include "imgscan/natsort.hpp"
#include "imgscan/pathspec.hpp"
#include "imgscan/rate_limit.hpp"
#include "imgscan/rng.hpp"

using namespace imgscan;

TEST_CASE("hex round trip") {
    std::string bytes = "\x00\xff\x10junk";
    bytes[0] = '\0';
    auto hex = to_hex(bytes);
    auto back = from_hex(hex);
    REQUIRE(back.has_value());
    CHECK(*back == bytes);
    CHECK(!from_hex("abc").has_value());
    CHECK(!from_hex("zz").has_value());
}

TEST_CASE("base64 round trip including padding lengths") {
    for (size_t len : {0u, 1u, 2u, 3u, 4u, 31u, 32u, 33u}) {
        std::string bytes;
        for (size_t i = 0; i < len; ++i) bytes.push_back(static_cast<char>(i * 37 + 5));
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK(base64_decode("ab\ncd\r\n ef") == base64_decode("abcdef"));
}

TEST_CASE("sha256 known vector") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(make_digest("") ==
          "sha256:e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(is_wellformed_digest(make_digest("x")));
    CHECK(!is_wellformed_digest("sha256:XYZ"));
}

TEST_CASE("natural sort orders digit runs numerically") {
    CHECK(natural_compare("v9", "v10") < 0);
    CHECK(natural_compare("v10", "v9") > 0);
    CHECK(natural_compare("1.2.10", "1.2.9") > 0);
    CHECK(natural_compare("a", "ab") < 0);  // shorter prefix loses
    CHECK(natural_compare("abc", "abc") == 0);
    CHECK(natural_compare("v01", "v1") < 0);  // equal value, fewer zeros first

    // Oracle: max over all permutations is permutation-independent.
    std::vector<std::string> tags = {"v2", "v10", "v9"};
    std::sort(tags.begin(), tags.end());
    do {
        auto max = *std::max_element(tags.begin(), tags.end(), natural_less);
        CHECK(max == "v10");
    } while (std::next_permutation(tags.begin(), tags.end()));
}

TEST_CASE("tar path normalization never escapes the root") {
    CHECK(normalize_tar_path("etc/ssh/key").path == "/etc/ssh/key");
    CHECK(normalize_tar_path("./a//b/./c").path == "/a/b/c");
    CHECK(normalize_tar_path("a/../b").path == "/b");
    auto escaped = normalize_tar_path("../../etc/passwd");
    CHECK(escaped.path == "/etc/passwd");
    CHECK(escaped.escaped);

    SeededRng rng(99);
    const char* parts[] = {"..", "a", "b", ".", "deep"};
    for (int i = 0; i < 500; ++i) {
        std::string raw;
        for (int j = 0; j < 6; ++j) {
            raw += parts[rng.next_below(5)];
            raw += "/";
        }
        raw += "leaf";
        auto normalized = normalize_tar_path(raw);
        CHECK(normalized.path.front() == '/');
        CHECK(normalized.path.find("..") == std::string::npos);
    }
}

TEST_CASE("path helpers") {
    CHECK(path_dirname("/etc/ssh/key") == "/etc/ssh");
    CHECK(path_dirname("/key") == "/");
    CHECK(path_extension("/var/x/master.MDF") == "mdf");
    CHECK(path_extension("/var/x/noext") == "");
    auto ancestors = path_ancestors("/a/b/c");
    REQUIRE(ancestors.size() == 3);
    CHECK(ancestors[0] == "/a/b");
    CHECK(ancestors[1] == "/a");
    CHECK(ancestors[2] == "/");
    CHECK(dir_contains("/var/lib", "/var/lib/x/key"));
    CHECK(!dir_contains("/var/lib", "/var/library/key"));
    CHECK(dir_contains("/", "/anything"));
}

TEST_CASE("glob crosses separators") {
    CHECK(glob_match("/var/lib/*", "/var/lib/somepkg/test.key"));
    CHECK(glob_match("*/.cache/pip/*", "/home/u/.cache/pip/wheels/x.whl"));
    CHECK(!glob_match("/var/lib/*", "/var/opt/x"));
    CHECK(glob_match("*.db", "/data/users.db"));
    CHECK(glob_match("a?c", "abc"));
    CHECK(!glob_match("a?c", "ac"));
}

TEST_CASE("seeded shuffle is deterministic and a permutation") {
    std::vector<int> items(100);
    for (int i = 0; i < 100; ++i) items[i] = i;
    auto a = items, b = items;
    seeded_shuffle(a, 42);
    seeded_shuffle(b, 42);
    CHECK(a == b);
    auto c = items;
    seeded_shuffle(c, 43);
    CHECK(a != c);  // overwhelmingly likely
    std::sort(a.begin(), a.end());
    CHECK(a == items);
}

TEST_CASE("token bucket enforces windowed rate under a mock clock") {
    auto now = std::chrono::steady_clock::time_point{};
    auto clock = [&now] { return now; };
    auto sleeper = [&now](std::chrono::nanoseconds d) { now += d; };
    TokenBucket bucket(10.0, clock, sleeper);

    // Count acquisitions per simulated 1-second window.
    std::map<int64_t, int> per_window;
    for (int i = 0; i < 55; ++i) {
        bucket.acquire();
        auto seconds = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch());
        per_window[seconds.count()]++;
    }
    for (const auto& [window, count] : per_window) CHECK(count <= 10);
}
