#include "imgscan/natsort.hpp"

#include <cctype>

namespace imgscan {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view take_run(std::string_view& rest, bool digits) {
    size_t n = 0;
    while (n < rest.size() && is_digit(rest[n]) == digits) ++n;
    auto run = rest.substr(0, n);
    rest.remove_prefix(n);
    return run;
}

int compare_digit_runs(std::string_view a, std::string_view b) {
    // Compare as integers of arbitrary width: strip leading zeros, then
    // longer number wins, then bytewise.
    size_t za = a.find_first_not_of('0');
    size_t zb = b.find_first_not_of('0');
    auto sa = za == std::string_view::npos ? std::string_view{} : a.substr(za);
    auto sb = zb == std::string_view::npos ? std::string_view{} : b.substr(zb);
    if (sa.size() != sb.size()) return sa.size() < sb.size() ? -1 : 1;
    int c = sa.compare(sb);
    if (c != 0) return c < 0 ? -1 : 1;
    // Equal values; more leading zeros sorts first (GNU version-sort order).
    if (a.size() != b.size()) return a.size() < b.size() ? 1 : -1;
    return 0;
}

}  // namespace

int natural_compare(std::string_view a, std::string_view b) {
    while (!a.empty() && !b.empty()) {
        bool da = is_digit(a.front());
        bool db = is_digit(b.front());
        if (da && db) {
            int c = compare_digit_runs(take_run(a, true), take_run(b, true));
            if (c != 0) return c;
        } else if (!da && !db) {
            auto ra = take_run(a, false);
            auto rb = take_run(b, false);
            int c = ra.compare(rb);
            if (c != 0) return c < 0 ? -1 : 1;
        } else {
            // Digit run sorts before non-digit run at the same position.
            return da ? -1 : 1;
        }
    }
    if (a.empty() && b.empty()) return 0;
    return a.empty() ? -1 : 1;
}

}  // namespace imgscan
