#pragma once

#include <string_view>

namespace imgscan {

// Natural tag ordering: the tag splits into alternating digit / non-digit
// runs, digit runs compare as integers ("v10" > "v9"), non-digit runs
// compare bytewise, and a string that is a strict prefix of another sorts
// first.
int natural_compare(std::string_view a, std::string_view b);

inline bool natural_less(std::string_view a, std::string_view b) {
    return natural_compare(a, b) < 0;
}

}  // namespace imgscan
