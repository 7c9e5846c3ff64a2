#include "imgscan/pathspec.hpp"

#include <cctype>

namespace imgscan {

NormalizedPath normalize_tar_path(std::string_view raw) {
    NormalizedPath result;
    std::vector<std::string_view> parts;
    size_t start = 0;
    while (start <= raw.size()) {
        size_t pos = raw.find('/', start);
        std::string_view comp =
            pos == std::string_view::npos ? raw.substr(start) : raw.substr(start, pos - start);
        if (comp.empty() || comp == ".") {
            // skip
        } else if (comp == "..") {
            if (parts.empty())
                result.escaped = true;
            else
                parts.pop_back();
        } else {
            parts.push_back(comp);
        }
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    result.path = "/";
    for (size_t i = 0; i < parts.size(); ++i) {
        result.path.append(parts[i]);
        if (i + 1 < parts.size()) result.path.push_back('/');
    }
    return result;
}

std::string path_dirname(std::string_view path) {
    size_t pos = path.rfind('/');
    if (pos == std::string_view::npos) return "/";
    if (pos == 0) return "/";
    return std::string(path.substr(0, pos));
}

std::string path_basename(std::string_view path) {
    size_t pos = path.rfind('/');
    if (pos == std::string_view::npos) return std::string(path);
    return std::string(path.substr(pos + 1));
}

std::string path_extension(std::string_view path) {
    auto base = path_basename(path);
    size_t pos = base.rfind('.');
    if (pos == std::string::npos || pos + 1 == base.size()) return {};
    std::string ext = base.substr(pos + 1);
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

std::vector<std::string> path_ancestors(std::string_view dir) {
    std::vector<std::string> out;
    std::string cur(dir);
    while (cur != "/" && !cur.empty()) {
        cur = path_dirname(cur);
        out.push_back(cur);
        if (cur == "/") break;
    }
    return out;
}

bool dir_contains(std::string_view dir, std::string_view path) {
    if (dir == "/") return !path.empty() && path.front() == '/';
    if (path.size() <= dir.size()) return false;
    return path.substr(0, dir.size()) == dir && path[dir.size()] == '/';
}

bool glob_match(std::string_view pattern, std::string_view path) {
    size_t p = 0, s = 0;
    size_t star_p = std::string_view::npos, star_s = 0;
    while (s < path.size()) {
        if (p < pattern.size() && (pattern[p] == path[s] || pattern[p] == '?')) {
            ++p;
            ++s;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star_p = p++;
            star_s = s;
        } else if (star_p != std::string_view::npos) {
            p = star_p + 1;
            s = ++star_s;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

}  // namespace imgscan
