#include "imgscan/analytics.hpp"

#include <algorithm>

#include "imgscan/common.hpp"
#include "imgscan/pathspec.hpp"

namespace imgscan {

const char* operation_kind_name(OperationKind k) {
    switch (k) {
    case OperationKind::File: return "file";
    case OperationKind::Exec: return "exec";
    case OperationKind::Both: return "both";
    case OperationKind::Unknown: return "unknown";
    }
    return "?";
}

namespace {

const char* kFlagOrder[] = {"ssh-keygen", "openssh-install", "git", "wget", "curl", "other"};

std::vector<std::string> split_shell_segments(const std::string& command) {
    std::vector<std::string> segments;
    std::string current;
    for (size_t i = 0; i < command.size(); ++i) {
        char c = command[i];
        if (c == '&' && i + 1 < command.size() && command[i + 1] == '&') {
            segments.push_back(current);
            current.clear();
            ++i;
        } else if (c == ';' || c == '|' || c == '\n') {
            segments.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    segments.push_back(current);
    return segments;
}

bool is_env_assignment(const std::string& token) {
    auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) return false;
    for (size_t i = 0; i < eq; ++i) {
        char c = token[i];
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

std::string first_command_token(const std::string& segment) {
    for (const auto& token : split(trim(segment), ' ')) {
        auto t = trim(token);
        if (t.empty() || is_env_assignment(t)) continue;
        if (t == "sudo" || t == "exec" || t == "env") continue;
        return path_basename(t);
    }
    return {};
}

bool package_manager_installs_openssh(const std::string& segment) {
    static const char* installers[] = {"apt-get install", "apt install",    "apk add",
                                       "yum install",     "dnf install",    "zypper install",
                                       "pacman -S",       "apt-get -y install"};
    bool installing = false;
    for (const char* phrase : installers) {
        if (contains_ci(segment, phrase)) installing = true;
    }
    return installing && contains_ci(segment, "openssh");
}

}  // namespace

OperationClass attribute_history(const ImageConfig& config, size_t layer_index) {
    OperationClass result;
    auto layers = config.layer_history();
    if (layer_index >= layers.size() || config.history_layer_mismatch) {
        result.kind = OperationKind::Unknown;
        return result;
    }
    const std::string& created_by = layers[layer_index]->created_by;

    auto nop = created_by.find("#(nop)");
    if (nop != std::string::npos) {
        auto directive = trim(created_by.substr(nop + 6));
        if (starts_with_ci(directive, "ADD") || starts_with_ci(directive, "COPY")) {
            result.kind = OperationKind::File;
        } else {
            result.kind = OperationKind::Unknown;
        }
        return result;
    }
    if (starts_with_ci(trim(created_by), "ADD ") || starts_with_ci(trim(created_by), "COPY ")) {
        result.kind = OperationKind::File;
        return result;
    }

    result.kind = OperationKind::Exec;
    std::string command = created_by;
    auto shell = command.find("/bin/sh -c ");
    if (shell != std::string::npos) command = command.substr(shell + 11);
    if (starts_with_ci(trim(command), "RUN ")) command = trim(command).substr(4);

    std::set<std::string> flags;
    for (const auto& segment : split_shell_segments(command)) {
        if (trim(segment).empty()) continue;
        if (package_manager_installs_openssh(segment)) flags.insert("openssh-install");
        auto head = first_command_token(segment);
        if (head == "git" || head == "wget" || head == "curl" || head == "ssh-keygen")
            flags.insert(head);
        else if (contains_ci(segment, "ssh-keygen"))
            flags.insert("ssh-keygen");
    }
    if (flags.empty()) flags.insert("other");
    for (const char* flag : kFlagOrder) {
        if (flags.count(flag)) result.commands.push_back(flag);
    }
    return result;
}

OperationClass combine_operations(const std::vector<OperationClass>& classes) {
    OperationClass combined;
    bool any_file = false, any_exec = false;
    std::set<std::string> flags;
    for (const auto& c : classes) {
        if (c.kind == OperationKind::File || c.kind == OperationKind::Both) any_file = true;
        if (c.kind == OperationKind::Exec || c.kind == OperationKind::Both) any_exec = true;
        flags.insert(c.commands.begin(), c.commands.end());
    }
    if (any_file && any_exec)
        combined.kind = OperationKind::Both;
    else if (any_file)
        combined.kind = OperationKind::File;
    else if (any_exec)
        combined.kind = OperationKind::Exec;
    else
        combined.kind = OperationKind::Unknown;
    for (const char* flag : kFlagOrder) {
        if (flags.count(flag)) combined.commands.push_back(flag);
    }
    return combined;
}

namespace {

std::map<std::string, std::vector<const ImageRecord*>> index_by_layer(
    const std::vector<ImageRecord>& images) {
    std::map<std::string, std::vector<const ImageRecord*>> index;
    for (const auto& image : images) {
        for (const auto& digest : image.layer_digests) index[digest].push_back(&image);
    }
    return index;
}

std::map<std::string, const ImageRecord*> index_by_reference(
    const std::vector<ImageRecord>& images) {
    std::map<std::string, const ImageRecord*> index;
    for (const auto& image : images) index[image.reference] = &image;
    return index;
}

}  // namespace

OwnerAggregation aggregate_owners(const std::vector<ValidatedSecret>& secrets,
                                  const std::vector<ImageRecord>& images) {
    OwnerAggregation agg;
    auto by_layer = index_by_layer(images);
    auto by_ref = index_by_reference(images);

    for (const auto& secret : secrets) {
        std::set<OwnerKey> owners;
        std::set<std::string> occurrence_digests;
        bool have_common_digest = true;
        std::set<std::string> common;
        bool first = true;

        for (const auto& occ : secret.occurrences) {
            std::set<std::string> digests_here;
            if (!occ.layer_digest.empty()) {
                digests_here.insert(occ.layer_digest);
                occurrence_digests.insert(occ.layer_digest);
                auto it = by_layer.find(occ.layer_digest);
                if (it != by_layer.end()) {
                    for (const auto* image : it->second) owners.insert(image->owner);
                }
            } else {
                auto it = by_ref.find(occ.image);
                if (it != by_ref.end()) owners.insert(it->second->owner);
            }
            if (first) {
                common = digests_here;
                first = false;
            } else {
                std::set<std::string> next;
                std::set_intersection(common.begin(), common.end(), digests_here.begin(),
                                      digests_here.end(), std::inserter(next, next.begin()));
                common = std::move(next);
            }
            if (common.empty()) have_common_digest = false;
        }

        agg.owners[secret.key] = owners;
        agg.histogram[owners.size()]++;
        // Inherited spread: several owners, all occurrences via one shared
        // base layer.
        agg.inherited[secret.key] = owners.size() > 1 && have_common_digest && !common.empty();
    }
    return agg;
}

PathHistogram path_histogram(const std::vector<ValidatedSecret>& secrets, size_t top_k) {
    std::map<std::string, uint64_t> key_dirs, api_dirs;
    PathHistogram hist;

    for (const auto& secret : secrets) {
        std::set<std::string> dirs;
        bool env_seen = false;
        for (const auto& occ : secret.occurrences) {
            if (occ.origin == MatchOrigin::Env) {
                env_seen = true;
                continue;
            }
            dirs.insert(path_dirname(occ.locator));
        }
        bool is_key = secret.domain == Domain::PrivateKey;
        for (const auto& dir : dirs) (is_key ? key_dirs : api_dirs)[dir]++;
        if (env_seen) (is_key ? hist.env_private_key : hist.env_api)++;
    }

    auto rank = [top_k](const std::map<std::string, uint64_t>& counts) {
        std::vector<PathBucket> out;
        for (const auto& [prefix, count] : counts) out.push_back({prefix, count});
        std::sort(out.begin(), out.end(), [](const PathBucket& a, const PathBucket& b) {
            if (a.count != b.count) return a.count > b.count;
            return a.prefix < b.prefix;
        });
        if (out.size() > top_k) out.resize(top_k);
        return out;
    };
    hist.private_key = rank(key_dirs);
    hist.api = rank(api_dirs);
    return hist;
}

OriginSplit origin_split(const std::vector<ValidatedSecret>& secrets,
                         const std::vector<ImageRecord>& images) {
    OriginSplit splitres;
    auto by_layer = index_by_layer(images);
    auto by_ref = index_by_reference(images);

    std::set<const ImageRecord*> affected;
    for (const auto& secret : secrets) {
        for (const auto& occ : secret.occurrences) {
            if (!occ.layer_digest.empty()) {
                auto it = by_layer.find(occ.layer_digest);
                if (it != by_layer.end())
                    affected.insert(it->second.begin(), it->second.end());
            } else {
                auto it = by_ref.find(occ.image);
                if (it != by_ref.end()) affected.insert(it->second);
            }
        }
    }

    for (const auto& image : images) {
        bool hit = affected.count(&image) > 0;
        auto& population = image.from_hub ? splitres.hub : splitres.private_registries;
        population.population++;
        if (hit) population.affected++;

        bool standard = image.query_groups.count("standard") > 0;
        bool iiot = image.query_groups.count("iiot") > 0;
        if (standard && iiot) {
            splitres.both_groups_excluded++;
        } else if (standard) {
            splitres.standard_only.population++;
            if (hit) splitres.standard_only.affected++;
        } else if (iiot) {
            splitres.iiot_only.population++;
            if (hit) splitres.iiot_only.affected++;
        }
    }
    return splitres;
}

std::map<DistinctKey, OperationClass> attribute_secret_operations(
    const std::vector<ValidatedSecret>& secrets, const std::vector<ImageRecord>& images) {
    std::map<DistinctKey, OperationClass> out;
    auto by_layer = index_by_layer(images);

    for (const auto& secret : secrets) {
        std::vector<OperationClass> classes;
        for (const auto& occ : secret.occurrences) {
            if (occ.layer_digest.empty()) continue;
            auto it = by_layer.find(occ.layer_digest);
            if (it == by_layer.end()) continue;
            for (const auto* image : it->second) {
                auto pos = std::find(image->layer_digests.begin(), image->layer_digests.end(),
                                     occ.layer_digest);
                if (pos == image->layer_digests.end()) continue;
                size_t index = static_cast<size_t>(pos - image->layer_digests.begin());
                classes.push_back(attribute_history(image->config, index));
            }
        }
        out[secret.key] = combine_operations(classes);
    }
    return out;
}

}  // namespace imgscan
