#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "recpo/types.hpp"

namespace recpo {

/// In-memory dataset: validated user sequences plus item titles. Titles are
/// keyed by raw item id and kept sorted so file emission is byte-stable.
struct Dataset {
    std::map<std::int64_t, std::string> titles;
    std::vector<UserSequence> users;
};

/// Dense index over the item universe (ids occurring in interactions).
struct ItemVocab {
    std::vector<std::int64_t> ids;  // ascending
    std::unordered_map<std::int64_t, int> index;

    static ItemVocab from_ids(std::vector<std::int64_t> ids);
    static ItemVocab from_dataset(const Dataset& data);

    int size() const { return static_cast<int>(ids.size()); }
    int index_of(std::int64_t id) const {
        auto it = index.find(id);
        return it == index.end() ? -1 : it->second;
    }
};

std::unordered_map<std::int64_t, int> user_index(const Dataset& data);

/// Serializes to the recpo.dataset.v1 JSON layout; byte-stable for equal input.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace recpo
