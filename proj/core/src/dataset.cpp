#include "recpo/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace recpo {

using ordered_json = nlohmann::ordered_json;

ItemVocab ItemVocab::from_ids(std::vector<std::int64_t> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    ItemVocab v;
    v.ids = std::move(ids);
    v.index.reserve(v.ids.size());
    for (int i = 0; i < static_cast<int>(v.ids.size()); ++i) v.index[v.ids[i]] = i;
    return v;
}

ItemVocab ItemVocab::from_dataset(const Dataset& data) {
    std::vector<std::int64_t> ids;
    for (const auto& u : data.users)
        for (const auto& it : u.interactions) ids.push_back(it.item_id);
    return from_ids(std::move(ids));
}

std::unordered_map<std::int64_t, int> user_index(const Dataset& data) {
    std::unordered_map<std::int64_t, int> idx;
    idx.reserve(data.users.size());
    for (int i = 0; i < static_cast<int>(data.users.size()); ++i)
        idx[data.users[i].user_id] = i;
    return idx;
}

void save_dataset(const Dataset& data, const std::string& path) {
    ordered_json root;
    root["schema"] = "recpo.dataset.v1";
    ordered_json items = ordered_json::array();
    for (const auto& [id, title] : data.titles) {
        items.push_back({{"id", id}, {"title", title}});
    }
    root["items"] = std::move(items);
    ordered_json users = ordered_json::array();
    for (const auto& u : data.users) {
        ordered_json inter = ordered_json::array();
        for (const auto& it : u.interactions) {
            inter.push_back({{"item", it.item_id}, {"score", it.score}, {"ts", it.timestamp}});
        }
        users.push_back({{"user_id", u.user_id}, {"interactions", std::move(inter)}});
    }
    root["users"] = std::move(users);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << root.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    ordered_json root;
    try {
        in >> root;
    } catch (const std::exception& e) {
        throw std::runtime_error("malformed dataset json in " + path + ": " + e.what());
    }
    if (root.value("schema", "") != "recpo.dataset.v1")
        throw std::runtime_error("unexpected dataset schema in " + path);

    Dataset data;
    for (const auto& item : root.at("items")) {
        data.titles[item.at("id").get<std::int64_t>()] = item.at("title").get<std::string>();
    }
    for (const auto& user : root.at("users")) {
        UserSequence seq;
        seq.user_id = user.at("user_id").get<std::int64_t>();
        int pos = 0;
        for (const auto& it : user.at("interactions")) {
            Interaction rec;
            rec.item_id = it.at("item").get<std::int64_t>();
            rec.score = it.at("score").get<double>();
            rec.timestamp = it.at("ts").get<std::int64_t>();
            rec.position = pos++;
            seq.interactions.push_back(rec);
        }
        data.users.push_back(std::move(seq));
    }
    return data;
}

}  // namespace recpo
