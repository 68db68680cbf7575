#include "recpo/prompts.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "recpo/objectives.hpp"
#include "recpo/rng.hpp"

namespace recpo {

namespace {

const std::string& title_of(const std::map<std::int64_t, std::string>& titles, std::int64_t id) {
    const auto it = titles.find(id);
    if (it == titles.end())
        throw std::invalid_argument("render_prompt: no title for item " + std::to_string(id));
    return it->second;
}

}  // namespace

const std::vector<std::string>& prompt_templates() {
    static const std::vector<std::string> pool = {
        "Choose the one movie from the candidates that best continues this user's history and "
        "answer with its exact title.",
        "Pick the single candidate the user is most likely to watch and rate highly next; reply "
        "with that title only.",
        "From the candidate list above, select the movie this user would enjoy next and respond "
        "with just its title.",
    };
    return pool;
}

std::string render_prompt(const UserSequence& seq, int t, const CandidateSet& candidates,
                          const std::map<std::int64_t, std::string>& titles,
                          const RunConfig& cfg) {
    const auto view = history_view(seq, t, cfg.history_mode, cfg.include_scores);

    std::string out = "Given the user's recent viewing and rating history:\n";
    for (const Interaction& it : view) {
        out += title_of(titles, it.item_id);
        if (cfg.include_scores) {
            out += " | Rating: ";
            out += std::to_string(static_cast<long long>(std::llround(it.score)));
        }
        out += '\n';
    }
    out += "recommend a movie they will likely watch next and rate generously from following "
           "candidates:\n";

    Rng rng = stream_rng(cfg.seed, StreamTag::Template, static_cast<std::uint64_t>(seq.user_id),
                         static_cast<std::uint64_t>(t));
    const std::size_t tmpl = rng.below(prompt_templates().size());
    std::vector<int> display(candidates.items.size());
    std::iota(display.begin(), display.end(), 0);
    rng.shuffle(display);
    for (const int idx : display) out += title_of(titles, candidates.items[idx]) + '\n';

    out += prompt_templates()[tmpl];
    return out;
}

PromptRecord build_prompt_record(const UserSequence& seq, const TrainCutRecord& cut,
                                 const std::map<std::int64_t, std::string>& titles,
                                 const RunConfig& cfg) {
    PromptRecord rec;
    rec.prompt = render_prompt(seq, cut.t, cut.candidates, titles, cfg);
    rec.user_id = cut.user_id;
    rec.t = cut.t;
    rec.preferred = cut.group.preferred;
    rec.dispreferred = cut.group.dispreferred;
    rec.chosen = title_of(titles, cut.group.preferred.item_id);
    for (const ItemEvidence& ev : cut.group.dispreferred) {
        rec.rejected.push_back(title_of(titles, ev.item_id));
        rec.margins.push_back(cfg.margin.lambda == 0.0
                                  ? 0.0
                                  : margin(cfg.margin, rec.preferred.score, rec.preferred.latency,
                                           ev.score, ev.latency));
    }
    return rec;
}

void export_jsonl(const std::vector<PromptRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("export_jsonl: cannot open " + path);
    for (const PromptRecord& rec : records) {
        nlohmann::ordered_json j;
        j["prompt"] = rec.prompt;
        j["chosen"] = rec.chosen;
        j["rejected"] = rec.rejected;
        nlohmann::ordered_json meta;
        meta["user_id"] = rec.user_id;
        meta["t"] = rec.t;
        meta["preferred"] = {{"item_id", rec.preferred.item_id},
                             {"score", rec.preferred.score},
                             {"latency", rec.preferred.latency}};
        nlohmann::ordered_json disp = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < rec.dispreferred.size(); ++i) {
            const ItemEvidence& ev = rec.dispreferred[i];
            disp.push_back({{"item_id", ev.item_id},
                            {"score", ev.score},
                            {"latency", ev.latency},
                            {"margin", rec.margins[i]}});
        }
        meta["dispreferred"] = disp;
        j["metadata"] = meta;
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("export_jsonl: write failed for " + path);
}

std::vector<PromptRecord> import_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("import_jsonl: cannot open " + path);
    std::vector<PromptRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        PromptRecord rec;
        rec.prompt = j.at("prompt").get<std::string>();
        rec.chosen = j.at("chosen").get<std::string>();
        rec.rejected = j.at("rejected").get<std::vector<std::string>>();
        const auto& meta = j.at("metadata");
        rec.user_id = meta.at("user_id").get<std::int64_t>();
        rec.t = meta.at("t").get<int>();
        rec.preferred = {meta.at("preferred").at("item_id").get<std::int64_t>(),
                         meta.at("preferred").at("score").get<double>(),
                         meta.at("preferred").at("latency").get<double>()};
        for (const auto& d : meta.at("dispreferred")) {
            rec.dispreferred.push_back({d.at("item_id").get<std::int64_t>(),
                                        d.at("score").get<double>(),
                                        d.at("latency").get<double>()});
            rec.margins.push_back(d.at("margin").get<double>());
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace recpo
