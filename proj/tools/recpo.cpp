#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "recpo/config.hpp"
#include "recpo/dataset.hpp"
#include "recpo/eval.hpp"
#include "recpo/ingest.hpp"
#include "recpo/pipeline.hpp"
#include "recpo/policy.hpp"
#include "recpo/prompts.hpp"
#include "recpo/rng.hpp"
#include "recpo/synthetic.hpp"
#include "recpo/train.hpp"
#include "recpo/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Malformed invocations exit 2; anything thrown as std::exception exits 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config_path, "JSON config file");
    sub->add_option("--set", c.sets, "config override key=value (dotted paths, repeatable)");
    sub->add_option("--out", c.out_dir, "output directory (default: $RECPO_OUT_ROOT or ./out)");
    sub->add_option("--seed", c.seed, "override the run seed");
    sub->add_option("--jobs", c.jobs, "override the worker thread count");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error(path + " is not valid JSON");
    return j;
}

// Defaults <- config file <- --set overrides <- --seed/--jobs. The seed flag
// also retargets the synthetic generator so one flag reseeds a whole run.
json effective_config(const CommonOpts& c) {
    json base = recpo::default_config_json();
    if (!c.config_path.empty()) {
        const json file = read_json_file(c.config_path);
        if (!file.is_object()) throw std::runtime_error("config root must be an object");
        base.merge_patch(file);
    }
    // Override strings are part of the command line, so a bad one is a usage
    // error, not a module failure.
    for (const auto& s : c.sets) {
        try {
            recpo::apply_override(base, s);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (c.seed) {
        base["seed"] = *c.seed;
        base["synthetic"]["seed"] = *c.seed;
    }
    if (c.jobs) base["jobs"] = *c.jobs;
    return base;
}

// Canonical echo of the effective config; parsing first validates and fills
// defaults so the manifest alone can replay the run.
ordered_json canonical_echo(const json& tree) {
    ordered_json echo = recpo::run_config_to_json(recpo::run_config_from_json(tree));
    echo["synthetic"] =
        recpo::synthetic_spec_to_json(recpo::synthetic_spec_from_json(tree.at("synthetic")));
    return echo;
}

fs::path resolve_out(const CommonOpts& c) {
    fs::path out;
    if (!c.out_dir.empty()) {
        out = c.out_dir;
    } else if (const char* root = std::getenv("RECPO_OUT_ROOT")) {
        out = root;
    } else {
        out = "out";
    }
    fs::create_directories(out);
    return out;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing input " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (true) {
        in.read(buf, sizeof buf);
        const std::streamsize n = in.gcount();
        if (n <= 0) break;
        h = recpo::fnv1a64(buf, static_cast<std::size_t>(n), h);
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void write_manifest(const fs::path& out, const std::string& verb, const ordered_json& config,
                    std::uint64_t seed,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    const std::vector<std::string>& outputs, const ordered_json& metrics) {
    ordered_json m;
    m["schema"] = "recpo.manifest.v1";
    m["verb"] = verb;
    m["seed"] = seed;
    m["config"] = config;
    m["inputs"] = ordered_json::object();
    for (const auto& [name, path] : inputs)
        m["inputs"][name] = {{"path", path}, {"fnv1a64", file_hash_hex(path)}};
    m["outputs"] = outputs;
    m["metrics"] = metrics;
    const fs::path path = out / ("manifest-" + verb + ".json");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << m.dump(2) << '\n';
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

ordered_json rate_json(const std::optional<recpo::RateResult>& r) {
    if (!r) return nullptr;
    return {{"rate", r->rate}, {"successes", r->successes}, {"evaluated", r->evaluated}};
}

ordered_json stage_log(const recpo::TrainResult& r) {
    ordered_json j;
    j["initial_loss"] = r.initial_loss;
    j["best_epoch"] = r.best_epoch;
    j["best_valid_hr1"] = r.best_valid_hr1;
    ordered_json eps = ordered_json::array();
    for (const auto& e : r.epochs)
        eps.push_back({{"epoch", e.epoch},
                       {"mean_loss", e.mean_loss},
                       {"valid_hr1", e.valid_hr1},
                       {"clamped_margins", e.clamped_margins}});
    j["epochs"] = std::move(eps);
    return j;
}

recpo::Dataset load_data_checked(const std::string& path) {
    recpo::Dataset data = recpo::load_dataset(path);
    const auto violations = recpo::validate_dataset(data.users);
    if (!violations.empty())
        throw std::runtime_error(path + ": " + std::to_string(violations.size()) +
                                 " invariant violations; first user " +
                                 std::to_string(violations.front().user_id) + ": " +
                                 violations.front().kind);
    return data;
}

int cmd_synth(const CommonOpts& common) {
    const json tree = effective_config(common);
    const recpo::SyntheticSpec spec = recpo::synthetic_spec_from_json(tree.at("synthetic"));
    const fs::path out = resolve_out(common);

    const recpo::SyntheticData gen = recpo::generate_synthetic(spec);
    const std::string data_path = (out / "dataset.json").string();
    recpo::save_dataset(gen.data, data_path);

    std::size_t interactions = 0;
    for (const auto& u : gen.data.users) interactions += u.interactions.size();
    write_manifest(out, "synth", canonical_echo(tree), spec.seed, {{"dataset", data_path}},
                   {"dataset.json"},
                   {{"users", gen.data.users.size()},
                    {"items", gen.data.titles.size()},
                    {"interactions", interactions}});
    std::cout << "synth: " << gen.data.users.size() << " users, " << interactions
              << " interactions -> " << data_path << '\n';
    return 0;
}

int cmd_ingest(const CommonOpts& common, const std::string& ratings, const std::string& movies,
               const std::string& csv, bool implicit) {
    const bool movielens = !ratings.empty() || !movies.empty();
    if (movielens == !csv.empty())
        throw UsageError("ingest needs either --ratings with --movies, or --csv");
    if (movielens && (ratings.empty() || movies.empty()))
        throw UsageError("--ratings and --movies go together");

    const json tree = effective_config(common);
    const recpo::RunConfig cfg = recpo::run_config_from_json(tree);
    const fs::path out = resolve_out(common);

    recpo::ParseResult parsed =
        movielens ? recpo::parse_movielens(ratings, movies) : recpo::parse_csv(csv);
    const std::size_t raw_events = parsed.events.size();
    std::vector<recpo::RawEvent> events = recpo::kcore_filter(std::move(parsed.events), cfg.kcore);
    if (implicit) events = recpo::implicit_to_score(std::move(events), cfg.percentile_pool);

    recpo::SequenceBuildReport report;
    recpo::Dataset data = recpo::build_sequences(events, std::move(parsed.titles), &report);
    const auto violations = recpo::validate_dataset(data.users);
    if (!violations.empty())
        throw std::runtime_error("ingest produced " + std::to_string(violations.size()) +
                                 " invariant violations; first: " + violations.front().kind);

    const std::string data_path = (out / "dataset.json").string();
    recpo::save_dataset(data, data_path);

    std::vector<std::pair<std::string, std::string>> inputs;
    if (movielens) {
        inputs.emplace_back("ratings", ratings);
        inputs.emplace_back("movies", movies);
    } else {
        inputs.emplace_back("csv", csv);
    }
    std::size_t interactions = 0;
    for (const auto& u : data.users) interactions += u.interactions.size();
    write_manifest(out, "ingest", canonical_echo(tree), cfg.seed, inputs, {"dataset.json"},
                   {{"skipped_lines", parsed.skipped_lines},
                    {"events_parsed", raw_events},
                    {"events_kept", events.size()},
                    {"dropped_short_users", report.dropped_short_users},
                    {"users", data.users.size()},
                    {"interactions", interactions}});
    std::cout << "ingest: " << data.users.size() << " users, " << interactions
              << " interactions -> " << data_path << '\n';
    return 0;
}

int cmd_split(const CommonOpts& common, const std::string& data_path) {
    const json tree = effective_config(common);
    const recpo::RunConfig cfg = recpo::run_config_from_json(tree);
    const fs::path out = resolve_out(common);

    const recpo::Dataset data = load_data_checked(data_path);
    const recpo::ItemVocab vocab = recpo::ItemVocab::from_dataset(data);
    const recpo::SplitDataset split = recpo::build_split(data, vocab, cfg);
    const recpo::BehavioralSets behavioral = recpo::build_behavioral_sets(data, vocab, cfg);

    recpo::export_split_manifest(split, (out / "split.jsonl").string());
    recpo::export_behavioral_manifest(behavioral, (out / "behavioral.jsonl").string());

    write_manifest(out, "split", canonical_echo(tree), cfg.seed, {{"dataset", data_path}},
                   {"split.jsonl", "behavioral.jsonl"},
                   {{"train_cuts", split.train.size()},
                    {"valid_cuts", split.valid.size()},
                    {"test_cuts", split.test.size()},
                    {"dropped_valid", split.dropped_valid},
                    {"dropped_test", split.dropped_test},
                    {"skipped_train_cuts", split.skipped_train_cuts},
                    {"median_gap", split.median_gap},
                    {"adherence_cases", behavioral.adherence.size()},
                    {"avoidance_cases", behavioral.avoidance.size()},
                    {"aversion_cases", behavioral.aversion.size()}});
    std::cout << "split: " << split.train.size() << " train / " << split.valid.size()
              << " valid / " << split.test.size() << " test cuts -> " << (out / "split.jsonl")
              << '\n';
    return 0;
}

int cmd_export_prompts(const CommonOpts& common, const std::string& data_path) {
    const json tree = effective_config(common);
    const recpo::RunConfig cfg = recpo::run_config_from_json(tree);
    const fs::path out = resolve_out(common);

    const recpo::Dataset data = load_data_checked(data_path);
    const recpo::ItemVocab vocab = recpo::ItemVocab::from_dataset(data);
    const recpo::SplitDataset split = recpo::build_split(data, vocab, cfg);
    const auto by_user = recpo::user_index(data);

    std::vector<recpo::PromptRecord> records;
    records.reserve(split.train.size());
    for (const auto& cut : split.train) {
        const recpo::UserSequence& seq = data.users[by_user.at(cut.user_id)];
        records.push_back(recpo::build_prompt_record(seq, cut, data.titles, cfg));
    }
    const std::string path = (out / "prompts.jsonl").string();
    recpo::export_jsonl(records, path);

    write_manifest(out, "export-prompts", canonical_echo(tree), cfg.seed,
                   {{"dataset", data_path}}, {"prompts.jsonl"},
                   {{"records", records.size()}});
    std::cout << "export-prompts: " << records.size() << " records -> " << path << '\n';
    return 0;
}

int cmd_train(const CommonOpts& common, const std::string& data_path, const std::string& stage,
              const std::string& init_path) {
    if (!init_path.empty() && stage != "align")
        throw UsageError("--init only applies to --stage align");
    if (stage == "align" && init_path.empty())
        throw UsageError("--stage align needs --init <sft checkpoint>");

    const json tree = effective_config(common);
    const recpo::RunConfig cfg = recpo::run_config_from_json(tree);
    const fs::path out = resolve_out(common);

    const recpo::Dataset data = load_data_checked(data_path);
    const recpo::ItemVocab vocab = recpo::ItemVocab::from_dataset(data);
    const recpo::SplitDataset split = recpo::build_split(data, vocab, cfg);

    std::vector<std::pair<std::string, std::string>> inputs{{"dataset", data_path}};
    std::vector<std::string> outputs;
    ordered_json metrics;
    ordered_json log;

    std::optional<recpo::PolicyParams> sft_params;
    if (stage != "align") {
        recpo::TrainResult r = recpo::train_sft(data, vocab, split, cfg);
        recpo::save_policy((out / "sft.ckpt").string(), r.params, vocab);
        outputs.emplace_back("sft.ckpt");
        log["sft"] = stage_log(r);
        metrics["sft"] = {{"initial_loss", r.initial_loss},
                          {"best_epoch", r.best_epoch},
                          {"best_valid_hr1", r.best_valid_hr1}};
        sft_params = std::move(r.params);
    } else {
        auto [params, ck_vocab] = recpo::load_policy(init_path);
        if (ck_vocab.ids != vocab.ids)
            throw std::runtime_error("checkpoint vocabulary does not match " + data_path);
        inputs.emplace_back("init", init_path);
        sft_params = std::move(params);
    }

    if (stage != "sft") {
        if (cfg.objective == recpo::Objective::Sft) {
            metrics["align"] = "skipped: objective is sft";
        } else {
            const recpo::TrainResult r = recpo::train_align(*sft_params, data, vocab, split, cfg);
            recpo::save_policy((out / "aligned.ckpt").string(), r.params, vocab);
            outputs.emplace_back("aligned.ckpt");
            log["align"] = stage_log(r);
            metrics["align"] = {{"initial_loss", r.initial_loss},
                                {"best_epoch", r.best_epoch},
                                {"best_valid_hr1", r.best_valid_hr1}};
        }
    }

    {
        const fs::path log_path = out / "train_log.json";
        std::ofstream f(log_path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + log_path.string());
        f << log.dump(2) << '\n';
        outputs.emplace_back("train_log.json");
    }
    write_manifest(out, "train", canonical_echo(tree), cfg.seed, inputs, outputs, metrics);
    std::cout << "train: stage " << stage << " done -> " << out << '\n';
    return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& data_path, const std::string& ckpt) {
    const json tree = effective_config(common);
    const recpo::RunConfig cfg = recpo::run_config_from_json(tree);
    const fs::path out = resolve_out(common);

    const recpo::Dataset data = load_data_checked(data_path);
    const recpo::ItemVocab vocab = recpo::ItemVocab::from_dataset(data);
    const recpo::SplitDataset split = recpo::build_split(data, vocab, cfg);
    const recpo::BehavioralSets behavioral = recpo::build_behavioral_sets(data, vocab, cfg);

    auto [params, ck_vocab] = recpo::load_policy(ckpt);
    if (ck_vocab.ids != vocab.ids)
        throw std::runtime_error("checkpoint vocabulary does not match " + data_path);
    const recpo::Scorer scorer = recpo::policy_scorer(params, vocab, cfg);

    std::vector<recpo::DecisionRecord> decisions;
    const recpo::MetricReport report =
        recpo::build_report(data, vocab, split.test, behavioral, cfg, scorer, &decisions);
    recpo::emit_report(report, (out / "report.json").string(), recpo::ReportFormat::Json);
    recpo::emit_report(report, (out / "report.txt").string(), recpo::ReportFormat::Text);
    recpo::write_decision_log(decisions, (out / "decisions.jsonl").string());

    write_manifest(out, "eval", canonical_echo(tree), cfg.seed,
                   {{"dataset", data_path}, {"checkpoint", ckpt}},
                   {"report.json", "report.txt", "decisions.jsonl"},
                   {{"hit_ratio_at1", rate_json(report.hit_ratio_at1)},
                    {"valid_ratio", rate_json(report.valid_ratio)},
                    {"adherence_rate", rate_json(report.adherence_rate)},
                    {"avoidance_rate", rate_json(report.avoidance_rate)},
                    {"aversion_accuracy", rate_json(report.aversion_accuracy)},
                    {"decisions", decisions.size()}});
    std::cout << "eval: " << decisions.size() << " decisions -> " << (out / "report.json")
              << '\n';
    return 0;
}

double cell(const std::optional<recpo::RateResult>& r) {
    return r ? r->rate : std::numeric_limits<double>::quiet_NaN();
}

int cmd_ablate(const CommonOpts& common, const std::string& data_path) {
    const json tree = effective_config(common);
    const recpo::RunConfig base_cfg = recpo::run_config_from_json(tree);
    const fs::path out = resolve_out(common);

    const recpo::Dataset data = load_data_checked(data_path);
    const recpo::ItemVocab vocab = recpo::ItemVocab::from_dataset(data);
    const recpo::SplitDataset split = recpo::build_split(data, vocab, base_cfg);
    const recpo::BehavioralSets behavioral = recpo::build_behavioral_sets(data, vocab, base_cfg);

    const recpo::TrainResult sft = recpo::train_sft(data, vocab, split, base_cfg);

    const auto run_row = [&](recpo::RunConfig cfg, const char* label,
                             const std::optional<recpo::MarginKind> kind,
                             const std::optional<double> lambda) {
        const recpo::TrainResult r = recpo::train_align(sft.params, data, vocab, split, cfg);
        const recpo::Scorer scorer = recpo::policy_scorer(r.params, vocab, cfg);
        const recpo::MetricReport rep =
            recpo::build_report(data, vocab, split.test, behavioral, cfg, scorer, nullptr);
        ordered_json row;
        row["objective"] = label;
        row["kind"] = kind ? ordered_json(recpo::to_string(*kind)) : ordered_json(nullptr);
        row["lambda"] = lambda ? ordered_json(*lambda) : ordered_json(nullptr);
        row["hit_ratio_at1"] = rate_json(rep.hit_ratio_at1);
        row["valid_ratio"] = rate_json(rep.valid_ratio);
        row["adherence_rate"] = rate_json(rep.adherence_rate);
        row["avoidance_rate"] = rate_json(rep.avoidance_rate);
        row["aversion_accuracy"] = rate_json(rep.aversion_accuracy);
        row["bucket_cv"] = rep.buckets.cv ? ordered_json(*rep.buckets.cv) : ordered_json(nullptr);
        return std::pair<ordered_json, recpo::MetricReport>(std::move(row), rep);
    };

    std::vector<ordered_json> rows;
    std::string table;
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %-10s %7s %8s %8s %8s %8s %8s %8s\n", "objective",
                  "kind", "lambda", "hr@1", "valid", "adhere", "avoid", "aversion", "cv");
    table += line;
    const auto add_text_row = [&](const ordered_json& row, const recpo::MetricReport& rep) {
        const std::string kind = row["kind"].is_null() ? "-" : row["kind"].get<std::string>();
        const std::string lambda =
            row["lambda"].is_null() ? "-" : [&] {
                std::snprintf(line, sizeof line, "%g", row["lambda"].get<double>());
                return std::string(line);
            }();
        std::snprintf(line, sizeof line,
                      "%-10s %-10s %7s %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                      row["objective"].get<std::string>().c_str(), kind.c_str(), lambda.c_str(),
                      cell(rep.hit_ratio_at1), cell(rep.valid_ratio), cell(rep.adherence_rate),
                      cell(rep.avoidance_rate), cell(rep.aversion_accuracy),
                      rep.buckets.cv.value_or(std::numeric_limits<double>::quiet_NaN()));
        table += line;
    };

    {
        recpo::RunConfig cfg = base_cfg;
        cfg.objective = recpo::Objective::SDpo;
        auto [row, rep] = run_row(cfg, "sdpo", std::nullopt, std::nullopt);
        add_text_row(row, rep);
        rows.push_back(std::move(row));
    }
    const recpo::MarginKind kinds[] = {recpo::MarginKind::Ratio, recpo::MarginKind::LogDiff,
                                       recpo::MarginKind::LogRatio};
    const double lambdas[] = {0.0, 0.5, 1.0, 2.0, 3.0};
    for (const auto kind : kinds) {
        for (const double lambda : lambdas) {
            recpo::RunConfig cfg = base_cfg;
            cfg.objective = recpo::Objective::RecPo;
            cfg.margin.kind = kind;
            cfg.margin.lambda = lambda;
            auto [row, rep] = run_row(cfg, "recpo", kind, lambda);
            add_text_row(row, rep);
            rows.push_back(std::move(row));
        }
    }

    ordered_json doc;
    doc["schema"] = "recpo.ablation.v1";
    doc["config"] = canonical_echo(tree);
    doc["rows"] = rows;
    {
        std::ofstream f(out / "ablation.json", std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write ablation.json");
        f << doc.dump(2) << '\n';
    }
    {
        std::ofstream f(out / "ablation.txt", std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write ablation.txt");
        f << table;
    }
    write_manifest(out, "ablate", canonical_echo(tree), base_cfg.seed, {{"dataset", data_path}},
                   {"ablation.json", "ablation.txt"}, {{"rows", rows.size()}});
    std::cout << "ablate: " << rows.size() << " rows -> " << (out / "ablation.json") << '\n';
    return 0;
}

std::string first_line(const std::string& s) {
    const auto nl = s.find('\n');
    return nl == std::string::npos ? s : s.substr(0, nl);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale preference-optimization lab for sequential recommendation"};
    app.require_subcommand(1);

    CommonOpts c_ingest, c_synth, c_split, c_prompts, c_train, c_eval, c_ablate;
    std::string ratings, movies, csv;
    bool implicit = false;
    std::string split_data, prompts_data, train_data, eval_data, ablate_data;
    std::string stage = "both", init_path, ckpt;

    CLI::App* s_ingest = app.add_subcommand("ingest", "parse raw logs into a dataset");
    add_common(s_ingest, c_ingest);
    s_ingest->add_option("--ratings", ratings, "MovieLens ratings.dat");
    s_ingest->add_option("--movies", movies, "MovieLens movies.dat");
    s_ingest->add_option("--csv", csv, "generic user_id,item_id,value,timestamp log");
    s_ingest->add_flag("--implicit", implicit, "convert engagement values to 1-5 scores");

    CLI::App* s_synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(s_synth, c_synth);

    CLI::App* s_split = app.add_subcommand("split", "build train/valid/test cut manifests");
    add_common(s_split, c_split);
    s_split->add_option("--data", split_data, "dataset.json")->required();

    CLI::App* s_prompts =
        app.add_subcommand("export-prompts", "render training cuts as prompt JSONL");
    add_common(s_prompts, c_prompts);
    s_prompts->add_option("--data", prompts_data, "dataset.json")->required();

    CLI::App* s_train = app.add_subcommand("train", "run SFT and preference alignment");
    add_common(s_train, c_train);
    s_train->add_option("--data", train_data, "dataset.json")->required();
    s_train->add_option("--stage", stage, "sft | align | both (default both)")
        ->check(CLI::IsMember({"sft", "align", "both"}));
    s_train->add_option("--init", init_path, "SFT checkpoint to start alignment from");

    CLI::App* s_eval = app.add_subcommand("eval", "score a checkpoint on the held-out cuts");
    add_common(s_eval, c_eval);
    s_eval->add_option("--data", eval_data, "dataset.json")->required();
    s_eval->add_option("--ckpt", ckpt, "policy checkpoint")->required();

    CLI::App* s_ablate =
        app.add_subcommand("ablate", "sweep margin kind and strength, one table");
    add_common(s_ablate, c_ablate);
    s_ablate->add_option("--data", ablate_data, "dataset.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (s_ingest->parsed()) return cmd_ingest(c_ingest, ratings, movies, csv, implicit);
        if (s_synth->parsed()) return cmd_synth(c_synth);
        if (s_split->parsed()) return cmd_split(c_split, split_data);
        if (s_prompts->parsed()) return cmd_export_prompts(c_prompts, prompts_data);
        if (s_train->parsed()) return cmd_train(c_train, train_data, stage, init_path);
        if (s_eval->parsed()) return cmd_eval(c_eval, eval_data, ckpt);
        if (s_ablate->parsed()) return cmd_ablate(c_ablate, ablate_data);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << first_line(e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "recpo: " << first_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}
