#pragma once

// Command-line front end. Every setting has a dotted name ("train.epochs",
// "paths.manifest", ...) usable both as a key path in the JSON config file
// and as a flag; flags win over the config file, and --seed sits between
// the two (it fills every *.seed the flags do not set explicitly).
//
// Exit codes: 0 success, 1 I/O or runtime failure, 2 validation or config
// error, 3 degenerate statistics.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "disqa/annotations.hpp"
#include "disqa/dataset.hpp"
#include "disqa/features.hpp"
#include "disqa/metrics.hpp"
#include "disqa/model.hpp"
#include "disqa/pipeline.hpp"
#include "disqa/report.hpp"
#include "disqa/synth.hpp"

namespace disqa::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kRuntime = 1, kInvalid = 2, kDegenerate = 3 };

// ---------------------------------------------------------------------------
// Settings: a flat dotted-key view over config file + flags.

class Settings {
public:
    void merge_json(const nlohmann::json& j, const std::string& prefix = {}) {
        if (!j.is_object()) throw ValidationError("config: expected an object" + (prefix.empty() ? "" : " at " + prefix));
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto key = prefix.empty() ? it.key() : prefix + "." + it.key();
            // perspective_bias is an object-valued leaf.
            if (it->is_object() && key != "synth.perspective_bias")
                merge_json(*it, key);
            else
                values_[key] = *it;
        }
    }

    void set(const std::string& key, nlohmann::json v) { values_[key] = std::move(v); }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::vector<std::string> keys() const {
        std::vector<std::string> k;
        for (const auto& [key, _] : values_) k.push_back(key);
        return k;
    }

    std::string str(const std::string& key, std::string fallback = {}) const {
        auto it = values_.find(key);
        if (it == values_.end() || it->second.is_null()) return fallback;
        if (it->second.is_string()) return it->second.get<std::string>();
        return it->second.dump();
    }

    template <typename T>
    T number(const std::string& key, T fallback) const {
        auto it = values_.find(key);
        if (it == values_.end() || it->second.is_null()) return fallback;
        try {
            const auto v = it->second.is_string() ? nlohmann::json::parse(it->second.get<std::string>()) : it->second;
            if (!v.is_number()) throw ValidationError("");
            if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ValidationError("");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) throw ValidationError("");
                }
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw ValidationError("setting '" + key + "' must be " +
                                  (std::is_integral_v<T> ? "an integer" : "a number") + ", got " + str(key));
        }
    }

    std::optional<int> optional_int(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end() || it->second.is_null() || (it->second.is_string() && str(key) == "null"))
            return std::nullopt;
        return number<int>(key, 0);
    }

    bool boolean(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end() || it->second.is_null()) return fallback;
        if (it->second.is_boolean()) return it->second.get<bool>();
        const auto s = str(key);
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw ValidationError("setting '" + key + "' must be a boolean, got " + s);
    }

    nlohmann::json raw(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return nullptr;
        if (it->second.is_string()) {
            try {
                return nlohmann::json::parse(it->second.get<std::string>());
            } catch (const nlohmann::json::exception&) {
                return it->second;
            }
        }
        return it->second;
    }

private:
    std::map<std::string, nlohmann::json> values_;
};

struct OptionSpec {
    const char* key;
    const char* alias; // extra flag name, may be empty
    const char* help;
};

// Every recognised dotted setting.
inline const std::vector<OptionSpec>& option_specs() {
    static const std::vector<OptionSpec> specs = {
        {"paths.manifest", "manifest", "annotation manifest (JSON lines)"},
        {"paths.features", "features", "AEVF feature file"},
        {"paths.split", "split", "split document (JSON)"},
        {"paths.model", "model", "AEVM model file"},
        {"paths.clips", "clips", "clip list with prompts: synth truth.json or JSON lines"},
        {"paths.out", "out", "output directory"},
        {"soft_label.sigma", "", "Gaussian kernel width in score points"},
        {"filter.probe_threshold", "", "consistency probe threshold"},
        {"filter.spread_threshold", "", "inter-rater range filter threshold (off unless set)"},
        {"filter.required_raters", "", "raters expected per (clip, dimension, perspective)"},
        {"split.ratios", "", "train/val/test ratios as a JSON array"},
        {"split.seed", "", "split seed"},
        {"split.mode", "", "system_holdout | clip_random"},
        {"train.epochs", "", "training epochs"},
        {"train.learning_rate", "", "gradient descent step size"},
        {"train.batch_size", "", "mini-batch size"},
        {"train.seed", "", "training seed"},
        {"train.momentum", "", "momentum coefficient (0 = plain gradient descent)"},
        {"train.standardize", "", "z-score features during training"},
        {"loss.alpha", "", "KL weight"},
        {"loss.lambda", "", "mean squared error weight"},
        {"loss.mode", "", "full | regression (+R) | kl (+KL)"},
        {"eval.subset", "", "train | val | test"},
        {"eval.svg", "", "also write report.svg"},
        {"report.bin_width", "", "prompt length bin width in words"},
        {"synth.n_systems", "", ""},
        {"synth.clips_per_system", "", ""},
        {"synth.feature_dim", "", ""},
        {"synth.rater_noise_sd", "", ""},
        {"synth.perspective_bias", "", "JSON object {dim: {perspective: offset}}"},
        {"synth.feature_noise_sd", "", ""},
        {"synth.probe_rate", "", ""},
        {"synth.seed", "", ""},
        {"strict", "", ""},
    };
    return specs;
}

// ---------------------------------------------------------------------------
// File helpers

inline std::ifstream open_input(const std::string& path, const char* what, bool binary = false) {
    if (path.empty()) throw ValidationError(std::string("missing required path: ") + what);
    if (!fs::exists(path)) throw ValidationError(std::string(what) + " not found: " + path);
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw ValidationError(std::string("cannot open ") + what + ": " + path);
    return in;
}

inline fs::path ensure_out_dir(const Settings& s) {
    const auto out = s.str("paths.out");
    if (out.empty()) throw ValidationError("missing required path: paths.out");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out + ": " + ec.message());
    return out;
}

inline void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    body(out);
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

inline void write_text(const fs::path& path, const std::string& text) {
    write_file(path, [&](std::ostream& o) { o << text; });
}

// ---------------------------------------------------------------------------
// Typed views

inline SoftLabelConfig soft_label_config(const Settings& s) {
    SoftLabelConfig c;
    c.sigma = s.number<double>("soft_label.sigma", c.sigma);
    c.validate();
    return c;
}

inline TargetOptions target_options(const Settings& s) {
    TargetOptions o;
    o.soft = soft_label_config(s);
    o.probe_threshold = s.number<int>("filter.probe_threshold", o.probe_threshold);
    o.spread_threshold = s.optional_int("filter.spread_threshold");
    o.required_raters = s.number<int>("filter.required_raters", o.required_raters);
    o.strict = s.boolean("strict", false);
    return o;
}

inline SplitSpec split_spec(const Settings& s) {
    SplitSpec spec;
    if (s.has("split.ratios")) {
        try {
            spec.ratios = s.raw("split.ratios").get<std::array<double, 3>>();
        } catch (const nlohmann::json::exception&) {
            throw ValidationError("split.ratios must be an array of three numbers");
        }
    }
    spec.seed = s.number<std::uint64_t>("split.seed", spec.seed);
    spec.mode = parse_split_mode(s.str("split.mode", std::string(to_string(spec.mode))));
    spec.validate();
    return spec;
}

inline TrainConfig train_config(const Settings& s) {
    TrainConfig c;
    c.epochs = s.number<int>("train.epochs", c.epochs);
    c.learning_rate = s.number<double>("train.learning_rate", c.learning_rate);
    c.batch_size = s.number<int>("train.batch_size", c.batch_size);
    c.seed = s.number<std::uint64_t>("train.seed", c.seed);
    c.momentum = s.number<double>("train.momentum", c.momentum);
    c.standardize = s.boolean("train.standardize", c.standardize);
    c.loss.alpha = s.number<double>("loss.alpha", c.loss.alpha);
    c.loss.lambda = s.number<double>("loss.lambda", c.loss.lambda);
    c.loss.mode = parse_loss_mode(s.str("loss.mode", "full"));
    c.validate();
    return c;
}

inline SynthConfig synth_config(const Settings& s) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& key : s.keys()) {
        if (key.rfind("synth.", 0) != 0) continue;
        j[key.substr(6)] = s.raw(key);
    }
    return synth_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Shared loading

struct Loaded {
    std::vector<RatingRecord> records;
    std::vector<ClipEntry> clips;
};

inline Loaded load_manifest(const Settings& s) {
    auto in = open_input(s.str("paths.manifest"), "manifest");
    Loaded l;
    l.records = parse_ratings(in, {s.boolean("strict", false)});
    l.clips = clips_from_ratings(l.records);
    return l;
}

inline FeatureSet load_features(const Settings& s) {
    auto in = open_input(s.str("paths.features"), "feature file", true);
    return read_features(in);
}

inline StoredSplit load_split(const Settings& s) {
    auto in = open_input(s.str("paths.split"), "split file");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed split document: ") + e.what());
    }
    return split_from_json(j);
}

// Clip list with prompts from either a synth truth document or JSON lines.
inline std::vector<ClipEntry> load_clip_list(const std::string& path) {
    auto in = open_input(path, "clip list");
    std::stringstream buf;
    buf << in.rdbuf();
    const auto text = buf.str();
    try {
        auto j = nlohmann::json::parse(text);
        if (j.is_object() && j.contains("clips")) return truth_from_json(j).clips;
    } catch (const nlohmann::json::exception&) {
    }
    std::vector<ClipEntry> clips;
    std::istringstream lines(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            clips.push_back({j.at("clip_id").get<std::string>(), j.at("system_id").get<std::string>(),
                             j.value("prompt", std::string{})});
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(n, std::string("malformed clip entry: ") + e.what());
        }
    }
    return clips;
}

inline void check_split(const StoredSplit& sp, std::span<const ClipEntry> clips) {
    const auto violations = verify_split(sp.split, clips, sp.spec.mode);
    if (violations.empty()) return;
    std::string msg = "split fails verification:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw ValidationError(msg);
}

struct Prepared {
    Loaded manifest;
    PreparedTargets targets;
    JoinResult join;
    StoredSplit split;
};

inline Prepared prepare(const Settings& s, std::ostream& log) {
    Prepared p;
    p.manifest = load_manifest(s);
    auto features = load_features(s);
    p.split = load_split(s);
    check_split(p.split, p.manifest.clips);
    p.targets = prepare_targets(p.manifest.records, target_options(s));
    p.join = join_features(features, p.targets.targets);
    if (!p.join.features_only.empty() || !p.join.targets_only.empty() || !p.join.incomplete.empty())
        log << "warning: " << p.join.features_only.size() << " clips without targets, " << p.join.targets_only.size()
            << " without features, " << p.join.incomplete.size() << " with incomplete heads\n";
    return p;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_synth(const Settings& s, std::ostream& out) {
    const auto cfg = synth_config(s);
    const auto dir = ensure_out_dir(s);
    const auto data = generate(cfg);
    write_file(dir / "ratings.jsonl", [&](std::ostream& o) { write_ratings(data.ratings, o); });
    std::size_t bytes = 0;
    write_file(dir / "features.aevf", [&](std::ostream& o) { bytes = write_features(data.features, o); }, true);
    write_text(dir / "truth.json", truth_to_json(data, cfg).dump(1) + "\n");
    out << "clips " << data.clips.size() << "\n"
        << "systems " << cfg.n_systems << "\n"
        << "ratings " << data.ratings.size() << "\n"
        << "features " << data.features.vectors.size() << " x " << data.features.dim << " (" << bytes << " bytes)\n";
    return kOk;
}

inline int cmd_validate(const Settings& s, std::ostream& out) {
    const bool strict = s.boolean("strict", false);
    auto manifest = load_manifest(s);
    const auto opts = target_options(s);
    const auto probe = consistency_filter(manifest.records, opts.probe_threshold);
    const auto grouped = group_ratings(probe.kept, opts.required_raters, strict);
    out << "records " << manifest.records.size() << "\n"
        << "clips " << manifest.clips.size() << "\n"
        << "probe_discarded " << probe.discarded.size() << "\n"
        << "groups " << grouped.groups.size() << "\n"
        << "incomplete_groups " << grouped.incomplete.size() << "\n";
    bool ok = true;
    if (!s.str("paths.features").empty()) {
        const auto features = load_features(s);
        const auto targets = build_targets(grouped, opts.soft);
        const auto join = join_features(features, targets);
        out << "features " << features.vectors.size() << " x " << features.dim << "\n"
            << "joined " << join.examples.size() << "\n"
            << "features_only " << join.features_only.size() << "\n"
            << "targets_only " << join.targets_only.size() << "\n"
            << "incomplete_clips " << join.incomplete.size() << "\n";
        if (strict && (!join.targets_only.empty() || !join.incomplete.empty())) ok = false;
    }
    if (!s.str("paths.split").empty()) {
        const auto sp = load_split(s);
        const auto violations = verify_split(sp.split, manifest.clips, sp.spec.mode);
        out << "split_violations " << violations.size() << "\n";
        for (const auto& v : violations) out << "  " << v.message << "\n";
        if (!violations.empty()) ok = false;
    }
    if (!ok) throw ValidationError("validation failed");
    return kOk;
}

inline int cmd_split(const Settings& s, std::ostream& out) {
    const auto spec = split_spec(s);
    std::vector<ClipEntry> clips;
    if (!s.str("paths.manifest").empty())
        clips = load_manifest(s).clips;
    else
        clips = load_clip_list(s.str("paths.clips"));
    const auto dir = ensure_out_dir(s);
    const auto sp = split(clips, spec);
    const auto violations = verify_split(sp, clips, spec.mode);
    if (!violations.empty()) throw Error("internal: produced split fails verification: " + violations.front().message);
    write_text(dir / "split.json", split_to_json(sp, spec).dump(1) + "\n");
    out << "train " << sp.train.size() << "\nval " << sp.val.size() << "\ntest " << sp.test.size() << "\n";
    if (sp.val.empty() || sp.test.empty())
        out << "warning: " << (sp.val.empty() ? "val" : "test") << " partition is empty; add systems or adjust split.ratios\n";
    return kOk;
}

inline int cmd_targets(const Settings& s, std::ostream& out) {
    const auto manifest = load_manifest(s);
    const auto prepared = prepare_targets(manifest.records, target_options(s));
    const auto dir = ensure_out_dir(s);
    write_file(dir / "targets.jsonl", [&](std::ostream& o) { write_targets(prepared.targets, o); });
    out << "records " << manifest.records.size() << "\n"
        << "probe_discarded " << prepared.discarded_by_probe << "\n"
        << "spread_discarded " << prepared.discarded_by_spread << "\n"
        << "incomplete_groups " << prepared.incomplete.size() << "\n"
        << "targets " << prepared.targets.size() << "\n";
    return kOk;
}

inline int cmd_train(const Settings& s, std::ostream& out, std::ostream& log) {
    const auto cfg = train_config(s);
    const auto p = prepare(s, log);
    const auto train_set = select_examples(p.join.examples, p.split.split.train);
    const auto val_set = select_examples(p.join.examples, p.split.split.val);
    if (train_set.empty()) throw ValidationError("no training examples after joining features and targets");
    if (val_set.empty()) throw ValidationError("no validation examples after joining features and targets");
    const auto dir = ensure_out_dir(s);
    const auto result = train(train_set, val_set, cfg);
    write_file(dir / "model.aevm", [&](std::ostream& o) { write_model(result.model, o); }, true);
    write_file(dir / "history.jsonl", [&](std::ostream& o) { write_history(result.history, o); });
    out << "train " << train_set.size() << " val " << val_set.size() << "\n";
    for (const auto& r : result.history)
        out << "epoch " << r.epoch << " train_loss " << detail::num(r.train_loss) << " val_loss "
            << detail::num(r.val_loss) << "\n";
    out << "selected epoch " << result.best_epoch << "\n";
    return kOk;
}

inline int cmd_eval(const Settings& s, std::ostream& out, std::ostream& log) {
    auto model_in = open_input(s.str("paths.model"), "model file", true);
    const auto model = read_model(model_in);
    const auto p = prepare(s, log);
    const auto subset = s.str("eval.subset", "test");
    const std::vector<std::string>* ids = nullptr;
    if (subset == "train") ids = &p.split.split.train;
    else if (subset == "val") ids = &p.split.split.val;
    else if (subset == "test") ids = &p.split.split.test;
    else throw ValidationError("eval.subset must be train, val or test");
    const auto examples = select_examples(p.join.examples, *ids);
    if (examples.empty()) throw ValidationError("evaluation subset '" + subset + "' is empty");
    if (!examples.empty() && examples.front().x.size() != model.dim)
        throw ValidationError("feature dimension " + std::to_string(examples.front().x.size()) +
                              " does not match model dimension " + std::to_string(model.dim));

    const auto report = evaluate(predicted_means(model, examples), target_means(examples), system_map(p.manifest.clips));
    const auto dir = ensure_out_dir(s);
    write_text(dir / "report.json", render_report(report, ReportFormat::Json));
    write_text(dir / "report.csv", render_report(report, ReportFormat::CSV));
    if (s.boolean("eval.svg", true)) write_text(dir / "report.svg", render_report(report, ReportFormat::SVG));
    out << "subset " << subset << ": " << report.n_utterances << " clips, " << report.n_systems << " systems\n"
        << format_pcc_table(report);
    return kOk;
}

inline int cmd_report(const Settings& s, std::ostream& out) {
    const auto manifest = load_manifest(s);
    DatasetStats stats;
    stats.scores = score_histograms(manifest.records);
    if (!s.str("paths.clips").empty())
        stats.prompt_lengths = prompt_length_histogram(load_clip_list(s.str("paths.clips")),
                                                       s.number<int>("report.bin_width", 1));

    const auto prepared = prepare_targets(manifest.records, target_options(s));
    MeanScores means;
    std::map<std::string, int> head_count;
    for (const auto& t : prepared.targets) {
        means[t.clip_id][head_index(t.dimension, t.perspective)] = t.mean;
        head_count[t.clip_id]++;
    }
    for (auto it = means.begin(); it != means.end();)
        it = head_count[it->first] == kNumHeads ? std::next(it) : means.erase(it);
    if (!means.empty()) {
        const auto [expert, nonexpert] = by_perspective(means);
        const auto systems = system_map(manifest.records);
        stats.cross_group = CrossGroupSummary{
            cross_group_correlation(expert, nonexpert, AggregationLevel::Clip),
            cross_group_correlation(expert, nonexpert, AggregationLevel::System, systems)};
    }

    const auto dir = ensure_out_dir(s);
    write_text(dir / "stats.json", render_report(stats, ReportFormat::Json));
    write_text(dir / "stats.csv", render_report(stats, ReportFormat::CSV));
    write_text(dir / "stats.svg", render_report(stats, ReportFormat::SVG));
    out << "records " << manifest.records.size() << "\n";
    if (stats.cross_group) {
        out << "expert/non-expert PCC  clip    system\n";
        for (int d = 0; d < kNumDimensions; ++d)
            out << "  " << to_string(static_cast<Dimension>(d)) << "                  "
                << detail::num(stats.cross_group->clip[d], 3) << "   " << detail::num(stats.cross_group->system[d], 3)
                << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"disqa: distributional quality assessment toolkit for text-to-audio ratings"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool strict = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "seed for split, training and synthesis");
    app.add_flag("--strict", strict, "reject unknown manifest fields and incomplete rater groups");

    struct Command {
        const char* name;
        const char* help;
        std::vector<std::string> prefixes; // option groups shown on this command
    };
    const std::vector<Command> commands = {
        {"synth", "generate a synthetic dataset", {"paths.out", "synth."}},
        {"validate", "check manifest, features and split consistency",
         {"paths.manifest", "paths.features", "paths.split", "filter.", "soft_label."}},
        {"split", "partition clips into train/val/test", {"paths.manifest", "paths.clips", "paths.out", "split."}},
        {"targets", "build soft target distributions", {"paths.manifest", "paths.out", "filter.", "soft_label."}},
        {"train", "train the ten-head probe",
         {"paths.manifest", "paths.features", "paths.split", "paths.out", "filter.", "soft_label.", "train.", "loss."}},
        {"eval", "evaluate a model at utterance and system level",
         {"paths.manifest", "paths.features", "paths.split", "paths.model", "paths.out", "filter.", "soft_label.",
          "eval."}},
        {"report", "dataset statistics and charts",
         {"paths.manifest", "paths.clips", "paths.out", "filter.", "soft_label.", "report."}},
    };

    std::map<std::string, std::optional<std::string>> flag_values;
    for (const auto& spec : option_specs()) flag_values[spec.key];
    std::map<std::string, CLI::App*> subs;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        subs[c.name] = sub;
        for (const auto& spec : option_specs()) {
            const std::string key = spec.key;
            const bool shown = std::any_of(c.prefixes.begin(), c.prefixes.end(),
                                           [&](const std::string& p) { return key.rfind(p, 0) == 0; });
            if (!shown) continue;
            std::string names = "--" + key;
            if (*spec.alias) names += ",--" + std::string(spec.alias);
            sub->add_option(names, flag_values[key], spec.help);
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        Settings settings;
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) throw ValidationError("config file not found: " + config_path);
            std::ifstream in(config_path);
            if (!in) throw ValidationError("cannot open config file: " + config_path);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw ValidationError("malformed config file " + config_path + ": " + e.what());
            }
            // A bare synth config (no section keys) is accepted for the synth command.
            static const std::set<std::string> sections = {"paths", "soft_label", "filter", "split", "train",
                                                           "loss", "eval", "report", "synth", "strict"};
            const bool bare = j.is_object() && !j.empty() &&
                              std::none_of(sections.begin(), sections.end(), [&](const auto& k) { return j.contains(k); });
            if (bare && subs["synth"]->parsed()) j = nlohmann::json{{"synth", j}};
            settings.merge_json(j);
            for (const auto& key : settings.keys()) {
                const bool known = std::any_of(option_specs().begin(), option_specs().end(),
                                               [&](const OptionSpec& o) { return key == o.key; });
                if (!known && key.rfind("synth.", 0) != 0) throw ValidationError("unknown config setting '" + key + "'");
            }
        }
        if (seed)
            for (const char* k : {"split.seed", "train.seed", "synth.seed"}) settings.set(k, *seed);
        if (strict) settings.set("strict", true);
        for (const auto& [key, value] : flag_values)
            if (value) settings.set(key, *value);

        if (subs["synth"]->parsed()) return cmd_synth(settings, out);
        if (subs["validate"]->parsed()) return cmd_validate(settings, out);
        if (subs["split"]->parsed()) return cmd_split(settings, out);
        if (subs["targets"]->parsed()) return cmd_targets(settings, out);
        if (subs["train"]->parsed()) return cmd_train(settings, out, err);
        if (subs["eval"]->parsed()) return cmd_eval(settings, out, err);
        if (subs["report"]->parsed()) return cmd_report(settings, out);
        return kInvalid;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const DegenerateError& e) {
        err << "error: degenerate statistics: " << e.what() << "\n";
        return kDegenerate;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args));
}

} // namespace disqa::cli
