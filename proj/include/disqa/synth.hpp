#pragma once

// Synthetic annotation + embedding generator.
//
// Each system has a latent quality per dimension drawn from U[2.5, 8.5];
// clips scatter around it (sd 0.75, clamped to [1, 10]). Raters score
// round(clip quality + perspective bias + noise), three per perspective.
// Features are a fixed random linear mix of the five clip qualities plus
// isotropic noise, so a linear probe can recover them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "disqa/annotations.hpp"
#include "disqa/core.hpp"
#include "disqa/dataset.hpp"
#include "disqa/features.hpp"

namespace disqa {

inline PerHead<double> default_perspective_bias() {
    PerHead<double> b{};
    b[head_index(Dimension::PC, Perspective::Expert)] = -0.5;
    b[head_index(Dimension::CE, Perspective::Expert)] = -0.5;
    b[head_index(Dimension::PQ, Perspective::Expert)] = 0.3;
    b[head_index(Dimension::TA, Perspective::Expert)] = 0.3;
    return b;
}

struct SynthConfig {
    int n_systems = 30;
    int clips_per_system = 70;
    int feature_dim = 64;
    double rater_noise_sd = 1.0;
    PerHead<double> perspective_bias = default_perspective_bias();
    double feature_noise_sd = 0.5;
    double probe_rate = 0.1;
    std::uint64_t seed = 7;

    void validate() const {
        if (n_systems < 1 || clips_per_system < 1 || feature_dim < 1)
            throw ValidationError("synth counts must be >= 1");
        if (!(rater_noise_sd >= 0.0) || !(feature_noise_sd >= 0.0))
            throw ValidationError("synth noise sds must be >= 0");
        if (!(probe_rate >= 0.0 && probe_rate <= 1.0)) throw ValidationError("probe_rate must be in [0, 1]");
        for (double b : perspective_bias)
            if (!std::isfinite(b)) throw ValidationError("perspective bias must be finite");
    }
};

inline constexpr int kSynthRatersPerPerspective = 3;
inline constexpr double kSynthClipSd = 0.75;
inline constexpr double kSynthLatentLo = 2.5;
inline constexpr double kSynthLatentHi = 8.5;

using Qualities = std::array<double, kNumDimensions>;

struct SynthGroundTruth {
    std::map<std::string, Qualities> system_latent;
    std::map<std::string, Qualities> clip_quality;
    std::vector<std::array<double, kNumDimensions>> mixing; // feature_dim rows
    PerHead<double> perspective_bias{};
};

struct SynthData {
    std::vector<ClipEntry> clips;
    std::vector<RatingRecord> ratings;
    FeatureSet features;
    SynthGroundTruth truth;
};

// One simulated rating of a clip with the given quality.
template <typename Rng>
int simulate_rating(double quality, double bias, double noise_sd, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const double raw = quality + bias + noise_sd * n01(rng);
    return static_cast<int>(std::clamp<long>(std::lround(raw), kMinScore, kMaxScore));
}

namespace detail {

inline const std::vector<std::string>& prompt_words() {
    static const std::vector<std::string> words = {
        "a",        "dog",     "barking",  "in",      "the",     "distance", "while",   "rain",
        "falls",    "on",      "metal",    "roof",    "crowd",   "cheering", "at",      "stadium",
        "soft",     "piano",   "melody",   "with",    "birds",   "chirping", "engine",  "revving",
        "loudly",   "water",   "dripping", "cave",    "footsteps", "gravel", "wind",    "howling",
        "through",  "trees",   "baby",     "laughing", "door",   "creaking", "slowly",  "thunder",
        "rumbling", "far",     "away",     "people",  "talking", "busy",     "cafe",    "train"};
    return words;
}

template <typename Rng>
std::string synth_prompt(Rng& rng) {
    const auto& words = prompt_words();
    std::uniform_int_distribution<int> len(3, 24);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    const int n = len(rng);
    std::string s;
    for (int i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += words[pick(rng)];
    }
    return s;
}

inline std::string pad(int v, int width) {
    auto s = std::to_string(v);
    return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

} // namespace detail

inline SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> latent(kSynthLatentLo, kSynthLatentHi);
    std::uniform_real_distribution<double> mix(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);

    SynthData out;
    out.truth.perspective_bias = cfg.perspective_bias;
    out.truth.mixing.resize(cfg.feature_dim);
    for (auto& row : out.truth.mixing)
        for (auto& v : row) v = mix(rng);

    out.features.dim = static_cast<std::uint32_t>(cfg.feature_dim);
    const int sys_width = std::max<int>(2, static_cast<int>(std::to_string(cfg.n_systems - 1).size()));
    const int clip_width = std::max<int>(3, static_cast<int>(std::to_string(cfg.clips_per_system - 1).size()));

    for (int s = 0; s < cfg.n_systems; ++s) {
        const std::string system_id = "sys" + detail::pad(s, sys_width);
        Qualities lat{};
        for (auto& v : lat) v = latent(rng);
        out.truth.system_latent[system_id] = lat;

        for (int c = 0; c < cfg.clips_per_system; ++c) {
            const std::string clip_id = system_id + "_c" + detail::pad(c, clip_width);
            out.clips.push_back({clip_id, system_id, detail::synth_prompt(rng)});

            Qualities q{};
            for (int d = 0; d < kNumDimensions; ++d)
                q[d] = std::clamp(lat[d] + kSynthClipSd * n01(rng), double(kMinScore), double(kMaxScore));
            out.truth.clip_quality[clip_id] = q;

            for (auto dim : kDimensions) {
                for (auto persp : kPerspectives) {
                    const double bias = cfg.perspective_bias[head_index(dim, persp)];
                    for (int r = 1; r <= kSynthRatersPerPerspective; ++r) {
                        RatingRecord rec;
                        rec.clip_id = clip_id;
                        rec.system_id = system_id;
                        rec.dimension = dim;
                        rec.perspective = persp;
                        rec.rater_id = std::string(to_string(persp)) + std::to_string(r);
                        const double qd = q[static_cast<int>(dim)];
                        rec.score = simulate_rating(qd, bias, cfg.rater_noise_sd, rng);
                        if (unit(rng) < cfg.probe_rate)
                            rec.probe_score = simulate_rating(qd, bias, cfg.rater_noise_sd, rng);
                        out.ratings.push_back(std::move(rec));
                    }
                }
            }

            FeatureVector fv;
            fv.clip_id = clip_id;
            fv.values.resize(cfg.feature_dim);
            for (int j = 0; j < cfg.feature_dim; ++j) {
                double v = 0.0;
                for (int d = 0; d < kNumDimensions; ++d) v += out.truth.mixing[j][d] * q[d];
                fv.values[j] = v + cfg.feature_noise_sd * n01(rng);
            }
            out.features.vectors.push_back(std::move(fv));
        }
    }
    return out;
}

// Noise-free clip quality plus perspective bias for each head.
inline PerHead<double> oracle_scores(const SynthGroundTruth& truth, const std::string& clip_id) {
    auto it = truth.clip_quality.find(clip_id);
    if (it == truth.clip_quality.end()) throw ValidationError("unknown clip '" + clip_id + "'");
    PerHead<double> out{};
    for (std::size_t h = 0; h < kNumHeads; ++h)
        out[h] = it->second[static_cast<int>(head_key(h).dimension)] + truth.perspective_bias[h];
    return out;
}

// ---------------------------------------------------------------------------
// Config and sidecar documents

inline nlohmann::ordered_json bias_to_json(const PerHead<double>& bias) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (auto d : kDimensions)
        for (auto p : kPerspectives) j[std::string(to_string(d))][std::string(to_string(p))] = bias[head_index(d, p)];
    return j;
}

inline PerHead<double> bias_from_json(const nlohmann::json& j) {
    PerHead<double> b{};
    if (!j.is_object()) throw ValidationError("perspective_bias must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto d = parse_dimension(it.key());
        if (!d) throw ValidationError("perspective_bias: unknown dimension '" + it.key() + "'");
        if (!it->is_object()) throw ValidationError("perspective_bias." + it.key() + " must be an object");
        for (auto pt = it->begin(); pt != it->end(); ++pt) {
            auto p = parse_perspective(pt.key());
            if (!p) throw ValidationError("perspective_bias: unknown perspective '" + pt.key() + "'");
            if (!pt->is_number()) throw ValidationError("perspective_bias values must be numbers");
            b[head_index(*d, *p)] = pt->get<double>();
        }
    }
    return b;
}

inline nlohmann::ordered_json to_json(const SynthConfig& c) {
    nlohmann::ordered_json j;
    j["n_systems"] = c.n_systems;
    j["clips_per_system"] = c.clips_per_system;
    j["feature_dim"] = c.feature_dim;
    j["rater_noise_sd"] = c.rater_noise_sd;
    j["perspective_bias"] = bias_to_json(c.perspective_bias);
    j["feature_noise_sd"] = c.feature_noise_sd;
    j["probe_rate"] = c.probe_rate;
    j["seed"] = c.seed;
    return j;
}

// Fields absent from `j` keep their defaults.
inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig c;
    if (!j.is_object()) throw ValidationError("synth config must be an object");
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto& k = it.key();
            if (k == "n_systems") c.n_systems = it->get<int>();
            else if (k == "clips_per_system") c.clips_per_system = it->get<int>();
            else if (k == "feature_dim") c.feature_dim = it->get<int>();
            else if (k == "rater_noise_sd") c.rater_noise_sd = it->get<double>();
            else if (k == "perspective_bias") c.perspective_bias = bias_from_json(*it);
            else if (k == "feature_noise_sd") c.feature_noise_sd = it->get<double>();
            else if (k == "probe_rate") c.probe_rate = it->get<double>();
            else if (k == "seed") c.seed = it->get<std::uint64_t>();
            else throw ValidationError("unknown synth config field '" + k + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::ordered_json truth_to_json(const SynthData& data, const SynthConfig& cfg) {
    nlohmann::ordered_json j;
    j["config"] = to_json(cfg);
    auto systems = nlohmann::ordered_json::array();
    for (const auto& [id, lat] : data.truth.system_latent) systems.push_back({{"system_id", id}, {"latent", lat}});
    j["systems"] = std::move(systems);
    auto clips = nlohmann::ordered_json::array();
    for (const auto& c : data.clips)
        clips.push_back({{"clip_id", c.clip_id},
                         {"system_id", c.system_id},
                         {"prompt", c.prompt_text},
                         {"quality", data.truth.clip_quality.at(c.clip_id)}});
    j["clips"] = std::move(clips);
    j["mixing"] = data.truth.mixing;
    return j;
}

struct LoadedTruth {
    std::vector<ClipEntry> clips;
    SynthGroundTruth truth;
};

inline LoadedTruth truth_from_json(const nlohmann::json& j) {
    try {
        LoadedTruth out;
        out.truth.perspective_bias = bias_from_json(j.at("config").at("perspective_bias"));
        for (const auto& s : j.at("systems"))
            out.truth.system_latent[s.at("system_id").get<std::string>()] = s.at("latent").get<Qualities>();
        for (const auto& c : j.at("clips")) {
            ClipEntry e{c.at("clip_id").get<std::string>(), c.at("system_id").get<std::string>(),
                        c.at("prompt").get<std::string>()};
            out.truth.clip_quality[e.clip_id] = c.at("quality").get<Qualities>();
            out.clips.push_back(std::move(e));
        }
        out.truth.mixing = j.at("mixing").get<std::vector<Qualities>>();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed ground-truth document: ") + e.what());
    }
}

} // namespace disqa
