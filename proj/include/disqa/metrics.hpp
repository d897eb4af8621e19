#pragma once

// Agreement statistics between predicted and human mean scores, at the
// utterance (clip) level and at the system level (unweighted per-system
// averages), plus expert vs non-expert cross-group correlation.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "disqa/core.hpp"

namespace disqa {

struct PairedSeries {
    std::vector<std::string> labels;
    std::vector<double> x;
    std::vector<double> y;
};

inline double pcc(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("pcc: series lengths differ");
    if (x.size() < 2) throw DegenerateError("pcc: need at least 2 points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateError("pcc: zero variance");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

inline double pcc(const PairedSeries& s) { return pcc(s.x, s.y); }

inline double mse(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("mse: series lengths differ");
    if (x.empty()) throw DegenerateError("mse: empty series");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

inline double mse(const PairedSeries& s) { return mse(s.x, s.y); }

// Per-clip mean score for each of the ten heads.
using MeanScores = std::map<std::string, PerHead<double>>;
using SystemMap = std::map<std::string, std::string>;

struct LevelMetrics {
    double pcc = 0.0;
    double mse = 0.0;
};

struct HeadMetrics {
    LevelMetrics utterance;
    LevelMetrics system;
};

struct EvalReport {
    PerHead<HeadMetrics> heads{};
    std::size_t n_utterances = 0;
    std::size_t n_systems = 0;
};

namespace detail {

inline std::vector<std::string> common_clips(const MeanScores& a, const MeanScores& b) {
    std::vector<std::string> ids;
    for (const auto& [id, _] : a)
        if (b.count(id)) ids.push_back(id);
    return ids;
}

template <typename F>
LevelMetrics level_metrics(const std::vector<double>& x, const std::vector<double>& y, F&& name) {
    try {
        return {pcc(x, y), mse(x, y)};
    } catch (const DegenerateError& e) {
        throw DegenerateError(name() + ": " + e.what());
    }
}

// Unweighted per-system means for one head over the given clips.
inline std::pair<std::vector<double>, std::vector<double>> system_means(const MeanScores& pred, const MeanScores& truth,
                                                                        const std::vector<std::string>& clips,
                                                                        const SystemMap& system_of, std::size_t head) {
    std::map<std::string, std::array<double, 3>> acc; // sum pred, sum truth, count
    for (const auto& id : clips) {
        auto it = system_of.find(id);
        if (it == system_of.end()) throw ValidationError("clip '" + id + "' has no system");
        auto& a = acc[it->second];
        a[0] += pred.at(id)[head];
        a[1] += truth.at(id)[head];
        a[2] += 1.0;
    }
    std::pair<std::vector<double>, std::vector<double>> out;
    for (const auto& [_, a] : acc) {
        out.first.push_back(a[0] / a[2]);
        out.second.push_back(a[1] / a[2]);
    }
    return out;
}

} // namespace detail

inline PerHead<LevelMetrics> utterance_eval(const MeanScores& pred, const MeanScores& truth) {
    const auto clips = detail::common_clips(pred, truth);
    if (clips.size() < 2) throw DegenerateError("utterance_eval: fewer than 2 clips in common");
    PerHead<LevelMetrics> out;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        std::vector<double> x, y;
        x.reserve(clips.size());
        y.reserve(clips.size());
        for (const auto& id : clips) {
            x.push_back(pred.at(id)[h]);
            y.push_back(truth.at(id)[h]);
        }
        out[h] = detail::level_metrics(x, y, [&] { return "utterance level " + head_label(h); });
    }
    return out;
}

inline PerHead<LevelMetrics> system_eval(const MeanScores& pred, const MeanScores& truth, const SystemMap& system_of) {
    const auto clips = detail::common_clips(pred, truth);
    PerHead<LevelMetrics> out;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        auto [x, y] = detail::system_means(pred, truth, clips, system_of, h);
        if (x.size() < 2) throw DegenerateError("system_eval: fewer than 2 systems");
        out[h] = detail::level_metrics(x, y, [&] { return "system level " + head_label(h); });
    }
    return out;
}

inline EvalReport evaluate(const MeanScores& pred, const MeanScores& truth, const SystemMap& system_of) {
    EvalReport r;
    const auto utt = utterance_eval(pred, truth);
    const auto sys = system_eval(pred, truth, system_of);
    for (std::size_t h = 0; h < kNumHeads; ++h) r.heads[h] = {utt[h], sys[h]};
    const auto clips = detail::common_clips(pred, truth);
    r.n_utterances = clips.size();
    std::map<std::string, int> systems;
    for (const auto& id : clips) systems[system_of.at(id)]++;
    r.n_systems = systems.size();
    return r;
}

enum class AggregationLevel { Clip, System };

using DimensionScores = std::map<std::string, std::array<double, kNumDimensions>>;

// Per-dimension PCC between expert and non-expert mean scores.
inline std::array<double, kNumDimensions> cross_group_correlation(const DimensionScores& expert,
                                                                  const DimensionScores& nonexpert,
                                                                  AggregationLevel level,
                                                                  const SystemMap& system_of = {}) {
    std::array<double, kNumDimensions> out{};
    std::vector<std::string> clips;
    for (const auto& [id, _] : expert)
        if (nonexpert.count(id)) clips.push_back(id);

    for (int d = 0; d < kNumDimensions; ++d) {
        std::vector<double> x, y;
        if (level == AggregationLevel::Clip) {
            for (const auto& id : clips) {
                x.push_back(expert.at(id)[d]);
                y.push_back(nonexpert.at(id)[d]);
            }
        } else {
            std::map<std::string, std::array<double, 3>> acc;
            for (const auto& id : clips) {
                auto it = system_of.find(id);
                if (it == system_of.end()) throw ValidationError("clip '" + id + "' has no system");
                auto& a = acc[it->second];
                a[0] += expert.at(id)[d];
                a[1] += nonexpert.at(id)[d];
                a[2] += 1.0;
            }
            for (const auto& [_, a] : acc) {
                x.push_back(a[0] / a[2]);
                y.push_back(a[1] / a[2]);
            }
        }
        try {
            out[d] = pcc(x, y);
        } catch (const DegenerateError& e) {
            throw DegenerateError(std::string(to_string(static_cast<Dimension>(d))) + ": " + e.what());
        }
    }
    return out;
}

// Splits ten-head means into the two per-dimension views.
inline std::pair<DimensionScores, DimensionScores> by_perspective(const MeanScores& means) {
    std::pair<DimensionScores, DimensionScores> out;
    for (const auto& [id, m] : means) {
        auto& e = out.first[id];
        auto& n = out.second[id];
        for (int d = 0; d < kNumDimensions; ++d) {
            e[d] = m[head_index(static_cast<Dimension>(d), Perspective::Expert)];
            n[d] = m[head_index(static_cast<Dimension>(d), Perspective::NonExpert)];
        }
    }
    return out;
}

} // namespace disqa
