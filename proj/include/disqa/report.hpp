#pragma once

// Dataset statistics and evaluation rendering (CSV, JSON, standalone SVG).
// All renderers are pure functions of their input: no timestamps, fixed
// number formatting, so output is byte-stable.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "disqa/annotations.hpp"
#include "disqa/core.hpp"
#include "disqa/dataset.hpp"
#include "disqa/metrics.hpp"

namespace disqa {

struct Histogram {
    std::vector<double> bin_edges; // size counts.size() + 1, strictly increasing
    std::vector<std::size_t> counts;
    std::string label;

    std::size_t total() const {
        std::size_t n = 0;
        for (auto c : counts) n += c;
        return n;
    }
};

// One 10-bin histogram (scores 1..10) per (dimension, perspective).
inline PerHead<Histogram> score_histograms(std::span<const RatingRecord> records) {
    PerHead<Histogram> out;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        out[h].label = head_label(h);
        out[h].counts.assign(kNumBins, 0);
        for (int k = 0; k <= kNumBins; ++k) out[h].bin_edges.push_back(k + 0.5);
    }
    for (const auto& r : records) out[head_index(r.dimension, r.perspective)].counts[r.score - 1]++;
    return out;
}

inline std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (unsigned char c : s) {
        const bool space = std::isspace(c);
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

// Right-open bins [i*w, (i+1)*w) over whitespace-token counts.
inline Histogram prompt_length_histogram(std::span<const ClipEntry> clips, int bin_width = 1) {
    if (bin_width < 1) throw ValidationError("bin_width must be >= 1");
    std::size_t max_len = 0;
    std::vector<std::size_t> lengths;
    for (const auto& c : clips) {
        lengths.push_back(word_count(c.prompt_text));
        max_len = std::max(max_len, lengths.back());
    }
    Histogram h;
    h.label = "prompt_length";
    const std::size_t w = static_cast<std::size_t>(bin_width);
    const std::size_t bins = max_len / w + 1;
    h.counts.assign(bins, 0);
    for (std::size_t i = 0; i <= bins; ++i) h.bin_edges.push_back(static_cast<double>(i * w));
    for (auto n : lengths) h.counts[n / w]++;
    return h;
}

struct CrossGroupSummary {
    std::array<double, kNumDimensions> clip{};
    std::array<double, kNumDimensions> system{};
};

struct DatasetStats {
    PerHead<Histogram> scores;
    std::optional<Histogram> prompt_lengths;
    std::optional<CrossGroupSummary> cross_group;
};

enum class ReportFormat { CSV, Json, SVG };

inline ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::CSV;
    if (s == "json") return ReportFormat::Json;
    if (s == "svg") return ReportFormat::SVG;
    throw ValidationError("unsupported report format '" + std::string(s) + "'");
}

namespace detail {

inline std::string num(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline std::string short_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

// Minimal SVG canvas.
class Svg {
public:
    Svg(double width, double height) : width_(width), height_(height) {}

    void rect(double x, double y, double w, double h, std::string_view fill) {
        body_ << "<rect x=\"" << num(x, 2) << "\" y=\"" << num(y, 2) << "\" width=\"" << num(w, 2) << "\" height=\""
              << num(h, 2) << "\" fill=\"" << fill << "\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#444") {
        body_ << "<line x1=\"" << num(x1, 2) << "\" y1=\"" << num(y1, 2) << "\" x2=\"" << num(x2, 2) << "\" y2=\""
              << num(y2, 2) << "\" stroke=\"" << stroke << "\" stroke-width=\"1\"/>\n";
    }
    void text(double x, double y, std::string_view s, std::string_view anchor = "middle", int size = 11) {
        body_ << "<text x=\"" << num(x, 2) << "\" y=\"" << num(y, 2) << "\" font-size=\"" << size
              << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << xml_escape(s) << "</text>\n";
    }

    std::string str() const {
        std::ostringstream out;
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_, 0) << "\" height=\""
            << num(height_, 0) << "\" viewBox=\"0 0 " << num(width_, 0) << " " << num(height_, 0) << "\">\n"
            << "<rect x=\"0\" y=\"0\" width=\"" << num(width_, 0) << "\" height=\"" << num(height_, 0)
            << "\" fill=\"white\"/>\n"
            << body_.str() << "</svg>\n";
        return out.str();
    }

private:
    double width_, height_;
    std::ostringstream body_;
};

struct Series {
    std::string name;
    std::string color;
    std::vector<double> values;
};

// Grouped bar chart in the box (x0, y0, w, h) with a labelled value axis.
inline void bar_chart(Svg& svg, double x0, double y0, double w, double h, std::string_view title,
                      const std::vector<std::string>& categories, const std::vector<Series>& series, double lo,
                      double hi, int ticks = 4) {
    const double left = x0 + 44, right = x0 + w - 8, top = y0 + 22, bottom = y0 + h - 30;
    auto y_of = [&](double v) { return bottom - (std::clamp(v, lo, hi) - lo) / (hi - lo) * (bottom - top); };
    svg.text(x0 + w / 2, y0 + 14, title, "middle", 12);
    for (int t = 0; t <= ticks; ++t) {
        const double v = lo + (hi - lo) * t / ticks;
        svg.line(left - 4, y_of(v), left, y_of(v));
        svg.text(left - 6, y_of(v) + 4, short_num(v), "end", 10);
    }
    svg.line(left, top, left, bottom);
    const double base = y_of(std::clamp(0.0, lo, hi));
    svg.line(left, base, right, base);
    if (categories.empty()) return;
    const double slot = (right - left) / static_cast<double>(categories.size());
    const double bar = slot * 0.8 / static_cast<double>(std::max<std::size_t>(1, series.size()));
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const double sx = left + slot * static_cast<double>(c) + slot * 0.1;
        for (std::size_t s = 0; s < series.size(); ++s) {
            const double v = series[s].values[c];
            const double yv = y_of(v);
            svg.rect(sx + bar * static_cast<double>(s), std::min(yv, base), bar, std::abs(base - yv), series[s].color);
        }
        svg.text(sx + slot * 0.4, bottom + 14, categories[c], "middle", 9);
    }
    double lx = left;
    for (const auto& s : series) {
        svg.rect(lx, bottom + 20, 8, 8, s.color);
        svg.text(lx + 11, bottom + 28, s.name, "start", 9);
        lx += 12 + 7.0 * static_cast<double>(s.name.size());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Evaluation report

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["n_utterances"] = r.n_utterances;
    j["n_systems"] = r.n_systems;
    auto heads = nlohmann::ordered_json::array();
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        const auto k = head_key(h);
        const auto& m = r.heads[h];
        heads.push_back({{"dimension", to_string(k.dimension)},
                         {"perspective", to_string(k.perspective)},
                         {"utterance", {{"pcc", m.utterance.pcc}, {"mse", m.utterance.mse}}},
                         {"system", {{"pcc", m.system.pcc}, {"mse", m.system.mse}}}});
    }
    j["heads"] = std::move(heads);
    return j;
}

inline std::string render_report(const EvalReport& r, ReportFormat format) {
    switch (format) {
    case ReportFormat::Json: return to_json(r).dump(2) + "\n";
    case ReportFormat::CSV: {
        std::string out = "dimension,perspective,level,metric,value\n";
        for (std::size_t h = 0; h < kNumHeads; ++h) {
            const auto k = head_key(h);
            const std::string prefix =
                std::string(to_string(k.dimension)) + "," + std::string(to_string(k.perspective)) + ",";
            const auto& m = r.heads[h];
            out += prefix + "utterance,pcc," + detail::num(m.utterance.pcc) + "\n";
            out += prefix + "utterance,mse," + detail::num(m.utterance.mse) + "\n";
            out += prefix + "system,pcc," + detail::num(m.system.pcc) + "\n";
            out += prefix + "system,mse," + detail::num(m.system.mse) + "\n";
        }
        return out;
    }
    case ReportFormat::SVG: {
        std::vector<std::string> cats;
        detail::Series up{"utterance", "#4c78a8", {}}, sp{"system", "#f58518", {}};
        detail::Series um{"utterance", "#4c78a8", {}}, sm{"system", "#f58518", {}};
        double max_mse = 0.0;
        for (std::size_t h = 0; h < kNumHeads; ++h) {
            cats.push_back(head_label(h));
            up.values.push_back(r.heads[h].utterance.pcc);
            sp.values.push_back(r.heads[h].system.pcc);
            um.values.push_back(r.heads[h].utterance.mse);
            sm.values.push_back(r.heads[h].system.mse);
            max_mse = std::max({max_mse, r.heads[h].utterance.mse, r.heads[h].system.mse});
        }
        const double mse_top = max_mse > 0.0 ? std::ceil(max_mse * 4.0) / 4.0 : 1.0;
        detail::Svg svg(900, 560);
        detail::bar_chart(svg, 0, 0, 900, 280, "PCC by head", cats, {up, sp}, -1.0, 1.0);
        detail::bar_chart(svg, 0, 280, 900, 280, "MSE by head", cats, {um, sm}, 0.0, mse_top);
        return svg.str();
    }
    }
    throw ValidationError("unsupported report format");
}

// Per-(d, v) PCC in the layout of a results table: one row per level,
// expert columns then non-expert columns, dimensions alphabetical.
inline std::string format_pcc_table(const EvalReport& r) {
    static constexpr std::array<Dimension, kNumDimensions> cols = {Dimension::CE, Dimension::CU, Dimension::PC,
                                                                   Dimension::PQ, Dimension::TA};
    auto cell = [](std::string_view s) { return std::string(7 - std::min<std::size_t>(7, s.size()), ' ') + std::string(s); };
    std::string out = "           |" + cell("") + "     Expert" + std::string(18, ' ') + "|" + cell("") +
                      "   Non-Expert" + std::string(16, ' ') + "|\n";
    out += "level      |";
    for (auto p : kPerspectives) {
        (void)p;
        for (auto d : cols) out += cell(to_string(d));
        out += " |";
    }
    out += "\n";
    for (int level = 0; level < 2; ++level) {
        out += level == 0 ? "utterance  |" : "system     |";
        for (auto p : kPerspectives) {
            for (auto d : cols) {
                const auto& m = r.heads[head_index(d, p)];
                out += cell(detail::num(level == 0 ? m.utterance.pcc : m.system.pcc, 3));
            }
            out += " |";
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset statistics

inline nlohmann::ordered_json to_json(const Histogram& h) {
    return {{"label", h.label}, {"bin_edges", h.bin_edges}, {"counts", h.counts}};
}

inline std::string render_report(const DatasetStats& s, ReportFormat format) {
    switch (format) {
    case ReportFormat::Json: {
        nlohmann::ordered_json j;
        auto hs = nlohmann::ordered_json::array();
        for (const auto& h : s.scores) hs.push_back(to_json(h));
        j["score_histograms"] = std::move(hs);
        if (s.prompt_lengths) j["prompt_length_histogram"] = to_json(*s.prompt_lengths);
        if (s.cross_group) {
            nlohmann::ordered_json cg;
            for (int d = 0; d < kNumDimensions; ++d)
                cg[std::string(to_string(static_cast<Dimension>(d)))] = {{"clip", s.cross_group->clip[d]},
                                                                          {"system", s.cross_group->system[d]}};
            j["cross_group_pcc"] = std::move(cg);
        }
        return j.dump(2) + "\n";
    }
    case ReportFormat::CSV: {
        std::string out = "section,label,bin_lo,bin_hi,value\n";
        auto hist_rows = [&](std::string_view section, const Histogram& h) {
            for (std::size_t i = 0; i < h.counts.size(); ++i)
                out += std::string(section) + "," + detail::csv_field(h.label) + "," +
                       detail::short_num(h.bin_edges[i]) + "," + detail::short_num(h.bin_edges[i + 1]) + "," +
                       std::to_string(h.counts[i]) + "\n";
        };
        for (const auto& h : s.scores) hist_rows("score_histogram", h);
        if (s.prompt_lengths) hist_rows("prompt_length", *s.prompt_lengths);
        if (s.cross_group) {
            for (int d = 0; d < kNumDimensions; ++d) {
                const std::string dim(to_string(static_cast<Dimension>(d)));
                out += "cross_group_pcc," + dim + "/clip,,," + detail::num(s.cross_group->clip[d]) + "\n";
                out += "cross_group_pcc," + dim + "/system,,," + detail::num(s.cross_group->system[d]) + "\n";
            }
        }
        return out;
    }
    case ReportFormat::SVG: {
        const double cell_w = 220, cell_h = 170;
        const double extra = (s.prompt_lengths ? 220.0 : 0.0) + (s.cross_group ? 240.0 : 0.0);
        detail::Svg svg(cell_w * kNumDimensions, cell_h * kNumPerspectives + extra);
        std::vector<std::string> score_cats;
        for (int k = 1; k <= kNumBins; ++k) score_cats.push_back(std::to_string(k));
        for (std::size_t h = 0; h < kNumHeads; ++h) {
            const auto k = head_key(h);
            const double x0 = cell_w * static_cast<int>(k.dimension);
            const double y0 = cell_h * static_cast<int>(k.perspective);
            const auto& hist = s.scores[h];
            std::vector<double> vals(hist.counts.begin(), hist.counts.end());
            const double top = std::max(1.0, *std::max_element(vals.begin(), vals.end()));
            detail::bar_chart(svg, x0, y0, cell_w, cell_h, hist.label, score_cats, {{"count", "#4c78a8", vals}}, 0.0,
                              top);
        }
        double y = cell_h * kNumPerspectives;
        if (s.prompt_lengths) {
            const auto& hist = *s.prompt_lengths;
            std::vector<std::string> cats;
            for (std::size_t i = 0; i < hist.counts.size(); ++i) cats.push_back(detail::short_num(hist.bin_edges[i]));
            std::vector<double> vals(hist.counts.begin(), hist.counts.end());
            const double top = std::max(1.0, vals.empty() ? 1.0 : *std::max_element(vals.begin(), vals.end()));
            detail::bar_chart(svg, 0, y, cell_w * kNumDimensions, 220, "prompt length (words)", cats,
                              {{"prompts", "#54a24b", vals}}, 0.0, top);
            y += 220;
        }
        if (s.cross_group) {
            std::vector<std::string> cats;
            for (auto d : kDimensions) cats.emplace_back(to_string(d));
            std::vector<double> c(s.cross_group->clip.begin(), s.cross_group->clip.end());
            std::vector<double> sy(s.cross_group->system.begin(), s.cross_group->system.end());
            detail::bar_chart(svg, 0, y, cell_w * kNumDimensions, 240, "expert vs non-expert PCC", cats,
                              {{"clip", "#4c78a8", c}, {"system", "#f58518", sy}}, -1.0, 1.0);
        }
        return svg.str();
    }
    }
    throw ValidationError("unsupported report format");
}

} // namespace disqa
