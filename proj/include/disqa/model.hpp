#pragma once

// Ten-head distributional probe over fused (prompt, audio) embeddings.
// Each (dimension, perspective) head is a linear projection to ten score
// logits followed by a softmax. Training minimizes
//
//   alpha * sum_heads KL(P || P_hat) + lambda * sum_heads (mu - mu_hat)^2
//
// averaged over examples, with plain mini-batch gradient descent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "disqa/core.hpp"
#include "disqa/features.hpp"

namespace disqa {

struct HeadParams {
    std::vector<double> weights; // kNumBins rows of dim, row-major
    Distribution bias{};

    friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct ProbeModel {
    std::size_t dim = 0;
    PerHead<HeadParams> heads;

    ProbeModel() = default;
    explicit ProbeModel(std::size_t d) : dim(d) {
        for (auto& h : heads) h.weights.assign(kNumBins * d, 0.0);
    }

    double& weight(std::size_t head, int bin, std::size_t j) { return heads[head].weights[bin * dim + j]; }
    double weight(std::size_t head, int bin, std::size_t j) const { return heads[head].weights[bin * dim + j]; }

    friend bool operator==(const ProbeModel&, const ProbeModel&) = default;
};

struct PredictedDistribution {
    Distribution probs{};
    double mean = 0.0;
};

using HeadPredictions = PerHead<PredictedDistribution>;

// Max-subtracted softmax; finite for any finite logits.
inline Distribution softmax(const Distribution& z) {
    const double m = *std::max_element(z.begin(), z.end());
    Distribution p{};
    double sum = 0.0;
    for (int k = 0; k < kNumBins; ++k) {
        p[k] = std::exp(z[k] - m);
        sum += p[k];
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline Distribution head_logits(const ProbeModel& model, std::size_t head, std::span<const double> x) {
    const auto& h = model.heads[head];
    Distribution z = h.bias;
    for (int k = 0; k < kNumBins; ++k) {
        const double* w = h.weights.data() + k * model.dim;
        double acc = 0.0;
        for (std::size_t j = 0; j < model.dim; ++j) acc += w[j] * x[j];
        z[k] += acc;
    }
    return z;
}

inline HeadPredictions forward(const ProbeModel& model, std::span<const double> x) {
    if (x.size() != model.dim)
        throw ValidationError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                              std::to_string(model.dim));
    HeadPredictions out;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        out[h].probs = softmax(head_logits(model, h, x));
        out[h].mean = distribution_mean(out[h].probs);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss

enum class LossMode { Full, RegressionOnly, KLOnly };

inline std::string_view to_string(LossMode m) {
    switch (m) {
    case LossMode::Full: return "full";
    case LossMode::RegressionOnly: return "regression";
    case LossMode::KLOnly: return "kl";
    }
    return "?";
}

inline LossMode parse_loss_mode(std::string_view s) {
    if (s == "full") return LossMode::Full;
    if (s == "regression" || s == "+R" || s == "R") return LossMode::RegressionOnly;
    if (s == "kl" || s == "+KL" || s == "KL") return LossMode::KLOnly;
    throw ValidationError("unknown loss mode '" + std::string(s) + "'");
}

struct LossConfig {
    double alpha = 0.8;
    double lambda = 1.0;
    LossMode mode = LossMode::Full;

    double kl_weight() const { return mode == LossMode::RegressionOnly ? 0.0 : alpha; }
    double mse_weight() const { return mode == LossMode::KLOnly ? 0.0 : lambda; }

    void validate() const {
        if (!(alpha >= 0.0) || !(lambda >= 0.0) || !std::isfinite(alpha) || !std::isfinite(lambda))
            throw ValidationError("loss weights must be non-negative and finite");
        if (mode == LossMode::Full && alpha == 0.0 && lambda == 0.0)
            throw ValidationError("full loss needs alpha > 0 or lambda > 0");
    }
};

// Unweighted sums over heads of the KL and squared-mean terms.
struct LossTerms {
    double kl = 0.0;
    double squared_error = 0.0;

    // Weighted combination. Zero weights contribute exactly 0, so the Full
    // value is bit-identical to KLOnly + RegressionOnly.
    double combine(const LossConfig& cfg) const { return cfg.kl_weight() * kl + cfg.mse_weight() * squared_error; }
};

// KL(target || pred) with 0 * ln(0 / q) = 0.
inline double kl_divergence(const Distribution& target, const Distribution& pred) {
    double kl = 0.0;
    for (int k = 0; k < kNumBins; ++k) {
        if (target[k] <= 0.0) continue;
        if (pred[k] <= 0.0)
            throw DegenerateError("predicted probability is zero where the target has mass (bin " +
                                  std::to_string(k + 1) + ")");
        kl += target[k] * std::log(target[k] / pred[k]);
    }
    return kl;
}

inline LossTerms loss_terms(const HeadPredictions& pred, const PerHead<Distribution>& target,
                            const PerHead<double>& target_mean) {
    LossTerms t;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        t.kl += kl_divergence(target[h], pred[h].probs);
        const double d = target_mean[h] - pred[h].mean;
        t.squared_error += d * d;
    }
    return t;
}

inline double loss(const HeadPredictions& pred, const PerHead<Distribution>& target, const PerHead<double>& target_mean,
                   const LossConfig& cfg) {
    return loss_terms(pred, target, target_mean).combine(cfg);
}

// Mean loss terms over a set of examples.
inline LossTerms mean_loss_terms(const ProbeModel& model, std::span<const Example> examples) {
    LossTerms acc;
    for (const auto& ex : examples) {
        auto t = loss_terms(forward(model, ex.x), ex.target, ex.target_mean);
        acc.kl += t.kl;
        acc.squared_error += t.squared_error;
    }
    if (!examples.empty()) {
        acc.kl /= static_cast<double>(examples.size());
        acc.squared_error /= static_cast<double>(examples.size());
    }
    return acc;
}

inline double dataset_loss(const ProbeModel& model, std::span<const Example> examples, const LossConfig& cfg) {
    return mean_loss_terms(model, examples).combine(cfg);
}

// ---------------------------------------------------------------------------
// Gradient
//
// With p = softmax(z), P the target and mu_hat = sum_k k p_k:
//   d KL / d z_k        = p_k * sum(P) - P_k
//   d mu_hat / d z_k    = p_k * (k - mu_hat)
//   d (mu - mu_hat)^2   = -2 (mu - mu_hat) d mu_hat

using Gradients = PerHead<HeadParams>;

struct LossAndGradient {
    double loss = 0.0;
    Gradients grad;
};

inline LossAndGradient loss_and_gradient(const ProbeModel& model, std::span<const Example> batch,
                                         const LossConfig& cfg) {
    if (batch.empty()) throw ValidationError("loss_gradient: empty batch");
    LossAndGradient out;
    for (auto& g : out.grad) g.weights.assign(kNumBins * model.dim, 0.0);
    const double wkl = cfg.kl_weight();
    const double wsq = cfg.mse_weight();
    LossTerms terms;

    for (const auto& ex : batch) {
        const auto pred = forward(model, ex.x);
        const auto t = loss_terms(pred, ex.target, ex.target_mean);
        terms.kl += t.kl;
        terms.squared_error += t.squared_error;

        for (std::size_t h = 0; h < kNumHeads; ++h) {
            const auto& p = pred[h].probs;
            const auto& target = ex.target[h];
            const double mass = std::accumulate(target.begin(), target.end(), 0.0);
            const double mu_hat = pred[h].mean;
            const double residual = mu_hat - ex.target_mean[h];
            auto& g = out.grad[h];
            for (int k = 0; k < kNumBins; ++k) {
                const double dz = wkl * (p[k] * mass - target[k]) + wsq * 2.0 * residual * p[k] * ((k + 1) - mu_hat);
                g.bias[k] += dz;
                if (dz == 0.0) continue;
                double* row = g.weights.data() + k * model.dim;
                for (std::size_t j = 0; j < model.dim; ++j) row[j] += dz * ex.x[j];
            }
        }
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& g : out.grad) {
        for (auto& v : g.weights) v *= inv;
        for (auto& v : g.bias) v *= inv;
    }
    terms.kl *= inv;
    terms.squared_error *= inv;
    out.loss = terms.combine(cfg);
    return out;
}

// Gradients of the batch-mean loss with respect to every weight and bias.
inline Gradients loss_gradient(const ProbeModel& model, std::span<const Example> batch, const LossConfig& cfg) {
    return loss_and_gradient(model, batch, cfg).grad;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 0.05;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double momentum = 0.0;
    // Train on z-scored features and fold the affine map back into the
    // returned parameters.
    bool standardize = true;
    LossConfig loss;

    void validate() const {
        if (epochs < 1) throw ValidationError("epochs must be >= 1");
        if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw ValidationError("learning_rate must be positive");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
        loss.validate();
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    ProbeModel model;                 // snapshot with the lowest validation loss
    std::vector<EpochRecord> history; // one entry per epoch
    int best_epoch = 0;               // 1-based
    double initial_train_loss = 0.0;  // before the first update
    double initial_val_loss = 0.0;
};

// Index (0-based) of the lowest value; ties resolve to the earliest.
inline std::size_t select_best_epoch(std::span<const double> val_losses) {
    if (val_losses.empty()) throw ValidationError("select_best_epoch: empty history");
    std::size_t best = 0;
    for (std::size_t i = 1; i < val_losses.size(); ++i)
        if (val_losses[i] < val_losses[best]) best = i;
    return best;
}

inline ProbeModel init_model(std::size_t dim, std::uint64_t seed) {
    ProbeModel m(dim);
    std::mt19937_64 rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& h : m.heads)
        for (auto& w : h.weights) w = u(rng);
    return m;
}

struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> scale; // divide by this

    static FeatureScaler identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

    static FeatureScaler fit(std::span<const Example> examples, std::size_t dim) {
        FeatureScaler s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
        const auto n = static_cast<double>(examples.size());
        for (const auto& ex : examples)
            for (std::size_t j = 0; j < dim; ++j) s.mean[j] += ex.x[j];
        for (auto& m : s.mean) m /= n;
        for (const auto& ex : examples)
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = ex.x[j] - s.mean[j];
                s.scale[j] += d * d;
            }
        for (auto& v : s.scale) {
            v = std::sqrt(v / n);
            if (!(v > 1e-12)) v = 1.0;
        }
        return s;
    }

    std::vector<Example> apply(std::span<const Example> examples) const {
        std::vector<Example> out(examples.begin(), examples.end());
        for (auto& ex : out)
            for (std::size_t j = 0; j < ex.x.size(); ++j) ex.x[j] = (ex.x[j] - mean[j]) / scale[j];
        return out;
    }

    // Parameters acting on raw features equivalent to `m` acting on scaled ones.
    ProbeModel fold(const ProbeModel& m) const {
        ProbeModel raw = m;
        for (std::size_t h = 0; h < kNumHeads; ++h)
            for (int k = 0; k < kNumBins; ++k) {
                double shift = 0.0;
                for (std::size_t j = 0; j < m.dim; ++j) {
                    const double w = m.weight(h, k, j) / scale[j];
                    raw.weight(h, k, j) = w;
                    shift += w * mean[j];
                }
                raw.heads[h].bias[k] -= shift;
            }
        return raw;
    }
};

inline TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty()) throw ValidationError("train: empty training set");
    if (val_set.empty()) throw ValidationError("train: empty validation set");
    const std::size_t dim = train_set.front().x.size();
    if (dim == 0) throw ValidationError("train: zero feature dimension");
    for (auto set : {train_set, val_set})
        for (const auto& ex : set)
            if (ex.x.size() != dim)
                throw ValidationError("train: clip '" + ex.clip_id + "' has dimension " + std::to_string(ex.x.size()) +
                                      ", expected " + std::to_string(dim));

    const auto scaler = cfg.standardize ? FeatureScaler::fit(train_set, dim) : FeatureScaler::identity(dim);
    const auto train_x = scaler.apply(train_set);
    const auto val_x = scaler.apply(val_set);

    std::mt19937_64 rng(cfg.seed);
    ProbeModel model = init_model(dim, rng());
    Gradients velocity;
    for (auto& v : velocity) v.weights.assign(kNumBins * dim, 0.0);

    TrainResult result;
    result.initial_train_loss = dataset_loss(model, train_x, cfg.loss);
    result.initial_val_loss = dataset_loss(model, val_x, cfg.loss);

    std::vector<std::size_t> order(train_x.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Example> batch;
    ProbeModel best;
    double best_val = std::numeric_limits<double>::infinity();
    const auto bs = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
            batch.clear();
            for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(train_x[order[i]]);
            auto lg = loss_and_gradient(model, batch, cfg.loss);
            if (!std::isfinite(lg.loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b + 1));
            for (std::size_t h = 0; h < kNumHeads; ++h) {
                auto& p = model.heads[h];
                auto& v = velocity[h];
                const auto& g = lg.grad[h];
                for (std::size_t i = 0; i < p.weights.size(); ++i) {
                    v.weights[i] = cfg.momentum * v.weights[i] - cfg.learning_rate * g.weights[i];
                    p.weights[i] += v.weights[i];
                }
                for (int k = 0; k < kNumBins; ++k) {
                    v.bias[k] = cfg.momentum * v.bias[k] - cfg.learning_rate * g.bias[k];
                    p.bias[k] += v.bias[k];
                }
            }
        }

        EpochRecord rec{epoch, dataset_loss(model, train_x, cfg.loss), dataset_loss(model, val_x, cfg.loss)};
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
            throw TrainingError("non-finite loss after epoch " + std::to_string(epoch));
        result.history.push_back(rec);
        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best = model;
            result.best_epoch = epoch;
        }
    }

    result.model = scaler.fold(best);
    return result;
}

using Predictions = std::map<std::string, HeadPredictions>;

inline Predictions predict(const ProbeModel& model, const FeatureSet& features) {
    if (!features.vectors.empty() && features.dim != model.dim)
        throw ValidationError("feature dimension " + std::to_string(features.dim) +
                              " does not match model dimension " + std::to_string(model.dim));
    Predictions out;
    for (const auto& v : features.vectors) out.emplace(v.clip_id, forward(model, v.values));
    return out;
}

// ---------------------------------------------------------------------------
// AEVM v1: magic "AEVM", version u32, dim u32, then for each head in
// canonical order 10 x dim weights followed by 10 biases, all f32 LE.

inline constexpr std::array<char, 4> kModelMagic = {'A', 'E', 'V', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

inline std::size_t write_model(const ProbeModel& model, std::ostream& out) {
    if (model.dim == 0 || model.dim > UINT32_MAX) throw ValidationError("invalid model dimension");
    for (const auto& h : model.heads) {
        if (h.weights.size() != kNumBins * model.dim) throw ValidationError("model head has wrong weight count");
        for (double w : h.weights)
            if (!std::isfinite(static_cast<float>(w))) throw ValidationError("non-finite model parameter");
        for (double b : h.bias)
            if (!std::isfinite(static_cast<float>(b))) throw ValidationError("non-finite model parameter");
    }
    out.write(kModelMagic.data(), 4);
    le::put_u32(out, kModelVersion);
    le::put_u32(out, static_cast<std::uint32_t>(model.dim));
    for (const auto& h : model.heads) {
        for (double w : h.weights) le::put_f32(out, static_cast<float>(w));
        for (double b : h.bias) le::put_f32(out, static_cast<float>(b));
    }
    if (!out) throw IoError("failed writing model stream");
    return 12 + kNumHeads * (kNumBins * model.dim + kNumBins) * 4;
}

inline ProbeModel read_model(std::istream& in, std::uint32_t max_dim = 1u << 20) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4)) throw FormatError("truncated AEVM header");
    if (magic != kModelMagic) throw FormatError("bad magic: not an AEVM stream");
    std::uint32_t version = 0, dim = 0;
    if (!le::get_u32(in, version) || !le::get_u32(in, dim)) throw FormatError("truncated AEVM header");
    if (version != kModelVersion) throw FormatError("unsupported AEVM version " + std::to_string(version));
    if (dim == 0 || dim > max_dim) throw FormatError("AEVM dim " + std::to_string(dim) + " out of range");
    ProbeModel m(dim);
    auto get = [&](double& dst) {
        float f = 0.0f;
        if (!le::get_f32(in, f)) throw FormatError("truncated AEVM body");
        if (!std::isfinite(f)) throw FormatError("non-finite AEVM parameter");
        dst = f;
    };
    for (auto& h : m.heads) {
        for (auto& w : h.weights) get(w);
        for (auto& b : h.bias) get(b);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after AEVM body");
    return m;
}

inline void write_history(std::span<const EpochRecord> history, std::ostream& out) {
    for (const auto& r : history) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["train_loss"] = r.train_loss;
        j["val_loss"] = r.val_loss;
        out << j.dump() << '\n';
    }
}

} // namespace disqa
