#include "disqa/model.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace disqa;

namespace {

Distribution random_distribution(std::mt19937_64& rng) {
    std::gamma_distribution<double> g(1.0, 1.0);
    Distribution p{};
    double s = 0.0;
    for (auto& v : p) s += (v = g(rng) + 1e-3);
    for (auto& v : p) v /= s;
    return p;
}

Example random_example(std::mt19937_64& rng, std::size_t dim, const std::string& id = "x") {
    std::normal_distribution<double> n(0.0, 1.0);
    Example ex;
    ex.clip_id = id;
    for (std::size_t j = 0; j < dim; ++j) ex.x.push_back(n(rng));
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        ex.target[h] = random_distribution(rng);
        ex.target_mean[h] = distribution_mean(ex.target[h]);
    }
    return ex;
}

ProbeModel random_model(std::mt19937_64& rng, std::size_t dim, double scale = 0.5) {
    std::normal_distribution<double> n(0.0, scale);
    ProbeModel m(dim);
    for (auto& h : m.heads) {
        for (auto& w : h.weights) w = n(rng);
        for (auto& b : h.bias) b = n(rng);
    }
    return m;
}

Distribution one_hot(int bin) {
    Distribution p{};
    p[bin - 1] = 1.0;
    return p;
}

const LossConfig kModes[] = {
    {0.8, 1.0, LossMode::Full}, {0.8, 1.0, LossMode::RegressionOnly}, {0.8, 1.0, LossMode::KLOnly}, {0.3, 2.5, LossMode::Full}};

} // namespace

TEST(Forward, ZeroParametersGiveUniform) {
    const ProbeModel m(6);
    const std::vector<double> x = {1, -2, 3, 0.5, 9, -7};
    for (const auto& p : forward(m, x)) {
        for (double v : p.probs) EXPECT_NEAR(v, 0.1, 1e-15);
        EXPECT_NEAR(p.mean, 5.5, 1e-12);
    }
}

TEST(Forward, LargeBiasSaturates) {
    ProbeModel m(2);
    m.heads[3].bias[6] = 100.0;
    const auto p = forward(m, std::vector<double>{0.3, 0.4});
    EXPECT_NEAR(p[3].probs[6], 1.0, 1e-12);
    EXPECT_NEAR(p[3].mean, 7.0, 1e-9);
    EXPECT_NEAR(p[2].mean, 5.5, 1e-12);
}

TEST(Forward, DimensionMismatchThrows) {
    const ProbeModel m(4);
    EXPECT_THROW(forward(m, std::vector<double>{1, 2, 3}), ValidationError);
}

TEST(Softmax, MatchesExtendedPrecisionOracle) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 5.0);
    for (int trial = 0; trial < 500; ++trial) {
        Distribution z{};
        for (auto& v : z) v = n(rng);
        const auto p = softmax(z);
        long double s = 0.0L;
        for (double v : z) s += std::exp(static_cast<long double>(v));
        for (int k = 0; k < kNumBins; ++k)
            EXPECT_NEAR(p[k], static_cast<double>(std::exp(static_cast<long double>(z[k])) / s), 1e-12);
    }
}

TEST(Softmax, StableForHugeLogits) {
    Distribution z{};
    z.fill(-1e4);
    z[2] = 1e4;
    z[5] = 1e4;
    const auto p = softmax(z);
    for (double v : p) EXPECT_TRUE(std::isfinite(v));
    EXPECT_DOUBLE_EQ(p[2], 0.5);
    EXPECT_DOUBLE_EQ(p[5], 0.5);
}

TEST(Loss, HandComputedCase) {
    HeadPredictions pred;
    PerHead<Distribution> target;
    PerHead<double> mean;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        pred[h].probs.fill(0.1);
        pred[h].mean = 5.5;
        target[h] = one_hot(1);
        mean[h] = 1.0;
    }
    // One head carries the hand case; the rest are made loss-free.
    for (std::size_t h = 1; h < kNumHeads; ++h) {
        target[h].fill(0.1);
        mean[h] = 5.5;
    }
    EXPECT_NEAR(loss(pred, target, mean, {}), 22.092068074395237, 1e-4);
    EXPECT_NEAR(loss(pred, target, mean, {}), 0.8 * std::log(10.0) + 20.25, 1e-12);
}

TEST(Loss, ZeroWhenPredictionMatchesTarget) {
    std::mt19937_64 rng(3);
    HeadPredictions pred;
    PerHead<Distribution> target;
    PerHead<double> mean;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        target[h] = random_distribution(rng);
        mean[h] = distribution_mean(target[h]);
        pred[h] = {target[h], mean[h]};
    }
    EXPECT_NEAR(loss(pred, target, mean, {}), 0.0, 1e-15);
}

TEST(Loss, FullIsExactlyKlPlusRegression) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> w(0.0, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto m = random_model(rng, 5, 1.0);
        const auto ex = random_example(rng, 5);
        const auto pred = forward(m, ex.x);
        const double a = w(rng), l = w(rng);
        const double full = loss(pred, ex.target, ex.target_mean, {a, l, LossMode::Full});
        const double kl = loss(pred, ex.target, ex.target_mean, {a, l, LossMode::KLOnly});
        const double reg = loss(pred, ex.target, ex.target_mean, {a, l, LossMode::RegressionOnly});
        ASSERT_EQ(full, kl + reg);
    }
}

TEST(Loss, ZeroPredictedMassIsDegenerate) {
    Distribution p{};
    p[0] = 1.0;
    Distribution q{};
    q[1] = 1.0;
    EXPECT_THROW(kl_divergence(p, q), DegenerateError);
    EXPECT_EQ(kl_divergence(q, q), 0.0);
}

TEST(LossConfig, Validation) {
    EXPECT_NO_THROW((LossConfig{0.0, 1.0, LossMode::Full}.validate()));
    EXPECT_THROW((LossConfig{0.0, 0.0, LossMode::Full}.validate()), ValidationError);
    EXPECT_THROW((LossConfig{-1.0, 1.0, LossMode::Full}.validate()), ValidationError);
    EXPECT_EQ(parse_loss_mode("+R"), LossMode::RegressionOnly);
    EXPECT_EQ(parse_loss_mode("+KL"), LossMode::KLOnly);
    EXPECT_THROW(parse_loss_mode("huber"), ValidationError);
}

TEST(Gradient, MatchesCentralDifferences) {
    std::mt19937_64 rng(99);
    constexpr double h = 1e-5;
    const std::size_t dim = 4;
    int draws = 0;
    double worst = 0.0;
    for (const auto& cfg : kModes) {
        for (int trial = 0; trial < 8; ++trial) {
            auto m = random_model(rng, dim);
            std::vector<Example> batch;
            for (int i = 0; i < 3; ++i) batch.push_back(random_example(rng, dim));
            const auto g = loss_gradient(m, batch, cfg);
            std::uniform_int_distribution<std::size_t> head(0, kNumHeads - 1), idx(0, kNumBins * (dim + 1) - 1);
            for (int probe = 0; probe < 6; ++probe, ++draws) {
                const auto hh = head(rng);
                const auto i = idx(rng);
                double* param = i < kNumBins * dim ? &m.heads[hh].weights[i] : &m.heads[hh].bias[i - kNumBins * dim];
                const double analytic = i < kNumBins * dim ? g[hh].weights[i] : g[hh].bias[i - kNumBins * dim];
                const double saved = *param;
                *param = saved + h;
                const double up = dataset_loss(m, batch, cfg);
                *param = saved - h;
                const double down = dataset_loss(m, batch, cfg);
                *param = saved;
                const double numeric = (up - down) / (2 * h);
                const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                worst = std::max(worst, rel);
                EXPECT_LT(rel, 1e-4) << "mode " << to_string(cfg.mode) << " head " << hh << " index " << i;
            }
        }
    }
    EXPECT_GE(draws, 100);
    RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Gradient, RegressionOnlyWithZeroLambdaIsZero) {
    std::mt19937_64 rng(4);
    const auto m = random_model(rng, 3);
    const std::vector<Example> batch = {random_example(rng, 3), random_example(rng, 3)};
    const auto g = loss_gradient(m, batch, {0.8, 0.0, LossMode::RegressionOnly});
    for (const auto& head : g) {
        for (double v : head.weights) EXPECT_EQ(v, 0.0);
        for (double v : head.bias) EXPECT_EQ(v, 0.0);
    }
}

TEST(Gradient, VanishesAtPerfectFit) {
    std::mt19937_64 rng(8);
    const auto m = random_model(rng, 3);
    Example ex = random_example(rng, 3);
    const auto pred = forward(m, ex.x);
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        ex.target[h] = pred[h].probs;
        ex.target_mean[h] = pred[h].mean;
    }
    const std::vector<Example> batch = {ex};
    double norm = 0.0;
    for (const auto& head : loss_gradient(m, batch, {})) {
        for (double v : head.weights) norm += v * v;
        for (double v : head.bias) norm += v * v;
    }
    EXPECT_LT(std::sqrt(norm), 1e-6);
}

TEST(Gradient, HeadsAreIndependent) {
    // Changing one head's target leaves every other head's gradient untouched.
    std::mt19937_64 rng(21);
    const auto m = random_model(rng, 5);
    std::vector<Example> batch = {random_example(rng, 5), random_example(rng, 5)};
    const auto before = loss_gradient(m, batch, {});
    batch[0].target[4] = one_hot(9);
    batch[0].target_mean[4] = 9.0;
    const auto after = loss_gradient(m, batch, {});
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        if (h == 4)
            EXPECT_NE(before[h], after[h]);
        else
            EXPECT_EQ(before[h], after[h]);
    }
}

TEST(Training, SelectBestEpochPrefersEarliestMinimum) {
    EXPECT_EQ(select_best_epoch(std::vector<double>{3.0, 2.0, 2.5}), 1u);
    EXPECT_EQ(select_best_epoch(std::vector<double>{1.0, 1.0}), 0u);
    EXPECT_THROW(select_best_epoch(std::vector<double>{}), ValidationError);
}

namespace {

// Teacher model generates exact targets, so the probe can fit them.
std::vector<Example> teacher_data(std::mt19937_64& rng, std::size_t n, std::size_t dim, const ProbeModel& teacher) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto ex = random_example(rng, dim, "c" + std::to_string(i));
        const auto p = forward(teacher, ex.x);
        for (std::size_t h = 0; h < kNumHeads; ++h) {
            ex.target[h] = p[h].probs;
            ex.target_mean[h] = p[h].mean;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

} // namespace

TEST(Training, SingleEpochProducesOneRecord) {
    std::mt19937_64 rng(1);
    const auto teacher = random_model(rng, 4);
    const auto tr = teacher_data(rng, 40, 4, teacher);
    const auto va = teacher_data(rng, 10, 4, teacher);
    TrainConfig cfg;
    cfg.epochs = 1;
    const auto r = train(tr, va, cfg);
    ASSERT_EQ(r.history.size(), 1u);
    EXPECT_EQ(r.best_epoch, 1);
    EXPECT_EQ(r.history[0].epoch, 1);
}

TEST(Training, FitsLearnableTeacher) {
    std::mt19937_64 rng(2);
    const auto teacher = random_model(rng, 6, 0.6);
    const auto tr = teacher_data(rng, 400, 6, teacher);
    const auto va = teacher_data(rng, 100, 6, teacher);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.learning_rate = 0.05;
    const auto r = train(tr, va, cfg);
    const double final_loss = dataset_loss(r.model, tr, cfg.loss);
    EXPECT_LT(final_loss, 0.1 * r.initial_train_loss);
    EXPECT_EQ(r.history.size(), 60u);
    std::vector<double> val;
    for (const auto& e : r.history) val.push_back(e.val_loss);
    EXPECT_EQ(r.best_epoch, static_cast<int>(select_best_epoch(val)) + 1);
    // Folded parameters reproduce the recorded validation loss on raw features.
    EXPECT_NEAR(dataset_loss(r.model, va, cfg.loss), r.history[r.best_epoch - 1].val_loss, 1e-9);
}

TEST(Training, DeterministicGivenSeed) {
    std::mt19937_64 rng(5);
    const auto teacher = random_model(rng, 3);
    const auto tr = teacher_data(rng, 50, 3, teacher);
    const auto va = teacher_data(rng, 10, 3, teacher);
    TrainConfig cfg;
    cfg.seed = 13;
    cfg.momentum = 0.5;
    const auto a = train(tr, va, cfg);
    const auto b = train(tr, va, cfg);
    EXPECT_EQ(a.model, b.model);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
}

TEST(Training, RegressionModeEqualsFullWithZeroAlpha) {
    std::mt19937_64 rng(6);
    const auto teacher = random_model(rng, 3);
    const auto tr = teacher_data(rng, 60, 3, teacher);
    const auto va = teacher_data(rng, 12, 3, teacher);
    TrainConfig reg;
    reg.loss.mode = LossMode::RegressionOnly;
    TrainConfig full;
    full.loss.alpha = 0.0;
    const auto a = train(tr, va, reg);
    const auto b = train(tr, va, full);
    EXPECT_EQ(a.model, b.model);
    for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
}

TEST(Training, RejectsBadInput) {
    std::mt19937_64 rng(7);
    const std::vector<Example> tr = {random_example(rng, 3)};
    const std::vector<Example> bad = {random_example(rng, 4)};
    EXPECT_THROW(train(tr, {}, {}), ValidationError);
    EXPECT_THROW(train({}, tr, {}), ValidationError);
    EXPECT_THROW(train(tr, bad, {}), ValidationError);
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_THROW(train(tr, tr, cfg), ValidationError);
}

TEST(Training, DivergenceRaisesTrainingError) {
    std::mt19937_64 rng(8);
    std::vector<Example> tr;
    for (int i = 0; i < 8; ++i) tr.push_back(random_example(rng, 3));
    TrainConfig cfg;
    cfg.learning_rate = 1e300;
    cfg.standardize = false;
    EXPECT_THROW(train(tr, tr, cfg), Error);
}

TEST(Predict, EmptyAndSmallSets) {
    std::mt19937_64 rng(9);
    const auto m = random_model(rng, 2);
    EXPECT_TRUE(predict(m, FeatureSet{2, {}}).empty());
    FeatureSet f{2, {}};
    for (int i = 0; i < 10; ++i) f.vectors.push_back({"c" + std::to_string(i), {double(i), -double(i)}});
    const auto p = predict(m, f);
    ASSERT_EQ(p.size(), 10u);
    for (const auto& [id, heads] : p)
        for (const auto& h : heads) {
            double s = 0.0;
            for (double v : h.probs) s += v;
            EXPECT_NEAR(s, 1.0, 1e-12);
            EXPECT_GE(h.mean, 1.0);
            EXPECT_LE(h.mean, 10.0);
        }
    EXPECT_THROW(predict(m, FeatureSet{3, {{"a", {1, 2, 3}}}}), ValidationError);
}

TEST(ModelFile, RoundTripAtFloatPrecision) {
    std::mt19937_64 rng(10);
    auto m = random_model(rng, 7);
    for (auto& h : m.heads) {
        for (auto& w : h.weights) w = static_cast<float>(w);
        for (auto& b : h.bias) b = static_cast<float>(b);
    }
    std::stringstream s(std::ios::in | std::ios::out | std::ios::binary);
    const auto n = write_model(m, s);
    EXPECT_EQ(n, s.str().size());
    EXPECT_EQ(n, 12u + kNumHeads * (kNumBins * 7 + kNumBins) * 4);
    const auto r = read_model(s);
    for (std::size_t h = 0; h < kNumHeads; ++h) {
        EXPECT_EQ(r.heads[h].weights, m.heads[h].weights) << h;
        for (int k = 0; k < kNumBins; ++k) EXPECT_EQ(r.heads[h].bias[k], m.heads[h].bias[k]) << h << " " << k;
    }
    EXPECT_EQ(r, m);
}

TEST(ModelFile, RejectsCorruptStreams) {
    std::stringstream s(std::ios::in | std::ios::out | std::ios::binary);
    write_model(ProbeModel(2), s);
    const auto good = s.str();
    auto read = [](const std::string& bytes) {
        std::istringstream in(bytes, std::ios::binary);
        return read_model(in);
    };
    EXPECT_NO_THROW(read(good));
    EXPECT_THROW(read("AEVF" + good.substr(4)), FormatError);
    EXPECT_THROW(read(good.substr(0, good.size() - 2)), FormatError);
    EXPECT_THROW(read(good + "z"), FormatError);
    EXPECT_THROW(read(""), FormatError);
}

TEST(History, JsonLinesPerEpoch) {
    const std::vector<EpochRecord> h = {{1, 2.5, 3.0}, {2, 1.5, 2.0}};
    std::ostringstream out;
    write_history(h, out);
    EXPECT_EQ(out.str(), "{\"epoch\":1,\"train_loss\":2.5,\"val_loss\":3.0}\n"
                         "{\"epoch\":2,\"train_loss\":1.5,\"val_loss\":2.0}\n");
}
