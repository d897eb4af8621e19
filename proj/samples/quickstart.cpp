// Synthesize a dataset, train the probe on the system-holdout train split and
// print held-out PCC per (dimension, perspective).

#include "disqa/pipeline.hpp"
#include "disqa/report.hpp"
#include "disqa/synth.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    using namespace disqa;
    SynthConfig sc;
    sc.seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;

    const auto data = generate(sc);
    const auto prepared = prepare_targets(data.ratings, {});
    const auto join = join_features(data.features, prepared.targets);

    SplitSpec spec;
    spec.seed = sc.seed;
    const auto sp = split(data.clips, spec);
    const auto train_set = select_examples(join.examples, sp.train);
    const auto val_set = select_examples(join.examples, sp.val);
    const auto test_set = select_examples(join.examples, sp.test);

    TrainConfig tc;
    tc.seed = sc.seed;
    const auto result = train(train_set, val_set, tc);
    const auto report = evaluate(predicted_means(result.model, test_set), target_means(test_set), system_map(data.clips));

    std::cout << "probe discarded " << prepared.discarded_by_probe << " of " << data.ratings.size() << " ratings\n"
              << "train/val/test clips " << train_set.size() << "/" << val_set.size() << "/" << test_set.size() << "\n"
              << "selected epoch " << result.best_epoch << "\n\n"
              << format_pcc_table(report);
}
