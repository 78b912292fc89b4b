#include "alrnn/tasks.hpp"
#include "alrnn/train.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace alrnn;

namespace {

std::string export_string(const TaskDataset& ds) {
    std::ostringstream out;
    export_dataset(ds, out);
    return out.str();
}

} // namespace

TEST_CASE("copy task structure at paper defaults") {
    const TaskDataset ds = gen_copy(4, 8, 200, 20, 10, 42);
    CHECK(ds.descriptor.input_dim == 5);
    CHECK(ds.descriptor.output_dim == 4);
    for (const auto& inst : ds.train) {
        CHECK(inst.T() == 217); // 8 + 200 + 1 + 8
        CHECK(inst.loss_window.begin == 209);
        CHECK(inst.loss_window.end == 217);
        CHECK(inst.sequence_target.size() == 8);
        // encoding phase: one-hot over the first 4 channels, cue silent
        for (long t = 0; t < 8; ++t) {
            CHECK(inst.inputs.col(t).sum() == 1.0);
            CHECK(inst.inputs(4, t) == 0.0);
            CHECK(inst.inputs(inst.sequence_target[t], t) == 1.0);
        }
        // delay is silent, then a single cue step on the cue channel
        for (long t = 8; t < 208; ++t) CHECK(inst.inputs.col(t).sum() == 0.0);
        CHECK(inst.inputs(4, 208) == 1.0);
        CHECK(inst.inputs.col(208).sum() == 1.0);
        for (long t = 209; t < 217; ++t) CHECK(inst.inputs.col(t).sum() == 0.0);
    }
}

TEST_CASE("copy task train set is sampled, not enumerated") {
    // 1000 draws from the 4^8 = 65,536 sequence space: the birthday bound
    // gives ~7.6 expected duplicates, while enumeration would give none
    // (and would exhaust prefixes in lexicographic order).
    const TaskDataset ds = gen_copy(4, 8, 200, 1000, 10, 7);
    std::set<std::vector<long>> distinct;
    for (const auto& inst : ds.train) distinct.insert(inst.sequence_target);
    CHECK(distinct.size() < 1000); // at least one collision
    CHECK(distinct.size() > 970);  // but nearly all distinct
}

TEST_CASE("copy task regeneration is byte-identical") {
    const std::string a = export_string(gen_copy(4, 8, 200, 30, 10, 5));
    const std::string b = export_string(gen_copy(4, 8, 200, 30, 10, 5));
    const std::string c = export_string(gen_copy(4, 8, 200, 30, 10, 6));
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("addition task structure") {
    const TaskDataset ds = gen_addition(100, 50, 20, 3);
    CHECK(ds.descriptor.input_dim == 2);
    CHECK(ds.descriptor.output_dim == 1);
    for (const auto& inst : ds.train) {
        CHECK(inst.T() == 100);
        CHECK(inst.loss_window.begin == 99);
        CHECK(inst.loss_window.end == 100);
        long ones = 0;
        double marked_sum = 0.0;
        for (long t = 0; t < 100; ++t) {
            const double m = inst.inputs(1, t);
            CHECK((m == 0.0 || m == 1.0));
            if (m == 1.0) {
                ++ones;
                CHECK(t < 50); // both marks in the first half
                marked_sum += inst.inputs(0, t);
            }
            CHECK(inst.inputs(0, t) >= 0.0);
            CHECK(inst.inputs(0, t) <= 1.0);
        }
        CHECK(ones == 2); // exactly two strictly distinct positions
        CHECK(inst.scalar_target == doctest::Approx(marked_sum).epsilon(1e-15));
        CHECK(inst.scalar_target >= 0.0);
        CHECK(inst.scalar_target <= 2.0);
    }
}

TEST_CASE("addition mean predictor baseline is ~2/12") {
    const TaskDataset ds = gen_addition(100, 2000, 10, 11);
    double mse = 0.0;
    for (const auto& inst : ds.train) {
        const double err = 1.0 - inst.scalar_target;
        mse += err * err;
    }
    mse /= static_cast<double>(ds.train.size());
    CHECK(mse == doctest::Approx(2.0 / 12.0).epsilon(0.12)); // Var(U+U)
}

TEST_CASE("contextual task structure and label rule") {
    const TaskDataset ds = gen_contextual(100, 1000, 20, 17);
    CHECK(ds.descriptor.input_dim == 3);
    CHECK(ds.descriptor.output_dim == 2);
    long positives = 0;
    for (const auto& inst : ds.train) {
        // one-hot context cue at the first step only
        const double c0 = inst.inputs(0, 0), c1 = inst.inputs(1, 0);
        CHECK(c0 + c1 == 1.0);
        for (long t = 1; t < inst.T(); ++t) {
            CHECK(inst.inputs(0, t) == 0.0);
            CHECK(inst.inputs(1, t) == 0.0);
        }
        // label = sign of cumulative evidence, inverted under context 2
        double cumsum = 0.0;
        for (long t = 0; t < inst.T(); ++t) cumsum += inst.inputs(2, t);
        long expected = cumsum > 0.0 ? 1 : 0;
        if (c1 == 1.0) expected = 1 - expected;
        CHECK(inst.class_target == expected);
        positives += inst.class_target;
    }
    // balance within 5% of 50/50 over 1000 seeded trials
    CHECK(positives > 450);
    CHECK(positives < 550);
}

TEST_CASE("contextual identical evidence under opposite contexts flips label") {
    // Rule inversion is definitional: recompute the rule on a fixed stream.
    const TaskDataset ds = gen_contextual(50, 200, 10, 23);
    for (const auto& inst : ds.train) {
        double cumsum = 0.0;
        for (long t = 0; t < inst.T(); ++t) cumsum += inst.inputs(2, t);
        const long base = cumsum > 0.0 ? 1 : 0;
        const bool context2 = inst.inputs(1, 0) == 1.0;
        CHECK(inst.class_target == (context2 ? 1 - base : base));
    }
}

TEST_CASE("contextual optional recall cue channel") {
    const TaskDataset ds = gen_contextual(30, 10, 5, 2, 0.1, true);
    CHECK(ds.descriptor.input_dim == 4);
    for (const auto& inst : ds.train) {
        for (long t = 0; t < 29; ++t) CHECK(inst.inputs(3, t) == 0.0);
        CHECK(inst.inputs(3, 29) == 1.0);
    }
}

TEST_CASE("untrained models sit at chance level") {
    const TaskDataset copy = gen_copy(4, 8, 200, 10, 100, 31);
    auto [params, readout] = init_params(12, 2, 5, 4, 77);
    const EvalResult copy_eval = evaluate(params, readout, copy.test, TaskKind::Copy);
    CHECK(copy_eval.metric_name == "symbol_accuracy");
    CHECK(copy_eval.value == doctest::Approx(0.25).epsilon(0.14)); // 1/n_sym +- 3pp

    const TaskDataset ctx = gen_contextual(100, 10, 400, 37);
    auto [cp, cr] = init_params(12, 2, 3, 2, 78);
    const EvalResult ctx_eval = evaluate(cp, cr, ctx.test, TaskKind::Contextual);
    CHECK(ctx_eval.metric_name == "accuracy");
    CHECK(ctx_eval.value == doctest::Approx(0.50).epsilon(0.14));
}

TEST_CASE("evaluate reports dimension mismatches by name") {
    const TaskDataset ds = gen_contextual(10, 5, 5, 1);
    auto [params, readout] = init_params(6, 1, 4, 2, 1); // K=4, task has K=3
    CHECK_THROWS_WITH_AS(evaluate(params, readout, ds.test, TaskKind::Contextual),
                         doctest::Contains("K=3"), std::invalid_argument);
}

TEST_CASE("generator parameter validation") {
    CHECK_THROWS_AS(gen_copy(1, 8, 200, 10, 5, 0), std::invalid_argument);
    CHECK_THROWS_AS(gen_addition(3, 10, 5, 0), std::invalid_argument);
    CHECK_THROWS_AS(gen_contextual(1, 10, 5, 0), std::invalid_argument);
}
