#include "doctest.h"

#include <sstream>

#include "driftmoe/generators.hpp"
#include "driftmoe/moe.hpp"

using namespace driftmoe;

namespace {

double class_mass(const HoeffdingTree& tree, std::size_t c) {
    double total = 0.0;
    tree.for_each_leaf([&](const LeafStats& leaf) { total += leaf.class_counts()[c]; });
    return total;
}

MoeConfig small_config(MoeMode mode, std::uint64_t seed = 1) {
    MoeConfig c;
    c.mode = mode;
    c.hidden1 = 16;
    c.hidden2 = 16;
    c.batch_size = 8;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("top-k and argmax break ties toward the lower index") {
    const std::vector<double> w{0.2, 0.5, 0.5, 0.1, 0.5};
    CHECK(argmax(w) == 1);
    CHECK(top_k_indices(w, 3) == std::vector<std::size_t>{1, 2, 4});
    CHECK(top_k_indices(w, 1) == std::vector<std::size_t>{1});
    CHECK(top_k_indices(w, 9).size() == 5);
    const std::vector<double> u{0.1, 0.7, 0.2};
    CHECK(argmax(u) == 1);
    CHECK(top_k_indices(u, 2) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("configuration validation") {
    const auto schema = StreamSchema::uniform(3, FeatureKind::Numeric, 2);
    auto c = small_config(MoeMode::Data);
    c.top_k = 13;
    CHECK_THROWS_AS(DriftMoeModel(schema, c), ConfigError);
    c.top_k = 0;
    CHECK_THROWS_AS(DriftMoeModel(schema, c), ConfigError);
    c = small_config(MoeMode::Data);
    c.learning_rate = -1.0;
    CHECK_THROWS_AS(DriftMoeModel(schema, c), ConfigError);
    // top_k is ignored in Task mode, and the pool is one expert per class.
    c = small_config(MoeMode::Task);
    c.top_k = 50;
    CHECK(DriftMoeModel(StreamSchema::uniform(3, FeatureKind::Numeric, 7), c).num_experts() == 7);
    CHECK(parse_mode("task") == MoeMode::Task);
    CHECK_THROWS_AS(parse_mode("both"), ConfigError);
    CHECK(parse_task_mask_rule(to_string(TaskMaskRule::Symmetric)) == TaskMaskRule::Symmetric);
}

TEST_CASE("cold-start model predicts class 0 through expert 0") {
    auto c = small_config(MoeMode::Data);
    DriftMoeModel m(StreamSchema::uniform(4, FeatureKind::Numeric, 3), c);
    // Zero the output layer so that every gate weight ties.
    RouterParams& p = m.router().params();
    for (auto& w : p.weights(2)) w = 0.0;
    for (auto& b : p.biases(2)) b = 0.0;
    const auto pred = m.predict(std::vector<double>{0.3, 0.1, 0.9, 0.5});
    CHECK(pred.expert == 0);
    CHECK(pred.label == 0);
    for (double w : pred.weights) CHECK(w == doctest::Approx(1.0 / 12));
}

TEST_CASE("expert update counts per instance") {
    SUBCASE("Data mode trains exactly k experts") {
        auto stream = make_benchmark_stream("led_a", 2, {600});
        DriftMoeModel m(stream->schema(), small_config(MoeMode::Data));
        while (auto inst = stream->next()) {
            const auto out = m.train_step(inst->features, inst->label);
            REQUIRE(out.tree_updates == 3);
        }
        std::uint64_t total = 0;
        for (std::size_t i = 0; i < m.num_experts(); ++i) total += m.data_expert(i).instances_seen();
        CHECK(total == 3 * 600);
    }
    SUBCASE("Task mode trains every one-vs-rest expert with one positive label") {
        auto stream = make_benchmark_stream("led_a", 2, {600});
        DriftMoeModel m(stream->schema(), small_config(MoeMode::Task));
        REQUIRE(m.num_experts() == 10);
        std::vector<double> positives_before(10, 0.0);
        while (auto inst = stream->next()) {
            for (std::size_t i = 0; i < 10; ++i) positives_before[i] = class_mass(m.task_expert(i).tree(), 1);
            const auto out = m.train_step(inst->features, inst->label);
            REQUIRE(out.tree_updates == 10);
            int positives = 0;
            for (std::size_t i = 0; i < 10; ++i) {
                positives += class_mass(m.task_expert(i).tree(), 1) > positives_before[i] + 0.5;
            }
            REQUIRE(positives == 1);
        }
    }
}

TEST_CASE("instance counter and router step cadence") {
    auto stream = make_benchmark_stream("sea_a", 3, {100});
    auto c = small_config(MoeMode::Data);
    DriftMoeModel m(stream->schema(), c);
    std::size_t updates = 0;
    while (auto inst = stream->next()) {
        const auto before = m.instances_seen();
        updates += m.train_step(inst->features, inst->label).router_updated;
        CHECK(m.instances_seen() == before + 1);
    }
    CHECK(updates == 100 / 8);
    CHECK(m.router().steps() == 12);
    CHECK(m.finalize());
    CHECK(m.router().steps() == 13);
    CHECK_FALSE(m.finalize());
}

TEST_CASE("prediction is a pure function of the pre-update state") {
    for (auto mode : {MoeMode::Data, MoeMode::Task}) {
        auto stream = make_benchmark_stream("rbf_m", 4, {1500});
        DriftMoeModel m(stream->schema(), small_config(mode));
        while (auto inst = stream->next()) {
            const auto frozen = m.predict(inst->features);
            REQUIRE(m.predict(inst->features).label == frozen.label);
            const auto out = m.train_step(inst->features, inst->label);
            REQUIRE(out.prediction.label == frozen.label);
            REQUIRE(out.prediction.expert == frozen.expert);
            REQUIRE(out.prediction.weights == frozen.weights);
        }
    }
}

TEST_CASE("Data-mode mask marks exactly the experts that were right before the update") {
    auto stream = make_benchmark_stream("led_g", 5, {2000});
    DriftMoeModel m(stream->schema(), small_config(MoeMode::Data));
    while (auto inst = stream->next()) {
        std::vector<std::size_t> before(m.num_experts());
        for (std::size_t i = 0; i < m.num_experts(); ++i) before[i] = m.data_expert(i).predict(inst->features);
        const auto out = m.train_step(inst->features, inst->label);
        REQUIRE(out.expert_predictions == before);
        bool any = false;
        for (std::size_t i = 0; i < m.num_experts(); ++i) {
            any |= before[i] == inst->label;
            if (!out.mask_fallback) REQUIRE(out.mask[i] == (before[i] == inst->label ? 1 : 0));
        }
        REQUIRE(out.mask_fallback == !any);
        if (out.mask_fallback) {
            // Nobody was right: the router's own choice is reinforced.
            for (std::size_t i = 0; i < m.num_experts(); ++i) {
                REQUIRE(out.mask[i] == (i == out.prediction.expert ? 1 : 0));
            }
        }
        REQUIRE(out.prediction.label == before[out.prediction.expert]);
    }
}

TEST_CASE("Task-mode mask rules") {
    for (auto rule : {TaskMaskRule::PositiveMatch, TaskMaskRule::Symmetric}) {
        auto c = small_config(MoeMode::Task);
        c.task_mask = rule;
        auto s = make_benchmark_stream("led_a", 6, {1500});
        DriftMoeModel m(s->schema(), c);
        while (auto inst = s->next()) {
            const auto out = m.train_step(inst->features, inst->label);
            const std::size_t y = inst->label;
            REQUIRE(out.prediction.label == out.prediction.expert);
            if (out.mask_fallback) {
                for (std::size_t i = 0; i < m.num_experts(); ++i) REQUIRE(out.mask[i] == (i == y ? 1 : 0));
                continue;
            }
            for (std::size_t i = 0; i < m.num_experts(); ++i) {
                const bool claims = out.expert_predictions[i] == i;
                const bool expected = rule == TaskMaskRule::Symmetric ? claims == (i == y) : claims && i == y;
                REQUIRE(out.mask[i] == (expected ? 1 : 0));
            }
        }
    }
}

TEST_CASE("run_prequential emits one record per instance in order") {
    auto stream = make_benchmark_stream("sea_g", 7, {1000});
    DriftMoeModel m(stream->schema(), small_config(MoeMode::Data));
    std::uint64_t expected = 0;
    const auto n = run_prequential(m, *stream, [&](const PrequentialRecord& r) {
        CHECK(r.index == expected);
        ++expected;
    });
    CHECK(n == 1000);
    CHECK(expected == 1000);
    CHECK(m.instances_seen() == 1000);
    // The residual batch was flushed.
    CHECK(m.router().pending() == 0);

    auto led = make_benchmark_stream("led_a", 1, {10});
    DriftMoeModel wrong(stream->schema(), small_config(MoeMode::Data));
    CHECK_THROWS_AS(run_prequential(wrong, *led, {}), ConfigError);
}

TEST_CASE("a constant concept is learnt") {
    std::vector<Instance> data;
    Rng rng(3);
    for (int i = 0; i < 3000; ++i) data.push_back({{rng.uniform(), rng.uniform()}, 1});
    VectorStream source(StreamSchema::uniform(2, FeatureKind::Numeric, 3), data);
    DriftMoeModel m(source.schema(), small_config(MoeMode::Data));
    std::uint64_t late_correct = 0;
    run_prequential(m, source, [&](const PrequentialRecord& r) {
        if (r.index >= 1000) late_correct += r.predicted == r.label;
    });
    CHECK(late_correct == 2000);
}

TEST_CASE("identical seeds give identical runs; different seeds differ") {
    const auto run = [](std::uint64_t seed) {
        auto stream = make_benchmark_stream("led_a", 9, {3000});
        DriftMoeModel m(stream->schema(), small_config(MoeMode::Data, seed));
        std::vector<std::size_t> preds;
        run_prequential(m, *stream, [&](const PrequentialRecord& r) { preds.push_back(r.expert); });
        return preds;
    };
    CHECK(run(1) == run(1));
    CHECK(run(1) != run(2));
}

TEST_CASE("checkpoint round trip resumes identically") {
    for (auto mode : {MoeMode::Data, MoeMode::Task}) {
        auto stream = make_benchmark_stream("rbf_f", 11, {4000});
        const auto data = take(*stream, 4000);
        DriftMoeModel a(stream->schema(), small_config(mode));
        // Stop mid-batch so the pending buffer is part of the checkpoint.
        for (std::size_t i = 0; i < 2003; ++i) a.train_step(data[i].features, data[i].label);
        std::stringstream buf;
        a.save(buf);
        auto b = DriftMoeModel::load(buf);
        CHECK(b.instances_seen() == 2003);
        CHECK(b.num_experts() == a.num_experts());
        for (std::size_t i = 2003; i < 4000; ++i) {
            const auto oa = a.train_step(data[i].features, data[i].label);
            const auto ob = b.train_step(data[i].features, data[i].label);
            REQUIRE(oa.prediction.weights == ob.prediction.weights);
            REQUIRE(oa.prediction.label == ob.prediction.label);
            REQUIRE(oa.mask == ob.mask);
        }
    }
    std::stringstream junk("not a checkpoint");
    CHECK_THROWS(DriftMoeModel::load(junk));
}
