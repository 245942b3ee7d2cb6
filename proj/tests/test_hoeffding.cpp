#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "driftmoe/generators.hpp"
#include "driftmoe/hoeffding.hpp"

using namespace driftmoe;

namespace {

std::shared_ptr<const AttributeLayout> layout_of(const StreamSchema& s) {
    return std::make_shared<const AttributeLayout>(s);
}

double entropy_of(std::initializer_list<double> counts) {
    double n = 0.0;
    for (double c : counts) n += c;
    double h = 0.0;
    for (double c : counts) {
        if (c > 0) h -= c / n * std::log2(c / n);
    }
    return h;
}

/// Independent batch Naive Bayes over binary features with Laplace smoothing
/// on the class prior and every likelihood.
std::vector<double> batch_naive_bayes(const std::vector<Instance>& data, std::size_t num_classes,
                                      const std::vector<double>& x) {
    const std::size_t d = x.size();
    std::vector<double> n_c(num_classes, 0.0);
    std::vector<std::vector<double>> ones(num_classes, std::vector<double>(d, 0.0));
    for (const auto& inst : data) {
        n_c[inst.label] += 1.0;
        for (std::size_t j = 0; j < d; ++j) ones[inst.label][j] += inst.features[j];
    }
    std::vector<double> log_post(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        double lp = std::log((n_c[c] + 1.0) / (static_cast<double>(data.size()) + num_classes));
        for (std::size_t j = 0; j < d; ++j) {
            const double match = x[j] > 0.5 ? ones[c][j] : n_c[c] - ones[c][j];
            lp += std::log((match + 1.0) / (n_c[c] + 2.0));
        }
        log_post[c] = lp;
    }
    const double top = *std::max_element(log_post.begin(), log_post.end());
    double z = 0.0;
    for (double& v : log_post) z += (v = std::exp(v - top));
    for (double& v : log_post) v /= z;
    return log_post;
}

}  // namespace

TEST_CASE("Hoeffding bound closed form") {
    CHECK(hoeffding_bound(1.0, std::exp(-2.0), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    const double r = std::log2(10.0);
    const double expected = std::sqrt(r * r * std::log(1e7) / 100.0);
    CHECK(hoeffding_bound(r, 1e-7, 50.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(hoeffding_bound(r, 1e-7, 50.0) - 1.33372) < 1e-3);
    for (double n : {1.0, 7.0, 50.0, 1234.0}) {
        CHECK(hoeffding_bound(2.0, 1e-5, 4.0 * n) == doctest::Approx(hoeffding_bound(2.0, 1e-5, n) / 2.0));
    }
}

TEST_CASE("Hoeffding bound monotonicity") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double r = 0.1 + 5.0 * rng.uniform();
        const double delta = std::pow(10.0, -1.0 - 9.0 * rng.uniform());
        const double n = 1.0 + std::floor(1e5 * rng.uniform());
        const double e = hoeffding_bound(r, delta, n);
        CHECK(hoeffding_bound(r, delta, n + 1.0) < e);
        CHECK(hoeffding_bound(r * 1.1, delta, n) > e);
        CHECK(hoeffding_bound(r, delta / 10.0, n) > e);
    }
}

TEST_CASE("entropy") {
    const std::vector<double> uniform{5.0, 5.0};
    CHECK(entropy_bits(uniform) == doctest::Approx(1.0));
    const std::vector<double> pure{7.0, 0.0};
    CHECK(entropy_bits(pure) == 0.0);
    const std::vector<double> three{8.0, 4.0, 4.0};
    CHECK(entropy_bits(three) == doctest::Approx(1.5));
}

TEST_CASE("information gain of binary attributes") {
    const auto schema = StreamSchema::uniform(2, FeatureKind::Binary, 3);
    SUBCASE("perfectly separating attribute gives one bit") {
        LeafStats leaf(layout_of(StreamSchema::uniform(2, FeatureKind::Binary, 2)), 2);
        for (int i = 0; i < 5; ++i) leaf.update(std::vector<double>{0.0, 1.0}, 0);
        for (int i = 0; i < 5; ++i) leaf.update(std::vector<double>{1.0, 1.0}, 1);
        CHECK(info_gain(leaf, 0) == doctest::Approx(1.0).epsilon(1e-12));
        // Attribute 1 is constant, so it admits no split.
        CHECK(info_gain(leaf, 1) == -std::numeric_limits<double>::infinity());
    }
    SUBCASE("attribute independent of the class gives zero") {
        LeafStats leaf(layout_of(schema), 3);
        for (std::size_t c = 0; c < 3; ++c) {
            for (int i = 0; i < 4; ++i) leaf.update(std::vector<double>{static_cast<double>(i % 2), 0.0}, c);
        }
        CHECK(info_gain(leaf, 0) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("counts {A:8, B:4, C:4} match direct entropy arithmetic") {
        LeafStats leaf(layout_of(schema), 3);
        // Branch x=0: A:6 B:1 C:3; branch x=1: A:2 B:3 C:1.
        const int zero[3] = {6, 1, 3};
        const int one[3] = {2, 3, 1};
        for (std::size_t c = 0; c < 3; ++c) {
            for (int i = 0; i < zero[c]; ++i) leaf.update(std::vector<double>{0.0, 0.0}, c);
            for (int i = 0; i < one[c]; ++i) leaf.update(std::vector<double>{1.0, 0.0}, c);
        }
        const double expected =
            entropy_of({8, 4, 4}) - (10.0 / 16.0) * entropy_of({6, 1, 3}) - (6.0 / 16.0) * entropy_of({2, 3, 1});
        CHECK(info_gain(leaf, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("numeric split search finds the separating threshold") {
    LeafStats leaf(layout_of(StreamSchema::uniform(1, FeatureKind::Numeric, 2)), 2);
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        const double x = rng.uniform();
        leaf.update(std::vector<double>{x}, x <= 0.5 ? 0 : 1);
    }
    const auto best = leaf.best_split(0, 10, 0.01);
    CHECK(best.merit > 0.8);
    CHECK(best.threshold == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("equal gains with a large bound do not split") {
    // Two copies of the same attribute tie exactly.
    LeafStats leaf(layout_of(StreamSchema::uniform(2, FeatureKind::Binary, 2)), 2);
    Rng rng(2);
    for (int i = 0; i < 60; ++i) {
        const double v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        leaf.update(std::vector<double>{v, v}, rng.bernoulli(0.8) ? static_cast<std::size_t>(v) : 1 - static_cast<std::size_t>(v));
    }
    HoeffdingTreeConfig cfg;
    const auto decision = evaluate_split(leaf, cfg);
    REQUIRE(decision.bound > cfg.tie_threshold);
    CHECK(decision.best_merit == doctest::Approx(decision.second_merit));
    CHECK_FALSE(decision.split);
}

TEST_CASE("no split before the grace period elapses") {
    const auto schema = StreamSchema::uniform(2, FeatureKind::Binary, 2);
    HoeffdingTreeConfig cfg;
    cfg.tie_threshold = 10.0;  // would split at the first check
    HoeffdingTree tree(schema, cfg);
    for (int i = 0; i < 49; ++i) tree.train(std::vector<double>{static_cast<double>(i % 2), 0.0}, i % 2);
    CHECK(tree.num_nodes() == 1);
    tree.train(std::vector<double>{1.0, 0.0}, 1);
    CHECK(tree.num_nodes() == 3);
}

TEST_CASE("naive Bayes leaf matches hand Bayes rule") {
    LeafStats leaf(layout_of(StreamSchema::uniform(1, FeatureKind::Binary, 2)), 2);
    for (int i = 0; i < 10; ++i) leaf.update(std::vector<double>{i < 9 ? 1.0 : 0.0}, 0);
    for (int i = 0; i < 10; ++i) leaf.update(std::vector<double>{i < 1 ? 1.0 : 0.0}, 1);
    const auto p = leaf.predict_proba(std::vector<double>{1.0});
    // Equal priors; likelihoods (9+1)/(10+2) and (1+1)/(10+2).
    CHECK(p[0] == doctest::Approx(10.0 / 12.0).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(2.0 / 12.0).epsilon(1e-9));
}

TEST_CASE("naive Bayes leaves equal batch naive Bayes on random count tables") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t C = 2 + rng.uniform_int(5);
        const std::size_t d = 1 + rng.uniform_int(40);
        const auto schema = StreamSchema::uniform(d, FeatureKind::Binary, C);
        LeafStats leaf(layout_of(schema), C);
        std::vector<Instance> data;
        const std::size_t n = 1 + rng.uniform_int(300);
        for (std::size_t i = 0; i < n; ++i) {
            Instance inst;
            inst.label = rng.uniform_int(C);
            for (std::size_t j = 0; j < d; ++j) inst.features.push_back(rng.bernoulli(0.3 + 0.1 * inst.label) ? 1.0 : 0.0);
            leaf.update(inst.features, inst.label);
            data.push_back(inst);
        }
        for (int q = 0; q < 5; ++q) {
            std::vector<double> x;
            for (std::size_t j = 0; j < d; ++j) x.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
            const auto got = leaf.predict_proba(x);
            const auto want = batch_naive_bayes(data, C, x);
            for (std::size_t c = 0; c < C; ++c) CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-9));
        }
    }
}

TEST_CASE("leaf prediction edge cases") {
    const auto schema = StreamSchema::uniform(3, FeatureKind::Numeric, 4);
    LeafStats empty(layout_of(schema), 4);
    for (double p : empty.predict_proba(std::vector<double>{0.1, 0.2, 0.3})) CHECK(p == doctest::Approx(0.25));

    LeafStats only3(layout_of(schema), 4);
    for (int i = 0; i < 20; ++i) only3.update(std::vector<double>{0.1 * i, 1.0, -1.0}, 3);
    const auto p = only3.predict_proba(std::vector<double>{0.5, 1.0, -1.0});
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 3);
}

TEST_CASE("Gaussian estimator matches batch moments") {
    GaussianEstimator g;
    Rng rng(4);
    std::vector<double> xs;
    for (int i = 0; i < 5000; ++i) {
        xs.push_back(rng.gaussian() * 2.5 + 100.0);
        g.add(xs.back());
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    CHECK(g.mean() == doctest::Approx(mean).epsilon(1e-6));
    CHECK(g.variance() == doctest::Approx(var).epsilon(1e-6));
    CHECK(g.min() == *std::min_element(xs.begin(), xs.end()));
    CHECK(g.log_density(mean) == doctest::Approx(-0.5 * std::log(2 * M_PI * var)).epsilon(1e-9));
}

TEST_CASE("deterministic concept: the root splits on the informative attribute") {
    const auto schema = StreamSchema::uniform(6, FeatureKind::Binary, 2);
    HoeffdingTree tree(schema);
    Rng rng(12);
    bool split = false;
    for (int i = 0; i < 100000 && !split; ++i) {
        std::vector<double> x(6);
        for (auto& v : x) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        tree.train(x, static_cast<std::size_t>(x[0]));
        split = tree.root_split_attribute().has_value();
    }
    REQUIRE(split);
    CHECK(*tree.root_split_attribute() == 0);
    for (double v : {0.0, 1.0}) {
        std::vector<double> x{v, 1, 0, 1, 0, 1};
        CHECK(tree.predict(x) == static_cast<std::size_t>(v));
    }
}

TEST_CASE("a single tree learns noise-free SEA") {
    SeaGenerator gen(SeaConcept{8.0, 0.0, true}, Rng(6));
    HoeffdingTree tree(gen.schema());
    for (int i = 0; i < 5000; ++i) {
        const auto inst = gen.generate();
        tree.train(inst.features, inst.label);
    }
    int correct = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto inst = gen.generate();
        correct += tree.predict(inst.features) == inst.label;
    }
    CHECK(correct >= 950);
}

TEST_CASE("tree invariants on a drifting LED stream") {
    auto stream = make_benchmark_stream("led_g", 3, {60000});
    HoeffdingTree tree(stream->schema());
    std::vector<Instance> seen;
    while (auto inst = stream->next()) {
        tree.train(inst->features, inst->label);
        if (seen.size() < 5000) seen.push_back(*inst);
    }
    REQUIRE(tree.num_splits() > 0);

    SUBCASE("class mass is conserved across leaves") {
        double total = 0.0;
        tree.for_each_leaf([&](const LeafStats& leaf) {
            double sum = 0.0;
            for (double c : leaf.class_counts()) sum += c;
            CHECK(sum == doctest::Approx(leaf.total_weight()));
            total += leaf.total_weight();
        });
        CHECK(total == doctest::Approx(60000.0).epsilon(1e-9));
        CHECK(tree.instances_seen() == 60000);
    }
    SUBCASE("the root test partitions instances between disjoint leaf sets") {
        const auto a = *tree.root_split_attribute();
        std::set<const LeafStats*> left, right;
        for (const auto& inst : seen) {
            (inst.features[a] <= 0.5 ? left : right).insert(&tree.leaf_for(inst.features));
        }
        for (const auto* leaf : left) CHECK(right.count(leaf) == 0);
    }
    SUBCASE("predictions are normalised") {
        Rng rng(5);
        for (int i = 0; i < 10000; ++i) {
            std::vector<double> x(24);
            for (auto& v : x) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
            const auto p = tree.predict_proba(x);
            double s = 0.0;
            for (double v : p) s += v;
            REQUIRE(s == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("save and load reproduce the tree") {
        std::stringstream buf;
        tree.save(buf);
        const auto copy = HoeffdingTree::load(buf);
        CHECK(copy.num_nodes() == tree.num_nodes());
        for (const auto& inst : seen) REQUIRE(copy.predict_proba(inst.features) == tree.predict_proba(inst.features));
    }
    SUBCASE("dump has one line per node") {
        std::ostringstream out;
        tree.dump(out);
        const auto text = out.str();
        CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == tree.num_nodes());
    }
}

TEST_CASE("training is deterministic") {
    auto s1 = make_benchmark_stream("rbf_f", 9, {20000});
    auto s2 = make_benchmark_stream("rbf_f", 9, {20000});
    HoeffdingTree a(s1->schema()), b(s2->schema());
    while (auto x = s1->next()) {
        const auto y = s2->next();
        a.train(x->features, x->label);
        b.train(y->features, y->label);
    }
    CHECK(a.num_nodes() == b.num_nodes());
    std::ostringstream da, db;
    a.dump(da);
    b.dump(db);
    CHECK(da.str() == db.str());
}

TEST_CASE("binary task trees") {
    const auto schema = StreamSchema::uniform(2, FeatureKind::Numeric, 3);
    auto fresh = make_binary_task_tree(schema, 1);
    CHECK(fresh.positive_probability(std::vector<double>{0.0, 0.0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(make_binary_task_tree(schema, 3), ConfigError);

    auto positives = make_binary_task_tree(schema, 2);
    for (int i = 0; i < 100; ++i) positives.train(std::vector<double>{0.01 * i, 1.0}, 2);
    CHECK(positives.positive_probability(std::vector<double>{0.5, 1.0}) > 0.95);

    // The task tree sees exactly the indicator labels 1[y == target].
    auto task = make_binary_task_tree(schema, 1);
    HoeffdingTree reference(StreamSchema::uniform(2, FeatureKind::Numeric, 2));
    Rng rng(4);
    for (int i = 0; i < 3000; ++i) {
        const std::size_t y = rng.uniform_int(3);
        const std::vector<double> x{y + rng.gaussian(), rng.uniform()};
        task.train(x, y);
        reference.train(x, y == 1 ? 1 : 0);
    }
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> x{3.0 * rng.uniform() - 0.5, rng.uniform()};
        CHECK(task.positive_probability(x) == reference.predict_proba(x)[1]);
    }
    std::stringstream buf;
    task.save(buf);
    const auto copy = BinaryTaskTree::load(buf);
    CHECK(copy.target() == 1);
    CHECK(copy.positive_probability(std::vector<double>{0.7, 0.2}) ==
          task.positive_probability(std::vector<double>{0.7, 0.2}));
}

TEST_CASE("config validation") {
    HoeffdingTreeConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.split_confidence = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.grace_period = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
