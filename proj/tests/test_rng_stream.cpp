#include "doctest.h"

#include <set>
#include <vector>

#include "driftmoe/generators.hpp"
#include "driftmoe/rng.hpp"
#include "driftmoe/stream.hpp"

using namespace driftmoe;

TEST_CASE("splitmix64 matches the published reference output") {
    std::uint64_t state = 0;
    CHECK(splitmix64(state) == 0xE220A8397B1DCDAFULL);
    CHECK(splitmix64(state) == 0x6E789E6AA1B965F4ULL);
}

TEST_CASE("identical seeds give identical draw sequences") {
    Rng a(0), b(0);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("different seeds give different sequences") {
    Rng a(0), b(1);
    int same = 0;
    for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}

TEST_CASE("seed 42 split children replay the frozen golden values") {
    Rng root(42);
    Rng first = root.split();
    Rng second = root.split();
    const std::uint64_t golden_first[] = {0x44d9d84dbccf5bc6ULL, 0xd11fa93f013430a7ULL, 0x41fb60e5eba9404fULL,
                                          0x7c49958ca89a352eULL};
    const std::uint64_t golden_second[] = {0x5fa4589cecc14bd1ULL, 0x95a34e0c10c16892ULL, 0xfd9f7e78ebba6a55ULL,
                                           0xf7893f0b4a7f809dULL};
    for (auto g : golden_first) CHECK(first.next_u64() == g);
    for (auto g : golden_second) CHECK(second.next_u64() == g);

    // The children are independent of each other: advancing one does not
    // change what the other produces.
    Rng root2(42);
    Rng c1 = root2.split();
    Rng c2 = root2.split();
    for (int i = 0; i < 1000; ++i) c1.next_u64();
    Rng root3(42);
    root3.split();
    Rng c2_again = root3.split();
    for (int i = 0; i < 10; ++i) CHECK(c2.next_u64() == c2_again.next_u64());
}

TEST_CASE("seed 42 raw sequence is frozen") {
    Rng r(42);
    CHECK(r.next_u64() == 0x15780b2e0c2ec716ULL);
    CHECK(r.next_u64() == 0x6104d9866d113a7eULL);
    CHECK(r.next_u64() == 0xae17533239e499a1ULL);
    CHECK(r.next_u64() == 0xecb8ad4703b360a1ULL);
}

TEST_CASE("derive is a pure function of seed and stream") {
    CHECK(Rng::derive(7, 3) == Rng::derive(7, 3));
    CHECK_FALSE(Rng::derive(7, 3) == Rng::derive(7, 4));
    CHECK_FALSE(Rng::derive(7, 3) == Rng::derive(8, 3));
}

TEST_CASE("uniform draws lie in [0, 1) and have mean near one half") {
    Rng r(5);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("uniform_int covers its range without bias") {
    Rng r(9);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) ++counts[r.uniform_int(7)];
    // 5 sigma of a binomial(70000, 1/7).
    for (int c : counts) CHECK(std::abs(c - 10000) < 5 * 93);
}

TEST_CASE("gaussian draws have unit variance") {
    Rng r(11);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double g = r.gaussian();
        s += g;
        s2 += g * g;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("schema validation") {
    CHECK_NOTHROW(StreamSchema::uniform(3, FeatureKind::Numeric, 2).validate());
    StreamSchema bad = StreamSchema::uniform(3, FeatureKind::Numeric, 2);
    bad.num_classes = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    StreamSchema mismatched = StreamSchema::uniform(3, FeatureKind::Numeric, 2);
    mismatched.feature_kinds.pop_back();
    CHECK_THROWS_AS(mismatched.validate(), ConfigError);
}

TEST_CASE("conforms checks feature count, label range and binary values") {
    const auto schema = StreamSchema::uniform(2, FeatureKind::Binary, 3);
    CHECK(conforms(Instance{{0.0, 1.0}, 2}, schema));
    CHECK_FALSE(conforms(Instance{{0.0, 1.0}, 3}, schema));
    CHECK_FALSE(conforms(Instance{{0.0}, 0}, schema));
    CHECK_FALSE(conforms(Instance{{0.5, 1.0}, 0}, schema));
}

TEST_CASE("take") {
    auto sea = make_benchmark_stream("sea_a", 1);
    SUBCASE("zero instances") { CHECK(take(*sea, 0).empty()); }
    SUBCASE("ten SEA instances with three features") {
        const auto got = take(*sea, 10);
        REQUIRE(got.size() == 10);
        for (const auto& inst : got) CHECK(inst.features.size() == 3);
        CHECK(sea->position() == 10);
    }
    SUBCASE("exhausted source") {
        VectorStream vs(StreamSchema::uniform(1, FeatureKind::Numeric, 2), std::vector<Instance>{{{1.0}, 0}});
        CHECK(take(vs, 5).size() == 1);
        CHECK(take(vs, 5).empty());
    }
}

TEST_CASE("VectorStream replays shared data from the start for each stream") {
    auto data = std::make_shared<const std::vector<Instance>>(std::vector<Instance>{{{1.0}, 0}, {{2.0}, 1}});
    VectorStream a(StreamSchema::uniform(1, FeatureKind::Numeric, 2), data);
    VectorStream b(StreamSchema::uniform(1, FeatureKind::Numeric, 2), data);
    CHECK(take(a, 2) == take(b, 2));
    CHECK_FALSE(a.next().has_value());
}
