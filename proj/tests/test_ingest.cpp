#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "driftmoe/generators.hpp"
#include "driftmoe/ingest.hpp"

using namespace driftmoe;

namespace {

DatasetManifest csv_manifest(std::string label = {}) {
    DatasetManifest m;
    m.format = DatasetFormat::Csv;
    m.label_column = std::move(label);
    return m;
}

DatasetManifest arff_manifest() {
    DatasetManifest m;
    m.format = DatasetFormat::Arff;
    return m;
}

}  // namespace

TEST_CASE("three-row CSV with a two-valued nominal column") {
    std::istringstream in("colour,size,label\nred,1.5,yes\nblue,2.5,no\nred,3.5,yes\n");
    const auto d = parse_csv(in, csv_manifest());
    REQUIRE(d.instances->size() == 3);
    CHECK(d.schema.num_features == 2);
    CHECK(d.schema.num_classes == 2);
    CHECK(d.feature_names == std::vector<std::string>{"colour", "size"});
    std::set<double> colour;
    for (const auto& inst : *d.instances) colour.insert(inst.features[0]);
    CHECK(colour == std::set<double>{0.0, 1.0});
    CHECK((*d.instances)[0].features[0] == (*d.instances)[2].features[0]);
    CHECK((*d.instances)[0].label == (*d.instances)[2].label);
    CHECK((*d.instances)[0].label != (*d.instances)[1].label);
    CHECK((*d.instances)[1].features[1] == 2.5);
}

TEST_CASE("CSV label column chosen by name and numeric labels mapped contiguously") {
    std::istringstream in("y,a,b\n10,0.5,1\n30,0.25,2\n20,0.75,3\n");
    const auto d = parse_csv(in, csv_manifest("y"));
    CHECK(d.schema.num_classes == 3);
    CHECK(d.schema.num_features == 2);
    // Sorted numeric labels: 10 -> 0, 20 -> 1, 30 -> 2.
    CHECK((*d.instances)[0].label == 0);
    CHECK((*d.instances)[1].label == 2);
    CHECK((*d.instances)[2].label == 1);
    CHECK((*d.instances)[1].features == std::vector<double>{0.25, 2.0});
}

TEST_CASE("CSV quoted fields") {
    std::istringstream in("name,x,label\n\"a,b\",1,0\n\"c\"\"d\",2,1\n");
    const auto d = parse_csv(in, csv_manifest());
    CHECK(d.instances->size() == 2);
}

TEST_CASE("malformed CSV rows report their line number") {
    std::istringstream in("a,b,label\n1,2,0\n3,0\n");
    try {
        parse_csv(in, csv_manifest());
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::istringstream missing("a,label\n1,0\n");
    CHECK_THROWS_AS(parse_csv(missing, csv_manifest("nope")), ConfigError);
}

TEST_CASE("ARFF subset") {
    std::istringstream in(
        "% Electricity-like toy\n"
        "@relation toy\n"
        "\n"
        "@attribute day {mon,tue,wed}\n"
        "@attribute price numeric\n"
        "@attribute 'class' {UP,DOWN}\n"
        "@data\n"
        "mon,0.1,UP\n"
        "% a comment inside data\n"
        "wed,0.3,DOWN\n"
        "tue,0.2,UP\n");
    const auto d = parse_arff(in, arff_manifest());
    REQUIRE(d.instances->size() == 3);
    CHECK(d.schema.num_features == 2);
    CHECK(d.schema.num_classes == 2);
    CHECK(d.schema.class_names == std::vector<std::string>{"UP", "DOWN"});
    // Declared order defines the index encoding.
    CHECK((*d.instances)[0].features[0] == 0.0);
    CHECK((*d.instances)[1].features[0] == 2.0);
    CHECK((*d.instances)[2].features[0] == 1.0);
    CHECK((*d.instances)[1].label == 1);
}

TEST_CASE("ARFF value outside the declared nominal set is an encoding error") {
    std::istringstream in("@relation t\n@attribute a {x,y}\n@attribute c {p,q}\n@data\nx,p\nz,q\n");
    CHECK_THROWS_AS(parse_arff(in, arff_manifest()), EncodingError);
}

TEST_CASE("ARFF arity errors carry the line number") {
    std::istringstream in("@relation t\n@attribute a numeric\n@attribute c {p,q}\n@data\n1,p\n2\n");
    try {
        parse_arff(in, arff_manifest());
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 6);
    }
}

TEST_CASE("one-hot nominal encoding widens the feature vector") {
    std::istringstream in("@relation t\n@attribute a {x,y,z}\n@attribute b numeric\n@attribute c {p,q}\n@data\ny,4,p\n");
    auto m = arff_manifest();
    m.nominal_encoding = NominalEncoding::OneHot;
    const auto d = parse_arff(in, m);
    CHECK(d.schema.num_features == 4);
    CHECK((*d.instances)[0].features == std::vector<double>{0.0, 1.0, 0.0, 4.0});
    CHECK(d.schema.feature_kinds[0] == FeatureKind::Binary);
}

TEST_CASE("loading a dumped stream reproduces its rows") {
    const auto path = std::filesystem::temp_directory_path() / "driftmoe_roundtrip.csv";
    {
        auto src = make_benchmark_stream("rbf_m", 4);
        std::ofstream out(path);
        write_stream_csv(*src, out, 500);
    }
    const auto d = load_dataset(DatasetManifest::for_path(path.string()));
    auto src = make_benchmark_stream("rbf_m", 4);
    const auto original = take(*src, 500);
    REQUIRE(d.instances->size() == 500);
    CHECK(d.schema.num_features == 10);
    for (std::size_t i = 0; i < 500; ++i) {
        REQUIRE((*d.instances)[i].features == original[i].features);
        // Numeric labels are sorted, so label k maps to k when every class occurs.
        REQUIRE((*d.instances)[i].label == original[i].label);
    }
    std::filesystem::remove(path);
}

TEST_CASE("missing dataset file is a configuration error") {
    CHECK_THROWS_AS(load_dataset(DatasetManifest::for_path("/nonexistent/file.arff")), ConfigError);
    CHECK(DatasetManifest::for_path("x.arff").format == DatasetFormat::Arff);
    CHECK(DatasetManifest::for_path("x.csv").format == DatasetFormat::Csv);
}

TEST_CASE("standardizer cold start passes the first instance through") {
    RunningStandardizer s(2);
    const std::vector<double> x{3.0, -4.0};
    CHECK(s.standardize(x) == x);
    CHECK(s.count() == 1);
}

TEST_CASE("constant feature standardises to zero") {
    RunningStandardizer s(1);
    s.standardize(std::vector<double>{5.0});
    for (int i = 0; i < 1000; ++i) CHECK(s.standardize(std::vector<double>{5.0})[0] == 0.0);
}

TEST_CASE("standardised value uses the statistics of the prefix") {
    RunningStandardizer s(1);
    const int n = 200;
    double last = 0.0;
    for (int i = 1; i <= n; ++i) last = s.standardize(std::vector<double>{static_cast<double>(i)})[0];
    // Batch z-score of n against the prefix 1..n-1 (population variance).
    double mean = 0.0;
    for (int i = 1; i < n; ++i) mean += i;
    mean /= (n - 1);
    double var = 0.0;
    for (int i = 1; i < n; ++i) var += (i - mean) * (i - mean);
    var /= (n - 1);
    CHECK(last == doctest::Approx((n - mean) / std::sqrt(var)).epsilon(1e-9));
}

TEST_CASE("streaming moments equal two-pass batch moments") {
    Rng rng(99);
    RunningStandardizer s(3);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 100000; ++i) {
        std::vector<double> x{rng.uniform() * 100.0, rng.gaussian() * 3.0 + 1e4, rng.uniform() - 0.5};
        s.update(x);
        data.push_back(x);
    }
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (const auto& x : data) mean += x[j];
        mean /= static_cast<double>(data.size());
        double var = 0.0;
        for (const auto& x : data) var += (x[j] - mean) * (x[j] - mean);
        var /= static_cast<double>(data.size());
        CHECK(s.mean(j) == doctest::Approx(mean).epsilon(1e-9));
        CHECK(s.variance(j) == doctest::Approx(var).epsilon(1e-9));
    }
}

TEST_CASE("standardizer save/load round trip") {
    RunningStandardizer s(2);
    s.update(std::vector<double>{1.0, 2.0});
    s.update(std::vector<double>{3.0, 7.0});
    std::stringstream buf;
    s.save(buf);
    const auto t = RunningStandardizer::load(buf);
    std::vector<double> a(2), b(2);
    s.transform(std::vector<double>{2.0, 2.0}, a);
    t.transform(std::vector<double>{2.0, 2.0}, b);
    CHECK(a == b);
    CHECK(t.count() == 2);
}
