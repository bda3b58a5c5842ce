#include "catch_amalgamated.hpp"

#include "ccref/metrics.hpp"
#include "ccref/stats.hpp"
#include "oracles.hpp"

using namespace ccref;
using Catch::Matchers::WithinAbs;

TEST_CASE("weighted_f1 hand-computed values") {
    std::vector<std::string> perfect{"C", "P", "C"};
    CHECK_THAT(weighted_f1(perfect, perfect), WithinAbs(1.0, 1e-12));

    std::vector<std::string> y_true{"C", "C", "P"};
    std::vector<std::string> y_pred{"C", "P", "P"};
    CHECK_THAT(weighted_f1(y_true, y_pred), WithinAbs(2.0 / 3.0, 1e-12));
}

TEST_CASE("a class never predicted contributes zero") {
    std::vector<std::string> y_true{"a", "a", "b", "b"};
    std::vector<std::string> y_pred{"a", "a", "a", "a"};
    // class b: precision 0, recall 0 -> F1 0; class a: p=0.5, r=1 -> 2/3
    CHECK_THAT(weighted_f1(y_true, y_pred), WithinAbs(0.5 * (2.0 / 3.0), 1e-12));
}

TEST_CASE("weighted F1 equals macro F1 on balanced binary data") {
    std::vector<std::string> y_true{"a", "a", "b", "b"};
    std::vector<std::string> y_pred{"a", "b", "b", "b"};
    auto pc = per_class_metrics(confusion_matrix(y_true, y_pred));
    double macro = (pc.at("a").f1 + pc.at("b").f1) / 2.0;
    CHECK_THAT(weighted_f1(y_true, y_pred), WithinAbs(macro, 1e-12));
}

TEST_CASE("weighted_f1 input validation") {
    std::vector<std::string> a{"x"}, b{"x", "y"};
    CHECK_THROWS_AS(weighted_f1(a, b), DataError);
    CHECK_THROWS_AS(weighted_f1(std::vector<std::string>{}, std::vector<std::string>{}),
                    DataError);
}

TEST_CASE("confusion matrix row sums equal class supports") {
    std::vector<std::string> y_true{"a", "b", "b", "c", "c", "c"};
    std::vector<std::string> y_pred{"b", "b", "c", "c", "a", "c"};
    ConfusionMatrix m = confusion_matrix(y_true, y_pred);
    auto pc = per_class_metrics(m);
    for (size_t c = 0; c < m.classes.size(); ++c) {
        size_t row_sum = 0;
        for (size_t o = 0; o < m.classes.size(); ++o) row_sum += m.counts[c][o];
        CHECK(row_sum == pc.at(m.classes[c]).support);
    }
}

TEST_CASE("roc_curve extremes") {
    std::vector<int> y{1, 1, 0, 0};
    RocCurve separating = roc_curve(y, {0.9, 0.8, 0.2, 0.1});
    CHECK_THAT(separating.area, WithinAbs(1.0, 1e-12));

    RocCurve ties = roc_curve(y, {0.5, 0.5, 0.5, 0.5});
    CHECK_THAT(ties.area, WithinAbs(0.5, 1e-12));
    CHECK(ties.points.size() == 2);  // single grouped step

    CHECK_THROWS_AS(roc_curve({1, 1}, {0.5, 0.4}), DataError);
}

TEST_CASE("roc points are monotone in fpr and end at (1,1)") {
    SplitMix64 rng(5);
    std::vector<int> y;
    std::vector<double> s;
    for (int i = 0; i < 60; ++i) {
        y.push_back(rng.below(2) ? 1 : 0);
        s.push_back(static_cast<double>(rng.below(10)) / 10.0);
    }
    y[0] = 1;
    y[1] = 0;
    RocCurve c = roc_curve(y, s);
    for (size_t i = 1; i < c.points.size(); ++i) {
        CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
        CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
    }
    CHECK_THAT(c.points.back().fpr, WithinAbs(1.0, 1e-12));
    CHECK_THAT(c.points.back().tpr, WithinAbs(1.0, 1e-12));
}

TEST_CASE("roc area matches the pairwise oracle on random instances") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        SplitMix64 rng(seed);
        size_t n = 30 + rng.below(100);
        std::vector<int> y;
        std::vector<double> s;
        for (size_t i = 0; i < n; ++i) {
            y.push_back(rng.below(2) ? 1 : 0);
            s.push_back(static_cast<double>(rng.below(20)) / 19.0);  // deliberate ties
        }
        y[0] = 1;
        y[1] = 0;
        double lib = roc_curve(y, s).area;
        double orc = oracle::pairwise_auc(y, s);
        REQUIRE_THAT(lib, WithinAbs(orc, 1e-9));
    }
}

TEST_CASE("average ranks with ties") {
    auto r = average_ranks({10.0, 20.0, 20.0, 5.0});
    CHECK(r == std::vector<double>{2.0, 3.5, 3.5, 1.0});
}

TEST_CASE("spearman on monotone data") {
    auto up = spearman({1, 2, 3}, {10, 20, 30});
    CHECK_THAT(up.rho, WithinAbs(1.0, 1e-12));
    auto down = spearman({1, 2, 3}, {30, 20, 10});
    CHECK_THAT(down.rho, WithinAbs(-1.0, 1e-12));
}

TEST_CASE("spearman tie handling matches the direct-rank oracle") {
    std::vector<double> x{1, 2, 2, 4}, y{1, 3, 2, 4};
    auto res = spearman(x, y);
    CHECK_THAT(res.rho, WithinAbs(oracle::spearman_rho(x, y), 1e-12));
    CHECK_THAT(res.rho, WithinAbs(0.9486832980505139, 1e-12));  // scipy reference

    SplitMix64 rng(321);
    for (int trial = 0; trial < 30; ++trial) {
        size_t n = 4 + rng.below(25);
        std::vector<double> a, b;
        for (size_t i = 0; i < n; ++i) {
            a.push_back(static_cast<double>(rng.below(6)));
            b.push_back(static_cast<double>(rng.below(6)));
        }
        a[0] = 100;  // break constant inputs
        b[0] = 100;
        REQUIRE_THAT(spearman(a, b).rho, WithinAbs(oracle::spearman_rho(a, b), 1e-12));
    }
}

TEST_CASE("spearman errors") {
    CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), DataError);  // constant input
    CHECK_THROWS_AS(spearman({1, 2}, {1, 2}), DataError);        // too short
    CHECK_THROWS_AS(spearman({1, 2, 3}, {1, 2}), DataError);     // length mismatch
}

TEST_CASE("student t cdf against frozen references") {
    CHECK_THAT(student_t_cdf(1.3, 5), WithinAbs(0.874849682914661, 1e-12));
    CHECK_THAT(student_t_cdf(-2.1, 33), WithinAbs(0.021727309805133, 1e-12));
    CHECK_THAT(student_t_cdf(0.0, 10), WithinAbs(0.5, 1e-12));
    CHECK_THAT(student_t_cdf(2.5, 48), WithinAbs(0.992055154532881, 1e-12));
}

TEST_CASE("spearman t-approximation matches the scipy reference on n=40") {
    std::vector<double> x{18, 12, 13, 17, 11, 15, 16, 4,  1,  6,  5,  17, 18, 0,  9,  16,
                          2,  15, 2,  9,  16, 6,  6,  5,  14, 5,  19, 8,  9,  10, 11, 11,
                          10, 19, 16, 15, 14, 12, 6,  19};
    std::vector<double> y{5.3, 6.5,  4.0, 11.0, 7.1,  8.4,  2.0, 0.8, 0.5,  3.9,
                          -1.6, 8.8, 7.9, -2.4, 8.6,  7.2,  1.1, 11.7, -0.6, 5.1,
                          9.9, 3.8,  -0.1, 3.2, 12.5, -1.6, 14.0, 5.2, 3.5,  12.0,
                          8.9, 3.0,  6.2, 13.1, 9.0,  11.0, 8.2, 9.2, 7.9,  9.4};
    auto greater = spearman(x, y, Alternative::Greater);
    CHECK(greater.p_method == "t-approximation");
    CHECK_THAT(greater.rho, WithinAbs(0.748015256027854, 1e-12));
    CHECK_THAT(greater.p_value, WithinAbs(1.447235333743085e-08, 1e-12));
    auto two = spearman(x, y, Alternative::TwoSided);
    CHECK_THAT(two.p_value, WithinAbs(2.894470667486171e-08, 1e-12));
}

TEST_CASE("spearman permutation p-values are exact for tiny samples") {
    // perfectly increasing n=3: only 1 of 6 permutations reaches rho=1
    auto res = spearman({1, 2, 3}, {1, 2, 3}, Alternative::Greater);
    CHECK(res.p_method == "permutation-exhaustive");
    CHECK_THAT(res.p_value, WithinAbs(1.0 / 6.0, 1e-12));

    auto res2 = spearman({1, 2, 3, 4}, {1, 2, 3, 4}, Alternative::Greater);
    CHECK_THAT(res2.p_value, WithinAbs(1.0 / 24.0, 1e-12));
}

TEST_CASE("spearman monte-carlo permutation is seeded and stable") {
    std::vector<double> x, y;
    SplitMix64 rng(17);
    for (int i = 0; i < 15; ++i) {
        x.push_back(static_cast<double>(rng.below(100)));
        y.push_back(static_cast<double>(rng.below(100)));
    }
    auto a = spearman(x, y, Alternative::TwoSided, 42);
    auto b = spearman(x, y, Alternative::TwoSided, 42);
    CHECK(a.p_method == "permutation");
    CHECK(a.p_value == b.p_value);
    CHECK(a.p_value > 0.0);
    CHECK(a.p_value <= 1.0);
}
