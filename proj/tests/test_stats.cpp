// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "autoprune/stats.hpp"
#include "testutil.hpp"

using namespace autoprune;
using namespace autoprune::stats;

namespace {

/// Naive three-pass oracle: mean pass, m2 pass, standardized third-moment
/// pass. Kept deliberately separate from the library's fused loop.
double skewness_oracle(const std::vector<double>& values) {
    const double n = double(values.size());
    double mean = 0.0;
    for (double v : values) mean += std::abs(v);
    mean /= n;
    double m2 = 0.0;
    for (double v : values) m2 += (std::abs(v) - mean) * (std::abs(v) - mean);
    m2 /= n;
    if (m2 < 1e-24) return 0.0;
    const double sd = std::sqrt(m2);
    double acc = 0.0;
    for (double v : values) {
        const double z = (std::abs(v) - mean) / sd;
        acc += z * z * z;
    }
    return acc / n;
}

} // namespace

TEST_CASE("magnitude skewness hand cases") {
    // Symmetric magnitudes {1,2,3}: third central moments cancel exactly.
    CHECK(magnitude_skewness(std::vector<double>{1.0, -2.0, 3.0}) == 0.0);
    // {0,0,0,4}: computed with the three-pass oracle and frozen.
    CHECK(magnitude_skewness(std::vector<double>{0.0, 0.0, 0.0, 4.0}) ==
          doctest::Approx(1.1547005383792517).epsilon(1e-12));
    CHECK(skewness_oracle({0.0, 0.0, 0.0, 4.0}) == doctest::Approx(1.1547005383792517));
    // Constant magnitudes: m2 = 0 degenerate rule.
    CHECK(magnitude_skewness(std::vector<double>{5.0, -5.0, 5.0, -5.0}) == 0.0);
    CHECK_THROWS_AS(magnitude_skewness(std::vector<double>{}), Error);
}

TEST_CASE("skewness matches the three-pass oracle on random vectors") {
    testutil::Rng rng(1234);
    for (int iter = 0; iter < 60; ++iter) {
        const std::size_t len = 10 + rng.below(5000);
        std::vector<double> values(len);
        const bool lognorm = rng.uniform() < 0.5;
        for (double& v : values)
            v = lognorm ? rng.lognormal(0.0, 1.0 + rng.uniform()) : rng.normal();
        const double got = magnitude_skewness(values);
        CHECK(std::abs(got - skewness_oracle(values)) < 1e-9);
    }
}

TEST_CASE("skewness is scale invariant") {
    testutil::Rng rng(99);
    std::vector<double> values(512);
    for (double& v : values) v = rng.normal();
    const double base = magnitude_skewness(values);
    for (double c : {2.0, -3.0, 1e-3, 1e6}) {
        std::vector<double> scaled = values;
        for (double& v : scaled) v *= c;
        CHECK(std::abs(magnitude_skewness(scaled) - base) < 1e-9);
    }
}

TEST_CASE("normalize_skewness maps into [-1,1] and centers") {
    SUBCASE("{0,1,2} -> {-1,0,1} up to eps shrinkage") {
        const auto out = normalize_skewness({0.0, 1.0, 2.0});
        CHECK(out[0] == doctest::Approx(-1.0).epsilon(1e-7));
        CHECK(out[1] == doctest::Approx(0.0));
        CHECK(out[2] == doctest::Approx(1.0).epsilon(1e-7));
    }
    SUBCASE("single layer maps to 0") {
        const auto out = normalize_skewness({3.7});
        CHECK(out == std::vector<double>{0.0});
    }
    SUBCASE("all at the mean map to 0") {
        const auto out = normalize_skewness({3.0, 3.0, 3.0});
        CHECK(out == std::vector<double>{0.0, 0.0, 0.0});
    }
    SUBCASE("range bound and zero mean on random inputs") {
        testutil::Rng rng(5);
        for (int iter = 0; iter < 50; ++iter) {
            std::vector<double> gammas(2 + rng.below(30));
            for (double& g : gammas) g = rng.uniform(-10.0, 10.0);
            const auto out = normalize_skewness(gammas);
            double mean = 0.0;
            for (double v : out) {
                CHECK(v >= -1.0);
                CHECK(v <= 1.0);
                mean += v;
            }
            CHECK(std::abs(mean / double(out.size())) < 1e-12);
        }
    }
}

TEST_CASE("skewness_report granularities") {
    testutil::Rng rng(17);
    // Plant heavy-tailed weights in block 0, Gaussian in block 1.
    const ModelBundle bundle =
        testutil::random_bundle(rng, testutil::tiny_topology(), {0, 1, 2, 3, 4, 5}, 1.6, 1.0);

    const SkewnessReport per_layer = skewness_report(bundle, Granularity::per_layer);
    CHECK(per_layer.per_layer.size() == 12);
    const SkewnessReport per_block = skewness_report(bundle, Granularity::per_block);
    CHECK(per_block.per_layer.size() == 2);
    CHECK(per_block.per_layer[0].layer == "block0");

    // Heavy-tailed block has higher raw skewness.
    CHECK(per_block.per_layer[0].gamma > per_block.per_layer[1].gamma);

    // Oracle: per-block gamma equals magnitude_skewness over the pooled values.
    std::vector<double> pooled;
    for (int k = 0; k < kLayerKindsPerBlock; ++k) {
        const auto& w = bundle.layer(0, LayerKind(k)).weight.values();
        pooled.insert(pooled.end(), w.begin(), w.end());
    }
    CHECK(per_block.per_layer[0].gamma == doctest::Approx(skewness_oracle(pooled)).epsilon(1e-12));

    // mean_gamma is the arithmetic mean of the entries.
    double mean = 0.0;
    for (const auto& e : per_layer.per_layer) mean += e.gamma;
    mean /= double(per_layer.per_layer.size());
    CHECK(std::abs(per_layer.mean_gamma - mean) < 1e-12);
    for (const auto& e : per_layer.per_layer) {
        CHECK(e.gamma_tilde >= -1.0);
        CHECK(e.gamma_tilde <= 1.0);
    }
}

TEST_CASE("activation statistics") {
    SUBCASE("identity 2x2") {
        const Matrix x(2, 2, {1.0, 0.0, 0.0, 1.0});
        const auto st = compute_layer_stats(x, {});
        CHECK(st.col_l1 == std::vector<double>{1.0, 1.0});
        CHECK(st.col_l2 == std::vector<double>{1.0, 1.0});
    }
    SUBCASE("column sums of [[1,2],[3,4]]") {
        const Matrix x(2, 2, {1.0, 2.0, 3.0, 4.0});
        const auto st = compute_layer_stats(x, {});
        CHECK(st.col_l1 == std::vector<double>{4.0, 6.0});
        CHECK(st.col_l2sq == std::vector<double>{10.0, 20.0});
    }
    SUBCASE("col_l2sq consistency on random data") {
        testutil::Rng rng(31);
        const Matrix x = testutil::random_matrix(rng, 40, 16, 2.0);
        const auto st = compute_layer_stats(x, {});
        for (std::size_t j = 0; j < 16; ++j) {
            CHECK(st.col_l2[j] >= 0.0);
            CHECK(st.col_l2sq[j] ==
                  doctest::Approx(st.col_l2[j] * st.col_l2[j]).epsilon(1e-9));
        }
    }
    SUBCASE("zero matrix with lambda=0 is a singular Gram") {
        const Matrix x(3, 2, std::vector<double>(6, 0.0));
        ActivationStatsOptions opts;
        opts.lambda = 0.0;
        opts.with_hess_diag = true;
        CHECK_THROWS_AS(compute_layer_stats(x, opts), Error);
        try {
            compute_layer_stats(x, opts);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::singular_gram);
        }
    }
    SUBCASE("hess_diag matches a Gauss-Jordan oracle") {
        testutil::Rng rng(77);
        const std::size_t n = 12, d = 5;
        const Matrix x = testutil::random_matrix(rng, n, d, 1.0);
        const double lambda = 0.37;
        ActivationStatsOptions opts;
        opts.lambda = lambda;
        opts.with_hess_diag = true;
        const auto st = compute_layer_stats(x, opts);
        REQUIRE(st.hess_diag.has_value());

        // Oracle: dense Gauss-Jordan inverse of (X^T X + lambda I).
        std::vector<std::vector<double>> a(d, std::vector<double>(2 * d, 0.0));
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t t = 0; t < n; ++t) a[i][j] += x(t, i) * x(t, j);
            a[i][i] += lambda;
            a[i][d + i] = 1.0;
        }
        for (std::size_t col = 0; col < d; ++col) {
            std::size_t pivot = col;
            for (std::size_t r = col + 1; r < d; ++r)
                if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
            std::swap(a[col], a[pivot]);
            const double p = a[col][col];
            for (double& v : a[col]) v /= p;
            for (std::size_t r = 0; r < d; ++r) {
                if (r == col) continue;
                const double f = a[r][col];
                for (std::size_t cc = 0; cc < 2 * d; ++cc) a[r][cc] -= f * a[col][cc];
            }
        }
        for (std::size_t j = 0; j < d; ++j)
            CHECK((*st.hess_diag)[j] == doctest::Approx(a[j][d + j]).epsilon(1e-9));
    }
}

TEST_CASE("skewness report serializes to CSV with the declared columns") {
    testutil::Rng rng(8);
    const ModelBundle bundle = testutil::random_bundle(rng, testutil::tiny_topology());
    const auto report = skewness_report(bundle, Granularity::per_layer);
    const std::string csv = report.to_csv();
    CHECK(csv.rfind("layer,gamma,gamma_tilde\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 13); // header + 12 layers
}
