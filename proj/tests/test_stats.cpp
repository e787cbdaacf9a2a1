#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "ordinal/rng.hpp"
#include "ordinal/stats.hpp"

using namespace ordinal;

TEST_CASE("sigmoid, logit and the stable difference") {
    CHECK(sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sigmoid(500.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sigmoid(-500.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(sigmoid(2.0) + sigmoid(-2.0) == doctest::Approx(1.0).epsilon(1e-15));

    for (double p : {0.01, 0.2, 0.5, 0.73, 0.999})
        CHECK(sigmoid(logit(p)) == doctest::Approx(p).epsilon(1e-12));

    // sigmoid_diff(a, b) = sigmoid(b) - sigmoid(a), stable in the tails
    CHECK(sigmoid_diff(-1.0, 2.0) ==
          doctest::Approx(sigmoid(2.0) - sigmoid(-1.0)).epsilon(1e-14));
    double tail = sigmoid_diff(30.0, 31.0);
    CHECK(tail > 0.0); // naive subtraction nearly cancels here
    CHECK(tail == doctest::Approx(std::exp(-30.0) - std::exp(-31.0)).epsilon(1e-6));
    // far tail: both sigmoids round to 1.0, naive difference is exactly 0
    CHECK(sigmoid(38.0) - sigmoid(37.5) == 0.0);
    CHECK(sigmoid_diff(37.5, 38.0) > 0.0);
}

TEST_CASE("normal cdf against tabulated values") {
    // classic table values, 1e-7 accuracy
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-9));
    CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-9));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-9));
    CHECK(normal_cdf(3.0) == doctest::Approx(0.9986501019683699).epsilon(1e-9));
}

TEST_CASE("normal quantile inverts the cdf") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-8));
    CHECK(normal_quantile(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-8));
    for (double p : {0.001, 0.025, 0.2, 0.5, 0.77, 0.975, 0.999})
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
}

TEST_CASE("chi-square survival function against known identities") {
    // k = 2: sf(x) = exp(-x/2)
    for (double x : {0.1, 1.0, 3.84, 10.0})
        CHECK(chi_square_sf(x, 2.0) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-9));
    // k = 1: sf(x) = 2 (1 - Phi(sqrt(x)))
    for (double x : {0.5, 1.0, 3.841458820694124})
        CHECK(chi_square_sf(x, 1.0) ==
              doctest::Approx(2.0 * (1.0 - normal_cdf(std::sqrt(x)))).epsilon(1e-8));
    // the 95th percentile of chi2(1)
    CHECK(chi_square_sf(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-7));
    // k = 4: sf(x) = exp(-x/2) (1 + x/2)
    for (double x : {1.0, 5.0, 9.487729036781154})
        CHECK(chi_square_sf(x, 4.0) ==
              doctest::Approx(std::exp(-x / 2.0) * (1.0 + x / 2.0)).epsilon(1e-9));
    CHECK(chi_square_sf(0.0, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("type-7 quantile matches hand interpolation") {
    std::vector<double> v{10, 20, 30, 40};
    CHECK(quantile(v, 0.0) == doctest::Approx(10.0));
    CHECK(quantile(v, 1.0) == doctest::Approx(40.0));
    CHECK(quantile(v, 0.5) == doctest::Approx(25.0)); // h = 2.5
    CHECK(quantile(v, 0.25) == doctest::Approx(17.5));
    // order must not matter
    std::vector<double> shuffled{40, 10, 30, 20};
    CHECK(quantile(shuffled, 0.5) == doctest::Approx(25.0));
    // single element
    CHECK(quantile(std::vector<double>{7.0}, 0.3) == doctest::Approx(7.0));
}

TEST_CASE("mean and sample variance") {
    std::vector<double> v{1, 2, 3, 4, 5};
    CHECK(mean(v) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(sample_variance(v) == doctest::Approx(2.5).epsilon(1e-12)); // n-1 denominator
    CHECK(sample_variance(std::vector<double>{42.0}) == doctest::Approx(0.0));
}

TEST_CASE("rng streams are deterministic and tag-separated") {
    Rng a(123), b(123), c(124);
    for (int i = 0; i < 10; ++i) {
        double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK(a.uniform() != c.uniform());

    CHECK(derive_seed(1, "train", 2, 3) == derive_seed(1, "train", 2, 3));
    CHECK(derive_seed(1, "train", 2, 3) != derive_seed(1, "train", 3, 2));
    CHECK(derive_seed(1, "train") != derive_seed(1, "pmm"));
    CHECK(derive_seed(1, "x") != derive_seed(2, "x"));

    // below() covers the whole range without modulo bias artifacts at tiny n
    Rng d(7);
    std::array<int, 3> counts{};
    for (int i = 0; i < 3000; ++i) ++counts[d.index(3)];
    for (int k = 0; k < 3; ++k) CHECK(counts[k] > 800); // ~1000 each

    // normal() has roughly standard moments
    Rng e(11);
    double s = 0.0, s2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double z = e.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(s / n == doctest::Approx(0.0).scale(1.0).epsilon(0.03));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}
