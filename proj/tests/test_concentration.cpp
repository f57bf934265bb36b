#include <doctest.h>

#include <cmath>

#include "rwi/chains.hpp"
#include "rwi/concentration.hpp"

using namespace rwi;
using namespace rwi::conc;

namespace {

double binomial_tail_geq(int n, double p, int k) {  // P[Bin(n,p) >= k]
    double s = 0;
    for (int j = k; j <= n; ++j)
        s += std::exp(std::lgamma(n + 1) - std::lgamma(j + 1) - std::lgamma(n - j + 1) +
                      j * std::log(p) + (n - j) * std::log(1 - p));
    return s;
}

}  // namespace

TEST_CASE("chernov_discrete: worked value, monotonicity, guards") {
    BoundInput in;
    in.horizon = 1000;
    in.gamma_dev = 0.1;
    in.sigma2 = 0.5;
    in.pi_star = 0.1;
    in.mixing_time = 5;
    const BoundValue b = chernov_discrete(in);
    CHECK(b.k == doctest::Approx(11.5507).epsilon(1e-4));
    // floor(1000 / (k 5) - 1) = 16; 4 exp(-16 * 0.01/3)
    CHECK(b.value == doctest::Approx(4.0 * std::exp(-16.0 * 0.01 / 3.0)).epsilon(1e-12));
    CHECK(b.value == doctest::Approx(3.7923).epsilon(1e-4));
    CHECK(b.vacuous);  // well-defined but >= 1

    SUBCASE("non-increasing in n") {
        double prev = 1e300;
        for (double n : {100.0, 1000.0, 10000.0, 100000.0}) {
            in.horizon = n;
            const double v = chernov_discrete(in).value;
            CHECK(v <= prev + 1e-15);
            prev = v;
        }
    }
    SUBCASE("gamma above sigma^2 ^ 1/2 is rejected") {
        in.gamma_dev = 0.6;
        CHECK_THROWS_AS(chernov_discrete(in), GammaOutOfRange);
    }
    SUBCASE("k(gamma) <= 0 flagged through the pi_star guard") {
        in.gamma_dev = 0.5;
        in.pi_star = 20.0;  // out-of-range input makes the log argument >= 1
        CHECK_THROWS_AS(chernov_discrete(in), KNonpositive);
    }
    SUBCASE("zero variance is the inapplicable sentinel") {
        in.sigma2 = 0;
        in.gamma_dev = 0.1;
        CHECK(!chernov_discrete(in).applicable);
    }
}

TEST_CASE("chernov_continuous equals the discrete formula at t = n") {
    BoundInput in;
    in.horizon = 2500;
    in.gamma_dev = 0.15;
    in.sigma2 = 0.4;
    in.pi_star = 0.05;
    in.mixing_time = 3;
    CHECK(chernov_continuous(in).value == chernov_discrete(in).value);
    SUBCASE("below k(gamma) T the bound is vacuous (>= 4)") {
        in.horizon = 1.0;
        const BoundValue b = chernov_continuous(in);
        CHECK(b.value >= 4.0);
        CHECK(b.vacuous);
    }
}

TEST_CASE("chernov_functional: scale invariance, reduction, fixture") {
    const std::vector<double> pi = {0.2, 0.5, 0.3};
    const std::vector<double> h = {1.0, 2.0, 4.0};
    double pih = 0, var = 0;
    for (int i = 0; i < 3; ++i) pih += pi[static_cast<size_t>(i)] * h[static_cast<size_t>(i)];
    for (int i = 0; i < 3; ++i)
        var += pi[static_cast<size_t>(i)] * (h[static_cast<size_t>(i)] - pih) * (h[static_cast<size_t>(i)] - pih);

    const double delta = 0.05, t = 5e6, T = 4;
    const BoundValue b = chernov_functional(h, pi, delta, t, T, var);
    REQUIRE(b.applicable);

    SUBCASE("doubling h with sigma2 scaled by four leaves the bound invariant") {
        std::vector<double> h2 = {2.0, 4.0, 8.0};
        const BoundValue b2 = chernov_functional(h2, pi, delta, t, T, 4 * var);
        CHECK(b2.value == doctest::Approx(b.value).epsilon(1e-12));
        CHECK(b2.k == doctest::Approx(b.k).epsilon(1e-12));
    }
    SUBCASE("reduces to the discrete bound under the rescaling") {
        double hinf = 0, pi_star = 1;
        for (int i = 0; i < 3; ++i) {
            hinf = std::max(hinf, std::abs(h[static_cast<size_t>(i)]));
            pi_star = std::min(pi_star, pi[static_cast<size_t>(i)]);
        }
        BoundInput in;
        in.horizon = t;
        in.gamma_dev = delta * pih / (2 * hinf);
        in.sigma2 = var / (4 * hinf * hinf);
        in.pi_star = pi_star;
        in.mixing_time = T;
        CHECK(chernov_discrete(in).value == doctest::Approx(b.value).epsilon(1e-12));
    }
    SUBCASE("constant h is the inapplicable sentinel") {
        CHECK(!chernov_functional({2, 2, 2}, pi, 0.05, t, T, 0.0).applicable);
    }
    SUBCASE("delta outside the admissible window is rejected") {
        CHECK_THROWS_AS(chernov_functional(h, pi, 0.9, t, T, var), DeltaOutOfRange);
    }
    SUBCASE("fixture regression") {
        CHECK(b.value == doctest::Approx(1.3976795080722479e-11).epsilon(1e-9));
    }
}

TEST_CASE("empirical_tail: degenerate f, refusal, binomial oracle") {
    const slt::DenseKernel iid2 =
        slt::DenseKernel::iid(Eigen::VectorXd::Constant(2, 0.5), Eigen::VectorXd::Ones(2));
    SUBCASE("f = 0 never exceeds a positive level") {
        const TailEstimate te = empirical_tail(iid2, {0.0, 0.0}, 100, 0.1, 500, 1, 2);
        CHECK(te.frequency == 0.0);
    }
    SUBCASE("f exceeding [-1,1] after centering is refused") {
        CHECK_THROWS_AS(empirical_tail(iid2, {3.0, -3.0}, 10, 0.1, 10, 1, 1), FOutOfRange);
    }
    SUBCASE("balanced +-1 matches the exact binomial tail") {
        const int64_t n = 500;
        const double gamma = 0.2;
        const TailEstimate te = empirical_tail(iid2, {1.0, -1.0}, n, gamma, 40000, 99, 2);
        // sum >= n gamma <=> #(+1) >= n(1+gamma)/2
        const int k = static_cast<int>(std::ceil(n * (1 + gamma) / 2.0));
        const double exact = binomial_tail_geq(static_cast<int>(n), 0.5, k);
        CHECK(exact >= te.wilson.lo - 1e-9);
        CHECK(exact <= te.wilson.hi + 1e-9);
    }
}

TEST_CASE("empirical tails sit below nontrivial bounds on random chains") {
    for (uint64_t seed : {11u, 22u, 33u}) {
        const slt::DenseKernel k = slt::DenseKernel::random(5, seed);
        std::vector<double> f(5);
        Philox rng(seed, 1);
        double pif = 0;
        for (int z = 0; z < 5; ++z) {
            f[static_cast<size_t>(z)] = 2 * rng.uniform() - 1;
            pif += k.pi(z) * f[static_cast<size_t>(z)];
        }
        double maxabs = 0;
        for (int z = 0; z < 5; ++z) {
            f[static_cast<size_t>(z)] -= pif;
            maxabs = std::max(maxabs, std::abs(f[static_cast<size_t>(z)]));
        }
        if (maxabs > 1)
            for (double& v : f) v /= maxabs;
        double sigma2 = 0, pi_star = 1;
        for (int z = 0; z < 5; ++z) {
            sigma2 += k.pi(z) * f[static_cast<size_t>(z)] * f[static_cast<size_t>(z)];
            pi_star = std::min(pi_star, k.pi(z));
        }
        const int64_t tmix = chains::mixing_time_dense(k.matrix(), k.pi_vector(), 1000);
        BoundInput in;
        in.gamma_dev = 0.8 * std::min(sigma2, 0.5);
        in.sigma2 = sigma2;
        in.pi_star = pi_star;
        in.mixing_time = static_cast<double>(tmix);
        const double kg = -std::log2(pi_star * in.gamma_dev * in.gamma_dev / (6 * sigma2));
        const int64_t n = static_cast<int64_t>(std::ceil(
            kg * static_cast<double>(tmix) *
            (2.0 + 6.0 * sigma2 * std::log(80.0) / (in.gamma_dev * in.gamma_dev))));
        in.horizon = static_cast<double>(n);
        const BoundValue bv = chernov_discrete(in);
        REQUIRE(!bv.vacuous);
        const TailEstimate te = empirical_tail(k, f, n, in.gamma_dev, 2000, seed * 7, 2);
        CHECK(te.frequency <= bv.value);
    }
}
