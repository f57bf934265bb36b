#include <doctest.h>

#include <cmath>

#include "rwi/potential.hpp"
#include "rwi/stats.hpp"
#include "rwi/walk.hpp"

using namespace rwi;
using namespace rwi::walk;
using lattice::LatticeSet;
using lattice::Point;
using lattice::Torus;

namespace {

LatticeSet set_of(const Torus& t, const std::vector<Point>& pts) {
    LatticeSet s;
    s.d = t.d;
    s.N = t.N;
    s.bits.assign(static_cast<size_t>((t.size() + 63) / 64), 0);
    for (const Point& p : pts) s.set(t.flat(p));
    s.boundary = lattice::inner_boundary(s);
    return s;
}

}  // namespace

TEST_CASE("run_until_hit basics") {
    const Torus t{3, 8};
    const LatticeSet target = set_of(t, {lattice::make_point({1, 2, 3})});
    TorusWalker w(t, lattice::make_point({1, 2, 3}), Philox(1, 1));
    const HitResult r = run_until_hit(w, target, 100);
    CHECK(r.elapsed == 0);
    CHECK(r.hit_point == lattice::make_point({1, 2, 3}));

    // target = whole torus
    LatticeSet all;
    all.d = 3;
    all.N = 8;
    all.bits.assign(static_cast<size_t>((t.size() + 63) / 64), 0);
    for (int64_t f = 0; f < t.size(); ++f) all.set(f);
    TorusWalker w2(t, lattice::make_point({4, 4, 4}), Philox(1, 2));
    CHECK(run_until_hit(w2, all, 10).elapsed == 0);

    CHECK_THROWS_AS(
        [&] {
            TorusWalker w3(t, lattice::make_point({0, 0, 0}), Philox(1, 3));
            return run_until_hit(w3, target, 1);
        }(),
        Timeout);
}

TEST_CASE("mean hitting time of a point matches the Dirichlet oracle") {
    const Torus t{3, 12};
    const Point origin{};
    const LatticeSet target = set_of(t, {origin});

    // oracle: (I - P) h = 1 off the target, h = 0 on it
    const auto mask = potential::absorbing_mask(t, target);
    const auto h = potential::harmonic_field(
        t, mask, [](int64_t) { return 0.0; }, [](int64_t) { return 1.0; });
    double exact_mean = 0;
    for (int64_t f = 0; f < t.size(); ++f) exact_mean += h[static_cast<size_t>(f)];
    exact_mean /= static_cast<double>(t.size());

    Accumulator acc;
    const long reps = 3000;
    for (long r = 0; r < reps; ++r) {
        TorusWalker w = TorusWalker::uniform_start(t, Philox(42, static_cast<uint64_t>(r)));
        acc.add(static_cast<double>(run_until_hit(w, target, 80'000'000).elapsed));
    }
    CHECK(std::abs(acc.mean - exact_mean) <= 4 * acc.stderr_mean());
    // scale sanity: ~ N^d * g(0)
    CHECK(exact_mean > 0.8 * 1.5 * 1728);
    CHECK(exact_mean < 1.3 * 1.6 * 1728);
}

TEST_CASE("excursion decomposition on hand-built paths") {
    const Torus t{3, 8};
    const Point a = lattice::make_point({1, 1, 1});
    const Point b = lattice::make_point({4, 4, 4});
    const Point c = lattice::make_point({6, 6, 6});
    const LatticeSet B = set_of(t, {a});
    const LatticeSet D = set_of(t, {c});

    SUBCASE("c b a b c a") {
        const std::vector<Point> path = {c, b, a, b, c, a};
        const auto dec = excursion_decompose(path, B, D);
        CHECK(dec.d0 == 0);
        REQUIRE(dec.excursions.size() == 2);
        CHECK(dec.excursions[0].return_time == 2);
        CHECK(dec.excursions[0].departure_time == 4);
        CHECK(dec.excursions[0].entry_point == a);
        CHECK(dec.excursions[0].exit_point == c);
        CHECK(dec.excursions[1].return_time == 5);
        CHECK(dec.excursions[1].departure_time == kUnfinished);
    }
    SUBCASE("path entirely inside Delta") {
        const std::vector<Point> path = {c, c, c};
        const auto dec = excursion_decompose(path, B, D);
        CHECK(dec.d0 == 0);
        CHECK(dec.excursions.empty());
    }
    SUBCASE("a c a c") {
        const std::vector<Point> path = {a, c, a, c};
        const auto dec = excursion_decompose(path, B, D);
        CHECK(dec.d0 == 1);
        REQUIRE(dec.excursions.size() == 1);
        CHECK(dec.excursions[0].return_time == 2);
        CHECK(dec.excursions[0].departure_time == 3);
    }
    SUBCASE("deterministic and alternating on a simulated path") {
        std::vector<Point> path;
        TorusWalker w(t, b, Philox(7, 7));
        for (int i = 0; i < 4000; ++i) {
            path.push_back(w.position());
            w.step();
        }
        const auto d1 = excursion_decompose(path, B, D);
        const auto d2 = excursion_decompose(path, B, D);
        REQUIRE(d1.excursions.size() == d2.excursions.size());
        int64_t prev_d = d1.d0;
        for (const auto& e : d1.excursions) {
            CHECK(e.return_time > prev_d);
            if (e.departure_time != kUnfinished) {
                CHECK(e.departure_time > e.return_time);
                prev_d = e.departure_time;
                CHECK(D.contains_point(e.exit_point));
            }
            CHECK(B.contains_point(e.entry_point));
        }
    }
}

TEST_CASE("walk_on_zd: boundary start, guards, return probability") {
    const Point origin{};
    SUBCASE("start on the kill sphere") {
        const Point far = lattice::make_point({10, 0, 0});
        const auto tr = walk_on_zd(3, far, origin, 10.0, 1000, Philox(1, 1));
        CHECK(tr.escaped);
        CHECK(tr.path.size() == 1);
    }
    SUBCASE("infinite kill radius refused") {
        CHECK_THROWS_AS(walk_on_zd(3, origin, origin,
                                   std::numeric_limits<double>::infinity(), 10, Philox(1, 1)),
                        Error);
    }
    SUBCASE("return probability matches the window solve") {
        // walks from |x| = r: probability of reaching B(0, r/2) before |x| >= R
        const int r = 6, R = 24;
        const Point start = lattice::make_point({r, 0, 0});
        const double r_half = r / 2.0;
        Point lo = lattice::make_point({-R - 1, -R - 1, -R - 1});
        Point hi = lattice::make_point({R + 1, R + 1, R + 1});
        const auto solver = potential::DirichletSolver::zd_window(3, lo, hi, [&](const Point& p) {
            const double d2 = static_cast<double>(lattice::zd_dist2(p, origin, 3));
            return d2 < static_cast<double>(R) * R && d2 > r_half * r_half;
        });
        // absorbing data: 1 on the inner ball, 0 on/beyond the kill sphere
        auto point_of = [&](int64_t f) {
            Point q{};
            for (int i = 0; i < 3; ++i) {
                q[static_cast<size_t>(i)] = static_cast<int32_t>(f % (2 * R + 3)) - R - 1;
                f /= (2 * R + 3);
            }
            return q;
        };
        auto bdata = [&](int64_t f) {
            const Point q = point_of(f);
            return static_cast<double>(lattice::zd_dist2(q, origin, 3)) <= r_half * r_half ? 1.0
                                                                                           : 0.0;
        };
        const auto u = solver.solve(bdata, [](int64_t) { return 0.0; });
        int64_t sflat = 0;
        for (int i = 2; i >= 0; --i) sflat = sflat * (2 * R + 3) + (start[static_cast<size_t>(i)] + R + 1);
        const double exact = u[static_cast<size_t>(solver.index_of(sflat))];

        long hits = 0;
        const long reps = 4000;
        for (long rep = 0; rep < reps; ++rep) {
            Philox rng(99, static_cast<uint64_t>(rep));
            ZdWalker w(3, start, rng);
            for (;;) {
                w.step();
                const double d2 = static_cast<double>(lattice::zd_dist2(w.position(), origin, 3));
                if (d2 <= r_half * r_half) {
                    ++hits;
                    break;
                }
                if (d2 >= static_cast<double>(R) * R) break;
            }
        }
        const double mc = static_cast<double>(hits) / reps;
        const double se = std::sqrt(exact * (1 - exact) / reps);
        CHECK(std::abs(mc - exact) <= 4 * se);
    }
}

TEST_CASE("uniform start stays uniform (chi-square at fixed k)") {
    const Torus t{3, 6};
    const int64_t cells = t.size();
    std::vector<long> counts(static_cast<size_t>(cells), 0);
    const long reps = 40000;
    for (long r = 0; r < reps; ++r) {
        TorusWalker w = TorusWalker::uniform_start(t, Philox(7, static_cast<uint64_t>(r)));
        for (int k = 0; k < 25; ++k) w.step();
        ++counts[static_cast<size_t>(w.flat())];
    }
    const std::vector<double> probs(static_cast<size_t>(cells), 1.0 / static_cast<double>(cells));
    int dof = 0;
    const double stat = chi2_statistic(counts, probs, &dof);
    CHECK(stat < chi2_quantile(0.99, dof));
}

TEST_CASE("reversibility of transition pair frequencies") {
    const Torus t{3, 6};
    TorusWalker w = TorusWalker::uniform_start(t, Philox(11, 0));
    const int64_t x = t.flat(lattice::make_point({2, 3, 1}));
    const int64_t y = t.flat(lattice::make_point({3, 3, 1}));
    long cxy = 0, cyx = 0;
    int64_t prev = w.flat();
    for (int64_t k = 0; k < 4'000'000; ++k) {
        w.step();
        const int64_t cur = w.flat();
        if (prev == x && cur == y) ++cxy;
        if (prev == y && cur == x) ++cyx;
        prev = cur;
    }
    CHECK(std::abs(static_cast<double>(cxy - cyx)) <=
          5.0 * std::sqrt(static_cast<double>(cxy + cyx)));
}

TEST_CASE("trajectory dump round-trips") {
    std::vector<Point> traj = {lattice::make_point({1, 2, 3}), lattice::make_point({1, 2, 4}),
                               lattice::make_point({0, 2, 4})};
    const std::string path = "traj_dump_test.bin";
    dump_trajectory(path, traj, 3);
    const auto back = load_trajectory(path, 3);
    REQUIRE(back.size() == traj.size());
    for (size_t i = 0; i < traj.size(); ++i) CHECK(back[i] == traj[i]);
    std::remove(path.c_str());
}
