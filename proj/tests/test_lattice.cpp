#include <doctest.h>

#include <cmath>
#include <tuple>
#include <vector>

#include "rwi/lattice.hpp"

using namespace rwi;
using namespace rwi::lattice;

namespace {

// brute-force membership straight from the definition: some center
// c in [ceil(L), floor(N-L)]^d has |x - c| <= chi N
bool in_box_bruteforce(const Geometry& g, const Point& x) {
    const int32_t lo = g.center_lo(), hi = g.center_hi();
    const double r2 = g.ball_radius() * g.ball_radius();
    Point c{};
    auto rec = [&](auto&& self, int axis) -> bool {
        if (axis == g.d) {
            int64_t d2 = 0;
            for (int i = 0; i < g.d; ++i) {
                const int64_t dx = x[static_cast<size_t>(i)] - c[static_cast<size_t>(i)];
                d2 += dx * dx;
            }
            return static_cast<double>(d2) <= r2;
        }
        for (int32_t v = lo; v <= hi; ++v) {
            c[static_cast<size_t>(axis)] = v;
            if (self(self, axis + 1)) return true;
        }
        return false;
    };
    return rec(rec, 0);
}

}  // namespace

TEST_CASE("geometry construction and rejection") {
    const Geometry g = build_geometry(3, 40, 0.55, 0.1);
    CHECK(g.L == doctest::Approx(2 * std::pow(40.0, 0.55) + 4.0).epsilon(1e-12));
    CHECK(g.L == doctest::Approx(19.211).epsilon(1e-3));

    CHECK_THROWS_AS(build_geometry(3, 40, 0.55, 0.2), GeometryInfeasible);  // L > N/2
    CHECK_THROWS_AS(build_geometry(3, 40, 0.4, 0.1), GammaOutOfRange);      // gamma <= 1/(d-1)
    CHECK_THROWS_AS(build_geometry(3, 40, 0.55, 0.3), GeometryInfeasible);  // chi >= 1/4
    CHECK_THROWS_AS(build_geometry(2, 40, 0.55, 0.1), GeometryInfeasible);
    // the acceptance-criteria sizes that the rounded-box construction cannot host
    CHECK_THROWS_AS(build_geometry(3, 14, 0.55, 0.1), GeometryInfeasible);
    CHECK_THROWS_AS(build_geometry(3, 20, 0.55, 0.1), GeometryInfeasible);
}

TEST_CASE("rounded box matches the brute-force definition") {
    const Geometry g = build_geometry(3, 40, 0.55, 0.1);
    const LatticeSet B = rounded_box(g);
    const Torus t = g.torus();
    CHECK(B.contains(t.flat(make_point({20, 20, 20}))));
    CHECK(!B.contains(t.flat(make_point({0, 0, 0}))));
    for (int64_t f = 0; f < t.size(); ++f) {
        const Point p = t.coords(f);
        REQUIRE(B.contains(f) == in_box_bruteforce(g, p));
    }
    CHECK(B.boundary.size() > 0);
}

TEST_CASE("box symmetry under permutations and x -> N - x") {
    const Geometry g = build_geometry(3, 40, 0.55, 0.1);
    const LatticeSet B = rounded_box(g);
    const Torus t = g.torus();
    for (int64_t f = 0; f < t.size(); ++f) {
        const Point p = t.coords(f);
        const Point perm = make_point({p[1], p[2], p[0]});
        CHECK(B.contains(f) == B.contains(t.flat(perm)));
        Point refl{};
        for (int i = 0; i < 3; ++i) refl[static_cast<size_t>(i)] = t.wrap(-p[static_cast<size_t>(i)]);
        CHECK(B.contains(f) == B.contains(t.flat(refl)));
    }
}

TEST_CASE("delta set: separation, disjointness, wrap invariance") {
    const Geometry g = build_geometry(3, 40, 0.55, 0.1);
    const GeometrySets gs = GeometrySets::build(g);
    const Torus t = g.torus();

    CHECK(gs.Delta.contains(t.flat(make_point({0, 0, 0}))));
    CHECK(gs.Delta.boundary.size() > 0);

    const double r2 = g.buffer_radius() * g.buffer_radius();
    int64_t checked = 0;
    for (int64_t f = 0; f < t.size(); ++f) {
        if (!gs.Delta.contains(f)) continue;
        CHECK(!gs.B.contains(f));
        // exhaustive separation: nearest point of B lies on its boundary
        int64_t best = INT64_MAX;
        const Point p = t.coords(f);
        for (int64_t b : gs.B.boundary) best = std::min(best, t.dist2(p, t.coords(b)));
        REQUIRE(static_cast<double>(best) > r2);
        ++checked;
    }
    CHECK(checked > 0);

    // membership invariant under adding N to a coordinate before reduction
    const Point q = make_point({3, 39, 17});
    const Point q_shift = make_point({3 + 40, 39, 17});
    CHECK(gs.Delta.contains_point(q) == gs.Delta.contains_point(q_shift));
    CHECK(gs.B.contains_point(q) == gs.B.contains_point(q_shift));
}

TEST_CASE("desk-scale geometry G20: plus-shaped box") {
    const GeometrySets gs = GeometrySets::build(3, 20, 0.501, 0.05);
    CHECK(gs.B.count == 7);             // center plus its 6 neighbors (chi N = 1)
    CHECK(gs.B.boundary.size() == 6);   // the tips; the center is interior
    CHECK(gs.Delta.count > 0);
    CHECK(gs.Delta.boundary.size() > 10);
    const Torus t = gs.geom.torus();
    CHECK(gs.B.contains(t.flat(make_point({10, 10, 10}))));
    CHECK(gs.B.contains(t.flat(make_point({11, 10, 10}))));
    CHECK(!gs.B.contains(t.flat(make_point({11, 11, 10}))));
}

TEST_CASE("enlargement stays strictly inside the box faces") {
    const std::vector<std::tuple<int, double, double>> cases = {{20, 0.501, 0.05},
                                                                {36, 0.55, 0.1}};
    for (auto [N, gamma, chi] : cases) {
        const GeometrySets gs = GeometrySets::build(3, N, gamma, chi);
        const Torus t = gs.geom.torus();
        for (int64_t f = 0; f < t.size(); ++f) {
            if (!gs.U.contains(f)) continue;
            const Point p = t.coords(f);
            for (int i = 0; i < 3; ++i) {
                REQUIRE(p[static_cast<size_t>(i)] > 0);
                REQUIRE(p[static_cast<size_t>(i)] < N - 1);
            }
        }
    }
}
