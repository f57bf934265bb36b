#include "rwi/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rwi::lattice {

std::vector<int64_t> LatticeSet::points() const {
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(count));
    const int64_t n = Torus{d, N}.size();
    for (int64_t f = 0; f < n; ++f)
        if (contains(f)) out.push_back(f);
    return out;
}

Geometry build_geometry(int d, int32_t N, double gamma, double chi) {
    if (d < 3) throw GeometryInfeasible("d must be >= 3, got " + std::to_string(d));
    if (N < 2) throw GeometryInfeasible("N must be >= 2, got " + std::to_string(N));
    const double glo = 1.0 / (d - 1);
    if (!(gamma > glo && gamma < 1.0))
        throw GammaOutOfRange("gamma must lie in (1/(d-1), 1) = (" + std::to_string(glo) +
                              ", 1), got " + std::to_string(gamma));
    if (!(chi > 0.0 && chi < 0.25))
        throw GeometryInfeasible("chi must lie in (0, 1/4), got " + std::to_string(chi));
    Geometry g{d, N, gamma, chi, 2.0 * std::pow(N, gamma) + chi * N};
    if (2.0 * g.L > static_cast<double>(N))
        throw GeometryInfeasible("2L = " + std::to_string(2 * g.L) + " exceeds N = " +
                                 std::to_string(N) + "; box would be empty");
    if (g.center_lo() > g.center_hi())
        throw GeometryInfeasible("[L, N-L] contains no lattice point (L = " +
                                 std::to_string(g.L) + ")");
    return g;
}

std::vector<int64_t> inner_boundary(const LatticeSet& set) {
    const Torus t{set.d, set.N};
    std::vector<int64_t> out;
    const int64_t n = t.size();
    for (int64_t f = 0; f < n; ++f) {
        if (!set.contains(f)) continue;
        const Point p = t.coords(f);
        bool bd = false;
        for (int i = 0; i < set.d && !bd; ++i) {
            for (int s = -1; s <= 1 && !bd; s += 2) {
                Point q = p;
                q[static_cast<size_t>(i)] = t.wrap(q[static_cast<size_t>(i)] + s);
                bd = !set.contains(t.flat(q));
            }
        }
        if (bd) out.push_back(f);
    }
    return out;
}

namespace {

LatticeSet empty_set(const Geometry& geom) {
    LatticeSet s;
    s.d = geom.d;
    s.N = geom.N;
    s.bits.assign(static_cast<size_t>((geom.torus().size() + 63) / 64), 0);
    return s;
}

// Offsets o with |o|^2 <= r^2, for stamping Euclidean balls.
std::vector<Point> ball_offsets(int d, double r) {
    const int32_t ri = static_cast<int32_t>(std::floor(r));
    const double r2 = r * r;
    std::vector<Point> out;
    Point o{};
    auto rec = [&](auto&& self, int axis, int64_t acc) -> void {
        if (axis == d) {
            if (static_cast<double>(acc) <= r2) out.push_back(o);
            return;
        }
        for (int32_t c = -ri; c <= ri; ++c) {
            o[static_cast<size_t>(axis)] = c;
            self(self, axis + 1, acc + static_cast<int64_t>(c) * c);
        }
    };
    rec(rec, 0, 0);
    return out;
}

}  // namespace

LatticeSet rounded_box(const Geometry& geom) {
    const Torus t = geom.torus();
    LatticeSet B = empty_set(geom);
    const int32_t lo = geom.center_lo(), hi = geom.center_hi();
    const double r2 = geom.ball_radius() * geom.ball_radius();
    const int64_t n = t.size();
    for (int64_t f = 0; f < n; ++f) {
        const Point p = t.coords(f);
        // nearest center is the coordinatewise clamp onto [lo, hi]^d
        int64_t d2 = 0;
        for (int i = 0; i < geom.d; ++i) {
            const int32_t c = std::clamp(p[static_cast<size_t>(i)], lo, hi);
            const int64_t dx = static_cast<int64_t>(p[static_cast<size_t>(i)]) - c;
            d2 += dx * dx;
        }
        if (static_cast<double>(d2) <= r2) B.set(f);
    }
    if (B.count == 0) throw GeometryInfeasible("rounded box is empty");
    B.boundary = inner_boundary(B);
    return B;
}

LatticeSet enlargement(const Geometry& geom, const LatticeSet& box) {
    const Torus t = geom.torus();
    LatticeSet U = empty_set(geom);
    const int64_t n = t.size();
    for (int64_t f = 0; f < n; ++f)
        if (box.contains(f)) U.set(f);
    // dist(y, B) for y outside B is attained on the inner boundary of B
    const auto offs = ball_offsets(geom.d, geom.buffer_radius());
    for (int64_t f : box.boundary) {
        const Point p = t.coords(f);
        for (const Point& o : offs) {
            Point q{};
            for (int i = 0; i < geom.d; ++i)
                q[static_cast<size_t>(i)] = t.wrap(p[static_cast<size_t>(i)] + o[static_cast<size_t>(i)]);
            U.set(t.flat(q));
        }
    }
    U.boundary = inner_boundary(U);
    return U;
}

LatticeSet delta_set(const Geometry& geom, const LatticeSet& box) {
    const LatticeSet U = enlargement(geom, box);
    const Torus t = geom.torus();
    LatticeSet D = empty_set(geom);
    const int64_t n = t.size();
    for (int64_t f = 0; f < n; ++f)
        if (!U.contains(f)) D.set(f);
    if (D.count == 0) throw EmptyDelta("Delta_N is empty");
    D.boundary = inner_boundary(D);
    return D;
}

GeometrySets GeometrySets::build(const Geometry& geom) {
    GeometrySets gs;
    gs.geom = geom;
    gs.B = rounded_box(geom);
    gs.U = enlargement(geom, gs.B);
    const Torus t = geom.torus();
    gs.Delta = empty_set(geom);
    const int64_t n = t.size();
    for (int64_t f = 0; f < n; ++f)
        if (!gs.U.contains(f)) gs.Delta.set(f);
    if (gs.Delta.count == 0) throw EmptyDelta("Delta_N is empty");
    gs.Delta.boundary = inner_boundary(gs.Delta);
    return gs;
}

}  // namespace rwi::lattice
