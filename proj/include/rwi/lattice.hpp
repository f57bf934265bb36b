#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include "rwi/common.hpp"

namespace rwi::lattice {

// Runtime dimension d lives in Geometry; points carry up to 4 coordinates so
// walkers never allocate. Unused coordinates stay 0.
inline constexpr int kMaxDim = 4;
using Point = std::array<int32_t, kMaxDim>;

inline Point make_point(std::initializer_list<int32_t> cs) {
    Point p{};
    int i = 0;
    for (int32_t c : cs) p[static_cast<size_t>(i++)] = c;
    return p;
}

// Indexing helpers for the torus {0,...,N-1}^d identified with a flat array.
struct Torus {
    int d = 3;
    int32_t N = 0;

    int64_t size() const {
        int64_t s = 1;
        for (int i = 0; i < d; ++i) s *= N;
        return s;
    }

    int64_t stride(int axis) const {
        int64_t s = 1;
        for (int i = 0; i < axis; ++i) s *= N;
        return s;
    }

    int64_t flat(const Point& p) const {
        int64_t f = 0;
        for (int i = d - 1; i >= 0; --i) f = f * N + p[static_cast<size_t>(i)];
        return f;
    }

    Point coords(int64_t f) const {
        Point p{};
        for (int i = 0; i < d; ++i) {
            p[static_cast<size_t>(i)] = static_cast<int32_t>(f % N);
            f /= N;
        }
        return p;
    }

    int32_t wrap(int64_t c) const {
        int64_t r = c % N;
        return static_cast<int32_t>(r < 0 ? r + N : r);
    }

    Point reduce(const Point& p) const {
        Point q{};
        for (int i = 0; i < d; ++i) q[static_cast<size_t>(i)] = wrap(p[static_cast<size_t>(i)]);
        return q;
    }

    // Squared Euclidean distance in the wrapped metric.
    int64_t dist2(const Point& a, const Point& b) const {
        int64_t s = 0;
        for (int i = 0; i < d; ++i) {
            int64_t dx = std::abs(static_cast<int64_t>(a[static_cast<size_t>(i)]) - b[static_cast<size_t>(i)]) % N;
            dx = std::min(dx, N - dx);
            s += dx * dx;
        }
        return s;
    }
};

inline int64_t zd_dist2(const Point& a, const Point& b, int d) {
    int64_t s = 0;
    for (int i = 0; i < d; ++i) {
        const int64_t dx = static_cast<int64_t>(a[static_cast<size_t>(i)]) - b[static_cast<size_t>(i)];
        s += dx * dx;
    }
    return s;
}

// Rounded-box geometry: side N, exponents (gamma, chi), inset L = 2N^gamma + chi*N.
// L is kept real; all membership tests compare integer squared distances
// against real thresholds.
struct Geometry {
    int d = 3;
    int32_t N = 0;
    double gamma = 0.0;
    double chi = 0.0;
    double L = 0.0;

    Torus torus() const { return Torus{d, N}; }
    double ball_radius() const { return chi * N; }              // radius of the corner balls
    double buffer_radius() const { return std::pow(N, gamma); } // N^gamma
    int32_t center_lo() const { return static_cast<int32_t>(std::ceil(L)); }
    int32_t center_hi() const { return static_cast<int32_t>(std::floor(N - L)); }
};

// Dense membership indicator over the torus box plus its inner boundary.
// The sets built here (B, U = N^gamma-enlargement of B, Delta) never touch
// the box faces, so the same bitset answers membership for the set viewed in
// Z^d: outside the box, B and U are empty and Delta is everything.
struct LatticeSet {
    int d = 3;
    int32_t N = 0;
    std::vector<uint64_t> bits;
    std::vector<int64_t> boundary;  // inner boundary, ascending flat indices
    int64_t count = 0;

    bool contains(int64_t f) const {
        return (bits[static_cast<size_t>(f >> 6)] >> (f & 63)) & 1u;
    }
    bool contains_point(const Point& p) const {
        return contains(Torus{d, N}.flat(Torus{d, N}.reduce(p)));
    }
    // Z^d view: bounded sets vanish outside the box.
    bool contains_zd(const Point& p) const {
        for (int i = 0; i < d; ++i) {
            const int32_t c = p[static_cast<size_t>(i)];
            if (c < 0 || c >= N) return false;
        }
        return contains(Torus{d, N}.flat(p));
    }
    void set(int64_t f) {
        uint64_t& w = bits[static_cast<size_t>(f >> 6)];
        const uint64_t m = 1ull << (f & 63);
        count += !(w & m);
        w |= m;
    }
    std::vector<int64_t> points() const;
};

Geometry build_geometry(int d, int32_t N, double gamma, double chi);

// B_N: union of Euclidean balls of radius chi*N centered at the lattice
// points of [L, N-L]^d.
LatticeSet rounded_box(const Geometry& geom);

// The N^gamma-enlargement of B (the complement of Delta); exposed because
// excursions are stopped on first exit from it.
LatticeSet enlargement(const Geometry& geom, const LatticeSet& box);

// Delta_N: complement of the enlargement. Throws EmptyDelta if empty.
LatticeSet delta_set(const Geometry& geom, const LatticeSet& box);

// Inner boundary in the torus metric; for the sets above it coincides with
// the Z^d inner boundary.
std::vector<int64_t> inner_boundary(const LatticeSet& set);

// Geometry bundle used throughout: B, U, Delta and their boundaries.
struct GeometrySets {
    Geometry geom;
    LatticeSet B;
    LatticeSet U;
    LatticeSet Delta;

    static GeometrySets build(const Geometry& geom);
    static GeometrySets build(int d, int32_t N, double gamma, double chi) {
        return build(build_geometry(d, N, gamma, chi));
    }
};

}  // namespace rwi::lattice
