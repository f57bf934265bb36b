#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rwi/lattice.hpp"
#include "rwi/rng.hpp"

namespace rwi::walk {

using lattice::LatticeSet;
using lattice::Point;
using lattice::Torus;

inline constexpr int64_t kUnfinished = std::numeric_limits<int64_t>::max();

// Simple random walk on the torus; position and flat index kept in sync so
// membership tests in the hot loop are one bitset probe.
class TorusWalker {
public:
    TorusWalker(const Torus& t, const Point& start, Philox rng)
        : t_(t), pos_(t.reduce(start)), flat_(t.flat(pos_)), rng_(rng) {
        for (int i = 0; i < t_.d; ++i) strides_[static_cast<size_t>(i)] = t_.stride(i);
    }

    static TorusWalker uniform_start(const Torus& t, Philox rng) {
        Point p{};
        for (int i = 0; i < t.d; ++i)
            p[static_cast<size_t>(i)] = static_cast<int32_t>(rng.uniform_int(static_cast<uint32_t>(t.N)));
        return TorusWalker(t, p, rng);
    }

    void step() {
        const uint32_t dir = rng_.uniform_int(static_cast<uint32_t>(2 * t_.d));
        const int axis = static_cast<int>(dir >> 1);
        const int32_t sign = (dir & 1) ? 1 : -1;
        int32_t c = pos_[static_cast<size_t>(axis)] + sign;
        const int64_t s = strides_[static_cast<size_t>(axis)];
        if (c == t_.N) {
            c = 0;
            flat_ -= s * (t_.N - 1);
        } else if (c < 0) {
            c = t_.N - 1;
            flat_ += s * (t_.N - 1);
        } else {
            flat_ += sign * s;
        }
        pos_[static_cast<size_t>(axis)] = c;
        ++time_;
    }

    const Point& position() const { return pos_; }
    int64_t flat() const { return flat_; }
    int64_t time() const { return time_; }
    Philox& rng() { return rng_; }

private:
    Torus t_;
    Point pos_;
    int64_t flat_ = 0;
    int64_t time_ = 0;
    Philox rng_;
    std::array<int64_t, lattice::kMaxDim> strides_{};
};

// Walk on Z^d; steps are identical but coordinates never wrap.
class ZdWalker {
public:
    ZdWalker(int d, const Point& start, Philox rng) : d_(d), pos_(start), rng_(rng) {}

    void step() {
        const uint32_t dir = rng_.uniform_int(static_cast<uint32_t>(2 * d_));
        pos_[dir >> 1] += (dir & 1) ? 1 : -1;
        ++time_;
    }

    const Point& position() const { return pos_; }
    int64_t time() const { return time_; }
    Philox& rng() { return rng_; }

private:
    int d_;
    Point pos_;
    int64_t time_ = 0;
    Philox rng_;
};

struct HitResult {
    Point hit_point{};
    int64_t elapsed = 0;
};

// First index k >= 0 with X_k in target. Hitting on the torus is a.s.
// finite; the cap flags pathological runs.
HitResult run_until_hit(TorusWalker& w, const LatticeSet& target, int64_t max_steps);

struct ZdTrajectory {
    std::vector<Point> path;  // includes the start
    bool escaped = false;     // left the kill ball (vs. step cap)
};

// Walk on Z^d until first exit from the closed ball B(center, kill_radius).
ZdTrajectory walk_on_zd(int d, const Point& start, const Point& center, double kill_radius,
                        int64_t max_steps, Philox rng);

struct ExcursionRecord {
    int64_t return_time = 0;             // R_i
    int64_t departure_time = kUnfinished;  // D_i, kUnfinished if truncated mid-excursion
    Point entry_point{};                 // X_{R_i}
    Point exit_point{};                  // X_{D_i} (valid when finished)
};

struct ExcursionDecomposition {
    int64_t d0 = kUnfinished;  // H_Delta; kUnfinished if the path never reaches Delta
    std::vector<ExcursionRecord> excursions;
};

// Successive excursion times between B and Delta of a stored path:
// D_0 = H_Delta, then R_i = first entry to B after D_{i-1}, D_i = first
// entry to Delta after R_i. Pure function of the path.
ExcursionDecomposition excursion_decompose(const std::vector<Point>& path, const LatticeSet& B,
                                           const LatticeSet& delta);

// Little-endian int32 coordinate stream, d values per site.
void dump_trajectory(const std::string& path, const std::vector<Point>& traj, int d);
std::vector<Point> load_trajectory(const std::string& path, int d);

}  // namespace rwi::walk
