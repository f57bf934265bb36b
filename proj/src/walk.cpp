#include "rwi/walk.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace rwi::walk {

HitResult run_until_hit(TorusWalker& w, const LatticeSet& target, int64_t max_steps) {
    if (target.count == 0) throw EmptySet("run_until_hit: empty target");
    const int64_t t0 = w.time();
    if (target.contains(w.flat())) return {w.position(), 0};
    while (w.time() - t0 < max_steps) {
        w.step();
        if (target.contains(w.flat())) return {w.position(), w.time() - t0};
    }
    throw Timeout("run_until_hit: no hit within " + std::to_string(max_steps) + " steps");
}

ZdTrajectory walk_on_zd(int d, const Point& start, const Point& center, double kill_radius,
                        int64_t max_steps, Philox rng) {
    if (!(kill_radius > 0) || !std::isfinite(kill_radius))
        throw Error("walk_on_zd: kill_radius must be finite and positive");
    const double r2 = kill_radius * kill_radius;
    ZdTrajectory out;
    out.path.push_back(start);
    if (static_cast<double>(lattice::zd_dist2(start, center, d)) >= r2) {
        out.escaped = true;
        return out;
    }
    ZdWalker w(d, start, rng);
    for (int64_t k = 0; k < max_steps; ++k) {
        w.step();
        out.path.push_back(w.position());
        if (static_cast<double>(lattice::zd_dist2(w.position(), center, d)) >= r2) {
            out.escaped = true;
            return out;
        }
    }
    throw StepCapExceeded("walk_on_zd: kill ball not reached within " +
                          std::to_string(max_steps) + " steps");
}

ExcursionDecomposition excursion_decompose(const std::vector<Point>& path, const LatticeSet& B,
                                           const LatticeSet& delta) {
    if (B.count == 0 || delta.count == 0)
        throw EmptySet("excursion_decompose: B and Delta must be nonempty");
    ExcursionDecomposition out;
    // phase 0: before D_0; phase 1: in an excursion gap (looking for R);
    // phase 2: inside an excursion (looking for D)
    int phase = 0;
    for (size_t k = 0; k < path.size(); ++k) {
        const bool in_b = B.contains_point(path[k]);
        const bool in_d = delta.contains_point(path[k]);
        if (phase == 0) {
            if (in_d) {
                out.d0 = static_cast<int64_t>(k);
                phase = 1;
            }
        } else if (phase == 1) {
            if (in_b) {
                ExcursionRecord r;
                r.return_time = static_cast<int64_t>(k);
                r.entry_point = path[k];
                out.excursions.push_back(r);
                phase = 2;
            }
        } else {
            if (in_d) {
                out.excursions.back().departure_time = static_cast<int64_t>(k);
                out.excursions.back().exit_point = path[k];
                phase = 1;
            }
        }
    }
    return out;
}

void dump_trajectory(const std::string& path, const std::vector<Point>& traj, int d) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("dump_trajectory: cannot open " + path);
    for (const Point& p : traj) {
        for (int i = 0; i < d; ++i) {
            const uint32_t v = static_cast<uint32_t>(p[static_cast<size_t>(i)]);
            const unsigned char b[4] = {static_cast<unsigned char>(v),
                                        static_cast<unsigned char>(v >> 8),
                                        static_cast<unsigned char>(v >> 16),
                                        static_cast<unsigned char>(v >> 24)};
            f.write(reinterpret_cast<const char*>(b), 4);
        }
    }
}

std::vector<Point> load_trajectory(const std::string& path, int d) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("load_trajectory: cannot open " + path);
    std::vector<Point> out;
    unsigned char b[4];
    Point p{};
    int i = 0;
    while (f.read(reinterpret_cast<char*>(b), 4)) {
        const uint32_t v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
        p[static_cast<size_t>(i++)] = static_cast<int32_t>(v);
        if (i == d) {
            out.push_back(p);
            p = Point{};
            i = 0;
        }
    }
    if (i != 0) throw Error("load_trajectory: truncated coordinate record");
    return out;
}

}  // namespace rwi::walk
