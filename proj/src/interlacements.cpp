#include "rwi/interlacements.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rwi/walk.hpp"

namespace rwi::ri {

TrajectoryResult simulate_trajectory(const GeometrySets& gs, const std::vector<int32_t>& b_of_flat,
                                     const std::vector<int32_t>& d_of_flat, int64_t start_flat,
                                     double kill_radius, bool capture_bodies, Philox& rng,
                                     int64_t max_steps) {
    const Torus t = gs.geom.torus();
    Point center{};
    for (int i = 0; i < t.d; ++i) center[static_cast<size_t>(i)] = t.N / 2;
    const double r2 = kill_radius * kill_radius;

    TrajectoryResult out;
    walk::ZdWalker w(t.d, t.coords(start_flat), rng);
    // phases: 0 = inside an excursion (until Delta, viewed in Z^d);
    //         1 = bridge (until B or the kill ball)
    int phase = 0;
    int32_t entry_b = b_of_flat[static_cast<size_t>(start_flat)];
    if (entry_b < 0) throw Error("simulate_trajectory: start must lie on the inner boundary of B");
    std::vector<Point> body;
    if (capture_bodies) body.push_back(w.position());
    for (int64_t step = 0; step < max_steps; ++step) {
        w.step();
        const Point& p = w.position();
        if (phase == 0) {
            if (capture_bodies) body.push_back(p);
            // Delta in Z^d is everything outside the enlargement U
            if (!gs.U.contains_zd(p)) {
                const int64_t f = t.flat(p);  // exit shell lies inside the box
                const int32_t dd = d_of_flat[static_cast<size_t>(f)];
                if (dd < 0) throw Error("simulate_trajectory: excursion exited off dDelta");
                out.pairs.push_back({entry_b, dd});
                if (capture_bodies) {
                    out.bodies.push_back(std::move(body));
                    body.clear();
                }
                phase = 1;
            }
        } else {
            if (gs.B.contains_zd(p)) {
                const int32_t b = b_of_flat[static_cast<size_t>(t.flat(p))];
                if (b < 0) throw Error("simulate_trajectory: B entered off its boundary");
                entry_b = b;
                phase = 0;
                if (capture_bodies) {
                    body.clear();
                    body.push_back(p);
                }
            } else if (static_cast<double>(lattice::zd_dist2(p, center, t.d)) >= r2) {
                return out;  // escaped
            }
        }
    }
    out.truncated = true;
    return out;
}

VacantSample sample_vacant(const Torus& box, const std::vector<int64_t>& K,
                           const std::vector<double>& levels, double kill_radius, uint64_t seed,
                           potential::ZdMode cap_mode) {
    if (K.empty()) throw EmptySet("sample_vacant: empty base set");
    for (size_t i = 1; i < levels.size(); ++i)
        if (levels[i] < levels[i - 1]) throw Error("sample_vacant: levels must ascend");

    std::vector<Point> kp(K.size());
    for (size_t i = 0; i < K.size(); ++i) kp[i] = box.coords(K[i]);
    const potential::CapacityResult cap =
        potential::capacity(box.d, kp, cap_mode, kill_radius > 0 ? kill_radius : 100.0);
    const std::vector<double> ebar = cap.e.normalized();
    const AliasTable start_alias(ebar);

    std::vector<int64_t> k_sorted(K);
    std::sort(k_sorted.begin(), k_sorted.end());
    auto k_index = [&](int64_t f) -> int64_t {
        const auto it = std::lower_bound(k_sorted.begin(), k_sorted.end(), f);
        return (it != k_sorted.end() && *it == f) ? it - k_sorted.begin() : -1;
    };

    Point center{};
    for (int i = 0; i < box.d; ++i) center[static_cast<size_t>(i)] = box.N / 2;
    const double r2 = kill_radius * kill_radius;

    VacantSample out;
    out.K = k_sorted;
    out.levels = levels;
    out.cap_K = cap.cap;
    std::vector<uint8_t> covered(K.size(), 0);
    Philox rng(seed, 0);
    double arrival = rng.exponential(cap.cap);
    long traj = 0;
    for (double u : levels) {
        while (arrival <= u) {
            ++traj;
            // one full trajectory from bar e_K, truncated at the kill ball
            const int si = static_cast<int>(start_alias.sample(rng));
            walk::ZdWalker w(box.d, kp[static_cast<size_t>(si)], rng);
            {
                const int64_t ki = k_index(box.flat(w.position()));
                if (ki >= 0) covered[static_cast<size_t>(ki)] = 1;
            }
            for (;;) {
                w.step();
                const Point& p = w.position();
                bool in_box = true;
                for (int i = 0; i < box.d; ++i)
                    if (p[static_cast<size_t>(i)] < 0 || p[static_cast<size_t>(i)] >= box.N) in_box = false;
                if (in_box) {
                    const int64_t ki = k_index(box.flat(p));
                    if (ki >= 0) covered[static_cast<size_t>(ki)] = 1;
                }
                if (static_cast<double>(lattice::zd_dist2(p, center, box.d)) >= r2) break;
            }
            arrival += rng.exponential(cap.cap);
        }
        std::vector<uint8_t> vac(K.size());
        for (size_t i = 0; i < K.size(); ++i) vac[i] = covered[i] ? 0 : 1;
        out.vacant.push_back(std::move(vac));
        out.trajectory_count.push_back(traj);
    }
    return out;
}

ExcursionStream sample_excursion_stream(const GeometrySets& gs,
                                        const std::vector<int32_t>& b_of_flat,
                                        const std::vector<int32_t>& d_of_flat,
                                        const std::vector<double>& ebar_B, double cap_B,
                                        double u_max, double kill_radius, uint64_t seed,
                                        bool capture_bodies) {
    ExcursionStream out;
    const AliasTable start_alias(ebar_B);
    Philox rng(seed, 0);
    double arrival = rng.exponential(cap_B);
    while (arrival <= u_max) {
        const int b = static_cast<int>(start_alias.sample(rng));
        const int64_t start_flat = gs.B.boundary[static_cast<size_t>(b)];
        TrajectoryResult tr = simulate_trajectory(gs, b_of_flat, d_of_flat, start_flat,
                                                  kill_radius, capture_bodies, rng);
        out.truncated = out.truncated || tr.truncated;
        out.t_per_traj.push_back(static_cast<long>(tr.pairs.size()));
        out.arrivals.push_back(arrival);
        out.pairs.insert(out.pairs.end(), tr.pairs.begin(), tr.pairs.end());
        if (capture_bodies)
            for (auto& bd : tr.bodies) out.bodies.push_back(std::move(bd));
        arrival += rng.exponential(cap_B);
    }
    return out;
}

void dump_vacant_rle(const std::string& path, const Torus& box, const std::vector<int64_t>& K,
                     const std::vector<uint8_t>& vacant, double u, uint64_t seed) {
    std::ofstream f(path);
    if (!f) throw Error("dump_vacant_rle: cannot open " + path);
    char head[160];
    std::snprintf(head, sizeof head, "{\"d\":%d,\"N\":%d,\"u\":%.17g,\"seed\":%llu}\n", box.d,
                  box.N, u, static_cast<unsigned long long>(seed));
    f << head;
    // bitmask over the full box: vacant sites of K are 1, everything else 0
    std::vector<uint8_t> mask(static_cast<size_t>(box.size()), 0);
    for (size_t i = 0; i < K.size(); ++i)
        if (vacant[i]) mask[static_cast<size_t>(K[i])] = 1;
    uint8_t cur = 0;
    int64_t run = 0;
    bool first = true;
    for (int64_t i = 0; i < box.size(); ++i) {
        if (mask[static_cast<size_t>(i)] == cur) {
            ++run;
        } else {
            f << (first ? "" : ",") << run;
            first = false;
            cur = mask[static_cast<size_t>(i)];
            run = 1;
        }
    }
    f << (first ? "" : ",") << run << "\n";
}

}  // namespace rwi::ri
