#include "rwi/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rwi/parallel.hpp"
#include "rwi/stats.hpp"
#include "rwi/walk.hpp"

namespace rwi::perc {

namespace {

struct UnionFind {
    std::vector<int32_t> parent;
    std::vector<int32_t> size;

    explicit UnionFind(int64_t n) : parent(static_cast<size_t>(n)), size(static_cast<size_t>(n), 1) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int32_t find(int32_t x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    }
    void unite(int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size[static_cast<size_t>(a)] < size[static_cast<size_t>(b)]) std::swap(a, b);
        parent[static_cast<size_t>(b)] = a;
        size[static_cast<size_t>(a)] += size[static_cast<size_t>(b)];
    }
};

}  // namespace

ClusterStats components(const std::vector<uint8_t>& indicator, const Torus& box,
                        bool torus_topology) {
    const int64_t n = box.size();
    UnionFind uf(n);
    // forward neighbors only; wrap edges added on the torus
    for (int64_t f = 0; f < n; ++f) {
        if (!indicator[static_cast<size_t>(f)]) continue;
        const Point p = box.coords(f);
        for (int axis = 0; axis < box.d; ++axis) {
            const int32_t c = p[static_cast<size_t>(axis)];
            if (c + 1 < box.N) {
                const int64_t g = f + box.stride(axis);
                if (indicator[static_cast<size_t>(g)]) uf.unite(static_cast<int32_t>(f), static_cast<int32_t>(g));
            } else if (torus_topology && box.N > 1) {
                const int64_t g = f - static_cast<int64_t>(box.N - 1) * box.stride(axis);
                if (indicator[static_cast<size_t>(g)]) uf.unite(static_cast<int32_t>(f), static_cast<int32_t>(g));
            }
        }
    }
    ClusterStats out;
    out.comp.assign(static_cast<size_t>(n), -1);
    std::vector<int32_t> label(static_cast<size_t>(n), -1);
    for (int64_t f = 0; f < n; ++f) {
        if (!indicator[static_cast<size_t>(f)]) continue;
        const int32_t root = uf.find(static_cast<int32_t>(f));
        if (label[static_cast<size_t>(root)] < 0) {
            label[static_cast<size_t>(root)] = static_cast<int32_t>(out.n_components++);
            out.comp_size.push_back(0);
        }
        out.comp[static_cast<size_t>(f)] = label[static_cast<size_t>(root)];
        ++out.comp_size[static_cast<size_t>(label[static_cast<size_t>(root)])];
    }
    for (int64_t s : out.comp_size) out.largest = std::max(out.largest, s);
    out.origin_comp = indicator.empty() || !indicator[0] ? -1 : out.comp[0];
    return out;
}

namespace {

int64_t pair_dist2(const Point& a, const Point& b, const Torus& box, bool wrap) {
    return wrap ? box.dist2(a, b) : lattice::zd_dist2(a, b, box.d);
}

double exact_diameter(const std::vector<Point>& pts, const Torus& box, bool wrap) {
    int64_t best = 0;
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            best = std::max(best, pair_dist2(pts[i], pts[j], box, wrap));
    return std::sqrt(static_cast<double>(best));
}

struct Sandwich {
    double lower = 0, upper = 0;
    std::vector<Point> candidates;  // axis-extreme points realizing the lower bound
};

// Per-axis minimal covering window (on the torus: complement of the largest
// coordinate gap); bounds all pairwise axis distances.
Sandwich diameter_sandwich(const std::vector<Point>& pts, const Torus& box, bool wrap) {
    Sandwich s;
    double ub2 = 0;
    for (int axis = 0; axis < box.d; ++axis) {
        std::vector<int32_t> cs(pts.size());
        for (size_t i = 0; i < pts.size(); ++i) cs[i] = pts[i][static_cast<size_t>(axis)];
        std::sort(cs.begin(), cs.end());
        int64_t extent;
        int32_t win_lo;
        if (!wrap) {
            extent = cs.back() - cs.front();
            win_lo = cs.front();
        } else {
            // largest circular gap between consecutive occupied coordinates
            int64_t max_gap = (cs.front() + box.N) - cs.back();
            int32_t gap_after = cs.back();
            for (size_t i = 1; i < cs.size(); ++i) {
                const int64_t g = cs[i] - cs[i - 1];
                if (g > max_gap) {
                    max_gap = g;
                    gap_after = cs[i - 1];
                }
            }
            extent = box.N - max_gap;
            win_lo = box.wrap(gap_after + static_cast<int32_t>(max_gap));
        }
        const int64_t cap = wrap ? box.N / 2 : extent;
        const int64_t ub_axis = std::min<int64_t>(extent, cap);
        ub2 += static_cast<double>(ub_axis) * static_cast<double>(ub_axis);
        // points attaining the two window ends are lower-bound candidates
        int32_t lo_c = win_lo, hi_c = box.wrap(win_lo + static_cast<int32_t>(extent));
        if (!wrap) {
            lo_c = cs.front();
            hi_c = cs.back();
        }
        for (const Point& p : pts) {
            if (p[static_cast<size_t>(axis)] == lo_c || p[static_cast<size_t>(axis)] == hi_c) {
                s.candidates.push_back(p);
                break;
            }
        }
        for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
            if ((*it)[static_cast<size_t>(axis)] == lo_c || (*it)[static_cast<size_t>(axis)] == hi_c) {
                s.candidates.push_back(*it);
                break;
            }
        }
    }
    s.upper = std::sqrt(ub2);
    int64_t lb2 = 0;
    for (size_t i = 0; i < s.candidates.size(); ++i)
        for (size_t j = i + 1; j < s.candidates.size(); ++j)
            lb2 = std::max(lb2, pair_dist2(s.candidates[i], s.candidates[j], box, wrap));
    s.lower = std::sqrt(static_cast<double>(lb2));
    return s;
}

constexpr size_t kExactCutoff = 10'000;

}  // namespace

double euclid_diameter(const std::vector<Point>& pts, const Torus& box, bool torus_topology) {
    if (pts.empty()) return 0.0;
    if (pts.size() == 1) return 0.0;
    if (pts.size() <= kExactCutoff) return exact_diameter(pts, box, torus_topology);
    const Sandwich s = diameter_sandwich(pts, box, torus_topology);
    if (s.upper - s.lower < 1e-9) return s.lower;
    return exact_diameter(pts, box, torus_topology);
}

bool diameter_at_least(const std::vector<Point>& pts, const Torus& box, bool torus_topology,
                       double threshold) {
    if (pts.empty()) return threshold <= 0;
    if (pts.size() <= kExactCutoff)
        return exact_diameter(pts, box, torus_topology) >= threshold;
    const Sandwich s = diameter_sandwich(pts, box, torus_topology);
    if (s.lower >= threshold) return true;
    if (s.upper < threshold) return false;
    return exact_diameter(pts, box, torus_topology) >= threshold;
}

std::vector<std::vector<uint8_t>> eta_hat_events(int d, int32_t N,
                                                 const std::vector<double>& u_grid, long replicas,
                                                 uint64_t seed, int threads,
                                                 std::vector<std::vector<int64_t>>* largest_out) {
    const Torus box{d, N};
    const int64_t nd = box.size();
    for (size_t i = 1; i < u_grid.size(); ++i)
        if (u_grid[i] < u_grid[i - 1]) throw Error("eta_hat: u grid must ascend");
    const double u_max = u_grid.empty() ? 0.0 : u_grid.back();
    const int64_t path_len = static_cast<int64_t>(std::floor(u_max * static_cast<double>(nd)));

    std::vector<std::vector<uint8_t>> events(static_cast<size_t>(replicas));
    if (largest_out) largest_out->assign(static_cast<size_t>(replicas), {});
    parallel_for(replicas, threads, [&](int64_t rep) {
        walk::TorusWalker w =
            walk::TorusWalker::uniform_start(box, Philox(seed, static_cast<uint64_t>(rep)));
        std::vector<int64_t> first_visit(static_cast<size_t>(nd), -1);
        first_visit[static_cast<size_t>(w.flat())] = 0;
        for (int64_t k = 1; k <= path_len; ++k) {
            w.step();
            int64_t& fv = first_visit[static_cast<size_t>(w.flat())];
            if (fv < 0) fv = k;
        }
        std::vector<uint8_t> row;
        std::vector<int64_t> largest_row;
        std::vector<uint8_t> vacant(static_cast<size_t>(nd));
        for (double u : u_grid) {
            if (u <= 0.0) {
                // empty-trace convention: the vacant set is the full torus
                std::fill(vacant.begin(), vacant.end(), 1);
            } else {
                const int64_t thr = static_cast<int64_t>(std::floor(u * static_cast<double>(nd)));
                for (int64_t f = 0; f < nd; ++f) {
                    const int64_t fv = first_visit[static_cast<size_t>(f)];
                    vacant[static_cast<size_t>(f)] = (fv < 0 || fv > thr) ? 1 : 0;
                }
            }
            const ClusterStats cs = components(vacant, box, true);
            bool event = false;
            if (cs.origin_comp >= 0) {
                std::vector<Point> comp_pts;
                comp_pts.reserve(static_cast<size_t>(cs.comp_size[static_cast<size_t>(cs.origin_comp)]));
                for (int64_t f = 0; f < nd; ++f)
                    if (cs.comp[static_cast<size_t>(f)] == cs.origin_comp) comp_pts.push_back(box.coords(f));
                event = diameter_at_least(comp_pts, box, true, static_cast<double>(N) / 4.0);
            }
            row.push_back(event ? 1 : 0);
            largest_row.push_back(cs.largest);
        }
        events[static_cast<size_t>(rep)] = std::move(row);
        if (largest_out) (*largest_out)[static_cast<size_t>(rep)] = std::move(largest_row);
    });
    return events;
}

std::vector<EtaHatRow> eta_hat(int d, int32_t N, const std::vector<double>& u_grid, long replicas,
                               uint64_t seed, int threads) {
    std::vector<std::vector<int64_t>> largest;
    const auto events = eta_hat_events(d, N, u_grid, replicas, seed, threads, &largest);
    std::vector<EtaHatRow> out;
    for (size_t j = 0; j < u_grid.size(); ++j) {
        long hits = 0;
        double largest_sum = 0;
        for (long r = 0; r < replicas; ++r) {
            hits += events[static_cast<size_t>(r)][j];
            largest_sum += static_cast<double>(largest[static_cast<size_t>(r)][j]);
        }
        EtaHatRow row;
        row.u = u_grid[j];
        row.eta_hat = static_cast<double>(hits) / static_cast<double>(replicas);
        row.stderr_ = std::sqrt(row.eta_hat * (1 - row.eta_hat) / static_cast<double>(replicas));
        row.mean_largest = largest_sum / static_cast<double>(replicas);
        out.push_back(row);
    }
    return out;
}

}  // namespace rwi::perc
