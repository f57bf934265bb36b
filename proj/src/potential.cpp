#include "rwi/potential.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "rwi/parallel.hpp"
#include "rwi/walk.hpp"

namespace rwi::potential {

namespace {

constexpr double kResidualGate = 1e-10;

// value = v_inf + a/R (+ b/R^2 with three points); returns v_inf
double richardson(const std::vector<std::pair<double, double>>& rv) {
    const size_t n = rv.size();
    if (n == 1) return rv[0].second;
    if (n == 2) {
        const double x0 = 1.0 / rv[0].first, x1 = 1.0 / rv[1].first;
        return rv[1].second + (rv[1].second - rv[0].second) * x1 / (x0 - x1);
    }
    // quadratic in 1/R through the last three points
    const double x0 = 1.0 / rv[n - 3].first, x1 = 1.0 / rv[n - 2].first, x2 = 1.0 / rv[n - 1].first;
    const double y0 = rv[n - 3].second, y1 = rv[n - 2].second, y2 = rv[n - 1].second;
    // Lagrange evaluation at 0
    const double l0 = (0 - x1) * (0 - x2) / ((x0 - x1) * (x0 - x2));
    const double l1 = (0 - x0) * (0 - x2) / ((x1 - x0) * (x1 - x2));
    const double l2 = (0 - x0) * (0 - x1) / ((x2 - x0) * (x2 - x1));
    return l0 * y0 + l1 * y1 + l2 * y2;
}

double richardson_tolerance(const std::vector<std::pair<double, double>>& rv) {
    if (rv.size() < 3) return std::abs(rv.back().second - rv.front().second);
    const double full = richardson(rv);
    std::vector<std::pair<double, double>> two(rv.end() - 2, rv.end());
    return std::abs(full - richardson(two));
}

struct PointLess {
    bool operator()(const Point& a, const Point& b) const {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    }
};

}  // namespace

std::vector<uint8_t> absorbing_mask(const Torus& t, const LatticeSet& set) {
    std::vector<uint8_t> m(static_cast<size_t>(t.size()), 0);
    for (int64_t f = 0; f < t.size(); ++f) m[static_cast<size_t>(f)] = set.contains(f) ? 1 : 0;
    return m;
}

std::vector<uint8_t> absorbing_mask(const Torus& t, const LatticeSet& a, const LatticeSet& b) {
    std::vector<uint8_t> m(static_cast<size_t>(t.size()), 0);
    for (int64_t f = 0; f < t.size(); ++f)
        m[static_cast<size_t>(f)] = (a.contains(f) || b.contains(f)) ? 1 : 0;
    return m;
}

std::vector<double> harmonic_field(const Torus& t, const std::vector<uint8_t>& absorbing,
                                   const std::function<double(int64_t)>& boundary,
                                   const std::function<double(int64_t)>& source) {
    const int64_t n = t.size();
    std::vector<double> field(static_cast<size_t>(n));
    bool any_unknown = false;
    for (int64_t f = 0; f < n; ++f)
        if (!absorbing[static_cast<size_t>(f)]) any_unknown = true;
    if (!any_unknown) {
        for (int64_t f = 0; f < n; ++f) field[static_cast<size_t>(f)] = boundary(f);
        return field;
    }
    const DirichletSolver s = DirichletSolver::torus(t, absorbing);
    const std::vector<double> u = s.solve(boundary, source);
    const double res = s.max_residual(u, boundary, source);
    if (res > kResidualGate)
        throw SolverDiverged("harmonic_field: residual " + std::to_string(res));
    for (int64_t f = 0; f < n; ++f)
        field[static_cast<size_t>(f)] = absorbing[static_cast<size_t>(f)]
                                            ? boundary(f)
                                            : u[static_cast<size_t>(s.index_of(f))];
    return field;
}

std::vector<double> EquilibriumMeasure::normalized() const {
    std::vector<double> out(weights);
    if (total_mass <= 0) throw EmptySet("equilibrium measure with zero mass");
    for (double& w : out) w /= total_mass;
    return out;
}

namespace {

CapacityResult capacity_killball(int d, const std::vector<Point>& K, double kill_radius) {
    Point center{};
    for (const Point& p : K)
        for (int i = 0; i < d; ++i) center[static_cast<size_t>(i)] += p[static_cast<size_t>(i)];
    for (int i = 0; i < d; ++i)
        center[static_cast<size_t>(i)] = static_cast<int32_t>(
            std::llround(static_cast<double>(center[static_cast<size_t>(i)]) / static_cast<double>(K.size())));

    double max_d2 = 0;
    for (const Point& p : K)
        max_d2 = std::max(max_d2, static_cast<double>(lattice::zd_dist2(p, center, d)));
    const std::array<double, 3> radii = {kill_radius / 4, kill_radius / 2, kill_radius};
    if (radii[0] <= std::sqrt(max_d2) + 2)
        throw Error("capacity: kill_radius too small for the set diameter");

    std::vector<Point> sorted_k(K);
    std::sort(sorted_k.begin(), sorted_k.end(), PointLess{});
    auto in_k = [&](const Point& p) {
        return std::binary_search(sorted_k.begin(), sorted_k.end(), p, PointLess{});
    };

    // per-point escape values for each radius, then pointwise extrapolation
    std::vector<std::vector<double>> evals(K.size());
    for (double R : radii) {
        const int32_t ri = static_cast<int32_t>(std::floor(R)) + 1;
        Point lo = center, hi = center;
        for (int i = 0; i < d; ++i) {
            lo[static_cast<size_t>(i)] -= ri;
            hi[static_cast<size_t>(i)] += ri;
        }
        const double r2 = R * R;
        const DirichletSolver s = DirichletSolver::zd_window(d, lo, hi, [&](const Point& p) {
            return static_cast<double>(lattice::zd_dist2(p, center, d)) < r2 && !in_k(p);
        });
        // h = P_x[H_K < exit]; K carries data 1, the shell (and beyond) 0
        Point ext{};
        for (int i = 0; i < d; ++i) ext[static_cast<size_t>(i)] = hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)] + 1;
        auto point_of_flat = [&](int64_t f) {
            Point q{};
            for (int i = 0; i < d; ++i) {
                q[static_cast<size_t>(i)] = static_cast<int32_t>(f % ext[static_cast<size_t>(i)]) + lo[static_cast<size_t>(i)];
                f /= ext[static_cast<size_t>(i)];
            }
            return q;
        };
        auto flat_of_point = [&](const Point& q) -> int64_t {
            int64_t f = 0;
            for (int i = d - 1; i >= 0; --i) {
                const int64_t c = q[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)];
                if (c < 0 || c >= ext[static_cast<size_t>(i)]) return -1;
                f = f * ext[static_cast<size_t>(i)] + c;
            }
            return f;
        };
        auto bdata = [&](int64_t f) { return in_k(point_of_flat(f)) ? 1.0 : 0.0; };
        const std::vector<double> u = s.solve(bdata, [](int64_t) { return 0.0; });
        const double res = s.max_residual(u, bdata, [](int64_t) { return 0.0; });
        if (res > kResidualGate) throw SolverDiverged("capacity: residual " + std::to_string(res));

        for (size_t j = 0; j < K.size(); ++j) {
            double ret = 0;  // probability the first step re-enters K or later returns
            for (int i = 0; i < d; ++i) {
                for (int sgn = -1; sgn <= 1; sgn += 2) {
                    Point q = K[j];
                    q[static_cast<size_t>(i)] += sgn;
                    if (in_k(q)) {
                        ret += 1.0;
                    } else {
                        const int64_t f = flat_of_point(q);
                        const int64_t idx = f >= 0 ? s.index_of(f) : -1;
                        if (idx >= 0) ret += u[static_cast<size_t>(idx)];
                    }
                }
            }
            evals[j].push_back(1.0 - ret / (2 * d));
        }
    }

    CapacityResult out;
    std::vector<std::pair<double, double>> cap_rv;
    for (size_t r = 0; r < radii.size(); ++r) {
        double c = 0;
        for (size_t j = 0; j < K.size(); ++j) c += evals[j][r];
        cap_rv.push_back({radii[r], c});
    }
    for (size_t j = 0; j < K.size(); ++j) {
        std::vector<std::pair<double, double>> rv;
        for (size_t r = 0; r < radii.size(); ++r) rv.push_back({radii[r], evals[j][r]});
        out.e.weights.push_back(std::max(0.0, richardson(rv)));
    }
    out.cap = richardson(cap_rv);
    out.tolerance = richardson_tolerance(cap_rv);
    out.e.total_mass = 0;
    for (double w : out.e.weights) out.e.total_mass += w;
    return out;
}

CapacityResult capacity_mc(int d, const std::vector<Point>& K, double kill_radius, long replicas,
                           uint64_t seed) {
    Point center = K.front();
    std::vector<Point> sorted_k(K);
    std::sort(sorted_k.begin(), sorted_k.end(), PointLess{});
    auto in_k = [&](const Point& p) {
        return std::binary_search(sorted_k.begin(), sorted_k.end(), p, PointLess{});
    };
    const double r2 = kill_radius * kill_radius;
    CapacityResult out;
    double var_sum = 0;
    for (size_t j = 0; j < K.size(); ++j) {
        Philox rng(seed, static_cast<uint64_t>(j));
        long esc = 0;
        for (long rep = 0; rep < replicas; ++rep) {
            walk::ZdWalker w(d, K[j], Philox(seed, (static_cast<uint64_t>(j) << 32) | static_cast<uint64_t>(rep)));
            bool escaped = false;
            for (;;) {
                w.step();
                if (in_k(w.position())) break;
                if (static_cast<double>(lattice::zd_dist2(w.position(), center, d)) >= r2) {
                    escaped = true;
                    break;
                }
            }
            esc += escaped;
        }
        (void)rng;
        const double p = static_cast<double>(esc) / static_cast<double>(replicas);
        out.e.weights.push_back(p);
        var_sum += p * (1 - p) / static_cast<double>(replicas);
    }
    out.e.total_mass = 0;
    for (double w : out.e.weights) out.e.total_mass += w;
    out.cap = out.e.total_mass;
    out.tolerance = std::sqrt(var_sum);
    return out;
}

CapacityResult capacity_boundary(int d, const std::vector<Point>& K) {
    // inner boundary of K (entry points); interior points carry e_K = 0
    std::vector<Point> sorted_k(K);
    std::sort(sorted_k.begin(), sorted_k.end(), PointLess{});
    auto in_k = [&](const Point& p) {
        return std::binary_search(sorted_k.begin(), sorted_k.end(), p, PointLess{});
    };
    std::vector<size_t> bidx;
    for (size_t j = 0; j < sorted_k.size(); ++j) {
        bool bd = false;
        for (int i = 0; i < d && !bd; ++i)
            for (int sgn = -1; sgn <= 1 && !bd; sgn += 2) {
                Point q = sorted_k[j];
                q[static_cast<size_t>(i)] += sgn;
                bd = !in_k(q);
            }
        if (bd) bidx.push_back(j);
    }
    int norm = 0;
    for (size_t a : bidx)
        for (size_t b : bidx)
            for (int i = 0; i < d; ++i)
                norm = std::max(norm, std::abs(sorted_k[a][static_cast<size_t>(i)] - sorted_k[b][static_cast<size_t>(i)]));
    const ZdGreenTable& g = ZdGreenTable::get(d, std::max(norm, 1));
    const int m = static_cast<int>(bidx.size());
    Eigen::MatrixXd G(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            G(a, b) = g.at(sorted_k[bidx[static_cast<size_t>(a)]], sorted_k[bidx[static_cast<size_t>(b)]]);
    const Eigen::VectorXd e = G.llt().solve(Eigen::VectorXd::Ones(m));
    CapacityResult out;
    out.e.weights.assign(K.size(), 0.0);
    // report weights in the order of the original K list
    for (int a = 0; a < m; ++a) {
        const Point& p = sorted_k[bidx[static_cast<size_t>(a)]];
        for (size_t j = 0; j < K.size(); ++j)
            if (K[j] == p) out.e.weights[j] = e(a);
    }
    out.cap = e.sum();
    out.e.total_mass = out.cap;
    out.tolerance = (G * e - Eigen::VectorXd::Ones(m)).cwiseAbs().maxCoeff();
    return out;
}

}  // namespace

CapacityResult capacity(int d, const std::vector<Point>& K, ZdMode mode, double kill_radius,
                        long mc_replicas, uint64_t seed) {
    if (K.empty()) throw EmptySet("capacity of empty set");
    if (d < 3) throw Error("capacity: d must be >= 3");
    CapacityResult out;
    switch (mode) {
        case ZdMode::KillBall: out = capacity_killball(d, K, kill_radius); break;
        case ZdMode::Boundary: out = capacity_boundary(d, K); break;
        case ZdMode::Mc: out = capacity_mc(d, K, kill_radius, mc_replicas, seed); break;
    }
    out.e.support.clear();
    return out;
}

CapDeltaResult cap_delta(const GeometrySets& gs) {
    const Torus t = gs.geom.torus();
    // q = P_x[H_Delta < H_B] on the security zone
    const auto mask = absorbing_mask(t, gs.B, gs.Delta);
    const auto q = harmonic_field(
        t, mask, [&](int64_t f) { return gs.Delta.contains(f) ? 1.0 : 0.0; },
        [](int64_t) { return 0.0; });
    CapDeltaResult out;
    out.exit_prob.reserve(gs.B.boundary.size());
    const double inv_deg = 1.0 / (2 * gs.geom.d);
    for (int64_t f : gs.B.boundary) {
        const lattice::Point p = t.coords(f);
        double acc = 0;
        for (int i = 0; i < gs.geom.d; ++i)
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                lattice::Point r = p;
                r[static_cast<size_t>(i)] = t.wrap(r[static_cast<size_t>(i)] + sgn);
                const int64_t nf = t.flat(r);
                if (gs.Delta.contains(nf))
                    acc += 1.0;
                else if (!gs.B.contains(nf))
                    acc += q[static_cast<size_t>(nf)];
            }
        out.exit_prob.push_back(acc * inv_deg);
    }
    out.cap_delta = 0;
    for (double v : out.exit_prob) out.cap_delta += v;
    if (out.cap_delta <= 0) throw EmptySet("cap_delta: zero capacity");
    out.ebar = out.exit_prob;
    for (double& v : out.ebar) v /= out.cap_delta;
    return out;
}

Extrapolated green_function(int d, const Point& x, const Point& y, double kill_radius) {
    if (d < 3) throw Error("green_function: d must be >= 3");
    const std::array<double, 3> radii = {kill_radius / 4, kill_radius / 2, kill_radius};
    if (static_cast<double>(lattice::zd_dist2(x, y, d)) >= radii[0] * radii[0])
        throw Error("green_function: x outside the smallest kill ball around y");
    std::vector<std::pair<double, double>> rv;
    for (double R : radii) {
        const int32_t ri = static_cast<int32_t>(std::floor(R)) + 1;
        Point lo = y, hi = y;
        for (int i = 0; i < d; ++i) {
            lo[static_cast<size_t>(i)] -= ri;
            hi[static_cast<size_t>(i)] += ri;
        }
        const double r2 = R * R;
        const DirichletSolver s = DirichletSolver::zd_window(d, lo, hi, [&](const Point& p) {
            return static_cast<double>(lattice::zd_dist2(p, y, d)) < r2;
        });
        Point ext{};
        for (int i = 0; i < d; ++i) ext[static_cast<size_t>(i)] = hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)] + 1;
        auto flat_of_point = [&](const Point& q) {
            int64_t f = 0;
            for (int i = d - 1; i >= 0; --i) f = f * ext[static_cast<size_t>(i)] + (q[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)]);
            return f;
        };
        const int64_t fy = flat_of_point(y);
        const std::vector<double> u =
            s.solve([](int64_t) { return 0.0; },
                    [&](int64_t f) { return f == fy ? 1.0 : 0.0; });
        rv.push_back({R, u[static_cast<size_t>(s.index_of(flat_of_point(x)))]});
    }
    return {richardson(rv), richardson_tolerance(rv)};
}

HittingKernel hitting_kernel_torus(const Torus& t, const LatticeSet& target,
                                   const std::vector<int64_t>& sources, int threads,
                                   const std::vector<double>* site_weights,
                                   std::vector<double>* weighted_hit) {
    for (int64_t s : sources)
        if (target.contains(s)) throw Error("hitting_kernel_torus: sources must be disjoint from target");
    HittingKernel out;
    out.sources = sources;
    out.targets = target.boundary;
    const int64_t ns = static_cast<int64_t>(sources.size());
    const int64_t nt = static_cast<int64_t>(out.targets.size());
    out.prob.setZero(ns, nt);
    out.defect.setZero(ns);
    const auto mask = absorbing_mask(t, target);
    const double inv_deg = 1.0 / (2 * t.d);
    if (weighted_hit) weighted_hit->assign(static_cast<size_t>(nt), 0.0);

    const bool forward = nt <= ns || site_weights != nullptr;
    if (forward) {
        // one solve per target boundary point gives a full column
        std::vector<std::vector<double>> cols(static_cast<size_t>(nt));
        parallel_for(nt, threads, [&](int64_t j) {
            const int64_t y = out.targets[static_cast<size_t>(j)];
            cols[static_cast<size_t>(j)] = harmonic_field(
                t, mask, [&](int64_t f) { return f == y ? 1.0 : 0.0; }, [](int64_t) { return 0.0; });
        });
        for (int64_t j = 0; j < nt; ++j) {
            const auto& h = cols[static_cast<size_t>(j)];
            for (int64_t i = 0; i < ns; ++i) out.prob(i, j) = h[static_cast<size_t>(sources[static_cast<size_t>(i)])];
            if (site_weights) {
                double acc = 0;
                for (int64_t f = 0; f < t.size(); ++f) acc += (*site_weights)[static_cast<size_t>(f)] * h[static_cast<size_t>(f)];
                (*weighted_hit)[static_cast<size_t>(j)] = acc;
            }
        }
    } else {
        // one adjoint solve per source gives a full row
        const DirichletSolver solver = DirichletSolver::torus(t, mask);
        std::vector<std::vector<double>> rows(static_cast<size_t>(ns));
        parallel_for(ns, threads, [&](int64_t i) {
            const int64_t src = sources[static_cast<size_t>(i)];
            const std::vector<double> w = solver.solve(
                [](int64_t) { return 0.0; },
                [&](int64_t f) { return f == src ? 1.0 : 0.0; });
            std::vector<double> row(static_cast<size_t>(nt), 0.0);
            for (int64_t j = 0; j < nt; ++j) {
                const lattice::Point p = t.coords(out.targets[static_cast<size_t>(j)]);
                double acc = 0;
                for (int axis = 0; axis < t.d; ++axis)
                    for (int sgn = -1; sgn <= 1; sgn += 2) {
                        lattice::Point q = p;
                        q[static_cast<size_t>(axis)] = t.wrap(q[static_cast<size_t>(axis)] + sgn);
                        const int64_t idx = solver.index_of(t.flat(q));
                        if (idx >= 0) acc += w[static_cast<size_t>(idx)];
                    }
                row[static_cast<size_t>(j)] = acc * inv_deg;
            }
            rows[static_cast<size_t>(i)] = std::move(row);
        });
        for (int64_t i = 0; i < ns; ++i)
            for (int64_t j = 0; j < nt; ++j) out.prob(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    for (int64_t i = 0; i < ns; ++i) out.defect(i) = 1.0 - out.prob.row(i).sum();
    return out;
}

HittingKernel hitting_kernel_zd(int d, const Torus& box, const LatticeSet& target,
                                const std::vector<int64_t>& sources, const ZdGreenTable& g) {
    if (g.dim() != d) throw Error("hitting_kernel_zd: Green table dimension mismatch");
    for (int64_t s : sources)
        if (target.contains(s)) throw Error("hitting_kernel_zd: sources must be disjoint from target");
    HittingKernel out;
    out.sources = sources;
    out.targets = target.boundary;
    const int nt = static_cast<int>(out.targets.size());
    const int ns = static_cast<int>(sources.size());
    std::vector<Point> tp(static_cast<size_t>(nt));
    for (int j = 0; j < nt; ++j) tp[static_cast<size_t>(j)] = box.coords(out.targets[static_cast<size_t>(j)]);
    Eigen::MatrixXd G(nt, nt);
    for (int a = 0; a < nt; ++a)
        for (int b = 0; b < nt; ++b) G(a, b) = g.at(tp[static_cast<size_t>(a)], tp[static_cast<size_t>(b)]);
    const Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success)
        throw SolverDiverged("hitting_kernel_zd: Green matrix not positive definite");
    out.prob.setZero(ns, nt);
    out.defect.setZero(ns);
    Eigen::VectorXd rhs(nt);
    for (int i = 0; i < ns; ++i) {
        const Point sp = box.coords(sources[static_cast<size_t>(i)]);
        for (int j = 0; j < nt; ++j) rhs(j) = g.at(sp, tp[static_cast<size_t>(j)]);
        Eigen::VectorXd h = llt.solve(rhs);
        for (int j = 0; j < nt; ++j) out.prob(i, j) = std::max(0.0, h(j));
        out.defect(i) = 1.0 - out.prob.row(i).sum();
    }
    return out;
}

HittingKernel hitting_kernel_zd_killball(int d, const Torus& box, const LatticeSet& target,
                                         const std::vector<int64_t>& sources, double kill_radius,
                                         int threads) {
    HittingKernel out;
    out.sources = sources;
    out.targets = target.boundary;
    const int64_t nt = static_cast<int64_t>(out.targets.size());
    const int64_t ns = static_cast<int64_t>(sources.size());
    out.prob.setZero(ns, nt);
    out.defect.setZero(ns);
    Point center{};
    for (int i = 0; i < d; ++i) center[static_cast<size_t>(i)] = box.N / 2;
    const std::array<double, 2> radii = {kill_radius / 2, kill_radius};
    std::vector<Eigen::MatrixXd> per_radius(2, Eigen::MatrixXd::Zero(ns, nt));
    for (size_t r = 0; r < radii.size(); ++r) {
        const double R = radii[r];
        const int32_t ri = static_cast<int32_t>(std::floor(R)) + 1;
        Point lo = center, hi = center;
        for (int i = 0; i < d; ++i) {
            lo[static_cast<size_t>(i)] -= ri;
            hi[static_cast<size_t>(i)] += ri;
        }
        const double r2 = R * R;
        const DirichletSolver s = DirichletSolver::zd_window(d, lo, hi, [&](const Point& p) {
            return static_cast<double>(lattice::zd_dist2(p, center, d)) < r2 && !target.contains_zd(p);
        });
        Point ext{};
        for (int i = 0; i < d; ++i) ext[static_cast<size_t>(i)] = hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)] + 1;
        auto point_of_flat = [&](int64_t f) {
            Point q{};
            for (int i = 0; i < d; ++i) {
                q[static_cast<size_t>(i)] = static_cast<int32_t>(f % ext[static_cast<size_t>(i)]) + lo[static_cast<size_t>(i)];
                f /= ext[static_cast<size_t>(i)];
            }
            return q;
        };
        auto window_flat = [&](const Point& q) {
            int64_t f = 0;
            for (int i = d - 1; i >= 0; --i) f = f * ext[static_cast<size_t>(i)] + (q[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)]);
            return f;
        };
        parallel_for(nt, threads, [&](int64_t j) {
            const Point y = box.coords(out.targets[static_cast<size_t>(j)]);
            auto bdata = [&](int64_t f) { return point_of_flat(f) == y ? 1.0 : 0.0; };
            const std::vector<double> u = s.solve(bdata, [](int64_t) { return 0.0; });
            for (int64_t i = 0; i < ns; ++i) {
                const Point sp = box.coords(out.sources[static_cast<size_t>(i)]);
                per_radius[r](i, j) = u[static_cast<size_t>(s.index_of(window_flat(sp)))];
            }
        });
    }
    // linear extrapolation in 1/R
    for (int64_t i = 0; i < ns; ++i) {
        for (int64_t j = 0; j < nt; ++j) {
            std::vector<std::pair<double, double>> rv = {{radii[0], per_radius[0](i, j)},
                                                         {radii[1], per_radius[1](i, j)}};
            out.prob(i, j) = std::max(0.0, richardson(rv));
        }
        out.defect(i) = 1.0 - out.prob.row(i).sum();
    }
    return out;
}

HittingKernel hitting_kernel_mc(const Torus& box, const LatticeSet& target,
                                const std::vector<int64_t>& sources, long replicas_per_source,
                                uint64_t seed, double kill_radius, int threads) {
    HittingKernel out;
    out.sources = sources;
    out.targets = target.boundary;
    const int64_t nt = static_cast<int64_t>(out.targets.size());
    const int64_t ns = static_cast<int64_t>(sources.size());
    out.prob.setZero(ns, nt);
    out.stderr_.setZero(ns, nt);
    out.defect.setZero(ns);
    out.counts.assign(static_cast<size_t>(ns), std::vector<long>(static_cast<size_t>(nt), 0));
    out.untrusted_row.assign(static_cast<size_t>(ns), 0);
    std::vector<int64_t> target_col(static_cast<size_t>(box.size()), -1);
    for (int64_t j = 0; j < nt; ++j) target_col[static_cast<size_t>(out.targets[static_cast<size_t>(j)])] = j;
    Point center{};
    for (int i = 0; i < box.d; ++i) center[static_cast<size_t>(i)] = box.N / 2;
    const bool zd = kill_radius > 0;
    const double r2 = kill_radius * kill_radius;

    parallel_for(ns, threads, [&](int64_t i) {
        const Point start = box.coords(sources[static_cast<size_t>(i)]);
        long escapes = 0;
        for (long rep = 0; rep < replicas_per_source; ++rep) {
            Philox rng(seed, (static_cast<uint64_t>(i) << 32) | static_cast<uint64_t>(rep));
            if (zd) {
                walk::ZdWalker w(box.d, start, rng);
                for (;;) {
                    w.step();
                    if (target.contains_zd(w.position())) {
                        const int64_t j = target_col[static_cast<size_t>(box.flat(w.position()))];
                        if (j >= 0) ++out.counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
                        break;
                    }
                    if (static_cast<double>(lattice::zd_dist2(w.position(), center, box.d)) >= r2) {
                        ++escapes;
                        break;
                    }
                }
            } else {
                walk::TorusWalker w(box, start, rng);
                for (;;) {
                    w.step();
                    if (target.contains(w.flat())) {
                        const int64_t j = target_col[static_cast<size_t>(w.flat())];
                        if (j >= 0) ++out.counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
                        break;
                    }
                }
            }
        }
        bool untrusted = false;
        for (int64_t j = 0; j < nt; ++j) {
            const double p = static_cast<double>(out.counts[static_cast<size_t>(i)][static_cast<size_t>(j)]) /
                             static_cast<double>(replicas_per_source);
            out.prob(i, j) = p;
            out.stderr_(i, j) = std::sqrt(p * (1 - p) / static_cast<double>(replicas_per_source));
            const long c = out.counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
            if (c > 0 && c < 10) untrusted = true;
        }
        out.defect(i) = static_cast<double>(escapes) / static_cast<double>(replicas_per_source);
        out.untrusted_row[static_cast<size_t>(i)] = untrusted ? 1 : 0;
    });
    return out;
}

int green_norm_needed(const GeometrySets& gs) {
    const Torus t = gs.geom.torus();
    int32_t blo[lattice::kMaxDim], bhi[lattice::kMaxDim], dlo[lattice::kMaxDim], dhi[lattice::kMaxDim];
    for (int i = 0; i < t.d; ++i) {
        blo[i] = dlo[i] = t.N;
        bhi[i] = dhi[i] = 0;
    }
    for (int64_t f : gs.B.boundary) {
        const Point p = t.coords(f);
        for (int i = 0; i < t.d; ++i) {
            blo[i] = std::min(blo[i], p[static_cast<size_t>(i)]);
            bhi[i] = std::max(bhi[i], p[static_cast<size_t>(i)]);
        }
    }
    for (int64_t f : gs.Delta.boundary) {
        const Point p = t.coords(f);
        for (int i = 0; i < t.d; ++i) {
            dlo[i] = std::min(dlo[i], p[static_cast<size_t>(i)]);
            dhi[i] = std::max(dhi[i], p[static_cast<size_t>(i)]);
        }
    }
    int norm = 1;
    for (int i = 0; i < t.d; ++i) {
        norm = std::max(norm, bhi[i] - blo[i]);
        norm = std::max(norm, std::max(dhi[i] - blo[i], bhi[i] - dlo[i]));
    }
    return norm;
}

ZdBoxPotential zd_box_potential(const GeometrySets& gs, ZdGreenTable::Quality quality,
                                int threads) {
    (void)threads;
    const Torus t = gs.geom.torus();
    const ZdGreenTable& g = ZdGreenTable::get(gs.geom.d, green_norm_needed(gs), quality);
    const int nb = static_cast<int>(gs.B.boundary.size());
    std::vector<Point> bp(static_cast<size_t>(nb));
    for (int a = 0; a < nb; ++a) bp[static_cast<size_t>(a)] = t.coords(gs.B.boundary[static_cast<size_t>(a)]);
    Eigen::MatrixXd G(nb, nb);
    for (int a = 0; a < nb; ++a)
        for (int b = 0; b < nb; ++b) G(a, b) = g.at(bp[static_cast<size_t>(a)], bp[static_cast<size_t>(b)]);
    const Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success)
        throw SolverDiverged("zd_box_potential: Green matrix not positive definite");

    ZdBoxPotential out;
    const Eigen::VectorXd e = llt.solve(Eigen::VectorXd::Ones(nb));
    out.e_B.support = gs.B.boundary;
    out.e_B.weights.assign(e.data(), e.data() + nb);
    out.cap_B = e.sum();
    out.e_B.total_mass = out.cap_B;

    const int nd = static_cast<int>(gs.Delta.boundary.size());
    out.hit.setZero(nd, nb);
    out.escape.setZero(nd);
    Eigen::VectorXd rhs(nb);
    for (int i = 0; i < nd; ++i) {
        const Point sp = t.coords(gs.Delta.boundary[static_cast<size_t>(i)]);
        for (int j = 0; j < nb; ++j) rhs(j) = g.at(sp, bp[static_cast<size_t>(j)]);
        const Eigen::VectorXd h = llt.solve(rhs);
        for (int j = 0; j < nb; ++j) out.hit(i, j) = std::max(0.0, h(j));
        out.escape(i) = 1.0 - out.hit.row(i).sum();
    }
    return out;
}

}  // namespace rwi::potential
