#include "rwi/solver.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numeric>
#include <string>

#include "rwi/common.hpp"

namespace rwi::potential {

namespace {

// Deterministic dot product: fixed-size blocks summed in order, so the
// result does not depend on how work is scheduled.
double dot(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    double total = 0;
    for (size_t blk = 0; blk < n; blk += 4096) {
        const size_t end = std::min(n, blk + 4096);
        double s = 0;
        for (size_t i = blk; i < end; ++i) s += a[i] * b[i];
        total += s;
    }
    return total;
}

}  // namespace

void DirichletSolver::build_neighbors(const std::function<int64_t(int64_t, int)>& nbr_of) {
    const int deg = 2 * d_;
    const int64_t m = unknowns();
    nbr_.assign(static_cast<size_t>(m) * deg, -1);
    nbr_flat_.assign(static_cast<size_t>(m) * deg, -1);
    for (int64_t i = 0; i < m; ++i) {
        const int64_t f = flats_[static_cast<size_t>(i)];
        for (int k = 0; k < deg; ++k) {
            const int64_t nf = nbr_of(f, k);
            nbr_flat_[static_cast<size_t>(i * deg + k)] = nf;
            nbr_[static_cast<size_t>(i * deg + k)] = nf >= 0 ? index_of(nf) : -1;
        }
    }
}

DirichletSolver DirichletSolver::torus(const Torus& t, const std::vector<uint8_t>& absorbing) {
    DirichletSolver s;
    s.d_ = t.d;
    const int64_t n = t.size();
    if (static_cast<int64_t>(absorbing.size()) != n)
        throw Error("DirichletSolver::torus: absorbing mask size mismatch");
    s.index_.assign(static_cast<size_t>(n), -1);
    for (int64_t f = 0; f < n; ++f) {
        if (!absorbing[static_cast<size_t>(f)]) {
            s.index_[static_cast<size_t>(f)] = static_cast<int64_t>(s.flats_.size());
            s.flats_.push_back(f);
        }
    }
    if (s.flats_.empty()) throw EmptySet("DirichletSolver::torus: no unknowns");
    if (s.unknowns() > 8'000'000)
        throw TooLarge("DirichletSolver::torus: " + std::to_string(s.unknowns()) + " unknowns");
    s.build_neighbors([t](int64_t f, int k) {
        const int axis = k >> 1;
        const int32_t sign = (k & 1) ? 1 : -1;
        lattice::Point p = t.coords(f);
        p[static_cast<size_t>(axis)] = t.wrap(p[static_cast<size_t>(axis)] + sign);
        return t.flat(p);
    });
    return s;
}

DirichletSolver DirichletSolver::zd_window(int d, const Point& lo, const Point& hi,
                                           const std::function<bool(const Point&)>& keep) {
    DirichletSolver s;
    s.d_ = d;
    int64_t n = 1;
    Point ext{};
    for (int i = 0; i < d; ++i) {
        ext[static_cast<size_t>(i)] = hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)] + 1;
        if (ext[static_cast<size_t>(i)] <= 0) throw Error("zd_window: empty window");
        n *= ext[static_cast<size_t>(i)];
    }
    if (n > 48'000'000) throw TooLarge("zd_window: window has " + std::to_string(n) + " sites");
    s.index_.assign(static_cast<size_t>(n), -1);
    Point p = lo;
    for (int64_t f = 0; f < n; ++f) {
        if (keep(p)) {
            s.index_[static_cast<size_t>(f)] = static_cast<int64_t>(s.flats_.size());
            s.flats_.push_back(f);
        }
        for (int i = 0; i < d; ++i) {
            if (++p[static_cast<size_t>(i)] <= hi[static_cast<size_t>(i)]) break;
            p[static_cast<size_t>(i)] = lo[static_cast<size_t>(i)];
        }
    }
    if (s.flats_.empty()) throw EmptySet("zd_window: no unknowns");
    if (s.unknowns() > 8'000'000)
        throw TooLarge("zd_window: " + std::to_string(s.unknowns()) + " unknowns");
    s.build_neighbors([d, lo, ext](int64_t f, int k) -> int64_t {
        Point q{};
        int64_t rem = f;
        for (int i = 0; i < d; ++i) {
            q[static_cast<size_t>(i)] = static_cast<int32_t>(rem % ext[static_cast<size_t>(i)]);
            rem /= ext[static_cast<size_t>(i)];
        }
        const int axis = k >> 1;
        q[static_cast<size_t>(axis)] += (k & 1) ? 1 : -1;
        if (q[static_cast<size_t>(axis)] < 0 || q[static_cast<size_t>(axis)] >= ext[static_cast<size_t>(axis)]) return -1;
        int64_t nf = 0;
        for (int i = d - 1; i >= 0; --i) nf = nf * ext[static_cast<size_t>(i)] + q[static_cast<size_t>(i)];
        return nf;
    });
    return s;
}

void DirichletSolver::for_each_boundary_pair(
    const std::function<void(int64_t, int64_t)>& fn) const {
    const int deg = 2 * d_;
    const int64_t m = unknowns();
    for (int64_t i = 0; i < m; ++i)
        for (int k = 0; k < deg; ++k)
            if (nbr_[static_cast<size_t>(i * deg + k)] < 0) fn(i, nbr_flat_[static_cast<size_t>(i * deg + k)]);
}

std::vector<double> DirichletSolver::solve(const std::function<double(int64_t)>& boundary,
                                           const std::function<double(int64_t)>& source,
                                           double tol, int64_t max_iters) const {
    const int64_t m = unknowns();
    const int deg = 2 * d_;
    const double inv_deg = 1.0 / deg;

    std::vector<double> rhs(static_cast<size_t>(m));
    for (int64_t i = 0; i < m; ++i) rhs[static_cast<size_t>(i)] = source(flats_[static_cast<size_t>(i)]);
    for_each_boundary_pair([&](int64_t i, int64_t nf) {
        // nf == -1 encodes "outside the window": absorbing with value 0
        if (nf >= 0) rhs[static_cast<size_t>(i)] += inv_deg * boundary(nf);
    });

    auto matvec = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (int64_t i = 0; i < m; ++i) {
            double acc = 0;
            const int64_t* nb = &nbr_[static_cast<size_t>(i * deg)];
            for (int k = 0; k < deg; ++k)
                if (nb[k] >= 0) acc += x[static_cast<size_t>(nb[k])];
            y[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] - inv_deg * acc;
        }
    };

    std::vector<double> x(static_cast<size_t>(m), 0.0), r = rhs, pdir = rhs,
        ap(static_cast<size_t>(m));
    double rr = dot(r, r);
    const double rhs_norm = std::sqrt(rr);
    if (rhs_norm == 0) return x;
    const double stop = tol * tol * rhs_norm * rhs_norm;
    if (max_iters < 0) max_iters = 40 * static_cast<int64_t>(std::ceil(std::cbrt(static_cast<double>(m)))) + 2000;
    for (int64_t it = 0; it < max_iters; ++it) {
        matvec(pdir, ap);
        const double pap = dot(pdir, ap);
        if (pap <= 0) throw SolverDiverged("CG: operator not positive definite on search direction");
        const double alpha = rr / pap;
        for (int64_t i = 0; i < m; ++i) x[static_cast<size_t>(i)] += alpha * pdir[static_cast<size_t>(i)];
        for (int64_t i = 0; i < m; ++i) r[static_cast<size_t>(i)] -= alpha * ap[static_cast<size_t>(i)];
        const double rr_new = dot(r, r);
        if (rr_new <= stop) return x;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (int64_t i = 0; i < m; ++i)
            pdir[static_cast<size_t>(i)] = r[static_cast<size_t>(i)] + beta * pdir[static_cast<size_t>(i)];
    }
    throw NotConverged("CG: residual " + std::to_string(std::sqrt(rr) / rhs_norm) +
                       " after " + std::to_string(max_iters) + " iterations");
}

double DirichletSolver::max_residual(const std::vector<double>& u,
                                     const std::function<double(int64_t)>& boundary,
                                     const std::function<double(int64_t)>& source) const {
    const int64_t m = unknowns();
    const int deg = 2 * d_;
    const double inv_deg = 1.0 / deg;
    double worst = 0;
    for (int64_t i = 0; i < m; ++i) {
        double acc = 0;
        for (int k = 0; k < deg; ++k) {
            const int64_t nb = nbr_[static_cast<size_t>(i * deg + k)];
            if (nb >= 0)
                acc += u[static_cast<size_t>(nb)];
            else {
                const int64_t nf = nbr_flat_[static_cast<size_t>(i * deg + k)];
                if (nf >= 0) acc += boundary(nf);
            }
        }
        const double res = u[static_cast<size_t>(i)] - inv_deg * acc - source(flats_[static_cast<size_t>(i)]);
        worst = std::max(worst, std::abs(res));
    }
    return worst;
}

double zd_green_asymptotic_coeff(int d) {
    return d * std::tgamma(d / 2.0 - 1.0) / (2.0 * std::pow(M_PI, d / 2.0));
}

std::vector<double> zd_green_cube_solve(int d, int M, int out_norm) {
    if (d < 3 || d > lattice::kMaxDim) throw Error("zd_green_cube_solve: unsupported dimension");
    if (out_norm > M - 2) throw Error("zd_green_cube_solve: out_norm too close to cube size");
    const int S = 2 * M - 1;  // interior side; shell |y|_inf = M carries data
    int64_t total = 1;
    for (int i = 0; i < d; ++i) total *= S;
    if (total > 60'000'000) throw TooLarge("zd_green_cube_solve: cube too large");

    const double cd = zd_green_asymptotic_coeff(d);
    auto gdata = [&](const Point& y) {
        return cd * std::pow(static_cast<double>(lattice::zd_dist2(y, Point{}, d)), -(d - 2) / 2.0);
    };

    std::vector<double> b(static_cast<size_t>(total), 0.0);
    // coordinates run over [-(M-1), M-1]; flat index has axis 0 fastest
    auto flat_of = [&](const Point& p) {
        int64_t f = 0;
        for (int i = d - 1; i >= 0; --i) f = f * S + (p[static_cast<size_t>(i)] + M - 1);
        return f;
    };
    b[static_cast<size_t>(flat_of(Point{}))] = 1.0;

    // boundary-data contribution: interior sites one step from the shell
    const double inv_deg = 1.0 / (2 * d);
    Point p{};
    for (int i = 0; i < d; ++i) p[static_cast<size_t>(i)] = -(M - 1);
    for (int64_t f = 0; f < total; ++f) {
        bool edge = false;
        for (int i = 0; i < d; ++i)
            if (std::abs(p[static_cast<size_t>(i)]) == M - 1) edge = true;
        if (edge) {
            double acc = 0;
            for (int i = 0; i < d; ++i) {
                for (int s = -1; s <= 1; s += 2) {
                    Point q = p;
                    q[static_cast<size_t>(i)] += s;
                    if (std::abs(q[static_cast<size_t>(i)]) == M) acc += gdata(q);
                }
            }
            b[static_cast<size_t>(f)] += inv_deg * acc;
        }
        for (int i = 0; i < d; ++i) {
            if (++p[static_cast<size_t>(i)] <= M - 1) break;
            p[static_cast<size_t>(i)] = -(M - 1);
        }
    }

    // DST-I diagonalization of the Dirichlet cube
    {
        std::vector<int> dims(static_cast<size_t>(d), S);
        std::vector<fftw_r2r_kind> kinds(static_cast<size_t>(d), FFTW_RODFT00);
        fftw_plan plan = fftw_plan_r2r(d, dims.data(), b.data(), b.data(), kinds.data(),
                                       FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    {
        // eigenvalue of I - P at mode k is 1 - (1/d) sum_j cos(pi k_j / (S+1))
        std::vector<double> cosv(static_cast<size_t>(S));
        for (int k = 0; k < S; ++k) cosv[static_cast<size_t>(k)] = std::cos(M_PI * (k + 1) / (S + 1));
        const double norm = std::pow(2.0 * (S + 1), -d);  // RODFT00 applied twice scales by (2(S+1))^d
        std::array<int, lattice::kMaxDim> k{};
        for (int64_t f = 0; f < total; ++f) {
            double csum = 0;
            for (int i = 0; i < d; ++i) csum += cosv[static_cast<size_t>(k[static_cast<size_t>(i)])];
            b[static_cast<size_t>(f)] *= norm / (1.0 - csum / d);
            for (int i = 0; i < d; ++i) {
                if (++k[static_cast<size_t>(i)] < S) break;
                k[static_cast<size_t>(i)] = 0;
            }
        }
    }
    {
        std::vector<int> dims(static_cast<size_t>(d), S);
        std::vector<fftw_r2r_kind> kinds(static_cast<size_t>(d), FFTW_RODFT00);
        fftw_plan plan = fftw_plan_r2r(d, dims.data(), b.data(), b.data(), kinds.data(),
                                       FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    // extract the [-out_norm, out_norm]^d block
    const int K = out_norm, OS = 2 * K + 1;
    int64_t osz = 1;
    for (int i = 0; i < d; ++i) osz *= OS;
    std::vector<double> out(static_cast<size_t>(osz));
    Point q{};
    for (int i = 0; i < d; ++i) q[static_cast<size_t>(i)] = -K;
    for (int64_t of = 0; of < osz; ++of) {
        out[static_cast<size_t>(of)] = b[static_cast<size_t>(flat_of(q))];
        for (int i = 0; i < d; ++i) {
            if (++q[static_cast<size_t>(i)] <= K) break;
            q[static_cast<size_t>(i)] = -K;
        }
    }
    return out;
}

ZdGreenTable::ZdGreenTable(int d, int max_norm, Quality q) : d_(d), k_(max_norm), side_(2 * max_norm + 1) {
    const std::array<int, 3> Ms = (q == Quality::Precise) ? std::array<int, 3>{96, 128, 160}
                                                          : std::array<int, 3>{48, 64, 80};
    if (max_norm > Ms[0] - 2) throw Error("ZdGreenTable: max_norm too large for cube ladder");
    std::array<std::vector<double>, 3> sol;
    for (int j = 0; j < 3; ++j) sol[static_cast<size_t>(j)] = zd_green_cube_solve(d, Ms[static_cast<size_t>(j)], max_norm);
    // boundary-data error decays like M^-3 with an M^-5 correction; fit
    // g + a M^-3 + b M^-5 through the three cube sizes pointwise
    double A[3][3];
    for (int j = 0; j < 3; ++j) {
        const double m = Ms[static_cast<size_t>(j)];
        A[j][0] = 1.0;
        A[j][1] = std::pow(m, -3.0);
        A[j][2] = std::pow(m, -5.0);
    }
    // first row of inverse(A) gives the extrapolation weights
    const double det = A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
                       A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
                       A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
    const double w0 = (A[1][1] * A[2][2] - A[1][2] * A[2][1]) / det;
    const double w1 = -(A[0][1] * A[2][2] - A[0][2] * A[2][1]) / det;
    const double w2 = (A[0][1] * A[1][2] - A[0][2] * A[1][1]) / det;
    table_.resize(sol[0].size());
    for (size_t i = 0; i < table_.size(); ++i)
        table_[i] = w0 * sol[0][i] + w1 * sol[1][i] + w2 * sol[2][i];
}

double ZdGreenTable::operator()(const Point& dx) const {
    int64_t f = 0;
    for (int i = d_ - 1; i >= 0; --i) {
        const int32_t c = dx[static_cast<size_t>(i)];
        if (c < -k_ || c > k_)
            throw Error("ZdGreenTable: offset " + std::to_string(c) + " outside max_norm " + std::to_string(k_));
        f = f * side_ + (c + k_);
    }
    return table_[static_cast<size_t>(f)];
}

const ZdGreenTable& ZdGreenTable::get(int d, int max_norm, Quality q) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<ZdGreenTable>> cache;
    std::lock_guard<std::mutex> lk(mu);
    auto& slot = cache[{d, q == Quality::Precise ? 1 : 0}];
    if (!slot || slot->max_norm() < max_norm)
        slot = std::unique_ptr<ZdGreenTable>(new ZdGreenTable(d, max_norm, q));
    return *slot;
}

}  // namespace rwi::potential
