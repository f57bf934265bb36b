#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "rwi/lattice.hpp"

namespace rwi::potential {

using lattice::Point;
using lattice::Torus;

// Discrete Dirichlet solver for (I - P)u = f on a masked nearest-neighbor
// domain, u = g on absorbing sites. P is the SRW kernel; the restricted
// operator is symmetric positive definite, solved matrix-free with CG.
//
// Two topologies share the implementation: the torus (all N^d sites, wrap
// adjacency) and a Z^d window (sites outside the window are absorbing).
class DirichletSolver {
public:
    // Torus domain; `absorbing` marks sites (flat-indexed) where u is given.
    static DirichletSolver torus(const Torus& t, const std::vector<uint8_t>& absorbing);

    // Z^d window [lo, hi]^d per axis; `keep(p)` selects the non-absorbing
    // sites inside the window; anything else (including all of Z^d outside
    // the window) is absorbing.
    static DirichletSolver zd_window(int d, const Point& lo, const Point& hi,
                                     const std::function<bool(const Point&)>& keep);

    int64_t unknowns() const { return static_cast<int64_t>(flats_.size()); }

    // boundary(site flat/point id) is queried on absorbing neighbors of
    // unknowns; source on unknowns. Returns the solution on unknowns,
    // addressable via index_of().
    std::vector<double> solve(const std::function<double(int64_t)>& boundary,
                              const std::function<double(int64_t)>& source, double tol = 1e-12,
                              int64_t max_iters = -1) const;

    // Compact index of a site, -1 if absorbing / outside.
    int64_t index_of(int64_t flat) const {
        return (flat >= 0 && flat < static_cast<int64_t>(index_.size())) ? index_[static_cast<size_t>(flat)] : -1;
    }
    int64_t flat_of(int64_t idx) const { return flats_[static_cast<size_t>(idx)]; }

    // Enumerate the (site, absorbing-neighbor) pairs; site is passed by
    // compact index, neighbor by flat id.
    void for_each_boundary_pair(const std::function<void(int64_t idx, int64_t nbr_flat)>& fn) const;

    int degree() const { return 2 * d_; }
    double max_residual(const std::vector<double>& u,
                        const std::function<double(int64_t)>& boundary,
                        const std::function<double(int64_t)>& source) const;

private:
    int d_ = 3;
    std::vector<int64_t> flats_;       // compact -> flat
    std::vector<int64_t> index_;       // flat -> compact (-1 absorbing)
    std::vector<int64_t> nbr_;         // 2d entries per unknown; -1 => absorbing neighbor
    std::vector<int64_t> nbr_flat_;    // flat id of each neighbor slot (for boundary data)
    void build_neighbors(const std::function<int64_t(int64_t, int)>& nbr_of);
};

// Free-lattice Green function g(0,x) of the SRW on Z^d (d >= 3), tabulated
// once per process. Values come from a direct DST-I Poisson solve on a cube
// with asymptotic boundary data, extrapolated over three cube sizes; worst
// case absolute error is ~1e-10 for d=3 at the Precise setting.
class ZdGreenTable {
public:
    enum class Quality { Fast, Precise };

    static const ZdGreenTable& get(int d, int max_norm, Quality q = Quality::Precise);

    double operator()(const Point& dx) const;
    double at(const Point& a, const Point& b) const {
        Point dx{};
        for (int i = 0; i < d_; ++i) dx[static_cast<size_t>(i)] = a[static_cast<size_t>(i)] - b[static_cast<size_t>(i)];
        return (*this)(dx);
    }

    int max_norm() const { return k_; }
    int dim() const { return d_; }

private:
    ZdGreenTable(int d, int max_norm, Quality q);
    int d_, k_;
    int side_;
    std::vector<double> table_;  // cube [-k, k]^d
};

// Solves (I - P)u = delta_0 on the cube [-M, M]^d with u = C_d |y|^{2-d} on
// the boundary shell, via FFTW DST-I. Returns u on |x|_inf <= out_norm.
std::vector<double> zd_green_cube_solve(int d, int M, int out_norm);

// Continuum coefficient C_d with g(x) ~ C_d |x|^{2-d}.
double zd_green_asymptotic_coeff(int d);

}  // namespace rwi::potential
