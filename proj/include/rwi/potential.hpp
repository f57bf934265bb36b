#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "rwi/lattice.hpp"
#include "rwi/rng.hpp"
#include "rwi/solver.hpp"

namespace rwi::potential {

using lattice::GeometrySets;
using lattice::LatticeSet;
using lattice::Point;
using lattice::Torus;

// ---- generic Dirichlet oracle -------------------------------------------

// Solves the discrete Dirichlet problem on the torus and returns the full
// field (boundary data on absorbing sites, solution elsewhere). This is the
// brute-force oracle behind every exact quantity; residual verified below
// 1e-10 in max norm.
std::vector<double> harmonic_field(const Torus& t, const std::vector<uint8_t>& absorbing,
                                   const std::function<double(int64_t)>& boundary,
                                   const std::function<double(int64_t)>& source);

std::vector<uint8_t> absorbing_mask(const Torus& t, const LatticeSet& set);
std::vector<uint8_t> absorbing_mask(const Torus& t, const LatticeSet& a, const LatticeSet& b);

// ---- capacities and equilibrium measures --------------------------------

struct EquilibriumMeasure {
    std::vector<int64_t> support;  // flat ids within the torus box, ascending
    std::vector<double> weights;   // e_K, unnormalized
    double total_mass = 0;         // cap(K)

    std::vector<double> normalized() const;  // bar e_K, sums to 1
};

enum class ZdMode { KillBall, Boundary, Mc };

struct CapacityResult {
    double cap = 0;
    EquilibriumMeasure e;
    double tolerance = 0;  // extrapolation spread (KillBall) or solver-level bound
};

// Capacity and equilibrium measure of a finite K in Z^d (d >= 3).
// KillBall: Dirichlet solves on balls of radius {R/4, R/2, R} with Richardson
// extrapolation in 1/R. Boundary: Green-matrix identity sum_z e(z) g(z,x) = 1.
// Mc: escape frequencies to the kill sphere (stderr reported via tolerance).
CapacityResult capacity(int d, const std::vector<Point>& K, ZdMode mode, double kill_radius,
                        long mc_replicas = 20000, uint64_t seed = 1);

struct CapDeltaResult {
    double cap_delta = 0;                // cap_Delta(B) = sum_{x in dB} P_x[tilde H_B > H_Delta]
    std::vector<double> ebar;            // bar e_B^Delta over gs.B.boundary order, sums to 1
    std::vector<double> exit_prob;       // P_x[tilde H_B > H_Delta] per boundary point
};

CapDeltaResult cap_delta(const GeometrySets& gs);

// ---- Green function -------------------------------------------------------

struct Extrapolated {
    double value = 0;
    double tolerance = 0;
};

// g(x,y) on Z^d by kill-ball truncation at radii {R/4, R/2, R} plus
// Richardson extrapolation (the spec'd production route; the spectral
// ZdGreenTable is the high-accuracy engine used for kernel assembly).
Extrapolated green_function(int d, const Point& x, const Point& y, double kill_radius);

// ---- hitting kernels ------------------------------------------------------

struct HittingKernel {
    std::vector<int64_t> sources;  // flat ids
    std::vector<int64_t> targets;  // target's inner boundary, ascending
    Eigen::MatrixXd prob;          // P_x[X_{H_T} = y], rows = sources
    Eigen::VectorXd defect;        // P_x[H_T = infinity] (zd) / residual mass (torus, ~0)
    Eigen::MatrixXd stderr_;       // MC mode only (0x0 otherwise)
    std::vector<std::vector<long>> counts;  // MC mode only
    std::vector<uint8_t> untrusted_row;     // MC rows with any cell below 10 observations
};

// Exact torus rows via linear solves. Picks per-target forward solves or
// per-source adjoint solves, whichever needs fewer systems. When
// site_weights is given (a measure over all torus sites), weighted_hit[j] =
// sum_x w(x) P_x[X_{H_T} = y_j] comes back too (used for nu_Y).
HittingKernel hitting_kernel_torus(const Torus& t, const LatticeSet& target,
                                   const std::vector<int64_t>& sources, int threads = 1,
                                   const std::vector<double>* site_weights = nullptr,
                                   std::vector<double>* weighted_hit = nullptr);

// Exact Z^d rows against a bounded target (viewed inside the torus box),
// from the free-lattice Green function: solve h_x^T G = g(x,.) on the
// target boundary. defect = escape probability.
HittingKernel hitting_kernel_zd(int d, const Torus& box, const LatticeSet& target,
                                const std::vector<int64_t>& sources, const ZdGreenTable& g);

// Same quantity by kill-ball forward solves with extrapolation; O(|dT|)
// large solves, only sensible for small boundaries (cross-checks).
HittingKernel hitting_kernel_zd_killball(int d, const Torus& box, const LatticeSet& target,
                                         const std::vector<int64_t>& sources, double kill_radius,
                                         int threads = 1);

// Monte Carlo rows (torus when kill_radius <= 0, else Z^d with kill ball).
HittingKernel hitting_kernel_mc(const Torus& box, const LatticeSet& target,
                                const std::vector<int64_t>& sources, long replicas_per_source,
                                uint64_t seed, double kill_radius, int threads = 1);

// Z^d equilibrium package for the rounded box, boundary route.
struct ZdBoxPotential {
    EquilibriumMeasure e_B;              // on gs.B.boundary
    double cap_B = 0;
    Eigen::MatrixXd hit;                 // |dDelta| x |dB|: P^{Zd}_x[X_{H_B} = y]
    Eigen::VectorXd escape;              // |dDelta|: P^{Zd}_x[H_B = infinity]
};

ZdBoxPotential zd_box_potential(const GeometrySets& gs, ZdGreenTable::Quality quality,
                                int threads = 1);

// Smallest Green-table max-norm that covers all pairwise offsets needed by
// zd_box_potential for this geometry.
int green_norm_needed(const GeometrySets& gs);

}  // namespace rwi::potential
