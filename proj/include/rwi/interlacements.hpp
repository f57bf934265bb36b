#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rwi/lattice.hpp"
#include "rwi/potential.hpp"
#include "rwi/rng.hpp"

namespace rwi::ri {

using lattice::GeometrySets;
using lattice::Point;
using lattice::Torus;

// One interlacement trajectory from a point of dB, decomposed into its
// excursions between B and Delta. The walk runs on Z^d and is truncated on
// first exit from the kill ball around the box center (standing in for
// escape to infinity).
struct TrajectoryResult {
    std::vector<std::pair<int32_t, int32_t>> pairs;  // (b index, d index) per excursion
    std::vector<std::vector<Point>> bodies;          // captured excursion paths (optional)
    bool truncated = false;                          // step cap hit (not the kill ball)
};

TrajectoryResult simulate_trajectory(const GeometrySets& gs, const std::vector<int32_t>& b_of_flat,
                                     const std::vector<int32_t>& d_of_flat, int64_t start_flat,
                                     double kill_radius, bool capture_bodies, Philox& rng,
                                     int64_t max_steps = 500'000'000);

// Vacant set of random interlacements intersected with a finite K, as a
// process in the level u: J ~ Poisson(u cap(K)) trajectories started from
// the normalized equilibrium measure.
struct VacantSample {
    std::vector<int64_t> K;                  // base set (torus-box flats), ascending
    std::vector<double> levels;              // ascending u levels
    std::vector<std::vector<uint8_t>> vacant;  // per level, aligned with K
    std::vector<long> trajectory_count;      // J_u per level
    double cap_K = 0;
};

VacantSample sample_vacant(const Torus& box, const std::vector<int64_t>& K,
                           const std::vector<double>& levels, double kill_radius, uint64_t seed,
                           potential::ZdMode cap_mode = potential::ZdMode::Boundary);

// Full excursion stream of the interlacement process up to level u_max:
// the Z chain realization with per-trajectory counts and arrival levels.
struct ExcursionStream {
    std::vector<std::pair<int32_t, int32_t>> pairs;  // concatenated excursion endpoints
    std::vector<long> t_per_traj;                    // T^(i)
    std::vector<double> arrivals;                    // Poisson arrival level of each trajectory
    std::vector<std::vector<Point>> bodies;          // captured iff requested
    bool truncated = false;
};

ExcursionStream sample_excursion_stream(const GeometrySets& gs,
                                        const std::vector<int32_t>& b_of_flat,
                                        const std::vector<int32_t>& d_of_flat,
                                        const std::vector<double>& ebar_B, double cap_B,
                                        double u_max, double kill_radius, uint64_t seed,
                                        bool capture_bodies = false);

// Run-length-encoded dump of a vacant indicator over the torus box, with a
// JSON header line: {"d":..,"N":..,"u":..,"seed":..}. Runs alternate
// non-vacant/vacant starting from non-vacant.
void dump_vacant_rle(const std::string& path, const Torus& box, const std::vector<int64_t>& K,
                     const std::vector<uint8_t>& vacant, double u, uint64_t seed);

}  // namespace rwi::ri
