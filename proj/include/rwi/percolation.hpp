#pragma once

#include <cstdint>
#include <vector>

#include "rwi/lattice.hpp"

namespace rwi::perc {

using lattice::Point;
using lattice::Torus;

// Connected components of a site indicator under nearest-neighbor adjacency
// (wrapped on the torus). Union-find with path compression.
struct ClusterStats {
    std::vector<int32_t> comp;       // per site: component id, -1 where not set
    std::vector<int64_t> comp_size;  // per component id
    int64_t n_components = 0;
    int64_t largest = 0;
    int32_t origin_comp = -1;        // component of flat index 0, -1 if not vacant
};

ClusterStats components(const std::vector<uint8_t>& indicator, const Torus& box,
                        bool torus_topology);

// Euclidean diameter of a point set in the wrapped (torus) or plain metric.
// Exact all-pairs scan for <= 10^4 points; otherwise a bounding-window
// sandwich decides, falling back to the exact scan when inconclusive.
double euclid_diameter(const std::vector<Point>& pts, const Torus& box, bool torus_topology);

// Decides [diam >= threshold] with the same sandwich strategy without
// always paying for the exact diameter.
bool diameter_at_least(const std::vector<Point>& pts, const Torus& box, bool torus_topology,
                       double threshold);

struct EtaHatRow {
    double u = 0;
    double eta_hat = 0;
    double stderr_ = 0;
    double mean_largest = 0;  // mean largest-component size
};

// eta_N(u) over a shared walk path per replica (nested vacant sets): one
// uniform-start walk of floor(max(u) N^d) steps, first-visit times recorded,
// every grid point evaluated from the same pass. u = 0 rows are the full
// torus by convention.
std::vector<EtaHatRow> eta_hat(int d, int32_t N, const std::vector<double>& u_grid, long replicas,
                               uint64_t seed, int threads = 1);

// Per-replica diameter-event indicators (pathwise rows), used for the
// monotonicity assertions; row r holds the event for each u in the grid.
std::vector<std::vector<uint8_t>> eta_hat_events(int d, int32_t N,
                                                 const std::vector<double>& u_grid, long replicas,
                                                 uint64_t seed, int threads = 1,
                                                 std::vector<std::vector<int64_t>>* largest_out = nullptr);

}  // namespace rwi::perc
