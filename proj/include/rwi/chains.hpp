#pragma once

#include <Eigen/Dense>
#include <memory>
#include <unordered_map>
#include <vector>

#include "rwi/lattice.hpp"
#include "rwi/potential.hpp"
#include "rwi/slt.hpp"

namespace rwi::chains {

using lattice::GeometrySets;

// Sigma = dB x dDelta as an indexed product; state = b * nd + dd.
struct ExcursionSpace {
    GeometrySets gs;
    std::vector<int64_t> dB, dD;          // boundary flats, ascending
    std::vector<int32_t> b_of_flat, d_of_flat;  // torus flat -> local index, -1 elsewhere

    int nb() const { return static_cast<int>(dB.size()); }
    int nd() const { return static_cast<int>(dD.size()); }
    int64_t states() const { return static_cast<int64_t>(nb()) * nd(); }
    int state_of(int b, int dd) const { return b * nd() + dd; }
    int b_of_state(int s) const { return s / nd(); }
    int d_of_state(int s) const { return s % nd(); }
};

std::shared_ptr<const ExcursionSpace> make_space(GeometrySets gs);

// Product-form excursion kernel: p((x1,x2),(y1,y2)) = W(x2,y1) M(y1,y2),
// base measure mu(y) = M(y1,y2), so the transition density rho((x1,x2),y)
// equals W(x2,y1). nu and pi factor the same way through their first
// marginals.
class ExcursionKernel final : public slt::ChainKernel {
public:
    ExcursionKernel(std::shared_ptr<const ExcursionSpace> space, Eigen::MatrixXd W,
                    Eigen::MatrixXd M, Eigen::VectorXd nu1, Eigen::VectorXd pi1);

    int size() const override { return static_cast<int>(space_->states()); }
    double mu(int z) const override { return M_(space_->b_of_state(z), space_->d_of_state(z)); }
    double pi(int z) const override {
        return pi1_(space_->b_of_state(z)) * M_(space_->b_of_state(z), space_->d_of_state(z));
    }
    double nu(int z) const override {
        return nu1_(space_->b_of_state(z)) * M_(space_->b_of_state(z), space_->d_of_state(z));
    }
    double transition(int x, int y) const override {
        return W_(space_->d_of_state(x), space_->b_of_state(y)) *
               M_(space_->b_of_state(y), space_->d_of_state(y));
    }
    void density_row(int x, std::span<double> out) const override;
    void initial_density(std::span<double> out) const override;
    int sample_next(int x, Philox& rng) const override;
    int sample_initial(Philox& rng) const override;

    const Eigen::MatrixXd& W() const { return W_; }
    const Eigen::MatrixXd& M() const { return M_; }
    const Eigen::VectorXd& nu1() const { return nu1_; }
    const Eigen::VectorXd& pi1() const { return pi1_; }
    const ExcursionSpace& space() const { return *space_; }
    std::shared_ptr<const ExcursionSpace> space_ptr() const { return space_; }

private:
    std::shared_ptr<const ExcursionSpace> space_;
    Eigen::MatrixXd W_;   // nd x nb
    Eigen::MatrixXd M_;   // nb x nd
    Eigen::VectorXd nu1_, pi1_;  // over dB
    std::vector<AliasTable> w_alias_;  // per dDelta row, over dB
    std::vector<AliasTable> m_alias_;  // per dB row, over dDelta
    AliasTable nu_alias_;
};

// Everything the exact construction shares between Y and Z.
struct KernelBundle {
    std::shared_ptr<const ExcursionSpace> space;
    std::shared_ptr<ExcursionKernel> Y, Z;
    potential::CapDeltaResult capd;   // cap_Delta(B), bar e_B^Delta
    potential::ZdBoxPotential zd;     // e_B, cap(B), Z^d hitting rows, escape
    std::vector<double> q_delta;      // law of X_{H_Delta} from the uniform start
    Eigen::VectorXd nu_Y1;            // P[X_{R_1} = .] over dB
};

KernelBundle build_kernels(const GeometrySets& gs,
                           potential::ZdGreenTable::Quality quality =
                               potential::ZdGreenTable::Quality::Precise,
                           int threads = 1);

// Thin single-kernel builders matching the operation names; each assembles
// just what it needs.
std::shared_ptr<ExcursionKernel> build_Y_kernel(const GeometrySets& gs, int threads = 1);
std::shared_ptr<ExcursionKernel> build_Z_kernel(const GeometrySets& gs,
                                                potential::ZdGreenTable::Quality quality =
                                                    potential::ZdGreenTable::Quality::Precise,
                                                int threads = 1);

// pi over the full product space (for oracle checks); factorized internally.
Eigen::VectorXd invariant_pi_full(const ExcursionKernel& k);

// ||pi P - pi||_TV computed in factored form.
double pi_invariance_gap(const ExcursionKernel& k);

// Exact mixing times. T = min{ n >= 0 : max_x ||P^n(x,.) - pi||_TV <= 1/4 }.
int64_t mixing_time_product(const ExcursionKernel& k, int64_t cap = 100000);
int64_t mixing_time_dense(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi,
                          int64_t cap = 100000);

// Monte Carlo upper estimate via pairwise coalescence of independent copies.
int64_t mixing_time_coupling(const slt::ChainKernel& k, long replicas, int64_t cap,
                             uint64_t seed, int threads = 1);

struct DensityVariance {
    Eigen::VectorXd var;            // Var_pi rho_z per dB class (z = (y1, .))
    double max_var = 0;
    double max_rho = 0;             // max rho-tilde entry
    double max_stationarity_gap = 0;  // max_z |pi(rho_z) - g(z)|
};

DensityVariance density_variance(const ExcursionKernel& k);

// Collapsed per-class spectral data feeding slt::failure_bound.
slt::KernelSpectral spectral_of_product(const ExcursionKernel& k);

// Number of walk excursions started before t, per replica, stationary start.
std::vector<long> count_excursions_walk(const GeometrySets& gs, int64_t t, long replicas,
                                        uint64_t seed, int threads = 1);

struct RiExcursionCounts {
    std::vector<long> n_prime;  // per replica, N'(u)
    std::vector<long> t_list;   // all per-trajectory excursion counts T^(i)
};

RiExcursionCounts count_excursions_ri(const GeometrySets& gs, double u, double cap_B,
                                      const std::vector<double>& ebar_B, double kill_radius,
                                      long replicas, uint64_t seed, int threads = 1);

// Sparse transition-count estimate of a kernel from simulation.
struct McKernelEstimate {
    std::shared_ptr<const ExcursionSpace> space;
    std::unordered_map<uint64_t, long> counts;  // key = from * states + to
    std::vector<long> from_totals;

    long count(int from, int to) const {
        const auto it = counts.find(static_cast<uint64_t>(from) *
                                        static_cast<uint64_t>(space->states()) +
                                    static_cast<uint64_t>(to));
        return it == counts.end() ? 0 : it->second;
    }
    double prob(int from, int to) const {
        const long t = from_totals[static_cast<size_t>(from)];
        return t > 0 ? static_cast<double>(count(from, to)) / static_cast<double>(t) : 0.0;
    }
    bool untrusted(int from, int to) const {
        const long c = count(from, to);
        return c > 0 && c < 10;
    }
};

McKernelEstimate estimate_Y_kernel_mc(std::shared_ptr<const ExcursionSpace> space, int64_t steps,
                                      uint64_t seed);
McKernelEstimate estimate_Z_kernel_mc(std::shared_ptr<const ExcursionSpace> space,
                                      long trajectories, const std::vector<double>& ebar_B,
                                      double kill_radius, uint64_t seed);

// CSV of (i, j, p_ij) triples preceded by a JSON header line.
void export_kernel_csv(const std::string& path, const ExcursionKernel& k,
                       const std::string& mode);

}  // namespace rwi::chains
