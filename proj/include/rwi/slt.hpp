#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rwi/common.hpp"
#include "rwi/rng.hpp"

namespace rwi::slt {

// A finite-state Markov kernel together with the a-priori measure mu the
// soft-local-times engine couples over. rho(x,y) = p(x,y)/mu(y) is the
// transition density, g = pi/mu the density of the invariant measure.
class ChainKernel {
public:
    virtual ~ChainKernel() = default;
    virtual int size() const = 0;
    virtual double mu(int z) const = 0;
    virtual double pi(int z) const = 0;
    virtual double nu(int z) const = 0;
    virtual double transition(int x, int y) const = 0;

    // out[z] = rho(x, z)
    virtual void density_row(int x, std::span<double> out) const {
        for (int z = 0; z < size(); ++z) out[static_cast<size_t>(z)] = transition(x, z) / mu(z);
    }
    // out[z] = nu(z)/mu(z), the step-0 row of the construction
    virtual void initial_density(std::span<double> out) const {
        for (int z = 0; z < size(); ++z) out[static_cast<size_t>(z)] = nu(z) / mu(z);
    }
    virtual int sample_next(int x, Philox& rng) const = 0;
    virtual int sample_initial(Philox& rng) const = 0;

    double g(int z) const { return pi(z) / mu(z); }

    // rows sum to one, pi is invariant, mu has full support
    void validate(double tol = 1e-8) const;
};

// Dense kernel for small state spaces.
class DenseKernel : public ChainKernel {
public:
    DenseKernel(Eigen::MatrixXd p, Eigen::VectorXd mu, Eigen::VectorXd nu);

    static DenseKernel random(int n, uint64_t seed);  // irreducible, aperiodic
    // i.i.d. kernel: every row equals pi
    static DenseKernel iid(const Eigen::VectorXd& pi, const Eigen::VectorXd& mu);
    static DenseKernel iid_matching(const ChainKernel& k);  // same pi, mu as k

    int size() const override { return static_cast<int>(p_.rows()); }
    double mu(int z) const override { return mu_(z); }
    double pi(int z) const override { return pi_(z); }
    double nu(int z) const override { return nu_(z); }
    double transition(int x, int y) const override { return p_(x, y); }
    int sample_next(int x, Philox& rng) const override {
        return static_cast<int>(row_alias_[static_cast<size_t>(x)].sample(rng));
    }
    int sample_initial(Philox& rng) const override { return static_cast<int>(nu_alias_.sample(rng)); }

    const Eigen::MatrixXd& matrix() const { return p_; }
    const Eigen::VectorXd& pi_vector() const { return pi_; }

private:
    Eigen::MatrixXd p_;
    Eigen::VectorXd mu_, pi_, nu_;
    std::vector<AliasTable> row_alias_;
    AliasTable nu_alias_;
};

// Invariant distribution of a row-stochastic matrix by direct linear solve.
Eigen::VectorXd invariant_of(const Eigen::MatrixXd& p);

// Poisson point process on Sigma x [0,inf) with intensity mu (x) Lebesgue,
// stored as per-fiber ascending level lists. Levels are generated lazily
// from counter-based draws keyed by (seed, fiber, gap index), so two
// consumers extending fibers in different orders see the identical
// realization.
class FiberedPoissonProcess {
public:
    FiberedPoissonProcess(std::vector<double> rates, uint64_t seed);

    double level(int fiber, int64_t idx) const;
    double rate(int fiber) const { return rates_[static_cast<size_t>(fiber)]; }
    int fibers() const { return static_cast<int>(rates_.size()); }
    int64_t generated(int fiber) const { return static_cast<int64_t>(levels_[static_cast<size_t>(fiber)].size()); }

private:
    std::vector<double> rates_;
    mutable std::vector<std::vector<double>> levels_;
    uint64_t seed_;
};

struct AdvanceRecord {
    double xi = 0;     // time increment xi_k
    int state = -1;    // selected state Z_k
    double level = 0;  // level V_k of the consumed point
};

// One soft-local-times consumer: keeps the accumulated G, the per-fiber
// consumption front, and the path. Several sides may share one process.
class SltSide {
public:
    SltSide(const ChainKernel& kernel, std::shared_ptr<FiberedPoissonProcess> ppp);

    AdvanceRecord advance();

    const std::vector<int>& path() const { return path_; }
    const std::vector<double>& increments() const { return xi_; }
    const std::vector<double>& levels() const { return levels_; }
    const std::vector<double>& soft_local_time() const { return G_; }
    int64_t consumed(int fiber) const { return next_[static_cast<size_t>(fiber)]; }
    const ChainKernel& kernel() const { return *kernel_; }

    // Range identity: the visited states are exactly the fibers whose next
    // unconsumed point lies strictly above G. Returns the number of states
    // violating it (0 in a correct implementation).
    int check_range_identity() const;

    // CSV rows "state,level,step" of consumed points, for visual audit.
    void dump_consumption_csv(const std::string& path) const;

private:
    const ChainKernel* kernel_;
    std::shared_ptr<FiberedPoissonProcess> ppp_;
    std::vector<double> G_, row_;
    std::vector<int64_t> next_;
    std::vector<int> path_;
    std::vector<double> xi_, levels_;
    std::vector<uint8_t> visited_;
};

struct CoupleResult {
    std::vector<int> z;   // the chain path (couple_iid) / Z^2 (couple_chains)
    std::vector<int> u;   // the i.i.d. path / Z^1
    bool good = false;
    int range_violations = 0;  // only populated when check_ranges
};

// Theorem-style coupling of a nu-started P-chain with an i.i.d.-pi sequence
// on one Poisson process; good = [{U}_{0..n(1-eps)} c {Z}_{0..n} c
// {U}_{0..n(1+eps)}]. eps only enters the event, not the construction.
CoupleResult couple_iid(const ChainKernel& kernel, int64_t n, double eps, uint64_t seed,
                        bool check_ranges = false);

// Two chains sharing pi and mu on one process; good compares ranges from the
// second state on: [{Z1}_{1..n(1-eps)} c {Z2}_{1..n} c {Z1}_{1..n(1+eps)}].
// Throws InvariantMismatch when the invariant measures differ in TV by more
// than 1e-8.
CoupleResult couple_chains(const ChainKernel& k1, const ChainKernel& k2, int64_t n, double eps,
                           uint64_t seed, bool check_ranges = false);

// Per-state ingredients of the failure bounds. For product-structured
// kernels states collapse into classes sharing (g, Var, pi/nu); multiplicity
// carries the class size so sums stay exact.
struct KernelSpectral {
    double pi_star = 0;
    std::vector<double> g;         // per class
    std::vector<double> var_rho;   // Var_pi rho_z per class
    std::vector<double> rho_inf;   // max_x rho(x,z) per class
    std::vector<double> pi_over_nu;  // pi(z)/nu(z), +inf where nu(z)=0
    std::vector<double> multiplicity;
};

KernelSpectral spectral_of(const ChainKernel& k);  // generic O(n^2)

struct KOfEpsilon {
    double value = 0;
    bool applicable = false;  // false iff every class has Var_pi rho_z = 0
};

// k(eps) = -min_z log2(pi_* eps^2 g(z)^2 / (6 Var_pi rho_z)), minimum over
// all supplied kernels.
KOfEpsilon k_of_epsilon(std::span<const KernelSpectral> kernels, double eps);

// Largest eps admitted by the coupling theorems' hypothesis.
double epsilon_max(std::span<const KernelSpectral> kernels);

// Right-hand side of the coupling failure bound with calibration constants
// (c, C); mixing_times supplies T (or T^1, T^2). Throws EpsilonOutOfRange /
// NotEnoughSteps when the theorem's hypotheses fail.
double failure_bound(std::span<const KernelSpectral> kernels,
                     std::span<const int64_t> mixing_times, int64_t n, double eps, double c = 1.0,
                     double C = 1.0);

}  // namespace rwi::slt
