#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rwi/slt.hpp"
#include "rwi/stats.hpp"

namespace rwi::conc {

// Inputs of the Chernov-type bound for additive functionals. gamma_dev is
// the deviation level (named to avoid the geometry exponent gamma).
struct BoundInput {
    double horizon = 0;    // n (discrete) or t (continuous)
    double gamma_dev = 0;  // deviation level
    double sigma2 = 0;     // variance proxy, pi(f^2) <= sigma2
    double pi_star = 0;    // min_x pi(x)
    double mixing_time = 0;
};

struct BoundValue {
    double value = 0;
    bool vacuous = false;     // >= 1; returned raw, never clamped
    bool applicable = true;   // false for degenerate (zero-variance) inputs
    double k = 0;             // k(gamma) / k'(delta)
};

// 4 exp{ -floor(n/(k T) - 1) gamma^2 / (6 sigma^2) },
// k(gamma) = -log2(pi_star gamma^2 / (6 sigma^2)).
BoundValue chernov_discrete(const BoundInput& in);

// Continuous-time version: identical expression with t as the horizon.
BoundValue chernov_continuous(const BoundInput& in);

// Bound for int_0^t h(X_s) ds - t pi(h) >= delta t pi(h), for h with
// Var_pi(h) <= sigma2 and delta <= sigma2 / (2 pi(h) ||h||_inf) ^ 1.
BoundValue chernov_functional(const std::vector<double>& h, const std::vector<double>& pi,
                              double delta, double t, double mixing_time, double sigma2);

struct TailEstimate {
    double frequency = 0;
    WilsonInterval wilson;
    long replicas = 0;
};

// Monte Carlo frequency of { sum_{i<n} f(X_i) >= n gamma } with X_0 ~ pi.
// f is centered internally; refuses f exceeding [-1,1] after centering.
TailEstimate empirical_tail(const slt::ChainKernel& kernel, std::vector<double> f, int64_t n,
                            double gamma_dev, long replicas, uint64_t seed, int threads = 1);

}  // namespace rwi::conc
