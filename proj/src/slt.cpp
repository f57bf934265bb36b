#include "rwi/slt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

namespace rwi::slt {

void ChainKernel::validate(double tol) const {
    const int n = size();
    double pi_sum = 0, nu_sum = 0;
    for (int z = 0; z < n; ++z) {
        if (!(mu(z) > 0)) throw Error("kernel: mu must have full support");
        if (pi(z) < -tol || nu(z) < -tol) throw Error("kernel: negative measure entry");
        pi_sum += pi(z);
        nu_sum += nu(z);
    }
    if (std::abs(pi_sum - 1) > 1e-6 || std::abs(nu_sum - 1) > 1e-6)
        throw Error("kernel: pi and nu must be probability vectors");
    for (int x = 0; x < n; ++x) {
        double s = 0;
        for (int y = 0; y < n; ++y) s += transition(x, y);
        if (std::abs(s - 1) > tol)
            throw Error("kernel: row " + std::to_string(x) + " sums to " + std::to_string(s));
    }
    double tv = 0;
    for (int y = 0; y < n; ++y) {
        double acc = 0;
        for (int x = 0; x < n; ++x) acc += pi(x) * transition(x, y);
        tv += std::abs(acc - pi(y));
    }
    if (tv / 2 > tol)
        throw InvariantMismatch("kernel: pi P differs from pi by TV " + std::to_string(tv / 2));
}

Eigen::VectorXd invariant_of(const Eigen::MatrixXd& p) {
    const int n = static_cast<int>(p.rows());
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    Eigen::VectorXd pi = a.fullPivLu().solve(b);
    for (int i = 0; i < n; ++i) pi(i) = std::max(pi(i), 0.0);
    pi /= pi.sum();
    return pi;
}

DenseKernel::DenseKernel(Eigen::MatrixXd p, Eigen::VectorXd mu, Eigen::VectorXd nu)
    : p_(std::move(p)), mu_(std::move(mu)), nu_(std::move(nu)) {
    pi_ = invariant_of(p_);
    const int n = size();
    row_alias_.reserve(static_cast<size_t>(n));
    for (int x = 0; x < n; ++x) {
        std::vector<double> w(static_cast<size_t>(n));
        for (int y = 0; y < n; ++y) w[static_cast<size_t>(y)] = p_(x, y);
        row_alias_.emplace_back(w);
    }
    std::vector<double> w(static_cast<size_t>(n));
    for (int y = 0; y < n; ++y) w[static_cast<size_t>(y)] = nu_(y);
    nu_alias_.build(w);
}

DenseKernel DenseKernel::random(int n, uint64_t seed) {
    Philox rng(seed, 0x5eed);
    Eigen::MatrixXd p(n, n);
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int j = 0; j < n; ++j) {
            p(i, j) = 0.05 + rng.uniform();
            s += p(i, j);
        }
        p.row(i) /= s;
    }
    Eigen::VectorXd nu(n);
    double s = 0;
    for (int i = 0; i < n; ++i) {
        nu(i) = 0.05 + rng.uniform();
        s += nu(i);
    }
    nu /= s;
    return DenseKernel(std::move(p), Eigen::VectorXd::Ones(n), std::move(nu));
}

DenseKernel DenseKernel::iid(const Eigen::VectorXd& pi, const Eigen::VectorXd& mu) {
    const int n = static_cast<int>(pi.size());
    Eigen::MatrixXd p(n, n);
    for (int i = 0; i < n; ++i) p.row(i) = pi.transpose();
    return DenseKernel(std::move(p), mu, pi);
}

DenseKernel DenseKernel::iid_matching(const ChainKernel& k) {
    const int n = k.size();
    Eigen::VectorXd pi(n), mu(n);
    for (int z = 0; z < n; ++z) {
        pi(z) = k.pi(z);
        mu(z) = k.mu(z);
    }
    return iid(pi, mu);
}

FiberedPoissonProcess::FiberedPoissonProcess(std::vector<double> rates, uint64_t seed)
    : rates_(std::move(rates)), seed_(seed) {
    for (double r : rates_)
        if (!(r > 0)) throw Error("FiberedPoissonProcess: rates must be positive");
    levels_.assign(rates_.size(), {});
}

double FiberedPoissonProcess::level(int fiber, int64_t idx) const {
    auto& lv = levels_[static_cast<size_t>(fiber)];
    while (static_cast<int64_t>(lv.size()) <= idx) {
        const uint64_t k = static_cast<uint64_t>(lv.size());
        const uint64_t lo = Philox::at(seed_, static_cast<uint64_t>(fiber), k, 0);
        const uint64_t hi = Philox::at(seed_, static_cast<uint64_t>(fiber), k, 1);
        const double unif = (static_cast<double>(((hi << 32) | lo) >> 11) + 1.0) * 0x1.0p-53;
        const double gap = -std::log(unif) / rates_[static_cast<size_t>(fiber)];
        lv.push_back((lv.empty() ? 0.0 : lv.back()) + gap);
    }
    return lv[static_cast<size_t>(idx)];
}

SltSide::SltSide(const ChainKernel& kernel, std::shared_ptr<FiberedPoissonProcess> ppp)
    : kernel_(&kernel), ppp_(std::move(ppp)) {
    const size_t n = static_cast<size_t>(kernel.size());
    G_.assign(n, 0.0);
    row_.assign(n, 0.0);
    next_.assign(n, 0);
    visited_.assign(n, 0);
}

AdvanceRecord SltSide::advance() {
    const int n = kernel_->size();
    if (path_.empty())
        kernel_->initial_density(row_);
    else
        kernel_->density_row(path_.back(), row_);

    // xi = min over fibers of the scaled gap to the next unconsumed point;
    // ties (possible in floating point) break toward the lowest state index
    double best = std::numeric_limits<double>::infinity();
    int best_z = -1;
    for (int z = 0; z < n; ++z) {
        const double r = row_[static_cast<size_t>(z)];
        if (r <= 0) continue;
        const double v = ppp_->level(z, next_[static_cast<size_t>(z)]);
        const double t = std::max(0.0, (v - G_[static_cast<size_t>(z)]) / r);
        if (t < best) {
            best = t;
            best_z = z;
        }
    }
    if (best_z < 0) throw DegenerateRow("advance: density row vanishes identically");

    for (int z = 0; z < n; ++z) G_[static_cast<size_t>(z)] += best * row_[static_cast<size_t>(z)];
    const double lvl = ppp_->level(best_z, next_[static_cast<size_t>(best_z)]);
    G_[static_cast<size_t>(best_z)] = lvl;  // lands exactly on the consumed point
    ++next_[static_cast<size_t>(best_z)];
    visited_[static_cast<size_t>(best_z)] = 1;
    path_.push_back(best_z);
    xi_.push_back(best);
    levels_.push_back(lvl);
    return {best, best_z, lvl};
}

int SltSide::check_range_identity() const {
    int bad = 0;
    const int n = kernel_->size();
    for (int z = 0; z < n; ++z) {
        const bool has_consumed = next_[static_cast<size_t>(z)] > 0;
        if (has_consumed != (visited_[static_cast<size_t>(z)] != 0)) ++bad;
        // no unconsumed point at or below the accumulated soft local time
        if (ppp_->level(z, next_[static_cast<size_t>(z)]) <= G_[static_cast<size_t>(z)]) ++bad;
    }
    return bad;
}

void SltSide::dump_consumption_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw Error("dump_consumption_csv: cannot open " + path);
    f << "state,level,step\n";
    for (size_t k = 0; k < path_.size(); ++k)
        f << path_[k] << ',' << levels_[k] << ',' << k << '\n';
}

namespace {

std::vector<double> rates_of(const ChainKernel& k) {
    std::vector<double> r(static_cast<size_t>(k.size()));
    for (int z = 0; z < k.size(); ++z) r[static_cast<size_t>(z)] = k.mu(z);
    return r;
}

// {a_i : i0 <= i <= hi} as a membership mask
std::vector<uint8_t> range_set(const std::vector<int>& path, int64_t i0, int64_t hi, int n) {
    std::vector<uint8_t> s(static_cast<size_t>(n), 0);
    hi = std::min<int64_t>(hi, static_cast<int64_t>(path.size()) - 1);
    for (int64_t i = i0; i <= hi; ++i) s[static_cast<size_t>(path[static_cast<size_t>(i)])] = 1;
    return s;
}

bool subset(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] && !b[i]) return false;
    return true;
}

}  // namespace

CoupleResult couple_iid(const ChainKernel& kernel, int64_t n, double eps, uint64_t seed,
                        bool check_ranges) {
    if (eps < 0) throw EpsilonOutOfRange("couple_iid: eps must be nonnegative");
    const DenseKernel iid = DenseKernel::iid_matching(kernel);
    auto ppp = std::make_shared<FiberedPoissonProcess>(rates_of(kernel), seed);
    SltSide chain(kernel, ppp);
    SltSide ind(iid, ppp);
    const int64_t m_plus = static_cast<int64_t>(std::ceil(static_cast<double>(n) * (1 + eps)));
    const int64_t m_minus = static_cast<int64_t>(std::floor(static_cast<double>(n) * (1 - eps)));
    CoupleResult out;
    for (int64_t i = 0; i <= n; ++i) {
        chain.advance();
        if (check_ranges) out.range_violations += chain.check_range_identity();
    }
    for (int64_t i = 0; i <= m_plus; ++i) {
        ind.advance();
        if (check_ranges) out.range_violations += ind.check_range_identity();
    }
    out.z = chain.path();
    out.u = ind.path();
    const int ns = kernel.size();
    const auto u_lo = range_set(out.u, 0, m_minus, ns);
    const auto z_all = range_set(out.z, 0, n, ns);
    const auto u_hi = range_set(out.u, 0, m_plus, ns);
    out.good = subset(u_lo, z_all) && subset(z_all, u_hi);
    return out;
}

CoupleResult couple_chains(const ChainKernel& k1, const ChainKernel& k2, int64_t n, double eps,
                           uint64_t seed, bool check_ranges) {
    if (eps < 0) throw EpsilonOutOfRange("couple_chains: eps must be nonnegative");
    if (k1.size() != k2.size()) throw InvariantMismatch("couple_chains: state spaces differ");
    double tv = 0, mu_diff = 0;
    for (int z = 0; z < k1.size(); ++z) {
        tv += std::abs(k1.pi(z) - k2.pi(z));
        mu_diff = std::max(mu_diff, std::abs(k1.mu(z) - k2.mu(z)));
    }
    if (tv / 2 > 1e-8)
        throw InvariantMismatch("couple_chains: invariant measures differ in TV by " +
                                std::to_string(tv / 2));
    if (mu_diff > 1e-12)
        throw InvariantMismatch("couple_chains: base measures differ");

    auto ppp = std::make_shared<FiberedPoissonProcess>(rates_of(k1), seed);
    SltSide s1(k1, ppp);
    SltSide s2(k2, ppp);
    const int64_t m_plus = static_cast<int64_t>(std::ceil(static_cast<double>(n) * (1 + eps)));
    const int64_t m_minus = static_cast<int64_t>(std::floor(static_cast<double>(n) * (1 - eps)));
    CoupleResult out;
    for (int64_t i = 0; i <= m_plus; ++i) {
        s1.advance();
        if (check_ranges) out.range_violations += s1.check_range_identity();
    }
    for (int64_t i = 0; i <= n; ++i) {
        s2.advance();
        if (check_ranges) out.range_violations += s2.check_range_identity();
    }
    out.u = s1.path();
    out.z = s2.path();
    const int ns = k1.size();
    const auto z1_lo = range_set(out.u, 1, m_minus, ns);
    const auto z2_all = range_set(out.z, 1, n, ns);
    const auto z1_hi = range_set(out.u, 1, m_plus, ns);
    out.good = subset(z1_lo, z2_all) && subset(z2_all, z1_hi);
    return out;
}

KernelSpectral spectral_of(const ChainKernel& k) {
    const int n = k.size();
    KernelSpectral s;
    s.pi_star = std::numeric_limits<double>::infinity();
    s.g.resize(static_cast<size_t>(n));
    s.var_rho.assign(static_cast<size_t>(n), 0.0);
    s.rho_inf.assign(static_cast<size_t>(n), 0.0);
    s.pi_over_nu.resize(static_cast<size_t>(n));
    s.multiplicity.assign(static_cast<size_t>(n), 1.0);
    std::vector<double> row(static_cast<size_t>(n));
    std::vector<double> mean(static_cast<size_t>(n), 0.0), sq(static_cast<size_t>(n), 0.0);
    for (int x = 0; x < n; ++x) {
        k.density_row(x, row);
        const double px = k.pi(x);
        for (int z = 0; z < n; ++z) {
            mean[static_cast<size_t>(z)] += px * row[static_cast<size_t>(z)];
            sq[static_cast<size_t>(z)] += px * row[static_cast<size_t>(z)] * row[static_cast<size_t>(z)];
            s.rho_inf[static_cast<size_t>(z)] = std::max(s.rho_inf[static_cast<size_t>(z)], row[static_cast<size_t>(z)]);
        }
    }
    for (int z = 0; z < n; ++z) {
        s.pi_star = std::min(s.pi_star, k.pi(z));
        s.g[static_cast<size_t>(z)] = k.g(z);
        s.var_rho[static_cast<size_t>(z)] =
            std::max(0.0, sq[static_cast<size_t>(z)] - mean[static_cast<size_t>(z)] * mean[static_cast<size_t>(z)]);
        s.pi_over_nu[static_cast<size_t>(z)] =
            k.nu(z) > 0 ? k.pi(z) / k.nu(z) : std::numeric_limits<double>::infinity();
    }
    return s;
}

KOfEpsilon k_of_epsilon(std::span<const KernelSpectral> kernels, double eps) {
    if (!(eps > 0)) throw EpsilonOutOfRange("k_of_epsilon: eps must be positive");
    double min_log = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& s : kernels) {
        for (size_t z = 0; z < s.g.size(); ++z) {
            if (s.var_rho[z] <= 0) continue;  // ratio is +inf, never the minimum
            any = true;
            const double arg = s.pi_star * eps * eps * s.g[z] * s.g[z] / (6.0 * s.var_rho[z]);
            min_log = std::min(min_log, std::log2(arg));
        }
    }
    if (!any) return {std::numeric_limits<double>::infinity(), false};
    return {-min_log, true};
}

double epsilon_max(std::span<const KernelSpectral> kernels) {
    double m = 0.5;
    for (const auto& s : kernels)
        for (size_t z = 0; z < s.g.size(); ++z) {
            const double denom = 2.0 * s.rho_inf[z] * s.g[z];
            m = std::min(m, denom > 0 ? s.var_rho[z] / denom : 0.0);
        }
    return m;
}

double failure_bound(std::span<const KernelSpectral> kernels,
                     std::span<const int64_t> mixing_times, int64_t n, double eps, double c,
                     double C) {
    if (kernels.size() != mixing_times.size())
        throw Error("failure_bound: one mixing time per kernel required");
    const double eps_cap = epsilon_max(kernels);
    if (!(eps > 0) || eps > eps_cap)
        throw EpsilonOutOfRange("failure_bound: eps must lie in (0, " + std::to_string(eps_cap) + "]");
    const KOfEpsilon ke = k_of_epsilon(kernels, eps);
    if (!ke.applicable)
        throw KNonpositive("failure_bound: all transition densities are constant");
    int64_t t_max = 0;
    for (int64_t t : mixing_times) t_max = std::max(t_max, t);
    if (static_cast<double>(n) < 2.0 * ke.value * static_cast<double>(t_max))
        throw NotEnoughSteps("failure_bound: n < 2 k(eps) T");
    double total = 0;
    const double nd = static_cast<double>(n);
    for (size_t i = 0; i < kernels.size(); ++i) {
        const auto& s = kernels[i];
        const double t = static_cast<double>(mixing_times[i]);
        for (size_t z = 0; z < s.g.size(); ++z) {
            double term = std::exp(-c * nd * eps * eps);
            if (std::isfinite(s.pi_over_nu[z]))
                term += std::exp(-c * nd * eps * s.pi_over_nu[z]);
            if (s.var_rho[z] > 0)
                term += std::exp(-c * eps * eps * s.g[z] * s.g[z] / s.var_rho[z] * nd /
                                 (ke.value * t));
            total += s.multiplicity[z] * term;
        }
    }
    return C * total;
}

}  // namespace rwi::slt
