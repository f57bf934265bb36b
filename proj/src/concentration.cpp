#include "rwi/concentration.hpp"

#include <algorithm>
#include <cmath>

#include "rwi/parallel.hpp"

namespace rwi::conc {

namespace {

BoundValue evaluate(const BoundInput& in, const char* what) {
    if (!(in.sigma2 > 0)) {
        BoundValue out;
        out.applicable = false;
        return out;
    }
    if (!(in.gamma_dev > 0) || in.gamma_dev > std::min(in.sigma2, 0.5))
        throw GammaOutOfRange(std::string(what) + ": gamma must lie in (0, sigma^2 ^ 1/2]");
    if (!(in.pi_star > 0) || !(in.mixing_time > 0))
        throw Error(std::string(what) + ": pi_star and mixing time must be positive");
    const double ratio = in.pi_star * in.gamma_dev * in.gamma_dev / (6.0 * in.sigma2);
    if (ratio >= 1.0)
        throw KNonpositive(std::string(what) + ": pi_star gamma^2/(6 sigma^2) >= 1, k(gamma) <= 0");
    BoundValue out;
    out.k = -std::log2(ratio);
    const double floor_term = std::floor(in.horizon / (out.k * in.mixing_time) - 1.0);
    out.value = 4.0 * std::exp(-floor_term * in.gamma_dev * in.gamma_dev / (6.0 * in.sigma2));
    out.vacuous = out.value >= 1.0;
    return out;
}

}  // namespace

BoundValue chernov_discrete(const BoundInput& in) { return evaluate(in, "chernov_discrete"); }

BoundValue chernov_continuous(const BoundInput& in) { return evaluate(in, "chernov_continuous"); }

BoundValue chernov_functional(const std::vector<double>& h, const std::vector<double>& pi,
                              double delta, double t, double mixing_time, double sigma2) {
    if (h.size() != pi.size() || h.empty()) throw Error("chernov_functional: size mismatch");
    double pih = 0, pih2 = 0, hinf = 0, pi_star = 1;
    for (size_t i = 0; i < h.size(); ++i) {
        pih += pi[i] * h[i];
        pih2 += pi[i] * h[i] * h[i];
        hinf = std::max(hinf, std::abs(h[i]));
        pi_star = std::min(pi_star, pi[i]);
    }
    const double var = std::max(0.0, pih2 - pih * pih);
    if (!(sigma2 > 0) || var <= 0) {
        BoundValue out;
        out.applicable = false;
        return out;
    }
    if (var > sigma2 * (1 + 1e-12))
        throw Error("chernov_functional: Var_pi(h) exceeds the supplied sigma^2");
    if (!(pih > 0)) throw DeltaOutOfRange("chernov_functional: pi(h) must be positive");
    const double delta_cap = std::min(sigma2 / (2.0 * pih * hinf), 1.0);
    if (!(delta > 0) || delta > delta_cap)
        throw DeltaOutOfRange("chernov_functional: delta must lie in (0, " +
                              std::to_string(delta_cap) + "]");
    const double ratio = delta * delta * pih * pih * pi_star / (6.0 * sigma2);
    if (ratio >= 1.0) throw KNonpositive("chernov_functional: k'(delta) <= 0");
    BoundValue out;
    out.k = -std::log2(ratio);
    const double floor_term = std::floor(t / (out.k * mixing_time) - 1.0);
    out.value = 4.0 * std::exp(-floor_term * delta * delta * pih * pih / (6.0 * sigma2));
    out.vacuous = out.value >= 1.0;
    return out;
}

TailEstimate empirical_tail(const slt::ChainKernel& kernel, std::vector<double> f, int64_t n,
                            double gamma_dev, long replicas, uint64_t seed, int threads) {
    const int ns = kernel.size();
    if (static_cast<int>(f.size()) != ns) throw Error("empirical_tail: f size mismatch");
    double pif = 0;
    for (int z = 0; z < ns; ++z) pif += kernel.pi(z) * f[static_cast<size_t>(z)];
    for (double& v : f) v -= pif;
    for (double v : f)
        if (std::abs(v) > 1.0 + 1e-12)
            throw FOutOfRange("empirical_tail: centered f leaves [-1,1]; refusing to clip");
    if (!(gamma_dev > 0)) throw GammaOutOfRange("empirical_tail: gamma must be positive");

    std::vector<double> pi(static_cast<size_t>(ns));
    for (int z = 0; z < ns; ++z) pi[static_cast<size_t>(z)] = kernel.pi(z);
    const AliasTable pi_alias(pi);
    std::vector<uint8_t> hit(static_cast<size_t>(replicas), 0);
    const double threshold = gamma_dev * static_cast<double>(n);
    parallel_for(replicas, threads, [&](int64_t rep) {
        Philox rng(seed, static_cast<uint64_t>(rep));
        int x = static_cast<int>(pi_alias.sample(rng));
        double s = 0;
        for (int64_t i = 0; i < n; ++i) {
            s += f[static_cast<size_t>(x)];
            x = kernel.sample_next(x, rng);
        }
        hit[static_cast<size_t>(rep)] = s >= threshold ? 1 : 0;
    });
    long hits = 0;
    for (uint8_t h : hit) hits += h;
    TailEstimate out;
    out.replicas = replicas;
    out.frequency = static_cast<double>(hits) / static_cast<double>(replicas);
    out.wilson = wilson_interval(hits, replicas);
    return out;
}

}  // namespace rwi::conc
