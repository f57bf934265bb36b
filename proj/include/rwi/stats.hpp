#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace rwi {

// Streaming mean/variance (Welford). Merging is associative, so replica
// statistics can be combined in index order regardless of thread count.
struct Accumulator {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }

    void merge(const Accumulator& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double d = o.mean - mean;
        const long t = n + o.n;
        mean += d * static_cast<double>(o.n) / static_cast<double>(t);
        m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / static_cast<double>(t);
        n = t;
    }

    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stderr_mean() const { return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

// Wilson score interval for a binomial proportion.
struct WilsonInterval {
    double lo = 0.0, hi = 1.0;
};

inline WilsonInterval wilson_interval(long successes, long trials, double z = 1.959964) {
    if (trials <= 0) return {};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2 * n)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// Chi-square upper quantile via the Wilson-Hilferty cube approximation;
// adequate for the test levels (1%, 5%) used here even at small dof.
inline double chi2_quantile(double p, int dof) {
    // inverse normal CDF (Acklam's rational approximation)
    auto inv_norm = [](double q) {
        static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
        static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
        static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
        static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
        const double plow = 0.02425, phigh = 1 - plow;
        double x;
        if (q < plow) {
            const double u = std::sqrt(-2 * std::log(q));
            x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
                ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1);
        } else if (q <= phigh) {
            const double u = q - 0.5, r = u * u;
            x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
                (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
        } else {
            const double u = std::sqrt(-2 * std::log(1 - q));
            x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
                ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1);
        }
        return x;
    };
    const double k = static_cast<double>(dof);
    const double z = inv_norm(p);
    const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
    return k * t * t * t;
}

// Pearson chi-square statistic of observed counts against expected
// probabilities (cells with negligible mass are pooled away).
inline double chi2_statistic(const std::vector<long>& counts, const std::vector<double>& probs,
                             int* dof_out = nullptr) {
    double n = 0;
    for (long c : counts) n += static_cast<double>(c);
    double stat = 0;
    int dof = -1;
    for (size_t i = 0; i < counts.size(); ++i) {
        const double e = n * probs[i];
        if (e < 1e-12) continue;
        const double d = static_cast<double>(counts[i]) - e;
        stat += d * d / e;
        ++dof;
    }
    if (dof_out) *dof_out = std::max(dof, 1);
    return stat;
}

// One-sample Kolmogorov-Smirnov statistic against Exp(1).
inline double ks_statistic_exp1(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double cdf = 1.0 - std::exp(-xs[i]);
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
    }
    return d;
}

}  // namespace rwi
