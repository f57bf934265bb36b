#include "rwi/chains.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rwi/interlacements.hpp"
#include "rwi/parallel.hpp"
#include "rwi/solver.hpp"
#include "rwi/walk.hpp"

namespace rwi::chains {

std::shared_ptr<const ExcursionSpace> make_space(GeometrySets gs) {
    auto sp = std::make_shared<ExcursionSpace>();
    sp->gs = std::move(gs);
    sp->dB = sp->gs.B.boundary;
    sp->dD = sp->gs.Delta.boundary;
    const int64_t n = sp->gs.geom.torus().size();
    sp->b_of_flat.assign(static_cast<size_t>(n), -1);
    sp->d_of_flat.assign(static_cast<size_t>(n), -1);
    for (size_t i = 0; i < sp->dB.size(); ++i) sp->b_of_flat[static_cast<size_t>(sp->dB[i])] = static_cast<int32_t>(i);
    for (size_t i = 0; i < sp->dD.size(); ++i) sp->d_of_flat[static_cast<size_t>(sp->dD[i])] = static_cast<int32_t>(i);
    if (sp->states() > 40'000'000)
        throw TooLarge("excursion state space has " + std::to_string(sp->states()) + " states");
    return sp;
}

ExcursionKernel::ExcursionKernel(std::shared_ptr<const ExcursionSpace> space, Eigen::MatrixXd W,
                                 Eigen::MatrixXd M, Eigen::VectorXd nu1, Eigen::VectorXd pi1)
    : space_(std::move(space)), W_(std::move(W)), M_(std::move(M)), nu1_(std::move(nu1)),
      pi1_(std::move(pi1)) {
    const int nb = space_->nb(), nd = space_->nd();
    if (W_.rows() != nd || W_.cols() != nb || M_.rows() != nb || M_.cols() != nd)
        throw Error("ExcursionKernel: matrix shapes do not match the state space");
    for (int i = 0; i < nd; ++i) {
        const double s = W_.row(i).sum();
        if (std::abs(s - 1.0) > 1e-8)
            throw Error("ExcursionKernel: entry row " + std::to_string(i) + " sums to " +
                        std::to_string(s));
    }
    for (int j = 0; j < nb; ++j) {
        const double s = M_.row(j).sum();
        if (std::abs(s - 1.0) > 1e-8)
            throw Error("ExcursionKernel: exit row " + std::to_string(j) + " sums to " +
                        std::to_string(s));
    }
    w_alias_.reserve(static_cast<size_t>(nd));
    for (int i = 0; i < nd; ++i) {
        std::vector<double> w(static_cast<size_t>(nb));
        for (int j = 0; j < nb; ++j) w[static_cast<size_t>(j)] = W_(i, j);
        w_alias_.emplace_back(w);
    }
    m_alias_.reserve(static_cast<size_t>(nb));
    for (int j = 0; j < nb; ++j) {
        std::vector<double> w(static_cast<size_t>(nd));
        for (int i = 0; i < nd; ++i) w[static_cast<size_t>(i)] = M_(j, i);
        m_alias_.emplace_back(w);
    }
    std::vector<double> w(static_cast<size_t>(nb));
    for (int j = 0; j < nb; ++j) w[static_cast<size_t>(j)] = nu1_(j);
    nu_alias_.build(w);
}

void ExcursionKernel::density_row(int x, std::span<double> out) const {
    const int nb = space_->nb(), nd = space_->nd();
    const int xd = space_->d_of_state(x);
    for (int b = 0; b < nb; ++b) {
        const double v = W_(xd, b);
        double* dst = out.data() + static_cast<int64_t>(b) * nd;
        for (int dd = 0; dd < nd; ++dd) dst[dd] = v;
    }
}

void ExcursionKernel::initial_density(std::span<double> out) const {
    const int nb = space_->nb(), nd = space_->nd();
    for (int b = 0; b < nb; ++b) {
        const double v = nu1_(b);
        double* dst = out.data() + static_cast<int64_t>(b) * nd;
        for (int dd = 0; dd < nd; ++dd) dst[dd] = v;
    }
}

int ExcursionKernel::sample_next(int x, Philox& rng) const {
    const int b = static_cast<int>(w_alias_[static_cast<size_t>(space_->d_of_state(x))].sample(rng));
    const int dd = static_cast<int>(m_alias_[static_cast<size_t>(b)].sample(rng));
    return space_->state_of(b, dd);
}

int ExcursionKernel::sample_initial(Philox& rng) const {
    const int b = static_cast<int>(nu_alias_.sample(rng));
    const int dd = static_cast<int>(m_alias_[static_cast<size_t>(b)].sample(rng));
    return space_->state_of(b, dd);
}

namespace {

// law of X_{H_Delta} from the uniform start: N^-d on Delta plus the exit
// mass reaching dDelta from outside
std::vector<double> delta_entry_law(const GeometrySets& gs) {
    const lattice::Torus t = gs.geom.torus();
    const auto mask = potential::absorbing_mask(t, gs.Delta);
    const potential::DirichletSolver solver = potential::DirichletSolver::torus(t, mask);
    const double unif = 1.0 / static_cast<double>(t.size());
    const std::vector<double> visits =
        solver.solve([](int64_t) { return 0.0; }, [&](int64_t) { return unif; });
    std::vector<double> q(static_cast<size_t>(t.size()), 0.0);
    for (int64_t f = 0; f < t.size(); ++f)
        if (gs.Delta.contains(f)) q[static_cast<size_t>(f)] = unif;
    const double inv_deg = 1.0 / (2 * t.d);
    for (int64_t f : gs.Delta.boundary) {
        const lattice::Point p = t.coords(f);
        double acc = 0;
        for (int axis = 0; axis < t.d; ++axis)
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                lattice::Point r = p;
                r[static_cast<size_t>(axis)] = t.wrap(r[static_cast<size_t>(axis)] + sgn);
                const int64_t idx = solver.index_of(t.flat(r));
                if (idx >= 0) acc += visits[static_cast<size_t>(idx)];
            }
        q[static_cast<size_t>(f)] += acc * inv_deg;
    }
    return q;
}

Eigen::MatrixXd to_matrix(const potential::HittingKernel& k) {
    return k.prob;
}

}  // namespace

KernelBundle build_kernels(const GeometrySets& gs, potential::ZdGreenTable::Quality quality,
                           int threads) {
    KernelBundle out;
    out.space = make_space(gs);
    const lattice::Torus t = gs.geom.torus();

    // exit matrix M(y1, y2) = P_{y1}[X_{H_Delta} = y2]
    const potential::HittingKernel mk =
        potential::hitting_kernel_torus(t, gs.Delta, gs.B.boundary, threads);
    const Eigen::MatrixXd M = to_matrix(mk);

    // torus entry matrix A(x2, y1) = P_{x2}[X_{H_B} = y1], plus nu_Y's first
    // marginal r(y1) = sum_w q(w) P_w[X_{H_B} = y1]
    out.q_delta = delta_entry_law(gs);
    std::vector<double> r;
    const potential::HittingKernel ak = potential::hitting_kernel_torus(
        t, gs.B, gs.Delta.boundary, threads, &out.q_delta, &r);
    const Eigen::MatrixXd A = to_matrix(ak);

    out.capd = potential::cap_delta(gs);
    out.zd = potential::zd_box_potential(gs, quality, threads);

    const int nb = out.space->nb(), nd = out.space->nd();
    Eigen::VectorXd pi1(nb), ebar(nb);
    for (int j = 0; j < nb; ++j) pi1(j) = out.capd.ebar[static_cast<size_t>(j)];
    const std::vector<double> ebn = out.zd.e_B.normalized();
    for (int j = 0; j < nb; ++j) ebar(j) = ebn[static_cast<size_t>(j)];
    out.nu_Y1.resize(nb);
    for (int j = 0; j < nb; ++j) out.nu_Y1(j) = r[static_cast<size_t>(j)];
    const double r_sum = out.nu_Y1.sum();
    if (std::abs(r_sum - 1.0) > 1e-8)
        throw SolverDiverged("build_kernels: nu_Y mass " + std::to_string(r_sum));
    out.nu_Y1 /= r_sum;

    Eigen::MatrixXd W_Z = out.zd.hit;
    for (int i = 0; i < nd; ++i) W_Z.row(i) += out.zd.escape(i) * ebar.transpose();

    out.Y = std::make_shared<ExcursionKernel>(out.space, A, M, out.nu_Y1, pi1);
    out.Z = std::make_shared<ExcursionKernel>(out.space, W_Z, M, ebar, pi1);
    return out;
}

std::shared_ptr<ExcursionKernel> build_Y_kernel(const GeometrySets& gs, int threads) {
    auto space = make_space(gs);
    const lattice::Torus t = gs.geom.torus();
    const Eigen::MatrixXd M =
        to_matrix(potential::hitting_kernel_torus(t, gs.Delta, gs.B.boundary, threads));
    const std::vector<double> q = delta_entry_law(gs);
    std::vector<double> r;
    const Eigen::MatrixXd A =
        to_matrix(potential::hitting_kernel_torus(t, gs.B, gs.Delta.boundary, threads, &q, &r));
    const potential::CapDeltaResult capd = potential::cap_delta(gs);
    const int nb = space->nb();
    Eigen::VectorXd pi1(nb), nu1(nb);
    for (int j = 0; j < nb; ++j) {
        pi1(j) = capd.ebar[static_cast<size_t>(j)];
        nu1(j) = r[static_cast<size_t>(j)];
    }
    nu1 /= nu1.sum();
    return std::make_shared<ExcursionKernel>(space, A, M, nu1, pi1);
}

std::shared_ptr<ExcursionKernel> build_Z_kernel(const GeometrySets& gs,
                                                potential::ZdGreenTable::Quality quality,
                                                int threads) {
    auto space = make_space(gs);
    const lattice::Torus t = gs.geom.torus();
    const Eigen::MatrixXd M =
        to_matrix(potential::hitting_kernel_torus(t, gs.Delta, gs.B.boundary, threads));
    const potential::CapDeltaResult capd = potential::cap_delta(gs);
    const potential::ZdBoxPotential zd = potential::zd_box_potential(gs, quality, threads);
    const int nb = space->nb(), nd = space->nd();
    Eigen::VectorXd pi1(nb), ebar(nb);
    const std::vector<double> ebn = zd.e_B.normalized();
    for (int j = 0; j < nb; ++j) {
        pi1(j) = capd.ebar[static_cast<size_t>(j)];
        ebar(j) = ebn[static_cast<size_t>(j)];
    }
    Eigen::MatrixXd W_Z = zd.hit;
    for (int i = 0; i < nd; ++i) W_Z.row(i) += zd.escape(i) * ebar.transpose();
    return std::make_shared<ExcursionKernel>(space, W_Z, M, ebar, pi1);
}

Eigen::VectorXd invariant_pi_full(const ExcursionKernel& k) {
    const int n = k.size();
    Eigen::VectorXd pi(n);
    for (int s = 0; s < n; ++s) pi(s) = k.pi(s);
    return pi;
}

double pi_invariance_gap(const ExcursionKernel& k) {
    // (pi P)(y1,y2) = M(y1,y2) * sum_{x2} pi2(x2) W(x2,y1), with
    // pi2(x2) = sum_b pi1(b) M(b,x2)
    const Eigen::VectorXd pi2 = k.M().transpose() * k.pi1();
    const Eigen::VectorXd push = k.W().transpose() * pi2;  // over dB
    double tv = 0;
    const int nb = k.space().nb(), nd = k.space().nd();
    for (int b = 0; b < nb; ++b)
        for (int dd = 0; dd < nd; ++dd)
            tv += std::abs((push(b) - k.pi1()(b)) * k.M()(b, dd));
    return tv / 2;
}

int64_t mixing_time_product(const ExcursionKernel& k, int64_t cap) {
    const int nb = k.space().nb(), nd = k.space().nd();
    // n = 0: distance from a point mass
    double pi_star = 1;
    for (int b = 0; b < nb; ++b)
        for (int dd = 0; dd < nd; ++dd) pi_star = std::min(pi_star, k.pi1()(b) * k.M()(b, dd));
    if (1 - pi_star <= 0.25) return 0;
    const Eigen::MatrixXd C = k.M() * k.W();  // nb x nb
    Eigen::MatrixXd S = k.W();                // nd x nb
    for (int64_t n = 1; n <= cap; ++n) {
        double worst = 0;
        for (int i = 0; i < nd; ++i) {
            double tv = 0;
            for (int b = 0; b < nb; ++b) tv += std::abs(S(i, b) - k.pi1()(b));
            worst = std::max(worst, tv / 2);
        }
        if (worst <= 0.25) return n;
        S = S * C;
    }
    throw NotConverged("mixing_time_product: no mixing within cap");
}

int64_t mixing_time_dense(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi, int64_t cap) {
    const int n = static_cast<int>(p.rows());
    auto worst_tv = [&](const Eigen::MatrixXd& q) {
        double worst = 0;
        for (int i = 0; i < n; ++i) {
            double tv = 0;
            for (int j = 0; j < n; ++j) tv += std::abs(q(i, j) - pi(j));
            worst = std::max(worst, tv / 2);
        }
        return worst;
    };
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
    for (int64_t k = 0; k <= cap; ++k) {
        if (worst_tv(q) <= 0.25) return k;
        q = q * p;
    }
    throw NotConverged("mixing_time_dense: no mixing within cap");
}

int64_t mixing_time_coupling(const slt::ChainKernel& k, long replicas, int64_t cap,
                             uint64_t seed, int threads) {
    const int n = k.size();
    // worst-case start pairs; all pairs for small spaces, a deterministic
    // stride sample otherwise
    std::vector<std::pair<int, int>> pairs;
    if (static_cast<int64_t>(n) * n <= 1024) {
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) pairs.push_back({a, b});
    } else {
        Philox prng(seed, 0xabc);
        for (int i = 0; i < 512; ++i)
            pairs.push_back({static_cast<int>(prng.uniform_int(static_cast<uint32_t>(n))),
                             static_cast<int>(prng.uniform_int(static_cast<uint32_t>(n)))});
    }
    std::vector<std::vector<long>> not_met(pairs.size());  // meet-time histogram tails
    parallel_for(static_cast<int64_t>(pairs.size()), threads, [&](int64_t pi_idx) {
        auto [a, b] = pairs[static_cast<size_t>(pi_idx)];
        std::vector<long>& tails = not_met[static_cast<size_t>(pi_idx)];
        tails.assign(static_cast<size_t>(cap) + 1, 0);
        for (long rep = 0; rep < replicas; ++rep) {
            Philox rng(seed, (static_cast<uint64_t>(pi_idx) << 32) | static_cast<uint64_t>(rep));
            int x = a, y = b;
            int64_t met_at = cap + 1;
            for (int64_t s = 1; s <= cap; ++s) {
                x = k.sample_next(x, rng);
                y = k.sample_next(y, rng);
                if (x == y) {
                    met_at = s;
                    break;
                }
            }
            for (int64_t s = 0; s < std::min<int64_t>(met_at, cap + 1); ++s) ++tails[static_cast<size_t>(s)];
        }
    });
    for (int64_t s = 0; s <= cap; ++s) {
        double worst = 0;
        for (const auto& tails : not_met)
            worst = std::max(worst, static_cast<double>(tails[static_cast<size_t>(s)]) /
                                        static_cast<double>(replicas));
        if (worst <= 0.25) return s;
    }
    throw NotConverged("mixing_time_coupling: no coalescence within cap");
}

DensityVariance density_variance(const ExcursionKernel& k) {
    const int nb = k.space().nb(), nd = k.space().nd();
    const Eigen::VectorXd pi2 = k.M().transpose() * k.pi1();  // over dDelta
    DensityVariance out;
    out.var.resize(nb);
    for (int b = 0; b < nb; ++b) {
        double mean = 0, sq = 0;
        for (int i = 0; i < nd; ++i) {
            const double w = k.W()(i, b);
            mean += pi2(i) * w;
            sq += pi2(i) * w * w;
        }
        out.var(b) = std::max(0.0, sq - k.pi1()(b) * k.pi1()(b));
        out.max_stationarity_gap = std::max(out.max_stationarity_gap, std::abs(mean - k.pi1()(b)));
    }
    out.max_var = out.var.maxCoeff();
    out.max_rho = k.W().maxCoeff();
    return out;
}

slt::KernelSpectral spectral_of_product(const ExcursionKernel& k) {
    const int nb = k.space().nb(), nd = k.space().nd();
    const DensityVariance dv = density_variance(k);
    slt::KernelSpectral s;
    s.pi_star = std::numeric_limits<double>::infinity();
    for (int b = 0; b < nb; ++b)
        for (int dd = 0; dd < nd; ++dd)
            s.pi_star = std::min(s.pi_star, k.pi1()(b) * k.M()(b, dd));
    s.g.resize(static_cast<size_t>(nb));
    s.var_rho.resize(static_cast<size_t>(nb));
    s.rho_inf.resize(static_cast<size_t>(nb));
    s.pi_over_nu.resize(static_cast<size_t>(nb));
    s.multiplicity.assign(static_cast<size_t>(nb), static_cast<double>(nd));
    for (int b = 0; b < nb; ++b) {
        s.g[static_cast<size_t>(b)] = k.pi1()(b);
        s.var_rho[static_cast<size_t>(b)] = dv.var(b);
        s.rho_inf[static_cast<size_t>(b)] = k.W().col(b).maxCoeff();
        s.pi_over_nu[static_cast<size_t>(b)] =
            k.nu1()(b) > 0 ? k.pi1()(b) / k.nu1()(b) : std::numeric_limits<double>::infinity();
    }
    return s;
}

std::vector<long> count_excursions_walk(const GeometrySets& gs, int64_t t, long replicas,
                                        uint64_t seed, int threads) {
    std::vector<long> out(static_cast<size_t>(replicas), 0);
    const lattice::Torus torus = gs.geom.torus();
    parallel_for(replicas, threads, [&](int64_t rep) {
        walk::TorusWalker w =
            walk::TorusWalker::uniform_start(torus, Philox(seed, static_cast<uint64_t>(rep)));
        bool armed = false;
        long count = 0;
        for (int64_t step = 0; step < t; ++step) {
            const int64_t f = w.flat();
            if (gs.Delta.contains(f)) {
                armed = true;
            } else if (armed && gs.B.contains(f)) {
                ++count;
                armed = false;
            }
            w.step();
        }
        out[static_cast<size_t>(rep)] = count;
    });
    return out;
}

RiExcursionCounts count_excursions_ri(const GeometrySets& gs, double u, double cap_B,
                                      const std::vector<double>& ebar_B, double kill_radius,
                                      long replicas, uint64_t seed, int threads) {
    if (!(u >= 0)) throw Error("count_excursions_ri: u must be nonnegative");
    const auto space = make_space(gs);
    const AliasTable start_alias(ebar_B);
    std::vector<long> n_prime(static_cast<size_t>(replicas), 0);
    std::vector<std::vector<long>> t_lists(static_cast<size_t>(replicas));
    parallel_for(replicas, threads, [&](int64_t rep) {
        Philox rng(seed, static_cast<uint64_t>(rep));
        const long j_u = rng.poisson(u * cap_B);
        long total = 0;
        for (long i = 0; i < j_u; ++i) {
            const int b = static_cast<int>(start_alias.sample(rng));
            const ri::TrajectoryResult tr = ri::simulate_trajectory(
                gs, space->b_of_flat, space->d_of_flat, space->dB[static_cast<size_t>(b)],
                kill_radius, false, rng);
            t_lists[static_cast<size_t>(rep)].push_back(static_cast<long>(tr.pairs.size()));
            total += static_cast<long>(tr.pairs.size());
        }
        n_prime[static_cast<size_t>(rep)] = total;
    });
    RiExcursionCounts out;
    out.n_prime = std::move(n_prime);
    for (auto& tl : t_lists)
        out.t_list.insert(out.t_list.end(), tl.begin(), tl.end());
    return out;
}

McKernelEstimate estimate_Y_kernel_mc(std::shared_ptr<const ExcursionSpace> space, int64_t steps,
                                      uint64_t seed) {
    McKernelEstimate out;
    out.space = space;
    out.from_totals.assign(static_cast<size_t>(space->states()), 0);
    const lattice::Torus t = space->gs.geom.torus();
    walk::TorusWalker w = walk::TorusWalker::uniform_start(t, Philox(seed, 0));
    int prev_state = -1;
    int pending_entry = -1;
    bool armed = false;
    for (int64_t step = 0; step < steps; ++step) {
        const int64_t f = w.flat();
        if (pending_entry >= 0) {
            // inside an excursion, waiting for the exit to Delta
            if (space->gs.Delta.contains(f)) {
                const int dd = space->d_of_flat[static_cast<size_t>(f)];
                const int state = space->state_of(pending_entry, dd);
                if (prev_state >= 0) {
                    ++out.counts[static_cast<uint64_t>(prev_state) *
                                     static_cast<uint64_t>(space->states()) +
                                 static_cast<uint64_t>(state)];
                    ++out.from_totals[static_cast<size_t>(prev_state)];
                }
                prev_state = state;
                pending_entry = -1;
                armed = true;
            }
        } else if (space->gs.Delta.contains(f)) {
            armed = true;
        } else if (armed && space->gs.B.contains(f)) {
            pending_entry = space->b_of_flat[static_cast<size_t>(f)];
            armed = false;
        }
        w.step();
    }
    return out;
}

McKernelEstimate estimate_Z_kernel_mc(std::shared_ptr<const ExcursionSpace> space,
                                      long trajectories, const std::vector<double>& ebar_B,
                                      double kill_radius, uint64_t seed) {
    McKernelEstimate out;
    out.space = space;
    out.from_totals.assign(static_cast<size_t>(space->states()), 0);
    const AliasTable start_alias(ebar_B);
    Philox rng(seed, 0);
    int prev_state = -1;
    for (long i = 0; i < trajectories; ++i) {
        const int b = static_cast<int>(start_alias.sample(rng));
        const ri::TrajectoryResult tr = ri::simulate_trajectory(
            space->gs, space->b_of_flat, space->d_of_flat, space->dB[static_cast<size_t>(b)],
            kill_radius, false, rng);
        for (const auto& pr : tr.pairs) {
            const int state = space->state_of(pr.first, pr.second);
            if (prev_state >= 0) {
                ++out.counts[static_cast<uint64_t>(prev_state) *
                                 static_cast<uint64_t>(space->states()) +
                             static_cast<uint64_t>(state)];
                ++out.from_totals[static_cast<size_t>(prev_state)];
            }
            prev_state = state;
        }
    }
    return out;
}

void export_kernel_csv(const std::string& path, const ExcursionKernel& k,
                       const std::string& mode) {
    std::ofstream f(path);
    if (!f) throw Error("export_kernel_csv: cannot open " + path);
    const auto& g = k.space().gs.geom;
    f << "{\"d\":" << g.d << ",\"N\":" << g.N << ",\"gamma\":" << g.gamma
      << ",\"chi\":" << g.chi << ",\"states\":" << k.space().states() << ",\"mode\":\"" << mode
      << "\"}\n";
    f << "i,j,p_ij\n";
    const int n = k.size();
    char buf[64];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double p = k.transition(i, j);
            if (p > 0) {
                std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", i, j, p);
                f << buf;
            }
        }
}

}  // namespace rwi::chains
