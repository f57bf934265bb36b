#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rwi/common.hpp"

namespace rwi {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
//
// Streams are addressed, not advanced: the pair (seed, stream) selects an
// independent 2^64-block sequence, so replica k of a run seeded with S draws
// from Philox(S, k) and results do not depend on scheduling or thread count.
class Philox {
public:
    Philox() : Philox(0, 0) {}
    Philox(uint64_t seed, uint64_t stream) { reseed(seed, stream); }

    void reseed(uint64_t seed, uint64_t stream) {
        key_[0] = static_cast<uint32_t>(seed);
        key_[1] = static_cast<uint32_t>(seed >> 32);
        ctr_[0] = 0;
        ctr_[1] = 0;
        ctr_[2] = static_cast<uint32_t>(stream);
        ctr_[3] = static_cast<uint32_t>(stream >> 32);
        idx_ = 4;
    }

    // Value of the b-th 32-bit lane of block `block` in stream (seed,stream);
    // pure function of its arguments, used for order-independent lazy streams.
    static uint32_t at(uint64_t seed, uint64_t stream, uint64_t block, int lane) {
        std::array<uint32_t, 4> c = {static_cast<uint32_t>(block),
                                     static_cast<uint32_t>(block >> 32),
                                     static_cast<uint32_t>(stream),
                                     static_cast<uint32_t>(stream >> 32)};
        std::array<uint32_t, 2> k = {static_cast<uint32_t>(seed),
                                     static_cast<uint32_t>(seed >> 32)};
        bump(c, k);
        return c[static_cast<size_t>(lane)];
    }

    uint32_t next_u32() {
        if (idx_ == 4) refill();
        return buf_[idx_++];
    }

    uint64_t next_u64() {
        uint64_t lo = next_u32();
        uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform on (0,1]; never returns 0 so -log(u) is finite.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    // Uniform on {0,...,n-1} via 64-bit multiply-shift (bias < 2^-32).
    uint32_t uniform_int(uint32_t n) {
        return static_cast<uint32_t>((static_cast<uint64_t>(next_u32()) * n) >> 32);
    }

    // Counts arrivals of a unit Poisson process; fine for the desk-scale
    // means (< ~10^4) this project uses.
    long poisson(double mean) {
        if (mean <= 0) return 0;
        long k = 0;
        double acc = exponential(1.0);
        while (acc <= mean) {
            ++k;
            acc += exponential(1.0);
        }
        return k;
    }

private:
    static void round(std::array<uint32_t, 4>& c, const std::array<uint32_t, 2>& k) {
        const uint64_t p0 = 0xD2511F53ull * c[0];
        const uint64_t p1 = 0xCD9E8D57ull * c[2];
        const uint32_t h0 = static_cast<uint32_t>(p0 >> 32), l0 = static_cast<uint32_t>(p0);
        const uint32_t h1 = static_cast<uint32_t>(p1 >> 32), l1 = static_cast<uint32_t>(p1);
        c = {h1 ^ c[1] ^ k[0], l1, h0 ^ c[3] ^ k[1], l0};
    }

    static void bump(std::array<uint32_t, 4>& c, std::array<uint32_t, 2> k) {
        for (int r = 0; r < 10; ++r) {
            round(c, k);
            k[0] += 0x9E3779B9u;
            k[1] += 0xBB67AE85u;
        }
    }

    void refill() {
        std::array<uint32_t, 4> c = ctr_;
        std::array<uint32_t, 2> k = key_;
        bump(c, k);
        buf_ = c;
        idx_ = 0;
        if (++ctr_[0] == 0) ++ctr_[1];
    }

    std::array<uint32_t, 4> ctr_{}, buf_{};
    std::array<uint32_t, 2> key_{};
    int idx_ = 4;
};

// Walker alias table for repeated draws from a fixed discrete distribution.
class AliasTable {
public:
    AliasTable() = default;

    explicit AliasTable(const std::vector<double>& w) { build(w); }

    void build(const std::vector<double>& w) {
        const size_t n = w.size();
        if (n == 0) throw EmptySet("alias table over empty support");
        prob_.assign(n, 0.0);
        alias_.assign(n, 0);
        double total = 0;
        for (double x : w) {
            if (x < 0) throw Error("alias table: negative weight");
            total += x;
        }
        if (total <= 0) throw DegenerateRow("alias table: zero total mass");
        std::vector<double> scaled(n);
        std::vector<uint32_t> small, large;
        for (size_t i = 0; i < n; ++i) {
            scaled[i] = w[i] * static_cast<double>(n) / total;
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<uint32_t>(i));
        }
        while (!small.empty() && !large.empty()) {
            uint32_t s = small.back(), l = large.back();
            small.pop_back();
            large.pop_back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            (scaled[l] < 1.0 ? small : large).push_back(l);
        }
        for (uint32_t s : small) prob_[s] = 1.0;
        for (uint32_t l : large) prob_[l] = 1.0;
    }

    uint32_t sample(Philox& rng) const {
        const uint32_t i = rng.uniform_int(static_cast<uint32_t>(prob_.size()));
        return rng.uniform() <= prob_[i] ? i : alias_[i];
    }

    bool empty() const { return prob_.empty(); }

private:
    std::vector<double> prob_;
    std::vector<uint32_t> alias_;
};

}  // namespace rwi
