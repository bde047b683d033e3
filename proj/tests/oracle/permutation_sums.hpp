#pragma once

// Brute-force evaluation of S_k and its entry derivatives straight from the
// generalized Kronecker delta definition. Test-only; shares no code with the
// eigenvalue route in horo/symfunc.hpp.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <utility>
#include <vector>

namespace oracle {

/// sum over index sets T (|T| = k) and bijections tau of T with tau(src) = tgt
/// for every pinned pair, of sgn(tau) * prod_{a free} A(a, tau(a)).
inline double delta_sum(int k, const Eigen::MatrixXd& a, const std::vector<std::pair<int, int>>& pinned) {
    const int n = static_cast<int>(a.rows());
    if (k < 0 || k > n) return 0.0;
    if (static_cast<int>(pinned.size()) > k) return 0.0;
    for (std::size_t x = 0; x < pinned.size(); ++x)
        for (std::size_t y = x + 1; y < pinned.size(); ++y)
            if (pinned[x].first == pinned[y].first || pinned[x].second == pinned[y].second) return 0.0;

    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (std::popcount(mask) != k) continue;
        std::vector<int> set;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) set.push_back(i);
        auto in_set = [&](int v) { return (mask >> v) & 1u; };
        bool ok = true;
        for (auto [s, t] : pinned) ok = ok && in_set(s) && in_set(t);
        if (!ok) continue;

        std::vector<int> free_src, free_tgt;
        for (int v : set) {
            if (std::none_of(pinned.begin(), pinned.end(), [&](auto p) { return p.first == v; })) free_src.push_back(v);
            if (std::none_of(pinned.begin(), pinned.end(), [&](auto p) { return p.second == v; })) free_tgt.push_back(v);
        }
        std::vector<int> pos(n, -1);
        for (int idx = 0; idx < k; ++idx) pos[set[idx]] = idx;

        std::vector<int> perm = free_tgt;
        do {
            std::vector<int> tau(k);
            double prod = 1.0;
            for (auto [s, t] : pinned) tau[pos[s]] = pos[t];
            for (std::size_t f = 0; f < free_src.size(); ++f) {
                tau[pos[free_src[f]]] = pos[perm[f]];
                prod *= a(free_src[f], perm[f]);
            }
            std::vector<bool> seen(k, false);
            int cycles = 0;
            for (int st = 0; st < k; ++st) {
                if (seen[st]) continue;
                ++cycles;
                for (int c = st; !seen[c]; c = tau[c]) seen[c] = true;
            }
            total += ((k - cycles) % 2 == 0 ? 1.0 : -1.0) * prod;
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
    return total;
}

inline double sk(int k, const Eigen::MatrixXd& a) {
    if (k == 0) return 1.0;
    return delta_sum(k, a, {});
}
inline double sk_grad(int k, const Eigen::MatrixXd& a, int i, int j) { return delta_sum(k, a, {{i, j}}); }
inline double sk_hess(int k, const Eigen::MatrixXd& a, int i, int j, int r, int s) {
    return delta_sum(k, a, {{i, j}, {r, s}});
}

/// S_k of a vector by summing over all k-subsets.
inline double sk_subsets(int k, const std::vector<double>& lambda) {
    const int n = static_cast<int>(lambda.size());
    if (k < 0 || k > n) return 0.0;
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (std::popcount(mask) != k) continue;
        double prod = 1.0;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) prod *= lambda[i];
        total += prod;
    }
    return total;
}

}  // namespace oracle
