#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace alg {

// One-sided exact binomial tail P(X >= wins) for X ~ Binomial(wins+losses, 1/2).
// Ties must be excluded by the caller; an empty comparison yields p = 1.
inline double sign_test_p(int wins, int losses) {
    if (wins < 0 || losses < 0) throw std::invalid_argument("sign_test_p: negative counts");
    const int n = wins + losses;
    if (n == 0) return 1.0;
    double p = 0;
    for (int k = wins; k <= n; ++k) {
        double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        p += std::exp(log_c - n * std::log(2.0));
    }
    return std::min(1.0, p);
}

struct PairedSignTest {
    int wins = 0, losses = 0, ties = 0;
    double p = 1.0;  // one-sided, for "b exceeds a"
};

// Paired comparison of per-item values: tests whether b systematically exceeds a.
inline PairedSignTest paired_sign_test(const std::vector<double>& a,
                                       const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_sign_test: size mismatch");
    PairedSignTest out;
    for (size_t i = 0; i < a.size(); ++i) {
        if (b[i] > a[i])
            ++out.wins;
        else if (b[i] < a[i])
            ++out.losses;
        else
            ++out.ties;
    }
    out.p = sign_test_p(out.wins, out.losses);
    return out;
}

namespace detail {

inline std::vector<double> ranks_with_ties(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;  // 1-based average rank
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    return rank;
}

}  // namespace detail

// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman: need two equal-length series of size >= 2");
    auto rx = detail::ranks_with_ties(x);
    auto ry = detail::ranks_with_ties(y);
    const size_t n = x.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace alg
