#pragma once

// Shared oracles for the test suite. Everything here is deliberately
// independent of the library's analytic-gradient code paths: gradients are
// checked against central finite differences, PCA against a dense Jacobi
// eigensolver, KL against quadrature.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

// Max relative error between an analytic gradient and central finite
// differences of `f` at `params`, with h scaled per-coordinate.
inline double max_grad_rel_error(std::vector<double> params,
                                 const std::function<double(const std::vector<double>&)>& f,
                                 const std::vector<double>& analytic,
                                 double h_scale = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double h = h_scale * (1.0 + std::abs(params[i]));
        const double orig = params[i];
        params[i] = orig + h;
        const double fp = f(params);
        params[i] = orig - h;
        const double fm = f(params);
        params[i] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

// Full eigendecomposition of a small symmetric matrix by cyclic Jacobi
// rotations. Returns eigenvalues (descending) and matching eigenvectors.
struct EigenResult {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;  // vectors[k] is the k-th eigenvector
};

inline EigenResult jacobi_eigen(std::vector<std::vector<double>> A) {
    const std::size_t n = A.size();
    std::vector<std::vector<double>> V(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) V[i][i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += A[p][q] * A[p][q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(A[p][q]) < 1e-300) continue;
                const double theta = (A[q][q] - A[p][p]) / (2.0 * A[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A[k][p], akq = A[k][q];
                    A[k][p] = c * akp - s * akq;
                    A[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A[p][k], aqk = A[q][k];
                    A[p][k] = c * apk - s * aqk;
                    A[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = V[k][p], vkq = V[k][q];
                    V[k][p] = c * vkp - s * vkq;
                    V[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenResult res;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return A[a][a] > A[b][b]; });
    for (std::size_t k : order) {
        res.values.push_back(A[k][k]);
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = V[i][k];
        res.vectors.push_back(std::move(v));
    }
    return res;
}

// KL( N(m, e^{2ls}) || N(0,1) ) for one dimension by Simpson quadrature over
// mean +- 8 sigma.
inline double kl_quadrature_1d(double mean, double log_std) {
    const double sigma = std::exp(log_std);
    const double lo = mean - 8.0 * sigma;
    const double hi = mean + 8.0 * sigma;
    const int n = 20000;  // even
    const double h = (hi - lo) / n;
    auto integrand = [&](double x) {
        const double zq = (x - mean) / sigma;
        const double log_q = -0.5 * zq * zq - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
        const double log_p = -0.5 * x * x - 0.5 * std::log(2.0 * M_PI);
        return std::exp(log_q) * (log_q - log_p);
    };
    double sum = integrand(lo) + integrand(hi);
    for (int i = 1; i < n; ++i) sum += integrand(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

// Spearman rank correlation with average ranks for ties.
inline std::vector<double> ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

}  // namespace oracle
