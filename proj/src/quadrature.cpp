#include "maform/quadrature.hpp"

#include <Eigen/Dense>

namespace maform {

GaussRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1");
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        double beta = i / std::sqrt(4.0 * i * i - 1.0);
        t(i, i - 1) = t(i - 1, i) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    GaussRule r;
    for (int i = 0; i < n; ++i) {
        double x = es.eigenvalues()(i);
        double w = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
        r.nodes.push_back(0.5 * (b - a) * x + 0.5 * (b + a));
        r.weights.push_back(0.5 * (b - a) * w);
    }
    return r;
}

std::vector<double> chebyshev_points(int n, double half_width) {
    std::vector<double> x(n);
    for (int j = 0; j < n; ++j) x[j] = half_width * std::cos(M_PI * j / (n - 1));
    return x;
}

std::vector<double> chebyshev_diff_matrix(int n, double half_width) {
    auto x = chebyshev_points(n, 1.0);
    std::vector<double> c(n, 1.0);
    c[0] = c[n - 1] = 2.0;
    std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double rowsum = 0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double sign = ((i + j) & 1) ? -1.0 : 1.0;
            double v = c[i] / c[j] * sign / (x[i] - x[j]);
            d[static_cast<std::size_t>(i) * n + j] = v / half_width;
            rowsum += v;
        }
        d[static_cast<std::size_t>(i) * n + i] = -rowsum / half_width;
    }
    return d;
}

std::vector<double> chebyshev_interp_row(int n, double half_width, double x) {
    auto xs = chebyshev_points(n, half_width);
    std::vector<double> row(n, 0.0);
    for (int j = 0; j < n; ++j)
        if (x == xs[j]) {
            row[j] = 1.0;
            return row;
        }
    double den = 0;
    for (int j = 0; j < n; ++j) {
        double w = ((j & 1) ? -1.0 : 1.0) * ((j == 0 || j == n - 1) ? 0.5 : 1.0);
        row[j] = w / (x - xs[j]);
        den += row[j];
    }
    for (auto& r : row) r /= den;
    return row;
}

std::vector<double> chebyshev_cumint_matrix(int n, double half_width) {
    auto xs = chebyshev_points(n, half_width);
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        auto rule = gauss_legendre(n, 0.0, xs[i]);
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            auto row = chebyshev_interp_row(n, half_width, rule.nodes[q]);
            for (int k = 0; k < n; ++k) m[static_cast<std::size_t>(i) * n + k] += rule.weights[q] * row[k];
        }
    }
    return m;
}

namespace {

// Chebyshev coefficients from Lobatto samples f_j = f(cos(pi j / N)).
std::vector<double> dct1(const double* f, int n, int stride) {
    int N = n - 1;
    std::vector<double> a(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int j = 0; j < n; ++j) {
            double w = (j == 0 || j == N) ? 0.5 : 1.0;
            s += w * f[j * stride] * std::cos(M_PI * j * k / N);
        }
        a[k] = 2.0 * s / N;
    }
    a[0] *= 0.5;
    a[N] *= 0.5;
    return a;
}

}  // namespace

ChebyshevTable2D::ChebyshevTable2D(int n, double half_width, const std::vector<double>& values)
    : n_(n), L_(half_width), a_(static_cast<std::size_t>(n) * n, 0.0) {
    if (n < 2 || static_cast<int>(values.size()) != n * n) throw std::invalid_argument("chebyshev table size");
    // along y for each x_i, then along x
    std::vector<double> tmp(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        auto a = dct1(&values[static_cast<std::size_t>(i) * n], n, 1);
        for (int l = 0; l < n; ++l) tmp[static_cast<std::size_t>(i) * n + l] = a[l];
    }
    for (int l = 0; l < n; ++l) {
        auto a = dct1(&tmp[l], n, n);
        for (int k = 0; k < n; ++k) a_[static_cast<std::size_t>(k) * n + l] = a[k];
    }
}

}  // namespace maform
