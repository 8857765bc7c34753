#pragma once

#include <vector>

namespace maform {

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre rule on [a, b].
GaussRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

// Chebyshev-Lobatto points x_j = cos(pi j / (n-1)) scaled to [-L, L], j = 0..n-1.
std::vector<double> chebyshev_points(int n, double half_width);
// Differentiation matrix on those points (row-major n x n).
std::vector<double> chebyshev_diff_matrix(int n, double half_width);
// Cumulative integral operator from 0 to x_j (row-major n x n).
std::vector<double> chebyshev_cumint_matrix(int n, double half_width);
// Barycentric interpolation weights (to evaluate at an arbitrary x).
std::vector<double> chebyshev_interp_row(int n, double half_width, double x);

}  // namespace maform

#include <cmath>
#include <stdexcept>

#include "maform/autodiff.hpp"

namespace maform {

// Tensor Chebyshev interpolant on [-L, L]^2 built from Lobatto samples v[i*n + j]
// at (x_i, y_j); evaluation goes through Clenshaw so jets pass through.
class ChebyshevTable2D {
public:
    ChebyshevTable2D() = default;
    ChebyshevTable2D(int n, double half_width, const std::vector<double>& values);

    int n() const { return n_; }
    double half_width() const { return L_; }
    const std::vector<double>& coeffs() const { return a_; }

    template <class S>
    S operator()(const S& x, const S& y) const {
        S tx = x / L_, ty = y / L_;
        std::vector<S> row(n_);
        for (int k = 0; k < n_; ++k) row[k] = clenshaw(&a_[static_cast<std::size_t>(k) * n_], ty);
        return clenshaw(row.data(), tx);
    }

private:
    template <class S, class C>
    S clenshaw(const C* c, const S& t) const {
        S b1(0.0), b2(0.0);
        for (int k = n_ - 1; k >= 1; --k) {
            S b0 = 2.0 * t * b1 - b2 + c[k];
            b2 = b1;
            b1 = b0;
        }
        return t * b1 - b2 + c[0];
    }

    int n_ = 0;
    double L_ = 1.0;
    std::vector<double> a_;
};

}  // namespace maform
