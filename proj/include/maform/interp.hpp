#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "maform/autodiff.hpp"

namespace maform {

// Catmull-Rom weights for offset t in [0,1); generic so jets pass through.
template <class S>
std::array<S, 4> cubic_weights(const S& t) {
    S t2 = t * t;
    S t3 = t2 * t;
    return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0), 0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2)};
}

// Scalar table on a uniform 2D grid with piecewise-bicubic evaluation.
class BicubicTable {
public:
    BicubicTable() = default;
    BicubicTable(int nx, int ny, double x0, double y0, double h, std::vector<double> values)
        : nx_(nx), ny_(ny), x0_(x0), y0_(y0), h_(h), v_(std::move(values)) {
        if (static_cast<int>(v_.size()) != nx_ * ny_) throw std::invalid_argument("bicubic table size");
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double h() const { return h_; }
    double x0() const { return x0_; }
    double y0() const { return y0_; }
    double at(int i, int j) const { return v_[static_cast<std::size_t>(i) * ny_ + j]; }
    const std::vector<double>& values() const { return v_; }

    bool contains(double x, double y, int margin = 1) const {
        double fx = (x - x0_) / h_, fy = (y - y0_) / h_;
        return fx >= margin && fy >= margin && fx <= nx_ - 1 - margin && fy <= ny_ - 1 - margin;
    }

    template <class S>
    S operator()(const S& x, const S& y) const {
        double fx = (value_of(x) - x0_) / h_, fy = (value_of(y) - y0_) / h_;
        int i = std::clamp(static_cast<int>(std::floor(fx)), 1, nx_ - 3);
        int j = std::clamp(static_cast<int>(std::floor(fy)), 1, ny_ - 3);
        S tx = (x - x0_) / h_ - double(i);
        S ty = (y - y0_) / h_ - double(j);
        auto wx = cubic_weights(tx);
        auto wy = cubic_weights(ty);
        S acc(0.0);
        for (int a = 0; a < 4; ++a) {
            S row(0.0);
            for (int b = 0; b < 4; ++b) row = row + wy[b] * at(i - 1 + a, j - 1 + b);
            acc = acc + wx[a] * row;
        }
        return acc;
    }

private:
    int nx_ = 0, ny_ = 0;
    double x0_ = 0, y0_ = 0, h_ = 1;
    std::vector<double> v_;
};

}  // namespace maform
