#pragma once

#include <array>
#include <functional>
#include <memory>
#include <tuple>

#include <Eigen/Dense>

#include "maform/autodiff.hpp"

namespace maform {

// Complex number over an arbitrary real scalar (jets included).
template <class S>
struct Cx {
    S re{}, im{};
    Cx() = default;
    Cx(const S& r, const S& i) : re(r), im(i) {}
    explicit Cx(double r) : re(S(r)), im(S(0.0)) {}

    friend Cx operator+(const Cx& a, const Cx& b) { return {a.re + b.re, a.im + b.im}; }
    friend Cx operator-(const Cx& a, const Cx& b) { return {a.re - b.re, a.im - b.im}; }
    friend Cx operator-(const Cx& a) { return {-a.re, -a.im}; }
    friend Cx operator*(const Cx& a, const Cx& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend Cx operator*(const S& s, const Cx& a) { return {s * a.re, s * a.im}; }
    friend Cx operator/(const Cx& a, const Cx& b) {
        S den = b.re * b.re + b.im * b.im;
        return {(a.re * b.re + a.im * b.im) / den, (a.im * b.re - a.re * b.im) / den};
    }
};

template <class S>
Cx<S> conj(const Cx<S>& a) { return {a.re, -a.im}; }
template <class S>
S abs2(const Cx<S>& a) { return a.re * a.re + a.im * a.im; }

template <int D>
using J1 = Jet<double, D>;
template <int D>
using J2 = Jet<J1<D>, D>;
template <int D>
using J3 = Jet<J2<D>, D>;

// Real scalar function on R^D stored for every scalar type the differentiators use.
template <int D>
class ScalarFn {
public:
    template <class S>
    using Sig = std::function<S(const std::array<S, D>&)>;

    ScalarFn() = default;

    template <class F>
    explicit ScalarFn(F f)
        : fns_(std::make_shared<Table>(Table{Sig<double>(f), Sig<J1<D>>(f), Sig<J2<D>>(f),
                                             Sig<J3<D>>(f)})) {}

    explicit operator bool() const { return static_cast<bool>(fns_); }

    template <class S>
    S operator()(const std::array<S, D>& x) const {
        return std::get<Sig<S>>(*fns_)(x);
    }

private:
    using Table = std::tuple<Sig<double>, Sig<J1<D>>, Sig<J2<D>>, Sig<J3<D>>>;
    std::shared_ptr<const Table> fns_;
};

template <int D>
struct Derivs2 {
    double value = 0;
    Eigen::Matrix<double, D, 1> grad;
    Eigen::Matrix<double, D, D> hess;
};

template <int D>
struct Derivs3 : Derivs2<D> {
    std::array<Eigen::Matrix<double, D, D>, D> third;
};

template <int D>
Derivs2<D> second_derivs(const ScalarFn<D>& f, const std::array<double, D>& x) {
    auto r = f(seed_point<J2<D>>(x));
    Derivs2<D> out;
    out.value = r.v.v;
    for (int i = 0; i < D; ++i) {
        out.grad(i) = r.d[i].v;
        for (int j = 0; j < D; ++j) out.hess(i, j) = r.d[i].d[j];
    }
    return out;
}

template <int D>
Derivs3<D> third_derivs(const ScalarFn<D>& f, const std::array<double, D>& x) {
    auto r = f(seed_point<J3<D>>(x));
    Derivs3<D> out;
    out.value = r.v.v.v;
    for (int i = 0; i < D; ++i) {
        out.grad(i) = r.d[i].v.v;
        for (int j = 0; j < D; ++j) {
            out.hess(i, j) = r.d[i].d[j].v;
            for (int k = 0; k < D; ++k) out.third[i](j, k) = r.d[i].d[j].d[k];
        }
    }
    return out;
}

}  // namespace maform
