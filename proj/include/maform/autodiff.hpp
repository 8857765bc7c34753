#pragma once

#include <array>
#include <cmath>
#include <type_traits>

namespace maform {

// Forward-mode jet with N seed directions. Nesting gives higher derivatives.
template <class T, int N>
struct Jet {
    T v{};
    std::array<T, N> d{};

    Jet() = default;
    Jet(double c) : v(T(c)) {}
    Jet(const T& val, const std::array<T, N>& der) : v(val), d(der) {}

    Jet& operator+=(const Jet& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Jet& operator*=(const Jet& o) { return *this = *this * o; }
    Jet& operator/=(const Jet& o) { return *this = *this / o; }
    Jet& operator*=(double s) {
        v *= s;
        for (int i = 0; i < N; ++i) d[i] *= s;
        return *this;
    }

    friend Jet operator-(const Jet& a) {
        Jet r;
        r.v = -a.v;
        for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
        return r;
    }
    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet r;
        r.v = a.v * b.v;
        for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
        return r;
    }
    friend Jet operator/(const Jet& a, const Jet& b) {
        Jet r;
        r.v = a.v / b.v;
        for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) / b.v;
        return r;
    }
    friend Jet operator+(Jet a, double s) { a.v += s; return a; }
    friend Jet operator+(double s, Jet a) { a.v += s; return a; }
    friend Jet operator-(Jet a, double s) { a.v -= s; return a; }
    friend Jet operator-(double s, const Jet& a) { Jet r = -a; r.v += s; return r; }
    friend Jet operator*(Jet a, double s) { return a *= s; }
    friend Jet operator*(double s, Jet a) { return a *= s; }
    friend Jet operator/(Jet a, double s) { return a *= (1.0 / s); }
    friend Jet operator/(double s, const Jet& a) { return Jet(s) / a; }

    friend bool operator<(const Jet& a, const Jet& b) { return a.v < b.v; }
    friend bool operator>(const Jet& a, const Jet& b) { return a.v > b.v; }
    friend bool operator<(const Jet& a, double b) { return a.v < b; }
    friend bool operator>(const Jet& a, double b) { return a.v > b; }
};

template <class T>
struct is_jet : std::false_type {};
template <class T, int N>
struct is_jet<Jet<T, N>> : std::true_type {};

inline double value_of(double x) { return x; }
template <class T, int N>
double value_of(const Jet<T, N>& x) { return value_of(x.v); }

namespace detail {
template <class T, int N, class F, class DF>
Jet<T, N> chain(const Jet<T, N>& a, const F& fv, const DF& dfv) {
    Jet<T, N> r;
    r.v = fv;
    for (int i = 0; i < N; ++i) r.d[i] = dfv * a.d[i];
    return r;
}
}  // namespace detail

template <class T, int N>
Jet<T, N> sqrt(const Jet<T, N>& a) {
    using std::sqrt;
    T s = sqrt(a.v);
    return detail::chain(a, s, 0.5 / s);
}
template <class T, int N>
Jet<T, N> log(const Jet<T, N>& a) {
    using std::log;
    return detail::chain(a, log(a.v), 1.0 / a.v);
}
template <class T, int N>
Jet<T, N> exp(const Jet<T, N>& a) {
    using std::exp;
    T e = exp(a.v);
    return detail::chain(a, e, e);
}
template <class T, int N>
Jet<T, N> sin(const Jet<T, N>& a) {
    using std::cos;
    using std::sin;
    return detail::chain(a, sin(a.v), cos(a.v));
}
template <class T, int N>
Jet<T, N> cos(const Jet<T, N>& a) {
    using std::cos;
    using std::sin;
    return detail::chain(a, cos(a.v), -sin(a.v));
}
template <class T, int N>
Jet<T, N> atan2(const Jet<T, N>& y, const Jet<T, N>& x) {
    using std::atan2;
    T r2 = x.v * x.v + y.v * y.v;
    Jet<T, N> r;
    r.v = atan2(y.v, x.v);
    for (int i = 0; i < N; ++i) r.d[i] = (x.v * y.d[i] - y.v * x.d[i]) / r2;
    return r;
}

template <class S>
S ipow(const S& x, int k) {
    S r(1.0);
    for (int i = 0; i < k; ++i) r = r * x;
    return r;
}

// Seed variable i of a nested jet type; every nesting level gets the same direction.
template <class S>
struct Seeder {
    static S make(double x, int) { return S(x); }
};
template <class T, int N>
struct Seeder<Jet<T, N>> {
    static Jet<T, N> make(double x, int i) {
        Jet<T, N> r;
        r.v = Seeder<T>::make(x, i);
        if (i >= 0 && i < N) r.d[i] = T(1.0);
        return r;
    }
};

template <class S, std::size_t D>
std::array<S, D> seed_point(const std::array<double, D>& x) {
    std::array<S, D> r;
    for (std::size_t i = 0; i < D; ++i) r[i] = Seeder<S>::make(x[i], static_cast<int>(i));
    return r;
}

}  // namespace maform
