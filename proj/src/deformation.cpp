#include "maform/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "maform/domain_model.hpp"
#include "maform/moser_normalizer.hpp"
#include "maform/parallel.hpp"

namespace maform {

namespace {

constexpr double kPi = 3.14159265358979323846;

double max_abs(const Eigen::MatrixXcd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

std::string where(int chart, const Eigen::VectorXcd& v, cplx zeta) {
    std::ostringstream os;
    os << "chart " << chart << " v = (";
    for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i).real() << (v(i).imag() < 0 ? "" : "+") << v(i).imag() << "i";
    os << ") zeta = " << zeta.real() << (zeta.imag() < 0 ? "" : "+") << zeta.imag() << "i";
    return os.str();
}

// Real coordinates (Re v1, Im v1, ..., Re zeta, Im zeta) and back.
Eigen::VectorXd to_real(const Eigen::VectorXcd& v, cplx zeta) {
    int m = static_cast<int>(v.size());
    Eigen::VectorXd x(2 * m + 2);
    for (int i = 0; i < m; ++i) {
        x(2 * i) = v(i).real();
        x(2 * i + 1) = v(i).imag();
    }
    x(2 * m) = zeta.real();
    x(2 * m + 1) = zeta.imag();
    return x;
}

void from_real(const Eigen::VectorXd& x, Eigen::VectorXcd& v, cplx& zeta) {
    int m = static_cast<int>(x.size() / 2) - 1;
    v.resize(m);
    for (int i = 0; i < m; ++i) v(i) = cplx(x(2 * i), x(2 * i + 1));
    zeta = cplx(x(2 * m), x(2 * m + 1));
}

// Fourth-order central difference of a matrix-valued function along real axis l.
template <class M, class F>
M central_difference(const F& f, const Eigen::VectorXd& x, int l, double h) {
    Eigen::VectorXd p1 = x, p2 = x, m1 = x, m2 = x;
    p1(l) += h;
    p2(l) += 2 * h;
    m1(l) -= h;
    m2(l) -= 2 * h;
    return (-f(p2) + 8.0 * f(p1) - 8.0 * f(m1) + f(m2)) / (12.0 * h);
}

}  // namespace

// ---------------------------------------------------------------- grid

std::size_t TensorGrid::nodes() const {
    std::size_t s = 1;
    for (int i = 0; i < base_dim(); ++i) s *= static_cast<std::size_t>(base_points);
    return s;
}

double TensorGrid::spacing() const { return base_points > 1 ? 2.0 * extent / (base_points - 1) : 0.0; }

Eigen::VectorXcd TensorGrid::base_point(std::size_t node) const {
    int d = base_dim();
    Eigen::VectorXd x(d);
    double h = spacing();
    for (int i = d - 1; i >= 0; --i) {
        x(i) = -extent + static_cast<double>(node % base_points) * h;
        node /= base_points;
    }
    Eigen::VectorXcd v(n - 1);
    for (int i = 0; i < n - 1; ++i) v(i) = cplx(x(2 * i), x(2 * i + 1));
    return v;
}

void TensorGrid::validate() const {
    if (n < 2) throw DomainError("tensor grid: n must be at least 2");
    if (charts < 1 || charts > n) throw DomainError("tensor grid: charts must be in 1..n");
    if (base_points < 2) throw DomainError("tensor grid: base_points must be at least 2");
    if (angles < 2 || (angles & (angles - 1))) throw DomainError("tensor grid: N_theta must be a power of two");
    if (radii.empty()) throw DomainError("tensor grid: no fiber radii");
    for (double r : radii)
        if (!(r > 0.0 && r < 1.0)) throw DomainError("tensor grid: fiber radii must lie in (0, 1)");
}

// ---------------------------------------------------------------- pointwise algebra

Eigen::MatrixXcd blowup_frame(const Eigen::VectorXcd& v, cplx zeta) {
    int m = static_cast<int>(v.size());
    int n = m + 1;
    const cplx I(0, 1);
    double s = 1.0 + v.squaredNorm();
    Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    auto put = [&](int col, int coord, cplx coef) {  // coef * d/dw_coord
        b(2 * coord, col) += 0.5 * coef;
        b(2 * coord + 1, col) += -0.5 * I * coef;
    };
    for (int a = 0; a < m; ++a) {
        put(a, a, 1.0);
        put(a, m, -std::conj(v(a)) * zeta / s);
    }
    put(m, m, zeta);
    b.rightCols(n) = b.leftCols(n).conjugate();
    return b;
}

Eigen::MatrixXcd horizontal_metric(const Eigen::VectorXcd& v, cplx zeta) {
    int m = static_cast<int>(v.size());
    int n = m + 1;
    double s = 1.0 + v.squaredNorm();
    // Levi matrix L_{j kbar} of tau_o = |zeta|^2 (1 + |v|^2) in (v, zeta)
    Eigen::MatrixXcd lv = Eigen::MatrixXcd::Zero(n, n);
    for (int a = 0; a < m; ++a) {
        lv(a, a) = std::norm(zeta);
        lv(a, m) = zeta * std::conj(v(a));
        lv(m, a) = std::conj(zeta) * v(a);
    }
    lv(m, m) = s;
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(n, m);  // holomorphic components of e_a
    for (int a = 0; a < m; ++a) {
        e(a, a) = 1.0;
        e(m, a) = -std::conj(v(a)) * zeta / s;
    }
    return e.transpose() * lv * e.conjugate() / std::norm(zeta);
}

Eigen::MatrixXd structure_from_tensor(const Eigen::MatrixXcd& phi, const Eigen::VectorXcd& v, cplx zeta) {
    int m = static_cast<int>(v.size());
    int n = m + 1;
    Eigen::MatrixXcd b = blowup_frame(v, zeta);
    Eigen::MatrixXcd c(2 * n, 2 * n);
    for (int j = 0; j < m; ++j) c.col(j) = b.col(n + j) + b.leftCols(m) * phi.col(j);
    c.col(m) = b.col(2 * n - 1);
    c.rightCols(n) = c.leftCols(n).conjugate();
    Eigen::VectorXcd d(2 * n);
    d.head(n).setConstant(cplx(0, -1));
    d.tail(n).setConstant(cplx(0, 1));
    Eigen::MatrixXcd j = c * d.asDiagonal() * c.inverse();
    return j.real();
}

Eigen::MatrixXcd tensor_from_structure(const Eigen::MatrixXd& j, const Eigen::VectorXcd& v, cplx zeta,
                                       ExtractionDiagnostics* diag) {
    int m = static_cast<int>(v.size());
    int n = m + 1;
    Eigen::MatrixXcd b = blowup_frame(v, zeta);
    Eigen::MatrixXcd p = 0.5 * (Eigen::MatrixXcd::Identity(2 * n, 2 * n) + cplx(0, 1) * j.cast<cplx>());
    Eigen::MatrixXcd coef = b.partialPivLu().solve(p * b.middleCols(n, m));
    Eigen::MatrixXcd a = coef.topRows(m);
    Eigen::MatrixXcd g = coef.middleRows(n, m);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(g);
    double smin = svd.singularValues().minCoeff(), smax = svd.singularValues().maxCoeff();
    double cond = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (diag) {
        diag->zeta_defect = coef.row(m).cwiseAbs().maxCoeff();
        diag->condition = cond;
    }
    if (!(cond < 1e10)) throw DomainError("graph degeneracy (operator norm of phi reaches 1) at " + where(0, v, zeta));
    return a * g.inverse();
}

double tensor_norm(const Eigen::MatrixXcd& phi, const Eigen::VectorXcd& v) {
    Eigen::MatrixXcd g = horizontal_metric(v, 1.0);
    Eigen::LLT<Eigen::MatrixXcd> llt(g);
    Eigen::MatrixXcd l = llt.matrixL();
    Eigen::MatrixXcd mt = l.conjugate();  // g^T = mt mt^*
    Eigen::MatrixXcd x = mt.adjoint() * phi * l.adjoint().inverse();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(x);
    return svd.singularValues()(0);
}

// ---------------------------------------------------------------- sampled tensors

std::size_t DeformationTensor::index(int chart, std::size_t node, int ring, int angle) const {
    std::size_t r = grid_.radii.size(), a = static_cast<std::size_t>(grid_.angles);
    return ((static_cast<std::size_t>(chart) * grid_.nodes() + node) * r + static_cast<std::size_t>(ring)) * a +
           static_cast<std::size_t>(angle);
}

cplx DeformationTensor::zeta(int ring, int angle) const {
    return std::polar(grid_.radii[static_cast<std::size_t>(ring)], 2.0 * kPi * angle / grid_.angles);
}

DeformationTensor DeformationTensor::sample(TensorGrid grid, TensorFn fn, std::string label) {
    grid.validate();
    DeformationTensor t;
    t.grid_ = std::move(grid);
    t.label_ = std::move(label);
    t.fn_ = std::move(fn);
    const TensorGrid& g = t.grid_;
    std::size_t nodes = g.nodes();
    int rings = static_cast<int>(g.radii.size());
    t.values_.resize(static_cast<std::size_t>(g.charts) * nodes * rings * g.angles);
    parallel_for(static_cast<std::size_t>(g.charts) * nodes, [&](std::size_t cn) {
        int c = static_cast<int>(cn / nodes);
        std::size_t node = cn % nodes;
        Eigen::VectorXcd v = g.base_point(node);
        for (int r = 0; r < rings; ++r)
            for (int a = 0; a < g.angles; ++a) t.values_[t.index(c, node, r, a)] = t.fn_(c, v, t.zeta(r, a));
    });
    return t;
}

double DeformationTensor::max_norm() const {
    double m = 0;
    for (const auto& x : values_) m = std::max(m, max_abs(x));
    return m;
}

// ---------------------------------------------------------------- modes

double ModeSet::norm(int k) const {
    double m = 0;
    for (const auto& x : coeff[static_cast<std::size_t>(k)]) m = std::max(m, max_abs(x));
    return m;
}

std::vector<double> ModeSet::norms() const {
    std::vector<double> r;
    for (int k = 0; k <= kmax; ++k) r.push_back(norm(k));
    return r;
}

Eigen::MatrixXcd ModeSet::value(int chart, std::size_t node, cplx zeta) const {
    std::size_t i = static_cast<std::size_t>(chart) * grid.nodes() + node;
    Eigen::MatrixXcd s = coeff[0][i];
    cplx zk = 1.0;
    for (int k = 1; k <= kmax; ++k) {
        zk *= zeta;
        s += zk * coeff[static_cast<std::size_t>(k)][i];
    }
    return s;
}

ModeSet fourier_modes(const DeformationTensor& phi, int kmax) {
    const TensorGrid& g = phi.grid();
    if (kmax < 0) throw DomainError("fourier_modes: kmax must be nonnegative");
    if (g.angles < 2 * (kmax + 1))
        throw DomainError("fourier_modes: N_theta = " + std::to_string(g.angles) + " < 2 (kmax + 1)");
    ModeSet ms;
    ms.grid = g;
    ms.kmax = kmax;
    ms.label = phi.label();
    std::size_t nodes = g.nodes(), total = static_cast<std::size_t>(g.charts) * nodes;
    int rings = static_cast<int>(g.radii.size());
    int na = g.angles;
    int m = phi.n() - 1;
    ms.coeff.assign(static_cast<std::size_t>(kmax) + 1, std::vector<Eigen::MatrixXcd>(total));
    std::vector<double> dev(total, 0.0), neg(total, 0.0), tail(total, 0.0);
    parallel_for(total, [&](std::size_t cn) {
        int c = static_cast<int>(cn / nodes);
        std::size_t node = cn % nodes;
        // dft[r][k + na/2 - 1], k = -na/2+1 .. na/2
        std::vector<std::vector<Eigen::MatrixXcd>> dft(static_cast<std::size_t>(rings));
        for (int r = 0; r < rings; ++r) {
            auto& row = dft[static_cast<std::size_t>(r)];
            row.assign(static_cast<std::size_t>(na), Eigen::MatrixXcd::Zero(m, m));
            for (int kk = 0; kk < na; ++kk) {
                int k = kk - na / 2 + 1;
                for (int a = 0; a < na; ++a)
                    row[static_cast<std::size_t>(kk)] +=
                        std::polar(1.0, -2.0 * kPi * k * a / na) * phi.at(c, node, r, a);
                row[static_cast<std::size_t>(kk)] /= static_cast<double>(na);
                if (k < 0) neg[cn] = std::max(neg[cn], max_abs(row[static_cast<std::size_t>(kk)]));
            }
        }
        for (int k = 0; k <= kmax; ++k) {
            std::size_t kk = static_cast<std::size_t>(k + na / 2 - 1);
            Eigen::MatrixXcd mean = Eigen::MatrixXcd::Zero(m, m);
            std::vector<Eigen::MatrixXcd> est;
            for (int r = 0; r < rings; ++r) {
                est.push_back(dft[static_cast<std::size_t>(r)][kk] / std::pow(g.radii[static_cast<std::size_t>(r)], k));
                mean += est.back();
            }
            mean /= static_cast<double>(rings);
            for (const auto& e : est) dev[cn] = std::max(dev[cn], max_abs(e - mean));
            ms.coeff[static_cast<std::size_t>(k)][cn] = mean;
        }
        for (int r = 0; r < rings; ++r)
            for (int a = 0; a < na; ++a)
                tail[cn] = std::max(tail[cn], max_abs(phi.at(c, node, r, a) - ms.value(c, node, phi.zeta(r, a))));
    });
    for (std::size_t i = 0; i < total; ++i) {
        ms.ring_deviation = std::max(ms.ring_deviation, dev[i]);
        ms.negative_energy = std::max(ms.negative_energy, neg[i]);
        ms.tail = std::max(ms.tail, tail[i]);
    }
    return ms;
}

DeformationTensor tensor_from_modes(const ModeSet& modes, std::string label) {
    DeformationTensor t;
    t.grid_ = modes.grid;
    t.label_ = std::move(label);
    const TensorGrid& g = t.grid_;
    std::size_t nodes = g.nodes();
    int rings = static_cast<int>(g.radii.size());
    t.values_.resize(static_cast<std::size_t>(g.charts) * nodes * rings * g.angles);
    for (int c = 0; c < g.charts; ++c)
        for (std::size_t node = 0; node < nodes; ++node)
            for (int r = 0; r < rings; ++r)
                for (int a = 0; a < g.angles; ++a)
                    t.values_[t.index(c, node, r, a)] = modes.value(c, node, t.zeta(r, a));
    return t;
}

GridDump modes_to_dump(const ModeSet& ms) {
    GridDump d;
    const TensorGrid& g = ms.grid;
    auto& meta = d.add("tensor_meta", -1, {9 + static_cast<int>(g.radii.size())});
    meta.values = {cplx(g.n),       cplx(g.charts),         cplx(g.base_points),      cplx(g.extent),
                   cplx(ms.kmax),   cplx(g.angles),         cplx(ms.ring_deviation), cplx(ms.negative_energy),
                   cplx(ms.tail)};
    for (double r : g.radii) meta.values.push_back(r);
    int m = g.n - 1;
    std::vector<int> shape(static_cast<std::size_t>(g.base_dim()), g.base_points);
    shape.push_back(m);
    shape.push_back(m);
    std::size_t nodes = g.nodes();
    for (int k = 0; k <= ms.kmax; ++k)
        for (int c = 0; c < g.charts; ++c) {
            auto& rec = d.add("phi_mode_" + std::to_string(k), c, shape);
            for (std::size_t node = 0; node < nodes; ++node) {
                const auto& x = ms.coeff[static_cast<std::size_t>(k)][static_cast<std::size_t>(c) * nodes + node];
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b) rec.values[(node * m + a) * m + b] = x(a, b);
            }
        }
    return d;
}

ModeSet modes_from_dump(const GridDump& d) {
    const GridRecord* meta = d.find("tensor_meta", -1);
    if (!meta || meta->values.size() < 10) throw DomainError("tensor dump lacks tensor_meta");
    auto iv = [&](std::size_t i) { return static_cast<int>(std::lround(meta->values[i].real())); };
    ModeSet ms;
    TensorGrid& g = ms.grid;
    g.n = iv(0);
    g.charts = iv(1);
    g.base_points = iv(2);
    g.extent = meta->values[3].real();
    ms.kmax = iv(4);
    g.angles = iv(5);
    ms.ring_deviation = meta->values[6].real();
    ms.negative_energy = meta->values[7].real();
    ms.tail = meta->values[8].real();
    g.radii.clear();
    for (std::size_t i = 9; i < meta->values.size(); ++i) g.radii.push_back(meta->values[i].real());
    g.validate();
    int m = g.n - 1;
    std::size_t nodes = g.nodes();
    ms.coeff.assign(static_cast<std::size_t>(ms.kmax) + 1,
                    std::vector<Eigen::MatrixXcd>(static_cast<std::size_t>(g.charts) * nodes));
    for (int k = 0; k <= ms.kmax; ++k)
        for (int c = 0; c < g.charts; ++c) {
            const GridRecord* rec = d.find("phi_mode_" + std::to_string(k), c);
            if (!rec || rec->values.size() != nodes * m * m)
                throw DomainError("tensor dump: bad record phi_mode_" + std::to_string(k) + " chart " +
                                  std::to_string(c));
            for (std::size_t node = 0; node < nodes; ++node) {
                Eigen::MatrixXcd x(m, m);
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b) x(a, b) = rec->values[(node * m + a) * m + b];
                ms.coeff[static_cast<std::size_t>(k)][static_cast<std::size_t>(c) * nodes + node] = x;
            }
        }
    return ms;
}

ModeSet rotate(const ModeSet& modes, double theta) {
    ModeSet r = modes;
    for (int k = 1; k <= r.kmax; ++k)
        for (auto& x : r.coeff[static_cast<std::size_t>(k)]) x *= std::polar(1.0, k * theta);
    return r;
}

ModeSet contract(const ModeSet& modes, double k) {
    ModeSet r = modes;
    for (int j = 1; j <= r.kmax; ++j)
        for (auto& x : r.coeff[static_cast<std::size_t>(j)]) x *= std::pow(k, j);
    return r;
}

TensorFn rotate(const TensorFn& fn, double theta) {
    cplx u = std::polar(1.0, theta);
    return [fn, u](int c, const Eigen::VectorXcd& v, cplx zeta) { return fn(c, v, u * zeta); };
}

TensorFn contract(const TensorFn& fn, double k) {
    return [fn, k](int c, const Eigen::VectorXcd& v, cplx zeta) { return fn(c, v, k * zeta); };
}

// ---------------------------------------------------------------- structures

StructureFn reconstruct(const TensorFn& fn, int n) {
    return [fn, n](int c, const Eigen::VectorXcd& v, cplx zeta) {
        if (v.size() != n - 1) throw DomainError("reconstruct: base point of wrong dimension");
        Eigen::MatrixXcd phi = fn(c, v, zeta);
        double norm = tensor_norm(phi, v);
        if (!(norm < 1.0))
            throw DomainError("condition (iv) violated (operator norm " + std::to_string(norm) + ") at " +
                              where(c, v, zeta));
        return structure_from_tensor(phi, v, zeta);
    };
}

StructureFn structure_from_map(const NormalizingMap& map) {
    const NormalizingMap* mp = &map;
    return [mp](int c, const Eigen::VectorXcd& v, cplx zeta) {
        if (v.size() != 1) throw DomainError("normalizing maps are two-dimensional");
        auto p = seed_point<J1<2>>(std::array<double, 2>{v(0).real(), v(0).imag()});
        auto f = mp->fiber_image(c, Cx<J1<2>>(p[0], p[1]));
        Eigen::Matrix4d d;
        for (int j = 0; j < 2; ++j) {
            cplx fj(f[static_cast<std::size_t>(j)].re.v, f[static_cast<std::size_t>(j)].im.v);
            for (int l = 0; l < 2; ++l) {
                cplx dl = zeta * cplx(f[static_cast<std::size_t>(j)].re.d[l], f[static_cast<std::size_t>(j)].im.d[l]);
                d(2 * j, l) = dl.real();
                d(2 * j + 1, l) = dl.imag();
            }
            cplx dx = fj, dy = cplx(0, 1) * fj;
            d(2 * j, 2) = dx.real();
            d(2 * j + 1, 2) = dx.imag();
            d(2 * j, 3) = dy.real();
            d(2 * j + 1, 3) = dy.imag();
        }
        Eigen::Matrix4d js = standard_complex_structure(4);
        Eigen::MatrixXd j = d.inverse() * js * d;
        return j;
    };
}

DeformationTensor extract(const StructureFn& j, TensorGrid grid, std::string label) {
    StructureFn jj = j;
    TensorFn fn = [jj](int c, const Eigen::VectorXcd& v, cplx zeta) {
        return tensor_from_structure(jj(c, v, zeta), v, zeta);
    };
    DeformationTensor t = DeformationTensor::sample(std::move(grid), fn, std::move(label));
    const TensorGrid& g = t.grid();
    std::size_t nodes = g.nodes();
    std::vector<double> defect(static_cast<std::size_t>(g.charts) * nodes, 0.0);
    int ring = static_cast<int>(g.radii.size()) - 1;
    parallel_for(defect.size(), [&](std::size_t cn) {
        int c = static_cast<int>(cn / nodes);
        Eigen::VectorXcd v = g.base_point(cn % nodes);
        cplx z = t.zeta(ring, 0);
        ExtractionDiagnostics dg;
        tensor_from_structure(jj(c, v, z), v, z, &dg);
        defect[cn] = dg.zeta_defect;
    });
    t.set_zeta_defect(*std::max_element(defect.begin(), defect.end()));
    return t;
}

DeformationTensor extract(const NormalizingMap& map, TensorGrid grid) {
    if (grid.n != 2) throw DomainError("normalizing maps are two-dimensional");
    return extract(structure_from_map(map), std::move(grid), "normalized " + map.mu().describe());
}

double nijenhuis_residual(const StructureFn& j, int n, int chart, const Eigen::VectorXcd& v, cplx zeta, double h) {
    int d = 2 * n;
    Eigen::VectorXd x = to_real(v, zeta);
    auto jf = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXcd vv;
        cplx z;
        from_real(p, vv, z);
        return Eigen::MatrixXd(j(chart, vv, z));
    };
    Eigen::MatrixXd j0 = jf(x);
    std::vector<Eigen::MatrixXd> dj;
    for (int l = 0; l < d; ++l) dj.push_back(central_difference<Eigen::MatrixXd>(jf, x, l, h));
    double worst = 0;
    for (int i = 0; i < d; ++i)
        for (int jj = i + 1; jj < d; ++jj)
            for (int k = 0; k < d; ++k) {
                double s = 0;
                for (int l = 0; l < d; ++l) {
                    s += j0(l, i) * dj[static_cast<std::size_t>(l)](k, jj) -
                         j0(l, jj) * dj[static_cast<std::size_t>(l)](k, i);
                    s += j0(k, l) * (dj[static_cast<std::size_t>(jj)](l, i) - dj[static_cast<std::size_t>(i)](l, jj));
                }
                worst = std::max(worst, std::abs(s));
            }
    return worst;
}

// ---------------------------------------------------------------- conditions

namespace {

struct BracketResidual {
    double full = 0;  // max over pairs of the H^{1,0} + H^{0,1} residual
    double h01 = 0;   // H^{0,1} part of [X, phi(Y)]
    // H^{1,0} residual vectors per pair (b < c), length n-1 each
    std::vector<Eigen::VectorXcd> r10;
    std::vector<Eigen::VectorXcd> r01;
};

// Brute-force brackets of X_b = conj(e_b) and phi(X_b) by differences of the frame fields.
BracketResidual bracket_residual(const TensorFn& fn, int chart, const Eigen::VectorXcd& v, cplx zeta, double h) {
    int m = static_cast<int>(v.size());
    int n = m + 1, d = 2 * n;
    Eigen::VectorXd x = to_real(v, zeta);
    // columns 0..m-1: X_b, m..2m-1: phi(X_b)
    auto fields = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXcd vv;
        cplx z;
        from_real(p, vv, z);
        Eigen::MatrixXcd b = blowup_frame(vv, z);
        Eigen::MatrixXcd phi = fn(chart, vv, z);
        Eigen::MatrixXcd f(d, 2 * m);
        f.leftCols(m) = b.middleCols(n, m);
        f.rightCols(m) = b.leftCols(m) * phi;
        return f;
    };
    Eigen::MatrixXcd f0 = fields(x);
    std::vector<Eigen::MatrixXcd> df;
    for (int l = 0; l < d; ++l) df.push_back(central_difference<Eigen::MatrixXcd>(fields, x, l, h));
    auto bracket = [&](int u, int w) {  // [F_u, F_w]
        Eigen::VectorXcd r = Eigen::VectorXcd::Zero(d);
        for (int l = 0; l < d; ++l)
            r += f0(l, u) * df[static_cast<std::size_t>(l)].col(w) - f0(l, w) * df[static_cast<std::size_t>(l)].col(u);
        return r;
    };
    Eigen::MatrixXcd b = blowup_frame(v, zeta);
    auto lu = b.partialPivLu();
    Eigen::MatrixXcd phi = fn(chart, v, zeta);
    BracketResidual out;
    for (int bb = 0; bb < m; ++bb)
        for (int cc = bb + 1; cc < m; ++cc) {
            Eigen::VectorXcd xy = lu.solve(bracket(bb, m + cc));
            Eigen::VectorXcd yx = lu.solve(bracket(cc, m + bb));
            Eigen::VectorXcd pp = lu.solve(bracket(m + bb, m + cc));
            Eigen::VectorXcd xx = lu.solve(bracket(bb, cc));
            Eigen::VectorXcd sum = xy - yx + pp;
            Eigen::VectorXcd r10 = sum.head(m) - phi * xx.segment(n, m);
            Eigen::VectorXcd r01 = sum.segment(n, m);
            out.full = std::max({out.full, r10.cwiseAbs().maxCoeff(), r01.cwiseAbs().maxCoeff()});
            out.h01 = std::max({out.h01, xy.segment(n, m).cwiseAbs().maxCoeff(), yx.segment(n, m).cwiseAbs().maxCoeff()});
            out.r10.push_back(r10);
            out.r01.push_back(r01);
        }
    return out;
}

// Mode functions phi_0..phi_kmax and their d/dv, d/dconj(v) derivatives at one base point.
struct ModeJet {
    std::vector<Eigen::MatrixXcd> f;                 // [k]
    std::vector<std::vector<Eigen::MatrixXcd>> dv;   // [k][d]
    std::vector<std::vector<Eigen::MatrixXcd>> dvb;  // [k][d]
};

std::vector<Eigen::MatrixXcd> ring_modes(const TensorFn& fn, int chart, const Eigen::VectorXcd& v, int kmax,
                                         double r, int na) {
    int m = static_cast<int>(v.size());
    std::vector<Eigen::MatrixXcd> out(static_cast<std::size_t>(kmax) + 1, Eigen::MatrixXcd::Zero(m, m));
    for (int a = 0; a < na; ++a) {
        double th = 2.0 * kPi * a / na;
        Eigen::MatrixXcd val = fn(chart, v, std::polar(r, th));
        for (int k = 0; k <= kmax; ++k) out[static_cast<std::size_t>(k)] += std::polar(1.0, -k * th) * val;
    }
    for (int k = 0; k <= kmax; ++k) out[static_cast<std::size_t>(k)] /= na * std::pow(r, k);
    return out;
}

ModeJet source_mode_jet(const TensorFn& fn, int chart, const Eigen::VectorXcd& v, int kmax, double r, int na,
                        double h) {
    int m = static_cast<int>(v.size());
    ModeJet j;
    j.f = ring_modes(fn, chart, v, kmax, r, na);
    j.dv.assign(static_cast<std::size_t>(kmax) + 1, std::vector<Eigen::MatrixXcd>(static_cast<std::size_t>(m)));
    j.dvb = j.dv;
    for (int dd = 0; dd < m; ++dd) {
        std::array<std::vector<Eigen::MatrixXcd>, 2> part;  // d/dRe, d/dIm
        for (int ri = 0; ri < 2; ++ri) {
            cplx dir = ri ? cplx(0, 1) : cplx(1, 0);
            std::array<std::vector<Eigen::MatrixXcd>, 4> s;
            const double off[4] = {2, 1, -1, -2};
            for (int q = 0; q < 4; ++q) {
                Eigen::VectorXcd w = v;
                w(dd) += off[q] * h * dir;
                s[static_cast<std::size_t>(q)] = ring_modes(fn, chart, w, kmax, r, na);
            }
            for (int k = 0; k <= kmax; ++k) {
                std::size_t kk = static_cast<std::size_t>(k);
                part[static_cast<std::size_t>(ri)].push_back((-s[0][kk] + 8.0 * s[1][kk] - 8.0 * s[2][kk] + s[3][kk]) /
                                                             (12.0 * h));
            }
        }
        for (int k = 0; k <= kmax; ++k) {
            std::size_t kk = static_cast<std::size_t>(k);
            j.dv[kk][static_cast<std::size_t>(dd)] = 0.5 * (part[0][kk] - cplx(0, 1) * part[1][kk]);
            j.dvb[kk][static_cast<std::size_t>(dd)] = 0.5 * (part[0][kk] + cplx(0, 1) * part[1][kk]);
        }
    }
    return j;
}

// R_k for k = 0..2 kmax; pairs ordered (b < c), each vector indexed by a.
std::vector<std::vector<Eigen::VectorXcd>> mode_residuals(const ModeJet& j, const Eigen::VectorXcd& v) {
    int m = static_cast<int>(v.size());
    int kmax = static_cast<int>(j.f.size()) - 1;
    double s = 1.0 + v.squaredNorm();
    std::vector<std::vector<Eigen::VectorXcd>> out(static_cast<std::size_t>(2 * kmax + 1));
    // D^{(j)}_d phi_j = d/dv_d phi_j - j conj(v_d) / s phi_j
    auto dmode = [&](int jj, int d) {
        return Eigen::MatrixXcd(j.dv[static_cast<std::size_t>(jj)][static_cast<std::size_t>(d)] -
                                (static_cast<double>(jj) * std::conj(v(d)) / s) * j.f[static_cast<std::size_t>(jj)]);
    };
    for (int k = 0; k <= 2 * kmax; ++k)
        for (int b = 0; b < m; ++b)
            for (int c = b + 1; c < m; ++c) {
                Eigen::VectorXcd r = Eigen::VectorXcd::Zero(m);
                if (k <= kmax) {
                    std::size_t kk = static_cast<std::size_t>(k);
                    r += j.dvb[kk][static_cast<std::size_t>(b)].col(c) - j.dvb[kk][static_cast<std::size_t>(c)].col(b);
                }
                for (int i = std::max(0, k - kmax); i <= std::min(k, kmax); ++i) {
                    int jj = k - i;
                    const auto& fi = j.f[static_cast<std::size_t>(i)];
                    for (int d = 0; d < m; ++d) {
                        Eigen::MatrixXcd dj = dmode(jj, d);
                        r += fi(d, b) * dj.col(c) - fi(d, c) * dj.col(b);
                    }
                }
                out[static_cast<std::size_t>(k)].push_back(r);
            }
    return out;
}

// Mode jet from gridded modes by central differences (interior nodes only).
bool grid_mode_jet(const ModeSet& ms, int chart, std::size_t node, ModeJet& j) {
    const TensorGrid& g = ms.grid;
    int dim = g.base_dim(), m = g.n - 1;
    std::vector<int> idx(static_cast<std::size_t>(dim));
    std::size_t t = node;
    for (int i = dim - 1; i >= 0; --i) {
        idx[static_cast<std::size_t>(i)] = static_cast<int>(t % g.base_points);
        t /= g.base_points;
    }
    for (int i : idx)
        if (i == 0 || i == g.base_points - 1) return false;
    std::size_t base = static_cast<std::size_t>(chart) * g.nodes();
    auto shifted = [&](int axis, int delta) {
        std::size_t stride = 1;
        for (int i = dim - 1; i > axis; --i) stride *= static_cast<std::size_t>(g.base_points);
        return delta > 0 ? node + stride : node - stride;
    };
    double h = g.spacing();
    j.f.clear();
    j.dv.assign(static_cast<std::size_t>(ms.kmax) + 1, std::vector<Eigen::MatrixXcd>(static_cast<std::size_t>(m)));
    j.dvb = j.dv;
    for (int k = 0; k <= ms.kmax; ++k) {
        const auto& ck = ms.coeff[static_cast<std::size_t>(k)];
        j.f.push_back(ck[base + node]);
        for (int d = 0; d < m; ++d) {
            Eigen::MatrixXcd dre = (ck[base + shifted(2 * d, 1)] - ck[base + shifted(2 * d, -1)]) / (2 * h);
            Eigen::MatrixXcd dim_ = (ck[base + shifted(2 * d + 1, 1)] - ck[base + shifted(2 * d + 1, -1)]) / (2 * h);
            j.dv[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] = 0.5 * (dre - cplx(0, 1) * dim_);
            j.dvb[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] = 0.5 * (dre + cplx(0, 1) * dim_);
        }
    }
    return true;
}

double vec_max(const std::vector<Eigen::VectorXcd>& vs) {
    double m = 0;
    for (const auto& v : vs) m = std::max(m, v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
    return m;
}

std::vector<std::pair<int, int>> bracket_samples(const TensorGrid& g, const ConditionOptions& opt) {
    std::vector<std::pair<int, int>> s;
    int rings = static_cast<int>(g.radii.size());
    int nr = std::clamp(opt.bracket_rings, 1, rings);
    int na = std::clamp(opt.bracket_angles, 1, g.angles);
    for (int r = rings - nr; r < rings; ++r)
        for (int a = 0; a < na; ++a) s.emplace_back(r, a * g.angles / na);
    return s;
}

}  // namespace

ConditionReport verify_conditions(const DeformationTensor& phi, const ConditionOptions& opt) {
    ConditionReport rep;
    const TensorGrid& g = phi.grid();
    std::size_t nodes = g.nodes(), total = static_cast<std::size_t>(g.charts) * nodes;
    int rings = static_cast<int>(g.radii.size());
    int m = g.n - 1;
    std::vector<double> sym(total, 0.0), norm(total, 0.0), br(total, 0.0), h01(total, 0.0);
    auto samples = bracket_samples(g, opt);
    ModeSet ms;
    if (!phi.has_source()) ms = fourier_modes(phi, g.angles / 2 - 1);
    parallel_for(total, [&](std::size_t cn) {
        int c = static_cast<int>(cn / nodes);
        std::size_t node = cn % nodes;
        Eigen::VectorXcd v = g.base_point(node);
        for (int r = 0; r < rings; ++r)
            for (int a = 0; a < g.angles; ++a) {
                const Eigen::MatrixXcd& p = phi.at(c, node, r, a);
                cplx z = phi.zeta(r, a);
                Eigen::MatrixXcd bm = p.transpose() * horizontal_metric(v, z);
                sym[cn] = std::max(sym[cn], 0.5 * max_abs(bm - bm.transpose()));
                norm[cn] = std::max(norm[cn], tensor_norm(p, v));
            }
        if (m < 2) return;
        if (phi.has_source()) {
            for (auto [r, a] : samples) {
                auto b = bracket_residual(phi.source(), c, v, phi.zeta(r, a), opt.bracket_step);
                br[cn] = std::max(br[cn], b.full);
                h01[cn] = std::max(h01[cn], b.h01);
            }
        } else {
            ModeJet j;
            if (!grid_mode_jet(ms, c, node, j)) return;
            auto rk = mode_residuals(j, v);
            for (auto [r, a] : samples) {
                cplx z = phi.zeta(r, a);
                std::vector<Eigen::VectorXcd> sum(rk[0].size(), Eigen::VectorXcd::Zero(m));
                cplx zk = 1.0;
                for (std::size_t k = 0; k < rk.size(); ++k, zk *= z)
                    for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += zk * rk[k][p];
                br[cn] = std::max(br[cn], vec_max(sum));
            }
        }
    });
    for (std::size_t i = 0; i < total; ++i) {
        rep.symmetry = std::max(rep.symmetry, sym[i]);
        rep.operator_norm = std::max(rep.operator_norm, norm[i]);
        rep.bracket = std::max(rep.bracket, br[i]);
        rep.bracket_h01 = std::max(rep.bracket_h01, h01[i]);
    }
    rep.bracket_from_modes = !phi.has_source() && m >= 2;
    int kmax = std::max(0, g.angles / 2 - 1);
    rep.ring_deviation = phi.has_source() ? fourier_modes(phi, kmax).ring_deviation : ms.ring_deviation;
    rep.contraction = 1.0 - rep.operator_norm;
    rep.pass_i = rep.symmetry < opt.tolerance;
    rep.pass_ii = rep.bracket < opt.tolerance;
    rep.pass_iii = rep.ring_deviation < opt.tolerance;
    rep.pass_iv = rep.contraction > 0.0;
    return rep;
}

ModeEquationReport verify_mode_equations(const DeformationTensor& phi, int kmax, const ConditionOptions& opt) {
    const TensorGrid& g = phi.grid();
    ModeEquationReport rep;
    rep.residual.assign(static_cast<std::size_t>(2 * kmax + 1), 0.0);
    int m = g.n - 1;
    if (m < 2) return rep;
    if (g.angles < 2 * (kmax + 1)) throw DomainError("verify_mode_equations: N_theta < 2 (kmax + 1)");
    std::size_t nodes = g.nodes(), total = static_cast<std::size_t>(g.charts) * nodes;
    std::vector<std::vector<double>> res(total, std::vector<double>(rep.residual.size(), 0.0));
    std::vector<double> cons(total, 0.0), full(total, 0.0);
    auto samples = bracket_samples(g, opt);
    ModeSet ms;
    if (!phi.has_source()) ms = fourier_modes(phi, kmax);
    double r0 = g.radii.back();
    parallel_for(total, [&](std::size_t cn) {
        int c = static_cast<int>(cn / nodes);
        std::size_t node = cn % nodes;
        Eigen::VectorXcd v = g.base_point(node);
        ModeJet j;
        if (phi.has_source())
            j = source_mode_jet(phi.source(), c, v, kmax, r0, g.angles, opt.bracket_step);
        else if (!grid_mode_jet(ms, c, node, j))
            return;
        auto rk = mode_residuals(j, v);
        for (std::size_t k = 0; k < rk.size(); ++k) res[cn][k] = vec_max(rk[k]);
        if (!phi.has_source()) return;
        for (auto [r, a] : samples) {
            cplx z = phi.zeta(r, a);
            auto b = bracket_residual(phi.source(), c, v, z, opt.bracket_step);
            full[cn] = std::max(full[cn], b.full);
            cplx zk = 1.0;
            std::vector<Eigen::VectorXcd> sum(rk[0].size(), Eigen::VectorXcd::Zero(m));
            for (std::size_t k = 0; k < rk.size(); ++k, zk *= z)
                for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += zk * rk[k][p];
            for (std::size_t p = 0; p < sum.size(); ++p) {
                cons[cn] = std::max(cons[cn], (sum[p] - b.r10[p]).cwiseAbs().maxCoeff());
                cons[cn] = std::max(cons[cn], b.r01[p].cwiseAbs().maxCoeff());
            }
        }
    });
    for (std::size_t i = 0; i < total; ++i) {
        for (std::size_t k = 0; k < rep.residual.size(); ++k) rep.residual[k] = std::max(rep.residual[k], res[i][k]);
        rep.full = std::max(rep.full, full[i]);
    }
    if (phi.has_source()) rep.consistency = *std::max_element(cons.begin(), cons.end());
    return rep;
}

// ---------------------------------------------------------------- synthetic tensors

Eigen::MatrixXcd SyntheticTensor::chart0(const Eigen::VectorXcd& v, cplx zeta) const {
    int m = n - 1;
    Eigen::MatrixXcd phi = Eigen::MatrixXcd::Zero(m, m);
    double w = 1.0 / (1.0 + v.squaredNorm());
    for (const auto& t : terms) {
        cplx x = t.c * std::pow(zeta, t.k) * std::pow(w, t.w_pow);
        for (int i = 0; i < m; ++i) {
            if (t.v_pow[static_cast<std::size_t>(i)]) x *= std::pow(v(i), t.v_pow[static_cast<std::size_t>(i)]);
            if (t.vb_pow[static_cast<std::size_t>(i)])
                x *= std::pow(std::conj(v(i)), t.vb_pow[static_cast<std::size_t>(i)]);
        }
        phi(t.a, t.b) += x;
    }
    return phi;
}

TensorFn SyntheticTensor::fn() const {
    SyntheticTensor self = *this;
    return [self](int c, const Eigen::VectorXcd& v, cplx zeta) -> Eigen::MatrixXcd {
        if (c == 0) return self.chart0(v, zeta);
        if (self.n != 2 || c != 1) throw DomainError("synthetic tensors are given on chart 0 (chart 1 for n = 2 only)");
        // chart 1: u = 1/v, zeta' = zeta v; frames e^(0) = -u^2 e^(1)
        cplx u = v(0);
        if (u == cplx(0.0)) throw DomainError("synthetic tensor: chart 1 origin lies outside chart 0");
        Eigen::VectorXcd w(1);
        w(0) = 1.0 / u;
        return self.chart0(w, zeta * u) * (u * u / std::conj(u * u));
    };
}

int SyntheticTensor::max_mode() const {
    int k = 0;
    for (const auto& t : terms) k = std::max(k, t.k);
    return k;
}

SyntheticTensor parse_synthetic_tensor(const std::string& text) {
    SyntheticTensor st;
    st.text = text;
    bool have_n = false;
    for (const auto& line : tokenize_lines(text)) {
        const Token& key = line[0];
        if (line.size() >= 2 && line[1].text == "=") {
            if (line.size() != 3) throw ParseError(key.line, key.column, "expected 'key = value'");
            if (key.text == "n") {
                if (!st.terms.empty()) throw ParseError(key.line, key.column, "n must precede the terms");
                st.n = parse_int(line[2]);
                if (st.n < 2 || st.n > 4) throw ParseError(line[2].line, line[2].column, "n must be 2, 3 or 4");
                have_n = true;
            } else if (key.text == "charts") {
                st.charts = parse_int(line[2]);
                if (st.charts < 1 || st.charts > 2)
                    throw ParseError(line[2].line, line[2].column, "charts must be 1 or 2");
            } else {
                throw ParseError(key.line, key.column, "unknown key '" + key.text + "'");
            }
            continue;
        }
        if (key.text != "term") throw ParseError(key.line, key.column, "expected 'term' or 'key = value'");
        if (line.size() < 6)
            throw ParseError(key.line, key.column, "term needs: k a b re im [factors]");
        (void)have_n;
        int m = st.n - 1;
        SyntheticTerm t;
        t.k = parse_int(line[1]);
        if (t.k < 0) throw ParseError(line[1].line, line[1].column, "mode index must be nonnegative");
        t.a = parse_int(line[2]) - 1;
        t.b = parse_int(line[3]) - 1;
        if (t.a < 0 || t.a >= m) throw ParseError(line[2].line, line[2].column, "index a out of range 1.." + std::to_string(m));
        if (t.b < 0 || t.b >= m) throw ParseError(line[3].line, line[3].column, "index b out of range 1.." + std::to_string(m));
        t.c = cplx(parse_double(line[4]), parse_double(line[5]));
        t.v_pow.assign(static_cast<std::size_t>(m), 0);
        t.vb_pow.assign(static_cast<std::size_t>(m), 0);
        for (std::size_t i = 6; i < line.size(); ++i) {
            const Token& f = line[i];
            std::string s = f.text;
            int power = 1;
            auto caret = s.find('^');
            if (caret != std::string::npos) {
                Token p{s.substr(caret + 1), f.line, f.column + static_cast<int>(caret) + 1};
                power = parse_int(p);
                if (power < 0) throw ParseError(p.line, p.column, "powers must be nonnegative");
                s = s.substr(0, caret);
            }
            if (s == "w") {
                t.w_pow += power;
                continue;
            }
            std::size_t pre = s.rfind("vb", 0) == 0 ? 2 : (s.rfind("v", 0) == 0 ? 1 : 0);
            if (!pre) throw ParseError(f.line, f.column, "unknown factor '" + f.text + "' (use vJ, vbJ, w)");
            Token idx{s.substr(pre), f.line, f.column + static_cast<int>(pre)};
            int j = parse_int(idx) - 1;
            if (j < 0 || j >= m) throw ParseError(idx.line, idx.column, "coordinate index out of range 1.." + std::to_string(m));
            (pre == 2 ? t.vb_pow : t.v_pow)[static_cast<std::size_t>(j)] += power;
        }
        st.terms.push_back(std::move(t));
    }
    if (st.charts == 2 && st.n != 2) throw ParseError(1, 1, "charts = 2 requires n = 2");
    return st;
}

}  // namespace maform
