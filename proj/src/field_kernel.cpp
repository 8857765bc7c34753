#include "maform/field_kernel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "maform/interp.hpp"

namespace maform {

namespace {

int popcount(unsigned m) { return std::popcount(m); }

std::vector<int> bits_of(unsigned m) {
    std::vector<int> r;
    for (int i = 0; m; ++i, m >>= 1)
        if (m & 1u) r.push_back(i);
    return r;
}

cplx small_det(Eigen::MatrixXcd m) {
    if (m.rows() == 0) return 1.0;
    return m.determinant();
}

}  // namespace

int wedge_sign(unsigned a, unsigned b) {
    int swaps = 0;
    for (int i : bits_of(a)) swaps += popcount(b & ((1u << i) - 1u));
    return (swaps & 1) ? -1 : 1;
}

Eigen::MatrixXd standard_complex_structure(int real_dim) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(real_dim, real_dim);
    for (int k = 0; k + 1 < real_dim; k += 2) {
        j(k + 1, k) = 1.0;
        j(k, k + 1) = -1.0;
    }
    return j;
}

// ---------------------------------------------------------------- PointForm

PointForm::PointForm(int dim, int degree) : dim_(dim), degree_(degree), c_(1u << dim, cplx(0.0)) {
    if (dim < 0 || dim > 10) throw std::invalid_argument("PointForm: unsupported dimension");
    if (degree < 0 || degree > dim) throw std::invalid_argument("PointForm: bad degree");
}

PointForm PointForm::scalar(int dim, cplx c) {
    PointForm f(dim, 0);
    f.c_[0] = c;
    return f;
}

PointForm PointForm::covector(const Eigen::VectorXcd& c) {
    PointForm f(static_cast<int>(c.size()), 1);
    for (int i = 0; i < c.size(); ++i) f.c_[1u << i] = c(i);
    return f;
}

PointForm PointForm::two_form(const Eigen::MatrixXcd& omega) {
    PointForm f(static_cast<int>(omega.rows()), 2);
    for (int i = 0; i < omega.rows(); ++i)
        for (int j = i + 1; j < omega.cols(); ++j) f.c_[(1u << i) | (1u << j)] = omega(i, j);
    return f;
}

PointForm& PointForm::operator+=(const PointForm& o) {
    if (o.dim_ != dim_ || o.degree_ != degree_) throw std::invalid_argument("PointForm: degree mismatch");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
}

PointForm& PointForm::operator-=(const PointForm& o) {
    if (o.dim_ != dim_ || o.degree_ != degree_) throw std::invalid_argument("PointForm: degree mismatch");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
}

PointForm& PointForm::operator*=(cplx s) {
    for (auto& x : c_) x *= s;
    return *this;
}

PointForm PointForm::wedge(const PointForm& o) const {
    if (o.dim_ != dim_) throw std::invalid_argument("PointForm: dimension mismatch");
    if (degree_ + o.degree_ > dim_) return PointForm(dim_, dim_);
    PointForm r(dim_, degree_ + o.degree_);
    unsigned full = 1u << dim_;
    for (unsigned a = 0; a < full; ++a) {
        if (popcount(a) != degree_ || c_[a] == 0.0) continue;
        for (unsigned b = 0; b < full; ++b) {
            if (popcount(b) != o.degree_ || (a & b) || o.c_[b] == 0.0) continue;
            r.c_[a | b] += double(wedge_sign(a, b)) * c_[a] * o.c_[b];
        }
    }
    return r;
}

PointForm PointForm::power(int k) const {
    PointForm r = scalar(dim_, 1.0);
    for (int i = 0; i < k; ++i) r = r.wedge(*this);
    return r;
}

PointForm PointForm::interior(const Eigen::VectorXcd& x) const {
    if (degree_ == 0) return PointForm(dim_, 0);
    PointForm r(dim_, degree_ - 1);
    unsigned full = 1u << dim_;
    for (unsigned m = 0; m < full; ++m) {
        if (popcount(m) != degree_ || c_[m] == 0.0) continue;
        for (int i : bits_of(m)) {
            int before = popcount(m & ((1u << i) - 1u));
            double s = (before & 1) ? -1.0 : 1.0;
            r.c_[m & ~(1u << i)] += s * x(i) * c_[m];
        }
    }
    return r;
}

PointForm PointForm::pullback(const Eigen::MatrixXcd& a) const {
    PointForm r(dim_, degree_);
    unsigned full = 1u << dim_;
    std::vector<unsigned> masks;
    for (unsigned m = 0; m < full; ++m)
        if (popcount(m) == degree_) masks.push_back(m);
    for (unsigned out : masks) {
        auto cols = bits_of(out);
        cplx acc = 0.0;
        for (unsigned in : masks) {
            if (c_[in] == 0.0) continue;
            auto rows = bits_of(in);
            Eigen::MatrixXcd sub(degree_, degree_);
            for (int p = 0; p < degree_; ++p)
                for (int q = 0; q < degree_; ++q) sub(p, q) = a(rows[p], cols[q]);
            acc += c_[in] * small_det(sub);
        }
        r.c_[out] = acc;
    }
    return r;
}

PointForm PointForm::apply_complex_structure(const Eigen::MatrixXd& j) const {
    PointForm r = pullback(j.cast<cplx>());
    if (degree_ & 1) r *= -1.0;
    return r;
}

cplx PointForm::evaluate(const std::vector<Eigen::VectorXcd>& vectors) const {
    if (static_cast<int>(vectors.size()) != degree_) throw std::invalid_argument("PointForm: arity");
    cplx acc = 0.0;
    unsigned full = 1u << dim_;
    for (unsigned m = 0; m < full; ++m) {
        if (popcount(m) != degree_ || c_[m] == 0.0) continue;
        auto rows = bits_of(m);
        Eigen::MatrixXcd sub(degree_, degree_);
        for (int p = 0; p < degree_; ++p)
            for (int q = 0; q < degree_; ++q) sub(p, q) = vectors[q](rows[p]);
        acc += c_[m] * small_det(sub);
    }
    return acc;
}

Eigen::MatrixXcd PointForm::as_matrix() const {
    if (degree_ != 2) throw std::invalid_argument("PointForm: as_matrix needs a 2-form");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
        for (int j = i + 1; j < dim_; ++j) {
            m(i, j) = c_[(1u << i) | (1u << j)];
            m(j, i) = -m(i, j);
        }
    return m;
}

double PointForm::max_abs() const {
    double m = 0;
    for (auto& x : c_) m = std::max(m, std::abs(x));
    return m;
}

// ---------------------------------------------------------------- RegularGrid

std::size_t RegularGrid::size() const {
    std::size_t s = 1;
    for (int n : shape) s *= static_cast<std::size_t>(n);
    return s;
}

std::vector<int> RegularGrid::unravel(std::size_t idx) const {
    std::vector<int> mi(shape.size());
    for (int a = dim() - 1; a >= 0; --a) {
        mi[a] = static_cast<int>(idx % shape[a]);
        idx /= shape[a];
    }
    return mi;
}

std::size_t RegularGrid::ravel(const std::vector<int>& mi) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim(); ++a) idx = idx * shape[a] + mi[a];
    return idx;
}

Eigen::VectorXd RegularGrid::point(std::size_t idx) const {
    auto mi = unravel(idx);
    Eigen::VectorXd p(dim());
    for (int a = 0; a < dim(); ++a) p(a) = origin[a] + spacing[a] * mi[a];
    return p;
}

RegularGrid RegularGrid::cube(int dim, int points, double lo, double hi) {
    if (points < 3) throw std::invalid_argument("RegularGrid: need at least 3 points per axis");
    RegularGrid g;
    g.shape.assign(dim, points);
    g.origin.assign(dim, lo);
    g.spacing.assign(dim, (hi - lo) / (points - 1));
    return g;
}

RegularGrid RegularGrid::centered(int dim, int points, const Eigen::VectorXd& center, double h) {
    RegularGrid g;
    g.shape.assign(dim, points);
    g.spacing.assign(dim, h);
    g.origin.resize(dim);
    for (int a = 0; a < dim; ++a) g.origin[a] = center(a) - h * (points / 2);
    return g;
}

// ---------------------------------------------------------------- FormField

FormField::FormField(RegularGrid grid, int degree, int chart)
    : grid_(std::move(grid)), degree_(degree), chart_(chart) {
    if (grid_.dim() > 8) throw std::invalid_argument("FormField: dimension too large");
    if (degree < 0 || degree > grid_.dim()) throw std::invalid_argument("FormField: bad degree");
    for (int a = 0; a < grid_.dim(); ++a)
        if (grid_.shape[a] < 3) throw std::invalid_argument("FormField: need >= 3 points per axis");
    stride_ = std::size_t(1) << grid_.dim();
    data_.assign(grid_.size() * stride_, cplx(0.0));
}

FormField FormField::sample_function(const RegularGrid& grid,
                                     const std::function<cplx(const Eigen::VectorXd&)>& f, int chart) {
    FormField r(grid, 0, chart);
    for (std::size_t i = 0; i < grid.size(); ++i) r.data_[i * r.stride_] = f(grid.point(i));
    return r;
}

PointForm FormField::at(std::size_t node) const {
    PointForm p(dim(), degree_);
    for (unsigned m = 0; m < stride_; ++m) p[m] = data_[node * stride_ + m];
    return p;
}

void FormField::set(std::size_t node, const PointForm& f) {
    if (f.degree() != degree_ || f.dim() != dim()) throw std::invalid_argument("FormField: set mismatch");
    for (unsigned m = 0; m < stride_; ++m) data_[node * stride_ + m] = f[m];
}

cplx FormField::partial_c(std::size_t node, unsigned mask, int axis) const {
    auto mi = grid_.unravel(node);
    int n = grid_.shape[axis];
    double h = grid_.spacing[axis];
    auto val = [&](int k) {
        auto m2 = mi;
        m2[axis] = k;
        return data_[grid_.ravel(m2) * stride_ + mask];
    };
    int k = mi[axis];
    if (k == 0) return (-3.0 * val(0) + 4.0 * val(1) - val(2)) / (2.0 * h);
    if (k == n - 1) return (3.0 * val(n - 1) - 4.0 * val(n - 2) + val(n - 3)) / (2.0 * h);
    return (val(k + 1) - val(k - 1)) / (2.0 * h);
}

FormField FormField::exterior_d() const {
    if (degree_ >= dim()) return FormField(grid_, dim(), chart_);
    FormField r(grid_, degree_ + 1, chart_);
    for (std::size_t node = 0; node < nodes(); ++node) {
        for (unsigned m = 0; m < stride_; ++m) {
            if (popcount(m) != degree_) continue;
            for (int i = 0; i < dim(); ++i) {
                if (m & (1u << i)) continue;
                cplx dv = partial_c(node, m, i);
                r.data_[node * stride_ + (m | (1u << i))] += double(wedge_sign(1u << i, m)) * dv;
            }
        }
    }
    return r;
}

FormField FormField::apply_complex_structure(const ComplexStructureField& j) const {
    FormField r(grid_, degree_, chart_);
    for (std::size_t node = 0; node < nodes(); ++node)
        r.set(node, at(node).apply_complex_structure(j(grid_.point(node))));
    return r;
}

FormField FormField::dc(const ComplexStructureField& j) const {
    // dc = -J^{-1} d J
    FormField dj = apply_complex_structure(j).exterior_d();
    FormField r(grid_, dj.degree(), chart_);
    for (std::size_t node = 0; node < nodes(); ++node) {
        Eigen::MatrixXd jm = j(grid_.point(node));
        Eigen::MatrixXd jinv = jm.inverse();
        PointForm p = dj.at(node).apply_complex_structure(jinv);
        p *= -1.0;
        r.set(node, p);
    }
    return r;
}

FormField FormField::dc() const {
    Eigen::MatrixXd j = standard_complex_structure(dim());
    return dc([j](const Eigen::VectorXd&) { return j; });
}

FormField FormField::wedge(const FormField& o) const {
    if (o.grid_.shape != grid_.shape) throw std::invalid_argument("FormField: grid mismatch");
    int deg = std::min(degree_ + o.degree_, dim());
    FormField r(grid_, deg, chart_);
    for (std::size_t node = 0; node < nodes(); ++node) r.set(node, at(node).wedge(o.at(node)));
    return r;
}

FormField FormField::interior(const std::function<Eigen::VectorXcd(const Eigen::VectorXd&)>& x) const {
    FormField r(grid_, std::max(degree_ - 1, 0), chart_);
    for (std::size_t node = 0; node < nodes(); ++node) r.set(node, at(node).interior(x(grid_.point(node))));
    return r;
}

FormField FormField::scaled(const std::function<cplx(const Eigen::VectorXd&)>& s) const {
    FormField r = *this;
    for (std::size_t node = 0; node < nodes(); ++node) {
        cplx f = s(grid_.point(node));
        for (unsigned m = 0; m < stride_; ++m) r.data_[node * stride_ + m] *= f;
    }
    return r;
}

FormField FormField::operator+(const FormField& o) const {
    if (o.degree_ != degree_ || o.grid_.shape != grid_.shape) throw std::invalid_argument("FormField: mismatch");
    FormField r = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] += o.data_[i];
    return r;
}

FormField FormField::operator-(const FormField& o) const {
    if (o.degree_ != degree_ || o.grid_.shape != grid_.shape) throw std::invalid_argument("FormField: mismatch");
    FormField r = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] -= o.data_[i];
    return r;
}

double FormField::max_abs() const {
    double m = 0;
    for (auto& x : data_) m = std::max(m, std::abs(x));
    return m;
}

double FormField::max_abs_interior(int margin) const {
    double m = 0;
    for (std::size_t node = 0; node < nodes(); ++node) {
        auto mi = grid_.unravel(node);
        bool inside = true;
        for (int a = 0; a < dim(); ++a)
            if (mi[a] < margin || mi[a] >= grid_.shape[a] - margin) inside = false;
        if (!inside) continue;
        for (unsigned k = 0; k < stride_; ++k) m = std::max(m, std::abs(data_[node * stride_ + k]));
    }
    return m;
}

cplx FormField::integrate(const std::function<double(const Eigen::VectorXd&)>& weight) const {
    if (degree_ != dim()) throw std::invalid_argument("FormField: integrate needs a top-degree form");
    unsigned top = static_cast<unsigned>(stride_ - 1);
    cplx acc = 0.0;
    for (std::size_t node = 0; node < nodes(); ++node) {
        auto mi = grid_.unravel(node);
        double w = 1.0;
        for (int a = 0; a < dim(); ++a) {
            w *= grid_.spacing[a];
            if (mi[a] == 0 || mi[a] == grid_.shape[a] - 1) w *= 0.5;
        }
        acc += w * weight(grid_.point(node)) * data_[node * stride_ + top];
    }
    return acc;
}

// ---------------------------------------------------------------- ChartAtlas

void ChartAtlas::validate() const {
    if (n < 2) throw std::invalid_argument("atlas: n must be >= 2");
    if (base_points < 3) throw std::invalid_argument("atlas: N_v must be >= 3");
    if (fiber_radii < 1) throw std::invalid_argument("atlas: N_r must be >= 1");
    if (fiber_angles < 1 || (fiber_angles & (fiber_angles - 1)))
        throw std::invalid_argument("atlas: N_theta must be a power of two");
    if (!(extent >= 1.25)) throw std::invalid_argument("atlas: chart squares must cover |v| <= 1.25");
}

RegularGrid ChartAtlas::base_grid() const {
    return RegularGrid::cube(base_dim(), base_points, -extent, extent);
}

double ChartAtlas::radius(int k) const { return double(k) / fiber_radii; }

double ChartAtlas::angle(int j) const { return 2.0 * M_PI * j / fiber_angles; }

Eigen::VectorXcd ChartAtlas::section(int chart, const Eigen::VectorXcd& v) {
    Eigen::VectorXcd z(v.size() + 1);
    for (int i = 0, k = 0; i < z.size(); ++i) z(i) = (i == chart) ? cplx(1.0) : v(k++);
    return z;
}

Eigen::VectorXcd ChartAtlas::to_ambient(int chart, const Eigen::VectorXcd& v, cplx zeta) {
    return zeta * section(chart, v);
}

int ChartAtlas::chart_of(const Eigen::VectorXcd& z) {
    int best = 0;
    for (int i = 1; i < z.size(); ++i)
        if (std::abs(z(i)) > std::abs(z(best))) best = i;
    return best;
}

void ChartAtlas::to_blowup(const Eigen::VectorXcd& z, int chart, Eigen::VectorXcd& v, cplx& zeta) {
    zeta = z(chart);
    v.resize(z.size() - 1);
    for (int i = 0, k = 0; i < z.size(); ++i)
        if (i != chart) v(k++) = z(i) / zeta;
}

Eigen::VectorXcd ChartAtlas::transition(int from, int to, const Eigen::VectorXcd& v) {
    Eigen::VectorXcd z = section(from, v);
    Eigen::VectorXcd out;
    cplx zeta;
    to_blowup(z, to, out, zeta);
    return out;
}

double smooth_step(double t) {
    if (t <= 0) return 0.0;
    if (t >= 1) return 1.0;
    double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

double ChartAtlas::overlap_weight(int chart, const Eigen::VectorXcd& z) {
    const double width = std::log(1.25);
    double zmax = z.cwiseAbs().maxCoeff();
    if (zmax == 0) return chart == 0 ? 1.0 : 0.0;
    double total = 0, mine = 0;
    for (int i = 0; i < z.size(); ++i) {
        double a = std::abs(z(i));
        double g = a == 0 ? 0.0 : 1.0 - smooth_step(std::log(zmax / a) / width);
        total += g;
        if (i == chart) mine = g;
    }
    return mine / total;
}

Eigen::VectorXcd ChartAtlas::base_coords(const Eigen::VectorXd& real) {
    Eigen::VectorXcd v(real.size() / 2);
    for (int a = 0; a < v.size(); ++a) v(a) = cplx(real(2 * a), real(2 * a + 1));
    return v;
}

Eigen::VectorXd ChartAtlas::base_real(const Eigen::VectorXcd& v) {
    Eigen::VectorXd r(2 * v.size());
    for (int a = 0; a < v.size(); ++a) {
        r(2 * a) = v(a).real();
        r(2 * a + 1) = v(a).imag();
    }
    return r;
}

double chart_consistency(const FormField& chart0, const FormField& chart1) {
    if (chart0.dim() != 2 || chart1.dim() != 2 || chart0.degree() != chart1.degree())
        throw std::invalid_argument("chart_consistency: needs matching forms on CP^1 charts");
    const auto& g1 = chart1.grid();
    unsigned stride = 1u << 2;
    std::vector<BicubicTable> comps;
    for (unsigned m = 0; m < stride; ++m) {
        std::vector<double> re(g1.size());
        for (std::size_t i = 0; i < g1.size(); ++i) re[i] = chart1.at(i)[m].real();
        comps.emplace_back(g1.shape[0], g1.shape[1], g1.origin[0], g1.origin[1], g1.spacing[0], re);
    }
    double worst = 0;
    const auto& g0 = chart0.grid();
    for (std::size_t i = 0; i < g0.size(); ++i) {
        Eigen::VectorXd p = g0.point(i);
        cplx v(p(0), p(1));
        double r = std::abs(v);
        if (r < 0.85 || r > 1.15) continue;
        cplx u = 1.0 / v;
        if (!comps[0].contains(u.real(), u.imag(), 2)) continue;
        PointForm f1(2, chart1.degree());
        for (unsigned m = 0; m < stride; ++m) f1[m] = comps[m](u.real(), u.imag());
        // du/dv = -1/v^2 as a real 2x2 Jacobian
        cplx dd = -1.0 / (v * v);
        Eigen::MatrixXcd jac(2, 2);
        jac << dd.real(), -dd.imag(), dd.imag(), dd.real();
        PointForm pulled = f1.pullback(jac);
        worst = std::max(worst, (pulled - chart0.at(i)).max_abs());
    }
    return worst;
}

// ---------------------------------------------------------------- grid dumps

const GridRecord* GridDump::find(const std::string& name, int chart) const {
    for (auto& r : records)
        if (r.name == name && r.chart == chart) return &r;
    return nullptr;
}

GridRecord& GridDump::add(const std::string& name, int chart, std::vector<int> shape) {
    GridRecord r;
    r.name = name;
    r.chart = chart;
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    r.shape = std::move(shape);
    r.values.assign(n, cplx(0.0));
    records.push_back(std::move(r));
    return records.back();
}

namespace {

const char kBinaryMagic[8] = {'M', 'A', 'F', 'G', 'R', 'I', 'D', '1'};

template <class T>
void put_le(std::ostream& os, T x) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &x, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw std::runtime_error("grid dump: truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T x;
    std::memcpy(&x, buf, sizeof(T));
    return x;
}

std::string fmt17(double x) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << x;
    return os.str();
}

}  // namespace

std::string grid_dump_text(const GridDump& dump) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << "# maform grid dump v1\n";
    for (auto& r : dump.records) {
        os << "record " << r.name << " chart " << r.chart << " shape";
        for (int s : r.shape) os << ' ' << s;
        os << '\n';
        int row = r.shape.empty() ? 1 : r.shape.back();
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            os << fmt17(r.values[i].real()) << ' ' << fmt17(r.values[i].imag());
            os << (((i + 1) % row == 0) ? '\n' : ' ');
        }
        if (r.values.size() % row) os << '\n';
        os << "end\n";
    }
    return os.str();
}

void write_grid_dump(const GridDump& dump, const std::string& path, bool binary) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("grid dump: cannot open " + path);
    if (!binary) {
        os << grid_dump_text(dump);
        return;
    }
    os.write(kBinaryMagic, 8);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(dump.records.size()));
    for (auto& r : dump.records) {
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
        os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        put_le<std::int32_t>(os, r.chart);
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.shape.size()));
        for (int s : r.shape) put_le<std::uint64_t>(os, static_cast<std::uint64_t>(s));
        for (auto& v : r.values) {
            put_le<double>(os, v.real());
            put_le<double>(os, v.imag());
        }
    }
}

GridDump parse_grid_dump_text(const std::string& text) {
    std::istringstream is(text);
    is.imbue(std::locale::classic());
    GridDump dump;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("grid dump line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kw, name, chartkw, shapekw;
        int chart;
        ls >> kw >> name >> chartkw >> chart >> shapekw;
        if (kw != "record" || chartkw != "chart" || shapekw != "shape" || ls.fail()) fail("expected record header");
        std::vector<int> shape;
        int s;
        while (ls >> s) {
            if (s <= 0) fail("bad shape");
            shape.push_back(s);
        }
        auto& rec = dump.add(name, chart, shape);
        std::size_t k = 0;
        while (k < rec.values.size()) {
            if (!std::getline(is, line)) fail("truncated record");
            ++lineno;
            std::istringstream vs(line);
            vs.imbue(std::locale::classic());
            double re, im;
            while (vs >> re >> im) {
                if (k >= rec.values.size()) fail("too many values");
                rec.values[k++] = cplx(re, im);
            }
        }
        if (!std::getline(is, line) || line != "end") fail("missing end");
        ++lineno;
    }
    return dump;
}

GridDump read_grid_dump(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("grid dump: cannot open " + path);
    char magic[8] = {};
    is.read(magic, 8);
    if (is.gcount() == 8 && std::memcmp(magic, kBinaryMagic, 8) == 0) {
        GridDump dump;
        auto nrec = get_le<std::uint32_t>(is);
        for (std::uint32_t r = 0; r < nrec; ++r) {
            auto len = get_le<std::uint32_t>(is);
            std::string name(len, '\0');
            is.read(name.data(), len);
            int chart = get_le<std::int32_t>(is);
            auto rank = get_le<std::uint32_t>(is);
            std::vector<int> shape(rank);
            for (auto& s : shape) s = static_cast<int>(get_le<std::uint64_t>(is));
            auto& rec = dump.add(name, chart, shape);
            for (auto& v : rec.values) {
                double re = get_le<double>(is);
                double im = get_le<double>(is);
                v = cplx(re, im);
            }
        }
        return dump;
    }
    is.clear();
    is.seekg(0);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_grid_dump_text(ss.str());
}

}  // namespace maform
