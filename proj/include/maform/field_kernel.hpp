#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace maform {

using cplx = std::complex<double>;

// Exterior algebra at a point of R^dim. Coefficients are indexed by the bitmask of
// the (increasing) index set; only masks with popcount == degree are meaningful.
class PointForm {
public:
    PointForm() = default;
    PointForm(int dim, int degree);

    static PointForm scalar(int dim, cplx c);
    static PointForm covector(const Eigen::VectorXcd& c);
    // 2-form from the antisymmetric matrix of its values on basis pairs.
    static PointForm two_form(const Eigen::MatrixXcd& omega);

    int dim() const { return dim_; }
    int degree() const { return degree_; }

    cplx& operator[](unsigned mask) { return c_[mask]; }
    cplx operator[](unsigned mask) const { return c_[mask]; }

    PointForm& operator+=(const PointForm& o);
    PointForm& operator-=(const PointForm& o);
    PointForm& operator*=(cplx s);
    friend PointForm operator+(PointForm a, const PointForm& b) { return a += b; }
    friend PointForm operator-(PointForm a, const PointForm& b) { return a -= b; }
    friend PointForm operator*(cplx s, PointForm a) { return a *= s; }

    PointForm wedge(const PointForm& o) const;
    PointForm power(int k) const;
    PointForm interior(const Eigen::VectorXcd& x) const;
    // (A^* alpha)(v1..vp) = alpha(A v1, .., A vp)
    PointForm pullback(const Eigen::MatrixXcd& a) const;
    // (J alpha)(v1..vp) = (-1)^p alpha(J v1, .., J vp)
    PointForm apply_complex_structure(const Eigen::MatrixXd& j) const;
    cplx evaluate(const std::vector<Eigen::VectorXcd>& vectors) const;
    Eigen::MatrixXcd as_matrix() const;  // degree 2 only
    double max_abs() const;

private:
    int dim_ = 0;
    int degree_ = 0;
    std::vector<cplx> c_;
};

// Sign of moving the elements of mask b past those of mask a (disjoint masks).
int wedge_sign(unsigned a, unsigned b);
// Standard complex structure on (x1, y1, x2, y2, ...).
Eigen::MatrixXd standard_complex_structure(int real_dim);

struct RegularGrid {
    std::vector<int> shape;
    std::vector<double> origin;
    std::vector<double> spacing;

    int dim() const { return static_cast<int>(shape.size()); }
    std::size_t size() const;
    std::vector<int> unravel(std::size_t idx) const;
    std::size_t ravel(const std::vector<int>& mi) const;
    Eigen::VectorXd point(std::size_t idx) const;
    static RegularGrid cube(int dim, int points, double lo, double hi);
    static RegularGrid centered(int dim, int points, const Eigen::VectorXd& center, double h);
};

using ComplexStructureField = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Differential p-form sampled on a regular grid of one chart.
class FormField {
public:
    FormField() = default;
    FormField(RegularGrid grid, int degree, int chart = 0);

    static FormField sample_function(const RegularGrid& grid,
                                     const std::function<cplx(const Eigen::VectorXd&)>& f,
                                     int chart = 0);

    const RegularGrid& grid() const { return grid_; }
    int degree() const { return degree_; }
    int chart() const { return chart_; }
    int dim() const { return grid_.dim(); }
    std::size_t nodes() const { return grid_.size(); }

    PointForm at(std::size_t node) const;
    void set(std::size_t node, const PointForm& f);

    FormField exterior_d() const;
    FormField dc(const ComplexStructureField& j) const;
    FormField dc() const;  // standard structure
    FormField wedge(const FormField& o) const;
    FormField interior(const std::function<Eigen::VectorXcd(const Eigen::VectorXd&)>& x) const;
    FormField apply_complex_structure(const ComplexStructureField& j) const;
    FormField scaled(const std::function<cplx(const Eigen::VectorXd&)>& s) const;
    FormField operator+(const FormField& o) const;
    FormField operator-(const FormField& o) const;
    double max_abs() const;
    double max_abs_interior(int margin) const;

    // Top-degree integral with trapezoid weights, multiplied by a weight function.
    cplx integrate(const std::function<double(const Eigen::VectorXd&)>& weight) const;

private:
    cplx partial_c(std::size_t node, unsigned mask, int axis) const;

    RegularGrid grid_;
    int degree_ = 0;
    int chart_ = 0;
    std::size_t stride_ = 0;
    std::vector<cplx> data_;
};

// Projective-fiber atlas for the blow-up of C^n at the origin: chart i covers
// |z_i| maximal, v = z / z_i with entry i removed, zeta = z_i.
struct ChartAtlas {
    int n = 2;
    int base_points = 32;    // N_v per real base axis
    double extent = 1.25;    // chart square [-extent, extent]
    int fiber_radii = 4;     // N_r
    int fiber_angles = 32;   // N_theta

    int charts() const { return n; }
    int base_dim() const { return 2 * (n - 1); }
    RegularGrid base_grid() const;
    double radius(int k) const;  // k = 1..N_r
    double angle(int j) const;   // j = 0..N_theta-1
    void validate() const;

    static Eigen::VectorXcd section(int chart, const Eigen::VectorXcd& v);  // (1, v) with 1 at chart
    static Eigen::VectorXcd to_ambient(int chart, const Eigen::VectorXcd& v, cplx zeta);
    static int chart_of(const Eigen::VectorXcd& z);
    static void to_blowup(const Eigen::VectorXcd& z, int chart, Eigen::VectorXcd& v, cplx& zeta);
    static Eigen::VectorXcd transition(int from, int to, const Eigen::VectorXcd& v);
    // Smooth partition of unity subordinate to {|z_j / z_i| < 1.25}.
    static double overlap_weight(int chart, const Eigen::VectorXcd& z);
    static Eigen::VectorXcd base_coords(const Eigen::VectorXd& real);
    static Eigen::VectorXd base_real(const Eigen::VectorXcd& v);
};

double smooth_step(double t);  // C-infinity, 0 for t<=0, 1 for t>=1

// Grid dump: one record per chart, row-major complex arrays.
struct GridRecord {
    std::string name;
    int chart = 0;
    std::vector<int> shape;
    std::vector<cplx> values;
};

struct GridDump {
    std::vector<GridRecord> records;
    const GridRecord* find(const std::string& name, int chart) const;
    GridRecord& add(const std::string& name, int chart, std::vector<int> shape);
};

void write_grid_dump(const GridDump& dump, const std::string& path, bool binary);
std::string grid_dump_text(const GridDump& dump);
GridDump read_grid_dump(const std::string& path);
GridDump parse_grid_dump_text(const std::string& text);

// Consistency of a 2-form field pair on CP^1 charts: pulls chart-1 components through
// the transition and compares with chart 0 at overlap nodes (bicubic sampling).
double chart_consistency(const FormField& chart0, const FormField& chart1);

}  // namespace maform
