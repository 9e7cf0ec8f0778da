#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace metastab {

/// Uniform 1D mesh on a truncated similarity domain [xi_min, xi_max].
class Grid {
public:
    static constexpr std::size_t kMinPoints = 16;

    /// Throws ConfigError unless xi_min < xi_max and n_points >= kMinPoints.
    static Grid uniform(double xi_min, double xi_max, std::size_t n_points);
    static Grid symmetric(double half_width, std::size_t n_points) {
        return uniform(-half_width, half_width, n_points);
    }

    double xi_min() const { return xi_min_; }
    double xi_max() const { return xi_max_; }
    std::size_t size() const { return n_; }
    double spacing() const { return h_; }
    double node(std::size_t i) const { return xi_min_ + h_ * static_cast<double>(i); }
    std::vector<double> nodes() const;

    bool contains(double xi) const;

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Grid(double lo, double hi, std::size_t n);

    double xi_min_;
    double xi_max_;
    std::size_t n_;
    double h_;
};

/// Real-valued samples on a Grid. Values are always finite.
class Field {
public:
    Field(Grid grid, std::vector<double> values);

    static Field zeros(const Grid& grid);
    static Field sample(const Grid& grid, const std::function<double(double)>& fn);

    const Grid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Cubic (4-point Lagrange) interpolation; xi must lie inside the grid.
    double at(double xi) const;

    double max_abs() const;

    Field operator-() const;
    friend Field operator+(const Field& a, const Field& b);
    friend Field operator-(const Field& a, const Field& b);
    friend Field operator*(double s, const Field& f);

private:
    Grid grid_;
    std::vector<double> values_;
};

/// Weight exponent m of L^2(m). The invariant m > 3/2 is what the
/// two-eigenvalue manifold structure needs.
class WeightExponent {
public:
    explicit WeightExponent(double m = 2.0);
    double value() const { return m_; }

private:
    double m_;
};

/// Composite Simpson on the uniform grid. For an even number of nodes the
/// final interval uses the cubic through the last four nodes.
double integrate(const Field& f);
double integrate(const Grid& grid, std::span<const double> values);

/// Nodal weights with sum_i w_i f_i == integrate(f) up to rounding.
std::vector<double> quadrature_weights(const Grid& grid);

/// F[i] = int_{xi_min}^{xi_i} f. Even nodes are composite Simpson sums; odd
/// nodes add one interval of the four-point cubic (9, 19, -5, 1)/24.
std::vector<double> cumulative_integral(const Field& f);
std::vector<double> cumulative_integral(const Grid& grid, std::span<const double> values);

double interpolate_cubic(const Grid& grid, std::span<const double> values, double xi);

/// (int (1+xi^2)^m |f|^2 dxi)^{1/2}; m >= 0 is accepted for raw quadrature use.
double weighted_norm(const Field& f, double m);
double weighted_norm(const Field& f, WeightExponent m);

/// weighted_norm(f - g). Throws ConfigError when grids differ.
double weighted_distance(const Field& f, const Field& g, WeightExponent m);
double weighted_distance(const Field& f, const Field& g, double m);

double sup_distance(const Field& f, const Field& g);

struct SimilaritySnapshot {
    Field w;
    double tau;
};

struct PhysicalSnapshot {
    Field u;
    double t;
};

/// w(xi) = sqrt(1+t) u(xi sqrt(1+t)), tau = log(1+t), resampled on xi_grid.
/// Throws ConfigError for t < 0 or when the physical grid is too short.
SimilaritySnapshot to_similarity(const Field& u, double t, const Grid& xi_grid);

/// Inverse of to_similarity: u(x) = w(x / sqrt(1+t)) / sqrt(1+t), t = e^tau - 1.
PhysicalSnapshot from_similarity(const Field& w, double tau, const Grid& x_grid);

/// Truncation half-width L = max(sqrt p, sqrt q) + 10 sqrt(mu max(1,|log mu|)) + 5.
double domain_half_width(double mu, double p, double q);

}  // namespace metastab
