#include "metastab/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <sstream>

#include "metastab/error.hpp"

namespace metastab {

Grid::Grid(double lo, double hi, std::size_t n)
    : xi_min_(lo), xi_max_(hi), n_(n), h_((hi - lo) / static_cast<double>(n - 1)) {}

Grid Grid::uniform(double xi_min, double xi_max, std::size_t n_points) {
    if (!std::isfinite(xi_min) || !std::isfinite(xi_max) || !(xi_min < xi_max)) {
        throw ConfigError("Grid: need finite xi_min < xi_max");
    }
    if (n_points < kMinPoints) {
        throw ConfigError("Grid: need at least 16 points");
    }
    return Grid(xi_min, xi_max, n_points);
}

std::vector<double> Grid::nodes() const {
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = node(i);
    return out;
}

bool Grid::contains(double xi) const {
    const double slack = 1e-12 * (xi_max_ - xi_min_);
    return xi >= xi_min_ - slack && xi <= xi_max_ + slack;
}

Field::Field(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
        throw ConfigError("Field: value count does not match grid size");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            std::ostringstream msg;
            msg << "Field: non-finite value at xi = " << grid_.node(i);
            throw NumericalError(msg.str());
        }
    }
}

Field Field::zeros(const Grid& grid) { return Field(grid, std::vector<double>(grid.size(), 0.0)); }

Field Field::sample(const Grid& grid, const std::function<double(double)>& fn) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid.node(i));
    return Field(grid, std::move(v));
}

double Field::at(double xi) const { return interpolate_cubic(grid_, values_, xi); }

double Field::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

Field Field::operator-() const { return -1.0 * *this; }

namespace {

void require_same_grid(const Field& a, const Field& b) {
    if (!(a.grid() == b.grid())) throw ConfigError("fields live on different grids");
}

}  // namespace

Field operator+(const Field& a, const Field& b) {
    require_same_grid(a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + b[i];
    return Field(a.grid(), std::move(v));
}

Field operator-(const Field& a, const Field& b) {
    require_same_grid(a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] - b[i];
    return Field(a.grid(), std::move(v));
}

Field operator*(double s, const Field& f) {
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = s * f[i];
    return Field(f.grid(), std::move(v));
}

WeightExponent::WeightExponent(double m) : m_(m) {
    if (!(m > 1.5)) throw ConfigError(fmt::format("weight exponent m = {} must exceed 3/2", m));
}

std::vector<double> cumulative_integral(const Grid& grid, std::span<const double> f) {
    const std::size_t n = f.size();
    const double h = grid.spacing();
    std::vector<double> F(n, 0.0);
    for (std::size_t i = 2; i < n; i += 2) {
        F[i] = F[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
    }
    // Odd nodes: one interval of the cubic through four neighbouring nodes.
    for (std::size_t i = 1; i < n; i += 2) {
        if (i + 2 < n) {
            F[i] = F[i - 1] + h / 24.0 * (9.0 * f[i - 1] + 19.0 * f[i] - 5.0 * f[i + 1] + f[i + 2]);
        } else {
            F[i] = F[i - 1] + h / 24.0 * (f[i - 3] - 5.0 * f[i - 2] + 19.0 * f[i - 1] + 9.0 * f[i]);
        }
    }
    return F;
}

std::vector<double> cumulative_integral(const Field& f) {
    return cumulative_integral(f.grid(), f.values());
}

double integrate(const Grid& grid, std::span<const double> f) {
    return cumulative_integral(grid, f).back();
}

double integrate(const Field& f) { return integrate(f.grid(), f.values()); }

std::vector<double> quadrature_weights(const Grid& grid) {
    const std::size_t n = grid.size();
    const double h = grid.spacing();
    std::vector<double> w(n, 0.0);
    const std::size_t last_even = (n % 2 == 1) ? n - 1 : n - 2;
    for (std::size_t i = 0; i + 2 <= last_even; i += 2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if (last_even != n - 1) {
        w[n - 4] += h / 24.0;
        w[n - 3] -= 5.0 * h / 24.0;
        w[n - 2] += 19.0 * h / 24.0;
        w[n - 1] += 9.0 * h / 24.0;
    }
    return w;
}

double interpolate_cubic(const Grid& grid, std::span<const double> v, double xi) {
    if (!grid.contains(xi)) {
        throw ConfigError(fmt::format("interpolation point {} outside [{}, {}]", xi, grid.xi_min(),
                                      grid.xi_max()));
    }
    const double s = (xi - grid.xi_min()) / grid.spacing();
    const auto n = static_cast<long>(v.size());
    // Nodes reproduce their samples exactly.
    if (const double r = std::round(s); std::abs(s - r) < 1e-9 && r >= 0.0 && r < static_cast<double>(n)) {
        return v[static_cast<std::size_t>(r)];
    }
    long j = static_cast<long>(std::floor(s)) - 1;
    j = std::clamp(j, 0L, n - 4);
    const double t = s - static_cast<double>(j);
    // Lagrange basis on nodes 0,1,2,3 evaluated at t.
    const double l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    const double l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    const double l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    const double l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    return l0 * v[j] + l1 * v[j + 1] + l2 * v[j + 2] + l3 * v[j + 3];
}

double weighted_norm(const Field& f, double m) {
    if (!(m >= 0.0)) throw ConfigError("weighted_norm: m must be non-negative");
    const auto& g = f.grid();
    std::vector<double> integrand(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double xi = g.node(i);
        integrand[i] = std::pow(1.0 + xi * xi, m) * f[i] * f[i];
    }
    return std::sqrt(std::max(0.0, integrate(g, integrand)));
}

double weighted_norm(const Field& f, WeightExponent m) { return weighted_norm(f, m.value()); }

double weighted_distance(const Field& f, const Field& g, double m) {
    return weighted_norm(f - g, m);
}

double weighted_distance(const Field& f, const Field& g, WeightExponent m) {
    return weighted_norm(f - g, m.value());
}

double sup_distance(const Field& f, const Field& g) { return (f - g).max_abs(); }

SimilaritySnapshot to_similarity(const Field& u, double t, const Grid& xi_grid) {
    if (!(t >= 0.0)) throw ConfigError("to_similarity: t must be >= 0");
    const double stretch = std::sqrt(1.0 + t);
    const double lo = xi_grid.xi_min() * stretch;
    const double hi = xi_grid.xi_max() * stretch;
    if (!u.grid().contains(lo) || !u.grid().contains(hi)) {
        throw ConfigError(fmt::format(
            "to_similarity: physical grid [{}, {}] must cover x in [{}, {}] at t = {}",
            u.grid().xi_min(), u.grid().xi_max(), lo, hi, t));
    }
    std::vector<double> w(xi_grid.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = stretch * u.at(std::clamp(xi_grid.node(i) * stretch, u.grid().xi_min(),
                                          u.grid().xi_max()));
    }
    return {Field(xi_grid, std::move(w)), std::log1p(t)};
}

PhysicalSnapshot from_similarity(const Field& w, double tau, const Grid& x_grid) {
    if (!(tau >= 0.0)) throw ConfigError("from_similarity: tau must be >= 0");
    const double t = std::expm1(tau);
    const double stretch = std::exp(0.5 * tau);
    const double lo = x_grid.xi_min() / stretch;
    const double hi = x_grid.xi_max() / stretch;
    if (!w.grid().contains(lo) || !w.grid().contains(hi)) {
        throw ConfigError(fmt::format(
            "from_similarity: similarity grid [{}, {}] must cover xi in [{}, {}] at tau = {}",
            w.grid().xi_min(), w.grid().xi_max(), lo, hi, tau));
    }
    std::vector<double> u(x_grid.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = w.at(std::clamp(x_grid.node(i) / stretch, w.grid().xi_min(), w.grid().xi_max())) /
               stretch;
    }
    return {Field(x_grid, std::move(u)), t};
}

double domain_half_width(double mu, double p, double q) {
    if (!(mu > 0.0)) throw ConfigError("domain_half_width: mu must be positive");
    const double spread = std::sqrt(mu * std::max(1.0, std::abs(std::log(mu))));
    return std::max(std::sqrt(std::max(p, 0.0)), std::sqrt(std::max(q, 0.0))) + 10.0 * spread + 5.0;
}

}  // namespace metastab
