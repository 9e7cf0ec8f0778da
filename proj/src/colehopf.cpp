#include "metastab/colehopf.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <queue>
#include <thread>

#include "metastab/error.hpp"
#include "metastab/special.hpp"

namespace metastab {

namespace {

void require_mu(double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError(fmt::format("mu = {} must be positive", mu));
}

}  // namespace

Field cole_hopf_forward(const Field& w, double mu) {
    require_mu(mu);
    const auto F = cumulative_integral(w);
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w[i] * std::exp(-F[i] / (2.0 * mu));
    return Field(w.grid(), std::move(out));
}

Field cole_hopf_inverse(const Field& W, double mu) {
    require_mu(mu);
    const auto I = cumulative_integral(W);
    std::vector<double> out(W.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = 1.0 - I[i] / (2.0 * mu);
        if (!(d > 0.0)) {
            const double xi = W.grid().node(i);
            throw PositivityError(
                fmt::format("inverse Cole-Hopf: 1 - int W / 2mu = {} at xi = {}", d, xi), xi, d);
        }
        out[i] = W[i] / d;
    }
    return Field(W.grid(), std::move(out));
}

Field cole_hopf_alt(const Field& u, double mu) {
    require_mu(mu);
    const auto F = cumulative_integral(u);
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(-F[i] / (2.0 * mu));
    return Field(u.grid(), std::move(out));
}

Field heat_evolve(const Field& W0, double tau, double mu) {
    require_mu(mu);
    if (!(tau >= 0.0)) throw ConfigError(fmt::format("heat_evolve: tau = {} must be >= 0", tau));
    const double peak = W0.max_abs();
    const std::size_t n = W0.size();
    if (std::abs(W0[0]) > 1e-12 * peak || std::abs(W0[n - 1]) > 1e-12 * peak) {
        throw ConfigError(fmt::format("heat_evolve: boundary values ({}, {}) exceed 1e-12 of max {}",
                                      W0[0], W0[n - 1], peak));
    }
    if (tau == 0.0 || peak == 0.0) return W0;

    const double t = std::expm1(tau);
    const double stretch = std::exp(0.5 * tau);
    const double variance = 2.0 * mu * t;
    const double sigma = std::sqrt(variance);

    // Narrow kernels are resolved on a refined copy of the data.
    const Grid& grid = W0.grid();
    Grid src = grid;
    std::vector<double> data(W0.values().begin(), W0.values().end());
    const double h = grid.spacing();
    if (sigma < 3.0 * h) {
        const auto factor = static_cast<std::size_t>(std::ceil(3.0 * h / sigma));
        const std::size_t fine_n = std::min<std::size_t>((n - 1) * factor + 1, std::size_t{1} << 22);
        src = Grid::uniform(grid.xi_min(), grid.xi_max(), fine_n);
        data.resize(fine_n);
        for (std::size_t j = 0; j < fine_n; ++j) data[j] = W0.at(src.node(j));
    }
    const auto weights = quadrature_weights(src);
    const double hs = src.spacing();
    const double reach = 40.0 * sigma;
    const double norm = stretch / std::sqrt(2.0 * std::numbers::pi * variance);

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = stretch * grid.node(i);
        const double lo = std::max(0.0, std::floor((x - reach - src.xi_min()) / hs));
        const double hi = std::min(static_cast<double>(src.size() - 1), std::ceil((x + reach - src.xi_min()) / hs));
        double acc = 0.0;
        for (auto j = static_cast<std::size_t>(lo); static_cast<double>(j) <= hi; ++j) {
            const double d = x - src.node(j);
            acc += weights[j] * data[j] * std::exp(-d * d / (2.0 * variance));
        }
        out[i] = norm * acc;
    }
    return Field(grid, std::move(out));
}

double spectral_project(const Field& W, int n, double mu) {
    require_mu(mu);
    if (n == 0) return integrate(W);
    if (n == 1) {
        std::vector<double> m(W.size());
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = -W.grid().node(i) * W[i];
        return integrate(W.grid(), m);
    }
    throw ConfigError("spectral_project: n must be 0 or 1");
}

namespace {

// Evaluates w(xi, tau) for one xi. Holds only read-only references.
class LaplaceRatio {
public:
    LaplaceRatio(const Grid& data_grid, const std::vector<double>& H, double mu, double tau,
                 const ExactSolutionOptions& options)
        : grid_(data_grid), H_(H), mu_(mu), options_(options) {
        kappa_ = -1.0 / std::expm1(-tau);
        stretch_ = std::exp(0.5 * tau);
        eta_lo_ = grid_.xi_min() / stretch_;
        eta_hi_ = grid_.xi_max() / stretch_;
        h_end_ = H_.back();
        width_ = std::sqrt(2.0 * mu_ / kappa_);
    }

    double operator()(double xi) const {
        xi_ = xi;
        locate_minimum();
        const double a = kappa_ / (4.0 * mu_);
        const double root_a = std::sqrt(a);
        const double c = phi_min_ / (2.0 * mu_);
        const double log_gauss = std::log(0.5 * std::sqrt(std::numbers::pi / a));

        // Closed-form tails where H is constant.
        const double z0 = xi_ - eta_lo_;
        const double z1 = eta_hi_ - xi_;
        const double right_shift = c - h_end_ / (2.0 * mu_);
        double den = std::exp(log_gauss + special::log_erfc(root_a * z0) + c) +
                     std::exp(log_gauss + special::log_erfc(root_a * z1) + right_shift);
        double num = kappa_ / (2.0 * a) * (std::exp(c - a * z0 * z0) - std::exp(right_shift - a * z1 * z1));

        const auto [num_in, den_in] = interior(den);
        num += num_in;
        den += den_in;
        return num / den;
    }

private:
    double H_at(double y) const {
        if (y <= grid_.xi_min()) return 0.0;
        if (y >= grid_.xi_max()) return h_end_;
        return interpolate_cubic(grid_, H_, y);
    }

    double phi(double eta) const {
        const double d = xi_ - eta;
        return 0.5 * kappa_ * d * d + H_at(stretch_ * eta);
    }

    void locate_minimum() const {
        constexpr int kScan = 256;
        const double step = (eta_hi_ - eta_lo_) / (kScan - 1);
        int best = 0;
        double best_val = std::numeric_limits<double>::infinity();
        for (int k = 0; k < kScan; ++k) {
            const double v = phi(eta_lo_ + step * k);
            if (v < best_val) {
                best_val = v;
                best = k;
            }
        }
        double lo = eta_lo_ + step * std::max(0, best - 1);
        double hi = eta_lo_ + step * std::min(kScan - 1, best + 1);
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = hi - g * (hi - lo);
        double x2 = lo + g * (hi - lo);
        double f1 = phi(x1);
        double f2 = phi(x2);
        for (int it = 0; it < 100 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
            if (f1 < f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = phi(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = phi(x2);
            }
        }
        argmin_ = f1 < f2 ? x1 : x2;
        phi_min_ = std::min({best_val, f1, f2});
        if (xi_ < eta_lo_) phi_min_ = std::min(phi_min_, 0.0);
        if (xi_ > eta_hi_) phi_min_ = std::min(phi_min_, h_end_);
    }

    struct Sample {
        double den;
        double num;
    };

    Sample sample(double eta) const {
        const double g = std::exp(-(phi(eta) - phi_min_) / (2.0 * mu_));
        return {g, kappa_ * (xi_ - eta) * g};
    }

    struct Panel {
        double a, b;
        Sample fa, fl, fm, fr, fb;
        double den, num;  // Richardson-corrected
        double err;
        bool operator<(const Panel& o) const { return err < o.err; }
    };

    Panel make_panel(double a, double b, Sample fa, Sample fm, Sample fb) const {
        const double m = 0.5 * (a + b);
        Panel p{a, b, fa, sample(0.5 * (a + m)), fm, sample(0.5 * (m + b)), fb, 0.0, 0.0, 0.0};
        const double h = b - a;
        const double coarse_d = h / 6.0 * (fa.den + 4.0 * fm.den + fb.den);
        const double coarse_n = h / 6.0 * (fa.num + 4.0 * fm.num + fb.num);
        const double fine_d = h / 12.0 * (fa.den + 4.0 * p.fl.den + 2.0 * fm.den + 4.0 * p.fr.den + fb.den);
        const double fine_n = h / 12.0 * (fa.num + 4.0 * p.fl.num + 2.0 * fm.num + 4.0 * p.fr.num + fb.num);
        p.den = fine_d + (fine_d - coarse_d) / 15.0;
        p.num = fine_n + (fine_n - coarse_n) / 15.0;
        p.err = (std::abs(fine_n - coarse_n) + w_scale_ * std::abs(fine_d - coarse_d)) / 15.0;
        return p;
    }

    std::pair<double, double> interior(double tail_den) const {
        std::vector<double> cuts{eta_lo_, eta_hi_};
        for (double off : {-8.0, 8.0}) {
            const double e = argmin_ + off * width_;
            if (e > eta_lo_ && e < eta_hi_) cuts.push_back(e);
        }
        std::sort(cuts.begin(), cuts.end());

        w_scale_ = 1.0 + std::abs(xi_) + kappa_ * width_;
        std::priority_queue<Panel> queue;
        std::vector<Panel> done;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double len = cuts[k + 1] - cuts[k];
            if (len <= 0.0) continue;
            const auto pieces = static_cast<std::size_t>(std::clamp(std::ceil(len / width_), 1.0, 2048.0));
            const double step = len / static_cast<double>(pieces);
            Sample left = sample(cuts[k]);
            for (std::size_t j = 0; j < pieces; ++j) {
                const double a = cuts[k] + step * static_cast<double>(j);
                const double b = j + 1 == pieces ? cuts[k + 1] : a + step;
                const Sample right = sample(b);
                queue.push(make_panel(a, b, left, sample(0.5 * (a + b)), right));
                left = right;
            }
        }

        const auto totals = [&] {
            double den = 0.0, num = 0.0, err = 0.0;
            auto copy = queue;
            while (!copy.empty()) {
                den += copy.top().den;
                num += copy.top().num;
                err += copy.top().err;
                copy.pop();
            }
            for (const auto& p : done) {
                den += p.den;
                num += p.num;
            }
            return std::tuple{den, num, err};
        };

        double err_sum = 0.0;
        double den_sum = 0.0;
        {
            auto [d, n, e] = totals();
            den_sum = d;
            err_sum = e;
        }
        // The tails count toward the denominator scale: the interior may be negligible.
        const double floor_den = std::max(den_sum + tail_den, 1e-300);
        std::size_t panels = queue.size();
        std::size_t since_refresh = 0;
        while (!queue.empty() && err_sum > options_.tolerance * floor_den) {
            if (panels >= options_.max_panels) {
                throw NumericalError(fmt::format(
                    "exact_solution: panel budget {} exhausted at xi = {} (error estimate {:.3e})",
                    options_.max_panels, xi_, err_sum / floor_den));
            }
            const Panel p = queue.top();
            queue.pop();
            const double m = 0.5 * (p.a + p.b);
            if (m - p.a <= 1e-15 * (1.0 + std::abs(m))) {
                done.push_back(p);
                err_sum -= p.err;
                continue;
            }
            const Panel left = make_panel(p.a, m, p.fa, p.fl, p.fm);
            const Panel right = make_panel(m, p.b, p.fm, p.fr, p.fb);
            err_sum += left.err + right.err - p.err;
            queue.push(left);
            queue.push(right);
            ++panels;
            if (++since_refresh == 256) {
                since_refresh = 0;
                err_sum = std::get<2>(totals());
            }
        }
        auto [den, num, err] = totals();
        (void)err;
        return {num, den};
    }

    const Grid& grid_;
    const std::vector<double>& H_;
    double mu_;
    const ExactSolutionOptions& options_;
    double kappa_{}, stretch_{}, eta_lo_{}, eta_hi_{}, h_end_{}, width_{};

    mutable double xi_ = 0.0;
    mutable double argmin_ = 0.0;
    mutable double phi_min_ = 0.0;
    mutable double w_scale_ = 1.0;
};

}  // namespace

Field exact_solution(const Field& h, double mu, double tau, const Grid& grid, const ExactSolutionOptions& options) {
    require_mu(mu);
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ConfigError(fmt::format("exact_solution: tau = {} must be > 0", tau));
    }
    const auto H = cumulative_integral(h);
    std::vector<double> out(grid.size());

    unsigned workers = options.threads != 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>((grid.size() + 63) / 64));
    workers = std::max(workers, 1u);

    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto work = [&](std::size_t begin, std::size_t end) {
        try {
            LaplaceRatio ratio(h.grid(), H, mu, tau, options);
            for (std::size_t i = begin; i < end; ++i) out[i] = ratio(grid.node(i));
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };

    if (workers == 1) {
        work(0, grid.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (grid.size() + workers - 1) / workers;
        for (unsigned k = 0; k < workers; ++k) {
            const std::size_t begin = k * chunk;
            const std::size_t end = std::min(grid.size(), begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
    }
    if (failure) std::rethrow_exception(failure);
    return Field(grid, std::move(out));
}

}  // namespace metastab
