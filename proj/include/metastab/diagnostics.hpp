#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "metastab/manifolds.hpp"
#include "metastab/similarity.hpp"
#include "metastab/solver.hpp"

namespace metastab {

/// p = -2 inf_y int_{-inf}^y w and q = 2 sup_y int_y^inf w over grid nodes.
/// Ties resolve to the smallest node index.
struct PQFunctionals {
    double p;
    double q;
    std::size_t inf_index;
    std::size_t sup_index;
};
PQFunctionals pq_functionals(const Field& w);

/// H[w] = int W log(W / e^{-xi^2/4mu}) with W the Cole-Hopf image of w.
/// W must be single-signed (for W <= 0 the functional of -W is returned);
/// nodes with |W| below 1e-13 max|W| count as zero. Throws NumericalError
/// listing the first offending node otherwise.
double entropy(const Field& w, double mu);

struct PhiRemainder {
    Field phi;
    double delta_N;  // min over the grid of both Cole-Hopf denominators
};

/// phi = -(1/2mu) [Psi int V - V int Psi - 2mu Psi] / (D_{N+Psi} D_N), with
/// V, Psi the Cole-Hopf images of w_N and w - w_N. The integrals come from
/// the integrated transform, so phi == w - w_N up to rounding. Throws
/// PositivityError if delta_N < 1e-12.
PhiRemainder phi_remainder(const Field& w, const Field& w_N, double mu);

struct ManifoldDistance {
    double distance;
    NWaveParams params;  // tau = 0 gauge
};

/// Minimizes weighted_distance(w, w_N(beta0, beta1, 0)) over beta1 with
/// beta0 fixed by the mass of w. The search runs over log|beta1| around the
/// first moment of the Cole-Hopf image, then golden-section; beta1 = 0 is
/// always a candidate.
ManifoldDistance dist_to_nwave_manifold(const Field& w, double mu, WeightExponent m);

struct DecayFit {
    double rate;
    double r_squared;
    std::size_t points;
};

/// Least-squares slope of log(value) against tau over [tau_lo, tau_hi].
/// Values below 1e3 eps times the first value of the series are dropped.
DecayFit fit_decay_rate(const std::vector<std::pair<double, double>>& series, double tau_lo, double tau_hi);

/// Line fit y = a + b x with r^2, used for T(mu) against |log mu|.
struct LineFit {
    double intercept;
    double slope;
    double r_squared;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

enum class PQMode {
    tracking,  // (p, q) re-measured on every snapshot
    frozen,    // (p, q) of the first snapshot
};

struct TransientOptions {
    bool relative = true;  // threshold is delta * ||N_{p,q}||
    PQMode mode = PQMode::tracking;
};

struct TransientTime {
    bool crossed;
    double tau;               // first crossing, or NaN
    double closest_distance;  // in the same units as delta
    double closest_tau;
};

/// First snapshot where the distance to N_{p,q} drops to delta.
TransientTime transient_time(const Trajectory& traj, double delta, double mu, WeightExponent m,
                             const TransientOptions& options = {});

/// ||w - N_{p,q}|| / ||N_{p,q}|| with (p, q) measured from w.
double relative_distance_to_inviscid(const Field& w, WeightExponent m);

}  // namespace metastab
