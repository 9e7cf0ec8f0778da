#pragma once

#include "metastab/similarity.hpp"

namespace metastab {

/// One fixed point A_M of the rescaled viscous Burgers equation.
struct DiffusionWaveParams {
    double mu;
    double mass;
    double alpha0;  // sqrt(mu/pi) (1 - e^{-M/2mu})
    double beta0;   // sqrt(4 pi mu) alpha0 = 2 mu (1 - e^{-M/2mu})

    static DiffusionWaveParams from_mass(double mu, double mass);
    /// Throws ConfigError unless 1 - alpha0 sqrt(pi/mu) > 0.
    static DiffusionWaveParams from_alpha0(double mu, double alpha0);

    /// log(1 - alpha0 sqrt(pi/mu)) = -M/(2 mu), kept exact in log form.
    double log_tail() const { return -mass / (2.0 * mu); }
};

/// One point (beta0, beta1) of the diffusive N-wave family observed at time tau.
/// The mass is stored next to beta0 so that e^{-M/2mu} never has to be
/// recovered from 1 - beta0/2mu by cancellation.
struct NWaveParams {
    double mu;
    double mass;
    double beta0;
    double beta1;
    double tau = 0.0;

    static NWaveParams from_mass(double mu, double mass, double beta1, double tau = 0.0);
    static NWaveParams from_beta0(double mu, double beta0, double beta1, double tau = 0.0);

    /// beta1 e^{-tau/2}, the coefficient of phi_1 in the heat representation.
    double scaled_beta1() const;
    NWaveParams at_time(double new_tau) const;
    DiffusionWaveParams diffusion_wave() const { return DiffusionWaveParams::from_mass(mu, mass); }
};

/// Inviscid N-wave N_{p,q}: xi on (-sqrt p, sqrt q], zero elsewhere.
struct InviscidNWaveParams {
    double p;
    double q;

    InviscidNWaveParams(double p, double q);
    double mass() const { return 0.5 * (q - p); }
};

/// phi_n = d^n/dxi^n of e^{-xi^2/4mu}/sqrt(4 pi mu), n <= 6, via Hermite polynomials.
double eigenfunction_phi_at(int n, double mu, double xi);
Field eigenfunction_phi(int n, double mu, const Grid& grid);

/// int_{-inf}^{xi} phi_0 = erfc(-xi/(2 sqrt mu))/2.
double gaussian_cdf(double mu, double xi);

double alpha0_from_mass(double mass, double mu);
double mass_from_alpha0(double alpha0, double mu);
/// mass -> alpha0 -> mass.
double mass_alpha0_roundtrip(double mass, double mu);

Field diffusion_wave(const DiffusionWaveParams& params, const Grid& grid);
/// A_M' = A_M (A_M - xi) / (2 mu), the integrated stationary equation.
Field diffusion_wave_derivative(const DiffusionWaveParams& params, const Grid& grid);

/// Smallest value of the Cole-Hopf denominator
///   D(xi) = 1 - (beta0/2mu) int phi_0 - (beta1 e^{-tau/2}/2mu) phi_0(xi)
/// over the grid nodes, and where it occurs.
struct DenominatorMargin {
    double min_value;
    double xi;
};
DenominatorMargin nwave_denominator_margin(const NWaveParams& params, const Grid& grid);

/// log D(xi). Throws PositivityError if D(xi) <= 0.
double nwave_log_denominator(const NWaveParams& params, double xi);

double diffusive_nwave_at(const NWaveParams& params, double xi);
/// w_N(xi, tau) in the heat-representation form. Throws PositivityError
/// with the offending xi if the denominator is not positive on the grid.
Field diffusive_nwave(const NWaveParams& params, const Grid& grid);

/// A_M + alpha1 e^{-tau/2} A_M' / (1 - (alpha1/2mu) e^{-tau/2} A_M).
/// Equal to diffusive_nwave with the same mass and beta1 = alpha1 beta0.
Field diffusive_nwave_alt(double mass, double alpha1, double tau, double mu, const Grid& grid);

/// Phi_n = d/dxi ( int phi_n / (1 - (alpha0/2mu) int e^{-eta^2/4mu}) ), n in {0, 1}.
Field eigenfunction_Phi(int n, double mass, double mu, const Grid& grid);

enum class Direction { forward, inverse };

/// U f = d/dxi[(int f) e^{(1/2mu) int A_M}] and its inverse. The exponential
/// factor is 1/D_A in closed form; only int f is computed numerically.
Field conjugacy_apply(const Field& f, double mass, double mu, Direction direction);

Field inviscid_nwave(const InviscidNWaveParams& params, const Grid& grid);

struct PQ {
    double p;
    double q;
};

/// (p, q) of w_N from its exact primitive -2 mu log D; the extremum sits at
/// y* = 2 mu beta0 / (beta1 e^{-tau/2}).
PQ nwave_pq_exact(const NWaveParams& params);

struct Beta1Asymptotic {
    double scaled_beta1;      // beta1 e^{-tau/2}
    double log_abs_scaled;    // log|beta1 e^{-tau/2}|, finite even when the value overflows
    double beta1;
    double y_star;
};

/// beta1 e^{-tau/2} ~ -4 mu^{3/2} sqrt(pi) e^{p/4mu} - sqrt(mu/pi) for 0 < q < p.
/// Use reflect() for q > p.
Beta1Asymptotic beta1_asymptotic(double p, double q, double mu, double tau);

/// Numerical inverse of (beta0, beta1) -> (p, q) at tau = 0: beta0 is fixed by
/// M = (q - p)/2 and beta1 by bisection on log|beta1|.
NWaveParams beta_from_pq_numeric(double p, double q, double mu);

/// The symmetry w(xi) -> -w(-xi): (M, b) -> (-M, e^{M/2mu} b), (p, q) -> (q, p).
NWaveParams reflect(const NWaveParams& params);
/// Pointwise -w(-xi); the grid must be symmetric about 0.
Field reflect(const Field& w);

}  // namespace metastab
