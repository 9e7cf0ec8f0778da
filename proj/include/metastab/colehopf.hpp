#pragma once

#include "metastab/similarity.hpp"

namespace metastab {

/// W = w e^{-(1/2mu) int_{-inf}^xi w}.
Field cole_hopf_forward(const Field& w, double mu);

/// w = W / (1 - (1/2mu) int_{-inf}^xi W). Throws PositivityError at the
/// first node where the denominator is not positive.
Field cole_hopf_inverse(const Field& W, double mu);

/// U = e^{-(1/2mu) int_{-inf}^x u}. Its derivative times -2mu is cole_hopf_forward(u).
Field cole_hopf_alt(const Field& u, double mu);

/// Exact solution of W_tau = mu W'' + (xi W)'/2 by Gaussian convolution in
/// physical variables. Rejects W0 whose boundary values exceed 1e-12 of max|W0|.
Field heat_evolve(const Field& W0, double tau, double mu);

/// n = 0: int W.  n = 1: -int xi W.
double spectral_project(const Field& W, int n, double mu);

struct ExactSolutionOptions {
    double tolerance = 1e-11;      // absolute, relative to the kernel scale
    std::size_t max_panels = 40000;  // per output point
    unsigned threads = 0;            // 0: hardware concurrency
};

/// Closed-form Burgers solution from initial data h at tau = 0:
///   w = kappa int (xi - eta) e^{-Phi/2mu} / int e^{-Phi/2mu},
///   Phi = kappa (xi - eta)^2 / 2 + H(e^{tau/2} eta),  kappa = 1/(1 - e^{-tau}),
/// H the primitive of h, constant outside the data grid. Tails beyond the
/// grid are integrated in closed form, the interior by adaptive Simpson.
Field exact_solution(const Field& h, double mu, double tau, const Grid& grid,
                     const ExactSolutionOptions& options = {});

}  // namespace metastab
