#pragma once

// Real special functions on the parameter ranges the detectors need.
// Domain violations throw std::domain_error naming the function.

namespace kdetect::num {

inline constexpr double euler_gamma = 0.57721566490153286061;

// E1(x) = int_x^inf e^-t/t dt, x > 0.
double expint_e1(double x);

// Logarithmic integral li(x) = Ei(ln x) for 0 < x < 1 (strictly negative there).
double log_integral(double x);

double erfc(double x);

// Regularised upper incomplete gamma Q(s, x) and the unregularised Gamma(s, x).
double gamma_q(double s, double x);
double gamma_upper(double s, double x);

// Regularised incomplete beta I_x(a, b).
double reg_inc_beta(double x, double a, double b);

// Modified Bessel function of the second kind; log form avoids underflow at large x.
double bessel_k(double nu, double x);
double log_bessel_k(double nu, double x);

// Gauss hypergeometric 2F1(a, b; c; z), power series, |z| < 1.
double hyp2f1(double a, double b, double c, double z);

// Generalised binomial coefficient Gamma(n+1)/(Gamma(k+1)Gamma(n-k+1)) for n >= k >= 0.
double binomial_real(double n, double k);

}  // namespace kdetect::num
