#pragma once

namespace elltest {

// Student-t with m degrees of freedom.
double t_cdf(double x, double m);
double t_sf(double x, double m); // 1 - t_cdf, without cancellation
double t_quantile(double p, double m);

double norm_cdf(double x);
double norm_sf(double x);
double norm_pdf(double x);
double norm_quantile(double p);

// Law of the first coordinate of a uniform point on the unit sphere in
// R^{m+1}: sqrt(m) u / sqrt(1 - u^2) is t_m. Clamped to {0, 1} outside (-1, 1).
double u_cdf(double u, double m);
double u_sf(double u, double m);
double u_quantile(double p, double m);

} // namespace elltest
