#include "elltest/special_fn.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "elltest/errors.hpp"

namespace elltest {

namespace {

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

void check_df(double m)
{
    if (!(m > 0.0) || !std::isfinite(m)) throw InputError("degrees of freedom must be positive");
}

} // namespace

double t_cdf(double x, double m)
{
    check_df(m);
    if (std::isnan(x)) return x;
    if (x == std::numeric_limits<double>::infinity()) return 1.0;
    if (x == -std::numeric_limits<double>::infinity()) return 0.0;
    return boost::math::cdf(boost::math::students_t_distribution<double>(m), x);
}

double t_sf(double x, double m)
{
    return t_cdf(-x, m);
}

double t_quantile(double p, double m)
{
    check_df(m);
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("probability outside [0, 1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return boost::math::quantile(boost::math::students_t_distribution<double>(m), p);
}

double norm_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double norm_sf(double x)
{
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

double norm_pdf(double x)
{
    static const double k = 1.0 / std::sqrt(2.0 * M_PI);
    return k * std::exp(-0.5 * x * x);
}

double norm_quantile(double p)
{
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("probability outside [0, 1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return boost::math::quantile(kStdNormal, p);
}

double u_cdf(double u, double m)
{
    check_df(m);
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return t_cdf(std::sqrt(m) * u / std::sqrt((1.0 - u) * (1.0 + u)), m);
}

double u_sf(double u, double m)
{
    return u_cdf(-u, m);
}

double u_quantile(double p, double m)
{
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("probability outside [0, 1]");
    if (p == 0.0) return -1.0;
    if (p == 1.0) return 1.0;
    const double t = t_quantile(p, m);
    return t / std::sqrt(m + t * t);
}

} // namespace elltest
