#include "tmvnlab/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tmvnlab {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;
constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056176;

// Mills ratio (1-Phi(x))/phi(x) by backward continued fraction; only
// called for large x where it converges in a handful of terms.
double mills_cf(double x) {
  double f = 0.0;
  for (int k = 60; k >= 1; --k) f = k / (x + f);
  return 1.0 / (x + f);
}

// 7-point Gauss-Legendre nodes/weights on [-1,1]; used to integrate phi
// over thin straddling intervals where cdf subtraction would cancel.
constexpr double kGl7Node[7] = {
    -0.9491079123427585245262, -0.7415311855993944398639,
    -0.4058451513773971669066, 0.0,
    0.4058451513773971669066,  0.7415311855993944398639,
    0.9491079123427585245262};
constexpr double kGl7Weight[7] = {
    0.1294849661688696932706, 0.2797053914892766679015,
    0.3818300505051189449504, 0.4179591836734693877551,
    0.3818300505051189449504, 0.2797053914892766679015,
    0.1294849661688696932706};

double phi_integral_gl7(double a, double b) {
  const double h = 0.5 * (b - a), m = 0.5 * (a + b);
  double s = 0.0;
  for (int i = 0; i < 7; ++i) s += kGl7Weight[i] * norm_pdf(m + h * kGl7Node[i]);
  return h * s;
}

}  // namespace

double norm_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double norm_logpdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double norm_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double norm_ln_sf(double x) {
  if (x < -1.0) return std::log1p(-norm_sf(-x));
  if (x <= 36.0) return std::log(0.5 * std::erfc(x * kInvSqrt2));
  return norm_logpdf(x) + std::log(mills_cf(x));
}

double norm_quantile(double p) {
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  if (!(p > 0.0) || !(p < 1.0)) throw std::domain_error("norm_quantile: p outside [0,1]");
  // Acklam's rational approximation as the initial guess
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley polish against the erfc-based cdf; evaluated on the smaller
  // tail so the residual keeps relative precision.
  for (int it = 0; it < 3; ++it) {
    double f;
    if (x < 0.0)
      f = norm_cdf(x) - p;  // cdf(x) computed via erfc(-x/sqrt2): small side
    else
      f = (1.0 - p) - norm_sf(x);
    double dphi = norm_pdf(x);
    if (dphi == 0.0) break;
    double step = f / dphi;
    double denom = 1.0 + 0.5 * x * step;
    x -= (denom > 0.5) ? step / denom : step;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(x)) && it >= 1) break;
  }
  return x;
}

double interval_prob(double a, double b) {
  if (!(a < b)) return 0.0;
  const bool ainf = std::isinf(a), binf = std::isinf(b);
  if (ainf && binf) return 1.0;
  if (ainf) return norm_cdf(b);
  if (binf) return norm_sf(a);
  if (a >= 0.0) return norm_sf(a) - norm_sf(b);
  if (b <= 0.0) return norm_cdf(b) - norm_cdf(a);
  if (b - a < 0.5) return phi_integral_gl7(a, b);
  return norm_cdf(b) - norm_cdf(a);
}

double ln_interval_prob(double a, double b) {
  if (!(a < b)) return -std::numeric_limits<double>::infinity();
  const bool ainf = std::isinf(a), binf = std::isinf(b);
  if (ainf && binf) return 0.0;
  if (ainf) return norm_ln_sf(-b);
  if (binf) return norm_ln_sf(a);
  if (a >= 0.0) {
    double la = norm_ln_sf(a), lb = norm_ln_sf(b);
    return la + std::log1p(-std::exp(lb - la));
  }
  if (b <= 0.0) {
    double la = norm_ln_sf(-a), lb = norm_ln_sf(-b);
    return lb + std::log1p(-std::exp(la - lb));
  }
  return std::log(interval_prob(a, b));
}

TnMoments tn_moments(double a, double b) {
  TnMoments m;
  m.ln_z = ln_interval_prob(a, b);
  const double la = std::isinf(a) ? -std::numeric_limits<double>::infinity()
                                  : norm_logpdf(a);
  const double lb = std::isinf(b) ? -std::numeric_limits<double>::infinity()
                                  : norm_logpdf(b);
  const double ra = std::isinf(la) ? 0.0 : std::exp(la - m.ln_z);
  const double rb = std::isinf(lb) ? 0.0 : std::exp(lb - m.ln_z);
  m.c = ra - rb;
  const double ara = std::isinf(a) ? 0.0 : a * ra;
  const double brb = std::isinf(b) ? 0.0 : b * rb;
  m.v = 1.0 + ara - brb - m.c * m.c;
  if (m.v < 0.0) m.v = 0.0;  // clamp roundoff on extreme intervals
  return m;
}

double tn_inverse(double u, double a, double b) {
  if (u <= 0.0) return a;
  if (u >= 1.0) return b;
  double z;
  if (a >= 0.0 || (std::isinf(b) && a > -1.0)) {
    // work on the survival side: Q(z) = Q(a)(1-u) + Q(b)u
    const double qa = norm_sf(a);
    const double qb = std::isinf(b) ? 0.0 : norm_sf(b);
    double q = qa * (1.0 - u) + qb * u;
    if (q <= 0.0) q = std::numeric_limits<double>::denorm_min();
    z = -norm_quantile(q);
  } else if (b <= 0.0 || (std::isinf(a) && b < 1.0)) {
    const double pa = std::isinf(a) ? 0.0 : norm_cdf(a);
    const double pb = norm_cdf(b);
    double q = pa * (1.0 - u) + pb * u;
    if (q <= 0.0) q = std::numeric_limits<double>::denorm_min();
    z = norm_quantile(q);
  } else {
    const double pa = std::isinf(a) ? 0.0 : norm_cdf(a);
    const double pb = std::isinf(b) ? 1.0 : norm_cdf(b);
    double q = pa + u * (pb - pa);
    if (q <= 0.0) q = std::numeric_limits<double>::denorm_min();
    if (q >= 1.0) q = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    z = norm_quantile(q);
  }
  if (z < a) z = a;
  if (z > b) z = b;
  return z;
}

double Rng::exponential(double rate) {
  return -std::log(uniform()) / rate;
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw std::domain_error("gamma: bad parameters");
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a+1) * U^{1/a}
    double g = gamma(shape + 1.0, 1.0);
    return g * std::pow(uniform(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace tmvnlab
