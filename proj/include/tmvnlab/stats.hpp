#pragma once

#include <cstdint>
#include <random>

// Standard-normal special functions and the deterministic RNG layer.
// Everything downstream (quadrature oracles, SOV sampler, Gibbs chains)
// routes through these, so they are tuned for full double accuracy in
// the far tails, not just the bulk.

namespace tmvnlab {

double norm_pdf(double x);
double norm_logpdf(double x);
double norm_cdf(double x);
double norm_sf(double x);

// log(1 - Phi(x)) for all finite x; stays accurate out to x ~ 1e3 where
// erfc has long since underflowed.
double norm_ln_sf(double x);

// Inverse of Phi, valid for p in (0,1) including denormal p.
// Relative error <= ~1e-15 (rational initial guess polished by Halley
// steps against the erfc-based cdf).
double norm_quantile(double p);

// Phi(b) - Phi(a) with a < b, either endpoint may be infinite.  Thin
// straddling intervals are integrated directly so the result keeps full
// relative accuracy instead of cancelling.
double interval_prob(double a, double b);
double ln_interval_prob(double a, double b);

// Moments of the standard normal truncated to [a,b] (either endpoint
// may be infinite): c = E[Z], v = Var[Z], ln_z = log P(a <= Z <= b).
struct TnMoments {
  double c;
  double v;
  double ln_z;
};
TnMoments tn_moments(double a, double b);

// Quantile of N(0,1) truncated to [a,b] at probability u in [0,1].
// Uses the survival-function parametrization on whichever side keeps
// precision, so it is safe deep in a tail (a ~ 30).
double tn_inverse(double u, double a, double b);

// splitmix64 finalizer; used everywhere a derived seed is needed
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Deterministic RNG: fixed 64-bit generator plus hand-rolled mappings so
// streams are bit-reproducible across platforms and standard-library
// versions (std::normal_distribution makes no such promise).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // uniform on (0,1), never returns an endpoint
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return norm_quantile(uniform()); }

  double exponential(double rate);

  // Marsaglia-Tsang for shape >= 1, boost trick below 1
  double gamma(double shape, double rate);

  // child stream, decorrelated from the parent by seed mixing
  Rng derive(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace tmvnlab
