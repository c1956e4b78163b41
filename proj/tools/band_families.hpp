#pragma once

// Correlation families the experiment drivers share: a Matern field on the
// unit grid tapered to a band (the slab-mass ladders), and chains of
// equicorrelated blocks (the bound-chain inputs).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "tmvnlab/basis.hpp"
#include "tmvnlab/matrices.hpp"

namespace tmvnlab {

// Banded family behind the slab-mass ladders. Off-diagonal correlations
// follow a Matern kernel on the grid j/(N-1), scaled to 0.75 at lag zero
// and tapered linearly to zero at lag K, so refining the grid (larger N)
// strengthens the band while K controls its width. The 0.25 identity
// margin keeps every (N, K) positive definite.
inline CorrelationBand grid_matern_band(int n, int k_band) {
  const MaternParams p{0.75, 0.25};
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n && j - i < k_band; ++j) {
      const double lag = double(j - i);
      const double taper = 1.0 - lag / double(k_band);
      m(i, j) = m(j, i) = 0.75 * matern(lag / double(n - 1), p) * taper;
    }
  }
  return CorrelationBand(n, k_band, m);
}

// Chain of independent equicorrelated blocks of size k (the last block may
// be shorter): every nonzero in-band correlation equals rho, and the
// matrix is positive definite for rho in [0, 1).
inline CorrelationBand block_chain(int n, int k, double rho) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int s = 0; s < n; s += k) {
    const int b = std::min(k, n - s);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < b; ++j)
        if (i != j) m(s + i, s + j) = rho;
  }
  return CorrelationBand(n, k, m);
}

}  // namespace tmvnlab
