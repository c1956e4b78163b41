#pragma once

#include <functional>

namespace tmvnlab {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;   // achieved error estimate
  int evaluations = 0;
  bool converged = false;
};

// Adaptive Gauss-Kronrod (G7/K15) on a finite interval.  Bisects the
// segment with the largest error estimate until the summed estimate is
// below max(abs_tol, rel_tol * |value|) or the segment budget runs out.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol = 1e-10, double rel_tol = 1e-12,
                     int max_segments = 4000);

}  // namespace tmvnlab
