#pragma once

#include <vector>

namespace parahom {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

// Ordinary least squares y ~ intercept + slope x.  Needs two or more
// distinct x values; throws SingularLeastSquares otherwise.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Fit of log(y) against log(x).
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace parahom
