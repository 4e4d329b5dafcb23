#pragma once

#include <span>
#include <vector>

namespace dimtp {

// Cubic spline interpolant over strictly increasing knots with not-a-knot end
// conditions, so cubic-polynomial data is reproduced exactly. Needs >= 4 knots.
class CubicSpline {
 public:
  CubicSpline(std::span<const double> t, std::span<const double> y);

  double operator()(double t) const;

  double t_front() const { return t_.front(); }
  double t_back() const { return t_.back(); }

 private:
  std::vector<double> t_, y_;
  std::vector<double> m_;  // second derivatives at knots
};

}  // namespace dimtp
