#include "dimtp/spline.hpp"

#include <algorithm>
#include <cstddef>
#include <stdexcept>

namespace dimtp {

CubicSpline::CubicSpline(std::span<const double> t, std::span<const double> y)
    : t_(t.begin(), t.end()), y_(y.begin(), y.end()) {
  const std::size_t n = t_.size();
  if (n != y_.size()) throw std::invalid_argument("CubicSpline: t/y size mismatch");
  if (n < 4) throw std::invalid_argument("CubicSpline: need at least 4 knots");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(t_[i] < t_[i + 1])) throw std::invalid_argument("CubicSpline: knots must increase");
  }

  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = t_[i + 1] - t_[i];

  // Second-derivative (moment) system for the n-2 interior knots. The two
  // not-a-knot conditions are eliminated into the first and last rows:
  //   M_0     = M_1 + (h_0/h_1) (M_1 - M_2)
  //   M_{n-1} = M_{n-2} + (h_{n-2}/h_{n-3}) (M_{n-2} - M_{n-3})
  const std::size_t u = n - 2;  // unknowns M_1 .. M_{n-2}
  std::vector<double> lower(u, 0.0), diag(u, 0.0), upper(u, 0.0), rhs(u, 0.0);
  for (std::size_t i = 1; i + 1 <= n - 1; ++i) {
    const std::size_t r = i - 1;
    lower[r] = h[i - 1];
    diag[r] = 2.0 * (h[i - 1] + h[i]);
    upper[r] = h[i];
    rhs[r] = 6.0 * ((y_[i + 1] - y_[i]) / h[i] - (y_[i] - y_[i - 1]) / h[i - 1]);
  }
  diag[0] += h[0] + h[0] * h[0] / h[1];
  upper[0] -= h[0] * h[0] / h[1];
  diag[u - 1] += h[n - 2] + h[n - 2] * h[n - 2] / h[n - 3];
  lower[u - 1] -= h[n - 2] * h[n - 2] / h[n - 3];

  // Thomas algorithm.
  for (std::size_t r = 1; r < u; ++r) {
    const double w = lower[r] / diag[r - 1];
    diag[r] -= w * upper[r - 1];
    rhs[r] -= w * rhs[r - 1];
  }
  m_.assign(n, 0.0);
  m_[n - 2] = rhs[u - 1] / diag[u - 1];
  for (std::size_t r = u - 1; r-- > 0;) {
    m_[r + 1] = (rhs[r] - upper[r] * m_[r + 2]) / diag[r];
  }
  m_[0] = m_[1] + (h[0] / h[1]) * (m_[1] - m_[2]);
  m_[n - 1] = m_[n - 2] + (h[n - 2] / h[n - 3]) * (m_[n - 2] - m_[n - 3]);
}

double CubicSpline::operator()(double t) const {
  const std::size_t n = t_.size();
  // Locate the interval; evaluation clamps to the knot range.
  std::size_t i;
  if (t <= t_.front()) {
    i = 0;
  } else if (t >= t_.back()) {
    i = n - 2;
  } else {
    i = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin()) - 1;
  }
  const double h = t_[i + 1] - t_[i];
  const double a = (t_[i + 1] - t) / h;
  const double b = (t - t_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

}  // namespace dimtp
