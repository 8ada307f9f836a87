#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geomopt/geometry.hpp"

namespace testing {

// Fan-beam ray tracing done directly from the scanner description: source on
// the circle, flat detector perpendicular to the central ray at distance d_sd.
struct FanOracle {
  geomopt::ScanGeometry geom;

  Eigen::Vector2d source(double theta) const {
    return geom.source_isocenter_distance * Eigen::Vector2d(std::cos(theta), std::sin(theta));
  }
  // Unit vector from the source towards the isocentre.
  static Eigen::Vector2d view_axis(double theta) { return -Eigen::Vector2d(std::cos(theta), std::sin(theta)); }
  static Eigen::Vector2d detector_axis(double theta) { return Eigen::Vector2d(-std::sin(theta), std::cos(theta)); }

  double depth(double theta, const Eigen::Vector2d& x) const { return (x - source(theta)).dot(view_axis(theta)); }

  // Intersect the source->x line with the detector line and return the
  // detector index of the hit.
  double detector_index(double theta, const Eigen::Vector2d& x) const {
    const Eigen::Vector2d s = source(theta);
    const Eigen::Vector2d d = x - s;
    const Eigen::Vector2d det_center = s + geom.source_detector_distance * view_axis(theta);
    // s + t d = det_center + l a  ->  solve the 2x2 system
    Eigen::Matrix2d A;
    A.col(0) = d;
    A.col(1) = -detector_axis(theta);
    const Eigen::Vector2d tl = A.colPivHouseholderQr().solve(det_center - s);
    return tl[1] / geom.detector_spacing + 0.5 * (geom.num_detector_pixels - 1);
  }

  // Perpendicular distance between the ray of detector pixel j and point c.
  double ray_offset(double theta, double j, const Eigen::Vector2d& c) const {
    const Eigen::Vector2d s = source(theta);
    const double l = (j - 0.5 * (geom.num_detector_pixels - 1)) * geom.detector_spacing;
    const Eigen::Vector2d hit = s + geom.source_detector_distance * view_axis(theta) + l * detector_axis(theta);
    const Eigen::Vector2d dir = (hit - s).normalized();
    const Eigen::Vector2d v = c - s;
    return std::abs(v.x() * dir.y() - v.y() * dir.x());
  }
};

// Natural cubic spline through (xs, ys) by the tridiagonal (Thomas) solve for
// the second derivatives.
inline double natural_spline(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  const std::size_t n = xs.size();
  std::vector<double> m(n, 0.0);
  if (n > 2) {
    const std::size_t k = n - 2;
    std::vector<double> a(k), b(k), c(k), d(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = xs[i] - xs[i - 1];
      const double h1 = xs[i + 1] - xs[i];
      a[i - 1] = h0;
      b[i - 1] = 2.0 * (h0 + h1);
      c[i - 1] = h1;
      d[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    std::vector<double> sol(k);
    sol[k - 1] = d[k - 1] / b[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) sol[i] = (d[i] - c[i] * sol[i + 1]) / b[i];
    for (std::size_t i = 0; i < k; ++i) m[i + 1] = sol[i];
  }
  std::size_t i = 0;
  while (i + 2 < n && x > xs[i + 1]) ++i;
  const double h = xs[i + 1] - xs[i];
  const double A = (xs[i + 1] - x) / h;
  const double B = (x - xs[i]) / h;
  return A * ys[i] + B * ys[i + 1] + ((A * A * A - A) * m[i] + (B * B * B - B) * m[i + 1]) * h * h / 6.0;
}

inline double rel_error(double a, double b) {
  const double d = std::max(std::abs(a), std::abs(b));
  return d == 0.0 ? 0.0 : std::abs(a - b) / d;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Fresh scratch directory per call.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("geomopt_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
