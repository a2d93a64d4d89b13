#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pdsplit/errors.hpp"

namespace pdsplit {

using Shape = std::vector<int>;

inline std::size_t shape_count(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw ShapeError("negative extent in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

/// Dense real array with an explicit shape: a vector, a 2-D image, or a
/// stacked gradient field {2,h,w}. The one value type every operator, prox,
/// and solver works on.
struct Grid {
  Shape shape;
  std::vector<double> data;

  Grid() = default;
  Grid(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(shape_count(shape), fill) {}
  Grid(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_count(shape))
      throw ShapeError("data size " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  std::size_t size() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // 2-D accessors; valid when shape is {h,w} or for a plane of {c,h,w}.
  double& at(int i, int j) {
    const int w = shape.back();
    return data[static_cast<std::size_t>(i) * w + j];
  }
  double at(int i, int j) const {
    const int w = shape.back();
    return data[static_cast<std::size_t>(i) * w + j];
  }

  bool same_shape(const Grid& o) const { return shape == o.shape; }
};

inline void require_same_shape(const Grid& a, const Grid& b, const char* where) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(where) + ": shape mismatch " +
                     shape_str(a.shape) + " vs " + shape_str(b.shape));
}

inline double dot(const Grid& a, const Grid& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

inline double norm_sq(const Grid& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return s;
}

inline double norm(const Grid& a) { return std::sqrt(norm_sq(a)); }

inline double norm1(const Grid& a) {
  double s = 0.0;
  for (double v : a.data) s += std::abs(v);
  return s;
}

inline Grid operator+(Grid a, const Grid& b) {
  require_same_shape(a, b, "operator+");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
  return a;
}

inline Grid operator-(Grid a, const Grid& b) {
  require_same_shape(a, b, "operator-");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] -= b.data[i];
  return a;
}

inline Grid operator*(double c, Grid a) {
  for (double& v : a.data) v *= c;
  return a;
}

inline Grid& operator+=(Grid& a, const Grid& b) {
  require_same_shape(a, b, "operator+=");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
  return a;
}

inline Grid& operator-=(Grid& a, const Grid& b) {
  require_same_shape(a, b, "operator-=");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] -= b.data[i];
  return a;
}

inline Grid& operator*=(Grid& a, double c) {
  for (double& v : a.data) v *= c;
  return a;
}

// a + c*b, no temporary for the common solver update pattern.
inline void axpy(Grid& a, double c, const Grid& b) {
  require_same_shape(a, b, "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += c * b.data[i];
}

inline bool all_finite(const Grid& a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace pdsplit
