#pragma once

// Forward-mode dual number carrying derivatives with respect to up to
// kMaxParams pose parameters. Unused tangent slots stay zero.

#include <Eigen/Core>

#include <cmath>

namespace rescene {

inline constexpr int kMaxParams = 5;
using Grad = Eigen::Matrix<double, kMaxParams, 1>;

struct Dual {
  double v = 0.0;
  Grad d = Grad::Zero();

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit constants are the point
  Dual(double value, const Grad& deriv) : v(value), d(deriv) {}

  static Dual variable(double value, int slot) {
    Dual x(value);
    x.d[slot] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + o.d * v; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    d = (d - o.d * (v * inv)) * inv;
    v *= inv;
    return *this;
  }
};

inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator+(Dual a, double b) { a.v += b; return a; }
inline Dual operator+(double b, Dual a) { a.v += b; return a; }
inline Dual operator-(Dual a, double b) { a.v -= b; return a; }
inline Dual operator-(double b, const Dual& a) { return {b - a.v, -a.d}; }
inline Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
inline Dual operator*(double b, const Dual& a) { return {a.v * b, a.d * b}; }
inline Dual operator/(const Dual& a, double b) { return {a.v / b, a.d / b}; }
inline Dual operator/(double b, const Dual& a) { return {b / a.v, a.d * (-b / (a.v * a.v))}; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }

inline Dual exp(const Dual& a) { const double e = std::exp(a.v); return {e, a.d * e}; }
inline Dual log(const Dual& a) { return {std::log(a.v), a.d / a.v}; }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return {s, a.d * (0.5 / s)};
}
inline Dual sin(const Dual& a) { return {std::sin(a.v), a.d * std::cos(a.v)}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), a.d * -std::sin(a.v)}; }
inline Dual pow(const Dual& a, double p) {
  const double base = std::pow(a.v, p - 1.0);
  return {base * a.v, a.d * (p * base)};
}

// Scalar helpers that let templated code run on double and Dual alike.
inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

using std::cos;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sqrt;

template <class T>
T sigmoid(const T& x) {
  // Stable on both tails.
  if (value_of(x) >= 0.0) {
    const T e = exp(-x);
    return 1.0 / (1.0 + e);
  }
  const T e = exp(x);
  return e / (1.0 + e);
}

template <class T>
struct V3 {
  T x{}, y{}, z{};

  V3() = default;
  V3(T a, T b, T c) : x(std::move(a)), y(std::move(b)), z(std::move(c)) {}
  explicit V3(const Eigen::Vector3d& v) : x(v.x()), y(v.y()), z(v.z()) {}

  V3 operator+(const V3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  V3 operator-(const V3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  V3 operator*(const T& s) const { return {x * s, y * s, z * s}; }
  T dot(const V3& o) const { return x * o.x + y * o.y + z * o.z; }
  Eigen::Vector3d value() const { return {value_of(x), value_of(y), value_of(z)}; }
};

template <class T>
V3<T> mat_mul(const Eigen::Matrix3d& m, const V3<T>& v) {
  return {m(0, 0) * v.x + m(0, 1) * v.y + m(0, 2) * v.z,
          m(1, 0) * v.x + m(1, 1) * v.y + m(1, 2) * v.z,
          m(2, 0) * v.x + m(2, 1) * v.y + m(2, 2) * v.z};
}

}  // namespace rescene
