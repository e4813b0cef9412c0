#pragma once
/// Small value types shared by every fbgap module: 2-vectors, 2x2 matrices,
/// integer lattice coordinates and the exception hierarchy.

#include <array>
#include <cmath>
#include <complex>
#include <compare>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fbgap {

using complex = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Base error for invalid input or violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a computation is well posed but numerically breaks down
/// (resonant denominators, lost band tracking, singular resolvents).
class NumericalError : public Error {
 public:
  using Error::Error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
constexpr double norm2(const Vec2& a) { return dot(a, a); }

/// Integer coordinates of a lattice vector with respect to a lattice basis.
struct IVec2 {
  std::int64_t i = 0;
  std::int64_t j = 0;

  friend constexpr IVec2 operator+(const IVec2& a, const IVec2& b) { return {a.i + b.i, a.j + b.j}; }
  friend constexpr IVec2 operator-(const IVec2& a, const IVec2& b) { return {a.i - b.i, a.j - b.j}; }
  friend constexpr IVec2 operator-(const IVec2& a) { return {-a.i, -a.j}; }
  friend constexpr IVec2 operator*(std::int64_t s, const IVec2& a) { return {s * a.i, s * a.j}; }
  friend constexpr auto operator<=>(const IVec2&, const IVec2&) = default;
};

/// Column-major 2x2 real matrix; `col(0)` and `col(1)` are the generators
/// when the matrix describes a lattice basis.
struct Mat2 {
  std::array<double, 4> m{};  // (0,0) (1,0) (0,1) (1,1)

  static constexpr Mat2 from_columns(const Vec2& c0, const Vec2& c1) {
    return Mat2{{c0.x, c0.y, c1.x, c1.y}};
  }
  static constexpr Mat2 from_rows(const Vec2& r0, const Vec2& r1) {
    return Mat2{{r0.x, r1.x, r0.y, r1.y}};
  }
  static constexpr Mat2 identity() { return Mat2{{1.0, 0.0, 0.0, 1.0}}; }

  constexpr double operator()(int r, int c) const { return m[static_cast<std::size_t>(r + 2 * c)]; }
  constexpr double& operator()(int r, int c) { return m[static_cast<std::size_t>(r + 2 * c)]; }

  constexpr Vec2 col(int c) const { return {(*this)(0, c), (*this)(1, c)}; }
  constexpr double det() const { return m[0] * m[3] - m[2] * m[1]; }
  constexpr Mat2 transpose() const { return Mat2{{m[0], m[2], m[1], m[3]}}; }

  Mat2 inverse() const {
    const double d = det();
    if (d == 0.0) throw Error("singular 2x2 matrix");
    return Mat2{{m[3] / d, -m[1] / d, -m[2] / d, m[0] / d}};
  }

  friend constexpr Vec2 operator*(const Mat2& a, const Vec2& v) {
    return {a(0, 0) * v.x + a(0, 1) * v.y, a(1, 0) * v.x + a(1, 1) * v.y};
  }
  friend constexpr Mat2 operator*(const Mat2& a, const Mat2& b) {
    Mat2 r;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j);
    return r;
  }
  friend constexpr Mat2 operator*(double s, Mat2 a) {
    for (auto& x : a.m) x *= s;
    return a;
  }
  friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
inline std::array<double, 2> symmetric_eigenvalues(const Mat2& a) {
  const double mean = 0.5 * (a(0, 0) + a(1, 1));
  const double half = 0.5 * (a(0, 0) - a(1, 1));
  const double off = 0.5 * (a(0, 1) + a(1, 0));
  const double r = std::hypot(half, off);
  return {mean - r, mean + r};
}

/// Unit eigenvector of a symmetric 2x2 matrix for its smaller eigenvalue.
inline Vec2 symmetric_low_eigenvector(const Mat2& a) {
  const double off = 0.5 * (a(0, 1) + a(1, 0));
  const double half = 0.5 * (a(0, 0) - a(1, 1));
  // angle of the eigenvector belonging to the larger eigenvalue
  const double phi = 0.5 * std::atan2(off, half);
  return {-std::sin(phi), std::cos(phi)};
}

inline Vec2 to_vec(const IVec2& v) { return {static_cast<double>(v.i), static_cast<double>(v.j)}; }

}  // namespace fbgap
