#pragma once

// Shared value types, errors, and physical constants for the pressim library.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pressim {

// ---------------------------------------------------------------------------
// Errors. Category maps to the CLI exit code.
// ---------------------------------------------------------------------------

enum class ErrorCategory : int {
  Usage = 1,    // bad flags, bad config, invalid generation specs
  Data = 2,     // file format, shape, or content errors
  Numeric = 3,  // solver or training failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& msg)
      : std::runtime_error(msg), category_(cat) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

#define PRESSIM_DEFINE_ERROR(NAME, CATEGORY)                      \
  class NAME : public Error {                                     \
   public:                                                        \
    explicit NAME(const std::string& msg)                         \
        : Error(ErrorCategory::CATEGORY, std::string(#NAME ": ") + msg) {} \
  }

PRESSIM_DEFINE_ERROR(InvalidSpec, Usage);
PRESSIM_DEFINE_ERROR(UnknownKey, Usage);
PRESSIM_DEFINE_ERROR(ConfigTypeError, Usage);
PRESSIM_DEFINE_ERROR(DimensionMismatch, Data);
PRESSIM_DEFINE_ERROR(ShapeMismatch, Data);
PRESSIM_DEFINE_ERROR(IoFailure, Data);
PRESSIM_DEFINE_ERROR(FormatError, Data);
PRESSIM_DEFINE_ERROR(KindMismatch, Data);
PRESSIM_DEFINE_ERROR(EmptyStream, Data);
PRESSIM_DEFINE_ERROR(NoOverlap, Data);
PRESSIM_DEFINE_ERROR(TooShort, Data);
PRESSIM_DEFINE_ERROR(BadRatios, Data);
PRESSIM_DEFINE_ERROR(LengthMismatch, Data);
PRESSIM_DEFINE_ERROR(AllFramesEmpty, Data);
PRESSIM_DEFINE_ERROR(EmptyDataset, Data);
PRESSIM_DEFINE_ERROR(NoContact, Numeric);
PRESSIM_DEFINE_ERROR(NonConvergence, Numeric);
PRESSIM_DEFINE_ERROR(DivergenceDetected, Numeric);

#undef PRESSIM_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    return n > 0 ? Vec3{x / n, y / n, z / n} : Vec3{0, 0, 0};
  }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// ---------------------------------------------------------------------------
// Sensor grid frames. The mat is 80 rows (Y, 21 mm pitch) by 28 columns
// (X, 20 mm pitch); frames are stored row-major.
// ---------------------------------------------------------------------------

inline constexpr int kGridRows = 80;
inline constexpr int kGridCols = 28;
inline constexpr int kGridCells = kGridRows * kGridCols;

template <typename T>
struct Grid {
  std::array<T, kGridCells> values{};

  T& operator()(int row, int col) { return values[row * kGridCols + col]; }
  const T& operator()(int row, int col) const {
    return values[row * kGridCols + col];
  }
  T* data() { return values.data(); }
  const T* data() const { return values.data(); }
  bool operator==(const Grid& o) const { return values == o.values; }
};

// Deformation profile: 0-255 per cell, 255 = indentation at or past d_max.
using DeformationFrame = Grid<std::uint8_t>;

// Pressure map in mmHg, clipped to the mat's 0-5000 measuring range.
using PressureFrame = Grid<float>;

// ---------------------------------------------------------------------------
// Physical constants
// ---------------------------------------------------------------------------

inline constexpr double kMatSizeX = 0.56;       // meters, 28 columns
inline constexpr double kMatSizeY = 1.68;       // meters, 80 rows
inline constexpr double kPitchX = 0.020;        // meters per column
inline constexpr double kPitchY = 0.021;        // meters per row
inline constexpr double kSensorAreaM2 = 0.012 * 0.016;  // active area per cell
inline constexpr double kPascalPerMmHg = 133.322;
inline constexpr double kPressureMaxMmHg = 5000.0;
inline constexpr double kDeformMax = 255.0;
// Mat diagonal, used to normalize pose coordinates for training.
inline const double kPoseScale = std::sqrt(kMatSizeX * kMatSizeX + kMatSizeY * kMatSizeY);

}  // namespace pressim
