#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace limitshape {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;

// Absolute membership tolerance in gradient units.
inline constexpr double kGeomTol = 1e-12;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct SingularPointError : Error { using Error::Error; };
struct OutsideDomainError : Error { using Error::Error; };
struct NonConvergenceError : Error { using Error::Error; };
struct InadmissibleError : Error { using Error::Error; };
struct MalformedBoundaryError : Error { using Error::Error; };
struct MeshDegenerateError : Error { using Error::Error; };
struct MeshMismatchError : Error { using Error::Error; };
struct WindowOutsideDomainError : Error { using Error::Error; };
struct TooLargeError : Error { using Error::Error; };
struct InadmissibleBoundaryError : Error { using Error::Error; };

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace limitshape
