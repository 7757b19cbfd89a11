#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace rnav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr const char* kToolVersion = "rnav 0.3.0";

/// Base of every error the library throws. `kind()` is a stable short tag
/// that the CLI prints in its machine-readable error record.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error("parse", what) {}
};
struct VersionError : Error {
    explicit VersionError(const std::string& what) : Error("version", what) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error("shape", what) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};
struct IoError : Error {
    explicit IoError(const std::string& what) : Error("io", what) {}
};
struct SamplingExhausted : Error {
    explicit SamplingExhausted(const std::string& what) : Error("sampling_exhausted", what) {}
};
struct CollisionError : Error {
    explicit CollisionError(const std::string& what) : Error("collision", what) {}
};
struct GoalInObstacle : Error {
    explicit GoalInObstacle(const std::string& what) : Error("goal_in_obstacle", what) {}
};
struct FieldQueryError : Error {
    explicit FieldQueryError(const std::string& what) : Error("field_query", what) {}
};
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& what) : Error("divergence", what) {}
};

}  // namespace rnav
