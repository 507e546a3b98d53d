#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace parheat {

struct SpaceTimePoint {
    std::vector<double> x;
    double t = 0.0;

    SpaceTimePoint() = default;
    SpaceTimePoint(std::vector<double> x_, double t_) : x(std::move(x_)), t(t_) {}
    SpaceTimePoint(std::initializer_list<double> x_, double t_) : x(x_), t(t_) {}

    int dim() const { return static_cast<int>(x.size()); }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(norm2(a)); }

// Space-time Euclidean distance, used for smooth-region bookkeeping.
inline double spacetime_dist(const SpaceTimePoint& a, const SpaceTimePoint& b) {
    double s = (a.t - b.t) * (a.t - b.t);
    for (std::size_t i = 0; i < a.x.size(); ++i) {
        const double d = a.x[i] - b.x[i];
        s += d * d;
    }
    return std::sqrt(s);
}

class QuadratureError : public std::runtime_error {
  public:
    explicit QuadratureError(const std::string& msg) : std::runtime_error(msg) {}
};

class FieldError : public std::runtime_error {
  public:
    explicit FieldError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace parheat
