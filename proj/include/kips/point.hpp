#pragma once

#include <cmath>

namespace kips {

// State of one particle: position (smooth coordinate) and velocity (rough
// coordinate, the one carrying the noise).
struct Point2 {
    double y = 0.0;
    double x = 0.0;
};

inline double norm(Point2 z) { return std::hypot(z.y, z.x); }

inline double sq(double v) { return v * v; }

}  // namespace kips
