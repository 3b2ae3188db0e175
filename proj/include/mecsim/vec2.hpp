#pragma once

#include <cmath>

namespace mecsim {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }

    double norm() const { return std::hypot(x, y); }
    double norm_sq() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// componentwise clamp into the square [lo, hi]^2
inline Vec2 clamp_box(const Vec2& v, double lo, double hi) {
    auto cl = [&](double t) { return t < lo ? lo : (t > hi ? hi : t); };
    return {cl(v.x), cl(v.y)};
}

} // namespace mecsim
