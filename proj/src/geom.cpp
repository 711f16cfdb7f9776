#include "nbv/geom.hpp"

#include <limits>

namespace nbv {

bool line_aabb_clip(const Vec3& origin, const Vec3& dir, const Aabb& box, double& t0, double& t1) {
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        const double o = origin[i];
        const double d = dir[i];
        if (std::fabs(d) < 1e-15) {
            if (o < box.min[i] || o > box.max[i]) return false;
            continue;
        }
        double ta = (box.min[i] - o) / d;
        double tb = (box.max[i] - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return std::isfinite(t0) && std::isfinite(t1);
}

Frame frame_from_direction(const Vec3& dir) {
    Frame f;
    f.axis = normalized(dir);
    const Vec3 up = std::fabs(f.axis.z) > 0.99 ? Vec3{1, 0, 0} : Vec3{0, 0, 1};
    f.side = normalized(cross(up, f.axis));
    f.binormal = cross(f.axis, f.side);
    return f;
}

}  // namespace nbv
