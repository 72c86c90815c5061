#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace parapot {

using Point = std::vector<double>;

inline double sq(double x) { return x * x; }

/// |x|^N for small integer N without calling pow in hot loops.
inline double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

inline double dist2(const Point& a, const Point& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += sq(a[i] - b[i]);
    return s;
}

/// Volume of the unit ball in R^N.
double unit_ball_volume(int N);

struct Box {
    Point lo, hi;

    int dim() const { return static_cast<int>(lo.size()); }

    double edge(int axis) const { return hi[axis] - lo[axis]; }

    double volume() const {
        double v = 1;
        for (int a = 0; a < dim(); ++a) v *= edge(a);
        return v;
    }

    double diam() const {
        double s = 0;
        for (int a = 0; a < dim(); ++a) s += sq(edge(a));
        return std::sqrt(s);
    }

    double min_edge() const {
        double m = edge(0);
        for (int a = 1; a < dim(); ++a) m = std::min(m, edge(a));
        return m;
    }

    bool contains(const Point& x, double pad = 0) const {
        for (int a = 0; a < dim(); ++a)
            if (x[a] < lo[a] - pad || x[a] > hi[a] + pad) return false;
        return true;
    }

    Point center() const {
        Point c(lo.size());
        for (int a = 0; a < dim(); ++a) c[a] = 0.5 * (lo[a] + hi[a]);
        return c;
    }

    void validate() const {
        if (lo.size() != hi.size() || lo.empty())
            throw std::invalid_argument("Box: inconsistent bounds");
        for (int a = 0; a < dim(); ++a)
            if (!(edge(a) > 0)) throw std::invalid_argument("Box: edge length must be positive");
    }
};

/// Spatial domain (axis-aligned box or ball) together with the time horizon T.
struct Domain {
    enum class Kind { box, ball };

    Kind kind = Kind::box;
    Box box;        // kind == box
    Point center;   // kind == ball
    double radius = 0;
    double T = 0;

    static Domain make_box(Box b, double T) {
        b.validate();
        if (!(T > 0)) throw std::invalid_argument("Domain: T must be positive");
        Domain d;
        d.kind = Kind::box;
        d.box = std::move(b);
        d.T = T;
        return d;
    }

    static Domain make_ball(Point c, double radius, double T) {
        if (c.empty()) throw std::invalid_argument("Domain: empty center");
        if (!(radius > 0)) throw std::invalid_argument("Domain: radius must be positive");
        if (!(T > 0)) throw std::invalid_argument("Domain: T must be positive");
        Domain d;
        d.kind = Kind::ball;
        d.center = std::move(c);
        d.radius = radius;
        d.T = T;
        return d;
    }

    int dim() const { return kind == Kind::box ? box.dim() : static_cast<int>(center.size()); }

    double diam() const { return kind == Kind::box ? box.diam() : 2 * radius; }

    /// The length scale diam(domain) + T entering the truncation radius 2d
    /// and the logarithmic weight h2.
    double d() const { return diam() + T; }

    bool contains_spatial(const Point& x, double pad = 0) const {
        if (kind == Kind::box) return box.contains(x, pad);
        return std::sqrt(dist2(x, center)) <= radius + pad;
    }

    /// Tight axis-aligned bounding box of the spatial domain.
    Box bounding_box() const {
        if (kind == Kind::box) return box;
        Box b;
        b.lo.resize(center.size());
        b.hi.resize(center.size());
        for (std::size_t a = 0; a < center.size(); ++a) {
            b.lo[a] = center[a] - radius;
            b.hi[a] = center[a] + radius;
        }
        return b;
    }
};

/// Q_s(x,t) = B_s(x) x (t - s^2/2, t + s^2/2).
struct ParabolicCylinder {
    Point x;
    double t = 0;
    double s = 0;

    double t_lo() const { return t - 0.5 * s * s; }
    double t_hi() const { return t + 0.5 * s * s; }

    bool contains(const Point& y, double tau) const {
        // Boundary points count as inside (fixed convention).
        return dist2(x, y) <= s * s && std::abs(tau - t) <= 0.5 * s * s;
    }
};

/// Space-time lattice over Q_T: interior vertex nodes per axis plus time
/// levels k*T/nt, k = 1..nt.  Node (k, i1..iN) sits at
/// x_a = lo_a + i_a * L_a/(nx_a + 1), i_a = 1..nx_a.
struct SpaceTimeGrid {
    Box spatial;
    double T = 0;
    std::vector<int> nx;
    int nt = 0;

    static SpaceTimeGrid make(const Box& b, double T, std::vector<int> nx, int nt) {
        b.validate();
        if (static_cast<int>(nx.size()) != b.dim())
            throw std::invalid_argument("SpaceTimeGrid: nx rank mismatch");
        for (int n : nx)
            if (n < 1) throw std::invalid_argument("SpaceTimeGrid: nx must be >= 1");
        if (nt < 1) throw std::invalid_argument("SpaceTimeGrid: nt must be >= 1");
        if (!(T > 0)) throw std::invalid_argument("SpaceTimeGrid: T must be positive");
        SpaceTimeGrid g;
        g.spatial = b;
        g.T = T;
        g.nx = std::move(nx);
        g.nt = nt;
        return g;
    }

    int dim() const { return spatial.dim(); }

    double hx(int axis) const { return spatial.edge(axis) / (nx[axis] + 1); }
    double dt() const { return T / nt; }

    std::size_t spatial_count() const {
        std::size_t c = 1;
        for (int n : nx) c *= static_cast<std::size_t>(n);
        return c;
    }

    std::size_t node_count() const { return spatial_count() * static_cast<std::size_t>(nt); }

    /// Spatial flat index, axis 0 slowest.
    Point spatial_node(std::size_t flat) const {
        Point x(dim());
        for (int a = dim() - 1; a >= 0; --a) {
            int i = static_cast<int>(flat % nx[a]);
            flat /= nx[a];
            x[a] = spatial.lo[a] + (i + 1) * hx(a);
        }
        return x;
    }

    double time_node(int k) const { return (k + 1) * dt(); }  // k = 0..nt-1

    std::size_t flat(int k, std::size_t spatial_flat) const {
        return static_cast<std::size_t>(k) * spatial_count() + spatial_flat;
    }
};

}  // namespace parapot
