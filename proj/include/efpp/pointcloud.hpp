#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "efpp/geometry.hpp"

namespace efpp {

/// Axis-aligned sampling window; upper[i] > lower[i] for all i, d >= 2.
struct Window {
    std::vector<double> lower;
    std::vector<double> upper;

    Window() = default;
    Window(std::vector<double> lo, std::vector<double> hi);

    /// Cube [-half, half]^d.
    static Window centered_cube(int d, double half);
    /// Box [lo, hi]^d.
    static Window cube(int d, double lo, double hi);

    int dim() const { return static_cast<int>(lower.size()); }
    double volume() const;
    double extent(int axis) const { return upper[axis] - lower[axis]; }
    bool contains(Vec x) const;
    /// Distance from x to the window boundary (0 outside).
    double boundary_distance(Vec x) const;
};

struct GridCellInfo {
    bool occupied = false;
    int count = 0;
};

/// Occupancy of the eta-boxes (cubes centered at eta*nu, nu in Z^d) covering
/// the window; keyed by nu.
using BoxOccupancy = std::map<std::vector<std::int64_t>, GridCellInfo>;

/// An immutable point sample in a window with a uniform-grid index.
/// Immutable after construction; concurrent reads are safe.
class PointSet {
public:
    /// Poisson(lambda * volume) points, i.i.d. uniform; deterministic in seed.
    static PointSet sample_poisson(const Window& window, double lambda, std::uint64_t seed);

    /// Fixed configuration (tests, file loads). coords is row-major n x d.
    static PointSet from_points(const Window& window, std::vector<double> coords, double lambda,
                                std::uint64_t seed = 0);

    int size() const { return n_; }
    int dim() const { return d_; }
    double lambda() const { return lambda_; }
    std::uint64_t seed() const { return seed_; }
    const Window& window() const { return window_; }
    Vec point(int i) const { return Vec(coords_.data() + static_cast<std::size_t>(i) * d_, d_); }
    const std::vector<double>& coords() const { return coords_; }

    double distance(int i, int j) const { return dist(point(i), point(j)); }

    /// Id minimizing Euclidean distance to x, ties by smallest id.
    int nearest(Vec x) const;

    /// Ids with |p - center| <= r, ascending.
    std::vector<int> range_query(Vec center, double r) const;

    /// Distance to the k-th nearest neighbor of point i (k >= 1, capped at n-1).
    double kth_neighbor_distance(int i, int k) const;

    /// Distance from an arbitrary location to its k-th nearest particle.
    double kth_neighbor_distance(Vec x, int k) const;

    /// Squared variants: exact doubles, safe to compare against dist_sq.
    double kth_neighbor_distance_sq(int i, int k) const;
    double kth_neighbor_distance_sq(Vec x, int k) const;

    /// Ids with dist_sq(p, x) <= r_sq, ascending (i excluded in the id form).
    void neighbors_within_sq(int i, double r_sq, std::vector<int>& out) const;
    void neighbors_within_sq(Vec x, double r_sq, std::vector<int>& out) const;

    /// Collects ids within radius r of point i, excluding i itself.
    void neighbors_within(int i, double r, std::vector<int>& out) const;
    void neighbors_within(Vec x, double r, std::vector<int>& out) const;

    BoxOccupancy box_occupancy(double eps) const;

    void save(std::ostream& os) const;
    static PointSet load(std::istream& is);
    void save_file(const std::string& path) const;
    static PointSet load_file(const std::string& path);

    double grid_cell_size() const { return cell_; }
    const std::vector<std::int64_t>& grid_dims() const { return gdim_; }
    std::span<const int> cell_points(std::int64_t lin) const {
        return std::span<const int>(cell_points_.data() + cell_start_[lin],
                                    cell_points_.data() + cell_start_[lin + 1]);
    }

private:
    PointSet() = default;
    void build_grid();

    std::int64_t cell_index(Vec x) const;

    Window window_;
    double lambda_ = 1.0;
    std::uint64_t seed_ = 0;
    int d_ = 0;
    int n_ = 0;
    std::vector<double> coords_;

    // uniform grid (CSR over cells)
    double cell_ = 1.0;
    std::vector<std::int64_t> gdim_;
    std::vector<int> cell_start_;
    std::vector<int> cell_points_;
};

} // namespace efpp
