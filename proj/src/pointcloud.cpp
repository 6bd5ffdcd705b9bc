#include "efpp/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "efpp/errors.hpp"
#include "efpp/rng.hpp"

namespace efpp {

namespace {
constexpr double kMaxGridCells = 1e8;
}

Window::Window(std::vector<double> lo, std::vector<double> hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() < 2)
        throw std::invalid_argument("Window: need matching bounds with d >= 2");
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!(upper[i] > lower[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw std::invalid_argument("Window: upper must exceed lower on every axis");
    }
}

Window Window::centered_cube(int d, double half) {
    return Window(std::vector<double>(d, -half), std::vector<double>(d, half));
}

Window Window::cube(int d, double lo, double hi) {
    return Window(std::vector<double>(d, lo), std::vector<double>(d, hi));
}

double Window::volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
    return v;
}

bool Window::contains(Vec x) const {
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (x[i] < lower[i] || x[i] > upper[i]) return false;
    return true;
}

double Window::boundary_distance(Vec x) const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lower.size(); ++i) {
        m = std::min(m, x[i] - lower[i]);
        m = std::min(m, upper[i] - x[i]);
    }
    return std::max(0.0, m);
}

PointSet PointSet::sample_poisson(const Window& window, double lambda, std::uint64_t seed) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("sample_poisson: lambda must be positive and finite");
    const double vol = window.volume();
    if (!(vol > 0.0) || !std::isfinite(vol))
        throw std::invalid_argument("sample_poisson: degenerate window");

    Substream rng(seed, 0);
    const std::uint64_t n = rng.poisson(lambda * vol);

    PointSet ps;
    ps.window_ = window;
    ps.lambda_ = lambda;
    ps.seed_ = seed;
    ps.d_ = window.dim();
    ps.n_ = static_cast<int>(n);
    ps.coords_.resize(n * static_cast<std::size_t>(ps.d_));
    for (std::size_t i = 0; i < n; ++i)
        for (int j = 0; j < ps.d_; ++j)
            ps.coords_[i * ps.d_ + j] = window.lower[j] + rng.next_uniform() * window.extent(j);
    ps.build_grid();
    return ps;
}

PointSet PointSet::from_points(const Window& window, std::vector<double> coords, double lambda,
                               std::uint64_t seed) {
    if (!(lambda > 0.0)) throw std::invalid_argument("from_points: lambda must be positive");
    const int d = window.dim();
    if (coords.size() % d != 0) throw std::invalid_argument("from_points: coords not a multiple of d");
    PointSet ps;
    ps.window_ = window;
    ps.lambda_ = lambda;
    ps.seed_ = seed;
    ps.d_ = d;
    ps.n_ = static_cast<int>(coords.size() / d);
    ps.coords_ = std::move(coords);
    for (int i = 0; i < ps.n_; ++i)
        if (!window.contains(ps.point(i)))
            throw std::invalid_argument("from_points: point outside window");
    ps.build_grid();
    return ps;
}

void PointSet::build_grid() {
    const double vol = window_.volume();
    double cell = std::pow(1.0 / lambda_, 1.0 / d_); // ~1 expected point per cell
    const double min_cell = std::pow(vol / kMaxGridCells, 1.0 / d_);
    cell = std::max(cell, min_cell);
    cell_ = cell;

    gdim_.resize(d_);
    std::size_t total = 1;
    for (int j = 0; j < d_; ++j) {
        gdim_[j] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(window_.extent(j) / cell_)));
        total *= static_cast<std::size_t>(gdim_[j]);
    }

    cell_start_.assign(total + 1, 0);
    cell_points_.resize(n_);
    for (int i = 0; i < n_; ++i) cell_start_[cell_index(point(i)) + 1]++;
    for (std::size_t c = 0; c < total; ++c) cell_start_[c + 1] += cell_start_[c];
    std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
    for (int i = 0; i < n_; ++i) cell_points_[cursor[cell_index(point(i))]++] = i;
}

std::int64_t PointSet::cell_index(Vec x) const {
    std::int64_t idx = 0;
    for (int j = 0; j < d_; ++j) {
        auto c = static_cast<std::int64_t>(std::floor((x[j] - window_.lower[j]) / cell_));
        c = std::clamp<std::int64_t>(c, 0, gdim_[j] - 1);
        idx = idx * gdim_[j] + c;
    }
    return idx;
}

namespace {

/// Expanding Chebyshev-ring scan shared by nearest / k-NN / range queries.
class GridSearch {
public:
    GridSearch(const PointSet& ps, Vec x) : ps_(ps), x_(x), d_(ps.dim()) {}

    /// Visits all points in rings of increasing radius.  `stop(d_out)` is
    /// consulted after each ring: d_out is a lower bound on the distance from
    /// x to any unscanned point.
    template <typename PointFn, typename StopFn>
    void run(PointFn&& on_point, StopFn&& stop);

private:
    const PointSet& ps_;
    Vec x_;
    int d_;
};

template <typename PointFn, typename StopFn>
void GridSearch::run(PointFn&& on_point, StopFn&& stop) {
    const auto& lower = ps_.window().lower;
    const double cell = ps_.grid_cell_size();
    const auto& gdim = ps_.grid_dims();
    std::vector<std::int64_t> c(d_);
    for (int j = 0; j < d_; ++j) {
        auto cj = static_cast<std::int64_t>(std::floor((x_[j] - lower[j]) / cell));
        c[j] = std::clamp<std::int64_t>(cj, 0, gdim[j] - 1);
    }
    std::int64_t rho_max = 0;
    for (int j = 0; j < d_; ++j)
        rho_max = std::max(rho_max, std::max(c[j], gdim[j] - 1 - c[j]));

    std::vector<std::int64_t> idx(d_);
    std::vector<std::int64_t> lo(d_), hi(d_);
    for (std::int64_t rho = 0;; ++rho) {
        for (int j = 0; j < d_; ++j) {
            lo[j] = std::max<std::int64_t>(0, c[j] - rho);
            hi[j] = std::min<std::int64_t>(gdim[j] - 1, c[j] + rho);
        }
        // odometer over the ring (Chebyshev distance exactly rho)
        idx = lo;
        for (;;) {
            std::int64_t cheb = 0;
            for (int j = 0; j < d_; ++j)
                cheb = std::max<std::int64_t>(cheb, std::abs(idx[j] - c[j]));
            if (cheb == rho) {
                std::int64_t lin = 0;
                for (int j = 0; j < d_; ++j) lin = lin * gdim[j] + idx[j];
                for (int id : ps_.cell_points(lin)) on_point(id);
            }
            int j = d_ - 1;
            while (j >= 0 && ++idx[j] > hi[j]) { idx[j] = lo[j]; --j; }
            if (j < 0) break;
        }
        // distance from x to anything beyond the scanned hull
        double d_out = std::numeric_limits<double>::infinity();
        bool hull_covers_grid = true;
        for (int j = 0; j < d_; ++j) {
            const double hull_lo = lower[j] + static_cast<double>(c[j] - rho) * cell;
            const double hull_hi = lower[j] + static_cast<double>(c[j] + rho + 1) * cell;
            if (c[j] - rho > 0) {
                d_out = std::min(d_out, x_[j] - hull_lo);
                hull_covers_grid = false;
            }
            if (c[j] + rho < gdim[j] - 1) {
                d_out = std::min(d_out, hull_hi - x_[j]);
                hull_covers_grid = false;
            }
        }
        if (hull_covers_grid) return;
        if (stop(std::max(0.0, d_out))) return;
        if (rho >= rho_max) return;
    }
}

} // namespace

int PointSet::nearest(Vec x) const {
    if (n_ == 0) throw EmptyDomainError("nearest: empty point set");
    double best = std::numeric_limits<double>::infinity();
    int best_id = -1;
    GridSearch gs(*this, x);
    gs.run(
        [&](int id) {
            const double d2 = dist_sq(point(id), x);
            if (d2 < best || (d2 == best && id < best_id)) {
                best = d2;
                best_id = id;
            }
        },
        [&](double d_out) { return best_id >= 0 && best <= d_out * d_out; });
    return best_id;
}

std::vector<int> PointSet::range_query(Vec center, double r) const {
    if (r < 0.0) throw std::invalid_argument("range_query: negative radius");
    std::vector<int> out;
    neighbors_within(center, r, out);
    return out;
}

void PointSet::neighbors_within(Vec x, double r, std::vector<int>& out) const {
    out.clear();
    const double r2 = r * r;
    GridSearch gs(*this, x);
    gs.run(
        [&](int id) {
            if (dist_sq(point(id), x) <= r2) out.push_back(id);
        },
        [&](double d_out) { return d_out > r; });
    std::sort(out.begin(), out.end());
}

void PointSet::neighbors_within(int i, double r, std::vector<int>& out) const {
    neighbors_within(point(i), r, out);
    out.erase(std::remove(out.begin(), out.end(), i), out.end());
}

namespace {

double kth_distance_around(const PointSet& ps, Vec x, int k, int skip) {
    std::priority_queue<double> heap; // max-heap of k smallest squared distances
    GridSearch gs(ps, x);
    gs.run(
        [&](int id) {
            if (id == skip) return;
            const double d2 = dist_sq(ps.point(id), x);
            if (static_cast<int>(heap.size()) < k) {
                heap.push(d2);
            } else if (d2 < heap.top()) {
                heap.pop();
                heap.push(d2);
            }
        },
        [&](double d_out) {
            return static_cast<int>(heap.size()) == k && heap.top() <= d_out * d_out;
        });
    return heap.top(); // squared
}

} // namespace

double PointSet::kth_neighbor_distance_sq(int i, int k) const {
    if (n_ <= 1) return 0.0;
    k = std::min(k, n_ - 1);
    if (k < 1) throw std::invalid_argument("kth_neighbor_distance: k >= 1");
    return kth_distance_around(*this, point(i), k, i);
}

double PointSet::kth_neighbor_distance_sq(Vec x, int k) const {
    if (n_ == 0) throw EmptyDomainError("kth_neighbor_distance: empty point set");
    k = std::min(k, n_);
    if (k < 1) throw std::invalid_argument("kth_neighbor_distance: k >= 1");
    return kth_distance_around(*this, x, k, -1);
}

double PointSet::kth_neighbor_distance(int i, int k) const {
    return std::sqrt(kth_neighbor_distance_sq(i, k));
}

double PointSet::kth_neighbor_distance(Vec x, int k) const {
    return std::sqrt(kth_neighbor_distance_sq(x, k));
}

void PointSet::neighbors_within_sq(Vec x, double r_sq, std::vector<int>& out) const {
    out.clear();
    GridSearch gs(*this, x);
    gs.run(
        [&](int id) {
            if (dist_sq(point(id), x) <= r_sq) out.push_back(id);
        },
        [&](double d_out) { return d_out * d_out > r_sq; });
    std::sort(out.begin(), out.end());
}

void PointSet::neighbors_within_sq(int i, double r_sq, std::vector<int>& out) const {
    neighbors_within_sq(point(i), r_sq, out);
    out.erase(std::remove(out.begin(), out.end(), i), out.end());
}

BoxOccupancy PointSet::box_occupancy(double eps) const {
    if (!(eps > 0.0)) throw std::invalid_argument("box_occupancy: eps must be positive");
    BoxOccupancy occ;
    // all boxes covering the window
    std::vector<std::int64_t> lo(d_), hi(d_), nu(d_);
    double total = 1.0;
    for (int j = 0; j < d_; ++j) {
        lo[j] = static_cast<std::int64_t>(std::floor(window_.lower[j] / eps + 0.5));
        hi[j] = static_cast<std::int64_t>(std::floor(window_.upper[j] / eps + 0.5));
        total *= static_cast<double>(hi[j] - lo[j] + 1);
    }
    if (total > 2e7) throw std::invalid_argument("box_occupancy: eps too small for this window");
    nu = lo;
    for (;;) {
        occ.emplace(nu, GridCellInfo{});
        int j = d_ - 1;
        while (j >= 0 && ++nu[j] > hi[j]) { nu[j] = lo[j]; --j; }
        if (j < 0) break;
    }
    for (int i = 0; i < n_; ++i) {
        const Vec p = point(i);
        for (int j = 0; j < d_; ++j) nu[j] = static_cast<std::int64_t>(std::floor(p[j] / eps + 0.5));
        auto& info = occ[nu];
        info.occupied = true;
        info.count++;
    }
    return occ;
}

void PointSet::save(std::ostream& os) const {
    char buf[64];
    os << "efpp-pointset-v1\n";
    os << "d " << d_ << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", lambda_);
    os << "lambda " << buf << "\n";
    os << "seed " << seed_ << "\n";
    os << "lower";
    for (double v : window_.lower) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << ' ' << buf;
    }
    os << "\nupper";
    for (double v : window_.upper) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << ' ' << buf;
    }
    os << "\nn " << n_ << "\n";
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < d_; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", coords_[static_cast<std::size_t>(i) * d_ + j]);
            os << (j ? " " : "") << buf;
        }
        os << "\n";
    }
}

PointSet PointSet::load(std::istream& is) {
    std::string tag;
    is >> tag;
    if (tag != "efpp-pointset-v1") throw std::runtime_error("pointset load: bad header");
    std::string key;
    int d = 0, n = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    is >> key >> d;
    if (key != "d" || d < 2) throw std::runtime_error("pointset load: bad d");
    is >> key >> lambda;
    if (key != "lambda") throw std::runtime_error("pointset load: bad lambda");
    is >> key >> seed;
    if (key != "seed") throw std::runtime_error("pointset load: bad seed");
    std::vector<double> lo(d), hi(d);
    is >> key;
    if (key != "lower") throw std::runtime_error("pointset load: bad lower");
    for (double& v : lo) is >> v;
    is >> key;
    if (key != "upper") throw std::runtime_error("pointset load: bad upper");
    for (double& v : hi) is >> v;
    is >> key >> n;
    if (key != "n" || n < 0) throw std::runtime_error("pointset load: bad n");
    std::vector<double> coords(static_cast<std::size_t>(n) * d);
    for (double& v : coords) is >> v;
    if (!is) throw std::runtime_error("pointset load: truncated coordinates");
    return from_points(Window(std::move(lo), std::move(hi)), std::move(coords), lambda, seed);
}

void PointSet::save_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    save(os);
}

PointSet PointSet::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return load(is);
}

} // namespace efpp
