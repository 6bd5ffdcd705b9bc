#include "efpp/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <queue>
#include <tuple>

#include "efpp/errors.hpp"
#include "efpp/forest.hpp"
#include "efpp/rng.hpp"

namespace efpp {

namespace {

/// Applies fn(id) to every point whose grid cell intersects the coordinate box
/// [lo, hi]; returns early if fn returns true.
template <typename Fn>
bool for_points_in_box(const PointSet& ps, const std::vector<double>& lo,
                       const std::vector<double>& hi, Fn&& fn) {
    const int d = ps.dim();
    const auto& gdim = ps.grid_dims();
    const auto& wlo = ps.window().lower;
    const double cell = ps.grid_cell_size();
    std::vector<std::int64_t> clo(d), chi(d), idx(d);
    for (int j = 0; j < d; ++j) {
        clo[j] = std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::floor((lo[j] - wlo[j]) / cell)), 0, gdim[j] - 1);
        chi[j] = std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::floor((hi[j] - wlo[j]) / cell)), 0, gdim[j] - 1);
    }
    idx = clo;
    for (;;) {
        std::int64_t lin = 0;
        for (int j = 0; j < d; ++j) lin = lin * gdim[j] + idx[j];
        for (int id : ps.cell_points(lin))
            if (fn(id)) return true;
        int j = d - 1;
        while (j >= 0 && ++idx[j] > chi[j]) { idx[j] = clo[j]; --j; }
        if (j < 0) return false;
    }
}

bool lens_interior_occupied_box(const PointSet& ps, const CostModel& cm, Vec a, Vec b,
                                int skip_a, int skip_b) {
    const int d = ps.dim();
    const double ab = dist(a, b);
    const double rad = 0.5 * std::sqrt(3.0) * ab;
    std::vector<double> lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
        const double mid = 0.5 * (a[j] + b[j]);
        lo[j] = mid - rad;
        hi[j] = mid + rad;
    }
    const bool fast2 = cm.alpha == 2.0 && cm.pure_power();
    const double rhs = cm.link_cost(ab);
    const double cutoff = rhs * (1.0 - kLensSlack);
    return for_points_in_box(ps, lo, hi, [&](int id) {
        if (id == skip_a || id == skip_b) return false;
        const Vec c = ps.point(id);
        double lhsv;
        if (fast2) {
            lhsv = dist_sq(a, c) + dist_sq(c, b);
        } else {
            lhsv = cm.link_cost(dist(a, c)) + cm.link_cost(dist(c, b));
        }
        return lhsv < cutoff;
    });
}

} // namespace

bool lens_interior_occupied(const PointSet& ps, const CostModel& cm, Vec a, Vec b,
                            int skip_a, int skip_b) {
    return lens_interior_occupied_box(ps, cm, a, b, skip_a, skip_b);
}

// ---------------------------------------------------------------------------
// allocation-free 2-d fast path used by the graph builder
// ---------------------------------------------------------------------------

namespace {

struct Grid2D {
    const PointSet& ps;
    double lox, loy, cell;
    std::int64_t nx, ny;

    explicit Grid2D(const PointSet& p)
        : ps(p),
          lox(p.window().lower[0]),
          loy(p.window().lower[1]),
          cell(p.grid_cell_size()),
          nx(p.grid_dims()[0]),
          ny(p.grid_dims()[1]) {}

    /// fn(id) -> true to stop early; iterates every point in cells meeting
    /// the box [cx +- r, cy +- r].
    template <typename Fn>
    bool for_box(double cx, double cy, double r, Fn&& fn) const {
        const auto clampx = [&](double v) {
            return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((v - lox) / cell)),
                                            0, nx - 1);
        };
        const auto clampy = [&](double v) {
            return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((v - loy) / cell)),
                                            0, ny - 1);
        };
        const std::int64_t x0 = clampx(cx - r), x1 = clampx(cx + r);
        const std::int64_t y0 = clampy(cy - r), y1 = clampy(cy + r);
        for (std::int64_t ix = x0; ix <= x1; ++ix)
            for (std::int64_t iy = y0; iy <= y1; ++iy)
                for (int id : ps.cell_points(ix * ny + iy))
                    if (fn(id)) return true;
        return false;
    }
};

/// Witness scan specialised for d = 2 (no allocation, alpha = 2 fast path).
/// The cells around the midpoint are scanned first: blocked pairs almost
/// always hold a witness there, so long candidate edges die early.
bool lens_blocked_2d(const Grid2D& grid, const CostModel& cm, const double* a, const double* b,
                     int skip_a, int skip_b) {
    const double abx = b[0] - a[0], aby = b[1] - a[1];
    const double ab_sq = abx * abx + aby * aby;
    const double rad = 0.8660254037844387 * std::sqrt(ab_sq);
    const double mx = 0.5 * (a[0] + b[0]), my = 0.5 * (a[1] + b[1]);
    const auto& coords = grid.ps.coords();
    if (cm.alpha == 2.0 && cm.pure_power()) {
        const double cutoff = ab_sq * (1.0 - kLensSlack);
        const auto test = [&](int id) {
            if (id == skip_a || id == skip_b) return false;
            const double cx = coords[2 * id], cy = coords[2 * id + 1];
            const double dax = cx - a[0], day = cy - a[1];
            const double dbx = cx - b[0], dby = cy - b[1];
            return dax * dax + day * day + dbx * dbx + dby * dby < cutoff;
        };
        if (rad > 2.0 * grid.cell && grid.for_box(mx, my, grid.cell, test)) return true;
        return grid.for_box(mx, my, rad, test);
    }
    const double cutoff = cm.link_cost(std::sqrt(ab_sq)) * (1.0 - kLensSlack);
    const auto test = [&](int id) {
        if (id == skip_a || id == skip_b) return false;
        const double cx = coords[2 * id], cy = coords[2 * id + 1];
        const double da = std::hypot(cx - a[0], cy - a[1]);
        const double db = std::hypot(cx - b[0], cy - b[1]);
        return cm.link_cost(da) + cm.link_cost(db) < cutoff;
    };
    if (rad > 2.0 * grid.cell && grid.for_box(mx, my, grid.cell, test)) return true;
    return grid.for_box(mx, my, rad, test);
}

/// Squared distances to the k1-th and k2-th nearest neighbors (k1 <= k2) via
/// progressive box growth; exact.
void two_radii_sq(const Grid2D& grid, int i, int k1, int k2, double& r1_sq, double& r2_sq,
                  std::vector<double>& scratch) {
    const auto& coords = grid.ps.coords();
    const double px = coords[2 * i], py = coords[2 * i + 1];
    const int n = grid.ps.size();
    const int want = std::min(k2, n - 1);
    double r = grid.cell * std::sqrt((want + 8) / 3.14159265358979323846) + grid.cell;
    const double rmax =
        std::hypot(grid.nx * grid.cell, grid.ny * grid.cell) + 2.0 * grid.cell;
    for (;;) {
        scratch.clear();
        const double r_sq = r * r;
        grid.for_box(px, py, r, [&](int id) {
            if (id == i) return false;
            const double dx = coords[2 * id] - px, dy = coords[2 * id + 1] - py;
            const double d2 = dx * dx + dy * dy;
            if (d2 <= r_sq) scratch.push_back(d2);
            return false;
        });
        if (static_cast<int>(scratch.size()) >= want || r > rmax) break;
        r *= 1.6;
    }
    const int m = static_cast<int>(scratch.size());
    const int kk2 = std::min(want, m);
    const int kk1 = std::min(std::min(k1, n - 1), m);
    std::nth_element(scratch.begin(), scratch.begin() + (kk2 - 1), scratch.end());
    r2_sq = scratch[kk2 - 1];
    std::nth_element(scratch.begin(), scratch.begin() + (kk1 - 1), scratch.begin() + kk2);
    r1_sq = scratch[kk1 - 1];
}

} // namespace

// ---------------------------------------------------------------------------
// candidate graph
// ---------------------------------------------------------------------------

namespace {

struct EdgeRec {
    int a, b;
    double len;
    bool operator<(const EdgeRec& o) const { return std::tie(a, b) < std::tie(o.a, o.b); }
};

/// Kept edges among pairs inside squared budget radii hi[], excluding pairs
/// already inside radii lo[] (pass empty lo for the base level).  All radius
/// comparisons stay in squared space so boundary neighbors are kept exactly.
/// The owner of an unordered pair is the smaller id unless the pair lies
/// outside the smaller id's radius.
std::vector<EdgeRec> kept_edges_in_budget(const PointSet& ps, const CostModel& cm,
                                          const std::vector<double>& hi_sq,
                                          const std::vector<double>& lo_sq) {
    const int n = ps.size();
    std::vector<EdgeRec> kept;
    if (ps.dim() == 2) {
        const Grid2D grid(ps);
        const auto& coords = ps.coords();
        for (int i = 0; i < n; ++i) {
            const double px = coords[2 * i], py = coords[2 * i + 1];
            const double r = std::sqrt(hi_sq[i]);
            grid.for_box(px, py, r, [&](int j) {
                if (j == i) return false;
                const double dx = coords[2 * j] - px, dy = coords[2 * j + 1] - py;
                const double len_sq = dx * dx + dy * dy;
                if (len_sq > hi_sq[i]) return false;
                if (j < i && len_sq <= hi_sq[j]) return false; // owned by j
                if (!lo_sq.empty() && len_sq <= std::max(lo_sq[i], lo_sq[j])) return false;
                const double a2[2] = {px, py};
                const double b2[2] = {coords[2 * j], coords[2 * j + 1]};
                if (!lens_blocked_2d(grid, cm, a2, b2, i, j))
                    kept.push_back({std::min(i, j), std::max(i, j), std::sqrt(len_sq)});
                return false;
            });
        }
        return kept;
    }
    std::vector<int> buf;
    for (int i = 0; i < n; ++i) {
        const Vec pi = ps.point(i);
        ps.neighbors_within_sq(i, hi_sq[i], buf);
        for (int j : buf) {
            const double len_sq = dist_sq(pi, ps.point(j));
            if (j < i && len_sq <= hi_sq[j]) continue; // already owned by j
            if (!lo_sq.empty() && len_sq <= std::max(lo_sq[i], lo_sq[j])) continue;
            if (!lens_interior_occupied_box(ps, cm, pi, ps.point(j), i, j)) {
                kept.push_back({std::min(i, j), std::max(i, j), std::sqrt(len_sq)});
            }
        }
    }
    return kept;
}

/// Squared k-th and 2k-th neighbor radii in one pass per point.
void budget_radii_sq_pair(const PointSet& ps, int k, int k2, std::vector<double>& r1,
                          std::vector<double>& r2) {
    const int n = ps.size();
    r1.resize(n);
    r2.resize(n);
    if (ps.dim() == 2) {
        const Grid2D grid(ps);
        std::vector<double> scratch;
        scratch.reserve(4 * k2);
        for (int i = 0; i < n; ++i) two_radii_sq(grid, i, k, k2, r1[i], r2[i], scratch);
        return;
    }
    for (int i = 0; i < n; ++i) {
        r1[i] = ps.kth_neighbor_distance_sq(i, k);
        r2[i] = ps.kth_neighbor_distance_sq(i, k2);
    }
}

} // namespace

CandidateGraph CandidateGraph::build(const PointSet& ps, const CostModel& cm, int k,
                                     AuditLevel audit) {
    if (ps.size() < 2) throw std::invalid_argument("build_candidate_graph: need n >= 2");
    if (k < 1) throw std::invalid_argument("build_candidate_graph: k >= 1");

    CandidateGraph g;
    g.ps_ = &ps;
    g.cm_ = cm;
    g.k_ = k;
    g.audit_ = audit;

    std::vector<double> radii, radii2;
    budget_radii_sq_pair(ps, k, 2 * k, radii, radii2);
    std::vector<EdgeRec> edges = kept_edges_in_budget(ps, cm, radii, {});
    int doublings = 0;

    if (audit == AuditLevel::Doubling && ps.size() > k + 1) {
        // Kept edges only ever accumulate as the budget grows, so the edge set
        // is unchanged at budget 2b exactly when the audit annulus is empty.
        int budget = k;
        for (;;) {
            std::vector<EdgeRec> extra = kept_edges_in_budget(ps, cm, radii2, radii);
            if (extra.empty()) break;
            ++doublings;
            if (doublings > 3)
                throw UnstablePruneError(
                    "candidate graph: edge set still growing after 3 budget doublings");
            edges.insert(edges.end(), extra.begin(), extra.end());
            budget *= 2;
            radii = std::move(radii2);
            if (ps.size() <= budget + 1) break; // budget covers everything
            std::vector<double> discard;
            budget_radii_sq_pair(ps, 2 * budget, 2 * budget, discard, radii2);
        }
    }
    g.doublings_ = doublings;

    const int n = ps.size();
    g.adj_start_.assign(n + 1, 0);
    for (const auto& e : edges) {
        g.adj_start_[e.a + 1]++;
        g.adj_start_[e.b + 1]++;
    }
    for (int i = 0; i < n; ++i) g.adj_start_[i + 1] += g.adj_start_[i];
    g.adj_.resize(edges.size() * 2);
    g.len_.resize(edges.size() * 2);
    std::vector<int> cursor(g.adj_start_.begin(), g.adj_start_.end() - 1);
    std::sort(edges.begin(), edges.end());
    for (const auto& e : edges) {
        g.adj_[cursor[e.a]] = e.b;
        g.len_[cursor[e.a]++] = e.len;
        g.adj_[cursor[e.b]] = e.a;
        g.len_[cursor[e.b]++] = e.len;
    }
    return g;
}

bool CandidateGraph::has_edge(int a, int b) const {
    for (int u : neighbors(a))
        if (u == b) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Dijkstra with deterministic tie-breaking
// ---------------------------------------------------------------------------

namespace {

struct HeapEntry {
    double cost;
    int hops;
    int v;
};
struct HeapCmp {
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
        return std::tie(a.cost, a.hops) > std::tie(b.cost, b.hops);
    }
};

std::vector<int> chain_of(const std::vector<int>& parent, int v) {
    std::vector<int> seq;
    for (int u = v; u != -1; u = parent[u]) seq.push_back(u);
    std::reverse(seq.begin(), seq.end());
    return seq;
}

/// True if routing v through u beats the incumbent label of v lexicographically
/// (costs and hops already tied).
bool lex_better(const std::vector<int>& parent, int u, int v) {
    std::vector<int> cand = chain_of(parent, u);
    cand.push_back(v);
    const std::vector<int> inc = chain_of(parent, v);
    return std::lexicographical_compare(cand.begin(), cand.end(), inc.begin(), inc.end());
}

struct DijkstraOut {
    std::vector<double> cost;
    std::vector<int> parent;
    std::vector<int> hops;
};

/// neighbor_fn(v, fn) must call fn(u, link_length) for every neighbor u of v.
DijkstraOut dijkstra_core(int num_vertices, int source, int target, const CostModel& cm,
                          const std::function<void(int, const std::function<void(int, double)>&)>&
                              neighbor_fn) {
    DijkstraOut out;
    out.cost.assign(num_vertices, std::numeric_limits<double>::infinity());
    out.parent.assign(num_vertices, -1);
    out.hops.assign(num_vertices, 0);
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapCmp> heap;
    out.cost[source] = 0.0;
    heap.push({0.0, 0, source});
    while (!heap.empty()) {
        const HeapEntry top = heap.top();
        heap.pop();
        if (top.cost != out.cost[top.v] || top.hops != out.hops[top.v]) continue; // stale
        if (target >= 0 && top.cost > out.cost[target]) break;
        neighbor_fn(top.v, [&](int u, double len) {
            const double nc = top.cost + cm.link_cost(len);
            const int nh = top.hops + 1;
            bool improve = false;
            if (nc < out.cost[u]) {
                improve = true;
            } else if (nc == out.cost[u]) {
                if (nh < out.hops[u]) {
                    improve = true;
                } else if (nh == out.hops[u] && out.parent[u] != top.v &&
                           lex_better(out.parent, top.v, u)) {
                    improve = true;
                }
            }
            if (improve) {
                out.cost[u] = nc;
                out.hops[u] = nh;
                out.parent[u] = top.v;
                heap.push({nc, nh, u});
            }
        });
    }
    return out;
}

DijkstraOut dijkstra_graph(const CandidateGraph& g, int source, int target) {
    return dijkstra_core(g.points().size(), source, target, g.cost_model(),
                         [&](int v, const std::function<void(int, double)>& fn) {
                             const auto nb = g.neighbors(v);
                             const auto ln = g.neighbor_lengths(v);
                             for (std::size_t t = 0; t < nb.size(); ++t) fn(nb[t], ln[t]);
                         });
}

double path_margin(const PathResult& p, const Window& w, int d) {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.length(); ++i) m = std::min(m, w.boundary_distance(p.vertex(i, d)));
    return m;
}

} // namespace

ShortestPaths shortest_paths_from(const CandidateGraph& g, int source) {
    if (source < 0 || source >= g.points().size())
        throw std::invalid_argument("shortest_paths_from: bad source");
    DijkstraOut out = dijkstra_graph(g, source, -1);
    ShortestPaths sp;
    sp.source = source;
    sp.cost = std::move(out.cost);
    sp.parent = std::move(out.parent);
    sp.hops = std::move(out.hops);
    return sp;
}

PathResult path_from_tree(const CandidateGraph& g, const ShortestPaths& sp, int b_id) {
    const PointSet& ps = g.points();
    const int d = ps.dim();
    if (!sp.reachable(b_id))
        throw NoPathError("geodesic: endpoints not connected in the candidate graph");
    PathResult p;
    p.mode = EndpointMode::ParticleEndpoints;
    p.vertex_ids = chain_of(sp.parent, b_id);
    p.coords.reserve(p.vertex_ids.size() * d);
    for (int id : p.vertex_ids)
        p.coords.insert(p.coords.end(), ps.point(id).begin(), ps.point(id).end());
    p.link_lengths.resize(p.vertex_ids.size() > 0 ? p.vertex_ids.size() - 1 : 0);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < p.vertex_ids.size(); ++i) {
        p.link_lengths[i] = dist(p.vertex(static_cast<int>(i), d), p.vertex(static_cast<int>(i + 1), d));
        total += g.cost_model().link_cost(p.link_lengths[i]);
    }
    p.total_cost = total;
    p.margin = path_margin(p, ps.window(), d);
    return p;
}

PathResult geodesic(const CandidateGraph& g, int a_id, int b_id) {
    const int n = g.points().size();
    if (a_id < 0 || a_id >= n || b_id < 0 || b_id >= n)
        throw std::invalid_argument("geodesic: bad vertex id");
    DijkstraOut out = dijkstra_graph(g, a_id, b_id);
    ShortestPaths sp;
    sp.source = a_id;
    sp.cost = std::move(out.cost);
    sp.parent = std::move(out.parent);
    sp.hops = std::move(out.hops);
    return path_from_tree(g, sp, b_id);
}

// ---------------------------------------------------------------------------
// passage times
// ---------------------------------------------------------------------------

namespace {

/// Lens-filtered terminal edges from location x, partners drawn from expanding
/// budgets exactly like graph edges (stabilized by doubling when audited).
std::vector<std::pair<int, double>> terminal_edges(const PointSet& ps, const CostModel& cm,
                                                   Vec x, int k, AuditLevel audit) {
    std::vector<std::pair<int, double>> out;
    std::vector<int> buf;
    auto collect = [&](double r_hi_sq, double r_lo_sq) {
        std::vector<std::pair<int, double>> kept;
        ps.neighbors_within_sq(x, r_hi_sq, buf);
        for (int j : buf) {
            const double len_sq = dist_sq(x, ps.point(j));
            if (len_sq <= r_lo_sq) continue;
            if (len_sq == 0.0) {
                kept.emplace_back(j, 0.0); // coincident particle: zero-cost link
                continue;
            }
            if (!lens_interior_occupied_box(ps, cm, x, ps.point(j), j, j))
                kept.emplace_back(j, std::sqrt(len_sq));
        }
        return kept;
    };
    double r_sq = ps.kth_neighbor_distance_sq(x, k);
    out = collect(r_sq, -1.0);
    if (audit == AuditLevel::Doubling && ps.size() > k) {
        int budget = k;
        for (int iter = 0; iter <= 3; ++iter) {
            const double r2_sq = ps.kth_neighbor_distance_sq(x, 2 * budget);
            auto extra = collect(r2_sq, r_sq);
            if (extra.empty()) break;
            if (iter == 3)
                throw UnstablePruneError("terminal edges: unstable under budget doubling");
            out.insert(out.end(), extra.begin(), extra.end());
            budget *= 2;
            r_sq = r2_sq;
            if (ps.size() <= budget) break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

PathResult exact_mode_path(const CandidateGraph& g, Vec x, Vec y, int k, AuditLevel audit) {
    const PointSet& ps = g.points();
    const CostModel& cm = g.cost_model();
    const int n = ps.size();
    const int d = ps.dim();
    const int vsrc = n, vtgt = n + 1;

    const auto src_edges = terminal_edges(ps, cm, x, k, audit);
    const auto tgt_edges = terminal_edges(ps, cm, y, k, audit);
    std::vector<double> tgt_len(n, -1.0);
    for (const auto& [id, len] : tgt_edges) tgt_len[id] = len;

    const double xy = dist(x, y);
    const bool direct_ok =
        xy == 0.0 || !lens_interior_occupied_box(ps, cm, x, y, -1, -1);

    DijkstraOut out = dijkstra_core(
        n + 2, vsrc, vtgt, cm, [&](int v, const std::function<void(int, double)>& fn) {
            if (v == vsrc) {
                for (const auto& [id, len] : src_edges) fn(id, len);
                if (direct_ok) fn(vtgt, xy);
            } else if (v == vtgt) {
                // absorbing
            } else {
                const auto nb = g.neighbors(v);
                const auto ln = g.neighbor_lengths(v);
                for (std::size_t t = 0; t < nb.size(); ++t) fn(nb[t], ln[t]);
                if (tgt_len[v] >= 0.0) fn(vtgt, tgt_len[v]);
            }
        });

    if (!std::isfinite(out.cost[vtgt]))
        throw NoPathError("passage_time: endpoints not connected");

    PathResult p;
    p.mode = EndpointMode::ExactEndpoints;
    std::vector<int> chain = chain_of(out.parent, vtgt);
    p.vertex_ids.reserve(chain.size());
    p.coords.reserve(chain.size() * d);
    for (int v : chain) {
        if (v == vsrc) {
            p.vertex_ids.push_back(kSourceId);
            p.coords.insert(p.coords.end(), x.begin(), x.end());
        } else if (v == vtgt) {
            p.vertex_ids.push_back(kTargetId);
            p.coords.insert(p.coords.end(), y.begin(), y.end());
        } else {
            p.vertex_ids.push_back(v);
            p.coords.insert(p.coords.end(), ps.point(v).begin(), ps.point(v).end());
        }
    }
    p.link_lengths.resize(chain.size() - 1);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        p.link_lengths[i] = dist(p.vertex(static_cast<int>(i), d), p.vertex(static_cast<int>(i + 1), d));
        total += cm.link_cost(p.link_lengths[i]);
    }
    p.total_cost = total;
    p.margin = path_margin(p, ps.window(), d);
    return p;
}

} // namespace

PassageResult passage_time(const CandidateGraph& g, Vec x, Vec y, EndpointMode mode) {
    const PointSet& ps = g.points();
    if (ps.size() == 0) throw EmptyDomainError("passage_time: empty point set");
    PassageResult res;
    if (mode == EndpointMode::ParticleEndpoints) {
        const int a = ps.nearest(x), b = ps.nearest(y);
        if (a == b) {
            res.path.mode = EndpointMode::ParticleEndpoints;
            res.path.vertex_ids = {a};
            res.path.coords.assign(ps.point(a).begin(), ps.point(a).end());
            res.path.total_cost = 0.0;
            res.path.margin = ps.window().boundary_distance(ps.point(a));
            res.cost = 0.0;
            return res;
        }
        res.path = geodesic(g, a, b);
    } else {
        res.path = exact_mode_path(g, x, y, g.budget(), g.audit());
    }
    res.cost = res.path.total_cost;
    return res;
}

namespace {

// Exact-endpoint path when there are fewer than two particles: the only
// candidate routes are the direct link and (with one particle) the two-link
// detour through it.
PassageResult tiny_exact_path(const PointSet& ps, const CostModel& cm, Vec x, Vec y) {
    const int d = ps.dim();
    PassageResult res;
    res.path.mode = EndpointMode::ExactEndpoints;
    const double direct = cm.link_cost(dist(x, y));
    bool via0 = false;
    double via_cost = std::numeric_limits<double>::infinity();
    if (ps.size() == 1) {
        via_cost = cm.link_cost(dist(x, ps.point(0))) + cm.link_cost(dist(ps.point(0), y));
        via0 = via_cost < direct;
    }
    if (via0) {
        res.path.vertex_ids = {kSourceId, 0, kTargetId};
        res.path.coords.insert(res.path.coords.end(), x.begin(), x.end());
        res.path.coords.insert(res.path.coords.end(), ps.point(0).begin(), ps.point(0).end());
        res.path.coords.insert(res.path.coords.end(), y.begin(), y.end());
        res.path.total_cost = via_cost;
    } else {
        res.path.vertex_ids = {kSourceId, kTargetId};
        res.path.coords.insert(res.path.coords.end(), x.begin(), x.end());
        res.path.coords.insert(res.path.coords.end(), y.begin(), y.end());
        res.path.total_cost = direct;
    }
    const std::size_t m = res.path.vertex_ids.size();
    res.path.link_lengths.resize(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i)
        res.path.link_lengths[i] =
            dist(res.path.vertex(static_cast<int>(i), d), res.path.vertex(static_cast<int>(i + 1), d));
    res.cost = res.path.total_cost;
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i)
        margin = std::min(margin, ps.window().boundary_distance(res.path.vertex(static_cast<int>(i), d)));
    res.path.margin = margin;
    return res;
}

} // namespace

PassageResult passage_time(const PointSet& ps, const CostModel& cm, Vec x, Vec y,
                           EndpointMode mode, int k, AuditLevel audit) {
    if (mode == EndpointMode::ExactEndpoints && ps.size() < 2) return tiny_exact_path(ps, cm, x, y);
    if (ps.size() == 0) throw EmptyDomainError("passage_time: empty point set");
    if (ps.size() == 1 && mode == EndpointMode::ParticleEndpoints) {
        PassageResult res;
        res.path.mode = mode;
        res.path.vertex_ids = {0};
        res.path.coords.assign(ps.point(0).begin(), ps.point(0).end());
        res.path.margin = ps.window().boundary_distance(ps.point(0));
        return res;
    }
    CandidateGraph g = CandidateGraph::build(ps, cm, k, audit);
    return passage_time(g, x, y, mode);
}

std::vector<int> box_representatives(const PointSet& ps, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("box_representatives: eps must be positive");
    const int d = ps.dim();
    std::map<std::vector<std::int64_t>, int> best;
    std::vector<std::int64_t> nu(d);
    for (int i = 0; i < ps.size(); ++i) {
        const Vec p = ps.point(i);
        for (int j = 0; j < d; ++j) nu[j] = static_cast<std::int64_t>(std::floor(p[j] / eps + 0.5));
        auto [it, inserted] = best.try_emplace(nu, i);
        if (!inserted) {
            // leftmost wins; ties by the remaining coordinates, then id
            const Vec q = ps.point(it->second);
            bool take = false;
            for (int j = 0; j < d; ++j) {
                if (p[j] < q[j]) { take = true; break; }
                if (p[j] > q[j]) break;
            }
            if (take) it->second = i;
        }
    }
    std::vector<int> reps;
    reps.reserve(best.size());
    for (const auto& [_, id] : best) reps.push_back(id);
    std::sort(reps.begin(), reps.end());
    return reps;
}

PassageResult truncated_passage_time(const PointSet& ps, const CostModel& cm, double subgrid_eps,
                                     Vec x, Vec y, int k, AuditLevel audit) {
    if (cm.pure_power())
        throw std::invalid_argument("truncated_passage_time: finite h required");
    const std::vector<int> reps = box_representatives(ps, subgrid_eps);
    const int d = ps.dim();
    std::vector<double> coords;
    coords.reserve(reps.size() * d);
    for (int id : reps) coords.insert(coords.end(), ps.point(id).begin(), ps.point(id).end());
    PointSet sub = PointSet::from_points(ps.window(), std::move(coords), ps.lambda(), ps.seed());

    PassageResult res;
    if (sub.size() < 2) {
        // degenerate: route x -> y directly (possibly via the lone representative)
        std::vector<double> seq(x.begin(), x.end());
        if (sub.size() == 1) seq.insert(seq.end(), sub.point(0).begin(), sub.point(0).end());
        seq.insert(seq.end(), y.begin(), y.end());
        res.path.mode = EndpointMode::ExactEndpoints;
        res.path.coords = seq;
        res.path.vertex_ids = {kSourceId, kTargetId};
        if (sub.size() == 1) res.path.vertex_ids = {kSourceId, reps[0], kTargetId};
        const std::size_t m = res.path.vertex_ids.size();
        res.path.link_lengths.resize(m - 1);
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            res.path.link_lengths[i] =
                dist(res.path.vertex(static_cast<int>(i), d), res.path.vertex(static_cast<int>(i + 1), d));
            total += cm.link_cost(res.path.link_lengths[i]);
        }
        res.path.total_cost = total;
        res.cost = total;
        res.path.margin = path_margin(res.path, ps.window(), d);
        return res;
    }
    res = passage_time(sub, cm, x, y, EndpointMode::ExactEndpoints, k, audit);
    for (int& id : res.path.vertex_ids)
        if (id >= 0) id = reps[id];
    return res;
}

// ---------------------------------------------------------------------------
// brute-force oracles
// ---------------------------------------------------------------------------

namespace {

struct BruteBest {
    double cost = std::numeric_limits<double>::infinity();
    std::vector<int> seq;
};

bool seq_better(double cost, const std::vector<int>& seq, const BruteBest& best) {
    if (cost < best.cost) return true;
    if (cost > best.cost) return false;
    if (seq.size() != best.seq.size()) return seq.size() < best.seq.size();
    return std::lexicographical_compare(seq.begin(), seq.end(), best.seq.begin(), best.seq.end());
}

void brute_dfs(const PointSet& ps, const CostModel& cm, int b, std::vector<int>& seq,
               std::vector<char>& used, double cost, BruteBest& best) {
    const int v = seq.back();
    if (v == b) {
        if (seq_better(cost, seq, best)) {
            best.cost = cost;
            best.seq = seq;
        }
        return;
    }
    for (int u = 0; u < ps.size(); ++u) {
        if (used[u]) continue;
        const double nc = cost + cm.link_cost(ps.distance(v, u));
        if (nc > best.cost) continue;
        used[u] = 1;
        seq.push_back(u);
        brute_dfs(ps, cm, b, seq, used, nc, best);
        seq.pop_back();
        used[u] = 0;
    }
}

} // namespace

PathResult brute_force_geodesic(const PointSet& ps, const CostModel& cm, int a_id, int b_id) {
    if (ps.size() > 12) throw GuardError("brute_force_geodesic: n <= 12 required");
    if (a_id < 0 || a_id >= ps.size() || b_id < 0 || b_id >= ps.size())
        throw std::invalid_argument("brute_force_geodesic: bad id");
    const int d = ps.dim();
    BruteBest best;
    std::vector<int> seq{a_id};
    std::vector<char> used(ps.size(), 0);
    used[a_id] = 1;
    brute_dfs(ps, cm, b_id, seq, used, 0.0, best);

    PathResult p;
    p.mode = EndpointMode::ParticleEndpoints;
    p.vertex_ids = best.seq;
    for (int id : p.vertex_ids)
        p.coords.insert(p.coords.end(), ps.point(id).begin(), ps.point(id).end());
    p.link_lengths.resize(p.vertex_ids.size() - 1);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < p.vertex_ids.size(); ++i) {
        p.link_lengths[i] = dist(p.vertex(static_cast<int>(i), d), p.vertex(static_cast<int>(i + 1), d));
        total += cm.link_cost(p.link_lengths[i]);
    }
    p.total_cost = total;
    p.margin = path_margin(p, ps.window(), d);
    return p;
}

namespace {

void minimax_dfs(const PointSet& ps, int b, std::vector<int>& seq, std::vector<char>& used,
                 double value, BruteBest& best) {
    const int v = seq.back();
    if (v == b) {
        if (seq_better(value, seq, best)) {
            best.cost = value;
            best.seq = seq;
        }
        return;
    }
    for (int u = 0; u < ps.size(); ++u) {
        if (used[u]) continue;
        const double nv = std::max(value, ps.distance(v, u));
        if (nv > best.cost) continue;
        used[u] = 1;
        seq.push_back(u);
        minimax_dfs(ps, b, seq, used, nv, best);
        seq.pop_back();
        used[u] = 0;
    }
}

} // namespace

std::pair<double, std::vector<int>> brute_force_minimax(const PointSet& ps, int a_id, int b_id) {
    if (ps.size() > 12) throw GuardError("brute_force_minimax: n <= 12 required");
    BruteBest best;
    std::vector<int> seq{a_id};
    std::vector<char> used(ps.size(), 0);
    used[a_id] = 1;
    minimax_dfs(ps, b_id, seq, used, 0.0, best);
    return {best.cost, best.seq};
}

std::pair<double, PathResult> minimax_distance(const PointSet& ps, int a_id, int b_id) {
    if (ps.size() < 1) throw EmptyDomainError("minimax_distance: empty point set");
    if (a_id == b_id) {
        PathResult p;
        p.vertex_ids = {a_id};
        p.coords.assign(ps.point(a_id).begin(), ps.point(a_id).end());
        p.margin = ps.window().boundary_distance(ps.point(a_id));
        return {0.0, p};
    }
    const GeodesicTree mst = euclidean_mst(ps);
    // path through the MST via lowest common ancestor
    std::vector<int> up_a, up_b;
    for (int v = a_id; v != -1; v = mst.parent[v]) up_a.push_back(v);
    std::vector<char> on_a(ps.size(), 0);
    for (int v : up_a) on_a[v] = 1;
    int meet = b_id;
    while (!on_a[meet]) meet = mst.parent[meet];
    std::vector<int> pathv;
    for (int v = a_id; v != meet; v = mst.parent[v]) pathv.push_back(v);
    pathv.push_back(meet);
    std::vector<int> tail;
    for (int v = b_id; v != meet; v = mst.parent[v]) tail.push_back(v);
    std::reverse(tail.begin(), tail.end());
    pathv.insert(pathv.end(), tail.begin(), tail.end());

    const int d = ps.dim();
    PathResult p;
    p.vertex_ids = pathv;
    for (int id : pathv) p.coords.insert(p.coords.end(), ps.point(id).begin(), ps.point(id).end());
    p.link_lengths.resize(pathv.size() - 1);
    double value = 0.0;
    for (std::size_t i = 0; i + 1 < pathv.size(); ++i) {
        p.link_lengths[i] = dist(p.vertex(static_cast<int>(i), d), p.vertex(static_cast<int>(i + 1), d));
        value = std::max(value, p.link_lengths[i]);
    }
    p.total_cost = value; // minimax value, not an additive cost
    p.margin = path_margin(p, ps.window(), d);
    return {value, p};
}

// ---------------------------------------------------------------------------
// deterministic-lemma audits
// ---------------------------------------------------------------------------

std::vector<CrossingViolation> crossing_audit(const PathResult& p1, const PathResult& p2, int d) {
    if (d != 2) throw std::invalid_argument("crossing_audit: d = 2 only");
    std::vector<CrossingViolation> out;
    for (int i = 0; i + 1 < p1.length(); ++i) {
        const int a1 = p1.vertex_ids[i], b1 = p1.vertex_ids[i + 1];
        for (int j = 0; j + 1 < p2.length(); ++j) {
            const int a2 = p2.vertex_ids[j], b2 = p2.vertex_ids[j + 1];
            if (a1 == a2 || a1 == b2 || b1 == a2 || b1 == b2) continue;
            const double dist_ss = segment_segment_distance(p1.vertex(i, d), p1.vertex(i + 1, d),
                                                            p2.vertex(j, d), p2.vertex(j + 1, d));
            if (dist_ss <= 1e-9) out.push_back({i, j});
        }
    }
    return out;
}

std::vector<DoublingBackViolation> no_doubling_back_audit(const PathResult& p, int d) {
    std::vector<DoublingBackViolation> out;
    const int links = p.length() - 1;
    if (links < 2) return out;
    const long long total_pairs = static_cast<long long>(links) * (links - 1) / 2;
    const long long cap = 10000;
    const long long stride = std::max(1LL, (total_pairs + cap - 1) / cap);
    static const double params[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};

    std::vector<double> a(d), b(d);
    long long counter = 0;
    for (int i = 0; i + 1 < links; ++i) {
        for (int j = i + 1; j < links; ++j, ++counter) {
            if (counter % stride != 0) continue;
            const Vec qi = p.vertex(i, d), qi1 = p.vertex(i + 1, d);
            const Vec qj = p.vertex(j, d), qj1 = p.vertex(j + 1, d);
            for (double s : params) {
                for (double t : params) {
                    for (int c = 0; c < d; ++c) {
                        a[c] = qi[c] + s * (qi1[c] - qi[c]);
                        b[c] = qj[c] + t * (qj1[c] - qj[c]);
                    }
                    const double ab = dist(Vec(a), Vec(b));
                    const double tol = ab * 1e-9 + 1e-12;
                    if (dist(qi1, Vec(a)) > 16.0 * ab + tol)
                        out.push_back({i, j, s, t, "end_of_first"});
                    else if (dist(qj, Vec(b)) > 16.0 * ab + tol)
                        out.push_back({i, j, s, t, "start_of_second"});
                    else if (dist(qi1, qj) > 33.0 * ab + tol)
                        out.push_back({i, j, s, t, "vertex_gap"});
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// staircase construction
// ---------------------------------------------------------------------------

StaircaseResult staircase_upper_bound(const PointSet& ps, const CostModel& cm, Vec x, Vec y) {
    if (ps.size() == 0) throw EmptyDomainError("staircase_upper_bound: empty point set");
    const int d = ps.dim();
    const double ell = dist(x, y);
    StaircaseResult res;
    res.path.mode = EndpointMode::ExactEndpoints;

    std::vector<int> picked;
    if (ell > 0.0) {
        std::vector<double> u(d);
        for (int j = 0; j < d; ++j) u[j] = (y[j] - x[j]) / ell;
        FrameToE1 frame{Vec(u)};
        // rotated coordinates of all particles relative to x
        std::vector<double> rc(static_cast<std::size_t>(ps.size()) * d);
        std::vector<double> tmp(d);
        for (int i = 0; i < ps.size(); ++i) {
            for (int j = 0; j < d; ++j) tmp[j] = ps.point(i)[j] - x[j];
            frame.apply(Vec(tmp), std::span<double>(rc.data() + static_cast<std::size_t>(i) * d, d));
        }
        std::vector<double> cur(d, 0.0);
        double progressed = 0.0;
        int cur_id = -1;
        while (progressed < ell) {
            int pick = -1;
            double pick_fwd = std::numeric_limits<double>::infinity();
            for (int i = 0; i < ps.size(); ++i) {
                if (i == cur_id) continue;
                const double* q = rc.data() + static_cast<std::size_t>(i) * d;
                const double fwd = q[0] - cur[0];
                if (fwd <= 0.0 || fwd >= pick_fwd) continue;
                bool ok = true;
                for (int j = 1; j < d; ++j) {
                    const double sigma = cur[j] >= 0.0 ? -1.0 : 1.0;
                    const double bj = sigma * (q[j] - cur[j]);
                    if (bj < 0.0 || bj > fwd) { ok = false; break; }
                }
                if (ok) {
                    pick = i;
                    pick_fwd = fwd;
                }
            }
            if (pick < 0) {
                res.complete = false;
                break;
            }
            picked.push_back(pick);
            progressed += pick_fwd;
            std::copy(rc.begin() + static_cast<std::size_t>(pick) * d,
                      rc.begin() + static_cast<std::size_t>(pick + 1) * d, cur.begin());
            cur_id = pick;
        }
    }

    res.path.vertex_ids.push_back(kSourceId);
    res.path.coords.insert(res.path.coords.end(), x.begin(), x.end());
    for (int id : picked) {
        res.path.vertex_ids.push_back(id);
        res.path.coords.insert(res.path.coords.end(), ps.point(id).begin(), ps.point(id).end());
    }
    res.path.vertex_ids.push_back(kTargetId);
    res.path.coords.insert(res.path.coords.end(), y.begin(), y.end());

    const std::size_t m = res.path.vertex_ids.size();
    res.path.link_lengths.resize(m - 1);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        res.path.link_lengths[i] =
            dist(res.path.vertex(static_cast<int>(i), d), res.path.vertex(static_cast<int>(i + 1), d));
        total += cm.link_cost(res.path.link_lengths[i]);
    }
    res.path.total_cost = total;
    res.cost = total;
    res.path.margin = path_margin(res.path, ps.window(), d);
    return res;
}

// ---------------------------------------------------------------------------
// empty-lens reach and windowed queries
// ---------------------------------------------------------------------------

namespace {

bool closed_lens_occupied(const PointSet& ps, const CostModel& cm, Vec a, Vec c) {
    const int d = ps.dim();
    const double ac = dist(a, c);
    if (ac == 0.0) return false;
    const double rad = 0.5 * std::sqrt(3.0) * ac;
    std::vector<double> lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
        const double mid = 0.5 * (a[j] + c[j]);
        lo[j] = mid - rad;
        hi[j] = mid + rad;
    }
    return for_points_in_box(ps, lo, hi, [&](int id) {
        return lens_contains(cm, a, c, ps.point(id), false);
    });
}

} // namespace

double empty_lens_reach(const PointSet& ps, const CostModel& cm, Vec a) {
    if (ps.size() == 0) throw EmptyDomainError("empty_lens_reach: empty point set");
    const int d = ps.dim();
    // Directional scan with per-direction bisection; containment of lenses
    // under radial growth (pure power) makes the per-direction predicate
    // monotone.  Window truncation makes this a lower bound.
    const int n_dirs = d == 2 ? 360 : 512;
    double r_max = 0.0;
    for (int j = 0; j < d; ++j) r_max = std::max(r_max, ps.window().extent(j));

    std::vector<double> c(d), dir(d);
    double best = 0.0;
    Substream rng(ps.seed(), 9001); // direction jitter for d > 2
    for (int k = 0; k < n_dirs; ++k) {
        if (d == 2) {
            const double th = 2.0 * 3.14159265358979323846 * k / n_dirs;
            dir[0] = std::cos(th);
            dir[1] = std::sin(th);
        } else {
            double n2 = 0.0;
            for (int j = 0; j < d; ++j) {
                dir[j] = rng.next_normal();
                n2 += dir[j] * dir[j];
            }
            const double inv = 1.0 / std::sqrt(std::max(n2, 1e-300));
            for (int j = 0; j < d; ++j) dir[j] *= inv;
        }
        double lo = 0.0, hi = r_max;
        // ensure hi is occupied; otherwise the whole direction is empty
        for (int j = 0; j < d; ++j) c[j] = a[j] + hi * dir[j];
        if (!closed_lens_occupied(ps, cm, a, Vec(c))) {
            best = std::max(best, hi);
            continue;
        }
        for (int it = 0; it < 40 && hi - lo > 1e-9 * r_max; ++it) {
            const double mid = 0.5 * (lo + hi);
            for (int j = 0; j < d; ++j) c[j] = a[j] + mid * dir[j];
            if (closed_lens_occupied(ps, cm, a, Vec(c)))
                hi = mid;
            else
                lo = mid;
        }
        best = std::max(best, lo);
    }
    return best;
}

double WindowPolicy::margin(double lambda, int d, double span) const {
    return std::max(margin_mult * std::pow(lambda, -1.0 / d), std::pow(span, margin_exp));
}

double WindowPolicy::trust_band(double lambda, int d, double span) const {
    return std::max(trust_mult * std::pow(lambda, -1.0 / d), std::pow(span, trust_exp));
}

WindowedPassage windowed_passage_time(int d, const CostModel& cm, double lambda, Vec x, Vec y,
                                      std::uint64_t seed, EndpointMode mode,
                                      const WindowPolicy& policy) {
    const double span = dist(x, y);
    const double band = policy.trust_band(lambda, d, span);
    WindowedPassage last;
    for (int attempt = 0; attempt <= policy.max_regrow; ++attempt) {
        const double m = policy.margin(lambda, d, span) * std::pow(2.0, attempt);
        std::vector<double> lo(d), hi(d);
        for (int j = 0; j < d; ++j) {
            lo[j] = std::min(x[j], y[j]) - m;
            hi[j] = std::max(x[j], y[j]) + m;
        }
        PointSet ps = PointSet::sample_poisson(Window(lo, hi), lambda, substream_key(seed, attempt));
        if (ps.size() < 2) continue;
        PassageResult pr;
        try {
            pr = passage_time(ps, cm, x, y, mode, policy.k, policy.audit);
        } catch (const NoPathError&) {
            continue; // regrow
        }
        pr.path.trusted = pr.path.margin >= band;
        last.cost = pr.cost;
        last.path = std::move(pr.path);
        last.regrowths = attempt;
        last.point_count = ps.size();
        if (last.path.trusted) return last;
    }
    if (last.path.vertex_ids.empty())
        throw WindowPolicyError("windowed_passage_time: no usable realization after regrowth");
    return last; // untrusted
}

void PathResult::save(std::ostream& os) const {
    char buf[64];
    os << "efpp-path-v1\n";
    os << "mode " << (mode == EndpointMode::ParticleEndpoints ? "particle" : "exact") << "\n";
    os << "trusted " << (trusted ? 1 : 0) << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", total_cost);
    os << "cost " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", margin);
    os << "margin " << buf << "\n";
    os << "ids";
    for (int id : vertex_ids) os << ' ' << id;
    os << "\ncoords";
    for (double cval : coords) {
        std::snprintf(buf, sizeof buf, "%.17g", cval);
        os << ' ' << buf;
    }
    os << "\nlinks";
    for (double lval : link_lengths) {
        std::snprintf(buf, sizeof buf, "%.17g", lval);
        os << ' ' << buf;
    }
    os << "\n";
}

} // namespace efpp
