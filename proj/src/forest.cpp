#include "efpp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>

#include "efpp/errors.hpp"
#include "efpp/rng.hpp"

namespace efpp {

namespace {

/// Tree skeleton shared by both roots: copies a Dijkstra run into a tree.
GeodesicTree tree_from_sssp(const CandidateGraph& g, const ShortestPaths& sp) {
    GeodesicTree t;
    t.ps = &g.points();
    t.root = sp.source;
    t.parent = sp.parent;
    t.cost_to_root = sp.cost;
    t.hops = sp.hops;
    t.covered.assign(g.points().size(), 0);
    return t;
}

/// Min boundary distance along each root path (children inherit the min).
std::vector<double> path_min_margin(const GeodesicTree& t) {
    const PointSet& ps = *t.ps;
    const int n = ps.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return t.hops[a] < t.hops[b]; });
    std::vector<double> pm(n, -1.0);
    for (int v : order) {
        if (!t.reachable(v)) continue;
        const double own = ps.window().boundary_distance(ps.point(v));
        pm[v] = t.parent[v] == -1 ? own : std::min(own, pm[t.parent[v]]);
    }
    return pm;
}

} // namespace

GeodesicTree geodesic_tree_from(const CandidateGraph& g, int q_id, const WindowPolicy& policy) {
    const PointSet& ps = g.points();
    if (ps.size() < 2) throw std::invalid_argument("geodesic_tree_from: need n >= 2");
    if (q_id < 0 || q_id >= ps.size()) throw std::invalid_argument("geodesic_tree_from: bad root");
    GeodesicTree t = tree_from_sssp(g, shortest_paths_from(g, q_id));
    t.kind = GeodesicTree::Kind::RootedAtParticle;

    const std::vector<double> pm = path_min_margin(t);
    const Vec root = ps.point(q_id);
    for (int v = 0; v < ps.size(); ++v) {
        if (!t.reachable(v)) continue;
        const double span = dist(ps.point(v), root);
        t.covered[v] = pm[v] >= policy.trust_band(ps.lambda(), ps.dim(), span) ? 1 : 0;
    }
    return t;
}

GeodesicTree directional_tree(const CandidateGraph& g, std::span<const double> xhat, double R,
                              double core_radius) {
    const PointSet& ps = g.points();
    const int d = ps.dim();
    if (static_cast<int>(xhat.size()) != d)
        throw std::invalid_argument("directional_tree: direction dimension mismatch");
    const double nx = norm(xhat);
    if (nx == 0.0) throw std::invalid_argument("directional_tree: zero direction");
    if (!(core_radius > 0.0)) throw std::invalid_argument("directional_tree: core radius > 0");
    if (R < 3.0 * core_radius)
        throw std::invalid_argument("directional_tree: target radius must be >= 3 x core radius");

    std::vector<double> target(d);
    for (int j = 0; j < d; ++j) target[j] = R * xhat[j] / nx;
    if (!ps.window().contains(Vec(target)))
        throw std::invalid_argument("directional_tree: target outside window");

    const int root = ps.nearest(Vec(target));
    GeodesicTree t = tree_from_sssp(g, shortest_paths_from(g, root));
    t.kind = GeodesicTree::Kind::RootedAtDirection;
    t.direction.assign(xhat.begin(), xhat.end());
    for (double& c : t.direction) c /= nx;
    t.target_radius = R;
    t.core_radius = core_radius;
    for (int v = 0; v < ps.size(); ++v)
        t.covered[v] = t.reachable(v) && norm(ps.point(v)) <= core_radius ? 1 : 0;
    return t;
}

PathResult directional_geodesic(const GeodesicTree& t, int q_id) {
    if (q_id < 0 || q_id >= t.size() || !t.is_covered(q_id))
        throw CoverageError("directional_geodesic: id not covered");
    const PointSet& ps = *t.ps;
    PathResult p;
    p.mode = EndpointMode::ParticleEndpoints;
    for (int v = q_id; v != -1; v = t.parent[v]) p.vertex_ids.push_back(v);
    for (int id : p.vertex_ids)
        p.coords.insert(p.coords.end(), ps.point(id).begin(), ps.point(id).end());
    p.link_lengths.resize(p.vertex_ids.size() - 1);
    for (std::size_t i = 0; i + 1 < p.vertex_ids.size(); ++i)
        p.link_lengths[i] = ps.distance(p.vertex_ids[i], p.vertex_ids[i + 1]);
    p.total_cost = t.cost_to_root[q_id];
    double margin = std::numeric_limits<double>::infinity();
    for (int id : p.vertex_ids)
        margin = std::min(margin, ps.window().boundary_distance(ps.point(id)));
    p.margin = margin;
    return p;
}

CoalescenceRecord coalescence(const GeodesicTree& t, int q_id, int q2_id) {
    if (q_id < 0 || q_id >= t.size() || !t.is_covered(q_id) || q2_id < 0 || q2_id >= t.size() ||
        !t.is_covered(q2_id))
        throw CoverageError("coalescence: ids must be covered");
    CoalescenceRecord rec;
    rec.q = q_id;
    rec.q2 = q2_id;
    std::vector<int> depth_of(t.size(), -1);
    int steps = 0;
    for (int v = q_id; v != -1; v = t.parent[v]) depth_of[v] = steps++;
    int walk = 0;
    int meet = -1;
    for (int v = q2_id; v != -1; v = t.parent[v], ++walk) {
        if (depth_of[v] >= 0) {
            meet = v;
            break;
        }
    }
    rec.meet = meet;
    rec.coalesced = meet >= 0;
    if (rec.coalesced) {
        rec.depth_q = depth_of[meet];
        rec.depth_q2 = walk;
    }
    return rec;
}

double height_function(const GeodesicTree& t, int q_id, int q0_id) {
    if (q_id < 0 || q_id >= t.size() || !t.is_covered(q_id) || q0_id < 0 || q0_id >= t.size() ||
        !t.is_covered(q0_id))
        throw CoverageError("height_function: ids must be covered");
    return t.cost_to_root[q_id] - t.cost_to_root[q0_id];
}

HeightField height_field(const GeodesicTree& t, int q0_id) {
    if (q0_id < 0 || q0_id >= t.size() || !t.is_covered(q0_id))
        throw CoverageError("height_field: base not covered");
    HeightField f;
    f.direction = t.direction;
    f.base = q0_id;
    f.target_radius = t.target_radius;
    for (int v = 0; v < t.size(); ++v)
        if (t.is_covered(v)) f.values[v] = t.cost_to_root[v] - t.cost_to_root[q0_id];
    return f;
}

HeightReport verify_height_recursion(const CandidateGraph& g, const GeodesicTree& t,
                                     const HeightField& field, double slack,
                                     int exclusion_samples, std::uint64_t seed) {
    const PointSet& ps = g.points();
    const CostModel& cm = g.cost_model();
    HeightReport rep;

    std::vector<int> core;
    core.reserve(field.values.size());
    for (const auto& [id, _] : field.values) core.push_back(id);

    auto tol = [&](double a, double b) { return slack * std::max({1.0, std::fabs(a), std::fabs(b)}); };

    // (i) one-step Bellman inequality over covered pairs
    for (int q : core) {
        const double hq = field.values.at(q);
        for (int q2 : core) {
            if (q2 == q) continue;
            const double rhs = cm.link_cost(ps.distance(q, q2)) + field.values.at(q2);
            rep.inequality_checked++;
            if (hq > rhs + tol(hq, rhs)) rep.violations.push_back({q, q2, "bellman_inequality", hq, rhs});
        }
    }

    // (ii) equality at the tree parent (parent height is defined for every
    // reachable vertex, covered or not)
    for (int q : core) {
        const int par = t.parent[q];
        if (par < 0) continue;
        const double hq = field.values.at(q);
        const double hpar = t.cost_to_root[par] - t.cost_to_root[field.base];
        const double rhs = cm.link_cost(ps.distance(q, par)) + hpar;
        rep.parent_equalities_checked++;
        if (std::fabs(hq - rhs) > tol(hq, rhs))
            rep.violations.push_back({q, par, "parent_equality", hq, rhs});
    }

    // (iii) generalized recursion with finite exclusion sets
    Substream rng(seed, 0);
    for (int s = 0; s < exclusion_samples && !core.empty(); ++s) {
        const int q = core[rng.next_below(core.size())];
        if (q == t.root) continue;
        // Q0 = {q} plus a few nearest particles (never the tree root)
        std::set<int> q0set{q};
        std::vector<int> near;
        ps.neighbors_within(q, 2.0 * std::pow(ps.lambda(), -1.0 / ps.dim()), near);
        const std::size_t extra = rng.next_below(3);
        for (std::size_t i = 0; i < near.size() && q0set.size() < 1 + extra + 1; ++i)
            if (near[i] != t.root) q0set.insert(near[i]);

        const ShortestPaths sp = shortest_paths_from(g, q);
        double best = std::numeric_limits<double>::infinity();
        for (int q2 = 0; q2 < ps.size(); ++q2) {
            if (q0set.count(q2) || !sp.reachable(q2) || !t.reachable(q2)) continue;
            const double cand = sp.cost[q2] + (t.cost_to_root[q2] - t.cost_to_root[field.base]);
            best = std::min(best, cand);
        }
        const double hq = field.values.at(q);
        rep.exclusion_checked++;
        if (std::fabs(hq - best) > tol(hq, best))
            rep.violations.push_back({q, -1, "exclusion_recursion", hq, best});
    }
    return rep;
}

GeodesicTree euclidean_mst(const PointSet& ps) {
    const int n = ps.size();
    if (n < 1) throw EmptyDomainError("euclidean_mst: empty point set");
    GeodesicTree t;
    t.ps = &ps;
    t.kind = GeodesicTree::Kind::RootedAtParticle;
    t.root = 0;
    t.parent.assign(n, -1);
    t.cost_to_root.assign(n, std::numeric_limits<double>::infinity());
    t.hops.assign(n, 0);
    t.covered.assign(n, 1);

    // Prim from vertex 0; ties broken by lexicographic edge ids.
    std::vector<double> key(n, std::numeric_limits<double>::infinity());
    std::vector<int> via(n, -1);
    std::vector<char> in_tree(n, 0);
    key[0] = 0.0;
    std::vector<int> order;
    order.reserve(n);
    for (int step = 0; step < n; ++step) {
        int u = -1;
        for (int v = 0; v < n; ++v) {
            if (in_tree[v]) continue;
            if (u == -1 || key[v] < key[u] || (key[v] == key[u] && v < u)) u = v;
        }
        in_tree[u] = 1;
        t.parent[u] = via[u];
        order.push_back(u);
        const Vec pu = ps.point(u);
        for (int v = 0; v < n; ++v) {
            if (in_tree[v]) continue;
            const double w = dist(pu, ps.point(v));
            bool better = w < key[v];
            if (!better && w == key[v] && via[v] >= 0) {
                const auto cand = std::minmax(u, v);
                const auto inc = std::minmax(via[v], v);
                better = cand < inc;
            }
            if (better) {
                key[v] = w;
                via[v] = u;
            }
        }
    }
    for (int u : order) {
        if (t.parent[u] == -1) {
            t.cost_to_root[u] = 0.0;
            t.hops[u] = 0;
        } else {
            t.cost_to_root[u] = t.cost_to_root[t.parent[u]] + ps.distance(u, t.parent[u]);
            t.hops[u] = t.hops[t.parent[u]] + 1;
        }
    }
    return t;
}

namespace {

struct UnionFind {
    std::vector<int> up;
    explicit UnionFind(int n) : up(n) { std::iota(up.begin(), up.end(), 0); }
    int find(int v) {
        while (up[v] != v) v = up[v] = up[up[v]];
        return v;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        up[a] = b;
        return true;
    }
};

} // namespace

bool msf_edge_criterion(const PointSet& ps, int q_id, int qbar_id) {
    const int n = ps.size();
    if (n < 2) throw std::invalid_argument("msf_edge_criterion: need n >= 2");
    if (q_id == qbar_id) throw std::invalid_argument("msf_edge_criterion: distinct ids required");
    if (n == 2) return true; // no avoiding path; empty infimum
    struct E {
        double len;
        int a, b;
        bool operator<(const E& o) const { return std::tie(len, a, b) < std::tie(o.len, o.a, o.b); }
    };
    std::vector<E> edges;
    edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2 - 1);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            if ((a == q_id && b == qbar_id) || (a == qbar_id && b == q_id)) continue;
            edges.push_back({ps.distance(a, b), a, b});
        }
    std::sort(edges.begin(), edges.end());
    UnionFind uf(n);
    const double direct = ps.distance(q_id, qbar_id);
    for (const E& e : edges) {
        uf.unite(e.a, e.b);
        if (uf.find(q_id) == uf.find(qbar_id)) return direct < e.len;
    }
    return true; // still disconnected: vacuous
}

StraightnessReport straightness_audit(const GeodesicTree& t, int q_id, double eps) {
    if (t.kind != GeodesicTree::Kind::RootedAtParticle)
        throw std::invalid_argument("straightness_audit: tree must be rooted at a particle");
    if (q_id != t.root) throw std::invalid_argument("straightness_audit: q must be the tree root");
    StraightnessReport rep;
    rep.f_exponent = -0.25 + eps;
    const PointSet& ps = *t.ps;
    const int n = ps.size();
    const int d = ps.dim();

    std::vector<std::vector<int>> children(n);
    for (int v = 0; v < n; ++v)
        if (t.reachable(v) && t.parent[v] >= 0) children[t.parent[v]].push_back(v);

    const Vec root = ps.point(q_id);
    std::vector<double> dq(d), dv(d);
    std::map<int, StraightnessBin> bins; // keyed by dyadic exponent

    for (int qp = 0; qp < n; ++qp) {
        if (!t.is_covered(qp) || qp == q_id) continue;
        const double r = dist(ps.point(qp), root);
        if (r == 0.0) continue;
        const double cone = std::min(3.14159265358979323846, std::pow(r, rep.f_exponent));
        for (int j = 0; j < d; ++j) dq[j] = ps.point(qp)[j] - root[j];
        bool violated = false;
        std::vector<int> stack{qp};
        while (!stack.empty() && !violated) {
            const int v = stack.back();
            stack.pop_back();
            if (v != qp) {
                for (int j = 0; j < d; ++j) dv[j] = ps.point(v)[j] - root[j];
                if (!cone_contains(Vec(dq), cone, Vec(dv))) violated = true;
            }
            for (int c : children[v]) stack.push_back(c);
        }
        const int bucket = static_cast<int>(std::floor(std::log2(std::max(r, 1e-12))));
        auto& bin = bins[bucket];
        bin.r_lo = std::pow(2.0, bucket);
        bin.r_hi = std::pow(2.0, bucket + 1);
        bin.vertices++;
        rep.total_vertices++;
        if (violated) {
            bin.violating++;
            rep.total_violating++;
        }
    }
    rep.bins.reserve(bins.size());
    for (const auto& [_, b] : bins) rep.bins.push_back(b);
    return rep;
}

TreeStats tree_stats(const GeodesicTree& t) {
    TreeStats st;
    const int n = t.size();
    std::vector<int> degree(n, 0);
    for (int v = 0; v < n; ++v) {
        if (!t.reachable(v)) continue;
        if (t.parent[v] >= 0) {
            degree[v]++;
            degree[t.parent[v]]++;
        }
    }
    int deepest = t.root;
    for (int v = 0; v < n; ++v) {
        if (!t.reachable(v)) continue;
        st.degree_histogram[degree[v]]++;
        st.max_degree = std::max(st.max_degree, degree[v]);
        if (t.hops[v] > st.max_depth) {
            st.max_depth = t.hops[v];
            deepest = v;
        }
    }
    if (n == 0 || t.root < 0) return st;

    // long path from the root and its angular dispersal
    const PointSet& ps = *t.ps;
    const int d = ps.dim();
    std::vector<int> pathv;
    for (int v = deepest; v != -1; v = t.parent[v]) pathv.push_back(v);
    std::reverse(pathv.begin(), pathv.end());
    st.long_path_len = static_cast<int>(pathv.size());
    const Vec root = ps.point(t.root);
    std::vector<std::vector<double>> dirs;
    for (int v : pathv) {
        if (v == t.root) continue;
        std::vector<double> dv(d);
        double nn = 0.0;
        for (int j = 0; j < d; ++j) {
            dv[j] = ps.point(v)[j] - root[j];
            nn += dv[j] * dv[j];
        }
        if (nn > 0.0) dirs.push_back(std::move(dv));
    }
    double sum = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < dirs.size(); ++i)
        for (std::size_t j = i + 1; j < dirs.size(); ++j) {
            const double a = angle(Vec(dirs[i]), Vec(dirs[j]));
            st.direction_dispersal_max = std::max(st.direction_dispersal_max, a);
            sum += a;
            ++cnt;
        }
    st.direction_dispersal_mean = cnt ? sum / cnt : 0.0;
    return st;
}

void GeodesicTree::save(std::ostream& os) const {
    char buf[64];
    os << "efpp-tree-v1\n";
    os << "kind " << (kind == Kind::RootedAtParticle ? "particle" : "direction") << "\n";
    os << "root " << root << "\n";
    os << "n " << size() << "\n";
    if (kind == Kind::RootedAtDirection) {
        os << "direction";
        for (double v : direction) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ' ' << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g", target_radius);
        os << "\ntarget_radius " << buf;
        std::snprintf(buf, sizeof buf, "%.17g", core_radius);
        os << "\ncore_radius " << buf << "\n";
    }
    os << "parents";
    for (int p : parent) os << ' ' << p;
    os << "\ncosts";
    for (double c : cost_to_root) {
        std::snprintf(buf, sizeof buf, "%.17g", c);
        os << ' ' << buf;
    }
    os << "\ncovered";
    for (char c : covered) os << ' ' << static_cast<int>(c);
    os << "\n";
}

} // namespace efpp
