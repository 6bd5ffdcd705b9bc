#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "efpp/geodesic.hpp"

namespace efpp {

/// Parent-map tree of geodesics, rooted at a particle (R_alpha(q)) or at a far
/// directional target (finite-R stand-in for R_alpha(xhat)).  cost_to_root and
/// parents cover every reachable vertex; `covered` marks the ids for which
/// tree-level claims are asserted (trust band for particle roots, the core
/// ball for directional roots).
struct GeodesicTree {
    enum class Kind { RootedAtParticle, RootedAtDirection };

    Kind kind = Kind::RootedAtParticle;
    int root = -1;
    std::vector<double> direction; // unit vector, directional kind only
    double target_radius = 0.0;    // R, directional kind only
    double core_radius = 0.0;      // directional kind only

    std::vector<int> parent;            // -1 at root / unreachable
    std::vector<double> cost_to_root;   // +inf unreachable
    std::vector<int> hops;
    std::vector<char> covered;

    const PointSet* ps = nullptr;

    bool reachable(int v) const { return std::isfinite(cost_to_root[v]); }
    bool is_covered(int v) const { return covered[v] != 0; }
    int size() const { return static_cast<int>(parent.size()); }

    void save(std::ostream& os) const;
};

/// Single-source geodesic tree R_alpha(q) over the candidate graph; coverage
/// uses the window trust band (band computed from |v - root| per vertex).
GeodesicTree geodesic_tree_from(const CandidateGraph& g, int q_id,
                                const WindowPolicy& policy = WindowPolicy());

/// Tree of geodesics to the particle nearest R*xhat; coverage is the core ball
/// |q| <= core_radius around the origin.  Requires R >= 3 * core_radius.
GeodesicTree directional_tree(const CandidateGraph& g, std::span<const double> xhat, double R,
                              double core_radius);

/// Parent chain of q reversed so the path starts at q.  q must be covered.
PathResult directional_geodesic(const GeodesicTree& t, int q_id);

struct CoalescenceRecord {
    int q = -1, q2 = -1;
    int meet = -1;       // W_xhat(q, q2): lowest common ancestor
    int depth_q = 0;     // hops from q to meet
    int depth_q2 = 0;
    bool coalesced = false;
};

CoalescenceRecord coalescence(const GeodesicTree& t, int q_id, int q2_id);

/// H(q, q0) = cost_to_root(q) - cost_to_root(q0); both must be covered.
double height_function(const GeodesicTree& t, int q_id, int q0_id);

struct HeightField {
    std::vector<double> direction;
    int base = -1;                 // q0
    double target_radius = 0.0;
    std::map<int, double> values;  // covered id -> H(id, q0)
};

HeightField height_field(const GeodesicTree& t, int q0_id);

struct HeightViolation {
    int q = -1, q2 = -1;
    std::string check;
    double lhs = 0.0, rhs = 0.0;
};

struct HeightReport {
    std::uint64_t inequality_checked = 0;
    std::uint64_t parent_equalities_checked = 0;
    std::uint64_t exclusion_checked = 0;
    std::vector<HeightViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks the height recursion over the covered core: (i) H(q) <= phi(|q-q'|)
/// + H(q') for all covered q' != q, (ii) equality at q's tree parent, and
/// (iii) for sampled finite exclusion sets Q0, H(q) = min over q' outside Q0
/// of [T(q,q') + H(q')] with T from a fresh shortest-path run.
HeightReport verify_height_recursion(const CandidateGraph& g, const GeodesicTree& t,
                                     const HeightField& field, double slack = 1e-10,
                                     int exclusion_samples = 4, std::uint64_t seed = 0);

/// Euclidean minimum spanning tree (Prim; ties by lexicographic edge ids).
/// cost_to_root accumulates Euclidean edge lengths.
GeodesicTree euclidean_mst(const PointSet& ps);

/// Eq-style MSF edge criterion: true iff every path avoiding the edge has a
/// strictly larger maximal link than |q - qbar| (vacuously true when no
/// avoiding path exists).
bool msf_edge_criterion(const PointSet& ps, int q_id, int qbar_id);

struct StraightnessBin {
    double r_lo = 0.0, r_hi = 0.0;
    int vertices = 0;
    int violating = 0;
};

struct StraightnessReport {
    double f_exponent = 0.0; // -1/4 + eps
    std::vector<StraightnessBin> bins; // dyadic in |q' - q|
    int total_vertices = 0;
    int total_violating = 0;
};

/// Cone-confinement audit: for each covered q', do all tree descendants of q'
/// lie in q + C(q'-q, |q'-q|^(-1/4+eps))?
StraightnessReport straightness_audit(const GeodesicTree& t, int q_id, double eps);

struct TreeStats {
    std::map<int, int> degree_histogram;
    int max_degree = 0;
    int max_depth = 0;
    // Longest root path (by hops) and the angular dispersal of its vertex
    // directions seen from the root; descriptive only.
    int long_path_len = 0;
    double direction_dispersal_max = 0.0;
    double direction_dispersal_mean = 0.0;
};

TreeStats tree_stats(const GeodesicTree& t);

} // namespace efpp
