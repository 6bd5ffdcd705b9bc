#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efpp/costmodel.hpp"
#include "efpp/pointcloud.hpp"

namespace efpp {

enum class EndpointMode { ParticleEndpoints, ExactEndpoints };
enum class AuditLevel { None, Doubling };

/// Virtual vertex ids in exact-endpoint paths.
inline constexpr int kSourceId = -1;
inline constexpr int kTargetId = -2;

struct PathResult {
    std::vector<int> vertex_ids;      // particle ids; kSourceId/kTargetId for virtual endpoints
    std::vector<double> coords;       // row-major vertex coordinates
    std::vector<double> link_lengths; // size len-1
    double total_cost = 0.0;
    EndpointMode mode = EndpointMode::ParticleEndpoints;
    bool trusted = true;
    double margin = std::numeric_limits<double>::infinity(); // min boundary distance over vertices

    int length() const { return static_cast<int>(vertex_ids.size()); }
    Vec vertex(int i, int d) const { return Vec(coords.data() + static_cast<std::size_t>(i) * d, d); }
    void save(std::ostream& os) const;
};

/// Lens-pruned candidate graph.  An edge survives only if no third particle
/// lies strictly inside its lens, which preserves every geodesic: a path using
/// a pruned edge is strictly improved by inserting the witness.
class CandidateGraph {
public:
    static CandidateGraph build(const PointSet& ps, const CostModel& cm, int k = 32,
                                AuditLevel audit = AuditLevel::Doubling);

    const PointSet& points() const { return *ps_; }
    const CostModel& cost_model() const { return cm_; }

    int degree(int i) const { return adj_start_[i + 1] - adj_start_[i]; }
    std::span<const int> neighbors(int i) const {
        return std::span<const int>(adj_.data() + adj_start_[i],
                                    adj_.data() + adj_start_[i + 1]);
    }
    std::span<const double> neighbor_lengths(int i) const {
        return std::span<const double>(len_.data() + adj_start_[i],
                                       len_.data() + adj_start_[i + 1]);
    }
    std::size_t edge_count() const { return adj_.size() / 2; }
    bool has_edge(int a, int b) const;

    int budget() const { return k_; }
    int doublings_used() const { return doublings_; }
    AuditLevel audit() const { return audit_; }

private:
    const PointSet* ps_ = nullptr;
    CostModel cm_;
    std::vector<int> adj_start_;
    std::vector<int> adj_;
    std::vector<double> len_;
    int k_ = 32;
    int doublings_ = 0;
    AuditLevel audit_ = AuditLevel::Doubling;
};

/// True if some particle other than skip_a/skip_b lies strictly inside
/// W_phi(a, b); witnesses are scanned inside the lens bounding ball.
bool lens_interior_occupied(const PointSet& ps, const CostModel& cm, Vec a, Vec b,
                            int skip_a, int skip_b);

/// Shortest-path tree data from one Dijkstra run.
struct ShortestPaths {
    int source = -1;
    std::vector<double> cost;  // infinity if unreachable
    std::vector<int> parent;   // -1 at source / unreachable
    std::vector<int> hops;
    bool reachable(int v) const { return std::isfinite(cost[v]); }
};

/// Dijkstra over the kept edges; ties resolved by (cost, hops, lexicographic
/// id sequence) so results are deterministic even for symmetric inputs.
ShortestPaths shortest_paths_from(const CandidateGraph& g, int source);

PathResult geodesic(const CandidateGraph& g, int a_id, int b_id);

/// Reconstructs the a->b path from a Dijkstra tree rooted at a.
PathResult path_from_tree(const CandidateGraph& g, const ShortestPaths& sp, int b_id);

struct PassageResult {
    double cost = 0.0;
    PathResult path;
};

/// T(x,y): particle mode routes between q(x) and q(y); exact mode adds x and y
/// as virtual terminals joined to the particles by lens-filtered edges
/// (intermediate vertices still range over the particles only).
PassageResult passage_time(const CandidateGraph& g, Vec x, Vec y, EndpointMode mode);
PassageResult passage_time(const PointSet& ps, const CostModel& cm, Vec x, Vec y, EndpointMode mode,
                           int k = 32, AuditLevel audit = AuditLevel::Doubling);

/// T'' variant: one representative (leftmost, then lexicographic, then lowest
/// id) per eps-box, truncated phi (finite h required), exact endpoints.
/// Returned vertex ids refer to the original point set.
PassageResult truncated_passage_time(const PointSet& ps, const CostModel& cm, double subgrid_eps,
                                     Vec x, Vec y, int k = 32, AuditLevel audit = AuditLevel::Doubling);

/// Ids of the per-box representatives used by truncated_passage_time.
std::vector<int> box_representatives(const PointSet& ps, double eps);

/// Exhaustive minimum over all self-avoiding sequences; n <= 12.
PathResult brute_force_geodesic(const PointSet& ps, const CostModel& cm, int a_id, int b_id);

/// Exhaustive minimax over self-avoiding paths (used as the D_inf oracle).
std::pair<double, std::vector<int>> brute_force_minimax(const PointSet& ps, int a_id, int b_id);

/// D_inf(a,b): minimax link length, realized by the Euclidean MST path.
std::pair<double, PathResult> minimax_distance(const PointSet& ps, int a_id, int b_id);

struct CrossingViolation {
    int seg1 = 0; // link index in p1
    int seg2 = 0; // link index in p2
};

/// d = 2 only: reports intersecting closed segments (within 1e-9) that share
/// no endpoint id.  Exact geodesics with alpha >= 2 in the plane can only
/// cross at shared endpoints, so the report is expected empty.
std::vector<CrossingViolation> crossing_audit(const PathResult& p1, const PathResult& p2, int d);

struct DoublingBackViolation {
    int link_i = 0;
    int link_j = 0;
    double s = 0.0, t = 0.0; // sample parameters on the two links
    std::string which;       // which of the three inequalities failed
};

/// Checks the no-doubling-back inequalities (constants 16/16/33) on sampled
/// point pairs: 16 samples per link pair, at most 10^4 link pairs.
std::vector<DoublingBackViolation> no_doubling_back_audit(const PathResult& p, int d);

struct StaircaseResult {
    double cost = 0.0;
    PathResult path;
    bool complete = true; // false if the greedy construction ran out of particles
};

/// Greedy staircase path from x toward y: repeatedly take the particle with
/// the smallest forward offset inside the widening wedge D_t oriented along
/// (y-x); always returns a valid path, so its cost upper-bounds the passage
/// time.
StaircaseResult staircase_upper_bound(const PointSet& ps, const CostModel& cm, Vec x, Vec y);

/// Finite-window realization of Gamma(a) = sup{|c-a| : W(a,c) has no particle},
/// scanned over candidate radii within the window (a lower bound on the
/// infinite-volume quantity).
double empty_lens_reach(const PointSet& ps, const CostModel& cm, Vec a);

/// Window / trust policy for finite-window queries standing in for the
/// infinite-volume model.
struct WindowPolicy {
    double margin_mult = 20.0;  // margin = max(margin_mult * lambda^(-1/d), span^margin_exp)
    double margin_exp = 0.8;
    double trust_mult = 5.0;    // band  = max(trust_mult  * lambda^(-1/d), span^trust_exp)
    double trust_exp = 0.55;
    int max_regrow = 3;
    int k = 32;
    AuditLevel audit = AuditLevel::Doubling;

    double margin(double lambda, int d, double span) const;
    double trust_band(double lambda, int d, double span) const;
};

struct WindowedPassage {
    double cost = 0.0;
    PathResult path;
    int regrowths = 0;
    int point_count = 0;
};

/// Samples a window around the query pair (inflated per policy, regrown up to
/// max_regrow times while untrusted) and computes the passage time.  Attempt j
/// uses point-set seed substream_key(seed, j).
WindowedPassage windowed_passage_time(int d, const CostModel& cm, double lambda, Vec x, Vec y,
                                      std::uint64_t seed, EndpointMode mode,
                                      const WindowPolicy& policy = WindowPolicy());

} // namespace efpp
