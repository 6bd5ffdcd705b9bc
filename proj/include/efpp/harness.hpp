#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "efpp/estimators.hpp"

namespace efpp {

using json = nlohmann::ordered_json;

/// One experiment: kind plus shared and kind-specific parameters.
struct ExperimentSpec {
    std::string kind; // sample | geodesic | tree | directional-tree | msf | estimate-mu |
                      // estimate-chi | estimate-xi | shape | concentration | superadd |
                      // height | straightness | boxpath | lens-check | oracle-suite
    int d = 2;
    double alpha = 2.0;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    int replicates = 0;       // 0 -> kind default (scaled by budget)
    double budget = 1.0;
    int workers = 0;
    std::string out;

    std::vector<double> lengths; // l grid
    std::vector<double> s_grid;
    double ell = 50.0;          // single-length experiments
    double box_half = 16.0;     // half-width of sampling cubes (tree/msf/sample)
    double h = std::numeric_limits<double>::infinity();
    double eps_box = 0.0;       // 0 -> 0.5 lambda^(-1/d)
    double direction_angle = 0.0;
    double target_radius = 45.0;
    double core_radius = 0.0;   // 0 -> target_radius / 3
    double mu_hat = 0.0;        // 0 -> estimated on the fly where needed
    std::uint64_t trials = 0;   // lens-check
    int instances = 0;          // oracle-suite
    std::vector<double> x, y;   // geodesic endpoints
    std::string mode = "particle";
    WindowPolicy policy;

    json to_json() const;
    static ExperimentSpec from_json(const json& j);
    void validate() const; // throws UsageError
};

struct ReplicateRecord {
    int index = -1;
    std::uint64_t substream_seed = 0;
    json payload;
    std::string error;
    double wall_s = 0.0; // excluded from the serialized record (determinism)

    json to_json(const ExperimentSpec& spec) const;
};

struct ExperimentResult {
    std::vector<ReplicateRecord> records;
    json summary;
    std::string summary_csv;
    bool passed = true;
    int failures = 0;
};

/// Runs the experiment: replicates in parallel (deterministic per-index
/// substreams, aggregation in index order), one record per replicate.  A
/// replicate that throws is recorded with its error; more than 10% failures
/// aborts the experiment.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Serializes records (one JSON per line) and the CSV summary.
void write_records(std::ostream& os, const ExperimentSpec& spec, const ExperimentResult& res);
void write_outputs(const ExperimentSpec& spec, const ExperimentResult& res, std::ostream& fallback);

json path_to_json(const PathResult& p, int d);
json tree_to_json(const GeodesicTree& t);

} // namespace efpp
