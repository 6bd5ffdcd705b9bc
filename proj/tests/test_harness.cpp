#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "efpp/errors.hpp"
#include "efpp/harness.hpp"

using namespace efpp;

namespace {

std::string records_text(const ExperimentSpec& spec, const ExperimentResult& res) {
    std::ostringstream os;
    write_records(os, spec, res);
    return os.str();
}

} // namespace

TEST_CASE("spec validation names the offending field") {
    ExperimentSpec spec;
    spec.kind = "bogus";
    CHECK_THROWS_AS(spec.validate(), UsageError);
    spec.kind = "estimate-mu";
    CHECK_THROWS_AS(spec.validate(), UsageError); // missing lengths
    spec.lengths = {20.0, 10.0};
    CHECK_THROWS_AS(spec.validate(), UsageError); // not increasing
    spec.lengths = {10.0, 20.0};
    spec.alpha = 0.5;
    CHECK_THROWS_AS(spec.validate(), UsageError);
    spec.alpha = 2.0;
    CHECK_NOTHROW(spec.validate());
}

TEST_CASE("spec round-trips through json") {
    ExperimentSpec spec;
    spec.kind = "estimate-xi";
    spec.d = 2;
    spec.alpha = 2.0;
    spec.lengths = {50.0, 100.0, 200.0, 400.0};
    spec.replicates = 200;
    spec.seed = 42;
    const ExperimentSpec back = ExperimentSpec::from_json(spec.to_json());
    CHECK(back.kind == spec.kind);
    CHECK(back.lengths == spec.lengths);
    CHECK(back.replicates == spec.replicates);
    CHECK(back.seed == spec.seed);
}

TEST_CASE("oracle-suite experiment reports exact matches") {
    ExperimentSpec spec;
    spec.kind = "oracle-suite";
    spec.instances = 30;
    spec.seed = 17;
    spec.workers = 2;
    const ExperimentResult res = run_experiment(spec);
    CHECK(res.passed);
    CHECK(res.summary.at("matches").get<int>() == 30);
    CHECK(res.summary.at("instances").get<int>() == 30);
}

TEST_CASE("records are byte-identical across runs and worker counts") {
    ExperimentSpec spec;
    spec.kind = "estimate-mu";
    spec.lengths = {8.0, 16.0};
    spec.replicates = 12;
    spec.seed = 99;
    spec.workers = 1;
    const ExperimentResult res1 = run_experiment(spec);
    spec.workers = 2;
    const ExperimentResult res2 = run_experiment(spec);
    CHECK(records_text(spec, res1) == records_text(spec, res2));
    CHECK(res1.summary.dump() == res2.summary.dump());

    // records carry the substream seed and never the wall time
    const json rec = res1.records[0].to_json(spec);
    CHECK(rec.contains("substream_seed"));
    CHECK(rec.at("seed").get<std::uint64_t>() == 99);
    CHECK_FALSE(rec.dump().find("wall") != std::string::npos);
}

TEST_CASE("geodesic experiment produces a usable record") {
    ExperimentSpec spec;
    spec.kind = "geodesic";
    spec.ell = 15.0;
    spec.replicates = 2;
    spec.seed = 5;
    spec.workers = 2;
    const ExperimentResult res = run_experiment(spec);
    REQUIRE(res.records.size() == 2);
    for (const auto& rec : res.records) {
        REQUIRE(rec.error.empty());
        CHECK(rec.payload.at("cost").get<double>() > 0.0);
        CHECK(rec.payload.at("trusted").get<bool>());
        CHECK(rec.payload.at("path").at("ids").size() >= 2);
    }
}

TEST_CASE("lens-check experiment passes") {
    ExperimentSpec spec;
    spec.kind = "lens-check";
    spec.trials = 500;
    spec.alpha = 1.5;
    spec.seed = 3;
    const ExperimentResult res = run_experiment(spec);
    CHECK(res.passed);
    CHECK(res.summary.at("total_violations").get<int>() == 0);
}

TEST_CASE("failing replicates abort the experiment beyond ten percent") {
    ExperimentSpec spec;
    spec.kind = "directional-tree";
    spec.target_radius = 30.0;
    spec.core_radius = 20.0; // violates R >= 3 core in every replicate
    spec.replicates = 4;
    spec.seed = 8;
    CHECK_THROWS(run_experiment(spec));
}

TEST_CASE("outputs land in the requested files") {
    ExperimentSpec spec;
    spec.kind = "sample";
    spec.box_half = 4.0;
    spec.replicates = 1;
    spec.seed = 12;
    spec.out = "/tmp/efpp_test_sample.points";
    std::ostringstream sink;
    const ExperimentResult res = run_experiment(spec);
    write_outputs(spec, res, sink);
    std::ifstream records(spec.out);
    CHECK(records.good());
    std::ifstream csv(spec.out + ".summary.csv");
    CHECK(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "mean_n,expected_n");
    std::remove(spec.out.c_str());
    std::remove((spec.out + ".summary.csv").c_str());
}

TEST_CASE("path and tree text serializations") {
    const PointSet ps = PointSet::from_points(Window::cube(2, -1.0, 3.0),
                                              {0.0, 0.0, 1.0, 0.1, 2.0, 0.0}, 1.0);
    const CandidateGraph g = CandidateGraph::build(ps, CostModel::power(2.0), 32);
    const PathResult p = geodesic(g, 0, 2);
    std::ostringstream pos;
    p.save(pos);
    CHECK(pos.str().rfind("efpp-path-v1\n", 0) == 0);
    CHECK(pos.str().find("mode particle") != std::string::npos);
    CHECK(pos.str().find("ids 0 1 2") != std::string::npos);

    const GeodesicTree t = euclidean_mst(ps);
    std::ostringstream tos;
    t.save(tos);
    CHECK(tos.str().rfind("efpp-tree-v1\n", 0) == 0);
    CHECK(tos.str().find("parents") != std::string::npos);
    CHECK(tos.str().find("covered 1 1 1") != std::string::npos);
}

TEST_CASE("tree experiments write tree files next to the records") {
    ExperimentSpec spec;
    spec.kind = "msf";
    spec.box_half = 4.0;
    spec.replicates = 1;
    spec.seed = 31;
    spec.out = "/tmp/efpp_test_msf.jsonl";
    std::ostringstream sink;
    const ExperimentResult res = run_experiment(spec);
    write_outputs(spec, res, sink);
    std::ifstream tree(spec.out + ".tree");
    REQUIRE(tree.good());
    std::string header;
    std::getline(tree, header);
    CHECK(header == "efpp-tree-v1");
    std::remove(spec.out.c_str());
    std::remove((spec.out + ".summary.csv").c_str());
    std::remove((spec.out + ".tree").c_str());
}

TEST_CASE("height experiment: zero violations on a small run") {
    ExperimentSpec spec;
    spec.kind = "height";
    spec.target_radius = 24.0;
    spec.replicates = 2;
    spec.seed = 44;
    spec.workers = 2;
    const ExperimentResult res = run_experiment(spec);
    CHECK(res.passed);
    CHECK(res.summary.at("total_violations").get<int>() == 0);
}

TEST_CASE("boxpath experiment summary") {
    ExperimentSpec spec;
    spec.kind = "boxpath";
    spec.ell = 12.0;
    spec.replicates = 3;
    spec.seed = 2;
    spec.workers = 2;
    const ExperimentResult res = run_experiment(spec);
    CHECK(res.passed);
    CHECK(res.summary.at("covers_long_midpoints").get<bool>());
    CHECK(res.summary.at("connected").get<bool>());
}
