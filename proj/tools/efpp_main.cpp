// Command-line driver: one subcommand per experiment kind; flags override a
// JSON config file; records go to --out (or stdout) one JSON object per line,
// summaries as CSV next to the records.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "efpp/errors.hpp"
#include "efpp/harness.hpp"

namespace {

struct CliState {
    efpp::ExperimentSpec spec;
    std::string config_path;
    std::string lengths_str, sgrid_str, x_str, y_str;
    double h_value = -1.0; // <0: infinite
};

std::vector<double> parse_grid(const std::string& s, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (...) {
            throw efpp::UsageError("malformed value '" + item + "' in " + flag);
        }
    }
    if (out.empty()) throw efpp::UsageError("empty list for " + flag);
    return out;
}

void add_common(CLI::App* cmd, CliState& st) {
    cmd->add_option("--d", st.spec.d, "dimension (>= 2)");
    cmd->add_option("--alpha", st.spec.alpha, "cost exponent alpha > 1");
    cmd->add_option("--lambda", st.spec.lambda, "point density");
    cmd->add_option("--seed", st.spec.seed, "experiment seed");
    cmd->add_option("--replicates", st.spec.replicates, "replicate count (0 = kind default)");
    cmd->add_option("--budget", st.spec.budget, "multiplier on default Monte Carlo sizes");
    cmd->add_option("--workers", st.spec.workers,
                    "worker threads (0 = EFPP_WORKERS or hardware)");
    cmd->add_option("--out", st.spec.out, "records output path (JSON lines)");
    cmd->add_option("--config", st.config_path, "JSON config file (flags override it)");
    cmd->add_option("--k", st.spec.policy.k, "neighbor budget for the candidate graph");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Euclidean first-passage percolation toolkit"};
    app.require_subcommand(1);

    CliState st;
    if (const char* env = std::getenv("EFPP_WORKERS")) st.spec.workers = std::atoi(env);

    auto* sample = app.add_subcommand("sample", "sample a Poisson point set");
    auto* geodesicc = app.add_subcommand("geodesic", "windowed passage time between two points");
    auto* tree = app.add_subcommand("tree", "geodesic tree rooted at q(0)");
    auto* dtree = app.add_subcommand("directional-tree", "tree toward a far directional target");
    auto* msf = app.add_subcommand("msf", "Euclidean minimum spanning tree");
    auto* emu = app.add_subcommand("estimate-mu", "time-constant estimate");
    auto* echi = app.add_subcommand("estimate-chi", "variance scaling slope");
    auto* exi = app.add_subcommand("estimate-xi", "wandering scaling slope");
    auto* shape = app.add_subcommand("shape", "shape theorem / isotropy check");
    auto* conc = app.add_subcommand("concentration", "standardized fluctuation tails");
    auto* superadd = app.add_subcommand("superadd", "weak superadditivity report");
    auto* height = app.add_subcommand("height", "height-function recursion check");
    auto* straight = app.add_subcommand("straightness", "cone-confinement audit");
    auto* boxpath = app.add_subcommand("boxpath", "box-path statistics along geodesics");
    auto* lens = app.add_subcommand("lens-check", "randomized lens-lemma verification");
    auto* oracle = app.add_subcommand("oracle-suite", "small-instance exact oracles");

    for (CLI::App* cmd :
         {sample, geodesicc, tree, dtree, msf, emu, echi, exi, shape, conc, superadd, height,
          straight, boxpath, lens, oracle})
        add_common(cmd, st);

    sample->add_option("--box", st.spec.box_half, "half-width of the sampling cube");
    for (CLI::App* cmd : {tree, msf, straight})
        cmd->add_option("--box", st.spec.box_half, "half-width of the sampling cube");

    geodesicc->add_option("--x", st.x_str, "source coordinates (comma separated)");
    geodesicc->add_option("--y", st.y_str, "target coordinates (comma separated)");
    geodesicc->add_option("--ell", st.spec.ell, "distance when --y is omitted");
    geodesicc->add_option("--mode", st.spec.mode, "particle | exact");
    geodesicc->add_option("--trunc-h", st.h_value, "truncation threshold (omit for pure power)");

    for (CLI::App* cmd : {emu, echi, exi, superadd})
        cmd->add_option("--lengths", st.lengths_str, "comma-separated l grid");
    shape->add_option("--s-grid", st.sgrid_str, "comma-separated s grid");
    shape->add_option("--mu", st.spec.mu_hat, "time constant (0 = estimate first)");
    conc->add_option("--ell", st.spec.ell, "length");
    boxpath->add_option("--ell", st.spec.ell, "length");
    boxpath->add_option("--eps", st.spec.eps_box, "box size (0 = 0.5 lambda^(-1/d))");
    for (CLI::App* cmd : {dtree, height}) {
        cmd->add_option("--radius", st.spec.target_radius, "target radius R");
        cmd->add_option("--core", st.spec.core_radius, "core radius (0 = R/3)");
        cmd->add_option("--angle", st.spec.direction_angle, "direction angle (radians)");
    }
    lens->add_option("--trials", st.spec.trials, "randomized trials");
    lens->add_option("--trunc-h", st.h_value, "truncation threshold (omit for pure power)");
    oracle->add_option("--instances", st.spec.instances, "instance count");

    try {
        app.parse(argc, argv);

        CLI::App* active = app.get_subcommands().front();
        // config file first, then flags already parsed into st.spec win
        if (!st.config_path.empty()) {
            std::ifstream is(st.config_path);
            if (!is) throw efpp::UsageError("cannot open config file " + st.config_path);
            efpp::json j = efpp::json::parse(is, nullptr, true, true);
            efpp::ExperimentSpec base = efpp::ExperimentSpec::from_json(j);
            // flags that the user actually passed override the config
            efpp::ExperimentSpec merged = base;
            merged.kind = active->get_name();
            auto passed = [&](const std::string& name) {
                const CLI::Option* opt = active->get_option_no_throw("--" + name);
                return opt != nullptr && opt->count() > 0;
            };
            if (passed("d")) merged.d = st.spec.d;
            if (passed("alpha")) merged.alpha = st.spec.alpha;
            if (passed("lambda")) merged.lambda = st.spec.lambda;
            if (passed("seed")) merged.seed = st.spec.seed;
            if (passed("replicates")) merged.replicates = st.spec.replicates;
            if (passed("budget")) merged.budget = st.spec.budget;
            if (passed("workers")) merged.workers = st.spec.workers;
            if (passed("out")) merged.out = st.spec.out;
            if (passed("k")) merged.policy.k = st.spec.policy.k;
            if (passed("box")) merged.box_half = st.spec.box_half;
            if (passed("ell")) merged.ell = st.spec.ell;
            if (passed("mode")) merged.mode = st.spec.mode;
            if (passed("mu")) merged.mu_hat = st.spec.mu_hat;
            if (passed("radius")) merged.target_radius = st.spec.target_radius;
            if (passed("core")) merged.core_radius = st.spec.core_radius;
            if (passed("angle")) merged.direction_angle = st.spec.direction_angle;
            if (passed("trials")) merged.trials = st.spec.trials;
            if (passed("instances")) merged.instances = st.spec.instances;
            if (passed("eps")) merged.eps_box = st.spec.eps_box;
            st.spec = merged;
        } else {
            st.spec.kind = active->get_name();
        }
        if (!st.lengths_str.empty()) st.spec.lengths = parse_grid(st.lengths_str, "--lengths");
        if (!st.sgrid_str.empty()) st.spec.s_grid = parse_grid(st.sgrid_str, "--s-grid");
        if (!st.x_str.empty()) st.spec.x = parse_grid(st.x_str, "--x");
        if (!st.y_str.empty()) st.spec.y = parse_grid(st.y_str, "--y");
        if (st.h_value > 0.0) st.spec.h = st.h_value;

        if (st.spec.seed == 0 && !app.get_subcommands().front()->count("--seed"))
            std::cerr << "warning: --seed not given, defaulting to 0\n";

        const efpp::ExperimentResult res = efpp::run_experiment(st.spec);
        efpp::write_outputs(st.spec, res, std::cout);
        if (res.failures > 0)
            std::cerr << "warning: " << res.failures << " replicate(s) failed\n";
        return res.passed ? 0 : 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const efpp::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 64;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
