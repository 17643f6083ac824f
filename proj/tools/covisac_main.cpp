#include "covisac/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace covisac;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string seed, out, format, paths;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "key = value configuration file");
    app->add_option("--set", c.sets, "override one config key (key=value), repeatable");
    app->add_option("--seed", c.seed, "base random seed");
    app->add_option("--out", c.out, "output path, - for stdout");
    app->add_option("--format", c.format, "csv or json");
    app->add_option("--paths", c.paths, "propagation paths per user");
}

// File first, then --set, then the dedicated flags.
std::map<std::string, std::string> collect(const Common& c, const std::map<std::string, std::string>& flags) {
    std::map<std::string, std::string> kv;
    if (!c.config.empty()) kv = read_config_file(c.config);
    for (const auto& s : c.sets) {
        const auto parsed = parse_config_text(s);
        if (parsed.empty()) throw Error(ErrorCode::InvalidConfig, "--set expects key=value");
        for (const auto& [k, v] : parsed) kv[k] = v;
    }
    auto put = [&](const char* k, const std::string& v) {
        if (!v.empty()) kv[k] = v;
    };
    put("seed", c.seed);
    put("out", c.out);
    put("format", c.format);
    put("paths", c.paths);
    for (const auto& [k, v] : flags) put(k.c_str(), v);
    return kv;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covert ISAC beamforming designs and experiment sweeps"};
    app.require_subcommand(1);

    Common runCommon;
    std::string sweep, values, schemes, trials, threads, pfa, deltaSq, clutterDb;
    bool timing = false;
    CLI::App* run = app.add_subcommand("run", "sweep one parameter over the chosen schemes");
    add_common(run, runCommon);
    run->add_option("--sweep", sweep, "qos, eps, gamma, antennas, rfChains, carols or deltaSq");
    run->add_option("--values", values, "comma separated sweep values");
    run->add_option("--schemes", schemes, "comma separated scheme names");
    run->add_option("--trials", trials, "channel realizations per point");
    run->add_option("--threads", threads, "worker threads, 0 for all cores");
    run->add_option("--pfa", pfa, "false-alarm rate for the detection probability column");
    run->add_option("--delta-sq", deltaSq, "Willie uncertainty radius squared");
    run->add_option("--clutter-power-db", clutterDb, "clutter echo power in dBW");
    run->add_flag("--timing", timing, "fill the runtime column (output is then not reproducible)");

    Common bpCommon;
    std::string scheme = "FDBF";
    std::vector<double> clutterPowers{20.0};
    CLI::App* bp = app.add_subcommand("beampattern", "receive beampattern of one design");
    add_common(bp, bpCommon);
    bp->add_option("--scheme", scheme, "scheme name");
    bp->add_option("--clutter-powers", clutterPowers, "clutter powers in dBW")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            ExperimentSpec spec;
            apply_config(collect(runCommon, {{"sweep", sweep},
                                             {"values", values},
                                             {"schemes", schemes},
                                             {"trials", trials},
                                             {"threads", threads},
                                             {"pfa", pfa},
                                             {"delta_sq", deltaSq},
                                             {"clutter_power_db", clutterDb},
                                             {"timing", timing ? "true" : ""}}),
                         spec);
            run_and_write(spec);
        } else {
            ExperimentSpec holder;
            apply_config(collect(bpCommon, {}), holder);
            BeampatternSpec spec;
            spec.scheme = parse_scheme(scheme);
            spec.config = holder.baseConfig;
            spec.clutterPowersDb = clutterPowers;
            spec.seed = holder.seed;
            spec.paths = holder.paths;
            spec.outputPath = holder.outputPath;
            spec.format = holder.format;
            emit_beampattern(spec);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
