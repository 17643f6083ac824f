#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covisac/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

using namespace covisac;

namespace {

SystemConfig small_config() {
    SystemConfig cfg;
    cfg.mt = 8;
    cfg.mr = 8;
    cfg.uCarols = 2;
    cfg.nRf = 4;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("covisac_" + name)).string();
}

TrialOutcome ok_outcome(double rate, double sinr) {
    TrialOutcome t;
    t.feasible = true;
    t.auditPass = true;
    t.report.covertRate = rate;
    t.report.overtRates = {1.5, 1.0};
    t.report.pE = 0.999;
    t.report.klDiv = 1e-6;
    t.report.sensingSinr = sinr;
    t.report.detectionProb = 0.5;
    t.runtimeMs = 10.0;
    return t;
}

}  // namespace

TEST_CASE("names round trip") {
    for (const char* n : {"FDBF", "HBF", "ZF", "MRT", "TS", "CommOnlyFD", "CommOnlyHBF", "RobustFDBF", "RobustHBF"})
        CHECK(std::string(to_string(parse_scheme(n))) == n);
    CHECK(parse_scheme("fdbf") == Scheme::FDBF);
    for (const char* n : {"qos", "eps", "gamma", "antennas", "rfChains", "carols", "deltaSq"})
        CHECK(std::string(to_string(parse_sweep_var(n))) == n);
    CHECK_THROWS_AS(parse_scheme("SVD"), Error);
    CHECK_THROWS_AS(parse_sweep_var("power"), Error);
    CHECK(parse_format("JSON") == OutputFormat::Json);
    CHECK_THROWS_AS(parse_format("xml"), Error);
}

TEST_CASE("number formatting keeps nine significant digits") {
    CHECK(format_number(1.0 / 3.0) == "0.333333333");
    CHECK(format_number(123456789.123) == "123456789");
    CHECK(format_number(1e-12) == "1e-12");
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("config text parsing") {
    const auto kv = parse_config_text("# comment\nmt = 16\n  trials=3 # trailing\n\nschemes = FDBF, ZF\n");
    CHECK(kv.size() == 3);
    CHECK(kv.at("mt") == "16");
    CHECK(kv.at("trials") == "3");
    ExperimentSpec spec;
    apply_config(kv, spec);
    CHECK(spec.baseConfig.mt == 16);
    CHECK(spec.trials == 3);
    REQUIRE(spec.schemes.size() == 2);
    CHECK(spec.schemes[1] == Scheme::ZF);

    apply_config(parse_config_text("noise_radar_dbw = -10\ngamma_db = 12\nvalues = 1, 2.5,4\nsweep = gamma"), spec);
    CHECK(spec.baseConfig.noiseRadar == doctest::Approx(0.1));
    CHECK(spec.baseConfig.sensingGammaDb == 12.0);
    CHECK(spec.sweepVariable == SweepVar::Gamma);
    CHECK(spec.sweepValues == std::vector<double>{1.0, 2.5, 4.0});

    CHECK_THROWS_AS(apply_config(parse_config_text("bogus = 1"), spec), Error);
    CHECK_THROWS_AS(apply_config(parse_config_text("mt = sixteen"), spec), Error);
    CHECK_THROWS_AS(parse_config_text("no equals sign"), Error);
    CHECK_THROWS_AS(read_config_file("/nonexistent/covisac.cfg"), Error);
}

TEST_CASE("sweep application") {
    const SystemConfig base = small_config();
    double d = 0.0;
    CHECK(apply_sweep(base, SweepVar::Qos, 3.0, d).qosWillie == 3.0);
    CHECK(apply_sweep(base, SweepVar::Antennas, 16.0, d).mr == 16);
    CHECK(apply_sweep(base, SweepVar::RfChains, 6.0, d).nRf == 6);
    CHECK(apply_sweep(base, SweepVar::Eps, 0.01, d).covertEps == 0.01);
    apply_sweep(base, SweepVar::DeltaSq, 0.1, d);
    CHECK(d == 0.1);
    CHECK_THROWS_AS(apply_sweep(base, SweepVar::Carols, 1.5, d), Error);
    ExperimentSpec spec;
    spec.baseConfig = base;
    spec.sweepVariable = SweepVar::RfChains;
    spec.sweepValues = {4, 20};
    CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("trial seeds are deterministic and distinct") {
    CHECK(trial_seed(1, 0) == trial_seed(1, 0));
    CHECK(trial_seed(1, 0) != trial_seed(1, 1));
    CHECK(trial_seed(1, 0) != trial_seed(2, 0));
}

TEST_CASE("aggregation excludes and counts infeasible runs") {
    std::vector<TrialOutcome> t{ok_outcome(2.0, 10.0), ok_outcome(4.0, 100.0), TrialOutcome{}};
    t[1].auditPass = false;
    const ResultRow r = aggregate(Scheme::TS, SweepVar::Qos, 1.0, t, 1e-4, true);
    CHECK(r.trialCount == 3);
    CHECK(r.infeasibleCount == 1);
    CHECK(r.auditFailCount == 1);
    CHECK(r.covertRateMean == doctest::Approx(3.0));
    CHECK(r.covertRateStd == doctest::Approx(std::sqrt(2.0)));
    CHECK(r.overtRateMinMean == doctest::Approx(1.0));
    CHECK(r.sensingSinrDbMean == doctest::Approx(15.0));
    CHECK(r.runtimeMsMean == doctest::Approx(20.0 / 3));
    CHECK(aggregate(Scheme::TS, SweepVar::Qos, 1.0, t, 1e-4, false).runtimeMsMean == 0.0);

    const ResultRow none = aggregate(Scheme::FDBF, SweepVar::Qos, 1.0, {TrialOutcome{}}, 1e-4, false);
    CHECK(none.infeasibleCount == 1);
    CHECK(std::isnan(none.covertRateMean));
}

TEST_CASE("QoS sweep gives one row per point with a non-increasing covert rate") {
    ExperimentSpec spec;
    spec.baseConfig = small_config();
    spec.sweepVariable = SweepVar::Qos;
    spec.sweepValues = {1, 2, 3, 4, 5, 6};
    spec.schemes = {Scheme::FDBF};
    spec.trials = 1;
    const auto rows = run_experiment(spec);
    REQUIRE(rows.size() == 6);
    double prev = INFINITY;
    for (const auto& r : rows) {
        CHECK(r.trialCount == 1);
        const double rate = r.infeasibleCount ? 0.0 : r.covertRateMean;
        CHECK(rate <= prev + 1e-6);
        prev = rate;
    }
}

TEST_CASE("rows are grouped by scheme in listing order") {
    ExperimentSpec spec;
    spec.baseConfig = small_config();
    spec.sweepValues = {1, 2};
    spec.schemes = {Scheme::CommOnlyFD, Scheme::FDBF};
    spec.trials = 1;
    const auto rows = run_experiment(spec);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].scheme == Scheme::FDBF);
    CHECK(rows[1].scheme == Scheme::FDBF);
    CHECK(rows[0].sweepValue == 1.0);
    CHECK(rows[2].scheme == Scheme::CommOnlyFD);
    for (int i = 0; i < 2; ++i) CHECK(rows[2 + i].covertRateMean >= rows[i].covertRateMean - 1e-6);
}

TEST_CASE("identical specs write byte-identical files") {
    ExperimentSpec spec;
    spec.baseConfig = small_config();
    spec.sweepVariable = SweepVar::Gamma;
    spec.sweepValues = {5, 10};
    spec.schemes = {Scheme::FDBF, Scheme::HBF};
    spec.trials = 2;
    spec.threads = 2;
    for (OutputFormat f : {OutputFormat::Csv, OutputFormat::Json}) {
        spec.format = f;
        spec.outputPath = temp_path("a.out");
        run_and_write(spec);
        spec.outputPath = temp_path("b.out");
        spec.threads = 1;
        run_and_write(spec);
        const std::string a = slurp(temp_path("a.out")), b = slurp(temp_path("b.out"));
        CHECK(!a.empty());
        CHECK(a == b);
    }
    std::remove(temp_path("a.out").c_str());
    std::remove(temp_path("b.out").c_str());
}

TEST_CASE("CSV and JSON layouts") {
    const std::vector<ResultRow> rows{aggregate(Scheme::ZF, SweepVar::Gamma, 11.0, {TrialOutcome{}}, 1e-4, false)};
    const std::string csv = rows_to_csv(rows);
    CHECK(csv.rfind("scheme,sweepVar,sweepValue,trial_count,infeasible_count,covert_rate_mean,covert_rate_std,"
                    "overt_rate_min_mean,pE_mean,kl_mean,sensing_sinr_db_mean,pd_mean,runtime_ms_mean",
                    0) == 0);
    CHECK(csv.find("\nZF,gamma,11,1,1,nan,") != std::string::npos);
    const auto j = nlohmann::json::parse(rows_to_json(rows));
    REQUIRE(j.is_array());
    CHECK(j[0]["scheme"] == "ZF");
    CHECK(j[0]["infeasible_count"] == 1);
    CHECK(j[0]["covert_rate_mean"].is_null());
    CHECK(j[0]["pfa"] == 1e-4);
}

TEST_CASE("unreachable sensing target is counted as infeasible") {
    ExperimentSpec spec;
    spec.baseConfig = small_config();
    spec.sweepVariable = SweepVar::Gamma;
    spec.sweepValues = {40};
    spec.schemes = {Scheme::ZF, Scheme::FDBF};
    spec.trials = 2;
    for (const auto& r : run_experiment(spec)) CHECK(r.infeasibleCount == 2);
}

TEST_CASE("unwritable output path") {
    ExperimentSpec spec;
    spec.baseConfig = small_config();
    spec.trials = 1;
    spec.outputPath = "/nonexistent/dir/out.csv";
    try {
        run_and_write(spec);
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
}

TEST_CASE("beampattern rows, mainlobe and clutter notches") {
    BeampatternSpec spec;
    spec.config = small_config();
    spec.config.mt = spec.config.mr = 16;
    spec.clutterPowersDb = {0, 20, 40};
    spec.outputPath = temp_path("bp.csv");
    const auto rows = emit_beampattern(spec);
    const int s = spec.config.angularSamples;
    REQUIRE(rows.size() == static_cast<std::size_t>(3 * s));
    const double cell = 180.0 / (s - 1);
    std::vector<double> depth;
    for (int k = 0; k < 3; ++k) {
        const auto first = rows.begin() + k * s;
        const auto peak = std::max_element(first, first + s, [](const auto& a, const auto& b) { return a.powerDb < b.powerDb; });
        CHECK(std::abs(peak->angleDeg - 10.0) <= cell);
        double worst = -INFINITY;
        for (auto it = first; it != first + s; ++it)
            if (std::abs(it->angleDeg + 30.0) < 1e-9 || std::abs(it->angleDeg - 60.0) < 1e-9) worst = std::max(worst, it->powerDb);
        depth.push_back(-worst);
    }
    CHECK(depth[1] >= depth[0]);
    CHECK(depth[2] >= depth[1]);
    CHECK(depth[1] >= 30.0);
    const std::string csv = slurp(spec.outputPath);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3 * s + 1);
    std::remove(spec.outputPath.c_str());
}
