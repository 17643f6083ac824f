#pragma once

#include "covisac/baselines.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace covisac {

enum class Scheme { FDBF, HBF, ZF, MRT, TS, CommOnlyFD, CommOnlyHBF, RobustFDBF, RobustHBF };
enum class SweepVar { Qos, Eps, Gamma, Antennas, RfChains, Carols, DeltaSq };
enum class OutputFormat { Csv, Json };

const char* to_string(Scheme s);
const char* to_string(SweepVar v);
Scheme parse_scheme(const std::string& s);
SweepVar parse_sweep_var(const std::string& s);
OutputFormat parse_format(const std::string& s);

struct ExperimentSpec {
    SweepVar sweepVariable = SweepVar::Qos;
    std::vector<double> sweepValues{1.0};
    std::vector<Scheme> schemes{Scheme::FDBF};
    int trials = 20;
    SystemConfig baseConfig;
    std::string outputPath = "-";  // "-" writes to stdout
    OutputFormat format = OutputFormat::Csv;
    std::uint64_t seed = 1;
    int paths = 3;
    double clutterPowerDb = 20.0;
    double deltaSq = 0.0;  // Willie uncertainty when not swept
    double pfa = 1e-4;     // false-alarm rate behind the detection probability column
    bool timing = false;   // wall-clock column; off keeps the output reproducible
    int threads = 0;       // 0: hardware concurrency

    void validate() const;
};

// Config with the sweep variable set to value; deltaSq is updated for DeltaSq sweeps.
SystemConfig apply_sweep(const SystemConfig& base, SweepVar var, double value, double& deltaSq);

// Error codes a scheme reports for a design it cannot find.
bool is_design_failure(ErrorCode c);

// Channel seed of one trial; shared by every scheme and sweep point.
std::uint64_t trial_seed(std::uint64_t base, int trial);

// A design that throws a design failure, or misses the 1e-3 audit, is infeasible;
// two-stage hybrid runs stay feasible and carry the audit verdict.
struct TrialOutcome {
    bool feasible = false;
    bool auditPass = false;  // all constraints within 1e-3 relative
    PerformanceReport report;
    double runtimeMs = 0.0;
    std::string error;
};

TrialOutcome run_scheme(Scheme scheme, const ChannelSet& ch, const SensingScene& scene,
                        const SystemConfig& cfg, std::uint64_t seed, double pfa = 1e-4);

struct ResultRow {
    Scheme scheme = Scheme::FDBF;
    SweepVar sweepVar = SweepVar::Qos;
    double sweepValue = 0.0;
    int trialCount = 0;
    int infeasibleCount = 0;
    int auditFailCount = 0;  // feasible runs outside the 1e-3 audit tolerance (two-stage only)
    double covertRateMean = 0.0;
    double covertRateStd = 0.0;
    double overtRateMinMean = 0.0;
    double pEMean = 0.0;
    double klMean = 0.0;
    double sensingSinrDbMean = 0.0;
    double pdMean = 0.0;
    double runtimeMsMean = 0.0;
    double pfa = 1e-4;
};

ResultRow aggregate(Scheme scheme, SweepVar var, double value, const std::vector<TrialOutcome>& trials,
                    double pfa, bool timing);

// Rows ordered by Scheme enum order, then by sweep value order.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);
// Runs the experiment and writes it to spec.outputPath.
std::vector<ResultRow> run_and_write(const ExperimentSpec& spec);

struct BeampatternSpec {
    Scheme scheme = Scheme::FDBF;
    SystemConfig config;
    std::vector<double> clutterPowersDb{20.0};
    std::uint64_t seed = 1;
    int paths = 3;
    std::string outputPath = "-";
    OutputFormat format = OutputFormat::Csv;
};

struct BeampatternRow {
    Scheme scheme = Scheme::FDBF;
    double clutterPowerDb = 0.0;
    double angleDeg = 0.0;
    double powerDb = 0.0;
};

// angularSamples rows per clutter power.
std::vector<BeampatternRow> emit_beampattern(const BeampatternSpec& spec);

// ---- text I/O -------------------------------------------------------------

// Nine significant digits; "nan" for missing values.
std::string format_number(double v);

std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::string rows_to_json(const std::vector<ResultRow>& rows);
std::string beampattern_to_csv(const std::vector<BeampatternRow>& rows);
std::string beampattern_to_json(const std::vector<BeampatternRow>& rows);
// Writes text to path, or stdout for "-". Throws IoError.
void write_text(const std::string& path, const std::string& text);

// key = value lines; '#' starts a comment. Throws IoError / InvalidConfig.
std::map<std::string, std::string> read_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);
// Applies recognised keys; unknown keys throw InvalidConfig.
void apply_config(const std::map<std::string, std::string>& kv, ExperimentSpec& spec);
std::vector<double> parse_values(const std::string& s);
std::vector<Scheme> parse_schemes(const std::string& s);

}  // namespace covisac
