#pragma once

#include "covisac/fdbf.hpp"
#include "covisac/hbf.hpp"

#include <cstdint>
#include <vector>

namespace covisac {

// Fraction of the power budget reserved for Bob's beam.
struct PowerSplit {
    double deltaShare = 0.0;

    void validate() const;
};

enum class OvertScheme { ZF, MRT };
enum class Structure { FD, HBF };

const char* to_string(OvertScheme s);

// Overt beams for the Carols and Willie, columns 0..U, Frobenius norm sqrt(P(1-deltaShare)).
CMat zf_overt_beams(const ChannelSet& ch, const SystemConfig& cfg, const PowerSplit& split);
CMat mrt_overt_beams(const ChannelSet& ch, const SystemConfig& cfg, const PowerSplit& split);

struct BaselineOptions {
    int maxOuterIters = 50;  // receive filter / Bob beam alternation
    double rateTol = 1e-4;
    int gridPoints = 11;  // deltaShare grid on [0, maxShare] before the bisection
    int bisectionIters = 30;
    double maxShare = 0.99;
    double auditTol = 1e-6;
    SdpOptions sdp;

    void validate() const;
};

struct BaselineResult {
    BeamformerSolution solution;
    PerformanceReport report;
    ConstraintAudit audit;
    double deltaShare = 0.0;
    int evaluations = 0;          // deltaShare values tried
    std::vector<double> fitTrace;  // two-stage hybrid: fit objective per alternation
    double fitResidual = 0.0;      // two-stage hybrid: |V_RF V_D - V_FD|_F^2 / |V_FD|_F^2
};

// Bob beam for fixed overt beams vCw (mt x (U+1)): single-block relaxation of
// max |h_B^H v_B|^2 under Bob's power share, overt QoS, covertness and sensing,
// alternated with the receive filter. Returns false when no Bob beam is feasible.
struct BobBeam {
    CVec vB;
    CVec w;
    double rank1Ratio = 0.0;
};
bool optimize_bob_beam(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                       const CMat& vCw, double bobPower, const BaselineOptions& opts, BobBeam& out);

// Overt beams from the scheme, Bob beam optimized, deltaShare searched on a
// grid then bisected towards the feasibility edge. Throws InfeasibleDesign
// when no share passes the audit.
BaselineResult solve_baseline_covert(const ChannelSet& ch, const SensingScene& scene,
                                     const SystemConfig& cfg, OvertScheme scheme,
                                     const BaselineOptions& opts = {});

struct TsOptions {
    FdbfOptions fdbf;
    int maxAlternations = 200;
    double fitTol = 1e-8;  // stop when the relative fit objective changes less than this
    int ccdMaxSweeps = 100;
    double ccdTol = 1e-6;
    std::uint64_t seed = 1;
};

// Fully digital design, then the hybrid pair closest to it in Frobenius norm.
// Constraints are audited but not re-imposed.
BaselineResult solve_ts_hbf(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                            const TsOptions& opts = {});

// The design with the sensing constraint removed; w is the matched filter.
BaselineResult solve_comm_only(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                               Structure structure, const FdbfOptions& fdOpts = {},
                               const HbfOptions& hbfOpts = {});

}  // namespace covisac
