#pragma once

#include "covisac/model.hpp"
#include "covisac/sdp.hpp"

#include <vector>

namespace covisac {

struct FdbfOptions {
    int maxOuterIters = 50;
    double rateTol = 1e-4;
    double rank1Tol = 1e-6;
    bool sensing = true;  // false gives the communication-only design
    bool robust = false;  // S-procedure covertness over the Willie uncertainty ball
    bool willieQos = true;  // nominal only; the robust design never serves Willie
    SdpOptions sdp;

    void validate() const;
};

// Which rows of the relaxed problem to emit.
struct SdrRows {
    bool sensing = true;
    bool willieQos = true;
};

struct FdbfIteration {
    double sdpObjective = 0.0;
    double covertRate = 0.0;
    double maxRank1Ratio = 0.0;
    double sensingSinr = 0.0;
    int sdpIterations = 0;
};

struct FdbfResult {
    BeamformerSolution solution;
    PerformanceReport report;
    ConstraintAudit audit;
    std::vector<FdbfIteration> trace;
    double sdpObjective = 0.0;
    double alpha = 0.0;
    double maxRank1Ratio = 0.0;
};

CVec update_receive_filter_fd(const CMat& vFull, const SensingScene& scene, const SystemConfig& cfg);

// Blocks 0..U+1 hold the scaled beam covariances, scalar 0 is the
// Charnes-Cooper variable alpha.
SdpProblem build_sdr_problem(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                             const CVec& w, double gammaCap, const SdrRows& rows = {});

// Robust variant: covertness as an LMI over the ball of radius ch.willieRadius
// around ch.willieEst, scalar 1 is the S-procedure multiplier. No Willie QoS
// row. At zero radius the scalar covertness row at willieEst is used instead.
SdpProblem build_robust_sdr_problem(const ChannelSet& ch, const SensingScene& scene,
                                    const SystemConfig& cfg, const CVec& w, double gammaCap,
                                    bool sensing = true);

// F_i = Fbar_i / alpha, top eigenvector per block, phase fixed so h_i^H v_i >= 0.
struct RecoveredBeams {
    CMat v;
    double maxRank1Ratio = 0.0;
};
RecoveredBeams recover_beams(const SdpSolution& sol, const ChannelSet& ch, const SystemConfig& cfg);

// Alternating receive-filter and SDR beamformer design. Throws
// InfeasibleDesign when the relaxed problem has no feasible point.
FdbfResult solve_fdbf(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                      const FdbfOptions& opts = {});

// Largest scale s in [0,1] of the Bob column keeping the worst-case leakage
// over the Willie ball nonpositive; returns s and rescales v in place.
double backoff_covert_beam(CMat& v, const CVec& hHat, double radius, double gammaCap,
                           const SystemConfig& cfg);

CMat mrt_init(const ChannelSet& ch, const SystemConfig& cfg);

}  // namespace covisac
