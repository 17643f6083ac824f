#pragma once

#include "covisac/model.hpp"

#include <cstdint>
#include <vector>

namespace covisac {

struct HbfOptions {
    int maxOuterIters = 30;
    int maxInnerIters = 300;
    double residualTol = 1e-4;  // consensus residual relative to max(1, |Y|_F)
    // Extra inner sweeps at the final filter, run while above this residual.
    double polishTol = 1e-7;
    int polishMaxIters = 300;
    double rateTol = 1e-4;
    double rho1 = 5.0, rho2 = 5.0, rho3 = 5.0, rho4 = 5.0;  // initial penalties
    int stagnationWindow = 20;
    double rhoGrowth = 1.5;
    bool weightedObjective = true;  // scale the Bob MSE term by its WMMSE weight
    int ccdMaxSweeps = 100;
    double ccdTol = 1e-6;
    bool sensing = true;
    bool robust = false;
    int robustSamples = 50;
    // Worst-case channels added as samples while their leakage exceeds cutTol (Gamma-1) sigma_W^2.
    int robustCuts = 10;  // rounds after the outer loop
    double cutTol = 1e-3;
    // Rounds that tighten the covert bound by the leftover worst-case leakage.
    int marginRounds = 5;
    std::uint64_t seed = 1;  // analog phases and robust channel samples

    void validate() const;
};

// Augmented-Lagrangian iterate. Nominal mode keeps one G and one Z (gK, zK of
// size 1) and T_u for every overt user; robust mode keeps one G_k per sampled
// Willie channel and T_u for the Carols only.
struct AlState {
    CMat y;
    std::vector<CMat> tU;
    std::vector<CMat> gK;
    CMat m;
    CMat vRf;
    CMat vD;
    CMat d;
    std::vector<CMat> phiU;
    std::vector<CMat> zK;
    CMat omega;
    double rho1 = 1.0, rho2 = 1.0, rho3 = 1.0, rho4 = 1.0;
    cd p{0.0, 0.0};
    double omegaW = 1.0;
    bool sensing = true;

    CMat product() const { return vRf * vD; }
};

CVec update_receive_filter_hbf(const CMat& vRf, const CMat& vD, const SensingScene& scene,
                               const SystemConfig& cfg);

struct WmmseScalars {
    cd p{0.0, 0.0};
    double omega = 1.0;
    double mse = 1.0;
};
WmmseScalars wmmse_scalars(const CMat& vRf, const CMat& vD, const ChannelSet& ch, const SystemConfig& cfg);
// Mean squared error of Bob's scalar decoder p applied to V.
double bob_mse(const CMat& v, cd p, const ChannelSet& ch, const SystemConfig& cfg);
// -omega E + ln omega + 1.
double wmmse_rate_nats(const WmmseScalars& s);

double al_value(const AlState& s, const ChannelSet& ch, const SystemConfig& cfg);

CMat step_y(const AlState& s, const ChannelSet& ch, const SystemConfig& cfg);
// u indexes s.tU and the overt user with the same index.
CMat step_t(const AlState& s, const ChannelSet& ch, const SystemConfig& cfg, int u);
// Projection of Y - Z_k for the Willie channel hW.
CMat step_g(const AlState& s, const CVec& hW, const SystemConfig& cfg, double gammaCap, std::size_t k);
CMat step_m(const AlState& s, const SensingScene& scene, const SystemConfig& cfg, const CVec& w);

struct CcdResult {
    CMat vRf;
    std::vector<double> objective;  // after each sweep, first entry is the start
};
// Cyclic per-entry update of the analog beamformer for min |target - V_RF V_D|_F^2.
CcdResult ccd_analog(const CMat& vRf, const CMat& vD, const CMat& target, int maxSweeps, double tol);
CMat step_vrf(const AlState& s, int maxSweeps = 100, double tol = 1e-6);
// Least squares fit of target by V_RF V_D; Tikhonov 1e-10 when V_RF is rank deficient.
CMat least_squares_digital(const CMat& vRf, const CMat& target, bool* regularized = nullptr);
CMat step_vd(const AlState& s, bool* regularized = nullptr);
void step_duals(AlState& s);

struct ConsensusResiduals {
    double d = 0.0, t = 0.0, g = 0.0, m = 0.0;
    double max() const;
};
ConsensusResiduals consensus_residuals(const AlState& s);

struct HbfOuterRecord {
    double covertRate = 0.0;
    int innerIterations = 0;
    double finalResidual = 0.0;    // relative
    double maxAlIncrease = 0.0;    // worst per-sweep increase at fixed scalars and duals
    bool innerConverged = false;
};

struct HbfResult {
    BeamformerSolution solution;
    PerformanceReport report;
    ConstraintAudit audit;
    std::vector<HbfOuterRecord> trace;
    HbfOuterRecord polish;
    double maxAlIncrease = 0.0;
    int robustCuts = 0;  // worst-case samples added
    int marginRounds = 0;  // covert bound tightenings
    double covertBackoff = 1.0;  // robust mode: scale applied to the Bob digital column
    bool tikhonovUsed = false;
};

// Initial state: random unit-modulus V_RF under seed, V_D fitted to MRT, auxiliaries at V_RF V_D.
AlState init_al_state(const ChannelSet& ch, const SystemConfig& cfg, const HbfOptions& opts);

HbfResult solve_hbf(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                    const HbfOptions& opts = {});

}  // namespace covisac
