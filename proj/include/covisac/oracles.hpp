#pragma once

#include "covisac/model.hpp"
#include "covisac/numerics.hpp"

#include <cstdint>

namespace covisac {

struct McEstimate {
    double pE = 1.0;
    double stdErr = 0.0;
    double falseAlarm = 0.0;
    double missedDetection = 0.0;
    bool degenerate = false;  // z == 1: no test to run, pE = 1 analytically
};

// Willie's Neyman-Pearson radiometer simulated on exponential power samples.
McEstimate mc_willie_detector(const HypothesisStats& stats, std::uint64_t trials, std::uint64_t seed);

// D(P0 || P1) of the two exponential power laws by adaptive quadrature.
double numeric_kl(double kappa0, double kappa1);

struct BruteQcqp {
    double objective = 0.0;  // min |x - target|^2 found
    CVec x;
};

// Multistart descent over the unit sphere of directions d, with the step
// along d fixed to the first crossing of the constraint surface.
BruteQcqp brute_qcqp(const QcqpOneProblem& p, int restarts, std::uint64_t seed);

// Minimum over uniform samples of the Willie ball of
// (Gamma-1)(sum_P |h^H v_i|^2 + sigma_W^2) - |h^H v_B|^2.
double ball_sample_verifier(const CMat& v, const ChannelSet& ch, const SystemConfig& cfg,
                            double gammaCap, int samples, std::uint64_t seed);

}  // namespace covisac
