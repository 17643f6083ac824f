#pragma once

#include "covisac/common.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace covisac {

// Scenario scalars. UE indices: 0..U-1 are Carols, U is Willie, U+1 is Bob.
struct SystemConfig {
    int mt = 32;
    int mr = 32;
    int uCarols = 4;
    int nRf = 6;
    double totalPower = 1.0;
    double noiseCarol = db_to_lin(-5.0);
    double noiseWillie = db_to_lin(-5.0);
    double noiseBob = db_to_lin(-5.0);
    double noiseRadar = db_to_lin(-10.0);
    double qosCarol = 1.0;
    double qosWillie = 1.0;
    double covertEps = 1e-3;
    double sensingGammaDb = 10.0;
    int angularSamples = 181;
    std::uint64_t rngSeed = 1;

    int streams() const { return uCarols + 2; }
    int willie() const { return uCarols; }
    int bob() const { return uCarols + 1; }
    // Noise power and QoS target of UE k (k < U+2; Bob has no QoS target).
    double noise(int k) const;
    double qos(int k) const;
    double gamma() const { return db_to_lin(sensingGammaDb); }
    void validate() const;
};

struct Clutter {
    double angle = 0.0;
    cd amp{0.0, 0.0};
};

struct SensingScene {
    double targetAngle = 0.0;
    cd targetAmp{1.0, 0.0};
    std::vector<Clutter> clutters;

    void validate() const;
};

// Target at 10 deg with 5 dBW echo power, clutters at -30 and 60 deg with
// clutterPowerDb each; amplitude phases drawn uniformly from the seed.
SensingScene default_scene(std::uint64_t seed, double clutterPowerDb = 20.0);

struct Path {
    double angle = 0.0;
    cd gain{1.0, 0.0};
};
using Geometry = std::vector<std::vector<Path>>;

struct ChannelSet {
    CMat h;  // mt x (U+2)
    CVec willieEst;
    double willieRadius = 0.0;

    CVec column(int k) const { return h.col(k); }
};

enum class BeamKind { FullyDigital, Hybrid };

struct BeamformerSolution {
    BeamKind kind = BeamKind::FullyDigital;
    CMat vFull;
    CMat vRf;  // empty unless Hybrid
    CMat vD;   // empty unless Hybrid
    CVec w;
};

struct HypothesisStats {
    double kappa0 = 1.0;
    double kappa1 = 1.0;
    double z = 1.0;
    double gammaCap = 1.0;
};

struct KlResult {
    double divergence = 0.0;
    double pEBound = 1.0;
};

struct CommRates {
    std::vector<double> sinr;        // U+2 entries
    std::vector<double> overtRates;  // U+1 entries, bits/s/Hz
    double covertRate = 0.0;
};

struct BeampatternPoint {
    double angleDeg = 0.0;
    double powerDb = 0.0;
};

struct PerformanceReport {
    double covertRate = 0.0;
    std::vector<double> overtRates;
    double pE = 1.0;
    double pEBound = 1.0;
    double klDiv = 0.0;
    double sensingSinr = 0.0;
    double detectionProb = 0.0;
    double pfa = 1e-4;
    std::vector<BeampatternPoint> beampattern;
};

CVec steering(double angle, int n);
// A(theta) = a_r(theta) a_t(theta)^H, size mr x mt.
CMat steering_product(double angle, int mt, int mr);

ChannelSet generate_channels(const SystemConfig& cfg, const Geometry& geometry);
Geometry random_geometry(const SystemConfig& cfg, int paths, std::mt19937_64& rng);
// Uniform sample of the complex ball of the given radius in dimension n.
CVec sample_ball(int n, double radius, std::mt19937_64& rng);
// Draws geometry from seed; with radius > 0 the estimate is the true Willie
// channel displaced by a uniform point of the radius ball.
ChannelSet draw_channels(const SystemConfig& cfg, int paths, double willieRadius,
                         std::uint64_t seed);

CommRates sinr_and_rates(const CMat& v, const ChannelSet& ch, const SystemConfig& cfg);
CommRates sinr_and_rates(const BeamformerSolution& bf, const ChannelSet& ch,
                         const SystemConfig& cfg);

HypothesisStats hypothesis_stats(const CMat& v, const CVec& hW, const SystemConfig& cfg);
HypothesisStats hypothesis_stats(const BeamformerSolution& bf, const ChannelSet& ch,
                                 const SystemConfig& cfg);

double detection_error_exact(const HypothesisStats& stats);
KlResult kl_divergence(const HypothesisStats& stats);
double solve_gamma_cap(double eps);

double sensing_sinr(const CMat& v, const CVec& w, const SensingScene& scene,
                    const SystemConfig& cfg);
double sensing_sinr(const BeamformerSolution& bf, const SensingScene& scene,
                    const SystemConfig& cfg);
double detection_probability(double sinr, double pfa);

std::vector<BeampatternPoint> beampattern(const CMat& v, const CVec& w, const SystemConfig& cfg,
                                          int samples);
std::vector<BeampatternPoint> beampattern(const BeamformerSolution& bf, const SystemConfig& cfg,
                                          int samples);

PerformanceReport evaluate(const BeamformerSolution& bf, const ChannelSet& ch,
                           const SensingScene& scene, const SystemConfig& cfg,
                           double pfa = 1e-4);

// Relative slacks of the design constraints; negative means violated.
struct AuditEntry {
    std::string name;
    double slack = 0.0;
};

struct AuditOptions {
    bool sensing = true;
    bool willieQos = true;
    // Worst case of the covertness constraint over the uncertainty ball
    // around ch.willieEst instead of the true Willie channel.
    bool robustCovert = false;
};

struct ConstraintAudit {
    std::vector<AuditEntry> entries;
    double minSlack() const;
    bool passes(double tol) const { return minSlack() >= -tol; }
};

ConstraintAudit audit_constraints(const BeamformerSolution& bf, const ChannelSet& ch,
                                  const SensingScene& scene, const SystemConfig& cfg,
                                  const AuditOptions& opts = {});

// max over |d| <= radius of |(hHat+d)^H vB|^2 - (gammaCap-1)(sum_P |(hHat+d)^H v_i|^2 + sigma^2).
double worst_case_leakage(const CMat& v, const CVec& hHat, double radius, double gammaCap,
                          const SystemConfig& cfg);
// Willie channel in the ball attaining worst_case_leakage.
CVec worst_case_willie(const CMat& v, const CVec& hHat, double radius, double gammaCap,
                       const SystemConfig& cfg);

}  // namespace covisac
