#include "covisac/model.hpp"

#include "covisac/numerics.hpp"

#include <algorithm>
#include <limits>

namespace covisac {

double SystemConfig::noise(int k) const {
    if (k < uCarols) return noiseCarol;
    if (k == uCarols) return noiseWillie;
    return noiseBob;
}

double SystemConfig::qos(int k) const {
    if (k < uCarols) return qosCarol;
    if (k == uCarols) return qosWillie;
    return 0.0;
}

void SystemConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (mt < 1 || mr < 1) fail("antenna counts must be positive");
    if (nRf < 1 || nRf > mt) fail("nRf must lie in [1, mt]");
    if (uCarols < 0) fail("uCarols must be nonnegative");
    if (!(totalPower > 0 && noiseCarol > 0 && noiseWillie > 0 && noiseBob > 0 && noiseRadar > 0))
        fail("powers must be positive");
    if (!(covertEps > 0 && covertEps < 1)) fail("covertEps must lie in (0,1)");
    if (qosCarol < 0 || qosWillie < 0) fail("QoS targets must be nonnegative");
    if (angularSamples < 2) fail("angularSamples must be at least 2");
}

void SensingScene::validate() const {
    const double lim = kPi / 2 + 1e-12;
    if (std::abs(targetAngle) > lim) throw Error(ErrorCode::InvalidConfig, "target angle out of range");
    for (const auto& c : clutters)
        if (std::abs(c.angle) > lim) throw Error(ErrorCode::InvalidConfig, "clutter angle out of range");
}

SensingScene default_scene(std::uint64_t seed, double clutterPowerDb) {
    std::mt19937_64 rng(seed ^ 0x5eedc0ffee123ULL);
    std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
    SensingScene s;
    s.targetAngle = deg_to_rad(10.0);
    s.targetAmp = std::polar(std::sqrt(db_to_lin(5.0)), phase(rng));
    for (double deg : {-30.0, 60.0}) {
        Clutter c;
        c.angle = deg_to_rad(deg);
        c.amp = std::polar(std::sqrt(db_to_lin(clutterPowerDb)), phase(rng));
        s.clutters.push_back(c);
    }
    return s;
}

CVec steering(double angle, int n) {
    CVec a(n);
    const double s = std::sin(angle);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n; ++k) a(k) = std::polar(scale, kPi * k * s);
    return a;
}

CMat steering_product(double angle, int mt, int mr) {
    return steering(angle, mr) * steering(angle, mt).adjoint();
}

ChannelSet generate_channels(const SystemConfig& cfg, const Geometry& geometry) {
    const int k = cfg.streams();
    if (static_cast<int>(geometry.size()) != k)
        throw Error(ErrorCode::InvalidGeometry, "geometry must list U+2 users");
    ChannelSet ch;
    ch.h = CMat::Zero(cfg.mt, k);
    const double root = std::sqrt(static_cast<double>(cfg.mt));
    for (int u = 0; u < k; ++u) {
        if (geometry[u].empty()) throw Error(ErrorCode::InvalidGeometry, "user without paths");
        for (const auto& p : geometry[u]) ch.h.col(u) += p.gain * root * steering(p.angle, cfg.mt);
    }
    ch.willieEst = ch.h.col(cfg.willie());
    ch.willieRadius = 0.0;
    return ch;
}

Geometry random_geometry(const SystemConfig& cfg, int paths, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ang(-kPi / 2, kPi / 2);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    Geometry g(cfg.streams());
    for (auto& user : g) {
        for (int l = 0; l < paths; ++l) {
            Path p;
            p.angle = ang(rng);
            p.gain = cd(gauss(rng), gauss(rng));
            user.push_back(p);
        }
    }
    return g;
}

CVec sample_ball(int n, double radius, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    CVec d(n);
    for (int i = 0; i < n; ++i) d(i) = cd(gauss(rng), gauss(rng));
    const double r = radius * std::pow(unif(rng), 1.0 / (2.0 * n));
    return d * (r / d.norm());
}

ChannelSet draw_channels(const SystemConfig& cfg, int paths, double willieRadius,
                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ChannelSet ch = generate_channels(cfg, random_geometry(cfg, paths, rng));
    ch.willieRadius = willieRadius;
    if (willieRadius > 0) ch.willieEst = ch.h.col(cfg.willie()) + sample_ball(cfg.mt, willieRadius, rng);
    return ch;
}

CommRates sinr_and_rates(const CMat& v, const ChannelSet& ch, const SystemConfig& cfg) {
    const int k = cfg.streams();
    const RMat gain = (ch.h.adjoint() * v).cwiseAbs2();
    CommRates r;
    r.sinr.resize(k);
    for (int u = 0; u < k; ++u) {
        const double interference = gain.row(u).sum() - gain(u, u);
        r.sinr[u] = gain(u, u) / (interference + cfg.noise(u));
    }
    for (int u = 0; u <= cfg.uCarols; ++u) r.overtRates.push_back(std::log2(1.0 + r.sinr[u]));
    r.covertRate = std::log2(1.0 + r.sinr[cfg.bob()]);
    return r;
}

CommRates sinr_and_rates(const BeamformerSolution& bf, const ChannelSet& ch, const SystemConfig& cfg) {
    return sinr_and_rates(bf.vFull, ch, cfg);
}

HypothesisStats hypothesis_stats(const CMat& v, const CVec& hW, const SystemConfig& cfg) {
    const RVec g = (hW.adjoint() * v).cwiseAbs2().transpose();
    HypothesisStats s;
    s.kappa0 = g.head(cfg.uCarols + 1).sum() + cfg.noiseWillie;
    s.kappa1 = s.kappa0 + g(cfg.bob());
    s.z = s.kappa1 / s.kappa0;
    s.gammaCap = solve_gamma_cap(cfg.covertEps);
    return s;
}

HypothesisStats hypothesis_stats(const BeamformerSolution& bf, const ChannelSet& ch,
                                 const SystemConfig& cfg) {
    return hypothesis_stats(bf.vFull, ch.column(cfg.willie()), cfg);
}

namespace {

void check_stats(const HypothesisStats& s) {
    if (!(s.kappa0 > 0) || !(s.kappa1 > 0)) throw Error(ErrorCode::InvalidStats, "nonpositive kappa");
    if (s.kappa1 < s.kappa0 * (1 - 1e-12)) throw Error(ErrorCode::InvalidStats, "kappa1 < kappa0");
}

// ln(1+d) - d/(1+d), accurate for small d.
double kl_of_excess(double d) {
    if (std::abs(d) < 1e-3) {
        double sum = 0.0, pw = d;
        for (int k = 2; k <= 10; ++k) {
            pw *= d;
            sum += ((k % 2 == 0) ? 1.0 : -1.0) * (k - 1.0) / k * pw;
        }
        return sum;
    }
    return std::log1p(d) - d / (1.0 + d);
}

}  // namespace

double detection_error_exact(const HypothesisStats& stats) {
    check_stats(stats);
    const double d = std::max(0.0, (stats.kappa1 - stats.kappa0) / stats.kappa0);
    if (d < 1e-12) return 1.0;
    const double l = std::log1p(d) / d;
    return 1.0 + std::exp(-(1.0 + d) * l) - std::exp(-l);
}

KlResult kl_divergence(const HypothesisStats& stats) {
    check_stats(stats);
    const double d = std::max(0.0, (stats.kappa1 - stats.kappa0) / stats.kappa0);
    KlResult r;
    r.divergence = d == 0.0 ? 0.0 : std::max(0.0, kl_of_excess(d));
    r.pEBound = 1.0 - std::sqrt(r.divergence / 2.0);
    return r;
}

double solve_gamma_cap(double eps) {
    if (!(eps > 0 && eps < 1)) throw Error(ErrorCode::InvalidConfig, "eps must lie in (0,1)");
    const double target = 2.0 * eps * eps;
    auto f = [&](double d) { return kl_of_excess(d) - target; };
    double hi = 1.0;
    while (f(hi) < 0) hi *= 2.0;
    return 1.0 + scalar_root(f, 0.0, hi, 1e-14 * std::max(1.0, target));
}

double sensing_sinr(const CMat& v, const CVec& w, const SensingScene& scene, const SystemConfig& cfg) {
    const double wn = w.squaredNorm();
    if (!(wn > 0)) throw Error(ErrorCode::InvalidFilter, "zero receive filter");
    auto echo = [&](double angle) {
        const double rx = std::norm(w.dot(steering(angle, cfg.mr)));
        const double tx = (steering(angle, cfg.mt).adjoint() * v).squaredNorm();
        return rx * tx;
    };
    const double num = std::norm(scene.targetAmp) * echo(scene.targetAngle);
    double den = cfg.noiseRadar * wn;
    for (const auto& c : scene.clutters) den += std::norm(c.amp) * echo(c.angle);
    return num / den;
}

double sensing_sinr(const BeamformerSolution& bf, const SensingScene& scene, const SystemConfig& cfg) {
    return sensing_sinr(bf.vFull, bf.w, scene, cfg);
}

double detection_probability(double sinr, double pfa) {
    if (!(pfa > 0 && pfa < 1)) throw Error(ErrorCode::InvalidConfig, "pfa must lie in (0,1)");
    return marcum_q1(std::sqrt(2.0 * std::max(0.0, sinr)), std::sqrt(-2.0 * std::log(pfa)));
}

std::vector<BeampatternPoint> beampattern(const CMat& v, const CVec& w, const SystemConfig& cfg,
                                          int samples) {
    if (samples < 2) throw Error(ErrorCode::InvalidConfig, "beampattern needs at least 2 samples");
    std::vector<BeampatternPoint> out(samples);
    std::vector<double> lin(samples);
    double peak = 0.0;
    for (int s = 0; s < samples; ++s) {
        const double deg = -90.0 + 180.0 * s / (samples - 1);
        const double th = deg_to_rad(deg);
        lin[s] = std::norm(w.dot(steering(th, cfg.mr))) * (steering(th, cfg.mt).adjoint() * v).squaredNorm();
        peak = std::max(peak, lin[s]);
        out[s].angleDeg = deg;
    }
    const double floor = std::numeric_limits<double>::min();
    for (int s = 0; s < samples; ++s)
        out[s].powerDb = peak > 0 ? lin_to_db(std::max(lin[s], floor) / peak) : 0.0;
    return out;
}

std::vector<BeampatternPoint> beampattern(const BeamformerSolution& bf, const SystemConfig& cfg,
                                          int samples) {
    return beampattern(bf.vFull, bf.w, cfg, samples);
}

PerformanceReport evaluate(const BeamformerSolution& bf, const ChannelSet& ch,
                           const SensingScene& scene, const SystemConfig& cfg, double pfa) {
    PerformanceReport rep;
    const CommRates rates = sinr_and_rates(bf, ch, cfg);
    rep.covertRate = rates.covertRate;
    rep.overtRates = rates.overtRates;
    const HypothesisStats st = hypothesis_stats(bf, ch, cfg);
    rep.pE = detection_error_exact(st);
    const KlResult kl = kl_divergence(st);
    rep.klDiv = kl.divergence;
    rep.pEBound = kl.pEBound;
    rep.sensingSinr = sensing_sinr(bf, scene, cfg);
    rep.pfa = pfa;
    rep.detectionProb = detection_probability(rep.sensingSinr, pfa);
    rep.beampattern = beampattern(bf, cfg, cfg.angularSamples);
    return rep;
}

double ConstraintAudit::minSlack() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) m = std::min(m, e.slack);
    return m;
}

namespace {

struct LeakageForm {
    CMat l;
    double centre = 0.0;
};

LeakageForm leakage_form(const CMat& v, const CVec& hHat, double gammaCap, const SystemConfig& cfg) {
    const int nOvert = cfg.uCarols + 1;
    LeakageForm f;
    f.l = v.col(cfg.bob()) * v.col(cfg.bob()).adjoint();
    f.l -= (gammaCap - 1.0) * v.leftCols(nOvert) * v.leftCols(nOvert).adjoint();
    f.centre = hHat.dot(f.l * hHat).real() - (gammaCap - 1.0) * cfg.noiseWillie;
    return f;
}

}  // namespace

double worst_case_leakage(const CMat& v, const CVec& hHat, double radius, double gammaCap,
                          const SystemConfig& cfg) {
    const LeakageForm f = leakage_form(v, hHat, gammaCap, cfg);
    if (radius <= 0) return f.centre;
    return f.centre - trust_region_min(-f.l, f.l * hHat, radius).value;
}

CVec worst_case_willie(const CMat& v, const CVec& hHat, double radius, double gammaCap,
                       const SystemConfig& cfg) {
    if (radius <= 0) return hHat;
    const LeakageForm f = leakage_form(v, hHat, gammaCap, cfg);
    return hHat + trust_region_min(-f.l, f.l * hHat, radius).x;
}

ConstraintAudit audit_constraints(const BeamformerSolution& bf, const ChannelSet& ch,
                                  const SensingScene& scene, const SystemConfig& cfg,
                                  const AuditOptions& opts) {
    ConstraintAudit a;
    const CMat& v = bf.vFull;
    a.entries.push_back({"power", 1.0 - v.squaredNorm() / cfg.totalPower});
    const CommRates rates = sinr_and_rates(v, ch, cfg);
    const int last = opts.willieQos ? cfg.uCarols : cfg.uCarols - 1;
    for (int u = 0; u <= last; ++u) {
        const double need = std::exp2(cfg.qos(u)) - 1.0;
        if (need <= 0) continue;
        const std::string name = u == cfg.uCarols ? "qos_willie" : "qos_carol_" + std::to_string(u);
        a.entries.push_back({name, (rates.sinr[u] - need) / need});
    }
    const double gammaCap = solve_gamma_cap(cfg.covertEps);
    if (opts.robustCovert) {
        const double worst = worst_case_leakage(v, ch.willieEst, ch.willieRadius, gammaCap, cfg);
        const HypothesisStats st = hypothesis_stats(v, ch.willieEst, cfg);
        a.entries.push_back({"covert_worst", -worst / (gammaCap * st.kappa0)});
    } else {
        const HypothesisStats st = hypothesis_stats(v, ch.column(cfg.willie()), cfg);
        a.entries.push_back({"covert", (gammaCap - st.z) / gammaCap});
    }
    if (opts.sensing) {
        const double g = cfg.gamma();
        a.entries.push_back({"sensing", (sensing_sinr(v, bf.w, scene, cfg) - g) / g});
    }
    return a;
}

}  // namespace covisac
