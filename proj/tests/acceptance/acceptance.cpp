// Acceptance suite: one PASS/FAIL line per criterion.
//   covisac_acceptance            all criteria
//   covisac_acceptance 1 3 8      a subset
#include "covisac/harness.hpp"
#include "covisac/oracles.hpp"
#include "test_util.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace covisac;
using testutil::random_cmat;
using testutil::random_cvec;
using testutil::random_hermitian;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

class Notes {
public:
    template <class... T>
    void add(const T&... parts) {
        if (!first_) s_ << "; ";
        first_ = false;
        (s_ << ... << parts);
    }
    std::string str() const { return s_.str(); }

private:
    std::ostringstream s_;
    bool first_ = true;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Desk-scale defaults: 16 transmit/receive antennas, two Carols.
SystemConfig desk_config() {
    SystemConfig c;
    c.mt = 16;
    c.mr = 16;
    c.uCarols = 2;
    return c;
}

// Mean covert rate with infeasible trials counted as zero.
double zero_filled(const ResultRow& r) {
    if (r.trialCount == r.infeasibleCount) return 0.0;
    return r.covertRateMean * (r.trialCount - r.infeasibleCount) / r.trialCount;
}

// a <= b up to the outer-loop rate tolerance.
bool not_above(double a, double b, double relTol) { return a <= b + relTol * std::max(1.0, std::abs(b)); }

const ResultRow& find_row(const std::vector<ResultRow>& rows, Scheme s, double value) {
    for (const auto& r : rows)
        if (r.scheme == s && r.sweepValue == value) return r;
    throw Error(ErrorCode::InvalidConfig, "missing result row");
}

// ---- 1 ---------------------------------------------------------------------

Verdict covertness_calculus() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> k0(0.1, 2.0), z(1.05, 5.0);
    Verdict v;
    double worstSigma = 0.0, worstKl = 0.0;
    for (int i = 0; i < 20; ++i) {
        HypothesisStats s;
        s.kappa0 = k0(rng);
        s.kappa1 = s.kappa0 * z(rng);
        s.z = s.kappa1 / s.kappa0;
        const McEstimate mc = mc_willie_detector(s, 1000000, 1000 + i);
        const double sigmas = std::abs(detection_error_exact(s) - mc.pE) / mc.stdErr;
        const double klErr = std::abs(kl_divergence(s).divergence - numeric_kl(s.kappa0, s.kappa1));
        worstSigma = std::max(worstSigma, sigmas);
        worstKl = std::max(worstKl, klErr);
        v.pass = v.pass && sigmas <= 3.0 && klErr <= 1e-6;
    }
    const double secs = seconds_since(t0);
    v.pass = v.pass && secs < 30.0;
    Notes n;
    n.add("worst MC deviation ", worstSigma, " se");
    n.add("worst KL error ", worstKl);
    n.add("runtime ", secs, " s");
    v.detail = n.str();
    return v;
}

// ---- 2 ---------------------------------------------------------------------

Verdict pinsker_consistency() {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> logK0(-3.0, 3.0), logZ(1e-6, std::log(100.0));
    Verdict v;
    int bad = 0;
    double tightest = INFINITY;
    for (int i = 0; i < 10000; ++i) {
        HypothesisStats s;
        s.kappa0 = std::exp(logK0(rng));
        s.z = std::exp(logZ(rng));
        s.kappa1 = s.kappa0 * s.z;
        const double gap = detection_error_exact(s) - kl_divergence(s).pEBound;
        tightest = std::min(tightest, gap);
        if (gap < 0) ++bad;
    }
    v.pass = bad == 0;
    Notes n;
    n.add("violations ", bad, " of 10000");
    n.add("smallest pE - bound ", tightest);
    v.detail = n.str();
    return v;
}

// ---- 3 ---------------------------------------------------------------------

Verdict qcqp_correctness() {
    std::mt19937_64 rng(303);
    Verdict v;
    double worstObj = 0.0, worstKkt = 0.0;
    int counts[3] = {0, 0, 0};
    for (int t = 0; t < 100; ++t) {
        QcqpOneProblem p;
        p.target = random_cvec(6, rng);
        switch (t % 3) {
            case 0: {  // target already feasible
                p.quad = random_hermitian(6, rng);
                p.bound = p.target.dot(p.quad * p.target).real() + 0.5;
                break;
            }
            case 1: {  // PSD quadric with the target outside
                const CMat a = random_cmat(6, 6, rng);
                p.quad = a * a.adjoint();
                p.target *= 2.0;
                p.bound = 0.25 * p.target.dot(p.quad * p.target).real();
                break;
            }
            default: {  // indefinite quadric
                p.quad = random_hermitian(6, rng);
                p.target *= 2.0;
                p.bound = (t % 2 == 0) ? 0.5 : -0.5;
                const double qt = p.target.dot(p.quad * p.target).real();
                if (qt <= p.bound) p.bound = qt - 1.0;
                break;
            }
        }
        const QcqpOneResult r = solve_qcqp1(p);
        const QcqpKkt k = qcqp1_kkt(p, r);
        const BruteQcqp b = brute_qcqp(p, 60, 5000 + t);
        const double objErr = std::abs((r.x - p.target).squaredNorm() - b.objective);
        const double kkt = std::max({k.stationarity, k.complementarity, k.violation});
        worstObj = std::max(worstObj, objErr);
        worstKkt = std::max(worstKkt, kkt);
        v.pass = v.pass && objErr <= 1e-6 && kkt <= 1e-8;
        ++counts[t % 3];
    }
    Notes n;
    n.add("instances feasible-target/active/indefinite ", counts[0], "/", counts[1], "/", counts[2]);
    n.add("worst objective gap ", worstObj);
    n.add("worst KKT residual ", worstKkt);
    v.detail = n.str();
    return v;
}

// ---- 4 ---------------------------------------------------------------------

Verdict sdr_optimality() {
    const auto t0 = std::chrono::steady_clock::now();
    const SystemConfig cfg = desk_config();
    Verdict v;
    double worstRank = 0.0, worstSlack = INFINITY;
    for (std::uint64_t seed : {1, 2, 3}) {
        const ChannelSet ch = draw_channels(cfg, 3, 0.0, trial_seed(1, static_cast<int>(seed)));
        const FdbfResult r = solve_fdbf(ch, default_scene(seed), cfg);
        double rank = r.maxRank1Ratio;
        for (const auto& it : r.trace) rank = std::max(rank, it.maxRank1Ratio);
        worstRank = std::max(worstRank, rank);
        worstSlack = std::min(worstSlack, r.audit.minSlack());
    }
    const double secs = seconds_since(t0);
    v.pass = worstRank <= 1e-6 && worstSlack >= -1e-6 && secs < 300.0;
    Notes n;
    n.add("3 instances");
    n.add("worst rank-one ratio ", worstRank);
    n.add("min audit slack ", worstSlack);
    n.add("runtime ", secs, " s");
    v.detail = n.str();
    return v;
}

// ---- 5 ---------------------------------------------------------------------

Verdict qos_trend() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec spec;
    spec.baseConfig = desk_config();
    spec.sweepVariable = SweepVar::Qos;
    spec.sweepValues = {1, 2, 3, 4, 5, 6};
    spec.schemes = {Scheme::FDBF, Scheme::HBF, Scheme::ZF, Scheme::MRT};
    spec.trials = 20;
    const auto rows = run_experiment(spec);
    const double tol = HbfOptions{}.rateTol;
    Verdict v;
    Notes n;
    for (Scheme s : {Scheme::FDBF, Scheme::HBF}) {
        double prev = INFINITY;
        for (double q : spec.sweepValues) {
            const double r = zero_filled(find_row(rows, s, q));
            if (!not_above(r, prev, tol)) {
                v.pass = false;
                n.add(to_string(s), " rises at qos ", q);
            }
            prev = r;
            for (Scheme b : {Scheme::ZF, Scheme::MRT}) {
                const double rb = zero_filled(find_row(rows, b, q));
                if (!not_above(rb, r, tol)) {
                    v.pass = false;
                    n.add(to_string(s), " below ", to_string(b), " at qos ", q, " (", r, " < ", rb, ")");
                }
            }
        }
    }
    for (Scheme s : spec.schemes) {
        std::ostringstream line;
        line << to_string(s) << " [";
        for (double q : spec.sweepValues) line << (q > 1 ? " " : "") << zero_filled(find_row(rows, s, q));
        line << "]";
        n.add(line.str());
    }
    const double secs = seconds_since(t0);
    v.pass = v.pass && secs < 1800.0;
    n.add("runtime ", secs, " s");
    v.detail = n.str();
    return v;
}

// ---- 6 ---------------------------------------------------------------------

Verdict rf_chain_trend() {
    ExperimentSpec spec;
    spec.baseConfig = desk_config();
    spec.sweepVariable = SweepVar::RfChains;
    spec.sweepValues = {4, 6, 8, 10, 12, 14, 16};
    spec.schemes = {Scheme::FDBF, Scheme::HBF};
    spec.trials = 20;
    const auto rows = run_experiment(spec);
    const double tol = HbfOptions{}.rateTol;
    Verdict v;
    Notes n;
    double prev = -INFINITY;
    std::ostringstream line;
    line << "HBF [";
    for (double nt : spec.sweepValues) {
        const double r = zero_filled(find_row(rows, Scheme::HBF, nt));
        line << (nt > 4 ? " " : "") << r;
        if (!not_above(prev, r, tol)) {
            v.pass = false;
            n.add("HBF falls at N_t = ", nt);
        }
        prev = r;
    }
    line << "]";
    const double fd = zero_filled(find_row(rows, Scheme::FDBF, 16));
    const double ratio = prev / fd;
    v.pass = v.pass && ratio >= 0.95;
    n.add(line.str());
    n.add("HBF/FDBF at N_t = M_t: ", ratio);
    v.detail = n.str();
    return v;
}

// ---- 7 ---------------------------------------------------------------------

Verdict sensing_trend() {
    ExperimentSpec spec;
    spec.sweepVariable = SweepVar::Gamma;
    spec.sweepValues = {10, 11, 12};
    spec.schemes = {Scheme::FDBF, Scheme::ZF, Scheme::MRT};
    spec.trials = 20;
    const auto rows = run_experiment(spec);
    Verdict v;
    Notes n;
    const int fdInfeasible = find_row(rows, Scheme::FDBF, 10).infeasibleCount;
    v.pass = fdInfeasible == 0;
    n.add("FDBF infeasible at 10 dB: ", fdInfeasible);
    for (Scheme b : {Scheme::ZF, Scheme::MRT})
        for (double g : {11.0, 12.0}) {
            const int inf = find_row(rows, b, g).infeasibleCount;
            v.pass = v.pass && inf > 0;
            n.add(to_string(b), " infeasible at ", g, " dB: ", inf, "/", spec.trials);
        }

    const SystemConfig cfg;
    const SensingScene scene = default_scene(1, 20.0);
    const ChannelSet ch = draw_channels(cfg, 3, 0.0, 1);
    const TrialOutcome t = run_scheme(Scheme::FDBF, ch, scene, cfg, 1);
    if (!t.feasible) {
        v.pass = false;
        n.add("beampattern design infeasible");
        v.detail = n.str();
        return v;
    }
    const auto& bp = t.report.beampattern;
    const double cell = 180.0 / (cfg.angularSamples - 1);
    const auto peak = std::max_element(bp.begin(), bp.end(), [](const auto& a, const auto& b) { return a.powerDb < b.powerDb; });
    const double peakOff = std::abs(peak->angleDeg - rad_to_deg(scene.targetAngle));
    double notch = INFINITY;
    for (const auto& c : scene.clutters) {
        const double deg = rad_to_deg(c.angle);
        const auto near = std::min_element(bp.begin(), bp.end(), [&](const auto& a, const auto& b) {
            return std::abs(a.angleDeg - deg) < std::abs(b.angleDeg - deg);
        });
        notch = std::min(notch, peak->powerDb - near->powerDb);
    }
    v.pass = v.pass && peakOff <= cell && notch >= 30.0;
    n.add("beampattern peak offset ", peakOff, " deg");
    n.add("clutter notch ", notch, " dB below peak");
    v.detail = n.str();
    return v;
}

// ---- 8 ---------------------------------------------------------------------

Verdict wmmse_identity() {
    SystemConfig cfg = desk_config();
    std::mt19937_64 rng(808);
    Verdict v;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const ChannelSet ch = draw_channels(cfg, 3, 0.0, 8000 + t);
        const CMat vRf = random_cmat(cfg.mt, cfg.nRf, rng);
        const CMat vD = random_cmat(cfg.nRf, cfg.streams(), rng) * 0.1;
        const WmmseScalars s = wmmse_scalars(vRf, vD, ch, cfg);
        const double sinr = sinr_and_rates(CMat(vRf * vD), ch, cfg).sinr[cfg.bob()];
        worst = std::max(worst, std::abs(wmmse_rate_nats(s) - std::log1p(sinr)));
    }
    v.pass = worst <= 1e-8;
    Notes n;
    n.add("worst |WMMSE value - ln(1+SINR)| ", worst);
    v.detail = n.str();
    return v;
}

// ---- 9 ---------------------------------------------------------------------

Verdict robustness() {
    const int trials = 5;
    const std::vector<double> radii{0.01, 0.1, 1.0};
    const double tol = FdbfOptions{}.rateTol;
    Verdict v;
    Notes n;
    double worstVerifier = INFINITY;
    for (double eps : {1e-3, 1e-2}) {
        SystemConfig cfg = desk_config();
        cfg.covertEps = eps;
        const double gammaCap = solve_gamma_cap(eps);
        std::vector<double> fd(radii.size(), 0.0), hb(radii.size(), 0.0);
        for (std::size_t i = 0; i < radii.size(); ++i) {
            for (int t = 0; t < trials; ++t) {
                const std::uint64_t seed = trial_seed(9, t);
                const ChannelSet ch = draw_channels(cfg, 3, std::sqrt(radii[i]), seed);
                const SensingScene scene = default_scene(seed);
                auto check = [&](const BeamformerSolution& sol) {
                    const double slack = ball_sample_verifier(sol.vFull, ch, cfg, gammaCap, 10000, seed + 1);
                    worstVerifier = std::min(worstVerifier, slack);
                    if (slack < -1e-6) v.pass = false;
                };
                FdbfOptions fo;
                fo.robust = true;
                try {
                    const FdbfResult r = solve_fdbf(ch, scene, cfg, fo);
                    if (r.audit.passes(1e-3)) fd[i] += r.report.covertRate / trials;
                    check(r.solution);
                } catch (const Error& e) {
                    if (!is_design_failure(e.code())) throw;
                }
                HbfOptions ho;
                ho.robust = true;
                ho.seed = seed;
                try {
                    const HbfResult r = solve_hbf(ch, scene, cfg, ho);
                    if (r.audit.passes(1e-3)) hb[i] += r.report.covertRate / trials;
                    check(r.solution);
                } catch (const Error& e) {
                    if (!is_design_failure(e.code())) throw;
                }
            }
        }
        for (std::size_t i = 1; i < radii.size(); ++i) {
            if (!not_above(fd[i], fd[i - 1], tol)) {
                v.pass = false;
                n.add("RobustFDBF rises at eps ", eps, " delta^2 ", radii[i]);
            }
            if (!not_above(hb[i], hb[i - 1], tol)) {
                v.pass = false;
                n.add("RobustHBF rises at eps ", eps, " delta^2 ", radii[i]);
            }
        }
        n.add("eps ", eps, " FDBF [", fd[0], " ", fd[1], " ", fd[2], "] HBF [", hb[0], " ", hb[1], " ", hb[2], "]");
    }
    n.add("min verifier slack ", worstVerifier);

    // Zero radius: the robust design against the nominal one over the same
    // constraint set (the robust design never serves Willie, so his QoS row is
    // dropped from the nominal design as well). The gap to the nominal design
    // that keeps Willie's QoS is printed for reference.
    const SystemConfig cfg = desk_config();
    double worstGap = 0.0, worstGapWithQos = 0.0;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    for (int t = 0; t < trials; ++t) {
        const std::uint64_t seed = trial_seed(9, t);
        const ChannelSet ch = draw_channels(cfg, 3, 0.0, seed);
        const SensingScene scene = default_scene(seed);
        FdbfOptions fo;
        const FdbfResult withQos = solve_fdbf(ch, scene, cfg, fo);
        fo.willieQos = false;
        const FdbfResult nominal = solve_fdbf(ch, scene, cfg, fo);
        fo.robust = true;
        const FdbfResult robust = solve_fdbf(ch, scene, cfg, fo);
        worstGap = std::max(worstGap, rel(robust.sdpObjective, nominal.sdpObjective));
        worstGapWithQos = std::max(worstGapWithQos, rel(robust.sdpObjective, withQos.sdpObjective));
    }
    v.pass = v.pass && worstGap <= 1e-6;
    n.add("zero-radius robust/nominal objective gap ", worstGap);
    n.add("gap to the design that also serves Willie ", worstGapWithQos);
    v.detail = n.str();
    return v;
}

// ---- 10 --------------------------------------------------------------------

Verdict al_contract() {
    SystemConfig cfg = desk_config();
    cfg.nRf = 6;
    Verdict v;
    double worstResidual = 0.0, worstIncrease = 0.0, worstSlack = INFINITY;
    int maxInner = 0, unconverged = 0;
    for (int t = 0; t < 10; ++t) {
        const std::uint64_t seed = trial_seed(10, t);
        const ChannelSet ch = draw_channels(cfg, 3, 0.0, seed);
        HbfOptions o;
        o.seed = seed;
        const HbfResult r = solve_hbf(ch, default_scene(seed), cfg, o);
        for (const auto& rec : r.trace) {
            worstResidual = std::max(worstResidual, rec.finalResidual);
            maxInner = std::max(maxInner, rec.innerIterations);
            if (!rec.innerConverged) ++unconverged;
        }
        worstIncrease = std::max(worstIncrease, r.maxAlIncrease);
        worstSlack = std::min(worstSlack, r.audit.minSlack());
    }
    v.pass = worstResidual < 1e-4 && maxInner <= 300 && unconverged == 0 && worstIncrease <= 1e-8 && worstSlack >= -1e-3;
    Notes n;
    n.add("worst final residual ", worstResidual);
    n.add("most inner iterations ", maxInner);
    n.add("unconverged inner loops ", unconverged);
    n.add("worst AL increase ", worstIncrease);
    n.add("min audit slack ", worstSlack);
    v.detail = n.str();
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"covisac acceptance suite"};
    std::vector<int> only;
    app.add_option("criteria", only, "criterion numbers to run (default all)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<Verdict()>> all{covertness_calculus, pinsker_consistency, qcqp_correctness,
                                                    sdr_optimality,      qos_trend,           rf_chain_trend,
                                                    sensing_trend,       wmmse_identity,      robustness,
                                                    al_contract};
    if (only.empty())
        for (int i = 1; i <= 10; ++i) only.push_back(i);

    int failed = 0;
    for (int id : only) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = all[id - 1]();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        if (!v.pass) ++failed;
        std::printf("criterion %2d %s  %s  [%.1f s]\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
