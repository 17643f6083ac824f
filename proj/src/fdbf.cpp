#include "covisac/fdbf.hpp"

#include "covisac/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace covisac {

void FdbfOptions::validate() const {
    if (maxOuterIters < 1) throw Error(ErrorCode::InvalidConfig, "maxOuterIters must be >= 1");
    if (!(rateTol > 0) || !(rank1Tol > 0)) throw Error(ErrorCode::InvalidConfig, "tolerances must be positive");
}

CVec update_receive_filter_fd(const CMat& vFull, const SensingScene& scene, const SystemConfig& cfg) {
    if (vFull.squaredNorm() == 0.0) throw Error(ErrorCode::InvalidConfig, "zero beamformer");
    auto echo_cov = [&](double angle) {
        const CMat av = steering_product(angle, cfg.mt, cfg.mr) * vFull;
        return CMat(av * av.adjoint());
    };
    const CMat xi = std::norm(scene.targetAmp) * echo_cov(scene.targetAngle);
    CMat lambda = cfg.noiseRadar * CMat::Identity(cfg.mr, cfg.mr);
    for (const auto& c : scene.clutters) lambda += std::norm(c.amp) * echo_cov(c.angle);
    return generalized_rayleigh_max(xi, lambda);
}

CMat mrt_init(const ChannelSet& ch, const SystemConfig& cfg) {
    const double n = ch.h.norm();
    if (n == 0.0) throw Error(ErrorCode::InvalidConfig, "zero channel matrix");
    return ch.h * (std::sqrt(cfg.totalPower) / n);
}

double backoff_covert_beam(CMat& v, const CVec& hHat, double radius, double gammaCap,
                           const SystemConfig& cfg) {
    auto leak = [&](double s) {
        CMat t = v;
        t.col(cfg.bob()) *= s;
        return worst_case_leakage(t, hHat, radius, gammaCap, cfg);
    };
    if (leak(1.0) <= 0.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    if (leak(0.0) > 0.0) throw Error(ErrorCode::InfeasibleDesign, "covertness fails with a silent Bob beam");
    for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        (leak(mid) <= 0.0 ? lo : hi) = mid;
    }
    v.col(cfg.bob()) *= lo;
    return lo;
}

namespace {

// gamma (sum_q |s_q|^2 |a_r^H w|^2 a_t a_t^H + alpha sigma_r^2 |w|^2) - |s_0|^2 |a_r^H w|^2 a_t a_t^H,
// summed over every block in [0, blocks).
LinearConstraint sensing_row(const SensingScene& scene, const SystemConfig& cfg, const CVec& w, int blocks) {
    LinearConstraint c;
    const double g = cfg.gamma();
    const double t0 = std::norm(scene.targetAmp) * std::norm(steering(scene.targetAngle, cfg.mr).dot(w));
    const CVec a0 = steering(scene.targetAngle, cfg.mt);
    for (int i = 0; i < blocks; ++i) {
        c.f.add_rank1(i, -t0, a0);
        for (const auto& q : scene.clutters) {
            const double tq = std::norm(q.amp) * std::norm(steering(q.angle, cfg.mr).dot(w));
            if (tq > 0) c.f.add_rank1(i, g * tq, steering(q.angle, cfg.mt));
        }
    }
    c.f.add_scalar(0, g * cfg.noiseRadar * w.squaredNorm());
    c.rhs = 0.0;
    return c;
}

LinearConstraint qos_row(const ChannelSet& ch, const SystemConfig& cfg, int u) {
    LinearConstraint c;
    const double t = std::exp2(cfg.qos(u));
    const CVec hu = ch.column(u);
    for (int i = 0; i < cfg.streams(); ++i) c.f.add_rank1(i, i == u ? -1.0 : t - 1.0, hu);
    c.f.add_scalar(0, (t - 1.0) * cfg.noise(u));
    c.rhs = 0.0;
    return c;
}

LinearConstraint covert_row(const CVec& hw, const SystemConfig& cfg, double gammaCap) {
    LinearConstraint c;
    c.f.add_rank1(cfg.bob(), 1.0, hw);
    for (int i = 0; i <= cfg.uCarols; ++i) c.f.add_rank1(i, 1.0 - gammaCap, hw);
    c.f.add_scalar(0, (1.0 - gammaCap) * cfg.noiseWillie);
    c.rhs = 0.0;
    return c;
}

// Everything except covertness and the QoS rows.
SdpProblem common_rows(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                       const CVec& w, bool sensing) {
    SdpProblem p;
    const int k = cfg.streams();
    p.blockDims.assign(k, cfg.mt);
    p.scalarVars = 1;
    p.sense = Sense::Maximize;
    const CVec hb = ch.column(cfg.bob());
    p.objective.add_rank1(cfg.bob(), 1.0, hb);

    LinearConstraint power;
    for (int i = 0; i < k; ++i) power.f.add_identity(i, 1.0);
    power.f.add_scalar(0, -cfg.totalPower);
    p.ineqConstraints.push_back(power);

    if (sensing) p.ineqConstraints.push_back(sensing_row(scene, cfg, w, k));

    LinearConstraint norm;
    for (int i = 0; i <= cfg.uCarols; ++i) norm.f.add_rank1(i, 1.0, hb);
    norm.f.add_scalar(0, cfg.noiseBob);
    norm.rhs = 1.0;
    p.eqConstraints.push_back(norm);
    return p;
}

}  // namespace

SdpProblem build_sdr_problem(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                             const CVec& w, double gammaCap, const SdrRows& rows) {
    if (gammaCap < 1.0) throw Error(ErrorCode::InvalidConfig, "Gamma must be >= 1");
    SdpProblem p = common_rows(ch, scene, cfg, w, rows.sensing);
    const int lastQos = rows.willieQos ? cfg.uCarols : cfg.uCarols - 1;
    for (int u = 0; u <= lastQos; ++u) p.ineqConstraints.push_back(qos_row(ch, cfg, u));
    p.ineqConstraints.push_back(covert_row(ch.column(cfg.willie()), cfg, gammaCap));
    return p;
}

SdpProblem build_robust_sdr_problem(const ChannelSet& ch, const SensingScene& scene,
                                    const SystemConfig& cfg, const CVec& w, double gammaCap,
                                    bool sensing) {
    if (gammaCap < 1.0) throw Error(ErrorCode::InvalidConfig, "Gamma must be >= 1");
    if (ch.willieRadius < 0) throw Error(ErrorCode::InvalidConfig, "negative uncertainty radius");
    SdpProblem p = common_rows(ch, scene, cfg, w, sensing);
    for (int u = 0; u < cfg.uCarols; ++u) p.ineqConstraints.push_back(qos_row(ch, cfg, u));
    if (ch.willieRadius == 0.0) {
        p.ineqConstraints.push_back(covert_row(ch.willieEst, cfg, gammaCap));
        return p;
    }
    // [-L + eta I, -L h; -h^H L, -h^H L h - alpha (1-Gamma) sigma^2 - eta delta^2] psd
    // written as -T^H L T + alpha K_alpha + eta K_eta with T = [I, h].
    const int n = cfg.mt;
    p.scalarVars = 2;
    LmiConstraint l;
    l.dim = n + 1;
    l.constant = CMat::Zero(n + 1, n + 1);
    CMat t(n, n + 1);
    t.leftCols(n) = CMat::Identity(n, n);
    t.col(n) = ch.willieEst;
    l.blocks.push_back({static_cast<std::size_t>(cfg.bob()), -1.0, t});
    for (int i = 0; i <= cfg.uCarols; ++i) l.blocks.push_back({static_cast<std::size_t>(i), gammaCap - 1.0, t});
    CMat ka = CMat::Zero(n + 1, n + 1);
    ka(n, n) = (gammaCap - 1.0) * cfg.noiseWillie;
    CMat ke = CMat::Identity(n + 1, n + 1);
    ke(n, n) = -ch.willieRadius * ch.willieRadius;
    l.scalars.emplace_back(0, ka);
    l.scalars.emplace_back(1, ke);
    p.lmis.push_back(l);
    return p;
}

RecoveredBeams recover_beams(const SdpSolution& sol, const ChannelSet& ch, const SystemConfig& cfg) {
    const double alpha = sol.scalars.at(0);
    if (!(alpha > 0)) throw Error(ErrorCode::InfeasibleDesign, "Charnes-Cooper variable is not positive");
    RecoveredBeams r;
    r.v = CMat::Zero(cfg.mt, cfg.streams());
    for (int i = 0; i < cfg.streams(); ++i) {
        const CMat f = sol.blocks[i] / alpha;
        if (f.trace().real() <= 1e-14 * cfg.totalPower) continue;
        const Rank1 e = rank1_extract(f);
        CVec v = e.v;
        const cd g = ch.column(i).dot(v);
        if (std::abs(g) > 0) v *= std::conj(g) / std::abs(g);
        r.v.col(i) = v;
        r.maxRank1Ratio = std::max(r.maxRank1Ratio, e.ratio);
    }
    return r;
}

FdbfResult solve_fdbf(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                      const FdbfOptions& opts) {
    cfg.validate();
    scene.validate();
    opts.validate();
    const double gammaCap = solve_gamma_cap(cfg.covertEps);
    const CVec matched = steering(scene.targetAngle, cfg.mr);

    auto solve_for = [&](const CVec& w) {
        const SdpProblem p = opts.robust ? build_robust_sdr_problem(ch, scene, cfg, w, gammaCap, opts.sensing)
                                         : build_sdr_problem(ch, scene, cfg, w, gammaCap, {opts.sensing, opts.willieQos});
        return solve_sdp(p, opts.sdp);
    };

    FdbfResult res;
    CMat v = mrt_init(ch, cfg);
    CVec w = opts.sensing ? update_receive_filter_fd(v, scene, cfg) : matched;
    SdpSolution sol = solve_for(w);
    if (sol.status != SdpStatus::Optimal && opts.sensing) {
        // the MRT start may aim the filter badly; the matched filter is the fallback start
        w = matched;
        sol = solve_for(w);
    }
    if (sol.status != SdpStatus::Optimal)
        throw Error(ErrorCode::InfeasibleDesign, std::string("relaxed problem ") + to_string(sol.status));

    double prevRate = -1.0;
    for (int it = 0;; ++it) {
        const RecoveredBeams rb = recover_beams(sol, ch, cfg);
        v = rb.v;
        if (opts.robust) backoff_covert_beam(v, ch.willieEst, ch.willieRadius, gammaCap, cfg);
        FdbfIteration rec;
        rec.sdpObjective = sol.objective;
        rec.covertRate = sinr_and_rates(v, ch, cfg).covertRate;
        rec.maxRank1Ratio = rb.maxRank1Ratio;
        rec.sensingSinr = sensing_sinr(v, w, scene, cfg);
        rec.sdpIterations = sol.iterations;
        res.trace.push_back(rec);
        res.sdpObjective = sol.objective;
        res.alpha = sol.scalars[0];
        res.maxRank1Ratio = rb.maxRank1Ratio;
        res.solution.vFull = v;
        res.solution.w = w;

        const bool converged =
            prevRate >= 0 && std::abs(rec.covertRate - prevRate) <= opts.rateTol * std::max(prevRate, 1e-12);
        if (!opts.sensing || converged || it + 1 >= opts.maxOuterIters) break;
        prevRate = rec.covertRate;

        const CVec wNext = update_receive_filter_fd(v, scene, cfg);
        const SdpSolution next = solve_for(wNext);
        if (next.status != SdpStatus::Optimal) break;  // keep the last optimal pair
        w = wNext;
        sol = next;
    }

    res.solution.kind = BeamKind::FullyDigital;
    res.report = evaluate(res.solution, ch, scene, cfg);
    AuditOptions ao;
    ao.sensing = opts.sensing;
    ao.willieQos = opts.willieQos && !opts.robust;
    ao.robustCovert = opts.robust;
    res.audit = audit_constraints(res.solution, ch, scene, cfg, ao);
    return res;
}

}  // namespace covisac
