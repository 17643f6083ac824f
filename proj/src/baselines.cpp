#include "covisac/baselines.hpp"

#include "covisac/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace covisac {

void PowerSplit::validate() const {
    if (!(deltaShare >= 0.0 && deltaShare < 1.0))
        throw Error(ErrorCode::InvalidConfig, "deltaShare must lie in [0, 1)");
}

const char* to_string(OvertScheme s) { return s == OvertScheme::ZF ? "ZF" : "MRT"; }

void BaselineOptions::validate() const {
    auto fail = [](const char* m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (maxOuterIters < 1 || gridPoints < 2 || bisectionIters < 0) fail("bad iteration counts");
    if (!(rateTol > 0) || !(auditTol >= 0)) fail("tolerances must be positive");
    if (!(maxShare > 0 && maxShare < 1)) fail("maxShare must lie in (0, 1)");
}

namespace {

CMat overt_channels(const ChannelSet& ch, const SystemConfig& cfg) { return ch.h.leftCols(cfg.uCarols + 1); }

CMat scaled(const CMat& v, const SystemConfig& cfg, const PowerSplit& split) {
    const double n = v.norm();
    if (n == 0.0) throw Error(ErrorCode::InvalidConfig, "zero overt channel matrix");
    return v * (std::sqrt(cfg.totalPower * (1.0 - split.deltaShare)) / n);
}

CMat full_beams(const CMat& vCw, const CVec& vB) {
    CMat v(vCw.rows(), vCw.cols() + 1);
    v.leftCols(vCw.cols()) = vCw;
    v.col(vCw.cols()) = vB;
    return v;
}

// gamma sum_q |s_q|^2 |a_r^H w|^2 a_t a_t^H - |s_0|^2 |a_r^H w|^2 a_t a_t^H
CMat sensing_coefficient(const SensingScene& scene, const SystemConfig& cfg, const CVec& w) {
    auto term = [&](double angle, cd amp) {
        const CVec at = steering(angle, cfg.mt);
        return CMat(std::norm(amp) * std::norm(steering(angle, cfg.mr).dot(w)) * at * at.adjoint());
    };
    CMat j = -term(scene.targetAngle, scene.targetAmp);
    for (const auto& c : scene.clutters) j += cfg.gamma() * term(c.angle, c.amp);
    return j;
}

SdpProblem bob_problem(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                       const CMat& vCw, double bobPower, const CVec& w, double gammaCap) {
    SdpProblem p;
    p.blockDims = {cfg.mt};
    p.scalarVars = 0;
    p.sense = Sense::Maximize;
    p.objective.add_rank1(0, 1.0, ch.column(cfg.bob()));

    LinearConstraint power;
    power.f.add_identity(0, 1.0);
    power.rhs = bobPower;
    p.ineqConstraints.push_back(power);

    // |h_u^H v_u|^2 >= (t-1)(sum_{i != u} |h_u^H v_i|^2 + |h_u^H v_B|^2 + sigma^2)
    for (int u = 0; u <= cfg.uCarols; ++u) {
        const CVec hu = ch.column(u);
        const double t = std::exp2(cfg.qos(u)) - 1.0;
        double other = 0.0;
        for (int i = 0; i <= cfg.uCarols; ++i)
            if (i != u) other += std::norm(hu.dot(vCw.col(i)));
        LinearConstraint c;
        c.f.add_rank1(0, 1.0, hu);
        c.rhs = std::norm(hu.dot(vCw.col(u))) / t - other - cfg.noise(u);
        p.ineqConstraints.push_back(c);
    }

    const CVec hw = ch.column(cfg.willie());
    LinearConstraint cov;
    cov.f.add_rank1(0, 1.0, hw);
    cov.rhs = (gammaCap - 1.0) * ((hw.adjoint() * vCw).squaredNorm() + cfg.noiseWillie);
    p.ineqConstraints.push_back(cov);

    const CMat j = sensing_coefficient(scene, cfg, w);
    LinearConstraint sen;
    sen.f.add_dense(0, j);
    sen.rhs = -cfg.gamma() * cfg.noiseRadar * w.squaredNorm() - (vCw.adjoint() * j * vCw).trace().real();
    p.ineqConstraints.push_back(sen);
    return p;
}

}  // namespace

CMat zf_overt_beams(const ChannelSet& ch, const SystemConfig& cfg, const PowerSplit& split) {
    split.validate();
    const CMat h = overt_channels(ch, cfg);
    const CMat gram = h.adjoint() * h;
    const RVec ev = hermitian_eig(gram).values;
    if (!(ev.minCoeff() > 1e-12 * ev.maxCoeff()))
        throw Error(ErrorCode::RankDeficient, "overt channel matrix is rank deficient");
    return scaled(CMat(h * gram.ldlt().solve(CMat::Identity(gram.rows(), gram.cols()))), cfg, split);
}

CMat mrt_overt_beams(const ChannelSet& ch, const SystemConfig& cfg, const PowerSplit& split) {
    split.validate();
    return scaled(overt_channels(ch, cfg), cfg, split);
}

bool optimize_bob_beam(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                       const CMat& vCw, double bobPower, const BaselineOptions& opts, BobBeam& out) {
    const double gammaCap = solve_gamma_cap(cfg.covertEps);
    const CVec hb = ch.column(cfg.bob());
    const CVec matched = steering(scene.targetAngle, cfg.mr);
    if (bobPower <= 0.0) {
        out.vB = CVec::Zero(cfg.mt);
        out.w = update_receive_filter_fd(vCw, scene, cfg);
        out.rank1Ratio = 0.0;
        return true;
    }

    auto solve_for = [&](const CVec& w) { return solve_sdp(bob_problem(ch, scene, cfg, vCw, bobPower, w, gammaCap), opts.sdp); };
    auto extract = [&](const SdpSolution& sol) {
        const Rank1 r = rank1_extract(sol.blocks[0]);
        CVec v = r.v;
        const cd g = hb.dot(v);
        if (std::abs(g) > 0) v *= std::conj(g) / std::abs(g);
        out.rank1Ratio = r.ratio;
        return v;
    };

    CVec w = update_receive_filter_fd(full_beams(vCw, hb.normalized() * std::sqrt(bobPower)), scene, cfg);
    SdpSolution sol = solve_for(w);
    if (sol.status != SdpStatus::Optimal) {
        w = matched;
        sol = solve_for(w);
    }
    if (sol.status != SdpStatus::Optimal) return false;

    double prev = -1.0;
    for (int it = 0;; ++it) {
        out.vB = extract(sol);
        out.w = w;
        const double obj = sol.objective;
        if ((prev >= 0 && std::abs(obj - prev) <= opts.rateTol * std::max(prev, 1e-12)) || it + 1 >= opts.maxOuterIters)
            break;
        prev = obj;
        const CVec wNext = update_receive_filter_fd(full_beams(vCw, out.vB), scene, cfg);
        const SdpSolution next = solve_for(wNext);
        if (next.status != SdpStatus::Optimal) break;
        w = wNext;
        sol = next;
    }
    return true;
}

BaselineResult solve_baseline_covert(const ChannelSet& ch, const SensingScene& scene,
                                     const SystemConfig& cfg, OvertScheme scheme,
                                     const BaselineOptions& opts) {
    cfg.validate();
    scene.validate();
    opts.validate();
    std::optional<BaselineResult> best;
    int evaluations = 0;

    auto feasible_at = [&](double share) {
        ++evaluations;
        const PowerSplit split{share};
        const CMat vCw = scheme == OvertScheme::ZF ? zf_overt_beams(ch, cfg, split) : mrt_overt_beams(ch, cfg, split);
        BobBeam bob;
        if (!optimize_bob_beam(ch, scene, cfg, vCw, share * cfg.totalPower, opts, bob)) return false;
        BaselineResult r;
        r.solution.kind = BeamKind::FullyDigital;
        r.solution.vFull = full_beams(vCw, bob.vB);
        r.solution.w = bob.w;
        r.audit = audit_constraints(r.solution, ch, scene, cfg);
        if (!r.audit.passes(opts.auditTol)) return false;
        r.report = evaluate(r.solution, ch, scene, cfg);
        r.deltaShare = share;
        if (!best || r.report.covertRate > best->report.covertRate) best = r;
        return true;
    };

    // grid first, then bisect between the largest feasible share and its infeasible neighbour
    double lo = -1.0, hi = -1.0;
    for (int k = 0; k < opts.gridPoints; ++k) {
        const double share = opts.maxShare * k / (opts.gridPoints - 1);
        if (feasible_at(share)) {
            lo = share;
            hi = -1.0;
        } else if (lo >= 0 && hi < 0) {
            hi = share;
        }
    }
    if (lo >= 0 && hi > lo) {
        for (int it = 0; it < opts.bisectionIters; ++it) {
            const double mid = 0.5 * (lo + hi);
            (feasible_at(mid) ? lo : hi) = mid;
        }
    }
    if (!best) throw Error(ErrorCode::InfeasibleDesign, std::string(to_string(scheme)) + " baseline has no feasible power split");
    best->evaluations = evaluations;
    return *best;
}

BaselineResult solve_ts_hbf(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                            const TsOptions& opts) {
    const FdbfResult fd = solve_fdbf(ch, scene, cfg, opts.fdbf);
    const CMat& target = fd.solution.vFull;

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
    CMat vRf(cfg.mt, cfg.nRf);
    for (int n = 0; n < cfg.nRf; ++n)
        for (int m = 0; m < cfg.mt; ++m) vRf(m, n) = std::polar(1.0, phase(rng));
    CMat vD = least_squares_digital(vRf, target);

    BaselineResult res;
    const double scale = std::max(target.squaredNorm(), 1e-300);
    res.fitTrace.push_back((vRf * vD - target).squaredNorm() / scale);
    for (int it = 0; it < opts.maxAlternations; ++it) {
        vRf = ccd_analog(vRf, vD, target, opts.ccdMaxSweeps, opts.ccdTol).vRf;
        vD = least_squares_digital(vRf, target);
        const double obj = (vRf * vD - target).squaredNorm() / scale;
        const double prev = res.fitTrace.back();
        res.fitTrace.push_back(obj);
        if (prev - obj < opts.fitTol * std::max(prev, 1e-300)) break;
    }
    const double power = (vRf * vD).squaredNorm();
    if (power > cfg.totalPower) vD *= std::sqrt(cfg.totalPower / power);

    res.solution.kind = BeamKind::Hybrid;
    res.solution.vRf = vRf;
    res.solution.vD = vD;
    res.solution.vFull = vRf * vD;
    res.fitResidual = (res.solution.vFull - target).squaredNorm() / scale;
    res.solution.w = opts.fdbf.sensing ? update_receive_filter_fd(res.solution.vFull, scene, cfg)
                                       : steering(scene.targetAngle, cfg.mr);
    res.report = evaluate(res.solution, ch, scene, cfg);
    AuditOptions ao;
    ao.sensing = opts.fdbf.sensing;
    res.audit = audit_constraints(res.solution, ch, scene, cfg, ao);
    return res;
}

BaselineResult solve_comm_only(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                               Structure structure, const FdbfOptions& fdOpts, const HbfOptions& hbfOpts) {
    BaselineResult res;
    if (structure == Structure::FD) {
        FdbfOptions o = fdOpts;
        o.sensing = false;
        FdbfResult r = solve_fdbf(ch, scene, cfg, o);
        res.solution = std::move(r.solution);
        res.audit = std::move(r.audit);
    } else {
        HbfOptions o = hbfOpts;
        o.sensing = false;
        HbfResult r = solve_hbf(ch, scene, cfg, o);
        res.solution = std::move(r.solution);
        res.audit = std::move(r.audit);
    }
    res.solution.w = steering(scene.targetAngle, cfg.mr);
    res.report = evaluate(res.solution, ch, scene, cfg);
    return res;
}

}  // namespace covisac
