#include "covisac/hbf.hpp"

#include "covisac/fdbf.hpp"
#include "covisac/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace covisac {

void HbfOptions::validate() const {
    auto fail = [](const char* m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (maxOuterIters < 1 || maxInnerIters < 1) fail("iteration limits must be >= 1");
    if (!(residualTol > 0) || !(polishTol > 0) || !(rateTol > 0) || !(ccdTol > 0) || polishMaxIters < 0) fail("tolerances must be positive");
    if (!(rho1 > 0 && rho2 > 0 && rho3 > 0 && rho4 > 0)) fail("penalties must be positive");
    if (stagnationWindow < 1 || !(rhoGrowth >= 1.0)) fail("bad penalty schedule");
    if (robust && (robustSamples < 1 || robustCuts < 0 || marginRounds < 0 || !(cutTol > 0))) fail("bad robust sampling options");
}

namespace {

CVec as_vec(const CMat& m) { return Eigen::Map<const CVec>(m.data(), m.size()); }

CMat as_mat(const CVec& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const CMat>(v.data(), rows, cols);
}

CMat outer(const CVec& h) { return h * h.adjoint(); }

// Sensing quadratic per beam column: -|s0|^2 A0^H w w^H A0 + gamma sum_q |sq|^2 Aq^H w w^H Aq.
CMat sensing_block(const SensingScene& scene, const SystemConfig& cfg, const CVec& w) {
    auto term = [&](double angle, cd amp) {
        const double rx = std::norm(steering(angle, cfg.mr).dot(w));
        return CMat(std::norm(amp) * rx * outer(steering(angle, cfg.mt)));
    };
    CMat j = -term(scene.targetAngle, scene.targetAmp);
    for (const auto& c : scene.clutters) j += cfg.gamma() * term(c.angle, c.amp);
    return j;
}

QcqpOneSolver qos_solver(const ChannelSet& ch, const SystemConfig& cfg, int u) {
    const int k = cfg.streams();
    const double t = std::exp2(cfg.qos(u));
    const CMat s = outer(ch.column(u));
    std::vector<QcqpOneSolver::Block> blocks;
    if (u > 0) blocks.push_back({(t - 1.0) * s, u});
    blocks.push_back({-s, 1});
    if (k - u - 1 > 0) blocks.push_back({(t - 1.0) * s, k - u - 1});
    return QcqpOneSolver(blocks);
}

double qos_bound(const SystemConfig& cfg, int u) { return (1.0 - std::exp2(cfg.qos(u))) * cfg.noise(u); }

QcqpOneSolver covert_solver(const CVec& hW, const SystemConfig& cfg, double gammaCap) {
    const CMat s = outer(hW);
    return QcqpOneSolver(std::vector<QcqpOneSolver::Block>{{(1.0 - gammaCap) * s, cfg.uCarols + 1}, {s, 1}});
}

QcqpOneSolver sensing_solver(const SensingScene& scene, const SystemConfig& cfg, const CVec& w) {
    return QcqpOneSolver(std::vector<QcqpOneSolver::Block>{{sensing_block(scene, cfg, w), cfg.streams()}});
}

CMat project(const QcqpOneSolver& solver, const CMat& target, double bound) {
    return as_mat(solver.solve(as_vec(target), bound).x, target.rows(), target.cols());
}

CMat project_sensing(const QcqpOneSolver& solver, const CMat& target, double bound) {
    try {
        return project(solver, target, bound);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Infeasible)
            throw Error(ErrorCode::SensingInfeasible, "no beamformer meets the sensing target for this filter");
        throw;
    }
}

double sensing_bound(const SystemConfig& cfg, const CVec& w) { return -cfg.gamma() * cfg.noiseRadar * w.squaredNorm(); }

}  // namespace

CVec update_receive_filter_hbf(const CMat& vRf, const CMat& vD, const SensingScene& scene,
                               const SystemConfig& cfg) {
    return update_receive_filter_fd(vRf * vD, scene, cfg);
}

double bob_mse(const CMat& v, cd p, const ChannelSet& ch, const SystemConfig& cfg) {
    const CVec hb = ch.column(cfg.bob());
    const double total = (hb.adjoint() * v).squaredNorm() + cfg.noiseBob;
    const cd g = hb.dot(v.col(cfg.bob()));
    return std::norm(p) * total - 2.0 * (p * g).real() + 1.0;
}

WmmseScalars wmmse_scalars(const CMat& vRf, const CMat& vD, const ChannelSet& ch, const SystemConfig& cfg) {
    const CMat v = vRf * vD;
    const CVec hb = ch.column(cfg.bob());
    const double total = (hb.adjoint() * v).squaredNorm() + cfg.noiseBob;
    WmmseScalars s;
    s.p = std::conj(hb.dot(v.col(cfg.bob()))) / total;
    s.mse = bob_mse(v, s.p, ch, cfg);
    s.omega = 1.0 / s.mse;
    return s;
}

double wmmse_rate_nats(const WmmseScalars& s) { return -s.omega * s.mse + std::log(s.omega) + 1.0; }

double al_value(const AlState& s, const ChannelSet& ch, const SystemConfig& cfg) {
    const CVec hb = ch.column(cfg.bob());
    double v = s.omegaW * (std::norm(s.p) * (hb.adjoint() * s.y).squaredNorm() -
                           2.0 * (s.p * hb.dot(s.y.col(cfg.bob()))).real());
    v += 0.5 * s.rho1 * (s.y - s.product() + s.d).squaredNorm();
    for (std::size_t u = 0; u < s.tU.size(); ++u) v += 0.5 * s.rho2 * (s.tU[u] - s.y + s.phiU[u]).squaredNorm();
    for (std::size_t k = 0; k < s.gK.size(); ++k) v += 0.5 * s.rho3 * (s.gK[k] - s.y + s.zK[k]).squaredNorm();
    if (s.sensing) v += 0.5 * s.rho4 * (s.m - s.y + s.omega).squaredNorm();
    return v;
}

CMat step_y(const AlState& s, const ChannelSet& ch, const SystemConfig& cfg) {
    const int n = cfg.mt, k = cfg.streams();
    const double rhoSum = s.rho1 + s.rho2 * s.tU.size() + s.rho3 * s.gK.size() + (s.sensing ? s.rho4 : 0.0);
    CMat r = 0.5 * s.rho1 * (s.product() - s.d);
    for (std::size_t u = 0; u < s.tU.size(); ++u) r += 0.5 * s.rho2 * (s.tU[u] + s.phiU[u]);
    for (std::size_t j = 0; j < s.gK.size(); ++j) r += 0.5 * s.rho3 * (s.gK[j] + s.zK[j]);
    if (s.sensing) r += 0.5 * s.rho4 * (s.m + s.omega);
    const CVec hb = ch.column(cfg.bob());
    r.col(cfg.bob()) += s.omegaW * std::conj(s.p) * hb;

    // Per-column Hessian c I + e u u^H; substitute x = H^{1/2} y.
    const double c = 0.5 * rhoSum;
    const double hn = hb.squaredNorm();
    const double e = s.omegaW * std::norm(s.p) * hn;
    CMat uu = CMat::Zero(n, n);
    if (hn > 0) uu = outer(hb) / hn;
    const CMat eye = CMat::Identity(n, n);
    const CMat hInvSqrt = (eye - uu) / std::sqrt(c) + uu / std::sqrt(c + e);
    const CMat hInv = (eye - uu) / c + uu / (c + e);
    const QcqpOneSolver solver(std::vector<QcqpOneSolver::Block>{{hInv, k}});
    const CMat x = project(solver, hInvSqrt * r, cfg.totalPower);
    return hInvSqrt * x;
}

CMat step_t(const AlState& s, const ChannelSet& ch, const SystemConfig& cfg, int u) {
    return project(qos_solver(ch, cfg, u), s.y - s.phiU.at(u), qos_bound(cfg, u));
}

CMat step_g(const AlState& s, const CVec& hW, const SystemConfig& cfg, double gammaCap, std::size_t k) {
    return project(covert_solver(hW, cfg, gammaCap), s.y - s.zK.at(k), (gammaCap - 1.0) * cfg.noiseWillie);
}

CMat step_m(const AlState& s, const SensingScene& scene, const SystemConfig& cfg, const CVec& w) {
    return project_sensing(sensing_solver(scene, cfg, w), s.y - s.omega, sensing_bound(cfg, w));
}

CcdResult ccd_analog(const CMat& vRf, const CMat& vD, const CMat& target, int maxSweeps, double tol) {
    CcdResult r;
    r.vRf = vRf;
    CMat err = vRf * vD - target;
    r.objective.push_back(err.squaredNorm());
    const Eigen::Index rows = vRf.rows(), cols = vRf.cols();
    RVec rowNorm(cols);
    for (Eigen::Index n = 0; n < cols; ++n) rowNorm(n) = vD.row(n).squaredNorm();
    for (int sweep = 0; sweep < maxSweeps; ++sweep) {
        for (Eigen::Index m = 0; m < rows; ++m) {
            for (Eigen::Index n = 0; n < cols; ++n) {
                const cd cur = r.vRf(m, n);
                // Psi[m,n] = (E V_D^H)[m,n], minus the entry's own contribution
                const cd psi = std::conj(err.row(m).dot(vD.row(n)));
                const cd s = psi - cur * rowNorm(n);
                if (std::abs(s) == 0.0) continue;
                const cd next = -s / std::abs(s);
                err.row(m) += (next - cur) * vD.row(n);
                r.vRf(m, n) = next;
            }
        }
        err = r.vRf * vD - target;  // refresh to stop drift
        const double obj = err.squaredNorm();
        const double prev = r.objective.back();
        r.objective.push_back(obj);
        if (prev - obj <= tol * std::max(prev, 1e-300)) break;
    }
    return r;
}

CMat step_vrf(const AlState& s, int maxSweeps, double tol) {
    return ccd_analog(s.vRf, s.vD, s.y + s.d, maxSweeps, tol).vRf;
}

CMat least_squares_digital(const CMat& vRf, const CMat& target, bool* regularized) {
    const CMat gram = vRf.adjoint() * vRf;
    const RVec ev = hermitian_eig(gram).values;
    const double top = ev.maxCoeff();
    bool reg = !(ev.minCoeff() > 1e-10 * top);
    if (regularized) *regularized = reg;
    if (!reg) return gram.llt().solve(vRf.adjoint() * target);
    const CMat g = gram + 1e-10 * std::max(top, 1.0) * CMat::Identity(gram.rows(), gram.cols());
    return g.llt().solve(vRf.adjoint() * target);
}

CMat step_vd(const AlState& s, bool* regularized) { return least_squares_digital(s.vRf, s.y + s.d, regularized); }

void step_duals(AlState& s) {
    s.d += s.y - s.product();
    for (std::size_t u = 0; u < s.tU.size(); ++u) s.phiU[u] += s.tU[u] - s.y;
    for (std::size_t k = 0; k < s.gK.size(); ++k) s.zK[k] += s.gK[k] - s.y;
    if (s.sensing) s.omega += s.m - s.y;
}

double ConsensusResiduals::max() const { return std::max({d, t, g, m}); }

ConsensusResiduals consensus_residuals(const AlState& s) {
    ConsensusResiduals r;
    r.d = (s.y - s.product()).norm();
    for (const auto& t : s.tU) r.t = std::max(r.t, (t - s.y).norm());
    for (const auto& g : s.gK) r.g = std::max(r.g, (g - s.y).norm());
    if (s.sensing) r.m = (s.m - s.y).norm();
    return r;
}

AlState init_al_state(const ChannelSet& ch, const SystemConfig& cfg, const HbfOptions& opts) {
    AlState s;
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
    s.vRf.resize(cfg.mt, cfg.nRf);
    // column by column, so fewer RF chains see a prefix of the same phases
    for (int n = 0; n < cfg.nRf; ++n)
        for (int m = 0; m < cfg.mt; ++m) s.vRf(m, n) = std::polar(1.0, phase(rng));
    s.vD = least_squares_digital(s.vRf, mrt_init(ch, cfg));
    s.y = s.product();
    const int nT = opts.robust ? cfg.uCarols : cfg.uCarols + 1;
    const int nG = opts.robust && ch.willieRadius > 0 ? opts.robustSamples : 1;
    const CMat zero = CMat::Zero(cfg.mt, cfg.streams());
    s.tU.assign(nT, s.y);
    s.phiU.assign(nT, zero);
    s.gK.assign(nG, s.y);
    s.zK.assign(nG, zero);
    s.sensing = opts.sensing;
    s.m = s.y;
    s.d = zero;
    s.omega = zero;
    s.rho1 = opts.rho1;
    s.rho2 = opts.rho2;
    s.rho3 = opts.rho3;
    s.rho4 = opts.rho4;
    return s;
}

HbfResult solve_hbf(const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg,
                    const HbfOptions& opts) {
    cfg.validate();
    scene.validate();
    opts.validate();
    const double gammaCap = solve_gamma_cap(cfg.covertEps);
    AlState s = init_al_state(ch, cfg, opts);

    std::vector<CVec> willie;
    if (opts.robust && ch.willieRadius > 0) {
        std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
        for (int k = 0; k < opts.robustSamples; ++k)
            willie.push_back(ch.willieEst + sample_ball(cfg.mt, ch.willieRadius, rng));
    } else {
        willie.push_back(opts.robust ? ch.willieEst : ch.column(cfg.willie()));
    }
    std::vector<QcqpOneSolver> tSolvers, gSolvers;
    for (std::size_t u = 0; u < s.tU.size(); ++u) tSolvers.push_back(qos_solver(ch, cfg, static_cast<int>(u)));
    for (const auto& h : willie) gSolvers.push_back(covert_solver(h, cfg, gammaCap));
    const double gFull = (gammaCap - 1.0) * cfg.noiseWillie;
    double gBound = gFull;
    HbfResult res;
    // Robust mode: the worst Willie channel of the current design joins the samples
    // whenever its leakage exceeds cutTol (Gamma-1) sigma_W^2.
    const bool adaptive = opts.robust && ch.willieRadius > 0;
    const double leakTol = opts.cutTol * (gammaCap - 1.0) * cfg.noiseWillie;
    auto add_cut = [&] {
        const CMat v = s.product();
        if (worst_case_leakage(v, ch.willieEst, ch.willieRadius, gammaCap, cfg) <= leakTol) return false;
        const CVec h = worst_case_willie(v, ch.willieEst, ch.willieRadius, gammaCap, cfg);
        gSolvers.push_back(covert_solver(h, cfg, gammaCap));
        s.gK.push_back(project(gSolvers.back(), s.y, gBound));
        s.zK.push_back(CMat::Zero(cfg.mt, cfg.streams()));
        ++res.robustCuts;
        return true;
    };

    const CVec matched = steering(scene.targetAngle, cfg.mr);
    CVec w = matched;
    std::optional<QcqpOneSolver> mSolver;
    if (opts.sensing) mSolver.emplace(sensing_solver(scene, cfg, w));
    // Start the auxiliaries inside their sets so every sweep is a descent step.
    for (std::size_t u = 0; u < s.tU.size(); ++u)
        s.tU[u] = project(tSolvers[u], s.y, qos_bound(cfg, static_cast<int>(u)));
    for (std::size_t k = 0; k < s.gK.size(); ++k) s.gK[k] = project(gSolvers[k], s.y, gBound);
    if (opts.sensing) s.m = project_sensing(*mSolver, s.y, sensing_bound(cfg, w));

    // One inner AL run at the current filter; stops at relative residual tol.
    auto inner = [&](double tol, int maxIters) {
        HbfOuterRecord rec;
        std::vector<double> history;
        int lastBump = 0;
        for (int t = 0; t < maxIters; ++t) {
            const WmmseScalars sc = wmmse_scalars(s.vRf, s.vD, ch, cfg);
            s.p = sc.p;
            s.omegaW = opts.weightedObjective ? sc.omega : 1.0;
            const double before = al_value(s, ch, cfg);
            s.y = step_y(s, ch, cfg);
            for (std::size_t u = 0; u < s.tU.size(); ++u)
                s.tU[u] = project(tSolvers[u], s.y - s.phiU[u], qos_bound(cfg, static_cast<int>(u)));
            for (std::size_t k = 0; k < s.gK.size(); ++k) s.gK[k] = project(gSolvers[k], s.y - s.zK[k], gBound);
            if (opts.sensing) s.m = project_sensing(*mSolver, s.y - s.omega, sensing_bound(cfg, w));
            s.vRf = step_vrf(s, opts.ccdMaxSweeps, opts.ccdTol);
            bool reg = false;
            s.vD = step_vd(s, &reg);
            res.tikhonovUsed = res.tikhonovUsed || reg;
            const double after = al_value(s, ch, cfg);
            rec.maxAlIncrease = std::max(rec.maxAlIncrease, (after - before) / std::max(1.0, std::abs(before)));
            step_duals(s);

            const ConsensusResiduals cr = consensus_residuals(s);
            const double scale = std::max(1.0, s.y.norm());
            const double resid = cr.max() / scale;
            history.push_back(resid);
            rec.innerIterations = t + 1;
            rec.finalResidual = resid;
            if (resid <= tol) {
                rec.innerConverged = true;
                break;
            }
            // Stalled: raise the penalty of the blocks with the largest residuals.
            const int win = opts.stagnationWindow;
            if (t + 1 - lastBump >= win && static_cast<int>(history.size()) > win &&
                resid > 0.5 * history[history.size() - 1 - win]) {
                const double g = opts.rhoGrowth, lim = std::max(tol * scale, 0.5 * cr.max());
                // scaled duals carry a 1/rho factor
                if (cr.d > lim) {
                    s.rho1 *= g;
                    s.d /= g;
                }
                if (cr.t > lim) {
                    s.rho2 *= g;
                    for (auto& x : s.phiU) x /= g;
                }
                if (cr.g > lim) {
                    s.rho3 *= g;
                    for (auto& x : s.zK) x /= g;
                }
                if (cr.m > lim) {
                    s.rho4 *= g;
                    s.omega /= g;
                }
                lastBump = t + 1;
            }
        }
        rec.covertRate = sinr_and_rates(s.product(), ch, cfg).covertRate;
        res.maxAlIncrease = std::max(res.maxAlIncrease, rec.maxAlIncrease);
        return rec;
    };

    double prevRate = -1.0;
    for (int outerIt = 0; outerIt < opts.maxOuterIters; ++outerIt) {
        if (outerIt > 0 && adaptive) add_cut();
        if (outerIt > 0 && opts.sensing) {
            const CVec wNext = update_receive_filter_hbf(s.vRf, s.vD, scene, cfg);
            QcqpOneSolver next = sensing_solver(scene, cfg, wNext);
            if (next.min_eigenvalue() < 0) {
                w = wNext;
                mSolver.emplace(std::move(next));
                s.m = project_sensing(*mSolver, s.m, sensing_bound(cfg, w));
            }
        }
        const HbfOuterRecord rec = inner(opts.residualTol, opts.maxInnerIters);
        res.trace.push_back(rec);
        const bool converged = prevRate >= 0 && std::abs(rec.covertRate - prevRate) <= opts.rateTol * std::max(prevRate, 1e-12);
        prevRate = rec.covertRate;
        if (converged) break;
    }
    if (adaptive)
        for (int cut = 0; cut < opts.robustCuts && add_cut(); ++cut) res.trace.push_back(inner(opts.residualTol, opts.maxInnerIters));
    auto scaled_vd = [&] {
        CMat vD = s.vD;
        const double power = (s.vRf * vD).squaredNorm();
        if (power > cfg.totalPower) vD *= std::sqrt(cfg.totalPower / power);
        return vD;
    };
    for (int round = 0;; ++round) {
        if (opts.polishTol < opts.residualTol) res.polish = inner(opts.polishTol, opts.polishMaxIters);
        if (!adaptive || round == opts.marginRounds) break;
        // Leakage left by the consensus residual: tighten the covert bound by twice
        // that amount instead of backing off Bob's beam, which would cost sensing power.
        const double leak = worst_case_leakage(s.vRf * scaled_vd(), ch.willieEst, ch.willieRadius, gammaCap, cfg);
        if (leak <= 0) break;
        gBound = std::max(0.5 * gFull, gBound - 2.0 * leak);
        ++res.marginRounds;
        add_cut();
        res.trace.push_back(inner(opts.residualTol, opts.maxInnerIters));
    }

    CMat vD = scaled_vd();
    if (opts.robust) {
        CMat v = s.vRf * vD;
        res.covertBackoff = backoff_covert_beam(v, ch.willieEst, ch.willieRadius, gammaCap, cfg);
        vD.col(cfg.bob()) *= res.covertBackoff;
    }
    res.solution.kind = BeamKind::Hybrid;
    res.solution.vRf = s.vRf;
    res.solution.vD = vD;
    res.solution.vFull = s.vRf * vD;
    res.solution.w = opts.sensing ? update_receive_filter_fd(res.solution.vFull, scene, cfg) : matched;
    res.report = evaluate(res.solution, ch, scene, cfg);
    AuditOptions ao;
    ao.sensing = opts.sensing;
    ao.willieQos = !opts.robust;
    ao.robustCovert = opts.robust;
    res.audit = audit_constraints(res.solution, ch, scene, cfg, ao);
    return res;
}

}  // namespace covisac
