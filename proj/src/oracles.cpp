#include "covisac/oracles.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <limits>
#include <random>

namespace covisac {

McEstimate mc_willie_detector(const HypothesisStats& stats, std::uint64_t trials, std::uint64_t seed) {
    McEstimate est;
    if (!(stats.kappa0 > 0) || stats.kappa1 < stats.kappa0)
        throw Error(ErrorCode::InvalidStats, "need kappa1 >= kappa0 > 0");
    if (stats.kappa1 - stats.kappa0 <= 1e-12 * stats.kappa0) {
        est.degenerate = true;
        return est;
    }
    if (trials == 0) throw Error(ErrorCode::InvalidConfig, "trials must be positive");
    const double k0 = stats.kappa0, k1 = stats.kappa1;
    const double tau = k0 * k1 / (k1 - k0) * std::log(k1 / k0);
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> h0(1.0 / k0), h1(1.0 / k1);
    std::uint64_t fa = 0, md = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        if (h0(rng) > tau) ++fa;
        if (h1(rng) <= tau) ++md;
    }
    const double n = static_cast<double>(trials);
    est.falseAlarm = fa / n;
    est.missedDetection = md / n;
    est.pE = est.falseAlarm + est.missedDetection;
    est.stdErr = std::sqrt(est.falseAlarm * (1 - est.falseAlarm) / n +
                           est.missedDetection * (1 - est.missedDetection) / n);
    return est;
}

double numeric_kl(double kappa0, double kappa1) {
    if (!(kappa0 > 0) || !(kappa1 > 0)) throw Error(ErrorCode::InvalidStats, "kappa must be positive");
    auto integrand = [&](double x) {
        const double p0 = std::exp(-x / kappa0) / kappa0;
        const double logRatio = std::log(kappa1 / kappa0) - x / kappa0 + x / kappa1;
        return p0 * logRatio;
    };
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-13);
}

namespace {

// Smallest r >= 0 with (t + r d)^H Q (t + r d) <= c, given g0 = t^H Q t - c > 0.
double first_crossing(const QcqpOneSolver& q, const CVec& qt, double g0, const CVec& d) {
    const double a = q.quad_form(d);
    const double b = d.dot(qt).real();
    const double inf = std::numeric_limits<double>::infinity();
    const double scale = std::abs(a) + std::abs(b) + g0;
    if (std::abs(a) <= 1e-15 * scale) return b < 0 ? -g0 / (2 * b) : inf;
    const double disc = b * b - a * g0;
    if (disc < 0) return inf;
    const double sq = std::sqrt(disc);
    // roots of a r^2 + 2 b r + g0 = 0, via the stable form
    const double qq = -(b + std::copysign(sq, b));
    double r1 = qq / a, r2 = qq != 0 ? g0 / qq : inf;
    if (r1 > r2) std::swap(r1, r2);
    if (a > 0) return r1 >= 0 ? r1 : inf;
    return r2;  // a < 0: roots of opposite sign
}

}  // namespace

BruteQcqp brute_qcqp(const QcqpOneProblem& p, int restarts, std::uint64_t seed) {
    const QcqpOneSolver q(p.quad);
    const CVec& t = p.target;
    const Eigen::Index n = t.size();
    BruteQcqp best;
    const double g0 = q.quad_form(t) - p.bound;
    if (g0 <= 0) {
        best.x = t;
        return best;
    }
    const CMat qm = (p.quad + p.quad.adjoint()) / 2.0;
    const CVec qt = qm * t;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto random_dir = [&]() {
        CVec d(n);
        for (Eigen::Index i = 0; i < n; ++i) d(i) = cd(gauss(rng), gauss(rng));
        return CVec(d.normalized());
    };
    best.objective = std::numeric_limits<double>::infinity();
    for (int start = 0; start < restarts; ++start) {
        CVec d;
        double r = std::numeric_limits<double>::infinity();
        for (int tries = 0; tries < 10000 && !std::isfinite(r); ++tries) {
            d = random_dir();
            r = first_crossing(q, qt, g0, d);
        }
        if (!std::isfinite(r)) continue;
        double step = 0.1;
        for (int it = 0; it < 5000; ++it) {
            const CVec x = t + r * d;
            const CVec qx = qm * x;
            const double den = d.dot(qx).real();
            if (std::abs(den) < 1e-300) break;
            CVec grad = -r * qx / den;
            grad -= d.dot(grad).real() * d;
            const double gn = grad.norm();
            if (gn <= 1e-15 * std::max(1.0, r)) break;
            bool moved = false;
            while (step > 1e-16) {
                const CVec dn = (d - step * grad).normalized();
                const double rn = first_crossing(q, qt, g0, dn);
                if (rn < r - 1e-4 * step * gn * gn) {
                    d = dn;
                    r = rn;
                    moved = true;
                    step *= 2.0;
                    break;
                }
                step /= 2.0;
            }
            if (!moved) break;
        }
        if (r * r < best.objective) {
            best.objective = r * r;
            best.x = t + r * d;
        }
    }
    return best;
}

double ball_sample_verifier(const CMat& v, const ChannelSet& ch, const SystemConfig& cfg,
                            double gammaCap, int samples, std::uint64_t seed) {
    auto slack = [&](const CVec& h) {
        const RVec g = (h.adjoint() * v).cwiseAbs2().transpose();
        return (gammaCap - 1.0) * (g.head(cfg.uCarols + 1).sum() + cfg.noiseWillie) - g(cfg.bob());
    };
    if (ch.willieRadius <= 0) return slack(ch.willieEst);
    std::mt19937_64 rng(seed);
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s)
        worst = std::min(worst, slack(ch.willieEst + sample_ball(cfg.mt, ch.willieRadius, rng)));
    return worst;
}

}  // namespace covisac
