#include "covisac/numerics.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace covisac {

HermitianEig hermitian_eig(const CMat& a) {
    const CMat herm = (a + a.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<CMat> es(herm);
    return {es.eigenvalues(), es.eigenvectors()};
}

namespace {

// Rotate so the largest-magnitude entry is real positive.
void fix_phase(CVec& v) {
    Eigen::Index k = 0;
    v.cwiseAbs().maxCoeff(&k);
    if (std::abs(v(k)) > 0) v *= std::conj(v(k)) / std::abs(v(k));
}

}  // namespace

CVec generalized_rayleigh_max(const CMat& xi, const CMat& lambda) {
    const HermitianEig le = hermitian_eig(lambda);
    const double scale = std::max(le.values.cwiseAbs().sum(), std::numeric_limits<double>::min());
    if (le.values(0) <= 1e-12 * scale)
        throw Error(ErrorCode::SingularDenominator, "denominator matrix is not positive definite");
    const CMat isqrt = le.vectors * le.values.cwiseSqrt().cwiseInverse().asDiagonal() *
                       le.vectors.adjoint();
    const HermitianEig me = hermitian_eig(isqrt * xi * isqrt);
    CVec w = isqrt * me.vectors.col(me.vectors.cols() - 1);
    w.normalize();
    fix_phase(w);
    return w;
}

Rank1 rank1_extract(const CMat& f) {
    const HermitianEig e = hermitian_eig(f);
    const Eigen::Index n = e.values.size();
    const double l1 = e.values(n - 1);
    if (!(l1 > 0)) throw Error(ErrorCode::ZeroMatrix, "matrix has no positive eigenvalue");
    Rank1 r;
    r.v = std::sqrt(l1) * e.vectors.col(n - 1);
    r.ratio = n > 1 ? std::abs(e.values(n - 2)) / l1 : 0.0;
    return r;
}

double scalar_root(const std::function<double(double)>& f, double lo, double hi, double tol) {
    double flo = f(lo), fhi = f(hi);
    if (flo * fhi > 0) throw Error(ErrorCode::BracketError, "no sign change on bracket");
    if (std::abs(flo) <= tol) return lo;
    if (std::abs(fhi) <= tol) return hi;
    for (int it = 0; it < 4000; ++it) {
        const double mid = lo + (hi - lo) / 2;
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (std::abs(fm) <= tol) return mid;
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    return std::abs(flo) <= std::abs(fhi) ? lo : hi;
}

namespace {

// I0(z) exp(-z)
double bessel_i0_scaled(double z) {
    if (z < 30.0) return std::cyl_bessel_i(0.0, z) * std::exp(-z);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (k * 8.0 * z);
        if (next > term) break;
        term = next;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum / std::sqrt(2.0 * kPi * z);
}

}  // namespace

double marcum_q1(double a, double b) {
    if (!(b > 0)) return 1.0;
    if (a <= 0) return std::exp(-b * b / 2.0);
    const double x = a * b;
    if (x <= 30.0) {
        const double pref = std::exp(-(a - b) * (a - b) / 2.0 - x);
        if (a < b) {
            const double r = a / b;
            double sum = 0.0, rk = 1.0;
            for (int k = 0; k < 2000; ++k) {
                const double term = rk * std::cyl_bessel_i(static_cast<double>(k), x);
                sum += term;
                if (k > x && term < 1e-17 * sum) break;
                rk *= r;
            }
            return std::clamp(pref * sum, 0.0, 1.0);
        }
        const double r = b / a;
        double sum = 0.0, rk = r;
        for (int k = 1; k < 2000; ++k) {
            const double term = rk * std::cyl_bessel_i(static_cast<double>(k), x);
            sum += term;
            if (k > x && term < 1e-17 * std::max(sum, 1e-300)) break;
            rk *= r;
        }
        return std::clamp(1.0 - pref * sum, 0.0, 1.0);
    }
    // Rician density of the envelope in Bessel-scaled form.
    auto pdf = [a](double t) {
        return t * std::exp(-(t - a) * (t - a) / 2.0) * bessel_i0_scaled(a * t);
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    if (b >= a) {
        const double q = GK::integrate(pdf, b, b + 40.0, 20, 1e-14);
        return std::clamp(q, 0.0, 1.0);
    }
    const double lo = std::max(0.0, a - 40.0);
    const double c = GK::integrate(pdf, lo, b, 20, 1e-14);
    return std::clamp(1.0 - c, 0.0, 1.0);
}

TrustRegionResult trust_region_min(const CMat& h, const CVec& g, double radius) {
    TrustRegionResult res;
    const Eigen::Index n = g.size();
    if (radius <= 0) {
        res.x = CVec::Zero(n);
        return res;
    }
    const HermitianEig e = hermitian_eig(h);
    const CVec s = e.vectors.adjoint() * g;
    const RVec& lam = e.values;
    const double lmin = lam(0);
    const double scale = std::max(lam.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    auto coords = [&](double mu, bool skipCritical) {
        CVec c(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double den = lam(i) + mu;
            const bool critical = std::abs(lam(i) - lmin) <= 1e-12 * scale;
            c(i) = (skipCritical && critical) || den <= 0 ? cd(0) : s(i) / den;
        }
        return c;
    };
    CVec c;
    double mu = 0.0;
    const double lower = std::max(0.0, -lmin);
    bool solved = false;
    if (lmin > 0) {
        c = coords(0.0, false);
        solved = c.norm() <= radius;
    }
    if (!solved) {
        double critical = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::abs(lam(i) - lmin) <= 1e-12 * scale) critical += std::norm(s(i));
        const CVec ce = coords(lower, true);
        if (critical <= 1e-28 * std::max(1.0, s.squaredNorm()) && ce.norm() <= radius) {
            // hard case: fill the ball along the critical eigenvector
            c = ce;
            mu = lower;
            const double tau = std::sqrt(std::max(0.0, radius * radius - ce.squaredNorm()));
            for (Eigen::Index i = 0; i < n; ++i)
                if (std::abs(lam(i) - lmin) <= 1e-12 * scale) {
                    c(i) += tau;
                    break;
                }
        } else {
            double lo = lower, hi = lower + g.norm() / radius + scale * 1e-12 + 1e-300;
            while (coords(hi, false).norm() > radius) hi = lower + 2 * (hi - lower);
            for (int it = 0; it < 300; ++it) {
                const double mid = lo + (hi - lo) / 2;
                if (mid <= lo || mid >= hi) break;
                if (coords(mid, false).norm() > radius) lo = mid;
                else hi = mid;
            }
            mu = hi;
            c = coords(hi, false);
        }
    }
    res.x = e.vectors * c;
    res.multiplier = mu;
    res.value = res.x.dot(h * res.x).real() - 2.0 * g.dot(res.x).real();
    return res;
}

}  // namespace covisac
