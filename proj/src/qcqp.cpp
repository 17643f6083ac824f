#include "covisac/numerics.hpp"

#include <algorithm>
#include <limits>

namespace covisac {

QcqpOneSolver::QcqpOneSolver(const CMat& quad) : QcqpOneSolver(std::vector<Block>{{quad, 1}}) {}

QcqpOneSolver::QcqpOneSolver(const std::vector<Block>& blocks) {
    int offset = 0;
    std::vector<double> lam;
    for (const auto& b : blocks) {
        if (b.matrix.rows() != b.matrix.cols())
            throw Error(ErrorCode::InvalidConfig, "QCQP block must be square");
        const double asym = (b.matrix - b.matrix.adjoint()).norm();
        if (asym > 1e-10 * std::max(1.0, b.matrix.norm()))
            throw Error(ErrorCode::InvalidConfig, "QCQP matrix must be Hermitian");
        blocks_.push_back((b.matrix + b.matrix.adjoint()) / 2.0);
        eigs_.push_back(hermitian_eig(blocks_.back()));
        const int idx = static_cast<int>(eigs_.size()) - 1;
        const int sz = static_cast<int>(b.matrix.rows());
        for (int r = 0; r < b.repeat; ++r) {
            pieces_.push_back({offset, sz, idx});
            for (int i = 0; i < sz; ++i) lam.push_back(eigs_[idx].values(i));
            offset += sz;
        }
    }
    dim_ = offset;
    lambda_ = Eigen::Map<RVec>(lam.data(), static_cast<Eigen::Index>(lam.size()));
}

CVec QcqpOneSolver::to_eigen_basis(const CVec& x) const {
    CVec s(dim_);
    for (const auto& p : pieces_)
        s.segment(p.offset, p.size) = eigs_[p.eig].vectors.adjoint() * x.segment(p.offset, p.size);
    return s;
}

CVec QcqpOneSolver::from_eigen_basis(const CVec& s) const {
    CVec x(dim_);
    for (const auto& p : pieces_)
        x.segment(p.offset, p.size) = eigs_[p.eig].vectors * s.segment(p.offset, p.size);
    return x;
}

double QcqpOneSolver::quad_form(const CVec& x) const {
    double q = 0.0;
    for (const auto& p : pieces_) {
        const auto seg = x.segment(p.offset, p.size);
        q += seg.dot(blocks_[p.eig] * seg).real();
    }
    return q;
}

QcqpOneResult QcqpOneSolver::solve(const CVec& target, double bound) const {
    if (target.size() != dim_) throw Error(ErrorCode::InvalidConfig, "QCQP target dimension mismatch");
    const CVec s = to_eigen_basis(target);
    const RVec w = s.cwiseAbs2();
    const Eigen::Index n = dim_;
    QcqpOneResult res;
    const double g0 = lambda_.dot(w) - bound;
    if (g0 <= 0) {
        res.x = target;
        res.status = QcqpStatus::Interior;
        return res;
    }
    const double lmin = lambda_.minCoeff();
    const double scale = std::max(lambda_.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double tiny = 1e-13 * scale;

    if (lmin >= -tiny) {
        // PSD: g decreases to -bound as mu -> infinity
        if (bound < -1e-14 * std::max(1.0, std::abs(g0)))
            throw Error(ErrorCode::Infeasible, "x^H Q x <= c is empty");
        if (bound <= 1e-14 * std::max(1.0, std::abs(g0))) {
            CVec c = s;
            for (Eigen::Index i = 0; i < n; ++i)
                if (lambda_(i) > tiny) c(i) = 0;
            res.x = from_eigen_basis(c);
            res.multiplier = std::numeric_limits<double>::infinity();
            res.status = QcqpStatus::Boundary;
            return res;
        }
        auto g = [&](double mu) {
            double v = -bound;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = 1.0 + mu * lambda_(i);
                v += lambda_(i) * w(i) / (d * d);
            }
            return v;
        };
        double lo = 0.0, hi = 1.0 / scale;
        while (g(hi) > 0) {
            lo = hi;
            hi *= 2.0;
        }
        for (int it = 0; it < 2000; ++it) {
            const double mid = lo + (hi - lo) / 2;
            if (mid <= lo || mid >= hi) break;
            if (g(mid) > 0) lo = mid;
            else hi = mid;
        }
        CVec c(n);
        for (Eigen::Index i = 0; i < n; ++i) c(i) = s(i) / (1.0 + hi * lambda_(i));
        res.x = from_eigen_basis(c);
        res.multiplier = hi;
        res.status = QcqpStatus::Boundary;
        return res;
    }

    // Indefinite: parametrize by e = 1 + mu*lmin in (0,1]; 1 + mu*lambda_i =
    // ((lmin - lambda_i) + e*lambda_i)/lmin stays accurate as e -> 0.
    std::vector<bool> critical(n);
    double wCrit = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        critical[i] = lambda_(i) - lmin <= tiny;
        if (critical[i]) wCrit += w(i);
    }
    auto denom = [&](Eigen::Index i, double e) {
        return critical[i] ? e : ((lmin - lambda_(i)) + e * lambda_(i)) / lmin;
    };
    auto g = [&](double e, bool withCritical) {
        double v = -bound;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (critical[i] && !withCritical) continue;
            const double d = denom(i, e);
            v += lambda_(i) * w(i) / (d * d);
        }
        return v;
    };
    const double gEdge = g(0.0, false);
    if (gEdge > 0 && wCrit <= 1e-30 * std::max(1.0, w.sum())) {
        // hard case: boundary point completed along the critical eigenvector
        CVec c(n);
        for (Eigen::Index i = 0; i < n; ++i) c(i) = critical[i] ? cd(0) : s(i) / denom(i, 0.0);
        const double tau = std::sqrt(gEdge / -lmin);
        for (Eigen::Index i = 0; i < n; ++i)
            if (critical[i]) {
                c(i) = tau;
                break;
            }
        res.x = from_eigen_basis(c);
        res.multiplier = -1.0 / lmin;
        res.status = QcqpStatus::HardCase;
        return res;
    }
    // g increases with e; g(1) = g0 > 0, g(0+) < 0.
    double hi = 1.0, lo = 0.5;
    while (g(lo, true) > 0) {
        hi = lo;
        lo /= 2.0;
        if (lo < std::numeric_limits<double>::min()) break;
    }
    for (int it = 0; it < 2000; ++it) {
        const double mid = lo + (hi - lo) / 2;
        if (mid <= lo || mid >= hi) break;
        if (g(mid, true) > 0) hi = mid;
        else lo = mid;
    }
    CVec c(n);
    for (Eigen::Index i = 0; i < n; ++i) c(i) = s(i) / denom(i, lo);
    res.x = from_eigen_basis(c);
    res.multiplier = (lo - 1.0) / lmin;
    res.status = QcqpStatus::Boundary;
    return res;
}

QcqpOneResult solve_qcqp1(const QcqpOneProblem& p) {
    return QcqpOneSolver(p.quad).solve(p.target, p.bound);
}

QcqpKkt qcqp1_kkt(const QcqpOneProblem& p, const QcqpOneResult& r) {
    QcqpKkt k;
    const CMat q = (p.quad + p.quad.adjoint()) / 2.0;
    const double gval = r.x.dot(q * r.x).real() - p.bound;
    k.violation = std::max(0.0, gval);
    if (std::isinf(r.multiplier)) return k;
    const CVec resid = r.x + r.multiplier * (q * r.x) - p.target;
    k.stationarity = resid.norm() / std::max(1.0, p.target.norm());
    k.complementarity = std::abs(r.multiplier * gval);
    return k;
}

}  // namespace covisac
