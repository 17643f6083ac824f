#pragma once

#include "covisac/common.hpp"

#include <functional>
#include <vector>

namespace covisac {

struct HermitianEig {
    RVec values;  // ascending
    CMat vectors;
};

HermitianEig hermitian_eig(const CMat& a);

// Top generalized eigenvector of (xi, lambda), unit norm.
CVec generalized_rayleigh_max(const CMat& xi, const CMat& lambda);

struct Rank1 {
    CVec v;
    double ratio = 0.0;  // lambda2 / lambda1
};
Rank1 rank1_extract(const CMat& f);

// Bisection on a monotone function with f(lo) f(hi) <= 0.
double scalar_root(const std::function<double(double)>& f, double lo, double hi, double tol);

// Marcum Q function of order one.
double marcum_q1(double a, double b);

struct TrustRegionResult {
    CVec x;
    double multiplier = 0.0;
    double value = 0.0;  // x^H H x - 2 Re(g^H x)
};
// min x^H H x - 2 Re(g^H x) subject to |x| <= radius, H Hermitian (possibly indefinite).
TrustRegionResult trust_region_min(const CMat& h, const CVec& g, double radius);

// QCQP-1: min |x - target|^2 s.t. x^H Q x <= bound.
struct QcqpOneProblem {
    CVec target;
    CMat quad;
    double bound = 0.0;
};

enum class QcqpStatus { Interior, Boundary, HardCase };

struct QcqpOneResult {
    CVec x;
    double multiplier = 0.0;
    QcqpStatus status = QcqpStatus::Interior;
};

// Caches the eigendecomposition of Q so repeated projections with different
// targets cost two matrix-vector products each. Q may be given as a list of
// diagonal blocks; a block with repeat count r occupies r consecutive slots.
class QcqpOneSolver {
public:
    QcqpOneSolver() = default;
    explicit QcqpOneSolver(const CMat& quad);
    struct Block {
        CMat matrix;
        int repeat = 1;
    };
    explicit QcqpOneSolver(const std::vector<Block>& blocks);

    int dim() const { return dim_; }
    double min_eigenvalue() const { return lambda_.minCoeff(); }
    double quad_form(const CVec& x) const;
    QcqpOneResult solve(const CVec& target, double bound) const;

private:
    struct Piece {
        int offset = 0;
        int size = 0;
        int eig = 0;  // index into eigs_
    };
    CVec to_eigen_basis(const CVec& x) const;
    CVec from_eigen_basis(const CVec& s) const;

    int dim_ = 0;
    std::vector<HermitianEig> eigs_;
    std::vector<CMat> blocks_;
    std::vector<Piece> pieces_;
    RVec lambda_;  // eigenvalues aligned with to_eigen_basis coordinates
};

QcqpOneResult solve_qcqp1(const QcqpOneProblem& p);

// KKT residuals of a QCQP-1 solution: stationarity relative to |target|,
// complementary slackness and constraint violation.
struct QcqpKkt {
    double stationarity = 0.0;
    double complementarity = 0.0;
    double violation = 0.0;
};
QcqpKkt qcqp1_kkt(const QcqpOneProblem& p, const QcqpOneResult& r);

}  // namespace covisac
