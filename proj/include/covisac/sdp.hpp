#pragma once

#include "covisac/common.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace covisac {

// weight * vec vec^H
struct LowRankTerm {
    double weight = 1.0;
    CVec vec;
};

// Coefficient matrix of one Hermitian block: dense + sum of low-rank terms
// + identity * I. Contributes Re tr(coefficient * X_block).
struct HermitianTerm {
    std::size_t block = 0;
    CMat dense;
    std::vector<LowRankTerm> lowRank;
    double identity = 0.0;
};

struct LinearFunctional {
    std::vector<HermitianTerm> terms;
    std::vector<std::pair<std::size_t, double>> scalars;

    LinearFunctional& add_dense(std::size_t block, const CMat& m);
    LinearFunctional& add_rank1(std::size_t block, double weight, const CVec& v);
    LinearFunctional& add_identity(std::size_t block, double weight);
    LinearFunctional& add_scalar(std::size_t index, double coeff);
    double evaluate(const std::vector<CMat>& blocks, const std::vector<double>& scalars) const;
};

struct LinearConstraint {
    LinearFunctional f;
    double rhs = 0.0;
};

// scale * basis^H X_block basis
struct CongruenceTerm {
    std::size_t block = 0;
    double scale = 1.0;
    CMat basis;
};

// constant + sum_b congruence_b + sum_s scalar_s * matrix_s  is PSD.
struct LmiConstraint {
    int dim = 0;
    CMat constant;
    std::vector<CongruenceTerm> blocks;
    std::vector<std::pair<std::size_t, CMat>> scalars;

    CMat evaluate(const std::vector<CMat>& blocks, const std::vector<double>& scalars) const;
};

enum class Sense { Minimize, Maximize };

// Hermitian PSD blocks plus nonnegative scalar variables.
struct SdpProblem {
    std::vector<int> blockDims;
    std::size_t scalarVars = 0;
    Sense sense = Sense::Maximize;
    LinearFunctional objective;
    std::vector<LinearConstraint> eqConstraints;    // f = rhs
    std::vector<LinearConstraint> ineqConstraints;  // f <= rhs
    std::vector<LmiConstraint> lmis;

    std::size_t constraint_count() const {
        return eqConstraints.size() + ineqConstraints.size() + lmis.size();
    }
};

enum class SdpStatus { Optimal, Infeasible, MaxIter };
const char* to_string(SdpStatus s);

struct SdpOptions {
    int maxIter = 200;
    double gapTol = 1e-8;
    double feasTol = 1e-9;
    double stepFraction = 0.98;
};

struct SdpSolution {
    std::vector<CMat> blocks;
    std::vector<double> scalars;
    double objective = 0.0;
    SdpStatus status = SdpStatus::MaxIter;
    int iterations = 0;
    double primalInfeas = 0.0;  // relative, per scaled row
    double dualInfeas = 0.0;
    double relGap = 0.0;
};

SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opts = {});

}  // namespace covisac
