#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covisac/numerics.hpp"
#include "covisac/oracles.hpp"
#include "covisac/sdp.hpp"
#include "test_util.hpp"

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

using namespace covisac;
using testutil::random_cvec;
using testutil::random_hermitian;

TEST_CASE("scalar_root brackets and tolerance") {
    const double r = scalar_root([](double x) { return x - 2.0; }, 0.0, 4.0, 1e-14);
    CHECK(r == doctest::Approx(2.0).epsilon(1e-14));
    auto f = [](double x) { return std::log(x) + 1.0 / x - 1.0 - 2e-6; };
    const double g = scalar_root(f, 1.0, 10.0, 1e-12);
    CHECK(std::abs(f(g)) <= 1e-12);
    for (double tol : {1e-4, 5e-5, 2.5e-5}) {
        auto h = [](double x) { return x * x * x - 3.0; };
        CHECK(std::abs(h(scalar_root(h, 0.0, 3.0, tol))) <= tol);
    }
    CHECK_THROWS_AS(scalar_root([](double x) { return x + 1.0; }, 0.0, 1.0, 1e-9), Error);
}

TEST_CASE("generalized Rayleigh quotient") {
    std::mt19937_64 rng(11);
    const CVec u = random_cvec(5, rng);
    const CVec w = generalized_rayleigh_max(u * u.adjoint(), CMat::Identity(5, 5));
    CHECK(std::abs(std::abs(w.dot(u)) - u.norm()) < 1e-10);

    const CMat a = random_cvec(6, rng) * random_cvec(6, rng).adjoint();
    const CMat xi = a * a.adjoint() + random_cvec(6, rng) * random_cvec(6, rng).adjoint();
    CMat lam = random_hermitian(6, rng);
    lam = lam * lam + 0.5 * CMat::Identity(6, 6);
    auto quotient = [&](const CVec& v) { return v.dot(xi * v).real() / v.dot(lam * v).real(); };
    const CVec best = generalized_rayleigh_max(xi, lam);
    CHECK(best.norm() == doctest::Approx(1.0));
    const double q = quotient(best);
    for (int k = 0; k < 10000; ++k) CHECK_LE(quotient(random_cvec(6, rng)), q * (1 + 1e-12));

    const CVec scaled = generalized_rayleigh_max(5.0 * xi, lam);
    CHECK(std::abs(std::abs(scaled.dot(best)) - 1.0) < 1e-9);

    // unitary congruence
    Eigen::HouseholderQR<CMat> qr(random_hermitian(6, rng) + CMat::Identity(6, 6) * cd(0, 1));
    const CMat uq = qr.householderQ();
    const CVec rotated = generalized_rayleigh_max(uq.adjoint() * xi * uq, uq.adjoint() * lam * uq);
    CHECK(std::abs(std::abs(rotated.dot(uq.adjoint() * best)) - 1.0) < 1e-9);

    CMat singular = CMat::Zero(6, 6);
    singular(0, 0) = 1.0;
    CHECK_THROWS_AS(generalized_rayleigh_max(xi, singular), Error);
}

TEST_CASE("rank1_extract") {
    std::mt19937_64 rng(3);
    const CVec u = random_cvec(4, rng);
    const Rank1 r = rank1_extract(u * u.adjoint());
    CHECK(std::abs(std::abs(r.v.dot(u)) - u.squaredNorm()) < 1e-10);
    CHECK(r.ratio < 1e-14);
    const CMat f = u * u.adjoint() + 0.01 * random_cvec(4, rng) * random_cvec(4, rng).adjoint();
    const Rank1 g = rank1_extract(f);
    const RVec ev = hermitian_eig(f).values;
    CHECK((g.v * g.v.adjoint() - f).norm() <= ev(2) * 4 + 1e-12);
    CHECK(rank1_extract(CMat::Constant(1, 1, 2.0)).ratio == 0.0);
    CHECK_THROWS_AS(rank1_extract(CMat::Zero(3, 3)), Error);
}

TEST_CASE("Marcum Q against the noncentral chi-square law") {
    CHECK(marcum_q1(0.0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK(marcum_q1(3.0, 0.0) == 1.0);
    // quadrature of the noncentral chi-square(2, a^2) density above b^2
    auto tail = [](double a, double b) {
        boost::math::non_central_chi_squared_distribution<double> d(2.0, a * a);
        auto pdf = [&](double x) { return boost::math::pdf(d, x); };
        using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
        const double upper = b * b + 40.0 * (1.0 + a) + 400.0;
        return GK::integrate(pdf, b * b, upper, 25, 1e-14);
    };
    const double a = std::sqrt(20.0), b = std::sqrt(-2.0 * std::log(1e-4));
    CHECK(std::abs(marcum_q1(a, b) - tail(a, b)) < 1e-8);
    // both series branches and the integral branch against the library cdf
    for (double aa : {0.3, 1.0, 2.5, 4.0, 7.0, 12.0, 30.0})
        for (double bb : {0.5, 1.5, 4.29, 6.0, 9.0, 13.0}) {
            boost::math::non_central_chi_squared_distribution<double> d(2.0, aa * aa);
            const double ref = boost::math::cdf(boost::math::complement(d, bb * bb));
            CHECK(std::abs(marcum_q1(aa, bb) - ref) < 1e-10);
        }
}

TEST_CASE("trust region subproblem against sampling") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const CMat h = random_hermitian(4, rng);
        const CVec g = random_cvec(4, rng);
        const double radius = 0.5 + t * 0.1;
        const TrustRegionResult r = trust_region_min(h, g, radius);
        CHECK(r.x.norm() <= radius * (1 + 1e-12));
        auto val = [&](const CVec& x) { return x.dot(h * x).real() - 2 * g.dot(x).real(); };
        for (int k = 0; k < 2000; ++k) {
            CVec x = random_cvec(4, rng);
            x *= radius * std::pow(std::uniform_real_distribution<double>(0, 1)(rng), 0.125) / x.norm();
            CHECK(val(x) >= r.value - 1e-9);
        }
    }
    // hard case: gradient orthogonal to the most negative direction
    CMat h = CMat::Zero(3, 3);
    h.diagonal() << -1.0, 1.0, 2.0;
    CVec g = CVec::Zero(3);
    g(1) = 0.5;
    const TrustRegionResult r = trust_region_min(h, g, 2.0);
    CHECK(r.x.norm() == doctest::Approx(2.0));
    CHECK(r.value == doctest::Approx(-4.125).epsilon(1e-10));
}

TEST_CASE("QCQP-1 closed form") {
    QcqpOneProblem p;
    p.quad = CMat::Identity(2, 2);
    p.bound = 1.0;
    p.target = CVec::Zero(2);
    p.target(0) = 2.0;
    QcqpOneResult r = solve_qcqp1(p);
    CHECK(std::abs(r.x(0) - cd(1.0)) < 1e-12);
    CHECK(std::abs(r.x(1)) < 1e-12);
    CHECK(r.status == QcqpStatus::Boundary);

    p.target(0) = 0.5;
    r = solve_qcqp1(p);
    CHECK(r.status == QcqpStatus::Interior);
    CHECK((r.x - p.target).norm() == 0.0);

    p.bound = -1.0;
    CHECK_THROWS_AS(solve_qcqp1(p), Error);

    // PSD with c = 0: projection on the null space
    p.quad = CMat::Zero(2, 2);
    p.quad(0, 0) = 3.0;
    p.bound = 0.0;
    p.target << cd(1, 1), cd(2, -1);
    r = solve_qcqp1(p);
    CHECK(std::abs(r.x(0)) < 1e-12);
    CHECK(std::abs(r.x(1) - p.target(1)) < 1e-12);
}

TEST_CASE("QCQP-1 hard case completion") {
    QcqpOneProblem p;
    p.quad = CMat::Zero(3, 3);
    p.quad.diagonal() << -1.0, 2.0, 4.0;
    p.bound = 1.0;
    p.target = CVec::Zero(3);
    p.target << 0.0, 3.0, 1.0;
    const QcqpOneResult r = solve_qcqp1(p);
    CHECK(r.status == QcqpStatus::HardCase);
    const double qv = r.x.dot(p.quad * r.x).real();
    CHECK(std::abs(qv - 1.0) < 1e-10);
    const BruteQcqp b = brute_qcqp(p, 200, 9);
    CHECK(std::abs((r.x - p.target).squaredNorm() - b.objective) < 1e-6);
}

TEST_CASE("QCQP-1 matches multistart oracle on random instances") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 30; ++t) {
        QcqpOneProblem p;
        p.quad = random_hermitian(6, rng);
        if (t % 3 == 0) p.quad = p.quad * p.quad;  // PSD family
        p.target = random_cvec(6, rng) * 2.0;
        p.bound = (t % 2 == 0) ? 0.5 : -0.5;
        if (t % 3 == 0) p.bound = 0.5;
        const QcqpOneResult r = solve_qcqp1(p);
        const QcqpKkt k = qcqp1_kkt(p, r);
        CHECK(k.stationarity <= 1e-8);
        CHECK(k.complementarity <= 1e-8);
        CHECK(k.violation <= 1e-8);
        const BruteQcqp b = brute_qcqp(p, 60, 100 + t);
        CHECK(std::abs((r.x - p.target).squaredNorm() - b.objective) <= 1e-6 * std::max(1.0, b.objective));
    }
}

TEST_CASE("QCQP-1 block solver equals dense solver") {
    std::mt19937_64 rng(8);
    const CMat b1 = random_hermitian(3, rng), b2 = random_hermitian(2, rng);
    QcqpOneSolver blocks({{b1, 2}, {b2, 1}});
    CMat dense = CMat::Zero(8, 8);
    dense.block(0, 0, 3, 3) = b1;
    dense.block(3, 3, 3, 3) = b1;
    dense.block(6, 6, 2, 2) = b2;
    QcqpOneSolver full(dense);
    const CVec t = random_cvec(8, rng) * 3.0;
    const QcqpOneResult a = blocks.solve(t, -0.3), c = full.solve(t, -0.3);
    CHECK((a.x - c.x).norm() < 1e-9);
    CHECK(blocks.quad_form(t) == doctest::Approx(t.dot(dense * t).real()));
}

TEST_CASE("SDP trivial instances") {
    {
        SdpProblem p;
        p.blockDims = {1};
        p.sense = Sense::Minimize;
        p.objective.add_identity(0, 1.0);
        LinearConstraint c;
        c.f.add_identity(0, -1.0);
        c.rhs = -3.0;
        p.ineqConstraints.push_back(c);
        const SdpSolution s = solve_sdp(p);
        CHECK(s.status == SdpStatus::Optimal);
        CHECK(s.objective == doctest::Approx(3.0).epsilon(1e-7));
    }
    {
        SdpProblem p;
        p.blockDims = {2};
        p.objective.add_identity(0, 1.0);
        LinearConstraint c;
        c.f.add_identity(0, 1.0);
        c.rhs = 2.0;
        p.ineqConstraints.push_back(c);
        const SdpSolution s = solve_sdp(p);
        CHECK(s.status == SdpStatus::Optimal);
        CHECK(s.objective == doctest::Approx(2.0).epsilon(1e-7));
    }
    {
        SdpProblem p;  // trace cannot be negative
        p.blockDims = {2};
        p.objective.add_identity(0, 1.0);
        LinearConstraint c;
        c.f.add_identity(0, 1.0);
        c.rhs = -1.0;
        p.ineqConstraints.push_back(c);
        CHECK(solve_sdp(p).status != SdpStatus::Optimal);
    }
}

TEST_CASE("SDP with linear matrix inequalities") {
    {
        // max s  s.t. [[1, s],[s, 1]] psd
        SdpProblem p;
        p.scalarVars = 1;
        p.objective.add_scalar(0, 1.0);
        LmiConstraint l;
        l.dim = 2;
        l.constant = CMat::Identity(2, 2);
        CMat off = CMat::Zero(2, 2);
        off(0, 1) = off(1, 0) = 1.0;
        l.scalars.emplace_back(0, off);
        p.lmis.push_back(l);
        const SdpSolution s = solve_sdp(p);
        CHECK(s.status == SdpStatus::Optimal);
        CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-7));
    }
    {
        // max tr(C X) s.t. B - T^H X T psd with T a random square basis
        std::mt19937_64 rng(4);
        const CMat c = random_hermitian(3, rng);
        CMat t = random_hermitian(3, rng) + 3.0 * CMat::Identity(3, 3);
        SdpProblem p;
        p.blockDims = {3};
        p.objective.add_dense(0, c * c + CMat::Identity(3, 3));
        LmiConstraint l;
        l.dim = 3;
        l.constant = CMat::Identity(3, 3);
        l.blocks.push_back({0, -1.0, t});
        p.lmis.push_back(l);
        const SdpSolution s = solve_sdp(p);
        CHECK(s.status == SdpStatus::Optimal);
        // X <= T^-H T^-1 and the objective is monotone, so the bound is attained there
        const CMat ti = t.inverse();
        const double expect = ((c * c + CMat::Identity(3, 3)) * ti * ti.adjoint()).trace().real();
        CHECK(s.objective == doctest::Approx(expect).epsilon(1e-6));
        CHECK(hermitian_eig(l.evaluate(s.blocks, s.scalars)).values(0) > -1e-7);
    }
}

TEST_CASE("SDP matches dual bisection oracle on random 4x4 instances") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        const CMat c = random_hermitian(4, rng);
        const CMat a2 = random_hermitian(4, rng), a3 = random_hermitian(4, rng);
        const double b1 = 2.0, b2 = 1.0, b3 = 1.5;
        SdpProblem p;
        p.blockDims = {4};
        p.objective.add_dense(0, c);
        LinearConstraint k1, k2, k3;
        k1.f.add_identity(0, 1.0);
        k1.rhs = b1;
        k2.f.add_dense(0, a2);
        k2.rhs = b2;
        k3.f.add_dense(0, a3);
        k3.rhs = b3;
        p.ineqConstraints = {k1, k2, k3};
        const SdpSolution s = solve_sdp(p);
        REQUIRE(s.status == SdpStatus::Optimal);
        const double oracle = testutil::dual_oracle_4x4(c, a2, a3, b1, b2, b3);
        CHECK(std::abs(s.objective - oracle) <= 1e-5 * (1 + std::abs(oracle)));
        CHECK(hermitian_eig(s.blocks[0]).values(0) >= -1e-8 * s.blocks[0].trace().real());
    }
}
