#include "covisac/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace covisac {

const char* to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::Optimal: return "Optimal";
        case SdpStatus::Infeasible: return "Infeasible";
        case SdpStatus::MaxIter: return "MaxIter";
    }
    return "Unknown";
}

LinearFunctional& LinearFunctional::add_dense(std::size_t block, const CMat& m) {
    HermitianTerm t;
    t.block = block;
    t.dense = m;
    terms.push_back(std::move(t));
    return *this;
}

LinearFunctional& LinearFunctional::add_rank1(std::size_t block, double weight, const CVec& v) {
    HermitianTerm t;
    t.block = block;
    t.lowRank.push_back({weight, v});
    terms.push_back(std::move(t));
    return *this;
}

LinearFunctional& LinearFunctional::add_identity(std::size_t block, double weight) {
    HermitianTerm t;
    t.block = block;
    t.identity = weight;
    terms.push_back(std::move(t));
    return *this;
}

LinearFunctional& LinearFunctional::add_scalar(std::size_t index, double coeff) {
    scalars.emplace_back(index, coeff);
    return *this;
}

double LinearFunctional::evaluate(const std::vector<CMat>& blocks,
                                  const std::vector<double>& scalarValues) const {
    double v = 0.0;
    for (const auto& t : terms) {
        const CMat& x = blocks.at(t.block);
        if (t.dense.size() > 0) v += (t.dense * x).trace().real();
        for (const auto& lr : t.lowRank) v += lr.weight * lr.vec.dot(x * lr.vec).real();
        if (t.identity != 0.0) v += t.identity * x.trace().real();
    }
    for (const auto& [i, c] : scalars) v += c * scalarValues.at(i);
    return v;
}

CMat LmiConstraint::evaluate(const std::vector<CMat>& blockValues,
                             const std::vector<double>& scalarValues) const {
    CMat s = constant.size() > 0 ? constant : CMat::Zero(dim, dim);
    for (const auto& c : blocks) s += c.scale * c.basis.adjoint() * blockValues.at(c.block) * c.basis;
    for (const auto& [i, m] : scalars) s += scalarValues.at(i) * m;
    return s;
}

namespace {

// ---------------------------------------------------------------------------
// Real symmetric standard form: min <C,X> s.t. <A_i,X> = b_i, X psd blocks,
// x >= 0 for the linear part.

struct Part {
    enum Kind { Sparse, LowRank, Dense } kind = Sparse;
    std::vector<int> r, c;
    std::vector<double> v;
    std::vector<double> w;
    RMat u;  // low-rank columns
    RMat d;
};

struct Coeff {
    std::vector<Part> parts;
    bool empty() const { return parts.empty(); }
};

struct BlockEntry {
    int row = 0;
    Coeff a;
};

struct Standard {
    std::vector<int> dims;                     // real block dims
    std::vector<std::vector<BlockEntry>> rows;  // per block, entries sorted by row
    std::vector<Coeff> cost;                    // per block
    int m = 0;
    int nlp = 0;
    RMat alp;   // m x nlp
    RVec clp;   // nlp
    RVec b;
};

double coeff_inner(const Coeff& a, const RMat& x) {
    double s = 0.0;
    for (const auto& p : a.parts) {
        switch (p.kind) {
            case Part::Sparse:
                for (std::size_t k = 0; k < p.v.size(); ++k) s += p.v[k] * x(p.r[k], p.c[k]);
                break;
            case Part::LowRank:
                for (Eigen::Index k = 0; k < p.u.cols(); ++k)
                    s += p.w[k] * p.u.col(k).dot(x * p.u.col(k));
                break;
            case Part::Dense: s += p.d.cwiseProduct(x).sum(); break;
        }
    }
    return s;
}

void coeff_add(const Coeff& a, double scale, RMat& acc) {
    for (const auto& p : a.parts) {
        switch (p.kind) {
            case Part::Sparse:
                for (std::size_t k = 0; k < p.v.size(); ++k) acc(p.r[k], p.c[k]) += scale * p.v[k];
                break;
            case Part::LowRank:
                for (Eigen::Index k = 0; k < p.u.cols(); ++k)
                    acc.noalias() += (scale * p.w[k]) * p.u.col(k) * p.u.col(k).transpose();
                break;
            case Part::Dense: acc += scale * p.d; break;
        }
    }
}

RMat coeff_dense(const Coeff& a, int n) {
    RMat m = RMat::Zero(n, n);
    coeff_add(a, 1.0, m);
    return m;
}

void coeff_scale(Coeff& a, double s) {
    for (auto& p : a.parts) {
        for (auto& v : p.v) v *= s;
        for (auto& w : p.w) w *= s;
        if (p.d.size() > 0) p.d *= s;
    }
}

// Real embedding of a complex Hermitian coefficient H -> [[ReH, -ImH],[ImH, ReH]]/2.
RMat embed_dense(const CMat& h) {
    const Eigen::Index n = h.rows();
    RMat e(2 * n, 2 * n);
    e.topLeftCorner(n, n) = h.real();
    e.bottomRightCorner(n, n) = h.real();
    e.topRightCorner(n, n) = -h.imag();
    e.bottomLeftCorner(n, n) = h.imag();
    return e / 2.0;
}

Part sparse_or_dense(const RMat& e) {
    Part p;
    const Eigen::Index n = e.rows();
    Eigen::Index nnz = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (e(i, j) != 0.0) ++nnz;
    if (nnz <= 8 * n) {
        p.kind = Part::Sparse;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (e(i, j) != 0.0) {
                    p.r.push_back(static_cast<int>(i));
                    p.c.push_back(static_cast<int>(j));
                    p.v.push_back(e(i, j));
                }
    } else {
        p.kind = Part::Dense;
        p.d = e;
    }
    return p;
}

void append_lowrank(Part& p, double weight, const CVec& v) {
    const Eigen::Index n = v.size();
    RVec u1(2 * n), u2(2 * n);
    u1 << v.real(), v.imag();
    u2 << -v.imag(), v.real();
    const Eigen::Index k = p.u.cols();
    p.u.conservativeResize(2 * n, k + 2);
    p.u.col(k) = u1;
    p.u.col(k + 1) = u2;
    p.w.push_back(weight / 2.0);
    p.w.push_back(weight / 2.0);
}

Coeff compile_term(const HermitianTerm& t, int n) {
    Coeff c;
    RMat dense = RMat::Zero(2 * n, 2 * n);
    bool hasDense = false;
    if (t.dense.size() > 0) {
        if (t.dense.rows() != n || t.dense.cols() != n)
            throw Error(ErrorCode::InvalidConfig, "coefficient dimension mismatch");
        dense += embed_dense((t.dense + t.dense.adjoint()) / 2.0);
        hasDense = true;
    }
    if (t.identity != 0.0) {
        dense.diagonal().array() += t.identity / 2.0;
        hasDense = true;
    }
    if (hasDense) c.parts.push_back(sparse_or_dense(dense));
    if (!t.lowRank.empty()) {
        Part p;
        p.kind = Part::LowRank;
        for (const auto& lr : t.lowRank) {
            if (lr.vec.size() != n) throw Error(ErrorCode::InvalidConfig, "low-rank vector dimension mismatch");
            append_lowrank(p, lr.weight, lr.vec);
        }
        c.parts.push_back(std::move(p));
    }
    return c;
}

void merge_into(Coeff& dst, Coeff src) {
    for (auto& p : src.parts) dst.parts.push_back(std::move(p));
}

int count_nnz(const CVec& v) {
    int k = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v(i) != cd(0)) ++k;
    return k;
}

// Hermitian part of a b^H as a term on an n-dim block.
HermitianTerm herm_outer(std::size_t block, const CVec& a, const CVec& b, double scale) {
    HermitianTerm t;
    t.block = block;
    if (count_nnz(a) * count_nnz(b) <= 4) {
        const CMat o = a * b.adjoint();
        t.dense = scale * (o + o.adjoint()) / 2.0;
    } else {
        t.lowRank.push_back({scale / 4.0, a + b});
        t.lowRank.push_back({-scale / 4.0, a - b});
    }
    return t;
}

struct Compiled {
    Standard s;
    int nHerm = 0;
    std::vector<int> hermDims;
    std::size_t nScalars = 0;
    std::vector<double> rowScale;
    double objScale = 1.0;
    double objSign = 1.0;
};

Compiled compile(const SdpProblem& p) {
    Compiled out;
    Standard& s = out.s;
    out.nHerm = static_cast<int>(p.blockDims.size());
    out.hermDims = p.blockDims;
    out.nScalars = p.scalarVars;
    for (int d : p.blockDims) {
        if (d < 1) throw Error(ErrorCode::InvalidConfig, "block dimension must be positive");
        s.dims.push_back(2 * d);
    }
    for (const auto& l : p.lmis) s.dims.push_back(2 * l.dim);
    const int nb = static_cast<int>(s.dims.size());
    s.rows.assign(nb, {});
    s.cost.assign(nb, {});
    const int nIneq = static_cast<int>(p.ineqConstraints.size());
    s.nlp = static_cast<int>(p.scalarVars) + nIneq;

    std::vector<std::map<int, Coeff>> rowBlocks;
    std::vector<std::map<int, double>> rowLp;
    std::vector<double> rhs;

    auto add_functional = [&](const LinearFunctional& f, std::map<int, Coeff>& blocks,
                              std::map<int, double>& lp, double sign) {
        for (const auto& t : f.terms) {
            if (t.block >= p.blockDims.size()) throw Error(ErrorCode::InvalidConfig, "block index out of range");
            HermitianTerm scaled = t;
            if (scaled.dense.size() > 0) scaled.dense *= sign;
            scaled.identity *= sign;
            for (auto& lr : scaled.lowRank) lr.weight *= sign;
            merge_into(blocks[static_cast<int>(t.block)], compile_term(scaled, p.blockDims[t.block]));
        }
        for (const auto& [i, c] : f.scalars) {
            if (i >= p.scalarVars) throw Error(ErrorCode::InvalidConfig, "scalar index out of range");
            lp[static_cast<int>(i)] += sign * c;
        }
    };

    for (const auto& c : p.eqConstraints) {
        rowBlocks.emplace_back();
        rowLp.emplace_back();
        add_functional(c.f, rowBlocks.back(), rowLp.back(), 1.0);
        rhs.push_back(c.rhs);
    }
    for (int k = 0; k < nIneq; ++k) {
        const auto& c = p.ineqConstraints[k];
        rowBlocks.emplace_back();
        rowLp.emplace_back();
        add_functional(c.f, rowBlocks.back(), rowLp.back(), 1.0);
        rowLp.back()[static_cast<int>(p.scalarVars) + k] += 1.0;
        rhs.push_back(c.rhs);
    }
    for (std::size_t l = 0; l < p.lmis.size(); ++l) {
        const auto& lmi = p.lmis[l];
        const int slack = out.nHerm + static_cast<int>(l);
        const int d = lmi.dim;
        const CMat c0 = lmi.constant.size() > 0 ? lmi.constant : CMat::Zero(d, d);
        for (int j = 0; j < d; ++j) {
            for (int k = j; k < d; ++k) {
                for (int part = 0; part < (j == k ? 1 : 2); ++part) {
                    // part 0: Re S_jk, part 1: Im S_jk; S_jk = e_j^H S e_k.
                    const cd phase = part == 0 ? cd(1, 0) : cd(0, -1);
                    std::map<int, Coeff> blocks;
                    std::map<int, double> lp;
                    CVec ej = CVec::Zero(d), ek = CVec::Zero(d);
                    ej(j) = 1;
                    ek(k) = 1;
                    merge_into(blocks[slack], compile_term(herm_outer(0, CVec(phase * ek), ej, 1.0), d));
                    for (const auto& ct : lmi.blocks) {
                        const int n = p.blockDims.at(ct.block);
                        const CVec tj = ct.basis.col(j), tk = ct.basis.col(k);
                        merge_into(blocks[static_cast<int>(ct.block)],
                                   compile_term(herm_outer(ct.block, CVec(phase * tk), tj, -ct.scale), n));
                    }
                    for (const auto& [i, m] : lmi.scalars) {
                        const cd e = m(j, k);
                        lp[static_cast<int>(i)] -= part == 0 ? e.real() : e.imag();
                    }
                    rowBlocks.push_back(std::move(blocks));
                    rowLp.push_back(std::move(lp));
                    rhs.push_back(part == 0 ? c0(j, k).real() : c0(j, k).imag());
                }
            }
        }
    }

    s.m = static_cast<int>(rhs.size());
    s.b = Eigen::Map<RVec>(rhs.data(), s.m);
    s.alp = RMat::Zero(s.m, s.nlp);
    s.clp = RVec::Zero(s.nlp);
    out.rowScale.assign(s.m, 1.0);
    for (int i = 0; i < s.m; ++i) {
        double nrm2 = 0.0;
        for (auto& [blk, co] : rowBlocks[i]) nrm2 += coeff_dense(co, s.dims[blk]).squaredNorm();
        for (auto& [k, v] : rowLp[i]) nrm2 += v * v;
        const double nrm = std::sqrt(nrm2);
        const double sc = nrm > 0 ? 1.0 / nrm : 1.0;
        out.rowScale[i] = sc;
        for (auto& [blk, co] : rowBlocks[i]) {
            coeff_scale(co, sc);
            s.rows[blk].push_back({i, std::move(co)});
        }
        for (auto& [k, v] : rowLp[i]) s.alp(i, k) = v * sc;
        s.b(i) *= sc;
    }

    out.objSign = p.sense == Sense::Maximize ? -1.0 : 1.0;
    std::map<int, Coeff> cb;
    std::map<int, double> cl;
    add_functional(p.objective, cb, cl, out.objSign);
    double cn2 = 0.0;
    for (auto& [blk, co] : cb) cn2 += coeff_dense(co, s.dims[blk]).squaredNorm();
    for (auto& [k, v] : cl) cn2 += v * v;
    out.objScale = std::max(1.0, std::sqrt(cn2));
    for (auto& [blk, co] : cb) {
        coeff_scale(co, 1.0 / out.objScale);
        s.cost[blk] = std::move(co);
    }
    for (auto& [k, v] : cl) s.clp(k) = v / out.objScale;
    return out;
}

// ---------------------------------------------------------------------------

struct Iterate {
    std::vector<RMat> x, z;
    RVec xl, zl, y;
};

double inner(const std::vector<RMat>& a, const std::vector<RMat>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
    return s;
}

RVec apply_a(const Standard& s, const std::vector<RMat>& x, const RVec& xl) {
    RVec r = s.alp * xl;
    for (std::size_t blk = 0; blk < s.rows.size(); ++blk)
        for (const auto& e : s.rows[blk]) r(e.row) += coeff_inner(e.a, x[blk]);
    return r;
}

void apply_at(const Standard& s, const RVec& y, std::vector<RMat>& out, RVec& outl) {
    out.resize(s.dims.size());
    for (std::size_t blk = 0; blk < s.rows.size(); ++blk) {
        out[blk] = RMat::Zero(s.dims[blk], s.dims[blk]);
        for (const auto& e : s.rows[blk]) coeff_add(e.a, y(e.row), out[blk]);
    }
    outl = s.alp.transpose() * y;
}

// tr(A_p X A_q Z) for parts p, q with cached products.
struct PartCache {
    RMat xu, zu;  // low-rank: X U, Z U
    RMat w;       // dense: Z D X
};

double kernel(const Part& p, const PartCache& cp, const Part& q, const PartCache& cq, const RMat& x,
              const RMat& z) {
    using K = Part::Kind;
    if (p.kind == K::Dense) {
        // tr(A_q W_p), W_p = Z A_p X
        const RMat& w = cp.w;
        double s = 0.0;
        switch (q.kind) {
            case K::Sparse:
                for (std::size_t k = 0; k < q.v.size(); ++k) s += q.v[k] * w(q.c[k], q.r[k]);
                return s;
            case K::LowRank:
                for (Eigen::Index k = 0; k < q.u.cols(); ++k) s += q.w[k] * q.u.col(k).dot(w * q.u.col(k));
                return s;
            case K::Dense: return q.d.cwiseProduct(w.transpose()).sum();
        }
    }
    if (q.kind == K::Dense) {
        // tr(A_p W_q^T)
        const RMat& w = cq.w;
        double s = 0.0;
        if (p.kind == K::Sparse) {
            for (std::size_t k = 0; k < p.v.size(); ++k) s += p.v[k] * w(p.r[k], p.c[k]);
        } else {
            for (Eigen::Index k = 0; k < p.u.cols(); ++k) s += p.w[k] * p.u.col(k).dot(w * p.u.col(k));
        }
        return s;
    }
    double s = 0.0;
    if (p.kind == K::Sparse && q.kind == K::Sparse) {
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            const int c = p.r[i], d = p.c[i];
            for (std::size_t j = 0; j < q.v.size(); ++j) s += p.v[i] * q.v[j] * x(d, q.r[j]) * z(q.c[j], c);
        }
        return s;
    }
    if (p.kind == K::Sparse && q.kind == K::LowRank) {
        for (Eigen::Index k = 0; k < q.u.cols(); ++k) {
            double t = 0.0;
            for (std::size_t i = 0; i < p.v.size(); ++i) t += p.v[i] * cq.zu(p.r[i], k) * cq.xu(p.c[i], k);
            s += q.w[k] * t;
        }
        return s;
    }
    if (p.kind == K::LowRank && q.kind == K::Sparse) {
        for (Eigen::Index k = 0; k < p.u.cols(); ++k) {
            double t = 0.0;
            for (std::size_t j = 0; j < q.v.size(); ++j) t += q.v[j] * cp.xu(q.r[j], k) * cp.zu(q.c[j], k);
            s += p.w[k] * t;
        }
        return s;
    }
    // low-rank x low-rank: sum s_k s_l (u_k^T X v_l)(v_l^T Z u_k)
    for (Eigen::Index k = 0; k < p.u.cols(); ++k)
        for (Eigen::Index l = 0; l < q.u.cols(); ++l)
            s += p.w[k] * q.w[l] * p.u.col(k).dot(cq.xu.col(l)) * p.u.col(k).dot(cq.zu.col(l));
    return s;
}

bool chol_inverse(const RMat& a, RMat& inv) {
    Eigen::LLT<RMat> llt(a);
    if (llt.info() != Eigen::Success) return false;
    inv = llt.solve(RMat::Identity(a.rows(), a.cols()));
    inv = (inv + inv.transpose()) / 2.0;
    return true;
}

// Largest step t with A + t dA psd, capped at cap.
double max_step(const RMat& a, const RMat& da, double cap) {
    Eigen::LLT<RMat> llt(a);
    if (llt.info() != Eigen::Success) return 0.0;
    RMat m = llt.matrixL().solve(da);
    m = llt.matrixL().solve(m.transpose()).transpose();
    m = (m + m.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<RMat> es(m, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    if (lmin >= 0) return cap;
    return std::min(cap, -1.0 / lmin);
}

double max_step_lp(const RVec& a, const RVec& da, double cap) {
    double t = cap;
    for (Eigen::Index k = 0; k < a.size(); ++k)
        if (da(k) < 0) t = std::min(t, -a(k) / da(k));
    return t;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& opts) {
    const Compiled comp = compile(problem);
    const Standard& s = comp.s;
    const int nb = static_cast<int>(s.dims.size());
    const int m = s.m;

    double nu = s.nlp;
    for (int d : s.dims) nu += d;

    std::vector<RMat> cmat(nb);
    for (int k = 0; k < nb; ++k) cmat[k] = coeff_dense(s.cost[k], s.dims[k]);
    const double cnorm = std::sqrt(inner(cmat, cmat) + s.clp.squaredNorm());
    const double bnorm = s.b.norm();

    // starting point
    Iterate it;
    it.x.resize(nb);
    it.z.resize(nb);
    for (int k = 0; k < nb; ++k) {
        const int n = s.dims[k];
        double xi = std::max(10.0, std::sqrt(static_cast<double>(n)));
        double eta = std::max({10.0, std::sqrt(static_cast<double>(n)), cmat[k].norm()});
        for (const auto& e : s.rows[k]) {
            const double an = coeff_dense(e.a, n).norm();
            xi = std::max(xi, n * (1.0 + std::abs(s.b(e.row))) / (1.0 + an));
            eta = std::max(eta, an);
        }
        it.x[k] = xi * RMat::Identity(n, n);
        it.z[k] = eta * RMat::Identity(n, n);
    }
    {
        double xi = 10.0, eta = std::max(10.0, s.clp.norm());
        for (int i = 0; i < m; ++i) {
            const double an = s.alp.row(i).norm();
            if (an > 0) xi = std::max(xi, (1.0 + std::abs(s.b(i))) / (1.0 + an));
            eta = std::max(eta, an);
        }
        it.xl = RVec::Constant(s.nlp, xi);
        it.zl = RVec::Constant(s.nlp, eta);
    }
    it.y = RVec::Zero(m);

    SdpSolution sol;
    Iterate best = it;
    double bestMerit = std::numeric_limits<double>::infinity();
    double bestP = 0, bestD = 0, bestG = 0;
    SdpStatus status = SdpStatus::MaxIter;
    int stall = 0;
    int iter = 0;

    std::vector<RMat> aty, rd(nb), zinv(nb);
    RVec atyl;
    for (iter = 0; iter < opts.maxIter; ++iter) {
        const RVec rp = s.b - apply_a(s, it.x, it.xl);
        apply_at(s, it.y, aty, atyl);
        double rdn2 = 0.0;
        for (int k = 0; k < nb; ++k) {
            rd[k] = cmat[k] - it.z[k] - aty[k];
            rdn2 += rd[k].squaredNorm();
        }
        const RVec rdl = s.clp - it.zl - atyl;
        rdn2 += rdl.squaredNorm();

        const double pobj = inner(cmat, it.x) + s.clp.dot(it.xl);
        const double dobj = s.b.dot(it.y);
        const double gap = inner(it.x, it.z) + it.xl.dot(it.zl);
        const double mu = gap / nu;
        const double pinf = rp.norm() / (1.0 + bnorm);
        const double dinf = std::sqrt(rdn2) / (1.0 + cnorm);
        const double relgap = std::max(gap, std::abs(pobj - dobj)) / (1.0 + std::abs(pobj));
        const double merit = std::max({pinf, dinf, relgap});
        if (merit < bestMerit) {
            bestMerit = merit;
            best = it;
            bestP = pinf;
            bestD = dinf;
            bestG = relgap;
        }
        if (pinf <= opts.feasTol && dinf <= opts.feasTol && relgap <= opts.gapTol) {
            status = SdpStatus::Optimal;
            break;
        }
        // primal infeasibility certificate: b^T y large relative to A^T y + Z
        if (dobj > 0) {
            double cert2 = 0.0;
            for (int k = 0; k < nb; ++k) cert2 += (aty[k] + it.z[k]).squaredNorm();
            cert2 += (atyl + it.zl).squaredNorm();
            if (std::sqrt(cert2) < 1e-8 * dobj && pinf > opts.feasTol) {
                status = SdpStatus::Infeasible;
                break;
            }
        }

        bool ok = true;
        for (int k = 0; k < nb && ok; ++k) ok = chol_inverse(it.z[k], zinv[k]);
        if (!ok) break;

        // Schur complement M_ij = tr(A_i X A_j Z^-1) + lp part
        RMat mmat = RMat::Zero(m, m);
        for (int k = 0; k < nb; ++k) {
            const auto& entries = s.rows[k];
            std::vector<std::vector<PartCache>> cache(entries.size());
            for (std::size_t e = 0; e < entries.size(); ++e) {
                for (const auto& p : entries[e].a.parts) {
                    PartCache c;
                    if (p.kind == Part::LowRank) {
                        c.xu = it.x[k] * p.u;
                        c.zu = zinv[k] * p.u;
                    } else if (p.kind == Part::Dense) {
                        c.w = zinv[k] * p.d * it.x[k];
                    }
                    cache[e].push_back(std::move(c));
                }
            }
            for (std::size_t e = 0; e < entries.size(); ++e) {
                for (std::size_t f = 0; f <= e; ++f) {
                    double v = 0.0;
                    const auto& pe = entries[e].a.parts;
                    const auto& pf = entries[f].a.parts;
                    for (std::size_t a = 0; a < pe.size(); ++a)
                        for (std::size_t b = 0; b < pf.size(); ++b)
                            v += kernel(pe[a], cache[e][a], pf[b], cache[f][b], it.x[k], zinv[k]);
                    const int i = entries[e].row, j = entries[f].row;
                    mmat(i, j) += v;
                    if (i != j) mmat(j, i) += v;
                }
            }
        }
        const RVec dl = it.xl.cwiseQuotient(it.zl);
        mmat.noalias() += s.alp * dl.asDiagonal() * s.alp.transpose();
        mmat = (mmat + mmat.transpose()) / 2.0;
        const double diagMax = std::max(mmat.diagonal().cwiseAbs().maxCoeff(), 1e-300);
        Eigen::LLT<RMat> schur(mmat);
        if (schur.info() != Eigen::Success) {
            mmat.diagonal().array() += 1e-14 * diagMax;
            schur.compute(mmat);
            if (schur.info() != Eigen::Success) break;
        }

        // Direction for a given centering target and second-order correction.
        std::vector<RMat> dx(nb), dz(nb);
        RVec dxl, dzl, dy;
        auto direction = [&](double sigmu, const std::vector<RMat>* cx, const std::vector<RMat>* cz,
                             const RVec* cxl, const RVec* czl) {
            std::vector<RMat> h(nb);
            for (int k = 0; k < nb; ++k) {
                h[k] = sigmu * zinv[k] - it.x[k] - it.x[k] * rd[k] * zinv[k];
                if (cx) h[k] -= (*cx)[k] * (*cz)[k] * zinv[k];
            }
            RVec hl = (RVec::Constant(s.nlp, sigmu) - it.xl.cwiseProduct(it.zl) - it.xl.cwiseProduct(rdl))
                          .cwiseQuotient(it.zl);
            if (cxl) hl -= cxl->cwiseProduct(*czl).cwiseQuotient(it.zl);
            const RVec rhs = rp - apply_a(s, h, hl);
            dy = schur.solve(rhs);
            std::vector<RMat> atdy;
            RVec atdyl;
            apply_at(s, dy, atdy, atdyl);
            for (int k = 0; k < nb; ++k) {
                dz[k] = rd[k] - atdy[k];
                RMat d = h[k] + it.x[k] * atdy[k] * zinv[k];
                dx[k] = (d + d.transpose()) / 2.0;
            }
            dzl = rdl - atdyl;
            dxl = hl + it.xl.cwiseProduct(atdyl).cwiseQuotient(it.zl);
        };
        auto steps = [&](double& ap, double& ad) {
            ap = 1.0 / opts.stepFraction;
            ad = 1.0 / opts.stepFraction;
            for (int k = 0; k < nb; ++k) {
                ap = std::min(ap, max_step(it.x[k], dx[k], ap));
                ad = std::min(ad, max_step(it.z[k], dz[k], ad));
            }
            ap = std::min(ap, max_step_lp(it.xl, dxl, ap));
            ad = std::min(ad, max_step_lp(it.zl, dzl, ad));
            ap = std::min(1.0, opts.stepFraction * ap);
            ad = std::min(1.0, opts.stepFraction * ad);
        };

        direction(0.0, nullptr, nullptr, nullptr, nullptr);
        double ap = 0, ad = 0;
        steps(ap, ad);
        double muAff = 0.0;
        for (int k = 0; k < nb; ++k)
            muAff += (it.x[k] + ap * dx[k]).cwiseProduct(it.z[k] + ad * dz[k]).sum();
        muAff += (it.xl + ap * dxl).dot(it.zl + ad * dzl);
        muAff /= nu;
        const double sigma = std::clamp(std::pow(std::max(muAff, 0.0) / mu, 3.0), 0.0, 1.0);

        const std::vector<RMat> dxa = dx, dza = dz;
        const RVec dxla = dxl, dzla = dzl;
        direction(sigma * mu, &dxa, &dza, &dxla, &dzla);
        steps(ap, ad);

        for (int k = 0; k < nb; ++k) {
            it.x[k] += ap * dx[k];
            it.z[k] += ad * dz[k];
        }
        it.xl += ap * dxl;
        it.zl += ad * dzl;
        it.y += ad * dy;
        stall = (ap < 1e-9 && ad < 1e-9) ? stall + 1 : 0;
        if (stall >= 3) break;
    }

    if (status != SdpStatus::Optimal && status != SdpStatus::Infeasible) {
        // accept the best iterate at the looser contract tolerance
        it = best;
        if (bestP <= 1e-7 && bestD <= 1e-7 && bestG <= 1e-7) status = SdpStatus::Optimal;
    }
    sol.status = status;
    sol.iterations = iter;
    sol.primalInfeas = (s.b - apply_a(s, it.x, it.xl)).norm() / (1.0 + bnorm);
    sol.dualInfeas = bestD;
    sol.relGap = bestG;

    for (int k = 0; k < comp.nHerm; ++k) {
        const int n = comp.hermDims[k];
        const RMat& x = it.x[k];
        CMat c(n, n);
        c.real() = (x.topLeftCorner(n, n) + x.bottomRightCorner(n, n)) / 2.0;
        c.imag() = (x.bottomLeftCorner(n, n) - x.topRightCorner(n, n)) / 2.0;
        sol.blocks.push_back((c + c.adjoint()) / 2.0);
    }
    for (std::size_t i = 0; i < comp.nScalars; ++i) sol.scalars.push_back(it.xl(static_cast<Eigen::Index>(i)));
    sol.objective = problem.objective.evaluate(sol.blocks, sol.scalars);
    return sol;
}

}  // namespace covisac
