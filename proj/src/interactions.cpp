#include "nlbem/interactions.hpp"

#include "nlbem/errors.hpp"

#include <cmath>
#include <numbers>

namespace nlbem {

namespace {

constexpr double kHermTol = 1e-12;
constexpr double kPsdTol = 1e-10;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

int mode_index(int k) {
    // 0, 1, -1, 2, -2, ...
    return (k % 2 == 1) ? (k + 1) / 2 : -(k / 2);
}

double norm_or_one(const Eigen::MatrixXcd& b) {
    const double n = b.cwiseAbs().maxCoeff();
    return n > 0.0 ? n : 1.0;
}

// Columns of the Elementary embedding: sqrt(h) * 1 in each component.
Eigen::MatrixXcd constant_embedding(const DiscretizedCurve& c) {
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(2 * c.n, 2);
    const double s = std::sqrt(c.h);
    e.block(0, 0, c.n, 1).setConstant(s);
    e.block(c.n, 1, c.n, 1).setConstant(s);
    return e;
}

Factorization rank_factorization(const InteractionSpec& spec, const DiscretizedCurve& c) {
    const int n = c.n;
    Factorization f;
    f.mode = FactorMode::Rank;
    std::visit(overloaded{
                   [&](const Elementary& e) {
                       Eigen::Matrix2cd m;
                       m << e.alpha, e.beta, std::conj(e.beta), e.gamma;
                       const Eigen::MatrixXcd emb = constant_embedding(c);
                       f.B1 = emb * m;
                       f.B2 = emb.adjoint();
                   },
                   [&](const FiniteRank& r) {
                       const int k = static_cast<int>(r.b.size());
                       Eigen::MatrixXcd v(2 * n, k);
                       for (int j = 0; j < k; ++j) v.col(j) = std::sqrt(c.h) * r.phi[j];
                       f.B1 = v * Eigen::VectorXd::Map(r.b.data(), k).cast<cplx>().asDiagonal();
                       f.B2 = v.adjoint();
                   },
                   [&](const DeltaShellCompact& d) {
                       const Eigen::MatrixXcd q = fourier_basis_l2(c, d.truncation);
                       f.B1 = Eigen::MatrixXcd::Zero(2 * n, q.cols());
                       f.B1.topRows(n) = d.eta * q;
                       f.B2 = Eigen::MatrixXcd::Zero(q.cols(), 2 * n);
                       f.B2.leftCols(n) = q.adjoint();
                   },
                   [&](const ObliqueType& o) {
                       const Eigen::MatrixXcd q = fourier_basis_l2(c, o.truncation);
                       f.B1 = Eigen::MatrixXcd::Zero(2 * n, q.cols());
                       f.B1.bottomRows(n) = -4.0 * o.eta * q;
                       f.B2 = Eigen::MatrixXcd::Zero(q.cols(), 2 * n);
                       f.B2.rightCols(n) = q.adjoint();
                   },
                   [&](const ConditionS& s) {
                       // Rank from the eigen-decomposition of the assembled blocks.
                       const Eigen::MatrixXcd b = assemble_B(s, c);
                       Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
                       const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
                       std::vector<int> keep;
                       for (int j = 0; j < es.eigenvalues().size(); ++j) {
                           if (std::abs(es.eigenvalues()(j)) > 1e-12 * top) keep.push_back(j);
                       }
                       const int k = static_cast<int>(keep.size());
                       Eigen::MatrixXcd u(2 * n, k);
                       Eigen::VectorXd l(k);
                       for (int j = 0; j < k; ++j) {
                           u.col(j) = es.eigenvectors().col(keep[j]);
                           l(j) = es.eigenvalues()(keep[j]);
                       }
                       f.B1 = u * l.cast<cplx>().asDiagonal();
                       f.B2 = u.adjoint();
                   },
                   [&](const DiracInduced& d) {
                       f.B1 = dirac_projection(apply_V(d.F), c.h).adjoint();
                       f.B2 = dirac_projection(apply_V(d.G), c.h);
                   }},
               spec);
    f.dim_K = static_cast<int>(f.B2.rows());
    return f;
}

}  // namespace

std::string interaction_name(const InteractionSpec& spec) {
    static const char* names[] = {"elementary", "finite_rank", "delta_shell", "oblique", "condition_s", "dirac_induced"};
    return names[spec.index()];
}

Eigen::VectorXcd fourier_mode_nodes(const DiscretizedCurve& curve, int n) {
    Eigen::VectorXcd e(curve.n);
    const double scale = 1.0 / std::sqrt(curve.length);
    for (int j = 0; j < curve.n; ++j) {
        e(j) = scale * std::polar(1.0, 2.0 * std::numbers::pi * n * j / curve.n);
    }
    return e;
}

Eigen::MatrixXcd fourier_basis_l2(const DiscretizedCurve& curve, int k) {
    if (k < 0 || 2 * k + 1 > curve.n) {
        throw Error(ErrorCode::TooManyModes, "Fourier truncation exceeds the resolution");
    }
    Eigen::MatrixXcd q(curve.n, 2 * k + 1);
    for (int j = 0; j < 2 * k + 1; ++j) {
        q.col(j) = std::sqrt(curve.h) * fourier_mode_nodes(curve, mode_index(j));
    }
    return q;
}

std::vector<Eigen::Matrix2cd> apply_V(const std::vector<Eigen::Matrix2cd>& A) {
    Eigen::Matrix2cd v;
    v << 1.0, 0.0, 0.0, cplx(0.0, -2.0);
    std::vector<Eigen::Matrix2cd> out(A.size());
    for (std::size_t j = 0; j < A.size(); ++j) out[j] = v * A[j];
    return out;
}

Eigen::MatrixXcd dirac_projection(const std::vector<Eigen::Matrix2cd>& A, double h) {
    const int n = static_cast<int>(A.size());
    Eigen::MatrixXcd p(2, 2 * n);
    const double s = std::sqrt(h);
    for (int j = 0; j < n; ++j) {
        const Eigen::Matrix2cd a = A[j].adjoint();
        for (int r = 0; r < 2; ++r) {
            p(r, j) = s * a(r, 0);
            p(r, n + j) = s * a(r, 1);
        }
    }
    return p;
}

void check_dirac_symmetry(const std::vector<Eigen::Matrix2cd>& F, const std::vector<Eigen::Matrix2cd>& G, double h) {
    if (F.size() != G.size()) {
        throw Error(ErrorCode::InvalidArgument, "F and G must have one matrix per node");
    }
    const Eigen::MatrixXcd pf = dirac_projection(F, h), pg = dirac_projection(G, h);
    const Eigen::MatrixXcd a = pf.adjoint() * pg, b = pg.adjoint() * pf;
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    if ((a - b).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw Error(ErrorCode::SymmetryViolation, "Pi*_F Pi_G differs from Pi*_G Pi_F");
    }
}

Eigen::MatrixXcd assemble_B(const InteractionSpec& spec, const DiscretizedCurve& curve) {
    const int n = curve.n;
    Eigen::MatrixXcd b;
    if (const auto* s = std::get_if<ConditionS>(&spec)) {
        b = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
        auto put = [&](const Eigen::MatrixXcd& m, int r, int c) {
            if (m.size() == 0) return;
            if (m.rows() != n || m.cols() != n) {
                throw Error(ErrorCode::InvalidArgument, "ConditionS block has the wrong size");
            }
            b.block(r, c, n, n) = m;
        };
        put(s->B11, 0, 0);
        put(s->B12, 0, n);
        if (s->B12.size() != 0) b.block(n, 0, n, n) = s->B12.adjoint();
        put(s->B22, n, n);
    } else {
        if (const auto* d = std::get_if<DiracInduced>(&spec)) {
            check_dirac_symmetry(apply_V(d->F), apply_V(d->G), curve.h);
        }
        const Factorization f = rank_factorization(spec, curve);
        b = f.B1 * f.B2;
    }
    const double scale = norm_or_one(b);
    if ((b - b.adjoint()).cwiseAbs().maxCoeff() > kHermTol * scale) {
        throw Error(ErrorCode::NonHermitianSpec, "assembled interaction is not hermitian");
    }
    if (std::holds_alternative<ConditionS>(spec)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -kPsdTol * scale) {
            throw Error(ErrorCode::NotPositive, "condition (S) interaction is not positive semidefinite");
        }
    }
    if (const auto* r = std::get_if<FiniteRank>(&spec)) {
        const int k = static_cast<int>(r->phi.size());
        if (static_cast<int>(r->b.size()) != k) throw Error(ErrorCode::RankMismatch, "b and phi lengths differ");
        for (int i = 0; i < k; ++i) {
            if (r->phi[i].size() != 2 * n) throw Error(ErrorCode::InvalidArgument, "phi_n must have 2N entries");
            for (int j = 0; j < k; ++j) {
                const cplx ip = curve.h * r->phi[i].dot(r->phi[j]);
                if (std::abs(ip - (i == j ? 1.0 : 0.0)) > 1e-10) {
                    throw Error(ErrorCode::InvalidArgument, "finite-rank vectors are not orthonormal");
                }
            }
        }
    }
    return b;
}

int declared_rank(const InteractionSpec& spec, const DiscretizedCurve& curve) {
    (void)curve;
    return std::visit(overloaded{[](const Elementary&) { return 2; },
                                 [](const FiniteRank& r) { return static_cast<int>(r.b.size()); },
                                 [](const DeltaShellCompact& d) { return 2 * d.truncation + 1; },
                                 [](const ObliqueType& o) { return 2 * o.truncation + 1; },
                                 [](const ConditionS& s) { return s.b.empty() ? -1 : static_cast<int>(s.b.size()); },
                                 [](const DiracInduced&) { return 2; }},
                      spec);
}

Factorization factorize(const InteractionSpec& spec, const DiscretizedCurve& curve, FactorMode mode) {
    if (mode == FactorMode::Rank) {
        assemble_B(spec, curve);  // validates the spec
        Factorization f = rank_factorization(spec, curve);
        const int k = declared_rank(spec, curve);
        if (k >= 0 && f.dim_K > k && !std::holds_alternative<ConditionS>(spec)) {
            throw Error(ErrorCode::RankMismatch, "factorization exceeds the declared rank");
        }
        return f;
    }
    const Eigen::MatrixXcd b = assemble_B(spec, curve);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < -kPsdTol * std::max(top, 1e-300)) {
        throw Error(ErrorCode::NotPositive, "square-root factorization needs B >= 0");
    }
    std::vector<int> keep;
    for (int j = 0; j < es.eigenvalues().size(); ++j) {
        if (es.eigenvalues()(j) > 1e-12 * top) keep.push_back(j);
    }
    Factorization f;
    f.mode = FactorMode::Sqrt;
    const int k = static_cast<int>(keep.size());
    f.U.resize(b.rows(), k);
    f.lambda.resize(k);
    for (int j = 0; j < k; ++j) {
        f.U.col(j) = es.eigenvectors().col(keep[j]);
        f.lambda(j) = es.eigenvalues()(keep[j]);
    }
    const Eigen::VectorXd root = f.lambda.cwiseSqrt();
    f.B1 = f.U * root.cast<cplx>().asDiagonal();
    f.B2 = f.B1.adjoint();
    f.dim_K = k;
    return f;
}

Factorization default_factorization(const InteractionSpec& spec, const DiscretizedCurve& curve) {
    return factorize(spec, curve, FactorMode::Rank);
}

ConditionS condition_s_family(DecayLaw law, double parameter, int count, const DiscretizedCurve& curve) {
    if (count < 1 || count > curve.n / 2) {
        throw Error(ErrorCode::TooManyModes, "condition (S) family needs 1 <= k <= N/2");
    }
    if (law == DecayLaw::Geometric && !(parameter > 0.0 && parameter < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "geometric ratio must lie in (0, 1)");
    }
    if (law == DecayLaw::Power && !(parameter > 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "power exponent must exceed 1");
    }
    ConditionS s;
    s.law = law == DecayLaw::Geometric ? "geometric" : "power";
    s.law_parameter = parameter;
    const int n = curve.n;
    s.B22 = Eigen::MatrixXcd::Zero(n, n);
    for (int k = 1; k <= count; ++k) {
        const double b = law == DecayLaw::Geometric ? std::pow(parameter, k) : std::pow(double(k), -parameter);
        s.b.push_back(b);
        const Eigen::VectorXcd v = std::sqrt(curve.h) * fourier_mode_nodes(curve, mode_index(k - 1));
        s.B22 += b * v * v.adjoint();
    }
    return s;
}

std::vector<double> condition_s_targets(const ConditionS& spec) {
    std::vector<double> t;
    for (double b : spec.b) t.push_back(-64.0 / (b * b));
    return t;
}

}  // namespace nlbem
