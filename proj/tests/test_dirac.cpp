#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "nlbem/dirac_nrl.hpp"
#include "nlbem/errors.hpp"
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>

using namespace nlbem;

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I1(0.0, 1.0);

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

// G = F H with H hermitian satisfies the symmetry condition.
DiracModel smooth_model(int n, double c) {
    std::vector<Eigen::Matrix2cd> F(n), G(n);
    Eigen::Matrix2cd H;
    H << 1.3, cplx(0.2, 0.5), cplx(0.2, -0.5), -0.7;
    for (int j = 0; j < n; ++j) {
        const double t = 2 * kPi * j / n;
        F[j] << 1.0 + 0.3 * std::cos(t), cplx(0.2, 0.1) * std::sin(t), 0.4, cplx(0.5, -0.2) + 0.2 * std::cos(2 * t);
        G[j] = F[j] * H;
    }
    return {F, G, c, false};
}

Eigen::MatrixXcd gaussian(const Grid2D& g, cplx x0, double sigma) {
    return gaussian_panel(g, {x0}, sigma).front();
}

double fro(const Eigen::MatrixXcd& m) { return m.norm(); }

}  // namespace

TEST_CASE("symmetry condition is enforced") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 32);
    DiracModel m = smooth_model(32, 2.0);
    for (auto& g : m.G) g(0, 1) += 0.3;
    const Grid2D grid = Grid2D::centered(3.0, 32);
    CHECK(code_of([&] { DiracResolvent(c, m, cplx(0, 1), grid); }) == ErrorCode::SymmetryViolation);
    CHECK(code_of([&] { dirac_gap_roots(c, m, 16); }) == ErrorCode::SymmetryViolation);
    m.G.pop_back();
    CHECK(code_of([&] { dirac_system(c, m, cplx(0, 1)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("free Dirac kernel: conjugate-pair symmetry") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        const double c = 1.0 + 3.0 * std::abs(u(rng));
        const cplx z(u(rng), 2.0 * u(rng) + 0.1);
        const cplx x(u(rng), u(rng)), y(u(rng), u(rng));
        const Eigen::Matrix2cd a = free_dirac_kernel(c, z, x, y);
        const Eigen::Matrix2cd b = free_dirac_kernel(c, std::conj(z), y, x);
        CHECK((a - b.adjoint()).norm() <= 1e-13 * a.norm());
    }
}

TEST_CASE("no interaction: free Dirac resolvent on a Gaussian") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 64);
    const std::vector<Eigen::Matrix2cd> zero(64, Eigen::Matrix2cd::Zero());
    const DiracModel m{zero, zero, 2.0, false};
    const Grid2D g = Grid2D::centered(3.0, 64);
    const cplx z(0.3, 0.2), x0(0.2, -0.1);
    const DiracField out = dirac_resolvent_apply(c, m, z, g, gaussian(g, x0, 0.35), Eigen::MatrixXcd::Zero(64, 64));
    double err = 0.0, peak = 0.0;
    for (int a = 0; a < 64; a += 7) {
        for (int b = 0; b < 64; b += 5) {
            if (!out.valid(a, b)) continue;
            const Eigen::Vector2cd ref = free_dirac_gaussian_reference(2.0, z, 0.35, x0, g.point(a, b));
            err = std::max({err, std::abs(ref(0) - out.u1(a, b)), std::abs(ref(1) - out.u2(a, b))});
            peak = std::max(peak, std::abs(ref(0)));
        }
    }
    CHECK(err <= 1e-4 * peak);
}

TEST_CASE("resolvent output satisfies the shell transmission condition") {
    // -i (sigma.n)(u+ - u-) = 1/2 F int G* (u+ + u-), + the bounded side
    const int n = 128;
    const auto c = discretize(CurveDescriptor::circle(1.0), n);
    const DiracModel m = smooth_model(n, 2.0);
    const Grid2D g = Grid2D::centered(3.0, 64);
    const cplx z(0.3, 0.2);
    const Eigen::MatrixXcd f = gaussian(g, cplx(0.2, -0.1), 0.35);
    const DiracField u = dirac_resolvent_apply(c, m, z, g, f, 0.5 * f);
    REQUIRE(u.layers.size() == 1);

    const DiracCoefficients k = dirac_coefficients(m, z);
    const FreeResolvent fr(g, k.lambda);
    const auto h1 = fr.transform(f), h2 = fr.transform(0.5 * f);
    const std::vector<cplx> nodes(c.nodes.data(), c.nodes.data() + n);
    Eigen::VectorXcd smooth(2 * n);
    smooth << k.free_u1 * fr.at_points(h1, nodes, kFieldU) + k.free_dz * fr.at_points(h2, nodes, kFieldDz),
        k.free_dzbar * fr.at_points(h1, nodes, kFieldDzbar) + k.free_u2 * fr.at_points(h2, nodes, kFieldU);
    const Eigen::VectorXcd& psi = u.layers[0].density;
    auto layer = [&](double d) {
        const PotentialOperators p = offset_potential_operators(c, k.lambda, d);
        Eigen::VectorXcd r(2 * n);
        r << k.pot_s1 * p.SL * psi.head(n) + k.pot_w * p.WL * psi.tail(n),
            k.pot_wt * p.WLt * psi.head(n) + k.pot_s2 * p.SL * psi.tail(n);
        return r;
    };
    const double d = 2e-3;
    const Eigen::VectorXcd inner = smooth + 2.0 * layer(-d) - layer(-2 * d);
    const Eigen::VectorXcd outer = smooth + 2.0 * layer(d) - layer(2 * d);
    Eigen::Vector2cd integral = Eigen::Vector2cd::Zero();
    for (int j = 0; j < n; ++j) {
        integral += c.h * m.G[j].adjoint() * Eigen::Vector2cd(inner(j) + outer(j), inner(n + j) + outer(n + j));
    }
    double err = 0.0, scale = 0.0;
    for (int j = 0; j < n; ++j) {
        const cplx nn = c.normals(j);
        Eigen::Matrix2cd sn;
        sn << 0.0, std::conj(nn), nn, 0.0;
        const Eigen::Vector2cd lhs = -I1 * sn * Eigen::Vector2cd(inner(j) - outer(j), inner(n + j) - outer(n + j));
        const Eigen::Vector2cd rhs = 0.5 * m.F[j] * integral;
        err = std::max(err, (lhs - rhs).norm());
        scale = std::max(scale, rhs.norm());
    }
    CHECK(err <= 1e-3 * scale);
}

TEST_CASE("Dirac first resolvent identity") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 64);
    const DiracModel m = smooth_model(64, 2.0);
    const Grid2D g = Grid2D::centered(4.5, 96);
    const Eigen::MatrixXcd f = gaussian(g, cplx(0.2, -0.1), 0.35);
    const cplx z1(0.5, 4.0), z2(-0.3, 5.0);
    const DiracResolvent r1(c, m, z1, g, true);
    const DiracField a = r1.apply(f, 0.5 * f);
    const DiracField b = dirac_resolvent_apply(c, m, z2, g, f, 0.5 * f);
    const DiracField ab = r1.apply(b);
    double err = 0.0, peak = 0.0;
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
            if (!a.valid(i, j)) continue;
            const cplx l1 = a.u1(i, j) - b.u1(i, j), l2 = a.u2(i, j) - b.u2(i, j);
            err = std::max({err, std::abs(l1 - (z1 - z2) * ab.u1(i, j)), std::abs(l2 - (z1 - z2) * ab.u2(i, j))});
            peak = std::max({peak, std::abs(l1), std::abs(l2)});
        }
    }
    CHECK(err <= 1e-3 * peak);
}

TEST_CASE("2x2 determinant is holomorphic") {
    const auto c = discretize(CurveDescriptor::ellipse(1.3, 1.0), 64);
    const DiracModel m = smooth_model(64, 2.0);
    for (cplx z : {cplx(0.4, 0.7), cplx(-1.0, 0.3)}) CHECK(dirac_holomorphy_defect(c, m, z) <= 1e-5);
}

TEST_CASE("rescaled boundary operator") {
    const auto c = discretize(CurveDescriptor::circle(1.0), 64);
    const int n = 64;
    DiracModel m = smooth_model(n, 10.0);
    m.rescaled = true;
    const cplx w(-1.0, 1.0);
    const DiracLayerSet s = assemble_dirac_boundary(c, m, w);
    const cplx wc = w + w * w / (m.c * m.c);
    CHECK(std::abs(s.coef.lambda - wc) == 0.0);
    CHECK((s.C.bottomRightCorner(n, n) - w * assemble_S(c, wc)).cwiseAbs().maxCoeff() <= 1e-14);

    // N_c(w) -> V* M(w) V at rate 1/c^2
    const LayerMatrices l = assemble_layers(c, w);
    Eigen::MatrixXcd vmv(2 * n, 2 * n);
    vmv << l.S, -2.0 * I1 * l.W, -2.0 * I1 * l.Wt, w * l.S;
    std::vector<double> cs{10.0, 30.0, 100.0}, err;
    for (double cv : cs) {
        m.c = cv;
        err.push_back(fro(assemble_dirac_boundary(c, m, w).C - vmv));
    }
    CHECK(std::abs(loglog_fit(cs, err).slope + 2.0) <= 0.2);

    // P(w) -> [[SL(w), -2i WL(w)], [0, 0]] at rate 1/c
    std::vector<cplx> pts;
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) pts.push_back(cplx(-2.2 + 0.88 * a, -2.1 + 0.85 * b));
    const PotentialOperators p = potential_operators(c, w, pts);
    const Eigen::Index q = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXcd limit = Eigen::MatrixXcd::Zero(2 * q, 2 * n);
    limit.topLeftCorner(q, n) = p.SL;
    limit.topRightCorner(q, n) = -2.0 * I1 * p.WL;
    err.clear();
    for (double cv : cs) {
        m.c = cv;
        err.push_back(fro(dirac_potential(c, m, w, pts) - limit));
    }
    CHECK(loglog_fit(cs, err).slope <= -0.8);
}

TEST_CASE("gap eigenvalues: at most two, matching the pencil inertia") {
    const int n = 64;
    const auto c = discretize(CurveDescriptor::circle(1.0), n);
    std::mt19937 rng(19);
    std::normal_distribution<double> nd;
    std::vector<DiracModel> models;
    for (int t = 0; t < 4; ++t) {
        Eigen::Matrix2cd a[3], h;
        for (auto& x : a)
            for (int i = 0; i < 4; ++i) x(i) = cplx(nd(rng), nd(rng));
        for (int i = 0; i < 4; ++i) h(i) = cplx(nd(rng), nd(rng));
        h = ((0.3 + t) * (h + h.adjoint())).eval();
        std::vector<Eigen::Matrix2cd> F(n), G(n);
        for (int j = 0; j < n; ++j) {
            const double s = 2 * kPi * j / n;
            F[j] = a[0] + a[1] * std::cos(s) + a[2] * std::sin(s);
            G[j] = F[j] * h;
        }
        models.push_back({F, G, 3.0, false});
    }
    const auto counts = dirac_gap_roots(c, models, 200);
    for (const auto& g : counts) {
        CHECK(g.roots <= 2);
        CHECK(g.roots == g.inertia_count);
        CHECK(g.max_imag_ratio <= 1e-8);
    }

    // at a root the resolvent is refused
    const DiracModel& m = models.back();
    REQUIRE(!counts.back().brackets.empty());
    const double mid = counts.back().brackets.front();
    const double step = 0.5 * 4.5 * kPi / 200;  // one theta cell maps to at most this much z
    const auto f = [&](double z) { return dirac_determinant(c, m, z).real(); };
    double lo = mid - step, hi = mid + step;
    if (f(lo) * f(hi) < 0.0) {
        const auto r = boost::math::tools::bisect(f, lo, hi, [](double x, double y) { return std::abs(x - y) < 1e-14; });
        const Grid2D grid = Grid2D::centered(3.0, 32);
        CHECK(code_of([&] { DiracResolvent(c, m, 0.5 * (r.first + r.second), grid); }) == ErrorCode::MatrixSingular);
    }
}

TEST_CASE("non-relativistic limit on a short c list") {
    const int n = 64;
    const auto c = discretize(CurveDescriptor::circle(1.0), n);
    std::vector<Eigen::Matrix2cd> F(n), G(n);
    for (int j = 0; j < n; ++j) {
        F[j] << 1.0, 0.0, 0.0, 0.0;
        G[j] << -0.4, 0.0, 0.0, 0.0;
    }
    const Grid2D g = Grid2D::centered(2.5, 48);
    const auto panel = gaussian_panel(g, {cplx(0, 0), cplx(0.5, 0.2), cplx(-0.3, -0.6), cplx(0.85, -0.85), cplx(-0.2, 0.9)}, 0.3);
    const NRStudy s = nr_limit_study(c, F, G, cplx(-1, 1), g, panel, {8.0, 16.0, 32.0});
    CHECK(std::abs(s.fit.slope + 1.0) <= 0.15);
    for (size_t i = 1; i < s.rows.size(); ++i) CHECK(s.rows[i].leakage < s.rows[i - 1].leakage);
    CHECK(std::isnan(s.rows[0].slope_so_far));
    CHECK(code_of([&] { nr_limit_study(c, F, G, cplx(-1, 1), g, panel, {8.0}); }) == ErrorCode::InvalidArgument);
}
