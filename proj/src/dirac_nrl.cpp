#include "nlbem/dirac_nrl.hpp"

#include "nlbem/errors.hpp"
#include "nlbem/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nlbem {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const cplx kI(0.0, 1.0);

bool same_w(cplx a, cplx b) { return std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(a)); }

void add_term(std::vector<DiracLayerTerm>& layers, cplx w, const Eigen::VectorXcd& density) {
    for (auto& l : layers) {
        if (l.w == w) {
            l.density += density;
            return;
        }
    }
    layers.push_back({w, density});
}

Eigen::MatrixXcd boundary_matrix(const DiracCoefficients& k, const LayerMatrices& l) {
    const Eigen::Index n = l.S.rows();
    Eigen::MatrixXcd c(2 * n, 2 * n);
    c.topLeftCorner(n, n) = k.bnd_s1 * l.S;
    c.topRightCorner(n, n) = k.bnd_w * l.W;
    c.bottomLeftCorner(n, n) = k.bnd_wt * l.Wt;
    c.bottomRightCorner(n, n) = k.bnd_s2 * l.S;
    return c;
}

Eigen::Matrix2cd system_from(const Eigen::MatrixXcd& pf, const Eigen::MatrixXcd& pg, const Eigen::MatrixXcd& c) {
    return Eigen::Matrix2cd::Identity() + pg * c * pf.adjoint();
}

}  // namespace

void validate_dirac_model(const DiscretizedCurve& curve, const DiracModel& model) {
    if (!(model.c > 0.0) || !std::isfinite(model.c)) throw Error(ErrorCode::InvalidArgument, "c must be positive");
    if (static_cast<int>(model.F.size()) != curve.n || static_cast<int>(model.G.size()) != curve.n) {
        throw Error(ErrorCode::InvalidArgument, "F and G need one matrix per node");
    }
    check_dirac_symmetry(model.F, model.G, curve.h);
}

DiracCoefficients dirac_coefficients(const DiracModel& model, cplx w) {
    const double c = model.c;
    const double rc = std::sqrt(c);
    DiracCoefficients k;
    if (model.rescaled) {
        // z = w + c^2/2; lambda computed without forming z
        k.lambda = w + w * w / (c * c);
        k.pot_s1 = 1.0 + w / (c * c);
        k.pot_w = -2.0 * kI;
        k.pot_wt = -2.0 * kI / c;
        k.pot_s2 = w / c;
        k.bnd_s1 = 1.0 + w / (c * c);
        k.bnd_w = -2.0 * kI;
        k.bnd_wt = -2.0 * kI;
        k.bnd_s2 = w;
        k.free_u1 = 1.0 + w / (c * c);
        k.free_dz = -2.0 * kI / c;
        k.free_dzbar = -2.0 * kI / c;
        k.free_u2 = w / (c * c);
        k.trace1 = 1.0;
        k.trace2 = c;
    } else {
        const cplx ap = w / c + c / 2.0, am = w / c - c / 2.0;
        k.lambda = w * w / (c * c) - c * c / 4.0;
        k.pot_s1 = ap / rc;
        k.pot_w = -2.0 * kI / rc;
        k.pot_wt = -2.0 * kI / rc;
        k.pot_s2 = am / rc;
        k.bnd_s1 = ap;
        k.bnd_w = -2.0 * kI;
        k.bnd_wt = -2.0 * kI;
        k.bnd_s2 = am;
        k.free_u1 = ap / c;
        k.free_dz = -2.0 * kI / c;
        k.free_dzbar = -2.0 * kI / c;
        k.free_u2 = am / c;
        k.trace1 = rc;
        k.trace2 = rc;
    }
    if (std::imag(k.lambda) == 0.0 && std::real(k.lambda) >= 0.0) {
        throw Error(ErrorCode::SpectralParamOnCut, "spectral argument outside the gap");
    }
    return k;
}

DiracLayerSet assemble_dirac_boundary(const DiscretizedCurve& curve, const DiracModel& model, cplx w) {
    DiracLayerSet s;
    s.coef = dirac_coefficients(model, w);
    s.layers = assemble_layers(curve, s.coef.lambda);
    s.C = boundary_matrix(s.coef, s.layers);
    return s;
}

Eigen::MatrixXcd dirac_potential(const DiscretizedCurve& curve, const DiracModel& model, cplx w,
                                 const std::vector<cplx>& points) {
    const DiracCoefficients k = dirac_coefficients(model, w);
    const PotentialOperators p = potential_operators(curve, k.lambda, points);
    const Eigen::Index m = static_cast<Eigen::Index>(points.size()), n = curve.n;
    Eigen::MatrixXcd out(2 * m, 2 * n);
    out.topLeftCorner(m, n) = k.pot_s1 * p.SL;
    out.topRightCorner(m, n) = k.pot_w * p.WL;
    out.bottomLeftCorner(m, n) = k.pot_wt * p.WLt;
    out.bottomRightCorner(m, n) = k.pot_s2 * p.SL;
    return out;
}

Eigen::Matrix2cd dirac_system(const DiscretizedCurve& curve, const DiracModel& model, cplx w) {
    validate_dirac_model(curve, model);
    const DiracLayerSet s = assemble_dirac_boundary(curve, model, w);
    return system_from(dirac_projection(model.F, curve.h), dirac_projection(model.G, curve.h), s.C);
}

cplx dirac_determinant(const DiscretizedCurve& curve, const DiracModel& model, cplx w) {
    return dirac_system(curve, model, w).determinant();
}

double dirac_holomorphy_defect(const DiscretizedCurve& curve, const DiracModel& model, cplx w, double step) {
    const double h = step * std::max(1.0, std::abs(w));
    const cplx dx = (dirac_determinant(curve, model, w + h) - dirac_determinant(curve, model, w - h)) / (2.0 * h);
    const cplx dy =
        (dirac_determinant(curve, model, w + kI * h) - dirac_determinant(curve, model, w - kI * h)) / (2.0 * h);
    if (std::abs(dx) == 0.0) return std::abs(dy);
    return std::abs(dx + kI * dy) / std::abs(dx);
}

Eigen::Matrix2cd free_dirac_kernel(double c, cplx z, cplx x, cplx y) {
    const cplx d = x - y;
    const double r = std::abs(d);
    if (r == 0.0) throw Error(ErrorCode::InvalidArgument, "kernel is singular on the diagonal");
    const cplx lambda = z * z / (c * c) - c * c / 4.0;
    const cplx sq = sqrt_im_positive(lambda);
    const BesselK01 k = bessel_k01(kappa_of(lambda) * r);
    Eigen::Matrix2cd sd;  // sigma.(x - y) / r
    sd << 0.0, std::conj(d) / r, d / r, 0.0;
    Eigen::Matrix2cd mass;
    mass << z / c + c / 2.0, 0.0, 0.0, z / c - c / 2.0;
    return (sq * k.k1 * sd + k.k0 * mass) / (2.0 * kPi * c);
}

Eigen::Vector2cd free_dirac_gaussian_reference(double c, cplx z, double sigma, cplx x0, cplx x) {
    const cplx lambda = z * z / (c * c) - c * c / 4.0;
    const cplx d = x - x0;
    const double r = std::abs(d);
    const RadialValue v = gaussian_resolvent_reference(lambda, sigma, r);
    const cplx dzbar = r > 0.0 ? 0.5 * (d / r) * v.du_dr : cplx(0.0);
    return {(z / c + c / 2.0) / c * v.u, -2.0 * kI / c * dzbar};
}

DiracResolvent::DiracResolvent(const DiscretizedCurve& curve, const DiracModel& model, cplx w, const Grid2D& grid,
                               bool relaxed_resolution)
    : curve_(curve),
      model_(model),
      w_(w),
      grid_(grid),
      relaxed_(relaxed_resolution),
      set_(assemble_dirac_boundary(curve, model, w)),
      free_(grid, set_.coef.lambda) {
    validate_dirac_model(curve, model);
    pf_ = dirac_projection(model.F, curve.h);
    pg_ = dirac_projection(model.G, curve.h);
    system_ = system_from(pf_, pg_, set_.C);
    const double scale = std::max(1.0, system_.cwiseAbs().maxCoeff());
    if (Eigen::JacobiSVD<Eigen::Matrix2cd>(system_).singularValues()(1) < 1e-10 * scale) {
        throw Error(ErrorCode::MatrixSingular, "I + Pi_G C Pi*_F is singular at this spectral argument");
    }
    valid_ = grid_mask(curve, grid);
    for (int a = 0; a < grid.n; ++a) {
        for (int b = 0; b < grid.n; ++b) {
            if (!valid_(a, b)) continue;
            points_.push_back(grid.point(a, b));
            where_.push_back({a, b});
        }
    }
    potential_ = dirac_potential(curve, model, w, points_);
}

DiracField DiracResolvent::apply(const Eigen::MatrixXcd& f1, const Eigen::MatrixXcd& f2) const {
    return run(f1, f2, {});
}

DiracField DiracResolvent::apply(const DiracField& field) const {
    return run(field.smooth1, field.smooth2, field.layers);
}

DiracField DiracResolvent::run(const Eigen::MatrixXcd& f1, const Eigen::MatrixXcd& f2,
                               const std::vector<DiracLayerTerm>& layers) const {
    const int n = curve_.n;
    const DiracCoefficients& k = set_.coef;
    DiracField r;
    r.valid = valid_;
    r.system = system_;

    // free part: out = [k.u1 u1 + k.dz dz u2, k.dzbar dzbar u1 + k.u2 u2], u_j = (-Delta - lambda)^{-1} f_j
    const bool checked = !relaxed_;
    const FreeResolvent::Spectrum h1 = free_.transform(f1, checked);
    const FreeResolvent::Spectrum h2 = free_.transform(f2, checked);
    r.smooth1 = k.free_u1 * free_.on_grid(h1, kFieldU) + k.free_dz * free_.on_grid(h2, kFieldDz);
    r.smooth2 = k.free_dzbar * free_.on_grid(h1, kFieldDzbar) + k.free_u2 * free_.on_grid(h2, kFieldU);

    const std::vector<cplx> nodes(curve_.nodes.data(), curve_.nodes.data() + n);
    Eigen::VectorXcd t(2 * n);
    t.head(n) = k.trace1 * (k.free_u1 * free_.at_points(h1, nodes, kFieldU) +
                            k.free_dz * free_.at_points(h2, nodes, kFieldDz));
    t.tail(n) = k.trace2 * (k.free_dzbar * free_.at_points(h1, nodes, kFieldDzbar) +
                            k.free_u2 * free_.at_points(h2, nodes, kFieldU));

    for (const auto& l : layers) {
        if (same_w(l.w, w_)) throw Error(ErrorCode::InvalidArgument, "layer term at the same spectral argument");
        const Eigen::VectorXcd scaled = l.density / (w_ - l.w);
        t += (set_.C - assemble_dirac_boundary(curve_, model_, l.w).C) * scaled;
        add_term(r.layers, w_, scaled);
        add_term(r.layers, l.w, -scaled);
    }

    const double sqrt_h = std::sqrt(curve_.h);
    const Eigen::Vector2cd xi = pg_ * (sqrt_h * t);
    const Eigen::VectorXcd phi = pf_.adjoint() * system_.fullPivLu().solve(xi) / sqrt_h;
    add_term(r.layers, w_, -phi);

    const Eigen::Index m = static_cast<Eigen::Index>(points_.size());
    Eigen::VectorXcd field = Eigen::VectorXcd::Zero(2 * m);
    for (const auto& l : r.layers) {
        if (l.density.norm() == 0.0) continue;
        if (l.w == w_) {
            field += potential_ * l.density;
        } else {
            field += dirac_potential(curve_, model_, l.w, points_) * l.density;
        }
    }
    r.u1 = Eigen::MatrixXcd::Zero(grid_.n, grid_.n);
    r.u2 = Eigen::MatrixXcd::Zero(grid_.n, grid_.n);
    for (Eigen::Index p = 0; p < m; ++p) {
        const auto [a, b] = where_[static_cast<size_t>(p)];
        r.u1(a, b) = r.smooth1(a, b) + field(p);
        r.u2(a, b) = r.smooth2(a, b) + field(m + p);
    }
    return r;
}

DiracField dirac_resolvent_apply(const DiscretizedCurve& curve, const DiracModel& model, cplx w, const Grid2D& grid,
                                 const Eigen::MatrixXcd& f1, const Eigen::MatrixXcd& f2) {
    return DiracResolvent(curve, model, w, grid).apply(f1, f2);
}

std::vector<double> default_c_list() { return {8.0, 16.0, 32.0, 64.0, 128.0, 256.0}; }

std::vector<Eigen::MatrixXcd> gaussian_panel(const Grid2D& grid, const std::vector<cplx>& centres, double sigma) {
    std::vector<Eigen::MatrixXcd> panel;
    for (const cplx x0 : centres) {
        Eigen::MatrixXcd g(grid.n, grid.n);
        for (int a = 0; a < grid.n; ++a)
            for (int b = 0; b < grid.n; ++b) g(a, b) = std::exp(-std::norm(grid.point(a, b) - x0) / (2 * sigma * sigma));
        panel.push_back(std::move(g));
    }
    return panel;
}

NRStudy nr_limit_study(const DiscretizedCurve& curve, const std::vector<Eigen::Matrix2cd>& F,
                       const std::vector<Eigen::Matrix2cd>& G, cplx w, const Grid2D& grid,
                       const std::vector<Eigen::MatrixXcd>& panel, const std::vector<double>& c_list) {
    if (c_list.size() < 2) throw Error(ErrorCode::InvalidArgument, "the rate fit needs two or more c values");
    if (panel.empty()) throw Error(ErrorCode::InvalidArgument, "empty right-hand-side panel");
    check_dirac_symmetry(F, G, curve.h);

    const KreinResolvent schroedinger(curve, DiracInduced{F, G}, w, grid);
    std::vector<Eigen::MatrixXcd> reference;
    std::vector<double> peaks;
    for (const auto& f : panel) {
        reference.push_back(schroedinger.apply(f).u);
        peaks.push_back(reference.back().cwiseAbs().maxCoeff());
    }
    const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(grid.n, grid.n);

    NRStudy study;
    std::vector<double> cs, ds, ls;
    for (const double c : c_list) {
        const DiracResolvent dirac(curve, DiracModel{F, G, c, true}, w, grid);
        NRRow row;
        row.c = c;
        for (size_t p = 0; p < panel.size(); ++p) {
            const DiracField out = dirac.apply(panel[p], zero);
            const double gap = std::max((out.u1 - reference[p]).cwiseAbs().maxCoeff(), out.u2.cwiseAbs().maxCoeff());
            row.discrepancy = std::max(row.discrepancy, gap / peaks[p]);
            row.leakage = std::max(row.leakage, out.u2.norm() / out.u1.norm());
        }
        cs.push_back(c);
        ds.push_back(row.discrepancy);
        ls.push_back(row.leakage);
        row.slope_so_far = cs.size() >= 2 ? loglog_fit(cs, ds).slope : kNaN;
        study.rows.push_back(row);
    }
    study.fit = loglog_fit(cs, ds);
    study.leakage_fit = loglog_fit(cs, ls);
    if (study.fit.r2 < 0.9) {
        throw Error(ErrorCode::SlopeFitUnstable, "rate fit has R^2 = " + std::to_string(study.fit.r2));
    }
    return study;
}

namespace {

GapCount count_gap_roots(const DiracModel& model, double h, const std::vector<double>& z,
                         const std::vector<LayerMatrices>& layers) {
    const int samples = static_cast<int>(z.size());
    const Eigen::MatrixXcd pf = dirac_projection(model.F, h), pg = dirac_projection(model.G, h);
    std::vector<cplx> det(samples);
    std::vector<Eigen::MatrixXcd> cz(samples);
    for (int k = 0; k < samples; ++k) {
        cz[k] = boundary_matrix(dirac_coefficients(model, z[k]), layers[std::min(k, samples - 1 - k)]);
        det[k] = system_from(pf, pg, cz[k]).determinant();
    }

    GapCount g;
    g.z_lo = z.back();
    g.z_hi = z.front();
    double peak = 0.0;
    for (const cplx d : det) peak = std::max(peak, std::abs(d));
    for (const cplx d : det) {
        if (std::abs(d) > 0.0) g.max_imag_ratio = std::max(g.max_imag_ratio, std::abs(d.imag()) / std::abs(d));
    }
    auto sign = [&](int k) { return det[k].real() > 0.0 ? 1 : (det[k].real() < 0.0 ? -1 : 0); };
    for (int k = 0; k + 1 < samples; ++k) {
        if (sign(k) * sign(k + 1) < 0) {
            ++g.sign_changes;
            g.brackets.push_back(0.5 * (z[k] + z[k + 1]));
        }
    }
    for (int k = 1; k + 1 < samples; ++k) {
        const double a = std::abs(det[k]);
        if (a <= std::abs(det[k - 1]) && a <= std::abs(det[k + 1]) && a < 1e-6 * peak && sign(k - 1) == sign(k + 1)) {
            ++g.touch_points;
        }
    }
    g.roots = g.sign_changes + 2 * g.touch_points;

    // Pencil diag(1/lambda) + U* C(z) U on the range of B = Pi*_F Pi_G: its eigenvalues
    // are nondecreasing in z, so the negative-count drop is the eigenvalue count.
    const Eigen::MatrixXcd b = pf.adjoint() * pg;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (b + b.adjoint()));
    const double bmax = eig.eigenvalues().cwiseAbs().maxCoeff();
    std::vector<int> keep;
    for (int j = 0; j < eig.eigenvalues().size(); ++j)
        if (std::abs(eig.eigenvalues()(j)) > 1e-10 * bmax) keep.push_back(j);
    auto negatives = [&](int k) {
        if (keep.empty()) return 0;
        const auto r = static_cast<Eigen::Index>(keep.size());
        Eigen::MatrixXcd u(b.rows(), r);
        Eigen::VectorXd inv(r);
        for (Eigen::Index q = 0; q < r; ++q) {
            u.col(q) = eig.eigenvectors().col(keep[q]);
            inv(q) = 1.0 / eig.eigenvalues()(keep[q]);
        }
        Eigen::MatrixXcd hz = u.adjoint() * cz[k] * u;
        hz = (0.5 * (hz + hz.adjoint())).eval();
        hz.diagonal() += inv.cast<cplx>();
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(hz, Eigen::EigenvaluesOnly).eigenvalues();
        return static_cast<int>((ev.array() < 0.0).count());
    };
    g.inertia_count = negatives(samples - 1) - negatives(0);
    return g;
}

}  // namespace

std::vector<GapCount> dirac_gap_roots(const DiscretizedCurve& curve, const std::vector<DiracModel>& models,
                                      int samples) {
    if (models.empty()) return {};
    if (samples < 8) throw Error(ErrorCode::InvalidArgument, "gap scan needs 8 or more samples");
    const double c = models.front().c;
    for (const auto& m : models) {
        if (m.rescaled) throw Error(ErrorCode::InvalidArgument, "gap scan uses the plain model");
        if (m.c != c) throw Error(ErrorCode::InvalidArgument, "batched gap scans need a common c");
        validate_dirac_model(curve, m);
    }
    const double half = c * c / 2.0;
    std::vector<double> z(samples);
    for (int k = 0; k < samples; ++k) z[k] = half * std::cos(kPi * (k + 0.5) / samples);  // decreasing
    // z[k] and z[samples - 1 - k] share lambda
    std::vector<LayerMatrices> layers((samples + 1) / 2);
    parallel_for(static_cast<int>(layers.size()), [&](int k) {
        layers[k] = assemble_layers(curve, dirac_coefficients(models.front(), z[k]).lambda);
    });
    std::vector<GapCount> out(models.size());
    parallel_for(static_cast<int>(models.size()),
                 [&](int i) { out[i] = count_gap_roots(models[i], curve.h, z, layers); });
    return out;
}

GapCount dirac_gap_roots(const DiscretizedCurve& curve, const DiracModel& model, int samples) {
    return dirac_gap_roots(curve, std::vector<DiracModel>{model}, samples).front();
}

}  // namespace nlbem
