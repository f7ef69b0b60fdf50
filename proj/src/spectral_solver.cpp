#include "nlbem/spectral_solver.hpp"

#include "nlbem/errors.hpp"
#include "nlbem/parallel.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nlbem {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double smallest_singular_value(const Eigen::MatrixXcd& a) {
    if (a.rows() == 0) return 1.0;
    return Eigen::BDCSVD<Eigen::MatrixXcd>(a).singularValues().minCoeff();
}

Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& h) {
    if (h.rows() == 0) return Eigen::VectorXd();
    const Eigen::MatrixXcd sym = 0.5 * (h + h.adjoint());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(sym, Eigen::EigenvaluesOnly).eigenvalues();
}

int negatives(const Eigen::VectorXd& ev) {
    return static_cast<int>(std::count_if(ev.data(), ev.data() + ev.size(), [](double x) { return x < 0.0; }));
}

double spectral_norm(const Eigen::MatrixXcd& a) {
    return Eigen::BDCSVD<Eigen::MatrixXcd>(a).singularValues()(0);
}

}  // namespace

bool WeylCache::find(cplx w, unsigned blocks, Eigen::MatrixXcd& out) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = entries_.find({w.real(), w.imag(), blocks});
    if (it == entries_.end()) return false;
    out = it->second;
    return true;
}

void WeylCache::store(cplx w, unsigned blocks, const Eigen::MatrixXcd& m) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[{w.real(), w.imag(), blocks}] = m;
}

BirmanSchwinger::BirmanSchwinger(const DiscretizedCurve& curve, const InteractionSpec& spec, FactorMode mode,
                                 std::shared_ptr<WeylCache> cache)
    : curve_(curve), cache_(std::move(cache)) {
    fact_ = factorize(spec, curve, mode);
    b_ = assemble_B(spec, curve);
    const int n = curve.n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b_);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    std::vector<int> keep;
    for (int j = 0; j < es.eigenvalues().size(); ++j) {
        if (top > 0.0 && std::abs(es.eigenvalues()(j)) > 1e-12 * top) keep.push_back(j);
    }
    u_.resize(2 * n, static_cast<Eigen::Index>(keep.size()));
    lambda_.resize(static_cast<Eigen::Index>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j) {
        u_.col(j) = es.eigenvectors().col(keep[j]);
        lambda_(j) = es.eigenvalues()(keep[j]);
    }
    positive_ = lambda_.size() > 0 && lambda_.minCoeff() > 0.0;
    const double un = u_.norm();
    block_[0] = un > 0.0 && u_.topRows(n).norm() > 1e-13 * un;
    block_[1] = un > 0.0 && u_.bottomRows(n).norm() > 1e-13 * un;
}

Eigen::MatrixXcd BirmanSchwinger::weyl(cplx w) const {
    const unsigned blocks = (block_[0] ? 1u : 0u) | (block_[1] ? 2u : 0u);
    Eigen::MatrixXcd m;
    if (cache_ && cache_->find(w, blocks, m)) return m;
    const int n = curve_.n;
    m = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    if (blocks != 0) {
        const unsigned mask = blocks == 3u ? kLayerAll : kLayerS;
        const LayerMatrices l = assemble_layers(curve_, w, mask);
        if (block_[0]) m.topLeftCorner(n, n) = l.S;
        if (block_[1]) m.bottomRightCorner(n, n) = (w / 4.0) * l.S;
        if (blocks == 3u) {
            m.topRightCorner(n, n) = l.W;
            m.bottomLeftCorner(n, n) = -l.Wt;
        }
    }
    if (cache_) cache_->store(w, blocks, m);
    return m;
}

Eigen::MatrixXcd BirmanSchwinger::system(const Eigen::MatrixXcd& m) const {
    const int k = fact_.dim_K;
    return Eigen::MatrixXcd::Identity(k, k) + fact_.B2 * m * fact_.B1;
}

Eigen::MatrixXcd BirmanSchwinger::pencil(const Eigen::MatrixXcd& m) const {
    Eigen::MatrixXcd h = u_.adjoint() * m * u_;
    h.diagonal() += lambda_.cwiseInverse().cast<cplx>();
    return h;
}

Eigen::VectorXd BirmanSchwinger::pencil_eigenvalues(double w) const {
    return hermitian_eigenvalues(pencil(weyl(w)));
}

BSSample BirmanSchwinger::sample(double w, int mu_count) const {
    BSSample s;
    s.w = w;
    const Eigen::MatrixXcd m = weyl(w);
    s.indicator = smallest_singular_value(system(m));
    s.negative_count = negatives(hermitian_eigenvalues(pencil(m)));
    if (mu_count > 0 && positive_) {
        // A(w) = -|w|^{-1/2} B^{1/2} M B^{1/2}, restricted to the range of B
        const Eigen::VectorXcd root = lambda_.cwiseSqrt().cast<cplx>();
        const Eigen::MatrixXcd a = -(root.asDiagonal() * (u_.adjoint() * m * u_) * root.asDiagonal()) / std::sqrt(std::abs(w));
        Eigen::VectorXd ev = hermitian_eigenvalues(a);
        std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
        for (int k = 0; k < std::min<int>(mu_count, static_cast<int>(ev.size())); ++k) s.mu_values.push_back(ev(k));
    }
    return s;
}

BSSample bs_indicator(const DiscretizedCurve& curve, const InteractionSpec& spec, double w, FactorMode mode,
                      int mu_count) {
    if (!(w < 0.0)) throw Error(ErrorCode::InvalidArgument, "indicator needs w < 0");
    return BirmanSchwinger(curve, spec, mode).sample(w, mu_count);
}

std::vector<double> log_spaced(double a, double b, int count) {
    if (count < 2 || a * b <= 0.0) throw Error(ErrorCode::InvalidArgument, "log spacing needs two same-sign ends");
    std::vector<double> out(count);
    const double sign = a < 0.0 ? -1.0 : 1.0;
    const double la = std::log(std::abs(a)), lb = std::log(std::abs(b));
    for (int i = 0; i < count; ++i) out[i] = sign * std::exp(la + (lb - la) * i / (count - 1));
    out.front() = a;
    out.back() = b;
    return out;
}

double default_scan_floor(const DiscretizedCurve& curve, const InteractionSpec& spec) {
    const Eigen::MatrixXcd b = assemble_B(spec, curve);
    const int n = curve.n;
    double depth = 50.0;
    const Eigen::MatrixXcd b11 = b.topLeftCorner(n, n);
    if (b11.norm() > 0.0) depth = std::max(depth, 4.0 * std::pow(spectral_norm(b11), 2));
    const Eigen::MatrixXcd b22 = b.bottomRightCorner(n, n);
    if (b22.norm() > 0.0) {
        const Eigen::VectorXd ev = hermitian_eigenvalues(b22);
        const double top = ev.cwiseAbs().maxCoeff();
        double smallest = std::numeric_limits<double>::infinity();
        for (int j = 0; j < ev.size(); ++j) {
            if (ev(j) > 1e-10 * top) smallest = std::min(smallest, ev(j));
        }
        if (std::isfinite(smallest)) depth = std::max(depth, 256.0 / (smallest * smallest));
    }
    return -std::min(depth, 4e6);
}

Residuals eigenfunction_residuals(const DiscretizedCurve& curve, const Eigen::MatrixXcd& B, double w,
                                  const Eigen::VectorXcd& phi) {
    const int n = curve.n;
    const Eigen::VectorXcd phi1 = phi.head(n), phi2 = phi.tail(n);
    const double kappa = std::sqrt(std::abs(w));
    const double len = curve.length;
    Residuals r;

    // Helmholtz residual by 5-point differences at 8 interior and 8 exterior probes
    const double d = std::max(2e-3 * len, std::min(0.3 * len / (2 * kPi), 3.0 / kappa));
    const double step = std::min(1e-3 * len / (2 * kPi), 0.02 / kappa);
    std::vector<cplx> pts;
    for (int side = 0; side < 2; ++side) {
        for (int k = 0; k < 8; ++k) {
            const int j = k * n / 8;
            const cplx c = curve.nodes(j) + (side == 0 ? -d : d) * curve.normals(j);
            for (cplx off : {cplx(0, 0), cplx(step, 0), cplx(-step, 0), cplx(0, step), cplx(0, -step)}) pts.push_back(c + off);
        }
    }
    const PotentialField field = evaluate_gamma_field(curve, w, phi1, phi2, pts);
    double fmax = 0.0, worst = 0.0;
    for (int p = 0; p < 16; ++p) fmax = std::max(fmax, std::abs(field.values(5 * p)));
    for (int p = 0; p < 16; ++p) {
        const cplx* v = field.values.data() + 5 * p;
        const cplx lap = (v[1] + v[2] + v[3] + v[4] - 4.0 * v[0]) / (step * step);
        worst = std::max(worst, std::abs(-lap - w * v[0]));
    }
    r.pde = fmax > 0.0 ? worst / (std::max(1.0, std::abs(w)) * fmax) : kNaN;

    // transmission condition Gamma0 f + B Gamma1 f = 0 from extrapolated one-sided traces
    const OneSidedTraces in = one_sided_traces(curve, w, phi1, phi2, Side::Interior);
    const OneSidedTraces out = one_sided_traces(curve, w, phi1, phi2, Side::Exterior);
    Eigen::VectorXcd g0(2 * n), g1(2 * n);
    for (int j = 0; j < n; ++j) {
        const cplx nn = curve.normals(j);
        g0(j) = 2.0 * std::conj(nn) * (in.dzbar_f(j) - out.dzbar_f(j));
        g0(n + j) = 2.0 * nn * (in.f(j) - out.f(j));
        g1(j) = 0.5 * (in.f(j) + out.f(j));
        g1(n + j) = -0.5 * (in.dzbar_f(j) + out.dzbar_f(j));
    }
    // uniform weights: the l2 matrix of B acts on nodal vectors unchanged
    r.tc = (g0 + B * g1).norm() / g1.norm();
    return r;
}

EigenSearch find_eigenvalues(const DiscretizedCurve& curve, const InteractionSpec& spec, const ScanOptions& opt) {
    if (!(opt.w_min < opt.w_max && opt.w_max < 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "scan range must satisfy w_min < w_max < 0");
    }
    if (opt.points < 64) throw Error(ErrorCode::InvalidArgument, "scan grid needs at least 64 points");
    const BirmanSchwinger bs(curve, spec, opt.mode, opt.cache);
    const int mu_count = bs.positive() ? opt.mu_count : 0;
    EigenSearch out;
    if (opt.mu_count > 0 && !bs.positive()) out.warnings.push_back("mu tracking skipped: B is not positive semidefinite");

    const std::vector<double> grid = log_spaced(opt.w_min, opt.w_max, opt.points);
    out.scan.resize(grid.size());
    parallel_for(static_cast<int>(grid.size()), [&](int i) { out.scan[i] = bs.sample(grid[i], mu_count); });

    const double tol = opt.rel_tol;
    const auto stop = [tol](double a, double b) { return std::abs(a - b) <= tol * std::min(std::abs(a), std::abs(b)); };

    std::vector<double> roots;
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
        const int nl = out.scan[i].negative_count, nr = out.scan[i + 1].negative_count;
        if (nl == nr) continue;
        if (nl < nr) {
            out.warnings.push_back("pencil inertia increased on [" + std::to_string(grid[i]) + ", " +
                                   std::to_string(grid[i + 1]) + "]");
        }
        for (int j = std::min(nl, nr); j < std::max(nl, nr); ++j) {
            const auto f = [&](double w) { return bs.pencil_eigenvalues(w)(j); };
            double fa = f(grid[i]), fb = f(grid[i + 1]);
            if (fa == 0.0) {
                roots.push_back(grid[i]);
                continue;
            }
            if (fb == 0.0) {
                roots.push_back(grid[i + 1]);
                continue;
            }
            if (fa * fb > 0.0) {
                out.warnings.push_back("NoBracket: sorted pencil eigenvalue keeps its sign near w = " +
                                       std::to_string(grid[i]));
                continue;
            }
            std::uintmax_t iters = 100;
            const auto br = boost::math::tools::toms748_solve(f, grid[i], grid[i + 1], fa, fb, stop, iters);
            roots.push_back(0.5 * (br.first + br.second));
        }
    }

    // tangential zeros: local minima of the indicator that carry no inertia change
    for (size_t i = 1; i + 1 < grid.size(); ++i) {
        const double v = out.scan[i].indicator;
        if (!(v < out.scan[i - 1].indicator && v < out.scan[i + 1].indicator)) continue;
        if (out.scan[i - 1].negative_count != out.scan[i + 1].negative_count) continue;
        const auto g = [&](double x) { return bs.sample(-std::exp(x)).indicator; };
        const auto m = boost::math::tools::brent_find_minima(g, std::log(-grid[i + 1]), std::log(-grid[i - 1]), 40);
        if (m.second < 1e-6) {
            roots.push_back(-std::exp(m.first));
            roots.push_back(-std::exp(m.first));
        } else if (m.second < 1e-3) {
            out.warnings.push_back("NoBracket: indicator minimum " + std::to_string(m.second) + " at w = " +
                                   std::to_string(-std::exp(m.first)));
        }
    }

    for (const double edge : {grid.front(), grid.back()}) {
        const Eigen::VectorXd ev = bs.pencil_eigenvalues(edge);
        if (ev.size() > 0 && ev.cwiseAbs().minCoeff() < 1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff())) {
            out.warnings.push_back("RootAtRangeBoundary: w = " + std::to_string(edge));
        }
    }

    std::sort(roots.begin(), roots.end());
    std::vector<std::pair<double, int>> merged;
    for (double r : roots) {
        if (!merged.empty() && std::abs(r - merged.back().first) <= 1e-6 * std::abs(r)) {
            merged.back().second += 1;
        } else {
            merged.push_back({r, 1});
        }
    }

    const double sqrt_h = std::sqrt(curve.h);
    for (const auto& [w, count] : merged) {
        EigenResult e;
        e.w_star = w;
        const Eigen::MatrixXcd sys = bs.system(bs.weyl(w));
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sys, Eigen::ComputeFullV);
        const Eigen::VectorXd sv = svd.singularValues();
        const int last = static_cast<int>(sv.size()) - 1;
        const double thresh = std::max(10.0 * sv(last), 1e-7);
        const int svd_mult = static_cast<int>((sv.array() <= thresh).count());
        e.multiplicity = std::max(count, svd_mult);
        e.null_vector = svd.matrixV().col(last);
        e.residual_bs = (sys * e.null_vector).norm() / e.null_vector.norm();
        e.phi = bs.factorization().B1 * e.null_vector / sqrt_h;
        e.residual_pde = e.residual_tc = kNaN;
        if (opt.compute_residuals) {
            try {
                const Residuals r = eigenfunction_residuals(curve, bs.B(), w, e.phi);
                e.residual_pde = r.pde;
                e.residual_tc = r.tc;
            } catch (const Error& err) {
                out.warnings.push_back(std::string("residuals at w = ") + std::to_string(w) + ": " + err.what());
            }
        }
        out.eigenvalues.push_back(std::move(e));
    }

    for (int k = 1; k <= mu_count; ++k) {
        TrackedRoot t;
        t.k = k;
        t.w = kNaN;
        const auto f = [&](double w) {
            const BSSample s = bs.sample(w, k);
            return 1.0 / std::sqrt(std::abs(w)) - s.mu_values.at(k - 1);
        };
        for (size_t i = 0; i + 1 < grid.size() && !t.found; ++i) {
            if (out.scan[i].mu_values.size() < static_cast<size_t>(k)) break;
            const double fa = 1.0 / std::sqrt(std::abs(grid[i])) - out.scan[i].mu_values[k - 1];
            const double fb = 1.0 / std::sqrt(std::abs(grid[i + 1])) - out.scan[i + 1].mu_values[k - 1];
            if (fa == 0.0 || fa * fb > 0.0) continue;
            std::uintmax_t iters = 100;
            const auto br = boost::math::tools::toms748_solve(f, grid[i], grid[i + 1], fa, fb, stop, iters);
            t.w = 0.5 * (br.first + br.second);
            t.found = true;
        }
        out.tracked.push_back(t);
    }
    return out;
}

int count_eigenvalues(const DiscretizedCurve& curve, const InteractionSpec& spec, double w_lo, double w_hi) {
    if (!(w_lo < w_hi && w_hi < 0.0)) throw Error(ErrorCode::InvalidArgument, "count range must satisfy w_lo < w_hi < 0");
    const BirmanSchwinger bs(curve, spec);
    return negatives(bs.pencil_eigenvalues(w_lo)) - negatives(bs.pencil_eigenvalues(w_hi));
}

namespace {

// gamma(conj w)^* applied to grid data: (trace of u, -trace of dzbar u), u = (-Delta - w)^{-1} data
Eigen::VectorXcd adjoint_gamma_traces(const DiscretizedCurve& curve, const FreeResolvent& r,
                                      const FreeResolvent::Spectrum& s) {
    const int n = curve.n;
    const std::vector<cplx> nodes(curve.nodes.data(), curve.nodes.data() + n);
    Eigen::VectorXcd g(2 * n);
    g.head(n) = r.at_points(s, nodes, kFieldU);
    g.tail(n) = -r.at_points(s, nodes, kFieldDzbar);
    return g;
}

void add_layer(std::vector<LayerTerm>& layers, cplx w, const Eigen::VectorXcd& density) {
    for (auto& l : layers) {
        if (l.w == w) {
            l.density += density;
            return;
        }
    }
    layers.push_back({w, density});
}

}  // namespace

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> grid_mask(const DiscretizedCurve& curve, const Grid2D& grid) {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> m(grid.n, grid.n);
    const double floor = 1e-3 * curve.length;
    for (int a = 0; a < grid.n; ++a)
        for (int b = 0; b < grid.n; ++b) m(a, b) = distance_to_curve(curve, grid.point(a, b)) >= floor;
    return m;
}

KreinResolvent::KreinResolvent(const DiscretizedCurve& curve, const InteractionSpec& spec, cplx w,
                               const Grid2D& grid, const KreinOptions& options)
    : curve_(curve), w_(w), grid_(grid), options_(options), free_(grid, w) {
    const BirmanSchwinger bs(curve, spec, options.mode);
    fact_ = bs.factorization();
    const Eigen::MatrixXcd sys = bs.system(bs.weyl(w));
    indicator_ = smallest_singular_value(sys);
    if (indicator_ < 1e-6) throw Error(ErrorCode::NearSpectrum, "I + B2 M B1 is nearly singular at this w");
    lu_.compute(sys);
    valid_ = grid_mask(curve, grid);
    for (int a = 0; a < grid.n; ++a) {
        for (int b = 0; b < grid.n; ++b) {
            if (!valid_(a, b)) continue;
            points_.push_back(grid.point(a, b));
            where_.push_back({a, b});
        }
    }
    potentials_ = potential_operators(curve, w, points_, kLayerS | kLayerW);
}

KreinResult KreinResolvent::apply(const Eigen::MatrixXcd& rhs) const { return run(rhs, {}); }

KreinResult KreinResolvent::apply(const KreinResult& field) const { return run(field.smooth, field.layers); }

KreinResult KreinResolvent::run(const Eigen::MatrixXcd& smooth, const std::vector<LayerTerm>& layers) const {
    const int n = curve_.n;
    KreinResult r;
    r.indicator = indicator_;
    r.valid = valid_;
    const FreeResolvent::Spectrum hat = free_.transform(smooth, !options_.relaxed_resolution);
    r.smooth = free_.on_grid(hat, kFieldU);
    Eigen::VectorXcd g = adjoint_gamma_traces(curve_, free_, hat);
    if (!layers.empty()) {
        const Eigen::MatrixXcd mw = assemble_M(curve_, w_);
        for (const auto& l : layers) {
            if (std::abs(l.w - w_) <= 1e-12 * std::abs(w_)) {
                throw Error(ErrorCode::InvalidArgument, "layer term at the same spectral parameter");
            }
            const Eigen::VectorXcd scaled = l.density / (w_ - l.w);
            g += (mw - assemble_M(curve_, l.w)) * scaled;
            add_layer(r.layers, w_, scaled);
            add_layer(r.layers, l.w, -scaled);
        }
    }

    const double sqrt_h = std::sqrt(curve_.h);
    Eigen::VectorXcd phi_l2 = Eigen::VectorXcd::Zero(2 * n);
    if (fact_.dim_K > 0) phi_l2 = fact_.B1 * lu_.solve(fact_.B2 * (sqrt_h * g));
    r.phi = phi_l2 / sqrt_h;
    add_layer(r.layers, w_, -r.phi);

    Eigen::VectorXcd field = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(points_.size()));
    for (const auto& l : r.layers) {
        if (l.density.norm() == 0.0) continue;
        if (l.w == w_) {
            field += potentials_.SL * l.density.head(n) + potentials_.WL * l.density.tail(n);
        } else {
            field += evaluate_gamma_field(curve_, l.w, l.density.head(n), l.density.tail(n), points_).values;
        }
    }
    r.u = Eigen::MatrixXcd::Zero(grid_.n, grid_.n);
    for (size_t p = 0; p < points_.size(); ++p) {
        const auto [a, b] = where_[p];
        r.u(a, b) = r.smooth(a, b) + field(static_cast<Eigen::Index>(p));
    }
    return r;
}

KreinResult krein_apply(const DiscretizedCurve& curve, const InteractionSpec& spec, cplx w, const Grid2D& grid,
                        const Eigen::MatrixXcd& rhs, const KreinOptions& options) {
    return KreinResolvent(curve, spec, w, grid, options).apply(rhs);
}

cplx krein_inner_product(const DiscretizedCurve& curve, const KreinResult& u, const Grid2D& grid,
                         const Eigen::MatrixXcd& g) {
    cplx total = grid.cell_area() * (u.smooth.array() * g.array().conjugate()).sum();
    for (const auto& l : u.layers) {
        if (l.density.norm() == 0.0) continue;
        // gamma(v)^* g = gamma(conj(conj v))^* g, traces of (-Delta - conj v)^{-1} g
        const FreeResolvent adj(grid, std::conj(l.w));
        const Eigen::VectorXcd t = adjoint_gamma_traces(curve, adj, adj.transform(g));
        total += curve.h * t.dot(l.density);  // sum psi conj(t)
    }
    return total;
}

std::vector<SAsymptoticRow> asymptotic_study_S(const DiscretizedCurve& curve,
                                               const std::vector<Eigen::VectorXcd>& densities,
                                               const Eigen::MatrixXcd& K, const std::vector<double>& w_list) {
    std::vector<SAsymptoticRow> rows(w_list.size());
    parallel_for(static_cast<int>(w_list.size()), [&](int i) {
        const double w = w_list[i];
        if (!(w < 0.0)) throw Error(ErrorCode::InvalidArgument, "asymptotic study needs w < 0");
        const Eigen::MatrixXcd s = std::sqrt(-w) * assemble_S(curve, w);
        SAsymptoticRow& row = rows[i];
        row.w = w;
        for (const auto& phi : densities) row.density_errors.push_back((s * phi - 0.5 * phi).norm() / phi.norm());
        row.scaled_norm = hermitian_eigenvalues(s).cwiseAbs().maxCoeff();
        row.compact_error = K.size() > 0 ? spectral_norm(s * K - 0.5 * K) : kNaN;
    });
    return rows;
}

std::vector<WAsymptoticRow> asymptotic_study_W(const DiscretizedCurve& curve, double tau,
                                               const std::vector<double>& w_list) {
    if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
    std::vector<WAsymptoticRow> rows(w_list.size());
    parallel_for(static_cast<int>(w_list.size()), [&](int i) {
        const double w = w_list[i];
        if (!(w < 0.0)) throw Error(ErrorCode::InvalidArgument, "asymptotic study needs w < 0");
        rows[i].w = w;
        rows[i].norm_W = spectral_norm(assemble_W(curve, w));
        rows[i].scaled = std::pow(-w, -tau) * rows[i].norm_W;
    });
    return rows;
}

LogFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "fit needs two or more points");
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "log fit needs positive data");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    LogFit f;
    const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
    f.slope = cxy / vx;
    f.intercept = (sy - f.slope * sx) / n;
    f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
    return f;
}

}  // namespace nlbem
