#pragma once

#include "nlbem/special_functions.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace nlbem {

namespace detail {
struct QuadratureCache;
}

enum class CurveKind { Circle, Ellipse, Star, Custom };

// A closed C^2 loop given by a parametrization theta -> zeta(theta) on [0, period).
// Points are complex numbers x1 + i x2.
struct CurveDescriptor {
    CurveKind kind = CurveKind::Circle;
    double radius = 1.0;            // circle
    double a = 1.0, b = 1.0;        // ellipse semi-axes
    double r0 = 1.0, eps = 0.0;     // star r(theta) = r0 + eps cos(m theta)
    int lobes = 0;
    double period = 2.0 * 3.14159265358979323846;
    std::function<cplx(double)> position;    // custom
    std::function<cplx(double)> derivative;  // custom
    std::string label;

    static CurveDescriptor circle(double radius);
    static CurveDescriptor ellipse(double a, double b);
    static CurveDescriptor star(double r0, double eps, int lobes);
    static CurveDescriptor custom(std::function<cplx(double)> position, std::function<cplx(double)> derivative,
                                  double period, std::string label = "custom");
    // x(theta) = sum_k xc[k] cos(k theta) + xs[k] sin(k theta), likewise y; period 2 pi.
    static CurveDescriptor trigonometric(std::vector<double> xc, std::vector<double> xs, std::vector<double> yc,
                                         std::vector<double> ys);

    cplx zeta(double theta) const;
    cplx dzeta(double theta) const;
    void validate() const;
};

// Arc-length reparametrization. The speed |zeta'| is expanded in a Fourier series
// (spectrally accurate for smooth loops), integrated termwise and inverted by Newton
// on a table that is then interpolated.
class ArcLengthMap {
public:
    ArcLengthMap(const CurveDescriptor& desc, int resolution);

    double length() const { return length_; }
    double theta_of(double s) const;
    double s_of(double theta) const;
    cplx point(double s) const;
    cplx unit_tangent(double s) const;
    // zeta(s + u) - zeta(s) without cancellation for small |u|.
    cplx chord(double s, double u) const;
    // Largest deviation of |d zeta / ds| from 1 over the sample grid.
    double unit_speed_defect() const { return speed_defect_; }
    const CurveDescriptor& descriptor() const { return desc_; }

private:
    double speed_series(double theta) const;
    double speed_series_derivative(double theta) const;
    double theta_newton(double s) const;
    void build_inverse_table();

    CurveDescriptor desc_;
    bool reversed_ = false;
    double length_ = 0.0;
    double omega_ = 1.0;
    double c0_ = 0.0;
    std::vector<double> ca_, cb_;  // speed = c0 + sum ca cos(m w th) + cb sin(m w th)
    double speed_defect_ = 0.0;
    // theta(s) with theta', theta'' on a uniform s grid, for quintic Hermite lookup
    double tab_ds_ = 0.0;
    std::vector<double> tab_th_, tab_d1_, tab_d2_;
};

struct DiscretizedCurve {
    int n = 0;
    double length = 0.0;
    double h = 0.0;                  // L / N
    Eigen::VectorXd params;          // t_j = j L / N
    Eigen::VectorXd weights;         // sigma_j = L / N
    Eigen::VectorXcd nodes;          // x_j
    Eigen::VectorXcd normals;        // complex outer normal n1 + i n2
    Eigen::VectorXcd tangents;       // t = (-n2, n1) = i n
    double bilip_constant = 0.0;
    std::shared_ptr<const ArcLengthMap> map;
    std::shared_ptr<detail::QuadratureCache> cache;

    cplx point_at(double s) const { return map->point(s); }
    cplx normal_at(double s) const { return cplx(0.0, -1.0) * map->unit_tangent(s); }
    cplx chord(double s, double u) const { return map->chord(s, u); }
    const CurveDescriptor& descriptor() const { return map->descriptor(); }
    bool is_circle() const { return descriptor().kind == CurveKind::Circle; }
};

std::shared_ptr<const ArcLengthMap> reparametrize_arclength(const CurveDescriptor& desc, int resolution = 0);
DiscretizedCurve discretize(const CurveDescriptor& desc, int n);
// Same loop as `curve`, new resolution; reuses the arc-length map.
DiscretizedCurve rediscretize(const DiscretizedCurve& curve, int n);
double estimate_bilip_constant(const DiscretizedCurve& curve);

}  // namespace nlbem
