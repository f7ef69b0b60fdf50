#pragma once

#include "nlbem/special_functions.hpp"

#include <Eigen/Dense>

#include <vector>

namespace nlbem {

// Square grid of n x n points x0 + h (i + i j); values stored as F(i, j).
struct Grid2D {
    cplx origin{0.0, 0.0};
    double h = 0.1;
    int n = 64;

    static Grid2D centered(double half_width, int n);
    cplx point(int i, int j) const { return origin + cplx(h * i, h * j); }
    double cell_area() const { return h * h; }
};

enum ResolventField : unsigned { kFieldU = 1u, kFieldDz = 2u, kFieldDzbar = 4u, kFieldDx = 8u, kFieldDy = 16u };

// (-Delta - w)^{-1} applied to grid data by FFT convolution with the Green's
// function truncated at radius R = sqrt(2) * box side. The truncated kernel has a
// smooth closed-form transform, so the convolution is spectrally accurate for
// smooth data supported in the box; values are valid anywhere inside the box.
class FreeResolvent {
public:
    FreeResolvent(const Grid2D& grid, cplx w);

    struct Spectrum {
        Eigen::MatrixXcd c;  // G_R(k) * DFT(f), m x m
    };

    // Throws GridTooCoarse when the data is not negligible at the box edge or is
    // not resolved (spectral tail above 1e-6 of the peak); `checked = false` skips both.
    Spectrum transform(const Eigen::MatrixXcd& f, bool checked = true) const;
    // Field on the grid: u, or a derivative selected by `field`.
    Eigen::MatrixXcd on_grid(const Spectrum& s, ResolventField field) const;
    // Field at arbitrary points inside the box by a direct separable Fourier sum.
    Eigen::VectorXcd at_points(const Spectrum& s, const std::vector<cplx>& points, ResolventField field) const;

    const Grid2D& grid() const { return grid_; }
    cplx w() const { return w_; }
    int fft_size() const { return m_; }
    // Transform of the truncated kernel at radial frequency s.
    cplx kernel_hat(double s) const;

private:
    cplx symbol(int k1, int k2, ResolventField field) const;

    Grid2D grid_;
    cplx w_, kappa_;
    int m_ = 0;
    double radius_ = 0.0;
    double dk_ = 0.0;
    Eigen::MatrixXcd ghat_;
};

// (-Delta - w)^{-1} g and its radial derivative at distance r from the centre of
// the Gaussian g(x) = exp(-|x|^2 / (2 sigma^2)), by Hankel-transform quadrature.
struct RadialValue {
    cplx u;
    cplx du_dr;
};
RadialValue gaussian_resolvent_reference(cplx w, double sigma, double r);

}  // namespace nlbem
