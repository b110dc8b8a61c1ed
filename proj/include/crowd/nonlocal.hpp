#pragma once

#include <vector>

#include "crowd/grid.hpp"

namespace crowd {

enum class KernelProfile {
    /// eta(x) = (1 - (x1/r)^2)^3 (1 - (x2/r)^2)^3 on [-r, r]^2. Separable.
    Poly3,
    /// eta(x) = h(|x| / r) on the disc of radius r, h piecewise linear through
    /// equally spaced samples on [0, 1].
    Tabulated,
};

struct KernelSpec {
    KernelProfile profile = KernelProfile::Poly3;
    double radius = 0.6;
    bool normalized = false;
    std::vector<double> table;  // Tabulated only
};

enum class ConvolutionMethod { Auto, Direct };

/// Discrete mollifier on a (2m+1)^2 stencil. `weights` are point samples of eta
/// (the cell area is applied by the convolution), so the discrete integral of
/// eta is sum(weights) * dx * dy. Gradient stencils sample d(eta)/dx1 and
/// d(eta)/dx2.
///
/// In normalized mode the value stencil is rescaled to unit discrete integral
/// and the gradient stencils to unit discrete first moment
/// (-sum(x1 * d1eta) dx dy = 1), which makes both exact on affine data.
class Kernel {
public:
    const KernelSpec& spec() const { return spec_; }
    double radius() const { return spec_.radius; }
    bool normalized() const { return spec_.normalized; }
    int half_width() const { return m_; }
    int width() const { return 2 * m_ + 1; }
    double dx() const { return dx_; }
    double dy() const { return dy_; }

    /// Stencil offset (a, b), |a|, |b| <= m, row-major with a fastest.
    std::size_t offset_index(int a, int b) const {
        return static_cast<std::size_t>(b + m_) * static_cast<std::size_t>(width()) + static_cast<std::size_t>(a + m_);
    }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& grad_x() const { return grad_x_; }
    const std::vector<double>& grad_y() const { return grad_y_; }

    /// sum(weights) * dx * dy.
    double integral() const;

    /// Separable kernels satisfy weights(a, b) = value_scale * f[a] * f[b],
    /// grad_x(a, b) = grad_scale * df[a] * f[b], grad_y(a, b) = grad_scale * f[a] * df[b].
    bool separable() const { return separable_; }
    const std::vector<double>& factor() const { return factor_; }
    const std::vector<double>& dfactor() const { return dfactor_; }
    double value_scale() const { return value_scale_; }
    double grad_scale() const { return grad_scale_; }

private:
    friend Kernel build_kernel(const KernelSpec&, const Grid2D&);

    KernelSpec spec_;
    int m_ = 0;
    double dx_ = 0.0;
    double dy_ = 0.0;
    std::vector<double> weights_, grad_x_, grad_y_;
    bool separable_ = false;
    std::vector<double> factor_, dfactor_;
    double value_scale_ = 1.0;
    double grad_scale_ = 1.0;
};

/// Continuous profile value eta(x) before any normalization.
double kernel_profile_value(const KernelSpec& spec, Vec2 x);

/// Requires r >= 2 dx and square cells; throws ConfigError otherwise.
Kernel build_kernel(const KernelSpec& spec, const Grid2D& grid);

/// (rho * eta) at every cell centre; density outside the grid counts as 0.
ScalarField convolve(const ScalarField& field, const Kernel& kernel,
                     ConvolutionMethod method = ConvolutionMethod::Auto);

/// (rho * d1 eta, rho * d2 eta) at every cell centre.
VectorField convolve_grad(const ScalarField& field, const Kernel& kernel,
                          ConvolutionMethod method = ConvolutionMethod::Auto);

}  // namespace crowd
