#pragma once

#include "splat/model.hpp"

namespace splat {

/// Near-plane depth below which a Gaussian is culled from a view.
constexpr double kNearPlane = 0.01;

/// Isotropic low-pass variance (pixels^2) added to every projected
/// covariance so a splat never falls between pixel centers.
constexpr double kLowpass2d = 0.3;

/// Rotation matrix of a (possibly unnormalized) quaternion (r, i, j, k).
Mat3 quat_to_rotmat(const Quat& q);

/// Pulls dL/dR back to the raw quaternion, through the normalization.
Quat quat_to_rotmat_backward(const Quat& q, const Mat3& dL_dR);

/// World-space covariance R S S^T R^T with S = diag(exp(log_scale)).
Mat3 covariance3d(const Vec3& log_scale, const Quat& q);

/// Pulls a (not necessarily symmetric) dL/dSigma back to log-scales and
/// the raw quaternion. Gradients are accumulated into the outputs.
void covariance3d_backward(const Vec3& log_scale, const Quat& q, const Mat3& dL_dSigma,
                           Vec3& dL_dlog_scale, Quat& dL_dq);

/// A Gaussian seen through one camera.
struct ProjectedGaussian {
    bool in_front = false;  // remaining fields are meaningful only if true
    Vec3 t = Vec3::Zero();  // camera-space mean
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();  // includes the low-pass term
};

/// Perspective projection of mean and covariance through the local affine
/// approximation of the pinhole map.
ProjectedGaussian project_gaussian(const Vec3& mean, const Mat3& cov3d,
                                   const Camera& cam);

/// Pulls dL/dmean2d and a symmetric dL/dcov2d back to the world mean and
/// the 3-d covariance, including the dependence of the projection Jacobian
/// on the camera-space position. Gradients are accumulated.
void project_gaussian_backward(const Vec3& mean, const Mat3& cov3d, const Camera& cam,
                               const Vec2& dL_dmean2d, const Mat2& dL_dcov2d,
                               Vec3& dL_dmean, Mat3& dL_dcov3d);

/// Real spherical harmonics basis values for a unit direction, degrees 0
/// through `deg`; entries above the active degree are zeroed.
void sh_basis(int deg, const Vec3& dir, double basis[kShCoeffsPerChannel]);

/// View-dependent color: per channel max(0, dot(sh, basis) + 0.5).
Vec3 sh_to_color(const std::array<double, kShCoeffsPerGaussian>& sh, int deg,
                 const Vec3& dir);

/// Pulls dL/dcolor back to the coefficients and the (unit) direction.
/// Channels clamped in the forward pass contribute nothing. Gradients
/// are accumulated into dL_dsh; dL_ddir is overwritten.
void sh_to_color_backward(const std::array<double, kShCoeffsPerGaussian>& sh, int deg,
                          const Vec3& dir, const Vec3& dL_dcolor,
                          std::array<double, kShCoeffsPerGaussian>& dL_dsh,
                          Vec3& dL_ddir);

/// Unit viewing direction from the camera center to the Gaussian mean.
Vec3 sh_dir(const Vec3& mean, const Vec3& cam_center);

/// Pulls dL/ddir (w.r.t. the normalized direction) back to the mean.
/// Accumulates into dL_dmean.
void sh_dir_backward(const Vec3& mean, const Vec3& cam_center, const Vec3& dL_ddir,
                     Vec3& dL_dmean);

}  // namespace splat
