#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace splat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Spherical harmonics layout: degree 3, 16 coefficients per color channel.
constexpr int kShCoeffsPerChannel = 16;
constexpr int kShChannels = 3;
constexpr int kShCoeffsPerGaussian = kShCoeffsPerChannel * kShChannels;  // 48

/// Trainable scalars per Gaussian: mean(3) + log-scale(3) + quaternion(4)
/// + opacity logit(1) + SH(48).
constexpr int kParamsPerGaussian = 59;

/// DC basis constant of the real spherical harmonics (Y_0^0).
constexpr double kShC0 = 0.28209479177387814;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Quaternion stored (r, i, j, k), scalar first.
using Quat = Eigen::Vector4d;

/// The trainable scene. Structure-of-arrays; every per-Gaussian array has
/// the same length N. Scales are stored as logs and opacities as logits so
/// the activated ranges hold by construction. SH coefficients are stored
/// per Gaussian as 16 coefficients x 3 channels, coefficient-major
/// (coeff c, channel ch at sh_coeffs[g][c * 3 + ch]).
struct GaussianModel {
    std::vector<Vec3> means;
    std::vector<Vec3> log_scales;
    std::vector<Quat> rotations;
    std::vector<double> opacity_logits;
    std::vector<std::array<double, kShCoeffsPerGaussian>> sh_coeffs;
    int sh_degree_active = 0;

    std::size_t size() const { return means.size(); }
    std::size_t parameter_count() const { return size() * kParamsPerGaussian; }

    double activated_opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }
    Vec3 activated_scale(std::size_t i) const {
        return log_scales[i].array().exp().matrix();
    }

    void resize(std::size_t n) {
        means.resize(n, Vec3::Zero());
        log_scales.resize(n, Vec3::Zero());
        rotations.resize(n, Quat(1, 0, 0, 0));
        opacity_logits.resize(n, 0.0);
        sh_coeffs.resize(n);
    }
};

/// Pinhole camera with a world-to-camera rigid pose: x_cam = R x_world + t.
struct Camera {
    int width = 0;
    int height = 0;
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    std::string image_id;

    Vec3 center() const { return -rotation.transpose() * translation; }
};

/// Checks the Camera invariants; returns an error message or nullopt.
std::optional<std::string> check_camera(const Camera& cam);

/// Row-major H x W x 3 image, values in world radiance units.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // size height*width*3

    ImageBuffer() = default;
    ImageBuffer(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

    double& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    double at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::size_t value_count() const { return pixels.size(); }
};

struct PointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> colors;   // optional, RGB in [0,1]; empty or same length
    std::vector<Vec3> normals;  // optional, unit vectors; empty or same length

    std::size_t size() const { return positions.size(); }
    bool has_colors() const { return !colors.empty(); }
    bool has_normals() const { return !normals.empty(); }
};

/// Every schedule constant and threshold of the training loop.
struct TrainConfig {
    int iterations = 30000;
    double lambda_dssim = 0.2;
    double lr_position_init = 3.2e-5;
    double lr_position_final = 3.2e-7;
    double lr_scale = 2e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 0.05;
    double lr_sh = 2.5e-3;  // DC rate; higher orders use lr_sh / 20
    int densify_start_iter = 1000;
    int densify_interval = 100;
    double densify_grad_threshold = 2.0e-4;
    double split_scale_factor = 1.6;
    double split_size_threshold_fraction = 0.01;
    double prune_opacity_threshold = 5e-3;
    int opacity_reset_interval = 3000;
    int test_split_every = 8;
    Vec3 background_color = Vec3::Zero();
    int tile_size = 16;
    std::uint64_t random_seed = 42;
};

/// Checks TrainConfig invariants; returns all violations (empty if valid).
std::vector<std::string> check_config(const TrainConfig& cfg);

/// One invariant violation found by validate().
struct Violation {
    std::string field;
    std::size_t index;
    std::string message;
};

/// Reports every model invariant violation: array length mismatches,
/// non-finite values, near-zero or non-unit quaternions, out-of-range
/// sh_degree_active. Empty result iff the model is valid.
std::vector<Violation> validate(const GaussianModel& model);

/// Builds one Gaussian per point. SH DC is set from the point color when
/// present (mid-gray otherwise), rotations start at identity, and the
/// isotropic scale comes from the mean distance to the 3 nearest
/// neighbors (fewer if the cloud is smaller), clamped below at 1e-7.
/// Throws std::invalid_argument on an empty cloud or out-of-range opacity.
GaussianModel new_model_from_pointcloud(const PointCloud& pc, double initial_opacity);

}  // namespace splat
