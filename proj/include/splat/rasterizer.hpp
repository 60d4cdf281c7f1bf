#pragma once

#include "splat/model.hpp"

#include <cstdint>

namespace splat {

/// Blending cutoffs. A splat contributes only where its alpha reaches
/// kMinAlpha; alpha saturates at kMaxAlpha; a pixel stops accepting
/// contributions once its transmittance would fall below kMinTransmit.
constexpr double kMinAlpha = 1.0 / 255.0;
constexpr double kMaxAlpha = 0.99;
constexpr double kMinTransmit = 1e-4;

/// Per-view screen-space state of one Gaussian, kept for the backward pass.
struct GaussianScreenData {
    bool visible = false;  // in front of the camera and touching the image
    Vec2 mean2d = Vec2::Zero();
    Mat2 conic = Mat2::Zero();  // inverse of the projected covariance
    Vec3 color = Vec3::Zero();
    double opacity = 0;  // activated
    double depth = 0;    // camera-space z, used for ordering
};

/// Forward render output plus everything the backward pass reuses.
struct RenderResult {
    ImageBuffer image;
    std::vector<double> final_transmittance;   // per pixel
    std::vector<std::uint32_t> contrib_count;  // per pixel: entries blended
    std::vector<GaussianScreenData> screen;    // per gaussian
    std::vector<std::vector<std::uint32_t>> tile_lists;  // depth-sorted ids
    int tiles_x = 0;
    int tiles_y = 0;
};

/// Gradients w.r.t. every trainable parameter, plus the per-Gaussian
/// screen-space statistics the densifier consumes.
struct ModelGrads {
    std::vector<Vec3> means;
    std::vector<Vec3> log_scales;
    std::vector<Quat> rotations;
    std::vector<double> opacity_logits;
    std::vector<std::array<double, kShCoeffsPerGaussian>> sh_coeffs;
    std::vector<double> viewspace_grad_norm;  // sum of ||dL/dmean2d|| per view
    std::vector<std::uint32_t> seen_count;    // views the gaussian contributed to

    void resize(std::size_t n);
    void zero();
    std::size_t size() const { return means.size(); }
};

/// Renders the model through a camera with front-to-back alpha blending
/// over 16x16 tiles. The leftover transmittance is filled with the
/// background color. Output is identical for any thread count.
RenderResult render_forward(const GaussianModel& model, const Camera& cam,
                            const Vec3& background, int tile_size = 16,
                            int num_threads = 1);

/// Exact adjoint of render_forward: accumulates dL/dparams into grads
/// given dL/dimage, and adds this view's screen-space position gradient
/// norm and visibility count. grads must already have the model's size.
/// Accumulation order is fixed, so results are identical for any thread
/// count.
void render_backward(const GaussianModel& model, const Camera& cam,
                     const Vec3& background, const RenderResult& fwd,
                     const ImageBuffer& dL_dimage, ModelGrads& grads,
                     int tile_size = 16, int num_threads = 1);

}  // namespace splat
