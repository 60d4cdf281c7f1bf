#pragma once

#include "splat/model.hpp"
#include "splat/rasterizer.hpp"
#include "splat/rng.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace splat {

/// Dense Adam moments mirroring the model layout, one row per Gaussian.
struct AdamState {
    std::vector<Vec3> m_means, v_means;
    std::vector<Vec3> m_log_scales, v_log_scales;
    std::vector<Quat> m_rotations, v_rotations;
    std::vector<double> m_opacity, v_opacity;
    std::vector<std::array<double, kShCoeffsPerGaussian>> m_sh, v_sh;
    std::int64_t step = 0;

    void resize(std::size_t n);
    std::size_t size() const { return m_means.size(); }
};

/// Per-group step sizes for one Adam update.
struct LearningRates {
    double position = 0;
    double scale = 0;
    double rotation = 0;
    double opacity = 0;
    double sh_dc = 0;
    double sh_rest = 0;
};

/// One Adam update (beta 0.9/0.999, eps 1e-15) over every parameter,
/// followed by quaternion renormalization. A zero gradient on a fresh
/// state leaves the parameters bitwise unchanged.
void adam_step(GaussianModel& model, const ModelGrads& grads, AdamState& state,
               const LearningRates& rates);

/// Positional step size at a 1-based iteration: log-linear decay from
/// lr_position_init to lr_position_final across cfg.iterations.
double position_lr(const TrainConfig& cfg, int iteration);

/// Deterministic 1-in-k holdout: view indices where index % k == 0 become
/// the test set, the rest train.
struct DatasetSplit {
    std::vector<int> train_indices;
    std::vector<int> test_indices;
};
DatasetSplit split_dataset(int num_views, int every_k);

/// Diagonal length of the axis-aligned bounding box of the cloud.
double scene_extent(const PointCloud& pc);

struct DensifyResult {
    int cloned = 0;
    int split = 0;
    int pruned = 0;
};

/// Adaptive density control. Gaussians whose mean screen-space gradient
/// norm (grad_accum / max(seen, 1)) exceeds the threshold are duplicated:
/// small ones (every activated scale under the size threshold fraction of
/// the scene extent) are cloned in place, large ones are replaced by two
/// samples drawn from their own distribution with scales shrunk by the
/// split factor. Afterwards every Gaussian below the opacity floor is
/// removed. Optimizer rows follow the survivors; new rows start at zero.
/// The accumulators are cleared.
DensifyResult densify_and_prune(GaussianModel& model, AdamState& adam,
                                std::vector<double>& grad_accum,
                                std::vector<std::uint32_t>& seen_accum,
                                const TrainConfig& cfg, double extent, Rng& rng);

/// Clamps every activated opacity down to the ceiling (keeping smaller
/// values) and zeroes the opacity optimizer moments.
void reset_opacity(GaussianModel& model, AdamState& adam, double ceiling = 0.01);

struct Dataset {
    std::vector<Camera> cameras;
    std::vector<ImageBuffer> images;
};

struct TrainProgress {
    int iteration = 0;  // 1-based
    double loss = 0;
    int view_index = 0;
    std::size_t gaussian_count = 0;
    const GaussianModel* model = nullptr;
};
using TrainCallback = std::function<void(const TrainProgress&)>;

/// Full optimization loop: photometric loss on shuffled training views,
/// Adam with the configured schedules, periodic densification and opacity
/// resets, spherical-harmonics degree unlocked one band per thousand
/// iterations. Trains only on the train half of the 1-in-k split. Throws
/// std::runtime_error naming the iteration and view if the loss turns
/// non-finite.
GaussianModel train(const PointCloud& init_points, const Dataset& data,
                    const TrainConfig& cfg, int num_threads = 1,
                    const TrainCallback& callback = nullptr);

struct EvalResult {
    std::vector<double> per_view_psnr;
    std::vector<double> per_view_ssim;
    double psnr_mean = 0;
    double ssim_mean = 0;
};

/// Renders the listed views and scores them against their ground truth.
EvalResult evaluate(const GaussianModel& model, const Dataset& data,
                    const std::vector<int>& view_indices, const Vec3& background,
                    int tile_size = 16, int num_threads = 1);

}  // namespace splat
