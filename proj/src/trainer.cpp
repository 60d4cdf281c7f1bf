#include "splat/trainer.hpp"

#include "splat/gaussian_math.hpp"
#include "splat/image_metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace splat {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;

inline void adam_update(double& x, double g, double& m, double& v, double lr,
                        double bias1, double bias2) {
    m = kBeta1 * m + (1 - kBeta1) * g;
    v = kBeta2 * v + (1 - kBeta2) * g * g;
    double mh = m / bias1;
    double vh = v / bias2;
    x -= lr * mh / (std::sqrt(vh) + kAdamEps);
}

}  // namespace

void AdamState::resize(std::size_t n) {
    m_means.resize(n, Vec3::Zero());
    v_means.resize(n, Vec3::Zero());
    m_log_scales.resize(n, Vec3::Zero());
    v_log_scales.resize(n, Vec3::Zero());
    m_rotations.resize(n, Quat::Zero());
    v_rotations.resize(n, Quat::Zero());
    m_opacity.resize(n, 0.0);
    v_opacity.resize(n, 0.0);
    m_sh.resize(n, {});
    v_sh.resize(n, {});
}

void adam_step(GaussianModel& model, const ModelGrads& grads, AdamState& state,
               const LearningRates& rates) {
    const std::size_t n = model.size();
    if (grads.size() != n || state.size() != n)
        throw std::invalid_argument("optimizer and gradient sizes must match model");

    state.step += 1;
    const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            adam_update(model.means[i][c], grads.means[i][c], state.m_means[i][c],
                        state.v_means[i][c], rates.position, bias1, bias2);
            adam_update(model.log_scales[i][c], grads.log_scales[i][c],
                        state.m_log_scales[i][c], state.v_log_scales[i][c], rates.scale,
                        bias1, bias2);
        }
        for (int c = 0; c < 4; ++c)
            adam_update(model.rotations[i][c], grads.rotations[i][c],
                        state.m_rotations[i][c], state.v_rotations[i][c],
                        rates.rotation, bias1, bias2);
        adam_update(model.opacity_logits[i], grads.opacity_logits[i],
                    state.m_opacity[i], state.v_opacity[i], rates.opacity, bias1,
                    bias2);
        for (int c = 0; c < kShCoeffsPerGaussian; ++c)
            adam_update(model.sh_coeffs[i][c], grads.sh_coeffs[i][c], state.m_sh[i][c],
                        state.v_sh[i][c], c < 3 ? rates.sh_dc : rates.sh_rest, bias1,
                        bias2);

        // Keep rotations on the unit sphere without disturbing rows that
        // did not move.
        double sq = model.rotations[i].squaredNorm();
        if (std::abs(sq - 1.0) > 1e-12)
            model.rotations[i] /= std::sqrt(sq);
    }
}

double position_lr(const TrainConfig& cfg, int iteration) {
    double t = static_cast<double>(iteration) / static_cast<double>(cfg.iterations);
    t = std::clamp(t, 0.0, 1.0);
    return cfg.lr_position_init *
           std::pow(cfg.lr_position_final / cfg.lr_position_init, t);
}

DatasetSplit split_dataset(int num_views, int every_k) {
    if (every_k < 2) throw std::invalid_argument("holdout interval must be at least 2");
    DatasetSplit s;
    for (int i = 0; i < num_views; ++i) {
        if (i % every_k == 0)
            s.test_indices.push_back(i);
        else
            s.train_indices.push_back(i);
    }
    return s;
}

double scene_extent(const PointCloud& pc) {
    if (pc.size() == 0) return 0.0;
    Vec3 lo = pc.positions[0], hi = pc.positions[0];
    for (const Vec3& p : pc.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

DensifyResult densify_and_prune(GaussianModel& model, AdamState& adam,
                                std::vector<double>& grad_accum,
                                std::vector<std::uint32_t>& seen_accum,
                                const TrainConfig& cfg, double extent, Rng& rng) {
    const std::size_t n = model.size();
    if (grad_accum.size() != n || seen_accum.size() != n || adam.size() != n)
        throw std::invalid_argument("densify bookkeeping sizes must match model");

    const double size_threshold = cfg.split_size_threshold_fraction * extent;
    const double scale_shrink = std::log(cfg.split_scale_factor);

    enum class Fate { keep, clone, split };
    std::vector<Fate> fate(n, Fate::keep);
    for (std::size_t i = 0; i < n; ++i) {
        double avg = grad_accum[i] / std::max<std::uint32_t>(seen_accum[i], 1);
        if (avg <= cfg.densify_grad_threshold) continue;
        bool small = model.activated_scale(i).maxCoeff() < size_threshold;
        fate[i] = small ? Fate::clone : Fate::split;
    }

    GaussianModel out;
    AdamState out_adam;
    out.sh_degree_active = model.sh_degree_active;
    out_adam.step = adam.step;
    DensifyResult result;

    auto copy_row = [&](std::size_t src, bool fresh_moments) {
        out.means.push_back(model.means[src]);
        out.log_scales.push_back(model.log_scales[src]);
        out.rotations.push_back(model.rotations[src]);
        out.opacity_logits.push_back(model.opacity_logits[src]);
        out.sh_coeffs.push_back(model.sh_coeffs[src]);
        if (fresh_moments) {
            out_adam.m_means.push_back(Vec3::Zero());
            out_adam.v_means.push_back(Vec3::Zero());
            out_adam.m_log_scales.push_back(Vec3::Zero());
            out_adam.v_log_scales.push_back(Vec3::Zero());
            out_adam.m_rotations.push_back(Quat::Zero());
            out_adam.v_rotations.push_back(Quat::Zero());
            out_adam.m_opacity.push_back(0.0);
            out_adam.v_opacity.push_back(0.0);
            out_adam.m_sh.push_back({});
            out_adam.v_sh.push_back({});
        } else {
            out_adam.m_means.push_back(adam.m_means[src]);
            out_adam.v_means.push_back(adam.v_means[src]);
            out_adam.m_log_scales.push_back(adam.m_log_scales[src]);
            out_adam.v_log_scales.push_back(adam.v_log_scales[src]);
            out_adam.m_rotations.push_back(adam.m_rotations[src]);
            out_adam.v_rotations.push_back(adam.v_rotations[src]);
            out_adam.m_opacity.push_back(adam.m_opacity[src]);
            out_adam.v_opacity.push_back(adam.v_opacity[src]);
            out_adam.m_sh.push_back(adam.m_sh[src]);
            out_adam.v_sh.push_back(adam.v_sh[src]);
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        switch (fate[i]) {
            case Fate::keep:
                copy_row(i, false);
                break;
            case Fate::clone:
                copy_row(i, false);
                copy_row(i, true);
                result.cloned += 1;
                break;
            case Fate::split: {
                Mat3 M = quat_to_rotmat(model.rotations[i]) *
                         model.activated_scale(i).asDiagonal();
                for (int child = 0; child < 2; ++child) {
                    Vec3 xi(rng.normal(), rng.normal(), rng.normal());
                    copy_row(i, true);
                    out.means.back() = model.means[i] + M * xi;
                    out.log_scales.back() =
                        model.log_scales[i] - Vec3::Constant(scale_shrink);
                }
                result.split += 1;
                break;
            }
        }
    }

    // Prune transparent gaussians from the densified population.
    GaussianModel kept;
    AdamState kept_adam;
    kept.sh_degree_active = out.sh_degree_active;
    kept_adam.step = out_adam.step;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (sigmoid(out.opacity_logits[i]) < cfg.prune_opacity_threshold) {
            result.pruned += 1;
            continue;
        }
        kept.means.push_back(out.means[i]);
        kept.log_scales.push_back(out.log_scales[i]);
        kept.rotations.push_back(out.rotations[i]);
        kept.opacity_logits.push_back(out.opacity_logits[i]);
        kept.sh_coeffs.push_back(out.sh_coeffs[i]);
        kept_adam.m_means.push_back(out_adam.m_means[i]);
        kept_adam.v_means.push_back(out_adam.v_means[i]);
        kept_adam.m_log_scales.push_back(out_adam.m_log_scales[i]);
        kept_adam.v_log_scales.push_back(out_adam.v_log_scales[i]);
        kept_adam.m_rotations.push_back(out_adam.m_rotations[i]);
        kept_adam.v_rotations.push_back(out_adam.v_rotations[i]);
        kept_adam.m_opacity.push_back(out_adam.m_opacity[i]);
        kept_adam.v_opacity.push_back(out_adam.v_opacity[i]);
        kept_adam.m_sh.push_back(out_adam.m_sh[i]);
        kept_adam.v_sh.push_back(out_adam.v_sh[i]);
    }
    if (kept.size() == 0)
        throw std::runtime_error("densification pruned every gaussian");

    model = std::move(kept);
    adam = std::move(kept_adam);
    grad_accum.assign(model.size(), 0.0);
    seen_accum.assign(model.size(), 0);
    return result;
}

void reset_opacity(GaussianModel& model, AdamState& adam, double ceiling) {
    for (std::size_t i = 0; i < model.size(); ++i) {
        double a = std::min(model.activated_opacity(i), ceiling);
        model.opacity_logits[i] = logit(a);
        adam.m_opacity[i] = 0.0;
        adam.v_opacity[i] = 0.0;
    }
}

GaussianModel train(const PointCloud& init_points, const Dataset& data,
                    const TrainConfig& cfg, int num_threads,
                    const TrainCallback& callback) {
    auto errors = check_config(cfg);
    if (!errors.empty()) throw std::invalid_argument("bad config: " + errors.front());
    if (data.cameras.size() != data.images.size())
        throw std::invalid_argument("camera and image counts differ");
    for (std::size_t v = 0; v < data.cameras.size(); ++v) {
        if (auto err = check_camera(data.cameras[v]))
            throw std::invalid_argument("camera " + std::to_string(v) + ": " + *err);
        if (data.images[v].width != data.cameras[v].width ||
            data.images[v].height != data.cameras[v].height)
            throw std::invalid_argument("image " + std::to_string(v) +
                                        " does not match its camera size");
    }

    DatasetSplit split = split_dataset(static_cast<int>(data.cameras.size()),
                                       cfg.test_split_every);
    if (split.train_indices.empty())
        throw std::invalid_argument("no training views after the holdout split");

    GaussianModel model = new_model_from_pointcloud(init_points, 0.1);
    const double extent = scene_extent(init_points);

    AdamState adam;
    adam.resize(model.size());
    std::vector<double> grad_accum(model.size(), 0.0);
    std::vector<std::uint32_t> seen_accum(model.size(), 0);

    Rng rng(cfg.random_seed);
    std::vector<int> order;

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        model.sh_degree_active = std::min(3, iter / 1000);

        if (order.empty()) {
            order = split.train_indices;
            rng.shuffle(order);
        }
        int view = order.back();
        order.pop_back();

        const Camera& cam = data.cameras[view];
        RenderResult fwd = render_forward(model, cam, cfg.background_color,
                                          cfg.tile_size, num_threads);

        ImageBuffer dL(cam.width, cam.height, 0.0);
        double loss =
            photometric_loss(fwd.image, data.images[view], cfg.lambda_dssim, &dL);
        if (!std::isfinite(loss))
            throw std::runtime_error("non-finite loss at iteration " +
                                     std::to_string(iter) + " on view " +
                                     std::to_string(view));

        ModelGrads grads;
        grads.resize(model.size());
        render_backward(model, cam, cfg.background_color, fwd, dL, grads,
                        cfg.tile_size, num_threads);

        LearningRates rates;
        rates.position = position_lr(cfg, iter);
        rates.scale = cfg.lr_scale;
        rates.rotation = cfg.lr_rotation;
        rates.opacity = cfg.lr_opacity;
        rates.sh_dc = cfg.lr_sh;
        rates.sh_rest = cfg.lr_sh / 20.0;
        adam_step(model, grads, adam, rates);

        for (std::size_t g = 0; g < model.size(); ++g) {
            grad_accum[g] += grads.viewspace_grad_norm[g];
            seen_accum[g] += grads.seen_count[g];
        }

        if (iter >= cfg.densify_start_iter &&
            (iter - cfg.densify_start_iter) % cfg.densify_interval == 0)
            densify_and_prune(model, adam, grad_accum, seen_accum, cfg, extent, rng);

        if (iter % cfg.opacity_reset_interval == 0) reset_opacity(model, adam);

        if (callback) {
            TrainProgress progress;
            progress.iteration = iter;
            progress.loss = loss;
            progress.view_index = view;
            progress.gaussian_count = model.size();
            progress.model = &model;
            callback(progress);
        }
    }
    return model;
}

EvalResult evaluate(const GaussianModel& model, const Dataset& data,
                    const std::vector<int>& view_indices, const Vec3& background,
                    int tile_size, int num_threads) {
    EvalResult result;
    for (int v : view_indices) {
        const Camera& cam = data.cameras.at(static_cast<std::size_t>(v));
        RenderResult r = render_forward(model, cam, background, tile_size, num_threads);
        result.per_view_psnr.push_back(psnr(r.image, data.images.at(v)));
        result.per_view_ssim.push_back(ssim(r.image, data.images.at(v)));
    }
    if (!result.per_view_psnr.empty()) {
        for (double p : result.per_view_psnr) result.psnr_mean += p;
        for (double s : result.per_view_ssim) result.ssim_mean += s;
        result.psnr_mean /= static_cast<double>(result.per_view_psnr.size());
        result.ssim_mean /= static_cast<double>(result.per_view_ssim.size());
    }
    return result;
}

}  // namespace splat
