#include "splat/model.hpp"

#include "splat/kdtree.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace splat {

namespace {

bool all_finite(const Vec3& v) {
    return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

}  // namespace

std::optional<std::string> check_camera(const Camera& cam) {
    if (cam.width <= 0 || cam.height <= 0) return "image dimensions must be positive";
    if (!(cam.fx > 0) || !(cam.fy > 0)) return "focal lengths must be positive";
    if (!std::isfinite(cam.cx) || !std::isfinite(cam.cy))
        return "principal point must be finite";
    if (!cam.rotation.allFinite() || !all_finite(cam.translation))
        return "pose must be finite";
    Mat3 rtr = cam.rotation.transpose() * cam.rotation;
    if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
        return "rotation is not orthonormal";
    if (cam.rotation.determinant() < 0) return "rotation must be proper (det +1)";
    return std::nullopt;
}

std::vector<std::string> check_config(const TrainConfig& cfg) {
    std::vector<std::string> errs;
    auto require = [&](bool ok, const char* msg) {
        if (!ok) errs.emplace_back(msg);
    };
    require(cfg.iterations > 0, "iterations must be positive");
    require(cfg.lambda_dssim >= 0 && cfg.lambda_dssim <= 1,
            "lambda_dssim must be in [0,1]");
    require(cfg.lr_position_init > 0, "lr_position_init must be positive");
    require(cfg.lr_position_final > 0, "lr_position_final must be positive");
    require(cfg.lr_scale > 0, "lr_scale must be positive");
    require(cfg.lr_rotation > 0, "lr_rotation must be positive");
    require(cfg.lr_opacity > 0, "lr_opacity must be positive");
    require(cfg.lr_sh > 0, "lr_sh must be positive");
    require(cfg.densify_start_iter >= 0, "densify_start_iter must be nonnegative");
    require(cfg.densify_interval > 0, "densify_interval must be positive");
    require(cfg.densify_grad_threshold > 0, "densify_grad_threshold must be positive");
    require(cfg.split_scale_factor > 1, "split_scale_factor must exceed 1");
    require(cfg.split_size_threshold_fraction > 0,
            "split_size_threshold_fraction must be positive");
    require(cfg.prune_opacity_threshold > 0 && cfg.prune_opacity_threshold < 1,
            "prune_opacity_threshold must be in (0,1)");
    require(cfg.opacity_reset_interval > 0, "opacity_reset_interval must be positive");
    require(cfg.test_split_every >= 2, "test_split_every must be at least 2");
    for (int c = 0; c < 3; ++c)
        require(cfg.background_color[c] >= 0 && cfg.background_color[c] <= 1,
                "background_color must be in [0,1]");
    require(cfg.tile_size > 0, "tile_size must be positive");
    return errs;
}

std::vector<Violation> validate(const GaussianModel& model) {
    std::vector<Violation> out;
    const std::size_t n = model.size();
    auto check_len = [&](std::size_t len, const char* field) {
        if (len != n)
            out.push_back({field, len,
                           "array length " + std::to_string(len) +
                               " does not match means length " + std::to_string(n)});
    };
    check_len(model.log_scales.size(), "log_scales");
    check_len(model.rotations.size(), "rotations");
    check_len(model.opacity_logits.size(), "opacity_logits");
    check_len(model.sh_coeffs.size(), "sh_coeffs");
    if (!out.empty()) return out;  // indexing below assumes equal lengths

    for (std::size_t i = 0; i < n; ++i) {
        if (!all_finite(model.means[i]))
            out.push_back({"means", i, "non-finite mean"});
        if (!all_finite(model.log_scales[i]))
            out.push_back({"log_scales", i, "non-finite log scale"});
        const Quat& q = model.rotations[i];
        if (!q.allFinite()) {
            out.push_back({"rotations", i, "non-finite quaternion"});
        } else {
            double norm = q.norm();
            if (norm < 1e-8)
                out.push_back({"rotations", i, "near-zero quaternion"});
            else if (std::abs(norm - 1.0) > 1e-6)
                out.push_back({"rotations", i, "quaternion norm " + std::to_string(norm) +
                                                  " deviates from 1"});
        }
        if (!std::isfinite(model.opacity_logits[i]))
            out.push_back({"opacity_logits", i, "non-finite opacity logit"});
        for (int c = 0; c < kShCoeffsPerGaussian; ++c) {
            if (!std::isfinite(model.sh_coeffs[i][c])) {
                out.push_back({"sh_coeffs", i, "non-finite SH coefficient"});
                break;
            }
        }
    }
    if (model.sh_degree_active < 0 || model.sh_degree_active > 3)
        out.push_back({"sh_degree_active", 0,
                       "degree " + std::to_string(model.sh_degree_active) +
                           " outside [0,3]"});
    return out;
}

GaussianModel new_model_from_pointcloud(const PointCloud& pc, double initial_opacity) {
    if (pc.size() == 0)
        throw std::invalid_argument("cannot build a model from an empty point cloud");
    if (!(initial_opacity > 0.0) || !(initial_opacity < 1.0))
        throw std::invalid_argument("initial opacity must lie strictly in (0,1)");
    if (pc.has_colors() && pc.colors.size() != pc.size())
        throw std::invalid_argument("color array length does not match positions");

    const std::size_t n = pc.size();
    GaussianModel model;
    model.resize(n);
    model.sh_degree_active = 0;

    const double op_logit = logit(initial_opacity);
    KdTree tree(pc.positions);
    const std::size_t k = std::min<std::size_t>(3, n - 1);

    for (std::size_t i = 0; i < n; ++i) {
        model.means[i] = pc.positions[i];
        model.rotations[i] = Quat(1, 0, 0, 0);
        model.opacity_logits[i] = op_logit;

        double scale;
        if (k == 0) {
            scale = 0.01;  // lone point: no neighbor to measure against
        } else {
            auto nn = tree.knearest(pc.positions[i], k, i);
            double sum = 0;
            for (std::size_t j : nn) sum += (pc.positions[j] - pc.positions[i]).norm();
            scale = sum / static_cast<double>(nn.size());
        }
        scale = std::max(scale, 1e-7);
        model.log_scales[i] = Vec3::Constant(std::log(scale));

        Vec3 color = pc.has_colors() ? pc.colors[i] : Vec3::Constant(0.5);
        auto& sh = model.sh_coeffs[i];
        sh.fill(0.0);
        for (int ch = 0; ch < 3; ++ch) sh[ch] = (color[ch] - 0.5) / kShC0;
    }
    return model;
}

}  // namespace splat
