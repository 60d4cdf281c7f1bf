#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "splat/geometry.hpp"
#include "splat/io.hpp"
#include "splat/rasterizer.hpp"
#include "splat/trainer.hpp"

namespace {

using namespace splat;

// Result lines use a fixed machine-readable shape: a lowercase key, '=',
// and one number. Everything else (progress, notes) goes to stderr.
void emit(const std::string& key, double value) {
    std::ostringstream oss;
    oss.precision(17);
    oss << value;
    std::cout << key << "=" << oss.str() << "\n";
}

void emit(const std::string& key, std::size_t value) {
    std::cout << key << "=" << value << "\n";
}

Vec3 parse_csv3(const std::string& text, const std::string& what) {
    std::istringstream iss(text);
    std::string part;
    std::vector<double> vals;
    while (std::getline(iss, part, ',')) {
        std::size_t used = 0;
        vals.push_back(std::stod(part, &used));
        while (used < part.size() && std::isspace(static_cast<unsigned char>(part[used])))
            ++used;
        if (used != part.size())
            throw std::runtime_error(what + ": bad number '" + part + "'");
    }
    if (vals.size() != 3)
        throw std::runtime_error(what + " needs three comma-separated numbers");
    return Vec3(vals[0], vals[1], vals[2]);
}

Aabb parse_crop(const std::string& text) {
    std::istringstream iss(text);
    std::string part;
    std::vector<double> vals;
    while (std::getline(iss, part, ',')) vals.push_back(std::stod(part));
    if (vals.size() != 6)
        throw std::runtime_error("--crop needs x0,y0,z0,x1,y1,z1");
    Aabb box;
    box.lo = Vec3(vals[0], vals[1], vals[2]);
    box.hi = Vec3(vals[3], vals[4], vals[5]);
    for (int c = 0; c < 3; ++c)
        if (box.lo[c] > box.hi[c])
            throw std::runtime_error("--crop lower corner exceeds upper corner");
    return box;
}

void downsample_dataset(Dataset& data, int factor) {
    if (factor <= 1) return;
    for (Camera& cam : data.cameras) cam = downsample_camera(cam, factor);
    for (ImageBuffer& img : data.images) img = downsample_image(img, factor);
}

PointCloud with_normals(const PointCloud& pc, int k) {
    if (pc.has_normals()) return pc;
    PointCloud out = pc;
    int degenerate = estimate_normals(out, k);
    if (degenerate > 0)
        std::cerr << "note: " << degenerate
                  << " points had degenerate neighborhoods; their normals "
                     "default to +z\n";
    return out;
}

int run_train(const std::string& scene_dir, const std::string& config_path,
              const std::string& out_dir, int downsample, int threads) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_train_config(config_path);

    SceneData data = load_scene_with_images(scene_dir);
    downsample_dataset(data.dataset, downsample);
    std::cerr << "loaded " << data.dataset.cameras.size() << " views, "
              << data.scene.points.size() << " seed points\n";

    int report_every = std::max(1, cfg.iterations / 100);
    auto progress = [&](const TrainProgress& p) {
        if (p.iteration == 1 || p.iteration == cfg.iterations ||
            p.iteration % report_every == 0)
            std::cerr << "iter " << p.iteration << "/" << cfg.iterations
                      << "  loss " << p.loss << "  gaussians " << p.gaussian_count
                      << "\n";
    };

    GaussianModel model = train(data.scene.points, data.dataset, cfg, threads, progress);

    std::filesystem::create_directories(out_dir);
    std::string model_path = out_dir + "/model.ply";
    save_gaussian_ply(model, model_path);
    std::cerr << "wrote " << model_path << "\n";
    emit("gaussian_count", model.size());

    DatasetSplit split =
        split_dataset(static_cast<int>(data.dataset.cameras.size()), cfg.test_split_every);
    if (!split.test_indices.empty()) {
        EvalResult ev = evaluate(model, data.dataset, split.test_indices,
                                 cfg.background_color, cfg.tile_size, threads);
        emit("test_view_count", split.test_indices.size());
        emit("test_psnr_mean", ev.psnr_mean);
        emit("test_ssim_mean", ev.ssim_mean);
    }
    return 0;
}

int run_render(const std::string& model_path, const std::string& scene_dir,
               const std::string& camera_id, const std::string& pose_path,
               const std::string& out_path, const std::string& background,
               int downsample, int threads) {
    GaussianModel model = load_gaussian_ply(model_path);

    Camera cam;
    if (!pose_path.empty()) {
        cam = load_pose(pose_path);
    } else {
        if (scene_dir.empty() || camera_id.empty())
            throw std::runtime_error(
                "render needs either --pose or both --scene and --camera-id");
        SparseScene scene = load_sparse_scene(scene_dir);
        auto it = std::find_if(scene.cameras.begin(), scene.cameras.end(),
                               [&](const Camera& c) { return c.image_id == camera_id; });
        if (it == scene.cameras.end())
            throw std::runtime_error("no camera named '" + camera_id + "' in " +
                                     scene_dir);
        cam = *it;
    }
    cam = downsample_camera(cam, downsample);

    Vec3 bg = parse_csv3(background, "--background");
    RenderResult fwd = render_forward(model, cam, bg, 16, threads);
    save_ppm(fwd.image, out_path);
    std::cerr << "wrote " << out_path << " (" << cam.width << "x" << cam.height
              << ")\n";
    return 0;
}

int run_eval(const std::string& model_path, const std::string& scene_dir,
             int split_every, const std::string& background, int downsample,
             int threads) {
    GaussianModel model = load_gaussian_ply(model_path);
    SceneData data = load_scene_with_images(scene_dir);
    downsample_dataset(data.dataset, downsample);

    DatasetSplit split =
        split_dataset(static_cast<int>(data.dataset.cameras.size()), split_every);
    if (split.test_indices.empty()) throw std::runtime_error("test split is empty");

    Vec3 bg = parse_csv3(background, "--background");
    EvalResult ev = evaluate(model, data.dataset, split.test_indices, bg, 16, threads);
    for (std::size_t i = 0; i < split.test_indices.size(); ++i)
        std::cerr << "view " << data.dataset.cameras[split.test_indices[i]].image_id
                  << "  psnr " << ev.per_view_psnr[i] << "  ssim "
                  << ev.per_view_ssim[i] << "\n";
    emit("test_view_count", split.test_indices.size());
    emit("test_psnr_mean", ev.psnr_mean);
    emit("test_ssim_mean", ev.ssim_mean);
    return 0;
}

int run_extract(const std::string& model_path, const std::string& out_path,
                double min_opacity, int normals_k) {
    GaussianModel model = load_gaussian_ply(model_path);
    PointCloud pc = extract_pointcloud(model, min_opacity);
    if (pc.size() == 0)
        throw std::runtime_error("no gaussians pass the opacity threshold");
    if (normals_k > 0) {
        int degenerate = estimate_normals(pc, normals_k);
        emit("degenerate_normal_count", static_cast<std::size_t>(degenerate));
    }
    save_pointcloud_ply(pc, out_path);
    std::cerr << "wrote " << out_path << "\n";
    emit("point_count", pc.size());
    return 0;
}

int run_compare(const std::string& src_path, const std::string& ref_path,
                const std::string& crop_box, bool align, int icp_iterations) {
    PointCloud src = load_pointcloud_ply(src_path);
    PointCloud ref = load_pointcloud_ply(ref_path);
    if (!crop_box.empty()) {
        Aabb box = parse_crop(crop_box);
        src = crop(src, box);
        ref = crop(ref, box);
        std::cerr << "after crop: " << src.size() << " source points, "
                  << ref.size() << " reference points\n";
    }
    if (src.size() == 0 || ref.size() == 0)
        throw std::runtime_error("a cloud is empty after cropping");

    if (align) {
        IcpResult res = icp(src, ref, icp_iterations);
        src = apply_transform(src, res.transform);
        emit("icp_iteration_count", res.rmse_history.size() - 1);
        emit("icp_rmse_final", res.rmse_history.back());
    }

    PointCloud ref_n = with_normals(ref, 16);
    emit("point_to_point_mse", point_to_point_mse(src, ref));
    emit("point_to_surface_mse", point_to_surface_mse(src, ref_n));
    emit("hausdorff", hausdorff_distance(src, ref));
    emit("chamfer", chamfer_distance(src, ref));
    return 0;
}

int run_register(const std::string& src_path, const std::string& ref_path,
                 const std::string& out_path, int max_iterations) {
    PointCloud src = load_pointcloud_ply(src_path);
    PointCloud ref = load_pointcloud_ply(ref_path);
    IcpResult res = icp(src, ref, max_iterations);
    if (!out_path.empty()) {
        save_transform(res.transform, out_path);
        std::cerr << "wrote " << out_path << "\n";
    }
    emit("icp_iteration_count", res.rmse_history.size() - 1);
    emit("icp_rmse_initial", res.rmse_history.front());
    emit("icp_rmse_final", res.rmse_history.back());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian splat trainer, renderer and point cloud toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    int threads = 1;
    app.add_option("--threads", threads, "Worker threads (default 1)")
        ->check(CLI::PositiveNumber);

    std::string scene_dir, config_path, out_dir, model_path, camera_id, pose_path;
    std::string out_path, background = "0,0,0", src_path, ref_path, crop_box;
    int downsample = 1, split_every = 8, icp_iterations = 50, normals_k = 0;
    double min_opacity = 0.5;
    bool align = false;

    CLI::App* c_train = app.add_subcommand("train", "Optimize a model from a scene");
    c_train->add_option("--scene", scene_dir, "Scene directory")->required();
    c_train->add_option("--config", config_path, "Training configuration file");
    c_train->add_option("--out", out_dir, "Output directory")->required();
    c_train->add_option("--downsample", downsample, "Image downsampling factor")
        ->check(CLI::PositiveNumber);

    CLI::App* c_render = app.add_subcommand("render", "Render one view of a model");
    c_render->add_option("--model", model_path, "Model checkpoint")->required();
    c_render->add_option("--scene", scene_dir, "Scene directory (with --camera-id)");
    c_render->add_option("--camera-id", camera_id, "Image name of a scene camera");
    c_render->add_option("--pose", pose_path, "Standalone camera pose file");
    c_render->add_option("--out", out_path, "Output image")->required();
    c_render->add_option("--background", background, "Background color r,g,b");
    c_render->add_option("--downsample", downsample, "Image downsampling factor")
        ->check(CLI::PositiveNumber);

    CLI::App* c_eval = app.add_subcommand("eval", "Score a model on held-out views");
    c_eval->add_option("--model", model_path, "Model checkpoint")->required();
    c_eval->add_option("--scene", scene_dir, "Scene directory")->required();
    c_eval->add_option("--split-every", split_every,
                       "Every k-th view is held out (1 scores all views)")
        ->check(CLI::PositiveNumber);
    c_eval->add_option("--background", background, "Background color r,g,b");
    c_eval->add_option("--downsample", downsample, "Image downsampling factor")
        ->check(CLI::PositiveNumber);

    CLI::App* c_extract = app.add_subcommand("extract-pc",
                                             "Export gaussian centers as a point cloud");
    c_extract->add_option("--model", model_path, "Model checkpoint")->required();
    c_extract->add_option("--out", out_path, "Output point cloud")->required();
    c_extract->add_option("--min-opacity", min_opacity,
                          "Keep gaussians at or above this activated opacity");
    c_extract->add_option("--normals", normals_k,
                          "Estimate normals from this many neighbors (0 to skip)");

    CLI::App* c_compare = app.add_subcommand("compare-pc",
                                             "Geometric error between two point clouds");
    c_compare->add_option("--src", src_path, "Cloud under test")->required();
    c_compare->add_option("--ref", ref_path, "Reference cloud")->required();
    c_compare->add_option("--crop", crop_box, "Clip both clouds to x0,y0,z0,x1,y1,z1");
    c_compare->add_flag("--icp", align, "Register source onto reference first");
    c_compare->add_option("--icp-max-iterations", icp_iterations, "Registration cap")
        ->check(CLI::PositiveNumber);

    CLI::App* c_register = app.add_subcommand("register",
                                              "Rigidly align one cloud onto another");
    c_register->add_option("--src", src_path, "Cloud to move")->required();
    c_register->add_option("--ref", ref_path, "Fixed reference cloud")->required();
    c_register->add_option("--out-transform", out_path, "Where to save the transform");
    c_register->add_option("--max-iterations", icp_iterations, "Iteration cap")
        ->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_train->parsed())
            return run_train(scene_dir, config_path, out_dir, downsample, threads);
        if (c_render->parsed())
            return run_render(model_path, scene_dir, camera_id, pose_path, out_path,
                              background, downsample, threads);
        if (c_eval->parsed())
            return run_eval(model_path, scene_dir, split_every, background, downsample,
                            threads);
        if (c_extract->parsed())
            return run_extract(model_path, out_path, min_opacity, normals_k);
        if (c_compare->parsed())
            return run_compare(src_path, ref_path, crop_box, align, icp_iterations);
        if (c_register->parsed())
            return run_register(src_path, ref_path, out_path, icp_iterations);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
