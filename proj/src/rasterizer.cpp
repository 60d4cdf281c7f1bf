#include "splat/rasterizer.hpp"

#include "splat/gaussian_math.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

namespace splat {

namespace {

void parallel_for(std::size_t n, int num_threads,
                  const std::function<void(std::size_t)>& fn) {
    if (num_threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int count = std::min<int>(num_threads, static_cast<int>(n));
    pool.reserve(count);
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

struct TileRange {
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

// Quadratic form of the conic at offset d; alpha = opacity * exp(-sigma).
// Shared by forward and backward so the skip decisions match bitwise.
inline double conic_sigma(const Mat2& q, double dx, double dy) {
    return 0.5 * (q(0, 0) * dx * dx + q(1, 1) * dy * dy) + q(0, 1) * dx * dy;
}

// Screen-space gradients of one Gaussian accumulated within one tile.
struct LocalGrad {
    double mean_x = 0, mean_y = 0;
    double q00 = 0, q01 = 0, q11 = 0;  // conic entries (q01 covers both off-diag)
    double color[3] = {0, 0, 0};
    double alpha = 0;
    bool contributed = false;
};

}  // namespace

void ModelGrads::resize(std::size_t n) {
    means.assign(n, Vec3::Zero());
    log_scales.assign(n, Vec3::Zero());
    rotations.assign(n, Quat::Zero());
    opacity_logits.assign(n, 0.0);
    sh_coeffs.assign(n, {});
    viewspace_grad_norm.assign(n, 0.0);
    seen_count.assign(n, 0);
}

void ModelGrads::zero() { resize(means.size()); }

RenderResult render_forward(const GaussianModel& model, const Camera& cam,
                            const Vec3& background, int tile_size, int num_threads) {
    const int w = cam.width, h = cam.height;
    const std::size_t n = model.size();

    RenderResult out;
    out.image = ImageBuffer(w, h);
    out.final_transmittance.assign(static_cast<std::size_t>(w) * h, 1.0);
    out.contrib_count.assign(static_cast<std::size_t>(w) * h, 0);
    out.screen.assign(n, {});
    out.tiles_x = (w + tile_size - 1) / tile_size;
    out.tiles_y = (h + tile_size - 1) / tile_size;
    out.tile_lists.assign(static_cast<std::size_t>(out.tiles_x) * out.tiles_y, {});

    const Vec3 cam_center = cam.center();
    std::vector<TileRange> ranges(n);

    parallel_for(n, num_threads, [&](std::size_t g) {
        Mat3 cov3d = covariance3d(model.log_scales[g], model.rotations[g]);
        ProjectedGaussian proj = project_gaussian(model.means[g], cov3d, cam);
        if (!proj.in_front) return;

        double det = proj.cov2d(0, 0) * proj.cov2d(1, 1) -
                     proj.cov2d(0, 1) * proj.cov2d(1, 0);
        if (det <= 0) return;

        double rx = 3.0 * std::sqrt(proj.cov2d(0, 0));
        double ry = 3.0 * std::sqrt(proj.cov2d(1, 1));
        double x_lo = proj.mean2d.x() - rx, x_hi = proj.mean2d.x() + rx;
        double y_lo = proj.mean2d.y() - ry, y_hi = proj.mean2d.y() + ry;
        if (x_hi < 0 || x_lo > w || y_hi < 0 || y_lo > h) return;

        GaussianScreenData& sd = out.screen[g];
        sd.visible = true;
        sd.mean2d = proj.mean2d;
        double inv_det = 1.0 / det;
        sd.conic(0, 0) = proj.cov2d(1, 1) * inv_det;
        sd.conic(1, 1) = proj.cov2d(0, 0) * inv_det;
        sd.conic(0, 1) = sd.conic(1, 0) = -proj.cov2d(0, 1) * inv_det;
        sd.depth = proj.t.z();
        sd.opacity = model.activated_opacity(g);
        sd.color = sh_to_color(model.sh_coeffs[g], model.sh_degree_active,
                               sh_dir(model.means[g], cam_center));

        TileRange& r = ranges[g];
        r.x0 = std::clamp(static_cast<int>(std::floor(x_lo / tile_size)), 0,
                          out.tiles_x - 1);
        r.x1 = std::clamp(static_cast<int>(std::floor(x_hi / tile_size)), 0,
                          out.tiles_x - 1);
        r.y0 = std::clamp(static_cast<int>(std::floor(y_lo / tile_size)), 0,
                          out.tiles_y - 1);
        r.y1 = std::clamp(static_cast<int>(std::floor(y_hi / tile_size)), 0,
                          out.tiles_y - 1);
    });

    // Binning stays serial so the per-tile insertion order is fixed; the
    // depth sort below then makes the lists independent of thread count.
    for (std::size_t g = 0; g < n; ++g) {
        if (!out.screen[g].visible) continue;
        const TileRange& r = ranges[g];
        for (int ty = r.y0; ty <= r.y1; ++ty)
            for (int tx = r.x0; tx <= r.x1; ++tx)
                out.tile_lists[static_cast<std::size_t>(ty) * out.tiles_x + tx]
                    .push_back(static_cast<std::uint32_t>(g));
    }

    const std::size_t tile_count = out.tile_lists.size();
    parallel_for(tile_count, num_threads, [&](std::size_t t) {
        auto& list = out.tile_lists[t];
        std::sort(list.begin(), list.end(), [&](std::uint32_t a, std::uint32_t b) {
            double da = out.screen[a].depth, db = out.screen[b].depth;
            return da < db || (da == db && a < b);
        });

        const int tx = static_cast<int>(t) % out.tiles_x;
        const int ty = static_cast<int>(t) / out.tiles_x;
        const int px0 = tx * tile_size, px1 = std::min(w, px0 + tile_size);
        const int py0 = ty * tile_size, py1 = std::min(h, py0 + tile_size);

        for (int py = py0; py < py1; ++py) {
            for (int px = px0; px < px1; ++px) {
                const double sx = px + 0.5, sy = py + 0.5;
                double T = 1.0;
                Vec3 C = Vec3::Zero();
                std::uint32_t blended = 0;
                for (std::size_t pos = 0; pos < list.size(); ++pos) {
                    const GaussianScreenData& sd = out.screen[list[pos]];
                    double sigma =
                        conic_sigma(sd.conic, sx - sd.mean2d.x(), sy - sd.mean2d.y());
                    if (sigma < 0) continue;
                    double alpha = std::min(kMaxAlpha, sd.opacity * std::exp(-sigma));
                    if (alpha < kMinAlpha) continue;
                    double next_T = T * (1.0 - alpha);
                    if (next_T < kMinTransmit) break;  // this one is not blended
                    C += sd.color * (alpha * T);
                    T = next_T;
                    blended = static_cast<std::uint32_t>(pos) + 1;
                }
                std::size_t pix = static_cast<std::size_t>(py) * w + px;
                out.final_transmittance[pix] = T;
                out.contrib_count[pix] = blended;
                for (int c = 0; c < 3; ++c)
                    out.image.at(py, px, c) = C[c] + T * background[c];
            }
        }
    });
    return out;
}

void render_backward(const GaussianModel& model, const Camera& cam,
                     const Vec3& background, const RenderResult& fwd,
                     const ImageBuffer& dL_dimage, ModelGrads& grads, int tile_size,
                     int num_threads) {
    const int w = cam.width, h = cam.height;
    const std::size_t n = model.size();
    const std::size_t tile_count = fwd.tile_lists.size();

    std::vector<std::vector<LocalGrad>> tile_grads(tile_count);

    parallel_for(tile_count, num_threads, [&](std::size_t t) {
        const auto& list = fwd.tile_lists[t];
        if (list.empty()) return;
        auto& local = tile_grads[t];
        local.assign(list.size(), {});

        const int tx = static_cast<int>(t) % fwd.tiles_x;
        const int ty = static_cast<int>(t) / fwd.tiles_x;
        const int px0 = tx * tile_size, px1 = std::min(w, px0 + tile_size);
        const int py0 = ty * tile_size, py1 = std::min(h, py0 + tile_size);

        for (int py = py0; py < py1; ++py) {
            for (int px = px0; px < px1; ++px) {
                std::size_t pix = static_cast<std::size_t>(py) * w + px;
                std::uint32_t cnt = fwd.contrib_count[pix];
                if (cnt == 0) continue;
                const double sx = px + 0.5, sy = py + 0.5;
                const double T_final = fwd.final_transmittance[pix];
                const Vec3 dC(dL_dimage.at(py, px, 0), dL_dimage.at(py, px, 1),
                              dL_dimage.at(py, px, 2));
                const double bg_dot = background.dot(dC);

                double T = T_final;
                Vec3 accum = Vec3::Zero();
                for (std::size_t pos = cnt; pos-- > 0;) {
                    const GaussianScreenData& sd = fwd.screen[list[pos]];
                    const double dx = sx - sd.mean2d.x(), dy = sy - sd.mean2d.y();
                    double sigma = conic_sigma(sd.conic, dx, dy);
                    if (sigma < 0) continue;
                    double raw = sd.opacity * std::exp(-sigma);
                    double alpha = std::min(kMaxAlpha, raw);
                    if (alpha < kMinAlpha) continue;

                    double one_minus = 1.0 - alpha;
                    T /= one_minus;  // transmittance seen by this gaussian

                    LocalGrad& lg = local[pos];
                    lg.contributed = true;

                    double aT = alpha * T;
                    for (int c = 0; c < 3; ++c) lg.color[c] += aT * dC[c];

                    double dL_dalpha = T * (sd.color - accum).dot(dC) -
                                       (T_final / one_minus) * bg_dot;
                    accum = alpha * sd.color + one_minus * accum;

                    if (raw < kMaxAlpha) {
                        lg.alpha += std::exp(-sigma) * dL_dalpha;
                        double dL_dsigma = -alpha * dL_dalpha;
                        lg.q00 += dL_dsigma * 0.5 * dx * dx;
                        lg.q01 += dL_dsigma * dx * dy;
                        lg.q11 += dL_dsigma * 0.5 * dy * dy;
                        // d = pixel - mean2d, so the mean gets -dsigma/dd.
                        double gx = dL_dsigma * (sd.conic(0, 0) * dx + sd.conic(0, 1) * dy);
                        double gy = dL_dsigma * (sd.conic(0, 1) * dx + sd.conic(1, 1) * dy);
                        lg.mean_x -= gx;
                        lg.mean_y -= gy;
                    }
                }
            }
        }
    });

    // Serial fold in tile order: the totals never depend on thread count.
    std::vector<Vec2> g_mean2d(n, Vec2::Zero());
    std::vector<Eigen::Vector3d> g_conic(n, Eigen::Vector3d::Zero());  // q00 q01 q11
    std::vector<Vec3> g_color(n, Vec3::Zero());
    std::vector<double> g_alpha(n, 0.0);
    std::vector<std::uint8_t> contributed(n, 0);
    for (std::size_t t = 0; t < tile_count; ++t) {
        const auto& list = fwd.tile_lists[t];
        const auto& local = tile_grads[t];
        if (local.empty()) continue;
        for (std::size_t pos = 0; pos < list.size(); ++pos) {
            const LocalGrad& lg = local[pos];
            std::uint32_t g = list[pos];
            g_mean2d[g] += Vec2(lg.mean_x, lg.mean_y);
            g_conic[g] += Eigen::Vector3d(lg.q00, lg.q01, lg.q11);
            g_color[g] += Vec3(lg.color[0], lg.color[1], lg.color[2]);
            g_alpha[g] += lg.alpha;
            contributed[g] |= lg.contributed;
        }
    }

    const Vec3 cam_center = cam.center();
    parallel_for(n, num_threads, [&](std::size_t g) {
        if (!fwd.screen[g].visible) return;
        if (contributed[g]) {
            grads.seen_count[g] += 1;
            grads.viewspace_grad_norm[g] += g_mean2d[g].norm();
        }

        const GaussianScreenData& sd = fwd.screen[g];

        // Opacity through the sigmoid.
        double a = sd.opacity;
        grads.opacity_logits[g] += g_alpha[g] * a * (1.0 - a);

        // Color through the harmonics and the view direction.
        Vec3 dL_dmean = Vec3::Zero();
        if (g_color[g] != Vec3::Zero()) {
            Vec3 dir = sh_dir(model.means[g], cam_center);
            Vec3 dL_ddir;
            sh_to_color_backward(model.sh_coeffs[g], model.sh_degree_active, dir,
                                 g_color[g], grads.sh_coeffs[g], dL_ddir);
            sh_dir_backward(model.means[g], cam_center, dL_ddir, dL_dmean);
        }

        // Conic back to the projected covariance: dL/dcov = -Q G Q.
        Mat2 Gq;
        Gq << g_conic[g][0], 0.5 * g_conic[g][1], 0.5 * g_conic[g][1], g_conic[g][2];
        Mat2 dL_dcov2d = -sd.conic * Gq * sd.conic;

        Mat3 cov3d = covariance3d(model.log_scales[g], model.rotations[g]);
        Mat3 dL_dcov3d = Mat3::Zero();
        project_gaussian_backward(model.means[g], cov3d, cam, g_mean2d[g], dL_dcov2d,
                                  dL_dmean, dL_dcov3d);
        covariance3d_backward(model.log_scales[g], model.rotations[g], dL_dcov3d,
                              grads.log_scales[g], grads.rotations[g]);
        grads.means[g] += dL_dmean;
    });
}

}  // namespace splat
