#include "splat/image_metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace splat {

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

void require_same_size(const ImageBuffer& a, const ImageBuffer& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("image sizes differ: " + std::to_string(a.width) +
                                    "x" + std::to_string(a.height) + " vs " +
                                    std::to_string(b.width) + "x" +
                                    std::to_string(b.height));
}

const std::vector<double>& gaussian_window() {
    static const std::vector<double> g = [] {
        std::vector<double> v(kWindow);
        double sum = 0;
        for (int i = 0; i < kWindow; ++i) {
            double d = i - kRadius;
            v[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += v[i];
        }
        for (double& x : v) x /= sum;
        return v;
    }();
    return g;
}

// Single-channel plane helpers. Planes are row-major height*width.
using Plane = std::vector<double>;

// Valid-region separable blur: (h, w) -> (h - 10, w - 10).
Plane blur_valid(const Plane& in, int w, int h) {
    const auto& g = gaussian_window();
    const int ow = w - kWindow + 1;
    Plane tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < kWindow; ++i) s += g[i] * in[y * w + x + i];
            tmp[y * ow + x] = s;
        }
    const int oh = h - kWindow + 1;
    Plane out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < kWindow; ++i) s += g[i] * tmp[(y + i) * ow + x];
            out[y * ow + x] = s;
        }
    return out;
}

// Adjoint of blur_valid: scatters a window-grid map back onto pixels.
Plane scatter_valid(const Plane& in, int w, int h) {
    const auto& g = gaussian_window();
    const int ow = w - kWindow + 1;
    const int oh = h - kWindow + 1;
    Plane tmp(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double v = in[y * ow + x];
            for (int i = 0; i < kWindow; ++i) tmp[(y + i) * ow + x] += g[i] * v;
        }
    Plane out(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double v = tmp[y * ow + x];
            for (int i = 0; i < kWindow; ++i) out[y * w + x + i] += g[i] * v;
        }
    return out;
}

Plane channel_plane(const ImageBuffer& img, int ch) {
    Plane p(static_cast<std::size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) p[y * img.width + x] = img.at(y, x, ch);
    return p;
}

double ssim_impl(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* grad_a) {
    require_same_size(a, b);
    if (a.width < kWindow || a.height < kWindow)
        throw std::invalid_argument("ssim needs images at least 11x11, got " +
                                    std::to_string(a.width) + "x" +
                                    std::to_string(a.height));

    const int w = a.width, h = a.height;
    const int ow = w - kWindow + 1, oh = h - kWindow + 1;
    const std::size_t windows = static_cast<std::size_t>(ow) * oh;
    const double denom = static_cast<double>(windows) * 3.0;

    if (grad_a) *grad_a = ImageBuffer(w, h, 0.0);

    double total = 0;
    for (int ch = 0; ch < 3; ++ch) {
        Plane pa = channel_plane(a, ch);
        Plane pb = channel_plane(b, ch);
        Plane paa(pa.size()), pbb(pa.size()), pab(pa.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            paa[i] = pa[i] * pa[i];
            pbb[i] = pb[i] * pb[i];
            pab[i] = pa[i] * pb[i];
        }
        Plane mu_a = blur_valid(pa, w, h);
        Plane mu_b = blur_valid(pb, w, h);
        Plane mu_aa = blur_valid(paa, w, h);
        Plane mu_bb = blur_valid(pbb, w, h);
        Plane mu_ab = blur_valid(pab, w, h);

        Plane c0, c1, c2;
        if (grad_a) {
            c0.assign(windows, 0.0);
            c1.assign(windows, 0.0);
            c2.assign(windows, 0.0);
        }
        for (std::size_t i = 0; i < windows; ++i) {
            double ma = mu_a[i], mb = mu_b[i];
            double va = mu_aa[i] - ma * ma;
            double vb = mu_bb[i] - mb * mb;
            double cov = mu_ab[i] - ma * mb;
            double A1 = 2 * ma * mb + kSsimC1;
            double A2 = 2 * cov + kSsimC2;
            double B1 = ma * ma + mb * mb + kSsimC1;
            double B2 = va + vb + kSsimC2;
            double S = (A1 * A2) / (B1 * B2);
            total += S;
            if (grad_a) {
                double inv = 2.0 / (B1 * B2);
                c0[i] = inv * (mb * A2 - S * B2 * ma - A1 * mb + S * B1 * ma);
                c1[i] = inv * A1;
                c2[i] = -inv * S * B1;  // equals -2 S / B2 scaled into the window
            }
        }
        if (grad_a) {
            Plane s0 = scatter_valid(c0, w, h);
            Plane s1 = scatter_valid(c1, w, h);
            Plane s2 = scatter_valid(c2, w, h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    std::size_t i = static_cast<std::size_t>(y) * w + x;
                    grad_a->at(y, x, ch) =
                        (s0[i] + pb[i] * s1[i] + pa[i] * s2[i]) / denom;
                }
        }
    }
    return total / denom;
}

}  // namespace

double l1_loss(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_size(a, b);
    double sum = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        sum += std::abs(a.pixels[i] - b.pixels[i]);
    return sum / static_cast<double>(a.pixels.size());
}

void l1_loss_backward(const ImageBuffer& a, const ImageBuffer& b, double upstream,
                      ImageBuffer& grad_a) {
    require_same_size(a, b);
    require_same_size(a, grad_a);
    double scale = upstream / static_cast<double>(a.pixels.size());
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double d = a.pixels[i] - b.pixels[i];
        if (d > 0)
            grad_a.pixels[i] += scale;
        else if (d < 0)
            grad_a.pixels[i] -= scale;
    }
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_size(a, b);
    double sum = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double d = a.pixels[i] - b.pixels[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.pixels.size());
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    double m = mse(a, b);
    if (m == 0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(m);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    return ssim_impl(a, b, nullptr);
}

double ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b,
                          ImageBuffer& grad_a) {
    return ssim_impl(a, b, &grad_a);
}

double photometric_loss(const ImageBuffer& a, const ImageBuffer& b, double lambda,
                        ImageBuffer* grad_a) {
    double s;
    if (grad_a) {
        ImageBuffer ds;
        s = ssim_with_gradient(a, b, ds);
        if (grad_a->width != a.width || grad_a->height != a.height)
            throw std::invalid_argument("gradient buffer size differs from image");
        for (std::size_t i = 0; i < a.pixels.size(); ++i)
            grad_a->pixels[i] += -0.5 * lambda * ds.pixels[i];
        l1_loss_backward(a, b, 1.0 - lambda, *grad_a);
    } else {
        s = ssim(a, b);
    }
    return (1.0 - lambda) * l1_loss(a, b) + lambda * 0.5 * (1.0 - s);
}

}  // namespace splat
