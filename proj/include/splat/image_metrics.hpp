#pragma once

#include "splat/model.hpp"

namespace splat {

/// Mean absolute difference over all pixel values.
double l1_loss(const ImageBuffer& a, const ImageBuffer& b);

/// Accumulates dL/da of `upstream * l1_loss(a, b)` into grad_a.
void l1_loss_backward(const ImageBuffer& a, const ImageBuffer& b, double upstream,
                      ImageBuffer& grad_a);

/// Mean squared difference over all pixel values.
double mse(const ImageBuffer& a, const ImageBuffer& b);

/// Peak signal-to-noise ratio in dB for a unit-peak signal; +inf on
/// identical images.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// averaged over all fully-interior windows and the three channels.
/// Requires both dimensions to be at least 11. Identical inputs give
/// exactly 1.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

/// ssim() that also writes dSSIM/da into grad_a (overwritten, same size
/// as a).
double ssim_with_gradient(const ImageBuffer& a, const ImageBuffer& b,
                          ImageBuffer& grad_a);

/// Training objective (1-lambda) L1 + lambda (1 - SSIM) / 2, with dL/da
/// accumulated into grad_a when grad_a is non-null.
double photometric_loss(const ImageBuffer& a, const ImageBuffer& b, double lambda,
                        ImageBuffer* grad_a);

}  // namespace splat
