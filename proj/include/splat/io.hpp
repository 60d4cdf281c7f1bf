#pragma once

#include "splat/geometry.hpp"
#include "splat/model.hpp"
#include "splat/trainer.hpp"

#include <string>

namespace splat {

/// Sparse reconstruction loaded from a text model directory containing
/// cameras.txt, images.txt and points3D.txt. Cameras are ordered by image
/// id and carry the image file name in image_id; points are ordered by
/// point id with colors scaled to [0,1].
struct SparseScene {
    std::vector<Camera> cameras;
    PointCloud points;
};

/// Reads the three text files. Only PINHOLE and SIMPLE_PINHOLE camera
/// models are understood; anything else, or any malformed line, raises
/// std::runtime_error naming the file and line.
SparseScene load_sparse_scene(const std::string& dir);

/// load_sparse_scene plus the PPM image for every camera, from
/// dir/images/<name>. Image sizes must match their cameras.
struct SceneData {
    SparseScene scene;
    Dataset dataset;
};
SceneData load_scene_with_images(const std::string& dir);

/// Intrinsics and size scaled down by an integer factor; pixels of the
/// reduced image are box averages of k x k blocks.
Camera downsample_camera(const Camera& cam, int k);
ImageBuffer downsample_image(const ImageBuffer& img, int k);

/// Binary little-endian PLY checkpoint of the full model, 62 properties
/// per row: position, placeholder normal, the harmonics split into the
/// base band and the 45 higher coefficients (channel-major), raw opacity,
/// log scales, quaternion. Values are written as doubles so a round trip
/// is bit exact; readers also accept the same layout with floats.
void save_gaussian_ply(const GaussianModel& model, const std::string& path);
GaussianModel load_gaussian_ply(const std::string& path);

/// Point cloud PLY. Writing is binary little-endian (positions as double,
/// optional uchar colors, optional double normals). Reading accepts
/// binary little-endian or ascii, float or double positions, uchar or
/// float colors, and skips unrecognized scalar vertex properties.
void save_pointcloud_ply(const PointCloud& pc, const std::string& path);
PointCloud load_pointcloud_ply(const std::string& path);

/// Binary 8-bit PPM (P6, maxval 255). Values are scaled by 255 and
/// rounded on write, divided by 255 on read. Any other PPM variant,
/// short pixel data, or trailing bytes raise std::runtime_error.
void save_ppm(const ImageBuffer& img, const std::string& path);
ImageBuffer load_ppm(const std::string& path);

/// Flat "key = value" training configuration. '#' starts a comment,
/// blank lines are skipped, unknown keys are errors, and the parsed
/// configuration must satisfy check_config. background_color takes three
/// comma-separated values.
TrainConfig load_train_config(const std::string& path);

/// Free-standing camera pose: width height fx fy cx cy, nine rotation
/// entries row-major, then the translation, whitespace separated.
Camera load_pose(const std::string& path);

/// Rigid transform file: nine rotation entries row-major, then the
/// translation.
void save_transform(const RigidTransform& t, const std::string& path);
RigidTransform load_transform(const std::string& path);

}  // namespace splat
