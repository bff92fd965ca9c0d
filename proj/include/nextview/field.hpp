// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "nextview/image.hpp"

namespace nbv {

// Trainable voxel radiance field. Parameters are unconstrained reals decoded
// per voxel (softplus density, logistic color) and then interpolated, so the
// decoded field is trilinear and the invariants sigma >= 0, c in [0,1] hold
// everywhere by construction.
struct VoxelField {
    Eigen::Vector3i dims;                      // voxels per axis, >= 2 each
    Eigen::AlignedBox3d extent;                // scene-space bounding box
    Eigen::VectorXd density_params;            // one per voxel, x-fastest
    Eigen::Matrix3Xd color_params;             // one column per voxel

    Eigen::Index voxels() const { return density_params.size(); }
    Eigen::Index index(int ix, int iy, int iz) const {
        return (static_cast<Eigen::Index>(iz) * dims.y() + iy) * dims.x() + ix;
    }
    Eigen::Vector3d voxel_center(int ix, int iy, int iz) const {
        const Eigen::Vector3d cell = extent.sizes().cwiseQuotient(dims.cast<double>());
        return extent.min() + cell.cwiseProduct(
                                  Eigen::Vector3d(ix + 0.5, iy + 0.5, iz + 0.5));
    }
};

VoxelField make_field(const Eigen::Vector3i& dims, const Eigen::AlignedBox3d& extent,
                      double density_param = -6.0,
                      const Eigen::Vector3d& color_param = Eigen::Vector3d::Zero());

// Softplus with a snap to exact zero for deeply negative parameters, so that
// deliberately empty space produces no opacity at all.
double decode_density(double param);
Eigen::Vector3d decode_color(const Eigen::Vector3d& params);

struct FieldSample {
    double sigma = 0.0;
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

// Trilinear interpolation of decoded voxel values; points outside the extent
// read as empty space.
FieldSample sample_field(const VoxelField& field, const Eigen::Vector3d& x);

struct Ray {
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // unit length
};

// Pinhole camera with an orthonormalized basis; pixel (0,0) is the top-left
// corner and rays pass through pixel centers.
struct Camera {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d forward = -Eigen::Vector3d::UnitZ();
    Eigen::Vector3d up = Eigen::Vector3d::UnitY();
    Eigen::Vector3d right = Eigen::Vector3d::UnitX();
    int width = 0;
    int height = 0;
    double vertical_fov = 0.0;  // radians

    static Camera look(const Eigen::Vector3d& position, const Eigen::Vector3d& forward,
                       const Eigen::Vector3d& up_hint, int width, int height,
                       double vertical_fov);
    Ray pixel_ray(int x, int y) const;
    Eigen::Index pixels() const { return static_cast<Eigen::Index>(width) * height; }
};

// Compositing weights alpha_i = T_i * (1 - exp(-sigma_i delta_i)), computed
// so that sum(alpha) + T_final == 1 to floating-point accuracy.
Eigen::VectorXd ray_weights(const Eigen::VectorXd& sigmas, const Eigen::VectorXd& deltas);

// Entropy-style per-sample variance -p ln p (0 at p == 0), maximal 1/e.
inline double beta_sq(double p) { return p <= 0.0 ? 0.0 : -p * std::log(p); }

struct RenderSettings {
    int n_samples = 48;
    double t_near = 0.1;
    double t_far = 10.0;
    double term_tau = 1e-4;            // stop marching once T < term_tau
    double empty_variance = 0.36787944117144233;  // rays that hit nothing
    uint64_t jitter_seed = 0;          // stratified-sample stream
    bool jittered = true;              // false pins samples to bin midpoints
    int workers = 1;
};

struct RayRender {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    double variance = 0.0;
    double transmittance = 1.0;
    int samples_used = 0;
};

RayRender render_ray(const VoxelField& field, const Ray& ray, const RenderSettings& settings,
                     uint64_t jitter_seed);

struct RenderedView {
    Image mean;
    Eigen::VectorXf variance;       // per pixel
    Eigen::VectorXf transmittance;  // per pixel

    Eigen::VectorXd variance_d;     // double-precision copies for scoring
    Eigen::VectorXd transmittance_d;
};

// One render_ray per pixel; the jitter stream is derived per pixel from
// settings.jitter_seed, so results are worker-count independent.
RenderedView render_view(const VoxelField& field, const Camera& camera,
                         const RenderSettings& settings);

struct TrainView {
    Camera camera;
    Image target;
};

struct FieldGradients {
    Eigen::VectorXd density;
    Eigen::Matrix3Xd color;
};

struct RayRef {
    int view = 0;
    int pixel = 0;
};

// Sum over the chosen rays of |C(r) - C_hat(r)|^2 with exact analytic
// gradients through compositing, interpolation, and the decodings.
double photometric_loss_and_grad(const VoxelField& field, const std::vector<TrainView>& views,
                                 const std::vector<RayRef>& rays,
                                 const RenderSettings& settings, FieldGradients& gradients);

struct TrainConfig {
    int iterations = 200;
    double learning_rate = 40.0;
    double momentum = 0.9;
    int ray_batch = 1024;
    uint64_t seed = 0;
    RenderSettings render;
    double divergence_factor = 1e3;  // abort when loss exceeds this times the initial loss
};

// Minibatch gradient descent with momentum; returns the per-iteration mean
// ray loss. Zero iterations is a no-op that leaves the field untouched.
std::vector<double> train(VoxelField& field, const std::vector<TrainView>& views,
                          const TrainConfig& config);

// Checkpoint: magic, dims, extent, then little-endian float32 parameter
// arrays. Files round-trip bit-exactly through load + save.
void save_field(const VoxelField& field, const std::filesystem::path& path);
VoxelField load_field(const std::filesystem::path& path);

}  // namespace nbv
