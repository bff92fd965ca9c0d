// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "nextview/common.hpp"
#include "nextview/field.hpp"
#include "nextview/image.hpp"

namespace nbv {

// ---------------------------------------------------------------------------
// Procedural ground-truth scenes
// ---------------------------------------------------------------------------

struct BoxPrimitive {
    Eigen::AlignedBox3d box;
    Eigen::Vector3d color;  // channels strictly inside (0, 1)
};

struct SpherePrimitive {
    Eigen::Vector3d center;
    double radius = 0.0;
    Eigen::Vector3d color;
};

// Recipe for a random scene. Primitive sizes are drawn as fractions of the
// smallest extent side, and primitive placement is constrained so every
// primitive fits inside the extent by construction.
struct SceneSpec {
    uint64_t seed = 0;
    Eigen::Vector3i dims{16, 16, 16};  // at least 8 voxels per axis
    Eigen::AlignedBox3d extent{Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1)};
    int n_primitives = 6;
    double size_min = 0.15;  // fraction of the smallest extent side, in (0, 1]
    double size_max = 0.45;
    std::vector<Eigen::Vector3d> palette = default_palette();

    static std::vector<Eigen::Vector3d> default_palette();
};

// Density parameter given to solid voxels; decodes to a density of 40.
inline constexpr double kSolidDensityParam = 40.0;
// Density parameter given to free space; decodes to exactly zero.
inline constexpr double kEmptyDensityParam = -60.0;

// Stamp a primitive into the field: every voxel whose centre lies inside the
// primitive becomes solid with the primitive's uniform colour. Later stamps
// overwrite earlier ones.
void voxelize(VoxelField& field, const BoxPrimitive& primitive);
void voxelize(VoxelField& field, const SpherePrimitive& primitive);

// Builds a scene deterministically from spec.seed. Free space decodes to
// exactly zero density.
VoxelField generate_scene(const SceneSpec& spec);

// ---------------------------------------------------------------------------
// Camera trajectories
// ---------------------------------------------------------------------------

enum class TrajectoryKind { Lawnmower, Orbit, Helix };

std::string kind_name(TrajectoryKind kind);
TrajectoryKind kind_from_name(const std::string& name);

struct TrajectorySpec {
    TrajectoryKind kind = TrajectoryKind::Lawnmower;
    int n_views = 100;      // at least 8
    double radius = 2.5;    // orbit/helix circle radius; lawnmower grid half-span
    double altitude = 2.0;  // path height above the target
    double sweep = 0.0;     // helix only: total altitude change along the path
    int turns = 3;          // helix only: number of revolutions
    Eigen::Vector3d target{0, 0, 0};
    int width = 64;
    int height = 64;
    double vfov = 0.7;  // vertical field of view, radians
};

// Generates the camera path. All cameras look at spec.target.
//   Lawnmower: boustrophedon grid at constant altitude.
//   Orbit:     circle at constant altitude.
//   Helix:     circle with a linear altitude sweep across `turns` revolutions.
std::vector<Camera> generate_trajectory(const TrajectorySpec& spec);

// ---------------------------------------------------------------------------
// Datasets on disk
// ---------------------------------------------------------------------------

// In-memory form of a rendered dataset directory.
struct Dataset {
    std::filesystem::path dir;
    std::string trajectory;
    Eigen::Vector3i grid_dims;
    Eigen::AlignedBox3d extent;
    RenderSettings render;
    std::vector<Camera> cameras;
    std::vector<Image> images;
};

std::filesystem::path dataset_image_path(const std::filesystem::path& dir, int id);
std::filesystem::path dataset_field_path(const std::filesystem::path& dir);

// Renders every camera against the ground-truth field and writes the dataset:
// manifest.json, poses.csv, images/<id>.pfm, and the field checkpoint.
void render_dataset(const VoxelField& gt, const std::vector<Camera>& cameras,
                    const RenderSettings& settings, const std::string& trajectory,
                    const std::filesystem::path& dir, int workers = 1);

// Reads a dataset back, validating that manifest counts match the files.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace nbv
