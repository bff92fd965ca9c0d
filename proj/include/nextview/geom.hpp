// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <iosfwd>
#include <vector>

#include "nextview/common.hpp"

namespace nbv {

// Point sets are dense column matrices: one column per point, 2 or 3 rows.
using Points2 = Eigen::Matrix2Xd;
using Points3 = Eigen::Matrix3Xd;

// Symmetric Hausdorff distance max(h(a,b), h(b,a)) with
// h(A,B) = max_i min_j |a_i - b_j|. Both sets must be non-empty and share
// the row dimension.
double hausdorff(const Eigen::Ref<const Eigen::MatrixXd>& a,
                 const Eigen::Ref<const Eigen::MatrixXd>& b);

// Least-squares plane n.x = offset with |n| = 1.
struct Plane {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double offset = 0.0;

    double signed_distance(const Eigen::Vector3d& x) const { return normal.dot(x) - offset; }
    Eigen::Vector3d project(const Eigen::Vector3d& x) const {
        return x - signed_distance(x) * normal;
    }
};

// Fits the plane minimizing the sum of squared point-plane distances.
// Throws ConfigError for fewer than 3 points or a collinear set.
Plane fit_plane(const Eigen::Ref<const Points3>& points);

enum class TrajectoryLabel { Planar, NonPlanar };

struct TrajectoryClass {
    TrajectoryLabel label = TrajectoryLabel::NonPlanar;
    double hausdorff_value = 0.0;
    double threshold_used = 0.0;
    bool degenerate_fit = false;

    bool planar() const { return label == TrajectoryLabel::Planar; }
};

// Compares the pose set against its projection onto the best-fit plane.
// The threshold is eps_rel times the bounding-box diagonal of the poses;
// a degenerate plane fit classifies NonPlanar with the flag set.
TrajectoryClass classify_trajectory(const Eigen::Ref<const Points3>& poses, double eps_rel);

template <int Dim>
struct WeightedSites {
    Eigen::Matrix<double, Dim, Eigen::Dynamic> positions;
    Eigen::VectorXd weights;  // multiplicative weights, all > 0

    Eigen::Index count() const { return positions.cols(); }
};

using WeightedSites2 = WeightedSites<2>;
using WeightedSites3 = WeightedSites<3>;

// Rasterized multiplicatively weighted Voronoi partition. A grid cell
// belongs to the site minimizing d(cell_center, site) / weight, ties to the
// lowest site index. measures[i] is owned-cell count times the cell measure.
template <int Dim>
struct VoronoiDiagram {
    WeightedSites<Dim> sites;
    Eigen::AlignedBox<double, Dim> bounds;
    int resolution = 0;  // cells per axis
    std::vector<int32_t> ownership;  // x-fastest grid of site indices
    Eigen::VectorXd measures;        // per-site area (2D) or volume (3D)
    double cell_measure = 0.0;

    int32_t owner(int ix, int iy) const
        requires(Dim == 2)
    {
        return ownership[static_cast<size_t>(iy) * resolution + ix];
    }
    int32_t owner(int ix, int iy, int iz) const
        requires(Dim == 3)
    {
        return ownership[(static_cast<size_t>(iz) * resolution + iy) * resolution + ix];
    }
};

VoronoiDiagram<2> weighted_voronoi(const WeightedSites2& sites, const Eigen::AlignedBox2d& bounds,
                                   int resolution, int workers = 1);
VoronoiDiagram<3> voronoi_volumes(const WeightedSites3& sites, const Eigen::AlignedBox3d& bounds,
                                  int resolution, int workers = 1);

// Greedy volume-capped merging of Voronoi cells into clusters. Cells are
// visited in ascending volume order; each joins the face-adjacent cluster
// with the smallest label while the merged volume stays within max_volume,
// and its labeled neighbors are pulled into the same cluster under the same
// cap. Returns one consecutive-from-zero label per site.
std::vector<int> voronoi_cluster(const VoronoiDiagram<3>& diagram, double max_volume);

// Debug export: one row per grid cell, columns cell_x, cell_y[, cell_z],
// site_index.
void write_diagram_csv(const VoronoiDiagram<2>& diagram, std::ostream& os);
void write_diagram_csv(const VoronoiDiagram<3>& diagram, std::ostream& os);

}  // namespace nbv
