// SPDX-License-Identifier: Apache-2.0
#include "nextview/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace nbv {

namespace {

// Directed distance h(A,B) = max_i min_j |a_i - b_j|, squared. The inner
// loop bails out once a_i is provably closer than the current maximum.
double directed_hausdorff_sq(const Eigen::Ref<const Eigen::MatrixXd>& a,
                             const Eigen::Ref<const Eigen::MatrixXd>& b) {
    double max_sq = 0.0;
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        double min_sq = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            const double d_sq = (a.col(i) - b.col(j)).squaredNorm();
            if (d_sq < min_sq) {
                min_sq = d_sq;
                if (min_sq <= max_sq) break;
            }
        }
        max_sq = std::max(max_sq, min_sq);
    }
    return max_sq;
}

}  // namespace

double hausdorff(const Eigen::Ref<const Eigen::MatrixXd>& a,
                 const Eigen::Ref<const Eigen::MatrixXd>& b) {
    if (a.cols() == 0 || b.cols() == 0) throw ConfigError("hausdorff: empty point set");
    if (a.rows() != b.rows()) throw ConfigError("hausdorff: dimension mismatch");
    if (!a.allFinite() || !b.allFinite()) throw ConfigError("hausdorff: non-finite coordinates");
    return std::sqrt(std::max(directed_hausdorff_sq(a, b), directed_hausdorff_sq(b, a)));
}

Plane fit_plane(const Eigen::Ref<const Points3>& points) {
    if (points.cols() < 3) throw ConfigError("fit_plane: need at least 3 points");
    if (!points.allFinite()) throw ConfigError("fit_plane: non-finite coordinates");

    const Eigen::Vector3d centroid = points.rowwise().mean();
    const Points3 centered = points.colwise() - centroid;
    const Eigen::Matrix3d cov = centered * centered.transpose() / static_cast<double>(points.cols());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
    // Collinear or coincident points leave no spread in a second direction.
    const double scale = std::max(evals(2), std::numeric_limits<double>::min());
    if (evals(1) <= 1e-12 * scale || evals(2) <= 0.0)
        throw ConfigError("fit_plane: degenerate (collinear) point set");

    Plane plane;
    plane.normal = solver.eigenvectors().col(0).normalized();
    plane.offset = plane.normal.dot(centroid);
    return plane;
}

TrajectoryClass classify_trajectory(const Eigen::Ref<const Points3>& poses, double eps_rel) {
    if (poses.cols() < 3) throw ConfigError("classify_trajectory: need at least 3 poses");
    if (!(eps_rel > 0.0)) throw ConfigError("classify_trajectory: eps_rel must be positive");

    const Eigen::Vector3d lo = poses.rowwise().minCoeff();
    const Eigen::Vector3d hi = poses.rowwise().maxCoeff();
    TrajectoryClass result;
    result.threshold_used = eps_rel * (hi - lo).norm();

    Plane plane;
    try {
        plane = fit_plane(poses);
    } catch (const ConfigError&) {
        result.label = TrajectoryLabel::NonPlanar;
        result.hausdorff_value = std::numeric_limits<double>::infinity();
        result.degenerate_fit = true;
        return result;
    }

    Points3 projected(3, poses.cols());
    for (Eigen::Index i = 0; i < poses.cols(); ++i)
        projected.col(i) = plane.project(poses.col(i));

    result.hausdorff_value = hausdorff(poses, projected);
    result.label = result.hausdorff_value < result.threshold_used ? TrajectoryLabel::Planar
                                                                  : TrajectoryLabel::NonPlanar;
    return result;
}

namespace {

template <int Dim>
VoronoiDiagram<Dim> rasterize(const WeightedSites<Dim>& sites,
                              const Eigen::AlignedBox<double, Dim>& bounds, int resolution,
                              int workers) {
    const Eigen::Index n = sites.count();
    if (n < 1) throw ConfigError("voronoi: need at least 1 site");
    if (sites.weights.size() != n) throw ConfigError("voronoi: weight count mismatch");
    if ((sites.weights.array() <= 0.0).any()) throw ConfigError("voronoi: weights must be positive");
    if (resolution < 16) throw ConfigError("voronoi: resolution must be >= 16");
    if (!sites.positions.allFinite()) throw ConfigError("voronoi: non-finite site");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!bounds.contains(sites.positions.col(i)))
            throw ConfigError("voronoi: site outside bounds");

    VoronoiDiagram<Dim> diagram;
    diagram.sites = sites;
    diagram.bounds = bounds;
    diagram.resolution = resolution;

    const Eigen::Matrix<double, Dim, 1> cell_size = bounds.sizes() / resolution;
    diagram.cell_measure = cell_size.prod();

    // d/w ordering is preserved by comparing d^2 / w^2.
    const Eigen::VectorXd inv_w2 = sites.weights.array().square().inverse().matrix();

    int64_t total_cells = 1;
    for (int d = 0; d < Dim; ++d) total_cells *= resolution;
    diagram.ownership.assign(static_cast<size_t>(total_cells), 0);

    const int64_t rows = total_cells / resolution;  // cells along all but the x axis
    parallel_for(rows, workers, [&](int64_t begin, int64_t end) {
        Eigen::Matrix<double, Dim, 1> p;
        for (int64_t row = begin; row < end; ++row) {
            if constexpr (Dim == 2) {
                p(1) = bounds.min()(1) + (static_cast<double>(row) + 0.5) * cell_size(1);
            } else {
                p(1) = bounds.min()(1) + (static_cast<double>(row % resolution) + 0.5) * cell_size(1);
                p(2) = bounds.min()(2) + (static_cast<double>(row / resolution) + 0.5) * cell_size(2);
            }
            int32_t* out = diagram.ownership.data() + row * resolution;
            for (int ix = 0; ix < resolution; ++ix) {
                p(0) = bounds.min()(0) + (ix + 0.5) * cell_size(0);
                int32_t best = 0;
                double best_score = (p - sites.positions.col(0)).squaredNorm() * inv_w2(0);
                for (Eigen::Index s = 1; s < n; ++s) {
                    const double score = (p - sites.positions.col(s)).squaredNorm() * inv_w2(s);
                    if (score < best_score) {
                        best_score = score;
                        best = static_cast<int32_t>(s);
                    }
                }
                out[ix] = best;
            }
        }
    });

    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
    for (const int32_t owner : diagram.ownership) counts(owner) += 1.0;
    diagram.measures = counts * diagram.cell_measure;
    return diagram;
}

}  // namespace

VoronoiDiagram<2> weighted_voronoi(const WeightedSites2& sites, const Eigen::AlignedBox2d& bounds,
                                   int resolution, int workers) {
    return rasterize<2>(sites, bounds, resolution, workers);
}

VoronoiDiagram<3> voronoi_volumes(const WeightedSites3& sites, const Eigen::AlignedBox3d& bounds,
                                  int resolution, int workers) {
    return rasterize<3>(sites, bounds, resolution, workers);
}

namespace {

class UnionFind {
public:
    explicit UnionFind(int n) : parent_(static_cast<size_t>(n)) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }

    int find(int x) {
        while (parent_[static_cast<size_t>(x)] != x) {
            parent_[static_cast<size_t>(x)] = parent_[parent_[static_cast<size_t>(x)]];
            x = parent_[static_cast<size_t>(x)];
        }
        return x;
    }

    void attach(int child_root, int new_root) { parent_[static_cast<size_t>(child_root)] = new_root; }

private:
    std::vector<int> parent_;
};

}  // namespace

std::vector<int> voronoi_cluster(const VoronoiDiagram<3>& diagram, double max_volume) {
    if (!(max_volume > 0.0)) throw ConfigError("voronoi_cluster: max_volume must be positive");
    const int n = static_cast<int>(diagram.sites.count());
    const int res = diagram.resolution;

    // Face adjacency of ownership regions on the rasterized grid.
    std::vector<std::vector<char>> adjacent(static_cast<size_t>(n),
                                            std::vector<char>(static_cast<size_t>(n), 0));
    auto mark = [&](int32_t a, int32_t b) {
        if (a != b) {
            adjacent[static_cast<size_t>(a)][static_cast<size_t>(b)] = 1;
            adjacent[static_cast<size_t>(b)][static_cast<size_t>(a)] = 1;
        }
    };
    for (int iz = 0; iz < res; ++iz)
        for (int iy = 0; iy < res; ++iy)
            for (int ix = 0; ix < res; ++ix) {
                const int32_t o = diagram.owner(ix, iy, iz);
                if (ix + 1 < res) mark(o, diagram.owner(ix + 1, iy, iz));
                if (iy + 1 < res) mark(o, diagram.owner(ix, iy + 1, iz));
                if (iz + 1 < res) mark(o, diagram.owner(ix, iy, iz + 1));
            }

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (diagram.measures(a) != diagram.measures(b))
            return diagram.measures(a) < diagram.measures(b);
        return a < b;
    });

    UnionFind uf(n);
    std::vector<int> label(static_cast<size_t>(n), -1);        // at root
    std::vector<double> volume(static_cast<size_t>(n), 0.0);   // at root
    std::vector<char> labeled(static_cast<size_t>(n), 0);
    int next_label = 0;

    for (const int s : order) {
        std::vector<int> roots;
        for (int t = 0; t < n; ++t)
            if (adjacent[static_cast<size_t>(s)][static_cast<size_t>(t)] && labeled[static_cast<size_t>(t)]) {
                const int r = uf.find(t);
                if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
            }
        std::sort(roots.begin(), roots.end(),
                  [&](int a, int b) { return label[static_cast<size_t>(a)] < label[static_cast<size_t>(b)]; });

        int home = -1;
        for (const int r : roots)
            if (volume[static_cast<size_t>(r)] + diagram.measures(s) <= max_volume) {
                home = r;
                break;
            }

        labeled[static_cast<size_t>(s)] = 1;
        if (home < 0) {
            label[static_cast<size_t>(s)] = next_label++;
            volume[static_cast<size_t>(s)] = diagram.measures(s);
            continue;
        }

        uf.attach(s, home);
        volume[static_cast<size_t>(home)] += diagram.measures(s);

        // Remaining labeled neighbors adopt the same class when the cap allows.
        for (const int r : roots) {
            const int home_root = uf.find(home);
            const int r_root = uf.find(r);
            if (r_root == home_root) continue;
            if (volume[static_cast<size_t>(home_root)] + volume[static_cast<size_t>(r_root)] > max_volume)
                continue;
            const int keep = label[static_cast<size_t>(home_root)] <= label[static_cast<size_t>(r_root)]
                                 ? home_root
                                 : r_root;
            const int drop = keep == home_root ? r_root : home_root;
            uf.attach(drop, keep);
            volume[static_cast<size_t>(keep)] += volume[static_cast<size_t>(drop)];
        }
    }

    // Relabel clusters to consecutive integers in order of first site index.
    std::vector<int> result(static_cast<size_t>(n), -1);
    std::vector<int> remap(static_cast<size_t>(n), -1);
    int next = 0;
    for (int s = 0; s < n; ++s) {
        const int r = uf.find(s);
        if (remap[static_cast<size_t>(r)] < 0) remap[static_cast<size_t>(r)] = next++;
        result[static_cast<size_t>(s)] = remap[static_cast<size_t>(r)];
    }
    return result;
}

void write_diagram_csv(const VoronoiDiagram<2>& diagram, std::ostream& os) {
    os << "cell_x,cell_y,site_index\n";
    const int res = diagram.resolution;
    for (int iy = 0; iy < res; ++iy)
        for (int ix = 0; ix < res; ++ix)
            os << ix << ',' << iy << ',' << diagram.owner(ix, iy) << '\n';
}

void write_diagram_csv(const VoronoiDiagram<3>& diagram, std::ostream& os) {
    os << "cell_x,cell_y,cell_z,site_index\n";
    const int res = diagram.resolution;
    for (int iz = 0; iz < res; ++iz)
        for (int iy = 0; iy < res; ++iy)
            for (int ix = 0; ix < res; ++ix)
                os << ix << ',' << iy << ',' << iz << ',' << diagram.owner(ix, iy, iz) << '\n';
}

}  // namespace nbv
