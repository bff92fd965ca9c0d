// SPDX-License-Identifier: Apache-2.0
#include "nextview/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>

namespace nbv {

namespace {

constexpr double kImportanceFloor = 1e-12;

void check_positive_weights(const Eigen::VectorXd& weights) {
    if (!weights.allFinite() || (weights.array() <= 0.0).any())
        throw ConfigError("positional weights must be positive and finite");
}

}  // namespace

double ray_score_term(const Eigen::Vector3d& residual, double variance, double variance_floor) {
    if (!(variance_floor > 0.0)) throw ConfigError("variance floor must be positive");
    const double v = std::max(variance, variance_floor);
    return residual.squaredNorm() / (2.0 * v) + 0.5 * std::log(v);
}

double rendering_uncertainty(const VoxelField& field, const Camera& camera, const Image& gt,
                             const RenderSettings& settings, double fraction, uint64_t seed,
                             double variance_floor) {
    if (gt.width != camera.width || gt.height != camera.height)
        throw ConfigError("reference image size does not match the camera");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("ray subsample fraction must lie in (0, 1]");
    if (!(variance_floor > 0.0)) throw ConfigError("variance floor must be positive");

    const Eigen::Index n_rays = camera.pixels();
    std::vector<int> chosen;
    if (fraction >= 1.0) {
        chosen.resize(static_cast<size_t>(n_rays));
        for (Eigen::Index p = 0; p < n_rays; ++p) chosen[static_cast<size_t>(p)] = int(p);
    } else {
        std::mt19937_64 rng(seed);
        chosen = shuffled_indices(static_cast<int>(n_rays), rng);
        const auto keep = static_cast<size_t>(std::max<long long>(
            1, std::llround(fraction * static_cast<double>(n_rays))));
        chosen.resize(std::min(keep, chosen.size()));
        std::sort(chosen.begin(), chosen.end());  // fixed summation order
    }

    double sum = 0.0;
    for (const int p : chosen) {
        const Ray ray = camera.pixel_ray(p % camera.width, p / camera.width);
        const RayRender render =
            render_ray(field, ray, settings,
                       mix_seed(settings.jitter_seed, static_cast<uint64_t>(p)));
        const Eigen::Vector3d residual = gt.rgb.col(p).cast<double>() - render.mean;
        sum += ray_score_term(residual, render.variance, variance_floor);
    }
    return sum / static_cast<double>(chosen.size()) * static_cast<double>(n_rays);
}

PositionalContext make_context(const Eigen::Ref<const Points3>& train_positions, double eps_rel,
                               const Eigen::AlignedBox3d& bounds,
                               const Eigen::VectorXd& weights) {
    if (train_positions.cols() < 1) throw ConfigError("context needs at least one pose");
    if (!train_positions.allFinite()) throw ConfigError("poses must be finite");

    PositionalContext context;
    context.train_positions = train_positions;
    context.bounds = bounds;
    context.weights = weights.size() == 0
                          ? Eigen::VectorXd::Ones(train_positions.cols()).eval()
                          : weights;
    if (context.weights.size() != train_positions.cols())
        throw ConfigError("one weight per pose required");
    check_positive_weights(context.weights);
    for (Eigen::Index i = 0; i < train_positions.cols(); ++i)
        if (!bounds.contains(train_positions.col(i)))
            throw ConfigError("context bounds must contain every pose");

    context.trajectory_class = classify_trajectory(train_positions, eps_rel);
    if (context.trajectory_class.planar()) context.plane = fit_plane(train_positions);
    return context;
}

PlaneBasis plane_basis(const Plane& plane) {
    const Eigen::Vector3d n = plane.normal.normalized();
    const Eigen::Vector3d abs = n.cwiseAbs();
    Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
    if (abs.y() < abs.x() || abs.z() < abs.x())
        axis = abs.y() <= abs.z() ? Eigen::Vector3d::UnitY() : Eigen::Vector3d::UnitZ();
    PlaneBasis basis;
    basis.origin = plane.offset * n;
    basis.e1 = (axis - axis.dot(n) * n).normalized();
    basis.e2 = n.cross(basis.e1);
    return basis;
}

Eigen::Vector2d to_plane(const PlaneBasis& basis, const Eigen::Vector3d& p) {
    const Eigen::Vector3d d = p - basis.origin;
    return Eigen::Vector2d(d.dot(basis.e1), d.dot(basis.e2));
}

double planar_positional(const PositionalContext& context, const Eigen::Vector2d& candidate,
                         int resolution, double candidate_weight, bool candidate_cell_only) {
    if (!context.trajectory_class.planar())
        throw ConfigError("planar scoring requires a planar trajectory class");
    if (resolution < 2) throw ConfigError("diagram resolution must be at least 2");
    if (!(candidate_weight > 0.0)) throw ConfigError("candidate weight must be positive");
    check_positive_weights(context.weights);
    const Eigen::Index n_train = context.train_positions.cols();
    if (context.weights.size() != n_train) throw ConfigError("one weight per pose required");

    const PlaneBasis basis = plane_basis(context.plane);
    WeightedSites2 sites;
    sites.positions.resize(2, n_train + 1);
    sites.weights.resize(n_train + 1);
    for (Eigen::Index i = 0; i < n_train; ++i) {
        sites.positions.col(i) = to_plane(basis, context.train_positions.col(i));
        sites.weights(i) = context.weights(i);
    }
    sites.positions.col(n_train) = candidate;
    sites.weights(n_train) = candidate_weight;

    // A duplicated pose carries no new positional information.
    for (Eigen::Index i = 0; i < n_train; ++i)
        if (sites.positions.col(i) == candidate)
            return std::numeric_limits<double>::lowest();

    Eigen::AlignedBox2d clip;
    for (int corner = 0; corner < 8; ++corner)
        clip.extend(to_plane(basis, context.bounds.corner(
                                        static_cast<Eigen::AlignedBox3d::CornerType>(corner))));
    clip.extend(candidate);

    const VoronoiDiagram<2> diagram = weighted_voronoi(sites, clip, resolution);
    const Eigen::Index n = sites.count();
    const Eigen::Index first = candidate_cell_only ? n - 1 : 0;
    double total = 0.0;
    for (Eigen::Index i = first; i < n; ++i) {
        double inner = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            inner += std::pow((sites.positions.col(i) - sites.positions.col(j)).norm(),
                              sites.weights(i));
        total += inner / diagram.measures(i);
    }
    return total;
}

double nonplanar_positional(const PositionalContext& context, const Eigen::Vector3d& candidate,
                            int resolution, double candidate_weight) {
    if (context.trajectory_class.planar())
        throw ConfigError("non-planar scoring requires a non-planar trajectory class");
    if (resolution < 2) throw ConfigError("diagram resolution must be at least 2");
    if (!(candidate_weight > 0.0)) throw ConfigError("candidate weight must be positive");
    check_positive_weights(context.weights);
    const Eigen::Index n_train = context.train_positions.cols();
    if (context.weights.size() != n_train) throw ConfigError("one weight per pose required");

    for (Eigen::Index i = 0; i < n_train; ++i)
        if (context.train_positions.col(i) == candidate)
            return std::numeric_limits<double>::lowest();

    WeightedSites3 sites;
    sites.positions.resize(3, n_train + 1);
    sites.weights.resize(n_train + 1);
    sites.positions.leftCols(n_train) = context.train_positions;
    sites.weights.head(n_train) = context.weights;
    sites.positions.col(n_train) = candidate;
    sites.weights(n_train) = candidate_weight;

    Eigen::AlignedBox3d clip = context.bounds;
    clip.extend(candidate);

    const VoronoiDiagram<3> diagram = voronoi_volumes(sites, clip, resolution);
    const Eigen::VectorXd& volumes = diagram.measures;
    const Eigen::Index n = sites.count();

    const Eigen::VectorXd scaled = sites.weights.cwiseProduct(volumes);
    const Eigen::VectorXd importance =
        (scaled / scaled.sum()).cwiseMax(kImportanceFloor);
    const Eigen::VectorXd inv = volumes.cwiseInverse();
    const Eigen::VectorXd density = inv / inv.sum();

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double gap = importance(i) - density(i);
        total += -std::log(importance(i)) * density(i) + sites.weights(i) * gap * gap;
    }
    return total;
}

double positional_uncertainty(const PositionalContext& context, const Eigen::Vector3d& candidate,
                              int resolution_planar, int resolution_nonplanar,
                              double candidate_weight, bool candidate_cell_only) {
    if (context.trajectory_class.planar())
        return planar_positional(context, to_plane(plane_basis(context.plane), candidate),
                                 resolution_planar, candidate_weight, candidate_cell_only);
    return nonplanar_positional(context, candidate, resolution_nonplanar, candidate_weight);
}

std::vector<CandidateScore> normalize_scores(std::vector<CandidateScore> scores) {
    if (scores.empty()) throw ConfigError("at least one candidate required");
    auto normalize = [&](auto raw, auto norm) {
        double lo = scores.front().*raw;
        double hi = lo;
        for (const CandidateScore& s : scores) {
            lo = std::min(lo, s.*raw);
            hi = std::max(hi, s.*raw);
        }
        const double span = hi - lo;
        for (CandidateScore& s : scores)
            s.*norm = span > 0.0 ? (s.*raw - lo) / span : 0.5;
    };
    normalize(&CandidateScore::sigma_rgb2, &CandidateScore::norm_rgb);
    normalize(&CandidateScore::sigma_pos2, &CandidateScore::norm_pos);
    for (CandidateScore& s : scores) s.hybrid = s.norm_rgb + s.norm_pos;
    return scores;
}

std::vector<CandidateScore> hybrid_scores(const VoxelField& field,
                                          const PositionalContext& context,
                                          const std::vector<CandidateView>& candidates,
                                          const ScoreSettings& settings) {
    if (candidates.empty()) throw ConfigError("at least one candidate required");
    std::vector<CandidateScore> scores(candidates.size());
    std::vector<std::exception_ptr> errors(candidates.size());
    parallel_for(static_cast<int64_t>(candidates.size()), settings.workers,
                 [&](int64_t begin, int64_t end) {
                     for (int64_t i = begin; i < end; ++i) {
                         try {
                             const CandidateView& candidate = candidates[static_cast<size_t>(i)];
                             CandidateScore score;
                             score.view_id = candidate.view_id;
                             score.sigma_rgb2 = rendering_uncertainty(
                                 field, candidate.camera, candidate.gt, settings.render,
                                 settings.subsample_fraction,
                                 mix_seed(settings.seed,
                                          static_cast<uint64_t>(candidate.view_id)),
                                 settings.variance_floor);
                             score.sigma_pos2 = positional_uncertainty(
                                 context, candidate.camera.position,
                                 settings.voronoi_resolution_planar,
                                 settings.voronoi_resolution_nonplanar, 1.0,
                                 settings.candidate_cell_only);
                             scores[static_cast<size_t>(i)] = score;
                         } catch (...) {
                             errors[static_cast<size_t>(i)] = std::current_exception();
                         }
                     }
                 });
    for (const std::exception_ptr& error : errors)
        if (error) std::rethrow_exception(error);
    return normalize_scores(std::move(scores));
}

int best_view(const std::vector<CandidateScore>& scores) {
    if (scores.empty()) throw ConfigError("at least one candidate required");
    const CandidateScore* best = &scores.front();
    for (const CandidateScore& s : scores)
        if (s.hybrid > best->hybrid || (s.hybrid == best->hybrid && s.view_id < best->view_id))
            best = &s;
    return best->view_id;
}

void write_scores_csv(const std::vector<CandidateScore>& scores, int selected_view,
                      std::ostream& os) {
    os << "view_id,sigma_rgb2,sigma_pos2,norm_rgb,norm_pos,hybrid,selected\n";
    for (const CandidateScore& s : scores)
        os << s.view_id << ',' << format_number(s.sigma_rgb2) << ','
           << format_number(s.sigma_pos2) << ',' << format_number(s.norm_rgb) << ','
           << format_number(s.norm_pos) << ',' << format_number(s.hybrid) << ','
           << (s.view_id == selected_view ? 1 : 0) << '\n';
}

}  // namespace nbv
