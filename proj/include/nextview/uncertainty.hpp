// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "nextview/common.hpp"
#include "nextview/field.hpp"
#include "nextview/geom.hpp"
#include "nextview/image.hpp"

namespace nbv {

// ---------------------------------------------------------------------------
// Rendering uncertainty
// ---------------------------------------------------------------------------

// Per-ray Gaussian-style negative log-likelihood term
//   ||residual||^2 / (2 v) + ln(v) / 2,  v = max(variance, variance_floor).
// The floor keeps the term finite at vanishing predicted variance.
double ray_score_term(const Eigen::Vector3d& residual, double variance, double variance_floor);

// Sums ray_score_term over a seeded pixel subsample of the view, rendered
// against the reference image, then rescales the mean back to the full ray
// count so subsampling is unbiased in expectation. fraction = 1 evaluates
// every pixel exactly once, in pixel order, with the same per-pixel jitter
// streams render_view uses.
double rendering_uncertainty(const VoxelField& field, const Camera& camera, const Image& gt,
                             const RenderSettings& settings, double fraction, uint64_t seed,
                             double variance_floor = 1e-4);

// ---------------------------------------------------------------------------
// Positional uncertainty
// ---------------------------------------------------------------------------

// Frozen geometry of the training poses a candidate is scored against.
struct PositionalContext {
    TrajectoryClass trajectory_class;
    Points3 train_positions;        // one column per training pose
    Plane plane;                    // meaningful when the class is planar
    Eigen::AlignedBox3d bounds;     // diagram clip region; contains all poses
    Eigen::VectorXd weights;        // per-pose lambda, all > 0
};

// Classifies the poses, fits the plane when planar, and validates weights
// (empty means all ones) and bounds containment.
PositionalContext make_context(const Eigen::Ref<const Points3>& train_positions, double eps_rel,
                               const Eigen::AlignedBox3d& bounds,
                               const Eigen::VectorXd& weights = Eigen::VectorXd());

// Deterministic in-plane chart. e1 is aligned with the world axis least
// parallel to the normal; e2 completes the right-handed pair.
struct PlaneBasis {
    Eigen::Vector3d origin;
    Eigen::Vector3d e1;
    Eigen::Vector3d e2;
};

PlaneBasis plane_basis(const Plane& plane);
Eigen::Vector2d to_plane(const PlaneBasis& basis, const Eigen::Vector3d& p);

// Planar score: builds the weighted Voronoi diagram of the projected training
// poses plus the candidate, clipped to the context bounds projected through
// the plane basis (extended to cover the candidate), then evaluates
//   F = sum_i [ sum_j ||p_i - p_j||^(lambda_i) ] / A_i
// over every site in that diagram. candidate_cell_only restricts the outer
// sum to the candidate's own term. A candidate exactly coinciding with a
// training pose returns the minimum representable score.
double planar_positional(const PositionalContext& context, const Eigen::Vector2d& candidate,
                         int resolution, double candidate_weight = 1.0,
                         bool candidate_cell_only = false);

// Non-planar score over cell volumes A_i of training poses plus candidate:
//   G_i = lambda_i A_i / sum_k lambda_k A_k   (floored at 1e-12)
//   r_i = (1/A_i) / sum_k (1/A_k)
//   F   = sum_i [ -ln(G_i) r_i + lambda_i (G_i - r_i)^2 ]
// Duplicates follow the planar convention.
double nonplanar_positional(const PositionalContext& context, const Eigen::Vector3d& candidate,
                            int resolution, double candidate_weight = 1.0);

// Indicator dispatch on the trajectory class: exactly one branch runs. The
// candidate is projected into the plane chart for the planar branch.
double positional_uncertainty(const PositionalContext& context, const Eigen::Vector3d& candidate,
                              int resolution_planar, int resolution_nonplanar,
                              double candidate_weight = 1.0, bool candidate_cell_only = false);

// ---------------------------------------------------------------------------
// Hybrid candidate scoring
// ---------------------------------------------------------------------------

struct CandidateView {
    int view_id = 0;
    Camera camera;
    Image gt;
};

struct CandidateScore {
    int view_id = 0;
    double sigma_rgb2 = 0.0;  // raw rendering uncertainty
    double sigma_pos2 = 0.0;  // raw positional uncertainty
    double norm_rgb = 0.0;    // min-max normalized, in [0, 1]
    double norm_pos = 0.0;
    double hybrid = 0.0;      // norm_rgb + norm_pos, in [0, 2]
};

struct ScoreSettings {
    RenderSettings render;
    double subsample_fraction = 0.25;  // pixel fraction for rendering uncertainty
    double variance_floor = 1e-4;
    uint64_t seed = 0;                 // subsample seed root, mixed per view id
    int voronoi_resolution_planar = 512;
    int voronoi_resolution_nonplanar = 128;
    bool candidate_cell_only = false;
    int workers = 1;
};

// Min-max normalizes each raw component across the set (a constant component
// maps to 0.5 everywhere) and fills norm_rgb, norm_pos, hybrid.
std::vector<CandidateScore> normalize_scores(std::vector<CandidateScore> scores);

// Scores every candidate against the current field and context. Candidates
// are processed independently (parallel over `workers`); the result order
// matches the input order.
std::vector<CandidateScore> hybrid_scores(const VoxelField& field,
                                          const PositionalContext& context,
                                          const std::vector<CandidateView>& candidates,
                                          const ScoreSettings& settings);

// View id with the highest hybrid score; ties resolve to the lowest view id.
int best_view(const std::vector<CandidateScore>& scores);

// CSV dump: view_id, sigma_rgb2, sigma_pos2, norm_rgb, norm_pos, hybrid,
// selected (0/1).
void write_scores_csv(const std::vector<CandidateScore>& scores, int selected_view,
                      std::ostream& os);

}  // namespace nbv
