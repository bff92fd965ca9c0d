// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <iosfwd>

#include "nextview/image.hpp"

namespace nbv {

// Peak signal-to-noise ratio in dB over all pixels and channels, capped at
// 99 dB (the cap also stands in for the identical-image infinity).
double psnr(const Image& rendered, const Image& gt);

// Mean local structural similarity over all fully-interior 11x11 Gaussian
// windows (sigma 1.5), averaged across channels. Requires dims >= 11.
double ssim(const Image& rendered, const Image& gt);

struct RankCorrelation {
    double value = 0.0;
    bool degenerate = false;  // a constant input leaves the rank undefined
};

// Spearman rank correlation with average ranks on ties.
RankCorrelation srcc(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys);

// Mean error of the surviving pixels after removing the highest-uncertainty
// (resp. highest-error) fraction, normalized by the keep-everything mean.
struct SparsificationCurve {
    Eigen::VectorXd fractions_removed;      // {0, 1/steps, ..., 1 - 1/steps}
    Eigen::VectorXd error_by_uncertainty;   // starts at 1
    Eigen::VectorXd error_by_oracle;        // starts at 1, non-increasing
    bool degenerate = false;                // all-zero error map
};

SparsificationCurve sparsification_curve(const Eigen::VectorXd& uncertainty,
                                         const Eigen::VectorXd& error, int steps);

// Trapezoidal area between the two curves; zero when the uncertainty
// ordering already matches the error ordering.
double ause(const SparsificationCurve& curve);
double ause(const Eigen::VectorXd& uncertainty, const Eigen::VectorXd& error, int steps);

// CSV export: fraction, err_by_uncertainty, err_by_oracle.
void write_curve_csv(const SparsificationCurve& curve, std::ostream& os);

}  // namespace nbv
