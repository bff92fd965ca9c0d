// SPDX-License-Identifier: Apache-2.0
#include "nextview/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

namespace nbv {

namespace {

constexpr double kPsnrCap = 99.0;
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

Eigen::Matrix<double, kWindow, 1> gaussian_taps() {
    Eigen::Matrix<double, kWindow, 1> taps;
    const double center = (kWindow - 1) / 2.0;
    for (int t = 0; t < kWindow; ++t)
        taps(t) = std::exp(-(t - center) * (t - center) / (2.0 * kSigma * kSigma));
    return taps / taps.sum();
}

// Separable valid-region Gaussian filter: input is height x width,
// output (height-10) x (width-10).
Eigen::ArrayXXd blur_valid(const Eigen::ArrayXXd& field) {
    static const Eigen::Matrix<double, kWindow, 1> taps = gaussian_taps();
    const Eigen::Index h = field.rows(), w = field.cols();
    Eigen::ArrayXXd horizontal(h, w - kWindow + 1);
    for (Eigen::Index x = 0; x < horizontal.cols(); ++x) {
        horizontal.col(x) = field.col(x) * taps(0);
        for (int t = 1; t < kWindow; ++t) horizontal.col(x) += field.col(x + t) * taps(t);
    }
    Eigen::ArrayXXd out(h - kWindow + 1, horizontal.cols());
    for (Eigen::Index y = 0; y < out.rows(); ++y) {
        out.row(y) = horizontal.row(y) * taps(0);
        for (int t = 1; t < kWindow; ++t) out.row(y) += horizontal.row(y + t) * taps(t);
    }
    return out;
}

Eigen::ArrayXXd channel_plane(const Image& image, int channel) {
    Eigen::ArrayXXd plane(image.height, image.width);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            plane(y, x) = static_cast<double>(image.at(x, y)(channel));
    return plane;
}

// Average ranks, 1-based, ties sharing the mean of their positions.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& values) {
    const Eigen::Index n = values.size();
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
    Eigen::VectorXd ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && values(order[static_cast<size_t>(j + 1)]) ==
                                values(order[static_cast<size_t>(i)]))
            ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) ranks(order[static_cast<size_t>(k)]) = shared;
        i = j + 1;
    }
    return ranks;
}

// Remainder means after stripping prefixes of the index order `by_desc`,
// normalized by the full mean.
Eigen::VectorXd remainder_curve(const Eigen::VectorXd& error,
                                const std::vector<Eigen::Index>& by_desc, int steps,
                                double full_mean) {
    const Eigen::Index n = error.size();
    // Suffix sums over the removal order give every prefix-removal mean.
    std::vector<double> suffix(static_cast<size_t>(n) + 1, 0.0);
    for (Eigen::Index i = n - 1; i >= 0; --i)
        suffix[static_cast<size_t>(i)] =
            suffix[static_cast<size_t>(i) + 1] + error(by_desc[static_cast<size_t>(i)]);
    Eigen::VectorXd curve(steps);
    for (int s = 0; s < steps; ++s) {
        const Eigen::Index removed = static_cast<Eigen::Index>(
            static_cast<int64_t>(s) * n / steps);
        const Eigen::Index kept = n - removed;
        curve(s) = suffix[static_cast<size_t>(removed)] / static_cast<double>(kept) / full_mean;
    }
    return curve;
}

}  // namespace

double psnr(const Image& rendered, const Image& gt) {
    if (!rendered.same_shape(gt)) throw ConfigError("psnr: image dimensions differ");
    if (rendered.pixels() == 0) throw ConfigError("psnr: empty image");
    double sum_sq = 0.0;
    for (Eigen::Index i = 0; i < rendered.rgb.size(); ++i) {
        const double d = static_cast<double>(rendered.rgb(i)) - static_cast<double>(gt.rgb(i));
        sum_sq += d * d;
    }
    const double mse = sum_sq / static_cast<double>(rendered.rgb.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& rendered, const Image& gt) {
    if (!rendered.same_shape(gt)) throw ConfigError("ssim: image dimensions differ");
    if (rendered.width < kWindow || rendered.height < kWindow)
        throw ConfigError("ssim: image smaller than the filter window");

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const Eigen::ArrayXXd x = channel_plane(rendered, c);
        const Eigen::ArrayXXd y = channel_plane(gt, c);
        const Eigen::ArrayXXd mu_x = blur_valid(x);
        const Eigen::ArrayXXd mu_y = blur_valid(y);
        const Eigen::ArrayXXd var_x = blur_valid(x * x) - mu_x * mu_x;
        const Eigen::ArrayXXd var_y = blur_valid(y * y) - mu_y * mu_y;
        const Eigen::ArrayXXd cov = blur_valid(x * y) - mu_x * mu_y;
        const Eigen::ArrayXXd numerator = (2.0 * mu_x * mu_y + kC1) * (2.0 * cov + kC2);
        const Eigen::ArrayXXd denominator =
            (mu_x * mu_x + mu_y * mu_y + kC1) * (var_x + var_y + kC2);
        total += (numerator / denominator).mean();
    }
    return total / 3.0;
}

RankCorrelation srcc(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) {
    if (xs.size() != ys.size()) throw ConfigError("srcc: length mismatch");
    if (xs.size() < 3) throw ConfigError("srcc: need at least 3 samples");

    RankCorrelation result;
    if ((xs.array() == xs(0)).all() || (ys.array() == ys(0)).all()) {
        result.degenerate = true;
        return result;
    }

    const Eigen::VectorXd rx = average_ranks(xs);
    const Eigen::VectorXd ry = average_ranks(ys);
    const Eigen::VectorXd cx = rx.array() - rx.mean();
    const Eigen::VectorXd cy = ry.array() - ry.mean();
    const double denominator = std::sqrt(cx.squaredNorm() * cy.squaredNorm());
    if (denominator == 0.0) {
        result.degenerate = true;
        return result;
    }
    result.value = cx.dot(cy) / denominator;
    return result;
}

SparsificationCurve sparsification_curve(const Eigen::VectorXd& uncertainty,
                                         const Eigen::VectorXd& error, int steps) {
    if (uncertainty.size() != error.size())
        throw ConfigError("sparsification: map dimensions differ");
    if (uncertainty.size() == 0) throw ConfigError("sparsification: empty maps");
    if (steps < 2) throw ConfigError("sparsification: need at least 2 steps");

    SparsificationCurve curve;
    curve.fractions_removed =
        Eigen::VectorXd::LinSpaced(steps, 0.0, static_cast<double>(steps - 1) / steps);

    const double full_mean = error.mean();
    if (full_mean <= 0.0) {
        curve.degenerate = true;
        curve.error_by_uncertainty = Eigen::VectorXd::Ones(steps);
        curve.error_by_oracle = Eigen::VectorXd::Ones(steps);
        return curve;
    }

    const Eigen::Index n = error.size();
    std::vector<Eigen::Index> by_uncertainty(static_cast<size_t>(n));
    std::iota(by_uncertainty.begin(), by_uncertainty.end(), 0);
    std::stable_sort(by_uncertainty.begin(), by_uncertainty.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return uncertainty(a) > uncertainty(b); });
    std::vector<Eigen::Index> by_error(static_cast<size_t>(n));
    std::iota(by_error.begin(), by_error.end(), 0);
    std::stable_sort(by_error.begin(), by_error.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return error(a) > error(b); });

    curve.error_by_uncertainty = remainder_curve(error, by_uncertainty, steps, full_mean);
    curve.error_by_oracle = remainder_curve(error, by_error, steps, full_mean);
    return curve;
}

double ause(const SparsificationCurve& curve) {
    if (curve.degenerate) return 0.0;
    const Eigen::Index n = curve.fractions_removed.size();
    double area = 0.0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double gap_lo = curve.error_by_uncertainty(i) - curve.error_by_oracle(i);
        const double gap_hi = curve.error_by_uncertainty(i + 1) - curve.error_by_oracle(i + 1);
        area += 0.5 * (gap_lo + gap_hi) *
                (curve.fractions_removed(i + 1) - curve.fractions_removed(i));
    }
    return std::max(area, 0.0);
}

double ause(const Eigen::VectorXd& uncertainty, const Eigen::VectorXd& error, int steps) {
    return ause(sparsification_curve(uncertainty, error, steps));
}

void write_curve_csv(const SparsificationCurve& curve, std::ostream& os) {
    os << "fraction,err_by_uncertainty,err_by_oracle\n";
    for (Eigen::Index i = 0; i < curve.fractions_removed.size(); ++i)
        os << format_number(curve.fractions_removed(i)) << ','
           << format_number(curve.error_by_uncertainty(i)) << ','
           << format_number(curve.error_by_oracle(i)) << '\n';
}

}  // namespace nbv
