// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <filesystem>

#include "nextview/common.hpp"

namespace nbv {

// RGB raster: one column per pixel in row-major order (y * width + x) with
// y = 0 at the top row. Stored as float32, matching the on-disk format.
struct Image {
    int width = 0;
    int height = 0;
    Eigen::Matrix3Xf rgb;

    Eigen::Index pixels() const { return static_cast<Eigen::Index>(width) * height; }
    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height;
    }
    Eigen::Matrix3Xf::ColXpr at(int x, int y) {
        return rgb.col(static_cast<Eigen::Index>(y) * width + x);
    }
    Eigen::Matrix3Xf::ConstColXpr at(int x, int y) const {
        return rgb.col(static_cast<Eigen::Index>(y) * width + x);
    }
};

Image make_image(int width, int height, const Eigen::Vector3f& fill = Eigen::Vector3f::Zero());

// Portable float map files: "PF" (RGB) and "Pf" (scalar), bottom-up rows,
// little-endian payload. Readers accept either byte order.
void write_pfm(const Image& image, const std::filesystem::path& path);
Image read_pfm(const std::filesystem::path& path);

void write_pfm_scalar(const Eigen::VectorXf& values, int width, int height,
                      const std::filesystem::path& path);
Eigen::VectorXf read_pfm_scalar(const std::filesystem::path& path, int& width, int& height);

}  // namespace nbv
