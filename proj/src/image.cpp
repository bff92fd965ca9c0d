// SPDX-License-Identifier: Apache-2.0
#include "nextview/image.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace nbv {

namespace {

float swap_endian(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits = __builtin_bswap32(bits);
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

struct PfmHeader {
    bool color = false;
    int width = 0;
    int height = 0;
    bool little_endian = true;
};

PfmHeader read_header(std::istream& in, const std::filesystem::path& path) {
    std::string magic;
    double scale = 0.0;
    PfmHeader header;
    if (!(in >> magic >> header.width >> header.height >> scale))
        throw DataError("malformed float map header: " + path.string());
    if (magic == "PF")
        header.color = true;
    else if (magic == "Pf")
        header.color = false;
    else
        throw DataError("not a float map file: " + path.string());
    if (header.width <= 0 || header.height <= 0 || scale == 0.0)
        throw DataError("invalid float map dimensions: " + path.string());
    header.little_endian = scale < 0.0;
    in.get();  // single whitespace byte before the payload
    return header;
}

void read_payload(std::istream& in, const PfmHeader& header, float* dst, int channels,
                  const std::filesystem::path& path) {
    const size_t row_floats = static_cast<size_t>(header.width) * channels;
    std::vector<float> row(row_floats);
    for (int y = header.height - 1; y >= 0; --y) {  // file rows run bottom-up
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row_floats * sizeof(float)));
        if (!in) throw DataError("truncated float map payload: " + path.string());
        if (!header.little_endian)
            for (float& v : row) v = swap_endian(v);
        std::memcpy(dst + static_cast<size_t>(y) * row_floats, row.data(),
                    row_floats * sizeof(float));
    }
}

void write_payload(std::ostream& out, const float* src, int width, int height, int channels) {
    const size_t row_floats = static_cast<size_t>(width) * channels;
    for (int y = height - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(src + static_cast<size_t>(y) * row_floats),
                  static_cast<std::streamsize>(row_floats * sizeof(float)));
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read file: " + path.string());
    return in;
}

}  // namespace

Image make_image(int width, int height, const Eigen::Vector3f& fill) {
    if (width <= 0 || height <= 0) throw ConfigError("image dimensions must be positive");
    Image image;
    image.width = width;
    image.height = height;
    image.rgb = fill.replicate(1, static_cast<Eigen::Index>(width) * height);
    return image;
}

void write_pfm(const Image& image, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "PF\n" << image.width << " " << image.height << "\n-1.0\n";
    // Column-major Matrix3Xf is exactly the interleaved RGB pixel stream.
    write_payload(out, image.rgb.data(), image.width, image.height, 3);
    if (!out) throw DataError("failed writing file: " + path.string());
}

Image read_pfm(const std::filesystem::path& path) {
    auto in = open_in(path);
    const PfmHeader header = read_header(in, path);
    Image image;
    image.width = header.width;
    image.height = header.height;
    image.rgb.resize(3, image.pixels());
    if (header.color) {
        read_payload(in, header, image.rgb.data(), 3, path);
    } else {
        Eigen::VectorXf gray(image.pixels());
        read_payload(in, header, gray.data(), 1, path);
        image.rgb = gray.transpose().replicate(3, 1);
    }
    return image;
}

void write_pfm_scalar(const Eigen::VectorXf& values, int width, int height,
                      const std::filesystem::path& path) {
    if (values.size() != static_cast<Eigen::Index>(width) * height)
        throw ConfigError("scalar map size does not match dimensions");
    auto out = open_out(path);
    out << "Pf\n" << width << " " << height << "\n-1.0\n";
    write_payload(out, values.data(), width, height, 1);
    if (!out) throw DataError("failed writing file: " + path.string());
}

Eigen::VectorXf read_pfm_scalar(const std::filesystem::path& path, int& width, int& height) {
    auto in = open_in(path);
    const PfmHeader header = read_header(in, path);
    if (header.color) throw DataError("expected a scalar float map: " + path.string());
    width = header.width;
    height = header.height;
    Eigen::VectorXf values(static_cast<Eigen::Index>(width) * height);
    read_payload(in, header, values.data(), 1, path);
    return values;
}

}  // namespace nbv
