// SPDX-License-Identifier: Apache-2.0
#include "nextview/scenegen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace nbv {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double range(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

double logit(double p) { return std::log(p / (1.0 - p)); }

void check_color(const Eigen::Vector3d& color) {
    if (!color.allFinite() || (color.array() <= 0.0).any() || (color.array() >= 1.0).any())
        throw ConfigError("primitive colour channels must lie strictly inside (0, 1)");
}

void stamp(VoxelField& field, const Eigen::Vector3d& color, auto&& inside) {
    check_color(color);
    const Eigen::Vector3d color_param(logit(color.x()), logit(color.y()), logit(color.z()));
    for (int iz = 0; iz < field.dims.z(); ++iz)
        for (int iy = 0; iy < field.dims.y(); ++iy)
            for (int ix = 0; ix < field.dims.x(); ++ix) {
                if (!inside(field.voxel_center(ix, iy, iz))) continue;
                const Eigen::Index v = field.index(ix, iy, iz);
                field.density_params(v) = kSolidDensityParam;
                field.color_params.col(v) = color_param;
            }
}

}  // namespace

std::vector<Eigen::Vector3d> SceneSpec::default_palette() {
    return {Eigen::Vector3d(0.90, 0.20, 0.20), Eigen::Vector3d(0.20, 0.80, 0.30),
            Eigen::Vector3d(0.20, 0.40, 0.90), Eigen::Vector3d(0.95, 0.80, 0.20),
            Eigen::Vector3d(0.80, 0.30, 0.80), Eigen::Vector3d(0.30, 0.80, 0.80)};
}

void voxelize(VoxelField& field, const BoxPrimitive& primitive) {
    if (primitive.box.isEmpty()) throw ConfigError("box primitive is empty");
    stamp(field, primitive.color,
          [&](const Eigen::Vector3d& p) { return primitive.box.contains(p); });
}

void voxelize(VoxelField& field, const SpherePrimitive& primitive) {
    if (!(primitive.radius > 0.0)) throw ConfigError("sphere radius must be positive");
    stamp(field, primitive.color, [&](const Eigen::Vector3d& p) {
        return (p - primitive.center).norm() <= primitive.radius;
    });
}

VoxelField generate_scene(const SceneSpec& spec) {
    if ((spec.dims.array() < 8).any())
        throw ConfigError("scene grids need at least 8 voxels per axis");
    if (spec.extent.isEmpty()) throw ConfigError("scene extent is empty");
    if (spec.n_primitives < 0) throw ConfigError("primitive count must be non-negative");
    if (spec.n_primitives > 0) {
        if (!(spec.size_min > 0.0) || spec.size_min > spec.size_max || spec.size_max > 1.0)
            throw ConfigError("primitive size range must satisfy 0 < min <= max <= 1");
        if (spec.palette.empty()) throw ConfigError("palette must not be empty");
        for (const auto& color : spec.palette) check_color(color);
    }

    VoxelField field = make_field(spec.dims, spec.extent, kEmptyDensityParam);
    const Eigen::Vector3d sides = spec.extent.sizes();
    const double min_side = sides.minCoeff();
    std::mt19937_64 rng(spec.seed);
    for (int k = 0; k < spec.n_primitives; ++k) {
        const bool is_box = bounded_rand(rng, 2) == 0;
        const Eigen::Vector3d color =
            spec.palette[static_cast<size_t>(bounded_rand(rng, spec.palette.size()))];
        if (is_box) {
            Eigen::Vector3d half;
            for (int a = 0; a < 3; ++a)
                half(a) = 0.5 * min_side * range(rng, spec.size_min, spec.size_max);
            Eigen::Vector3d center;
            for (int a = 0; a < 3; ++a)
                center(a) = range(rng, spec.extent.min()(a) + half(a),
                                  spec.extent.max()(a) - half(a));
            voxelize(field, BoxPrimitive{{center - half, center + half}, color});
        } else {
            const double radius = 0.5 * min_side * range(rng, spec.size_min, spec.size_max);
            Eigen::Vector3d center;
            for (int a = 0; a < 3; ++a)
                center(a) = range(rng, spec.extent.min()(a) + radius,
                                  spec.extent.max()(a) - radius);
            voxelize(field, SpherePrimitive{center, radius, color});
        }
    }
    return field;
}

std::string kind_name(TrajectoryKind kind) {
    switch (kind) {
        case TrajectoryKind::Lawnmower: return "lawnmower";
        case TrajectoryKind::Orbit: return "orbit";
        case TrajectoryKind::Helix: return "helix";
    }
    throw ConfigError("unknown trajectory kind");
}

TrajectoryKind kind_from_name(const std::string& name) {
    if (name == "lawnmower") return TrajectoryKind::Lawnmower;
    if (name == "orbit") return TrajectoryKind::Orbit;
    if (name == "helix") return TrajectoryKind::Helix;
    throw ConfigError("unknown trajectory kind: " + name);
}

namespace {

Camera look_at(const Eigen::Vector3d& position, const TrajectorySpec& spec) {
    const Eigen::Vector3d forward = spec.target - position;
    // Nearly nadir views need a horizontal up hint; everything else uses world up.
    const Eigen::Vector3d hint = std::abs(forward.normalized().z()) > 0.99
                                     ? Eigen::Vector3d(0, 1, 0)
                                     : Eigen::Vector3d(0, 0, 1);
    return Camera::look(position, forward, hint, spec.width, spec.height, spec.vfov);
}

}  // namespace

std::vector<Camera> generate_trajectory(const TrajectorySpec& spec) {
    if (spec.n_views < 8) throw ConfigError("trajectories need at least 8 views");
    if (!(spec.radius > 0.0)) throw ConfigError("trajectory radius must be positive");
    if (!(spec.altitude > 0.0)) throw ConfigError("trajectory altitude must be positive");
    if (!(spec.sweep >= 0.0)) throw ConfigError("altitude sweep must be non-negative");
    if (spec.turns < 1) throw ConfigError("helix needs at least one revolution");

    const int n = spec.n_views;
    std::vector<Camera> cameras;
    cameras.reserve(static_cast<size_t>(n));
    switch (spec.kind) {
        case TrajectoryKind::Lawnmower: {
            const int rows = std::max(2, static_cast<int>(std::floor(std::sqrt(double(n)))));
            const int cols = (n + rows - 1) / rows;
            for (int i = 0; i < n; ++i) {
                const int row = i / cols;
                const int serpentine = i % cols;
                const int col = (row % 2 == 0) ? serpentine : cols - 1 - serpentine;
                const double x =
                    cols == 1 ? 0.0 : spec.radius * (2.0 * col / (cols - 1) - 1.0);
                const double y = spec.radius * (2.0 * row / (rows - 1) - 1.0);
                cameras.push_back(look_at(
                    spec.target + Eigen::Vector3d(x, y, spec.altitude), spec));
            }
            break;
        }
        case TrajectoryKind::Orbit:
        case TrajectoryKind::Helix: {
            const bool helix = spec.kind == TrajectoryKind::Helix;
            const double turns = helix ? static_cast<double>(spec.turns) : 1.0;
            for (int i = 0; i < n; ++i) {
                const double theta = 2.0 * M_PI * turns * i / n;
                const double rise =
                    helix ? spec.sweep * (static_cast<double>(i) / (n - 1) - 0.5) : 0.0;
                const Eigen::Vector3d position =
                    spec.target + Eigen::Vector3d(spec.radius * std::cos(theta),
                                                  spec.radius * std::sin(theta),
                                                  spec.altitude + rise);
                cameras.push_back(look_at(position, spec));
            }
            break;
        }
    }
    return cameras;
}

std::filesystem::path dataset_image_path(const std::filesystem::path& dir, int id) {
    char name[32];
    std::snprintf(name, sizeof name, "%04d.pfm", id);
    return dir / "images" / name;
}

std::filesystem::path dataset_field_path(const std::filesystem::path& dir) {
    return dir / "gt_field.bin";
}

namespace {

constexpr const char* kPosesHeader = "id,px,py,pz,fx,fy,fz,ux,uy,uz,vfov_rad,width,height";

nlohmann::json render_to_json(const RenderSettings& settings) {
    return {{"n_samples", settings.n_samples},     {"t_near", settings.t_near},
            {"t_far", settings.t_far},             {"term_tau", settings.term_tau},
            {"empty_variance", settings.empty_variance},
            {"jitter_seed", settings.jitter_seed}, {"jittered", settings.jittered}};
}

RenderSettings render_from_json(const nlohmann::json& j) {
    RenderSettings settings;
    settings.n_samples = j.at("n_samples").get<int>();
    settings.t_near = j.at("t_near").get<double>();
    settings.t_far = j.at("t_far").get<double>();
    settings.term_tau = j.at("term_tau").get<double>();
    settings.empty_variance = j.at("empty_variance").get<double>();
    settings.jitter_seed = j.at("jitter_seed").get<uint64_t>();
    settings.jittered = j.at("jittered").get<bool>();
    return settings;
}

double parse_double(const std::string& token) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) throw DataError("bad numeric field: " + token);
    return value;
}

long parse_long(const std::string& token) {
    long value = 0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) throw DataError("bad integer field: " + token);
    return value;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

void render_dataset(const VoxelField& gt, const std::vector<Camera>& cameras,
                    const RenderSettings& settings, const std::string& trajectory,
                    const std::filesystem::path& dir, int workers) {
    if (cameras.empty()) throw ConfigError("a dataset needs at least one camera");
    const int width = cameras.front().width;
    const int height = cameras.front().height;
    for (const Camera& camera : cameras)
        if (camera.width != width || camera.height != height)
            throw ConfigError("all dataset cameras must share one image size");

    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec || !std::filesystem::is_directory(dir / "images"))
        throw DataError("cannot create dataset directory: " + dir.string());

    RenderSettings view_settings = settings;
    view_settings.workers = workers;
    for (size_t id = 0; id < cameras.size(); ++id) {
        const RenderedView view = render_view(gt, cameras[id], view_settings);
        write_pfm(view.mean, dataset_image_path(dir, static_cast<int>(id)));
    }

    std::ofstream poses(dir / "poses.csv");
    if (!poses) throw DataError("cannot write poses file in " + dir.string());
    poses << kPosesHeader << '\n';
    for (size_t id = 0; id < cameras.size(); ++id) {
        const Camera& camera = cameras[id];
        poses << id;
        for (int a = 0; a < 3; ++a) poses << ',' << format_number(camera.position(a));
        for (int a = 0; a < 3; ++a) poses << ',' << format_number(camera.forward(a));
        for (int a = 0; a < 3; ++a) poses << ',' << format_number(camera.up(a));
        poses << ',' << format_number(camera.vertical_fov) << ',' << camera.width << ','
              << camera.height << '\n';
    }
    if (!poses.flush()) throw DataError("failed writing poses file in " + dir.string());

    nlohmann::json manifest{
        {"n_views", cameras.size()},
        {"width", width},
        {"height", height},
        {"trajectory", trajectory},
        {"grid_dims", {gt.dims.x(), gt.dims.y(), gt.dims.z()}},
        {"extent_min", {gt.extent.min().x(), gt.extent.min().y(), gt.extent.min().z()}},
        {"extent_max", {gt.extent.max().x(), gt.extent.max().y(), gt.extent.max().z()}},
        {"render", render_to_json(settings)},
    };
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
    if (!out.flush()) throw DataError("failed writing manifest in " + dir.string());

    save_field(gt, dataset_field_path(dir));
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset dataset;
    dataset.dir = dir;

    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("cannot open manifest: " + (dir / "manifest.json").string());
    const nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded()) throw DataError("malformed manifest in " + dir.string());

    size_t n_views = 0;
    int width = 0;
    int height = 0;
    try {
        n_views = manifest.at("n_views").get<size_t>();
        width = manifest.at("width").get<int>();
        height = manifest.at("height").get<int>();
        dataset.trajectory = manifest.at("trajectory").get<std::string>();
        const auto& dims = manifest.at("grid_dims");
        dataset.grid_dims = Eigen::Vector3i(dims.at(0).get<int>(), dims.at(1).get<int>(),
                                            dims.at(2).get<int>());
        const auto& lo = manifest.at("extent_min");
        const auto& hi = manifest.at("extent_max");
        dataset.extent = Eigen::AlignedBox3d(
            Eigen::Vector3d(lo.at(0).get<double>(), lo.at(1).get<double>(),
                            lo.at(2).get<double>()),
            Eigen::Vector3d(hi.at(0).get<double>(), hi.at(1).get<double>(),
                            hi.at(2).get<double>()));
        dataset.render = render_from_json(manifest.at("render"));
    } catch (const nlohmann::json::exception& error) {
        throw DataError(std::string("manifest schema mismatch: ") + error.what());
    }

    std::ifstream poses(dir / "poses.csv");
    if (!poses) throw DataError("cannot open poses: " + (dir / "poses.csv").string());
    std::string line;
    if (!std::getline(poses, line) || line != kPosesHeader)
        throw DataError("poses file header mismatch in " + dir.string());
    while (std::getline(poses, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != 13) throw DataError("poses row has wrong arity in " + dir.string());
        if (parse_long(fields[0]) != static_cast<long>(dataset.cameras.size()))
            throw DataError("poses ids must be consecutive in " + dir.string());
        Eigen::Vector3d position, forward, up;
        for (int a = 0; a < 3; ++a) {
            position(a) = parse_double(fields[1 + a]);
            forward(a) = parse_double(fields[4 + a]);
            up(a) = parse_double(fields[7 + a]);
        }
        const double vfov = parse_double(fields[10]);
        const int w = static_cast<int>(parse_long(fields[11]));
        const int h = static_cast<int>(parse_long(fields[12]));
        if (!position.allFinite() || !forward.allFinite() || !up.allFinite())
            throw DataError("poses contain non-finite values in " + dir.string());
        try {
            dataset.cameras.push_back(Camera::look(position, forward, up, w, h, vfov));
        } catch (const ConfigError& error) {
            throw DataError(std::string("degenerate pose on disk: ") + error.what());
        }
    }
    if (dataset.cameras.size() != n_views)
        throw DataError("manifest view count does not match poses in " + dir.string());

    dataset.images.reserve(n_views);
    for (size_t id = 0; id < n_views; ++id) {
        Image image = read_pfm(dataset_image_path(dir, static_cast<int>(id)));
        if (image.width != width || image.height != height)
            throw DataError("image size does not match manifest in " + dir.string());
        dataset.images.push_back(std::move(image));
    }
    return dataset;
}

}  // namespace nbv
