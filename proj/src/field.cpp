// SPDX-License-Identifier: Apache-2.0
#include "nextview/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace nbv {

namespace {

constexpr double kDensitySnap = 1e-12;
constexpr char kMagic[8] = {'V', 'O', 'X', 'F', 'L', 'D', '0', '1'};

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Interpolation stencil: the 8 voxel corners around a point with weights.
struct Stencil {
    Eigen::Index idx[8];
    double w[8];
    bool inside = false;
};

Stencil stencil_at(const VoxelField& field, const Eigen::Vector3d& x) {
    Stencil s;
    if (!field.extent.contains(x)) return s;
    s.inside = true;

    const Eigen::Vector3d cell = field.extent.sizes().cwiseQuotient(field.dims.cast<double>());
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        double u = (x(a) - field.extent.min()(a)) / cell(a) - 0.5;
        u = std::clamp(u, 0.0, static_cast<double>(field.dims(a) - 1));
        const double floor_u = std::floor(u);
        base[a] = std::min(static_cast<int>(floor_u), field.dims(a) - 2);
        frac[a] = u - base[a];
    }
    int k = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                s.idx[k] = field.index(base[0] + dx, base[1] + dy, base[2] + dz);
                s.w[k] = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                         (dz ? frac[2] : 1.0 - frac[2]);
                ++k;
            }
    return s;
}

FieldSample sample_from_stencil(const VoxelField& field, const Stencil& s) {
    FieldSample out;
    if (!s.inside) return out;
    for (int k = 0; k < 8; ++k) {
        out.sigma += s.w[k] * decode_density(field.density_params(s.idx[k]));
        out.color += s.w[k] * decode_color(field.color_params.col(s.idx[k]));
    }
    return out;
}

void check_render_settings(const RenderSettings& settings) {
    if (settings.n_samples < 1) throw ConfigError("render: need at least 1 sample per ray");
    if (!(settings.t_near < settings.t_far)) throw ConfigError("render: t_near must precede t_far");
    if (!(settings.term_tau >= 0.0 && settings.term_tau < 1.0))
        throw ConfigError("render: termination threshold must lie in [0, 1)");
    if (!(settings.empty_variance >= 0.0)) throw ConfigError("render: negative variance floor");
}

struct MarchSample {
    Stencil stencil;
    double sigma = 0.0;
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    double alpha = 0.0;
    double trans_before = 1.0;  // T_i when this sample was composited
    double pass = 1.0;          // exp(-sigma * delta)
};

// Shared ray march: walks stratified samples, composites exactly
// (sum(alpha) + T == 1), stops once T < term_tau.
int march_ray(const VoxelField& field, const Ray& ray, const RenderSettings& settings,
              uint64_t jitter_seed, std::vector<MarchSample>& out, double& trans_final) {
    SplitMix64 jitter(jitter_seed);
    const double delta = (settings.t_far - settings.t_near) / settings.n_samples;
    double trans = 1.0;
    int used = 0;
    out.clear();
    for (int i = 0; i < settings.n_samples; ++i) {
        const double offset = settings.jittered ? jitter.next_unit() : 0.5;
        const double t = settings.t_near + (i + offset) * delta;
        MarchSample sample;
        sample.stencil = stencil_at(field, ray.origin + t * ray.direction);
        const FieldSample fs = sample_from_stencil(field, sample.stencil);
        sample.sigma = fs.sigma;
        sample.color = fs.color;
        const double absorb = -std::expm1(-fs.sigma * delta);
        sample.pass = 1.0 - absorb;
        sample.trans_before = trans;
        sample.alpha = trans * absorb;
        trans -= sample.alpha;
        out.push_back(sample);
        ++used;
        if (trans < settings.term_tau) break;
    }
    trans_final = trans;
    return used;
}

RayRender finish_render(const std::vector<MarchSample>& samples, double trans_final,
                        const RenderSettings& settings) {
    RayRender render;
    render.transmittance = trans_final;
    render.samples_used = static_cast<int>(samples.size());

    double alpha_sum = 0.0;
    for (const MarchSample& s : samples) alpha_sum += s.alpha;
    if (alpha_sum == 0.0) {
        render.variance = settings.empty_variance;
        return render;  // mean stays at the black background
    }

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    double variance = 0.0;
    for (const MarchSample& s : samples) {
        mean += s.alpha * s.color;
        variance += s.alpha * s.alpha * beta_sq(s.alpha / alpha_sum);
    }
    render.mean = mean.cwiseMax(0.0).cwiseMin(1.0);
    render.variance = variance;
    return render;
}

}  // namespace

VoxelField make_field(const Eigen::Vector3i& dims, const Eigen::AlignedBox3d& extent,
                      double density_param, const Eigen::Vector3d& color_param) {
    if ((dims.array() < 2).any()) throw ConfigError("field: need at least 2 voxels per axis");
    if (extent.isEmpty() || (extent.sizes().array() <= 0.0).any())
        throw ConfigError("field: extent must have positive size");
    VoxelField field;
    field.dims = dims;
    field.extent = extent;
    const Eigen::Index n =
        static_cast<Eigen::Index>(dims.x()) * dims.y() * dims.z();
    field.density_params = Eigen::VectorXd::Constant(n, density_param);
    field.color_params = color_param.replicate(1, n);
    return field;
}

double decode_density(double param) {
    const double sigma = param > 30.0 ? param : std::log1p(std::exp(param));
    return sigma < kDensitySnap ? 0.0 : sigma;
}

Eigen::Vector3d decode_color(const Eigen::Vector3d& params) {
    return {logistic(params(0)), logistic(params(1)), logistic(params(2))};
}

FieldSample sample_field(const VoxelField& field, const Eigen::Vector3d& x) {
    return sample_from_stencil(field, stencil_at(field, x));
}

Camera Camera::look(const Eigen::Vector3d& position, const Eigen::Vector3d& forward,
                    const Eigen::Vector3d& up_hint, int width, int height,
                    double vertical_fov) {
    if (width < 1 || height < 1) throw ConfigError("camera: non-positive image size");
    if (!(vertical_fov > 0.0 && vertical_fov < M_PI))
        throw ConfigError("camera: field of view must lie in (0, pi)");
    if (forward.norm() == 0.0) throw ConfigError("camera: zero forward vector");
    Camera camera;
    camera.position = position;
    camera.forward = forward.normalized();
    const Eigen::Vector3d right = camera.forward.cross(up_hint);
    if (right.norm() < 1e-9) throw ConfigError("camera: forward and up are parallel");
    camera.right = right.normalized();
    camera.up = camera.right.cross(camera.forward);
    camera.width = width;
    camera.height = height;
    camera.vertical_fov = vertical_fov;
    return camera;
}

Ray Camera::pixel_ray(int x, int y) const {
    const double tan_half = std::tan(vertical_fov / 2.0);
    const double aspect = static_cast<double>(width) / height;
    const double ndc_x = 2.0 * (x + 0.5) / width - 1.0;
    const double ndc_y = 2.0 * (y + 0.5) / height - 1.0;
    Ray ray;
    ray.origin = position;
    ray.direction =
        (forward + right * (ndc_x * tan_half * aspect) - up * (ndc_y * tan_half)).normalized();
    return ray;
}

Eigen::VectorXd ray_weights(const Eigen::VectorXd& sigmas, const Eigen::VectorXd& deltas) {
    if (sigmas.size() != deltas.size()) throw ConfigError("ray_weights: length mismatch");
    if ((sigmas.array() < 0.0).any() || (deltas.array() < 0.0).any())
        throw ConfigError("ray_weights: negative input");
    Eigen::VectorXd alphas(sigmas.size());
    double trans = 1.0;
    for (Eigen::Index i = 0; i < sigmas.size(); ++i) {
        const double absorb = -std::expm1(-sigmas(i) * deltas(i));
        alphas(i) = trans * absorb;
        trans -= alphas(i);
    }
    return alphas;
}

RayRender render_ray(const VoxelField& field, const Ray& ray, const RenderSettings& settings,
                     uint64_t jitter_seed) {
    check_render_settings(settings);
    std::vector<MarchSample> samples;
    samples.reserve(static_cast<size_t>(settings.n_samples));
    double trans_final = 1.0;
    march_ray(field, ray, settings, jitter_seed, samples, trans_final);
    return finish_render(samples, trans_final, settings);
}

RenderedView render_view(const VoxelField& field, const Camera& camera,
                         const RenderSettings& settings) {
    check_render_settings(settings);
    RenderedView view;
    view.mean = make_image(camera.width, camera.height);
    view.variance.resize(camera.pixels());
    view.transmittance.resize(camera.pixels());
    view.variance_d.resize(camera.pixels());
    view.transmittance_d.resize(camera.pixels());

    parallel_for(camera.pixels(), settings.workers, [&](int64_t begin, int64_t end) {
        std::vector<MarchSample> samples;
        samples.reserve(static_cast<size_t>(settings.n_samples));
        for (int64_t p = begin; p < end; ++p) {
            const int x = static_cast<int>(p % camera.width);
            const int y = static_cast<int>(p / camera.width);
            double trans_final = 1.0;
            march_ray(field, camera.pixel_ray(x, y), settings,
                      mix_seed(settings.jitter_seed, static_cast<uint64_t>(p)), samples,
                      trans_final);
            const RayRender render = finish_render(samples, trans_final, settings);
            view.mean.rgb.col(p) = render.mean.cast<float>();
            view.variance(p) = static_cast<float>(render.variance);
            view.transmittance(p) = static_cast<float>(render.transmittance);
            view.variance_d(p) = render.variance;
            view.transmittance_d(p) = render.transmittance;
        }
    });
    return view;
}

double photometric_loss_and_grad(const VoxelField& field, const std::vector<TrainView>& views,
                                 const std::vector<RayRef>& rays,
                                 const RenderSettings& settings, FieldGradients& gradients) {
    if (views.empty()) throw ConfigError("loss: no views");
    if (rays.empty()) throw ConfigError("loss: empty ray batch");
    check_render_settings(settings);

    gradients.density = Eigen::VectorXd::Zero(field.voxels());
    gradients.color = Eigen::Matrix3Xd::Zero(3, field.voxels());

    const double delta = (settings.t_far - settings.t_near) / settings.n_samples;
    double total_loss = 0.0;
    std::vector<MarchSample> samples;
    samples.reserve(static_cast<size_t>(settings.n_samples));

    for (const RayRef& ref : rays) {
        const TrainView& tv = views[static_cast<size_t>(ref.view)];
        const int x = ref.pixel % tv.camera.width;
        const int y = ref.pixel / tv.camera.width;
        double trans_final = 1.0;
        march_ray(field, tv.camera.pixel_ray(x, y), settings,
                  mix_seed(settings.jitter_seed, static_cast<uint64_t>(ref.view),
                           static_cast<uint64_t>(ref.pixel)),
                  samples, trans_final);

        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (const MarchSample& s : samples) mean += s.alpha * s.color;
        const Eigen::Vector3d target = tv.target.rgb.col(ref.pixel).cast<double>();
        const Eigen::Vector3d residual = mean - target;
        const double ray_loss = residual.squaredNorm();
        if (!std::isfinite(ray_loss))
            throw DivergenceError("non-finite ray loss at view " + std::to_string(ref.view) +
                                  ", pixel " + std::to_string(ref.pixel));
        total_loss += ray_loss;

        const Eigen::Vector3d r = 2.0 * residual;
        // Color gradients: dL/dc_i = alpha_i * r, pushed through the stencil
        // weights and the logistic decode.
        for (const MarchSample& s : samples) {
            if (!s.stencil.inside || s.alpha == 0.0) continue;
            for (int k = 0; k < 8; ++k) {
                const Eigen::Index v = s.stencil.idx[k];
                const Eigen::Vector3d c = decode_color(field.color_params.col(v));
                const Eigen::Vector3d slope = c.array() * (1.0 - c.array());
                gradients.color.col(v) +=
                    (s.alpha * s.stencil.w[k]) * r.cwiseProduct(slope);
            }
        }
        // Density gradients, walking backward to accumulate the effect each
        // sample's opacity has on every later sample's weight.
        double suffix = 0.0;
        for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
            const MarchSample& s = *it;
            const double r_dot_c = r.dot(s.color);
            const double d_loss_d_tau = r_dot_c * s.trans_before * s.pass - suffix;
            suffix += r_dot_c * s.alpha;
            if (!s.stencil.inside) continue;
            for (int k = 0; k < 8; ++k) {
                const Eigen::Index v = s.stencil.idx[k];
                gradients.density(v) += d_loss_d_tau * delta * s.stencil.w[k] *
                                        logistic(field.density_params(v));
            }
        }
    }
    return total_loss;
}

std::vector<double> train(VoxelField& field, const std::vector<TrainView>& views,
                          const TrainConfig& config) {
    if (config.iterations < 0) throw ConfigError("train: negative iteration count");
    if (config.iterations == 0) return {};
    if (views.empty()) throw ConfigError("train: no views");
    if (config.ray_batch < 1) throw ConfigError("train: ray batch must be positive");
    if (!(config.learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");

    std::vector<int64_t> prefix(views.size() + 1, 0);
    for (size_t v = 0; v < views.size(); ++v)
        prefix[v + 1] = prefix[v] + views[v].camera.pixels();
    const int64_t total_rays = prefix.back();

    std::mt19937_64 rng(config.seed);
    Eigen::VectorXd velocity_density = Eigen::VectorXd::Zero(field.voxels());
    Eigen::Matrix3Xd velocity_color = Eigen::Matrix3Xd::Zero(3, field.voxels());
    FieldGradients gradients;
    std::vector<RayRef> batch(static_cast<size_t>(config.ray_batch));
    std::vector<double> trace;
    trace.reserve(static_cast<size_t>(config.iterations));

    for (int iter = 0; iter < config.iterations; ++iter) {
        for (RayRef& ref : batch) {
            const int64_t flat =
                static_cast<int64_t>(bounded_rand(rng, static_cast<uint64_t>(total_rays)));
            const auto view = static_cast<size_t>(
                std::upper_bound(prefix.begin(), prefix.end(), flat) - prefix.begin() - 1);
            ref.view = static_cast<int>(view);
            ref.pixel = static_cast<int>(flat - prefix[view]);
        }
        RenderSettings settings = config.render;
        settings.jitter_seed = mix_seed(config.render.jitter_seed ^ config.seed,
                                        static_cast<uint64_t>(iter) + 1);
        const double loss =
            photometric_loss_and_grad(field, views, batch, settings, gradients) /
            config.ray_batch;
        trace.push_back(loss);
        if (loss > config.divergence_factor * std::max(trace.front(), 1e-6))
            throw DivergenceError("training diverged at iteration " + std::to_string(iter) +
                                  ": loss " + format_number(loss));

        const double scale = config.learning_rate / config.ray_batch;
        velocity_density = config.momentum * velocity_density - scale * gradients.density;
        velocity_color = config.momentum * velocity_color - scale * gradients.color;
        field.density_params += velocity_density;
        field.color_params += velocity_color;
    }
    return trace;
}

void save_field(const VoxelField& field, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof kMagic);
    const uint32_t dims[3] = {static_cast<uint32_t>(field.dims.x()),
                              static_cast<uint32_t>(field.dims.y()),
                              static_cast<uint32_t>(field.dims.z())};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    const double extent[6] = {field.extent.min().x(), field.extent.min().y(),
                              field.extent.min().z(), field.extent.max().x(),
                              field.extent.max().y(), field.extent.max().z()};
    out.write(reinterpret_cast<const char*>(extent), sizeof extent);

    const Eigen::VectorXf density = field.density_params.cast<float>();
    out.write(reinterpret_cast<const char*>(density.data()),
              static_cast<std::streamsize>(sizeof(float) * density.size()));
    const Eigen::Matrix3Xf color = field.color_params.cast<float>();
    out.write(reinterpret_cast<const char*>(color.data()),
              static_cast<std::streamsize>(sizeof(float) * color.size()));
    if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

VoxelField load_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw DataError("not a field checkpoint: " + path.string());
    uint32_t dims[3];
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    double extent[6];
    in.read(reinterpret_cast<char*>(extent), sizeof extent);
    if (!in) throw DataError("truncated checkpoint header: " + path.string());
    if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2 || dims[0] > (1u << 20) ||
        dims[1] > (1u << 20) || dims[2] > (1u << 20))
        throw DataError("invalid checkpoint dimensions: " + path.string());

    VoxelField field;
    field.dims = Eigen::Vector3i(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                                 static_cast<int>(dims[2]));
    field.extent =
        Eigen::AlignedBox3d(Eigen::Vector3d(extent[0], extent[1], extent[2]),
                            Eigen::Vector3d(extent[3], extent[4], extent[5]));
    const Eigen::Index n =
        static_cast<Eigen::Index>(dims[0]) * dims[1] * dims[2];
    Eigen::VectorXf density(n);
    in.read(reinterpret_cast<char*>(density.data()),
            static_cast<std::streamsize>(sizeof(float) * n));
    Eigen::Matrix3Xf color(3, n);
    in.read(reinterpret_cast<char*>(color.data()),
            static_cast<std::streamsize>(sizeof(float) * color.size()));
    if (!in) throw DataError("truncated checkpoint payload: " + path.string());
    field.density_params = density.cast<double>();
    field.color_params = color.cast<double>();
    return field;
}

}  // namespace nbv
