// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "nextview/field.hpp"

using namespace nbv;

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double range(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

VoxelField random_field(const Eigen::Vector3i& dims, const Eigen::AlignedBox3d& extent,
                        uint64_t seed, double density_lo = -2.0, double density_hi = 1.0) {
    std::mt19937_64 rng(seed);
    VoxelField field = make_field(dims, extent);
    for (Eigen::Index i = 0; i < field.voxels(); ++i) {
        field.density_params(i) = range(rng, density_lo, density_hi);
        for (int c = 0; c < 3; ++c) field.color_params(c, i) = range(rng, -2.0, 2.0);
    }
    return field;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// Direct transcription of the compositing weights as a product formula.
Eigen::VectorXd weights_reference(const Eigen::VectorXd& sigmas, const Eigen::VectorXd& deltas) {
    Eigen::VectorXd alphas(sigmas.size());
    for (Eigen::Index i = 0; i < sigmas.size(); ++i) {
        double before = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) before += sigmas(j) * deltas(j);
        alphas(i) = std::exp(-before) * (1.0 - std::exp(-sigmas(i) * deltas(i)));
    }
    return alphas;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

std::string file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("field sampling") {
    const Eigen::AlignedBox3d box(Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1));
    VoxelField field = random_field(Eigen::Vector3i(4, 4, 4), box, 3);

    SUBCASE("outside the extent reads as empty space") {
        const FieldSample s = sample_field(field, Eigen::Vector3d(1.5, 0, 0));
        CHECK(s.sigma == 0.0);
        CHECK(s.color == Eigen::Vector3d::Zero());
    }
    SUBCASE("voxel centres reproduce the decoded voxel values") {
        for (const auto& [ix, iy, iz] : {std::tuple{0, 0, 0}, {1, 2, 0}, {3, 3, 3}, {2, 1, 3}}) {
            const FieldSample s = sample_field(field, field.voxel_center(ix, iy, iz));
            const Eigen::Index v = field.index(ix, iy, iz);
            CHECK(s.sigma == doctest::Approx(decode_density(field.density_params(v))).epsilon(1e-9));
            const Eigen::Vector3d c = decode_color(field.color_params.col(v));
            CHECK((s.color - c).norm() < 1e-9);
        }
    }
    SUBCASE("midpoints interpolate decoded values linearly") {
        // Make two x-neighbours differ only in density.
        const Eigen::Index a = field.index(1, 1, 1);
        const Eigen::Index b = field.index(2, 1, 1);
        field.color_params.col(b) = field.color_params.col(a);
        const Eigen::Vector3d mid =
            0.5 * (field.voxel_center(1, 1, 1) + field.voxel_center(2, 1, 1));
        const FieldSample s = sample_field(field, mid);
        const double expected = 0.5 * (decode_density(field.density_params(a)) +
                                       decode_density(field.density_params(b)));
        CHECK(s.sigma == doctest::Approx(expected).epsilon(1e-9));
    }
    SUBCASE("decoded values satisfy the range invariants") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const double param = range(rng, -80.0, 80.0);
            CHECK(decode_density(param) >= 0.0);
            const Eigen::Vector3d c =
                decode_color(Eigen::Vector3d(range(rng, -50, 50), range(rng, -50, 50),
                                             range(rng, -50, 50)));
            CHECK((c.array() >= 0.0).all());
            CHECK((c.array() <= 1.0).all());
        }
    }
    SUBCASE("constructor rejects bad shapes") {
        CHECK_THROWS_AS(make_field(Eigen::Vector3i(1, 4, 4), box), ConfigError);
        CHECK_THROWS_AS(
            make_field(Eigen::Vector3i(4, 4, 4),
                       Eigen::AlignedBox3d(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 1))),
            ConfigError);
    }
}

TEST_CASE("compositing weights") {
    SUBCASE("empty ray carries no weight") {
        const Eigen::VectorXd alphas = ray_weights(Eigen::VectorXd::Zero(5),
                                                   Eigen::VectorXd::Constant(5, 0.3));
        CHECK(alphas.isZero(0.0));
    }
    SUBCASE("known optical depths") {
        Eigen::VectorXd sigma1(1), delta1(1);
        sigma1 << std::log(2.0);
        delta1 << 1.0;
        CHECK(ray_weights(sigma1, delta1)(0) == doctest::Approx(0.5).epsilon(1e-12));

        Eigen::VectorXd sigma2(2), delta2(2);
        sigma2 << std::log(2.0), std::log(2.0);
        delta2 << 1.0, 1.0;
        const Eigen::VectorXd alphas = ray_weights(sigma2, delta2);
        CHECK(alphas(0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(alphas(1) == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("matches the product-form reference and conserves transmittance") {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 3 + static_cast<int>(rng() % 30);
            Eigen::VectorXd sigmas(n), deltas(n);
            for (int i = 0; i < n; ++i) {
                sigmas(i) = range(rng, 0.0, 4.0);
                deltas(i) = range(rng, 0.01, 0.5);
            }
            const Eigen::VectorXd alphas = ray_weights(sigmas, deltas);
            const Eigen::VectorXd reference = weights_reference(sigmas, deltas);
            CHECK((alphas - reference).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((alphas.array() >= 0.0).all());
            const double trans_ref = std::exp(-sigmas.dot(deltas));
            CHECK(std::abs((1.0 - alphas.sum()) - trans_ref) < 1e-6);
        }
    }
    SUBCASE("rejects inconsistent input") {
        CHECK_THROWS_AS(ray_weights(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)),
                        ConfigError);
        Eigen::VectorXd bad(1), ok(1);
        bad << -0.1;
        ok << 0.1;
        CHECK_THROWS_AS(ray_weights(bad, ok), ConfigError);
    }
}

TEST_CASE("single-ray rendering") {
    const Eigen::AlignedBox3d box(Eigen::Vector3d(-10, -10, -10), Eigen::Vector3d(10, 10, 10));
    Ray axis_ray;
    axis_ray.origin = Eigen::Vector3d::Zero();
    axis_ray.direction = Eigen::Vector3d::UnitZ();

    SUBCASE("empty field returns background with the variance floor") {
        const VoxelField field = make_field(Eigen::Vector3i(4, 4, 4), box, -60.0);
        RenderSettings settings;
        settings.t_near = 0.0;
        settings.t_far = 8.0;
        const RayRender render = render_ray(field, axis_ray, settings, 12345);
        CHECK(render.mean == Eigen::Vector3d::Zero());
        CHECK(render.variance == settings.empty_variance);
        CHECK(render.transmittance == 1.0);
    }
    SUBCASE("a single opaque sample has zero variance and the sample colour") {
        VoxelField field = make_field(Eigen::Vector3i(4, 4, 4), box, 60.0);
        field.color_params.colwise() = Eigen::Vector3d(logit(0.7), logit(0.2), logit(0.9));
        RenderSettings settings;
        settings.n_samples = 1;
        settings.t_near = 0.0;
        settings.t_far = 1.0;
        const RayRender render = render_ray(field, axis_ray, settings, 9);
        CHECK((render.mean - Eigen::Vector3d(0.7, 0.2, 0.9)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(render.variance == 0.0);  // a lone sample owns the whole proportion
        CHECK(render.samples_used == 1);
    }
    SUBCASE("two half-opacity samples reproduce the entropy-weighted variance") {
        // Density parameter 0 decodes to exactly ln 2, so each unit step
        // absorbs one half of the incoming light: alpha = (0.5, 0.25).
        const VoxelField field = make_field(Eigen::Vector3i(4, 4, 4), box, 0.0);
        RenderSettings settings;
        settings.n_samples = 2;
        settings.t_near = 0.0;
        settings.t_far = 2.0;
        const RayRender render = render_ray(field, axis_ray, settings, 31);
        CHECK(render.variance == doctest::Approx(0.09046527403194632).epsilon(1e-9));
        CHECK(render.transmittance == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(render.samples_used == 2);
    }
    SUBCASE("per-sample variance term is the entropy curve") {
        CHECK(beta_sq(0.0) == 0.0);
        CHECK(beta_sq(1.0) == 0.0);
        const double e_inv = std::exp(-1.0);
        CHECK(beta_sq(e_inv) == doctest::Approx(e_inv).epsilon(1e-12));
        for (int i = 1; i <= 100; ++i) {
            const double p = i / 100.0;
            CHECK(beta_sq(p) >= 0.0);
            CHECK(beta_sq(p) <= e_inv + 1e-12);
        }
    }
    SUBCASE("transmittance matches the analytic attenuation of a uniform medium") {
        const VoxelField field = make_field(Eigen::Vector3i(4, 4, 4), box, 0.0);  // sigma = ln 2
        RenderSettings settings;
        settings.n_samples = 64;
        settings.t_near = 0.0;
        settings.t_far = 3.0;
        settings.term_tau = 0.0;
        const RayRender render = render_ray(field, axis_ray, settings, 77);
        CHECK(render.transmittance == doctest::Approx(std::exp(-std::log(2.0) * 3.0)).epsilon(1e-9));
    }
    SUBCASE("early termination moves the mean by at most the threshold") {
        const VoxelField field = random_field(Eigen::Vector3i(6, 6, 6), box, 11, 0.0, 2.0);
        RenderSettings full;
        full.n_samples = 96;
        full.t_near = 0.0;
        full.t_far = 25.0;
        full.term_tau = 0.0;
        RenderSettings truncated = full;
        truncated.term_tau = 0.05;
        for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            const RayRender a = render_ray(field, axis_ray, full, seed);
            const RayRender b = render_ray(field, axis_ray, truncated, seed);
            CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() <= 0.05 + 1e-12);
            CHECK(b.samples_used <= a.samples_used);
        }
    }
    SUBCASE("rejects invalid settings") {
        const VoxelField field = make_field(Eigen::Vector3i(4, 4, 4), box);
        RenderSettings settings;
        settings.n_samples = 0;
        CHECK_THROWS_AS(render_ray(field, axis_ray, settings, 0), ConfigError);
        settings.n_samples = 4;
        settings.t_near = 2.0;
        settings.t_far = 1.0;
        CHECK_THROWS_AS(render_ray(field, axis_ray, settings, 0), ConfigError);
        settings.t_far = 3.0;
        settings.term_tau = 1.0;
        CHECK_THROWS_AS(render_ray(field, axis_ray, settings, 0), ConfigError);
    }
}

TEST_CASE("camera model") {
    SUBCASE("basis is orthonormal and consistent") {
        const Camera camera = Camera::look(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(0, 0, -2),
                                           Eigen::Vector3d(0, 1, 0), 9, 9, 0.8);
        CHECK(camera.forward.norm() == doctest::Approx(1.0));
        CHECK(camera.up.norm() == doctest::Approx(1.0));
        CHECK(camera.right.norm() == doctest::Approx(1.0));
        CHECK(std::abs(camera.forward.dot(camera.up)) < 1e-12);
        CHECK(std::abs(camera.forward.dot(camera.right)) < 1e-12);
        CHECK((camera.right - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
        CHECK((camera.up - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
        // Centre pixel of an odd image looks straight ahead.
        const Ray center = camera.pixel_ray(4, 4);
        CHECK((center.direction - camera.forward).norm() < 1e-12);
    }
    SUBCASE("rejects degenerate configurations") {
        CHECK_THROWS_AS(Camera::look(Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 1, 0),
                                     Eigen::Vector3d(0, 1, 0), 8, 8, 0.8),
                        ConfigError);
        CHECK_THROWS_AS(Camera::look(Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, 1),
                                     Eigen::Vector3d(0, 1, 0), 0, 8, 0.8),
                        ConfigError);
        CHECK_THROWS_AS(Camera::look(Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, 1),
                                     Eigen::Vector3d(0, 1, 0), 8, 8, 3.2),
                        ConfigError);
    }
}

TEST_CASE("view rendering") {
    const Eigen::AlignedBox3d box(Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1));

    SUBCASE("empty field renders pure background everywhere") {
        const VoxelField field = make_field(Eigen::Vector3i(4, 4, 4), box, -60.0);
        const Camera camera = Camera::look(Eigen::Vector3d(0, 0, 3), Eigen::Vector3d(0, 0, -1),
                                           Eigen::Vector3d(0, 1, 0), 12, 10, 0.7);
        RenderSettings settings;
        settings.t_near = 1.0;
        settings.t_far = 5.0;
        const RenderedView view = render_view(field, camera, settings);
        CHECK(view.mean.rgb.isZero(0.0f));
        CHECK((view.variance.array() == static_cast<float>(settings.empty_variance)).all());
        CHECK((view.transmittance.array() == 1.0f).all());
    }
    SUBCASE("an opaque voxel on the optical axis colours the centre pixel") {
        VoxelField field = make_field(Eigen::Vector3i(5, 5, 5), box, -60.0);
        const Eigen::Vector3d target(0.8, 0.3, 0.6);
        field.color_params.colwise() =
            Eigen::Vector3d(logit(target.x()), logit(target.y()), logit(target.z()));
        field.density_params(field.index(2, 2, 2)) = 60.0;  // sigma 60 at the box centre
        const Camera camera = Camera::look(Eigen::Vector3d(0, 0, 3), Eigen::Vector3d(0, 0, -1),
                                           Eigen::Vector3d(0, 1, 0), 21, 21, 0.5);
        RenderSettings settings;
        settings.n_samples = 128;
        settings.t_near = 1.5;
        settings.t_far = 4.5;
        const RenderedView view = render_view(field, camera, settings);
        const Eigen::Vector3f center = view.mean.at(10, 10);
        CHECK((center.cast<double>() - target).cwiseAbs().maxCoeff() < 0.01);
    }
    SUBCASE("image statistics are stable under resolution doubling") {
        const VoxelField field = random_field(Eigen::Vector3i(6, 6, 6), box, 21, -1.0, 2.0);
        RenderSettings settings;
        settings.n_samples = 48;
        settings.t_near = 1.0;
        settings.t_far = 6.0;
        auto mean_of = [&](int size) {
            const Camera camera =
                Camera::look(Eigen::Vector3d(0.2, -0.1, 3), Eigen::Vector3d(-0.05, 0.02, -1),
                             Eigen::Vector3d(0, 1, 0), size, size, 0.8);
            const RenderedView view = render_view(field, camera, settings);
            return static_cast<double>(view.mean.rgb.mean());
        };
        CHECK(std::abs(mean_of(24) - mean_of(48)) < 0.02);
    }
    SUBCASE("rendering is deterministic and worker-count independent") {
        const VoxelField field = random_field(Eigen::Vector3i(5, 5, 5), box, 23, -1.0, 1.5);
        const Camera camera = Camera::look(Eigen::Vector3d(0, 0.4, 2.8), Eigen::Vector3d(0, -0.1, -1),
                                           Eigen::Vector3d(0, 1, 0), 16, 12, 0.7);
        RenderSettings settings;
        settings.t_near = 0.8;
        settings.t_far = 5.0;
        settings.jitter_seed = 42;
        const RenderedView a = render_view(field, camera, settings);
        const RenderedView b = render_view(field, camera, settings);
        RenderSettings threaded = settings;
        threaded.workers = 4;
        const RenderedView c = render_view(field, camera, threaded);
        CHECK(a.mean.rgb == b.mean.rgb);
        CHECK(a.variance == b.variance);
        CHECK(a.mean.rgb == c.mean.rgb);
        CHECK(a.variance == c.variance);
        CHECK(a.transmittance == c.transmittance);
    }
    SUBCASE("rendering commutes with a rigid motion of scene and camera") {
        const VoxelField field = random_field(Eigen::Vector3i(3, 4, 5), box, 29, -1.0, 1.5);
        const Camera camera = Camera::look(Eigen::Vector3d(0.2, -2.5, 0.3),
                                           Eigen::Vector3d(-0.05, 1.0, -0.1),
                                           Eigen::Vector3d(0, 0, 1), 16, 12, 0.7);
        RenderSettings settings;
        settings.t_near = 0.5;
        settings.t_far = 5.5;
        settings.jitter_seed = 4;
        const RenderedView base = render_view(field, camera, settings);

        SUBCASE("translation") {
            const Eigen::Vector3d shift(3.25, -1.5, 0.75);
            VoxelField moved = field;
            moved.extent =
                Eigen::AlignedBox3d(field.extent.min() + shift, field.extent.max() + shift);
            const Camera shifted = Camera::look(camera.position + shift, camera.forward,
                                                Eigen::Vector3d(0, 0, 1), 16, 12, 0.7);
            const RenderedView view = render_view(moved, shifted, settings);
            CHECK((view.mean.rgb - base.mean.rgb).cwiseAbs().maxCoeff() < 1e-5f);
        }
        SUBCASE("quarter turn about the vertical axis") {
            auto rot = [](const Eigen::Vector3d& p) { return Eigen::Vector3d(-p.y(), p.x(), p.z()); };
            VoxelField turned;
            turned.dims = Eigen::Vector3i(field.dims.y(), field.dims.x(), field.dims.z());
            turned.extent = Eigen::AlignedBox3d(
                Eigen::Vector3d(-field.extent.max().y(), field.extent.min().x(),
                                field.extent.min().z()),
                Eigen::Vector3d(-field.extent.min().y(), field.extent.max().x(),
                                field.extent.max().z()));
            turned.density_params.resize(field.voxels());
            turned.color_params.resize(3, field.voxels());
            for (int iz = 0; iz < field.dims.z(); ++iz)
                for (int iy = 0; iy < field.dims.y(); ++iy)
                    for (int ix = 0; ix < field.dims.x(); ++ix) {
                        const Eigen::Index src = field.index(ix, iy, iz);
                        const Eigen::Index dst = turned.index(field.dims.y() - 1 - iy, ix, iz);
                        turned.density_params(dst) = field.density_params(src);
                        turned.color_params.col(dst) = field.color_params.col(src);
                    }
            const Camera rotated = Camera::look(rot(camera.position), rot(camera.forward),
                                                rot(Eigen::Vector3d(0, 0, 1)), 16, 12, 0.7);
            const RenderedView view = render_view(turned, rotated, settings);
            CHECK((view.mean.rgb - base.mean.rgb).cwiseAbs().maxCoeff() < 1e-5f);
        }
    }
}

TEST_CASE("photometric loss and gradients") {
    const Eigen::AlignedBox3d box(Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 1, 1));
    const Camera camera = Camera::look(Eigen::Vector3d(0.5, 0.5, 2.5), Eigen::Vector3d(0, 0, -1),
                                       Eigen::Vector3d(0, 1, 0), 6, 6, 0.5);
    RenderSettings settings;
    settings.n_samples = 24;
    settings.t_near = 1.2;
    settings.t_far = 2.8;
    settings.term_tau = 0.0;
    settings.jittered = false;

    std::vector<RayRef> all_rays;
    for (int p = 0; p < 36; ++p) all_rays.push_back({0, p});

    SUBCASE("a field that generated the targets is converged") {
        const VoxelField field = random_field(Eigen::Vector3i(4, 4, 4), box, 31, -1.0, 1.0);
        RenderSettings view_settings = settings;
        TrainView tv;
        tv.camera = camera;
        // Build targets through the same sampling the loss will use.
        tv.target = make_image(6, 6);
        for (int p = 0; p < 36; ++p) {
            const Ray ray = camera.pixel_ray(p % 6, p / 6);
            const RayRender render =
                render_ray(field, ray, view_settings,
                           mix_seed(view_settings.jitter_seed, 0, static_cast<uint64_t>(p)));
            tv.target.rgb.col(p) = render.mean.cast<float>();
        }
        FieldGradients gradients;
        const double loss =
            photometric_loss_and_grad(field, {tv}, all_rays, settings, gradients);
        CHECK(loss / 36.0 < 1e-6);
    }
    SUBCASE("analytic gradients match central finite differences") {
        VoxelField field = random_field(Eigen::Vector3i(4, 4, 4), box, 37, -1.5, 1.5);
        std::mt19937_64 rng(41);
        TrainView tv;
        tv.camera = camera;
        tv.target = make_image(6, 6);
        for (Eigen::Index i = 0; i < tv.target.rgb.size(); ++i)
            tv.target.rgb(i) = static_cast<float>(unit(rng));
        const std::vector<TrainView> views{tv};

        FieldGradients gradients;
        photometric_loss_and_grad(field, views, all_rays, settings, gradients);

        auto loss_at = [&](VoxelField& f) {
            FieldGradients scratch;
            return photometric_loss_and_grad(f, views, all_rays, settings, scratch);
        };
        const double h = 1e-3;
        int checked = 0;
        for (int trial = 0; trial < 16; ++trial) {
            const bool density = trial % 2 == 0;
            const Eigen::Index v =
                static_cast<Eigen::Index>(bounded_rand(rng, static_cast<uint64_t>(field.voxels())));
            const int channel = static_cast<int>(bounded_rand(rng, 3));
            double* param = density ? &field.density_params(v) : &field.color_params(channel, v);
            const double analytic =
                density ? gradients.density(v) : gradients.color(channel, v);
            const double saved = *param;
            *param = saved + h;
            const double hi = loss_at(field);
            *param = saved - h;
            const double lo = loss_at(field);
            *param = saved;
            const double fd = (hi - lo) / (2.0 * h);
            const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
            CHECK(std::abs(analytic - fd) / scale < 1e-3);
            ++checked;
        }
        CHECK(checked == 16);
    }
    SUBCASE("zero opacity blocks all colour gradients") {
        const VoxelField field = make_field(Eigen::Vector3i(4, 4, 4), box, -60.0);
        std::mt19937_64 rng(43);
        TrainView tv;
        tv.camera = camera;
        tv.target = make_image(6, 6);
        for (Eigen::Index i = 0; i < tv.target.rgb.size(); ++i)
            tv.target.rgb(i) = static_cast<float>(unit(rng));
        FieldGradients gradients;
        photometric_loss_and_grad(field, {tv}, all_rays, settings, gradients);
        CHECK(gradients.color.isZero(0.0));
    }
    SUBCASE("non-finite rays are reported with their id") {
        VoxelField field = random_field(Eigen::Vector3i(4, 4, 4), box, 47, -1.0, 1.0);
        field.color_params(1, 5) = std::numeric_limits<double>::quiet_NaN();
        TrainView tv;
        tv.camera = camera;
        tv.target = make_image(6, 6);
        FieldGradients gradients;
        CHECK_THROWS_AS(photometric_loss_and_grad(field, {tv}, all_rays, settings, gradients),
                        DivergenceError);
    }
}

TEST_CASE("field training") {
    const Eigen::AlignedBox3d box(Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1));
    const Camera camera = Camera::look(Eigen::Vector3d(0, 0, 3.2), Eigen::Vector3d(0, 0, -1),
                                       Eigen::Vector3d(0, 1, 0), 24, 24, 0.6);
    RenderSettings settings;
    settings.n_samples = 32;
    settings.t_near = 1.2;
    settings.t_far = 5.2;
    settings.jitter_seed = 99;

    // Ground truth: a handful of dense, coloured voxels in an empty box.
    VoxelField scene = make_field(Eigen::Vector3i(8, 8, 8), box, -60.0);
    std::mt19937_64 rng(51);
    for (int k = 0; k < 10; ++k) {
        const int ix = 1 + static_cast<int>(bounded_rand(rng, 6));
        const int iy = 1 + static_cast<int>(bounded_rand(rng, 6));
        const int iz = 1 + static_cast<int>(bounded_rand(rng, 6));
        const Eigen::Index v = scene.index(ix, iy, iz);
        scene.density_params(v) = 20.0;
        for (int c = 0; c < 3; ++c) scene.color_params(c, v) = range(rng, -2.0, 2.0);
    }
    TrainView tv;
    tv.camera = camera;
    tv.target = render_view(scene, camera, settings).mean;

    SUBCASE("overfitting a single view reaches high fidelity") {
        VoxelField field = make_field(Eigen::Vector3i(8, 8, 8), box, -3.0);
        TrainConfig config;
        config.iterations = 500;
        config.ray_batch = 256;
        config.seed = 7;
        config.render = settings;
        const std::vector<double> trace = train(field, {tv}, config);
        REQUIRE(trace.size() == 500);

        // Loss trend: the tail must sit clearly below the head.
        std::vector<double> head(trace.begin(), trace.begin() + 50);
        std::vector<double> tail(trace.end() - 50, trace.end());
        std::sort(head.begin(), head.end());
        std::sort(tail.begin(), tail.end());
        CHECK(tail[25] < head[25]);

        const Image rendered = render_view(field, camera, settings).mean;
        double mse = 0.0;
        for (Eigen::Index i = 0; i < rendered.rgb.size(); ++i) {
            const double d = static_cast<double>(rendered.rgb(i)) - tv.target.rgb(i);
            mse += d * d;
        }
        mse /= static_cast<double>(rendered.rgb.size());
        const double psnr = 10.0 * std::log10(1.0 / mse);
        CHECK(psnr > 25.0);
    }
    SUBCASE("zero iterations change nothing") {
        VoxelField field = make_field(Eigen::Vector3i(8, 8, 8), box, -3.0);
        const Eigen::VectorXd density = field.density_params;
        TrainConfig config;
        config.iterations = 0;
        const std::vector<double> trace = train(field, {tv}, config);
        CHECK(trace.empty());
        CHECK(field.density_params == density);
    }
    SUBCASE("training is deterministic given the seed") {
        TrainConfig config;
        config.iterations = 40;
        config.ray_batch = 64;
        config.seed = 13;
        config.render = settings;
        VoxelField a = make_field(Eigen::Vector3i(8, 8, 8), box, -3.0);
        VoxelField b = make_field(Eigen::Vector3i(8, 8, 8), box, -3.0);
        const std::vector<double> trace_a = train(a, {tv}, config);
        const std::vector<double> trace_b = train(b, {tv}, config);
        CHECK(trace_a == trace_b);
        CHECK(a.density_params == b.density_params);
        CHECK(a.color_params == b.color_params);
    }
    SUBCASE("an oversized learning rate triggers the divergence guard") {
        // Start from the exact scene so the initial loss is almost zero;
        // a huge kick then blows the loss past the relative guard.
        RenderSettings midpoint = settings;
        midpoint.jittered = false;
        TrainView exact;
        exact.camera = camera;
        exact.target = render_view(scene, camera, midpoint).mean;
        VoxelField field = scene;
        TrainConfig config;
        config.iterations = 50;
        config.ray_batch = 64;
        config.learning_rate = 1e7;
        config.seed = 3;
        config.render = midpoint;
        CHECK_THROWS_AS(train(field, {exact}, config), DivergenceError);
    }
}

TEST_CASE("field checkpoints") {
    SUBCASE("files round-trip bit-exactly") {
        const Eigen::AlignedBox3d box(Eigen::Vector3d(-2, 0, 1), Eigen::Vector3d(3, 4, 5));
        const VoxelField field = random_field(Eigen::Vector3i(5, 3, 4), box, 61);
        const auto path_a = temp_file("nbv_ckpt_a.bin");
        const auto path_b = temp_file("nbv_ckpt_b.bin");
        save_field(field, path_a);
        const VoxelField loaded = load_field(path_a);
        save_field(loaded, path_b);
        CHECK(file_bytes(path_a) == file_bytes(path_b));
        CHECK(loaded.dims == field.dims);
        CHECK(loaded.extent.min() == field.extent.min());
        CHECK(loaded.extent.max() == field.extent.max());
        // In-memory doubles come back through the float32 storage exactly.
        CHECK(loaded.density_params == field.density_params.cast<float>().cast<double>());
        CHECK(loaded.color_params == field.color_params.cast<float>().cast<double>());
        std::filesystem::remove(path_a);
        std::filesystem::remove(path_b);
    }
    SUBCASE("malformed checkpoints are rejected") {
        const auto path = temp_file("nbv_ckpt_bad.bin");
        {
            std::ofstream out(path, std::ios::binary);
            out << "NOTAFLD1 some trailing bytes";
        }
        CHECK_THROWS_AS(load_field(path), DataError);
        {
            std::ofstream out(path, std::ios::binary);
            out.write("VOXFLD01", 8);
            const uint32_t dims[3] = {4, 4, 4};
            out.write(reinterpret_cast<const char*>(dims), sizeof dims);
        }
        CHECK_THROWS_AS(load_field(path), DataError);
        CHECK_THROWS_AS(load_field(temp_file("nbv_ckpt_missing.bin")), DataError);
        std::filesystem::remove(path);
    }
}
