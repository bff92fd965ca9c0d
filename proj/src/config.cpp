// SPDX-License-Identifier: Apache-2.0
#include "nextview/config.hpp"

#include <fstream>
#include <sstream>

#include "nextview/common.hpp"
#include "nextview/planner.hpp"
#include "nextview/scenegen.hpp"

namespace nbv {

namespace {

void require_fraction(double value, const char* name) {
    if (!(value > 0.0) || !(value < 1.0))
        throw ConfigError(std::string("run config: ") + name + " must lie in (0, 1)");
}

}  // namespace

void validate(const RunConfig& config) {
    if (!config.subcommand.empty() && config.subcommand != "gen" &&
        config.subcommand != "train" && config.subcommand != "select" &&
        config.subcommand != "eval" && config.subcommand != "report")
        throw ConfigError("run config: unknown subcommand '" + config.subcommand + "'");
    kind_from_name(config.kind);          // throws on unknown trajectory names
    strategy_from_name(config.strategy);  // throws on unknown strategy names
    if (config.n_views < 8) throw ConfigError("run config: need at least 8 views");
    if (config.grid_dims.minCoeff() < 8)
        throw ConfigError("run config: grid dims must be at least 8 per axis");
    if (config.n_primitives < 0) throw ConfigError("run config: negative primitive count");
    if (config.image_size < 11)
        throw ConfigError("run config: image size must be at least 11 (the evaluation window)");
    if (!(config.radius > 0.0)) throw ConfigError("run config: radius must be positive");
    if (!(config.altitude > 0.0)) throw ConfigError("run config: altitude must be positive");
    if (config.turns < 1) throw ConfigError("run config: turns must be at least 1");
    if (config.n_samples < 1) throw ConfigError("run config: need at least 1 sample per ray");
    if (!(config.t_near >= 0.0) || !(config.t_far > config.t_near))
        throw ConfigError("run config: need 0 <= t_near < t_far");
    if (!(config.term_tau >= 0.0) || !(config.term_tau < 1.0))
        throw ConfigError("run config: term_tau must lie in [0, 1)");
    require_fraction(config.init_frac, "init_frac");
    require_fraction(config.test_frac, "test_frac");
    require_fraction(config.budget_frac, "budget_frac");
    if (!(config.init_frac + config.test_frac < 1.0))
        throw ConfigError("run config: init_frac + test_frac must stay below 1");
    if (config.min_init < 0) throw ConfigError("run config: min_init must be non-negative");
    if (config.iterations < 0) throw ConfigError("run config: negative iteration count");
    if (!(config.learning_rate > 0.0))
        throw ConfigError("run config: learning rate must be positive");
    if (config.ray_batch < 1) throw ConfigError("run config: ray batch must be at least 1");
    if (!(config.divergence_factor > 0.0))
        throw ConfigError("run config: divergence factor must be positive");
    if (!(config.eps_rel > 0.0)) throw ConfigError("run config: eps_rel must be positive");
    if (!(config.subsample_fraction > 0.0) || config.subsample_fraction > 1.0)
        throw ConfigError("run config: subsample fraction must lie in (0, 1]");
    if (config.voronoi_planar < 2 || config.voronoi_nonplanar < 2)
        throw ConfigError("run config: diagram resolutions must be at least 2");
    if (config.workers < 1) throw ConfigError("run config: need at least 1 worker");
}

nlohmann::json to_json(const RunConfig& c) {
    return nlohmann::json{
        {"subcommand", c.subcommand},
        {"kind", c.kind},
        {"n_views", c.n_views},
        {"grid_dims", {c.grid_dims.x(), c.grid_dims.y(), c.grid_dims.z()}},
        {"n_primitives", c.n_primitives},
        {"image_size", c.image_size},
        {"radius", c.radius},
        {"altitude", c.altitude},
        {"sweep", c.sweep},
        {"turns", c.turns},
        {"n_samples", c.n_samples},
        {"t_near", c.t_near},
        {"t_far", c.t_far},
        {"term_tau", c.term_tau},
        {"strategy", c.strategy},
        {"init_frac", c.init_frac},
        {"test_frac", c.test_frac},
        {"budget_frac", c.budget_frac},
        {"min_init", c.min_init},
        {"psnr_target", c.psnr_target},
        {"iterations", c.iterations},
        {"learning_rate", c.learning_rate},
        {"ray_batch", c.ray_batch},
        {"divergence_factor", c.divergence_factor},
        {"eps_rel", c.eps_rel},
        {"subsample_fraction", c.subsample_fraction},
        {"voronoi_planar", c.voronoi_planar},
        {"voronoi_nonplanar", c.voronoi_nonplanar},
        {"seed", c.seed},
        {"workers", c.workers},
        {"record_timing", c.record_timing},
        {"data_dir", c.data_dir},
        {"field_path", c.field_path},
        {"split_path", c.split_path},
        {"out_dir", c.out_dir},
        {"inputs", c.inputs},
    };
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        j.at("subcommand").get_to(c.subcommand);
        j.at("kind").get_to(c.kind);
        j.at("n_views").get_to(c.n_views);
        const auto& dims = j.at("grid_dims");
        if (!dims.is_array() || dims.size() != 3)
            throw ConfigError("run config: grid_dims must be a 3-element array");
        c.grid_dims = Eigen::Vector3i(dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>());
        j.at("n_primitives").get_to(c.n_primitives);
        j.at("image_size").get_to(c.image_size);
        j.at("radius").get_to(c.radius);
        j.at("altitude").get_to(c.altitude);
        j.at("sweep").get_to(c.sweep);
        j.at("turns").get_to(c.turns);
        j.at("n_samples").get_to(c.n_samples);
        j.at("t_near").get_to(c.t_near);
        j.at("t_far").get_to(c.t_far);
        j.at("term_tau").get_to(c.term_tau);
        j.at("strategy").get_to(c.strategy);
        j.at("init_frac").get_to(c.init_frac);
        j.at("test_frac").get_to(c.test_frac);
        j.at("budget_frac").get_to(c.budget_frac);
        j.at("min_init").get_to(c.min_init);
        j.at("psnr_target").get_to(c.psnr_target);
        j.at("iterations").get_to(c.iterations);
        j.at("learning_rate").get_to(c.learning_rate);
        j.at("ray_batch").get_to(c.ray_batch);
        j.at("divergence_factor").get_to(c.divergence_factor);
        j.at("eps_rel").get_to(c.eps_rel);
        j.at("subsample_fraction").get_to(c.subsample_fraction);
        j.at("voronoi_planar").get_to(c.voronoi_planar);
        j.at("voronoi_nonplanar").get_to(c.voronoi_nonplanar);
        j.at("seed").get_to(c.seed);
        j.at("workers").get_to(c.workers);
        j.at("record_timing").get_to(c.record_timing);
        j.at("data_dir").get_to(c.data_dir);
        j.at("field_path").get_to(c.field_path);
        j.at("split_path").get_to(c.split_path);
        j.at("out_dir").get_to(c.out_dir);
        j.at("inputs").get_to(c.inputs);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    return c;
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write run config to " + path.string());
    out << to_json(config).dump(2) << '\n';
    if (!out) throw DataError("failed writing run config to " + path.string());
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read run config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("run config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace nbv
