// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace nbv {

// Every knob a command-line run can turn, serialized verbatim next to each
// run's outputs so the run can be reproduced from the file alone.
struct RunConfig {
    std::string subcommand;  // gen | train | select | eval | report

    // Dataset generation.
    std::string kind = "lawnmower";
    int n_views = 100;
    Eigen::Vector3i grid_dims{16, 16, 16};
    int n_primitives = 6;
    int image_size = 64;
    double radius = 2.5;
    double altitude = 2.0;
    double sweep = -1.0;  // negative: helix picks one horizontal diameter
    int turns = 3;
    int n_samples = 32;
    double t_near = 0.05;
    double t_far = 8.0;
    double term_tau = 1e-4;

    // Planning.
    std::string strategy = "hybrid";
    double init_frac = 0.15;
    double test_frac = 0.10;
    double budget_frac = 0.15;
    int min_init = 20;
    double psnr_target = -1.0;  // negative: budget-only stopping

    // Per-round training.
    int iterations = 200;
    double learning_rate = 40.0;
    int ray_batch = 1024;
    double divergence_factor = 1e3;  // abort once loss exceeds this multiple of the start

    // Candidate scoring.
    double eps_rel = 0.05;
    double subsample_fraction = 0.25;
    int voronoi_planar = 512;
    int voronoi_nonplanar = 128;

    // Run plumbing.
    uint64_t seed = 0;
    int workers = 1;
    bool record_timing = false;
    std::string data_dir;
    std::string field_path;
    std::string split_path;
    std::string out_dir;
    std::vector<std::string> inputs;  // report: the run directories to aggregate
};

// Rejects out-of-range values (fractions outside (0,1), unknown strategy or
// trajectory names, sizes too small to evaluate).
void validate(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);  // strict: every field required

void save_run_config(const RunConfig& config, const std::filesystem::path& path);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace nbv
