// SPDX-License-Identifier: Apache-2.0
#include "nextview/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "nextview/metrics.hpp"
#include "nextview/planner.hpp"

namespace nbv {

namespace fs = std::filesystem;

namespace {

constexpr double kInitialDensityParam = -3.0;
constexpr int kSparsificationSteps = 20;
constexpr const char* kTraceHeader =
    "round,selected_id,psnr,ssim,sigma_rgb2,sigma_pos2,hybrid,wall_ms";

fs::path resolve_out_dir(const RunConfig& config, const char* fallback_name) {
    if (!config.out_dir.empty()) return config.out_dir;
    const char* root = std::getenv("NEXTVIEW_OUT");
    return fs::path(root != nullptr ? root : ".") / fallback_name;
}

void make_dirs(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_text(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

void finish_text(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw DataError("failed writing " + path.string());
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out = open_text(path);
    out << content;
    finish_text(out, path);
}

std::string padded_id(int id) {
    std::ostringstream os;
    os << std::setw(4) << std::setfill('0') << id;
    return os.str();
}

Points3 camera_positions(const std::vector<Camera>& cameras) {
    Points3 positions(3, static_cast<Eigen::Index>(cameras.size()));
    for (Eigen::Index i = 0; i < positions.cols(); ++i)
        positions.col(i) = cameras[static_cast<size_t>(i)].position;
    return positions;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double_field(const std::string& text, const std::string& context) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw DataError(context + ": malformed number '" + text + "'");
    return value;
}

int parse_int_field(const std::string& text, const std::string& context) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw DataError(context + ": malformed integer '" + text + "'");
    return value;
}

std::vector<TraceRow> read_trace_csv(const fs::path& path, const std::string& run_name) {
    std::ifstream in(path);
    if (!in) throw DataError("run " + run_name + ": missing trace file " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader)
        throw DataError("run " + run_name + ": trace schema mismatch");
    std::vector<TraceRow> rows;
    const std::string context = "run " + run_name + " trace";
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        if (fields.size() != 8) throw DataError(context + ": wrong column count");
        TraceRow row;
        row.round = parse_int_field(fields[0], context);
        row.selected_id = parse_int_field(fields[1], context);
        row.psnr = parse_double_field(fields[2], context);
        row.ssim = parse_double_field(fields[3], context);
        row.sigma_rgb2 = parse_double_field(fields[4], context);
        row.sigma_pos2 = parse_double_field(fields[5], context);
        row.hybrid = parse_double_field(fields[6], context);
        row.wall_ms = parse_double_field(fields[7], context);
        if (row.round != static_cast<int>(rows.size()) + 1)
            throw DataError(context + ": rounds are not consecutive");
        rows.push_back(row);
    }
    if (rows.empty()) throw DataError("run " + run_name + " has an empty trace");
    return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fs::path cmd_gen(RunConfig config, std::ostream& out) {
    config.subcommand = "gen";
    // An unspecified sweep keeps orbits flat but lifts a helix by one
    // horizontal diameter so it lands clearly off-plane.
    if (config.sweep < 0.0) config.sweep = config.kind == "helix" ? 2.0 * config.radius : 0.0;
    validate(config);
    const fs::path dir = resolve_out_dir(config, "dataset");
    config.out_dir = dir.string();

    SceneSpec scene;
    scene.seed = config.seed;
    scene.dims = config.grid_dims;
    scene.n_primitives = config.n_primitives;
    const VoxelField gt = generate_scene(scene);

    TrajectorySpec trajectory;
    trajectory.kind = kind_from_name(config.kind);
    trajectory.n_views = config.n_views;
    trajectory.radius = config.radius;
    trajectory.altitude = config.altitude;
    trajectory.sweep = config.sweep;
    trajectory.turns = config.turns;
    trajectory.width = config.image_size;
    trajectory.height = config.image_size;
    const std::vector<Camera> cameras = generate_trajectory(trajectory);

    RenderSettings render;
    render.n_samples = config.n_samples;
    render.t_near = config.t_near;
    render.t_far = config.t_far;
    render.term_tau = config.term_tau;
    render.jitter_seed = config.seed;
    render_dataset(gt, cameras, render, kind_name(trajectory.kind), dir, config.workers);
    save_run_config(config, dir / "run_config.json");

    const TrajectoryClass cls = classify_trajectory(camera_positions(cameras), config.eps_rel);
    out << "dataset: " << dir.string() << '\n'
        << "views: " << config.n_views << ' ' << config.kind << " ("
        << (cls.planar() ? "planar" : "non-planar") << ")\n"
        << "images: " << config.image_size << 'x' << config.image_size << ", "
        << config.n_samples << " samples per ray\n"
        << "grid: " << config.grid_dims.x() << 'x' << config.grid_dims.y() << 'x'
        << config.grid_dims.z() << ", " << config.n_primitives << " primitives\n";
    return dir;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fs::path cmd_train(RunConfig config, std::ostream& out) {
    config.subcommand = "train";
    validate(config);
    if (config.data_dir.empty()) throw ConfigError("train: --data is required");
    const Dataset dataset = load_dataset(config.data_dir);
    const fs::path dir = resolve_out_dir(config, "train-run");
    config.out_dir = dir.string();
    make_dirs(dir);

    VoxelField field = make_field(dataset.grid_dims, dataset.extent, kInitialDensityParam);
    TrainConfig train_config;
    train_config.iterations = config.iterations;
    train_config.learning_rate = config.learning_rate;
    train_config.ray_batch = config.ray_batch;
    train_config.seed = config.seed;
    train_config.divergence_factor = config.divergence_factor;
    train_config.render = dataset.render;
    train_config.render.workers = config.workers;

    std::vector<TrainView> views;
    views.reserve(dataset.cameras.size());
    for (size_t i = 0; i < dataset.cameras.size(); ++i)
        views.push_back({dataset.cameras[i], dataset.images[i]});
    const std::vector<double> losses = train(field, views, train_config);

    save_field(field, dir / "field.bin");
    {
        std::ofstream csv = open_text(dir / "loss.csv");
        csv << "iteration,loss\n";
        for (size_t i = 0; i < losses.size(); ++i)
            csv << i + 1 << ',' << format_number(losses[i]) << '\n';
        finish_text(csv, dir / "loss.csv");
    }
    save_run_config(config, dir / "run_config.json");

    out << "trained: " << views.size() << " views, " << config.iterations << " iterations\n";
    if (!losses.empty())
        out << "loss: " << format_number(losses.front()) << " -> "
            << format_number(losses.back()) << '\n';
    out << "checkpoint: " << (dir / "field.bin").string() << '\n';
    return dir;
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

fs::path cmd_select(RunConfig config, std::ostream& out) {
    config.subcommand = "select";
    validate(config);
    if (config.data_dir.empty()) throw ConfigError("select: --data is required");
    const Dataset dataset = load_dataset(config.data_dir);
    const fs::path dir = resolve_out_dir(config, "select-run");
    config.out_dir = dir.string();
    make_dirs(dir / "scores");

    SelectionState state =
        init_split(dataset, config.init_frac, config.test_frac, config.min_init, config.seed,
                   kInitialDensityParam);
    const std::vector<int> init_train = state.train_ids;
    const std::vector<int> init_candidates = state.candidate_ids;

    PlannerConfig planner;
    planner.train.iterations = config.iterations;
    planner.train.learning_rate = config.learning_rate;
    planner.train.ray_batch = config.ray_batch;
    planner.train.seed = config.seed;
    planner.train.divergence_factor = config.divergence_factor;
    planner.train.render = dataset.render;
    planner.train.render.workers = config.workers;
    planner.scoring.render = dataset.render;  // per-candidate renders stay single-threaded
    planner.scoring.subsample_fraction = config.subsample_fraction;
    planner.scoring.seed = config.seed;
    planner.scoring.voronoi_resolution_planar = config.voronoi_planar;
    planner.scoring.voronoi_resolution_nonplanar = config.voronoi_nonplanar;
    planner.scoring.workers = config.workers;
    planner.eps_rel = config.eps_rel;
    planner.record_timing = config.record_timing;
    planner.score_sink = [&dir](int round, const std::vector<CandidateScore>& scores,
                                int selected) {
        const fs::path path = dir / "scores" / ("round_" + padded_id(round) + ".csv");
        std::ofstream csv = open_text(path);
        write_scores_csv(scores, selected, csv);
        finish_text(csv, path);
    };

    const Strategy strategy{strategy_from_name(config.strategy), config.seed};
    const double target =
        config.psnr_target < 0.0 ? std::numeric_limits<double>::infinity() : config.psnr_target;

    const auto flush_outputs = [&](const std::string& status) {
        {
            std::ofstream csv = open_text(dir / "trace.csv");
            write_trace_csv(state.trace, csv);
            finish_text(csv, dir / "trace.csv");
        }
        save_field(state.field, dir / "field.bin");
        const nlohmann::json split{
            {"seed", config.seed},           {"test_ids", state.test_ids},
            {"init_train_ids", init_train},  {"init_candidate_ids", init_candidates},
            {"final_train_ids", state.train_ids},
            {"final_candidate_ids", state.candidate_ids},
        };
        write_text(dir / "split.json", split.dump(2) + "\n");

        std::ostringstream summary;
        summary << "strategy: " << config.strategy << '\n'
                << "seed: " << config.seed << '\n'
                << "dataset: " << config.data_dir << '\n'
                << "views: " << dataset.cameras.size() << " (test " << state.test_ids.size()
                << ")\n"
                << "train: " << init_train.size() << " -> " << state.train_ids.size() << '\n'
                << "rounds: " << state.round << '\n'
                << "status: " << status << '\n'
                << "final_psnr: " << format_number(state.final_psnr) << '\n'
                << "final_ssim: " << format_number(state.final_ssim) << '\n';
        for (const TraceRow& row : state.trace)
            summary << "round " << row.round << ": view " << row.selected_id << ", psnr "
                    << format_number(row.psnr) << '\n';
        write_text(dir / "summary.txt", summary.str());
        save_run_config(config, dir / "run_config.json");
        return summary.str();
    };

    try {
        run_incremental(state, strategy, config.budget_frac, target, planner);
    } catch (const DivergenceError& e) {
        flush_outputs("diverged");
        throw DivergenceError(std::string(e.what()) + " (select aborted after round " +
                              std::to_string(state.round) + "; partial outputs in " +
                              dir.string() + ")");
    }
    out << flush_outputs("ok");
    return dir;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fs::path cmd_eval(RunConfig config, std::ostream& out) {
    config.subcommand = "eval";
    validate(config);
    if (config.data_dir.empty()) throw ConfigError("eval: --data is required");
    if (config.field_path.empty()) throw ConfigError("eval: --field is required");
    const Dataset dataset = load_dataset(config.data_dir);
    const VoxelField field = load_field(config.field_path);
    if (field.dims != dataset.grid_dims || field.extent.min() != dataset.extent.min() ||
        field.extent.max() != dataset.extent.max())
        throw DataError("checkpoint " + config.field_path +
                        " does not match the dataset manifest (grid or extent differ)");

    const int n = static_cast<int>(dataset.cameras.size());
    std::vector<int> ids(static_cast<size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    if (!config.split_path.empty()) {
        std::ifstream in(config.split_path);
        if (!in) throw DataError("cannot read split file " + config.split_path);
        nlohmann::json j;
        try {
            in >> j;
            ids = j.at("test_ids").get<std::vector<int>>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError("split file " + config.split_path + ": " + e.what());
        }
        if (ids.empty()) throw DataError("split file " + config.split_path + " has no test views");
        for (int id : ids)
            if (id < 0 || id >= n)
                throw DataError("split file " + config.split_path + ": view id " +
                                std::to_string(id) + " is out of range");
    }

    const fs::path dir = resolve_out_dir(config, "eval-run");
    config.out_dir = dir.string();
    make_dirs(dir / "uncertainty");
    make_dirs(dir / "curves");

    RenderSettings render = dataset.render;
    render.workers = config.workers;

    std::ofstream metrics_csv = open_text(dir / "view_metrics.csv");
    metrics_csv << "view_id,psnr,ssim,lpips,mse,mean_uncertainty,ause\n";
    Eigen::VectorXd view_uncertainty(ids.size());
    Eigen::VectorXd view_mse(ids.size());
    double psnr_sum = 0.0;
    double ssim_sum = 0.0;
    double ause_sum = 0.0;
    for (size_t k = 0; k < ids.size(); ++k) {
        const int id = ids[k];
        const Camera& camera = dataset.cameras[static_cast<size_t>(id)];
        const Image& gt = dataset.images[static_cast<size_t>(id)];
        const RenderedView rendered = render_view(field, camera, render);

        Eigen::VectorXd error(rendered.mean.pixels());
        for (Eigen::Index p = 0; p < error.size(); ++p)
            error(p) = (rendered.mean.rgb.col(p).cast<double>() - gt.rgb.col(p).cast<double>())
                           .squaredNorm() /
                       3.0;
        const double view_psnr = psnr(rendered.mean, gt);
        const double view_ssim = ssim(rendered.mean, gt);
        const SparsificationCurve curve =
            sparsification_curve(rendered.variance_d, error, kSparsificationSteps);
        const double view_ause = ause(curve);

        write_pfm_scalar(rendered.variance, rendered.mean.width, rendered.mean.height,
                         dir / "uncertainty" / (padded_id(id) + ".pfm"));
        {
            const fs::path curve_path = dir / "curves" / (padded_id(id) + ".csv");
            std::ofstream curve_csv = open_text(curve_path);
            write_curve_csv(curve, curve_csv);
            finish_text(curve_csv, curve_path);
        }

        view_uncertainty(static_cast<Eigen::Index>(k)) = rendered.variance_d.mean();
        view_mse(static_cast<Eigen::Index>(k)) = error.mean();
        psnr_sum += view_psnr;
        ssim_sum += view_ssim;
        ause_sum += view_ause;
        metrics_csv << id << ',' << format_number(view_psnr) << ',' << format_number(view_ssim)
                    << ",NA," << format_number(view_mse(static_cast<Eigen::Index>(k))) << ','
                    << format_number(view_uncertainty(static_cast<Eigen::Index>(k))) << ','
                    << format_number(view_ause) << '\n';
    }
    finish_text(metrics_csv, dir / "view_metrics.csv");

    const double denom = static_cast<double>(ids.size());
    const RankCorrelation rank = srcc(view_uncertainty, view_mse);
    std::ostringstream summary;
    summary << "evaluated: " << ids.size() << " views\n"
            << "mean_psnr: " << format_number(psnr_sum / denom) << '\n'
            << "mean_ssim: " << format_number(ssim_sum / denom) << '\n'
            << "mean_ause: " << format_number(ause_sum / denom) << '\n';
    if (rank.degenerate)
        summary << "srcc: NA (degenerate ranks)\n";
    else
        summary << "srcc: " << format_number(rank.value) << '\n';
    write_text(dir / "summary.txt", summary.str());
    save_run_config(config, dir / "run_config.json");
    out << summary.str() << "outputs: " << dir.string() << '\n';
    return dir;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fs::path cmd_report(RunConfig config, std::ostream& out) {
    config.subcommand = "report";
    validate(config);
    if (config.inputs.empty()) throw ConfigError("report: need at least one run directory");

    struct RunTrace {
        std::string name;
        std::string strategy;
        std::vector<TraceRow> rows;
    };
    std::vector<RunTrace> runs;
    for (const std::string& input : config.inputs) {
        RunTrace run;
        run.name = input;
        run.rows = read_trace_csv(fs::path(input) / "trace.csv", input);
        try {
            run.strategy = load_run_config(fs::path(input) / "run_config.json").strategy;
        } catch (const ConfigError& e) {
            throw DataError("run " + input + ": " + e.what());
        }
        runs.push_back(std::move(run));
    }

    std::vector<std::string> strategies;  // first-seen order
    std::map<std::string, std::vector<const RunTrace*>> by_strategy;
    for (const RunTrace& run : runs) {
        if (by_strategy.find(run.strategy) == by_strategy.end())
            strategies.push_back(run.strategy);
        by_strategy[run.strategy].push_back(&run);
    }

    const fs::path dir = resolve_out_dir(config, "report");
    config.out_dir = dir.string();
    make_dirs(dir);

    std::ofstream table = open_text(dir / "table.csv");
    table << "strategy,runs,rounds_mean,final_psnr_mean,final_ssim_mean\n";
    out << std::left << std::setw(12) << "strategy" << std::setw(6) << "runs" << std::setw(8)
        << "rounds" << std::setw(12) << "final_psnr" << "final_ssim\n";
    for (const std::string& strategy : strategies) {
        const std::vector<const RunTrace*>& members = by_strategy[strategy];
        double rounds = 0.0;
        double psnr_final = 0.0;
        double ssim_final = 0.0;
        for (const RunTrace* run : members) {
            rounds += static_cast<double>(run->rows.size());
            psnr_final += run->rows.back().psnr;
            ssim_final += run->rows.back().ssim;
        }
        const double count = static_cast<double>(members.size());
        rounds /= count;
        psnr_final /= count;
        ssim_final /= count;
        table << strategy << ',' << members.size() << ',' << format_number(rounds) << ','
              << format_number(psnr_final) << ',' << format_number(ssim_final) << '\n';
        std::ostringstream display;
        display << std::fixed << std::setprecision(3) << std::left << std::setw(12) << strategy
                << std::setw(6) << members.size() << std::setw(8) << rounds << std::setw(12)
                << psnr_final << ssim_final;
        out << display.str() << '\n';
    }
    finish_text(table, dir / "table.csv");

    // One averaged series per strategy, cut at its shortest member run.
    std::ofstream curves = open_text(dir / "curves.csv");
    curves << "strategy,round,psnr_mean,ssim_mean\n";
    for (const std::string& strategy : strategies) {
        const std::vector<const RunTrace*>& members = by_strategy[strategy];
        size_t common_rounds = members.front()->rows.size();
        for (const RunTrace* run : members) common_rounds = std::min(common_rounds, run->rows.size());
        for (size_t r = 0; r < common_rounds; ++r) {
            double psnr_mean = 0.0;
            double ssim_mean = 0.0;
            for (const RunTrace* run : members) {
                psnr_mean += run->rows[r].psnr;
                ssim_mean += run->rows[r].ssim;
            }
            psnr_mean /= static_cast<double>(members.size());
            ssim_mean /= static_cast<double>(members.size());
            curves << strategy << ',' << r + 1 << ',' << format_number(psnr_mean) << ','
                   << format_number(ssim_mean) << '\n';
        }
    }
    finish_text(curves, dir / "curves.csv");
    save_run_config(config, dir / "run_config.json");
    out << "report: " << dir.string() << '\n';
    return dir;
}

// ---------------------------------------------------------------------------
// argv entry point
// ---------------------------------------------------------------------------

namespace {

// When --config is given it must stand alone: the stored file already holds
// every knob, and silently mixing the two sources would be ambiguous.
RunConfig effective_config(const CLI::App* sub, const RunConfig& parsed,
                           const std::string& config_path, const char* subcommand) {
    if (config_path.empty()) return parsed;
    for (const CLI::Option* option : sub->get_options()) {
        const std::string name = option->get_name();
        if (option->count() > 0 && name != "--config" && name != "--help")
            throw ConfigError(std::string(subcommand) +
                              ": --config replaces all other flags; drop " + name);
    }
    RunConfig loaded = load_run_config(config_path);
    if (loaded.subcommand != subcommand)
        throw ConfigError("config file " + config_path + " was written by '" +
                          loaded.subcommand + "', not '" + subcommand + "'");
    return loaded;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out) {
    RunConfig cfg;
    std::string config_path;
    std::vector<int> grid_flag;

    CLI::App app{"Next-best-view planning toolkit for voxel radiance fields"};
    app.require_subcommand(1);
    app.footer("When --out is omitted, outputs land under $NEXTVIEW_OUT "
               "(default: the working directory).");

    CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    gen->add_option("--out", cfg.out_dir, "Dataset directory");
    gen->add_option("--seed", cfg.seed, "Scene, trajectory, and jitter seed")
        ->capture_default_str();
    gen->add_option("--kind", cfg.kind, "Trajectory kind: lawnmower | orbit | helix")
        ->capture_default_str();
    gen->add_option("--views", cfg.n_views, "Number of views")->capture_default_str();
    gen->add_option("--grid", grid_flag, "Scene grid dims (3 ints)")->expected(3);
    gen->add_option("--primitives", cfg.n_primitives, "Number of scene primitives")
        ->capture_default_str();
    gen->add_option("--image-size", cfg.image_size, "Image width and height")
        ->capture_default_str();
    gen->add_option("--radius", cfg.radius, "Trajectory radius / half-span")
        ->capture_default_str();
    gen->add_option("--altitude", cfg.altitude, "Path height above the target")
        ->capture_default_str();
    gen->add_option("--sweep", cfg.sweep, "Helix altitude sweep (default: one diameter)");
    gen->add_option("--turns", cfg.turns, "Helix revolutions")->capture_default_str();
    gen->add_option("--samples", cfg.n_samples, "Samples per ray")->capture_default_str();
    gen->add_option("--t-near", cfg.t_near, "Near integration bound")->capture_default_str();
    gen->add_option("--t-far", cfg.t_far, "Far integration bound")->capture_default_str();
    gen->add_option("--term-tau", cfg.term_tau, "Early ray termination threshold")
        ->capture_default_str();
    gen->add_option("--eps-rel", cfg.eps_rel, "Planarity classification tolerance")
        ->capture_default_str();
    gen->add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
    gen->add_option("--config", config_path, "Rerun from a serialized run config");

    CLI::App* train_cmd = app.add_subcommand("train", "Fit a field to every view of a dataset");
    train_cmd->add_option("--data", cfg.data_dir, "Dataset directory");
    train_cmd->add_option("--out", cfg.out_dir, "Output directory");
    train_cmd->add_option("--seed", cfg.seed, "Batch sampling seed")->capture_default_str();
    train_cmd->add_option("--iterations", cfg.iterations, "Gradient iterations")
        ->capture_default_str();
    train_cmd->add_option("--learning-rate", cfg.learning_rate, "SGD learning rate")
        ->capture_default_str();
    train_cmd->add_option("--ray-batch", cfg.ray_batch, "Rays per iteration")
        ->capture_default_str();
    train_cmd->add_option("--divergence-factor", cfg.divergence_factor,
                          "Abort once loss exceeds this multiple of the start")
        ->capture_default_str();
    train_cmd->add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
    train_cmd->add_option("--config", config_path, "Rerun from a serialized run config");

    CLI::App* select = app.add_subcommand("select", "Run incremental next-best-view selection");
    select->add_option("--data", cfg.data_dir, "Dataset directory");
    select->add_option("--out", cfg.out_dir, "Output directory");
    select->add_option("--seed", cfg.seed, "Split, training, and scoring seed")
        ->capture_default_str();
    select->add_option("--strategy", cfg.strategy,
                       "hybrid | rendering | positional | random | fvs")
        ->capture_default_str();
    select->add_option("--init-frac", cfg.init_frac, "Initial train fraction")
        ->capture_default_str();
    select->add_option("--test-frac", cfg.test_frac, "Held-out test fraction")
        ->capture_default_str();
    select->add_option("--budget-frac", cfg.budget_frac, "Selection budget fraction")
        ->capture_default_str();
    select->add_option("--min-init", cfg.min_init, "Minimum initial train views")
        ->capture_default_str();
    select->add_option("--psnr-target", cfg.psnr_target,
                       "Stop once the test PSNR reaches this (negative: budget-only)")
        ->capture_default_str();
    select->add_option("--iterations", cfg.iterations, "Training iterations per round")
        ->capture_default_str();
    select->add_option("--learning-rate", cfg.learning_rate, "SGD learning rate")
        ->capture_default_str();
    select->add_option("--ray-batch", cfg.ray_batch, "Rays per iteration")
        ->capture_default_str();
    select->add_option("--divergence-factor", cfg.divergence_factor,
                       "Abort once loss exceeds this multiple of the start")
        ->capture_default_str();
    select->add_option("--subsample", cfg.subsample_fraction,
                       "Pixel fraction for rendering uncertainty")
        ->capture_default_str();
    select->add_option("--eps-rel", cfg.eps_rel, "Planarity classification tolerance")
        ->capture_default_str();
    select->add_option("--voronoi-planar", cfg.voronoi_planar, "2D diagram resolution")
        ->capture_default_str();
    select->add_option("--voronoi-nonplanar", cfg.voronoi_nonplanar, "3D diagram resolution")
        ->capture_default_str();
    select->add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
    select->add_flag("--timing", cfg.record_timing, "Record per-round wall time in the trace");
    select->add_option("--config", config_path, "Rerun from a serialized run config");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a field checkpoint against a dataset");
    eval->add_option("--data", cfg.data_dir, "Dataset directory");
    eval->add_option("--field", cfg.field_path, "Field checkpoint file");
    eval->add_option("--split", cfg.split_path,
                     "split.json from a selection run (default: every view)");
    eval->add_option("--out", cfg.out_dir, "Output directory");
    eval->add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
    eval->add_option("--config", config_path, "Rerun from a serialized run config");

    CLI::App* report = app.add_subcommand("report", "Aggregate selection runs into tables");
    report->add_option("runs", cfg.inputs, "Selection run directories")->expected(-1);
    report->add_option("--out", cfg.out_dir, "Output directory");
    report->add_option("--config", config_path, "Rerun from a serialized run config");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ConfigError::exit_code;
    }
    if (!grid_flag.empty())
        cfg.grid_dims = Eigen::Vector3i(grid_flag[0], grid_flag[1], grid_flag[2]);

    try {
        if (app.got_subcommand(gen))
            cmd_gen(effective_config(gen, cfg, config_path, "gen"), out);
        else if (app.got_subcommand(train_cmd))
            cmd_train(effective_config(train_cmd, cfg, config_path, "train"), out);
        else if (app.got_subcommand(select))
            cmd_select(effective_config(select, cfg, config_path, "select"), out);
        else if (app.got_subcommand(eval))
            cmd_eval(effective_config(eval, cfg, config_path, "eval"), out);
        else if (app.got_subcommand(report))
            cmd_report(effective_config(report, cfg, config_path, "report"), out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return ConfigError::exit_code;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return DataError::exit_code;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return DivergenceError::exit_code;
    }
    return 0;
}

}  // namespace nbv
