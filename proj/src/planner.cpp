// SPDX-License-Identifier: Apache-2.0
#include "nextview/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <random>

#include "nextview/metrics.hpp"

namespace nbv {

namespace {

int ceil_frac(double frac, int n) {
    return static_cast<int>(std::ceil(frac * static_cast<double>(n)));
}

// Smallest dataset size that leaves room for the requested split.
int minimum_usable_n(double init_frac, double test_frac, int min_init) {
    for (int n = 1; n <= 1 << 24; ++n) {
        const int n_test = ceil_frac(test_frac, n);
        const int feasible = n - n_test - 1;
        if (feasible < 1) continue;
        const int n_train = std::max(ceil_frac(init_frac, n), std::min(min_init, feasible));
        if (n_train <= feasible) return n;
    }
    return -1;  // unreachable for fractions summing below 1
}

Eigen::AlignedBox3d all_pose_bounds(const Dataset& dataset) {
    Eigen::AlignedBox3d box;
    for (const Camera& camera : dataset.cameras) box.extend(camera.position);
    return box;
}

Points3 positions_of(const Dataset& dataset, const std::vector<int>& ids) {
    Points3 out(3, static_cast<Eigen::Index>(ids.size()));
    for (Eigen::Index i = 0; i < out.cols(); ++i)
        out.col(i) = dataset.cameras[static_cast<size_t>(ids[static_cast<size_t>(i)])].position;
    return out;
}

std::vector<TrainView> views_for(const Dataset& dataset, const std::vector<int>& ids) {
    std::vector<TrainView> views;
    views.reserve(ids.size());
    for (int id : ids)
        views.push_back({dataset.cameras[static_cast<size_t>(id)],
                         dataset.images[static_cast<size_t>(id)]});
    return views;
}

// One raw component per candidate, evaluated in parallel. The component
// callback must be safe to run concurrently on distinct ids.
template <typename Component>
std::vector<double> component_values(const std::vector<int>& candidates, int workers,
                                     const Component& component) {
    std::vector<double> values(candidates.size(), 0.0);
    std::vector<std::exception_ptr> errors(candidates.size());
    parallel_for(static_cast<int64_t>(candidates.size()), workers, [&](int64_t begin, int64_t end) {
        for (int64_t i = begin; i < end; ++i) {
            try {
                values[static_cast<size_t>(i)] = component(candidates[static_cast<size_t>(i)]);
            } catch (...) {
                errors[static_cast<size_t>(i)] = std::current_exception();
            }
        }
    });
    for (const std::exception_ptr& error : errors)
        if (error) std::rethrow_exception(error);
    return values;
}

size_t argmax(const std::vector<double>& values) {
    size_t best = 0;
    for (size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;  // ties keep the lowest id
    return best;
}

// Score rows for a single-component strategy: the raw component in its slot,
// everything else zero.
std::vector<CandidateScore> component_rows(const std::vector<int>& candidates,
                                           const std::vector<double>& values,
                                           double CandidateScore::* slot) {
    std::vector<CandidateScore> rows(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i) {
        rows[i].view_id = candidates[i];
        rows[i].*slot = values[i];
    }
    return rows;
}

void insert_sorted(std::vector<int>& ids, int id) {
    ids.insert(std::lower_bound(ids.begin(), ids.end(), id), id);
}

}  // namespace

std::string strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Hybrid: return "hybrid";
        case StrategyKind::RenderingOnly: return "rendering";
        case StrategyKind::PositionalOnly: return "positional";
        case StrategyKind::Random: return "random";
        case StrategyKind::FVS: return "fvs";
    }
    throw ConfigError("strategy_name: unknown strategy kind");
}

StrategyKind strategy_from_name(const std::string& name) {
    if (name == "hybrid") return StrategyKind::Hybrid;
    if (name == "rendering") return StrategyKind::RenderingOnly;
    if (name == "positional") return StrategyKind::PositionalOnly;
    if (name == "random") return StrategyKind::Random;
    if (name == "fvs") return StrategyKind::FVS;
    throw ConfigError("unknown strategy '" + name +
                      "'; expected hybrid, rendering, positional, random, or fvs");
}

SelectionState init_split(const Dataset& dataset, double init_frac, double test_frac,
                          int min_init, uint64_t seed, double initial_density_param) {
    const int n = static_cast<int>(dataset.cameras.size());
    if (n == 0) throw ConfigError("init_split: dataset has no views");
    if (!(init_frac > 0.0) || !(test_frac > 0.0) || !(init_frac + test_frac < 1.0))
        throw ConfigError("init_split: fractions must be positive and sum below 1");
    if (min_init < 0) throw ConfigError("init_split: min_init must be non-negative");

    const int n_test = ceil_frac(test_frac, n);
    const int feasible = n - n_test - 1;  // leave at least one candidate
    const int n_train = std::max(ceil_frac(init_frac, n), std::min(min_init, feasible));
    if (feasible < 1 || n_train > feasible)
        throw ConfigError("init_split: dataset of " + std::to_string(n) +
                          " views is too small for this split; need at least " +
                          std::to_string(minimum_usable_n(init_frac, test_frac, min_init)) +
                          " views");

    std::mt19937_64 rng(seed);
    const std::vector<int> order = shuffled_indices(n, rng);

    SelectionState state;
    state.dataset = &dataset;
    state.test_ids.assign(order.begin(), order.begin() + n_test);
    state.train_ids.assign(order.begin() + n_test, order.begin() + n_test + n_train);
    state.candidate_ids.assign(order.begin() + n_test + n_train, order.end());
    std::sort(state.test_ids.begin(), state.test_ids.end());
    std::sort(state.train_ids.begin(), state.train_ids.end());
    std::sort(state.candidate_ids.begin(), state.candidate_ids.end());
    state.field = make_field(dataset.grid_dims, dataset.extent, initial_density_param);
    return state;
}

SelectionChoice select_next(const SelectionState& state, const Strategy& strategy,
                            const PlannerConfig& config) {
    if (state.dataset == nullptr) throw ConfigError("select_next: state carries no dataset");
    if (state.candidate_ids.empty()) throw ConfigError("select_next: candidate set exhausted");
    const Dataset& dataset = *state.dataset;
    const std::vector<int>& candidates = state.candidate_ids;
    // Fresh subsampling pattern each round, identical across rerun traces.
    const uint64_t round_seed = mix_seed(config.scoring.seed, static_cast<uint64_t>(state.round));

    switch (strategy.kind) {
        case StrategyKind::Random: {
            std::mt19937_64 rng(mix_seed(strategy.seed, static_cast<uint64_t>(state.round)));
            const auto pick = bounded_rand(rng, candidates.size());
            return {candidates[static_cast<size_t>(pick)], 0.0, 0.0, 0.0};
        }
        case StrategyKind::FVS: {
            SelectionChoice choice;
            double best = -std::numeric_limits<double>::infinity();
            for (int id : candidates) {
                double nearest = std::numeric_limits<double>::infinity();
                for (int train_id : state.train_ids) {
                    const double d = (dataset.cameras[static_cast<size_t>(id)].position -
                                      dataset.cameras[static_cast<size_t>(train_id)].position)
                                         .norm();
                    nearest = std::min(nearest, d);
                }
                if (nearest > best) {
                    best = nearest;
                    choice.view_id = id;
                }
            }
            return choice;
        }
        case StrategyKind::RenderingOnly: {
            const std::vector<double> values = component_values(
                candidates, config.scoring.workers, [&](int view_id) {
                    return rendering_uncertainty(
                        state.field, dataset.cameras[static_cast<size_t>(view_id)],
                        dataset.images[static_cast<size_t>(view_id)], config.scoring.render,
                        config.scoring.subsample_fraction, mix_seed(round_seed, view_id),
                        config.scoring.variance_floor);
                });
            const size_t best = argmax(values);
            if (config.score_sink)
                config.score_sink(state.round + 1,
                                  component_rows(candidates, values, &CandidateScore::sigma_rgb2),
                                  candidates[best]);
            return {candidates[best], values[best], 0.0, 0.0};
        }
        case StrategyKind::PositionalOnly: {
            const PositionalContext context =
                make_context(positions_of(dataset, state.train_ids), config.eps_rel,
                             all_pose_bounds(dataset));
            const std::vector<double> values = component_values(
                candidates, config.scoring.workers, [&](int view_id) {
                    return positional_uncertainty(
                        context, dataset.cameras[static_cast<size_t>(view_id)].position,
                        config.scoring.voronoi_resolution_planar,
                        config.scoring.voronoi_resolution_nonplanar, 1.0,
                        config.scoring.candidate_cell_only);
                });
            const size_t best = argmax(values);
            if (config.score_sink)
                config.score_sink(state.round + 1,
                                  component_rows(candidates, values, &CandidateScore::sigma_pos2),
                                  candidates[best]);
            return {candidates[best], 0.0, values[best], 0.0};
        }
        case StrategyKind::Hybrid: {
            std::vector<CandidateView> views;
            views.reserve(candidates.size());
            for (int id : candidates)
                views.push_back({id, dataset.cameras[static_cast<size_t>(id)],
                                 dataset.images[static_cast<size_t>(id)]});
            const PositionalContext context =
                make_context(positions_of(dataset, state.train_ids), config.eps_rel,
                             all_pose_bounds(dataset));
            ScoreSettings settings = config.scoring;
            settings.seed = round_seed;
            const std::vector<CandidateScore> scores =
                hybrid_scores(state.field, context, views, settings);
            const int id = best_view(scores);
            if (config.score_sink) config.score_sink(state.round + 1, scores, id);
            for (const CandidateScore& score : scores)
                if (score.view_id == id)
                    return {id, score.sigma_rgb2, score.sigma_pos2, score.hybrid};
            throw ConfigError("select_next: scored view missing from candidate set");
        }
    }
    throw ConfigError("select_next: unknown strategy kind");
}

SelectionState& run_incremental(SelectionState& state, const Strategy& strategy,
                                double budget_frac, double psnr_target,
                                const PlannerConfig& config) {
    if (state.dataset == nullptr) throw ConfigError("run_incremental: state carries no dataset");
    if (!(budget_frac > 0.0) || budget_frac > 1.0)
        throw ConfigError("run_incremental: budget fraction must be in (0, 1]");
    if (std::isnan(psnr_target))
        throw ConfigError("run_incremental: psnr target must not be NaN");
    if (state.train_ids.empty()) throw ConfigError("run_incremental: no training views");
    if (state.test_ids.empty()) throw ConfigError("run_incremental: no test views");
    const Dataset& dataset = *state.dataset;

    const int budget = ceil_frac(budget_frac, static_cast<int>(dataset.cameras.size()));
    int selections = 0;
    while (true) {
        const auto round_start = std::chrono::steady_clock::now();

        // Warm start: the field carries over, only the batch stream reseeds.
        TrainConfig train_config = config.train;
        train_config.seed = mix_seed(config.train.seed, static_cast<uint64_t>(state.round));
        train(state.field, views_for(dataset, state.train_ids), train_config);

        double psnr_sum = 0.0;
        double ssim_sum = 0.0;
        for (int id : state.test_ids) {
            const RenderedView rendered = render_view(
                state.field, dataset.cameras[static_cast<size_t>(id)], config.train.render);
            psnr_sum += psnr(rendered.mean, dataset.images[static_cast<size_t>(id)]);
            ssim_sum += ssim(rendered.mean, dataset.images[static_cast<size_t>(id)]);
        }
        state.final_psnr = psnr_sum / static_cast<double>(state.test_ids.size());
        state.final_ssim = ssim_sum / static_cast<double>(state.test_ids.size());

        if (state.final_psnr >= psnr_target || selections >= budget ||
            state.candidate_ids.empty())
            break;

        const SelectionChoice choice = select_next(state, strategy, config);
        state.candidate_ids.erase(std::lower_bound(state.candidate_ids.begin(),
                                                   state.candidate_ids.end(), choice.view_id));
        insert_sorted(state.train_ids, choice.view_id);
        ++state.round;
        ++selections;

        double wall_ms = 0.0;
        if (config.record_timing)
            wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                round_start)
                          .count();
        state.trace.push_back({state.round, choice.view_id, state.final_psnr, state.final_ssim,
                               choice.sigma_rgb2, choice.sigma_pos2, choice.hybrid, wall_ms});
    }
    return state;
}

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& os) {
    os << "round,selected_id,psnr,ssim,sigma_rgb2,sigma_pos2,hybrid,wall_ms\n";
    for (const TraceRow& row : trace)
        os << row.round << ',' << row.selected_id << ',' << format_number(row.psnr) << ','
           << format_number(row.ssim) << ',' << format_number(row.sigma_rgb2) << ','
           << format_number(row.sigma_pos2) << ',' << format_number(row.hybrid) << ','
           << format_number(row.wall_ms) << '\n';
}

}  // namespace nbv
