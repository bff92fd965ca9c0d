// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nextview/common.hpp"
#include "nextview/field.hpp"
#include "nextview/scenegen.hpp"
#include "nextview/uncertainty.hpp"

namespace nbv {

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class StrategyKind { Hybrid, RenderingOnly, PositionalOnly, Random, FVS };

std::string strategy_name(StrategyKind kind);
StrategyKind strategy_from_name(const std::string& name);

struct Strategy {
    StrategyKind kind = StrategyKind::Hybrid;
    uint64_t seed = 0;  // drives the Random baseline's draws
};

// ---------------------------------------------------------------------------
// Selection state
// ---------------------------------------------------------------------------

// One selection round: the test metrics of the field the choice was based
// on, the chosen view, and the raw/normalized score components (zero for
// strategies that do not evaluate them). wall_ms is zero unless timing is
// recorded.
struct TraceRow {
    int round = 0;
    int selected_id = -1;
    double psnr = 0.0;
    double ssim = 0.0;
    double sigma_rgb2 = 0.0;
    double sigma_pos2 = 0.0;
    double hybrid = 0.0;
    double wall_ms = 0.0;
};

struct SelectionState {
    const Dataset* dataset = nullptr;
    std::vector<int> train_ids;      // sorted ascending
    std::vector<int> candidate_ids;  // sorted ascending
    std::vector<int> test_ids;       // sorted ascending, immutable across rounds
    VoxelField field;
    int round = 0;  // completed selection rounds
    std::vector<TraceRow> trace;
    double final_psnr = 0.0;  // test metrics after the latest retrain
    double final_ssim = 0.0;
};

// Everything a run needs besides the data and the strategy.
struct PlannerConfig {
    TrainConfig train;       // per-round budget; also the test evaluation renderer
    ScoreSettings scoring;   // candidate scoring knobs
    double eps_rel = 0.05;   // trajectory classification tolerance
    bool record_timing = false;  // leave wall_ms at 0 for byte-stable traces
    // Observer for the per-candidate scores of each selection round (1-based).
    // Called by the strategies that compute scores (hybrid and the two
    // single-component ones); ablation rows carry only their raw component.
    std::function<void(int round, const std::vector<CandidateScore>& scores, int selected_id)>
        score_sink;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Seeded uniform split into test / train / candidates. Sizes:
//   |test|  = ceil(test_frac * N)
//   |train| = max(ceil(init_frac * N), min(min_init, N - |test| - 1))
// leaving at least one candidate; a dataset too small for that reports the
// minimum usable N. The field starts at the given density parameter with
// neutral colors, on the dataset's grid.
SelectionState init_split(const Dataset& dataset, double init_frac, double test_frac,
                          int min_init, uint64_t seed, double initial_density_param = -3.0);

struct SelectionChoice {
    int view_id = -1;
    double sigma_rgb2 = 0.0;
    double sigma_pos2 = 0.0;
    double hybrid = 0.0;
};

// Picks the next view among the candidates:
//   Hybrid          argmax of the normalized two-component score
//   RenderingOnly   argmax raw rendering uncertainty
//   PositionalOnly  argmax raw positional uncertainty
//   Random          seeded uniform draw (seed mixed with the round index)
//   FVS             argmax of min distance to any training position
// Ties resolve to the lowest view id. Throws when no candidates remain.
SelectionChoice select_next(const SelectionState& state, const Strategy& strategy,
                            const PlannerConfig& config);

// The incremental loop: retrain (warm start), evaluate the test views, stop
// once the PSNR target is met, ceil(budget_frac * N) views were added, or the
// candidate pool is empty; otherwise select and promote one candidate.
// Appends one trace row per selection round; on training divergence the
// partial trace is preserved in the state before the error propagates. Pass
// an infinite psnr_target to stop on budget alone.
SelectionState& run_incremental(SelectionState& state, const Strategy& strategy,
                                double budget_frac, double psnr_target,
                                const PlannerConfig& config);

// CSV dump: round, selected_id, psnr, ssim, sigma_rgb2, sigma_pos2, hybrid,
// wall_ms.
void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& os);

}  // namespace nbv
