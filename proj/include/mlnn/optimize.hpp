#pragma once

#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mlnn/model.hpp"
#include "mlnn/network_kernel.hpp"

namespace mlnn {

enum class Phase { Adam, Lbfgs };

std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view text);

struct AdamConfig {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int num_iterations = 0;

    void validate() const;
};

struct LbfgsConfig {
    int history_size = 10;
    int num_iterations = 0;
    double initial_step = 1.0;
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_line_search_evals = 25;
    double gradient_tolerance = 1e-16;

    void validate() const;
};

/// One parameter update. Metrics are NaN on rows where they were not computed.
struct TrainRow {
    int iteration = 0;
    Phase phase = Phase::Adam;
    double loss = 0.0;
    double l2 = std::numeric_limits<double>::quiet_NaN();
    double h1 = std::numeric_limits<double>::quiet_NaN();
};

/// Line-search data of an accepted L-BFGS step, kept for verification:
/// value and directional derivative at the start and at the accepted point.
struct StepTrace {
    double step = 0.0;
    double f0 = 0.0;
    double slope0 = 0.0;
    double f1 = 0.0;
    double slope1 = 0.0;
    bool wolfe = true;
};

struct TrainRecord {
    std::vector<TrainRow> rows;
    std::vector<StepTrace> steps;
    bool line_search_failed = false;
    std::string stop_reason;

    [[nodiscard]] int count(Phase phase) const;
    void append(const TrainRecord& other);
};

struct TrainResult {
    ParamVector params;
    TrainRecord record;
    double final_loss = 0.0;
};

using Objective = std::function<LossReport(const ParamVector&)>;

/// Invoked after each update with the new parameters; may fill the row's metrics.
using IterationCallback = std::function<void(TrainRow&, const ParamVector&)>;

/// Adam with bias correction. Row losses are the values observed before each
/// update; `first_iteration` offsets the row numbering.
TrainResult adam_run(const Objective& objective, ParamVector params, const AdamConfig& config,
                     const IterationCallback& callback = {}, int first_iteration = 0);

/// L-BFGS with two-loop recursion and a strong-Wolfe line search. Row losses
/// are the values after each update. A failing line search stops the run and
/// keeps the best point found.
TrainResult lbfgs_run(const Objective& objective, ParamVector params, const LbfgsConfig& config,
                      const IterationCallback& callback = {}, int first_iteration = 0);

/// Adam followed by L-BFGS from the Adam result.
TrainResult two_phase_train(const Objective& objective, ParamVector params, const AdamConfig& adam,
                            const LbfgsConfig& lbfgs, const IterationCallback& callback = {});

} // namespace mlnn
