#include "mlnn/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace mlnn {

std::string_view to_string(Phase phase)
{
    return phase == Phase::Adam ? "adam" : "lbfgs";
}

Phase parse_phase(std::string_view text)
{
    if (text == "adam") {
        return Phase::Adam;
    }
    if (text == "lbfgs") {
        return Phase::Lbfgs;
    }
    throw Error("unknown training phase '" + std::string(text) + "'");
}

void AdamConfig::validate() const
{
    if (!(learning_rate > 0.0)) {
        throw Error("Adam learning rate must be positive");
    }
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw Error("Adam betas must lie in [0, 1)");
    }
    if (num_iterations < 0) {
        throw Error("Adam iteration count must be non-negative");
    }
}

void LbfgsConfig::validate() const
{
    if (history_size < 1) {
        throw Error("L-BFGS history size must be at least 1");
    }
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) {
        throw Error("L-BFGS Wolfe constants need 0 < c1 < c2 < 1");
    }
    if (num_iterations < 0 || max_line_search_evals < 1) {
        throw Error("L-BFGS iteration and line-search counts must be positive");
    }
    if (!(initial_step > 0.0)) {
        throw Error("L-BFGS initial step must be positive");
    }
}

int TrainRecord::count(Phase phase) const
{
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [phase](const TrainRow& r) { return r.phase == phase; }));
}

void TrainRecord::append(const TrainRecord& other)
{
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    steps.insert(steps.end(), other.steps.begin(), other.steps.end());
    line_search_failed = line_search_failed || other.line_search_failed;
    if (!other.stop_reason.empty()) {
        stop_reason = other.stop_reason;
    }
}

namespace {

LossReport checked(const Objective& objective, const ParamVector& params, std::string_view where)
{
    LossReport r = objective(params);
    if (!std::isfinite(r.loss) || !r.gradient.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite " << (std::isfinite(r.loss) ? "gradient" : "loss") << " during " << where;
        throw NonFiniteError(msg.str());
    }
    if (r.gradient.size() != params.size()) {
        throw Error("objective returned a gradient of the wrong length");
    }
    return r;
}

struct Sample {
    double t = 0.0;
    double f = 0.0;
    double dg = 0.0;
    Eigen::VectorXd g;
};

/// Minimiser of the cubic matching values and slopes at a and b, clamped to
/// [lo, hi]; falls back to the midpoint when the cubic has no minimiser.
double cubic_minimizer(const Sample& a, const Sample& b, double lo, double hi)
{
    const double mid = 0.5 * (lo + hi);
    if (!std::isfinite(a.f) || !std::isfinite(b.f) || a.t == b.t) {
        return mid;
    }
    const double d1 = a.dg + b.dg - 3.0 * (a.f - b.f) / (a.t - b.t);
    const double d2sq = d1 * d1 - a.dg * b.dg;
    if (d2sq < 0.0) {
        return mid;
    }
    const double d2 = std::copysign(std::sqrt(d2sq), b.t - a.t);
    const double denom = b.dg - a.dg + 2.0 * d2;
    if (denom == 0.0) {
        return mid;
    }
    const double t = b.t - (b.t - a.t) * (b.dg + d2 - d1) / denom;
    if (!std::isfinite(t)) {
        return mid;
    }
    return std::clamp(t, lo, hi);
}

struct LineSearchOutcome {
    bool success = false;
    Sample point;
    int evals = 0;
};

class StrongWolfe {
public:
    StrongWolfe(const Objective& objective, const ParamVector& x, const Eigen::VectorXd& dir, double f0, double dg0,
                const LbfgsConfig& config)
        : objective_(objective), x_(x), dir_(dir), f0_(f0), dg0_(dg0), config_(config), trial_(x)
    {
        best_.t = 0.0;
        best_.f = f0;
        best_.dg = dg0;
    }

    LineSearchOutcome run(double t)
    {
        Sample prev = best_;
        for (int i = 0;; ++i) {
            Sample cur = evaluate(t);
            if (!sufficient(cur) || (i > 0 && cur.f >= prev.f)) {
                return zoom(prev, cur);
            }
            if (std::abs(cur.dg) <= -config_.c2 * dg0_) {
                return accept(cur);
            }
            if (cur.dg >= 0.0) {
                return zoom(cur, prev);
            }
            if (evals_ >= config_.max_line_search_evals) {
                return done(false, best_);
            }
            const double next = cubic_minimizer(prev, cur, t + 0.01 * (t - prev.t), 10.0 * t);
            prev = std::move(cur);
            t = next;
        }
    }

private:
    bool sufficient(const Sample& s) const { return std::isfinite(s.f) && s.f <= f0_ + config_.c1 * s.t * dg0_; }

    Sample evaluate(double t)
    {
        trial_.mutable_values() = x_.values() + t * dir_;
        LossReport r = objective_(trial_);
        ++evals_;
        Sample s;
        s.t = t;
        s.f = r.loss;
        if (std::isfinite(r.loss) && r.gradient.allFinite()) {
            s.dg = r.gradient.dot(dir_);
            s.g = std::move(r.gradient);
            if (s.f < best_.f) {
                best_ = s;
            }
        } else {
            s.f = std::numeric_limits<double>::infinity();
            s.dg = std::numeric_limits<double>::quiet_NaN();
        }
        return s;
    }

    LineSearchOutcome zoom(Sample lo, Sample hi)
    {
        while (evals_ < config_.max_line_search_evals) {
            const double a = std::min(lo.t, hi.t);
            const double b = std::max(lo.t, hi.t);
            const double width = b - a;
            if (width * dir_.lpNorm<Eigen::Infinity>() <= 1e-300 || width <= 1e-16 * b) {
                break;
            }
            double t = cubic_minimizer(lo, hi, a, b);
            // Keep the trial away from the bracket ends.
            if (t - a < 0.1 * width || b - t < 0.1 * width) {
                t = 0.5 * (a + b);
            }
            Sample cur = evaluate(t);
            if (!sufficient(cur) || cur.f >= lo.f) {
                hi = std::move(cur);
                continue;
            }
            if (std::abs(cur.dg) <= -config_.c2 * dg0_) {
                return accept(cur);
            }
            if (cur.dg * (hi.t - lo.t) >= 0.0) {
                hi = lo;
            }
            lo = std::move(cur);
        }
        return done(false, best_);
    }

    // One secant step on the directional derivative through 0 and the
    // accepted point. It lands on the exact minimiser along a quadratic, which
    // keeps the quasi-Newton pairs conjugate; it is only taken when it still
    // satisfies the strong Wolfe conditions and lowers the loss.
    LineSearchOutcome accept(const Sample& s)
    {
        const double t = s.t * dg0_ / (dg0_ - s.dg);
        if (evals_ < config_.max_line_search_evals && std::isfinite(t) && t > 0.0 &&
            std::abs(t - s.t) > 1e-8 * s.t && std::abs(s.dg) > 1e-3 * -dg0_) {
            Sample refined = evaluate(t);
            if (sufficient(refined) && refined.f < s.f && std::abs(refined.dg) <= -config_.c2 * dg0_) {
                return done(true, refined);
            }
        }
        return done(true, s);
    }

    LineSearchOutcome done(bool success, const Sample& s)
    {
        LineSearchOutcome out;
        out.success = success;
        out.point = s;
        out.evals = evals_;
        return out;
    }

    const Objective& objective_;
    const ParamVector& x_;
    const Eigen::VectorXd& dir_;
    double f0_;
    double dg0_;
    const LbfgsConfig& config_;
    ParamVector trial_;
    Sample best_;
    int evals_ = 0;
};

struct CurvaturePair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho = 0.0;
};

Eigen::VectorXd two_loop_direction(const std::deque<CurvaturePair>& history, const Eigen::VectorXd& g)
{
    Eigen::VectorXd q = -g;
    if (history.empty()) {
        return q;
    }
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
        alpha[i] = history[i].rho * history[i].s.dot(q);
        q -= alpha[i] * history[i].y;
    }
    const CurvaturePair& last = history.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double beta = history[i].rho * history[i].y.dot(q);
        q += (alpha[i] - beta) * history[i].s;
    }
    return q;
}

} // namespace

TrainResult adam_run(const Objective& objective, ParamVector params, const AdamConfig& config,
                     const IterationCallback& callback, int first_iteration)
{
    config.validate();
    TrainResult result;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
    double beta1_pow = 1.0;
    double beta2_pow = 1.0;
    for (int k = 1; k <= config.num_iterations; ++k) {
        const LossReport r = checked(objective, params, "Adam");
        m = config.beta1 * m + (1.0 - config.beta1) * r.gradient;
        v = config.beta2 * v + (1.0 - config.beta2) * r.gradient.cwiseAbs2();
        beta1_pow *= config.beta1;
        beta2_pow *= config.beta2;
        const double bias1 = 1.0 - beta1_pow;
        const double bias2 = 1.0 - beta2_pow;
        params.mutable_values().array() -=
            config.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + config.epsilon);

        TrainRow row;
        row.iteration = first_iteration + k;
        row.phase = Phase::Adam;
        row.loss = r.loss;
        if (callback) {
            callback(row, params);
        }
        result.record.rows.push_back(row);
    }
    result.final_loss = checked(objective, params, "Adam").loss;
    result.record.stop_reason = "iteration budget";
    result.params = std::move(params);
    return result;
}

TrainResult lbfgs_run(const Objective& objective, ParamVector params, const LbfgsConfig& config,
                      const IterationCallback& callback, int first_iteration)
{
    config.validate();
    TrainResult result;
    LossReport current = checked(objective, params, "L-BFGS");
    std::deque<CurvaturePair> history;
    result.record.stop_reason = "iteration budget";

    for (int k = 1; k <= config.num_iterations; ++k) {
        if (current.gradient.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) {
            result.record.stop_reason = "gradient tolerance";
            break;
        }
        Eigen::VectorXd dir = two_loop_direction(history, current.gradient);
        double dg0 = current.gradient.dot(dir);
        if (!(dg0 < 0.0)) {
            history.clear();
            dir = -current.gradient;
            dg0 = current.gradient.dot(dir);
        }
        double t0 = config.initial_step;
        if (history.empty()) {
            // Without curvature information, scale the first step by the gradient size.
            t0 *= std::min(1.0, 1.0 / current.gradient.lpNorm<1>());
        }

        StrongWolfe search(objective, params, dir, current.loss, dg0, config);
        LineSearchOutcome ls = search.run(t0);
        if (!ls.success) {
            result.record.line_search_failed = true;
            result.record.stop_reason = "line search failure";
            if (!(ls.point.t > 0.0 && ls.point.f < current.loss)) {
                break;
            }
        }

        const Eigen::VectorXd step = ls.point.t * dir;
        Eigen::VectorXd y = ls.point.g - current.gradient;
        const double sy = step.dot(y);
        if (sy > 1e-14 * step.norm() * y.norm()) {
            history.push_back({step, std::move(y), 1.0 / sy});
            if (static_cast<int>(history.size()) > config.history_size) {
                history.pop_front();
            }
        }

        StepTrace trace;
        trace.step = ls.point.t;
        trace.f0 = current.loss;
        trace.slope0 = dg0;
        trace.f1 = ls.point.f;
        trace.slope1 = ls.point.dg;
        trace.wolfe = ls.success;
        result.record.steps.push_back(trace);

        params.mutable_values() += step;
        current.loss = ls.point.f;
        current.gradient = std::move(ls.point.g);

        TrainRow row;
        row.iteration = first_iteration + k;
        row.phase = Phase::Lbfgs;
        row.loss = current.loss;
        if (callback) {
            callback(row, params);
        }
        result.record.rows.push_back(row);
        if (!ls.success) {
            break;
        }
    }
    result.final_loss = current.loss;
    result.params = std::move(params);
    return result;
}

TrainResult two_phase_train(const Objective& objective, ParamVector params, const AdamConfig& adam,
                            const LbfgsConfig& lbfgs, const IterationCallback& callback)
{
    TrainResult first = adam_run(objective, std::move(params), adam, callback);
    if (lbfgs.num_iterations == 0) {
        return first;
    }
    TrainResult second = lbfgs_run(objective, std::move(first.params), lbfgs, callback, adam.num_iterations);
    TrainResult merged;
    merged.record = std::move(first.record);
    merged.record.append(second.record);
    merged.params = std::move(second.params);
    merged.final_loss = second.final_loss;
    return merged;
}

} // namespace mlnn
