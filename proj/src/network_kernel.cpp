#include "mlnn/network_kernel.hpp"

#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mlnn {

struct TrialEvaluator::Chunk {
    Eigen::Index first = 0;
    Eigen::Index count = 0;
    Eigen::MatrixXd input;  // N0 x P*C
    Eigen::MatrixXd factor; // K x P*C
};

struct TrialEvaluator::Workspace {
    std::vector<Eigen::MatrixXd> activations; // output of hidden layer i, N_i x P*C
    std::vector<Eigen::MatrixXd> pre;         // pre-activation of hidden layer i
    std::vector<Eigen::ArrayXXd> d1;          // sigma'(a), value block only
    std::vector<Eigen::ArrayXXd> d2;          // sigma''(a)
    Eigen::MatrixXd output;                   // K x P*C
    Eigen::MatrixXd upstream;                 // adjoint buffers
    Eigen::MatrixXd downstream;
    BundleBatch bundles;
    Eigen::VectorXd gradient;
    double loss_sum = 0.0;
};

namespace {

int channel_count(int dim) { return 1 + 2 * dim; }

Eigen::MatrixXd build_input(const NetworkSpec& spec, const Points& pts, Eigen::Index first, Eigen::Index count)
{
    const int d = spec.input_dim;
    const Eigen::Index P = count;
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(spec.input_width(), P * channel_count(d));
    if (!spec.uses_fourier_input()) {
        for (Eigen::Index p = 0; p < P; ++p) {
            for (int j = 0; j < d; ++j) {
                z(j, p) = pts(j, first + p);
                z(j, (1 + j) * P + p) = 1.0;
            }
        }
        return z;
    }
    const FourierMap map = geometric_wavenumbers(spec.num_wavenumbers, spec.domain_length);
    const int M = map.size();
    for (Eigen::Index p = 0; p < P; ++p) {
        for (int j = 0; j < d; ++j) {
            const double x = pts(j, first + p);
            for (int m = 0; m < M; ++m) {
                const double w = map.omegas[m];
                const double c = std::cos(w * x);
                const double s = std::sin(w * x);
                const int rc = j * 2 * M + m;
                const int rs = rc + M;
                z(rc, p) = c;
                z(rs, p) = s;
                z(rc, (1 + j) * P + p) = -w * s;
                z(rs, (1 + j) * P + p) = w * c;
                z(rc, (1 + d + j) * P + p) = -w * w * c;
                z(rs, (1 + d + j) * P + p) = -w * w * s;
            }
        }
    }
    return z;
}

Eigen::MatrixXd build_factor(const NetworkSpec& spec, const Points& pts, Eigen::Index first, Eigen::Index count)
{
    const int d = spec.input_dim;
    const Eigen::Index P = count;
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(spec.output_width(), P * channel_count(d));
    if (!spec.impose_boundary) {
        // Test mode: the boundary factor is 1, so u is the (1/M-weighted) output sum.
        f.leftCols(P).setConstant(1.0 / spec.output_width());
        return f;
    }
    const double l = spec.domain_length;
    if (spec.kind != ArchitectureKind::FourierSine) {
        for (Eigen::Index p = 0; p < P; ++p) {
            std::array<double, kMaxDim> q{}, dq{};
            for (int j = 0; j < d; ++j) {
                const double x = pts(j, first + p);
                q[j] = x * (l - x);
                dq[j] = l - 2.0 * x;
            }
            double prod = 1.0;
            for (int j = 0; j < d; ++j) {
                prod *= q[j];
            }
            f(0, p) = prod;
            for (int j = 0; j < d; ++j) {
                double others = 1.0;
                for (int i = 0; i < d; ++i) {
                    if (i != j) {
                        others *= q[i];
                    }
                }
                f(0, (1 + j) * P + p) = dq[j] * others;
                f(0, (1 + d + j) * P + p) = -2.0 * others;
            }
        }
        return f;
    }
    const FourierMap map = geometric_wavenumbers(spec.num_wavenumbers, l);
    const double inv_m = 1.0 / map.size();
    for (Eigen::Index p = 0; p < P; ++p) {
        for (int m = 0; m < map.size(); ++m) {
            const double w = map.omegas[m];
            std::array<double, kMaxDim> s{}, c{};
            for (int j = 0; j < d; ++j) {
                const double x = pts(j, first + p);
                s[j] = std::sin(w * x);
                c[j] = std::cos(w * x);
            }
            double prod = 1.0;
            for (int j = 0; j < d; ++j) {
                prod *= s[j];
            }
            f(m, p) = prod * inv_m;
            for (int j = 0; j < d; ++j) {
                double others = 1.0;
                for (int i = 0; i < d; ++i) {
                    if (i != j) {
                        others *= s[i];
                    }
                }
                f(m, (1 + j) * P + p) = w * c[j] * others * inv_m;
                f(m, (1 + d + j) * P + p) = -w * w * prod * inv_m;
            }
        }
    }
    return f;
}

} // namespace

TrialEvaluator::TrialEvaluator(NetworkSpec spec, Points points, std::optional<AffineLift> lift)
    : spec_(std::move(spec)), points_(std::move(points)), lift_(lift)
{
    spec_.validate();
    if (points_.rows() != spec_.input_dim) {
        throw Error("point dimension " + std::to_string(points_.rows()) + " does not match network input dimension " +
                    std::to_string(spec_.input_dim));
    }
    layers_ = spec_.layer_shapes();
    for (Eigen::Index first = 0; first < points_.cols(); first += kChunkPoints) {
        Chunk c;
        c.first = first;
        c.count = std::min(kChunkPoints, points_.cols() - first);
        c.input = build_input(spec_, points_, c.first, c.count);
        c.factor = build_factor(spec_, points_, c.first, c.count);
        chunks_.push_back(std::move(c));
    }
    work_.resize(chunks_.size());
}

TrialEvaluator::~TrialEvaluator() = default;
TrialEvaluator::TrialEvaluator(TrialEvaluator&&) noexcept = default;
TrialEvaluator& TrialEvaluator::operator=(TrialEvaluator&&) noexcept = default;

void TrialEvaluator::check_params(const ParamVector& params) const
{
    if (static_cast<std::size_t>(params.size()) != spec_.param_count()) {
        throw Error("parameter vector has length " + std::to_string(params.size()) + ", network expects " +
                    std::to_string(spec_.param_count()));
    }
}

void TrialEvaluator::forward(const Chunk& chunk, Workspace& work, const ParamVector& params) const
{
    const int d = spec_.input_dim;
    const Eigen::Index P = chunk.count;
    const std::size_t hidden = layers_.size() - 1;
    work.activations.resize(hidden);
    work.pre.resize(hidden);
    work.d1.resize(hidden);
    work.d2.resize(hidden);

    const Eigen::MatrixXd* in = &chunk.input;
    for (std::size_t i = 0; i < hidden; ++i) {
        const LayerShape& L = layers_[i];
        Eigen::Map<const Eigen::MatrixXd> W(params.data() + L.offset, L.rows, L.cols);
        Eigen::Map<const Eigen::VectorXd> b(params.data() + L.bias_offset(), L.rows);
        Eigen::MatrixXd& A = work.pre[i];
        A.noalias() = W * (*in);
        A.leftCols(P).colwise() += b;
        Eigen::MatrixXd& H = work.activations[i];
        if (spec_.activation == Activation::Identity) {
            H = A;
            work.d1[i].setOnes(L.rows, P);
            work.d2[i].setZero(L.rows, P);
        } else {
            H.resize(L.rows, A.cols());
            auto t = H.leftCols(P).array();
            t = A.leftCols(P).array().tanh();
            work.d1[i] = 1.0 - t.square();
#ifdef MLNN_MUTATE_TANH_SECOND_DERIVATIVE
            work.d2[i] = 2.0 * t * work.d1[i];
#else
            work.d2[i] = -2.0 * t * work.d1[i];
#endif
            const auto& s1 = work.d1[i];
            const auto& s2 = work.d2[i];
            for (int j = 0; j < d; ++j) {
                const auto aj = A.middleCols((1 + j) * P, P).array();
                const auto ajj = A.middleCols((1 + d + j) * P, P).array();
                H.middleCols((1 + j) * P, P).array() = s1 * aj;
                H.middleCols((1 + d + j) * P, P).array() = s2 * aj.square() + s1 * ajj;
            }
        }
        in = &H;
    }
    const LayerShape& L = layers_.back();
    Eigen::Map<const Eigen::MatrixXd> W(params.data() + L.offset, L.rows, L.cols);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + L.bias_offset(), L.rows);
    work.output.noalias() = W * (*in);
    work.output.leftCols(P).colwise() += b;
}

void TrialEvaluator::assemble(const Chunk& chunk, Workspace& work, BundleBatch& out) const
{
    const int d = spec_.input_dim;
    const Eigen::Index P = chunk.count;
    const auto& F = chunk.factor;
    const auto& O = work.output;
    out = BundleBatch::zeros(d, P);
    out.value = (F.leftCols(P).array() * O.leftCols(P).array()).colwise().sum().transpose();
    for (int j = 0; j < d; ++j) {
        const auto Fv = F.leftCols(P).array();
        const auto Fj = F.middleCols((1 + j) * P, P).array();
        const auto Fjj = F.middleCols((1 + d + j) * P, P).array();
        const auto Ov = O.leftCols(P).array();
        const auto Oj = O.middleCols((1 + j) * P, P).array();
        const auto Ojj = O.middleCols((1 + d + j) * P, P).array();
        out.grad.row(j) = (Fj * Ov + Fv * Oj).colwise().sum();
        out.diag_hess.row(j) = (Fjj * Ov + 2.0 * Fj * Oj + Fv * Ojj).colwise().sum();
    }
    if (lift_) {
        for (Eigen::Index p = 0; p < P; ++p) {
            out.value(p) += lift_->value(point_at(points_, chunk.first + p));
        }
        for (int j = 0; j < d; ++j) {
            out.grad.row(j).array() += lift_->slope[j];
        }
    }
}

void TrialEvaluator::backward(const Chunk& chunk, Workspace& work, const ParamVector& params,
                              const BundleBatch& seed, Eigen::VectorXd& gradient) const
{
    const int d = spec_.input_dim;
    const int C = channel_count(d);
    const Eigen::Index P = chunk.count;
    const auto& F = chunk.factor;

    // Adjoint of the trial assembly u = sum_k F_k O_k (product rule per channel).
    Eigen::MatrixXd& Obar = work.upstream;
    Obar.resize(F.rows(), P * C);
    {
        const auto Fv = F.leftCols(P).array();
        auto Ov = Obar.leftCols(P).array();
        Ov = Fv.rowwise() * seed.value.transpose().array();
        for (int j = 0; j < d; ++j) {
            const auto Fj = F.middleCols((1 + j) * P, P).array();
            const auto Fjj = F.middleCols((1 + d + j) * P, P).array();
            const auto gj = seed.grad.row(j).array();
            const auto hj = seed.diag_hess.row(j).array();
            Ov += Fj.rowwise() * gj + Fjj.rowwise() * hj;
            Obar.middleCols((1 + j) * P, P).array() = Fv.rowwise() * gj + 2.0 * (Fj.rowwise() * hj);
            Obar.middleCols((1 + d + j) * P, P).array() = Fv.rowwise() * hj;
        }
    }

    const std::size_t hidden = layers_.size() - 1;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const LayerShape& L = layers_[li];
        const Eigen::MatrixXd& in = li == 0 ? chunk.input : work.activations[li - 1];
        Eigen::MatrixXd& Abar = work.upstream;
        if (li < hidden && spec_.activation == Activation::Tanh) {
            // Convert the adjoint of this layer's output H into that of its pre-activation A.
            const Eigen::MatrixXd& Hbar = work.downstream;
            const Eigen::MatrixXd& A = work.pre[li];
            const auto& s1 = work.d1[li];
            const auto& s2 = work.d2[li];
            const Eigen::ArrayXXd s3 = -2.0 * s1 * (s1 - 2.0 * (1.0 - s1));
            Abar.resize(L.rows, P * C);
            auto av = Abar.leftCols(P).array();
            av = s1 * Hbar.leftCols(P).array();
            for (int j = 0; j < d; ++j) {
                const auto aj = A.middleCols((1 + j) * P, P).array();
                const auto ajj = A.middleCols((1 + d + j) * P, P).array();
                const auto hj = Hbar.middleCols((1 + j) * P, P).array();
                const auto hjj = Hbar.middleCols((1 + d + j) * P, P).array();
                Abar.middleCols((1 + d + j) * P, P).array() = s1 * hjj;
                Abar.middleCols((1 + j) * P, P).array() = s1 * hj + 2.0 * s2 * aj * hjj;
                av += s2 * aj * hj + hjj * (s3 * aj.square() + s2 * ajj);
            }
        } else if (li < hidden) {
            Abar = work.downstream;
        }
        Eigen::Map<Eigen::MatrixXd> Wg(gradient.data() + L.offset, L.rows, L.cols);
        Eigen::Map<Eigen::VectorXd> bg(gradient.data() + L.bias_offset(), L.rows);
        Wg.noalias() += Abar * in.transpose();
        bg += Abar.leftCols(P).rowwise().sum();
        if (li > 0) {
            Eigen::Map<const Eigen::MatrixXd> W(params.data() + L.offset, L.rows, L.cols);
            work.downstream.noalias() = W.transpose() * Abar;
        }
    }
}

BundleBatch TrialEvaluator::evaluate(const ParamVector& params) const
{
    check_params(params);
    const auto n = static_cast<std::ptrdiff_t>(chunks_.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < n; ++c) {
        forward(chunks_[c], work_[c], params);
        assemble(chunks_[c], work_[c], work_[c].bundles);
    }
    BundleBatch out = BundleBatch::zeros(spec_.input_dim, points_.cols());
    for (std::size_t c = 0; c < chunks_.size(); ++c) {
        const auto& b = work_[c].bundles;
        out.value.segment(chunks_[c].first, chunks_[c].count) = b.value;
        out.grad.middleCols(chunks_[c].first, chunks_[c].count) = b.grad;
        out.diag_hess.middleCols(chunks_[c].first, chunks_[c].count) = b.diag_hess;
    }
    return out;
}

Eigen::VectorXd TrialEvaluator::residuals(const LinearOperator& op, std::span<const double> source, double mu,
                                          const ParamVector& params) const
{
    if (static_cast<Eigen::Index>(source.size()) != points_.cols()) {
        throw Error("source has " + std::to_string(source.size()) + " values for " +
                    std::to_string(points_.cols()) + " points");
    }
    const BundleBatch b = evaluate(params);
    Eigen::Map<const Eigen::VectorXd> s(source.data(), points_.cols());
    return mu * s - op.apply(b);
}

LossReport TrialEvaluator::loss_and_gradient(const LinearOperator& op, std::span<const double> source, double mu,
                                             const ParamVector& params) const
{
    check_params(params);
    const Eigen::Index total = points_.cols();
    if (total == 0) {
        throw Error("loss requested on an empty collocation set");
    }
    if (static_cast<Eigen::Index>(source.size()) != total) {
        throw Error("source has " + std::to_string(source.size()) + " values for " + std::to_string(total) +
                    " points");
    }
    const int d = spec_.input_dim;
    const double scale = -2.0 / static_cast<double>(total);
    const auto n = static_cast<std::ptrdiff_t>(chunks_.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < n; ++c) {
        const Chunk& chunk = chunks_[c];
        Workspace& work = work_[c];
        forward(chunk, work, params);
        assemble(chunk, work, work.bundles);
        Eigen::Map<const Eigen::VectorXd> s(source.data() + chunk.first, chunk.count);
        const Eigen::VectorXd r = mu * s - op.apply(work.bundles);
        work.loss_sum = r.squaredNorm();

        // dL/d(bundle) = -(2/N) R * (coefficient of that bundle entry in A).
        BundleBatch seed = BundleBatch::zeros(d, chunk.count);
        seed.value = (scale * op.reaction) * r;
        for (int j = 0; j < d; ++j) {
            seed.grad.row(j) = (scale * op.convection[j]) * r.transpose();
            seed.diag_hess.row(j) = (scale * op.diffusion[j]) * r.transpose();
        }
        work.gradient.setZero(static_cast<Eigen::Index>(spec_.param_count()));
        backward(chunk, work, params, seed, work.gradient);
    }
    LossReport report;
    report.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec_.param_count()));
    double sum = 0.0;
    for (std::size_t c = 0; c < chunks_.size(); ++c) {
        sum += work_[c].loss_sum;
        report.gradient += work_[c].gradient;
    }
    report.loss = sum / static_cast<double>(total);
    return report;
}

} // namespace mlnn
