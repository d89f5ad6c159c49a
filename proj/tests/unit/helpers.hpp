#pragma once

#include <cmath>

#include "mlnn/model.hpp"

namespace testing {

inline double rel_dev(double a, double b)
{
    return std::abs(a - b) / (1.0 + std::abs(a));
}

// Xavier draw with every entry shifted, so biases and output weights are nonzero.
inline mlnn::ParamVector busy_params(const mlnn::NetworkSpec& spec, std::uint64_t seed)
{
    mlnn::ParamVector p = mlnn::xavier_init(spec, seed);
    mlnn::SplitMix64 rng(seed + 77);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        p[i] += rng.uniform(-0.5, 0.5);
    }
    return p;
}

inline mlnn::NetworkSpec small_spec(mlnn::ArchitectureKind kind, int dim = 1, int M = 3)
{
    mlnn::NetworkSpec s;
    s.input_dim = dim;
    s.hidden_widths = {6, 4};
    s.kind = kind;
    s.num_wavenumbers = kind == mlnn::ArchitectureKind::PlainG ? 0 : M;
    return s;
}

// Offset and length of the output layer block (weights then biases).
inline std::pair<Eigen::Index, Eigen::Index> output_block(const mlnn::NetworkSpec& spec)
{
    const auto out = spec.layer_shapes().back();
    return {static_cast<Eigen::Index>(out.offset), static_cast<Eigen::Index>(out.end() - out.offset)};
}

} // namespace testing
