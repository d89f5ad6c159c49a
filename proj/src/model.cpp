#include "mlnn/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mlnn {

std::string_view to_string(ArchitectureKind kind)
{
    switch (kind) {
    case ArchitectureKind::PlainG: return "plain_g";
    case ArchitectureKind::FourierG: return "fourier_g";
    case ArchitectureKind::FourierSine: return "fourier_sine";
    }
    return "unknown";
}

ArchitectureKind parse_architecture(std::string_view text)
{
    if (text == "plain_g") {
        return ArchitectureKind::PlainG;
    }
    if (text == "fourier_g") {
        return ArchitectureKind::FourierG;
    }
    if (text == "fourier_sine") {
        return ArchitectureKind::FourierSine;
    }
    throw Error("unknown architecture '" + std::string(text) + "' (expected plain_g, fourier_g or fourier_sine)");
}

void NetworkSpec::validate() const
{
    if (input_dim < 1 || input_dim > kMaxDim) {
        throw Error("input dimension must be 1 or 2, got " + std::to_string(input_dim));
    }
    if (hidden_widths.empty()) {
        throw Error("a network needs at least one hidden layer");
    }
    for (int w : hidden_widths) {
        if (w < 1) {
            throw Error("hidden layer widths must be positive, got " + std::to_string(w));
        }
    }
    if (num_wavenumbers < 0) {
        throw Error("number of wave numbers must be non-negative");
    }
    if (uses_fourier_input() && num_wavenumbers < 1) {
        throw Error("Fourier architectures need at least one wave number");
    }
    if (!(domain_length > 0.0) || !std::isfinite(domain_length)) {
        throw Error("domain length must be positive");
    }
}

int NetworkSpec::input_width() const
{
    return uses_fourier_input() ? 2 * num_wavenumbers * input_dim : input_dim;
}

int NetworkSpec::output_width() const
{
    return kind == ArchitectureKind::FourierSine ? num_wavenumbers : 1;
}

std::vector<LayerShape> NetworkSpec::layer_shapes() const
{
    std::vector<LayerShape> shapes;
    int previous = input_width();
    std::size_t offset = 0;
    auto push = [&](int width) {
        LayerShape s{width, previous, offset};
        offset = s.end();
        previous = width;
        shapes.push_back(s);
    };
    for (int w : hidden_widths) {
        push(w);
    }
    push(output_width());
    return shapes;
}

std::size_t NetworkSpec::param_count() const
{
    return layer_shapes().back().end();
}

FourierMap geometric_wavenumbers(int count, double length)
{
    if (count < 1) {
        throw Error("geometric wave numbers need count >= 1");
    }
    if (!(length > 0.0)) {
        throw Error("geometric wave numbers need a positive domain length");
    }
    FourierMap map;
    map.omegas.reserve(count);
    double w = std::numbers::pi / length;
    for (int m = 0; m < count; ++m) {
        map.omegas.push_back(w);
        w *= 2.0;
    }
    return map;
}

std::vector<double> fourier_features(double coordinate, const FourierMap& map)
{
    const int M = map.size();
    std::vector<double> row(2 * M);
    for (int m = 0; m < M; ++m) {
        row[m] = std::cos(map.omegas[m] * coordinate);
        row[M + m] = std::sin(map.omegas[m] * coordinate);
    }
    return row;
}

std::vector<double> boundary_factor(PointRef x, const NetworkSpec& spec)
{
    const double l = spec.domain_length;
    if (spec.kind != ArchitectureKind::FourierSine) {
        double g = 1.0;
        for (double xj : x) {
            g *= xj * (l - xj);
        }
        return {g};
    }
    const FourierMap map = geometric_wavenumbers(spec.num_wavenumbers, l);
    std::vector<double> out(map.omegas.size(), 1.0);
    for (std::size_t m = 0; m < out.size(); ++m) {
        for (double xj : x) {
            out[m] *= std::sin(map.omegas[m] * xj);
        }
    }
    return out;
}

ParamVector xavier_init(const NetworkSpec& spec, std::uint64_t seed)
{
    spec.validate();
    ParamVector params(static_cast<Eigen::Index>(spec.param_count()));
    SplitMix64 rng(seed);
    for (const LayerShape& layer : spec.layer_shapes()) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols));
        for (std::size_t k = 0; k < layer.weight_count(); ++k) {
            params[static_cast<Eigen::Index>(layer.offset + k)] = rng.uniform(-bound, bound);
        }
    }
    return params;
}

double trial_value(const NetworkSpec& spec, const ParamVector& params, PointRef x, const AffineLift* lift)
{
    spec.validate();
    if (static_cast<std::size_t>(params.size()) != spec.param_count()) {
        throw Error("parameter vector has length " + std::to_string(params.size()) + ", network expects " +
                    std::to_string(spec.param_count()));
    }
    if (static_cast<int>(x.size()) != spec.input_dim) {
        throw Error("point dimension does not match the network input dimension");
    }

    Eigen::VectorXd z(spec.input_width());
    if (spec.uses_fourier_input()) {
        const FourierMap map = geometric_wavenumbers(spec.num_wavenumbers, spec.domain_length);
        for (int j = 0; j < spec.input_dim; ++j) {
            const auto row = fourier_features(x[j], map);
            for (std::size_t k = 0; k < row.size(); ++k) {
                z(j * static_cast<Eigen::Index>(row.size()) + static_cast<Eigen::Index>(k)) = row[k];
            }
        }
    } else {
        for (int j = 0; j < spec.input_dim; ++j) {
            z(j) = x[j];
        }
    }

    const auto layers = spec.layer_shapes();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerShape& L = layers[i];
        Eigen::Map<const Eigen::MatrixXd> W(params.data() + L.offset, L.rows, L.cols);
        Eigen::Map<const Eigen::VectorXd> b(params.data() + L.bias_offset(), L.rows);
        Eigen::VectorXd a = W * z + b;
        if (i + 1 < layers.size() && spec.activation == Activation::Tanh) {
            a = a.array().tanh();
        }
        z = std::move(a);
    }

    double u = 0.0;
    if (!spec.impose_boundary) {
        u = z.mean();
    } else {
        const auto factor = boundary_factor(x, spec);
        for (std::size_t k = 0; k < factor.size(); ++k) {
            u += factor[k] * z(static_cast<Eigen::Index>(k));
        }
        if (spec.kind == ArchitectureKind::FourierSine) {
            u /= static_cast<double>(spec.num_wavenumbers);
        }
    }
    if (lift != nullptr) {
        u += lift->value(x);
    }
    return u;
}

Points midpoint_grid(int dim, int per_axis, double length)
{
    if (dim < 1 || dim > kMaxDim || per_axis < 1) {
        throw Error("midpoint grid needs dim in {1,2} and at least one cell per axis");
    }
    const double h = length / per_axis;
    if (dim == 1) {
        Points pts(1, per_axis);
        for (int i = 0; i < per_axis; ++i) {
            pts(0, i) = (i + 0.5) * h;
        }
        return pts;
    }
    Points pts(2, static_cast<Eigen::Index>(per_axis) * per_axis);
    for (int iy = 0; iy < per_axis; ++iy) {
        for (int ix = 0; ix < per_axis; ++ix) {
            const Eigen::Index p = static_cast<Eigen::Index>(iy) * per_axis + ix;
            pts(0, p) = (ix + 0.5) * h;
            pts(1, p) = (iy + 0.5) * h;
        }
    }
    return pts;
}

} // namespace mlnn
