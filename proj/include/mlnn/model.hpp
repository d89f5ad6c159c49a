#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mlnn/types.hpp"

namespace mlnn {

/// How inputs are mapped and how the boundary condition is imposed.
///
///  - PlainG:      z0 = x,               u = g(x) * z_out
///  - FourierG:    z0 = [gamma(x_j)]_j,  u = g(x) * z_out
///  - FourierSine: z0 = [gamma(x_j)]_j,  u = (1/M) sum_m prod_j sin(w_m x_j) z_out[m]
///
/// with g(x) = prod_j x_j (l - x_j).
enum class ArchitectureKind { PlainG, FourierG, FourierSine };

enum class Activation { Tanh, Identity };

std::string_view to_string(ArchitectureKind kind);
ArchitectureKind parse_architecture(std::string_view text);

/// One dense layer inside the flat parameter vector. The weight block is
/// stored column-major (rows x cols) and is followed by `rows` biases.
struct LayerShape {
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;

    [[nodiscard]] std::size_t weight_count() const { return static_cast<std::size_t>(rows) * cols; }
    [[nodiscard]] std::size_t bias_offset() const { return offset + weight_count(); }
    [[nodiscard]] std::size_t end() const { return bias_offset() + rows; }
};

struct NetworkSpec {
    int input_dim = 1;
    std::vector<int> hidden_widths{20};
    int num_wavenumbers = 0;
    double domain_length = 1.0;
    ArchitectureKind kind = ArchitectureKind::PlainG;
    Activation activation = Activation::Tanh;
    /// Test hook: when false the boundary factor is replaced by 1.
    bool impose_boundary = true;

    /// Throws mlnn::Error when the description is inconsistent.
    void validate() const;

    [[nodiscard]] bool uses_fourier_input() const { return kind != ArchitectureKind::PlainG; }
    [[nodiscard]] int input_width() const;
    [[nodiscard]] int output_width() const;
    [[nodiscard]] std::vector<LayerShape> layer_shapes() const;
    [[nodiscard]] std::size_t param_count() const;
};

/// Flat weights and biases of a network. The length is fixed at creation.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(Eigen::Index size) : values_(Eigen::VectorXd::Zero(size)) {}
    explicit ParamVector(Eigen::VectorXd values) : values_(std::move(values)) {}

    [[nodiscard]] Eigen::Index size() const { return values_.size(); }
    [[nodiscard]] const Eigen::VectorXd& values() const { return values_; }
    /// Mutable view; the length cannot change through it.
    [[nodiscard]] Eigen::Ref<Eigen::VectorXd> mutable_values() { return values_; }
    [[nodiscard]] double operator[](Eigen::Index i) const { return values_[i]; }
    [[nodiscard]] double& operator[](Eigen::Index i) { return values_[i]; }
    [[nodiscard]] const double* data() const { return values_.data(); }

    [[nodiscard]] bool all_finite() const { return values_.allFinite(); }
    bool operator==(const ParamVector& other) const
    {
        return values_.size() == other.values_.size() && values_ == other.values_;
    }

private:
    Eigen::VectorXd values_;
};

struct FourierMap {
    std::vector<double> omegas;

    [[nodiscard]] int size() const { return static_cast<int>(omegas.size()); }
};

/// Wave numbers 2^(m-1) pi / length for m = 1..count.
FourierMap geometric_wavenumbers(int count, double length);

/// [cos(w_1 x) .. cos(w_M x), sin(w_1 x) .. sin(w_M x)].
std::vector<double> fourier_features(double coordinate, const FourierMap& map);

/// Scalar g(x) for the g-architectures, or the M products prod_j sin(w_m x_j)
/// for FourierSine (without the 1/M normalisation applied by the trial).
std::vector<double> boundary_factor(PointRef x, const NetworkSpec& spec);

/// Uniform Xavier weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ParamVector xavier_init(const NetworkSpec& spec, std::uint64_t seed);

/// Network trial function at x, plus the lift when one is given.
double trial_value(const NetworkSpec& spec, const ParamVector& params, PointRef x,
                   const AffineLift* lift = nullptr);

/// Small deterministic generator used for every random draw in the library,
/// so that seeded runs reproduce across standard library implementations.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

} // namespace mlnn
