#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace twinforge::neural {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Affine map; weights are (out x in).
struct Layer {
    Matrix weights;
    Vector bias;
};

// Fully connected network, rectifier on hidden layers, identity output.
class Network {
public:
    Network() = default;
    explicit Network(std::vector<Layer> layers);

    std::vector<int> dims() const;
    int input_dim() const;
    int output_dim() const;
    std::size_t parameter_count() const;

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    bool same_topology(const Network& other) const;

private:
    std::vector<Layer> layers_;
};

// Shape-congruent with the Network it was produced for.
struct GradientSet {
    std::vector<Layer> layers;

    bool all_finite() const;
};

// Closed-form Σ(d_i·d_{i+1} + d_{i+1}).
std::size_t parameter_count(std::span<const int> dims);

// Weights ~ U(-b, b), b = sqrt(6 / (fan_in + fan_out)); zero biases.
Network init_network(std::span<const int> dims, std::uint64_t seed);

Vector forward(const Network& net, const Vector& input);

// Column-per-sample batch evaluation.
Matrix forward_batch(const Network& net, const Matrix& inputs);

// Post-activation values of every layer; activations.front() is the input.
struct ForwardTrace {
    std::vector<Matrix> activations;
};

ForwardTrace forward_trace(const Network& net, const Matrix& inputs);
// Reuses the storage already held by `trace`.
void forward_trace(const Network& net, const Matrix& inputs, ForwardTrace& trace);

// Gradient of Σ_columns <output, output_grad> w.r.t. every parameter.
GradientSet backward(const Network& net, const ForwardTrace& trace, const Matrix& output_grad);
GradientSet backward(const Network& net, const Vector& input, const Vector& output_grad);

// Allocation-free variant for training loops; `grads` and `scratch` keep
// their storage between calls.
void backward(const Network& net, const ForwardTrace& trace, const Matrix& output_grad,
              GradientSet& grads, std::vector<Matrix>& scratch);

enum class StepDirection { ascend, descend };

// θ ← θ ± lr·g. Throws NumericError (leaving `net` untouched) on a
// non-finite gradient.
void param_step(Network& net, const GradientSet& grads, double lr, StepDirection direction);

// Heavy-ball variant: v ← μ·v + g, then θ ← θ ± lr·v. `velocity` starts
// empty and is sized on first use.
void momentum_step(Network& net, const GradientSet& grads, double lr, double momentum,
                   GradientSet& velocity, StepDirection direction);

// Scalar loss of the network output, with its gradient.
struct OutputLoss {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
};

struct GradCheckOptions {
    double step = 1e-5;
    std::size_t max_params = 0;  // 0 checks every parameter
    double abs_floor = 1e-7;     // below this both sides count as zero
};

// Worst relative error between `analytic` and central finite differences of
// loss(forward(net, input)) over the checked parameters.
double finite_difference_error(const Network& net, const Vector& input, const OutputLoss& loss,
                               const GradientSet& analytic, const GradCheckOptions& opts = {});

double grad_check(const Network& net, const Vector& input, const OutputLoss& loss,
                  const GradCheckOptions& opts = {});

// Versioned little-endian snapshot: "TWNN", u32 version, u32 layer-dim
// count, u32 dims, then per layer row-major f64 weights followed by biases.
void save_snapshot(const Network& net, std::ostream& out);
Network load_snapshot(std::istream& in);
std::string snapshot_bytes(const Network& net);

}  // namespace twinforge::neural
