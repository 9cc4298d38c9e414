#include "twinforge/neural.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "twinforge/errors.hpp"
#include "twinforge/random.hpp"

namespace twinforge::neural {

namespace {

constexpr std::array<char, 4> kMagic{'T', 'W', 'N', 'N'};
constexpr std::uint32_t kSnapshotVersion = 1;

void check_dims(std::span<const int> dims) {
    if (dims.size() < 2) {
        throw DomainError("network needs at least an input and an output dimension");
    }
    for (int d : dims) {
        if (d < 1) throw DomainError("layer dimensions must be >= 1");
    }
}

void apply_rectifier(Matrix& m) { m = m.cwiseMax(0.0); }

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
    if (!in) throw DomainError("network snapshot truncated");
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

// Flat view over parameter i of a layer list: weights row-major, then bias.
double& param_ref(std::vector<Layer>& layers, std::size_t index) {
    for (auto& layer : layers) {
        const auto w = static_cast<std::size_t>(layer.weights.size());
        if (index < w) {
            const auto cols = static_cast<std::size_t>(layer.weights.cols());
            return layer.weights(static_cast<Eigen::Index>(index / cols),
                                 static_cast<Eigen::Index>(index % cols));
        }
        index -= w;
        const auto b = static_cast<std::size_t>(layer.bias.size());
        if (index < b) return layer.bias(static_cast<Eigen::Index>(index));
        index -= b;
    }
    throw DomainError("parameter index out of range");
}

}  // namespace

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DomainError("network needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.weights.rows() != l.bias.size()) {
            throw DomainError("layer bias length does not match weight rows");
        }
        if (i > 0 && l.weights.cols() != layers_[i - 1].weights.rows()) {
            throw DomainError("consecutive layer dimensions disagree");
        }
    }
}

std::vector<int> Network::dims() const {
    std::vector<int> d;
    if (layers_.empty()) return d;
    d.push_back(static_cast<int>(layers_.front().weights.cols()));
    for (const auto& l : layers_) d.push_back(static_cast<int>(l.weights.rows()));
    return d;
}

int Network::input_dim() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.front().weights.cols());
}

int Network::output_dim() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.back().weights.rows());
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

bool Network::same_topology(const Network& other) const { return dims() == other.dims(); }

bool GradientSet::all_finite() const {
    for (const auto& l : layers) {
        if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
}

std::size_t parameter_count(std::span<const int> dims) {
    check_dims(dims);
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        n += static_cast<std::size_t>(dims[i]) * static_cast<std::size_t>(dims[i + 1]) +
             static_cast<std::size_t>(dims[i + 1]);
    }
    return n;
}

Network init_network(std::span<const int> dims, std::uint64_t seed) {
    check_dims(dims);
    RandomStream rng(seed);
    std::vector<Layer> layers;
    layers.reserve(dims.size() - 1);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const int fan_in = dims[i];
        const int fan_out = dims[i + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
        // Row-major draw order keeps the layout independent of Eigen storage.
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) layer.weights(r, c) = dist(rng);
        }
        layers.push_back(std::move(layer));
    }
    return Network(std::move(layers));
}

Vector forward(const Network& net, const Vector& input) {
    if (input.size() != net.input_dim()) {
        throw DomainError("forward: input length " + std::to_string(input.size()) +
                          " != network input " + std::to_string(net.input_dim()));
    }
    Vector a = input;
    const auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Vector z = layers[i].weights * a + layers[i].bias;
        if (i + 1 < layers.size()) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

Matrix forward_batch(const Network& net, const Matrix& inputs) {
    if (inputs.rows() != net.input_dim()) {
        throw DomainError("forward_batch: input rows do not match network input");
    }
    Matrix a = inputs;
    const auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Matrix z = layers[i].weights * a;
        z.colwise() += layers[i].bias;
        if (i + 1 < layers.size()) apply_rectifier(z);
        a = std::move(z);
    }
    return a;
}

ForwardTrace forward_trace(const Network& net, const Matrix& inputs) {
    ForwardTrace trace;
    forward_trace(net, inputs, trace);
    return trace;
}

void forward_trace(const Network& net, const Matrix& inputs, ForwardTrace& trace) {
    if (inputs.rows() != net.input_dim()) {
        throw DomainError("forward_trace: input rows do not match network input");
    }
    const auto& layers = net.layers();
    trace.activations.resize(layers.size() + 1);
    trace.activations[0] = inputs;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Matrix& z = trace.activations[i + 1];
        z.resize(layers[i].weights.rows(), inputs.cols());
        z.noalias() = layers[i].weights * trace.activations[i];
        z.colwise() += layers[i].bias;
        if (i + 1 < layers.size()) z = z.cwiseMax(0.0);
    }
}

GradientSet backward(const Network& net, const ForwardTrace& trace, const Matrix& output_grad) {
    GradientSet grads;
    std::vector<Matrix> scratch;
    backward(net, trace, output_grad, grads, scratch);
    return grads;
}

void backward(const Network& net, const ForwardTrace& trace, const Matrix& output_grad,
              GradientSet& grads, std::vector<Matrix>& scratch) {
    const auto& layers = net.layers();
    if (trace.activations.size() != layers.size() + 1) {
        throw DomainError("backward: trace does not belong to this network");
    }
    if (output_grad.rows() != net.output_dim() ||
        output_grad.cols() != trace.activations.front().cols()) {
        throw DomainError("backward: output gradient shape mismatch");
    }
    grads.layers.resize(layers.size());
    scratch.resize(layers.size());
    // scratch[i] holds d(loss)/d(pre-activation of layer i).
    scratch.back() = output_grad;
    for (std::size_t i = layers.size(); i-- > 0;) {
        const Matrix& a_in = trace.activations[i];
        const Matrix& delta = scratch[i];
        auto& g = grads.layers[i];
        g.weights.resize(layers[i].weights.rows(), layers[i].weights.cols());
        g.weights.noalias() = delta * a_in.transpose();
        g.bias = delta.rowwise().sum();
        if (i == 0) break;
        Matrix& below = scratch[i - 1];
        below.resize(layers[i].weights.cols(), delta.cols());
        below.noalias() = layers[i].weights.transpose() * delta;
        // Rectifier derivative: 1 where the hidden unit was active.
        below.array() *= (a_in.array() > 0.0).cast<double>();
    }
}

GradientSet backward(const Network& net, const Vector& input, const Vector& output_grad) {
    if (input.size() != net.input_dim() || output_grad.size() != net.output_dim()) {
        throw DomainError("backward: input/output gradient length mismatch");
    }
    const ForwardTrace trace = forward_trace(net, Matrix(input));
    return backward(net, trace, Matrix(output_grad));
}

void param_step(Network& net, const GradientSet& grads, double lr, StepDirection direction) {
    auto& layers = net.layers();
    if (grads.layers.size() != layers.size()) {
        throw DomainError("param_step: gradient layer count mismatch");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (grads.layers[i].weights.rows() != layers[i].weights.rows() ||
            grads.layers[i].weights.cols() != layers[i].weights.cols() ||
            grads.layers[i].bias.size() != layers[i].bias.size()) {
            throw DomainError("param_step: gradient shape mismatch at layer " + std::to_string(i));
        }
    }
    if (!grads.all_finite()) {
        throw NumericError("param_step: non-finite gradient, step refused");
    }
    const double signed_lr = direction == StepDirection::ascend ? lr : -lr;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].weights.noalias() += signed_lr * grads.layers[i].weights;
        layers[i].bias.noalias() += signed_lr * grads.layers[i].bias;
    }
}

void momentum_step(Network& net, const GradientSet& grads, double lr, double momentum,
                   GradientSet& velocity, StepDirection direction) {
    if (!grads.all_finite()) {
        throw NumericError("momentum_step: non-finite gradient, step refused");
    }
    if (velocity.layers.size() != grads.layers.size()) {
        velocity = grads;
        for (auto& l : velocity.layers) {
            l.weights.setZero();
            l.bias.setZero();
        }
    }
    for (std::size_t i = 0; i < grads.layers.size(); ++i) {
        velocity.layers[i].weights = momentum * velocity.layers[i].weights + grads.layers[i].weights;
        velocity.layers[i].bias = momentum * velocity.layers[i].bias + grads.layers[i].bias;
    }
    param_step(net, velocity, lr, direction);
}

double finite_difference_error(const Network& net, const Vector& input, const OutputLoss& loss,
                               const GradientSet& analytic, const GradCheckOptions& opts) {
    Network probe = net;
    auto analytic_layers = analytic.layers;
    const std::size_t total = probe.parameter_count();
    const std::size_t stride =
        (opts.max_params == 0 || opts.max_params >= total) ? 1 : total / opts.max_params;
    double worst = 0.0;
    for (std::size_t p = 0; p < total; p += stride) {
        double& theta = param_ref(probe.layers(), p);
        const double saved = theta;
        theta = saved + opts.step;
        const double up = loss.value(forward(probe, input));
        theta = saved - opts.step;
        const double down = loss.value(forward(probe, input));
        theta = saved;
        const double numeric = (up - down) / (2.0 * opts.step);
        const double exact = param_ref(analytic_layers, p);
        const double scale = std::max({std::abs(numeric), std::abs(exact), opts.abs_floor});
        if (std::max(std::abs(numeric), std::abs(exact)) < opts.abs_floor) continue;
        worst = std::max(worst, std::abs(numeric - exact) / scale);
    }
    return worst;
}

double grad_check(const Network& net, const Vector& input, const OutputLoss& loss,
                  const GradCheckOptions& opts) {
    const Vector out = forward(net, input);
    const GradientSet analytic = backward(net, input, loss.gradient(out));
    return finite_difference_error(net, input, loss, analytic, opts);
}

void save_snapshot(const Network& net, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kSnapshotVersion);
    const auto dims = net.dims();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (const auto& l : net.layers()) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put_le<double>(out, l.weights(r, c));
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_le<double>(out, l.bias(r));
    }
    if (!out) throw std::runtime_error("failed writing network snapshot");
}

Network load_snapshot(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw DomainError("not a network snapshot (bad magic)");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kSnapshotVersion) {
        throw DomainError("unsupported snapshot version " + std::to_string(version));
    }
    const auto n = get_le<std::uint32_t>(in);
    if (n < 2 || n > 64) throw DomainError("snapshot has implausible layer count");
    std::vector<int> dims(n);
    for (auto& d : dims) d = static_cast<int>(get_le<std::uint32_t>(in));
    check_dims(dims);
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer l{Matrix(dims[i + 1], dims[i]), Vector(dims[i + 1])};
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = get_le<double>(in);
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = get_le<double>(in);
        layers.push_back(std::move(l));
    }
    return Network(std::move(layers));
}

std::string snapshot_bytes(const Network& net) {
    std::ostringstream out(std::ios::binary);
    save_snapshot(net, out);
    return out.str();
}

}  // namespace twinforge::neural
