/**
 * The three-layer MLP router.
 *
 *   o = W3 relu(W2 relu(W1 x + b1) + b2) + b3,     w = softmax(o)
 *
 * Training targets are multi-hot correctness masks; the loss is the mean
 * over the batch of the summed element-wise sigmoid binary cross-entropy of
 * the logits. Gradients are computed by hand and applied with Adam once per
 * mini-batch.
 *
 * Weight matrices are stored input-major (element [j][i] connects input j to
 * output i) and activations sample-major, so that every inner loop of the
 * forward and backward passes is a contiguous axpy. The summation order is
 * fixed, which keeps results bit-reproducible.
 */

#ifndef DRIFTMOE_ROUTER_HPP
#define DRIFTMOE_ROUTER_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "driftmoe/rng.hpp"
#include "driftmoe/stream.hpp"

namespace driftmoe {

/// Non-finite values reached the optimiser or the forward pass.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RouterConfig {
    std::size_t input_dim = 0;
    std::size_t num_experts = 0;
    std::size_t hidden1 = 128;
    std::size_t hidden2 = 128;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 4;
    /// Train on the logits/activations cached at prediction time instead of
    /// recomputing the forward pass with the current parameters at flush.
    bool stale_logits = false;

    void validate() const;
};

struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    bool operator==(const LayerShape&) const = default;
};

/// All router parameters in one flat buffer: W1, b1, W2, b2, W3, b3.
class RouterParams {
public:
    static constexpr std::size_t kLayers = 3;

    RouterParams() = default;
    RouterParams(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2, std::size_t num_experts);

    const LayerShape& shape(std::size_t layer) const { return shapes_[layer]; }
    std::size_t input_dim() const { return shapes_[0].in; }
    std::size_t output_dim() const { return shapes_[2].out; }

    std::span<double> weights(std::size_t layer);
    std::span<const double> weights(std::size_t layer) const;
    std::span<double> biases(std::size_t layer);
    std::span<const double> biases(std::size_t layer) const;

    double& weight(std::size_t layer, std::size_t in, std::size_t out) {
        return data_[weight_offset_[layer] + in * shapes_[layer].out + out];
    }
    double weight(std::size_t layer, std::size_t in, std::size_t out) const {
        return data_[weight_offset_[layer] + in * shapes_[layer].out + out];
    }

    std::vector<double>& flat() { return data_; }
    const std::vector<double>& flat() const { return data_; }
    std::size_t size() const { return data_.size(); }

    /// Uniform He fan-in initialisation of the weights; biases zero.
    void init_he_uniform(Rng& rng);
    bool all_finite() const;

    /// Shape header followed by little-endian doubles.
    void save(std::ostream& out) const;
    static RouterParams load(std::istream& in);

    bool operator==(const RouterParams&) const = default;

private:
    std::array<LayerShape, kLayers> shapes_{};
    std::array<std::size_t, kLayers> weight_offset_{};
    std::array<std::size_t, kLayers> bias_offset_{};
    std::vector<double> data_;
};

/// Layer inputs and outputs of a forward pass over `batch` samples, all
/// sample-major.
struct ForwardCache {
    std::size_t batch = 0;
    std::vector<double> input;   // batch x d
    std::vector<double> pre1;    // batch x h1
    std::vector<double> act1;
    std::vector<double> pre2;    // batch x h2
    std::vector<double> act2;
    std::vector<double> logits;  // batch x K

    std::span<const double> logits_of(std::size_t n, std::size_t k) const {
        return std::span<const double>(logits).subspan(n * k, k);
    }
};

/// Forward pass over a sample-major batch of inputs. Throws NumericalError
/// on non-finite input.
ForwardCache forward(const RouterParams& params, std::span<const double> inputs, std::size_t batch);
/// forward() into an existing cache, reusing its storage.
void forward_into(const RouterParams& params, std::span<const double> inputs, std::size_t batch, ForwardCache& c);

/// Softmax gate with max subtraction.
std::vector<double> gate(std::span<const double> logits);
void gate(std::span<const double> logits, std::span<double> out);

/// Element-wise logistic function.
double sigmoid(double x) noexcept;

/// Mean-over-batch summed binary cross-entropy of logits against masks, in
/// the stable form max(o,0) - o m + log(1 + exp(-|o|)).
double bce_loss(std::span<const double> logits, std::span<const double> masks, std::size_t batch);

/// Gradient of bce_loss with respect to every parameter, laid out like
/// RouterParams::flat(). Masks are sample-major (batch x K).
std::vector<double> backward(const RouterParams& params, const ForwardCache& cache, std::span<const double> masks);

/// Scratch buffers reused across backward passes.
struct BackwardWorkspace {
    std::vector<double> delta3;
    std::vector<double> delta2;
    std::vector<double> delta1;
    std::vector<double> transposed;
};

/// backward() writing into `grad` (resized and overwritten) and reusing `ws`.
void backward_into(const RouterParams& params, const ForwardCache& cache, std::span<const double> masks,
                   std::vector<double>& grad, BackwardWorkspace& ws);

class AdamState {
public:
    AdamState() = default;
    AdamState(std::size_t num_params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
              double epsilon = 1e-8);

    /// One bias-corrected Adam update. Throws NumericalError (leaving params
    /// and moments untouched) when a gradient is not finite.
    void step(std::span<double> params, std::span<const double> grads);

    std::uint64_t steps() const { return t_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }
    double learning_rate() const { return lr_; }

    void save(std::ostream& out) const;
    static AdamState load(std::istream& in);

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::uint64_t t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

/// Router parameters, optimiser state and the pending mini-batch.
class Router {
public:
    Router() = default;
    Router(RouterConfig config, std::uint64_t seed);

    const RouterConfig& config() const { return config_; }
    std::size_t num_experts() const { return config_.num_experts; }

    /// Logits for one input. If `cache` is given it receives the activations.
    std::vector<double> logits(std::span<const double> x, ForwardCache* cache = nullptr) const;
    std::vector<double> weights(std::span<const double> x) const;

    /// Buffers (x, mask). Performs one Adam step and clears the buffer when
    /// it reaches batch_size; returns true if a step was taken. In
    /// stale-logit mode `prediction_cache` must hold the forward pass made
    /// for x at prediction time.
    bool observe(std::span<const double> x, std::span<const std::uint8_t> mask,
                 const ForwardCache* prediction_cache = nullptr);

    /// Trains on any partially filled batch. Returns true if a step was taken.
    bool finalize();

    std::size_t pending() const { return pending_; }
    std::uint64_t steps() const { return adam_.steps(); }
    double last_loss() const { return last_loss_; }

    RouterParams& params() { return params_; }
    const RouterParams& params() const { return params_; }
    const AdamState& optimizer() const { return adam_; }

    /// Full state (config, params, Adam moments, pending batch).
    void save(std::ostream& out) const;
    static Router load(std::istream& in);

private:
    void flush();

    RouterConfig config_;
    RouterParams params_;
    AdamState adam_;
    std::vector<double> inputs_;  // pending inputs, sample-major
    std::vector<double> masks_;   // pending masks, sample-major
    ForwardCache stale_;          // pending prediction-time activations
    ForwardCache work_;
    BackwardWorkspace workspace_;
    std::vector<double> grad_;
    std::size_t pending_ = 0;
    double last_loss_ = 0.0;
};

}  // namespace driftmoe

#endif  // DRIFTMOE_ROUTER_HPP
