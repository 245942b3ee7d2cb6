#include "driftmoe/router.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "driftmoe/binary_io.hpp"
#include "driftmoe/stream.hpp"

namespace driftmoe {

namespace {

constexpr std::uint64_t kParamsMagic = 0x315241505452444DULL;  // "MDRTPAR1"
constexpr std::uint64_t kRouterMagic = 0x3154554F52524D44ULL;  // "DMRROUT1"
constexpr std::uint64_t kAdamMagic = 0x314D414441524D44ULL;    // "DMRADAM1"
constexpr double kMomentFloor = 1e-200;
constexpr std::uint64_t kExponentMask = 0x7FF0000000000000ULL;

/// out[n][i] = bias[i] + sum_j in[n][j] * w[j][i], relu applied into act when given.
void dense_forward(const double* __restrict in, std::size_t batch, const LayerShape& shape, const double* __restrict w,
                   const double* __restrict bias, double* __restrict out) {
    for (std::size_t n = 0; n < batch; ++n) {
        double* o = out + n * shape.out;
        std::copy(bias, bias + shape.out, o);
        const double* x = in + n * shape.in;
        for (std::size_t j = 0; j < shape.in; ++j) {
            const double xj = x[j];
            if (xj == 0.0) continue;
            const double* row = w + j * shape.out;
            for (std::size_t i = 0; i < shape.out; ++i) o[i] += xj * row[i];
        }
    }
}

void relu(const std::vector<double>& pre, std::vector<double>& act) {
    act.resize(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) act[i] = pre[i] > 0.0 ? pre[i] : 0.0;
}

/// grad_w[j][i] += sum_n in[n][j] * delta[n][i]; grad_b[i] += sum_n delta[n][i].
void dense_weight_grad(const double* __restrict in, const double* __restrict delta, std::size_t batch,
                       const LayerShape& shape, double* __restrict grad_w, double* __restrict grad_b) {
    for (std::size_t n = 0; n < batch; ++n) {
        const double* d = delta + n * shape.out;
        const double* x = in + n * shape.in;
        for (std::size_t i = 0; i < shape.out; ++i) grad_b[i] += d[i];
        for (std::size_t j = 0; j < shape.in; ++j) {
            const double xj = x[j];
            if (xj == 0.0) continue;
            double* g = grad_w + j * shape.out;
            for (std::size_t i = 0; i < shape.out; ++i) g[i] += xj * d[i];
        }
    }
}

/// delta_in[n][j] = relu'(pre[n][j]) * sum_i w[j][i] * delta[n][i], using a
/// transposed copy of w so the inner loop is contiguous.
void dense_input_grad(const double* __restrict w, const double* __restrict delta, const double* __restrict pre,
                      std::size_t batch, const LayerShape& shape, std::vector<double>& delta_in,
                      std::vector<double>& wt) {
    wt.resize(shape.in * shape.out);
    for (std::size_t j = 0; j < shape.in; ++j) {
        for (std::size_t i = 0; i < shape.out; ++i) wt[i * shape.in + j] = w[j * shape.out + i];
    }
    delta_in.assign(batch * shape.in, 0.0);
    for (std::size_t n = 0; n < batch; ++n) {
        double* out = delta_in.data() + n * shape.in;
        const double* d = delta + n * shape.out;
        for (std::size_t i = 0; i < shape.out; ++i) {
            const double di = d[i];
            if (di == 0.0) continue;
            const double* col = wt.data() + i * shape.in;
            for (std::size_t j = 0; j < shape.in; ++j) out[j] += di * col[j];
        }
        const double* p = pre + n * shape.in;
        for (std::size_t j = 0; j < shape.in; ++j) {
            if (!(p[j] > 0.0)) out[j] = 0.0;
        }
    }
}

}  // namespace

void RouterConfig::validate() const {
    if (input_dim == 0) throw ConfigError("router: input_dim must be > 0");
    if (num_experts == 0) throw ConfigError("router: num_experts must be > 0");
    if (hidden1 == 0 || hidden2 == 0) throw ConfigError("router: hidden sizes must be > 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("router: learning_rate must be > 0");
    if (batch_size == 0) throw ConfigError("router: batch_size must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("router: bad Adam betas");
}

// ------------------------------------------------------------ RouterParams

RouterParams::RouterParams(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2, std::size_t num_experts)
    : shapes_{{{input_dim, hidden1}, {hidden1, hidden2}, {hidden2, num_experts}}} {
    std::size_t offset = 0;
    for (std::size_t l = 0; l < kLayers; ++l) {
        weight_offset_[l] = offset;
        offset += shapes_[l].in * shapes_[l].out;
        bias_offset_[l] = offset;
        offset += shapes_[l].out;
    }
    data_.assign(offset, 0.0);
}

std::span<double> RouterParams::weights(std::size_t layer) {
    return std::span<double>(data_).subspan(weight_offset_[layer], shapes_[layer].in * shapes_[layer].out);
}
std::span<const double> RouterParams::weights(std::size_t layer) const {
    return std::span<const double>(data_).subspan(weight_offset_[layer], shapes_[layer].in * shapes_[layer].out);
}
std::span<double> RouterParams::biases(std::size_t layer) {
    return std::span<double>(data_).subspan(bias_offset_[layer], shapes_[layer].out);
}
std::span<const double> RouterParams::biases(std::size_t layer) const {
    return std::span<const double>(data_).subspan(bias_offset_[layer], shapes_[layer].out);
}

void RouterParams::init_he_uniform(Rng& rng) {
    for (std::size_t l = 0; l < kLayers; ++l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(shapes_[l].in));
        for (double& w : weights(l)) w = (2.0 * rng.uniform() - 1.0) * limit;
        for (double& b : biases(l)) b = 0.0;
    }
}

bool RouterParams::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void RouterParams::save(std::ostream& out) const {
    binio::write_u64(out, kParamsMagic);
    binio::write_u64(out, kLayers);
    for (const auto& s : shapes_) {
        binio::write_u64(out, s.in);
        binio::write_u64(out, s.out);
    }
    for (double v : data_) binio::write_f64(out, v);
}

RouterParams RouterParams::load(std::istream& in) {
    binio::expect_magic(in, kParamsMagic, "router params");
    if (binio::read_u64(in) != kLayers) throw std::runtime_error("router params: expected 3 layers");
    std::array<LayerShape, kLayers> s{};
    for (auto& shape : s) {
        shape.in = binio::read_u64(in);
        shape.out = binio::read_u64(in);
        if (shape.in == 0 || shape.out == 0 || shape.in > (1u << 20) || shape.out > (1u << 20)) {
            throw std::runtime_error("router params: implausible layer shape");
        }
    }
    if (s[1].in != s[0].out || s[2].in != s[1].out) throw std::runtime_error("router params: inconsistent shapes");
    RouterParams p(s[0].in, s[0].out, s[1].out, s[2].out);
    for (double& v : p.data_) v = binio::read_f64(in);
    return p;
}

// ---------------------------------------------------------------- passes

void forward_into(const RouterParams& params, std::span<const double> inputs, std::size_t batch, ForwardCache& c) {
    const std::size_t d = params.input_dim();
    if (inputs.size() != batch * d) throw std::invalid_argument("router forward: input size mismatch");
    for (double v : inputs) {
        if (!std::isfinite(v)) throw NumericalError("router forward: non-finite input");
    }
    c.batch = batch;
    c.input.assign(inputs.begin(), inputs.end());
    const auto& s0 = params.shape(0);
    const auto& s1 = params.shape(1);
    const auto& s2 = params.shape(2);
    c.pre1.resize(batch * s0.out);
    dense_forward(c.input.data(), batch, s0, params.weights(0).data(), params.biases(0).data(), c.pre1.data());
    relu(c.pre1, c.act1);
    c.pre2.resize(batch * s1.out);
    dense_forward(c.act1.data(), batch, s1, params.weights(1).data(), params.biases(1).data(), c.pre2.data());
    relu(c.pre2, c.act2);
    c.logits.resize(batch * s2.out);
    dense_forward(c.act2.data(), batch, s2, params.weights(2).data(), params.biases(2).data(), c.logits.data());
}

ForwardCache forward(const RouterParams& params, std::span<const double> inputs, std::size_t batch) {
    ForwardCache c;
    forward_into(params, inputs, batch, c);
    return c;
}

void gate(std::span<const double> logits, std::span<double> out) {
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        sum += out[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

std::vector<double> gate(std::span<const double> logits) {
    std::vector<double> w(logits.size());
    gate(logits, w);
    return w;
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double bce_loss(std::span<const double> logits, std::span<const double> masks, std::size_t batch) {
    if (batch == 0 || logits.size() != masks.size() || logits.size() % batch != 0) {
        throw std::invalid_argument("bce_loss: shape mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double o = logits[i];
        total += std::max(o, 0.0) - o * masks[i] + std::log1p(std::exp(-std::abs(o)));
    }
    return total / static_cast<double>(batch);
}

void backward_into(const RouterParams& params, const ForwardCache& cache, std::span<const double> masks,
                   std::vector<double>& grad, BackwardWorkspace& ws) {
    const std::size_t B = cache.batch;
    const auto& s0 = params.shape(0);
    const auto& s1 = params.shape(1);
    const auto& s2 = params.shape(2);
    if (masks.size() != B * s2.out) throw std::invalid_argument("router backward: mask size mismatch");

    // Same layout as RouterParams::flat(): W1 b1 W2 b2 W3 b3.
    grad.assign(params.size(), 0.0);
    const std::size_t w1 = 0, b1 = w1 + s0.in * s0.out, w2 = b1 + s0.out, b2 = w2 + s1.in * s1.out,
                      w3 = b2 + s1.out, b3 = w3 + s2.in * s2.out;

    const double inv_b = 1.0 / static_cast<double>(B);
    ws.delta3.resize(B * s2.out);
    for (std::size_t i = 0; i < ws.delta3.size(); ++i) ws.delta3[i] = (sigmoid(cache.logits[i]) - masks[i]) * inv_b;
    dense_weight_grad(cache.act2.data(), ws.delta3.data(), B, s2, grad.data() + w3, grad.data() + b3);

    dense_input_grad(params.weights(2).data(), ws.delta3.data(), cache.pre2.data(), B, s2, ws.delta2, ws.transposed);
    dense_weight_grad(cache.act1.data(), ws.delta2.data(), B, s1, grad.data() + w2, grad.data() + b2);

    dense_input_grad(params.weights(1).data(), ws.delta2.data(), cache.pre1.data(), B, s1, ws.delta1, ws.transposed);
    dense_weight_grad(cache.input.data(), ws.delta1.data(), B, s0, grad.data() + w1, grad.data() + b1);
}

std::vector<double> backward(const RouterParams& params, const ForwardCache& cache, std::span<const double> masks) {
    std::vector<double> grad;
    BackwardWorkspace ws;
    backward_into(params, cache, masks, grad, ws);
    return grad;
}

// ------------------------------------------------------------ AdamState

AdamState::AdamState(std::size_t num_params, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(num_params, 0.0), v_(num_params, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw std::invalid_argument("adam: shape mismatch");
    }
    // An all-ones exponent field marks infinity or NaN.
    std::uint64_t non_finite = 0;
    for (double g : grads) non_finite |= (~std::bit_cast<std::uint64_t>(g) & kExponentMask) == 0;
    if (non_finite) throw NumericalError("adam: non-finite gradient, update rejected");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const double inv_bc1 = 1.0 / bc1, inv_bc2 = 1.0 / bc2;
    const double b1 = beta1_, b2 = beta2_, lr = lr_, eps = eps_;
    double* __restrict theta = params.data();
    double* __restrict m = m_.data();
    double* __restrict v = v_.data();
    const double* __restrict g = grads.data();
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const double mi = b1 * m[i] + (1.0 - b1) * g[i];
        const double vi = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        // Moments of parameters whose gradient has stopped decay geometrically
        // into the subnormal range, where arithmetic is very slow. Below the
        // floor they cannot move the parameter, so they are set to zero.
        m[i] = std::abs(mi) < kMomentFloor ? 0.0 : mi;
        v[i] = vi < kMomentFloor ? 0.0 : vi;
        const double m_hat = m[i] * inv_bc1;
        const double v_hat = v[i] * inv_bc2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

void AdamState::save(std::ostream& out) const {
    binio::write_u64(out, kAdamMagic);
    binio::write_f64(out, lr_);
    binio::write_f64(out, beta1_);
    binio::write_f64(out, beta2_);
    binio::write_f64(out, eps_);
    binio::write_u64(out, t_);
    binio::write_u64(out, m_.size());
    for (std::size_t i = 0; i < m_.size(); ++i) {
        binio::write_f64(out, m_[i]);
        binio::write_f64(out, v_[i]);
    }
}

AdamState AdamState::load(std::istream& in) {
    binio::expect_magic(in, kAdamMagic, "adam state");
    AdamState s;
    s.lr_ = binio::read_f64(in);
    s.beta1_ = binio::read_f64(in);
    s.beta2_ = binio::read_f64(in);
    s.eps_ = binio::read_f64(in);
    s.t_ = binio::read_u64(in);
    const auto n = binio::read_u64(in);
    if (n > (1u << 28)) throw std::runtime_error("adam state: implausible size");
    s.m_.resize(n);
    s.v_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.m_[i] = binio::read_f64(in);
        s.v_[i] = binio::read_f64(in);
    }
    return s;
}

// ---------------------------------------------------------------- Router

Router::Router(RouterConfig config, std::uint64_t seed)
    : config_(config), params_(config.input_dim, config.hidden1, config.hidden2, config.num_experts) {
    config_.validate();
    Rng rng(seed);
    params_.init_he_uniform(rng);
    adam_ = AdamState(params_.size(), config_.learning_rate, config_.beta1, config_.beta2, config_.epsilon);
    inputs_.reserve(config_.batch_size * config_.input_dim);
    masks_.reserve(config_.batch_size * config_.num_experts);
}

std::vector<double> Router::logits(std::span<const double> x, ForwardCache* cache) const {
    ForwardCache c = forward(params_, x, 1);
    std::vector<double> out = c.logits;
    if (cache) *cache = std::move(c);
    return out;
}

std::vector<double> Router::weights(std::span<const double> x) const { return gate(logits(x)); }

bool Router::observe(std::span<const double> x, std::span<const std::uint8_t> mask,
                     const ForwardCache* prediction_cache) {
    if (x.size() != config_.input_dim || mask.size() != config_.num_experts) {
        throw std::invalid_argument("router observe: shape mismatch");
    }
    inputs_.insert(inputs_.end(), x.begin(), x.end());
    for (auto m : mask) masks_.push_back(m ? 1.0 : 0.0);
    if (config_.stale_logits) {
        if (!prediction_cache || prediction_cache->batch != 1) {
            throw std::invalid_argument("router observe: stale-logit mode needs the prediction-time cache");
        }
        const auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
            dst.insert(dst.end(), src.begin(), src.end());
        };
        append(stale_.input, prediction_cache->input);
        append(stale_.pre1, prediction_cache->pre1);
        append(stale_.act1, prediction_cache->act1);
        append(stale_.pre2, prediction_cache->pre2);
        append(stale_.act2, prediction_cache->act2);
        append(stale_.logits, prediction_cache->logits);
        ++stale_.batch;
    }
    ++pending_;
    if (pending_ < config_.batch_size) return false;
    flush();
    return true;
}

bool Router::finalize() {
    if (pending_ == 0) return false;
    flush();
    return true;
}

void Router::flush() {
    if (config_.stale_logits) {
        work_ = std::move(stale_);
        stale_ = ForwardCache{};
    } else {
        forward_into(params_, inputs_, pending_, work_);
    }
    last_loss_ = bce_loss(work_.logits, masks_, pending_);
    backward_into(params_, work_, masks_, grad_, workspace_);
    inputs_.clear();
    masks_.clear();
    pending_ = 0;
    adam_.step(params_.flat(), grad_);
}

void Router::save(std::ostream& out) const {
    binio::write_u64(out, kRouterMagic);
    binio::write_u64(out, config_.input_dim);
    binio::write_u64(out, config_.num_experts);
    binio::write_u64(out, config_.hidden1);
    binio::write_u64(out, config_.hidden2);
    binio::write_f64(out, config_.learning_rate);
    binio::write_f64(out, config_.beta1);
    binio::write_f64(out, config_.beta2);
    binio::write_f64(out, config_.epsilon);
    binio::write_u64(out, config_.batch_size);
    binio::write_u64(out, config_.stale_logits ? 1 : 0);
    params_.save(out);
    adam_.save(out);
    binio::write_f64(out, last_loss_);
    binio::write_u64(out, pending_);
    for (double v : inputs_) binio::write_f64(out, v);
    for (double v : masks_) binio::write_f64(out, v);
    if (config_.stale_logits) {
        for (const auto* vec : {&stale_.input, &stale_.pre1, &stale_.act1, &stale_.pre2, &stale_.act2, &stale_.logits}) {
            for (double v : *vec) binio::write_f64(out, v);
        }
    }
}

Router Router::load(std::istream& in) {
    binio::expect_magic(in, kRouterMagic, "router");
    RouterConfig cfg;
    cfg.input_dim = binio::read_u64(in);
    cfg.num_experts = binio::read_u64(in);
    cfg.hidden1 = binio::read_u64(in);
    cfg.hidden2 = binio::read_u64(in);
    cfg.learning_rate = binio::read_f64(in);
    cfg.beta1 = binio::read_f64(in);
    cfg.beta2 = binio::read_f64(in);
    cfg.epsilon = binio::read_f64(in);
    cfg.batch_size = binio::read_u64(in);
    cfg.stale_logits = binio::read_u64(in) != 0;
    cfg.validate();
    Router r;
    r.config_ = cfg;
    r.params_ = RouterParams::load(in);
    if (r.params_.input_dim() != cfg.input_dim || r.params_.output_dim() != cfg.num_experts) {
        throw std::runtime_error("router: parameter shapes disagree with config");
    }
    r.adam_ = AdamState::load(in);
    if (r.adam_.first_moment().size() != r.params_.size()) throw std::runtime_error("router: optimiser size mismatch");
    r.last_loss_ = binio::read_f64(in);
    r.pending_ = binio::read_u64(in);
    if (r.pending_ >= cfg.batch_size) throw std::runtime_error("router: corrupt pending batch");
    r.inputs_.resize(r.pending_ * cfg.input_dim);
    r.masks_.resize(r.pending_ * cfg.num_experts);
    for (double& v : r.inputs_) v = binio::read_f64(in);
    for (double& v : r.masks_) v = binio::read_f64(in);
    if (cfg.stale_logits) {
        auto& s = r.stale_;
        s.batch = r.pending_;
        s.input.resize(r.pending_ * cfg.input_dim);
        s.pre1.resize(r.pending_ * cfg.hidden1);
        s.act1.resize(r.pending_ * cfg.hidden1);
        s.pre2.resize(r.pending_ * cfg.hidden2);
        s.act2.resize(r.pending_ * cfg.hidden2);
        s.logits.resize(r.pending_ * cfg.num_experts);
        for (auto* vec : {&s.input, &s.pre1, &s.act1, &s.pre2, &s.act2, &s.logits}) {
            for (double& v : *vec) v = binio::read_f64(in);
        }
    }
    return r;
}

}  // namespace driftmoe
