#include "nbv/mlp.hpp"

#include <stdexcept>

namespace nbv {

Mlp::Mlp(std::vector<DenseSpec> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("mlp needs at least one layer");
    size_t offset = 0;
    for (size_t l = 0; l < layers_.size(); ++l) {
        const DenseSpec& spec = layers_[l];
        if (l > 0 && spec.in != layers_[l - 1].out) {
            throw std::invalid_argument("mlp layer dimensions do not chain");
        }
        if (spec.residual && spec.in != spec.out) {
            throw std::invalid_argument("residual layers need in == out");
        }
        offsets_.push_back(offset);
        offset += static_cast<size_t>(spec.in) * spec.out + spec.out;
    }
    params_.assign(offset, 0.0);
}

void Mlp::init_uniform(uint64_t seed) {
    Rng rng(seed);
    for (size_t l = 0; l < layers_.size(); ++l) {
        const DenseSpec& spec = layers_[l];
        const double a = std::sqrt(6.0 / (spec.in + spec.out));
        double* w = params_.data() + offsets_[l];
        for (size_t i = 0; i < static_cast<size_t>(spec.in) * spec.out; ++i) {
            w[i] = rng.uniform(-a, a);
        }
        // biases stay zero
    }
}

void Mlp::forward(const double* x, double* y) const {
    std::vector<double> a(x, x + input_dim());
    std::vector<double> z;
    for (size_t l = 0; l < layers_.size(); ++l) {
        const DenseSpec& spec = layers_[l];
        const double* w = params_.data() + offsets_[l];
        const double* b = w + static_cast<size_t>(spec.in) * spec.out;
        z.assign(spec.out, 0.0);
        for (int o = 0; o < spec.out; ++o) {
            const double* row = w + static_cast<size_t>(o) * spec.in;
            double acc = b[o];
            for (int i = 0; i < spec.in; ++i) acc += row[i] * a[i];
            z[o] = spec.softplus ? softplus_fn(acc) : acc;
        }
        if (spec.residual) {
            for (int o = 0; o < spec.out; ++o) z[o] += a[o];
        }
        a.swap(z);
    }
    for (int o = 0; o < output_dim(); ++o) y[o] = a[o];
}

void Mlp::forward(const double* x, double* y, Cache& cache) const {
    cache.inputs.assign(layers_.size(), {});
    cache.pre.assign(layers_.size(), {});
    std::vector<double> a(x, x + input_dim());
    for (size_t l = 0; l < layers_.size(); ++l) {
        const DenseSpec& spec = layers_[l];
        const double* w = params_.data() + offsets_[l];
        const double* b = w + static_cast<size_t>(spec.in) * spec.out;
        cache.inputs[l] = a;
        std::vector<double>& pre = cache.pre[l];
        pre.assign(spec.out, 0.0);
        std::vector<double> next(spec.out, 0.0);
        for (int o = 0; o < spec.out; ++o) {
            const double* row = w + static_cast<size_t>(o) * spec.in;
            double acc = b[o];
            for (int i = 0; i < spec.in; ++i) acc += row[i] * a[i];
            pre[o] = acc;
            next[o] = spec.softplus ? softplus_fn(acc) : acc;
            if (spec.residual) next[o] += a[o];
        }
        a.swap(next);
    }
    for (int o = 0; o < output_dim(); ++o) y[o] = a[o];
}

void Mlp::backward(const Cache& cache, const double* dy, double* param_grad, double* dx) const {
    std::vector<double> grad_out(dy, dy + output_dim());
    for (size_t li = layers_.size(); li-- > 0;) {
        const DenseSpec& spec = layers_[li];
        const double* w = params_.data() + offsets_[li];
        double* gw = param_grad + offsets_[li];
        double* gb = gw + static_cast<size_t>(spec.in) * spec.out;
        const std::vector<double>& a = cache.inputs[li];
        const std::vector<double>& pre = cache.pre[li];

        std::vector<double> grad_in(spec.in, 0.0);
        if (spec.residual) {
            for (int i = 0; i < spec.in; ++i) grad_in[i] = grad_out[i];
        }
        for (int o = 0; o < spec.out; ++o) {
            const double gz = spec.softplus ? grad_out[o] * sigmoid_fn(pre[o]) : grad_out[o];
            if (gz == 0.0) continue;
            gb[o] += gz;
            const double* row = w + static_cast<size_t>(o) * spec.in;
            double* grow = gw + static_cast<size_t>(o) * spec.in;
            for (int i = 0; i < spec.in; ++i) {
                grow[i] += gz * a[i];
                grad_in[i] += gz * row[i];
            }
        }
        grad_out.swap(grad_in);
    }
    if (dx != nullptr) {
        for (int i = 0; i < input_dim(); ++i) dx[i] = grad_out[i];
    }
}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw std::invalid_argument("adam state size mismatch");
    }
    ++t_;
    const double b1t = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double b2t = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
        const double mhat = m_[i] / b1t;
        const double vhat = v_[i] / b2t;
        params[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
}

}  // namespace nbv
