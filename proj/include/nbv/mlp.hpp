#pragma once

#include <cstdint>
#include <vector>

#include "nbv/rng.hpp"

namespace nbv {

inline double softplus_fn(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid_fn(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct DenseSpec {
    int in = 0;
    int out = 0;
    bool softplus = false;
    bool residual = false;  // adds the layer input to the activated output (in == out)
};

// Fully-connected stack with explicit forward/backward. Parameters live in one
// flat vector (per layer: row-major weights then biases) so optimizers and the
// weights container can treat them uniformly.
class Mlp {
  public:
    explicit Mlp(std::vector<DenseSpec> layers);

    int input_dim() const { return layers_.front().in; }
    int output_dim() const { return layers_.back().out; }
    size_t param_count() const { return params_.size(); }
    const std::vector<DenseSpec>& layers() const { return layers_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    void init_uniform(uint64_t seed);

    void forward(const double* x, double* y) const;

    struct Cache {
        std::vector<std::vector<double>> inputs;  // per layer input
        std::vector<std::vector<double>> pre;     // per layer pre-activation
    };
    void forward(const double* x, double* y, Cache& cache) const;

    // Accumulates (+=) parameter gradients into param_grad (size param_count());
    // when dx != nullptr also writes dL/dx (overwrites).
    void backward(const Cache& cache, const double* dy, double* param_grad, double* dx) const;

  private:
    std::vector<DenseSpec> layers_;
    std::vector<size_t> offsets_;  // parameter offset per layer
    std::vector<double> params_;
};

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamOptimizer {
  public:
    explicit AdamOptimizer(size_t n, const AdamConfig& config = {})
        : config_(config), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& params, const std::vector<double>& grad);
    int64_t steps_taken() const { return t_; }

  private:
    AdamConfig config_;
    std::vector<double> m_, v_;
    int64_t t_ = 0;
};

}  // namespace nbv
