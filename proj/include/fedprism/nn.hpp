#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace fedprism {

enum class Activation { Relu };

// Dense feed-forward architecture: input dim, hidden dims..., class count.
// Parameters are laid out layer by layer as a row-major (out x in) weight
// matrix followed by the out-length bias.
class ModelSpec {
public:
    explicit ModelSpec(std::vector<std::size_t> layer_dims, Activation activation = Activation::Relu);

    const std::vector<std::size_t>& layer_dims() const { return dims_; }
    Activation activation() const { return activation_; }

    std::size_t input_dim() const { return dims_.front(); }
    std::size_t class_count() const { return dims_.back(); }
    std::size_t layer_count() const { return dims_.size() - 1; }
    std::size_t total_params() const { return total_; }

    std::size_t fan_in(std::size_t layer) const { return dims_[layer]; }
    std::size_t fan_out(std::size_t layer) const { return dims_[layer + 1]; }
    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const {
        return offsets_[layer] + dims_[layer] * dims_[layer + 1];
    }

    bool operator==(const ModelSpec& other) const {
        return dims_ == other.dims_ && activation_ == other.activation_;
    }

private:
    std::vector<std::size_t> dims_;
    Activation activation_;
    std::vector<std::size_t> offsets_;
    std::size_t total_ = 0;
};

using SpecPtr = std::shared_ptr<const ModelSpec>;

inline SpecPtr make_spec(std::vector<std::size_t> dims) {
    return std::make_shared<const ModelSpec>(std::move(dims));
}

// Flat parameter vector interpreted by a shared ModelSpec.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(SpecPtr spec);  // zero-filled
    ParamVector(SpecPtr spec, std::vector<double> values);

    const ModelSpec& spec() const { return *spec_; }
    const SpecPtr& spec_ptr() const { return spec_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool same_shape(const ParamVector& other) const;
    bool all_finite() const;

    ParamVector& axpy(double a, const ParamVector& x);  // this += a*x
    ParamVector& scale(double a);

    bool operator==(const ParamVector& other) const { return values_ == other.values_; }

private:
    SpecPtr spec_;
    std::vector<double> values_;
};

double l2_distance(const ParamVector& a, const ParamVector& b);

// Glorot-uniform weights, zero biases.
ParamVector init_params(SpecPtr spec, std::uint64_t seed);

// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> d);

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct Batch {
    Matrix inputs;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }
};

struct SgdOptions {
    int epochs = 10;
    double lr = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 32;
};

Matrix forward(const ParamVector& params, const Matrix& inputs);
std::vector<double> forward_row(const ParamVector& params, std::span<const double> x);

std::vector<double> softmax_temp(std::span<const double> logits, double temperature);

// Lowest index wins ties.
std::size_t argmax(std::span<const double> v);

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

// Mean negative log-likelihood over the batch and its analytic gradient.
LossGrad cross_entropy_grad(const ParamVector& params, const Batch& batch);
double cross_entropy_loss(const ParamVector& params, const Batch& batch);

// Mini-batch SGD with heavy-ball momentum (v = mu*v + g; w -= lr*v).
// The momentum buffer starts at zero on every call and the shuffle order is
// a pure function of seed.
ParamVector sgd_train(const ParamVector& params, const Batch& data, const SgdOptions& options,
                      std::uint64_t seed);

double evaluate(const ParamVector& params, const Batch& data);

}  // namespace fedprism
