#include "fedprism/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedprism/errors.hpp"
#include "fedprism/rng.hpp"

namespace fedprism {

ModelSpec::ModelSpec(std::vector<std::size_t> layer_dims, Activation activation)
    : dims_(std::move(layer_dims)), activation_(activation) {
    if (dims_.size() < 2) throw ParameterError("ModelSpec needs at least input and output dims");
    for (auto d : dims_) {
        if (d == 0) throw ParameterError("ModelSpec layer dims must be >= 1");
    }
    offsets_.reserve(dims_.size() - 1);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        offsets_.push_back(total_);
        total_ += dims_[l] * dims_[l + 1] + dims_[l + 1];
    }
}

ParamVector::ParamVector(SpecPtr spec) : spec_(std::move(spec)), values_(spec_->total_params(), 0.0) {}

ParamVector::ParamVector(SpecPtr spec, std::vector<double> values)
    : spec_(std::move(spec)), values_(std::move(values)) {
    if (values_.size() != spec_->total_params())
        throw DimensionError("ParamVector length", spec_->total_params(), values_.size());
}

bool ParamVector::same_shape(const ParamVector& other) const {
    if (spec_ == other.spec_) return true;
    return spec_ && other.spec_ && *spec_ == *other.spec_;
}

bool ParamVector::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ParamVector& ParamVector::axpy(double a, const ParamVector& x) {
    if (!same_shape(x)) throw DimensionError("ParamVector axpy", size(), x.size());
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
    return *this;
}

ParamVector& ParamVector::scale(double a) {
    for (auto& v : values_) v *= a;
    return *this;
}

double l2_distance(const ParamVector& a, const ParamVector& b) {
    if (!a.same_shape(b)) throw DimensionError("l2_distance", a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

ParamVector init_params(SpecPtr spec, std::uint64_t seed) {
    ParamVector p(spec);
    Rng rng(seed);
    for (std::size_t l = 0; l < spec->layer_count(); ++l) {
        double limit = std::sqrt(6.0 / static_cast<double>(spec->fan_in(l) + spec->fan_out(l)));
        std::uniform_real_distribution<double> dist(-limit, limit);
        std::size_t off = spec->weight_offset(l);
        std::size_t n = spec->fan_in(l) * spec->fan_out(l);
        for (std::size_t i = 0; i < n; ++i) p[off + i] = dist(rng);
    }
    return p;
}

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != r * c) throw DimensionError("Matrix data length", r * c, data.size());
}

namespace {

// y = x * W^T + b for every row, with W stored (out x in).
void affine(const double* w, const double* b, const Matrix& in, std::size_t out_dim, Matrix& out) {
    out = Matrix(in.rows, out_dim);
    const std::size_t in_dim = in.cols;
    for (std::size_t r = 0; r < in.rows; ++r) {
        const double* x = in.data.data() + r * in_dim;
        double* y = out.data.data() + r * out_dim;
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* wr = w + o * in_dim;
            double s = b[o];
            for (std::size_t i = 0; i < in_dim; ++i) s += wr[i] * x[i];
            y[o] = s;
        }
    }
}

void relu_inplace(Matrix& m) {
    for (auto& v : m.data) v = v > 0.0 ? v : 0.0;
}

void check_inputs(const ParamVector& params, const Matrix& inputs) {
    if (inputs.cols != params.spec().input_dim())
        throw DimensionError("forward input columns", params.spec().input_dim(), inputs.cols);
}

// Forward pass retaining every layer's post-activation output.
std::vector<Matrix> forward_all(const ParamVector& params, const Matrix& inputs) {
    const ModelSpec& spec = params.spec();
    std::vector<Matrix> acts;
    acts.reserve(spec.layer_count() + 1);
    acts.push_back(inputs);
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        Matrix next;
        affine(params.values().data() + spec.weight_offset(l), params.values().data() + spec.bias_offset(l),
               acts.back(), spec.fan_out(l), next);
        if (l + 1 < spec.layer_count()) relu_inplace(next);
        acts.push_back(std::move(next));
    }
    return acts;
}

double log_sum_exp(std::span<const double> z) {
    double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

void check_batch(const ParamVector& params, const Batch& batch) {
    if (batch.empty()) throw ParameterError("batch must be nonempty");
    if (batch.inputs.rows != batch.labels.size())
        throw DimensionError("batch label count", batch.inputs.rows, batch.labels.size());
    check_inputs(params, batch.inputs);
    const auto classes = static_cast<int>(params.spec().class_count());
    for (int y : batch.labels) {
        if (y < 0 || y >= classes) throw ParameterError("label out of range: " + std::to_string(y));
    }
}

}  // namespace

Matrix forward(const ParamVector& params, const Matrix& inputs) {
    check_inputs(params, inputs);
    const ModelSpec& spec = params.spec();
    Matrix cur = inputs;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        Matrix next;
        affine(params.values().data() + spec.weight_offset(l), params.values().data() + spec.bias_offset(l),
               cur, spec.fan_out(l), next);
        if (l + 1 < spec.layer_count()) relu_inplace(next);
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> forward_row(const ParamVector& params, std::span<const double> x) {
    Matrix m(1, x.size(), std::vector<double>(x.begin(), x.end()));
    return std::move(forward(params, m).data);
}

std::vector<double> softmax_temp(std::span<const double> logits, double temperature) {
    if (!(temperature > 0.0)) throw ParameterError("softmax temperature must be > 0");
    if (logits.empty()) throw ParameterError("softmax of empty logits");
    double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp((logits[i] - m) / temperature);
        s += p[i];
    }
    for (auto& v : p) v /= s;
    return p;
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

double cross_entropy_loss(const ParamVector& params, const Batch& batch) {
    check_batch(params, batch);
    Matrix logits = forward(params, batch.inputs);
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows; ++r) {
        auto z = logits.row(r);
        total += log_sum_exp(z) - z[static_cast<std::size_t>(batch.labels[r])];
    }
    return total / static_cast<double>(batch.size());
}

LossGrad cross_entropy_grad(const ParamVector& params, const Batch& batch) {
    check_batch(params, batch);
    const ModelSpec& spec = params.spec();
    const std::size_t n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<Matrix> acts = forward_all(params, batch.inputs);

    LossGrad out{0.0, ParamVector(params.spec_ptr())};
    auto grad = out.grad.values();
    auto w = params.values();

    // delta = dLoss/dLogits = (softmax - onehot) / n
    Matrix delta = acts.back();
    for (std::size_t r = 0; r < n; ++r) {
        auto z = delta.row(r);
        const double lse = log_sum_exp(z);
        const auto y = static_cast<std::size_t>(batch.labels[r]);
        out.loss += lse - z[y];
        for (auto& v : z) v = std::exp(v - lse);
        z[y] -= 1.0;
        for (auto& v : z) v *= inv_n;
    }
    out.loss *= inv_n;

    for (std::size_t l = spec.layer_count(); l-- > 0;) {
        const std::size_t in_dim = spec.fan_in(l);
        const std::size_t out_dim = spec.fan_out(l);
        const Matrix& a_in = acts[l];
        double* gw = grad.data() + spec.weight_offset(l);
        double* gb = grad.data() + spec.bias_offset(l);
        for (std::size_t r = 0; r < n; ++r) {
            const double* d = delta.data.data() + r * out_dim;
            const double* x = a_in.data.data() + r * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double dv = d[o];
                if (dv == 0.0) continue;
                gb[o] += dv;
                double* gwr = gw + o * in_dim;
                for (std::size_t i = 0; i < in_dim; ++i) gwr[i] += dv * x[i];
            }
        }
        if (l == 0) break;
        // Propagate through W and the ReLU of the previous layer.
        Matrix prev(n, in_dim);
        const double* wl = w.data() + spec.weight_offset(l);
        for (std::size_t r = 0; r < n; ++r) {
            const double* d = delta.data.data() + r * out_dim;
            double* p = prev.data.data() + r * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double dv = d[o];
                if (dv == 0.0) continue;
                const double* wr = wl + o * in_dim;
                for (std::size_t i = 0; i < in_dim; ++i) p[i] += dv * wr[i];
            }
            const double* x = a_in.data.data() + r * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) {
                if (x[i] <= 0.0) p[i] = 0.0;
            }
        }
        delta = std::move(prev);
    }
    return out;
}

ParamVector sgd_train(const ParamVector& params, const Batch& data, const SgdOptions& options,
                      std::uint64_t seed) {
    if (data.empty()) throw ParameterError("sgd_train: empty data");
    if (options.epochs < 1) throw ParameterError("sgd_train: epochs must be >= 1");
    if (!(options.lr >= 0.0)) throw ParameterError("sgd_train: lr must be >= 0");
    if (!(options.momentum >= 0.0 && options.momentum < 1.0))
        throw ParameterError("sgd_train: momentum must lie in [0, 1)");
    if (options.batch_size < 1) throw ParameterError("sgd_train: batch_size must be >= 1");
    if (data.inputs.rows != data.labels.size())
        throw DimensionError("sgd_train label count", data.inputs.rows, data.labels.size());

    ParamVector w = params;
    if (options.lr == 0.0) return w;

    std::vector<double> velocity(w.size(), 0.0);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);

    const std::size_t d = data.inputs.cols;
    Batch mini;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            mini.inputs = Matrix(end - start, d);
            mini.labels.resize(end - start);
            for (std::size_t k = start; k < end; ++k) {
                auto src = data.inputs.row(order[k]);
                std::copy(src.begin(), src.end(), mini.inputs.row(k - start).begin());
                mini.labels[k - start] = data.labels[order[k]];
            }
            LossGrad lg = cross_entropy_grad(w, mini);
            auto g = lg.grad.values();
            auto wv = w.values();
            for (std::size_t i = 0; i < wv.size(); ++i) {
                velocity[i] = options.momentum * velocity[i] + g[i];
                wv[i] -= options.lr * velocity[i];
            }
        }
    }
    if (!w.all_finite()) throw ParameterError("sgd_train diverged to non-finite parameters");
    return w;
}

double evaluate(const ParamVector& params, const Batch& data) {
    if (data.empty()) throw ParameterError("evaluate: empty data");
    if (data.inputs.rows != data.labels.size())
        throw DimensionError("evaluate label count", data.inputs.rows, data.labels.size());
    Matrix logits = forward(params, data.inputs);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < logits.rows; ++r) {
        if (static_cast<int>(argmax(logits.row(r))) == data.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace fedprism
