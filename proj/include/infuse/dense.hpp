#pragma once

#include "infuse/matrix.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace infuse {

class ByteReader;
class ByteWriter;
class Rng;

enum class Activation : std::uint8_t { linear = 0, relu = 1, sigmoid = 2 };

struct DenseLayer {
    Matrix w;  // out x in
    Vector b;  // out
    Activation act = Activation::relu;

    std::size_t in() const { return static_cast<std::size_t>(w.cols()); }
    std::size_t out() const { return static_cast<std::size_t>(w.rows()); }

    Matrix apply(const Matrix& a) const;
};

// Fully connected feed-forward network over row-major batches (one sample per
// row).
struct DenseNet {
    std::vector<DenseLayer> layers;

    std::size_t input_width() const { return layers.empty() ? 0 : layers.front().in(); }
    std::size_t output_width() const { return layers.empty() ? 0 : layers.back().out(); }

    // Activations after each of the first `upto` layers (all layers by default).
    Matrix forward(const Matrix& x, std::size_t upto = SIZE_MAX) const;

    double weight_square_sum() const;

    void write(ByteWriter& w) const;
    static DenseNet read(ByteReader& r);
};

// Pre- and post-activation values of every layer for one batch.
struct ForwardTrace {
    std::vector<Matrix> pre;
    std::vector<Matrix> post;
};

Matrix forward_trace(const DenseNet& net, const Matrix& x, ForwardTrace& trace);

struct DenseGrad {
    std::vector<Matrix> w;
    std::vector<Vector> b;

    static DenseGrad zeros_like(const DenseNet& net);
};

// Backpropagates d(loss)/d(pre-activation of the last layer) through the net.
DenseGrad backward(const DenseNet& net, const Matrix& x, const ForwardTrace& trace, Matrix delta_last);

// Widths w0 -> w1 -> ... ; hidden layers use `hidden`, the last `output`.
// Weights uniform in +-sqrt(6 / fan_in), biases zero.
DenseNet init_dense(std::span<const std::size_t> widths, Activation hidden, Activation output, Rng& rng);

class AdamOptimizer {
public:
    AdamOptimizer(const DenseNet& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(DenseNet& net, const DenseGrad& g);

private:
    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    DenseGrad m_, v_;
};

// Plain stochastic gradient descent, no momentum.
void sgd_step(DenseNet& net, const DenseGrad& g, double lr);

} // namespace infuse
