#include "infuse/dense.hpp"

#include "infuse/error.hpp"
#include "infuse/rng.hpp"
#include "infuse/serialize.hpp"

#include <cmath>

namespace infuse {

namespace {

void activate(Matrix& m, Activation act) {
    switch (act) {
    case Activation::linear:
        break;
    case Activation::relu:
        m = m.cwiseMax(0.0);
        break;
    case Activation::sigmoid:
        m = m.unaryExpr([](double z) {
            if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
            const double e = std::exp(z);
            return e / (1.0 + e);
        });
        break;
    }
}

// Multiplies `delta` by the activation derivative, given pre and post values.
void apply_derivative(Matrix& delta, const Matrix& pre, const Matrix& post, Activation act) {
    switch (act) {
    case Activation::linear:
        break;
    case Activation::relu:
        delta = delta.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
        break;
    case Activation::sigmoid:
        delta = delta.cwiseProduct(post.cwiseProduct((1.0 - post.array()).matrix()));
        break;
    }
}

} // namespace

Matrix DenseLayer::apply(const Matrix& a) const {
    Matrix z = (a * w.transpose()).rowwise() + b.transpose();
    activate(z, act);
    return z;
}

Matrix DenseNet::forward(const Matrix& x, std::size_t upto) const {
    if (static_cast<std::size_t>(x.cols()) != input_width()) throw ShapeError("network input width mismatch");
    Matrix a = x;
    const std::size_t n = std::min(upto, layers.size());
    for (std::size_t l = 0; l < n; ++l) {
        a = layers[l].apply(a);
    }
    return a;
}

double DenseNet::weight_square_sum() const {
    double s = 0.0;
    for (const auto& l : layers) s += l.w.squaredNorm();
    return s;
}

void DenseNet::write(ByteWriter& w) const {
    w.u64(layers.size());
    for (const auto& l : layers) {
        w.u8(static_cast<std::uint8_t>(l.act));
        w.matrix(l.w);
        w.f64s({l.b.data(), static_cast<std::size_t>(l.b.size())});
    }
}

DenseNet DenseNet::read(ByteReader& r) {
    DenseNet net;
    net.layers.resize(r.u64());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        const auto act = r.u8();
        if (act > 2) throw SchemaError("unknown activation tag");
        l.act = static_cast<Activation>(act);
        l.w = r.matrix();
        const auto b = r.f64s();
        l.b = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
        if (l.b.size() != l.w.rows()) throw SchemaError("layer bias width mismatch");
        if (i > 0 && net.layers[i - 1].out() != l.in()) throw SchemaError("layer widths do not chain");
    }
    return net;
}

Matrix forward_trace(const DenseNet& net, const Matrix& x, ForwardTrace& trace) {
    if (static_cast<std::size_t>(x.cols()) != net.input_width()) throw ShapeError("network input width mismatch");
    trace.pre.clear();
    trace.post.clear();
    trace.pre.reserve(net.layers.size());
    trace.post.reserve(net.layers.size());
    const Matrix* a = &x;
    for (const auto& layer : net.layers) {
        trace.pre.push_back((*a * layer.w.transpose()).rowwise() + layer.b.transpose());
        Matrix post = trace.pre.back();
        activate(post, layer.act);
        trace.post.push_back(std::move(post));
        a = &trace.post.back();
    }
    return trace.post.empty() ? x : trace.post.back();
}

DenseGrad DenseGrad::zeros_like(const DenseNet& net) {
    DenseGrad g;
    for (const auto& l : net.layers) {
        g.w.push_back(Matrix::Zero(l.w.rows(), l.w.cols()));
        g.b.push_back(Vector::Zero(l.b.size()));
    }
    return g;
}

DenseGrad backward(const DenseNet& net, const Matrix& x, const ForwardTrace& trace, Matrix delta) {
    const std::size_t n_layers = net.layers.size();
    DenseGrad g;
    g.w.resize(n_layers);
    g.b.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& input = l == 0 ? x : trace.post[l - 1];
        g.w[l] = delta.transpose() * input;
        g.b[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            Matrix prev = delta * net.layers[l].w;
            apply_derivative(prev, trace.pre[l - 1], trace.post[l - 1], net.layers[l - 1].act);
            delta = std::move(prev);
        }
    }
    return g;
}

DenseNet init_dense(std::span<const std::size_t> widths, Activation hidden, Activation output, Rng& rng) {
    if (widths.size() < 2) throw DomainError("a network needs an input and an output width");
    DenseNet net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        DenseLayer layer;
        const auto in = static_cast<Eigen::Index>(widths[l]);
        const auto out = static_cast<Eigen::Index>(widths[l + 1]);
        const double limit = std::sqrt(6.0 / static_cast<double>(in));
        layer.w.resize(out, in);
        for (Eigen::Index i = 0; i < layer.w.size(); ++i) layer.w.data()[i] = rng.uniform(-limit, limit);
        layer.b = Vector::Zero(out);
        layer.act = l + 2 == widths.size() ? output : hidden;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

AdamOptimizer::AdamOptimizer(const DenseNet& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(DenseGrad::zeros_like(net)), v_(DenseGrad::zeros_like(net)) {}

void AdamOptimizer::step(DenseNet& net, const DenseGrad& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = beta1_ * m + (1.0 - beta1_) * grad;
        v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
        param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        update(net.layers[l].w, g.w[l], m_.w[l], v_.w[l]);
        update(net.layers[l].b, g.b[l], m_.b[l], v_.b[l]);
    }
}

void sgd_step(DenseNet& net, const DenseGrad& g, double lr) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        net.layers[l].w -= lr * g.w[l];
        net.layers[l].b -= lr * g.b[l];
    }
}

} // namespace infuse
