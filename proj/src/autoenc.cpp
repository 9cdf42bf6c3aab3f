#include "infuse/autoenc.hpp"

#include "infuse/error.hpp"
#include "infuse/rng.hpp"
#include "infuse/serialize.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace infuse {

AeConfig AeConfig::ae1() {
    AeConfig c;
    c.encoder_widths = {112, 96, 64, 48, 32};
    c.learning_rate = 8e-5;
    return c;
}

AeConfig AeConfig::ae2() {
    AeConfig c;
    c.encoder_widths = {96, 64, 48, 24};
    c.learning_rate = 1e-4;
    return c;
}

AeModel make_autoencoder(const AeConfig& config, std::size_t input_width) {
    if (config.encoder_widths.empty()) throw DomainError("autoencoder needs at least one encoder width");
    if (input_width == 0) throw DomainError("autoencoder input width must be positive");
    std::vector<std::size_t> widths{input_width};
    widths.insert(widths.end(), config.encoder_widths.begin(), config.encoder_widths.end());
    for (std::size_t i = config.encoder_widths.size() - 1; i-- > 0;) widths.push_back(config.encoder_widths[i]);
    widths.push_back(input_width);

    Rng rng(config.seed);
    AeModel model;
    model.net = init_dense(widths, config.hidden, config.output, rng);
    model.encoder_layers = config.encoder_widths.size();
    model.weight_decay = config.weight_decay;
    return model;
}

AeOutput ae_forward(const AeModel& model, const Matrix& x) {
    AeOutput out;
    out.latent = model.net.forward(x, model.encoder_layers);
    Matrix a = out.latent;
    for (std::size_t l = model.encoder_layers; l < model.net.layers.size(); ++l) {
        const auto& layer = model.net.layers[l];
        a = layer.apply(a);
    }
    out.reconstruction = std::move(a);
    return out;
}

double ae_loss(const AeModel& model, const Matrix& x) {
    if (x.rows() == 0) throw DomainError("autoencoder loss on an empty batch");
    const Matrix r = model.net.forward(x);
    return (r - x).squaredNorm() / static_cast<double>(x.rows()) + model.weight_decay * model.net.weight_square_sum();
}

AeGradient ae_grad(const AeModel& model, const Matrix& batch) {
    if (batch.rows() == 0) throw DomainError("autoencoder gradient on an empty batch");
    const double n = static_cast<double>(batch.rows());
    ForwardTrace trace;
    const Matrix r = forward_trace(model.net, batch, trace);
    const Matrix diff = r - batch;

    AeGradient out;
    out.loss = diff.squaredNorm() / n + model.weight_decay * model.net.weight_square_sum();

    Matrix delta = (2.0 / n) * diff;
    const auto& last = model.net.layers.back();
    if (last.act == Activation::sigmoid) {
        delta = delta.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));
    } else if (last.act == Activation::relu) {
        delta = delta.cwiseProduct((trace.pre.back().array() > 0.0).cast<double>().matrix());
    }
    out.grad = backward(model.net, batch, trace, std::move(delta));
    for (std::size_t l = 0; l < model.net.layers.size(); ++l) {
        out.grad.w[l] += 2.0 * model.weight_decay * model.net.layers[l].w;
    }
    return out;
}

AeFit ae_fit(const AeConfig& config, const Matrix& train, const Matrix& val) {
    if (train.rows() == 0) throw TrainingError("autoencoder training set is empty");
    if (val.rows() == 0) throw TrainingError("autoencoder validation set is empty");
    if (val.cols() != train.cols()) throw ShapeError("autoencoder validation width differs from training width");
    if (config.batch_size == 0 || config.max_epochs == 0) throw TrainingError("batch size and epoch count must be positive");

    AeFit fit;
    fit.model = make_autoencoder(config, static_cast<std::size_t>(train.cols()));
    fit.curve.metric_name = "val_loss";
    AdamOptimizer adam(fit.model.net, config.learning_rate, config.beta1, config.beta2, config.adam_eps);
    Rng rng(derive_seed(config.seed, 1));

    std::vector<std::size_t> order(static_cast<std::size_t>(train.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});

    AeModel best = fit.model;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double train_sum = 0.0;
        for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
            const std::size_t hi = std::min(order.size(), lo + config.batch_size);
            const Matrix batch = select_rows(train, std::span<const std::size_t>(order).subspan(lo, hi - lo));
            const auto g = ae_grad(fit.model, batch);
            if (!std::isfinite(g.loss)) throw TrainingError("autoencoder loss is not finite at epoch " + std::to_string(epoch));
            train_sum += g.loss * static_cast<double>(hi - lo);
            adam.step(fit.model.net, g.grad);
        }
        const double train_loss = train_sum / static_cast<double>(order.size());
        const double val_loss = ae_loss(fit.model, val);
        if (!std::isfinite(val_loss)) throw TrainingError("autoencoder validation loss is not finite at epoch " + std::to_string(epoch));
        fit.curve.epochs.push_back({epoch, train_loss, val_loss});

        if (val_loss < best_val) {
            best_val = val_loss;
            best = fit.model;
            fit.curve.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
        if (config.patience == 0) break;
    }
    fit.model = std::move(best);
    return fit;
}

Matrix encode(const AeModel& model, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.input_width()) {
        throw ShapeError("encoder expects width " + std::to_string(model.input_width()) + ", got " +
                         std::to_string(x.cols()));
    }
    return model.net.forward(x, model.encoder_layers);
}

std::string AeModel::serialize() const {
    ByteWriter w;
    w.u64(encoder_layers);
    w.f64(weight_decay);
    net.write(w);
    return encode_infb(ModelType::autoencoder, w.bytes());
}

AeModel AeModel::deserialize(std::string_view bytes) {
    const auto payload = decode_infb(bytes, ModelType::autoencoder);
    ByteReader r(payload);
    AeModel m;
    m.encoder_layers = r.u64();
    m.weight_decay = r.f64();
    m.net = DenseNet::read(r);
    if (!r.done()) throw SchemaError("trailing bytes in autoencoder payload");
    if (m.encoder_layers == 0 || m.encoder_layers >= m.net.layers.size() ||
        m.net.output_width() != m.net.input_width()) {
        throw SchemaError("autoencoder payload inconsistent");
    }
    return m;
}

} // namespace infuse
