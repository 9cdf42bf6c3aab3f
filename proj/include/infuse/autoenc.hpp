#pragma once

#include "infuse/curve.hpp"
#include "infuse/dense.hpp"
#include "infuse/matrix.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace infuse {

struct AeConfig {
    // Encoder widths after the input; the last entry is the latent width. The
    // decoder mirrors them back to the input width.
    std::vector<std::size_t> encoder_widths;
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    Activation hidden = Activation::relu;
    Activation output = Activation::sigmoid;

    std::size_t weight_layers() const { return 2 * encoder_widths.size(); }
    std::size_t latent_width() const { return encoder_widths.empty() ? 0 : encoder_widths.back(); }

    // 10 weight layers, latent 32, lr 8e-5.
    static AeConfig ae1();
    // 8 weight layers, latent 24, lr 1e-4.
    static AeConfig ae2();
};

struct AeModel {
    DenseNet net;
    std::size_t encoder_layers = 0;
    double weight_decay = 0.0;

    std::size_t input_width() const { return net.input_width(); }
    std::size_t latent_width() const { return net.layers.at(encoder_layers - 1).out(); }

    std::string serialize() const;
    static AeModel deserialize(std::string_view bytes);
};

// Fresh model with seeded He-uniform weights and zero biases.
AeModel make_autoencoder(const AeConfig& config, std::size_t input_width);

struct AeOutput {
    Matrix latent;
    Matrix reconstruction;
};

AeOutput ae_forward(const AeModel& model, const Matrix& x);

// (1/n) sum_i |x_i - x'_i|^2 + lambda * sum of squared weights (biases excluded).
double ae_loss(const AeModel& model, const Matrix& x);

struct AeGradient {
    DenseGrad grad;
    double loss = 0.0;
};

AeGradient ae_grad(const AeModel& model, const Matrix& batch);

struct AeFit {
    AeModel model;
    TrainingCurve curve;
};

// Mini-batch Adam with early stopping on validation loss; returns the
// best-validation snapshot. Throws TrainingError if the loss becomes NaN.
AeFit ae_fit(const AeConfig& config, const Matrix& train, const Matrix& val);

Matrix encode(const AeModel& model, const Matrix& x);

} // namespace infuse
