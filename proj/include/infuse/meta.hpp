#pragma once

#include "infuse/curve.hpp"
#include "infuse/dense.hpp"
#include "infuse/matrix.hpp"
#include "infuse/svm.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace infuse {

enum class Block : std::uint8_t { z = 0, x = 1, l1 = 2, l2 = 3 };

inline constexpr std::array<std::string_view, 4> kBlockNames = {"Z", "X", "L1", "L2"};

// Column ranges of each block inside a hybrid matrix.
struct HybridLayout {
    std::array<std::size_t, 4> offset{};
    std::array<std::size_t, 4> width{};

    std::size_t total() const { return offset[3] + width[3]; }
};

struct Hybrid {
    Matrix f;
    HybridLayout layout;
};

// Z | X | L1 | L2, no rescaling.
Hybrid build_hybrid(const Matrix& z, const Matrix& x, const Matrix& l1, const Matrix& l2);
Matrix slice_block(const Hybrid& h, Block block);
// Concatenates the requested blocks in canonical order.
Matrix select_blocks(const Hybrid& h, std::span<const Block> blocks);

struct BlockSet {
    std::string name;
    std::vector<Block> blocks;
};

// The five ablation variants; the last one is the full hybrid.
const std::vector<BlockSet>& ablation_block_sets();
std::size_t full_block_set_index();

struct MetaNetConfig {
    std::vector<std::size_t> hidden = {128, 64, 32, 16, 8};
    double learning_rate = 8e-5;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;
    std::uint64_t seed = 0;

    std::size_t weight_layers() const { return hidden.size() + 1; }
};

struct MetaModel {
    DenseNet net;  // single sigmoid output

    std::size_t width() const { return net.input_width(); }

    std::string serialize() const;
    static MetaModel deserialize(std::string_view bytes);
};

MetaModel make_meta(const MetaNetConfig& config, std::size_t input_width);

// Mean binary cross-entropy, computed from the output logit.
double meta_loss(const MetaModel& model, const Matrix& f, std::span<const int> y);

struct MetaGradient {
    DenseGrad grad;
    double loss = 0.0;
};

MetaGradient meta_grad(const MetaModel& model, const Matrix& f, std::span<const int> y);

struct MetaFit {
    MetaModel model;
    TrainingCurve curve;
};

// Plain mini-batch SGD; early stop on validation F-score, best snapshot kept.
MetaFit meta_fit(const MetaNetConfig& config, const Matrix& f_train, const Labels& y_train, const Matrix& f_val,
                 const Labels& y_val);

Vector meta_predict(const MetaModel& model, const Matrix& f);
Labels threshold_labels(const Vector& p, double threshold = 0.5);

Labels vote_majority(const Matrix& z);
Labels vote_average(const Matrix& z);
Labels vote_max_weighted(const Matrix& z, std::span<const double> weights);
// Per-classifier accuracy on (z, y), normalized to sum to one.
std::vector<double> accuracy_weights(const Matrix& z, const Labels& y);

SvmModel svm_meta_fit(const Matrix& f_train, const Labels& y_train, const SvmParams& params, std::uint64_t seed);

} // namespace infuse
