#include "infuse/meta.hpp"

#include "infuse/error.hpp"
#include "infuse/eval.hpp"
#include "infuse/parallel.hpp"
#include "infuse/pool.hpp"
#include "infuse/rng.hpp"
#include "infuse/serialize.hpp"

#include <cmath>
#include <numeric>

namespace infuse {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void check_labels(const Matrix& f, std::span<const int> y, const char* what) {
    if (static_cast<std::size_t>(f.rows()) != y.size()) {
        throw ShapeError(std::string(what) + ": " + std::to_string(f.rows()) + " rows but " + std::to_string(y.size()) +
                         " labels");
    }
}

void check_pool(const Matrix& z) {
    if (z.cols() != static_cast<Eigen::Index>(kPoolWidth)) throw ShapeError("voting needs a 10-column decision pool");
}

} // namespace

Hybrid build_hybrid(const Matrix& z, const Matrix& x, const Matrix& l1, const Matrix& l2) {
    const std::array<const Matrix*, 4> parts = {&z, &x, &l1, &l2};
    for (const auto* p : parts) {
        if (p->rows() != z.rows()) throw ShapeError("hybrid blocks have different row counts");
    }
    Hybrid h;
    std::size_t off = 0;
    for (std::size_t b = 0; b < 4; ++b) {
        h.layout.offset[b] = off;
        h.layout.width[b] = static_cast<std::size_t>(parts[b]->cols());
        off += h.layout.width[b];
    }
    h.f.resize(z.rows(), static_cast<Eigen::Index>(off));
    for (std::size_t b = 0; b < 4; ++b) {
        h.f.middleCols(static_cast<Eigen::Index>(h.layout.offset[b]), static_cast<Eigen::Index>(h.layout.width[b])) =
            *parts[b];
    }
    return h;
}

Matrix slice_block(const Hybrid& h, Block block) {
    const auto b = static_cast<std::size_t>(block);
    return h.f.middleCols(static_cast<Eigen::Index>(h.layout.offset[b]), static_cast<Eigen::Index>(h.layout.width[b]));
}

Matrix select_blocks(const Hybrid& h, std::span<const Block> blocks) {
    std::array<bool, 4> want{};
    for (auto b : blocks) want[static_cast<std::size_t>(b)] = true;
    std::size_t width = 0;
    for (std::size_t b = 0; b < 4; ++b) width += want[b] ? h.layout.width[b] : 0;
    Matrix out(h.f.rows(), static_cast<Eigen::Index>(width));
    Eigen::Index at = 0;
    for (std::size_t b = 0; b < 4; ++b) {
        if (!want[b]) continue;
        const auto w = static_cast<Eigen::Index>(h.layout.width[b]);
        out.middleCols(at, w) = h.f.middleCols(static_cast<Eigen::Index>(h.layout.offset[b]), w);
        at += w;
    }
    return out;
}

const std::vector<BlockSet>& ablation_block_sets() {
    static const std::vector<BlockSet> sets = {
        {"Z", {Block::z}},
        {"Z+X", {Block::z, Block::x}},
        {"X+L1+L2", {Block::x, Block::l1, Block::l2}},
        {"Z+X+L1", {Block::z, Block::x, Block::l1}},
        {"Z+X+L1+L2", {Block::z, Block::x, Block::l1, Block::l2}},
    };
    return sets;
}

std::size_t full_block_set_index() { return ablation_block_sets().size() - 1; }

MetaModel make_meta(const MetaNetConfig& config, std::size_t input_width) {
    if (input_width == 0) throw DomainError("meta-learner input width must be positive");
    std::vector<std::size_t> widths{input_width};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(1);
    Rng rng(config.seed);
    return {init_dense(widths, Activation::relu, Activation::sigmoid, rng)};
}

double meta_loss(const MetaModel& model, const Matrix& f, std::span<const int> y) {
    check_labels(f, y, "meta loss");
    if (y.empty()) throw DomainError("meta loss on an empty batch");
    DenseNet body = model.net;
    body.layers.back().act = Activation::linear;
    const Matrix logit = body.forward(f);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double z = logit(static_cast<Eigen::Index>(i), 0);
        s += softplus(z) - (y[i] == 1 ? z : 0.0);
    }
    return s / static_cast<double>(y.size());
}

MetaGradient meta_grad(const MetaModel& model, const Matrix& f, std::span<const int> y) {
    check_labels(f, y, "meta gradient");
    if (y.empty()) throw DomainError("meta gradient on an empty batch");
    const double n = static_cast<double>(y.size());
    ForwardTrace trace;
    const Matrix p = forward_trace(model.net, f, trace);
    const Matrix& logit = trace.pre.back();

    MetaGradient out;
    Matrix delta(f.rows(), 1);
    double s = 0.0;
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        const double t = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0;
        s += softplus(logit(i, 0)) - t * logit(i, 0);
        delta(i, 0) = (p(i, 0) - t) / n;
    }
    out.loss = s / n;
    out.grad = backward(model.net, f, trace, std::move(delta));
    return out;
}

MetaFit meta_fit(const MetaNetConfig& config, const Matrix& f_train, const Labels& y_train, const Matrix& f_val,
                 const Labels& y_val) {
    check_labels(f_train, y_train, "meta training set");
    check_labels(f_val, y_val, "meta validation set");
    if (y_train.empty() || y_val.empty()) throw TrainingError("meta-learner needs non-empty training and validation sets");
    if (f_val.cols() != f_train.cols()) throw ShapeError("meta validation width differs from training width");
    if (config.batch_size == 0 || config.max_epochs == 0) throw TrainingError("batch size and epoch count must be positive");

    MetaFit fit;
    fit.model = make_meta(config, static_cast<std::size_t>(f_train.cols()));
    fit.curve.metric_name = "val_f_score";
    Rng rng(derive_seed(config.seed, 1));

    std::vector<std::size_t> order(y_train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    MetaModel best = fit.model;
    double best_f = -1.0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double train_sum = 0.0;
        for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
            const std::size_t hi = std::min(order.size(), lo + config.batch_size);
            const auto idx = std::span<const std::size_t>(order).subspan(lo, hi - lo);
            const Matrix batch = select_rows(f_train, idx);
            const Labels yb = select(y_train, idx);
            const auto g = meta_grad(fit.model, batch, yb);
            if (!std::isfinite(g.loss)) throw TrainingError("meta-learner loss is not finite at epoch " + std::to_string(epoch));
            train_sum += g.loss * static_cast<double>(hi - lo);
            sgd_step(fit.model.net, g.grad, config.learning_rate);
        }
        const double val_f = metrics(confusion(y_val, threshold_labels(meta_predict(fit.model, f_val)))).f_score;
        fit.curve.epochs.push_back({epoch, train_sum / static_cast<double>(order.size()), val_f});

        if (val_f > best_f) {
            best_f = val_f;
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

Vector meta_predict(const MetaModel& model, const Matrix& f) {
    if (static_cast<std::size_t>(f.cols()) != model.width()) {
        throw ShapeError("meta-learner expects width " + std::to_string(model.width()) + ", got " + std::to_string(f.cols()));
    }
    Vector p(f.rows());
    constexpr std::size_t kChunk = 1024;
    parallel_chunks(static_cast<std::size_t>(f.rows()), kChunk, [&](std::size_t lo, std::size_t hi) {
        const auto n = static_cast<Eigen::Index>(hi - lo);
        p.segment(static_cast<Eigen::Index>(lo), n) =
            model.net.forward(f.middleRows(static_cast<Eigen::Index>(lo), n)).col(0);
    });
    return p;
}

Labels threshold_labels(const Vector& p, double threshold) {
    Labels out(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p[i] >= threshold ? 1 : 0;
    return out;
}

Labels vote_majority(const Matrix& z) {
    check_pool(z);
    Labels out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        int votes = 0;
        for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(kBaseCount); ++c) votes += z(i, 2 * c + 1) >= z(i, 2 * c);
        out[static_cast<std::size_t>(i)] = 2 * votes > static_cast<int>(kBaseCount) ? 1 : 0;
    }
    return out;
}

Labels vote_average(const Matrix& z) {
    const std::vector<double> uniform(kBaseCount, 1.0 / static_cast<double>(kBaseCount));
    return vote_max_weighted(z, uniform);
}

Labels vote_max_weighted(const Matrix& z, std::span<const double> weights) {
    check_pool(z);
    if (weights.size() != kBaseCount) throw ShapeError("weighted voting needs five weights");
    Labels out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < kBaseCount; ++c) s += weights[c] * z(i, static_cast<Eigen::Index>(2 * c + 1));
        out[static_cast<std::size_t>(i)] = s >= 0.5 ? 1 : 0;
    }
    return out;
}

std::vector<double> accuracy_weights(const Matrix& z, const Labels& y) {
    check_pool(z);
    check_labels(z, y, "voting weights");
    if (y.empty()) throw DomainError("voting weights need at least one sample");
    std::vector<double> w(kBaseCount);
    for (std::size_t c = 0; c < kBaseCount; ++c) w[c] = metrics(confusion(y, base_predictions(z, c))).accuracy;
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v = total > 0 ? v / total : 1.0 / static_cast<double>(kBaseCount);
    return w;
}

SvmModel svm_meta_fit(const Matrix& f_train, const Labels& y_train, const SvmParams& params, std::uint64_t seed) {
    return train_svm(f_train, y_train, params, seed);
}

std::string MetaModel::serialize() const {
    ByteWriter w;
    net.write(w);
    return encode_infb(ModelType::meta_net, w.bytes());
}

MetaModel MetaModel::deserialize(std::string_view bytes) {
    const auto payload = decode_infb(bytes, ModelType::meta_net);
    ByteReader r(payload);
    MetaModel m{DenseNet::read(r)};
    if (!r.done()) throw SchemaError("trailing bytes in meta-learner payload");
    if (m.net.layers.empty() || m.net.output_width() != 1) throw SchemaError("meta-learner payload inconsistent");
    return m;
}

} // namespace infuse
