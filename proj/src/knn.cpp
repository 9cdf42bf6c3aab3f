#include "infuse/knn.hpp"

#include "infuse/error.hpp"
#include "infuse/parallel.hpp"
#include "infuse/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace infuse {

namespace {

constexpr std::size_t kQueryChunk = 64;

double exact_sq_distance(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double t = a[k] - b[k];
        s += t * t;
    }
    return s;
}

} // namespace

KnnModel train_knn(const Matrix& x, const Labels& y, std::size_t k) {
    if (x.rows() == 0) throw TrainingError("kNN needs at least one reference row");
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("train_knn: label count mismatch");
    if (k < 1 || k > y.size()) throw TrainingError("kNN k must be in [1, reference count]");
    return KnnModel{x, y, k};
}

Vector KnnModel::attack_probability(const Matrix& queries) const {
    if (queries.cols() != reference.cols()) throw ShapeError("kNN query width mismatch");
    const std::size_t n_ref = static_cast<std::size_t>(reference.rows());
    const std::size_t dim = static_cast<std::size_t>(reference.cols());
    const Vector ref_norms = reference.rowwise().squaredNorm();
    const double max_ref_norm = n_ref ? ref_norms.maxCoeff() : 0.0;
    Vector out(queries.rows());

    parallel_chunks(static_cast<std::size_t>(queries.rows()), kQueryChunk, [&](std::size_t lo, std::size_t hi) {
        const auto rows = static_cast<Eigen::Index>(hi - lo);
        const auto block = queries.middleRows(static_cast<Eigen::Index>(lo), rows);
        const Matrix dots = block * reference.transpose();
        std::vector<std::size_t> cand;
        std::vector<std::pair<double, std::size_t>> scored;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double* q = block.row(r).data();
            const double qn = block.row(r).squaredNorm();
            const double slack = 1e-9 * (qn + max_ref_norm) + 1e-12;
            auto approx = [&](std::size_t t) {
                return qn + ref_norms[static_cast<Eigen::Index>(t)] - 2.0 * dots(r, static_cast<Eigen::Index>(t));
            };
            // k-th smallest approximate distance via a bounded max-heap.
            std::priority_queue<double> heap;
            for (std::size_t t = 0; t < n_ref; ++t) {
                const double a = approx(t);
                if (heap.size() < k) heap.push(a);
                else if (a < heap.top()) {
                    heap.pop();
                    heap.push(a);
                }
            }
            const double threshold = heap.top() + slack;
            cand.clear();
            for (std::size_t t = 0; t < n_ref; ++t) {
                if (approx(t) <= threshold) cand.push_back(t);
            }
            scored.clear();
            bool exact_match = false;
            for (auto t : cand) {
                const double d2 = exact_sq_distance(q, reference.row(static_cast<Eigen::Index>(t)).data(), dim);
                if (d2 == 0.0) exact_match = true;
                scored.emplace_back(d2, t);
            }
            if (exact_match) {
                double hits = 0.0;
                double total = 0.0;
                for (const auto& [d2, t] : scored) {
                    if (d2 == 0.0) {
                        total += 1.0;
                        hits += labels[t];
                    }
                }
                out[static_cast<Eigen::Index>(lo) + r] = hits / total;
                continue;
            }
            std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first < b.first;
                if (labels[a.second] != labels[b.second]) return labels[a.second] < labels[b.second];
                const double* ra = reference.row(static_cast<Eigen::Index>(a.second)).data();
                const double* rb = reference.row(static_cast<Eigen::Index>(b.second)).data();
                return std::lexicographical_compare(ra, ra + dim, rb, rb + dim);
            });
            double hits = 0.0;
            double total = 0.0;
            for (std::size_t s = 0; s < k; ++s) {
                const double w = 1.0 / std::sqrt(scored[s].first);
                total += w;
                hits += w * labels[scored[s].second];
            }
            out[static_cast<Eigen::Index>(lo) + r] = hits / total;
        }
    });
    return out;
}

std::string KnnModel::serialize() const {
    ByteWriter w;
    w.u64(k);
    w.matrix(reference);
    w.labels(labels);
    return encode_infb(ModelType::knn, w.bytes());
}

KnnModel KnnModel::deserialize(std::string_view bytes) {
    const auto payload = decode_infb(bytes, ModelType::knn);
    ByteReader r(payload);
    KnnModel m;
    m.k = r.u64();
    m.reference = r.matrix();
    m.labels = r.labels();
    if (static_cast<Eigen::Index>(m.labels.size()) != m.reference.rows() || m.k < 1 || m.k > m.labels.size()) {
        throw SchemaError("kNN payload inconsistent");
    }
    return m;
}

} // namespace infuse
