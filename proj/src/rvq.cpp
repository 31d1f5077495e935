#include "pcdc/rvq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcdc/common.hpp"

namespace pcdc {

ResidualQuantizer ResidualQuantizer::make(int dim, int n_q, int bits) {
    require(dim >= 1, "quantizer dim must be >= 1");
    require(n_q >= 0, "quantizer n_q must be >= 0");
    require(bits >= 1 && bits <= 16, "codebook bits must be in [1, 16]");
    ResidualQuantizer q;
    q.dim = dim;
    q.n_q = n_q;
    q.bits = bits;
    q.layers.resize(size_t(n_q));
    for (auto& cb : q.layers) {
        cb.bits = bits;
        cb.dim = dim;
        cb.entries.assign(size_t(1 << bits) * size_t(dim), 0.0);
        cb.ema_counts.assign(size_t(1 << bits), 0.0);
        cb.ema_sums.assign(size_t(1 << bits) * size_t(dim), 0.0);
    }
    return q;
}

namespace {

int nearest_entry(const Codebook& cb, const double* v) {
    int best = 0;
    double best_d = 0.0;
    for (int e = 0; e < cb.num_entries(); ++e) {
        const double* c = cb.entry(e);
        double d = 0.0;
        for (int i = 0; i < cb.dim; ++i) {
            double diff = v[i] - c[i];
            d += diff * diff;
        }
        if (e == 0 || d < best_d) {
            best_d = d;
            best = e;
        }
    }
    return best;
}

}  // namespace

QuantizeResult quantize(std::span<const double> v, const ResidualQuantizer& q) {
    require(int(v.size()) == q.dim, "quantize: dimension mismatch");
    QuantizeResult r;
    r.quantized.assign(size_t(q.dim), 0.0);
    r.residual.assign(v.begin(), v.end());
    r.indices.reserve(size_t(q.n_q));
    for (int l = 0; l < q.n_q; ++l) {
        const Codebook& cb = q.layers[size_t(l)];
        int e = nearest_entry(cb, r.residual.data());
        r.indices.push_back(e);
        const double* c = cb.entry(e);
        for (int i = 0; i < q.dim; ++i) {
            r.quantized[size_t(i)] += c[i];
            r.residual[size_t(i)] -= c[i];
        }
    }
    return r;
}

QuantizedFrames quantize_frames(const Matrix& frames, const ResidualQuantizer& q) {
    require(frames.cols == q.dim, "quantize_frames: dimension mismatch");
    QuantizedFrames out;
    out.quantized = Matrix(frames.rows, frames.cols);
    out.indices.assign(size_t(frames.rows) * size_t(q.n_q), 0);
    std::vector<double> residual(static_cast<size_t>(q.dim));
    for (int f = 0; f < frames.rows; ++f) {
        const double* src = frames.row(f);
        std::copy(src, src + q.dim, residual.begin());
        double* qrow = out.quantized.row(f);
        for (int l = 0; l < q.n_q; ++l) {
            const Codebook& cb = q.layers[size_t(l)];
            int e = nearest_entry(cb, residual.data());
            out.indices[size_t(f) * q.n_q + l] = uint16_t(e);
            const double* c = cb.entry(e);
            for (int i = 0; i < q.dim; ++i) {
                qrow[i] += c[i];
                residual[size_t(i)] -= c[i];
            }
        }
    }
    return out;
}

Matrix dequantize_frames(const std::vector<uint16_t>& indices, int num_frames,
                         const ResidualQuantizer& q) {
    require(indices.size() == size_t(num_frames) * size_t(q.n_q),
            "dequantize_frames: index count mismatch");
    Matrix out(num_frames, q.dim);
    for (int f = 0; f < num_frames; ++f) {
        double* row = out.row(f);
        for (int l = 0; l < q.n_q; ++l) {
            const Codebook& cb = q.layers[size_t(l)];
            int e = indices[size_t(f) * q.n_q + l];
            require(e < cb.num_entries(), "dequantize_frames: index out of range");
            const double* c = cb.entry(e);
            for (int i = 0; i < q.dim; ++i) row[i] += c[i];
        }
    }
    return out;
}

namespace {

// Lloyd iterations seeded from evenly spaced batch vectors. Deterministic:
// no RNG, empty clusters refilled round-robin from the batch.
void kmeans_init(Codebook& cb, const Matrix& batch) {
    const int k = cb.num_entries();
    const int b = batch.rows;
    const int d = cb.dim;
    for (int e = 0; e < k; ++e) {
        int src = int((int64_t(e) * b) / k);
        std::copy(batch.row(src), batch.row(src) + d, cb.entry(e));
    }
    std::vector<int> assign(static_cast<size_t>(b));
    std::vector<double> sums(static_cast<size_t>(k) * size_t(d));
    std::vector<int> counts(static_cast<size_t>(k));
    for (int iter = 0; iter < 10; ++iter) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < b; ++i) {
            int e = nearest_entry(cb, batch.row(i));
            assign[size_t(i)] = e;
            ++counts[size_t(e)];
            const double* x = batch.row(i);
            double* s = sums.data() + size_t(e) * d;
            for (int j = 0; j < d; ++j) s[j] += x[j];
        }
        int refill = 0;
        for (int e = 0; e < k; ++e) {
            if (counts[size_t(e)] > 0) {
                const double* s = sums.data() + size_t(e) * d;
                double inv = 1.0 / counts[size_t(e)];
                double* c = cb.entry(e);
                for (int j = 0; j < d; ++j) c[j] = s[j] * inv;
            } else {
                std::copy(batch.row(refill % b), batch.row(refill % b) + d, cb.entry(e));
                ++refill;
            }
        }
    }
    // Warm-start the EMA statistics at the k-means solution.
    std::fill(cb.ema_counts.begin(), cb.ema_counts.end(), 0.0);
    std::fill(cb.ema_sums.begin(), cb.ema_sums.end(), 0.0);
    for (int i = 0; i < b; ++i) {
        int e = nearest_entry(cb, batch.row(i));
        cb.ema_counts[size_t(e)] += 1.0;
        const double* x = batch.row(i);
        double* s = cb.ema_sums.data() + size_t(e) * d;
        for (int j = 0; j < d; ++j) s[j] += x[j];
    }
    for (int e = 0; e < k; ++e) {
        if (cb.ema_counts[size_t(e)] == 0.0) {
            cb.ema_counts[size_t(e)] = 1.0;
            double* s = cb.ema_sums.data() + size_t(e) * d;
            const double* c = cb.entry(e);
            for (int j = 0; j < d; ++j) s[j] = c[j];
        }
    }
}

}  // namespace

void train_update(ResidualQuantizer& q, const Matrix& batch) {
    require(batch.rows > 0, "train_update: empty batch");
    require(batch.cols == q.dim, "train_update: dimension mismatch");
    if (q.frozen || q.n_q == 0) return;

    const int b = batch.rows;
    const int d = q.dim;

    // Layer inputs: residuals left by the preceding layers, computed with the
    // codebooks as they were before this update.
    Matrix residual = batch;
    for (int l = 0; l < q.n_q; ++l) {
        Codebook& cb = q.layers[size_t(l)];
        if (!q.initialized) kmeans_init(cb, residual);

        const Matrix layer_input = residual;
        const int k = cb.num_entries();
        std::vector<int> assign(static_cast<size_t>(b));
        std::vector<double> batch_sums(size_t(k) * size_t(d), 0.0);
        std::vector<int> batch_counts(size_t(k), 0);
        std::vector<double> errs(static_cast<size_t>(b));
        for (int i = 0; i < b; ++i) {
            const double* x = layer_input.row(i);
            int e = nearest_entry(cb, x);
            assign[size_t(i)] = e;
            ++batch_counts[size_t(e)];
            double* s = batch_sums.data() + size_t(e) * d;
            double err = 0.0;
            const double* c = cb.entry(e);
            for (int j = 0; j < d; ++j) {
                s[j] += x[j];
                double diff = x[j] - c[j];
                err += diff * diff;
            }
            errs[size_t(i)] = err;
        }

        // Advance residuals with the pre-update codewords actually assigned.
        for (int i = 0; i < b; ++i) {
            const double* c = cb.entry(assign[size_t(i)]);
            double* x = residual.row(i);
            for (int j = 0; j < d; ++j) x[j] -= c[j];
        }

        for (int e = 0; e < k; ++e) {
            cb.ema_counts[size_t(e)] =
                kEmaDecay * cb.ema_counts[size_t(e)] + (1.0 - kEmaDecay) * batch_counts[size_t(e)];
            double* s = cb.ema_sums.data() + size_t(e) * d;
            const double* bs = batch_sums.data() + size_t(e) * d;
            for (int j = 0; j < d; ++j)
                s[j] = kEmaDecay * s[j] + (1.0 - kEmaDecay) * bs[j];
        }

        // Dead entries take the batch vectors this layer quantized worst.
        double dead_threshold = std::max(1e-4, 0.02 * double(b) / double(k));
        std::vector<int> order(static_cast<size_t>(b));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int c) { return errs[size_t(a)] > errs[size_t(c)]; });
        int next_worst = 0;
        for (int e = 0; e < k; ++e) {
            if (cb.ema_counts[size_t(e)] >= dead_threshold) {
                const double* s = cb.ema_sums.data() + size_t(e) * d;
                double inv = 1.0 / cb.ema_counts[size_t(e)];
                double* c = cb.entry(e);
                for (int j = 0; j < d; ++j) c[j] = s[j] * inv;
            } else if (next_worst < b) {
                int src = order[size_t(next_worst++)];
                double* c = cb.entry(e);
                const double* x = layer_input.row(src);
                for (int j = 0; j < d; ++j) c[j] = x[j];
                cb.ema_counts[size_t(e)] = double(b) / double(k);
                double* s = cb.ema_sums.data() + size_t(e) * d;
                for (int j = 0; j < d; ++j) s[j] = c[j] * cb.ema_counts[size_t(e)];
            }
        }
    }
    q.initialized = true;
}

double quantization_mse(const ResidualQuantizer& q, const Matrix& batch) {
    require(batch.rows > 0, "quantization_mse: empty batch");
    double total = 0.0;
    for (int i = 0; i < batch.rows; ++i) {
        const double* x = batch.row(i);
        QuantizeResult r = quantize(std::span<const double>(x, size_t(q.dim)), q);
        for (int j = 0; j < q.dim; ++j) total += r.residual[size_t(j)] * r.residual[size_t(j)];
    }
    return total / (double(batch.rows) * double(q.dim));
}

double bitrate_bps(int frame_rate_divisor, int n_q, int codebook_bits,
                   double base_frame_rate_hz) {
    require(frame_rate_divisor >= 1, "bitrate: divisor must be >= 1");
    return (base_frame_rate_hz / double(frame_rate_divisor)) * double(codebook_bits) *
           double(n_q);
}

}  // namespace pcdc
