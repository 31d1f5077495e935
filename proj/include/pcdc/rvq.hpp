#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcdc/mat.hpp"

namespace pcdc {

/// One vector-quantization layer: 2^bits codewords plus EMA statistics used
/// by the training update.
struct Codebook {
    int bits = 0;
    int dim = 0;
    std::vector<double> entries;     // [2^bits * dim]
    std::vector<double> ema_counts;  // [2^bits]
    std::vector<double> ema_sums;    // [2^bits * dim]

    int num_entries() const { return 1 << bits; }
    const double* entry(int i) const { return entries.data() + size_t(i) * dim; }
    double* entry(int i) { return entries.data() + size_t(i) * dim; }
};

/// Residual cascade: each layer quantizes the residual left by the previous
/// one. n_q == 0 acts as a pass-through (quantized = 0, residual = input).
struct ResidualQuantizer {
    int dim = 0;
    int n_q = 0;
    int bits = 0;
    std::vector<Codebook> layers;
    bool initialized = false;  // k-means seeding done
    bool frozen = false;

    static ResidualQuantizer make(int dim, int n_q, int bits);
};

struct QuantizeResult {
    std::vector<int> indices;      // one per layer
    std::vector<double> quantized; // sum of chosen codewords
    std::vector<double> residual;  // input minus quantized
};

/// Nearest codeword (squared Euclidean) per layer, first index on ties.
QuantizeResult quantize(std::span<const double> v, const ResidualQuantizer& q);

/// Batch form over embedding frames [F x dim]; returns per-frame layer
/// indices and the quantized frames.
struct QuantizedFrames {
    std::vector<uint16_t> indices;  // [F * n_q]
    Matrix quantized;               // [F x dim]
};
QuantizedFrames quantize_frames(const Matrix& frames, const ResidualQuantizer& q);

/// Sum of codewords for stored indices; exact counterpart of quantize.
Matrix dequantize_frames(const std::vector<uint16_t>& indices, int num_frames,
                         const ResidualQuantizer& q);

/// EMA codebook update (decay 0.99) toward assigned residuals, with k-means
/// seeding on the first batch and deterministic dead-entry reseeding.
/// No-op when frozen.
void train_update(ResidualQuantizer& q, const Matrix& batch);

/// Mean squared quantization error over a batch.
double quantization_mse(const ResidualQuantizer& q, const Matrix& batch);

constexpr double kEmaDecay = 0.99;

/// Per-frame, per-partition, per-layer codebook indices for one stream.
struct CodeGrid {
    struct PartitionCodes {
        int frames = 0;
        int n_q = 0;
        std::vector<uint16_t> idx;  // [frames * n_q]
        uint16_t at(int f, int layer) const { return idx[size_t(f) * n_q + layer]; }
        bool operator==(const PartitionCodes&) const = default;
    };
    std::vector<PartitionCodes> partitions;

    bool operator==(const CodeGrid&) const = default;
};

/// Effective bitrate in bits/s: (base_frame_rate / divisor) * bits * n_q.
double bitrate_bps(int frame_rate_divisor, int n_q, int codebook_bits,
                   double base_frame_rate_hz);

}  // namespace pcdc
