#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pcdc/autodiff.hpp"
#include "pcdc/dsp.hpp"
#include "pcdc/mat.hpp"
#include "pcdc/optim.hpp"
#include "pcdc/rvq.hpp"

namespace pcdc {

struct PartitionSpec {
    std::string name;
    int dim = 0;
    int frame_rate_divisor = 1;  // 1 = fast, 10 = slow
    int n_q = 0;
    int codebook_bits = 9;
};

/// Architecture + partition layout. `channels` holds the width after the
/// input convolution and after each stride block (strides.size() + 1 entries);
/// the decoder mirrors the encoder with transposed convolutions.
struct CodecConfig {
    std::string name = "custom";
    int sample_rate_hz = kDefaultSampleRate;
    int frame_samples = 320;
    std::vector<int> strides = {2, 4, 5, 8};
    std::vector<int> channels = {16, 24, 24, 32, 32};
    int input_kernel = 7;
    int slow_kernel_frames = 30;  // stride-10 conv over bottleneck frames
    std::vector<PartitionSpec> partitions;

    void validate() const;
    int fast_dim() const;
    int slow_dim() const;
    int total_dim() const { return fast_dim() + slow_dim(); }
    int frame_rate_hz() const { return sample_rate_hz / frame_samples; }
    int partition_index(const std::string& name) const;
    bool has_slow() const { return slow_dim() > 0; }

    std::string to_json_string() const;
    static CodecConfig from_json_string(const std::string& text);

    /// Shipped presets: noise-split, reverb-split (full-size partition and
    /// quantizer layouts) and noise-toy, reverb-toy (desk-scale training).
    static CodecConfig preset(const std::string& name);
    static std::vector<std::string> preset_names();
};

constexpr int kSlowDivisor = 10;

inline int slow_frame_count(int fast_frames) {
    return (fast_frames + kSlowDivisor - 1) / kSlowDivisor;
}

/// Per-partition embedding matrices; fast partitions have `fast_frames` rows,
/// slow partitions ceil(fast_frames / 10).
struct PartitionedEmbeddings {
    std::shared_ptr<const CodecConfig> config;
    int fast_frames = 0;
    std::vector<Matrix> parts;  // aligned with config->partitions

    const Matrix& part(const std::string& name) const;
};

PartitionedEmbeddings mask_partition(const PartitionedEmbeddings& z,
                                     const std::string& name);
std::pair<PartitionedEmbeddings, PartitionedEmbeddings> swap_partition(
    const PartitionedEmbeddings& z_a, const PartitionedEmbeddings& z_b,
    const std::string& name);
PartitionedEmbeddings scale_partition(const PartitionedEmbeddings& z,
                                      const std::string& name, double weight,
                                      bool allow_above_one = false);

// ---------------------------------------------------------------------------
// Streaming layer state

/// Rows indexed globally; the stream keeps only rows still needed by future
/// outputs, so chunked processing reproduces batch output bit for bit.
struct RowBuffer {
    int cols = 0;
    long start = 0;
    std::vector<double> data;

    long end() const { return start + long(data.size()) / std::max(cols, 1); }
    void append(const Matrix& m);
    const double* row(long g) const { return data.data() + size_t(g - start) * cols; }
    void drop_before(long g);
};

struct LayerState {
    RowBuffer buf;
    long emitted = 0;
};

// ---------------------------------------------------------------------------
// Codec

/// Encoder/decoder weights, per-partition quantizers and the configuration.
/// Parameters live in `params` under "enc.*" / "dec.*" names.
struct Codec {
    std::shared_ptr<const CodecConfig> config;
    ParameterStore params;
    std::vector<ResidualQuantizer> quantizers;

    static Codec create(const CodecConfig& cfg, uint64_t init_seed);

    /// Batch encode (input zero-padded to a frame multiple). Unquantized.
    PartitionedEmbeddings encode(const Waveform& x) const;

    /// Replace every partition with its RVQ reconstruction (n_q = 0 passes
    /// the raw embeddings through).
    PartitionedEmbeddings quantize_embeddings(const PartitionedEmbeddings& z) const;

    CodeGrid codes_for(const PartitionedEmbeddings& z) const;
    PartitionedEmbeddings embeddings_from_codes(const CodeGrid& codes) const;

    /// Batch decode to fast_frames * frame_samples samples.
    Waveform decode(const PartitionedEmbeddings& z) const;

    std::vector<std::string> encoder_param_names() const;
    std::vector<std::string> all_param_names() const;
};

/// Incremental encoder; feed sample chunks whose lengths are multiples of
/// frame_samples. Output of each call equals the corresponding rows of the
/// batch encode.
class EncoderStream {
public:
    EncoderStream(const Codec& codec);
    PartitionedEmbeddings process(const std::vector<double>& chunk);

private:
    struct Impl;
    const Codec& codec_;
    std::shared_ptr<Impl> impl_;
    std::vector<LayerState> states_;
};

/// Incremental decoder; feed embedding chunks (whole fast frames plus the
/// slow frames that become available with them, exactly as EncoderStream
/// emits). finish() flushes the transposed-convolution tails.
class DecoderStream {
public:
    DecoderStream(const Codec& codec);
    std::vector<double> process(const PartitionedEmbeddings& chunk);
    std::vector<double> finish();

private:
    struct Impl;
    std::vector<double> run(const Matrix& rows, bool final);
    const Codec& codec_;
    std::shared_ptr<Impl> impl_;
    std::vector<LayerState> states_;
    RowBuffer slow_history_;
    long fast_consumed_ = 0;
};

// ---------------------------------------------------------------------------
// Training graph

struct TapeEmbeddings {
    std::vector<Tape::Id> parts;  // unquantized embedding nodes
    int fast_frames = 0;
};

/// Encoder forward on the tape (batch form, same math as the plain path).
TapeEmbeddings tape_encode(Tape& tape, Codec& codec, const Waveform& x);

/// Quantize each partition and wrap it in a straight-through node; codebooks
/// act as constants. Collected per-partition inputs are returned for EMA
/// updates. n_q = 0 partitions pass through unquantized.
struct TapeQuantized {
    std::vector<Tape::Id> parts;
    int fast_frames = 0;
};
TapeQuantized tape_quantize(Tape& tape, Codec& codec, const TapeEmbeddings& z);

/// Decoder forward on the tape; returns the [T x 1] waveform node.
Tape::Id tape_decode(Tape& tape, Codec& codec, const std::vector<Tape::Id>& parts,
                     int fast_frames);

}  // namespace pcdc
