#include "pcdc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace pcdc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void CodecConfig::validate() const {
    if (sample_rate_hz <= 0) throw ConfigError("config: sample_rate must be positive");
    if (frame_samples <= 0) throw ConfigError("config: frame_samples must be positive");
    if (strides.empty()) throw ConfigError("config: need at least one stride");
    int prod = 1;
    for (int s : strides) {
        if (s < 1) throw ConfigError("config: strides must be >= 1");
        prod *= s;
    }
    if (prod != frame_samples)
        throw ConfigError("config: product of strides must equal frame_samples");
    if (channels.size() != strides.size() + 1)
        throw ConfigError("config: channels must have strides.size()+1 entries");
    for (int c : channels)
        if (c < 1) throw ConfigError("config: channel widths must be >= 1");
    if (input_kernel < 1 || slow_kernel_frames < 1)
        throw ConfigError("config: kernel sizes must be >= 1");
    if (partitions.empty()) throw ConfigError("config: need at least one partition");
    std::set<std::string> names;
    int slow_count = 0;
    for (const auto& p : partitions) {
        if (p.name.empty() || p.name.size() > 255)
            throw ConfigError("config: partition names must be 1..255 bytes");
        if (!names.insert(p.name).second)
            throw ConfigError("config: duplicate partition name: " + p.name);
        if (p.dim < 1) throw ConfigError("config: partition dim must be >= 1");
        if (p.frame_rate_divisor != 1 && p.frame_rate_divisor != kSlowDivisor)
            throw ConfigError("config: frame_rate_divisor must be 1 or 10");
        if (p.frame_rate_divisor == kSlowDivisor) ++slow_count;
        if (p.n_q < 0) throw ConfigError("config: n_q must be >= 0");
        if (p.codebook_bits < 1 || p.codebook_bits > 16)
            throw ConfigError("config: codebook_bits must be in [1, 16]");
    }
    if (slow_count > 1) throw ConfigError("config: at most one slow partition");
    if (fast_dim() < 1) throw ConfigError("config: need at least one fast partition");
    if (sample_rate_hz % frame_samples != 0)
        throw ConfigError("config: frame_samples must divide sample_rate");
}

int CodecConfig::fast_dim() const {
    int d = 0;
    for (const auto& p : partitions)
        if (p.frame_rate_divisor == 1) d += p.dim;
    return d;
}

int CodecConfig::slow_dim() const {
    int d = 0;
    for (const auto& p : partitions)
        if (p.frame_rate_divisor == kSlowDivisor) d += p.dim;
    return d;
}

int CodecConfig::partition_index(const std::string& name) const {
    for (size_t i = 0; i < partitions.size(); ++i)
        if (partitions[i].name == name) return int(i);
    throw LookupError("unknown partition: " + name);
}

std::string CodecConfig::to_json_string() const {
    json j;
    j["name"] = name;
    j["sample_rate_hz"] = sample_rate_hz;
    j["frame_samples"] = frame_samples;
    j["strides"] = strides;
    j["channels"] = channels;
    j["input_kernel"] = input_kernel;
    j["slow_kernel_frames"] = slow_kernel_frames;
    j["partitions"] = json::array();
    for (const auto& p : partitions)
        j["partitions"].push_back({{"name", p.name},
                                   {"dim", p.dim},
                                   {"frame_rate_divisor", p.frame_rate_divisor},
                                   {"n_q", p.n_q},
                                   {"codebook_bits", p.codebook_bits}});
    return j.dump(2);
}

CodecConfig CodecConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    CodecConfig c;
    try {
        c.name = j.value("name", std::string("custom"));
        c.sample_rate_hz = j.value("sample_rate_hz", kDefaultSampleRate);
        c.frame_samples = j.value("frame_samples", 320);
        if (j.contains("strides")) c.strides = j["strides"].get<std::vector<int>>();
        if (j.contains("channels")) c.channels = j["channels"].get<std::vector<int>>();
        c.input_kernel = j.value("input_kernel", 7);
        c.slow_kernel_frames = j.value("slow_kernel_frames", 30);
        c.partitions.clear();
        for (const auto& pj : j.at("partitions")) {
            PartitionSpec p;
            p.name = pj.at("name").get<std::string>();
            p.dim = pj.at("dim").get<int>();
            p.frame_rate_divisor = pj.value("frame_rate_divisor", 1);
            p.n_q = pj.at("n_q").get<int>();
            p.codebook_bits = pj.value("codebook_bits", 9);
            c.partitions.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: missing or bad field: ") + e.what());
    }
    c.validate();
    return c;
}

CodecConfig CodecConfig::preset(const std::string& name) {
    CodecConfig c;
    c.name = name;
    if (name == "noise-split") {
        c.channels = {32, 48, 48, 64, 64};
        c.partitions = {{"speech", 128, 1, 14, 9}, {"noise", 128, 1, 14, 9}};
    } else if (name == "reverb-split") {
        c.channels = {32, 48, 48, 64, 64};
        c.partitions = {{"speech", 54, 1, 14, 9}, {"reverb", 10, kSlowDivisor, 4, 9}};
    } else if (name == "noise-toy") {
        c.channels = {16, 24, 24, 32, 32};
        c.partitions = {{"speech", 12, 1, 4, 6}, {"noise", 12, 1, 4, 6}};
    } else if (name == "reverb-toy") {
        c.channels = {16, 24, 24, 32, 32};
        c.partitions = {{"speech", 16, 1, 4, 6}, {"reverb", 4, kSlowDivisor, 4, 6}};
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    c.validate();
    return c;
}

std::vector<std::string> CodecConfig::preset_names() {
    return {"noise-split", "reverb-split", "noise-toy", "reverb-toy"};
}

// ---------------------------------------------------------------------------
// Partition edits

const Matrix& PartitionedEmbeddings::part(const std::string& name) const {
    return parts[size_t(config->partition_index(name))];
}

PartitionedEmbeddings mask_partition(const PartitionedEmbeddings& z,
                                     const std::string& name) {
    return scale_partition(z, name, 0.0);
}

std::pair<PartitionedEmbeddings, PartitionedEmbeddings> swap_partition(
    const PartitionedEmbeddings& z_a, const PartitionedEmbeddings& z_b,
    const std::string& name) {
    int idx = z_a.config->partition_index(name);
    require(z_b.config->partition_index(name) == idx,
            "swap_partition: configurations disagree");
    require(z_a.fast_frames == z_b.fast_frames, "swap_partition: frame count mismatch");
    require(z_a.parts[size_t(idx)].same_shape(z_b.parts[size_t(idx)]),
            "swap_partition: partition shape mismatch");
    PartitionedEmbeddings a = z_a, b = z_b;
    std::swap(a.parts[size_t(idx)], b.parts[size_t(idx)]);
    return {std::move(a), std::move(b)};
}

PartitionedEmbeddings scale_partition(const PartitionedEmbeddings& z,
                                      const std::string& name, double weight,
                                      bool allow_above_one) {
    int idx = z.config->partition_index(name);
    if (!(weight >= 0.0) || (!allow_above_one && weight > 1.0))
        throw ContractViolation("scale_partition: weight must be in [0, 1]");
    PartitionedEmbeddings out = z;
    for (double& v : out.parts[size_t(idx)].v) v *= weight;
    return out;
}

// ---------------------------------------------------------------------------
// RowBuffer

void RowBuffer::append(const Matrix& m) {
    if (cols == 0) cols = m.cols;
    require(m.cols == cols, "RowBuffer: column mismatch");
    data.insert(data.end(), m.v.begin(), m.v.end());
}

void RowBuffer::drop_before(long g) {
    if (g <= start) return;
    long keep_from = std::min(g, end());
    data.erase(data.begin(), data.begin() + size_t(keep_from - start) * size_t(cols));
    start = keep_from;
}

// ---------------------------------------------------------------------------
// Network structure

namespace {

struct StreamOp {
    enum Kind { Conv, TConv, Elu, SaveSkip, AddSkip } kind;
    std::string w, b;
    int K = 0;
    int stride = 1;
    int state_index = -1;
};

struct NetDef {
    std::vector<StreamOp> ops;
    int num_states = 0;
};

void push_conv(NetDef& net, const std::string& prefix, int K, int stride) {
    StreamOp op;
    op.kind = StreamOp::Conv;
    op.w = prefix + ".w";
    op.b = prefix + ".b";
    op.K = K;
    op.stride = stride;
    op.state_index = net.num_states++;
    net.ops.push_back(std::move(op));
}

void push_tconv(NetDef& net, const std::string& prefix, int K, int stride) {
    StreamOp op;
    op.kind = StreamOp::TConv;
    op.w = prefix + ".w";
    op.b = prefix + ".b";
    op.K = K;
    op.stride = stride;
    op.state_index = net.num_states++;
    net.ops.push_back(std::move(op));
}

void push_simple(NetDef& net, StreamOp::Kind kind) {
    StreamOp op;
    op.kind = kind;
    net.ops.push_back(std::move(op));
}

void push_res_unit(NetDef& net, const std::string& prefix) {
    push_simple(net, StreamOp::SaveSkip);
    push_simple(net, StreamOp::Elu);
    push_conv(net, prefix + ".c3", 3, 1);
    push_simple(net, StreamOp::Elu);
    push_conv(net, prefix + ".c1", 1, 1);
    push_simple(net, StreamOp::AddSkip);
}

// Encoder trunk: input conv, then residual unit + strided conv per block,
// then a trailing activation feeding the partition heads.
NetDef encoder_trunk(const CodecConfig& c) {
    NetDef net;
    push_conv(net, "enc.in", c.input_kernel, 1);
    for (size_t i = 0; i < c.strides.size(); ++i) {
        std::string b = "enc.b" + std::to_string(i);
        push_res_unit(net, b);
        push_simple(net, StreamOp::Elu);
        push_conv(net, b + ".down", 2 * c.strides[i], c.strides[i]);
    }
    push_simple(net, StreamOp::Elu);
    return net;
}

NetDef decoder_net(const CodecConfig& c) {
    NetDef net;
    push_conv(net, "dec.in", 3, 1);
    for (size_t ri = 0; ri < c.strides.size(); ++ri) {
        size_t i = c.strides.size() - 1 - ri;
        std::string b = "dec.b" + std::to_string(i);
        push_simple(net, StreamOp::Elu);
        push_tconv(net, b + ".up", 2 * c.strides[i], c.strides[i]);
        push_res_unit(net, b);
    }
    push_simple(net, StreamOp::Elu);
    push_conv(net, "dec.out", c.input_kernel, 1);
    return net;
}

}  // namespace

// ---------------------------------------------------------------------------
// Plain (streaming) layer math

namespace {

struct ConvWeights {
    const double* w;  // [K*Ci x Co] for conv, [K*Co x Cm] for tconv
    const double* b;
    int rows, cols;
};

ConvWeights weights_of(const ParameterStore& ps, const StreamOp& op) {
    const Parameter& w = ps.get(op.w);
    const Parameter& b = ps.get(op.b);
    ConvWeights cw;
    cw.w = w.value.data();
    cw.b = b.value.data();
    require(w.shape.size() == 3, "conv weight must be rank 3");
    cw.rows = w.shape[0] * w.shape[1];
    cw.cols = w.shape[2];
    return cw;
}

/// Emit causal-conv output frames [state.emitted, t_end) from buffered rows.
Matrix conv_emit(const ConvWeights& W, int K, int stride, LayerState& st) {
    const int Ci = W.rows / K;
    const int Co = W.cols;
    require(st.buf.cols == Ci, "conv: channel mismatch");
    long consumed = st.buf.end();
    long t_end = (consumed + stride - 1) / stride;
    long t0 = st.emitted;
    Matrix out(int(t_end - t0), Co);
    for (long t = t0; t < t_end; ++t) {
        double* yrow = out.row(int(t - t0));
        for (int co = 0; co < Co; ++co) yrow[co] = W.b[co];
        long base = t * stride - (K - 1);
        for (int k = 0; k < K; ++k) {
            long xi = base + k;
            if (xi < 0) continue;
            const double* xrow = st.buf.row(xi);
            for (int ci = 0; ci < Ci; ++ci) {
                double xv = xrow[ci];
                const double* wrow = W.w + size_t(k * Ci + ci) * Co;
                for (int co = 0; co < Co; ++co) yrow[co] += xv * wrow[co];
            }
        }
    }
    st.emitted = t_end;
    st.buf.drop_before(t_end * stride - (K - 1));
    return out;
}

/// Emit transposed-conv output samples available so far (all pending ones
/// when `final`).
Matrix tconv_emit(const ConvWeights& W, int K, int stride, LayerState& st, bool final) {
    const int Co = W.rows / K;
    const int Cm = W.cols;
    require(st.buf.cols == Cm, "tconv: channel mismatch");
    long tin = st.buf.end();
    long limit = final ? tin * stride : std::max<long>(0, tin * stride - (K - 1));
    long i0 = st.emitted;
    if (limit < i0) limit = i0;
    Matrix out(int(limit - i0), Co);
    for (long i = i0; i < limit; ++i) {
        double* orow = out.row(int(i - i0));
        for (int co = 0; co < Co; ++co) orow[co] = W.b[co];
        long t_lo = (i + stride - 1) / stride;
        long t_hi = std::min<long>(tin - 1, (i + K - 1) / stride);
        for (long t = t_lo; t <= t_hi; ++t) {
            int k = int(i - t * stride + (K - 1));
            const double* xrow = st.buf.row(t);
            for (int co = 0; co < Co; ++co) {
                const double* wrow = W.w + size_t(k * Co + co) * Cm;
                double acc = 0.0;
                for (int cm = 0; cm < Cm; ++cm) acc += wrow[cm] * xrow[cm];
                orow[co] += acc;
            }
        }
    }
    st.emitted = limit;
    st.buf.drop_before((limit + stride - 1) / stride);
    return out;
}

Matrix elu_mat(Matrix m) {
    for (double& v : m.v) v = v > 0.0 ? v : std::expm1(v);
    return m;
}

Matrix run_net(const NetDef& net, const ParameterStore& ps,
               std::vector<LayerState>& states, Matrix rows, bool final) {
    Matrix skip;
    for (const StreamOp& op : net.ops) {
        switch (op.kind) {
            case StreamOp::Conv: {
                LayerState& st = states[size_t(op.state_index)];
                if (rows.rows > 0) st.buf.append(rows);
                if (st.buf.cols == 0) st.buf.cols = weights_of(ps, op).rows / op.K;
                rows = conv_emit(weights_of(ps, op), op.K, op.stride, st);
                break;
            }
            case StreamOp::TConv: {
                LayerState& st = states[size_t(op.state_index)];
                if (rows.rows > 0) st.buf.append(rows);
                if (st.buf.cols == 0) st.buf.cols = weights_of(ps, op).cols;
                rows = tconv_emit(weights_of(ps, op), op.K, op.stride, st, final);
                break;
            }
            case StreamOp::Elu:
                rows = elu_mat(std::move(rows));
                break;
            case StreamOp::SaveSkip:
                skip = rows;
                break;
            case StreamOp::AddSkip:
                require(rows.same_shape(skip), "skip connection misaligned");
                for (size_t i = 0; i < rows.size(); ++i) rows.v[i] += skip.v[i];
                break;
        }
    }
    return rows;
}

void init_param_normal(Parameter& p, double stddev, uint64_t seed) {
    Rng rng(mix_seed(seed, fnv1a(p.name)));
    for (double& v : p.value) v = rng.normal(0.0, stddev);
}

void create_conv_params(ParameterStore& ps, const std::string& prefix, int K, int Ci,
                        int Co, uint64_t seed) {
    Parameter& w = ps.create(prefix + ".w", {K, Ci, Co});
    init_param_normal(w, std::sqrt(1.0 / double(K * Ci)), seed);
    ps.create(prefix + ".b", {1, 1, Co});
}

void create_tconv_params(ParameterStore& ps, const std::string& prefix, int K, int Co,
                         int Cm, int stride, uint64_t seed) {
    Parameter& w = ps.create(prefix + ".w", {K, Co, Cm});
    double fan_in = double(Cm) * double((K + stride - 1) / stride);
    init_param_normal(w, std::sqrt(1.0 / fan_in), seed);
    ps.create(prefix + ".b", {1, 1, Co});
}

}  // namespace

// ---------------------------------------------------------------------------
// Codec

Codec Codec::create(const CodecConfig& cfg, uint64_t init_seed) {
    cfg.validate();
    Codec codec;
    codec.config = std::make_shared<CodecConfig>(cfg);
    const auto& c = *codec.config;

    create_conv_params(codec.params, "enc.in", c.input_kernel, 1, c.channels[0],
                       init_seed);
    for (size_t i = 0; i < c.strides.size(); ++i) {
        std::string b = "enc.b" + std::to_string(i);
        int ci = c.channels[i];
        int co = c.channels[i + 1];
        create_conv_params(codec.params, b + ".c3", 3, ci, ci, init_seed);
        create_conv_params(codec.params, b + ".c1", 1, ci, ci, init_seed);
        create_conv_params(codec.params, b + ".down", 2 * c.strides[i], ci, co,
                           init_seed);
    }
    int bottleneck = c.channels.back();
    create_conv_params(codec.params, "enc.head", 3, bottleneck, c.fast_dim(), init_seed);
    if (c.has_slow())
        create_conv_params(codec.params, "enc.slow", c.slow_kernel_frames, bottleneck,
                           c.slow_dim(), init_seed);

    create_conv_params(codec.params, "dec.in", 3, c.total_dim(), bottleneck, init_seed);
    for (size_t ri = 0; ri < c.strides.size(); ++ri) {
        size_t i = c.strides.size() - 1 - ri;
        std::string b = "dec.b" + std::to_string(i);
        int hi = c.channels[i + 1];
        int lo = c.channels[i];
        create_tconv_params(codec.params, b + ".up", 2 * c.strides[i], lo, hi,
                            c.strides[i], init_seed);
        create_conv_params(codec.params, b + ".c3", 3, lo, lo, init_seed);
        create_conv_params(codec.params, b + ".c1", 1, lo, lo, init_seed);
    }
    create_conv_params(codec.params, "dec.out", c.input_kernel, c.channels[0], 1,
                       init_seed);

    for (const auto& p : c.partitions)
        codec.quantizers.push_back(ResidualQuantizer::make(p.dim, p.n_q, p.codebook_bits));
    return codec;
}

std::vector<std::string> Codec::encoder_param_names() const {
    std::vector<std::string> out;
    for (const auto& n : params.names())
        if (n.rfind("enc.", 0) == 0) out.push_back(n);
    return out;
}

std::vector<std::string> Codec::all_param_names() const { return params.names(); }

PartitionedEmbeddings Codec::encode(const Waveform& x) const {
    require(!x.samples.empty(), "encode: empty input");
    std::vector<double> padded = x.samples;
    size_t rem = padded.size() % size_t(config->frame_samples);
    if (rem != 0) padded.resize(padded.size() + size_t(config->frame_samples) - rem, 0.0);
    EncoderStream stream(*this);
    return stream.process(padded);
}

PartitionedEmbeddings Codec::quantize_embeddings(const PartitionedEmbeddings& z) const {
    PartitionedEmbeddings out = z;
    for (size_t i = 0; i < config->partitions.size(); ++i) {
        const ResidualQuantizer& q = quantizers[i];
        if (q.n_q == 0) continue;  // pass-through
        out.parts[i] = quantize_frames(z.parts[i], q).quantized;
    }
    return out;
}

CodeGrid Codec::codes_for(const PartitionedEmbeddings& z) const {
    CodeGrid grid;
    for (size_t i = 0; i < config->partitions.size(); ++i) {
        CodeGrid::PartitionCodes pc;
        pc.frames = z.parts[i].rows;
        pc.n_q = quantizers[i].n_q;
        if (pc.n_q > 0) pc.idx = quantize_frames(z.parts[i], quantizers[i]).indices;
        grid.partitions.push_back(std::move(pc));
    }
    return grid;
}

PartitionedEmbeddings Codec::embeddings_from_codes(const CodeGrid& codes) const {
    require(codes.partitions.size() == config->partitions.size(),
            "embeddings_from_codes: partition count mismatch");
    PartitionedEmbeddings z;
    z.config = config;
    int fast_frames = -1;
    for (size_t i = 0; i < config->partitions.size(); ++i) {
        const auto& spec = config->partitions[i];
        const auto& pc = codes.partitions[i];
        Matrix part;
        if (pc.n_q == 0) {
            part = Matrix(pc.frames, spec.dim);  // dropped or pass-through: zeros
        } else {
            require(pc.n_q == quantizers[i].n_q, "embeddings_from_codes: n_q mismatch");
            part = dequantize_frames(pc.idx, pc.frames, quantizers[i]);
        }
        if (spec.frame_rate_divisor == 1) {
            if (fast_frames < 0) fast_frames = pc.frames;
            require(fast_frames == pc.frames, "embeddings_from_codes: frame mismatch");
        }
        z.parts.push_back(std::move(part));
    }
    z.fast_frames = fast_frames;
    for (size_t i = 0; i < config->partitions.size(); ++i) {
        if (config->partitions[i].frame_rate_divisor == kSlowDivisor)
            require(z.parts[i].rows == slow_frame_count(fast_frames),
                    "embeddings_from_codes: slow frame mismatch");
    }
    return z;
}

Waveform Codec::decode(const PartitionedEmbeddings& z) const {
    DecoderStream stream(*this);
    std::vector<double> out = stream.process(z);
    std::vector<double> tail = stream.finish();
    out.insert(out.end(), tail.begin(), tail.end());
    Waveform w;
    w.sample_rate_hz = config->sample_rate_hz;
    w.samples = std::move(out);
    return w;
}

// ---------------------------------------------------------------------------
// EncoderStream

struct EncoderStream::Impl {
    NetDef trunk;
    StreamOp head;
    StreamOp slow;
};

EncoderStream::EncoderStream(const Codec& codec)
    : codec_(codec), impl_(std::make_shared<Impl>()) {
    impl_->trunk = encoder_trunk(*codec.config);
    impl_->head.kind = StreamOp::Conv;
    impl_->head.w = "enc.head.w";
    impl_->head.b = "enc.head.b";
    impl_->head.K = 3;
    impl_->head.stride = 1;
    impl_->slow.kind = StreamOp::Conv;
    impl_->slow.w = "enc.slow.w";
    impl_->slow.b = "enc.slow.b";
    impl_->slow.K = codec.config->slow_kernel_frames;
    impl_->slow.stride = kSlowDivisor;
    states_.resize(size_t(impl_->trunk.num_states) + 2);  // + fast head, slow head
}

PartitionedEmbeddings EncoderStream::process(const std::vector<double>& chunk) {
    const CodecConfig& c = *codec_.config;
    require(!chunk.empty() && chunk.size() % size_t(c.frame_samples) == 0,
            "encoder stream: chunk must be a positive multiple of frame_samples");
    const NetDef& net = impl_->trunk;

    Matrix rows(int(chunk.size()), 1);
    rows.v = chunk;
    Matrix bottleneck = run_net(net, codec_.params, states_, std::move(rows), false);

    // Fast head (stride-1 conv) and the strided slow head both read the trunk.
    LayerState& head_state = states_[size_t(net.num_states)];
    if (bottleneck.rows > 0) head_state.buf.append(bottleneck);
    if (head_state.buf.cols == 0) head_state.buf.cols = c.channels.back();
    Matrix fast = conv_emit(weights_of(codec_.params, impl_->head), impl_->head.K,
                            impl_->head.stride, head_state);

    Matrix slow;
    if (c.has_slow()) {
        LayerState& slow_state = states_[size_t(net.num_states) + 1];
        if (bottleneck.rows > 0) slow_state.buf.append(bottleneck);
        if (slow_state.buf.cols == 0) slow_state.buf.cols = c.channels.back();
        slow = conv_emit(weights_of(codec_.params, impl_->slow), impl_->slow.K,
                         impl_->slow.stride, slow_state);
    }

    PartitionedEmbeddings z;
    z.config = codec_.config;
    z.fast_frames = fast.rows;
    int fast_off = 0;
    for (const auto& p : c.partitions) {
        if (p.frame_rate_divisor == 1) {
            Matrix part(fast.rows, p.dim);
            for (int r = 0; r < fast.rows; ++r)
                for (int d = 0; d < p.dim; ++d) part.at(r, d) = fast.at(r, fast_off + d);
            fast_off += p.dim;
            z.parts.push_back(std::move(part));
        } else {
            z.parts.push_back(slow);
        }
    }
    return z;
}

// ---------------------------------------------------------------------------
// DecoderStream

struct DecoderStream::Impl {
    NetDef net;
};

DecoderStream::DecoderStream(const Codec& codec)
    : codec_(codec), impl_(std::make_shared<Impl>()) {
    impl_->net = decoder_net(*codec.config);
    states_.resize(size_t(impl_->net.num_states));
}

std::vector<double> DecoderStream::run(const Matrix& rows, bool final) {
    Matrix out = run_net(impl_->net, codec_.params, states_, rows, final);
    require(out.cols == 1 || out.rows == 0, "decoder output must be single channel");
    return out.v;
}

std::vector<double> DecoderStream::process(const PartitionedEmbeddings& chunk) {
    const CodecConfig& c = *codec_.config;
    require(chunk.config && chunk.config->partitions.size() == c.partitions.size(),
            "decoder stream: partition count mismatch");
    int n_f = chunk.fast_frames;
    require(n_f >= 0, "decoder stream: negative frame count");

    long new_fast_total = fast_consumed_ + n_f;
    for (size_t i = 0; i < c.partitions.size(); ++i) {
        const auto& p = c.partitions[i];
        const Matrix& part = chunk.parts[i];
        require(part.cols == p.dim, "decoder stream: partition dim mismatch");
        if (p.frame_rate_divisor == 1) {
            require(part.rows == n_f, "decoder stream: fast frame mismatch");
        } else {
            long expect = slow_frame_count(int(new_fast_total)) -
                          (fast_consumed_ > 0 ? slow_frame_count(int(fast_consumed_)) : 0);
            require(part.rows == int(expect), "decoder stream: slow frame mismatch");
            if (part.rows > 0) {
                if (slow_history_.cols == 0) slow_history_.cols = p.dim;
                slow_history_.append(part);
            }
        }
    }

    // Assemble decoder input rows: fast features in config order, slow
    // features repeated from slow frame floor(tick / 10).
    Matrix rows(n_f, c.total_dim());
    for (int r = 0; r < n_f; ++r) {
        long tick = fast_consumed_ + r;
        double* dst = rows.row(r);
        int off = 0;
        for (size_t i = 0; i < c.partitions.size(); ++i) {
            const auto& p = c.partitions[i];
            if (p.frame_rate_divisor == 1) {
                const double* src = chunk.parts[i].row(r);
                for (int d = 0; d < p.dim; ++d) dst[off + d] = src[d];
            } else {
                const double* src = slow_history_.row(tick / kSlowDivisor);
                for (int d = 0; d < p.dim; ++d) dst[off + d] = src[d];
            }
            off += p.dim;
        }
    }
    fast_consumed_ = new_fast_total;
    if (slow_history_.cols != 0)
        slow_history_.drop_before(fast_consumed_ / kSlowDivisor);
    return run(rows, false);
}

std::vector<double> DecoderStream::finish() { return run(Matrix(0, codec_.config->total_dim()), true); }

// ---------------------------------------------------------------------------
// Tape path

namespace {

Tape::Id tape_conv(Tape& tape, ParameterStore& ps, const std::string& prefix,
                   Tape::Id x, int K, int stride) {
    Parameter& w = ps.get(prefix + ".w");
    Parameter& b = ps.get(prefix + ".b");
    Tape::Id wid = tape.param(w, w.shape[0] * w.shape[1], w.shape[2]);
    Tape::Id bid = tape.param(b, 1, b.shape[2]);
    return tape.conv1d_causal(x, wid, bid, K, stride);
}

Tape::Id tape_tconv(Tape& tape, ParameterStore& ps, const std::string& prefix,
                    Tape::Id x, int K, int stride) {
    Parameter& w = ps.get(prefix + ".w");
    Parameter& b = ps.get(prefix + ".b");
    Tape::Id wid = tape.param(w, w.shape[0] * w.shape[1], w.shape[2]);
    Tape::Id bid = tape.param(b, 1, b.shape[2]);
    return tape.conv1d_transposed(x, wid, bid, K, stride);
}

Tape::Id tape_res_unit(Tape& tape, ParameterStore& ps, const std::string& prefix,
                       Tape::Id x) {
    Tape::Id h = tape.elu(x);
    h = tape_conv(tape, ps, prefix + ".c3", h, 3, 1);
    h = tape.elu(h);
    h = tape_conv(tape, ps, prefix + ".c1", h, 1, 1);
    return tape.add(x, h);
}

}  // namespace

TapeEmbeddings tape_encode(Tape& tape, Codec& codec, const Waveform& x) {
    require(!x.samples.empty(), "tape_encode: empty input");
    const CodecConfig& c = *codec.config;
    std::vector<double> padded = x.samples;
    size_t rem = padded.size() % size_t(c.frame_samples);
    if (rem != 0) padded.resize(padded.size() + size_t(c.frame_samples) - rem, 0.0);

    Matrix in(int(padded.size()), 1);
    in.v = padded;
    Tape::Id h = tape.constant(std::move(in));
    h = tape_conv(tape, codec.params, "enc.in", h, c.input_kernel, 1);
    for (size_t i = 0; i < c.strides.size(); ++i) {
        std::string b = "enc.b" + std::to_string(i);
        h = tape_res_unit(tape, codec.params, b, h);
        h = tape.elu(h);
        h = tape_conv(tape, codec.params, b + ".down", h, 2 * c.strides[i], c.strides[i]);
    }
    Tape::Id bottleneck = tape.elu(h);
    Tape::Id fast = tape_conv(tape, codec.params, "enc.head", bottleneck, 3, 1);

    TapeEmbeddings z;
    z.fast_frames = tape.val(fast).rows;
    int off = 0;
    Tape::Id slow = -1;
    if (c.has_slow())
        slow = tape_conv(tape, codec.params, "enc.slow", bottleneck, c.slow_kernel_frames,
                         kSlowDivisor);
    for (const auto& p : c.partitions) {
        if (p.frame_rate_divisor == 1) {
            z.parts.push_back(tape.slice_cols(fast, off, off + p.dim));
            off += p.dim;
        } else {
            z.parts.push_back(slow);
        }
    }
    return z;
}

TapeQuantized tape_quantize(Tape& tape, Codec& codec, const TapeEmbeddings& z) {
    TapeQuantized out;
    out.fast_frames = z.fast_frames;
    for (size_t i = 0; i < codec.quantizers.size(); ++i) {
        const ResidualQuantizer& q = codec.quantizers[i];
        if (q.n_q == 0) {
            out.parts.push_back(z.parts[i]);
            continue;
        }
        Matrix quantized = quantize_frames(tape.val(z.parts[i]), q).quantized;
        out.parts.push_back(tape.straight_through(z.parts[i], std::move(quantized)));
    }
    return out;
}

Tape::Id tape_decode(Tape& tape, Codec& codec, const std::vector<Tape::Id>& parts,
                     int fast_frames) {
    const CodecConfig& c = *codec.config;
    require(parts.size() == c.partitions.size(), "tape_decode: partition count mismatch");
    std::vector<Tape::Id> cols;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (c.partitions[i].frame_rate_divisor == 1) {
            cols.push_back(parts[i]);
        } else {
            Tape::Id up = tape.repeat_rows(parts[i], kSlowDivisor);
            cols.push_back(tape.crop_rows(up, fast_frames));
        }
    }
    Tape::Id h = tape.concat_cols(cols);
    h = tape_conv(tape, codec.params, "dec.in", h, 3, 1);
    for (size_t ri = 0; ri < c.strides.size(); ++ri) {
        size_t i = c.strides.size() - 1 - ri;
        std::string b = "dec.b" + std::to_string(i);
        h = tape.elu(h);
        h = tape_tconv(tape, codec.params, b + ".up", h, 2 * c.strides[i], c.strides[i]);
        h = tape_res_unit(tape, codec.params, b, h);
    }
    h = tape.elu(h);
    return tape_conv(tape, codec.params, "dec.out", h, c.input_kernel, 1);
}

}  // namespace pcdc
