#include "pcdc/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace pcdc {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'K', 'P'};
constexpr uint8_t kVersion = 1;

void put_u8(std::ostream& os, uint8_t v) { os.put(char(v)); }
void put_u32(std::ostream& os, uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(char(v >> (8 * i)));
}
void put_i64(std::ostream& os, int64_t v) {
    for (int i = 0; i < 8; ++i) os.put(char(uint64_t(v) >> (8 * i)));
}
void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, uint32_t(s.size()));
    os.write(s.data(), std::streamsize(s.size()));
}
void put_doubles(std::ostream& os, const std::vector<double>& v) {
    put_u32(os, uint32_t(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             std::streamsize(v.size() * sizeof(double)));
}

uint8_t get_u8(std::istream& is) {
    int c = is.get();
    if (c < 0) throw FormatError("checkpoint: truncated file");
    return uint8_t(c);
}
uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(get_u8(is)) << (8 * i);
    return v;
}
int64_t get_i64(std::istream& is) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(get_u8(is)) << (8 * i);
    return int64_t(v);
}
std::string get_str(std::istream& is) {
    uint32_t n = get_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), std::streamsize(n));
    if (!is) throw FormatError("checkpoint: truncated string");
    return s;
}
std::vector<double> get_doubles(std::istream& is) {
    uint32_t n = get_u32(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(double)));
    if (!is) throw FormatError("checkpoint: truncated data");
    return v;
}

void put_store(std::ostream& os, const ParameterStore& ps) {
    put_u32(os, uint32_t(ps.names().size()));
    for (const auto& name : ps.names()) {
        const Parameter& p = ps.get(name);
        put_str(os, name);
        put_u8(os, uint8_t(p.shape.size()));
        for (int d : p.shape) put_u32(os, uint32_t(d));
        put_doubles(os, p.value);
        put_doubles(os, p.m);
        put_doubles(os, p.v);
    }
    put_u32(os, uint32_t(ps.frozen().size()));
    for (const auto& name : ps.frozen()) put_str(os, name);
    put_i64(os, ps.step_count());
}

void get_store(std::istream& is, ParameterStore& ps) {
    uint32_t n = get_u32(is);
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = get_str(is);
        int ndim = get_u8(is);
        std::vector<int> shape;
        for (int d = 0; d < ndim; ++d) shape.push_back(int(get_u32(is)));
        Parameter& p = ps.has(name) ? ps.get(name) : ps.create(name, shape);
        std::vector<double> value = get_doubles(is);
        std::vector<double> m = get_doubles(is);
        std::vector<double> v = get_doubles(is);
        if (value.size() != p.value.size())
            throw FormatError("checkpoint: size mismatch for parameter " + name);
        p.value = std::move(value);
        p.m = std::move(m);
        p.v = std::move(v);
    }
    uint32_t nf = get_u32(is);
    std::set<std::string> frozen;
    for (uint32_t i = 0; i < nf; ++i) frozen.insert(get_str(is));
    ps.set_frozen(std::move(frozen));
    ps.set_step_count(get_i64(is));
}

void put_quantizer(std::ostream& os, const ResidualQuantizer& q) {
    put_u32(os, uint32_t(q.dim));
    put_u32(os, uint32_t(q.n_q));
    put_u32(os, uint32_t(q.bits));
    put_u8(os, q.initialized ? 1 : 0);
    put_u8(os, q.frozen ? 1 : 0);
    for (const auto& cb : q.layers) {
        put_doubles(os, cb.entries);
        put_doubles(os, cb.ema_counts);
        put_doubles(os, cb.ema_sums);
    }
}

ResidualQuantizer get_quantizer(std::istream& is) {
    int dim = int(get_u32(is));
    int n_q = int(get_u32(is));
    int bits = int(get_u32(is));
    ResidualQuantizer q = ResidualQuantizer::make(dim, n_q, bits == 0 ? 1 : bits);
    q.bits = bits;
    q.initialized = get_u8(is) != 0;
    q.frozen = get_u8(is) != 0;
    for (auto& cb : q.layers) {
        cb.entries = get_doubles(is);
        cb.ema_counts = get_doubles(is);
        cb.ema_sums = get_doubles(is);
    }
    return q;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    os.write(kMagic, 4);
    put_u8(os, kVersion);
    put_str(os, codec.config->to_json_string());
    put_store(os, codec.params);
    put_u32(os, uint32_t(codec.quantizers.size()));
    for (const auto& q : codec.quantizers) put_quantizer(os, q);
    put_u8(os, has_discriminator ? 1 : 0);
    if (has_discriminator) put_store(os, discriminator);
    put_str(os, task);
    put_i64(os, steps_done);
    put_u8(os, uint8_t(phase));
    put_i64(os, int64_t(seed));
    if (!os) throw IoError("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    uint8_t version = get_u8(is);
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));

    Checkpoint ck;
    CodecConfig cfg = CodecConfig::from_json_string(get_str(is));
    // Recreate structure, then overwrite every tensor from the file.
    ck.codec = Codec::create(cfg, 0);
    get_store(is, ck.codec.params);
    uint32_t nq = get_u32(is);
    if (nq != ck.codec.quantizers.size())
        throw FormatError("checkpoint: quantizer count mismatch");
    for (auto& q : ck.codec.quantizers) q = get_quantizer(is);
    ck.has_discriminator = get_u8(is) != 0;
    if (ck.has_discriminator) get_store(is, ck.discriminator);
    ck.task = get_str(is);
    ck.steps_done = get_i64(is);
    ck.phase = get_u8(is);
    ck.seed = uint64_t(get_i64(is));
    return ck;
}

}  // namespace pcdc
