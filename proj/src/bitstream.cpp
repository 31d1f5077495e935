#include "pcdc/bitstream.hpp"

#include <algorithm>
#include <fstream>

namespace pcdc {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'D', 'C'};
constexpr uint8_t kVersion = 1;
constexpr uint8_t kFlagDropped = 0x01;

void wr_u16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(uint8_t(v));
    b.push_back(uint8_t(v >> 8));
}
void wr_u32(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(uint8_t(v >> (8 * i)));
}
void wr_u64(std::vector<uint8_t>& b, uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(uint8_t(v >> (8 * i)));
}

struct Reader {
    const std::vector<uint8_t>& b;
    size_t pos = 0;

    bool have(size_t n) const { return pos + n <= b.size(); }
    uint8_t u8() { return b[pos++]; }
    uint16_t u16() {
        uint16_t v = uint16_t(b[pos]) | uint16_t(b[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(b[pos + size_t(i)]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(b[pos + size_t(i)]) << (8 * i);
        pos += 8;
        return v;
    }
};

struct BitWriter {
    std::vector<uint8_t>& out;
    uint32_t acc = 0;
    int nbits = 0;

    void put(uint32_t value, int bits) {
        for (int i = bits - 1; i >= 0; --i) {
            acc = (acc << 1) | ((value >> i) & 1u);
            if (++nbits == 8) {
                out.push_back(uint8_t(acc));
                acc = 0;
                nbits = 0;
            }
        }
    }
    void align() {
        if (nbits > 0) {
            out.push_back(uint8_t(acc << (8 - nbits)));
            acc = 0;
            nbits = 0;
        }
    }
};

struct BitReader {
    const std::vector<uint8_t>& in;
    size_t byte_pos;
    int bit_pos = 0;  // bits consumed of current byte, MSB first

    bool get(int bits, uint32_t& value) {
        value = 0;
        for (int i = 0; i < bits; ++i) {
            if (byte_pos >= in.size()) return false;
            uint8_t byte = in[byte_pos];
            value = (value << 1) | ((byte >> (7 - bit_pos)) & 1u);
            if (++bit_pos == 8) {
                bit_pos = 0;
                ++byte_pos;
            }
        }
        return true;
    }
    void align() {
        if (bit_pos > 0) {
            bit_pos = 0;
            ++byte_pos;
        }
    }
};

int total_ticks_for(const StreamHeader& h) {
    if (h.original_length == 0) return 0;
    return int((h.original_length + h.frame_samples - 1) / h.frame_samples);
}

int frames_for_entry(const StreamHeader::PartitionEntry& e, int ticks) {
    if (e.divisor <= 1) return ticks;
    return (ticks + e.divisor - 1) / e.divisor;
}

}  // namespace

StreamHeader StreamHeader::from_config(const CodecConfig& cfg, uint64_t original_length) {
    StreamHeader h;
    h.version = kVersion;
    h.sample_rate_hz = uint32_t(cfg.sample_rate_hz);
    h.frame_samples = uint16_t(cfg.frame_samples);
    h.original_length = original_length;
    for (const auto& p : cfg.partitions) {
        PartitionEntry e;
        e.name = p.name;
        e.dim = uint16_t(p.dim);
        e.divisor = uint8_t(p.frame_rate_divisor);
        e.n_q = uint8_t(p.n_q);
        e.codebook_bits = uint8_t(p.codebook_bits);
        h.partitions.push_back(std::move(e));
    }
    return h;
}

std::vector<uint8_t> pack(const CodeGrid& codes, const StreamHeader& header) {
    require(codes.partitions.size() == header.partitions.size(),
            "pack: partition count mismatch");
    const int ticks = total_ticks_for(header);
    for (size_t i = 0; i < header.partitions.size(); ++i) {
        const auto& e = header.partitions[i];
        const auto& pc = codes.partitions[i];
        if (e.dropped || e.n_q == 0) continue;
        require(pc.n_q == int(e.n_q), "pack: n_q mismatch for partition " + e.name);
        require(pc.frames == frames_for_entry(e, ticks),
                "pack: frame count mismatch for partition " + e.name);
        for (uint16_t idx : pc.idx)
            if (uint32_t(idx) >= (1u << e.codebook_bits))
                throw FormatError("pack: code index out of range in partition " + e.name);
    }

    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(header.version);
    wr_u32(out, header.sample_rate_hz);
    wr_u16(out, header.frame_samples);
    wr_u64(out, header.original_length);
    out.push_back(uint8_t(header.partitions.size()));
    for (const auto& e : header.partitions) {
        out.push_back(uint8_t(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        wr_u16(out, e.dim);
        out.push_back(e.divisor);
        out.push_back(e.n_q);
        out.push_back(e.codebook_bits);
        out.push_back(e.dropped ? kFlagDropped : 0);
    }

    for (int t = 0; t < ticks; ++t) {
        BitWriter bw{out};
        for (size_t i = 0; i < header.partitions.size(); ++i) {
            const auto& e = header.partitions[i];
            if (e.dropped || e.n_q == 0) continue;
            if (t % e.divisor != 0) continue;
            int frame = t / e.divisor;
            const auto& pc = codes.partitions[i];
            for (int l = 0; l < int(e.n_q); ++l)
                bw.put(pc.at(frame, l), e.codebook_bits);
        }
        bw.align();
    }
    return out;
}

UnpackResult unpack(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    if (!r.have(4) || !std::equal(kMagic, kMagic + 4, bytes.begin()))
        throw FormatError("unpack: bad magic (not a .pcdc stream)");
    r.pos = 4;
    if (!r.have(1 + 4 + 2 + 8 + 1)) throw FormatError("unpack: truncated header");
    StreamHeader h;
    h.version = r.u8();
    if (h.version != kVersion)
        throw FormatError("unpack: unsupported version " + std::to_string(h.version));
    h.sample_rate_hz = r.u32();
    h.frame_samples = r.u16();
    if (h.frame_samples == 0) throw FormatError("unpack: zero frame_samples");
    h.original_length = r.u64();
    int n_parts = r.u8();
    if (n_parts == 0) throw FormatError("unpack: no partitions");
    for (int i = 0; i < n_parts; ++i) {
        if (!r.have(1)) throw FormatError("unpack: truncated partition table");
        int name_len = r.u8();
        if (!r.have(size_t(name_len) + 6)) throw FormatError("unpack: truncated partition table");
        StreamHeader::PartitionEntry e;
        e.name.assign(bytes.begin() + long(r.pos), bytes.begin() + long(r.pos) + name_len);
        r.pos += size_t(name_len);
        e.dim = r.u16();
        e.divisor = r.u8();
        e.n_q = r.u8();
        e.codebook_bits = r.u8();
        uint8_t flags = r.u8();
        e.dropped = (flags & kFlagDropped) != 0;
        if (e.divisor == 0) throw FormatError("unpack: zero divisor");
        if (e.n_q > 0 && (e.codebook_bits < 1 || e.codebook_bits > 16))
            throw FormatError("unpack: bad codebook bits");
        h.partitions.push_back(std::move(e));
    }

    const int total_ticks = total_ticks_for(h);
    UnpackResult res;
    res.header = h;
    res.codes.partitions.resize(h.partitions.size());

    BitReader br{bytes, r.pos, 0};
    int ticks_read = 0;
    while (ticks_read < total_ticks) {
        if (tick_payload_bytes(h, ticks_read) == 0) {
            ++ticks_read;  // tick with no due payload (e.g. everything dropped)
            continue;
        }
        if (br.byte_pos >= bytes.size()) break;  // prefix ending on a tick boundary
        for (size_t i = 0; i < h.partitions.size(); ++i) {
            const auto& e = h.partitions[i];
            if (e.dropped || e.n_q == 0) continue;
            if (ticks_read % e.divisor != 0) continue;
            for (int l = 0; l < int(e.n_q); ++l) {
                uint32_t v;
                if (!br.get(e.codebook_bits, v))
                    throw FormatError("unpack: stream truncated inside tick " +
                                      std::to_string(ticks_read));
                res.codes.partitions[i].idx.push_back(uint16_t(v));
            }
        }
        br.align();
        ++ticks_read;
    }
    if (br.byte_pos < bytes.size())
        throw FormatError("unpack: trailing bytes after tick " + std::to_string(ticks_read));

    res.ticks = ticks_read;
    for (size_t i = 0; i < h.partitions.size(); ++i) {
        const auto& e = h.partitions[i];
        auto& pc = res.codes.partitions[i];
        pc.frames = frames_for_entry(e, ticks_read);
        pc.n_q = (e.dropped || e.n_q == 0) ? 0 : int(e.n_q);
        if (pc.n_q == 0) pc.idx.clear();
    }
    return res;
}

std::vector<uint8_t> drop_partitions(const std::vector<uint8_t>& bytes,
                                     const std::vector<std::string>& names) {
    UnpackResult res = unpack(bytes);
    for (const auto& name : names) {
        bool found = false;
        for (auto& e : res.header.partitions) {
            if (e.name == name) {
                e.dropped = true;
                found = true;
                break;
            }
        }
        if (!found) throw LookupError("drop_partitions: unknown partition: " + name);
    }
    // Dropped partitions keep their table entry but lose their payload.
    for (size_t i = 0; i < res.header.partitions.size(); ++i)
        if (res.header.partitions[i].dropped) {
            res.codes.partitions[i].idx.clear();
            res.codes.partitions[i].n_q = 0;
        }
    return pack(res.codes, res.header);
}

size_t tick_payload_bytes(const StreamHeader& header, int tick) {
    size_t bits = 0;
    for (const auto& e : header.partitions) {
        if (e.dropped || e.n_q == 0) continue;
        if (tick % e.divisor != 0) continue;
        bits += size_t(e.n_q) * size_t(e.codebook_bits);
    }
    return (bits + 7) / 8;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path);
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write file: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace pcdc
