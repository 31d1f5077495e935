#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcdc/codec.hpp"
#include "pcdc/rvq.hpp"

namespace pcdc {

/// Wire format (extension .pcdc), all multi-byte integers little-endian:
///   magic "PCDC" | version u8 | sample_rate u32 | frame_samples u16 |
///   original_length u64 | partition_count u8 | per partition:
///     name_len u8, name bytes, dim u16, divisor u8, n_q u8,
///     codebook_bits u8, flags u8 (bit 0 = dropped)
/// Payload: for each fast tick, every partition due on that tick
/// (tick % divisor == 0, not dropped) contributes n_q indices of
/// codebook_bits each, MSB-first; each tick is padded to a byte boundary.
struct StreamHeader {
    struct PartitionEntry {
        std::string name;
        uint16_t dim = 0;
        uint8_t divisor = 1;
        uint8_t n_q = 0;
        uint8_t codebook_bits = 0;
        bool dropped = false;
        bool operator==(const PartitionEntry&) const = default;
    };
    uint8_t version = 1;
    uint32_t sample_rate_hz = 0;
    uint16_t frame_samples = 0;
    uint64_t original_length = 0;
    std::vector<PartitionEntry> partitions;

    static StreamHeader from_config(const CodecConfig& cfg, uint64_t original_length);
    bool operator==(const StreamHeader&) const = default;
};

std::vector<uint8_t> pack(const CodeGrid& codes, const StreamHeader& header);

struct UnpackResult {
    StreamHeader header;
    CodeGrid codes;
    int ticks = 0;  // whole fast frame ticks present
};

/// Inverse of pack. Accepts a prefix ending on a tick boundary (streaming
/// decodability); a cut inside a tick raises FormatError naming the tick.
UnpackResult unpack(const std::vector<uint8_t>& bytes);

/// Re-emit the stream with the named partitions marked dropped and their
/// payload removed. Decoders substitute zeros for dropped partitions.
std::vector<uint8_t> drop_partitions(const std::vector<uint8_t>& bytes,
                                     const std::vector<std::string>& names);

/// Payload bytes of one whole tick group (used for bitrate accounting).
size_t tick_payload_bytes(const StreamHeader& header, int tick);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace pcdc
