#include "pcdc/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace pcdc {

namespace {

uint32_t rd_u32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
           uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void wr_u32(std::vector<uint8_t>& b, uint32_t v) {
    b.push_back(uint8_t(v));
    b.push_back(uint8_t(v >> 8));
    b.push_back(uint8_t(v >> 16));
    b.push_back(uint8_t(v >> 24));
}
void wr_u16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(uint8_t(v));
    b.push_back(uint8_t(v >> 8));
}

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open WAV file: " + path);
    std::vector<uint8_t> data((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    if (data.size() < 44 || std::memcmp(data.data(), "RIFF", 4) != 0 ||
        std::memcmp(data.data() + 8, "WAVE", 4) != 0)
        throw FormatError("not a RIFF/WAVE file: " + path);

    size_t pos = 12;
    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const uint8_t* pcm = nullptr;
    size_t pcm_len = 0;
    while (pos + 8 <= data.size()) {
        const uint8_t* chunk = data.data() + pos;
        uint32_t len = rd_u32(chunk + 4);
        if (pos + 8 + len > data.size())
            throw FormatError("truncated WAV chunk in " + path);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (len < 16) throw FormatError("short fmt chunk in " + path);
            format = rd_u16(chunk + 8);
            channels = rd_u16(chunk + 10);
            rate = rd_u32(chunk + 12);
            bits = rd_u16(chunk + 22);
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            pcm = chunk + 8;
            pcm_len = len;
        }
        pos += 8 + len + (len & 1);
    }
    if (!have_fmt || !pcm) throw FormatError("missing fmt/data chunk in " + path);
    if (format != 1)
        throw FormatError("unsupported WAV encoding (want PCM) in " + path);
    if (channels != 1)
        throw FormatError("unsupported channel count (want mono) in " + path);
    if (bits != 16)
        throw FormatError("unsupported bit depth (want 16-bit) in " + path);
    if (rate != uint32_t(kDefaultSampleRate))
        throw FormatError("unsupported sample rate (want 16000 Hz) in " + path);

    Waveform w;
    w.sample_rate_hz = int(rate);
    w.samples.resize(pcm_len / 2);
    for (size_t i = 0; i < w.samples.size(); ++i) {
        int16_t v = int16_t(uint16_t(pcm[2 * i]) | uint16_t(pcm[2 * i + 1]) << 8);
        w.samples[i] = double(v) / 32767.0;
    }
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    std::vector<uint8_t> b;
    b.reserve(44 + 2 * w.samples.size());
    uint32_t data_len = uint32_t(2 * w.samples.size());
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    wr_u32(b, 36 + data_len);
    b.insert(b.end(), {'W', 'A', 'V', 'E'});
    b.insert(b.end(), {'f', 'm', 't', ' '});
    wr_u32(b, 16);
    wr_u16(b, 1);  // PCM
    wr_u16(b, 1);  // mono
    wr_u32(b, uint32_t(w.sample_rate_hz));
    wr_u32(b, uint32_t(w.sample_rate_hz) * 2);
    wr_u16(b, 2);
    wr_u16(b, 16);
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    wr_u32(b, data_len);
    for (double s : w.samples) {
        double c = std::clamp(s, -1.0, 1.0);
        int16_t v = int16_t(std::lround(c * 32767.0));
        b.push_back(uint8_t(uint16_t(v)));
        b.push_back(uint8_t(uint16_t(v) >> 8));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write WAV file: " + path);
    f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace pcdc
