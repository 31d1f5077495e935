#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "pcdc/codec.hpp"

using namespace pcdc;

namespace {

Waveform random_wave(size_t n, uint64_t seed, double amp = 0.8) {
    Rng rng(seed);
    Waveform w;
    w.samples.resize(n);
    for (auto& s : w.samples) s = rng.uniform(-amp, amp);
    return w;
}

void randomize_quantizers(Codec& codec, uint64_t seed) {
    Rng rng(seed);
    for (auto& q : codec.quantizers) {
        for (auto& cb : q.layers)
            for (auto& v : cb.entries) v = rng.normal(0.0, 0.4);
        q.initialized = true;
    }
}

bool same_embeddings(const PartitionedEmbeddings& a, const PartitionedEmbeddings& b) {
    if (a.fast_frames != b.fast_frames || a.parts.size() != b.parts.size()) return false;
    for (size_t i = 0; i < a.parts.size(); ++i)
        if (!(a.parts[i].rows == b.parts[i].rows && a.parts[i].v == b.parts[i].v))
            return false;
    return true;
}

}  // namespace

TEST_CASE("preset configurations") {
    for (const auto& name : CodecConfig::preset_names()) {
        CodecConfig c = CodecConfig::preset(name);
        CHECK(c.frame_samples == 320);
        CHECK(c.sample_rate_hz == 16000);
        CHECK(c.frame_rate_hz() == 50);
    }
    CodecConfig n = CodecConfig::preset("noise-split");
    CHECK(n.total_dim() == 256);
    CHECK(n.partitions[0].dim == 128);
    CHECK(n.partitions[1].n_q == 14);
    CHECK(n.partitions[1].codebook_bits == 9);
    CodecConfig r = CodecConfig::preset("reverb-split");
    CHECK(r.partitions[0].dim == 54);
    CHECK(r.partitions[1].dim == 10);
    CHECK(r.partitions[1].frame_rate_divisor == 10);
    CHECK(r.partitions[1].n_q == 4);
    CHECK_THROWS_AS((void)CodecConfig::preset("nope"), ConfigError);

    // round-trip through JSON
    CodecConfig back = CodecConfig::from_json_string(r.to_json_string());
    CHECK(back.partitions.size() == r.partitions.size());
    CHECK(back.partitions[1].frame_rate_divisor == 10);
    CHECK(back.channels == r.channels);
}

TEST_CASE("paper-size noise config: 960 samples give 3 frames of 2x128 dims") {
    Codec codec = Codec::create(CodecConfig::preset("noise-split"), 1);
    PartitionedEmbeddings z = codec.encode(random_wave(960, 2));
    CHECK(z.fast_frames == 3);
    REQUIRE(z.parts.size() == 2);
    CHECK(z.parts[0].rows == 3);
    CHECK(z.parts[0].cols == 128);
    CHECK(z.parts[1].cols == 128);
}

TEST_CASE("reverb config: slow partition at a tenth of the frame rate") {
    Codec codec = Codec::create(CodecConfig::preset("reverb-toy"), 3);
    PartitionedEmbeddings z = codec.encode(random_wave(320 * 25, 4));
    CHECK(z.fast_frames == 25);
    CHECK(z.parts[0].rows == 25);
    CHECK(z.parts[1].rows == 3);  // ceil(25 / 10)
}

TEST_CASE("decode output length is frames times frame_samples") {
    Codec codec = Codec::create(CodecConfig::preset("noise-toy"), 5);
    for (size_t t : {size_t(320), size_t(960), size_t(1000), size_t(7040)}) {
        PartitionedEmbeddings z = codec.encode(random_wave(t, 6));
        int f = int((t + 319) / 320);
        CHECK(z.fast_frames == f);
        Waveform out = codec.decode(z);
        CHECK(out.samples.size() == size_t(f) * 320);
        for (double v : out.samples) CHECK(std::isfinite(v));
    }
}

TEST_CASE("empty input is rejected") {
    Codec codec = Codec::create(CodecConfig::preset("noise-toy"), 7);
    Waveform empty;
    CHECK_THROWS_AS((void)codec.encode(empty), ContractViolation);
}

TEST_CASE("streaming encode equals batch encode bit for bit") {
    for (const char* preset : {"noise-toy", "reverb-toy"}) {
        Codec codec = Codec::create(CodecConfig::preset(preset), 8);
        Rng rng(9);
        for (int trial = 0; trial < 6; ++trial) {
            int frames = 4 + int(rng.uniform_int(40));
            Waveform w = random_wave(size_t(frames) * 320, 100 + uint64_t(trial));
            PartitionedEmbeddings batch = codec.encode(w);

            EncoderStream stream(codec);
            std::vector<Matrix> parts(codec.config->partitions.size());
            for (auto& p : parts) p = Matrix(0, 0);
            size_t pos = 0;
            int got_fast = 0;
            while (pos < w.samples.size()) {
                size_t chunk_frames = 1 + rng.uniform_int(8);
                size_t len = std::min(chunk_frames * 320, w.samples.size() - pos);
                std::vector<double> chunk(w.samples.begin() + long(pos),
                                          w.samples.begin() + long(pos + len));
                PartitionedEmbeddings piece = stream.process(chunk);
                got_fast += piece.fast_frames;
                for (size_t i = 0; i < parts.size(); ++i) {
                    Matrix& dst = parts[i];
                    const Matrix& src = piece.parts[i];
                    if (dst.cols == 0) dst = src;
                    else {
                        Matrix merged(dst.rows + src.rows, dst.cols);
                        std::copy(dst.v.begin(), dst.v.end(), merged.v.begin());
                        std::copy(src.v.begin(), src.v.end(),
                                  merged.v.begin() + long(dst.size()));
                        dst = std::move(merged);
                    }
                }
                pos += len;
            }
            CHECK(got_fast == batch.fast_frames);
            for (size_t i = 0; i < parts.size(); ++i) {
                REQUIRE(parts[i].rows == batch.parts[i].rows);
                CHECK(parts[i].v == batch.parts[i].v);
            }
        }
    }
}

TEST_CASE("streaming decode equals batch decode bit for bit") {
    for (const char* preset : {"noise-toy", "reverb-toy"}) {
        Codec codec = Codec::create(CodecConfig::preset(preset), 10);
        Rng rng(11);
        for (int trial = 0; trial < 6; ++trial) {
            int frames = 4 + int(rng.uniform_int(40));
            Waveform w = random_wave(size_t(frames) * 320, 200 + uint64_t(trial));
            PartitionedEmbeddings z = codec.encode(w);
            Waveform batch = codec.decode(z);

            // replay the encoder chunk-wise and pipe pieces into the decoder
            EncoderStream enc(codec);
            DecoderStream dec(codec);
            std::vector<double> out;
            size_t pos = 0;
            while (pos < w.samples.size()) {
                size_t chunk_frames = 1 + rng.uniform_int(8);
                size_t len = std::min(chunk_frames * 320, w.samples.size() - pos);
                std::vector<double> chunk(w.samples.begin() + long(pos),
                                          w.samples.begin() + long(pos + len));
                std::vector<double> piece = dec.process(enc.process(chunk));
                out.insert(out.end(), piece.begin(), piece.end());
                pos += len;
            }
            std::vector<double> tail = dec.finish();
            out.insert(out.end(), tail.begin(), tail.end());
            REQUIRE(out.size() == batch.samples.size());
            CHECK(out == batch.samples);
        }
    }
}

TEST_CASE("changing a sample never alters earlier embedding frames") {
    Codec codec = Codec::create(CodecConfig::preset("reverb-toy"), 12);
    Waveform w = random_wave(320 * 20, 13);
    PartitionedEmbeddings a = codec.encode(w);
    size_t t = 320 * 11 + 7;
    Waveform w2 = w;
    w2.samples[t] += 0.25;
    PartitionedEmbeddings b = codec.encode(w2);
    int frame_of_t = int(t / 320);
    for (int f = 0; f < frame_of_t; ++f)
        for (int d = 0; d < a.parts[0].cols; ++d)
            CHECK(a.parts[0].at(f, d) == b.parts[0].at(f, d));
}

TEST_CASE("partition edits") {
    Codec codec = Codec::create(CodecConfig::preset("noise-toy"), 14);
    PartitionedEmbeddings z = codec.encode(random_wave(320 * 8, 15));
    SUBCASE("mask zeroes exactly the named partition and is idempotent") {
        PartitionedEmbeddings m = mask_partition(z, "noise");
        for (double v : m.part("noise").v) CHECK(v == 0.0);
        CHECK(m.part("speech").v == z.part("speech").v);
        PartitionedEmbeddings mm = mask_partition(m, "noise");
        CHECK(same_embeddings(m, mm));
    }
    SUBCASE("mask equals scale with weight zero") {
        CHECK(same_embeddings(mask_partition(z, "noise"), scale_partition(z, "noise", 0.0)));
    }
    SUBCASE("masking every partition leaves well-defined zero embeddings") {
        PartitionedEmbeddings m = mask_partition(mask_partition(z, "noise"), "speech");
        Waveform out = codec.decode(m);
        for (double v : out.samples) CHECK(std::isfinite(v));
    }
    SUBCASE("scale by 1 is the identity; weights compose multiplicatively") {
        CHECK(same_embeddings(scale_partition(z, "noise", 1.0), z));
        PartitionedEmbeddings a = scale_partition(scale_partition(z, "noise", 0.8), "noise", 0.5);
        PartitionedEmbeddings b = scale_partition(z, "noise", 0.4);
        for (size_t i = 0; i < a.part("noise").v.size(); ++i)
            CHECK(a.part("noise").v[i] == doctest::Approx(b.part("noise").v[i]).epsilon(1e-12));
    }
    SUBCASE("weights above 1 need the explicit flag") {
        CHECK_THROWS_AS((void)scale_partition(z, "noise", 1.5), ContractViolation);
        PartitionedEmbeddings up = scale_partition(z, "noise", 1.5, true);
        CHECK(up.part("noise").v[0] == doctest::Approx(1.5 * z.part("noise").v[0]));
    }
    SUBCASE("unknown partition name") {
        CHECK_THROWS_AS((void)mask_partition(z, "ghost"), LookupError);
        CHECK_THROWS_AS((void)scale_partition(z, "ghost", 0.5), LookupError);
    }
}

TEST_CASE("swap is an involution that leaves other partitions untouched") {
    Codec codec = Codec::create(CodecConfig::preset("noise-toy"), 16);
    PartitionedEmbeddings za = codec.encode(random_wave(320 * 8, 17));
    PartitionedEmbeddings zb = codec.encode(random_wave(320 * 8, 18));
    auto [sa, sb] = swap_partition(za, zb, "noise");
    CHECK(sa.part("noise").v == zb.part("noise").v);
    CHECK(sb.part("noise").v == za.part("noise").v);
    CHECK(sa.part("speech").v == za.part("speech").v);
    CHECK(sb.part("speech").v == zb.part("speech").v);
    auto [ra, rb] = swap_partition(sa, sb, "noise");
    CHECK(same_embeddings(ra, za));
    CHECK(same_embeddings(rb, zb));
    auto [ia, ib] = swap_partition(za, za, "noise");
    CHECK(same_embeddings(ia, za));
    CHECK(same_embeddings(ib, za));

    PartitionedEmbeddings short_b = codec.encode(random_wave(320 * 4, 19));
    CHECK_THROWS_AS((void)swap_partition(za, short_b, "noise"), ContractViolation);
}

TEST_CASE("slow partition repeats one frame across ten fast ticks") {
    Codec codec = Codec::create(CodecConfig::preset("reverb-toy"), 20);
    Waveform w = random_wave(320 * 10, 21);
    PartitionedEmbeddings z = codec.encode(w);
    REQUIRE(z.parts[1].rows == 1);
    // decode twice with different slow values; the first ten ticks all see
    // the single slow frame, so any change to it affects the whole output
    Waveform out1 = codec.decode(z);
    PartitionedEmbeddings z2 = z;
    for (auto& v : z2.parts[1].v) v += 1.0;
    Waveform out2 = codec.decode(z2);
    bool late_changed = false;
    for (size_t i = size_t(320) * 9; i < out1.samples.size(); ++i)
        if (out1.samples[i] != out2.samples[i]) late_changed = true;
    CHECK(late_changed);
}

TEST_CASE("quantized round trip through codes matches quantize_embeddings") {
    Codec codec = Codec::create(CodecConfig::preset("noise-toy"), 22);
    randomize_quantizers(codec, 23);
    PartitionedEmbeddings z = codec.encode(random_wave(320 * 12, 24));
    PartitionedEmbeddings q = codec.quantize_embeddings(z);
    CodeGrid codes = codec.codes_for(z);
    PartitionedEmbeddings back = codec.embeddings_from_codes(codes);
    for (size_t i = 0; i < q.parts.size(); ++i) CHECK(q.parts[i].v == back.parts[i].v);
}

TEST_CASE("invalid configurations are rejected") {
    CodecConfig c = CodecConfig::preset("noise-toy");
    c.strides = {2, 4, 5, 9};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = CodecConfig::preset("noise-toy");
    c.partitions[0].frame_rate_divisor = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = CodecConfig::preset("reverb-toy");
    c.partitions[0].frame_rate_divisor = 10;  // two slow partitions
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = CodecConfig::preset("noise-toy");
    c.partitions[1].name = "speech";  // duplicate
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
