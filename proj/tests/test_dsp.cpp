#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "pcdc/dsp.hpp"
#include "pcdc/wav.hpp"

using namespace pcdc;

namespace {

constexpr double kPi = 3.14159265358979323846;

Waveform random_wave(size_t n, uint64_t seed, double amp = 0.5) {
    Rng rng(seed);
    Waveform w;
    w.samples.resize(n);
    for (auto& s : w.samples) s = rng.uniform(-amp, amp);
    return w;
}

Waveform sine_wave(double freq_hz, size_t n, double amp = 0.8) {
    Waveform w;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i)
        w.samples[i] = amp * std::sin(2.0 * kPi * freq_hz * double(i) / kDefaultSampleRate);
    return w;
}

// Straight-line reference: direct DFT power mel spectrogram under the same
// declared conventions (Hann window, left pad s - s/4, HTK mel filters).
// Shares no code with the implementation.
struct RefMel {
    std::vector<std::vector<double>> frames;  // [t][64]
};

double ref_hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double ref_mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

RefMel ref_mel_spectrogram(const Waveform& w, int s) {
    const int hop = s / 4;
    const int pad = s - hop;
    const int bins = s / 2 + 1;
    const double fs = w.sample_rate_hz;
    // filter centers on a 66-point mel grid over [0, fs/2]
    std::vector<double> edges(66);
    for (int i = 0; i < 66; ++i)
        edges[size_t(i)] = ref_mel_to_hz(ref_hz_to_mel(fs / 2.0) * i / 65.0);
    RefMel out;
    int num_frames = int(w.samples.size()) / hop;
    for (int t = 0; t < num_frames; ++t) {
        std::vector<double> power(size_t(bins), 0.0);
        for (int k = 0; k < bins; ++k) {
            std::complex<double> acc(0.0, 0.0);
            for (int i = 0; i < s; ++i) {
                long idx = long(t) * hop - pad + i;
                double v = (idx >= 0 && idx < long(w.samples.size()))
                               ? w.samples[size_t(idx)]
                               : 0.0;
                double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * i / s);
                double ang = -2.0 * kPi * double(k) * double(i) / double(s);
                acc += v * hann * std::complex<double>(std::cos(ang), std::sin(ang));
            }
            power[size_t(k)] = std::norm(acc);
        }
        std::vector<double> mel(64, 0.0);
        for (int m = 0; m < 64; ++m) {
            double lo = edges[size_t(m)], mid = edges[size_t(m) + 1], hi = edges[size_t(m) + 2];
            for (int k = 0; k < bins; ++k) {
                double f = k * fs / s;
                double wgt = 0.0;
                if (f >= lo && f <= mid && mid > lo) wgt = (f - lo) / (mid - lo);
                else if (f > mid && f <= hi && hi > mid) wgt = (hi - f) / (hi - mid);
                mel[size_t(m)] += wgt * power[size_t(k)];
            }
        }
        out.frames.push_back(std::move(mel));
    }
    return out;
}

double ref_loss_scale(const Waveform& a, const Waveform& b, int s) {
    RefMel ma = ref_mel_spectrogram(a, s);
    RefMel mb = ref_mel_spectrogram(b, s);
    double l1 = 0.0, l2 = 0.0;
    for (size_t t = 0; t < ma.frames.size(); ++t) {
        double sq = 0.0;
        for (int m = 0; m < 64; ++m) {
            double x = ma.frames[t][size_t(m)], y = mb.frames[t][size_t(m)];
            l1 += std::fabs(x - y);
            double d = std::log(std::max(x, 1e-5)) - std::log(std::max(y, 1e-5));
            sq += d * d;
        }
        l2 += std::sqrt(sq);
    }
    return l1 + std::sqrt(s / 2.0) * l2;
}

}  // namespace

TEST_CASE("fft matches a direct DFT") {
    for (size_t n : {size_t(64), size_t(256)}) {
        Rng rng(7 + n);
        std::vector<std::complex<double>> a(n), ref(n);
        for (auto& v : a) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (size_t k = 0; k < n; ++k) {
            std::complex<double> acc(0, 0);
            for (size_t i = 0; i < n; ++i) {
                double ang = -2.0 * kPi * double(k) * double(i) / double(n);
                acc += a[i] * std::complex<double>(std::cos(ang), std::sin(ang));
            }
            ref[k] = acc;
        }
        auto fwd = a;
        fft_pow2(fwd, false);
        for (size_t k = 0; k < n; ++k) CHECK(std::abs(fwd[k] - ref[k]) < 1e-9 * double(n));
        // unnormalized inverse returns n * input
        auto inv = fwd;
        fft_pow2(inv, true);
        for (size_t i = 0; i < n; ++i)
            CHECK(std::abs(inv[i] / double(n) - a[i]) < 1e-12 * double(n));
    }
}

TEST_CASE("mel spectrogram of silence is all zeros") {
    Waveform w;
    w.samples.assign(16000, 0.0);
    MelSpectrogram m = mel_spectrogram(w, 512);
    for (double v : m.frames) CHECK(v == 0.0);
}

TEST_CASE("frame count follows the padding policy") {
    CHECK(mel_spectrogram(random_wave(16000, 1), 512).num_frames == 125);
    for (size_t t : {size_t(1), size_t(15), size_t(100), size_t(127), size_t(128),
                     size_t(4096), size_t(16000), size_t(30720)}) {
        for (int s : mel_loss_scales()) {
            int hop = s / 4;
            int expected = int(t / size_t(hop));
            CHECK(mel_spectrogram(random_wave(t, 2), s).num_frames == expected);
        }
    }
}

TEST_CASE("440 Hz sine peaks at the mel bin nearest 440 Hz") {
    const int s = 1024;
    Waveform w = sine_wave(440.0, 16000);
    MelSpectrogram m = mel_spectrogram(w, s);
    // oracle: filter centers from the reference construction
    std::vector<double> centers(64);
    for (int i = 0; i < 64; ++i)
        centers[size_t(i)] =
            ref_mel_to_hz(ref_hz_to_mel(8000.0) * (i + 1) / 65.0);
    int expect = 0;
    for (int i = 1; i < 64; ++i)
        if (std::fabs(centers[size_t(i)] - 440.0) < std::fabs(centers[size_t(expect)] - 440.0))
            expect = i;
    REQUIRE(m.num_frames > 0);
    for (int t = 0; t < m.num_frames; ++t) {
        int arg = 0;
        for (int b = 1; b < kMelBins; ++b)
            if (m.at(t, b) > m.at(t, arg)) arg = b;
        CHECK(arg == expect);
    }
}

TEST_CASE("mel matches the direct-DFT reference") {
    Waveform w = random_wave(3000, 11);
    for (int s : {64, 256}) {
        MelSpectrogram mine = mel_spectrogram(w, s);
        RefMel ref = ref_mel_spectrogram(w, s);
        REQUIRE(mine.num_frames == int(ref.frames.size()));
        for (int t = 0; t < mine.num_frames; ++t)
            for (int m = 0; m < 64; ++m) {
                double a = mine.at(t, m), b = ref.frames[size_t(t)][size_t(m)];
                CHECK(std::fabs(a - b) <= 1e-6 * std::max(1.0, std::fabs(b)));
            }
    }
}

TEST_CASE("scaling the waveform by 2 scales mel energies by 4") {
    Waveform w = random_wave(4096, 3);
    Waveform w2 = w;
    for (auto& s : w2.samples) s *= 2.0;
    for (int s : {64, 512}) {
        MelSpectrogram a = mel_spectrogram(w, s);
        MelSpectrogram b = mel_spectrogram(w2, s);
        for (size_t i = 0; i < a.frames.size(); ++i)
            CHECK(std::fabs(b.frames[i] - 4.0 * a.frames[i]) <=
                  1e-6 * std::max(1e-30, std::fabs(4.0 * a.frames[i])));
    }
}

TEST_CASE("filterbank covers interior bins with nonnegative overlapping filters") {
    MelFilterbank fb = MelFilterbank::make(1024, 16000);
    REQUIRE(fb.filters.size() == 64);
    std::vector<double> coverage(size_t(fb.num_fft_bins), 0.0);
    for (const auto& f : fb.filters) {
        for (size_t j = 0; j < f.weights.size(); ++j) {
            CHECK(f.weights[j] >= 0.0);
            coverage[size_t(f.first_bin) + j] += f.weights[j];
        }
    }
    // every interior bin is touched by at least one filter
    for (int k = 1; k + 1 < fb.num_fft_bins; ++k) CHECK(coverage[size_t(k)] > 0.0);
}

TEST_CASE("loss_rec is zero on identical inputs") {
    for (int i = 0; i < 100; ++i) {
        Waveform w = random_wave(2048 + 17 * size_t(i), uint64_t(100 + i));
        CHECK(loss_rec(w, w) == 0.0);
    }
}

TEST_CASE("loss_rec is symmetric") {
    for (int i = 0; i < 5; ++i) {
        Waveform a = random_wave(4096, uint64_t(200 + i));
        Waveform b = random_wave(4096, uint64_t(300 + i));
        double ab = loss_rec(a, b), ba = loss_rec(b, a);
        CHECK(std::fabs(ab - ba) <= 1e-9 * std::max(1.0, std::fabs(ab)));
    }
}

TEST_CASE("loss_rec detects an amplitude mismatch") {
    Waveform a = sine_wave(440.0, 8000);
    Waveform b = a;
    for (auto& s : b.samples) s *= 0.5;
    CHECK(loss_rec(a, b) > 0.0);
}

TEST_CASE("loss_rec matches the straight-line oracle at a single scale") {
    Waveform a = random_wave(2048, 41);
    Waveform b = random_wave(2048, 42);
    for (int s : {64, 128}) {
        double mine = loss_rec_scale(a, b, s);
        double ref = ref_loss_scale(a, b, s);
        CHECK(std::fabs(mine - ref) <= 1e-6 * std::max(1.0, std::fabs(ref)));
    }
}

TEST_CASE("loss_rec rejects mismatched inputs") {
    Waveform a = random_wave(1000, 1), b = random_wave(999, 2);
    CHECK_THROWS_AS((void)loss_rec(a, b), ContractViolation);
}

TEST_CASE("invalid mel window is a configuration error") {
    CHECK_THROWS_AS((void)mel_spectrogram(random_wave(1000, 1), 100), ConfigError);
}

TEST_CASE("snr_db basics") {
    Waveform ref = sine_wave(50.0, 1600);  // 5 whole periods
    SUBCASE("identical signals report the exact sentinel") {
        Snr s = snr_db(ref, ref);
        CHECK(s.exact);
    }
    SUBCASE("equal-energy error gives 0 dB") {
        Waveform test = ref;
        for (size_t i = 0; i < test.samples.size(); ++i)
            test.samples[i] += ref.samples[(i + 400) % ref.samples.size()];
        Snr s = snr_db(ref, test);
        CHECK(!s.exact);
        CHECK(s.db == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("orthogonal noise at 1/100 energy gives 20 dB") {
        Waveform test = ref;
        for (size_t i = 0; i < test.samples.size(); ++i)
            test.samples[i] +=
                0.1 * 0.8 * std::cos(2.0 * kPi * 50.0 * double(i) / kDefaultSampleRate);
        Snr s = snr_db(ref, test);
        CHECK(s.db == doctest::Approx(20.0).epsilon(1e-6));
    }
    SUBCASE("zero-energy reference is an error") {
        Waveform z;
        z.samples.assign(1600, 0.0);
        CHECK_THROWS_AS((void)snr_db(z, ref), EstimationUnavailable);
    }
}

TEST_CASE("wav round trip and format rejection") {
    std::string path = "/tmp/pcdc_test_dsp.wav";
    Waveform w = random_wave(2345, 5, 0.9);
    write_wav(path, w);
    Waveform r = read_wav(path);
    REQUIRE(r.samples.size() == w.samples.size());
    CHECK(r.sample_rate_hz == kDefaultSampleRate);
    for (size_t i = 0; i < w.samples.size(); ++i)
        CHECK(std::fabs(r.samples[i] - w.samples[i]) <= 1.0 / 32768.0 + 1e-9);

    // patch the channel count to 2 and expect rejection
    {
        std::ifstream f(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
        bytes[22] = 2;
        std::ofstream o(path, std::ios::binary | std::ios::trunc);
        o.write(bytes.data(), std::streamsize(bytes.size()));
    }
    CHECK_THROWS_AS((void)read_wav(path), FormatError);
    std::remove(path.c_str());
}
