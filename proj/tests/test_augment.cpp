#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "pcdc/augment.hpp"
#include "pcdc/eval.hpp"

using namespace pcdc;

namespace {

Waveform random_wave(size_t n, uint64_t seed, double amp = 0.8) {
    Rng rng(seed);
    Waveform w;
    w.samples.resize(n);
    for (auto& s : w.samples) s = rng.uniform(-amp, amp);
    return w;
}

// O(T*K) oracle for the causal truncated convolution.
Waveform direct_convolve(const Waveform& x, const Waveform& k) {
    Waveform out;
    out.sample_rate_hz = x.sample_rate_hz;
    out.samples.assign(x.samples.size(), 0.0);
    for (size_t t = 0; t < x.samples.size(); ++t) {
        double acc = 0.0;
        for (size_t j = 0; j < k.samples.size() && j <= t; ++j)
            acc += k.samples[j] * x.samples[t - j];
        out.samples[t] = acc;
    }
    return out;
}

// Schroeder fit over the whole kernel; analytic decay oracle for RIRs.
double kernel_t60(const Waveform& kernel) {
    size_t n = kernel.samples.size();
    std::vector<double> curve(n);
    double acc = 0.0;
    for (size_t i = n; i-- > 0;) {
        acc += kernel.samples[i] * kernel.samples[i];
        curve[i] = acc;
    }
    double e0 = curve[0];
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    size_t count = 0;
    for (size_t i = 0; i < size_t(double(n) * 0.9); ++i) {
        double db = 10.0 * std::log10(curve[i] / e0);
        if (db > -5.0) continue;
        if (db < -25.0) break;
        double t = double(i) / kernel.sample_rate_hz;
        sx += t;
        sy += db;
        sxx += t * t;
        sxy += t * db;
        ++count;
    }
    REQUIRE(count > 8);
    double slope = (double(count) * sxy - sx * sy) / (double(count) * sxx - sx * sx);
    return 60.0 / (-slope);
}

}  // namespace

TEST_CASE("additive augmentation with zero noise is the identity") {
    Waveform clean = random_wave(4000, 1);
    clean = peak_normalize(clean);
    Waveform zero;
    zero.samples.assign(4000, 0.0);
    Waveform out = apply_augmentation(clean, Augmentation::additive(zero, -5.0));
    REQUIRE(out.samples.size() == clean.samples.size());
    for (size_t i = 0; i < out.samples.size(); ++i)
        CHECK(out.samples[i] == doctest::Approx(clean.samples[i]).epsilon(1e-12));
}

TEST_CASE("unit impulse kernel is the identity") {
    Waveform clean = random_wave(4000, 2);
    RoomImpulseResponse rir;
    rir.kernel.samples = {1.0};
    rir.t60_seconds = 0.01;
    Waveform out = apply_augmentation(clean, Augmentation::convolutional(rir));
    for (size_t i = 0; i < out.samples.size(); ++i)
        CHECK(out.samples[i] == doctest::Approx(clean.samples[i]).epsilon(1e-9));
}

TEST_CASE("delayed impulse shifts the signal") {
    Waveform clean = random_wave(1000, 3);
    RoomImpulseResponse rir;
    rir.kernel.samples.assign(6, 0.0);
    rir.kernel.samples[5] = 1.0;
    Waveform out = apply_augmentation(clean, Augmentation::convolutional(rir));
    for (int i = 0; i < 5; ++i) CHECK(std::fabs(out.samples[size_t(i)]) < 1e-9);
    for (size_t i = 5; i < out.samples.size(); ++i)
        CHECK(out.samples[i] == doctest::Approx(clean.samples[i - 5]).epsilon(1e-9));
}

TEST_CASE("length mismatch for additive noise is a contract violation") {
    Waveform clean = random_wave(100, 4);
    Waveform noise = random_wave(99, 5);
    CHECK_THROWS_AS((void)apply_augmentation(clean, Augmentation::additive(noise, 0.0)),
                    ContractViolation);
}

TEST_CASE("fft convolution matches the direct oracle") {
    for (uint64_t seed = 0; seed < 6; ++seed) {
        Rng rng(900 + seed);
        size_t t = 100 + rng.uniform_int(3997);
        size_t k = 1 + rng.uniform_int(500);
        Waveform x = random_wave(t, seed * 2 + 10);
        Waveform kern = random_wave(k, seed * 2 + 11);
        Waveform fast = convolve_causal(x, kern);
        Waveform slow = direct_convolve(x, kern);
        for (size_t i = 0; i < t; ++i)
            CHECK(std::fabs(fast.samples[i] - slow.samples[i]) < 1e-9);
    }
}

TEST_CASE("convolution is linear") {
    Waveform x = random_wave(2000, 20);
    Waveform y = random_wave(2000, 21);
    Waveform kern = random_wave(300, 22);
    double a = 0.7, b = -1.3;
    Waveform mix;
    mix.samples.resize(2000);
    for (size_t i = 0; i < 2000; ++i) mix.samples[i] = a * x.samples[i] + b * y.samples[i];
    Waveform lhs = convolve_causal(mix, kern);
    Waveform cx = convolve_causal(x, kern);
    Waveform cy = convolve_causal(y, kern);
    for (size_t i = 0; i < 2000; ++i) {
        double rhs = a * cx.samples[i] + b * cy.samples[i];
        CHECK(std::fabs(lhs.samples[i] - rhs) <= 1e-6 * std::max(1.0, std::fabs(rhs)));
    }
}

TEST_CASE("noise gain sampling matches the declared distribution") {
    NoiseMixParams p;
    Rng rng(77);
    const int n = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double g = sample_noise_gain_db(p, rng);
        sum += g;
        sum2 += g * g;
    }
    double mean = sum / n;
    double stddev = std::sqrt(sum2 / n - mean * mean);
    CHECK(std::fabs(mean - (-5.0)) < 0.3);
    CHECK(std::fabs(stddev - 10.0) < 0.3);

    SUBCASE("deterministic under a fixed seed") {
        Rng a(123), b(123);
        for (int i = 0; i < 100; ++i)
            CHECK(sample_noise_gain(p, a) == sample_noise_gain(p, b));
    }
    SUBCASE("zero std collapses to the mean") {
        NoiseMixParams z;
        z.gain_std_db = 0.0;
        Rng r(5);
        for (int i = 0; i < 10; ++i)
            CHECK(sample_noise_gain_db(z, r) == doctest::Approx(-5.0));
    }
}

TEST_CASE("synthesized rir decays at the requested rate") {
    Rng rng(31);
    RoomImpulseResponse rir = synthesize_rir(0.3, 8192, rng);
    CHECK(rir.kernel.samples[0] == 1.0);
    CHECK(rir.t60_seconds == 0.3);
    double est = kernel_t60(rir.kernel);
    CHECK(std::fabs(est - 0.3) / 0.3 < 0.05);
}

TEST_CASE("tiny t60 gives a near-impulse kernel") {
    Rng rng(32);
    RoomImpulseResponse rir = synthesize_rir(0.01, 1024, rng);
    Waveform x = random_wave(2000, 33);
    Waveform out = apply_augmentation(x, Augmentation::convolutional(rir));
    double err = 0.0, ref = 0.0;
    for (size_t i = 0; i < x.samples.size(); ++i) {
        err += (out.samples[i] - x.samples[i]) * (out.samples[i] - x.samples[i]);
        ref += x.samples[i] * x.samples[i];
    }
    CHECK(std::sqrt(err / ref) < 0.12);
}

TEST_CASE("rir rejects bad t60") {
    Rng rng(34);
    CHECK_THROWS_AS((void)synthesize_rir(-1.0, 100, rng), ContractViolation);
    CHECK_THROWS_AS((void)synthesize_rir(5.0, 100, rng), ConfigError);
}

TEST_CASE("speech corpus clips carry at least two long silence gaps") {
    CorpusParams p = CorpusParams::defaults_for(Task::Reverb);
    p.count = 8;
    p.clip_seconds = 1.92;
    p.seed = 99;
    for (const Waveform& w : make_speech_corpus(p)) {
        CHECK(peak_abs(w) == doctest::Approx(0.95));
        auto gaps = find_silence_gaps(w, -45.0);
        int long_gaps = 0;
        for (const auto& g : gaps)
            if (g.length_samples >= size_t(0.1 * w.sample_rate_hz)) ++long_gaps;
        CHECK(long_gaps >= 2);
    }
}

TEST_CASE("reverb pairs respect the strong/weak t60 split") {
    CorpusParams p = CorpusParams::defaults_for(Task::Reverb);
    p.count = 6;
    p.seed = 4;
    auto corpus = make_speech_corpus(p);
    for (uint64_t i = 0; i < 200; ++i) {
        TrainingPair pair = pair_at(Task::Reverb, corpus, 12345, i);
        CHECK(pair.augmentation_a.rir.t60_seconds >= kT60StrongMin);
        CHECK(pair.augmentation_b.rir.t60_seconds <= kT60WeakMax);
        CHECK(pair.augmentation_a.rir.t60_seconds <= kT60CorpusHi);
        CHECK(pair.augmentation_b.rir.t60_seconds >= kT60CorpusLo);
    }
}

TEST_CASE("reverb pair target_b carries A's room response") {
    CorpusParams p = CorpusParams::defaults_for(Task::Reverb);
    p.count = 4;
    p.seed = 6;
    auto corpus = make_speech_corpus(p);
    TrainingPair pair = pair_at(Task::Reverb, corpus, 777, 0);
    // target_b = conv(clean_b, rir_a) and input_b = conv(clean_b, rir_b), so
    // by commutativity conv(target_b, rir_b) == conv(input_b, rir_a).
    Waveform lhs = convolve_causal(pair.target_b, pair.augmentation_b.rir.kernel);
    Waveform rhs = convolve_causal(pair.input_b, pair.augmentation_a.rir.kernel);
    REQUIRE(lhs.samples.size() == rhs.samples.size());
    for (size_t i = 0; i < lhs.samples.size(); i += 53)
        CHECK(lhs.samples[i] == doctest::Approx(rhs.samples[i]).epsilon(1e-7));
}

TEST_CASE("noise pair targets are the normalized clean speech") {
    CorpusParams p = CorpusParams::defaults_for(Task::Noise);
    p.count = 4;
    p.seed = 8;
    auto corpus = make_speech_corpus(p);
    TrainingPair pair = pair_at(Task::Noise, corpus, 555, 3);
    CHECK(peak_abs(pair.target_a) == doctest::Approx(1.0));
    CHECK(peak_abs(pair.target_b) == doctest::Approx(1.0));
    // x - x^c equals the scaled noise
    double g = std::pow(10.0, pair.augmentation_a.gain_db / 20.0);
    Waveform noise_n = peak_normalize(pair.augmentation_a.noise);
    for (size_t i = 0; i < pair.input_a.samples.size(); i += 97) {
        double expect = pair.target_a.samples[i] + g * noise_n.samples[i];
        CHECK(pair.input_a.samples[i] == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("pair generation is deterministic in (seed, index)") {
    CorpusParams p = CorpusParams::defaults_for(Task::Noise);
    p.count = 4;
    p.seed = 10;
    auto corpus = make_speech_corpus(p);
    TrainingPair a = pair_at(Task::Noise, corpus, 42, 7);
    TrainingPair b = pair_at(Task::Noise, corpus, 42, 7);
    CHECK(a.input_a.samples == b.input_a.samples);
    CHECK(a.input_b.samples == b.input_b.samples);
    CHECK(a.target_a.samples == b.target_a.samples);
    CHECK(a.augmentation_a.gain_db == b.augmentation_a.gain_db);
}

TEST_CASE("empty corpus is a configuration error") {
    std::vector<Waveform> empty;
    CHECK_THROWS_AS((void)pair_at(Task::Noise, empty, 1, 0), ConfigError);
}
