#include "pcdc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace pcdc {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kLn1000 = 6.907755278982137;
// Tail level scales with sqrt(tau) so short responses converge to a clean
// impulse and long ones carry audibly more reverberant energy.
constexpr double kRirTailAmp = 0.15;
constexpr double kRirTailRefTau = 0.1;
// Stream tags for deriving independent RNG streams.
constexpr uint64_t kTagSpeech = 0x73706565;
constexpr uint64_t kTagNoise = 0x6e6f6973;
constexpr uint64_t kTagPair = 0x70616972;
constexpr uint64_t kTagEval = 0x6576616c;

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}
}  // namespace

const char* task_name(Task t) { return t == Task::Noise ? "noise" : "reverb"; }

Task task_from_name(const std::string& name) {
    if (name == "noise") return Task::Noise;
    if (name == "reverb") return Task::Reverb;
    throw ConfigError("unknown task: " + name + " (want noise|reverb)");
}

Augmentation Augmentation::additive(Waveform noise, double gain_db) {
    Augmentation a;
    a.kind = Kind::Additive;
    a.noise = std::move(noise);
    a.gain_db = gain_db;
    return a;
}

Augmentation Augmentation::convolutional(RoomImpulseResponse rir) {
    Augmentation a;
    a.kind = Kind::Convolutional;
    a.rir = std::move(rir);
    return a;
}

Waveform convolve_causal(const Waveform& x, const Waveform& kernel) {
    require(!kernel.samples.empty(), "convolve_causal: empty kernel");
    require(!x.samples.empty(), "convolve_causal: empty input");
    const size_t t = x.samples.size();
    const size_t k = kernel.samples.size();
    size_t n = next_pow2(t + k - 1);
    std::vector<std::complex<double>> fx(n), fk(n);
    for (size_t i = 0; i < t; ++i) fx[i] = x.samples[i];
    for (size_t i = 0; i < k; ++i) fk[i] = kernel.samples[i];
    fft_pow2(fx, false);
    fft_pow2(fk, false);
    for (size_t i = 0; i < n; ++i) fx[i] *= fk[i];
    fft_pow2(fx, true);
    Waveform out;
    out.sample_rate_hz = x.sample_rate_hz;
    out.samples.resize(t);
    double inv_n = 1.0 / double(n);
    for (size_t i = 0; i < t; ++i) out.samples[i] = fx[i].real() * inv_n;
    return out;
}

Waveform apply_augmentation(const Waveform& clean, const Augmentation& a) {
    if (a.kind == Augmentation::Kind::Additive) {
        require(clean.samples.size() == a.noise.samples.size(),
                "apply_augmentation: additive noise length mismatch");
        require(clean.sample_rate_hz == a.noise.sample_rate_hz,
                "apply_augmentation: sample rate mismatch");
        Waveform s = peak_normalize(clean);
        Waveform n = peak_normalize(a.noise);
        double g = std::pow(10.0, a.gain_db / 20.0);
        for (size_t i = 0; i < s.samples.size(); ++i)
            s.samples[i] += g * n.samples[i];
        return s;
    }
    require(clean.sample_rate_hz == a.rir.kernel.sample_rate_hz,
            "apply_augmentation: sample rate mismatch");
    return convolve_causal(clean, a.rir.kernel);
}

double sample_noise_gain_db(const NoiseMixParams& p, Rng& rng) {
    require(p.gain_std_db >= 0.0, "noise gain std must be >= 0");
    return rng.normal(p.gain_mean_db, p.gain_std_db);
}

double sample_noise_gain(const NoiseMixParams& p, Rng& rng) {
    return std::pow(10.0, sample_noise_gain_db(p, rng) / 20.0);
}

RoomImpulseResponse synthesize_rir(double t60_seconds, size_t length, Rng& rng) {
    require(t60_seconds > 0.0, "synthesize_rir: t60 must be positive");
    if (t60_seconds < 0.01 || t60_seconds > 2.0)
        throw ConfigError("synthesize_rir: t60 outside supported range [0.01, 2.0]");
    require(length >= 1, "synthesize_rir: empty kernel");
    RoomImpulseResponse r;
    r.t60_seconds = t60_seconds;
    r.kernel.sample_rate_hz = kDefaultSampleRate;
    r.kernel.samples.assign(length, 0.0);
    r.kernel.samples[0] = 1.0;
    double tau = t60_seconds / kLn1000;
    double fs = double(r.kernel.sample_rate_hz);
    double amp = kRirTailAmp * std::sqrt(tau / kRirTailRefTau);
    for (size_t i = 1; i < length; ++i) {
        double env = std::exp(-double(i) / (fs * tau));
        r.kernel.samples[i] = amp * env * rng.normal();
    }
    return r;
}

CorpusParams CorpusParams::defaults_for(Task task) {
    CorpusParams p;
    if (task == Task::Reverb) {
        p.gap_lo_s = 0.25;
        p.gap_hi_s = 0.40;
    }
    return p;
}

Waveform synth_speech_clip(const CorpusParams& p, uint64_t item_seed) {
    if (p.clip_seconds < 1.2)
        throw ConfigError("speech clips must be at least 1.2 s to hold two gaps");
    Rng rng(item_seed);
    const int fs = p.sample_rate_hz;
    const size_t n = size_t(std::llround(p.clip_seconds * fs));
    Waveform w;
    w.sample_rate_hz = fs;
    w.samples.assign(n, 0.0);

    // Clip-wide voice characteristics.
    double f0_base = rng.uniform(100.0, 300.0);
    double vib_rate = rng.uniform(3.0, 7.0);
    double vib_phase = rng.uniform(0.0, 2.0 * kPi);
    double rolloff = rng.uniform(0.7, 1.3);
    double formant_hz = rng.uniform(400.0, 2500.0);
    double formant_bw = rng.uniform(300.0, 600.0);
    double am_rate = rng.uniform(2.0, 4.0);

    size_t pos = size_t(rng.uniform(0.0, 0.08) * fs);
    int gaps_done = 0;
    while (pos < n) {
        size_t syl_len = size_t(rng.uniform(0.15, 0.25) * fs);
        size_t gap_len = size_t(rng.uniform(p.gap_lo_s, p.gap_hi_s) * fs);
        double f0 = f0_base * rng.uniform(0.9, 1.1);
        int num_h = std::min(24, int(7000.0 / (f0 * 1.1)));
        std::vector<double> amp(static_cast<size_t>(num_h), 0.0);
        for (int h = 1; h <= num_h; ++h) {
            double fh = h * f0;
            double formant = 1.0 + 2.0 * std::exp(-0.5 * (fh - formant_hz) * (fh - formant_hz) /
                                                  (formant_bw * formant_bw));
            amp[size_t(h - 1)] = formant / std::pow(double(h), rolloff);
        }
        double phase = rng.uniform(0.0, 2.0 * kPi);
        size_t attack = size_t(0.02 * fs), release = size_t(0.04 * fs);
        size_t end = std::min(n, pos + syl_len);
        for (size_t i = pos; i < end; ++i) {
            double t = double(i) / fs;
            double f_inst = f0 * (1.0 + 0.06 * std::sin(2.0 * kPi * vib_rate * t + vib_phase));
            phase += 2.0 * kPi * f_inst / fs;
            double v = 0.0;
            for (int h = 1; h <= num_h; ++h)
                v += amp[size_t(h - 1)] * std::sin(double(h) * phase);
            size_t rel = i - pos;
            double env = 1.0;
            if (rel < attack) env = 0.5 - 0.5 * std::cos(kPi * double(rel) / double(attack));
            size_t until_end = end - i;
            if (until_end < release)
                env *= 0.5 - 0.5 * std::cos(kPi * double(until_end) / double(release));
            env *= 1.0 + 0.15 * std::sin(2.0 * kPi * am_rate * t);
            w.samples[i] = v * env;
        }
        if (end + gap_len <= n && gap_len >= size_t(0.1 * fs)) ++gaps_done;
        pos = end + gap_len;
    }
    // The timeline above always fits >= 2 syllable/gap cycles for clips of
    // 1.2 s and up; fail loudly rather than emit an unusable clip.
    if (gaps_done < 2)
        throw ConfigError("synth_speech_clip: clip too short for two silence gaps");
    return peak_normalize(w, 0.95);
}

Waveform synth_noise_clip(double seconds, int sample_rate_hz, uint64_t item_seed) {
    Rng rng(item_seed);
    const size_t n = size_t(std::llround(seconds * sample_rate_hz));
    size_t m = next_pow2(std::max<size_t>(n, 64));
    std::vector<std::complex<double>> buf(m);
    for (size_t i = 0; i < m; ++i) buf[i] = rng.normal();
    fft_pow2(buf, false);
    double f_lo = rng.uniform(200.0, 3000.0);
    double f_hi = std::min(7600.0, f_lo + rng.uniform(500.0, 4000.0));
    double edge = 100.0;  // raised-cosine transition width
    double bin_hz = double(sample_rate_hz) / double(m);
    for (size_t k = 0; k <= m / 2; ++k) {
        double f = k * bin_hz;
        double g;
        if (f < f_lo - edge || f > f_hi + edge) {
            g = 0.0;
        } else if (f < f_lo + edge) {
            g = 0.5 - 0.5 * std::cos(kPi * (f - (f_lo - edge)) / (2.0 * edge));
        } else if (f > f_hi - edge) {
            g = 0.5 + 0.5 * std::cos(kPi * (f - (f_hi - edge)) / (2.0 * edge));
        } else {
            g = 1.0;
        }
        buf[k] *= g;
        if (k > 0 && k < m / 2) buf[m - k] = std::conj(buf[k]);
    }
    fft_pow2(buf, true);
    Waveform w;
    w.sample_rate_hz = sample_rate_hz;
    w.samples.resize(n);
    double inv_m = 1.0 / double(m);
    for (size_t i = 0; i < n; ++i) w.samples[i] = buf[i].real() * inv_m;
    return peak_normalize(w, 0.95);
}

std::vector<Waveform> make_speech_corpus(const CorpusParams& p) {
    std::vector<Waveform> out;
    out.reserve(size_t(p.count));
    for (int i = 0; i < p.count; ++i)
        out.push_back(synth_speech_clip(p, mix_seed(p.seed, kTagSpeech, uint64_t(i))));
    return out;
}

namespace {

size_t rir_length_for(double t60, int fs) {
    double secs = std::clamp(1.5 * t60, 0.05, 2.0);
    return std::max<size_t>(256, size_t(std::llround(secs * fs)));
}

double draw_log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

}  // namespace

TrainingPair pair_at(Task task, const std::vector<Waveform>& corpus, uint64_t seed,
                     uint64_t index) {
    if (corpus.empty()) throw ConfigError("pair_at: empty corpus");
    Rng rng(mix_seed(seed, kTagPair, index));
    size_t ia = size_t(rng.uniform_int(corpus.size()));
    size_t ib = size_t(rng.uniform_int(corpus.size()));
    if (corpus.size() > 1 && ib == ia) ib = (ib + 1) % corpus.size();
    const Waveform& sp_a = corpus[ia];
    const Waveform& sp_b = corpus[ib];

    TrainingPair pair;
    if (task == Task::Noise) {
        NoiseMixParams mix;
        double clip_s = sp_a.duration_s();
        Waveform noise_a =
            synth_noise_clip(clip_s, sp_a.sample_rate_hz, mix_seed(seed, kTagNoise, 2 * index));
        Waveform noise_b = synth_noise_clip(sp_b.duration_s(), sp_b.sample_rate_hz,
                                            mix_seed(seed, kTagNoise, 2 * index + 1));
        double ga = sample_noise_gain_db(mix, rng);
        double gb = sample_noise_gain_db(mix, rng);
        pair.augmentation_a = Augmentation::additive(std::move(noise_a), ga);
        pair.augmentation_b = Augmentation::additive(std::move(noise_b), gb);
        pair.input_a = apply_augmentation(sp_a, pair.augmentation_a);
        pair.input_b = apply_augmentation(sp_b, pair.augmentation_b);
        pair.target_a = peak_normalize(sp_a);
        pair.target_b = peak_normalize(sp_b);
    } else {
        double t60_a = draw_log_uniform(rng, kT60StrongMin, 1.0);
        double t60_b = draw_log_uniform(rng, kT60CorpusLo, kT60WeakMax);
        int fs = sp_a.sample_rate_hz;
        RoomImpulseResponse rir_a = synthesize_rir(t60_a, rir_length_for(t60_a, fs), rng);
        RoomImpulseResponse rir_b = synthesize_rir(t60_b, rir_length_for(t60_b, fs), rng);
        // Clean speech at half scale keeps reverberant mixes near unit range.
        Waveform clean_a = peak_normalize(sp_a, 0.5);
        Waveform clean_b = peak_normalize(sp_b, 0.5);
        pair.augmentation_a = Augmentation::convolutional(rir_a);
        pair.augmentation_b = Augmentation::convolutional(rir_b);
        pair.input_a = apply_augmentation(clean_a, pair.augmentation_a);
        pair.input_b = apply_augmentation(clean_b, pair.augmentation_b);
        pair.target_a = clean_a;
        pair.target_b = apply_augmentation(clean_b, pair.augmentation_a);
    }
    return pair;
}

std::vector<TrainingPair> make_pairs(Task task, const std::vector<Waveform>& corpus,
                                     uint64_t seed, int count) {
    std::vector<TrainingPair> out;
    out.reserve(size_t(count));
    for (int i = 0; i < count; ++i)
        out.push_back(pair_at(task, corpus, seed, uint64_t(i)));
    return out;
}

EvalItem eval_item_at(Task task, const std::vector<Waveform>& corpus, uint64_t seed,
                      uint64_t index) {
    if (corpus.empty()) throw ConfigError("eval_item_at: empty corpus");
    Rng rng(mix_seed(seed, kTagEval, index));
    const Waveform& sp = corpus[size_t(rng.uniform_int(corpus.size()))];
    EvalItem item;
    if (task == Task::Noise) {
        NoiseMixParams mix;
        Waveform noise = synth_noise_clip(sp.duration_s(), sp.sample_rate_hz,
                                          mix_seed(seed, kTagNoise, index));
        item.gain_db = sample_noise_gain_db(mix, rng);
        Augmentation a = Augmentation::additive(std::move(noise), item.gain_db);
        item.input = apply_augmentation(sp, a);
        item.clean = peak_normalize(sp);
    } else {
        item.t60_seconds = draw_log_uniform(rng, kT60StrongMin, 1.0);
        int fs = sp.sample_rate_hz;
        RoomImpulseResponse rir =
            synthesize_rir(item.t60_seconds, rir_length_for(item.t60_seconds, fs), rng);
        item.clean = peak_normalize(sp, 0.5);
        item.input = convolve_causal(item.clean, rir.kernel);
    }
    return item;
}

}  // namespace pcdc
