#pragma once

#include <vector>

#include "pcdc/dsp.hpp"

namespace pcdc {

enum class Task { Noise, Reverb };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

/// Synthetic room response: unit direct path at index 0 plus a white-noise
/// tail shaped by the envelope exp(-t/tau), tau = t60 / ln(1000).
struct RoomImpulseResponse {
    Waveform kernel;
    double t60_seconds = 0.0;
};

struct NoiseMixParams {
    double gain_mean_db = -5.0;
    double gain_std_db = 10.0;
};

struct Augmentation {
    enum class Kind { Additive, Convolutional };
    Kind kind = Kind::Additive;
    // Additive
    Waveform noise;
    double gain_db = 0.0;
    // Convolutional
    RoomImpulseResponse rir;

    static Augmentation additive(Waveform noise, double gain_db);
    static Augmentation convolutional(RoomImpulseResponse rir);
};

/// One element of the training stream. For the noise task both targets are
/// the normalized clean speech; for the reverb task target_b is B's speech
/// convolved with A's room response.
struct TrainingPair {
    Waveform input_a, target_a;
    Waveform input_b, target_b;
    Augmentation augmentation_a, augmentation_b;
};

/// Causal convolution truncated to the input length (FFT based).
Waveform convolve_causal(const Waveform& x, const Waveform& kernel);

/// Additive: peak-normalize speech and noise, then mix with the linear gain.
/// Convolutional: causal convolution with the kernel, truncated.
Waveform apply_augmentation(const Waveform& clean, const Augmentation& a);

/// Linear mixing gain 10^(g/20) with g ~ Normal(mean, std) in dB.
double sample_noise_gain_db(const NoiseMixParams& p, Rng& rng);
double sample_noise_gain(const NoiseMixParams& p, Rng& rng);

RoomImpulseResponse synthesize_rir(double t60_seconds, size_t length, Rng& rng);

// ---------------------------------------------------------------------------
// Synthetic corpus

struct CorpusParams {
    int count = 32;
    double clip_seconds = 2.4;
    int sample_rate_hz = kDefaultSampleRate;
    // Inter-syllable silences; the reverb task uses longer gaps so decay
    // regions are measurable.
    double gap_lo_s = 0.15;
    double gap_hi_s = 0.30;
    uint64_t seed = 1;

    static CorpusParams defaults_for(Task task);
};

/// Harmonic-complex "speech": time-varying fundamental in [100, 300] Hz,
/// syllable envelopes, and at least two silence gaps of >= 100 ms per clip.
Waveform synth_speech_clip(const CorpusParams& p, uint64_t item_seed);

/// Band-limited white noise with a random passband.
Waveform synth_noise_clip(double seconds, int sample_rate_hz, uint64_t item_seed);

std::vector<Waveform> make_speech_corpus(const CorpusParams& p);

// Reverb draw bounds. Pairs constrain A to strong and B to weak responses.
constexpr double kT60CorpusLo = 0.07;
constexpr double kT60CorpusHi = 1.2;
constexpr double kT60StrongMin = 0.4;
constexpr double kT60WeakMax = 0.25;

/// Deterministic pair stream: pair `index` depends only on (corpus, seed,
/// index), so disjoint index ranges can be generated concurrently.
TrainingPair pair_at(Task task, const std::vector<Waveform>& corpus,
                     uint64_t seed, uint64_t index);

std::vector<TrainingPair> make_pairs(Task task, const std::vector<Waveform>& corpus,
                                     uint64_t seed, int count);

/// Held-out single items for evaluation.
struct EvalItem {
    Waveform input;   // augmented
    Waveform clean;   // normalized clean speech
    double t60_seconds = 0.0;  // reverb task only
    double gain_db = 0.0;      // noise task only
};

/// Noise task: one noisy/clean pair. Reverb task: strongly reverberant input
/// (t60 drawn in [0.4, 1.0] s).
EvalItem eval_item_at(Task task, const std::vector<Waveform>& corpus,
                      uint64_t seed, uint64_t index);

}  // namespace pcdc
