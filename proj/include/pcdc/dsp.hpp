#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "pcdc/common.hpp"

namespace pcdc {

constexpr int kDefaultSampleRate = 16000;
constexpr int kMelBins = 64;
constexpr double kLogClampEps = 1e-5;

/// Mono audio buffer. Samples are nominally in [-1, 1] after normalization;
/// intermediate signals (e.g. noise mixes) may exceed that range.
struct Waveform {
    std::vector<double> samples;
    int sample_rate_hz = kDefaultSampleRate;

    Waveform() = default;
    Waveform(std::vector<double> s, int rate = kDefaultSampleRate)
        : samples(std::move(s)), sample_rate_hz(rate) {}

    size_t size() const { return samples.size(); }
    double duration_s() const { return double(samples.size()) / sample_rate_hz; }
};

/// Scale so the peak magnitude is `peak` (no-op on all-zero input).
Waveform peak_normalize(const Waveform& w, double peak = 1.0);

double peak_abs(const Waveform& w);
double energy(const Waveform& w);

// ---------------------------------------------------------------------------
// FFT (radix-2, power-of-two sizes only; all analysis windows are powers of 2)

/// In-place complex FFT. `inverse` computes the unnormalized inverse transform
/// (conjugate twiddles, no 1/N scaling).
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse);

// ---------------------------------------------------------------------------
// Mel analysis

/// 64 triangular filters, HTK mel scale, spanning [0, sample_rate/2].
/// Filters are stored sparsely as (first DFT bin, weights).
struct MelFilterbank {
    int num_fft_bins = 0;  // s/2 + 1
    struct Filter {
        int first_bin;
        std::vector<double> weights;
    };
    std::vector<Filter> filters;

    static MelFilterbank make(int window_len, int sample_rate_hz);
};

/// Power mel spectrogram: frames[t][m], m < 64, all entries >= 0.
struct MelSpectrogram {
    int window_len = 0;   // s, one of {64,...,2048}
    int hop = 0;          // s/4
    int num_frames = 0;
    std::vector<double> frames;  // row-major [num_frames x kMelBins]

    double at(int t, int m) const { return frames[size_t(t) * kMelBins + m]; }
};

bool valid_mel_window(int s);

/// Frame count under the causal framing policy: the signal is left-padded
/// with s - hop zeros so frame t covers original samples
/// [t*hop - (s-hop), (t+1)*hop - 1]; only complete frames are produced.
int mel_num_frames(size_t num_samples, int window_len);

/// Precomputed per-scale analysis state (Hann window, filterbank). Cached by
/// (window_len, sample_rate); the cache is immutable after construction.
struct MelAnalyzer {
    int window_len;
    int hop;
    std::vector<double> hann;
    MelFilterbank bank;

    static const MelAnalyzer& get(int window_len, int sample_rate_hz);

    /// Power spectrum of one already-windowed frame (length s) -> s/2+1 bins.
    void power_spectrum(const double* frame, std::vector<double>& power) const;
};

MelSpectrogram mel_spectrogram(const Waveform& w, int window_len);

// ---------------------------------------------------------------------------
// Losses and metrics

inline const std::vector<int>& mel_loss_scales() {
    static const std::vector<int> s = {64, 128, 256, 512, 1024, 2048};
    return s;
}

/// Multi-scale spectral reconstruction loss: per scale s, the L1 distance
/// between power mel frames plus sqrt(s/2) times the summed per-frame L2
/// distance between log mels (log of max(S, 1e-5)).
double loss_rec(const Waveform& x, const Waveform& x_prime);

/// Single-scale variant (the per-scale term of loss_rec).
double loss_rec_scale(const Waveform& x, const Waveform& x_prime, int window_len);

/// 10*log10(sum ref^2 / sum (ref-test)^2). `exact` is set instead of a value
/// when test == ref sample-for-sample. Throws on zero-energy reference.
struct Snr {
    bool exact = false;
    double db = 0.0;
};
Snr snr_db(const Waveform& reference, const Waveform& test);

}  // namespace pcdc
