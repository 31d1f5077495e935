#pragma once

#include <vector>

#include "pcdc/augment.hpp"
#include "pcdc/codec.hpp"

namespace pcdc {

// Schroeder fit window and decay-region detection constants.
constexpr double kFitHiDb = -5.0;
constexpr double kFitLoDb = -25.0;
constexpr double kMinFitSpanDb = 12.0;  // least dynamic range worth fitting
constexpr double kMinGapSeconds = 0.10;
constexpr double kActiveThresholdDb = -20.0;  // relative to clip peak energy

struct ReverbEstimate {
    double t60_seconds = 0.0;  // median over usable regions
    double fit_hi_db = kFitHiDb;
    double fit_lo_db = kFitLoDb;
    int num_decay_regions = 0;
    std::vector<double> per_region;
};

/// Blind T60 by backward integration over free-decay regions after signal
/// offsets: per region, 10*log10 of the normalized Schroeder curve is fit
/// with a line over (-5, -25) dB (shrunk when the usable range is smaller)
/// and T60 = 60 / |slope|. Median across regions. Throws
/// EstimationUnavailable when no region yields a fit.
ReverbEstimate estimate_t60(const Waveform& w);

/// Short-time energy in dB relative to the clip peak (20 ms window, 10 ms
/// hop); shared by decay detection and the corpus gap checks.
std::vector<double> short_time_energy_db(const Waveform& w);

struct SilenceGap {
    size_t start_sample = 0;
    size_t length_samples = 0;
};
std::vector<SilenceGap> find_silence_gaps(const Waveform& w, double threshold_db = -45.0);

// ---------------------------------------------------------------------------
// Experiment harnesses

struct SwapRow {
    bool valid = false;  // all four estimates usable
    double t60_recon_a = 0.0, t60_recon_b = 0.0;
    double t60_swapped_a = 0.0, t60_swapped_b = 0.0;
};

/// Encode both waveforms, decode as-is and with the named partition swapped,
/// and estimate T60 on all four outputs. Estimation failures invalidate the
/// row, never the run.
std::vector<SwapRow> swap_experiment(const Codec& codec,
                                     const std::vector<std::pair<Waveform, Waveform>>& pairs,
                                     const std::string& partition);

struct SweepResult {
    std::vector<double> factors;
    std::vector<double> normalized_mean;  // exactly 1.0 at factor 1.0
    std::vector<double> ci_lo, ci_hi;     // bootstrap 95% intervals
    int items_used = 0;
    int items_dropped = 0;
};

/// Scale the named partition by each factor before decoding and report the
/// per-factor mean T60 normalized by each item's factor-1.0 value.
/// `factors` must contain 1.0.
SweepResult weight_sweep(const Codec& codec, const std::vector<Waveform>& inputs,
                         const std::vector<double>& factors, const std::string& partition,
                         uint64_t bootstrap_seed);

struct DenoiseItemReport {
    double snr_input_db = 0.0;   // noisy input vs clean
    double snr_masked_db = 0.0;  // masked decode vs clean
    double snr_full_db = 0.0;    // full decode vs clean
    double improvement_db = 0.0;
};

struct DenoiseReport {
    std::vector<DenoiseItemReport> items;
    double mean_improvement_db = 0.0;
    double fraction_masked_better = 0.0;  // masked SNR > full SNR
};

DenoiseReport denoise_report(const Codec& codec, const std::vector<EvalItem>& items,
                             const std::string& partition);

/// Decode through the quantizers with an optional partition edit, trimmed to
/// `length` samples.
Waveform codec_roundtrip(const Codec& codec, const Waveform& input, size_t length);
Waveform codec_roundtrip_masked(const Codec& codec, const Waveform& input,
                                const std::string& partition, size_t length);

}  // namespace pcdc
