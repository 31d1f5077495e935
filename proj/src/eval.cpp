#include "pcdc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pcdc {

namespace {

constexpr double kWinSeconds = 0.020;
constexpr double kHopSeconds = 0.010;

double db_ratio(double num, double den) {
    if (num <= 0.0 || den <= 0.0) return -400.0;
    return 10.0 * std::log10(num / den);
}

}  // namespace

std::vector<double> short_time_energy_db(const Waveform& w) {
    const int win = std::max(1, int(kWinSeconds * w.sample_rate_hz));
    const int hop = std::max(1, int(kHopSeconds * w.sample_rate_hz));
    std::vector<double> energy;
    for (size_t start = 0; start + size_t(win) <= w.samples.size(); start += size_t(hop)) {
        double e = 0.0;
        for (int i = 0; i < win; ++i) {
            double s = w.samples[start + size_t(i)];
            e += s * s;
        }
        energy.push_back(e / win);
    }
    double peak = 0.0;
    for (double e : energy) peak = std::max(peak, e);
    std::vector<double> out(energy.size());
    for (size_t i = 0; i < energy.size(); ++i) out[i] = db_ratio(energy[i], peak);
    return out;
}

std::vector<SilenceGap> find_silence_gaps(const Waveform& w, double threshold_db) {
    const int hop = std::max(1, int(kHopSeconds * w.sample_rate_hz));
    std::vector<double> db = short_time_energy_db(w);
    std::vector<SilenceGap> gaps;
    size_t run_start = 0;
    size_t run_len = 0;
    for (size_t k = 0; k <= db.size(); ++k) {
        bool quiet = k < db.size() && db[k] < threshold_db;
        if (quiet) {
            if (run_len == 0) run_start = k;
            ++run_len;
        } else if (run_len > 0) {
            SilenceGap g;
            g.start_sample = run_start * size_t(hop);
            g.length_samples = run_len * size_t(hop);
            gaps.push_back(g);
            run_len = 0;
        }
    }
    return gaps;
}

namespace {

struct Region {
    size_t start;  // decay onset (last active sample)
    size_t end;    // next onset or clip end
};

// Signal offsets: active frames followed by >= 100 ms below the activity
// threshold.
std::vector<Region> find_decay_regions(const Waveform& w) {
    const int hop = std::max(1, int(kHopSeconds * w.sample_rate_hz));
    const int win = std::max(1, int(kWinSeconds * w.sample_rate_hz));
    std::vector<double> db = short_time_energy_db(w);
    const size_t min_gap_frames = size_t(kMinGapSeconds / kHopSeconds);
    std::vector<Region> regions;
    for (size_t k = 0; k + 1 < db.size(); ++k) {
        if (db[k] < kActiveThresholdDb || db[k + 1] >= kActiveThresholdDb) continue;
        // k is the last active frame before a quiet run; measure the run.
        size_t quiet = 0;
        size_t j = k + 1;
        while (j < db.size() && db[j] < kActiveThresholdDb) {
            ++quiet;
            ++j;
        }
        if (quiet < min_gap_frames) continue;
        Region r;
        r.start = k * size_t(hop) + size_t(win);  // end of the active window
        r.end = (j < db.size()) ? j * size_t(hop) : w.samples.size();
        if (r.end > r.start + size_t(win)) regions.push_back(r);
    }
    return regions;
}

// Least-squares line over the Schroeder curve between the fit bounds;
// returns T60 in seconds or 0 when unusable.
double fit_region_t60(const Waveform& w, const Region& r) {
    const double fs = w.sample_rate_hz;
    const size_t n = r.end - r.start;
    if (n < 8) return 0.0;
    // Backward integral of squared signal.
    std::vector<double> curve(n);
    double acc = 0.0;
    for (size_t i = n; i-- > 0;) {
        double s = w.samples[r.start + i];
        acc += s * s;
        curve[i] = acc;
    }
    double e0 = curve[0];
    if (e0 <= 0.0) return 0.0;
    // Usable window: stop before the terminal plunge of the finite integral.
    size_t usable = size_t(double(n) * 0.9);
    if (usable < 8) return 0.0;
    double lo_bound = kFitLoDb;
    double tail_db = db_ratio(curve[usable - 1], e0);
    if (tail_db > kFitLoDb) lo_bound = tail_db;
    if (kFitHiDb - lo_bound < kMinFitSpanDb) return 0.0;

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < usable; ++i) {
        double c = db_ratio(curve[i], e0);
        if (c > kFitHiDb) continue;
        if (c < lo_bound) break;
        double t = double(i) / fs;
        sx += t;
        sy += c;
        sxx += t * t;
        sxy += t * c;
        ++count;
    }
    if (count < 8) return 0.0;
    double denom = double(count) * sxx - sx * sx;
    if (denom <= 0.0) return 0.0;
    double slope = (double(count) * sxy - sx * sy) / denom;  // dB per second
    if (slope >= -1e-9) return 0.0;
    return 60.0 / (-slope);
}

}  // namespace

ReverbEstimate estimate_t60(const Waveform& w) {
    require(!w.samples.empty(), "estimate_t60: empty waveform");
    ReverbEstimate est;
    for (const Region& r : find_decay_regions(w)) {
        double t60 = fit_region_t60(w, r);
        if (t60 > 0.0) est.per_region.push_back(t60);
    }
    est.num_decay_regions = int(est.per_region.size());
    if (est.per_region.empty())
        throw EstimationUnavailable("estimate_t60: no usable decay region");
    std::vector<double> sorted = est.per_region;
    std::sort(sorted.begin(), sorted.end());
    size_t mid = sorted.size() / 2;
    est.t60_seconds = (sorted.size() % 2 == 1)
                          ? sorted[mid]
                          : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return est;
}

// ---------------------------------------------------------------------------
// Harnesses

Waveform codec_roundtrip(const Codec& codec, const Waveform& input, size_t length) {
    PartitionedEmbeddings z = codec.quantize_embeddings(codec.encode(input));
    Waveform out = codec.decode(z);
    out.samples.resize(length);
    return out;
}

Waveform codec_roundtrip_masked(const Codec& codec, const Waveform& input,
                                const std::string& partition, size_t length) {
    PartitionedEmbeddings z = codec.quantize_embeddings(codec.encode(input));
    Waveform out = codec.decode(mask_partition(z, partition));
    out.samples.resize(length);
    return out;
}

namespace {

bool try_estimate(const Waveform& w, double& out) {
    try {
        out = estimate_t60(w).t60_seconds;
        return true;
    } catch (const EstimationUnavailable&) {
        return false;
    }
}

}  // namespace

std::vector<SwapRow> swap_experiment(const Codec& codec,
                                     const std::vector<std::pair<Waveform, Waveform>>& pairs,
                                     const std::string& partition) {
    codec.config->partition_index(partition);
    std::vector<SwapRow> rows;
    for (const auto& [xa, xb] : pairs) {
        SwapRow row;
        PartitionedEmbeddings za = codec.quantize_embeddings(codec.encode(xa));
        PartitionedEmbeddings zb = codec.quantize_embeddings(codec.encode(xb));
        Waveform ra = codec.decode(za);
        Waveform rb = codec.decode(zb);
        auto [sa, sb] = swap_partition(za, zb, partition);
        Waveform wa = codec.decode(sa);
        Waveform wb = codec.decode(sb);
        row.valid = try_estimate(ra, row.t60_recon_a) && try_estimate(rb, row.t60_recon_b) &&
                    try_estimate(wa, row.t60_swapped_a) && try_estimate(wb, row.t60_swapped_b);
        rows.push_back(row);
    }
    return rows;
}

SweepResult weight_sweep(const Codec& codec, const std::vector<Waveform>& inputs,
                         const std::vector<double>& factors, const std::string& partition,
                         uint64_t bootstrap_seed) {
    codec.config->partition_index(partition);
    size_t one_idx = factors.size();
    for (size_t i = 0; i < factors.size(); ++i)
        if (factors[i] == 1.0) one_idx = i;
    if (one_idx == factors.size())
        throw ConfigError("weight_sweep: factor grid must contain 1.0");

    SweepResult res;
    res.factors = factors;
    std::vector<std::vector<double>> normalized;  // [item][factor]
    for (const Waveform& x : inputs) {
        PartitionedEmbeddings z = codec.quantize_embeddings(codec.encode(x));
        std::vector<double> est(factors.size());
        bool ok = true;
        for (size_t f = 0; f < factors.size() && ok; ++f) {
            Waveform out = codec.decode(scale_partition(z, partition, factors[f]));
            ok = try_estimate(out, est[f]);
        }
        if (!ok || est[one_idx] <= 0.0) {
            ++res.items_dropped;
            continue;
        }
        for (size_t f = 0; f < factors.size(); ++f) est[f] /= est[one_idx];
        normalized.push_back(std::move(est));
    }
    res.items_used = int(normalized.size());
    if (normalized.empty())
        throw EstimationUnavailable("weight_sweep: no item produced usable estimates");

    const size_t n = normalized.size();
    res.normalized_mean.assign(factors.size(), 0.0);
    for (const auto& row : normalized)
        for (size_t f = 0; f < factors.size(); ++f) res.normalized_mean[f] += row[f];
    for (double& m : res.normalized_mean) m /= double(n);
    res.normalized_mean[one_idx] = 1.0;  // exact by construction

    const int kBoot = 200;
    Rng rng(bootstrap_seed);
    std::vector<std::vector<double>> boot_means(factors.size());
    for (int b = 0; b < kBoot; ++b) {
        std::vector<double> acc(factors.size(), 0.0);
        for (size_t i = 0; i < n; ++i) {
            const auto& row = normalized[size_t(rng.uniform_int(n))];
            for (size_t f = 0; f < factors.size(); ++f) acc[f] += row[f];
        }
        for (size_t f = 0; f < factors.size(); ++f)
            boot_means[f].push_back(acc[f] / double(n));
    }
    res.ci_lo.resize(factors.size());
    res.ci_hi.resize(factors.size());
    for (size_t f = 0; f < factors.size(); ++f) {
        std::sort(boot_means[f].begin(), boot_means[f].end());
        res.ci_lo[f] = boot_means[f][size_t(0.025 * kBoot)];
        res.ci_hi[f] = boot_means[f][size_t(0.975 * kBoot) - 1];
    }
    return res;
}

DenoiseReport denoise_report(const Codec& codec, const std::vector<EvalItem>& items,
                             const std::string& partition) {
    codec.config->partition_index(partition);
    DenoiseReport rep;
    double sum_improvement = 0.0;
    int better = 0;
    for (const EvalItem& item : items) {
        DenoiseItemReport r;
        size_t len = item.input.samples.size();
        auto as_db = [](const Snr& s) {
            return s.exact ? std::numeric_limits<double>::infinity() : s.db;
        };
        r.snr_input_db = as_db(snr_db(item.clean, item.input));
        Waveform masked = codec_roundtrip_masked(codec, item.input, partition, len);
        Waveform full = codec_roundtrip(codec, item.input, len);
        r.snr_masked_db = as_db(snr_db(item.clean, masked));
        r.snr_full_db = as_db(snr_db(item.clean, full));
        r.improvement_db = r.snr_masked_db - r.snr_input_db;
        sum_improvement += r.improvement_db;
        if (r.snr_masked_db > r.snr_full_db) ++better;
        rep.items.push_back(r);
    }
    if (!rep.items.empty()) {
        rep.mean_improvement_db = sum_improvement / double(rep.items.size());
        rep.fraction_masked_better = double(better) / double(rep.items.size());
    }
    return rep;
}

}  // namespace pcdc
