#include "pcdc/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace pcdc {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Waveform peak_normalize(const Waveform& w, double peak) {
    double p = peak_abs(w);
    Waveform out = w;
    if (p > 0.0) {
        double g = peak / p;
        for (double& s : out.samples) s *= g;
    }
    return out;
}

double peak_abs(const Waveform& w) {
    double p = 0.0;
    for (double s : w.samples) p = std::max(p, std::abs(s));
    return p;
}

double energy(const Waveform& w) {
    double e = 0.0;
    for (double s : w.samples) e += s * s;
    return e;
}

namespace {

// Per-size plan: bit-reversal permutation and per-stage twiddle tables.
struct FftPlan {
    size_t n = 0;
    std::vector<uint32_t> bitrev;
    std::vector<double> tw_re;  // concatenated stage tables, forward sign
    std::vector<double> tw_im;
    std::vector<size_t> stage_offset;

    explicit FftPlan(size_t size) : n(size) {
        bitrev.resize(n);
        for (size_t i = 1, j = 0; i < n; ++i) {
            size_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            bitrev[i] = uint32_t(j);
        }
        for (size_t len = 2; len <= n; len <<= 1) {
            stage_offset.push_back(tw_re.size());
            for (size_t j = 0; j < len / 2; ++j) {
                double ang = -2.0 * kPi * double(j) / double(len);
                tw_re.push_back(std::cos(ang));
                tw_im.push_back(std::sin(ang));
            }
        }
    }
};

const FftPlan& fft_plan(size_t n) {
    static std::mutex mu;
    static std::map<size_t, std::unique_ptr<FftPlan>> plans;
    std::lock_guard<std::mutex> lock(mu);
    auto it = plans.find(n);
    if (it == plans.end())
        it = plans.emplace(n, std::make_unique<FftPlan>(n)).first;
    return *it->second;
}

}  // namespace

void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    require((n & (n - 1)) == 0 && n > 0, "fft size must be a power of two");
    const FftPlan& plan = fft_plan(n);
    for (size_t i = 1; i < n; ++i) {
        size_t j = plan.bitrev[i];
        if (i < j) std::swap(a[i], a[j]);
    }
    double* data = reinterpret_cast<double*>(a.data());  // interleaved re,im
    size_t stage = 0;
    const double sign = inverse ? -1.0 : 1.0;
    for (size_t len = 2; len <= n; len <<= 1, ++stage) {
        const size_t half = len / 2;
        const double* wre = plan.tw_re.data() + plan.stage_offset[stage];
        const double* wim = plan.tw_im.data() + plan.stage_offset[stage];
        for (size_t i = 0; i < n; i += len) {
            double* lo = data + 2 * i;
            double* hi = data + 2 * (i + half);
            for (size_t j = 0; j < half; ++j) {
                double wr = wre[j];
                double wi = sign * wim[j];
                double vr = hi[2 * j] * wr - hi[2 * j + 1] * wi;
                double vi = hi[2 * j] * wi + hi[2 * j + 1] * wr;
                double ur = lo[2 * j];
                double ui = lo[2 * j + 1];
                lo[2 * j] = ur + vr;
                lo[2 * j + 1] = ui + vi;
                hi[2 * j] = ur - vr;
                hi[2 * j + 1] = ui - vi;
            }
        }
    }
}

bool valid_mel_window(int s) {
    return s == 64 || s == 128 || s == 256 || s == 512 || s == 1024 || s == 2048;
}

int mel_num_frames(size_t num_samples, int window_len) {
    int hop = window_len / 4;
    return int(num_samples / size_t(hop));
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

MelFilterbank MelFilterbank::make(int window_len, int sample_rate_hz) {
    MelFilterbank fb;
    fb.num_fft_bins = window_len / 2 + 1;
    double nyquist = sample_rate_hz / 2.0;
    double mel_max = hz_to_mel(nyquist);
    // 66 edge frequencies equally spaced on the mel axis
    std::vector<double> edges(kMelBins + 2);
    for (int i = 0; i < kMelBins + 2; ++i)
        edges[i] = mel_to_hz(mel_max * double(i) / double(kMelBins + 1));

    double bin_hz = double(sample_rate_hz) / double(window_len);
    fb.filters.resize(kMelBins);
    for (int m = 0; m < kMelBins; ++m) {
        double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        int k_lo = int(std::ceil(lo / bin_hz));
        int k_hi = int(std::floor(hi / bin_hz));
        k_lo = std::max(k_lo, 0);
        k_hi = std::min(k_hi, fb.num_fft_bins - 1);
        Filter f;
        f.first_bin = k_lo;
        for (int k = k_lo; k <= k_hi; ++k) {
            double fk = k * bin_hz;
            double w = 0.0;
            if (fk >= lo && fk <= mid && mid > lo)
                w = (fk - lo) / (mid - lo);
            else if (fk > mid && fk <= hi && hi > mid)
                w = (hi - fk) / (hi - mid);
            f.weights.push_back(std::max(0.0, w));
        }
        fb.filters[m] = std::move(f);
    }
    return fb;
}

const MelAnalyzer& MelAnalyzer::get(int window_len, int sample_rate_hz) {
    if (!valid_mel_window(window_len))
        throw ConfigError("mel window length must be one of {64,128,256,512,1024,2048}");
    static std::mutex mu;
    static std::map<std::pair<int, int>, MelAnalyzer> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(window_len, sample_rate_hz);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    MelAnalyzer a;
    a.window_len = window_len;
    a.hop = window_len / 4;
    a.hann.resize(window_len);
    for (int i = 0; i < window_len; ++i)
        a.hann[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * double(i) / double(window_len));
    a.bank = MelFilterbank::make(window_len, sample_rate_hz);
    return cache.emplace(key, std::move(a)).first->second;
}

void MelAnalyzer::power_spectrum(const double* frame, std::vector<double>& power) const {
    const int s = window_len;
    std::vector<std::complex<double>> buf(s);
    for (int i = 0; i < s; ++i) buf[i] = std::complex<double>(frame[i], 0.0);
    fft_pow2(buf, false);
    power.resize(size_t(s / 2 + 1));
    for (int k = 0; k <= s / 2; ++k) power[k] = std::norm(buf[k]);
}

MelSpectrogram mel_spectrogram(const Waveform& w, int window_len) {
    if (!valid_mel_window(window_len))
        throw ConfigError("mel window length must be one of {64,128,256,512,1024,2048}");
    require(!w.samples.empty(), "mel_spectrogram: empty waveform");

    const MelAnalyzer& an = MelAnalyzer::get(window_len, w.sample_rate_hz);
    const int s = window_len;
    const int hop = an.hop;
    const int pad = s - hop;

    MelSpectrogram out;
    out.window_len = s;
    out.hop = hop;
    out.num_frames = mel_num_frames(w.samples.size(), s);
    out.frames.assign(size_t(out.num_frames) * kMelBins, 0.0);

    std::vector<double> frame(s);
    std::vector<double> power;
    const auto& x = w.samples;
    const long n = long(x.size());
    for (int t = 0; t < out.num_frames; ++t) {
        // frame t covers original samples [t*hop - pad, t*hop - pad + s)
        long start = long(t) * hop - pad;
        for (int i = 0; i < s; ++i) {
            long idx = start + i;
            double v = (idx >= 0 && idx < n) ? x[size_t(idx)] : 0.0;
            frame[i] = v * an.hann[i];
        }
        an.power_spectrum(frame.data(), power);
        double* row = &out.frames[size_t(t) * kMelBins];
        for (int m = 0; m < kMelBins; ++m) {
            const auto& f = an.bank.filters[m];
            double acc = 0.0;
            for (size_t j = 0; j < f.weights.size(); ++j)
                acc += f.weights[j] * power[size_t(f.first_bin) + j];
            row[m] = acc;
        }
    }
    return out;
}

double loss_rec_scale(const Waveform& x, const Waveform& x_prime, int window_len) {
    require(x.samples.size() == x_prime.samples.size(),
            "loss_rec: waveform lengths differ");
    require(x.sample_rate_hz == x_prime.sample_rate_hz,
            "loss_rec: sample rates differ");
    MelSpectrogram a = mel_spectrogram(x, window_len);
    MelSpectrogram b = mel_spectrogram(x_prime, window_len);
    double l1 = 0.0;
    double l2_sum = 0.0;
    for (int t = 0; t < a.num_frames; ++t) {
        double frame_sq = 0.0;
        for (int m = 0; m < kMelBins; ++m) {
            double sa = a.at(t, m), sb = b.at(t, m);
            l1 += std::abs(sa - sb);
            double d = std::log(std::max(sa, kLogClampEps)) -
                       std::log(std::max(sb, kLogClampEps));
            frame_sq += d * d;
        }
        l2_sum += std::sqrt(frame_sq);
    }
    return l1 + std::sqrt(double(window_len) / 2.0) * l2_sum;
}

double loss_rec(const Waveform& x, const Waveform& x_prime) {
    double total = 0.0;
    for (int s : mel_loss_scales()) total += loss_rec_scale(x, x_prime, s);
    return total;
}

Snr snr_db(const Waveform& reference, const Waveform& test) {
    require(reference.samples.size() == test.samples.size(),
            "snr_db: waveform lengths differ");
    double ref_e = energy(reference);
    if (ref_e <= 0.0) throw EstimationUnavailable("snr_db: zero-energy reference");
    double err_e = 0.0;
    bool identical = true;
    for (size_t i = 0; i < reference.samples.size(); ++i) {
        double d = reference.samples[i] - test.samples[i];
        if (d != 0.0) identical = false;
        err_e += d * d;
    }
    Snr out;
    if (identical) {
        out.exact = true;
        return out;
    }
    out.db = 10.0 * std::log10(ref_e / err_e);
    return out;
}

}  // namespace pcdc
