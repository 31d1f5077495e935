#pragma once

#include <functional>
#include <vector>

#include "pcdc/dsp.hpp"
#include "pcdc/mat.hpp"
#include "pcdc/optim.hpp"

namespace pcdc {

/// Reverse-mode tape. Nodes are created in topological order; backward walks
/// the tape in reverse and finally accumulates leaf gradients into their
/// parameters. One tape per forward pass; not shared across threads.
class Tape {
public:
    using Id = int32_t;

    Id constant(Matrix m);
    /// Leaf bound to a parameter (value copied in, grads accumulated out).
    Id param(Parameter& p, int rows, int cols);
    /// Leaf for a differentiable input (e.g. gradient checks on inputs).
    Id input(Matrix m);

    const Matrix& val(Id id) const { return nodes_[size_t(id)].value; }
    const Matrix& grad_of(Id id) const { return nodes_[size_t(id)].grad; }

    // --- structural ops -----------------------------------------------------
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id scale(Id a, double c);
    /// Elementwise c * a + d.
    Id affine(Id a, double c, double d);
    Id slice_cols(Id a, int col0, int col1);
    Id concat_cols(const std::vector<Id>& parts);
    /// Repeat each row `factor` times: [T x C] -> [T*factor x C].
    Id repeat_rows(Id a, int factor);
    Id crop_rows(Id a, int num_rows);
    /// Mean over non-overlapping row groups: [T x C] -> [T/factor x C]
    /// (tail rows beyond the last full group are dropped).
    Id avg_pool_rows(Id a, int factor);

    // --- elementwise --------------------------------------------------------
    Id elu(Id a);
    Id relu(Id a);
    Id abs(Id a);
    Id square(Id a);

    // --- reductions ---------------------------------------------------------
    Id sum_all(Id a);
    Id mean_all(Id a);

    // --- convolutions -------------------------------------------------------
    /// x: [T x Ci], w: [(K*Ci) x Co] indexed (k*Ci + ci, co), optional bias
    /// [1 x Co] (pass -1 for none), T divisible by stride. Left-padded with
    /// K-1 zeros so output frame t depends only on inputs <= t*stride.
    Id conv1d_causal(Id x, Id w, Id b, int kernel_len, int stride);

    /// Exact adjoint of conv1d_causal. in: [T x Cm], w: [(K*Co) x Cm] indexed
    /// (k*Co + co, cm), output [T*stride x Co] (cropped to stride*T rows).
    Id conv1d_transposed(Id x, Id w, Id b, int kernel_len, int stride);

    // --- quantization bridge ------------------------------------------------
    /// Forward value = `quantized`; backward passes gradients through to `x`
    /// unchanged (codebooks are constants on the tape).
    Id straight_through(Id x, Matrix quantized);

    // --- losses -------------------------------------------------------------
    /// Multi-scale spectral loss of `xhat` (a [T x 1] waveform) against
    /// precomputed target mel spectrograms, one per scale in mel_loss_scales().
    Id mel_spec_loss(Id xhat, const std::vector<MelSpectrogram>& targets,
                     int sample_rate_hz);

    /// Sum of absolute sample differences against a fixed target waveform.
    Id l1_to_target(Id xhat, const std::vector<double>& target);

    /// Reverse sweep from a scalar loss node; accumulates parameter grads.
    void backward(Id loss);

    /// Reverse sweep that leaves gradients on the tape; call
    /// flush_param_grads() afterwards to commit them to the parameters.
    /// Lets minibatch elements run on separate threads with a fixed-order
    /// commit, so multi-threaded training matches single-threaded bit for bit.
    void backward_deferred(Id loss);
    void flush_param_grads();

    size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        Parameter* bound = nullptr;
        std::function<void(Tape&)> back;
    };

    Id push(Matrix value, bool needs_grad);
    std::vector<Node> nodes_;
};

/// Mel spectrograms of a target waveform at every loss scale (cacheable).
std::vector<MelSpectrogram> mel_targets(const Waveform& target);

}  // namespace pcdc
