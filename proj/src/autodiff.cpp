#include "pcdc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>

namespace pcdc {

Tape::Id Tape::push(Matrix value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.grad = Matrix(n.value.rows, n.value.cols);
    nodes_.push_back(std::move(n));
    return Id(nodes_.size() - 1);
}

Tape::Id Tape::constant(Matrix m) { return push(std::move(m), false); }

Tape::Id Tape::input(Matrix m) { return push(std::move(m), true); }

Tape::Id Tape::param(Parameter& p, int rows, int cols) {
    require(size_t(rows) * size_t(cols) == p.value.size(),
            "param: shape does not match parameter size");
    Matrix m(rows, cols);
    m.v = p.value;
    Id id = push(std::move(m), true);
    nodes_[size_t(id)].bound = &p;
    return id;
}

Tape::Id Tape::add(Id a, Id b) {
    const Matrix& A = nodes_[size_t(a)].value;
    const Matrix& B = nodes_[size_t(b)].value;
    require(A.same_shape(B), "add: shape mismatch");
    Matrix out = A;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += B.v[i];
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(b)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, b, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            if (t.nodes_[size_t(a)].needs_grad) {
                Matrix& ga = t.nodes_[size_t(a)].grad;
                for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
            }
            if (t.nodes_[size_t(b)].needs_grad) {
                Matrix& gb = t.nodes_[size_t(b)].grad;
                for (size_t i = 0; i < g.size(); ++i) gb.v[i] += g.v[i];
            }
        };
    return id;
}

Tape::Id Tape::sub(Id a, Id b) {
    const Matrix& A = nodes_[size_t(a)].value;
    const Matrix& B = nodes_[size_t(b)].value;
    require(A.same_shape(B), "sub: shape mismatch");
    Matrix out = A;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= B.v[i];
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(b)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, b, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            if (t.nodes_[size_t(a)].needs_grad) {
                Matrix& ga = t.nodes_[size_t(a)].grad;
                for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
            }
            if (t.nodes_[size_t(b)].needs_grad) {
                Matrix& gb = t.nodes_[size_t(b)].grad;
                for (size_t i = 0; i < g.size(); ++i) gb.v[i] -= g.v[i];
            }
        };
    return id;
}

Tape::Id Tape::scale(Id a, double c) {
    Matrix out = nodes_[size_t(a)].value;
    for (double& v : out.v) v *= c;
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, c, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (size_t i = 0; i < g.size(); ++i) ga.v[i] += c * g.v[i];
        };
    return id;
}

Tape::Id Tape::affine(Id a, double c, double d) {
    Matrix out = nodes_[size_t(a)].value;
    for (double& v : out.v) v = c * v + d;
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, c, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (size_t i = 0; i < g.size(); ++i) ga.v[i] += c * g.v[i];
        };
    return id;
}

Tape::Id Tape::slice_cols(Id a, int col0, int col1) {
    const Matrix& A = nodes_[size_t(a)].value;
    require(0 <= col0 && col0 < col1 && col1 <= A.cols, "slice_cols: bad range");
    Matrix out(A.rows, col1 - col0);
    for (int r = 0; r < A.rows; ++r)
        for (int c = col0; c < col1; ++c) out.at(r, c - col0) = A.at(r, c);
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, col0, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < g.cols; ++c) ga.at(r, col0 + c) += g.at(r, c);
        };
    return id;
}

Tape::Id Tape::concat_cols(const std::vector<Id>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    int rows = nodes_[size_t(parts[0])].value.rows;
    int cols = 0;
    bool ng = false;
    for (Id p : parts) {
        require(nodes_[size_t(p)].value.rows == rows, "concat_cols: row mismatch");
        cols += nodes_[size_t(p)].value.cols;
        ng = ng || nodes_[size_t(p)].needs_grad;
    }
    Matrix out(rows, cols);
    int off = 0;
    for (Id p : parts) {
        const Matrix& A = nodes_[size_t(p)].value;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < A.cols; ++c) out.at(r, off + c) = A.at(r, c);
        off += A.cols;
    }
    Id id = push(std::move(out), ng);
    if (ng) {
        std::vector<Id> ps = parts;
        nodes_[size_t(id)].back = [ps, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            int off = 0;
            for (Id p : ps) {
                Matrix& gp = t.nodes_[size_t(p)].grad;
                int pc = t.nodes_[size_t(p)].value.cols;
                if (t.nodes_[size_t(p)].needs_grad)
                    for (int r = 0; r < g.rows; ++r)
                        for (int c = 0; c < pc; ++c) gp.at(r, c) += g.at(r, off + c);
                off += pc;
            }
        };
    }
    return id;
}

Tape::Id Tape::repeat_rows(Id a, int factor) {
    require(factor >= 1, "repeat_rows: factor must be >= 1");
    const Matrix& A = nodes_[size_t(a)].value;
    Matrix out(A.rows * factor, A.cols);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < A.cols; ++c) out.at(r, c) = A.at(r / factor, c);
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, factor, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < g.cols; ++c) ga.at(r / factor, c) += g.at(r, c);
        };
    return id;
}

Tape::Id Tape::crop_rows(Id a, int num_rows) {
    const Matrix& A = nodes_[size_t(a)].value;
    require(num_rows >= 0 && num_rows <= A.rows, "crop_rows: bad row count");
    Matrix out(num_rows, A.cols);
    std::copy(A.v.begin(), A.v.begin() + size_t(num_rows) * A.cols, out.v.begin());
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
        };
    return id;
}

Tape::Id Tape::avg_pool_rows(Id a, int factor) {
    require(factor >= 1, "avg_pool_rows: factor must be >= 1");
    const Matrix& A = nodes_[size_t(a)].value;
    int out_rows = A.rows / factor;
    Matrix out(out_rows, A.cols);
    double inv = 1.0 / double(factor);
    for (int r = 0; r < out_rows; ++r)
        for (int j = 0; j < factor; ++j)
            for (int c = 0; c < A.cols; ++c) out.at(r, c) += A.at(r * factor + j, c) * inv;
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, factor, inv, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (int r = 0; r < g.rows; ++r)
                for (int j = 0; j < factor; ++j)
                    for (int c = 0; c < g.cols; ++c)
                        ga.at(r * factor + j, c) += g.at(r, c) * inv;
        };
    return id;
}

Tape::Id Tape::elu(Id a) {
    Matrix out = nodes_[size_t(a)].value;
    for (double& v : out.v) v = v > 0.0 ? v : std::expm1(v);
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            const Matrix& y = t.nodes_[size_t(id)].value;
            const Matrix& x = t.nodes_[size_t(a)].value;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (size_t i = 0; i < g.size(); ++i)
                ga.v[i] += g.v[i] * (x.v[i] > 0.0 ? 1.0 : y.v[i] + 1.0);
        };
    return id;
}

Tape::Id Tape::relu(Id a) {
    Matrix out = nodes_[size_t(a)].value;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            const Matrix& x = t.nodes_[size_t(a)].value;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (size_t i = 0; i < g.size(); ++i)
                if (x.v[i] > 0.0) ga.v[i] += g.v[i];
        };
    return id;
}

Tape::Id Tape::abs(Id a) {
    Matrix out = nodes_[size_t(a)].value;
    for (double& v : out.v) v = std::abs(v);
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            const Matrix& x = t.nodes_[size_t(a)].value;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (size_t i = 0; i < g.size(); ++i) {
                double s = x.v[i] > 0.0 ? 1.0 : (x.v[i] < 0.0 ? -1.0 : 0.0);
                ga.v[i] += g.v[i] * s;
            }
        };
    return id;
}

Tape::Id Tape::square(Id a) {
    Matrix out = nodes_[size_t(a)].value;
    for (double& v : out.v) v = v * v;
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            const Matrix& x = t.nodes_[size_t(a)].value;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (size_t i = 0; i < g.size(); ++i) ga.v[i] += 2.0 * x.v[i] * g.v[i];
        };
    return id;
}

Tape::Id Tape::sum_all(Id a) {
    const Matrix& A = nodes_[size_t(a)].value;
    Matrix out(1, 1);
    for (double v : A.v) out.v[0] += v;
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, id](Tape& t) {
            double g = t.nodes_[size_t(id)].grad.v[0];
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (double& v : ga.v) v += g;
        };
    return id;
}

Tape::Id Tape::mean_all(Id a) {
    const Matrix& A = nodes_[size_t(a)].value;
    require(A.size() > 0, "mean_all: empty tensor");
    double inv = 1.0 / double(A.size());
    Matrix out(1, 1);
    for (double v : A.v) out.v[0] += v * inv;
    bool ng = nodes_[size_t(a)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [a, inv, id](Tape& t) {
            double g = t.nodes_[size_t(id)].grad.v[0] * inv;
            Matrix& ga = t.nodes_[size_t(a)].grad;
            for (double& v : ga.v) v += g;
        };
    return id;
}

Tape::Id Tape::conv1d_causal(Id x, Id w, Id b, int kernel_len, int stride) {
    const Matrix& X = nodes_[size_t(x)].value;
    const Matrix& W = nodes_[size_t(w)].value;
    require(stride >= 1, "conv1d_causal: stride must be >= 1");
    require(kernel_len >= 1 && W.rows % kernel_len == 0,
            "conv1d_causal: kernel rows not divisible by K");
    const int K = kernel_len;
    const int Ci = W.rows / K;
    const int Co = W.cols;
    require(X.cols == Ci, "conv1d_causal: input channel mismatch");
    const int T = X.rows;
    const int Tout = (T + stride - 1) / stride;

    Matrix out(Tout, Co);
    const bool has_bias = b >= 0;
    if (has_bias) {
        const Matrix& B = nodes_[size_t(b)].value;
        require(B.rows == 1 && B.cols == Co, "conv1d_causal: bias shape mismatch");
        for (int t = 0; t < Tout; ++t)
            for (int co = 0; co < Co; ++co) out.at(t, co) = B.at(0, co);
    }
    for (int t = 0; t < Tout; ++t) {
        double* yrow = out.row(t);
        const int base = t * stride - (K - 1);
        for (int k = 0; k < K; ++k) {
            int xi = base + k;
            if (xi < 0) continue;
            const double* xrow = X.row(xi);
            for (int ci = 0; ci < Ci; ++ci) {
                double xv = xrow[ci];
                const double* wrow = W.row(k * Ci + ci);
                for (int co = 0; co < Co; ++co) yrow[co] += xv * wrow[co];
            }
        }
    }

    bool ng = nodes_[size_t(x)].needs_grad || nodes_[size_t(w)].needs_grad ||
              (has_bias && nodes_[size_t(b)].needs_grad);
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [x, w, b, K, stride, Ci, Co, T, Tout, has_bias,
                                   id](Tape& t) {
            const Matrix& G = t.nodes_[size_t(id)].grad;
            const Matrix& X = t.nodes_[size_t(x)].value;
            const Matrix& W = t.nodes_[size_t(w)].value;
            const bool gx = t.nodes_[size_t(x)].needs_grad;
            const bool gw = t.nodes_[size_t(w)].needs_grad;
            for (int tt = 0; tt < Tout; ++tt) {
                const double* grow = G.row(tt);
                const int base = tt * stride - (K - 1);
                for (int k = 0; k < K; ++k) {
                    int xi = base + k;
                    if (xi < 0) continue;
                    if (gx) {
                        double* gxrow = t.nodes_[size_t(x)].grad.row(xi);
                        for (int ci = 0; ci < Ci; ++ci) {
                            const double* wrow = W.row(k * Ci + ci);
                            double acc = 0.0;
                            for (int co = 0; co < Co; ++co) acc += wrow[co] * grow[co];
                            gxrow[ci] += acc;
                        }
                    }
                    if (gw) {
                        const double* xrow = X.row(xi);
                        for (int ci = 0; ci < Ci; ++ci) {
                            double xv = xrow[ci];
                            double* gwrow = t.nodes_[size_t(w)].grad.row(k * Ci + ci);
                            for (int co = 0; co < Co; ++co) gwrow[co] += xv * grow[co];
                        }
                    }
                }
            }
            if (has_bias && t.nodes_[size_t(b)].needs_grad) {
                Matrix& gb = t.nodes_[size_t(b)].grad;
                for (int tt = 0; tt < Tout; ++tt) {
                    const double* grow = G.row(tt);
                    for (int co = 0; co < Co; ++co) gb.at(0, co) += grow[co];
                }
            }
            (void)T;
        };
    return id;
}

Tape::Id Tape::conv1d_transposed(Id x, Id w, Id b, int kernel_len, int stride) {
    const Matrix& X = nodes_[size_t(x)].value;
    const Matrix& W = nodes_[size_t(w)].value;
    require(stride >= 1, "conv1d_transposed: stride must be >= 1");
    require(kernel_len >= 1 && W.rows % kernel_len == 0,
            "conv1d_transposed: kernel rows not divisible by K");
    const int K = kernel_len;
    const int Co = W.rows / K;
    const int Cm = W.cols;
    require(X.cols == Cm, "conv1d_transposed: input channel mismatch");
    const int Tin = X.rows;
    const int Tout = Tin * stride;

    Matrix out(Tout, Co);
    const bool has_bias = b >= 0;
    if (has_bias) {
        const Matrix& B = nodes_[size_t(b)].value;
        require(B.rows == 1 && B.cols == Co, "conv1d_transposed: bias shape mismatch");
        for (int i = 0; i < Tout; ++i)
            for (int co = 0; co < Co; ++co) out.at(i, co) = B.at(0, co);
    }
    for (int i = 0; i < Tout; ++i) {
        double* orow = out.row(i);
        int t_lo = (i + stride - 1) / stride;
        int t_hi = std::min(Tin - 1, (i + K - 1) / stride);
        for (int t = t_lo; t <= t_hi; ++t) {
            int k = i - t * stride + (K - 1);
            const double* xrow = X.row(t);
            for (int co = 0; co < Co; ++co) {
                const double* wrow = W.row(k * Co + co);
                double acc = 0.0;
                for (int cm = 0; cm < Cm; ++cm) acc += wrow[cm] * xrow[cm];
                orow[co] += acc;
            }
        }
    }

    bool ng = nodes_[size_t(x)].needs_grad || nodes_[size_t(w)].needs_grad ||
              (has_bias && nodes_[size_t(b)].needs_grad);
    Id id = push(std::move(out), ng);
    if (ng)
        nodes_[size_t(id)].back = [x, w, b, K, stride, Cm, Co, Tin, Tout, has_bias,
                                   id](Tape& t) {
            const Matrix& G = t.nodes_[size_t(id)].grad;
            const Matrix& X = t.nodes_[size_t(x)].value;
            const Matrix& W = t.nodes_[size_t(w)].value;
            const bool gx = t.nodes_[size_t(x)].needs_grad;
            const bool gw = t.nodes_[size_t(w)].needs_grad;
            for (int tt = 0; tt < Tin; ++tt) {
                for (int k = 0; k < K; ++k) {
                    int i = tt * stride + k - (K - 1);
                    if (i < 0) continue;
                    const double* grow = G.row(i);
                    if (gx) {
                        double* gxrow = t.nodes_[size_t(x)].grad.row(tt);
                        for (int cm = 0; cm < Cm; ++cm) {
                            double acc = 0.0;
                            for (int co = 0; co < Co; ++co)
                                acc += W.at(k * Co + co, cm) * grow[co];
                            gxrow[cm] += acc;
                        }
                    }
                    if (gw) {
                        const double* xrow = X.row(tt);
                        for (int co = 0; co < Co; ++co) {
                            double* gwrow = t.nodes_[size_t(w)].grad.row(k * Co + co);
                            double gv = grow[co];
                            for (int cm = 0; cm < Cm; ++cm) gwrow[cm] += gv * xrow[cm];
                        }
                    }
                }
            }
            if (has_bias && t.nodes_[size_t(b)].needs_grad) {
                Matrix& gb = t.nodes_[size_t(b)].grad;
                for (int i = 0; i < Tout; ++i) {
                    const double* grow = G.row(i);
                    for (int co = 0; co < Co; ++co) gb.at(0, co) += grow[co];
                }
            }
        };
    return id;
}

Tape::Id Tape::straight_through(Id x, Matrix quantized) {
    const Matrix& X = nodes_[size_t(x)].value;
    require(X.same_shape(quantized), "straight_through: shape mismatch");
    bool ng = nodes_[size_t(x)].needs_grad;
    Id id = push(std::move(quantized), ng);
    if (ng)
        nodes_[size_t(id)].back = [x, id](Tape& t) {
            const Matrix& g = t.nodes_[size_t(id)].grad;
            Matrix& gx = t.nodes_[size_t(x)].grad;
            for (size_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i];
        };
    return id;
}

std::vector<MelSpectrogram> mel_targets(const Waveform& target) {
    std::vector<MelSpectrogram> out;
    out.reserve(mel_loss_scales().size());
    for (int s : mel_loss_scales()) out.push_back(mel_spectrogram(target, s));
    return out;
}

Tape::Id Tape::mel_spec_loss(Id xhat, const std::vector<MelSpectrogram>& targets,
                             int sample_rate_hz) {
    const Matrix& X = nodes_[size_t(xhat)].value;
    require(X.cols == 1, "mel_spec_loss: expected a [T x 1] waveform");
    const auto& scales = mel_loss_scales();
    require(targets.size() == scales.size(), "mel_spec_loss: need one target per scale");

    Waveform wav;
    wav.sample_rate_hz = sample_rate_hz;
    wav.samples = X.v;

    struct ScaleCache {
        MelSpectrogram mel;
        std::vector<double> frame_l2;  // per-frame L2 of clamped-log differences
    };
    auto caches = std::make_shared<std::vector<ScaleCache>>();
    caches->resize(scales.size());

    double total = 0.0;
    for (size_t si = 0; si < scales.size(); ++si) {
        int s = scales[si];
        const MelSpectrogram& tgt = targets[si];
        ScaleCache& cache = (*caches)[si];
        cache.mel = mel_spectrogram(wav, s);
        const MelSpectrogram& mine = cache.mel;
        require(mine.num_frames == tgt.num_frames, "mel_spec_loss: frame count mismatch");
        cache.frame_l2.assign(size_t(mine.num_frames), 0.0);
        double l1 = 0.0, l2_sum = 0.0;
        for (int t = 0; t < mine.num_frames; ++t) {
            double sq = 0.0;
            for (int m = 0; m < kMelBins; ++m) {
                double a = mine.at(t, m), bb = tgt.at(t, m);
                l1 += std::abs(a - bb);
                double d = std::log(std::max(a, kLogClampEps)) -
                           std::log(std::max(bb, kLogClampEps));
                sq += d * d;
            }
            cache.frame_l2[size_t(t)] = std::sqrt(sq);
            l2_sum += cache.frame_l2[size_t(t)];
        }
        total += l1 + std::sqrt(double(s) / 2.0) * l2_sum;
    }

    Matrix out(1, 1);
    out.v[0] = total;
    bool ng = nodes_[size_t(xhat)].needs_grad;
    Id id = push(std::move(out), ng);
    if (!ng) return id;

    // Keep our own copy of the targets; callers may mutate theirs.
    auto tgts = std::make_shared<std::vector<MelSpectrogram>>(targets);
    nodes_[size_t(id)].back = [xhat, id, caches, tgts, sample_rate_hz](Tape& tp) {
        const double g0 = tp.nodes_[size_t(id)].grad.v[0];
        if (g0 == 0.0) return;
        const Matrix& X = tp.nodes_[size_t(xhat)].value;
        Matrix& GX = tp.nodes_[size_t(xhat)].grad;
        const auto& scales = mel_loss_scales();
        for (size_t si = 0; si < scales.size(); ++si) {
            const int s = scales[si];
            const MelAnalyzer& an = MelAnalyzer::get(s, sample_rate_hz);
            const ScaleCache& cache = (*caches)[si];
            const MelSpectrogram& mine = cache.mel;
            const MelSpectrogram& tgt = (*tgts)[si];
            const double w_log = std::sqrt(double(s) / 2.0);
            const int hop = s / 4;
            const int pad = s - hop;
            const long n = long(X.rows);
            std::vector<double> frame(static_cast<size_t>(s));
            std::vector<double> g_mel(kMelBins);
            std::vector<double> g_pow(static_cast<size_t>(s / 2 + 1));
            std::vector<std::complex<double>> buf(static_cast<size_t>(s));
            std::vector<std::complex<double>> c(static_cast<size_t>(s));
            for (int t = 0; t < mine.num_frames; ++t) {
                double l2 = cache.frame_l2[size_t(t)];
                for (int m = 0; m < kMelBins; ++m) {
                    double a = mine.at(t, m), b = tgt.at(t, m);
                    double d = a - b;
                    double gm = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
                    if (l2 > 0.0 && a > kLogClampEps) {
                        double dl = std::log(a) - std::log(std::max(b, kLogClampEps));
                        gm += w_log * dl / (l2 * a);
                    }
                    g_mel[size_t(m)] = gm * g0;
                }
                std::fill(g_pow.begin(), g_pow.end(), 0.0);
                for (int m = 0; m < kMelBins; ++m) {
                    const auto& f = an.bank.filters[m];
                    double gm = g_mel[size_t(m)];
                    if (gm == 0.0) continue;
                    for (size_t j = 0; j < f.weights.size(); ++j)
                        g_pow[size_t(f.first_bin) + j] += f.weights[j] * gm;
                }
                // Recompute the frame spectrum, then map the power-spectrum
                // gradient back to samples via the adjoint transform.
                long start = long(t) * hop - pad;
                for (int i = 0; i < s; ++i) {
                    long idx = start + i;
                    double v = (idx >= 0 && idx < n) ? X.v[size_t(idx)] : 0.0;
                    frame[size_t(i)] = v * an.hann[size_t(i)];
                    buf[size_t(i)] = frame[size_t(i)];
                }
                fft_pow2(buf, false);
                c[0] = 2.0 * g_pow[0] * buf[0];
                c[size_t(s / 2)] = 2.0 * g_pow[size_t(s / 2)] * buf[size_t(s / 2)];
                for (int k = 1; k < s / 2; ++k) {
                    c[size_t(k)] = g_pow[size_t(k)] * buf[size_t(k)];
                    c[size_t(s - k)] = std::conj(c[size_t(k)]);
                }
                fft_pow2(c, true);
                for (int i = 0; i < s; ++i) {
                    long idx = start + i;
                    if (idx < 0 || idx >= n) continue;
                    GX.v[size_t(idx)] += c[size_t(i)].real() * an.hann[size_t(i)];
                }
            }
        }
    };
    return id;
}

Tape::Id Tape::l1_to_target(Id xhat, const std::vector<double>& target) {
    const Matrix& X = nodes_[size_t(xhat)].value;
    require(X.size() == target.size(), "l1_to_target: length mismatch");
    Matrix out(1, 1);
    for (size_t i = 0; i < target.size(); ++i) out.v[0] += std::abs(X.v[i] - target[i]);
    bool ng = nodes_[size_t(xhat)].needs_grad;
    Id id = push(std::move(out), ng);
    if (ng) {
        auto tgt = std::make_shared<std::vector<double>>(target);
        nodes_[size_t(id)].back = [xhat, id, tgt](Tape& t) {
            double g = t.nodes_[size_t(id)].grad.v[0];
            const Matrix& X = t.nodes_[size_t(xhat)].value;
            Matrix& gx = t.nodes_[size_t(xhat)].grad;
            for (size_t i = 0; i < X.size(); ++i) {
                double d = X.v[i] - (*tgt)[i];
                gx.v[i] += g * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
            }
        };
    }
    return id;
}

void Tape::backward_deferred(Id loss) {
    Node& ln = nodes_[size_t(loss)];
    require(ln.value.rows == 1 && ln.value.cols == 1, "backward: loss must be scalar");
    require(ln.needs_grad, "backward: loss does not depend on any parameter");
    ln.grad.v[0] = 1.0;
    for (size_t i = nodes_.size(); i-- > 0;) {
        Node& nd = nodes_[i];
        if (nd.needs_grad && nd.back) nd.back(*this);
    }
}

void Tape::flush_param_grads() {
    for (Node& nd : nodes_) {
        if (nd.bound) {
            Parameter& p = *nd.bound;
            for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += nd.grad.v[i];
        }
    }
}

void Tape::backward(Id loss) {
    backward_deferred(loss);
    flush_param_grads();
}

}  // namespace pcdc
