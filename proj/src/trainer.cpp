#include "pcdc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "json.hpp"

namespace pcdc {

using nlohmann::json;

std::string TrainConfig::to_json_string() const {
    json j;
    j["preset"] = preset;
    j["task"] = task_name(task);
    j["seed"] = seed;
    j["steps_phase1"] = steps_phase1;
    j["steps_phase2"] = steps_phase2;
    j["batch_pairs"] = batch_pairs;
    j["crop_seconds"] = crop_seconds;
    j["corpus_clips"] = corpus_clips;
    j["pairs_count"] = pairs_count;
    j["lr"] = adam.lr;
    j["beta1"] = adam.beta1;
    j["beta2"] = adam.beta2;
    j["adam_eps"] = adam.eps;
    j["lambda_wav"] = lambda_wav;
    j["lambda_adv"] = lambda_adv;
    j["lambda_feat"] = lambda_feat;
    j["threads"] = threads;
    j["log_every"] = log_every;
    j["metrics_path"] = metrics_path;
    j["speech_partition"] = speech_partition;
    j["env_partition"] = resolved_env_partition();
    return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config: invalid JSON: ") + e.what());
    }
    TrainConfig c;
    try {
        c.task = task_from_name(j.value("task", std::string("noise")));
        c = defaults_for(c.task);
        c.task = task_from_name(j.value("task", std::string("noise")));
        c.preset = j.value("preset", c.preset);
        c.seed = j.value("seed", c.seed);
        c.steps_phase1 = j.value("steps_phase1", c.steps_phase1);
        c.steps_phase2 = j.value("steps_phase2", c.steps_phase2);
        c.batch_pairs = j.value("batch_pairs", c.batch_pairs);
        c.crop_seconds = j.value("crop_seconds", c.crop_seconds);
        c.corpus_clips = j.value("corpus_clips", c.corpus_clips);
        c.pairs_count = j.value("pairs_count", c.pairs_count);
        c.adam.lr = j.value("lr", c.adam.lr);
        c.adam.beta1 = j.value("beta1", c.adam.beta1);
        c.adam.beta2 = j.value("beta2", c.adam.beta2);
        c.adam.eps = j.value("adam_eps", c.adam.eps);
        c.lambda_wav = j.value("lambda_wav", c.lambda_wav);
        c.lambda_adv = j.value("lambda_adv", c.lambda_adv);
        c.lambda_feat = j.value("lambda_feat", c.lambda_feat);
        c.threads = j.value("threads", c.threads);
        c.log_every = j.value("log_every", c.log_every);
        c.metrics_path = j.value("metrics_path", c.metrics_path);
        c.speech_partition = j.value("speech_partition", c.speech_partition);
        c.env_partition = j.value("env_partition", c.env_partition);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config: bad field: ") + e.what());
    }
    if (c.batch_pairs < 1) throw ConfigError("train config: batch_pairs must be >= 1");
    if (c.steps_phase1 < 0 || c.steps_phase2 < 0)
        throw ConfigError("train config: step counts must be >= 0");
    if (c.threads < 1) throw ConfigError("train config: threads must be >= 1");
    return c;
}

TrainConfig TrainConfig::defaults_for(Task task) {
    TrainConfig c;
    c.task = task;
    c.preset = task == Task::Noise ? "noise-toy" : "reverb-toy";
    c.lambda_wav = 20.0;
    return c;
}

// ---------------------------------------------------------------------------
// Discriminators

namespace {

std::string disc_prefix(int scale, int layer) {
    return "disc.s" + std::to_string(scale) + ".l" + std::to_string(layer);
}

}  // namespace

ParameterStore make_discriminator(const DiscriminatorConfig& cfg, uint64_t seed) {
    ParameterStore ps;
    for (int scale : cfg.scales) {
        int ci = 1;
        for (size_t l = 0; l < cfg.kernel.size(); ++l) {
            int co = cfg.width[l];
            int k = cfg.kernel[l];
            Parameter& w = ps.create(disc_prefix(scale, int(l)) + ".w", {k, ci, co});
            Rng rng(mix_seed(seed, fnv1a(w.name)));
            double stddev = std::sqrt(1.0 / double(k * ci));
            for (double& v : w.value) v = rng.normal(0.0, stddev);
            ps.create(disc_prefix(scale, int(l)) + ".b", {1, 1, co});
            ci = co;
        }
    }
    return ps;
}

namespace {

struct DiscOut {
    Tape::Id final_out = -1;
    std::vector<Tape::Id> features;
};

DiscOut disc_forward(Tape& tape, ParameterStore& ps, const DiscriminatorConfig& cfg,
                     Tape::Id wav, int scale) {
    Tape::Id h = scale > 1 ? tape.avg_pool_rows(wav, scale) : wav;
    DiscOut out;
    for (size_t l = 0; l < cfg.kernel.size(); ++l) {
        Parameter& w = ps.get(disc_prefix(scale, int(l)) + ".w");
        Parameter& b = ps.get(disc_prefix(scale, int(l)) + ".b");
        Tape::Id wid = tape.param(w, w.shape[0] * w.shape[1], w.shape[2]);
        Tape::Id bid = tape.param(b, 1, b.shape[2]);
        h = tape.conv1d_causal(h, wid, bid, cfg.kernel[l], cfg.stride[l]);
        out.features.push_back(h);
        if (l + 1 < cfg.kernel.size()) h = tape.elu(h);
    }
    out.final_out = h;
    out.features.pop_back();  // the final map is the score, not a feature
    return out;
}

Matrix wave_matrix(const Waveform& w) {
    Matrix m(int(w.samples.size()), 1);
    m.v = w.samples;
    return m;
}

struct AdvNodes {
    Tape::Id d_loss = -1;
    Tape::Id g_adv = -1;
    Tape::Id feature = -1;
};

// Hinge losses over all scales; feature loss averages the per-layer mean
// absolute differences.
AdvNodes adversarial_nodes(Tape& tape, ParameterStore& disc,
                           const DiscriminatorConfig& cfg, Tape::Id real, Tape::Id fake) {
    AdvNodes nodes;
    std::vector<Tape::Id> feats;
    for (int scale : cfg.scales) {
        DiscOut dr = disc_forward(tape, disc, cfg, real, scale);
        DiscOut df = disc_forward(tape, disc, cfg, fake, scale);
        // d: mean relu(1 - D(real)) + mean relu(1 + D(fake))
        Tape::Id d_real = tape.mean_all(tape.relu(tape.affine(dr.final_out, -1.0, 1.0)));
        Tape::Id d_fake = tape.mean_all(tape.relu(tape.affine(df.final_out, 1.0, 1.0)));
        Tape::Id d_term = tape.add(d_real, d_fake);
        nodes.d_loss = nodes.d_loss < 0 ? d_term : tape.add(nodes.d_loss, d_term);
        // g: -mean D(fake)
        Tape::Id g_term = tape.scale(tape.mean_all(df.final_out), -1.0);
        nodes.g_adv = nodes.g_adv < 0 ? g_term : tape.add(nodes.g_adv, g_term);
        for (size_t l = 0; l < dr.features.size(); ++l) {
            Tape::Id diff = tape.mean_all(tape.abs(tape.sub(dr.features[l], df.features[l])));
            feats.push_back(diff);
        }
    }
    Tape::Id sum = feats[0];
    for (size_t i = 1; i < feats.size(); ++i) sum = tape.add(sum, feats[i]);
    nodes.feature = tape.scale(sum, 1.0 / double(feats.size()));
    return nodes;
}

}  // namespace

LossBreakdown adversarial_losses(const Waveform& real, const Waveform& fake,
                                 ParameterStore& disc, const DiscriminatorConfig& cfg) {
    require(real.samples.size() == fake.samples.size(),
            "adversarial_losses: length mismatch");
    Tape tape;
    Tape::Id r = tape.constant(wave_matrix(real));
    Tape::Id f = tape.constant(wave_matrix(fake));
    AdvNodes nodes = adversarial_nodes(tape, disc, cfg, r, f);
    LossBreakdown out;
    out.d_loss = tape.val(nodes.d_loss).v[0];
    out.g_adv = tape.val(nodes.g_adv).v[0];
    out.feature = tape.val(nodes.feature).v[0];
    return out;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
    CodecConfig cc = CodecConfig::preset(cfg_.preset);
    cc.partition_index(cfg_.speech_partition);
    cc.partition_index(cfg_.resolved_env_partition());
    codec_ = Codec::create(cc, mix_seed(cfg_.seed, fnv1a("init")));

    CorpusParams cp = CorpusParams::defaults_for(cfg_.task);
    cp.count = cfg_.corpus_clips;
    cp.clip_seconds = cfg_.crop_seconds;
    cp.seed = mix_seed(cfg_.seed, fnv1a("corpus"));
    corpus_ = make_speech_corpus(cp);
    pairs_ = make_pairs(cfg_.task, corpus_, mix_seed(cfg_.seed, fnv1a("pairs")),
                        cfg_.pairs_count);
}

Trainer::Trainer(TrainConfig cfg, Checkpoint resume) : Trainer(std::move(cfg)) {
    if (resume.codec.config->name != codec_.config->name)
        throw ConfigError("resume: checkpoint preset '" + resume.codec.config->name +
                          "' does not match configured preset '" + codec_.config->name + "'");
    codec_ = std::move(resume.codec);
    steps_done_ = resume.steps_done;
    phase_ = resume.phase;
    has_disc_ = resume.has_discriminator;
    if (has_disc_) disc_ = std::move(resume.discriminator);
}

struct Trainer::PairGraph {
    Tape tape;
    Tape::Id loss = -1;
    Tape::Id xhat_i = -1;
    Tape::Id xhat_ii = -1;
    Tape::Id xhat_iii = -1;
    Waveform target_i, target_ii, target_iii;
    LossBreakdown breakdown;
    std::vector<Matrix> ema_batches;  // per partition, rows from both encodes
};

void Trainer::build_pair_graph(const TrainingPair& pair, PairGraph& g) {
    const CodecConfig& cc = *codec_.config;
    require(pair.input_a.samples.size() == pair.input_b.samples.size(),
            "train pair: length mismatch");
    Tape& tape = g.tape;

    TapeEmbeddings z_a = tape_encode(tape, codec_, pair.input_a);
    TapeEmbeddings z_b = tape_encode(tape, codec_, pair.input_b);

    g.ema_batches.clear();
    for (size_t i = 0; i < cc.partitions.size(); ++i) {
        const Matrix& a = tape.val(z_a.parts[i]);
        const Matrix& b = tape.val(z_b.parts[i]);
        Matrix batch(a.rows + b.rows, a.cols);
        std::copy(a.v.begin(), a.v.end(), batch.v.begin());
        std::copy(b.v.begin(), b.v.end(), batch.v.begin() + long(a.size()));
        g.ema_batches.push_back(std::move(batch));
    }

    TapeQuantized q_a = tape_quantize(tape, codec_, z_a);
    TapeQuantized q_b = tape_quantize(tape, codec_, z_b);
    const int env = cc.partition_index(cfg_.resolved_env_partition());
    const int rate = cc.sample_rate_hz;
    const int F = q_a.fast_frames;
    require(F == q_b.fast_frames, "train pair: frame count mismatch");

    // (i) reconstruct the augmented input from the full embeddings
    g.target_i = pair.input_a;
    g.xhat_i = tape_decode(tape, codec_, q_a.parts, F);
    Tape::Id loss_i = tape.mel_spec_loss(g.xhat_i, mel_targets(g.target_i), rate);
    // (ii) reconstruct clean speech with the environment partition masked
    g.target_ii = pair.target_a;
    std::vector<Tape::Id> parts_ii = q_a.parts;
    parts_ii[size_t(env)] = tape.scale(q_a.parts[size_t(env)], 0.0);
    g.xhat_ii = tape_decode(tape, codec_, parts_ii, F);
    Tape::Id loss_ii = tape.mel_spec_loss(g.xhat_ii, mel_targets(g.target_ii), rate);
    // (iii) swap the environment partition between the pair
    std::vector<Tape::Id> parts_iii;
    if (cfg_.task == Task::Noise) {
        // A's speech inherits B's noise
        parts_iii = q_a.parts;
        parts_iii[size_t(env)] = q_b.parts[size_t(env)];
        g.target_iii = apply_augmentation(pair.target_a, pair.augmentation_b);
    } else {
        // B's speech inherits A's room response; the pair ships that target
        parts_iii = q_b.parts;
        parts_iii[size_t(env)] = q_a.parts[size_t(env)];
        g.target_iii = pair.target_b;
    }
    g.xhat_iii = tape_decode(tape, codec_, parts_iii, F);
    Tape::Id loss_iii = tape.mel_spec_loss(g.xhat_iii, mel_targets(g.target_iii), rate);

    Tape::Id total = tape.add(tape.add(loss_i, loss_ii), loss_iii);
    double wav_l1 = 0.0;
    if (cfg_.lambda_wav > 0.0) {
        Tape::Id l1 = tape.l1_to_target(g.xhat_i, g.target_i.samples);
        l1 = tape.add(l1, tape.l1_to_target(g.xhat_ii, g.target_ii.samples));
        l1 = tape.add(l1, tape.l1_to_target(g.xhat_iii, g.target_iii.samples));
        wav_l1 = tape.val(l1).v[0];
        total = tape.add(total, tape.scale(l1, cfg_.lambda_wav));
    }
    g.loss = total;
    g.breakdown.step_i = tape.val(loss_i).v[0];
    g.breakdown.step_ii = tape.val(loss_ii).v[0];
    g.breakdown.step_iii = tape.val(loss_iii).v[0];
    g.breakdown.wav_l1 = wav_l1;
    g.breakdown.total = tape.val(total).v[0];
}

LossBreakdown Trainer::compute_losses(const TrainingPair& pair) {
    PairGraph g;
    build_pair_graph(pair, g);
    return g.breakdown;
}

TrainStepBatch Trainer::decode_steps(const TrainingPair& pair) {
    PairGraph g;
    build_pair_graph(pair, g);
    TrainStepBatch out;
    auto to_wave = [&](Tape::Id id) {
        Waveform w;
        w.sample_rate_hz = codec_.config->sample_rate_hz;
        w.samples = g.tape.val(id).v;
        return w;
    };
    out.xhat_i = to_wave(g.xhat_i);
    out.xhat_ii = to_wave(g.xhat_ii);
    out.xhat_iii = to_wave(g.xhat_iii);
    out.target_i = g.target_i;
    out.target_ii = g.target_ii;
    out.target_iii = g.target_iii;
    return out;
}

void Trainer::ensure_quantizers_initialized() {
    bool need = false;
    for (const auto& q : codec_.quantizers)
        if (q.n_q > 0 && !q.initialized && !q.frozen) need = true;
    if (!need) return;
    // Seed the codebooks by k-means over the first batch of embeddings.
    const CodecConfig& cc = *codec_.config;
    std::vector<Matrix> batches(cc.partitions.size());
    int take = std::min<int>(cfg_.batch_pairs, int(pairs_.size()));
    for (int p = 0; p < take; ++p) {
        for (const Waveform* w : {&pairs_[size_t(p)].input_a, &pairs_[size_t(p)].input_b}) {
            PartitionedEmbeddings z = codec_.encode(*w);
            for (size_t i = 0; i < z.parts.size(); ++i) {
                Matrix& dst = batches[i];
                if (dst.cols == 0) dst = z.parts[i];
                else {
                    Matrix merged(dst.rows + z.parts[i].rows, dst.cols);
                    std::copy(dst.v.begin(), dst.v.end(), merged.v.begin());
                    std::copy(z.parts[i].v.begin(), z.parts[i].v.end(),
                              merged.v.begin() + long(dst.size()));
                    dst = std::move(merged);
                }
            }
        }
    }
    for (size_t i = 0; i < codec_.quantizers.size(); ++i)
        if (codec_.quantizers[i].n_q > 0 && !codec_.quantizers[i].frozen)
            train_update(codec_.quantizers[i], batches[i]);
}

LossBreakdown Trainer::train_step(std::span<const TrainingPair> pairs) {
    require(!pairs.empty(), "train_step: empty batch");
    ensure_quantizers_initialized();
    codec_.params.zero_grads();

    const double inv_batch = 1.0 / double(pairs.size());
    std::vector<PairGraph> graphs(pairs.size());

    auto work = [&](size_t j) {
        build_pair_graph(pairs[j], graphs[j]);
        Tape::Id scaled = graphs[j].tape.scale(graphs[j].loss, inv_batch);
        graphs[j].tape.backward_deferred(scaled);
    };
    if (cfg_.threads > 1 && pairs.size() > 1) {
        std::vector<std::thread> pool;
        for (size_t j = 0; j < pairs.size(); ++j) pool.emplace_back(work, j);
        for (auto& t : pool) t.join();
    } else {
        for (size_t j = 0; j < pairs.size(); ++j) work(j);
    }

    LossBreakdown total;
    for (size_t j = 0; j < pairs.size(); ++j) {
        graphs[j].tape.flush_param_grads();
        total.step_i += graphs[j].breakdown.step_i * inv_batch;
        total.step_ii += graphs[j].breakdown.step_ii * inv_batch;
        total.step_iii += graphs[j].breakdown.step_iii * inv_batch;
        total.wav_l1 += graphs[j].breakdown.wav_l1 * inv_batch;
        total.total += graphs[j].breakdown.total * inv_batch;
    }
    if (!std::isfinite(total.total))
        throw TrainingError("non-finite loss at step " + std::to_string(steps_done_ + 1));
    codec_.params.check_grads_finite();
    codec_.params.adam_step(cfg_.adam);

    // EMA codebook updates from this batch's embeddings (pair order).
    const CodecConfig& cc = *codec_.config;
    for (size_t i = 0; i < cc.partitions.size(); ++i) {
        ResidualQuantizer& q = codec_.quantizers[i];
        if (q.n_q == 0 || q.frozen) continue;
        int rows = 0;
        for (auto& g : graphs) rows += g.ema_batches[i].rows;
        Matrix batch(rows, cc.partitions[i].dim);
        long off = 0;
        for (auto& g : graphs) {
            std::copy(g.ema_batches[i].v.begin(), g.ema_batches[i].v.end(),
                      batch.v.begin() + off);
            off += long(g.ema_batches[i].size());
        }
        train_update(q, batch);
    }
    ++steps_done_;
    return total;
}

void Trainer::freeze_encoder_and_quantizers() {
    for (const auto& name : codec_.params.names())
        if (name.rfind("enc.", 0) == 0) codec_.params.freeze(name);
    for (auto& q : codec_.quantizers) q.frozen = true;
}

void Trainer::log_metrics(int64_t step, const LossBreakdown& loss, int phase) {
    if (cfg_.metrics_path.empty()) return;
    std::ofstream os(cfg_.metrics_path, std::ios::app);
    if (!os) throw IoError("cannot append metrics: " + cfg_.metrics_path);
    json j;
    j["step"] = step;
    j["phase"] = phase;
    j["loss_i"] = loss.step_i;
    j["loss_ii"] = loss.step_ii;
    j["loss_iii"] = loss.step_iii;
    j["wav_l1"] = loss.wav_l1;
    j["total"] = loss.total;
    if (phase == 2) {
        j["d_loss"] = loss.d_loss;
        j["g_adv"] = loss.g_adv;
        j["feature"] = loss.feature;
    }
    os << j.dump() << "\n";
}

LossBreakdown Trainer::adversarial_round(std::span<const TrainingPair> pairs) {
    // G step: reconstruction + adversarial + feature terms on the step-(i)
    // output; encoder and quantizers are frozen so only the decoder moves.
    codec_.params.zero_grads();
    disc_.zero_grads();
    LossBreakdown total;
    const double inv_batch = 1.0 / double(pairs.size());
    std::vector<Waveform> fakes;
    std::vector<Waveform> reals;
    for (const auto& pair : pairs) {
        PairGraph g;
        build_pair_graph(pair, g);
        Tape::Id real = g.tape.constant([&] {
            Matrix m(int(pair.input_a.samples.size()), 1);
            m.v = pair.input_a.samples;
            return m;
        }());
        AdvNodes adv = adversarial_nodes(g.tape, disc_, disc_cfg_, real, g.xhat_i);
        Tape::Id loss = g.tape.add(
            g.loss, g.tape.add(g.tape.scale(adv.g_adv, cfg_.lambda_adv),
                               g.tape.scale(adv.feature, cfg_.lambda_feat)));
        Tape::Id scaled = g.tape.scale(loss, inv_batch);
        g.tape.backward_deferred(scaled);
        g.tape.flush_param_grads();
        total.step_i += g.breakdown.step_i * inv_batch;
        total.step_ii += g.breakdown.step_ii * inv_batch;
        total.step_iii += g.breakdown.step_iii * inv_batch;
        total.wav_l1 += g.breakdown.wav_l1 * inv_batch;
        total.g_adv += g.tape.val(adv.g_adv).v[0] * inv_batch;
        total.feature += g.tape.val(adv.feature).v[0] * inv_batch;
        total.total += g.tape.val(loss).v[0] * inv_batch;
        Waveform fake;
        fake.sample_rate_hz = codec_.config->sample_rate_hz;
        fake.samples = g.tape.val(g.xhat_i).v;
        fakes.push_back(std::move(fake));
        reals.push_back(pair.input_a);
    }
    if (!std::isfinite(total.total))
        throw TrainingError("non-finite loss at step " + std::to_string(steps_done_ + 1));
    codec_.params.check_grads_finite();
    codec_.params.adam_step(cfg_.adam);  // frozen set keeps encoder/quantizer fixed

    // D step on the detached decoder outputs.
    disc_.zero_grads();
    Tape dt;
    Tape::Id d_total = -1;
    for (size_t j = 0; j < fakes.size(); ++j) {
        Tape::Id real = dt.constant(wave_matrix(reals[j]));
        Tape::Id fake = dt.constant(wave_matrix(fakes[j]));
        AdvNodes adv = adversarial_nodes(dt, disc_, disc_cfg_, real, fake);
        d_total = d_total < 0 ? adv.d_loss : dt.add(d_total, adv.d_loss);
    }
    d_total = dt.scale(d_total, inv_batch);
    total.d_loss = dt.val(d_total).v[0];
    dt.backward(d_total);
    disc_.check_grads_finite();
    disc_.adam_step(cfg_.adam);
    ++steps_done_;
    return total;
}

Checkpoint Trainer::run() {
    int64_t total_phase1 = cfg_.steps_phase1;
    int64_t total_steps = cfg_.steps_phase1 + cfg_.steps_phase2;

    std::vector<int> order;
    int64_t order_epoch = -1;
    auto batch_for = [&](int64_t step) {
        std::vector<TrainingPair> batch;
        for (int j = 0; j < cfg_.batch_pairs; ++j) {
            int64_t slot = (step - 1) * cfg_.batch_pairs + j;
            int64_t epoch = slot / int64_t(pairs_.size());
            if (epoch != order_epoch) {
                order.resize(pairs_.size());
                for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
                Rng rng(mix_seed(cfg_.seed, fnv1a("order"), uint64_t(epoch)));
                for (size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[size_t(rng.uniform_int(i))]);
                order_epoch = epoch;
            }
            batch.push_back(pairs_[size_t(order[size_t(slot % int64_t(pairs_.size()))])]);
        }
        return batch;
    };

    while (steps_done_ < total_phase1) {
        auto batch = batch_for(steps_done_ + 1);
        LossBreakdown loss = train_step(batch);
        int64_t step = steps_done_;
        if (step % cfg_.log_every == 0 || step == total_phase1) log_metrics(step, loss, 1);
    }

    if (cfg_.steps_phase2 > 0 && phase_ == 1) {
        if (steps_done_ < total_phase1)
            throw ConfigError("phase 2 requires a completed phase 1");
        freeze_encoder_and_quantizers();
        if (!has_disc_) {
            disc_ = make_discriminator(disc_cfg_, mix_seed(cfg_.seed, fnv1a("disc")));
            has_disc_ = true;
        }
        phase_ = 2;
    }
    while (phase_ == 2 && steps_done_ < total_steps) {
        auto batch = batch_for(steps_done_ + 1);
        LossBreakdown loss = adversarial_round(batch);
        int64_t step = steps_done_;
        if (step % cfg_.log_every == 0 || step == total_steps) log_metrics(step, loss, 2);
    }
    return snapshot();
}

Checkpoint Trainer::snapshot() const {
    Checkpoint ck;
    ck.codec = codec_;
    ck.has_discriminator = has_disc_;
    if (has_disc_) ck.discriminator = disc_;
    ck.task = task_name(cfg_.task);
    ck.steps_done = steps_done_;
    ck.phase = phase_;
    ck.seed = cfg_.seed;
    return ck;
}

}  // namespace pcdc
