#pragma once

#include <optional>
#include <span>
#include <string>

#include "pcdc/augment.hpp"
#include "pcdc/checkpoint.hpp"
#include "pcdc/codec.hpp"

namespace pcdc {

struct TrainConfig {
    std::string preset = "noise-toy";
    Task task = Task::Noise;
    uint64_t seed = 1;
    int steps_phase1 = 1500;
    int steps_phase2 = 0;  // adversarial refinement, off by default
    int batch_pairs = 2;
    double crop_seconds = 1.92;
    int corpus_clips = 48;
    int pairs_count = 64;
    AdamConfig adam;           // lr 1e-4, beta 0.9/0.99, eps 1e-8
    double lambda_wav = 0.0;   // waveform L1 weight added to each step's loss
    double lambda_adv = 1.0;
    double lambda_feat = 100.0;
    int threads = 1;
    int log_every = 25;
    std::string metrics_path;
    std::string speech_partition = "speech";
    std::string env_partition;  // defaults to the task name

    std::string resolved_env_partition() const {
        return env_partition.empty() ? task_name(task) : env_partition;
    }

    std::string to_json_string() const;
    static TrainConfig from_json_string(const std::string& text);
    static TrainConfig defaults_for(Task task);
};

/// The three decoded outputs and their targets for one pair.
struct TrainStepBatch {
    Waveform xhat_i, xhat_ii, xhat_iii;
    Waveform target_i, target_ii, target_iii;
};

struct LossBreakdown {
    double step_i = 0.0;
    double step_ii = 0.0;
    double step_iii = 0.0;
    double wav_l1 = 0.0;
    double total = 0.0;
    double d_loss = 0.0;
    double g_adv = 0.0;
    double feature = 0.0;
};

// ---------------------------------------------------------------------------
// Discriminators: time-domain convolution stacks at downsample factors
// {1, 2, 4}, exposing per-layer feature maps for the feature-matching loss.

struct DiscriminatorConfig {
    std::vector<int> scales = {1, 2, 4};
    std::vector<int> kernel = {15, 9, 9, 3};
    std::vector<int> stride = {4, 4, 4, 1};
    std::vector<int> width = {8, 16, 16, 1};
};

ParameterStore make_discriminator(const DiscriminatorConfig& cfg, uint64_t seed);

/// Hinge adversarial losses plus the mean absolute feature distance, without
/// touching any parameter.
LossBreakdown adversarial_losses(const Waveform& real, const Waveform& fake,
                                 ParameterStore& disc, const DiscriminatorConfig& cfg);

// ---------------------------------------------------------------------------

class Trainer {
public:
    explicit Trainer(TrainConfig cfg);
    Trainer(TrainConfig cfg, Checkpoint resume);

    /// Losses of the three steps for one pair at the current parameters,
    /// without applying any update.
    LossBreakdown compute_losses(const TrainingPair& pair);

    /// One optimizer step over a minibatch of pairs: per pair, the three
    /// decodes (full, environment-masked, environment-swapped) against
    /// x / x^c / x-tilde; summed loss, one Adam step, then EMA codebook
    /// updates. Throws TrainingError (with the step id) on non-finite loss.
    LossBreakdown train_step(std::span<const TrainingPair> pairs);

    /// Runs the configured schedule: phase 1 (reconstruction only), then
    /// phase 2 (frozen encoder/quantizer + adversarial) when configured.
    Checkpoint run();

    Codec& codec() { return codec_; }
    const TrainConfig& config() const { return cfg_; }
    int64_t steps_done() const { return steps_done_; }
    Checkpoint snapshot() const;

    const std::vector<TrainingPair>& pairs() const { return pairs_; }
    TrainStepBatch decode_steps(const TrainingPair& pair);

private:
    struct PairGraph;
    void build_pair_graph(const TrainingPair& pair, PairGraph& g);
    void ensure_quantizers_initialized();
    void freeze_encoder_and_quantizers();
    void log_metrics(int64_t step, const LossBreakdown& loss, int phase);
    LossBreakdown adversarial_round(std::span<const TrainingPair> pairs);

    TrainConfig cfg_;
    Codec codec_;
    ParameterStore disc_;
    DiscriminatorConfig disc_cfg_;
    bool has_disc_ = false;
    std::vector<Waveform> corpus_;
    std::vector<TrainingPair> pairs_;
    int64_t steps_done_ = 0;
    int phase_ = 1;
};

}  // namespace pcdc
