#include "pcdc/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pcdc/augment.hpp"
#include "pcdc/bitstream.hpp"
#include "pcdc/checkpoint.hpp"
#include "pcdc/eval.hpp"
#include "pcdc/trainer.hpp"
#include "pcdc/wav.hpp"

namespace pcdc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void print_config(const std::string& cmd, const json& cfg) {
    json j;
    j["command"] = cmd;
    j["config"] = cfg;
    std::cout << j.dump(2) << std::endl;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open file: " + path);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write file: " + path);
    f << text;
}

// ---------------------------------------------------------------------------

struct CorpusOpts {
    std::string task = "noise";
    int count = 8;
    uint64_t seed = 1;
    std::string out_dir;
    double seconds = 1.92;
};

int cmd_corpus(const CorpusOpts& o) {
    Task task = task_from_name(o.task);
    print_config("corpus", {{"task", o.task},
                            {"count", o.count},
                            {"seed", o.seed},
                            {"out", o.out_dir},
                            {"seconds", o.seconds}});
    if (o.count < 0) throw ConfigError("corpus: count must be >= 0");
    fs::create_directories(o.out_dir);

    json manifest;
    manifest["task"] = o.task;
    manifest["seed"] = o.seed;
    manifest["sample_rate_hz"] = kDefaultSampleRate;
    manifest["clip_seconds"] = o.seconds;
    manifest["pairs"] = json::array();

    if (o.count > 0) {
        CorpusParams cp = CorpusParams::defaults_for(task);
        cp.count = std::max(2, o.count);
        cp.clip_seconds = o.seconds;
        cp.seed = mix_seed(o.seed, fnv1a("corpus"));
        std::vector<Waveform> corpus = make_speech_corpus(cp);
        for (int i = 0; i < o.count; ++i) {
            TrainingPair pair = pair_at(task, corpus, mix_seed(o.seed, fnv1a("pairs")),
                                        uint64_t(i));
            char tag[32];
            std::snprintf(tag, sizeof(tag), "pair_%04d", i);
            json entry;
            entry["index"] = i;
            for (auto [suffix, w] : std::initializer_list<std::pair<const char*, const Waveform*>>{
                     {"input_a", &pair.input_a},
                     {"target_a", &pair.target_a},
                     {"input_b", &pair.input_b},
                     {"target_b", &pair.target_b}}) {
                std::string file = std::string(tag) + "_" + suffix + ".wav";
                write_wav((fs::path(o.out_dir) / file).string(), *w);
                entry[suffix] = file;
            }
            if (task == Task::Noise) {
                entry["gain_db_a"] = pair.augmentation_a.gain_db;
                entry["gain_db_b"] = pair.augmentation_b.gain_db;
            } else {
                entry["t60_a"] = pair.augmentation_a.rir.t60_seconds;
                entry["t60_b"] = pair.augmentation_b.rir.t60_seconds;
            }
            manifest["pairs"].push_back(entry);
        }
    }
    write_text_file((fs::path(o.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string config_path;
    std::string out_path = "checkpoint.pckp";
    std::string resume_path;
    std::string metrics_path;
    int64_t seed_override = -1;
    int threads_override = 0;
};

int cmd_train(const TrainOpts& o) {
    TrainConfig cfg = o.config_path.empty()
                          ? TrainConfig::defaults_for(Task::Noise)
                          : TrainConfig::from_json_string(read_text_file(o.config_path));
    if (o.seed_override >= 0) cfg.seed = uint64_t(o.seed_override);
    if (!o.metrics_path.empty()) cfg.metrics_path = o.metrics_path;
    if (o.threads_override > 0) cfg.threads = o.threads_override;
    print_config("train", json::parse(cfg.to_json_string()));

    Checkpoint ck;
    if (!o.resume_path.empty()) {
        Trainer trainer(cfg, Checkpoint::load(o.resume_path));
        ck = trainer.run();
    } else {
        Trainer trainer(cfg);
        ck = trainer.run();
    }
    ck.save(o.out_path);
    std::cout << "checkpoint: " << o.out_path << " (steps " << ck.steps_done << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EncodeOpts {
    std::string checkpoint;
    std::string in_wav;
    std::string out_stream;
};

int cmd_encode(const EncodeOpts& o) {
    print_config("encode",
                 {{"checkpoint", o.checkpoint}, {"in", o.in_wav}, {"out", o.out_stream}});
    Checkpoint ck = Checkpoint::load(o.checkpoint);
    Waveform wav = read_wav(o.in_wav);
    PartitionedEmbeddings z = ck.codec.encode(wav);
    CodeGrid codes = ck.codec.codes_for(z);
    StreamHeader header =
        StreamHeader::from_config(*ck.codec.config, uint64_t(wav.samples.size()));
    write_file_bytes(o.out_stream, pack(codes, header));
    return kExitOk;
}

struct DecodeOpts {
    std::string checkpoint;
    std::string in_stream;
    std::string out_wav;
    std::vector<std::string> drops;
    std::vector<std::string> weights;  // name=w
    std::string swap_from;
    std::string swap_partition;
};

int cmd_decode(const DecodeOpts& o) {
    print_config("decode", {{"checkpoint", o.checkpoint},
                            {"in", o.in_stream},
                            {"out", o.out_wav},
                            {"drop", o.drops},
                            {"weight", o.weights},
                            {"swap_from", o.swap_from},
                            {"swap_partition", o.swap_partition}});
    Checkpoint ck = Checkpoint::load(o.checkpoint);
    UnpackResult res = unpack(read_file_bytes(o.in_stream));
    PartitionedEmbeddings z = ck.codec.embeddings_from_codes(res.codes);
    for (const auto& name : o.drops) z = mask_partition(z, name);
    for (const auto& spec : o.weights) {
        size_t eq = spec.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--weight expects <partition>=<w>: " + spec);
        std::string name = spec.substr(0, eq);
        double w = std::stod(spec.substr(eq + 1));
        z = scale_partition(z, name, w);
    }
    if (!o.swap_from.empty()) {
        if (o.swap_partition.empty())
            throw ConfigError("--swap-from requires --swap-partition");
        UnpackResult other = unpack(read_file_bytes(o.swap_from));
        PartitionedEmbeddings zo = ck.codec.embeddings_from_codes(other.codes);
        auto [swapped, _] = swap_partition(z, zo, o.swap_partition);
        z = std::move(swapped);
    }
    Waveform out = ck.codec.decode(z);
    size_t want = size_t(res.ticks) * size_t(res.header.frame_samples);
    out.samples.resize(std::min<size_t>(want, size_t(res.header.original_length)));
    write_wav(o.out_wav, out);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string kind;
    std::string checkpoint;
    std::string out_dir = ".";
    uint64_t seed = 0;
    int count = 0;  // 0 = kind default
    std::vector<double> factors = {0.0, 0.25, 0.5, 0.75, 1.0};
};

void write_summary(const std::string& dir, const std::string& kind,
                   const std::string& text) {
    write_text_file((fs::path(dir) / (kind + "_summary.txt")).string(), text);
    std::cout << text;
}

int cmd_eval(const EvalOpts& o) {
    if (o.kind != "denoise" && o.kind != "swap" && o.kind != "sweep" && o.kind != "t60")
        throw ConfigError("eval: unknown kind '" + o.kind +
                          "' (want denoise|swap|sweep|t60)");
    print_config("eval", {{"kind", o.kind},
                          {"checkpoint", o.checkpoint},
                          {"out", o.out_dir},
                          {"seed", o.seed},
                          {"count", o.count},
                          {"factors", o.factors}});
    fs::create_directories(o.out_dir);

    if (o.kind == "t60") {
        // Estimator self-check on synthetic room responses with known decay.
        std::ostringstream lines, summary;
        summary << "t60 estimator check\n";
        for (double tau : {0.02, 0.05, 0.10, 0.15}) {
            double expected = 6.907755278982137 * tau;
            Rng rng(mix_seed(o.seed, fnv1a("t60"), uint64_t(tau * 1e6)));
            RoomImpulseResponse rir =
                synthesize_rir(expected, size_t(2.0 * kDefaultSampleRate), rng);
            Waveform burst;
            burst.samples.assign(size_t(2.5 * kDefaultSampleRate), 0.0);
            for (size_t i = 0; i < size_t(0.4 * kDefaultSampleRate); ++i)
                burst.samples[i] = 0.7 * std::sin(2.0 * 3.14159265358979 * 220.0 *
                                                  double(i) / kDefaultSampleRate);
            Waveform wet = convolve_causal(burst, rir.kernel);
            double est = estimate_t60(wet).t60_seconds;
            json rec{{"tau", tau}, {"expected_t60", expected}, {"estimated_t60", est}};
            lines << rec.dump() << "\n";
            summary << "  tau " << tau << ": expected " << expected << " s, estimated "
                    << est << " s\n";
        }
        write_text_file((fs::path(o.out_dir) / "t60_items.jsonl").string(), lines.str());
        write_summary(o.out_dir, "t60", summary.str());
        return kExitOk;
    }

    Checkpoint ck = Checkpoint::load(o.checkpoint);
    Task task = task_from_name(ck.task.empty() ? "noise" : ck.task);
    uint64_t eval_seed = mix_seed(ck.seed, fnv1a("eval"), o.seed);
    CorpusParams cp = CorpusParams::defaults_for(task);
    cp.count = 24;
    cp.clip_seconds = 1.92;
    cp.seed = mix_seed(eval_seed, fnv1a("eval-corpus"));
    std::vector<Waveform> corpus = make_speech_corpus(cp);
    std::string env = task == Task::Noise ? "noise" : "reverb";

    if (o.kind == "denoise") {
        if (task != Task::Noise) throw ConfigError("eval denoise needs a noise-task checkpoint");
        int count = o.count > 0 ? o.count : 50;
        std::vector<EvalItem> items;
        for (int i = 0; i < count; ++i)
            items.push_back(eval_item_at(task, corpus, eval_seed, uint64_t(i)));
        DenoiseReport rep = denoise_report(ck.codec, items, env);
        std::ostringstream lines;
        for (size_t i = 0; i < rep.items.size(); ++i) {
            const auto& r = rep.items[i];
            json rec{{"index", i},
                     {"snr_input_db", r.snr_input_db},
                     {"snr_masked_db", r.snr_masked_db},
                     {"snr_full_db", r.snr_full_db},
                     {"improvement_db", r.improvement_db}};
            lines << rec.dump() << "\n";
        }
        write_text_file((fs::path(o.out_dir) / "denoise_items.jsonl").string(), lines.str());
        std::ostringstream summary;
        summary << "denoise report over " << rep.items.size() << " items\n"
                << "  mean SNR improvement: " << rep.mean_improvement_db << " dB\n"
                << "  masked better than full: " << 100.0 * rep.fraction_masked_better
                << " %\n";
        write_summary(o.out_dir, "denoise", summary.str());
        return kExitOk;
    }

    if (o.kind == "swap") {
        if (task != Task::Reverb) throw ConfigError("eval swap needs a reverb-task checkpoint");
        int count = o.count > 0 ? o.count : 30;
        std::vector<std::pair<Waveform, Waveform>> pairs;
        for (int i = 0; i < count; ++i) {
            TrainingPair p = pair_at(task, corpus, eval_seed, uint64_t(i));
            pairs.emplace_back(p.input_a, p.input_b);
        }
        std::vector<SwapRow> rows = swap_experiment(ck.codec, pairs, env);
        int valid = 0, flipped = 0;
        std::ostringstream lines;
        for (size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            bool flip = r.valid && (r.t60_recon_a > r.t60_recon_b) !=
                                       (r.t60_swapped_a > r.t60_swapped_b);
            if (r.valid) {
                ++valid;
                if (flip) ++flipped;
            }
            json rec{{"index", i},
                     {"valid", r.valid},
                     {"t60_recon_a", r.t60_recon_a},
                     {"t60_recon_b", r.t60_recon_b},
                     {"t60_swapped_a", r.t60_swapped_a},
                     {"t60_swapped_b", r.t60_swapped_b},
                     {"flipped", flip}};
            lines << rec.dump() << "\n";
        }
        write_text_file((fs::path(o.out_dir) / "swap_items.jsonl").string(), lines.str());
        std::ostringstream summary;
        summary << "swap experiment over " << rows.size() << " pairs (" << valid
                << " valid)\n"
                << "  ordering flipped: " << flipped << "/" << valid << "\n";
        write_summary(o.out_dir, "swap", summary.str());
        return kExitOk;
    }

    // sweep
    if (task != Task::Reverb) throw ConfigError("eval sweep needs a reverb-task checkpoint");
    int count = o.count > 0 ? o.count : 50;
    std::vector<Waveform> inputs;
    for (int i = 0; i < count; ++i)
        inputs.push_back(eval_item_at(task, corpus, eval_seed, uint64_t(i)).input);
    SweepResult res =
        weight_sweep(ck.codec, inputs, o.factors, env, mix_seed(eval_seed, fnv1a("boot")));
    std::ostringstream lines, summary;
    summary << "weight sweep over " << res.items_used << " items (" << res.items_dropped
            << " dropped)\n";
    for (size_t f = 0; f < res.factors.size(); ++f) {
        json rec{{"factor", res.factors[f]},
                 {"normalized_mean_t60", res.normalized_mean[f]},
                 {"ci_lo", res.ci_lo[f]},
                 {"ci_hi", res.ci_hi[f]}};
        lines << rec.dump() << "\n";
        summary << "  factor " << res.factors[f] << ": " << res.normalized_mean[f] << " ["
                << res.ci_lo[f] << ", " << res.ci_hi[f] << "]\n";
    }
    write_text_file((fs::path(o.out_dir) / "sweep_items.jsonl").string(), lines.str());
    write_summary(o.out_dir, "sweep", summary.str());
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"pcdc: partitioned neural audio codec"};
    app.require_subcommand(1);

    CorpusOpts corpus;
    auto* c = app.add_subcommand("corpus", "Generate synthetic training pairs as WAVs");
    c->add_option("--task", corpus.task, "noise|reverb");
    c->add_option("--count", corpus.count, "number of pairs");
    c->add_option("--seed", corpus.seed, "master seed");
    c->add_option("--out", corpus.out_dir, "output directory")->required();
    c->add_option("--seconds", corpus.seconds, "clip length in seconds");

    TrainOpts train;
    auto* t = app.add_subcommand("train", "Train a codec from a JSON config");
    t->add_option("--config", train.config_path, "training config JSON");
    t->add_option("--out", train.out_path, "checkpoint output path");
    t->add_option("--resume", train.resume_path, "checkpoint to resume from");
    t->add_option("--metrics", train.metrics_path, "metrics JSONL path");
    t->add_option("--seed", train.seed_override, "seed override");
    t->add_option("--threads", train.threads_override, "worker threads");

    EncodeOpts enc;
    auto* e = app.add_subcommand("encode", "Encode a WAV into a .pcdc stream");
    e->add_option("--checkpoint", enc.checkpoint, "model checkpoint")->required();
    e->add_option("--in", enc.in_wav, "input WAV")->required();
    e->add_option("--out", enc.out_stream, "output .pcdc path")->required();

    DecodeOpts dec;
    auto* d = app.add_subcommand("decode", "Decode a .pcdc stream with optional edits");
    d->add_option("--checkpoint", dec.checkpoint, "model checkpoint")->required();
    d->add_option("--in", dec.in_stream, "input .pcdc path")->required();
    d->add_option("--out", dec.out_wav, "output WAV")->required();
    d->add_option("--drop", dec.drops, "zero a partition before decoding");
    d->add_option("--weight", dec.weights, "scale a partition: <name>=<w>");
    d->add_option("--swap-from", dec.swap_from, "stream supplying the swapped partition");
    d->add_option("--swap-partition", dec.swap_partition, "partition to swap in");

    EvalOpts ev;
    auto* v = app.add_subcommand("eval", "Run an evaluation harness");
    v->add_option("--kind", ev.kind, "denoise|swap|sweep|t60")->required();
    v->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
    v->add_option("--out", ev.out_dir, "report directory");
    v->add_option("--seed", ev.seed, "evaluation seed");
    v->add_option("--count", ev.count, "number of items/pairs");
    v->add_option("--factors", ev.factors, "weight factors for sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (app.got_subcommand(c)) return cmd_corpus(corpus);
        if (app.got_subcommand(t)) return cmd_train(train);
        if (app.got_subcommand(e)) return cmd_encode(enc);
        if (app.got_subcommand(d)) return cmd_decode(dec);
        if (app.got_subcommand(v)) return cmd_eval(ev);
        std::cerr << "no subcommand\n";
        return kExitConfig;
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& ex) {
        std::cerr << "format error: " << ex.what() << "\n";
        return kExitFormat;
    } catch (const TrainingError& ex) {
        std::cerr << "training error: " << ex.what() << "\n";
        return kExitTraining;
    } catch (const EstimationUnavailable& ex) {
        std::cerr << "estimation unavailable: " << ex.what() << "\n";
        return kExitEstimation;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitError;
    }
}

}  // namespace pcdc::cli
