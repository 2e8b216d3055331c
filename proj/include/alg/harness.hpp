#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "alg/config.hpp"
#include "alg/guidance.hpp"
#include "alg/io.hpp"
#include "alg/metrics.hpp"
#include "alg/model.hpp"
#include "alg/pca.hpp"
#include "alg/png.hpp"
#include "alg/sampler.hpp"
#include "alg/stats.hpp"
#include "alg/synthetic.hpp"
#include "alg/train.hpp"

namespace alg {

// ---------------------------------------------------------------------------
// Typed experiment configuration
// ---------------------------------------------------------------------------

// Every tunable of the pipeline, read from a flat key = value file.  Unknown
// keys are rejected so typos fail loudly instead of silently running defaults.
struct ExperimentConfig {
    std::string out_dir = "out";

    std::string data_dir;  // defaults to <out>/data
    int data_n_clips = 160;
    uint64_t data_seed = 1;

    int model_channels = 48;
    int model_blocks = 3;
    int model_time_dim = 32;
    int model_class_dim = 32;

    int train_t2v_steps = 4000;
    int train_i2v_steps = 2000;
    int train_batch_size = 16;
    double train_lr = 2e-3;
    double train_p_drop = 0.1;
    uint64_t train_seed = 7;
    std::string t2v_checkpoint;  // defaults to <out>/t2v.ckpt
    std::string i2v_checkpoint;  // defaults to <out>/i2v.ckpt

    int sample_n_steps = 50;
    double sample_w = 5.0;
    double sample_t_trans = 0.1;
    double sample_kappa_star = 2.5;
    int sample_delay_steps = 2;
    std::string sample_filter = "bilinear";  // bilinear | gaussian
    double sample_filter_reference = 2.5;
    bool sample_first_frame_override = true;
    int sample_snapshot_stride = 5;
    int sample_feature_layer = -1;
    int sample_feature_frame = 4;

    double eval_flow_threshold = 1.5;
    double eval_frac_threshold = 0.5;
    uint64_t eval_clip_seed = 9000;
    int eval_n_clips = 10;

    std::vector<double> sweep_t_trans = {0.0, 0.06, 0.1, 0.2};
    std::vector<double> sweep_kappa_star = {2.5};
    std::vector<std::string> sweep_filters = {"bilinear"};
    std::vector<double> sweep_seeds = {1, 2, 3};

    std::vector<double> viz_steps = {3, 10, 25, 50};
    int viz_layer = 1;
    int viz_frame = 4;
    int viz_scale = 8;

    FlatConfig flat;  // source key/value view, for canonical re-serialization

    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "out.dir",
            "data.dir", "data.n_clips", "data.seed",
            "model.channels", "model.blocks", "model.time_dim", "model.class_dim",
            "train.t2v_steps", "train.i2v_steps", "train.batch_size", "train.lr",
            "train.p_drop", "train.seed", "train.t2v_checkpoint", "train.i2v_checkpoint",
            "sample.n_steps", "sample.w", "sample.t_trans", "sample.kappa_star",
            "sample.delay_steps", "sample.filter", "sample.filter_reference",
            "sample.first_frame_override", "sample.snapshot_stride",
            "sample.feature_layer", "sample.feature_frame",
            "eval.flow_threshold", "eval.frac_threshold", "eval.clip_seed", "eval.n_clips",
            "sweep.t_trans", "sweep.kappa_star", "sweep.filters", "sweep.seeds",
            "viz.steps", "viz.layer", "viz.frame", "viz.scale",
        };
        return keys;
    }

    static ExperimentConfig from_flat(const FlatConfig& f) {
        for (const auto& [k, v] : f.kv)
            if (!known_keys().count(k)) throw ConfigError("unknown config key: " + k);

        ExperimentConfig c;
        c.flat = f;
        c.out_dir = f.get_string("out.dir", c.out_dir);

        c.data_dir = f.get_string("data.dir", c.out_dir + "/data");
        c.data_n_clips = f.get_int("data.n_clips", c.data_n_clips);
        c.data_seed = static_cast<uint64_t>(f.get_int("data.seed", static_cast<int>(c.data_seed)));

        c.model_channels = f.get_int("model.channels", c.model_channels);
        c.model_blocks = f.get_int("model.blocks", c.model_blocks);
        c.model_time_dim = f.get_int("model.time_dim", c.model_time_dim);
        c.model_class_dim = f.get_int("model.class_dim", c.model_class_dim);

        c.train_t2v_steps = f.get_int("train.t2v_steps", c.train_t2v_steps);
        c.train_i2v_steps = f.get_int("train.i2v_steps", c.train_i2v_steps);
        c.train_batch_size = f.get_int("train.batch_size", c.train_batch_size);
        c.train_lr = f.get_double("train.lr", c.train_lr);
        c.train_p_drop = f.get_double("train.p_drop", c.train_p_drop);
        c.train_seed =
            static_cast<uint64_t>(f.get_int("train.seed", static_cast<int>(c.train_seed)));
        c.t2v_checkpoint = f.get_string("train.t2v_checkpoint", c.out_dir + "/t2v.ckpt");
        c.i2v_checkpoint = f.get_string("train.i2v_checkpoint", c.out_dir + "/i2v.ckpt");

        c.sample_n_steps = f.get_int("sample.n_steps", c.sample_n_steps);
        c.sample_w = f.get_double("sample.w", c.sample_w);
        c.sample_t_trans = f.get_double("sample.t_trans", c.sample_t_trans);
        c.sample_kappa_star = f.get_double("sample.kappa_star", c.sample_kappa_star);
        c.sample_delay_steps = f.get_int("sample.delay_steps", c.sample_delay_steps);
        c.sample_filter = f.get_string("sample.filter", c.sample_filter);
        c.sample_filter_reference =
            f.get_double("sample.filter_reference", c.sample_filter_reference);
        c.sample_first_frame_override =
            f.get_bool("sample.first_frame_override", c.sample_first_frame_override);
        c.sample_snapshot_stride = f.get_int("sample.snapshot_stride", c.sample_snapshot_stride);
        c.sample_feature_layer = f.get_int("sample.feature_layer", c.sample_feature_layer);
        c.sample_feature_frame = f.get_int("sample.feature_frame", c.sample_feature_frame);

        c.eval_flow_threshold = f.get_double("eval.flow_threshold", c.eval_flow_threshold);
        c.eval_frac_threshold = f.get_double("eval.frac_threshold", c.eval_frac_threshold);
        c.eval_clip_seed =
            static_cast<uint64_t>(f.get_int("eval.clip_seed", static_cast<int>(c.eval_clip_seed)));
        c.eval_n_clips = f.get_int("eval.n_clips", c.eval_n_clips);

        c.sweep_t_trans = f.get_list_double("sweep.t_trans", c.sweep_t_trans);
        c.sweep_kappa_star = f.get_list_double("sweep.kappa_star", c.sweep_kappa_star);
        c.sweep_filters = f.get_list("sweep.filters", c.sweep_filters);
        c.sweep_seeds = f.get_list_double("sweep.seeds", c.sweep_seeds);

        c.viz_steps = f.get_list_double("viz.steps", c.viz_steps);
        c.viz_layer = f.get_int("viz.layer", c.viz_layer);
        c.viz_frame = f.get_int("viz.frame", c.viz_frame);
        c.viz_scale = f.get_int("viz.scale", c.viz_scale);

        c.validate();
        return c;
    }

    static ExperimentConfig from_file(const std::string& path) {
        return from_flat(FlatConfig::load(path));
    }

    void validate() const {
        if (data_n_clips < 1) throw ConfigError("data.n_clips must be >= 1");
        if (model_channels < 1) throw ConfigError("model.channels must be >= 1");
        if (model_blocks < 1) throw ConfigError("model.blocks must be >= 1");
        if (sample_n_steps < 1) throw ConfigError("sample.n_steps must be >= 1");
        if (sample_w < 0) throw ConfigError("sample.w must be >= 0");
        if (sample_t_trans < 0 || sample_t_trans > 1)
            throw ConfigError("sample.t_trans must be in [0,1]");
        if (sample_kappa_star < 0) throw ConfigError("sample.kappa_star must be >= 0");
        if (sample_delay_steps < 0) throw ConfigError("sample.delay_steps must be >= 0");
        if (sample_filter != "bilinear" && sample_filter != "gaussian")
            throw ConfigError("sample.filter must be 'bilinear' or 'gaussian'");
        if (viz_scale < 1) throw ConfigError("viz.scale must be >= 1");
        if (eval_n_clips < 1) throw ConfigError("eval.n_clips must be >= 1");
    }

    ArchConfig arch() const {
        ArchConfig a;
        a.channels = model_channels;
        a.blocks = model_blocks;
        a.time_dim = model_time_dim;
        a.class_dim = model_class_dim;
        a.num_classes = kNumClasses;
        a.frames = kClipFrames;
        a.data_channels = kClipChannels;
        a.height = kClipSize;
        a.width = kClipSize;
        return a;
    }

    FilterSpec filter_spec(const std::string& name) const {
        if (name == "bilinear") return FilterSpec::bilinear();
        if (name == "gaussian") return FilterSpec::gaussian(sample_filter_reference);
        throw ConfigError("unknown filter kind: " + name);
    }

    SampleConfig sample_config(GuidanceVariant variant, uint64_t seed) const {
        SampleConfig sc;
        sc.n_steps = sample_n_steps;
        sc.guidance.variant = variant;
        sc.guidance.w = sample_w;
        sc.guidance.filter = filter_spec(sample_filter);
        sc.guidance.schedule =
            StrengthSchedule::step(sample_kappa_star, sample_t_trans, sample_delay_steps);
        sc.delay_steps = sample_delay_steps;
        sc.first_frame_override = sample_first_frame_override;
        sc.seed = seed;
        sc.snapshot_stride = sample_snapshot_stride;
        sc.feature_layer = sample_feature_layer;
        sc.feature_frame = sample_feature_frame;
        return sc;
    }
};

inline GuidanceVariant parse_variant(const std::string& name) {
    if (name == "plain") return GuidanceVariant::PlainCond;
    if (name == "cfg") return GuidanceVariant::CFG;
    if (name == "alg") return GuidanceVariant::ALG;
    if (name == "lpall") return GuidanceVariant::LPAll;
    throw ConfigError("unknown variant: " + name + " (expected plain|cfg|alg|lpall)");
}

// ---------------------------------------------------------------------------
// Small filesystem / formatting helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void ensure_dir(const std::filesystem::path& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Crash-safe text write: the file appears atomically or not at all.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open for writing: " + tmp.string());
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Six significant digits; infinities and NaNs spelled out.
inline std::string fmt_g6(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string fmt_g9(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::string zero_pad(int v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*d", width, v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Metrics CSV rows
// ---------------------------------------------------------------------------

inline const char* metrics_csv_header() {
    return "clip_id,variant,seed,t_trans,kappa_star,w,dynamic_degree,mean_top_flow,"
           "temporal_flicker,first_frame_psnr,subject_consistency";
}

struct MetricsRow {
    std::string clip_id;
    std::string variant;
    uint64_t seed = 0;
    double t_trans = 0;
    double kappa_star = 0;
    double w = 0;
    ClipMetrics metrics;

    std::string to_csv() const {
        using detail::fmt_g6;
        return clip_id + "," + variant + "," + std::to_string(seed) + "," + fmt_g6(t_trans) +
               "," + fmt_g6(kappa_star) + "," + fmt_g6(w) + "," + fmt_g6(metrics.dynamic_degree) +
               "," + fmt_g6(metrics.mean_top_flow) + "," + fmt_g6(metrics.temporal_flicker) +
               "," + fmt_g6(metrics.first_frame_psnr) + "," +
               fmt_g6(metrics.subject_consistency);
    }
};

// ---------------------------------------------------------------------------
// Dataset generation and loading
// ---------------------------------------------------------------------------

// Renders the training corpus into <data.dir>: one clip file per sample plus a
// manifest, then a class histogram on the log stream.  Reruns with the same
// seed rewrite byte-identical files.
inline std::filesystem::path cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    fs::path dir = cfg.data_dir;
    detail::ensure_dir(dir);
    auto dataset = build_dataset(cfg.data_n_clips, cfg.data_seed);
    std::vector<std::string> names;
    std::vector<int> histogram(kNumClasses, 0);
    for (size_t i = 0; i < dataset.size(); ++i) {
        std::string name = "clip_" + detail::zero_pad(static_cast<int>(i), 4) + ".bin";
        save_clip((dir / name).string(), dataset[i].video, dataset[i].label.class_id);
        names.push_back(name);
        ++histogram[dataset[i].label.class_id];
    }
    write_manifest((dir / "manifest.txt").string(), names);
    log << "wrote " << names.size() << " clips to " << dir.string() << "\n";
    for (int k = 0; k < kNumClasses; ++k) log << "class " << k << ": " << histogram[k] << "\n";
    return dir;
}

inline std::vector<LabeledClip> load_dataset(const std::string& data_dir) {
    namespace fs = std::filesystem;
    auto names = read_manifest((fs::path(data_dir) / "manifest.txt").string());
    if (names.empty()) throw IoError("empty dataset manifest in " + data_dir);
    std::vector<LabeledClip> out;
    out.reserve(names.size());
    for (const auto& name : names) {
        StoredClip sc = load_clip((fs::path(data_dir) / name).string());
        out.push_back(LabeledClip{std::move(sc.video), CondLabel{sc.class_id}, ClipSpec{}});
    }
    return out;
}

// Held-out conditioning clips, disjoint from training data by seed.
inline std::vector<LabeledClip> eval_clips(const ExperimentConfig& cfg, int n = -1) {
    return build_dataset(n > 0 ? n : cfg.eval_n_clips, cfg.eval_clip_seed);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class TrainPhase { T2V, I2V };

inline TrainPhase parse_phase(const std::string& name) {
    if (name == "t2v") return TrainPhase::T2V;
    if (name == "i2v") return TrainPhase::I2V;
    throw ConfigError("unknown phase: " + name + " (expected t2v|i2v)");
}

inline std::string loss_curve_csv(const TrainStats& stats) {
    std::string out = "step,loss\n";
    for (size_t i = 0; i < stats.loss_curve.size(); ++i)
        out += std::to_string(i + 1) + "," + detail::fmt_g9(stats.loss_curve[i]) + "\n";
    return out;
}

// Trains one phase and writes its checkpoint plus a loss-curve CSV next to it.
// The image-conditioned phase refuses to start without the base checkpoint.
inline std::string cmd_train(const ExperimentConfig& cfg, TrainPhase phase, std::ostream& log) {
    namespace fs = std::filesystem;
    auto dataset = load_dataset(cfg.data_dir);

    TrainConfig tc;
    tc.batch_size = cfg.train_batch_size;
    tc.lr = cfg.train_lr;
    tc.p_drop = cfg.train_p_drop;
    tc.seed = cfg.train_seed;

    TrainStats stats;
    std::string ckpt_path;
    if (phase == TrainPhase::T2V) {
        tc.steps = cfg.train_t2v_steps;
        VelocityModel<float> model = train_t2v<float>(dataset, tc, cfg.arch(), &stats);
        ckpt_path = cfg.t2v_checkpoint;
        detail::ensure_dir(fs::path(ckpt_path).parent_path());
        save_checkpoint(ckpt_path, model);
    } else {
        if (!fs::exists(cfg.t2v_checkpoint))
            throw ConfigError("i2v training needs the t2v checkpoint at " + cfg.t2v_checkpoint +
                              " (run train --phase t2v first)");
        VelocityModel<float> t2v = load_checkpoint(cfg.t2v_checkpoint);
        tc.steps = cfg.train_i2v_steps;
        VelocityModel<float> model = finetune_i2v(t2v, dataset, tc, &stats);
        ckpt_path = cfg.i2v_checkpoint;
        detail::ensure_dir(fs::path(ckpt_path).parent_path());
        save_checkpoint(ckpt_path, model);
    }

    fs::path loss_path = fs::path(ckpt_path).parent_path() /
                         (phase == TrainPhase::T2V ? "t2v_loss.csv" : "i2v_loss.csv");
    detail::write_text_atomic(loss_path, loss_curve_csv(stats));
    double head = 0, tail = 0;
    if (!stats.loss_curve.empty()) {
        size_t win = std::max<size_t>(1, stats.loss_curve.size() / 10);
        for (size_t i = 0; i < win; ++i) head += stats.loss_curve[i];
        for (size_t i = stats.loss_curve.size() - win; i < stats.loss_curve.size(); ++i)
            tail += stats.loss_curve[i];
        head /= win;
        tail /= win;
    }
    log << "checkpoint: " << ckpt_path << "\n"
        << "loss curve: " << loss_path.string() << " (first-decile mean " << detail::fmt_g6(head)
        << ", last-decile mean " << detail::fmt_g6(tail) << ")\n";
    return ckpt_path;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

struct SampleArtifacts {
    VideoF video;   // final state, first frame overridden when configured
    VideoF image;   // the conditioning image (one frame)
    CondLabel label;
    Trajectory<float> trajectory;
};

// A bare integer selects a held-out generated clip by index; anything else is
// a path to a stored clip file.
inline bool is_clip_index(const std::string& clip_ref) {
    return !clip_ref.empty() && clip_ref.find_first_not_of("0123456789") == std::string::npos;
}

inline LabeledClip resolve_clip(const ExperimentConfig& cfg, const std::string& clip_ref) {
    if (clip_ref.empty()) throw ConfigError("empty clip reference");
    if (is_clip_index(clip_ref)) {
        int id = std::stoi(clip_ref);
        return eval_clips(cfg, id + 1).back();
    }
    StoredClip sc = load_clip(clip_ref);
    return LabeledClip{std::move(sc.video), CondLabel{sc.class_id}, ClipSpec{}};
}

inline SampleArtifacts run_sample(const VelocityModel<float>& model, const VideoF* image,
                                  CondLabel label, const SampleConfig& scfg) {
    const ArchConfig& a = model.arch();
    auto [video, traj] = sample<float>(model, image, label, scfg, a.frames, a.data_channels,
                                       a.height, a.width);
    SampleArtifacts out;
    out.video = std::move(video);
    out.image = image ? *image : VideoF();
    out.label = label;
    out.trajectory = std::move(traj);
    return out;
}

inline std::string trajectory_json(const SampleArtifacts& art, const std::string& variant,
                                   uint64_t seed) {
    nlohmann::ordered_json j;
    j["variant"] = variant;
    j["seed"] = seed;
    j["n_steps"] = art.trajectory.steps.size();
    j["steps"] = nlohmann::ordered_json::array();
    std::vector<int> evals;
    std::vector<double> strengths;
    for (const auto& s : art.trajectory.steps) {
        j["steps"].push_back({{"step", s.index},
                              {"t", s.t},
                              {"strength", s.strength},
                              {"model_evals", s.model_evals}});
        evals.push_back(s.model_evals);
        strengths.push_back(s.strength);
    }
    j["evals"] = evals;
    j["strengths"] = strengths;
    j["total_model_evals"] = art.trajectory.total_model_evals;
    return j.dump(2) + "\n";
}

// Sidecar describing how a stored sample was produced, so later evaluation can
// fill the run columns of the metrics CSV without guessing.
inline std::string sample_meta(const std::string& variant, uint64_t seed, double t_trans,
                               double kappa_star, double w, const std::string& filter) {
    FlatConfig meta;
    meta.set("variant", variant);
    meta.set("seed", std::to_string(seed));
    meta.set("t_trans", detail::fmt_g6(t_trans));
    meta.set("kappa_star", detail::fmt_g6(kappa_star));
    meta.set("w", detail::fmt_g6(w));
    meta.set("filter", filter);
    return meta.serialize();
}

// Persists one sample as: <stem>.bin (video), <stem>.ref.bin (conditioning
// image, when any), <stem>.meta, per-frame PNGs and a contact-sheet strip.
inline void write_sample_files(const std::filesystem::path& dir, const std::string& stem,
                               const SampleArtifacts& art, const std::string& meta) {
    namespace fs = std::filesystem;
    detail::ensure_dir(dir);
    save_clip((dir / (stem + ".bin")).string(), art.video, art.label.class_id);
    if (art.image.data.size() > 0)
        save_clip((dir / (stem + ".ref.bin")).string(), art.image, art.label.class_id);
    detail::write_text_atomic(dir / (stem + ".meta"), meta);
    for (int fi = 0; fi < art.video.f; ++fi)
        write_png_gray8((dir / (stem + "_frame_" + detail::zero_pad(fi, 2) + ".png")).string(),
                        art.video.w, art.video.h, frame_gray8(art.video, fi));
    int sw = 0, sh = 0;
    auto sheet = contact_sheet_gray8(art.video, sw, sh);
    write_png_gray8((dir / (stem + "_strip.png")).string(), sw, sh, sheet);
}

inline VelocityModel<float> load_required_checkpoint(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("missing checkpoint " + path + " (run train first)");
    return load_checkpoint(path);
}

// Samples one video and writes all its artifacts under <out>/sample/.
// `checkpoint_override` swaps in a different model file (e.g. the base
// text-to-video model, which ignores conditioning images).
inline std::filesystem::path cmd_sample(const ExperimentConfig& cfg, const std::string& variant_str,
                                        const std::string& clip_ref, uint64_t seed,
                                        std::ostream& log,
                                        const std::string& checkpoint_override = "") {
    namespace fs = std::filesystem;
    GuidanceVariant variant = parse_variant(variant_str);
    std::string ckpt = checkpoint_override.empty() ? cfg.i2v_checkpoint : checkpoint_override;
    VelocityModel<float> model = load_required_checkpoint(ckpt);

    LabeledClip clip = resolve_clip(cfg, clip_ref);
    VideoF image = clip.video.frame(0);
    bool conditioned = model.mode() == ModelMode::I2V;
    if (!conditioned &&
        (variant == GuidanceVariant::ALG || variant == GuidanceVariant::LPAll))
        throw ConfigError("variant " + variant_str +
                          " needs an image-conditioned model; checkpoint " + ckpt +
                          " is unconditioned");

    SampleConfig scfg = cfg.sample_config(variant, seed);
    SampleArtifacts art =
        run_sample(model, conditioned ? &image : nullptr, clip.label, scfg);

    std::string stem = "video";
    std::string clip_tag =
        is_clip_index(clip_ref) ? clip_ref : fs::path(clip_ref).stem().string();
    fs::path dir = fs::path(cfg.out_dir) / "sample" /
                   (variant_str + "_clip" + clip_tag + "_s" + std::to_string(seed));
    write_sample_files(dir, stem, art,
                       sample_meta(variant_str, seed, cfg.sample_t_trans, cfg.sample_kappa_star,
                                   cfg.sample_w, cfg.sample_filter));
    detail::write_text_atomic(dir / (stem + "_trajectory.json"),
                              trajectory_json(art, variant_str, seed));
    log << "sample written to " << dir.string() << " (model evals "
        << art.trajectory.total_model_evals << ")\n";
    return dir;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

struct SetEntry {
    std::string id;
    std::filesystem::path video_path;
    std::filesystem::path ref_path;   // empty when absent
    std::filesystem::path meta_path;  // empty when absent
};

// A "video set" is a directory of <id>.bin files with optional <id>.ref.bin
// and <id>.meta sidecars; ids are the sorted stems.
inline std::vector<SetEntry> scan_video_set(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<SetEntry> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (name.size() < 4 || name.substr(name.size() - 4) != ".bin") continue;
        if (name.size() >= 8 && name.substr(name.size() - 8) == ".ref.bin") continue;
        SetEntry e;
        e.id = name.substr(0, name.size() - 4);
        e.video_path = entry.path();
        fs::path ref = fs::path(dir) / (e.id + ".ref.bin");
        if (fs::exists(ref)) e.ref_path = ref;
        fs::path meta = fs::path(dir) / (e.id + ".meta");
        if (fs::exists(meta)) e.meta_path = meta;
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(),
              [](const SetEntry& a, const SetEntry& b) { return a.id < b.id; });
    if (out.empty()) throw ConfigError("video set is empty: " + dir);
    return out;
}

inline MetricsRow row_for_entry(const ExperimentConfig& cfg, const SetEntry& e) {
    StoredClip clip = load_clip(e.video_path.string());
    std::optional<VideoF> ref;
    if (!e.ref_path.empty()) ref = load_clip(e.ref_path.string()).video;
    MetricsRow row;
    row.clip_id = e.id;
    row.variant = "unknown";
    row.w = cfg.sample_w;
    row.t_trans = cfg.sample_t_trans;
    row.kappa_star = cfg.sample_kappa_star;
    if (!e.meta_path.empty()) {
        FlatConfig meta = FlatConfig::load(e.meta_path.string());
        row.variant = meta.get_string("variant", row.variant);
        row.seed = static_cast<uint64_t>(meta.get_int("seed", 0));
        row.t_trans = meta.get_double("t_trans", row.t_trans);
        row.kappa_star = meta.get_double("kappa_star", row.kappa_star);
        row.w = meta.get_double("w", row.w);
    }
    row.metrics = compute_clip_metrics(clip.video, ref ? &*ref : nullptr,
                                       cfg.eval_flow_threshold, cfg.eval_frac_threshold);
    return row;
}

inline nlohmann::ordered_json metric_comparison(const std::vector<double>& a,
                                                const std::vector<double>& b) {
    auto finite_mean = [](const std::vector<double>& v) {
        double sum = 0;
        int n = 0;
        for (double x : v)
            if (std::isfinite(x)) {
                sum += x;
                ++n;
            }
        return n ? sum / n : 0.0;
    };
    double diff_sum = 0;
    int diff_n = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = b[i] - a[i];
        if (std::isfinite(d)) {
            diff_sum += d;
            ++diff_n;
        }
    }
    PairedSignTest st = paired_sign_test(a, b);
    nlohmann::ordered_json j;
    j["mean_a"] = finite_mean(a);
    j["mean_b"] = finite_mean(b);
    j["paired_diff_mean"] = diff_n ? diff_sum / diff_n : 0.0;
    j["sign_test_p"] = st.p;
    j["n"] = a.size();
    return j;
}

}  // namespace detail

// Computes per-clip metrics for two matched sample sets and a paired
// comparison (is B larger than A?) per metric.  Writes metrics.csv and
// comparison.json into <out>/eval.
inline std::filesystem::path cmd_eval(const ExperimentConfig& cfg, const std::string& dir_a,
                                      const std::string& dir_b, std::ostream& log) {
    namespace fs = std::filesystem;
    auto set_a = detail::scan_video_set(dir_a);
    auto set_b = detail::scan_video_set(dir_b);

    std::vector<std::string> only_a, only_b;
    {
        std::set<std::string> ids_a, ids_b;
        for (const auto& e : set_a) ids_a.insert(e.id);
        for (const auto& e : set_b) ids_b.insert(e.id);
        for (const auto& id : ids_a)
            if (!ids_b.count(id)) only_a.push_back(id);
        for (const auto& id : ids_b)
            if (!ids_a.count(id)) only_b.push_back(id);
    }
    if (!only_a.empty() || !only_b.empty()) {
        std::string msg = "video sets are not matched;";
        if (!only_a.empty()) {
            msg += " only in A:";
            for (const auto& id : only_a) msg += " " + id;
        }
        if (!only_b.empty()) {
            msg += " only in B:";
            for (const auto& id : only_b) msg += " " + id;
        }
        throw ConfigError(msg);
    }

    std::vector<MetricsRow> rows_a, rows_b;
    for (const auto& e : set_a) rows_a.push_back(detail::row_for_entry(cfg, e));
    for (const auto& e : set_b) rows_b.push_back(detail::row_for_entry(cfg, e));

    std::string csv = std::string(metrics_csv_header()) + "\n";
    for (const auto& r : rows_a) csv += r.to_csv() + "\n";
    for (const auto& r : rows_b) csv += r.to_csv() + "\n";

    auto column = [](const std::vector<MetricsRow>& rows, auto get) {
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(get(r.metrics));
        return out;
    };
    nlohmann::ordered_json cmp;
    cmp["dynamic_degree"] = detail::metric_comparison(
        column(rows_a, [](const ClipMetrics& m) { return m.dynamic_degree; }),
        column(rows_b, [](const ClipMetrics& m) { return m.dynamic_degree; }));
    cmp["mean_top_flow"] = detail::metric_comparison(
        column(rows_a, [](const ClipMetrics& m) { return m.mean_top_flow; }),
        column(rows_b, [](const ClipMetrics& m) { return m.mean_top_flow; }));
    cmp["temporal_flicker"] = detail::metric_comparison(
        column(rows_a, [](const ClipMetrics& m) { return m.temporal_flicker; }),
        column(rows_b, [](const ClipMetrics& m) { return m.temporal_flicker; }));
    cmp["first_frame_psnr"] = detail::metric_comparison(
        column(rows_a, [](const ClipMetrics& m) { return m.first_frame_psnr; }),
        column(rows_b, [](const ClipMetrics& m) { return m.first_frame_psnr; }));
    cmp["subject_consistency"] = detail::metric_comparison(
        column(rows_a, [](const ClipMetrics& m) { return m.subject_consistency; }),
        column(rows_b, [](const ClipMetrics& m) { return m.subject_consistency; }));

    fs::path out_dir = fs::path(cfg.out_dir) / "eval";
    detail::ensure_dir(out_dir);
    detail::write_text_atomic(out_dir / "metrics.csv", csv);
    detail::write_text_atomic(out_dir / "comparison.json", cmp.dump(2) + "\n");
    log << "evaluated " << rows_a.size() << " matched pairs; results in " << out_dir.string()
        << "\n";
    return out_dir;
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep
// ---------------------------------------------------------------------------

// Long-form grid sweep: one row per (t_trans, kappa*, filter, seed, clip),
// sampled with the image-guided variant so t_trans = 0 rows reduce to plain
// classifier-free guidance.  The CSV carries the standard metric columns plus
// a trailing `filter` column naming the grid's filter axis.  Existing rows
// (matched by key) are kept verbatim, so an interrupted sweep resumes without
// recomputing or duplicating work, and the finished file is byte-identical to
// a single uninterrupted run.
inline std::filesystem::path cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    if (cfg.sweep_t_trans.empty() || cfg.sweep_kappa_star.empty() || cfg.sweep_filters.empty() ||
        cfg.sweep_seeds.empty())
        throw ConfigError("sweep grids must be non-empty");
    for (const auto& f : cfg.sweep_filters) cfg.filter_spec(f);  // validate names up front

    VelocityModel<float> model = load_required_checkpoint(cfg.i2v_checkpoint);
    auto clips = eval_clips(cfg);

    fs::path out_dir = fs::path(cfg.out_dir) / "sweep";
    detail::ensure_dir(out_dir);
    fs::path csv_path = out_dir / "sweep.csv";
    const std::string header = std::string(metrics_csv_header()) + ",filter";

    // Key -> verbatim CSV line for rows already on disk.
    std::map<std::string, std::string> existing;
    if (fs::exists(csv_path)) {
        std::istringstream is(detail::read_text(csv_path));
        std::string line;
        bool first = true;
        while (std::getline(is, line)) {
            if (first) {
                first = false;
                if (line != header) throw ConfigError("sweep.csv has a different header; move it");
                continue;
            }
            if (line.empty()) continue;
            std::vector<std::string> cols;
            std::istringstream ls(line);
            std::string col;
            while (std::getline(ls, col, ',')) cols.push_back(col);
            if (cols.size() != 12)
                throw ConfigError("sweep.csv has a malformed row; move it: " + line);
            // clip, seed, t_trans, kappa_star, filter identify the grid point.
            std::string key = cols[0] + "|" + cols[2] + "|" + cols[3] + "|" + cols[4] + "|" +
                              cols[11];
            existing[key] = line;
        }
    }

    std::string csv = header + "\n";
    long computed = 0, kept = 0;
    for (double t_trans : cfg.sweep_t_trans)
        for (double kappa : cfg.sweep_kappa_star)
            for (const auto& filter : cfg.sweep_filters)
                for (double seed_d : cfg.sweep_seeds) {
                    auto seed = static_cast<uint64_t>(seed_d);
                    for (size_t ci = 0; ci < clips.size(); ++ci) {
                        std::string clip_id = "clip" + std::to_string(ci);
                        std::string key = clip_id + "|" + std::to_string(seed) + "|" +
                                          detail::fmt_g6(t_trans) + "|" + detail::fmt_g6(kappa) +
                                          "|" + filter;
                        auto it = existing.find(key);
                        if (it != existing.end()) {
                            csv += it->second + "\n";
                            ++kept;
                            continue;
                        }
                        SampleConfig scfg = cfg.sample_config(GuidanceVariant::ALG, seed);
                        scfg.guidance.filter = cfg.filter_spec(filter);
                        scfg.guidance.schedule =
                            StrengthSchedule::step(kappa, t_trans, cfg.sample_delay_steps);
                        VideoF image = clips[ci].video.frame(0);
                        SampleArtifacts art =
                            run_sample(model, &image, clips[ci].label, scfg);
                        MetricsRow row;
                        row.clip_id = clip_id;
                        row.variant = "alg";
                        row.seed = seed;
                        row.t_trans = t_trans;
                        row.kappa_star = kappa;
                        row.w = cfg.sample_w;
                        row.metrics =
                            compute_clip_metrics(art.video, &image, cfg.eval_flow_threshold,
                                                 cfg.eval_frac_threshold);
                        csv += row.to_csv() + "," + filter + "\n";
                        ++computed;
                        // Keep partial progress durable after every row.
                        detail::write_text_atomic(csv_path, csv);
                    }
                }
    detail::write_text_atomic(csv_path, csv);
    log << "sweep: " << computed << " rows computed, " << kept << " reused -> "
        << csv_path.string() << "\n";
    return csv_path;
}

// ---------------------------------------------------------------------------
// Feature visualization
// ---------------------------------------------------------------------------

// For each requested variant, samples with hidden-feature capture enabled,
// projects each requested step's token features onto three principal
// components, and tiles the projections as RGB images (variants as rows, steps
// as columns).  Raw projections, per-step churn (mean token distance to the
// final step), and a legend accompany the PNG.
inline std::filesystem::path cmd_viz_features(const ExperimentConfig& cfg,
                                              const std::string& clip_ref,
                                              const std::vector<std::string>& variant_names,
                                              const std::vector<int>& steps, std::ostream& log,
                                              uint64_t seed = 1) {
    namespace fs = std::filesystem;
    if (variant_names.empty()) throw ConfigError("viz-features: need at least one variant");
    if (steps.empty()) throw ConfigError("viz-features: need at least one step");
    for (int s : steps)
        if (s < 1 || s > cfg.sample_n_steps)
            throw ConfigError("viz-features: step " + std::to_string(s) + " outside [1, " +
                              std::to_string(cfg.sample_n_steps) + "]");

    VelocityModel<float> model = load_required_checkpoint(cfg.i2v_checkpoint);
    LabeledClip clip = resolve_clip(cfg, clip_ref);
    VideoF image = clip.video.frame(0);
    const int h = model.arch().height, w = model.arch().width;

    fs::path out_dir = fs::path(cfg.out_dir) / "viz";
    detail::ensure_dir(out_dir);

    const int scale = cfg.viz_scale;
    const int tile_w = w * scale, tile_h = h * scale;
    const int grid_w = static_cast<int>(steps.size()) * tile_w +
                       (static_cast<int>(steps.size()) - 1);
    const int grid_h = static_cast<int>(variant_names.size()) * tile_h +
                       (static_cast<int>(variant_names.size()) - 1);
    std::vector<uint8_t> grid(static_cast<size_t>(grid_w) * grid_h * 3, 0);

    std::string churn_csv = "variant,step,mean_distance_to_final\n";
    std::string legend = "rows (top to bottom):";
    for (const auto& v : variant_names) legend += " " + v;
    legend += "\ncolumns (left to right):";
    for (int s : steps) legend += " step" + std::to_string(s);
    legend += "\n";

    for (size_t vi = 0; vi < variant_names.size(); ++vi) {
        GuidanceVariant variant = parse_variant(variant_names[vi]);
        SampleConfig scfg = cfg.sample_config(variant, seed);
        scfg.feature_layer = cfg.viz_layer;
        scfg.feature_frame = cfg.viz_frame;
        SampleArtifacts art = run_sample(model, &image, clip.label, scfg);
        const auto& feats = art.trajectory.features;
        if (static_cast<int>(feats.size()) != cfg.sample_n_steps)
            throw std::runtime_error("viz-features: capture produced " +
                                     std::to_string(feats.size()) + " steps, expected " +
                                     std::to_string(cfg.sample_n_steps));

        const Eigen::MatrixXd& final_feat = feats.back();
        for (int s = 1; s <= cfg.sample_n_steps; ++s) {
            double churn = (feats[s - 1] - final_feat).rowwise().norm().mean();
            churn_csv += variant_names[vi] + "," + std::to_string(s) + "," +
                         detail::fmt_g9(churn) + "\n";
        }

        for (size_t si = 0; si < steps.size(); ++si) {
            PcaResult pca = pca_project(feats[steps[si] - 1], 3);

            std::string feat_csv = "p0,p1,p2\n";
            for (Eigen::Index r = 0; r < pca.projection.rows(); ++r)
                feat_csv += detail::fmt_g9(pca.projection(r, 0)) + "," +
                            detail::fmt_g9(pca.projection(r, 1)) + "," +
                            detail::fmt_g9(pca.projection(r, 2)) + "\n";
            feat_csv += "# degenerate = " + std::string(pca.degenerate ? "1" : "0") + "\n";
            detail::write_text_atomic(out_dir / ("features_" + variant_names[vi] + "_step" +
                                                 detail::zero_pad(steps[si], 2) + ".csv"),
                                      feat_csv);

            int ox = static_cast<int>(si) * (tile_w + 1);
            int oy = static_cast<int>(vi) * (tile_h + 1);
            for (int y = 0; y < tile_h; ++y)
                for (int x = 0; x < tile_w; ++x) {
                    Eigen::Index token =
                        static_cast<Eigen::Index>(y / scale) * w + (x / scale);
                    size_t px = (static_cast<size_t>(oy + y) * grid_w + (ox + x)) * 3;
                    for (int ch = 0; ch < 3; ++ch)
                        grid[px + ch] = static_cast<uint8_t>(
                            std::lround(255.0 * pca.projection01(token, ch)));
                }
        }
    }

    write_png_rgb8((out_dir / "features.png").string(), grid_w, grid_h, grid);
    detail::write_text_atomic(out_dir / "churn.csv", churn_csv);
    detail::write_text_atomic(out_dir / "legend.txt", legend);
    log << "feature grid written to " << (out_dir / "features.png").string() << "\n";
    return out_dir;
}

}  // namespace alg
