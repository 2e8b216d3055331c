#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "alg/harness.hpp"

// Command-line front end for the video-guidance sandbox.  Every command is
// deterministic given its config and seeds; reruns produce byte-identical
// artifacts.  Exit codes: 0 success, 2 usage/config error, 3 I/O error,
// 4 invariant violation during the run.
int main(int argc, char** argv) {
    CLI::App app{"adaptive low-pass guidance sandbox"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<long long> seed_flag;
    std::string out_flag;
    app.add_option("--config", config_path, "configuration file (flat key = value)");
    app.add_option("--seed", seed_flag, "override the command's primary seed");
    app.add_option("--out", out_flag, "override the output directory");

    CLI::App* gen = app.add_subcommand("gen-data", "render the synthetic training corpus");
    gen->fallthrough();

    CLI::App* train = app.add_subcommand("train", "train one model phase");
    train->fallthrough();
    std::string phase;
    train->add_option("--phase", phase, "t2v (base) or i2v (image-conditioned fine-tune)")
        ->required()
        ->check(CLI::IsMember({"t2v", "i2v"}));

    CLI::App* sample =
        app.add_subcommand("sample", "generate one video from a conditioning clip");
    sample->fallthrough();
    std::string variant = "alg";
    std::string clip_ref = "0";
    std::string checkpoint_override;
    sample->add_option("--variant", variant, "guidance variant")
        ->check(CLI::IsMember({"plain", "cfg", "alg", "lpall"}));
    sample->add_option("--clip", clip_ref, "held-out clip index or path to a clip file");
    sample->add_option("--checkpoint", checkpoint_override,
                       "model checkpoint (default: the image-conditioned one)");

    CLI::App* eval = app.add_subcommand("eval", "compare two matched sample sets");
    eval->fallthrough();
    std::string set_a, set_b;
    eval->add_option("--set-a", set_a, "directory of baseline samples")->required();
    eval->add_option("--set-b", set_b, "directory of treatment samples")->required();

    CLI::App* sweep =
        app.add_subcommand("sweep", "metrics over the configured parameter grid");
    sweep->fallthrough();

    CLI::App* viz = app.add_subcommand("viz-features", "hidden-feature projection grid");
    viz->fallthrough();
    std::string viz_clip = "0";
    std::vector<std::string> viz_variants = {"cfg", "alg"};
    std::vector<int> viz_steps;
    viz->add_option("--clip", viz_clip, "held-out clip index or path to a clip file");
    viz->add_option("--variants", viz_variants, "guidance variants, one row each")
        ->delimiter(',');
    viz->add_option("--steps", viz_steps, "sampler steps to visualize (default from config)")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return 2;
    }

    try {
        alg::FlatConfig flat =
            config_path.empty() ? alg::FlatConfig{} : alg::FlatConfig::load(config_path);
        if (!out_flag.empty()) flat.set("out.dir", out_flag);
        if (seed_flag) {
            if (gen->parsed()) flat.set("data.seed", std::to_string(*seed_flag));
            if (train->parsed()) flat.set("train.seed", std::to_string(*seed_flag));
            if (sweep->parsed()) flat.set("sweep.seeds", std::to_string(*seed_flag));
        }
        alg::ExperimentConfig cfg = alg::ExperimentConfig::from_flat(flat);
        uint64_t run_seed = seed_flag ? static_cast<uint64_t>(*seed_flag) : 1;

        if (gen->parsed()) {
            alg::cmd_gen_data(cfg, std::cout);
        } else if (train->parsed()) {
            alg::cmd_train(cfg, alg::parse_phase(phase), std::cout);
        } else if (sample->parsed()) {
            alg::cmd_sample(cfg, variant, clip_ref, run_seed, std::cout, checkpoint_override);
        } else if (eval->parsed()) {
            alg::cmd_eval(cfg, set_a, set_b, std::cout);
        } else if (sweep->parsed()) {
            alg::cmd_sweep(cfg, std::cout);
        } else if (viz->parsed()) {
            if (viz_steps.empty())
                for (double s : cfg.viz_steps) viz_steps.push_back(static_cast<int>(s));
            alg::cmd_viz_features(cfg, viz_clip, viz_variants, viz_steps, std::cout, run_seed);
        }
        return 0;
    } catch (const alg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const alg::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 4;
    }
}
