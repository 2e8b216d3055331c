#include <catch2/catch_amalgamated.hpp>

#include "alg/model.hpp"
#include "alg/synthetic.hpp"
#include "alg/train.hpp"

using namespace alg;

namespace {

ArchConfig tiny_arch() {
    ArchConfig a;
    a.channels = 6;
    a.blocks = 3;
    a.time_dim = 8;
    a.class_dim = 8;
    a.num_classes = 4;
    a.frames = 4;
    a.data_channels = 1;
    a.height = 8;
    a.width = 8;
    return a;
}

ArchConfig small_data_arch() {
    ArchConfig a;
    a.channels = 8;
    a.time_dim = 16;
    a.class_dim = 16;
    return a;
}

template <typename T>
void randomize_params(VelocityModel<T>& m, uint64_t seed, double scale = 0.05) {
    Rng rng(seed);
    for (auto& p : m.params())
        for (auto& v : p.value) v = static_cast<T>(scale * rng.normal());
}

}  // namespace

TEST_CASE("pad_first_frame appends a one-hot mask channel", "[model]") {
    VideoF img(1, 1, 16, 16);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.1f * static_cast<float>(i % 7);
    VideoF padded = pad_first_frame(img, 16);
    REQUIRE(padded.f == 16);
    REQUIRE(padded.c == 2);
    REQUIRE(padded.h == 16);
    REQUIRE(padded.w == 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            REQUIRE(padded.at(0, 0, y, x) == img.at(0, 0, y, x));
            REQUIRE(padded.at(0, 1, y, x) == 1.0f);
        }
    for (int fi = 1; fi < 16; ++fi)
        for (int ci = 0; ci < 2; ++ci)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) REQUIRE(padded.at(fi, ci, y, x) == 0.0f);

    VideoF two_frames(2, 1, 16, 16);
    REQUIRE_THROWS_AS(pad_first_frame(two_frames, 16), std::invalid_argument);
    REQUIRE_THROWS_AS(pad_first_frame(img, 0), std::invalid_argument);
}

TEST_CASE("time embedding is sinusoidal with unit range", "[model]") {
    auto e0 = time_embedding(0.0, 32);
    REQUIRE(e0.size() == 32);
    for (int k = 0; k < 16; ++k) {
        REQUIRE(e0[k] == 0.0);       // sines at t=0
        REQUIRE(e0[16 + k] == 1.0);  // cosines at t=0
    }
    auto e = time_embedding(0.37, 32);
    for (double v : e) {
        REQUIRE(v <= 1.0);
        REQUIRE(v >= -1.0);
    }
    // sin^2 + cos^2 = 1 per frequency.
    for (int k = 0; k < 16; ++k)
        REQUIRE(e[k] * e[k] + e[16 + k] * e[16 + k] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("descriptor text round-trips the architecture", "[model]") {
    ArchConfig a = tiny_arch();
    ModelMode mode = ModelMode::T2V;
    ArchConfig back = ArchConfig::from_descriptor(a.descriptor(ModelMode::I2V), mode);
    REQUIRE(mode == ModelMode::I2V);
    REQUIRE(back == a);
    REQUIRE_THROWS(ArchConfig::from_descriptor("channels=4\n", mode));
}

TEST_CASE("freshly initialized model predicts exactly zero", "[model]") {
    ArchConfig a = tiny_arch();
    VelocityModel<float> m(a, ModelMode::T2V, 11);
    Rng rng(5);
    VideoF x = rng.normal_video<float>(a.frames, a.data_channels, a.height, a.width);
    VideoF v = m.velocity(x, nullptr, 0.5, CondLabel::of(1));
    for (float e : v.data) REQUIRE(e == 0.0f);  // output conv starts as the zero map
}

TEST_CASE("forward is deterministic and validates its inputs", "[model]") {
    ArchConfig a = tiny_arch();
    VelocityModel<float> m(a, ModelMode::I2V, 3);
    randomize_params(m, 77);
    VelocityModel<float> m2(a, ModelMode::I2V, 3);
    randomize_params(m2, 77);

    Rng rng(9);
    VideoF x = rng.normal_video<float>(a.frames, a.data_channels, a.height, a.width);
    VideoF img = rng.normal_video<float>(1, a.data_channels, a.height, a.width);
    VideoF v1 = m.velocity(x, &img, 0.3, CondLabel::of(2));
    VideoF v2 = m2.velocity(x, &img, 0.3, CondLabel::of(2));
    REQUIRE(v1.data == v2.data);
    REQUIRE(v1.f == a.frames);
    REQUIRE(v1.c == a.data_channels);

    VideoF bad(a.frames, a.data_channels, a.height + 1, a.width);
    REQUIRE_THROWS_AS(m.velocity(bad, &img, 0.3, CondLabel::of(0)), std::invalid_argument);
    REQUIRE_THROWS_AS(m.velocity(x, nullptr, 0.3, CondLabel::of(0)), std::invalid_argument);
    VideoF bad_img(1, a.data_channels, a.height, a.width + 2);
    REQUIRE_THROWS_AS(m.velocity(x, &bad_img, 0.3, CondLabel::of(0)), std::invalid_argument);
    REQUIRE_THROWS_AS(m.velocity(x, &img, -0.1, CondLabel::of(0)), std::invalid_argument);
    REQUIRE_THROWS_AS(m.velocity(x, &img, 0.3, CondLabel::of(99)), std::invalid_argument);

    VelocityModel<float> t2v(a, ModelMode::T2V, 3);
    REQUIRE_THROWS_AS(t2v.velocity(x, &img, 0.3, CondLabel::of(0)), std::invalid_argument);
}

TEST_CASE("conditioning changes the prediction", "[model]") {
    ArchConfig a = tiny_arch();
    VelocityModel<float> m(a, ModelMode::T2V, 21);
    randomize_params(m, 100);
    Rng rng(4);
    VideoF x = rng.normal_video<float>(a.frames, a.data_channels, a.height, a.width);
    VideoF vc = m.velocity(x, nullptr, 0.4, CondLabel::of(0));
    VideoF vn = m.velocity(x, nullptr, 0.4, CondLabel::null_label());
    VideoF vt = m.velocity(x, nullptr, 0.8, CondLabel::of(0));
    REQUIRE(max_abs_diff(vc, vn) > 0.0);
    REQUIRE(max_abs_diff(vc, vt) > 0.0);
}

TEST_CASE("feature capture exposes one frame of hidden activations", "[model]") {
    ArchConfig a = tiny_arch();
    VelocityModel<float> m(a, ModelMode::T2V, 8);
    Rng rng(2);
    VideoF x = rng.normal_video<float>(a.frames, a.data_channels, a.height, a.width);

    Eigen::MatrixXd f = m.features(x, nullptr, 0.5, CondLabel::of(1), 1, 2);
    REQUIRE(f.rows() == a.height * a.width);
    REQUIRE(f.cols() == a.channels);
    REQUIRE_THROWS_AS(m.features(x, nullptr, 0.5, CondLabel::of(1), a.blocks, 0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(m.features(x, nullptr, 0.5, CondLabel::of(1), 0, a.frames),
                      std::invalid_argument);

    // A model with all-zero parameters has all-zero hidden state.
    VelocityModel<float> z(a, ModelMode::T2V, 8);
    for (auto& p : z.params()) std::fill(p.value.begin(), p.value.end(), 0.0f);
    Eigen::MatrixXd fz = z.features(x, nullptr, 0.5, CondLabel::of(1), 2, 0);
    REQUIRE(fz.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flow-matching loss has the closed-form extremes", "[train]") {
    VideoF x1(4, 1, 8, 8);
    x1.data[13] = 1.0f;  // one-hot target difference
    VideoF x0 = VideoF::zeros_like(x1);
    const VideoF* no_img = nullptr;

    // A perfect scripted predictor drives the loss to zero.
    ScriptedEvaluator<float> perfect(
        [&](const VideoF& x, const VideoF*, double, CondLabel) {
            VideoF v = VideoF::zeros_like(x);
            v.data[13] = 1.0f;
            return v;
        },
        ModelMode::T2V);
    REQUIRE(fm_loss(perfect, x1, no_img, CondLabel::of(0), 0.25, x0) == 0.0);

    // The zero predictor pays exactly |x1-x0|^2 / N.
    ScriptedEvaluator<float> zero(
        [](const VideoF& x, const VideoF*, double, CondLabel) { return VideoF::zeros_like(x); },
        ModelMode::T2V);
    double expect = 1.0 / static_cast<double>(x1.size());
    REQUIRE(fm_loss(zero, x1, no_img, CondLabel::of(0), 0.25, x0) ==
            Catch::Approx(expect).epsilon(1e-12));

    VideoF wrong(4, 1, 8, 9);
    REQUIRE_THROWS_AS(fm_loss(zero, x1, no_img, CondLabel::of(0), 1.5, x0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(fm_loss(zero, wrong, no_img, CondLabel::of(0), 0.5, x0),
                      std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences", "[train]") {
    ArchConfig a = tiny_arch();
    VelocityModel<double> m(a, ModelMode::I2V, 17);
    randomize_params(m, 41, 0.05);

    Rng rng(123);
    VideoD x0 = rng.normal_video<double>(a.frames, a.data_channels, a.height, a.width);
    VideoD x1 = rng.normal_video<double>(a.frames, a.data_channels, a.height, a.width);
    VideoD img = rng.normal_video<double>(1, a.data_channels, a.height, a.width);

    // Composite loss covering a class row, the null row and two times.
    auto loss_at = [&](VelocityModel<double>& model) {
        return fm_loss(model, x1, &img, CondLabel::of(1), 0.37, x0) +
               fm_loss(model, x1, &img, CondLabel::null_label(), 0.81, x0);
    };
    detail::ModelTape<double> tape;
    m.zero_grad();
    fm_loss_grad(m, x1, &img, CondLabel::of(1), 0.37, x0, tape);
    fm_loss_grad(m, x1, &img, CondLabel::null_label(), 0.81, x0, tape);

    // 32 coordinates spread over every parameter tensor.
    Rng pick(777);
    std::vector<std::pair<size_t, size_t>> coords;
    const auto& ps = m.params();
    for (size_t pi = 0; pi < ps.size(); ++pi)
        coords.emplace_back(pi, static_cast<size_t>(pick.uniform_int(
                                    static_cast<int>(ps[pi].count()))));
    while (coords.size() < 32)
        coords.emplace_back(pick.uniform_int(static_cast<int>(ps.size())), 0);
    coords.resize(32);

    const double h = 1e-4;
    for (auto [pi, vi] : coords) {
        auto& p = m.params()[pi];
        vi = std::min(vi, p.count() - 1);
        double saved = p.value[vi];
        p.value[vi] = saved + h;
        double lp = loss_at(m);
        p.value[vi] = saved - h;
        double lm = loss_at(m);
        p.value[vi] = saved;
        double fd = (lp - lm) / (2 * h);
        double an = p.grad[vi];
        double rel = std::abs(fd - an) / std::max({1e-8, std::abs(fd), std::abs(an)});
        INFO(p.name << "[" << vi << "] fd=" << fd << " an=" << an);
        REQUIRE(rel < 1e-3);
    }
}

TEST_CASE("gradients accumulate and zero_grad clears them", "[train]") {
    ArchConfig a = tiny_arch();
    VelocityModel<double> m(a, ModelMode::T2V, 5);
    randomize_params(m, 52);
    Rng rng(6);
    VideoD x0 = rng.normal_video<double>(a.frames, a.data_channels, a.height, a.width);
    VideoD x1 = rng.normal_video<double>(a.frames, a.data_channels, a.height, a.width);

    const VideoD* no_img = nullptr;
    detail::ModelTape<double> tape;
    m.zero_grad();
    fm_loss_grad(m, x1, no_img, CondLabel::of(0), 0.5, x0, tape);
    std::vector<double> once = m.param("conv_in.w").grad;
    fm_loss_grad(m, x1, no_img, CondLabel::of(0), 0.5, x0, tape);
    const auto& twice = m.param("conv_in.w").grad;
    for (size_t i = 0; i < once.size(); ++i)
        REQUIRE(twice[i] == Catch::Approx(2 * once[i]).margin(1e-12));
    m.zero_grad();
    for (double g : m.param("conv_in.w").grad) REQUIRE(g == 0.0);

    // grad_scale scales linearly.
    fm_loss_grad(m, x1, no_img, CondLabel::of(0), 0.5, x0, tape, 0.25);
    const auto& quarter = m.param("conv_in.w").grad;
    for (size_t i = 0; i < once.size(); ++i)
        REQUIRE(quarter[i] == Catch::Approx(0.25 * once[i]).margin(1e-12));
}

TEST_CASE("training is reproducible bit for bit", "[train]") {
    auto dataset = build_dataset(8, 3);
    ArchConfig a = small_data_arch();
    TrainConfig cfg;
    cfg.steps = 3;
    cfg.batch_size = 2;
    cfg.seed = 42;

    TrainStats s1, s2;
    auto m1 = train_t2v<float>(dataset, cfg, a, &s1);
    auto m2 = train_t2v<float>(dataset, cfg, a, &s2);
    REQUIRE(s1.loss_curve == s2.loss_curve);
    REQUIRE(s1.loss_curve.size() == 3);
    for (size_t i = 0; i < m1.params().size(); ++i)
        REQUIRE(m1.params()[i].value == m2.params()[i].value);

    cfg.seed = 43;
    auto m3 = train_t2v<float>(dataset, cfg, a);
    bool any_diff = false;
    for (size_t i = 0; i < m1.params().size(); ++i)
        if (m1.params()[i].value != m3.params()[i].value) any_diff = true;
    REQUIRE(any_diff);
}

TEST_CASE("zero training steps leave the initialization untouched", "[train]") {
    auto dataset = build_dataset(4, 3);
    ArchConfig a = small_data_arch();
    TrainConfig cfg;
    cfg.steps = 0;
    cfg.seed = 9;
    auto trained = train_t2v<float>(dataset, cfg, a);
    VelocityModel<float> fresh(a, ModelMode::T2V, 9);
    for (size_t i = 0; i < fresh.params().size(); ++i)
        REQUIRE(trained.params()[i].value == fresh.params()[i].value);
}

TEST_CASE("short training run reduces the loss", "[train]") {
    auto dataset = build_dataset(4, 1);
    ArchConfig a = small_data_arch();
    TrainConfig cfg;
    cfg.steps = 80;
    cfg.batch_size = 8;
    cfg.seed = 2;
    TrainStats stats;
    train_t2v<float>(dataset, cfg, a, &stats);
    double head = 0, tail = 0;
    for (int i = 0; i < 10; ++i) {
        head += stats.loss_curve[i];
        tail += stats.loss_curve[cfg.steps - 10 + i];
    }
    REQUIRE(tail < 0.7 * head);
}

TEST_CASE("inflated I2V model reproduces its T2V parent exactly", "[train]") {
    ArchConfig a = small_data_arch();
    auto dataset = build_dataset(4, 5);
    TrainConfig cfg;
    cfg.steps = 10;
    cfg.batch_size = 4;
    cfg.seed = 31;
    auto t2v = train_t2v<float>(dataset, cfg, a);
    auto i2v = VelocityModel<float>::inflate_to_i2v(t2v);
    REQUIRE(i2v.mode() == ModelMode::I2V);

    Rng rng(77);
    VideoF x = rng.normal_video<float>(a.frames, a.data_channels, a.height, a.width);
    VideoF img = rng.normal_video<float>(1, a.data_channels, a.height, a.width);
    for (double t : {0.0, 0.25, 0.9}) {
        VideoF vt = t2v.velocity(x, nullptr, t, CondLabel::of(3));
        VideoF vi = i2v.velocity(x, &img, t, CondLabel::of(3));
        REQUIRE(max_abs_diff(vt, vi) == 0.0);
    }
    VideoF vtn = t2v.velocity(x, nullptr, 0.5, CondLabel::null_label());
    VideoF vin = i2v.velocity(x, &img, 0.5, CondLabel::null_label());
    REQUIRE(max_abs_diff(vtn, vin) == 0.0);

    REQUIRE_THROWS_AS(VelocityModel<float>::inflate_to_i2v(i2v), std::invalid_argument);
}

TEST_CASE("finetuning makes the conditioning image matter", "[train]") {
    ArchConfig a = small_data_arch();
    auto dataset = build_dataset(8, 5);
    TrainConfig cfg;
    cfg.steps = 15;
    cfg.batch_size = 4;
    cfg.seed = 13;
    auto t2v = train_t2v<float>(dataset, cfg, a);
    auto i2v = finetune_i2v(t2v, dataset, cfg);

    Rng rng(88);
    VideoF x = rng.normal_video<float>(a.frames, a.data_channels, a.height, a.width);
    VideoF img_a = dataset[0].video.frame(0);
    VideoF img_b = dataset[1].video.frame(0);
    VideoF va = i2v.velocity(x, &img_a, 0.5, CondLabel::of(0));
    VideoF vb = i2v.velocity(x, &img_b, 0.5, CondLabel::of(0));
    REQUIRE(max_abs_diff(va, vb) > 0.0);
}
