#include <catch2/catch_amalgamated.hpp>

#include "alg/metrics.hpp"
#include "alg/rng.hpp"
#include "alg/synthetic.hpp"
#include "oracles.hpp"

using namespace alg;

namespace {

// Toroidal roll of a single frame by (dy, dx).
VideoF rolled(const VideoF& a, int dy, int dx) {
    VideoF b = VideoF::zeros_like(a);
    for (int ci = 0; ci < a.c; ++ci)
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < a.w; ++x)
                b.at(0, ci, ((y + dy) % a.h + a.h) % a.h, ((x + dx) % a.w + a.w) % a.w) =
                    a.at(0, ci, y, x);
    return b;
}

VideoF random_frame(Rng& rng, int h = 16, int w = 16) {
    return rng.normal_video<float>(1, 1, h, w);
}

}  // namespace

TEST_CASE("block matching reports zero motion for identical frames", "[metrics]") {
    Rng rng(1);
    VideoF a = random_frame(rng);
    BlockFlow bf = block_flow(a, a, 4);
    REQUIRE(bf.blocks_y == 4);
    REQUIRE(bf.blocks_x == 4);
    REQUIRE(bf.dy.size() == 16);
    for (size_t i = 0; i < bf.dy.size(); ++i) {
        REQUIRE(bf.dy[i] == 0);
        REQUIRE(bf.dx[i] == 0);
        REQUIRE(bf.mag[i] == 0.0);
    }
}

TEST_CASE("block matching recovers every toroidal shift exactly", "[metrics]") {
    Rng rng(2);
    VideoF a = random_frame(rng);
    for (int dy = -4; dy <= 4; ++dy)
        for (int dx = -4; dx <= 4; ++dx) {
            VideoF b = rolled(a, dy, dx);
            BlockFlow bf = block_flow(a, b, 4);
            for (size_t i = 0; i < bf.dy.size(); ++i) {
                REQUIRE(bf.dy[i] == dy);
                REQUIRE(bf.dx[i] == dx);
            }
        }
    // The documented example: 2 px East.
    VideoF east = rolled(a, 0, 2);
    BlockFlow bf = block_flow(a, east, 4);
    for (size_t i = 0; i < bf.dy.size(); ++i) {
        REQUIRE(bf.dy[i] == 0);
        REQUIRE(bf.dx[i] == 2);
    }
}

TEST_CASE("block matching magnitudes stay inside the search square", "[metrics]") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        VideoF a = random_frame(rng);
        VideoF b = random_frame(rng);
        BlockFlow bf = block_flow(a, b, 3);
        for (double m : bf.mag) REQUIRE(m <= 3.0 * std::sqrt(2.0) + 1e-12);
    }
    VideoF a = random_frame(rng);
    REQUIRE_THROWS_AS(block_flow(a, a, 0), std::invalid_argument);
    VideoF small(1, 1, 2, 2);
    REQUIRE_THROWS_AS(block_flow(small, small, 2), std::invalid_argument);
    VideoF other(1, 1, 16, 12);
    REQUIRE_THROWS_AS(block_flow(a, other, 2), std::invalid_argument);
}

TEST_CASE("block matching agrees with the sort-based reference", "[metrics]") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        VideoF a = random_frame(rng);
        // Mix of independent noise and near-shift pairs to exercise ties.
        VideoF b = trial % 2 == 0 ? random_frame(rng) : rolled(a, trial % 5 - 2, trial % 3 - 1);
        BlockFlow bf = block_flow(a, b, 4);
        int i = 0;
        for (int by = 0; by < 4; ++by)
            for (int bx = 0; bx < 4; ++bx, ++i) {
                int ody, odx;
                oracle::block_flow(a, b, 4, by, bx, ody, odx);
                REQUIRE(bf.dy[i] == ody);
                REQUIRE(bf.dx[i] == odx);
            }
    }
}

TEST_CASE("motion score separates the generator's speed classes", "[metrics]") {
    ClipSpec cs;
    cs.shape = ShapeKind::Circle;
    cs.heading = 2;  // East: axis-aligned
    cs.radius = 3;
    cs.start_x = 5;
    cs.start_y = 7;

    cs.speed = 3;
    DynamicDegree fast = dynamic_degree(gen_clip(cs).video);
    REQUIRE(fast.interval_top.size() == 15);
    for (double v : fast.interval_top) REQUIRE(v == 3.0);
    REQUIRE(fast.mean_top_flow == 3.0);
    REQUIRE(fast.score == 1);

    cs.speed = 1;
    DynamicDegree slow = dynamic_degree(gen_clip(cs).video);
    for (double v : slow.interval_top) REQUIRE(v == 1.0);
    REQUIRE(slow.mean_top_flow == 1.0);
    REQUIRE(slow.score == 0);  // 1.0 < flow_threshold 1.5

    cs.speed = 0;
    DynamicDegree still = dynamic_degree(gen_clip(cs).video);
    REQUIRE(still.mean_top_flow == 0.0);
    REQUIRE(still.score == 0);

    VideoF one_frame(1, 1, 16, 16);
    REQUIRE_THROWS_AS(dynamic_degree(one_frame), std::invalid_argument);
    REQUIRE_THROWS_AS(dynamic_degree(gen_clip(cs).video, 1.5, 0.0), std::invalid_argument);
}

TEST_CASE("score is a pure threshold function of the flow statistic", "[metrics]") {
    ClipSpec cs;
    cs.heading = 4;  // South
    cs.speed = 3;
    cs.radius = 2;
    VideoF clip = gen_clip(cs).video;
    DynamicDegree base = dynamic_degree(clip);
    for (double flow_th : {0.5, 1.0, 2.9, 3.0, 3.1, 10.0}) {
        for (double frac_th : {0.1, 0.5, 1.0}) {
            DynamicDegree dd = dynamic_degree(clip, flow_th, frac_th);
            REQUIRE(dd.interval_top == base.interval_top);  // statistic unchanged
            int dyn = 0;
            for (double v : base.interval_top)
                if (v >= flow_th) ++dyn;
            int expect =
                (static_cast<double>(dyn) / base.interval_top.size() >= frac_th) ? 1 : 0;
            REQUIRE(dd.score == expect);
        }
    }
}

TEST_CASE("flicker has closed forms on constructed videos", "[metrics]") {
    VideoF stat(5, 1, 8, 8, 0.3f);
    REQUIRE(temporal_flicker(stat) == 0.0);

    VideoF alt(6, 1, 8, 8);
    for (int fi = 0; fi < 6; ++fi)
        for (size_t p = 0; p < alt.frame_size(); ++p)
            alt.data[fi * alt.frame_size() + p] = (fi % 2 == 0) ? 1.0f : -1.0f;
    REQUIRE(temporal_flicker(alt) == 2.0);

    VideoF one(1, 1, 8, 8);
    REQUIRE_THROWS_AS(temporal_flicker(one), std::invalid_argument);
}

TEST_CASE("first-frame fidelity converts error to decibels", "[metrics]") {
    ClipSpec cs;
    cs.speed = 1;
    VideoF clip = gen_clip(cs).video;
    VideoF img = clip.frame(0);

    Fidelity exact = first_frame_fidelity(clip, img);
    REQUIRE(exact.mse == 0.0);
    REQUIRE(std::isinf(exact.psnr_db));
    REQUIRE(exact.psnr_db > 0);

    VideoF shifted = clip;
    for (size_t p = 0; p < shifted.frame_size(); ++p) shifted.data[p] += 0.2f;
    Fidelity off = first_frame_fidelity(shifted, img);
    REQUIRE(off.mse == Catch::Approx(0.04).epsilon(1e-6));
    REQUIRE(off.psnr_db == Catch::Approx(20.0).epsilon(1e-6));

    VideoF bad(1, 1, 8, 8);
    REQUIRE_THROWS_AS(first_frame_fidelity(clip, bad), std::invalid_argument);
}

TEST_CASE("subject consistency rewards persistent content", "[metrics]") {
    ClipSpec cs;
    cs.speed = 0;
    cs.radius = 3;
    cs.start_x = 4;
    cs.start_y = 4;
    VideoF stat = gen_clip(cs).video;
    bool flagged = true;
    REQUIRE(subject_consistency_proxy(stat, &flagged) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE_FALSE(flagged);

    // Frame 1 = -frame 0: centered descriptors are opposite.
    VideoF pair(2, 1, 16, 16);
    Rng rng(5);
    VideoF noise = random_frame(rng);
    pair.set_frame(0, noise);
    VideoF neg = noise;
    for (auto& v : neg.data) v = -v;
    pair.set_frame(1, neg);
    REQUIRE(subject_consistency_proxy(pair) == Catch::Approx(-1.0).margin(1e-12));

    // Constant frames have zero descriptors: defined-as-one and flagged.
    VideoF flat(3, 1, 16, 16, 0.7f);
    REQUIRE(subject_consistency_proxy(flat, &flagged) == 1.0);
    REQUIRE(flagged);

    // One zero descriptor against a structured frame 0: defined as 0.
    VideoF half(2, 1, 16, 16, 0.0f);
    half.set_frame(0, noise);
    double v = subject_consistency_proxy(half, &flagged);
    REQUIRE(v == 0.0);
    REQUIRE(flagged);

    VideoF odd(2, 1, 10, 16);
    REQUIRE_THROWS_AS(subject_consistency_proxy(odd), std::invalid_argument);
}

TEST_CASE("every metric matches its naive reference on random clips", "[metrics]") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        VideoF clip = rng.normal_video<float>(16, 1, 16, 16);
        VideoF img = random_frame(rng);

        REQUIRE(temporal_flicker(clip) ==
                Catch::Approx(oracle::temporal_flicker(clip)).epsilon(1e-6));

        double omse = oracle::first_frame_mse(clip, img);
        Fidelity fid = first_frame_fidelity(clip, img);
        REQUIRE(fid.mse == Catch::Approx(omse).epsilon(1e-6));
        REQUIRE(fid.psnr_db == Catch::Approx(10.0 * std::log10(4.0 / omse)).epsilon(1e-6));

        REQUIRE(subject_consistency_proxy(clip) ==
                Catch::Approx(oracle::subject_consistency(clip)).margin(1e-6));

        // Dynamic degree from first principles via the reference matcher.
        DynamicDegree dd = dynamic_degree(clip);
        for (int fi = 0; fi + 1 < clip.f; ++fi) {
            std::vector<double> mags;
            for (int by = 0; by < 4; ++by)
                for (int bx = 0; bx < 4; ++bx) {
                    int ody, odx;
                    oracle::block_flow(clip.frame(fi), clip.frame(fi + 1), 4, by, bx, ody, odx);
                    mags.push_back(std::sqrt(static_cast<double>(ody) * ody +
                                             static_cast<double>(odx) * odx));
                }
            std::sort(mags.begin(), mags.end(), std::greater<double>());
            int top = static_cast<int>(std::ceil(0.05 * mags.size()));
            double mean_top = 0;
            for (int i = 0; i < top; ++i) mean_top += mags[i];
            mean_top /= top;
            REQUIRE(dd.interval_top[fi] == Catch::Approx(mean_top).margin(1e-6));
        }
    }
}

TEST_CASE("clip metrics bundle matches the pieces", "[metrics]") {
    ClipSpec cs;
    cs.heading = 2;
    cs.speed = 3;
    cs.radius = 3;
    VideoF clip = gen_clip(cs).video;
    VideoF img = clip.frame(0);

    ClipMetrics m = compute_clip_metrics(clip, &img);
    REQUIRE(m.dynamic_degree == 1.0);
    REQUIRE(m.mean_top_flow == 3.0);
    REQUIRE(m.temporal_flicker == Catch::Approx(temporal_flicker(clip)));
    REQUIRE(std::isinf(m.first_frame_psnr));
    REQUIRE(m.subject_consistency ==
            Catch::Approx(subject_consistency_proxy(clip)).margin(1e-12));

    ClipMetrics no_img = compute_clip_metrics(clip, (const VideoF*)nullptr);
    REQUIRE(std::isnan(no_img.first_frame_psnr));
}

TEST_CASE("aggregation computes population statistics", "[metrics]") {
    ClipMetrics a;
    a.dynamic_degree = 1;
    a.mean_top_flow = 1.0;
    a.temporal_flicker = 0.5;
    a.first_frame_psnr = 20.0;
    a.subject_consistency = 0.9;

    // A single row aggregates to itself with zero spread.
    MetricsReport solo = aggregate({a});
    REQUIRE(solo.mean_top_flow.mean == 1.0);
    REQUIRE(solo.mean_top_flow.sd == 0.0);
    REQUIRE(solo.mean_top_flow.count == 1);
    REQUIRE(solo.first_frame_psnr.mean == 20.0);
    REQUIRE(solo.psnr_inf_count == 0);

    ClipMetrics b = a;
    b.mean_top_flow = 3.0;
    MetricsReport pairrep = aggregate({a, b});
    REQUIRE(pairrep.mean_top_flow.mean == 2.0);
    REQUIRE(pairrep.mean_top_flow.sd == 1.0);

    ClipMetrics c = a;
    c.first_frame_psnr = std::numeric_limits<double>::infinity();
    MetricsReport mixed = aggregate({a, b, c});
    REQUIRE(mixed.psnr_inf_count == 1);
    REQUIRE(mixed.first_frame_psnr.mean == 20.0);  // sentinel excluded
    REQUIRE(mixed.first_frame_psnr.count == 2);
    REQUIRE(mixed.mean_top_flow.count == 3);

    REQUIRE_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("ground-truth speeds map to flow statistics monotonically", "[metrics]") {
    // Over the generator's class grid: speed-1 clips report 1.0, speed-3
    // axis-aligned 3.0 and speed-3 diagonal sqrt(18); all strictly above the
    // speed-1 value.
    for (int heading = 0; heading < 8; ++heading) {
        ClipSpec cs;
        cs.heading = heading;
        cs.radius = 3;
        cs.start_x = 3;
        cs.start_y = 11;
        bool diagonal = heading % 2 == 1;

        cs.speed = 1;
        double slow = dynamic_degree(gen_clip(cs).video).mean_top_flow;
        cs.speed = 3;
        double fast = dynamic_degree(gen_clip(cs).video).mean_top_flow;
        REQUIRE(slow == Catch::Approx(diagonal ? std::sqrt(2.0) : 1.0));
        REQUIRE(fast == Catch::Approx(diagonal ? std::sqrt(18.0) : 3.0));
        REQUIRE(fast > slow);
    }
}
