#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hoi/acp.hpp"
#include "hoi/rng.hpp"

using namespace hoi;

namespace {

Image flat_image(int w, int h, float r, float g, float b) {
    Image img(3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(0, y, x) = r;
            img.at(1, y, x) = g;
            img.at(2, y, x) = b;
        }
    return img;
}

Image random_image(int w, int h, Rng& rng) {
    Image img(3, h, w);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

const std::vector<float> kFill{0.25f, 0.5f, 0.75f};

FrameDetections frame_with_hand(bool contact, double score, double hand_side_px = 30) {
    FrameDetections fd;
    fd.video_id = "v";
    fd.frame_idx = 0;
    fd.width = 456;
    fd.height = 256;
    Detection obj;
    obj.kind = DetKind::object;
    obj.box = {200, 60, 280, 140};
    obj.score = 0.95;
    fd.detections.push_back(obj);
    Detection hand;
    hand.kind = DetKind::hand;
    hand.box = {220, 130, 220 + hand_side_px, 130 + hand_side_px};
    hand.score = score;
    hand.contact = contact;
    hand.grasp_scores = std::vector<double>{0.9, 0.1, 0.2, 0.3, 0.1, 0.2, 0.1, 0.4};
    fd.detections.push_back(hand);
    return fd;
}

}  // namespace

TEST_CASE("training patch sampling follows the scale and filter rules") {
    AcpConfig cfg;
    SUBCASE("contact hand yields a positive with side in [1.0,1.3]x") {
        Rng rng(1);
        auto patches = sample_training_patches(frame_with_hand(true, 0.9), cfg, rng);
        bool found = false;
        for (const auto& p : patches)
            if (p.role == PatchRole::hand_pos) {
                found = true;
                CHECK(p.side >= 30.0);
                CHECK(p.side <= 39.0 + 1e-9);
                CHECK(p.cx == doctest::Approx(235.0));
            }
        CHECK(found);
    }
    SUBCASE("non-contact hands yield no hand positives") {
        Rng rng(2);
        for (const auto& p : sample_training_patches(frame_with_hand(false, 0.9), cfg, rng))
            CHECK(p.role != PatchRole::hand_pos);
    }
    SUBCASE("low-confidence detections are skipped") {
        Rng rng(3);
        auto patches = sample_training_patches(frame_with_hand(true, 0.5), cfg, rng);
        for (const auto& p : patches) CHECK(p.role != PatchRole::hand_pos);
    }
    SUBCASE("object positives lie inside the object box") {
        Rng rng(4);
        auto patches = sample_training_patches(frame_with_hand(true, 0.9), cfg, rng);
        bool found = false;
        for (const auto& p : patches)
            if (p.role == PatchRole::object_pos) {
                found = true;
                const BBox r = p.rect();
                CHECK(r.x1 >= 200.0 - 1e-9);
                CHECK(r.x2 <= 280.0 + 1e-9);
                CHECK(p.side >= 0.5 * 80 - 1e-9);
                CHECK(p.side <= 0.75 * 80 + 1e-9);
            }
        CHECK(found);
        bool neg = false;
        for (const auto& p : patches) neg = neg || p.role == PatchRole::negative;
        CHECK(neg);
    }
    SUBCASE("seeded runs are identical") {
        Rng r1(5), r2(5);
        auto a = sample_training_patches(frame_with_hand(true, 0.9), cfg, r1);
        auto b = sample_training_patches(frame_with_hand(true, 0.9), cfg, r2);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].cx == b[i].cx);
            CHECK(a[i].side == b[i].side);
        }
    }
    SUBCASE("contact filtering ablation admits relaxed hands") {
        AcpConfig ab = cfg;
        ab.ablations.no_contact_filtering = true;
        Rng rng(6);
        bool found = false;
        for (const auto& p : sample_training_patches(frame_with_hand(false, 0.9), ab, rng))
            found = found || p.role == PatchRole::hand_pos;
        CHECK(found);
    }
}

TEST_CASE("make_context geometry and masking") {
    AcpConfig cfg;
    Rng rng(7);
    Image img = random_image(400, 300, rng);

    SUBCASE("interior patch masks the bottom-center 64x64 exactly") {
        PatchSpec p{200, 150, 60, PatchRole::hand_pos};
        ContextSample cs = make_context(img, p, {}, kFill, cfg);
        CHECK(cs.mask_x == 32);
        CHECK(cs.mask_y == 64);
        CHECK(cs.mask_w == 64);
        CHECK(cs.mask_h == 64);
        for (int ch = 0; ch < 3; ++ch)
            for (int y = cs.mask_y; y < cs.mask_y + cs.mask_h; ++y)
                for (int x = cs.mask_x; x < cs.mask_x + cs.mask_w; ++x)
                    CHECK(cs.input.at(ch, y, x) == kFill[ch]);
        // outside the mask, pixels come from the image, not the fill
        bool any_unfilled = false;
        for (int y = 0; y < cs.mask_y && !any_unfilled; ++y)
            for (int x = 0; x < 128; ++x)
                if (cs.input.at(0, y, x) != kFill[0]) {
                    any_unfilled = true;
                    break;
                }
        CHECK(any_unfilled);
    }
    SUBCASE("border patches keep the mask at the patch's true location") {
        // patch fully inside the image, context clamped at the left edge
        PatchSpec p{25, 280, 40, PatchRole::hand_pos};
        ContextSample cs = make_context(img, p, {}, kFill, cfg);
        // context shifted into the image; mask no longer at the nominal spot
        CHECK(cs.mask_x < 32);
        CHECK(cs.mask_w == 64);
        for (int ch = 0; ch < 3; ++ch)
            for (int y = cs.mask_y; y < cs.mask_y + cs.mask_h; ++y)
                for (int x = cs.mask_x; x < cs.mask_x + cs.mask_w; ++x)
                    CHECK(cs.input.at(ch, y, x) == kFill[ch]);
    }
    SUBCASE("symmetric-context ablation centers the mask") {
        AcpConfig sym = cfg;
        sym.ablations.symmetric_context = true;
        PatchSpec p{200, 150, 60, PatchRole::hand_pos};
        ContextSample cs = make_context(img, p, {}, kFill, sym);
        CHECK(cs.mask_x == 32);
        CHECK(cs.mask_y == 32);
    }
    SUBCASE("no_hand_hiding skips the fill") {
        AcpConfig ab = cfg;
        ab.ablations.no_hand_hiding = true;
        PatchSpec p{200, 150, 60, PatchRole::hand_pos};
        ContextSample cs = make_context(img, p, {}, kFill, ab);
        bool any_unfilled = false;
        for (int y = 64; y < 128 && !any_unfilled; ++y)
            for (int x = 32; x < 96; ++x)
                if (cs.input.at(0, y, x) != kFill[0]) any_unfilled = true;
        CHECK(any_unfilled);
    }
    SUBCASE("zero-area patch rejected") {
        PatchSpec p{100, 100, 0, PatchRole::negative};
        CHECK_THROWS(make_context(img, p, {}, kFill, cfg));
    }
}

TEST_CASE("segmentation targets from pasted boxes") {
    AcpConfig cfg;
    Image img = flat_image(400, 300, 0.3f, 0.3f, 0.3f);
    PatchSpec p{200, 150, 64, PatchRole::hand_pos};  // patch rect [168,232) x [118,182)

    SUBCASE("box covering the whole masked region -> all ones") {
        ContextSample cs = make_context(img, p, {BBox{100, 100, 300, 250}}, kFill, cfg);
        for (float v : cs.seg_target.data) CHECK(v == 1.f);
    }
    SUBCASE("no intersecting box -> all zeros") {
        ContextSample cs = make_context(img, p, {BBox{0, 0, 50, 50}}, kFill, cfg);
        for (float v : cs.seg_target.data) CHECK(v == 0.f);
    }
    SUBCASE("box covering exactly the left half") {
        // patch x range [168, 232); left half ends at 200
        ContextSample cs = make_context(img, p, {BBox{0, 0, 200, 300}}, kFill, cfg);
        // direct full-resolution rasterization oracle, downsampled
        int mismatches = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const float want = x < 32 ? 1.f : 0.f;
                if (cs.seg_target.at(0, y, x) != want) ++mismatches;
            }
        CHECK(mismatches == 0);
    }
}

TEST_CASE("grasp target selection") {
    SUBCASE("small taxonomy clamps the negative count") {
        auto labels = grasp_targets({0.1, 0.9, 0.3, 0.2, 0.5, 0.4, 0.6, 0.7}, 15);
        int pos = 0, neg = 0, ign = 0;
        for (auto l : labels) (l == 1 ? pos : l == 0 ? neg : ign)++;
        CHECK(pos == 1);
        CHECK(neg == 7);
        CHECK(ign == 0);
        CHECK(labels[1] == 1);
    }
    SUBCASE("33-way taxonomy keeps 15 negatives and 17 ignores") {
        std::vector<double> scores;
        for (int i = 0; i < 33; ++i) scores.push_back(0.01 * i);
        auto labels = grasp_targets(scores, 15);
        int pos = 0, neg = 0, ign = 0;
        for (auto l : labels) (l == 1 ? pos : l == 0 ? neg : ign)++;
        CHECK(pos == 1);
        CHECK(neg == 15);
        CHECK(ign == 17);
        CHECK(labels[32] == 1);   // argmax
        CHECK(labels[0] == 0);    // lowest scores become negatives
        CHECK(labels[14] == 0);
        CHECK(labels[15] == -1);
    }
    SUBCASE("ties go to the lowest index") {
        auto labels = grasp_targets({0.5, 0.5, 0.5, 0.5}, 2);
        CHECK(labels[0] == 1);
        CHECK(labels[1] == 0);
        CHECK(labels[2] == 0);
        CHECK(labels[3] == -1);
    }
    SUBCASE("non-finite scores rejected") {
        CHECK_THROWS(grasp_targets({0.1, std::nan("")}, 2));
        CHECK_THROWS(grasp_targets({0.5}, 2));
    }
}

TEST_CASE("acp loss values") {
    AcpConfig cfg;
    Image zeros_target(1, 64, 64, 0.f);
    Image ones_target(1, 64, 64, 1.f);
    std::vector<float> zero_logits(64 * 64, 0.f);

    SUBCASE("zero logits, zero target -> ln 2") {
        CHECK(acp_loss(zero_logits, zeros_target, {}, {}, cfg) ==
              doctest::Approx(std::log(2.0)).epsilon(1e-6));
    }
    SUBCASE("zero logits, all-one target -> 4 ln 2") {
        CHECK(acp_loss(zero_logits, ones_target, {}, {}, cfg) ==
              doctest::Approx(4 * std::log(2.0)).epsilon(1e-6));
    }
    SUBCASE("confident correct logits -> loss below 1e-3") {
        std::vector<float> sharp(64 * 64, -20.f);
        CHECK(acp_loss(sharp, zeros_target, {}, {}, cfg) < 1e-3);
        std::vector<float> sharp_pos(64 * 64, 20.f);
        CHECK(acp_loss(sharp_pos, ones_target, {}, {}, cfg) < 1e-3);
    }
    SUBCASE("grasp term weighted by 0.5 and averaged over used classes") {
        std::vector<float> glogits{0.f, 0.f, 0.f, 0.f};
        std::vector<int8_t> gtarget{1, 0, -1, -1};
        const double expected = std::log(2.0) + 0.5 * std::log(2.0);
        CHECK(acp_loss(zero_logits, zeros_target, glogits, gtarget, cfg) ==
              doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("heatmap inference with stub predictors") {
    AcpConfig cfg;
    cfg.smooth_sigma = 0;  // keep raw pastes for geometry checks
    NormStats norm;
    norm.mean = {0.25f, 0.5f, 0.75f};
    Image img = flat_image(120, 80, 0.4f, 0.4f, 0.4f);
    const int G = 2;

    auto constant_runner = [&](double c) {
        return [c, G](const std::vector<Image>& contexts) {
            std::vector<AcpPrediction> out(contexts.size());
            for (auto& p : out) {
                p.seg_prob = Image(1, 64, 64, static_cast<float>(c));
                p.grasp_prob.assign(G, c);
            }
            return out;
        };
    };

    SUBCASE("constant stub gives a constant heatmap over covered pixels") {
        cfg.infer_context_sides = {40};
        cfg.infer_ref_width = 120;  // contexts of 40px on the 120px image
        cfg.infer_patches_per_side = 60;
        Heatmaps maps = infer_heatmaps_with(img, constant_runner(0.7), G, norm, cfg);
        for (size_t i = 0; i < maps.roi.data.size(); ++i) {
            if (maps.coverage.data[i] > 0)
                CHECK(maps.roi.data[i] == doctest::Approx(0.7).epsilon(1e-6));
            else
                CHECK(maps.roi.data[i] == 0.f);
        }
    }
    SUBCASE("a single patch covers exactly its masked footprint") {
        cfg.infer_context_sides = {40};
        cfg.infer_ref_width = 120;
        cfg.infer_patches_per_side = 1;
        Heatmaps maps = infer_heatmaps_with(img, constant_runner(1.0), G, norm, cfg);
        // one 40px context centered: patch side 20, bottom-center
        size_t covered = 0;
        for (float v : maps.coverage.data) covered += v > 0 ? 1 : 0;
        CHECK(covered == 20u * 20u);
    }
    SUBCASE("two overlapping patches average their predictions") {
        // tall image, 3 vertically stacked patches with alternating stub
        // outputs 0.2/0.6: every doubly covered pixel averages to 0.4
        Image tall = flat_image(60, 120, 0.4f, 0.4f, 0.4f);
        cfg.infer_context_sides = {80};
        cfg.infer_ref_width = 60;
        cfg.infer_patches_per_side = 3;
        int call_idx = 0;
        AcpRunner runner = [&](const std::vector<Image>& contexts) {
            std::vector<AcpPrediction> out(contexts.size());
            for (auto& p : out) {
                const double c = call_idx++ % 2 == 0 ? 0.2 : 0.6;
                p.seg_prob = Image(1, 64, 64, static_cast<float>(c));
                p.grasp_prob.assign(G, c);
            }
            return out;
        };
        Heatmaps maps = infer_heatmaps_with(tall, runner, G, norm, cfg);
        size_t overlap_pixels = 0;
        for (size_t i = 0; i < maps.roi.data.size(); ++i)
            if (maps.coverage.data[i] == 2.f) {
                ++overlap_pixels;
                CHECK(maps.roi.data[i] == doctest::Approx(0.4).epsilon(1e-6));
                CHECK(maps.grasps[0].data[i] == doctest::Approx(0.4).epsilon(1e-6));
            }
        CHECK(overlap_pixels > 0);
    }
    SUBCASE("side enumeration order does not change the result") {
        cfg.infer_patches_per_side = 12;
        cfg.infer_ref_width = 120;
        cfg.infer_context_sides = {24, 48};
        Heatmaps a = infer_heatmaps_with(img, constant_runner(0.3), G, norm, cfg);
        cfg.infer_context_sides = {48, 24};
        Heatmaps b = infer_heatmaps_with(img, constant_runner(0.3), G, norm, cfg);
        CHECK(a.roi.data == b.roi.data);
        CHECK(a.grasps[1].data == b.grasps[1].data);
    }
    SUBCASE("no patches is an error") {
        cfg.infer_context_sides = {};
        CHECK_THROWS(infer_heatmaps_with(img, constant_runner(0.5), G, norm, cfg));
    }
}

TEST_CASE("combine heatmaps") {
    Image a(1, 4, 4, 0.9f), b(1, 4, 4, 0.3f);
    SUBCASE("w=1 returns the external map") {
        CHECK(combine_heatmaps(a, b, 1.0).data == a.data);
    }
    SUBCASE("w=0 returns the model map") {
        CHECK(combine_heatmaps(a, b, 0.0).data == b.data);
    }
    SUBCASE("w=2/3 blends per the convex combination") {
        Image c = combine_heatmaps(a, b, 2.0 / 3.0);
        for (float v : c.data) CHECK(v == doctest::Approx(0.7).epsilon(1e-6));
    }
    SUBCASE("range preserved for inputs in [0,1]") {
        Rng rng(8);
        Image x(1, 8, 8), y(1, 8, 8);
        for (auto& v : x.data) v = static_cast<float>(rng.uniform());
        for (auto& v : y.data) v = static_cast<float>(rng.uniform());
        Image c = combine_heatmaps(x, y, 0.37);
        for (float v : c.data) {
            CHECK(v >= 0.f);
            CHECK(v <= 1.f);
        }
    }
    SUBCASE("shape mismatch rejected") {
        Image small(1, 2, 2, 0.f);
        CHECK_THROWS(combine_heatmaps(a, small, 0.5));
    }
}

TEST_CASE("masking blindness at the sample level") {
    AcpConfig cfg;
    Rng rng(9);
    Image img = random_image(300, 200, rng);
    PatchSpec p{150, 100, 50, PatchRole::hand_pos};

    // tamper the patch interior; a 3px margin keeps bilinear taps of
    // outside-the-mask context pixels away from tampered content
    Image tampered = img;
    const BBox pr = p.rect();
    for (int y = static_cast<int>(pr.y1) + 3; y < static_cast<int>(pr.y2) - 3; ++y)
        for (int x = static_cast<int>(pr.x1) + 3; x < static_cast<int>(pr.x2) - 3; ++x)
            for (int c = 0; c < 3; ++c) tampered.at(c, y, x) = static_cast<float>(rng.uniform());

    ContextSample a = make_context(img, p, {}, kFill, cfg);
    ContextSample b = make_context(tampered, p, {}, kFill, cfg);
    CHECK(a.input.data == b.input.data);

    AcpConfig no_mask = cfg;
    no_mask.ablations.no_hand_hiding = true;
    ContextSample c = make_context(img, p, {}, kFill, no_mask);
    ContextSample d = make_context(tampered, p, {}, kFill, no_mask);
    CHECK(c.input.data != d.input.data);  // negative control
}
