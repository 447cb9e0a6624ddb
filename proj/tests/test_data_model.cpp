#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "hoi/array_io.hpp"
#include "hoi/bbox.hpp"
#include "hoi/detections.hpp"
#include "hoi/rng.hpp"

using namespace hoi;

namespace {

BBox random_box(Rng& rng, double extent = 100.0) {
    const double x1 = rng.uniform(0, extent), y1 = rng.uniform(0, extent);
    return {x1, y1, x1 + rng.uniform(0.5, extent / 2), y1 + rng.uniform(0.5, extent / 2)};
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("iou closed-form examples") {
    BBox a{0, 0, 10, 10};
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, BBox{20, 20, 30, 30}) == 0.0);
    CHECK(iou(a, BBox{5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0));
    // touching edges share zero area
    CHECK(iou(a, BBox{10, 0, 20, 10}) == 0.0);
}

TEST_CASE("iou properties over random boxes") {
    Rng rng(42);
    for (int i = 0; i < 500; ++i) {
        BBox a = random_box(rng), b = random_box(rng);
        const double ab = iou(a, b);
        CHECK(ab == iou(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(iou(a, a) == doctest::Approx(1.0));
    }
}

TEST_CASE("iou rejects invalid boxes") {
    CHECK_THROWS(iou(BBox{0, 0, 0, 10}, BBox{0, 0, 1, 1}));
    CHECK_THROWS(iou(BBox{0, 0, 1, 1}, BBox{5, 5, 4, 6}));
}

TEST_CASE("parse: empty stream") {
    std::istringstream in("");
    auto r = parse_detections_jsonl(in);
    CHECK(r.videos.empty());
    CHECK(r.total_detections() == 0);
}

TEST_CASE("parse: single hand detection with grasp vector") {
    std::istringstream in(
        R"({"video_id":"a","frame_idx":0,"t":0.0,"w":100,"h":100,"dets":[)"
        R"({"kind":"hand","box":[10,10,30,30],"score":0.9,"contact":true,"side":"left",)"
        R"("grasp":[0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8],"obj_link":0}]})"
        "\n");
    auto r = parse_detections_jsonl(in);
    REQUIRE(r.videos.size() == 1);
    REQUIRE(r.videos[0].size() == 1);
    const auto& d = r.videos[0][0].detections.at(0);
    CHECK(d.kind == DetKind::hand);
    CHECK(*d.contact);
    CHECK(*d.side == HandSide::left);
    REQUIRE(d.grasp_scores);
    CHECK(d.grasp_scores->size() == 8);
    CHECK(*d.object_link == 0);
    CHECK(r.warnings == 0);
}

namespace {

std::string det_line(const std::string& vid, int frame, int n_dets) {
    std::ostringstream ss;
    ss << R"({"video_id":")" << vid << R"(","frame_idx":)" << frame << R"(,"t":)" << frame * 0.1
       << R"(,"w":200,"h":100,"dets":[)";
    for (int i = 0; i < n_dets; ++i) {
        if (i) ss << ",";
        ss << R"({"kind":"object","box":[)" << 10 + i << ",10," << 30 + i
           << R"(,40],"score":0.5})";
    }
    ss << "]}";
    return ss.str();
}

}  // namespace

TEST_CASE("parse: interleaved videos are grouped and counts preserved") {
    std::ostringstream stream;
    size_t expected = 0;  // independent line-by-line counter
    Rng rng(7);
    for (int f = 0; f < 20; ++f) {
        const int na = static_cast<int>(rng.uniform_int(4u));
        const int nb = static_cast<int>(rng.uniform_int(4u));
        stream << det_line("vid_a", f, na) << "\n" << det_line("vid_b", f, nb) << "\n";
        expected += na + nb;
    }
    std::istringstream in(stream.str());
    auto r = parse_detections_jsonl(in);
    REQUIRE(r.videos.size() == 2);
    CHECK(r.videos[0][0].video_id == "vid_a");
    CHECK(r.videos[1][0].video_id == "vid_b");
    CHECK(r.total_detections() == expected);
    for (const auto& video : r.videos)
        for (size_t i = 1; i < video.size(); ++i)
            CHECK(video[i].frame_idx > video[i - 1].frame_idx);
}

TEST_CASE("parse: malformed JSON names the line") {
    std::istringstream in(det_line("v", 0, 1) + "\nthis is not json\n");
    try {
        parse_detections_jsonl(in);
        FAIL("expected parse error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("parse: non-monotone frame_idx rejected") {
    std::istringstream in(det_line("v", 3, 1) + "\n" + det_line("v", 3, 1) + "\n");
    CHECK_THROWS(parse_detections_jsonl(in));
    std::istringstream in2(det_line("v", 3, 1) + "\n" + det_line("v", 2, 1) + "\n");
    CHECK_THROWS(parse_detections_jsonl(in2));
}

TEST_CASE("parse: malformed optional fields dropped with warnings") {
    // grasp on an object detection and contact on an object are invalid
    std::istringstream in(
        R"({"video_id":"v","frame_idx":0,"t":0,"w":100,"h":100,"dets":[)"
        R"({"kind":"object","box":[1,1,5,5],"score":0.5,"grasp":[0.1,0.2],"contact":true}]})"
        "\n");
    auto r = parse_detections_jsonl(in);
    CHECK(r.warnings == 2);
    const auto& d = r.videos[0][0].detections.at(0);
    CHECK_FALSE(d.grasp_scores);
    CHECK_FALSE(d.contact);
}

TEST_CASE("parse: boxes clamped or dropped at image bounds") {
    std::istringstream in(
        R"({"video_id":"v","frame_idx":0,"t":0,"w":100,"h":100,"dets":[)"
        R"({"kind":"object","box":[-10,-10,50,50],"score":0.5},)"
        R"({"kind":"object","box":[200,200,300,300],"score":0.5}]})"
        "\n");
    auto r = parse_detections_jsonl(in);
    REQUIRE(r.videos[0][0].detections.size() == 1);
    const auto& b = r.videos[0][0].detections[0].box;
    CHECK(b.x1 == 0.0);
    CHECK(b.y1 == 0.0);
    CHECK(r.warnings == 1);
}

TEST_CASE("parse-serialize-parse is a fixed point") {
    std::ostringstream stream;
    for (int f = 0; f < 5; ++f) stream << det_line("v", f, 2) << "\n";
    stream << R"({"video_id":"w","frame_idx":0,"t":0,"w":64,"h":64,"dets":[)"
           << R"({"kind":"hand","box":[1,2,9,12],"score":0.75,"contact":false,)"
           << R"("grasp":[0.5,0.25],"obj_link":3}]})"
           << "\n";
    std::istringstream in(stream.str());
    auto r1 = parse_detections_jsonl(in);
    std::ostringstream s1;
    serialize_detections_jsonl(r1, s1);
    std::istringstream in2(s1.str());
    auto r2 = parse_detections_jsonl(in2);
    std::ostringstream s2;
    serialize_detections_jsonl(r2, s2);
    CHECK(s1.str() == s2.str());
    CHECK(r2.total_detections() == r1.total_detections());
}

TEST_CASE("array file round trips") {
    const std::string path = temp_path("hoi_array_test.hpa");

    Array zeros;
    zeros.dims = {2, 3};
    zeros.data.assign(6, 0.f);
    write_array(path, zeros);
    Array z2 = read_array(path);
    CHECK(z2.dims == zeros.dims);
    CHECK(z2.data == zeros.data);

    Array scalar;
    scalar.dims = {1};
    scalar.data = {3.14f};
    write_array(path, scalar);
    CHECK(read_array(path).data[0] == 3.14f);

    Array rnd;
    rnd.dims = {4, 64, 64};
    Rng rng(9);
    for (size_t i = 0; i < 4 * 64 * 64; ++i)
        rnd.data.push_back(static_cast<float>(rng.uniform(-5, 5)));
    write_array(path, rnd);
    // byte arithmetic: magic + ndim + 3 dims + payload
    CHECK(std::filesystem::file_size(path) == 4u + 4u + 3u * 4u + 4u * 4u * 64u * 64u);
    Array r2 = read_array(path);
    CHECK(r2.dims == rnd.dims);
    CHECK(std::memcmp(r2.data.data(), rnd.data.data(), 4 * rnd.data.size()) == 0);
    std::filesystem::remove(path);
}

TEST_CASE("array file rejects bad magic and size mismatch") {
    std::string bytes = array_to_bytes(Array{{2, 2}, {1, 2, 3, 4}});
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS(array_from_bytes(bad));
    std::string truncated = bytes.substr(0, bytes.size() - 4);
    CHECK_THROWS(array_from_bytes(truncated));
    Array mismatch;
    mismatch.dims = {3, 3};
    mismatch.data.assign(4, 0.f);
    CHECK_THROWS(array_to_bytes(mismatch));
}

TEST_CASE("array bundle round trips named tensors") {
    const std::string path = temp_path("hoi_bundle_test.hpa");
    std::vector<NamedArray> arrays;
    arrays.push_back({"w1", Array{{2, 2}, {1, 2, 3, 4}}});
    arrays.push_back({"b1", Array{{2}, {0.5f, -0.5f}}});
    write_array_bundle(path, arrays);
    auto back = read_array_bundle(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "w1");
    CHECK(back[1].array.data == arrays[1].array.data);
    std::filesystem::remove(path);
}
