#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hoi/losses.hpp"
#include "oracles.hpp"

using namespace hoi;

namespace {

Mat random_embeddings(int n, int d, Rng& rng) {
    Mat m(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("similarity matrix examples") {
    const double tau = 0.1;
    SUBCASE("identical unit row gives 1/tau") {
        Mat u(1, 4);
        u << 1, 0, 0, 0;
        Mat s = similarity_matrix(u, u, tau);
        CHECK(s(0, 0) == doctest::Approx(10.0));
    }
    SUBCASE("orthogonal rows give zero off-diagonal") {
        Mat u(2, 2);
        u << 3, 0, 0, 5;  // norms differ; cosine ignores them
        Mat s = similarity_matrix(u, u, tau);
        CHECK(s(0, 1) == doctest::Approx(0.0));
        CHECK(s(1, 0) == doctest::Approx(0.0));
        CHECK(s(0, 0) == doctest::Approx(10.0));
    }
    SUBCASE("random matrices match a scalar cosine loop") {
        Rng rng(3);
        Mat u = random_embeddings(4, 8, rng), v = random_embeddings(3, 8, rng);
        Mat s = similarity_matrix(u, v, tau);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(s(i, j) ==
                      doctest::Approx(oracle::cosine(u.row(i), v.row(j)) / tau).epsilon(1e-12));
    }
    SUBCASE("zero-norm row rejected") {
        Mat u = Mat::Zero(2, 4);
        u(0, 0) = 1;
        CHECK_THROWS(similarity_matrix(u, u, tau));
    }
    SUBCASE("positive row rescaling leaves similarities unchanged") {
        Rng rng(4);
        Mat u = random_embeddings(5, 6, rng), v = random_embeddings(5, 6, rng);
        Mat u2 = 2.5 * u;
        Mat a = similarity_matrix(u, v, tau), b = similarity_matrix(u2, v, tau);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("temporal loss structure") {
    const double tau = 0.1;
    SUBCASE("N=1 collapses to zero") {
        Rng rng(5);
        Mat z = random_embeddings(1, 8, rng), zp = random_embeddings(1, 8, rng);
        CHECK(loss_temporal(z, zp, tau) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("N=0 rejected") {
        Mat z(0, 8), zp(0, 8);
        CHECK_THROWS(loss_temporal(z, zp, 0.1));
    }
    SUBCASE("N=2 hand-picked embeddings match the double-loop oracle") {
        Mat z(2, 3), zp(2, 3);
        z << 1, 0, 0, 0, 1, 0;
        zp << 0.9, 0.1, 0, -0.2, 0.8, 0.3;
        CHECK(loss_temporal(z, zp, tau) ==
              doctest::Approx(oracle::loss_temporal(z, zp, tau)).epsilon(1e-6));
    }
    SUBCASE("aligned positives score below shuffled positives") {
        Rng rng(6);
        const int n = 8, d = 16;
        Mat z = random_embeddings(n, d, rng);
        Mat zp_aligned = z;  // identical positives
        Mat zp_shuffled(n, d);
        for (int i = 0; i < n; ++i) zp_shuffled.row(i) = z.row((i + 3) % n);
        CHECK(loss_temporal(z, zp_aligned, tau) < loss_temporal(z, zp_shuffled, tau));
    }
    SUBCASE("random batches match the oracle across sizes") {
        Rng rng(7);
        for (int n : {1, 2, 3, 5, 8})
            for (int d : {4, 8, 32}) {
                Mat z = random_embeddings(n, d, rng), zp = random_embeddings(n, d, rng);
                CHECK(loss_temporal(z, zp, tau) ==
                      doctest::Approx(oracle::loss_temporal(z, zp, tau)).epsilon(1e-8));
            }
    }
    SUBCASE("permutation equivariance") {
        Rng rng(8);
        const int n = 6;
        Mat z = random_embeddings(n, 8, rng), zp = random_embeddings(n, 8, rng);
        std::vector<int> perm{3, 1, 5, 0, 4, 2};
        Mat z2(n, 8), zp2(n, 8);
        for (int i = 0; i < n; ++i) {
            z2.row(i) = z.row(perm[i]);
            zp2.row(i) = zp.row(perm[i]);
        }
        CHECK(loss_temporal(z2, zp2, 0.1) ==
              doctest::Approx(loss_temporal(z, zp, 0.1)).epsilon(1e-9));
    }
}

TEST_CASE("hand loss structure") {
    const double tau = 0.1;
    SUBCASE("N=1 collapses to zero") {
        Rng rng(9);
        Mat a = random_embeddings(1, 8, rng), b = random_embeddings(1, 8, rng),
            c = random_embeddings(1, 8, rng);
        CHECK(loss_hand(a, b, c, tau) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("random batches match the double-loop oracle") {
        Rng rng(10);
        for (int n : {2, 3, 6})
            for (int d : {4, 16}) {
                Mat a = random_embeddings(n, d, rng), b = random_embeddings(n, d, rng),
                    c = random_embeddings(n, d, rng);
                CHECK(loss_hand(a, b, c, tau) ==
                      doctest::Approx(oracle::loss_hand(a, b, c, tau)).epsilon(1e-8));
            }
    }
    SUBCASE("duplicated quadruples act as hard negatives") {
        Rng rng(11);
        Mat a = random_embeddings(3, 8, rng), b = random_embeddings(3, 8, rng),
            c = random_embeddings(3, 8, rng);
        a.row(2) = a.row(0);
        b.row(2) = b.row(0);
        c.row(2) = c.row(0);
        CHECK(loss_hand(a, b, c, tau) > 0.0);
    }
}

TEST_CASE("joint loss composition") {
    Rng rng(12);
    JointBatch batch;
    batch.z_o = random_embeddings(5, 8, rng);
    batch.z_op = random_embeddings(5, 8, rng);
    batch.z_oh = random_embeddings(4, 8, rng);
    batch.z_h = random_embeddings(4, 8, rng);
    batch.z_oo = random_embeddings(4, 8, rng);

    LossConfig cfg;
    SUBCASE("lambda = 0 is bit-identical to the temporal loss alone") {
        cfg.lambda_h = 0.0;
        CHECK(loss_joint(batch, cfg) == loss_temporal(batch.z_o, batch.z_op, cfg.tau));
        JointBatch no_hand;  // hand matrices never touched at lambda=0
        no_hand.z_o = batch.z_o;
        no_hand.z_op = batch.z_op;
        CHECK(loss_joint(no_hand, cfg) == loss_temporal(batch.z_o, batch.z_op, cfg.tau));
    }
    SUBCASE("lambda = 1 sums the two terms") {
        cfg.lambda_h = 1.0;
        const double lt = loss_temporal(batch.z_o, batch.z_op, cfg.tau);
        const double lh = loss_hand(batch.z_oh, batch.z_h, batch.z_oo, cfg.tau);
        CHECK(loss_joint(batch, cfg) == doctest::Approx(lt + lh).epsilon(1e-12));
    }
    SUBCASE("lambda = 0.5 recomposition") {
        cfg.lambda_h = 0.5;
        const double lt = loss_temporal(batch.z_o, batch.z_op, cfg.tau);
        const double lh = loss_hand(batch.z_oh, batch.z_h, batch.z_oo, cfg.tau);
        CHECK(loss_joint(batch, cfg) == doctest::Approx(lt + 0.5 * lh).epsilon(1e-7));
    }
}

TEST_CASE("tcn triplet loss") {
    SUBCASE("satisfied margin gives zero") {
        Mat a(1, 3), n(1, 3);
        a << 1, 0, 0;
        n << 1, 0, std::sqrt(3.0);  // |a-n|^2 = 3
        CHECK(loss_tcn(a, a, n, 2.0) == doctest::Approx(0.0));
    }
    SUBCASE("degenerate triplet returns the margin") {
        Mat a(1, 4);
        a << 1, 2, 3, 4;
        CHECK(loss_tcn(a, a, a, 2.0) == doctest::Approx(2.0));
    }
    SUBCASE("random triplets match the scalar formula") {
        Rng rng(13);
        Mat a = random_embeddings(6, 5, rng), p = random_embeddings(6, 5, rng),
            n = random_embeddings(6, 5, rng);
        double expected = 0;
        for (int i = 0; i < 6; ++i) {
            double d_ap = 0, d_an = 0;
            for (int j = 0; j < 5; ++j) {
                d_ap += (a(i, j) - p(i, j)) * (a(i, j) - p(i, j));
                d_an += (a(i, j) - n(i, j)) * (a(i, j) - n(i, j));
            }
            expected += std::max(0.0, d_ap + 2.0 - d_an);
        }
        expected /= 6;
        CHECK(loss_tcn(a, p, n, 2.0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("analytic gradients match finite differences") {
    Rng rng(14);
    const double tau = 0.1, eps = 1e-5;
    SUBCASE("temporal loss") {
        Mat z = random_embeddings(4, 8, rng), zp = random_embeddings(4, 8, rng);
        Grad2 g = loss_temporal_grad(z, zp, tau);
        Mat fd_a = oracle::finite_diff(z, eps, [&](const Mat& x) {
            return loss_temporal(x, zp, tau);
        });
        Mat fd_b = oracle::finite_diff(zp, eps, [&](const Mat& x) {
            return loss_temporal(z, x, tau);
        });
        CHECK(oracle::max_rel_error(g.d_a, fd_a) < 1e-5);
        CHECK(oracle::max_rel_error(g.d_b, fd_b) < 1e-5);
    }
    SUBCASE("hand loss") {
        Mat a = random_embeddings(4, 8, rng), b = random_embeddings(4, 8, rng),
            c = random_embeddings(4, 8, rng);
        Grad3 g = loss_hand_grad(a, b, c, tau);
        CHECK(oracle::max_rel_error(g.d_a, oracle::finite_diff(a, eps, [&](const Mat& x) {
                  return loss_hand(x, b, c, tau);
              })) < 1e-5);
        CHECK(oracle::max_rel_error(g.d_b, oracle::finite_diff(b, eps, [&](const Mat& x) {
                  return loss_hand(a, x, c, tau);
              })) < 1e-5);
        CHECK(oracle::max_rel_error(g.d_c, oracle::finite_diff(c, eps, [&](const Mat& x) {
                  return loss_hand(a, b, x, tau);
              })) < 1e-5);
    }
    SUBCASE("tcn loss") {
        Mat a = random_embeddings(5, 6, rng), p = random_embeddings(5, 6, rng),
            n = random_embeddings(5, 6, rng);
        Grad3 g = loss_tcn_grad(a, p, n, 2.0);
        CHECK(oracle::max_rel_error(g.d_a, oracle::finite_diff(a, eps, [&](const Mat& x) {
                  return loss_tcn(x, p, n, 2.0);
              })) < 1e-4);
        CHECK(oracle::max_rel_error(g.d_c, oracle::finite_diff(n, eps, [&](const Mat& x) {
                  return loss_tcn(a, p, x, 2.0);
              })) < 1e-4);
    }
}

// ---- batch sampling ----

namespace {

TrackBuildResult make_tracks(int n_tracks, int len, bool with_hands) {
    TrackBuildResult r;
    for (int t = 0; t < n_tracks; ++t) {
        Track ht;
        ht.video_id = "v";
        ht.kind = TrackKind::hand;
        ht.track_id = "v#h" + std::to_string(t);
        for (int i = 0; i < len; ++i)
            ht.entries.push_back({i, i / 10.0, BBox{5.0 + i, 5, 15.0 + i, 20}, 0.9});
        r.hand_tracks.push_back(ht);

        Track ot;
        ot.video_id = "v";
        ot.kind = TrackKind::object;
        ot.track_id = "v#o" + std::to_string(t);
        for (int i = 0; i < len; ++i) {
            ot.entries.push_back({i, i / 10.0, BBox{10.0 + i, 10, 40.0 + i, 40}, 0.9});
            if (with_hands)
                ot.hand_links.emplace_back(HandLink{t, i});
            else
                ot.hand_links.emplace_back(std::nullopt);
        }
        r.object_tracks.push_back(ot);
    }
    return r;
}

}  // namespace

TEST_CASE("batch sampling windows") {
    SampleParams sp;
    sp.batch = 64;

    SUBCASE("tsc positives stay within floor(w/4) of the anchor") {
        auto tracks = make_tracks(3, 8, false);
        Rng rng(15);
        auto batch = sample_batch_indices(tracks, PretrainMode::tsc, sp, rng);
        for (const auto& q : batch) {
            CHECK(std::abs(q.positive.entry - q.anchor.entry) <= 2);  // floor(8/4)
            CHECK(q.positive.track == q.anchor.track);
        }
    }
    SUBCASE("tcn negatives at least ceil(w/2) from anchor and positive") {
        auto tracks = make_tracks(2, 8, false);
        Rng rng(16);
        auto batch = sample_batch_indices(tracks, PretrainMode::tcn, sp, rng);
        for (const auto& q : batch) {
            CHECK(std::abs(q.negative.entry - q.anchor.entry) >= 4);  // ceil(8/2)
            CHECK(std::abs(q.negative.entry - q.positive.entry) >= 4);
        }
    }
    SUBCASE("simclr positive equals the anchor") {
        auto tracks = make_tracks(2, 6, false);
        Rng rng(17);
        for (const auto& q : sample_batch_indices(tracks, PretrainMode::simclr, sp, rng))
            CHECK(q.positive.entry == q.anchor.entry);
    }
    SUBCASE("fixed seed reproduces the batch exactly") {
        auto tracks = make_tracks(4, 12, true);
        Rng r1(18), r2(18);
        auto b1 = sample_batch_indices(tracks, PretrainMode::tsc_ohc, sp, r1);
        auto b2 = sample_batch_indices(tracks, PretrainMode::tsc_ohc, sp, r2);
        REQUIRE(b1.size() == b2.size());
        for (size_t i = 0; i < b1.size(); ++i) {
            CHECK(b1[i].anchor.entry == b2[i].anchor.entry);
            CHECK(b1[i].positive.entry == b2[i].positive.entry);
            CHECK(b1[i].hand_entry == b2[i].hand_entry);
        }
    }
    SUBCASE("ohc hands stay within the 0.3s window") {
        auto tracks = make_tracks(2, 12, true);
        Rng rng(19);
        for (const auto& q : sample_batch_indices(tracks, PretrainMode::tsc_ohc, sp, rng)) {
            REQUIRE(q.hand_track >= 0);
            const double t_obj =
                tracks.object_tracks[q.anchor.track].entries[q.anchor.entry].timestamp_s;
            const double t_hand =
                tracks.hand_tracks[q.hand_track].entries[q.hand_entry].timestamp_s;
            CHECK(std::abs(t_hand - t_obj) <= 0.3 + 1e-9);
        }
    }
    SUBCASE("constraint violations are named") {
        auto no_hands = make_tracks(2, 12, false);
        try {
            Rng rng(20);
            sample_batch_indices(no_hands, PretrainMode::tsc_ohc, sp, rng);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("hand-linked") != std::string::npos);
        }
        auto short_tracks = make_tracks(2, 2, false);
        Rng rng2(21);
        CHECK_THROWS(sample_batch_indices(short_tracks, PretrainMode::tsc, sp, rng2));
    }
}

TEST_CASE("quadruples carry aligned crops and motion") {
    Quadruple q;
    q.o = Image(3, 64, 64, 0.2f);
    q.o_prime = Image(3, 64, 64, 0.3f);
    q.h_a = Image(3, 64, 64, 0.4f);
    q.h_m = hand_motion(BBox{0, 0, 100, 100},
                        {BBox{40, 40, 60, 60}, BBox{42, 40, 62, 60}, BBox{44, 40, 64, 60}});
    CHECK(q.o.plane_size() == q.h_a.plane_size());
    CHECK(positional_encode(q.h_m).values.size() == 288);
}

TEST_CASE("loss config validation") {
    LossConfig bad;
    bad.tau = 0.0;
    CHECK_THROWS(bad.validate());
    bad = LossConfig{};
    bad.lambda_h = -0.5;
    CHECK_THROWS(bad.validate());
}
