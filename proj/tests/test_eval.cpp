#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "a2po/eval.hpp"
#include "test_helpers.hpp"

using namespace a2po;

TEST_CASE("evaluate: xi-blind policy reports identically for xi = -1 and 1") {
    const EnvSpec spec = make_point_mass();
    const PolicyFn constant = [](std::span<const double>, double, Rng&) {
        return std::vector<double>{0.3, 0.3};
    };
    const ScoreAnchors anchors{-50.0, 0.0};
    Rng r1(5), r2(5);
    const EvalReport a = evaluate(constant, spec, -1.0, 20, r1, anchors);
    const EvalReport b = evaluate(constant, spec, 1.0, 20, r2, anchors);
    CHECK(a.mean_return == b.mean_return);
    CHECK(a.std_return == b.std_return);
    CHECK(a.xi_used == -1.0);
    CHECK(b.xi_used == 1.0);
}

TEST_CASE("evaluate: single episode has zero std") {
    const EnvSpec spec = make_one_step_jump();
    const PolicyFn jump7 = [](std::span<const double>, double, Rng&) {
        return std::vector<double>{7.0};
    };
    Rng rng(1);
    const EvalReport rep = evaluate(jump7, spec, 1.0, 1, rng, ScoreAnchors{0.0, 10.0});
    CHECK(rep.episodes == 1);
    CHECK(rep.std_return == 0.0);
    CHECK(rep.mean_return == 10.0);
    CHECK(rep.normalized_score == 100.0);
}

TEST_CASE("expert scripted policy scores ~100 against Monte-Carlo anchors") {
    const EnvSpec spec = make_one_step_jump();
    Rng anchor_rng(77);
    const ScoreAnchors anchors = reference_returns(spec, 10000, anchor_rng);
    CHECK(anchors.expert_ref > anchors.random_ref);

    Rng eval_rng(78);
    const EvalReport rep = evaluate(scripted_policy(spec, BehaviorTier::expert), spec, 1.0,
                                    1000, eval_rng, anchors);
    CHECK(rep.normalized_score == Catch::Approx(100.0).margin(3.0));
}

TEST_CASE("xi_sweep shares the env stream across conditions") {
    const EnvSpec spec = make_point_mass();
    // policy that ignores xi: every report must be identical because the
    // rng stream restarts per xi
    const PolicyFn constant = [](std::span<const double>, double, Rng&) {
        return std::vector<double>{0.1, 0.2};
    };
    Rng rng(9);
    const std::vector<double> xis{-1.0, 0.0, 1.0};
    const auto reports = xi_sweep(constant, spec, xis, 10, rng, ScoreAnchors{-50.0, 0.0});
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].mean_return == reports[1].mean_return);
    CHECK(reports[1].mean_return == reports[2].mean_return);
    CHECK(reports[0].xi_used == -1.0);
    CHECK(reports[2].xi_used == 1.0);
}

TEST_CASE("aggregate_seeds: identical reports and hand arithmetic") {
    EvalReport a, b;
    a.mean_return = 100.0;
    b.mean_return = 100.0;
    const SeedAggregate same = aggregate_seeds(std::vector<EvalReport>{a, b});
    CHECK(same.mean == 100.0);
    CHECK(same.std_dev == 0.0);

    EvalReport zero, hundred;
    zero.mean_return = 0.0;
    hundred.mean_return = 100.0;
    const SeedAggregate split = aggregate_seeds(std::vector<EvalReport>{zero, hundred});
    CHECK(split.mean == 50.0);
    CHECK(split.std_dev == 50.0);

    CHECK_THROWS_AS(aggregate_seeds(std::vector<EvalReport>{a}), std::invalid_argument);
}

TEST_CASE("seed-level std of a fixed policy is bounded by episode noise") {
    const EnvSpec spec = make_one_step_jump();
    const PolicyFn medium = scripted_policy(spec, BehaviorTier::medium);
    const int episodes = 100;

    Rng anchor_rng(3);
    const ScoreAnchors anchors = reference_returns(spec, 2000, anchor_rng);

    std::vector<EvalReport> reports;
    double single_seed_std = 0.0;
    for (int seed = 0; seed < 5; ++seed) {
        Rng rng(1000 + seed);
        reports.push_back(evaluate(medium, spec, 0.0, episodes, rng, anchors));
        single_seed_std = reports.back().std_return;
    }
    const SeedAggregate agg = aggregate_seeds(reports);
    CHECK(agg.std_dev < single_seed_std / std::sqrt(static_cast<double>(episodes)) * 3.0);
}

TEST_CASE("pca2 recovers axis-aligned anisotropic 2-D data") {
    Rng rng(11);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 200; ++i)
        pts.push_back({10.0 * rng.gaussian() + 4.0, 0.5 * rng.gaussian() - 2.0});
    const Pca2Result res = pca2(pts);
    REQUIRE(!res.second_degenerate);
    // first component is the x axis (up to sign fixed positive)
    CHECK(std::abs(res.component1[0]) == Catch::Approx(1.0).margin(0.02));
    CHECK(res.component1[0] > 0.0);
    CHECK(std::abs(res.component1[1]) < 0.1);
    // projection recovers centered coordinates
    double mx = 0, my = 0;
    for (const auto& p : pts) {
        mx += p[0];
        my += p[1];
    }
    mx /= pts.size();
    my /= pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(res.projected[i][0] ==
              Catch::Approx((pts[i][0] - mx) * res.component1[0] +
                            (pts[i][1] - my) * res.component1[1]).margin(1e-9));
    }
}

TEST_CASE("pca2 components are orthonormal") {
    Rng rng(13);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> p(5);
        for (auto& v : p) v = rng.gaussian();
        pts.push_back(p);
    }
    const Pca2Result res = pca2(pts);
    double dot = 0, n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < 5; ++i) {
        dot += res.component1[i] * res.component2[i];
        n1 += res.component1[i] * res.component1[i];
        n2 += res.component2[i] * res.component2[i];
    }
    CHECK(std::abs(dot) < 1e-8);
    CHECK(n1 == Catch::Approx(1.0).margin(1e-10));
    CHECK(n2 == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("pca2 matches a dense Jacobi eigensolver on correlated 5-D data") {
    Rng rng(17);
    // known covariance via a fixed mixing matrix
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 4000; ++i) {
        const double g0 = rng.gaussian(), g1 = rng.gaussian(), g2 = rng.gaussian();
        pts.push_back({3.0 * g0 + 0.5 * g1, 2.0 * g1, 0.7 * g2 + 0.2 * g0, 0.3 * g2,
                       0.1 * rng.gaussian()});
    }
    const Pca2Result res = pca2(pts);

    // oracle: dense eigendecomposition of the sample covariance
    const std::size_t d = 5, n = pts.size();
    std::vector<double> mean(d, 0.0);
    for (const auto& p : pts)
        for (std::size_t i = 0; i < d; ++i) mean[i] += p[i];
    for (auto& m : mean) m /= static_cast<double>(n);
    std::vector<std::vector<double>> C(d, std::vector<double>(d, 0.0));
    for (const auto& p : pts)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                C[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / static_cast<double>(n);
    const oracle::EigenResult eig = oracle::jacobi_eigen(C);

    auto alignment = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0;
        for (std::size_t i = 0; i < d; ++i) dot += a[i] * b[i];
        return std::abs(dot);
    };
    CHECK(alignment(res.component1, eig.vectors[0]) > 0.99);
    CHECK(alignment(res.component2, eig.vectors[1]) > 0.99);
}

TEST_CASE("pca2 projected variance never exceeds total variance") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        const int dim = 3 + static_cast<int>(rng.uniform_index(4));
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 50; ++i) {
            std::vector<double> p(dim);
            for (auto& v : p) v = rng.uniform(-2, 2);
            pts.push_back(p);
        }
        const Pca2Result res = pca2(pts);

        std::vector<double> mean(dim, 0.0);
        for (const auto& p : pts)
            for (int i = 0; i < dim; ++i) mean[i] += p[i];
        for (auto& m : mean) m /= static_cast<double>(pts.size());
        double total = 0.0;
        for (const auto& p : pts)
            for (int i = 0; i < dim; ++i) total += (p[i] - mean[i]) * (p[i] - mean[i]);
        double projected = 0.0;
        for (const auto& pr : res.projected)
            projected += pr[0] * pr[0] + pr[1] * pr[1];
        CHECK(projected <= total + 1e-9);
    }
}

TEST_CASE("pca2 flags collinear data as rank deficient") {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 10; ++i)
        pts.push_back({static_cast<double>(i), 2.0 * i, -1.0 * i});
    const Pca2Result res = pca2(pts);
    CHECK(res.second_degenerate);
    for (const auto& p : res.projected) CHECK(p[1] == 0.0);

    CHECK_THROWS_AS(pca2({{1.0, 2.0}, {3.0, 4.0}}), std::invalid_argument);  // < 3 points
    CHECK_THROWS_AS(pca2({{1.0}, {2.0}, {3.0}}), std::invalid_argument);     // dim < 2
}

TEST_CASE("export_latent_dump writes the documented CSV layout") {
    const EnvSpec spec = make_point_mass();
    // synthetic agent: latent is (xi, 0.5 * xi); the policy is a goal-seeking
    // controller whose gain scales with xi, so returns rise with xi
    const auto latent_fn = [](std::span<const double>, double xi) {
        return std::vector<double>{xi, 0.5 * xi};
    };
    const PolicyFn policy = [](std::span<const double> s, double xi, Rng&) {
        const double gain = 0.5 * (xi + 1.0);
        return std::vector<double>{std::clamp(2.0 * s[2], -1.0, 1.0) * gain,
                                   std::clamp(2.0 * s[3], -1.0, 1.0) * gain};
    };
    const std::string path =
        (std::filesystem::temp_directory_path() / "a2po_latents.csv").string();
    Rng rng(31);
    const auto rows = export_latent_dump(latent_fn, policy, spec, 100, rng, path);
    REQUIRE(rows.size() == 100);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "xi,z_0,z_1,p_0,p_1,ret");
    int count = 0;
    std::vector<double> xis, rets;
    while (std::getline(in, line)) {
        ++count;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
        REQUIRE(cells.size() == 6);
        CHECK(cells[0] >= -1.0);
        CHECK(cells[0] <= 1.0);
        xis.push_back(cells[0]);
        rets.push_back(cells[5]);
    }
    CHECK(count == 100);

    // this synthetic agent's return grows with xi toward the jackpot at
    // xi ~ 1, so the rank correlation is strongly positive
    CHECK(oracle::spearman(xis, rets) > 0.5);
    std::remove(path.c_str());
}
