#include <cmath>
#include <set>

#include "doctest.h"
#include "support/gen.hpp"

#include "shipcc/datagen.hpp"
#include "shipcc/errors.hpp"

using namespace shipcc;

namespace {

Scenario small_case_one() {
    Scenario s = Scenario::case_one();
    s.load_hold = 40;
    s.input_hold = 15;
    return s;
}

DatagenConfig fast_config(int workers = 1) {
    DatagenConfig c;
    c.workers = workers;
    return c;
}

const Dataset& case_one() {
    static const Dataset d =
        build_dataset(small_case_one(), 300, 42, PlantParameters::truth(), PlantParameters::imperfect(), fast_config());
    return d;
}

}  // namespace

TEST_CASE("disturbance profiles") {
    const auto a = make_disturbance_profile(1, 3500, 9);
    const auto b = make_disturbance_profile(1, 3500, 9);
    REQUIRE(a.size() == 3500);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].phi_E == b[k].phi_E);
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (k % 1000 != 0) CHECK(a[k].phi_E == a[k - 1].phi_E);
        CHECK(condition_range(1).contains(a[k].phi_E));
    }
    for (const auto& p : make_disturbance_profile(3, 20000, 4)) CHECK((p.phi_E >= 0.10 && p.phi_E <= 0.30));
    for (const auto& p : make_disturbance_profile(2, 20000, 4)) CHECK((p.phi_E >= 0.80 && p.phi_E <= 1.0));

    const LoadSampler s = LoadSampler::for_condition(1);
    CHECK(s.mean == doctest::Approx(0.55));
    std::mt19937_64 rng(123);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) sum += s.draw_unclipped(rng);
    CHECK(std::abs(sum / 10000 - 0.55) < 0.01);
    CHECK_THROWS_AS(condition_range(4), InputDomainError);
}

TEST_CASE("input excitation") {
    const InputBox box;
    const auto u = make_excitation(box, 1050, 3);
    REQUIRE(u.size() == 1050);
    for (const auto& v : u) CHECK(box.contains(v));
    std::vector<int> runs;
    int run = 1;
    for (std::size_t k = 1; k < u.size(); ++k) {
        if (u[k] == u[k - 1]) {
            ++run;
        } else {
            runs.push_back(run);
            run = 1;
        }
    }
    runs.push_back(run);
    for (std::size_t i = 0; i + 1 < runs.size(); ++i) CHECK(runs[i] == 200);
    CHECK(runs.back() == 50);
    const auto other = make_excitation(box, 1050, 4);
    CHECK_FALSE(other[0] == u[0]);
}

TEST_CASE("normalizer") {
    gen::Rng r(5);
    Eigen::MatrixXd data(4, 50);
    for (int j = 0; j < 50; ++j) data.col(j) << r.uniform(0, 10), r.normal() * 1e3, 7.0, r.uniform(-1, 1);
    const Normalizer n = Normalizer::fit(data);
    CHECK(n.constant[2]);
    CHECK_FALSE(n.constant[0]);
    const Eigen::MatrixXd z = n.normalize(data);
    CHECK(z.row(2).cwiseAbs().maxCoeff() == 0.0);
    for (int i : {0, 1, 3}) {
        CHECK(std::abs(z.row(i).mean()) < 1e-12);
        const double var = (z.row(i).array() - z.row(i).mean()).square().mean();
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK((n.denormalize(z) - data).cwiseAbs().maxCoeff() < 1e-9);

    const Normalizer s = Normalizer::fit_scale(data);
    CHECK(s.mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.denormalize(Eigen::MatrixXd::Zero(4, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s.denormalize(s.normalize(data)) - data).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("dataset assembly") {
    const Dataset& d = case_one();
    CHECK(d.total_records() == 300);
    REQUIRE(d.segments.size() == 3);
    long total = 0;
    for (const auto& seg : d.segments) {
        total += seg.records();
        CHECK(seg.X_fp.rows() == seg.records());
        CHECK(seg.X_fp.cols() == kNx);
        CHECK(seg.train_end == seg.records() * 7 / 10);
        CHECK(seg.val_end == seg.records() * 8 / 10);
        for (long k = 0; k < seg.records(); ++k) CHECK(condition_range(seg.condition).contains(seg.traj.P[k]));
    }
    CHECK(total == 300);

    const RecordSet tr = d.records(Split::train);
    CHECK(tr.X.rows() == kNx);
    CHECK(tr.Z.rows() == kNz);
    CHECK(tr.U.rows() == kNu);
    CHECK(tr.P.rows() == 1);
    CHECK(tr.X_err.rows() == kNx);
    // x⁺ = x̃ᶠᵖ + x_e record by record.
    const auto& seg = d.segments[0];
    for (long k = 0; k < seg.train_end; ++k) {
        const Eigen::VectorXd fp = seg.X_fp.row(k).transpose();
        CHECK(((fp + tr.X_err.col(k)) - tr.X_next.col(k)).cwiseAbs().maxCoeff() < 1e-10);
    }
    const RecordSet te = d.records(Split::test);
    CHECK(tr.size() + d.records(Split::val).size() + te.size() == 300);
}

TEST_CASE("normalization uses the training split only") {
    Dataset d = case_one();
    const NormalizationStats before = d.stats;
    const NormalizationStats train_only = fit_statistics(d.records(Split::train));
    CHECK(before.x.mean == train_only.x.mean);
    CHECK(before.x_err.std == train_only.x_err.std);
    // Overwrite the test blocks; statistics are unchanged bit for bit.
    for (auto& seg : d.segments)
        for (long k = seg.val_end; k <= seg.records(); ++k) seg.traj.X.row(k).setConstant(1e6);
    split_and_normalize(d);
    CHECK(d.stats.x.mean == before.x.mean);
    CHECK(d.stats.x.std == before.x.std);
    CHECK(d.stats.z.std == before.z.std);

    const Eigen::MatrixXd nx = before.x.normalize(d.records(Split::train).X);
    for (int i = 0; i < kNx; ++i) {
        if (before.x.constant[static_cast<std::size_t>(i)]) continue;
        CHECK(std::abs(nx.row(i).mean()) < 1e-8);
    }
}

TEST_CASE("mismatch labels") {
    const Scenario s = [] {
        Scenario c = small_case_one();
        c.mix = {{1, 1.0}};
        return c;
    }();
    const Dataset same = build_dataset(s, 40, 1, PlantParameters::truth(), PlantParameters::truth(), fast_config());
    CHECK(same.records(Split::train).X_err.cwiseAbs().maxCoeff() == 0.0);

    double prev = 0.0;
    for (double scale : {0.25, 0.5, 1.0}) {
        const Dataset d =
            build_dataset(s, 40, 1, PlantParameters::truth(), PlantParameters::mismatch_scaled(scale), fast_config());
        const RecordSet all = d.records(Split::train);
        const double mean_norm = all.X_err.colwise().norm().mean();
        CHECK(mean_norm > prev);
        prev = mean_norm;
    }
}

TEST_CASE("case II keeps other conditions out of training") {
    Scenario s = Scenario::case_two();
    s.load_hold = 40;
    s.input_hold = 15;
    const Dataset d = build_dataset(s, 200, 3, PlantParameters::truth(), PlantParameters::imperfect(), fast_config());
    std::set<int> train_conditions;
    for (const auto& seg : d.segments) {
        if (seg.test_only) {
            CHECK(seg.records() == 40);
            CHECK(seg.range(Split::train).second == seg.range(Split::train).first);
            for (long k = 0; k < seg.records(); ++k) CHECK(condition_range(seg.condition).contains(seg.traj.P[k]));
        } else {
            train_conditions.insert(seg.condition);
        }
    }
    CHECK(train_conditions == std::set<int>{1});
    CHECK(d.records(Split::test, 2).size() == 40);
    CHECK(d.records(Split::test, 3).size() == 40);
    for (long k = 0; k < d.records(Split::train).size(); ++k)
        CHECK(condition_range(1).contains(d.records(Split::train).P(0, k)));
}

TEST_CASE("determinism and worker independence") {
    const Dataset a =
        build_dataset(small_case_one(), 120, 8, PlantParameters::truth(), PlantParameters::imperfect(), fast_config(1));
    const Dataset b =
        build_dataset(small_case_one(), 120, 8, PlantParameters::truth(), PlantParameters::imperfect(), fast_config(3));
    REQUIRE(a.segments.size() == b.segments.size());
    for (std::size_t i = 0; i < a.segments.size(); ++i) {
        CHECK(a.segments[i].traj.X == b.segments[i].traj.X);
        CHECK(a.segments[i].X_fp == b.segments[i].X_fp);
    }
    CHECK(a.stats.x.mean == b.stats.x.mean);
}

TEST_CASE("save and load") {
    const Dataset& d = case_one();
    const auto file = std::filesystem::temp_directory_path() / "shipcc_unit_dataset.bin";
    save_dataset(file, d);
    const Dataset back = load_dataset(file);
    REQUIRE(back.segments.size() == d.segments.size());
    CHECK(back.seed == d.seed);
    for (std::size_t i = 0; i < d.segments.size(); ++i) {
        CHECK(back.segments[i].traj.X == d.segments[i].traj.X);
        CHECK(back.segments[i].X_fp == d.segments[i].X_fp);
        CHECK(back.segments[i].condition == d.segments[i].condition);
    }
    CHECK(back.stats.x.mean == d.stats.x.mean);
    CHECK(back.stats.x_err.std == d.stats.x_err.std);
    std::filesystem::remove(file);
}

TEST_CASE("training fraction subsets") {
    const Dataset& d = case_one();
    const Dataset half = d.with_training_fraction(0.5);
    CHECK(half.records(Split::train).size() < d.records(Split::train).size());
    CHECK(half.records(Split::test).X == d.records(Split::test).X);
    const Dataset full = d.with_training_fraction(1.0);
    CHECK(full.stats.x.mean == d.stats.x.mean);
}

TEST_CASE("parallel_for rethrows") {
    std::vector<int> hits(20, 0);
    parallel_for(20, 4, [&](int i) { hits[static_cast<std::size_t>(i)] = 1; });
    CHECK(std::count(hits.begin(), hits.end(), 1) == 20);
    CHECK_THROWS_AS(parallel_for(20, 4, [](int i) {
                        if (i == 7) throw StepFailure("boom", i);
                    }),
                    StepFailure);
}
