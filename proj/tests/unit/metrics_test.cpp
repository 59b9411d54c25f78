#include "fixtures.hpp"
#include "meshes.hpp"

#include "procinv/metrics.hpp"
#include "procinv/prior.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace procinv;
using fixtures::box_building;

namespace {

const AssetCatalog &catalog() {
    static const AssetCatalog c = build_catalog(7, 64);
    return c;
}

std::vector<Triangle> random_triangles(std::mt19937_64 &rng, std::size_t n, double extent) {
    std::uniform_real_distribution<double> pos(-extent, extent);
    std::uniform_real_distribution<double> size(-1.0, 1.0);
    std::vector<Triangle> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 c{pos(rng), pos(rng), pos(rng)};
        out.push_back(Triangle{c + Vec3{size(rng), size(rng), size(rng)}, c + Vec3{size(rng), size(rng), size(rng)},
                               c + Vec3{size(rng), size(rng), size(rng)}});
    }
    return out;
}

} // namespace

TEST(Structural, IdenticalBuildingsScorePerfectly) {
    BuildingAbstraction b = box_building(10, 8, 4);
    b.material_variations = {{0, 0, Hsv{0.1, 0.2, 0.3}}};
    const MetricsReport r = structural(b, b);
    EXPECT_TRUE(r.storey_count_correct);
    EXPECT_TRUE(r.facade_count_correct);
    EXPECT_EQ(r.storey_structure_accuracy, 1.0);
    EXPECT_EQ(r.asset_precision, 1.0);
    EXPECT_EQ(r.asset_recall, 1.0);
    EXPECT_EQ(r.material_variation_iou, 1.0);
    EXPECT_EQ(r.hsv_l2, 0.0);
    EXPECT_FALSE(r.hsv_intersection_empty);
}

TEST(Structural, NoVariationsOnEitherSide) {
    const BuildingAbstraction b = box_building(10, 8, 2);
    const MetricsReport r = structural(b, b);
    EXPECT_EQ(r.material_variation_iou, 1.0);
    EXPECT_TRUE(r.hsv_intersection_empty);
    EXPECT_EQ(r.hsv_l2, 0.0);
}

TEST(Structural, IouAndColourDistanceByHand) {
    BuildingAbstraction a = box_building(10, 8, 2);
    BuildingAbstraction b = a;
    a.material_variations = {{0, 0, Hsv{0.1, 0.2, 0.2}}, {1, 0, Hsv{0.5, 0.5, 0.5}}};
    b.material_variations = {{1, 0, Hsv{0.6, 0.7, 0.7}}, {2, 1, Hsv{0.0, 0.0, 0.0}}};
    const MetricsReport r = structural(a, b);
    EXPECT_DOUBLE_EQ(r.material_variation_iou, 1.0 / 3.0);
    EXPECT_NEAR(r.hsv_l2, 0.3, 1e-12); // sqrt(0.01 + 0.04 + 0.04)
    b.material_variations = {{3, 0, Hsv{}}};
    const MetricsReport disjoint = structural(a, b);
    EXPECT_EQ(disjoint.material_variation_iou, 0.0);
    EXPECT_TRUE(disjoint.hsv_intersection_empty);
}

TEST(Structural, AssetPrecisionRecallDuality) {
    BuildingAbstraction a = box_building(10, 8, 2); // types 0..3
    BuildingAbstraction b = a;
    b.facades[1].cells_patterns[0].cells[0].cell_type = 7;
    b.facades[1].cells_patterns[0].cells[1].cell_type = 7; // types {0,1,7}
    const MetricsReport ab = structural(a, b);
    const MetricsReport ba = structural(b, a);
    EXPECT_DOUBLE_EQ(ab.asset_precision, 2.0 / 4.0);
    EXPECT_DOUBLE_EQ(ab.asset_recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(ab.asset_precision, ba.asset_recall);
    EXPECT_DOUBLE_EQ(ab.asset_recall, ba.asset_precision);
}

TEST(Structural, FacadeCountIgnoresIndexing) {
    BuildingAbstraction a = box_building(10, 8, 3);
    BuildingAbstraction b = a;
    b.facades.push_back(b.facades[1]); // duplicate content under a new index
    b.storeys[2].facade_index = 2;
    EXPECT_EQ(distinct_facade_count(a), 2U);
    EXPECT_EQ(distinct_facade_count(b), 2U);
    const MetricsReport r = structural(b, a);
    EXPECT_TRUE(r.facade_count_correct);
    EXPECT_EQ(r.storey_structure_accuracy, 1.0);
}

TEST(Structural, StoreysPairedByElevationOverTheShorterList) {
    const BuildingAbstraction gt = box_building(10, 8, 4); // ground + 3 upper
    BuildingAbstraction hat = box_building(10, 8, 2);      // ground + 1 upper
    MetricsReport r = structural(hat, gt);
    EXPECT_FALSE(r.storey_count_correct);
    EXPECT_EQ(r.storey_structure_accuracy, 1.0);
    hat.storeys[1].facade_index = 0; // second storey now looks like the ground floor
    r = structural(hat, gt);
    EXPECT_DOUBLE_EQ(r.storey_structure_accuracy, 0.5);
}

TEST(Structural, IdentitiesOverPriorSamples) {
    const BuildingCodec codec(catalog().material_counts());
    const PriorConfig cfg;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const BuildingAbstraction b = sample(seed, cfg, catalog(), codec);
        const MetricsReport r = structural(b, b);
        EXPECT_TRUE(r.storey_count_correct && r.facade_count_correct);
        EXPECT_EQ(r.storey_structure_accuracy, 1.0);
        EXPECT_EQ(r.asset_precision, 1.0);
        EXPECT_EQ(r.asset_recall, 1.0);
        EXPECT_EQ(r.material_variation_iou, 1.0);
        EXPECT_EQ(r.hsv_l2, 0.0);
        const BuildingAbstraction other = sample(seed + 1000, cfg, catalog(), codec);
        EXPECT_DOUBLE_EQ(structural(b, other).asset_precision, structural(other, b).asset_recall);
    }
}

TEST(Bvh, MatchesBruteForce) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> q(-15.0, 15.0);
    for (int c = 0; c < 100; ++c) {
        const auto tris = random_triangles(rng, 1 + rng() % 400, 10.0);
        const TriangleBvh bvh(tris);
        for (int k = 0; k < 20; ++k) {
            const Vec3 p{q(rng), q(rng), q(rng)};
            EXPECT_NEAR(bvh.nearest_distance(p), brute_force_distance(p, tris), 1e-9);
        }
    }
}

TEST(Bvh, EmptyIsAnError) {
    const TriangleBvh bvh({});
    EXPECT_TRUE(bvh.empty());
    EXPECT_THROW(bvh.nearest_distance({0, 0, 0}), GeometryError);
}

TEST(GeometricError, OffsetPlaneByHand) {
    std::vector<Triangle> plane;
    meshes::quad(plane, {-10, -10, 0}, {10, -10, 0}, {10, 10, 0}, {-10, 10, 0});
    PointCloud pc;
    for (int i = 0; i < 10; ++i) {
        pc.points.push_back({Vec3{i - 5.0, 0.5 * i - 2.0, i % 2 ? 0.5 : -0.5}, Vec3{}});
    }
    EXPECT_NEAR(geometric_error(pc, TriangleBvh(plane)), 0.5, 1e-12);
    EXPECT_THROW(geometric_error(PointCloud{}, TriangleBvh(plane)), ConfigError);
    EXPECT_THROW(geometric_error(pc, TriangleBvh({})), GeometryError);
}

TEST(GeometricError, CleanRenderOfTheSameBuildingIsZero) {
    const BuildingAbstraction b = box_building(8, 6, 2);
    const PointCloud pc = render(b, catalog(), 10.0, 1);
    EXPECT_LT(geometric_error(pc, b, catalog()), 1e-9);
}

TEST(Corpus, AggregatesAndFormats) {
    const BuildingAbstraction a = box_building(10, 8, 3);
    BuildingAbstraction b = box_building(10, 8, 2);
    std::vector<EvaluationPair> pairs = {{a, a, std::nullopt, 0.0}, {b, a, std::nullopt, 0.0}};
    const CorpusEvaluation e = evaluate_corpus(pairs, catalog());
    EXPECT_EQ(e.table.pairs, 2U);
    EXPECT_DOUBLE_EQ(e.table.storey_count_accuracy, 0.5);
    EXPECT_DOUBLE_EQ(e.table.storey_structure_accuracy, 1.0);
    EXPECT_EQ(e.reports.size(), 2U);
    EXPECT_FALSE(e.table.geometric_error.has_value());
    EXPECT_TRUE(e.curve.empty());

    const std::string table = format_table(e.table);
    const std::vector<std::string> rows = {"Accuracy number of storeys", "Accuracy number of facades",
                                           "Accuracy storeys structure", "Assets: precision",
                                           "Assets: recall",             "IoU Material Variations",
                                           "L2 HSV Color Distance"};
    std::size_t at = 0;
    for (const std::string &row : rows) {
        const std::size_t found = table.find(row, at);
        ASSERT_NE(found, std::string::npos) << row;
        at = found;
    }
    EXPECT_NE(table.find("50.0%"), std::string::npos);
    EXPECT_EQ(table_csv(e.table).rfind("metric,value\nstorey_count_accuracy,0.5\n", 0), 0U);
    EXPECT_EQ(format_table(evaluate_corpus({}, catalog()).table), "");
}

TEST(Corpus, NoiseCurveGroupsBySigma) {
    BuildingAbstraction b = box_building(8, 6, 2);
    std::vector<EvaluationPair> pairs;
    for (double sigma : {0.0, 0.2}) {
        b.noise_level = sigma;
        for (std::uint64_t s = 0; s < 2; ++s) {
            pairs.push_back({b, b, render(b, catalog(), 10.0, s), sigma});
        }
    }
    const CorpusEvaluation e = evaluate_corpus(pairs, catalog());
    ASSERT_EQ(e.curve.size(), 2U);
    EXPECT_EQ(e.curve[0].count, 2U);
    EXPECT_LT(e.curve[0].ground_truth_error, 1e-9);
    EXPECT_GT(e.curve[1].ground_truth_error, 0.05);
    EXPECT_EQ(e.curve[1].inferred_error, e.curve[1].ground_truth_error);
    EXPECT_EQ(curve_csv(e.curve).rfind("sigma,inferred_error,ground_truth_error,count\n0,", 0), 0U);
}
