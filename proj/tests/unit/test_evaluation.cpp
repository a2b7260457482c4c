#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "iae/error.hpp"
#include "iae/evaluation.hpp"
#include "test_support.hpp"

using namespace iae;
using namespace iae::evaluation;
using iae::testing::TempDir;

namespace {

Eigen::MatrixXd gaussian(int64_t n, int64_t d, uint64_t seed, double shift = 0.0, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(n, d);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) m(i, j) = shift + scale * normal(rng);
    return m;
}

Eigen::MatrixXd permuted(const Eigen::MatrixXd& m, uint64_t seed) {
    std::vector<int> order(m.rows());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(seed));
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (int64_t i = 0; i < m.rows(); ++i) out.row(i) = m.row(order[i]);
    return out;
}

torch::Tensor direction(double x, double y, double z) {
    return torch::tensor({x, y, z}, torch::kFloat64).view({3, 1, 1}).expand({3, 2, 2}).clone();
}

}  // namespace

// ---------------------------------------------------------------------------
// FID
// ---------------------------------------------------------------------------

TEST(Fid, ZeroForIdenticalSets) {
    const auto a = gaussian(200, 8, 1);
    EXPECT_NEAR(fid(a, a), 0.0, 1e-6);
}

TEST(Fid, MeanShiftInOneDimension) {
    const auto a = gaussian(50, 1, 2);
    const Eigen::MatrixXd b = a.array() + 3.0;
    EXPECT_NEAR(fid(a, b), 9.0, 1e-6);
}

TEST(Fid, ClosedFormForScaledGaussians) {
    // Sample covariances S and 4S: trace term is Tr(S + 4S - 2 * 2S) = Tr(S).
    const auto a = gaussian(300, 4, 3);
    const Eigen::MatrixXd b = 2.0 * a;
    const Eigen::MatrixXd centered = a.rowwise() - a.colwise().mean();
    const double trace = (centered.transpose() * centered).trace() / static_cast<double>(a.rows() - 1);
    const double mean_term = (a.colwise().mean() - b.colwise().mean()).squaredNorm();
    EXPECT_NEAR(fid(a, b), mean_term + trace, 1e-4);
}

TEST(Fid, Symmetric) {
    const auto a = gaussian(100, 6, 4);
    const auto b = gaussian(120, 6, 5, 0.5, 1.5);
    EXPECT_NEAR(fid(a, b), fid(b, a), 1e-8);
    EXPECT_GT(fid(a, b), 0.0);
}

TEST(Fid, TooFewSamplesNamesTheMinimum) {
    const auto a = gaussian(8, 8, 6);
    try {
        fid(a, gaussian(20, 8, 7));
        FAIL() << "expected std::invalid_argument";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("at least 9"), std::string::npos) << e.what();
    }
}

// ---------------------------------------------------------------------------
// KID
// ---------------------------------------------------------------------------

TEST(Kid, ZeroForIdenticalSets) {
    const auto a = gaussian(150, 8, 8);
    EXPECT_LE(std::abs(kid(a, a).value), 1e-6);
}

TEST(Kid, GrowsWithSeparation) {
    const auto a = gaussian(200, 8, 9);
    const auto base = gaussian(200, 8, 10);
    double previous = -std::numeric_limits<double>::infinity();
    for (double shift : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) {
        const Eigen::MatrixXd b = base.array() + shift;
        const double value = kid(a, b).value;
        EXPECT_GT(value, previous) << "shift " << shift;
        previous = value;
    }
}

TEST(Kid, InvariantToRowOrder) {
    const auto a = gaussian(120, 5, 11);
    const auto b = gaussian(120, 5, 12, 0.3);
    EXPECT_DOUBLE_EQ(kid(a, b).value, kid(permuted(a, 1), permuted(b, 2)).value);
    const auto c = gaussian(90, 5, 13);
    const auto blocked = kid(a, c, 50, 20, 7);
    EXPECT_DOUBLE_EQ(blocked.value, kid(permuted(a, 3), permuted(c, 4), 50, 20, 7).value);
    EXPECT_EQ(blocked.blocks, 20);
    EXPECT_EQ(blocked.block_size, 50);
}

TEST(Kid, UnbiasedOnSameDistribution) {
    std::vector<double> values;
    for (uint64_t r = 0; r < 20; ++r) values.push_back(kid(gaussian(100, 8, 100 + r), gaussian(100, 8, 200 + r)).value);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / (values.size() - 1)) / std::sqrt(static_cast<double>(values.size()));
    EXPECT_LT(std::abs(mean), 3.0 * se) << "mean " << mean << " se " << se;
}

TEST(Kid, BlockStatistics) {
    const auto a = gaussian(300, 4, 14);
    const auto b = gaussian(300, 4, 15, 1.0);
    const auto single = kid(a, b);
    EXPECT_EQ(single.blocks, 1);
    EXPECT_EQ(single.std, 0.0);
    const auto many = kid(a, b, 100, 30, 1);
    EXPECT_EQ(many.blocks, 30);
    EXPECT_GT(many.std, 0.0);
    EXPECT_NEAR(many.value, single.value, 5.0 * many.std);
    EXPECT_THROW(kid(a, gaussian(10, 3, 1)), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Decomposition errors
// ---------------------------------------------------------------------------

TEST(NormalError, KnownAngles) {
    const auto mask = torch::ones({2, 2}, torch::kBool);
    const auto z = direction(0, 0, 1);
    EXPECT_NEAR(normal_error_deg(z, z, mask), 0.0, 1e-6);
    EXPECT_NEAR(normal_error_deg(direction(1, 0, 0), z, mask), 90.0, 1e-9);
    EXPECT_NEAR(normal_error_deg(direction(0, 0, -1), z, mask), 180.0, 1e-6);
    EXPECT_NEAR(normal_error_deg(direction(1, 0, 1), z, mask), 45.0, 1e-9);
}

TEST(NormalError, IgnoresPredictionLength) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
    auto pred = torch::randn({2, 3, 8, 8}, gen, torch::kFloat64);
    auto gt = torch::randn({2, 3, 8, 8}, gen, torch::kFloat64);
    gt = gt / torch::linalg_vector_norm(gt, 2, torch::IntArrayRef{1}, true);
    auto mask = torch::rand({2, 1, 8, 8}, gen) > 0.5;
    EXPECT_NEAR(normal_error_deg(pred, gt, mask), normal_error_deg(pred * 7.5, gt, mask), 1e-9);
}

TEST(NormalError, OnlyMaskedPixelsCount) {
    auto pred = direction(0, 0, 1);
    auto gt = pred.clone();
    gt.select(2, 1).select(1, 1).copy_(torch::tensor({0.0, 0.0, -1.0}, torch::kFloat64));
    auto mask = torch::ones({2, 2}, torch::kBool);
    EXPECT_NEAR(normal_error_deg(pred, gt, mask), 45.0, 1e-6);
    mask[1][1] = false;
    EXPECT_NEAR(normal_error_deg(pred, gt, mask), 0.0, 1e-6);
    EXPECT_THROW(normal_error_deg(pred, gt, torch::zeros({2, 2}, torch::kBool)), std::invalid_argument);
}

TEST(MapError, Scale255) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(4);
    auto a = torch::rand({3, 8, 8}, gen, torch::kFloat64) * 0.9;
    auto mask = torch::ones({8, 8}, torch::kBool);
    EXPECT_EQ(map_error_l1(a, a, mask), 0.0);
    EXPECT_NEAR(map_error_l1(a + 10.0 / 255.0, a, mask), 10.0, 1e-9);
    EXPECT_THROW(map_error_l1(a, a.narrow(1, 0, 4), mask), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Feature extractors
// ---------------------------------------------------------------------------

TEST(Extractor, RandomIsSeededAndShaped) {
    RandomConvExtractor a(0), b(0), c(1);
    auto images = torch::rand({5, 3, 32, 32}) * 2 - 1;
    auto fa = a.features(images);
    EXPECT_EQ(fa.sizes(), (std::vector<int64_t>{5, 64}));
    EXPECT_EQ(fa.scalar_type(), torch::kFloat64);
    EXPECT_TRUE(torch::equal(fa, b.features(images)));
    EXPECT_FALSE(torch::equal(fa, c.features(images)));
    const auto chunked = extract(a, images, 2);
    EXPECT_EQ(chunked.rows(), 5);
    EXPECT_NEAR(chunked(4, 63), fa[4][63].item<double>(), 1e-6);  // float32 convolution, batch-size dependent
}

TEST(Extractor, SpecErrors) {
    EXPECT_THROW(make_extractor("inception"), ConfigError);
    EXPECT_THROW(make_extractor("external:/nonexistent/model.pt"), DataError);
    EXPECT_EQ(make_extractor("random")->name(), "random");
}

// ---------------------------------------------------------------------------
// End-to-end evaluation
// ---------------------------------------------------------------------------

class EvaluateTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir("evaluate");
        iae::testing::small_corpus(dir_->path() / "data", 1, 65, {32, 32}, 21);
        manifest_ = new dataset::DatasetManifest(dataset::load_manifest(dir_->path() / "data" / "eval"));
    }
    static void TearDownTestSuite() {
        delete manifest_;
        delete dir_;
    }
    static TempDir* dir_;
    static dataset::DatasetManifest* manifest_;
};

TempDir* EvaluateTest::dir_ = nullptr;
dataset::DatasetManifest* EvaluateTest::manifest_ = nullptr;

TEST_F(EvaluateTest, AlbedoPassthroughPlumbing) {
    RandomConvExtractor extractor;
    auto renderer = [](const torch::Tensor& m) { return m.narrow(1, channels::kAlbedo, 3); };
    auto decomposer = [](const torch::Tensor& i) { return torch::cat({i, torch::zeros_like(i), i}, 1); };
    const auto r = evaluate(renderer, decomposer, *manifest_, extractor, {32, 32});
    EXPECT_TRUE(std::isfinite(r.fid));
    EXPECT_GT(r.fid, 0.0);
    EXPECT_EQ(r.n_samples.fid, 65);
    EXPECT_EQ(r.n_samples.kid, 65);
    EXPECT_EQ(r.n_samples.decomposition, 65);
    EXPECT_EQ(r.n_samples.reconstruction, 65);
    EXPECT_EQ(r.recon_l1, 0.0);
    EXPECT_EQ(r.extractor, "random");
    EXPECT_NE(to_json(r).find("\"n_samples\""), std::string::npos);
}

TEST_F(EvaluateTest, GroundTruthDecomposerScoresZero) {
    const Resolution res{32, 32};
    std::vector<std::pair<torch::Tensor, torch::Tensor>> table;
    for (size_t idx : manifest_->indices(dataset::RecordKind::Real)) {
        const auto& record = manifest_->records[idx];
        auto image = dataset::load_batch(*manifest_, {}, {idx}, res).real[0];
        table.emplace_back(image, to_network(dataset::decode_intrinsics(manifest_->root, record.paths)));
    }
    auto oracle = [&](const torch::Tensor& images) {
        std::vector<torch::Tensor> out;
        for (int64_t b = 0; b < images.size(0); ++b) {
            for (const auto& [image, stack] : table)
                if (torch::equal(image, images[b])) {
                    out.push_back(stack);
                    break;
                }
        }
        EXPECT_EQ(static_cast<int64_t>(out.size()), images.size(0));
        return torch::stack(out);
    };
    auto renderer = [](const torch::Tensor& m) { return m.narrow(1, channels::kAlbedo, 3); };
    RandomConvExtractor extractor;
    const auto r = evaluate(renderer, oracle, *manifest_, extractor, res);
    EXPECT_LT(r.normal_err_deg, 0.1);
    EXPECT_LT(r.albedo_err, 1e-3);
    EXPECT_LT(r.reflection_err, 1e-3);
}

TEST_F(EvaluateTest, DeterministicReports) {
    auto models = networks::make_models(iae::testing::tiny_config().networks, 0);
    RandomConvExtractor e1, e2;
    const auto a = evaluate(models, {}, *manifest_, e1, {32, 32});
    const auto b = evaluate(models, {}, *manifest_, e2, {32, 32});
    EXPECT_EQ(to_json(a), to_json(b));
}

TEST_F(EvaluateTest, TooFewRecordsIsDataError) {
    RandomConvExtractor extractor(0, 128);
    auto id = [](const torch::Tensor& x) { return x; };
    EXPECT_THROW(evaluate(id, id, *manifest_, extractor, {32, 32}), DataError);
}
