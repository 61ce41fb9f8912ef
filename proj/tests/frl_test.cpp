#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace pearl;
using pearl::testing::random_matrix;

namespace {

/// Max over columns of the smaller of ||a - b|| and ||a + b||.
double signless_distance(const Matrix& a, const Matrix& b)
{
    double worst = 0.0;
    for (Index c = 0; c < a.cols(); ++c)
        worst = std::max(worst, std::min((a.col(c) - b.col(c)).cwiseAbs().maxCoeff(),
                                         (a.col(c) + b.col(c)).cwiseAbs().maxCoeff()));
    return worst;
}

Matrix correlated_data(Rng& rng, Index n, Index d)
{
    Matrix mix = random_matrix(rng, d, d);
    return random_matrix(rng, n, d) * mix + Matrix::Constant(n, d, 0.7);
}

double reconstruction_error(const UnlabeledDataset& data, Index p)
{
    const auto frl = fit_pca(data, p);
    const auto& params = std::get<PcaParams>(frl.params());
    const Matrix scores = frl.transform(data.features());
    const Matrix recon = (scores * params.loadings.transpose()).rowwise() + params.means.transpose();
    return (data.features() - recon).squaredNorm();
}

} // namespace

TEST(Pca, LineIsReconstructedExactly)
{
    Rng rng(1);
    Matrix x(100, 2);
    for (Index i = 0; i < 100; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = 2.0 * x(i, 0);
    }
    const UnlabeledDataset data(x);
    const double scale = (x.rowwise() - x.colwise().mean()).squaredNorm();
    EXPECT_LE(reconstruction_error(data, 1), 1e-16 * scale);
}

TEST(Pca, FullBasisPreservesDistances)
{
    Rng rng(2);
    Matrix x = random_matrix(rng, 300, 3);
    x.rowwise() -= x.colwise().mean();
    const auto frl = fit_pca(UnlabeledDataset(x), 3);
    const Matrix z = frl.transform(x);
    for (Index i = 0; i < 20; ++i)
        for (Index j = i + 1; j < 20; ++j)
            EXPECT_NEAR((z.row(i) - z.row(j)).norm(), (x.row(i) - x.row(j)).norm(), 1e-8);
}

TEST(Pca, MatchesCovarianceEigendecomposition)
{
    Rng rng(3);
    const Matrix x = correlated_data(rng, 200, 5);
    const auto frl = fit_pca(UnlabeledDataset(x), 2);

    // oracle: eigenvectors of the sample covariance
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Matrix cov = centered.transpose() * centered / 199.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    Matrix top(5, 2);
    top.col(0) = es.eigenvectors().col(4);
    top.col(1) = es.eigenvectors().col(3);
    EXPECT_LE(signless_distance(frl.transform(x), centered * top), 1e-8);
}

TEST(Pca, LoadingsOrthonormalAndScoresDecorrelated)
{
    Rng rng(4);
    const Matrix x = correlated_data(rng, 150, 4);
    const auto frl = fit_pca(UnlabeledDataset(x), 3);
    const auto& b = std::get<PcaParams>(frl.params()).loadings;
    EXPECT_LE((b.transpose() * b - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);

    const Matrix z = frl.transform(x);
    const double scale = z.cwiseAbs().maxCoeff();
    EXPECT_LE(z.colwise().mean().cwiseAbs().maxCoeff(), 1e-8 * scale);
    Matrix second = z.transpose() * z / static_cast<double>(z.rows());
    second.diagonal().setZero();
    EXPECT_LE(second.cwiseAbs().maxCoeff(), 1e-8 * scale * scale);
}

TEST(Pca, ReconstructionErrorNonincreasingInP)
{
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const UnlabeledDataset data(correlated_data(rng, 60, 6));
        double prev = std::numeric_limits<double>::infinity();
        for (Index p = 1; p <= 6; ++p) {
            const double e = reconstruction_error(data, p);
            EXPECT_LE(e, prev + 1e-9);
            prev = e;
        }
    }
}

TEST(Pca, SignConvention)
{
    Rng rng(6);
    const auto frl = fit_pca(UnlabeledDataset(correlated_data(rng, 80, 4)), 3);
    const auto& b = std::get<PcaParams>(frl.params()).loadings;
    for (Index c = 0; c < b.cols(); ++c) {
        Index at = 0;
        b.col(c).cwiseAbs().maxCoeff(&at);
        EXPECT_GE(b(at, c), 0.0);
    }
}

TEST(Pca, ZeroVarianceInputGivesZeroScores)
{
    Rng rng(7);
    const Matrix x = correlated_data(rng, 40, 3);
    const auto frl = fit_pca(UnlabeledDataset(x), 2);
    const Matrix at_mean = x.colwise().mean().replicate(5, 1);
    EXPECT_LE(frl.transform(at_mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, Errors)
{
    Rng rng(8);
    const UnlabeledDataset data(random_matrix(rng, 5, 3));
    EXPECT_THROW(fit_pca(data, 0), Error);
    EXPECT_THROW(fit_pca(data, 4), Error);
    EXPECT_THROW(fit_pca(UnlabeledDataset(random_matrix(rng, 3, 5)), 3), Error); // p > N - 1
    const auto frl = fit_pca(data, 2);
    EXPECT_THROW(frl.transform(Matrix::Zero(2, 2)), Error);
}

TEST(Pca, RankDeficientDataShrinksWithWarning)
{
    Rng rng(9);
    Matrix x(50, 3);
    for (Index i = 0; i < 50; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = -x(i, 0);
        x(i, 2) = 3.0 * x(i, 0);
    }
    const auto frl = fit_pca(UnlabeledDataset(x), 3);
    EXPECT_EQ(frl.output_dim(), 1);
    EXPECT_FALSE(frl.warnings().empty());
}

TEST(Transform, IdentityAndBatching)
{
    Rng rng(10);
    const Matrix x = random_matrix(rng, 30, 3);
    EXPECT_EQ(fit_identity(3).transform(x), x);

    const UnlabeledDataset data(correlated_data(rng, 100, 3));
    for (const auto& frl : {fit_pca(data, 2), fit_kpca(data, KernelSpec::gaussian(), 2)}) {
        const Matrix batch = frl.transform(x);
        for (Index i = 0; i < x.rows(); ++i) {
            const Matrix one = frl.transform(x.row(i));
            for (Index k = 0; k < batch.cols(); ++k)
                EXPECT_EQ(one(0, k), batch(i, k)) << frl.name() << " row " << i;
        }
    }
}

TEST(Kpca, LinearKernelEqualsPca)
{
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 20 + static_cast<Index>(rng.uniform_index(60));
        const Index d = 2 + static_cast<Index>(rng.uniform_index(4));
        const UnlabeledDataset data(correlated_data(rng, n, d));
        const Index p = 1 + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(d)));
        const auto pca = fit_pca(data, p);
        const auto kpca = fit_kpca(data, KernelSpec::linear(), p);
        ASSERT_EQ(kpca.output_dim(), pca.output_dim());
        EXPECT_LE(signless_distance(kpca.transform(data.features()), pca.transform(data.features())), 1e-6);
        const Matrix fresh = random_matrix(rng, 7, d);
        EXPECT_LE(signless_distance(kpca.transform(fresh), pca.transform(fresh)), 1e-6);
    }
}

TEST(Kpca, TrainingRowsReproduceTrainingScores)
{
    Rng rng(12);
    const UnlabeledDataset data(random_matrix(rng, 80, 2));
    for (auto kernel : {KernelSpec::gaussian(), KernelSpec::polynomial(), KernelSpec::sigmoid(), KernelSpec::cosine()}) {
        const auto frl = fit_kpca(data, kernel, 2);
        const auto& params = std::get<KpcaParams>(frl.params());
        // training scores from the eigen-decomposition: sqrt(lambda) * alpha
        Matrix expected = params.coefficients;
        for (Index c = 0; c < expected.cols(); ++c)
            expected.col(c) *= params.eigenvalues(c);
        EXPECT_LE((frl.transform(data.features()) - expected).cwiseAbs().maxCoeff(), 1e-8)
            << to_string(kernel.kind);
    }
}

TEST(Kpca, GaussianKernelIsPsdWithUnitDiagonal)
{
    Rng rng(13);
    const Matrix x = random_matrix(rng, 120, 3);
    const auto spec = resolve_kernel(KernelSpec::gaussian(), x);
    const Matrix k = kernel_matrix(spec, x, x);
    EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((k.diagonal().array() - 1.0).abs().maxCoeff(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);

    Matrix kc = k;
    const Vector r = k.rowwise().mean();
    kc.colwise() -= r;
    kc.rowwise() -= r.transpose();
    kc.array() += r.mean();
    EXPECT_LE(kc.rowwise().sum().cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Kpca, DefaultHyperparameters)
{
    Matrix x(2, 2);
    x << 0.0, 1.0, 2.0, 3.0; // entries 0..3, population variance 1.25
    EXPECT_DOUBLE_EQ(*resolve_kernel(KernelSpec::gaussian(), x).gamma, 1.0 / (2.0 * 1.25));
    const auto poly = resolve_kernel(KernelSpec::polynomial(), x);
    EXPECT_DOUBLE_EQ(*poly.gamma, 0.5);
    EXPECT_EQ(poly.degree, 3);
    EXPECT_DOUBLE_EQ(poly.coef0, 1.0);
    const auto sig = resolve_kernel(KernelSpec::sigmoid(), x);
    EXPECT_DOUBLE_EQ(*sig.gamma, 0.5);
    EXPECT_DOUBLE_EQ(sig.coef0, 0.0);
}

TEST(Kpca, CosineKernelWithZeroRow)
{
    Matrix x(2, 2);
    x << 0.0, 0.0, 1.0, 1.0;
    const Matrix k = kernel_matrix(KernelSpec::cosine(), x, x);
    EXPECT_EQ(k(0, 0), 0.0);
    EXPECT_EQ(k(0, 1), 0.0);
    EXPECT_NEAR(k(1, 1), 1.0, 1e-15);
}

TEST(Kpca, DegenerateSpectrumShrinksDimension)
{
    Rng rng(14);
    // cosine kernel in 2-D has rank 2, so at most 2 centered eigenvalues survive
    const auto frl = fit_kpca(UnlabeledDataset(random_matrix(rng, 50, 2)), KernelSpec::cosine(), 5);
    EXPECT_LE(frl.output_dim(), 2);
    EXPECT_FALSE(frl.warnings().empty());
    for (double v : std::get<KpcaParams>(frl.params()).eigenvalues)
        EXPECT_GT(v, 1e-10);
}

TEST(Kpca, Errors)
{
    Rng rng(15);
    const UnlabeledDataset data(random_matrix(rng, 6, 2));
    EXPECT_THROW(fit_kpca(data, KernelSpec::gaussian(), 6), Error);
    EXPECT_THROW(fit_kpca(data, KernelSpec::gaussian(-1.0), 2), Error);
    EXPECT_THROW(fit_kpca(data, KernelSpec::polynomial(0), 2), Error);
    // tanh never overflows, but a huge polynomial does
    Matrix big = Matrix::Constant(6, 2, 1e120);
    big(0, 0) = 0.0;
    EXPECT_THROW(fit_kpca(UnlabeledDataset(big), KernelSpec::polynomial(3, 1.0, 0.0), 2), Error);
}

TEST(Eigensolver, LanczosMatchesDense)
{
    Rng rng(16);
    const Matrix x = random_matrix(rng, 900, 2);
    const auto spec = resolve_kernel(KernelSpec::gaussian(), x);
    Matrix k = kernel_matrix(spec, x, x);
    const auto lanczos = top_eigenpairs(k, 3);
    TopEigenOptions dense;
    dense.dense_threshold = 100000;
    const auto exact = top_eigenpairs(k, 3, dense);
    for (Index i = 0; i < 3; ++i) {
        EXPECT_NEAR(lanczos.values(i), exact.values(i), 1e-9 * exact.values(0));
        EXPECT_LE(signless_distance(lanczos.vectors.col(i), exact.vectors.col(i)), 1e-7);
    }
}

TEST(Eigensolver, LowRankMatrixTriggersRestart)
{
    Rng rng(17);
    const Matrix u = random_matrix(rng, 700, 2);
    const Matrix a = u * u.transpose();
    const auto top = top_eigenpairs(a, 3);
    TopEigenOptions dense;
    dense.dense_threshold = 100000;
    const auto exact = top_eigenpairs(a, 3, dense);
    EXPECT_NEAR(top.values(0), exact.values(0), 1e-9 * exact.values(0));
    EXPECT_NEAR(top.values(1), exact.values(1), 1e-9 * exact.values(0));
    EXPECT_NEAR(top.values(2), 0.0, 1e-8 * exact.values(0));
}

namespace {

class SquareFeatures final : public CustomFrl {
public:
    std::string name() const override { return "squares"; }
    Index input_dim() const override { return 2; }
    Index output_dim() const override { return 2; }
    Matrix transform(const Matrix& rows) const override { return rows.array().square().matrix(); }
};

} // namespace

TEST(CustomFrl, PluginIsFittedAndApplied)
{
    Rng rng(18);
    const UnlabeledDataset data(random_matrix(rng, 10, 2));
    const auto frl = fit_custom(data, [](const UnlabeledDataset&) { return std::make_shared<const SquareFeatures>(); });
    EXPECT_EQ(frl.kind(), FrlKind::Custom);
    EXPECT_EQ(frl.name(), "squares");
    Matrix x(1, 2);
    x << 2.0, -3.0;
    const Matrix z = frl.transform(x);
    EXPECT_EQ(z(0, 0), 4.0);
    EXPECT_EQ(z(0, 1), 9.0);
}
