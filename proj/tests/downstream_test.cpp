#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace pearl;
using pearl::testing::random_matrix;
using pearl::testing::random_vector;

namespace {

const RidgeParams& ridge_of(const FittedPredictor& f) { return std::get<RidgeParams>(f.params()); }
const SoftmaxParams& softmax_of(const FittedPredictor& f) { return std::get<SoftmaxParams>(f.params()); }

} // namespace

TEST(Ridge, RecoversExactLine)
{
    Matrix z(5, 1);
    z << 1, 2, 3, 4, 5;
    const Vector y = (3.0 * z.col(0)).array() + 1.0;
    const auto fit = fit_ridge(z, y, 0.0);
    EXPECT_NEAR(ridge_of(fit).coef(0), 3.0, 1e-10);
    EXPECT_NEAR(ridge_of(fit).intercept, 1.0, 1e-10);
    EXPECT_TRUE(fit.warnings().empty());
}

TEST(Ridge, HugePenaltyPredictsTheMean)
{
    Rng rng(1);
    const Matrix z = random_matrix(rng, 40, 3);
    const Vector y = random_vector(rng, 40);
    const auto fit = fit_ridge(z, y, 1e12);
    EXPECT_LE(ridge_of(fit).coef.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(ridge_of(fit).intercept, y.mean(), 1e-9);
}

TEST(Ridge, MatchesAugmentedLeastSquares)
{
    Rng rng(2);
    const Index n = 50, p = 3;
    const double lambda = 0.1;
    const Matrix z = random_matrix(rng, n, p);
    const Vector y = random_vector(rng, n);
    const auto fit = fit_ridge(z, y, lambda);

    // oracle: [1 Z; 0 sqrt(lambda) I] [b0; b] ~ [y; 0], unpenalized intercept
    Matrix a = Matrix::Zero(n + p, p + 1);
    a.col(0).head(n).setOnes();
    a.block(0, 1, n, p) = z;
    a.block(n, 1, p, p) = std::sqrt(lambda) * Matrix::Identity(p, p);
    Vector b = Vector::Zero(n + p);
    b.head(n) = y;
    const Vector sol = a.colPivHouseholderQr().solve(b);
    EXPECT_NEAR(ridge_of(fit).intercept, sol(0), 1e-8);
    EXPECT_LE((ridge_of(fit).coef - sol.tail(p)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Ridge, ResidualsOrthogonalAtZeroPenalty)
{
    Rng rng(3);
    const Matrix z = random_matrix(rng, 60, 4);
    const Vector y = random_vector(rng, 60);
    const auto fit = fit_ridge(z, y, 0.0);
    const Vector resid = y - fit.predict(z).values().col(0);
    EXPECT_NEAR(resid.sum(), 0.0, 1e-9);
    EXPECT_LE((z.transpose() * resid).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ridge, SingularSystemRetriesWithWarning)
{
    Rng rng(4);
    Matrix z(20, 2);
    z.col(0) = random_vector(rng, 20);
    z.col(1) = 2.0 * z.col(0);
    const auto fit = fit_ridge(z, random_vector(rng, 20), 0.0);
    EXPECT_EQ(ridge_of(fit).lambda, 1e-8);
    ASSERT_EQ(fit.warnings().size(), 1u);
    EXPECT_TRUE(ridge_of(fit).coef.allFinite());
}

TEST(Ridge, AffineEquivariance)
{
    Rng rng(5);
    const Matrix z = random_matrix(rng, 30, 2);
    const Vector y = random_vector(rng, 30);
    const double a = -2.5, b = 4.0;
    const Vector y2 = (a * y).array() + b;
    const Vector base = fit_ridge(z, y, 0.0).predict(z).values().col(0);
    const Vector moved = fit_ridge(z, y2, 0.0).predict(z).values().col(0);
    EXPECT_LE((moved - ((a * base).array() + b).matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ridge, PredictReproducesFittedValues)
{
    Rng rng(6);
    const Matrix z = random_matrix(rng, 25, 3);
    const Vector y = random_vector(rng, 25);
    const auto fit = fit_ridge(z, y, 0.5);
    const auto& params = ridge_of(fit);
    const Vector fitted = (z * params.coef).array() + params.intercept;
    EXPECT_LE((fit.predict(z).values().col(0) - fitted).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(fit.predict(random_matrix(rng, 2, 2)), Error);
}

TEST(Ridge, Errors)
{
    EXPECT_THROW(fit_ridge(Matrix::Zero(3, 1), Vector::Zero(2), 0.0), Error);
    EXPECT_THROW(fit_ridge(Matrix::Zero(3, 1), Vector::Zero(3), -1.0), Error);
    EXPECT_THROW(fit_downstream(Matrix::Zero(3, 1), ClassTargets{{0, 1, 0}, 2}, DownstreamConfig{}), Error);
}

TEST(Softmax, SeparableDataIsClassifiedPerfectly)
{
    Rng rng(7);
    Matrix z(60, 2);
    ClassTargets y{{}, 3};
    const double centers[3][2] = {{0, 5}, {5, 0}, {-5, -5}};
    for (Index i = 0; i < 60; ++i) {
        const int k = static_cast<int>(i % 3);
        z(i, 0) = centers[k][0] + 0.3 * rng.normal();
        z(i, 1) = centers[k][1] + 0.3 * rng.normal();
        y.labels.push_back(k);
    }
    const auto fit = fit_softmax(z, y, 1e-4);
    const auto metrics = metric_suite(y, fit.predict(z));
    ASSERT_TRUE(metrics.accuracy);
    EXPECT_EQ(*metrics.accuracy, 1.0);
}

TEST(Softmax, ZeroIterationsGiveUniformProbabilities)
{
    Rng rng(8);
    const Matrix z = random_matrix(rng, 10, 2);
    const auto fit = fit_softmax(z, ClassTargets{{0, 1, 2, 3, 0, 1, 2, 3, 0, 1}, 4}, 1e-4, 0);
    const Matrix p = fit.predict(z).values();
    EXPECT_LE((p.array() - 0.25).abs().maxCoeff(), 1e-15);
    EXPECT_EQ(softmax_of(fit).iterations, 0);
    EXPECT_FALSE(fit.warnings().empty());
}

TEST(Softmax, GradientMatchesFiniteDifferences)
{
    Rng rng(9);
    const Matrix x = detail::with_intercept_column(random_matrix(rng, 15, 3));
    const ClassTargets y = pearl::testing::random_labels(rng, 15, 3);
    const Matrix w = random_matrix(rng, 4, 3, 0.5);
    const double l2 = 0.01;
    const Matrix analytic = detail::softmax_gradient(x, y, w, l2);
    const Matrix numeric = pearl::testing::central_differences(
        [&](const Matrix& v) { return detail::softmax_objective(x, y, v, l2); }, w);
    EXPECT_LE((analytic - numeric).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Softmax, ObjectiveTraceIsNonincreasing)
{
    Rng rng(10);
    const Matrix z = random_matrix(rng, 80, 3);
    ClassTargets y{{}, 2};
    for (Index i = 0; i < 80; ++i)
        y.labels.push_back(z(i, 0) + 0.5 * rng.normal() > 0 ? 1 : 0);
    const auto fit = fit_softmax(z, y, 1e-3);
    const auto& trace = softmax_of(fit).objective_trace;
    ASSERT_GE(trace.size(), 2u);
    for (std::size_t i = 1; i < trace.size(); ++i)
        EXPECT_LE(trace[i], trace[i - 1]);
    EXPECT_LT(softmax_of(fit).gradient_norm, 1e-6);
    EXPECT_TRUE(fit.warnings().empty());
}

TEST(Softmax, MissingClassIsAnError)
{
    EXPECT_THROW(fit_softmax(Matrix::Zero(3, 1), ClassTargets{{0, 0, 2}, 3}, 1e-4), Error);
    EXPECT_THROW(fit_softmax(Matrix::Zero(3, 1), ClassTargets{{0, 1}, 2}, 1e-4), Error);
    EXPECT_THROW(fit_downstream(Matrix::Zero(3, 1), RealTargets{Vector::Zero(3)},
                                DownstreamConfig{DownstreamModel::Softmax}),
                 Error);
}
