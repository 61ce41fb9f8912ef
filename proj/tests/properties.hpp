#ifndef PEARL_TEST_PROPERTIES_HPP
#define PEARL_TEST_PROPERTIES_HPP

// Randomized property checks shared by the unit tests and the acceptance
// binary. Each returns the worst observed violation so callers can report it.

#include "test_util.hpp"

#include <sstream>

namespace pearl::testing {

/// Seeded CV table with J candidates for the given surrogate. Regression
/// candidates are noisy, biased copies of y; classification candidates are
/// random probability rows tilted toward the true class by a random amount.
inline CvPredictionTable random_table(Rng& rng, SurrogateLoss loss, Index j, Index n = 40)
{
    CvPredictionTable t;
    if (loss == SurrogateLoss::SquaredError) {
        const Vector y = random_vector(rng, n);
        t.truth = RealTargets{y};
        for (Index k = 0; k < j; ++k) {
            const double sd = 0.2 + rng.uniform();
            const double bias = 0.3 * rng.normal();
            t.blocks.push_back(PredictionBlock::regression((y + random_vector(rng, n, sd)).array() + bias));
        }
        return t;
    }
    const int classes = loss == SurrogateLoss::Hinge ? 2 : 3;
    const auto labels = random_labels(rng, n, classes);
    t.truth = labels;
    for (Index k = 0; k < j; ++k) {
        const double tilt = 2.0 * rng.uniform();
        Matrix p = random_probabilities(rng, n, classes);
        for (Index i = 0; i < n; ++i) {
            p(i, labels.labels[static_cast<std::size_t>(i)]) += tilt * rng.uniform();
            p.row(i) /= p.row(i).sum();
        }
        t.blocks.push_back(PredictionBlock::classification(p));
    }
    return t;
}

struct DominanceReport {
    double worst_vs_vertex = -std::numeric_limits<double>::infinity(); // max F(w) - min_j F(e_j)
    double worst_vs_uniform = -std::numeric_limits<double>::infinity(); // max F(w) - F(1/J)
    int instances = 0;
};

inline DominanceReport check_dominance(SurrogateLoss loss, int instances, std::uint64_t seed)
{
    DominanceReport r;
    Rng rng(seed);
    for (int s = 0; s < instances; ++s) {
        const Index j = 2 + static_cast<Index>(rng.uniform_index(9));
        const Index n = 20 + static_cast<Index>(rng.uniform_index(60));
        const WeightObjective obj(random_table(rng, loss, j, n), loss);
        const auto sol = solve_weights(obj);
        double best_vertex = std::numeric_limits<double>::infinity();
        for (Index k = 0; k < j; ++k)
            best_vertex = std::min(best_vertex, obj.value(obj.unit(k)));
        r.worst_vs_vertex = std::max(r.worst_vs_vertex, sol.objective - best_vertex);
        r.worst_vs_uniform = std::max(r.worst_vs_uniform, sol.objective - obj.value(WeightVector::uniform(j).values()));
        ++r.instances;
    }
    return r;
}

/// Fast exact evaluator for grid search. Squared error is a quadratic form
/// in w; cross entropy only reads each row's true-class probability.
class GridEvaluator {
public:
    GridEvaluator(const CvPredictionTable& t, SurrogateLoss loss) : loss_(loss)
    {
        const Index n = target_size(t.truth);
        const auto j = static_cast<Index>(t.blocks.size());
        if (loss == SurrogateLoss::SquaredError) {
            const Vector& y = std::get<RealTargets>(t.truth).values;
            Matrix p(n, j);
            for (Index k = 0; k < j; ++k)
                p.col(k) = t.blocks[static_cast<std::size_t>(k)].values().col(0);
            gram_ = p.transpose() * p / static_cast<double>(n);
            lin_ = p.transpose() * y / static_cast<double>(n);
            constant_ = y.squaredNorm() / static_cast<double>(n);
        } else {
            require(loss == SurrogateLoss::CrossEntropy, "grid evaluator supports squared error and cross entropy");
            const auto& c = std::get<ClassTargets>(t.truth);
            q_.resize(n, j);
            for (Index k = 0; k < j; ++k)
                for (Index i = 0; i < n; ++i)
                    q_(i, k) = t.blocks[static_cast<std::size_t>(k)].values()(i, c.labels[static_cast<std::size_t>(i)]);
        }
    }

    double operator()(const Vector& w) const
    {
        if (loss_ == SurrogateLoss::SquaredError)
            return w.dot(gram_ * w) - 2.0 * lin_.dot(w) + constant_;
        double total = 0.0;
        for (Index i = 0; i < q_.rows(); ++i)
            total -= std::log(std::max(q_.row(i).dot(w), kProbabilityFloor));
        return total / static_cast<double>(q_.rows());
    }

private:
    SurrogateLoss loss_;
    Matrix gram_;
    Vector lin_;
    double constant_ = 0.0;
    Matrix q_;
};

struct GridReport {
    double worst_gap = -std::numeric_limits<double>::infinity(); // max F(w_solver) - min_grid F
    double evaluator_mismatch = 0.0;                            // fast evaluator vs WeightObjective
    int instances = 0;
};

inline GridReport check_grid_search(SurrogateLoss loss, Index j, int instances, std::uint64_t seed,
                                    double resolution = 1e-3)
{
    GridReport r;
    Rng rng(seed);
    const auto grid = simplex_grid(j, resolution);
    for (int s = 0; s < instances; ++s) {
        const auto table = random_table(rng, loss, j, 30);
        const WeightObjective obj(table, loss);
        const GridEvaluator fast(table, loss);
        for (int probe = 0; probe < 5; ++probe) {
            const Vector w = random_simplex_point(rng, j);
            r.evaluator_mismatch = std::max(r.evaluator_mismatch, std::abs(fast(w) - obj.value(w)));
        }
        double best = std::numeric_limits<double>::infinity();
        for (const auto& w : grid)
            best = std::min(best, fast(w));
        r.worst_gap = std::max(r.worst_gap, solve_weights(obj).objective - best);
        ++r.instances;
    }
    return r;
}

/// Worst |d - d_grid| where d is the distance from v to its projection and
/// d_grid the smallest distance from v to a grid point of the simplex.
inline double check_projection_grid(Index j, int instances, std::uint64_t seed, double resolution = 1e-3)
{
    Rng rng(seed);
    const auto grid = simplex_grid(j, resolution);
    double worst = 0.0;
    for (int s = 0; s < instances; ++s) {
        const Vector v = random_vector(rng, j, 1.5);
        const Vector p = project_onto_simplex(v);
        require(std::abs(p.sum() - 1.0) < 1e-12 && p.minCoeff() >= 0.0, "projection left the simplex");
        double best = std::numeric_limits<double>::infinity();
        for (const auto& w : grid)
            best = std::min(best, (v - w).norm());
        const double d = (v - p).norm();
        // the projection can only beat the grid, and by at most the grid spacing
        worst = std::max(worst, std::max(d - best, best - d - resolution));
    }
    return worst;
}

/// Worst relative error ||analytic - numeric|| / ||numeric|| of the loss
/// gradient over random probes (hinge probes stay away from the kink).
inline double check_loss_gradients(SurrogateLoss loss, int probes, std::uint64_t seed)
{
    Rng rng(seed);
    double worst = 0.0;
    for (int s = 0; s < probes; ++s) {
        const Index n = 3 + static_cast<Index>(rng.uniform_index(6));
        Targets truth;
        Matrix pred;
        if (loss == SurrogateLoss::SquaredError && rng.uniform() < 0.5) {
            truth = RealTargets{random_vector(rng, n)};
            pred = random_matrix(rng, n, 1);
        } else if (loss == SurrogateLoss::Hinge) {
            Vector y(n);
            pred.resize(n, 1);
            for (Index i = 0; i < n; ++i) {
                y(i) = rng.uniform() < 0.5 ? -1.0 : 1.0;
                double m = 0.0;
                do
                    m = 2.0 * rng.normal();
                while (std::abs(1.0 - y(i) * m) < 1e-3);
                pred(i, 0) = m;
            }
            truth = RealTargets{y};
        } else {
            const int classes = 2 + static_cast<int>(rng.uniform_index(3));
            truth = random_labels(rng, n, classes);
            pred = random_probabilities(rng, n, classes);
        }
        const Matrix analytic = loss_gradient_wrt_pred(loss, truth, pred);
        const Matrix numeric =
            central_differences([&](const Matrix& x) { return loss_value(loss, truth, x); }, pred, 1e-6);
        const double scale = std::max(numeric.norm(), 1e-300);
        worst = std::max(worst, (analytic - numeric).norm() / scale);
    }
    return worst;
}

/// Worst convexity violation F(tw1 + (1-t)w2) - tF(w1) - (1-t)F(w2) over
/// random simplex pairs.
inline double check_convexity(SurrogateLoss loss, int pairs, std::uint64_t seed)
{
    Rng rng(seed);
    double worst = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < pairs; ++s) {
        const Index j = 2 + static_cast<Index>(rng.uniform_index(5));
        const WeightObjective obj(random_table(rng, loss, j, 25), loss);
        const Vector a = random_simplex_point(rng, j);
        const Vector b = random_simplex_point(rng, j);
        const double t = rng.uniform();
        worst = std::max(worst, obj.value(t * a + (1.0 - t) * b) - t * obj.value(a) - (1.0 - t) * obj.value(b));
    }
    return worst;
}

/// Worst score disagreement (up to column sign) between linear-kernel KPCA
/// and PCA on random data.
inline double check_kpca_linear_equals_pca(int datasets, std::uint64_t seed)
{
    Rng rng(seed);
    double worst = 0.0;
    for (int s = 0; s < datasets; ++s) {
        const Index n = 20 + static_cast<Index>(rng.uniform_index(60));
        const Index d = 2 + static_cast<Index>(rng.uniform_index(4));
        const Matrix x = random_matrix(rng, n, d) * random_matrix(rng, d, d);
        const UnlabeledDataset data(x);
        const Index p = 1 + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(d)));
        const auto pca = fit_pca(data, p);
        const auto kpca = fit_kpca(data, KernelSpec::linear(), p);
        if (pca.output_dim() != kpca.output_dim())
            return std::numeric_limits<double>::infinity();
        const Matrix probe = random_matrix(rng, 10, d);
        for (const Matrix* rows : {&x, &probe}) {
            const Matrix a = pca.transform(*rows);
            const Matrix b = kpca.transform(*rows);
            for (Index c = 0; c < a.cols(); ++c)
                worst = std::max(worst, std::min((a.col(c) - b.col(c)).cwiseAbs().maxCoeff(),
                                                 (a.col(c) + b.col(c)).cwiseAbs().maxCoeff()));
        }
    }
    return worst;
}

struct PcaReport {
    double orthonormality = 0.0;       // max |B'B - I|
    double reconstruction_rise = 0.0;  // max increase of reconstruction error when p grows
};

inline PcaReport check_pca_structure(int datasets, std::uint64_t seed)
{
    PcaReport r;
    Rng rng(seed);
    for (int s = 0; s < datasets; ++s) {
        const Index d = 2 + static_cast<Index>(rng.uniform_index(6));
        const Matrix x = random_matrix(rng, 50, d) * random_matrix(rng, d, d);
        const UnlabeledDataset data(x);
        double prev = std::numeric_limits<double>::infinity();
        for (Index p = 1; p <= d; ++p) {
            const auto frl = fit_pca(data, p);
            const auto& params = std::get<PcaParams>(frl.params());
            const Matrix& b = params.loadings;
            r.orthonormality = std::max(
                r.orthonormality,
                (b.transpose() * b - Matrix::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff());
            const Matrix recon = (frl.transform(x) * b.transpose()).rowwise() + params.means.transpose();
            const double err = (x - recon).squaredNorm() / x.squaredNorm();
            if (std::isfinite(prev))
                r.reconstruction_rise = std::max(r.reconstruction_rise, err - prev);
            prev = err;
        }
    }
    return r;
}

/// Monte Carlo mean of sin^2(X), X ~ N(0, 1), through the synthetic
/// generator with zero coefficients and no noise.
inline double sin_squared_mean(Index draws, std::uint64_t seed)
{
    SyntheticConfig cfg;
    cfg.sigma = 0.0;
    cfg.n_labeled = draws;
    cfg.n_unlabeled = 2;
    cfg.n_test = 2;
    cfg.seed = seed;
    cfg.coefficients = std::array<double, 6>{};
    const auto data = generate_synthetic(cfg, 0);
    return std::get<RealTargets>(data.labeled.target()).values.mean();
}

} // namespace pearl::testing

#endif // PEARL_TEST_PROPERTIES_HPP
