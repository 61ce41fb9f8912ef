#ifndef PEARL_WEIGHTS_HPP
#define PEARL_WEIGHTS_HPP

#include "pearl/candidates.hpp"
#include "pearl/core.hpp"
#include "pearl/downstream.hpp"
#include "pearl/frl.hpp"
#include "pearl/parallel.hpp"
#include "pearl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace pearl {

/// K-fold partition of rows 0..n-1.
struct CvPlan {
    int folds = 5;
    std::vector<int> assignment; // fold of each row
    std::uint64_t seed = 0;

    Index size() const noexcept { return static_cast<Index>(assignment.size()); }

    std::vector<int> rows_in(int fold) const
    {
        std::vector<int> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] == fold)
                out.push_back(static_cast<int>(i));
        return out;
    }

    std::vector<int> rows_outside(int fold) const
    {
        std::vector<int> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] != fold)
                out.push_back(static_cast<int>(i));
        return out;
    }
};

/// Seeded permutation chopped into K contiguous chunks whose sizes differ by
/// at most one; the first n mod K folds get the extra row.
inline CvPlan make_cv_plan(Index n, int folds, std::uint64_t seed)
{
    require(folds >= 2 && static_cast<Index>(folds) <= n,
            "fold count " + std::to_string(folds) + " outside [2, " + std::to_string(n) + "]");
    Rng rng(seed);
    const auto perm = rng.permutation(static_cast<int>(n));
    CvPlan plan{folds, std::vector<int>(static_cast<std::size_t>(n)), seed};
    const Index base = n / folds;
    const Index extra = n % folds;
    Index pos = 0;
    for (int k = 0; k < folds; ++k) {
        const Index len = base + (k < extra ? 1 : 0);
        for (Index i = 0; i < len; ++i)
            plan.assignment[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos + i)])] = k;
        pos += len;
    }
    return plan;
}

/// Point of the probability simplex.
class WeightVector {
public:
    /// Entries in [-1e-12, 1e-12) are set to zero and the rest renormalized.
    explicit WeightVector(Vector w) : w_(std::move(w))
    {
        require(w_.size() >= 1, "weight vector must be nonempty");
        require(w_.allFinite(), "weight vector must be finite");
        for (Index j = 0; j < w_.size(); ++j) {
            require(w_(j) >= -1e-12, "weight " + std::to_string(j + 1) + " is negative");
            if (w_(j) < 1e-12)
                w_(j) = 0.0;
        }
        const double s = w_.sum();
        require(s > 0.0, "weight vector sums to zero");
        w_ /= s;
        require(std::abs(w_.sum() - 1.0) <= 1e-9, "weights do not sum to 1");
    }

    static WeightVector uniform(Index j) { return WeightVector(Vector::Constant(j, 1.0 / static_cast<double>(j))); }
    static WeightVector vertex(Index j, Index at)
    {
        Vector w = Vector::Zero(j);
        w(at) = 1.0;
        return WeightVector(std::move(w));
    }

    const Vector& values() const noexcept { return w_; }
    double operator[](Index j) const { return w_(j); }
    Index size() const noexcept { return w_.size(); }

private:
    Vector w_;
};

/// Euclidean projection onto {w >= 0, sum w = 1} by sort-and-threshold.
inline Vector project_onto_simplex(const Vector& v)
{
    require(v.size() >= 1 && v.allFinite(), "simplex projection needs a finite nonempty vector");
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cumsum += u[i];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0)
            theta = t;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

inline WeightVector project_to_simplex(const Vector& v) { return WeightVector(project_onto_simplex(v)); }

/// Per-candidate predictions for the n labeled rows: out-of-fold when a CV
/// plan is attached, in-sample otherwise.
struct CvPredictionTable {
    std::vector<PredictionBlock> blocks;
    Targets truth;
    std::optional<CvPlan> plan;

    std::size_t candidates() const noexcept { return blocks.size(); }
};

inline void validate_table(const CvPredictionTable& t)
{
    require(!t.blocks.empty(), "prediction table has no candidates");
    const Index n = target_size(t.truth);
    for (std::size_t j = 0; j < t.blocks.size(); ++j) {
        require(t.blocks[j].rows() == n, "candidate " + std::to_string(j + 1) + " has the wrong row count");
        require(t.blocks[j].kind() == t.blocks[0].kind() && t.blocks[j].cols() == t.blocks[0].cols(),
                "candidate " + std::to_string(j + 1) + " disagrees with the others on task or width");
        require(all_finite(t.blocks[j].values()), "candidate " + std::to_string(j + 1) + " has non-finite predictions");
    }
}

namespace detail {

inline std::string where(std::size_t j, int k)
{
    return "candidate " + std::to_string(j + 1) + ", fold " + std::to_string(k + 1);
}

} // namespace detail

/// Out-of-fold predictions: for each candidate j and fold k, refit g_j on
/// the rows outside fold k and predict fold k. Representations are not
/// refitted. Fits run on up to `threads` workers; the table is assembled in
/// (j, k) order regardless.
inline CvPredictionTable cv_predictions(const Targets& truth, const CandidatePool& pool,
                                        const std::vector<Matrix>& foundation, const CvPlan& plan,
                                        const DownstreamConfig& cfg, int threads = 1)
{
    const Index n = target_size(truth);
    require(plan.size() == n, "CV plan size does not match the labeled rows");
    const std::size_t jcount = pool.size();
    const auto kcount = static_cast<std::size_t>(plan.folds);

    std::vector<Matrix> realized(jcount);
    for (std::size_t j = 0; j < jcount; ++j) {
        realized[j] = realize(pool, foundation, j);
        require(realized[j].rows() == n, "candidate " + std::to_string(j + 1) + " has the wrong row count");
    }
    std::vector<std::vector<int>> test_rows(kcount), train_rows(kcount);
    std::vector<Targets> train_truth;
    for (std::size_t k = 0; k < kcount; ++k) {
        test_rows[k] = plan.rows_in(static_cast<int>(k));
        train_rows[k] = plan.rows_outside(static_cast<int>(k));
        require(!test_rows[k].empty() && !train_rows[k].empty(), "CV fold " + std::to_string(k + 1) + " is empty");
        train_truth.push_back(subset_targets(truth, train_rows[k]));
    }

    const Index width = task_of(truth) == TaskKind::Regression ? 1 : std::get<ClassTargets>(truth).num_classes;
    std::vector<Matrix> values(jcount, Matrix::Zero(n, width));
    parallel_for(jcount * kcount, threads, [&](std::size_t task) {
        const std::size_t j = task / kcount;
        const std::size_t k = task % kcount;
        try {
            const auto model = fit_downstream(subset_rows(realized[j], train_rows[k]), train_truth[k], cfg);
            const auto pred = model.predict(subset_rows(realized[j], test_rows[k]));
            for (std::size_t i = 0; i < test_rows[k].size(); ++i)
                values[j].row(test_rows[k][i]) = pred.values().row(static_cast<Index>(i));
        } catch (const Error& e) {
            throw Error(detail::where(j, static_cast<int>(k)) + ": " + e.what());
        }
    });

    CvPredictionTable table{{}, truth, plan};
    table.blocks.reserve(jcount);
    const TaskKind kind = task_of(truth);
    for (auto& v : values)
        table.blocks.push_back(PredictionBlock::make(kind, std::move(v)));
    return table;
}

/// In-sample predictions of full-data fits (no cross-validation).
inline CvPredictionTable in_sample_predictions(const Targets& truth, const CandidatePool& pool,
                                               const std::vector<Matrix>& foundation, const DownstreamConfig& cfg)
{
    CvPredictionTable table{{}, truth, std::nullopt};
    for (std::size_t j = 0; j < pool.size(); ++j) {
        const Matrix z = realize(pool, foundation, j);
        try {
            table.blocks.push_back(fit_downstream(z, truth, cfg).predict(z));
        } catch (const Error& e) {
            throw Error("candidate " + std::to_string(j + 1) + ": " + e.what());
        }
    }
    return table;
}

/// Weighted sum of candidate predictions.
inline PredictionBlock aggregate(const std::vector<PredictionBlock>& blocks, const WeightVector& w)
{
    require(!blocks.empty() && static_cast<Index>(blocks.size()) == w.size(),
            "weight count does not match candidate count");
    Matrix acc = Matrix::Zero(blocks[0].rows(), blocks[0].cols());
    for (std::size_t j = 0; j < blocks.size(); ++j) {
        require(blocks[j].rows() == acc.rows() && blocks[j].cols() == acc.cols(), "candidate blocks differ in shape");
        if (w[static_cast<Index>(j)] != 0.0)
            acc += w[static_cast<Index>(j)] * blocks[j].values();
    }
    return PredictionBlock::make(blocks[0].kind(), std::move(acc));
}

/// The surrogate-loss objective F(w) = mean_i V(y_i, sum_j w_j yhat_ij)
/// over a prediction table. For the hinge surrogate, binary probability
/// blocks are converted to margins logit(p_1) clamped to [-30, 30] and the
/// labels to -1/+1.
class WeightObjective {
public:
    WeightObjective(const CvPredictionTable& table, SurrogateLoss loss) : loss_(loss), truth_(table.truth)
    {
        validate_table(table);
        const auto& first = table.blocks.front();
        rows_ = first.rows();
        cols_ = first.cols();
        if (loss == SurrogateLoss::Hinge && first.kind() == TaskKind::Classification) {
            const auto* c = std::get_if<ClassTargets>(&table.truth);
            require(c != nullptr && c->num_classes == 2 && cols_ == 2, "hinge surrogate needs a binary task");
            Vector y(rows_);
            for (Index i = 0; i < rows_; ++i)
                y(i) = c->labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
            truth_ = RealTargets{std::move(y)};
            cols_ = 1;
            stacked_.resize(rows_, static_cast<Index>(table.blocks.size()));
            for (std::size_t j = 0; j < table.blocks.size(); ++j)
                for (Index i = 0; i < rows_; ++i) {
                    const double p1 = std::clamp(table.blocks[j].values()(i, 1), kProbabilityFloor, 1.0);
                    const double p0 = std::clamp(table.blocks[j].values()(i, 0), kProbabilityFloor, 1.0);
                    stacked_(i, static_cast<Index>(j)) = std::clamp(std::log(p1) - std::log(p0), -30.0, 30.0);
                }
        } else {
            stacked_.resize(rows_ * cols_, static_cast<Index>(table.blocks.size()));
            for (std::size_t j = 0; j < table.blocks.size(); ++j)
                stacked_.col(static_cast<Index>(j)) =
                    Eigen::Map<const Vector>(table.blocks[j].values().data(), rows_ * cols_);
        }
        // shape and label checks happen once here
        detail::check_loss_shapes(loss_, truth_, combined(Vector::Constant(candidates(), 1.0 / candidates())));
        for (Index j = 0; j < candidates(); ++j)
            require(std::isfinite(value(unit(j))), "candidate " + std::to_string(j + 1) + " has a non-finite objective");
    }

    Index candidates() const noexcept { return stacked_.cols(); }
    SurrogateLoss loss() const noexcept { return loss_; }

    Matrix combined(const Vector& w) const
    {
        const Vector flat = stacked_ * w;
        return Eigen::Map<const Matrix>(flat.data(), rows_, cols_);
    }

    double value(const Vector& w) const { return loss_value(loss_, truth_, combined(w)); }

    Vector gradient(const Vector& w) const
    {
        const Matrix g = loss_gradient_wrt_pred(loss_, truth_, combined(w));
        return stacked_.transpose() * Eigen::Map<const Vector>(g.data(), g.size());
    }

    Vector unit(Index j) const
    {
        Vector e = Vector::Zero(candidates());
        e(j) = 1.0;
        return e;
    }

private:
    SurrogateLoss loss_;
    Targets truth_;
    Matrix stacked_; // column j = candidate j's predictions flattened column-major
    Index rows_ = 0;
    Index cols_ = 0;
};

struct SolverOptions {
    int max_iter = 10000;
    double tol = 1e-9;
    double initial_step = 1.0;
    double armijo = 1e-4;
};

struct WeightSolution {
    WeightVector weights;
    double objective = 0.0;
    int iterations = 0;
    double kkt_residual = 0.0;
    std::vector<std::string> warnings;
};

namespace detail {

struct DescentResult {
    Vector w;
    double f;
    int iterations;
    bool hit_limit;
    bool stalled;
};

/// Projected gradient descent with Armijo backtracking along the projection
/// arc, restarting each line search at opts.initial_step.
inline DescentResult projected_descent(const WeightObjective& obj, Vector w, const SolverOptions& opts)
{
    double f = obj.value(w);
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        const Vector g = obj.gradient(w);
        const double kkt = (w - project_onto_simplex(w - g)).cwiseAbs().maxCoeff();
        if (kkt < opts.tol)
            return {std::move(w), f, it, false, false};
        double step = opts.initial_step;
        bool accepted = false;
        while (step > 1e-20) {
            Vector trial = project_onto_simplex(w - step * g);
            const double ft = obj.value(trial);
            if (ft <= f + opts.armijo * g.dot(trial - w)) {
                accepted = ft < f || (trial - w).cwiseAbs().maxCoeff() == 0.0;
                if (accepted) {
                    w = std::move(trial);
                    f = ft;
                }
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            return {std::move(w), f, it, false, true};
    }
    return {std::move(w), f, it, true, false};
}

} // namespace detail

/// Simplex-constrained minimization of the surrogate objective, started
/// from uniform weights. If the descent ends above some vertex e_j (which
/// can happen when the hinge kink stalls the line search), it restarts
/// from the best vertex, so the result never exceeds any vertex or the
/// uniform start.
inline WeightSolution solve_weights(const WeightObjective& obj, const SolverOptions& opts = {})
{
    const Index j = obj.candidates();
    std::vector<std::string> warnings;
    auto run = detail::projected_descent(obj, Vector::Constant(j, 1.0 / static_cast<double>(j)), opts);
    int iterations = run.iterations;

    Index best_vertex = 0;
    double best_vertex_value = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < j; ++k) {
        const double v = obj.value(obj.unit(k));
        if (v < best_vertex_value) {
            best_vertex_value = v;
            best_vertex = k;
        }
    }
    if (best_vertex_value < run.f) {
        auto restart = detail::projected_descent(obj, obj.unit(best_vertex), opts);
        iterations += restart.iterations;
        if (restart.f <= best_vertex_value)
            run = std::move(restart);
    }
    if (run.hit_limit)
        warnings.push_back("weights: iteration limit " + std::to_string(opts.max_iter) + " reached");

    WeightVector w(run.w);
    const double f = obj.value(w.values());
    const Vector g = obj.gradient(w.values());
    const double kkt = (w.values() - project_onto_simplex(w.values() - g)).cwiseAbs().maxCoeff();
    // stalling within sqrt(tol) is the floating-point floor of f, not a failure
    if (run.stalled && obj.loss() != SurrogateLoss::Hinge && kkt > std::sqrt(opts.tol))
        warnings.push_back("weights: line search stalled with KKT residual " + std::to_string(kkt));
    return {std::move(w), f, iterations, kkt, std::move(warnings)};
}

inline WeightSolution solve_weights(const CvPredictionTable& table, SurrogateLoss loss, const SolverOptions& opts = {})
{
    return solve_weights(WeightObjective(table, loss), opts);
}

/// Weights tuned on in-sample fitted values of full-data fits.
inline WeightSolution solve_weights_naive(const Targets& truth, const CandidatePool& pool,
                                          const std::vector<Matrix>& foundation, const DownstreamConfig& cfg,
                                          SurrogateLoss loss, const SolverOptions& opts = {})
{
    return solve_weights(in_sample_predictions(truth, pool, foundation, cfg), loss, opts);
}

/// Complete fitted artifact: FRLs, candidate pool, per-candidate predictors
/// refit on all labeled rows, and averaging weights.
class PearlModel {
public:
    PearlModel(std::vector<FittedFrl> frls, CandidatePool pool, std::vector<FittedPredictor> predictors,
               WeightVector weights, TaskKind task)
        : frls_(std::move(frls)), pool_(std::move(pool)), predictors_(std::move(predictors)),
          weights_(std::move(weights)), task_(task)
    {
        require(frls_.size() == pool_.num_frls(), "FRL count does not match the candidate pool");
        for (std::size_t m = 0; m < frls_.size(); ++m)
            require(frls_[m].output_dim() == pool_.foundation_dims()[m], "FRL output width does not match the pool");
        require(predictors_.size() == pool_.size(), "predictor count does not match candidate count");
        require(weights_.size() == static_cast<Index>(pool_.size()), "weight count does not match candidate count");
        for (std::size_t m = 1; m < frls_.size(); ++m)
            require(frls_[m].input_dim() == frls_[0].input_dim(), "FRLs disagree on input dimension");
    }

    const std::vector<FittedFrl>& frls() const noexcept { return frls_; }
    const CandidatePool& pool() const noexcept { return pool_; }
    const std::vector<FittedPredictor>& predictors() const noexcept { return predictors_; }
    const WeightVector& weights() const noexcept { return weights_; }
    TaskKind task() const noexcept { return task_; }
    Index input_dim() const { return frls_.front().input_dim(); }

    std::vector<Matrix> foundation(const Matrix& features) const { return transform_all(frls_, features); }

    std::vector<PredictionBlock> candidate_predictions(const Matrix& features) const
    {
        const auto found = foundation(features);
        std::vector<PredictionBlock> out;
        out.reserve(pool_.size());
        for (std::size_t j = 0; j < pool_.size(); ++j)
            out.push_back(predictors_[j].predict(realize(pool_, found, j)));
        return out;
    }

    /// sum_j w_j g_j(z_new,[j]) for every row.
    PredictionBlock predict(const Matrix& features) const { return aggregate(candidate_predictions(features), weights_); }

private:
    std::vector<FittedFrl> frls_;
    CandidatePool pool_;
    std::vector<FittedPredictor> predictors_;
    WeightVector weights_;
    TaskKind task_;
};

struct PearlOptions {
    int folds = 5;
    std::uint64_t cv_seed = 1;
    DownstreamConfig downstream;
    SurrogateLoss loss = SurrogateLoss::SquaredError;
    SolverOptions solver;
    /// Skip the weight solve and use these weights instead.
    std::optional<WeightVector> forced_weights;
    int threads = 1;
};

/// Everything produced while fitting: the model plus the intermediate state
/// the baselines reuse.
struct PearlFit {
    PearlModel model;
    CvPredictionTable cv_table;
    std::optional<WeightSolution> solution; // absent when weights were forced
    std::vector<Matrix> train_foundation;
};

/// Algorithm: compute representations once, cross-validate each candidate,
/// solve for the weights, then refit every candidate on all labeled rows.
inline PearlFit fit_pearl(const LabeledDataset& train, std::vector<FittedFrl> frls, const CandidatePool& pool,
                          const PearlOptions& opts)
{
    require(!frls.empty(), "PEARL needs at least one FRL");
    auto foundation = transform_all(frls, train.features());
    const auto plan = make_cv_plan(train.size(), opts.folds, opts.cv_seed);
    auto table = cv_predictions(train.target(), pool, foundation, plan, opts.downstream, opts.threads);

    std::optional<WeightSolution> solution;
    std::optional<WeightVector> weights = opts.forced_weights;
    if (!weights) {
        solution = solve_weights(table, opts.loss, opts.solver);
        weights = solution->weights;
    }
    require(weights->size() == static_cast<Index>(pool.size()), "forced weight count does not match candidates");

    std::vector<FittedPredictor> predictors(pool.size(), FittedPredictor(RidgeParams{Vector::Zero(1), 0.0, 0.0}));
    parallel_for(pool.size(), opts.threads, [&](std::size_t j) {
        try {
            predictors[j] = fit_downstream(realize(pool, foundation, j), train.target(), opts.downstream);
        } catch (const Error& e) {
            throw Error("candidate " + std::to_string(j + 1) + " (full fit): " + e.what());
        }
    });
    PearlModel model(std::move(frls), pool, std::move(predictors), *weights, train.task());
    return {std::move(model), std::move(table), std::move(solution), std::move(foundation)};
}

/// Fits the FRLs on `unlabeled` (or on the training features when absent),
/// builds the pool from the scheme, fits PEARL and predicts the test rows.
inline std::pair<PearlFit, PredictionBlock> pearl_fit_predict(const LabeledDataset& train, const Matrix& test_features,
                                                              const std::vector<FrlConfig>& frl_configs,
                                                              const CandidateScheme& scheme, const PearlOptions& opts,
                                                              const UnlabeledDataset* unlabeled = nullptr)
{
    const UnlabeledDataset own = unlabeled ? *unlabeled : UnlabeledDataset(train.features());
    auto frls = fit_frls(frl_configs, own);
    std::vector<Index> dims;
    for (const auto& f : frls)
        dims.push_back(f.output_dim());
    const auto pool = build_pool(scheme, dims);
    auto fit = fit_pearl(train, std::move(frls), pool, opts);
    auto pred = fit.model.predict(test_features);
    return {std::move(fit), std::move(pred)};
}

} // namespace pearl

#endif // PEARL_WEIGHTS_HPP
