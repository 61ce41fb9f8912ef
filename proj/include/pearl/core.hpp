#ifndef PEARL_CORE_HPP
#define PEARL_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace pearl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& message)
{
    if (!ok)
        throw Error(message);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Probabilities are clamped to [kProbabilityFloor, 1] before logarithms.
inline constexpr double kProbabilityFloor = 1e-12;
/// Tolerance on probability row sums.
inline constexpr double kRowSumTolerance = 1e-9;

enum class TaskKind { Regression, Classification };

inline std::string_view to_string(TaskKind k)
{
    return k == TaskKind::Regression ? "regression" : "classification";
}

struct RealTargets {
    Vector values;
};

struct ClassTargets {
    std::vector<int> labels;
    int num_classes = 2;
};

using Targets = std::variant<RealTargets, ClassTargets>;

inline Index target_size(const Targets& t)
{
    return std::visit(
        [](const auto& v) -> Index {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, RealTargets>)
                return v.values.size();
            else
                return static_cast<Index>(v.labels.size());
        },
        t);
}

inline TaskKind task_of(const Targets& t)
{
    return std::holds_alternative<RealTargets>(t) ? TaskKind::Regression : TaskKind::Classification;
}

inline void validate_targets(const Targets& t)
{
    if (const auto* c = std::get_if<ClassTargets>(&t)) {
        require(c->num_classes >= 2, "class targets need at least 2 classes");
        for (std::size_t i = 0; i < c->labels.size(); ++i)
            require(c->labels[i] >= 0 && c->labels[i] < c->num_classes,
                    "class label out of range at row " + std::to_string(i));
    } else {
        require(std::get<RealTargets>(t).values.allFinite(), "regression targets must be finite");
    }
}

/// Rows selected by index, in the given order.
inline Targets subset_targets(const Targets& t, const std::vector<int>& rows)
{
    if (const auto* r = std::get_if<RealTargets>(&t)) {
        Vector out(static_cast<Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            out(static_cast<Index>(i)) = r->values(rows[i]);
        return RealTargets{std::move(out)};
    }
    const auto& c = std::get<ClassTargets>(t);
    ClassTargets out{{}, c.num_classes};
    out.labels.reserve(rows.size());
    for (int i : rows)
        out.labels.push_back(c.labels[static_cast<std::size_t>(i)]);
    return out;
}

inline Matrix subset_rows(const Matrix& m, const std::vector<int>& rows)
{
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

/// Feature matrix with regression targets or class labels.
class LabeledDataset {
public:
    LabeledDataset(Matrix features, Targets target) : features_(std::move(features)), target_(std::move(target))
    {
        require(features_.rows() >= 1 && features_.cols() >= 1, "labeled dataset needs n >= 1 and d >= 1");
        require(all_finite(features_), "labeled dataset features contain non-finite values");
        require(target_size(target_) == features_.rows(), "target length does not match feature rows");
        validate_targets(target_);
    }

    const Matrix& features() const noexcept { return features_; }
    const Targets& target() const noexcept { return target_; }
    Index size() const noexcept { return features_.rows(); }
    Index dim() const noexcept { return features_.cols(); }
    TaskKind task() const noexcept { return task_of(target_); }

private:
    Matrix features_;
    Targets target_;
};

class UnlabeledDataset {
public:
    explicit UnlabeledDataset(Matrix features) : features_(std::move(features))
    {
        require(features_.rows() >= 2, "unlabeled dataset needs at least 2 rows");
        require(features_.cols() >= 1, "unlabeled dataset needs at least 1 column");
        require(all_finite(features_), "unlabeled dataset contains non-finite values");
    }

    const Matrix& features() const noexcept { return features_; }
    Index size() const noexcept { return features_.rows(); }
    Index dim() const noexcept { return features_.cols(); }

private:
    Matrix features_;
};

/// Predictions for n rows: one column of reals (regression, or hinge
/// margins) or C columns of class probabilities.
class PredictionBlock {
public:
    static PredictionBlock regression(Vector values)
    {
        require(values.allFinite(), "regression predictions must be finite");
        Matrix m = std::move(values);
        return PredictionBlock(TaskKind::Regression, std::move(m));
    }

    static PredictionBlock classification(Matrix probabilities)
    {
        require(probabilities.cols() >= 2, "classification block needs at least 2 columns");
        require(all_finite(probabilities), "classification probabilities must be finite");
        for (Index i = 0; i < probabilities.rows(); ++i) {
            require((probabilities.row(i).array() >= 0.0).all(),
                    "negative probability in row " + std::to_string(i));
            require(std::abs(probabilities.row(i).sum() - 1.0) <= kRowSumTolerance,
                    "probability row " + std::to_string(i) + " does not sum to 1");
        }
        return PredictionBlock(TaskKind::Classification, std::move(probabilities));
    }

    static PredictionBlock make(TaskKind kind, Matrix values)
    {
        if (kind == TaskKind::Regression) {
            require(values.cols() == 1, "regression block must have one column");
            return regression(values.col(0));
        }
        return classification(std::move(values));
    }

    TaskKind kind() const noexcept { return kind_; }
    const Matrix& values() const noexcept { return values_; }
    Index rows() const noexcept { return values_.rows(); }
    Index cols() const noexcept { return values_.cols(); }

private:
    PredictionBlock(TaskKind kind, Matrix values) : kind_(kind), values_(std::move(values)) {}

    TaskKind kind_;
    Matrix values_;
};

enum class SurrogateLoss { SquaredError, CrossEntropy, Hinge };

inline std::string_view to_string(SurrogateLoss l)
{
    switch (l) {
    case SurrogateLoss::SquaredError: return "squared_error";
    case SurrogateLoss::CrossEntropy: return "cross_entropy";
    case SurrogateLoss::Hinge: return "hinge";
    }
    return "?";
}

inline SurrogateLoss parse_loss(std::string_view s)
{
    if (s == "squared_error" || s == "squared")
        return SurrogateLoss::SquaredError;
    if (s == "cross_entropy" || s == "ce")
        return SurrogateLoss::CrossEntropy;
    if (s == "hinge")
        return SurrogateLoss::Hinge;
    throw Error("unknown surrogate loss '" + std::string(s) + "'");
}

namespace detail {

inline void check_loss_shapes(SurrogateLoss loss, const Targets& truth, const Matrix& pred)
{
    require(target_size(truth) == pred.rows(), "truth has " + std::to_string(target_size(truth)) +
                                                   " rows but predictions have " + std::to_string(pred.rows()));
    require(pred.rows() >= 1, "loss needs at least one row");
    switch (loss) {
    case SurrogateLoss::SquaredError:
        if (const auto* c = std::get_if<ClassTargets>(&truth))
            require(pred.cols() == c->num_classes, "probability columns do not match class count");
        else
            require(pred.cols() == 1, "regression predictions must have one column");
        break;
    case SurrogateLoss::CrossEntropy: {
        const auto* c = std::get_if<ClassTargets>(&truth);
        require(c != nullptr, "cross entropy requires class targets");
        require(pred.cols() == c->num_classes, "probability columns do not match class count");
        break;
    }
    case SurrogateLoss::Hinge: {
        const auto* r = std::get_if<RealTargets>(&truth);
        require(r != nullptr, "hinge loss requires +1/-1 targets");
        require(pred.cols() == 1, "hinge loss takes a single margin column");
        for (Index i = 0; i < r->values.size(); ++i)
            require(r->values(i) == 1.0 || r->values(i) == -1.0, "hinge label outside {-1,+1} at row " + std::to_string(i));
        break;
    }
    }
}

} // namespace detail

/// Mean surrogate loss over rows. Probability rows are not re-validated,
/// which lets solvers and finite-difference probes evaluate arbitrary
/// matrices of the right shape.
inline double loss_value(SurrogateLoss loss, const Targets& truth, const Matrix& pred)
{
    detail::check_loss_shapes(loss, truth, pred);
    const auto n = static_cast<double>(pred.rows());
    double total = 0.0;
    switch (loss) {
    case SurrogateLoss::SquaredError:
        if (const auto* c = std::get_if<ClassTargets>(&truth)) {
            for (Index i = 0; i < pred.rows(); ++i)
                for (Index k = 0; k < pred.cols(); ++k) {
                    const double e = pred(i, k) - (c->labels[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0);
                    total += e * e;
                }
        } else {
            total = (pred.col(0) - std::get<RealTargets>(truth).values).squaredNorm();
        }
        break;
    case SurrogateLoss::CrossEntropy: {
        const auto& c = std::get<ClassTargets>(truth);
        for (Index i = 0; i < pred.rows(); ++i) {
            const double p = std::clamp(pred(i, c.labels[static_cast<std::size_t>(i)]), kProbabilityFloor, 1.0);
            total -= std::log(p);
        }
        break;
    }
    case SurrogateLoss::Hinge: {
        const auto& y = std::get<RealTargets>(truth).values;
        for (Index i = 0; i < pred.rows(); ++i)
            total += std::max(0.0, 1.0 - y(i) * pred(i, 0));
        break;
    }
    }
    return total / n;
}

inline double loss_value(SurrogateLoss loss, const Targets& truth, const PredictionBlock& pred)
{
    if (loss == SurrogateLoss::CrossEntropy)
        require(pred.kind() == TaskKind::Classification, "cross entropy requires a classification block");
    return loss_value(loss, truth, pred.values());
}

/// Entrywise derivative of the mean loss with respect to the predictions.
/// Clamped cross-entropy coordinates and the hinge kink have derivative 0.
inline Matrix loss_gradient_wrt_pred(SurrogateLoss loss, const Targets& truth, const Matrix& pred)
{
    detail::check_loss_shapes(loss, truth, pred);
    const auto n = static_cast<double>(pred.rows());
    Matrix g = Matrix::Zero(pred.rows(), pred.cols());
    switch (loss) {
    case SurrogateLoss::SquaredError:
        if (const auto* c = std::get_if<ClassTargets>(&truth)) {
            for (Index i = 0; i < pred.rows(); ++i)
                for (Index k = 0; k < pred.cols(); ++k)
                    g(i, k) = 2.0 * (pred(i, k) - (c->labels[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0)) / n;
        } else {
            g.col(0) = 2.0 * (pred.col(0) - std::get<RealTargets>(truth).values) / n;
        }
        break;
    case SurrogateLoss::CrossEntropy: {
        const auto& c = std::get<ClassTargets>(truth);
        for (Index i = 0; i < pred.rows(); ++i) {
            const int y = c.labels[static_cast<std::size_t>(i)];
            const double p = pred(i, y);
            if (p > kProbabilityFloor && p <= 1.0)
                g(i, y) = -1.0 / (n * p);
        }
        break;
    }
    case SurrogateLoss::Hinge: {
        const auto& y = std::get<RealTargets>(truth).values;
        for (Index i = 0; i < pred.rows(); ++i)
            if (1.0 - y(i) * pred(i, 0) > 0.0)
                g(i, 0) = -y(i) / n;
        break;
    }
    }
    return g;
}

inline Matrix loss_gradient_wrt_pred(SurrogateLoss loss, const Targets& truth, const PredictionBlock& pred)
{
    if (loss == SurrogateLoss::CrossEntropy)
        require(pred.kind() == TaskKind::Classification, "cross entropy requires a classification block");
    return loss_gradient_wrt_pred(loss, truth, pred.values());
}

/// Index of the largest entry; ties go to the lowest index.
inline int argmax_row(const Matrix& m, Index row)
{
    int best = 0;
    for (Index k = 1; k < m.cols(); ++k)
        if (m(row, k) > m(row, best))
            best = static_cast<int>(k);
    return best;
}

struct Metrics {
    double mse = 0.0;
    std::optional<double> accuracy;
    std::optional<double> ce;
};

/// Test metrics. For classification, mse is the mean over rows of the
/// squared distance between the probability row and the one-hot label.
inline Metrics metric_suite(const Targets& truth, const PredictionBlock& pred)
{
    Metrics m;
    if (const auto* c = std::get_if<ClassTargets>(&truth)) {
        require(pred.kind() == TaskKind::Classification, "class targets need a classification block");
        m.mse = loss_value(SurrogateLoss::SquaredError, truth, pred);
        m.ce = loss_value(SurrogateLoss::CrossEntropy, truth, pred);
        Index hits = 0;
        for (Index i = 0; i < pred.rows(); ++i)
            hits += argmax_row(pred.values(), i) == c->labels[static_cast<std::size_t>(i)] ? 1 : 0;
        m.accuracy = static_cast<double>(hits) / static_cast<double>(pred.rows());
    } else {
        require(pred.kind() == TaskKind::Regression, "regression targets need a regression block");
        m.mse = loss_value(SurrogateLoss::SquaredError, truth, pred);
    }
    return m;
}

} // namespace pearl

#endif // PEARL_CORE_HPP
