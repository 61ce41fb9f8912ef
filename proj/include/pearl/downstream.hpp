#ifndef PEARL_DOWNSTREAM_HPP
#define PEARL_DOWNSTREAM_HPP

#include "pearl/core.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace pearl {

enum class DownstreamModel { Ridge, Softmax };

struct DownstreamConfig {
    DownstreamModel model = DownstreamModel::Ridge;
    double lambda = 1e-6; // ridge penalty
    double l2 = 1e-4;     // softmax penalty
    int max_iter = 5000;
    double tol = 1e-6;
};

struct RidgeParams {
    Vector coef;
    double intercept = 0.0;
    double lambda = 0.0; // penalty actually used
};

struct SoftmaxParams {
    Matrix weights; // (p + 1) x C, intercept in the last row
    int iterations = 0;
    double gradient_norm = 0.0;
    std::vector<double> objective_trace; // objective after each accepted step, starting at W = 0
};

/// A fitted per-candidate predictor.
class FittedPredictor {
public:
    using Params = std::variant<RidgeParams, SoftmaxParams>;

    explicit FittedPredictor(Params params, std::vector<std::string> warnings = {})
        : params_(std::move(params)), warnings_(std::move(warnings))
    {
        if (const auto* r = std::get_if<RidgeParams>(&params_))
            require(r->coef.allFinite() && std::isfinite(r->intercept), "ridge parameters are not finite");
        else
            require(all_finite(std::get<SoftmaxParams>(params_).weights), "softmax weights are not finite");
    }

    DownstreamModel model() const noexcept { return static_cast<DownstreamModel>(params_.index()); }
    const Params& params() const noexcept { return params_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    Index input_dim() const
    {
        if (const auto* r = std::get_if<RidgeParams>(&params_))
            return r->coef.size();
        return std::get<SoftmaxParams>(params_).weights.rows() - 1;
    }

    PredictionBlock predict(const Matrix& z) const;

private:
    Params params_;
    std::vector<std::string> warnings_;
};

namespace detail {

inline Matrix softmax_rows(const Matrix& logits)
{
    Matrix p(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        double sum = 0.0;
        for (Index k = 0; k < logits.cols(); ++k) {
            p(i, k) = std::exp(logits(i, k) - mx);
            sum += p(i, k);
        }
        p.row(i) /= sum;
    }
    return p;
}

inline Matrix with_intercept_column(const Matrix& z)
{
    Matrix x(z.rows(), z.cols() + 1);
    x.leftCols(z.cols()) = z;
    x.col(z.cols()).setOnes();
    return x;
}

/// Mean cross entropy plus (l2/2)||W without intercept row||^2.
inline double softmax_objective(const Matrix& x, const ClassTargets& y, const Matrix& w, double l2)
{
    const Matrix logits = x * w;
    double total = 0.0;
    for (Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
        total += lse - logits(i, y.labels[static_cast<std::size_t>(i)]);
    }
    const Index p = w.rows() - 1;
    return total / static_cast<double>(x.rows()) + 0.5 * l2 * w.topRows(p).squaredNorm();
}

inline Matrix softmax_gradient(const Matrix& x, const ClassTargets& y, const Matrix& w, double l2)
{
    Matrix resid = softmax_rows(x * w);
    for (Index i = 0; i < resid.rows(); ++i)
        resid(i, y.labels[static_cast<std::size_t>(i)]) -= 1.0;
    Matrix g = x.transpose() * resid / static_cast<double>(x.rows());
    const Index p = w.rows() - 1;
    g.topRows(p) += l2 * w.topRows(p);
    return g;
}

} // namespace detail

inline PredictionBlock FittedPredictor::predict(const Matrix& z) const
{
    require(z.cols() == input_dim(), "predictor expects " + std::to_string(input_dim()) + " columns, got " +
                                         std::to_string(z.cols()));
    if (const auto* r = std::get_if<RidgeParams>(&params_)) {
        Vector out = z * r->coef;
        out.array() += r->intercept;
        return PredictionBlock::regression(std::move(out));
    }
    const auto& s = std::get<SoftmaxParams>(params_);
    return PredictionBlock::classification(detail::softmax_rows(detail::with_intercept_column(z) * s.weights));
}

/// Ridge regression with an unpenalized intercept, solved through the
/// normal equations of the centered data. A singular system at lambda = 0
/// is retried with lambda = 1e-8.
inline FittedPredictor fit_ridge(const Matrix& z, const Vector& y, double lambda)
{
    require(z.rows() >= 1, "ridge needs at least one row");
    require(z.rows() == y.size(), "ridge: feature and target row counts differ");
    require(lambda >= 0.0 && std::isfinite(lambda), "ridge lambda must be >= 0");
    require(all_finite(z) && y.allFinite(), "ridge inputs must be finite");

    const Vector zmean = z.colwise().mean().transpose();
    const double ymean = y.mean();
    const Matrix zc = z.rowwise() - zmean.transpose();
    const Vector yc = y.array() - ymean;
    const Matrix gram = zc.transpose() * zc;
    const Vector rhs = zc.transpose() * yc;
    const Index p = z.cols();

    std::vector<std::string> warnings;
    RidgeParams params;
    params.lambda = lambda;
    bool solved = false;
    if (lambda == 0.0) {
        Eigen::LDLT<Matrix> ldlt(gram);
        // pivot ratio of D; LDLT::rcond() misses exact zero pivots
        const Vector pivots = ldlt.vectorD();
        const double scale = pivots.cwiseAbs().maxCoeff();
        if (ldlt.info() == Eigen::Success && scale > 0.0 && pivots.minCoeff() > 1e-13 * scale) {
            params.coef = ldlt.solve(rhs);
            solved = params.coef.allFinite();
        }
        if (!solved) {
            params.lambda = 1e-8;
            warnings.push_back("ridge: singular system at lambda = 0; retried with lambda = 1e-8");
        }
    }
    if (!solved) {
        Matrix a = gram;
        a.diagonal().array() += params.lambda;
        Eigen::LLT<Matrix> llt(a);
        require(llt.info() == Eigen::Success, "ridge normal equations are not positive definite");
        params.coef = llt.solve(rhs);
    }
    if (p > 0)
        params.intercept = ymean - zmean.dot(params.coef);
    else
        params.intercept = ymean;
    return FittedPredictor(std::move(params), std::move(warnings));
}

/// Multinomial logistic regression by full-batch gradient descent with an
/// Armijo backtracking line search (c = 1e-4, shrink 0.5), starting at W = 0.
inline FittedPredictor fit_softmax(const Matrix& z, const ClassTargets& labels, double l2, int max_iter = 5000,
                                   double tol = 1e-6)
{
    const Index n = z.rows();
    const int c = labels.num_classes;
    require(n >= 1 && static_cast<Index>(labels.labels.size()) == n, "softmax: feature and label row counts differ");
    require(l2 >= 0.0 && std::isfinite(l2), "softmax l2 must be >= 0");
    require(max_iter >= 0 && tol > 0.0, "softmax: invalid iteration settings");
    require(all_finite(z), "softmax features must be finite");
    std::vector<int> counts(static_cast<std::size_t>(c), 0);
    for (int y : labels.labels) {
        require(y >= 0 && y < c, "softmax: label out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    for (int k = 0; k < c; ++k)
        require(counts[static_cast<std::size_t>(k)] > 0, "softmax: class " + std::to_string(k) + " has no examples");

    const Matrix x = detail::with_intercept_column(z);
    SoftmaxParams params;
    params.weights = Matrix::Zero(x.cols(), c);
    double f = detail::softmax_objective(x, labels, params.weights, l2);
    params.objective_trace.push_back(f);
    Matrix g = detail::softmax_gradient(x, labels, params.weights, l2);
    double step = 1.0;
    constexpr double kArmijo = 1e-4;
    bool converged = false;
    int it = 0;
    for (; it < max_iter; ++it) {
        if (g.cwiseAbs().maxCoeff() < tol) {
            converged = true;
            break;
        }
        const double gg = g.squaredNorm();
        step = std::min(step * 2.0, 1e6);
        bool accepted = false;
        Matrix trial;
        double ft = 0.0;
        while (step > 1e-20) {
            trial = params.weights - step * g;
            ft = detail::softmax_objective(x, labels, trial, l2);
            if (std::isfinite(ft) && ft <= f - kArmijo * step * gg) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            break;
        params.weights = std::move(trial);
        f = ft;
        params.objective_trace.push_back(f);
        g = detail::softmax_gradient(x, labels, params.weights, l2);
    }
    if (!converged && g.cwiseAbs().maxCoeff() < tol)
        converged = true;
    params.iterations = it;
    params.gradient_norm = g.cwiseAbs().maxCoeff();
    std::vector<std::string> warnings;
    if (!converged)
        warnings.push_back("softmax: stopped after " + std::to_string(it) + " iterations with gradient norm " +
                           std::to_string(params.gradient_norm));
    return FittedPredictor(std::move(params), std::move(warnings));
}

inline FittedPredictor fit_downstream(const Matrix& z, const Targets& y, const DownstreamConfig& cfg)
{
    if (cfg.model == DownstreamModel::Ridge) {
        const auto* r = std::get_if<RealTargets>(&y);
        require(r != nullptr, "ridge downstream model needs regression targets");
        return fit_ridge(z, r->values, cfg.lambda);
    }
    const auto* c = std::get_if<ClassTargets>(&y);
    require(c != nullptr, "softmax downstream model needs class targets");
    return fit_softmax(z, *c, cfg.l2, cfg.max_iter, cfg.tol);
}

} // namespace pearl

#endif // PEARL_DOWNSTREAM_HPP
