#ifndef PEARL_FRL_HPP
#define PEARL_FRL_HPP

#include "pearl/core.hpp"
#include "pearl/eigensolver.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pearl {

enum class KernelKind { Linear, Gaussian, Polynomial, Sigmoid, Cosine };

inline std::string_view to_string(KernelKind k)
{
    switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Gaussian: return "gaussian";
    case KernelKind::Polynomial: return "polynomial";
    case KernelKind::Sigmoid: return "sigmoid";
    case KernelKind::Cosine: return "cosine";
    }
    return "?";
}

inline KernelKind parse_kernel_kind(std::string_view s)
{
    if (s == "linear") return KernelKind::Linear;
    if (s == "gaussian" || s == "rbf") return KernelKind::Gaussian;
    if (s == "polynomial" || s == "poly") return KernelKind::Polynomial;
    if (s == "sigmoid") return KernelKind::Sigmoid;
    if (s == "cosine") return KernelKind::Cosine;
    throw Error("unknown kernel '" + std::string(s) + "'");
}

/// Kernel choice and hyperparameters. An absent gamma is resolved from the
/// training data when the kernel is fitted.
struct KernelSpec {
    KernelKind kind = KernelKind::Linear;
    std::optional<double> gamma;
    int degree = 3;
    double coef0 = 0.0;

    static KernelSpec linear() { return {KernelKind::Linear, std::nullopt, 1, 0.0}; }
    static KernelSpec gaussian(std::optional<double> gamma = std::nullopt)
    {
        return {KernelKind::Gaussian, gamma, 1, 0.0};
    }
    static KernelSpec polynomial(int degree = 3, std::optional<double> gamma = std::nullopt, double coef0 = 1.0)
    {
        return {KernelKind::Polynomial, gamma, degree, coef0};
    }
    static KernelSpec sigmoid(std::optional<double> gamma = std::nullopt, double coef0 = 0.0)
    {
        return {KernelKind::Sigmoid, gamma, 1, coef0};
    }
    static KernelSpec cosine() { return {KernelKind::Cosine, std::nullopt, 1, 0.0}; }

    void validate() const
    {
        if (gamma)
            require(std::isfinite(*gamma) && *gamma > 0.0, "kernel gamma must be positive");
        if (kind == KernelKind::Polynomial)
            require(degree >= 1, "polynomial kernel degree must be >= 1");
        require(std::isfinite(coef0), "kernel coef0 must be finite");
    }
};

/// Fills in data-dependent defaults: Gaussian gamma = 1/(d * var(all
/// entries)), polynomial and sigmoid gamma = 1/d.
inline KernelSpec resolve_kernel(KernelSpec spec, const Matrix& data)
{
    spec.validate();
    if (spec.gamma)
        return spec;
    const auto d = static_cast<double>(data.cols());
    switch (spec.kind) {
    case KernelKind::Gaussian: {
        const double mean = data.mean();
        const double var = (data.array() - mean).square().mean();
        spec.gamma = var > 0.0 ? 1.0 / (d * var) : 1.0;
        break;
    }
    case KernelKind::Polynomial:
    case KernelKind::Sigmoid:
        spec.gamma = 1.0 / d;
        break;
    case KernelKind::Linear:
    case KernelKind::Cosine:
        break;
    }
    return spec;
}

/// Gram matrix k(a_i, b_j). The kernel must already be resolved.
inline Matrix kernel_matrix(const KernelSpec& spec, const Matrix& a, const Matrix& b)
{
    require(a.cols() == b.cols(), "kernel inputs differ in dimension");
    Matrix g = a * b.transpose();
    switch (spec.kind) {
    case KernelKind::Linear:
        break;
    case KernelKind::Gaussian: {
        const double gamma = spec.gamma.value();
        const Vector na = a.rowwise().squaredNorm();
        const Vector nb = b.rowwise().squaredNorm();
        for (Index j = 0; j < g.cols(); ++j)
            for (Index i = 0; i < g.rows(); ++i)
                g(i, j) = std::exp(-gamma * std::max(0.0, na(i) + nb(j) - 2.0 * g(i, j)));
        break;
    }
    case KernelKind::Polynomial: {
        const double gamma = spec.gamma.value();
        g = (gamma * g.array() + spec.coef0).pow(static_cast<double>(spec.degree)).matrix();
        break;
    }
    case KernelKind::Sigmoid: {
        const double gamma = spec.gamma.value();
        g = (gamma * g.array() + spec.coef0).tanh().matrix();
        break;
    }
    case KernelKind::Cosine: {
        const Vector na = a.rowwise().norm();
        const Vector nb = b.rowwise().norm();
        for (Index j = 0; j < g.cols(); ++j)
            for (Index i = 0; i < g.rows(); ++i)
                g(i, j) = (na(i) > 0.0 && nb(j) > 0.0) ? g(i, j) / (na(i) * nb(j)) : 0.0;
        break;
    }
    }
    require(all_finite(g), "kernel produced non-finite values");
    return g;
}

/// User-supplied representation learner. Implementations must be immutable
/// after fitting; transform is called concurrently.
class CustomFrl {
public:
    virtual ~CustomFrl() = default;
    virtual std::string name() const = 0;
    virtual Index input_dim() const = 0;
    virtual Index output_dim() const = 0;
    virtual Matrix transform(const Matrix& rows) const = 0;
};

/// Plug-in hook: fit on unlabeled rows, return the fitted learner.
using CustomFrlFactory = std::function<std::shared_ptr<const CustomFrl>(const UnlabeledDataset&)>;

struct PcaParams {
    Vector means;
    Matrix loadings; // d x p, orthonormal columns
    Vector singular_values;
};

struct KpcaParams {
    KernelSpec kernel; // resolved
    Matrix train;
    Vector train_row_means;
    double grand_mean = 0.0;
    Matrix coefficients; // N x p, eigenvectors scaled by eigenvalue^(-1/2)
    Vector eigenvalues;
};

struct IdentityParams {
    Index dim = 0;
};

enum class FrlKind { Pca, Kpca, Identity, Custom };

/// A trained representation learner mapping d-dimensional rows to p_m
/// dimensions.
class FittedFrl {
public:
    using Params = std::variant<PcaParams, KpcaParams, IdentityParams, std::shared_ptr<const CustomFrl>>;

    explicit FittedFrl(Params params, std::vector<std::string> warnings = {})
        : params_(std::move(params)), warnings_(std::move(warnings))
    {
        if (const auto* c = std::get_if<std::shared_ptr<const CustomFrl>>(&params_))
            require(*c != nullptr, "custom FRL handle is null");
        require(output_dim() >= 1, "FRL output dimension must be >= 1");
    }

    FrlKind kind() const noexcept { return static_cast<FrlKind>(params_.index()); }
    const Params& params() const noexcept { return params_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    std::string name() const
    {
        switch (kind()) {
        case FrlKind::Pca: return "pca";
        case FrlKind::Kpca: return "kpca-" + std::string(to_string(std::get<KpcaParams>(params_).kernel.kind));
        case FrlKind::Identity: return "identity";
        case FrlKind::Custom: return std::get<std::shared_ptr<const CustomFrl>>(params_)->name();
        }
        return "?";
    }

    Index input_dim() const
    {
        return std::visit(
            [](const auto& p) -> Index {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, PcaParams>)
                    return p.means.size();
                else if constexpr (std::is_same_v<T, KpcaParams>)
                    return p.train.cols();
                else if constexpr (std::is_same_v<T, IdentityParams>)
                    return p.dim;
                else
                    return p->input_dim();
            },
            params_);
    }

    Index output_dim() const
    {
        return std::visit(
            [](const auto& p) -> Index {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, PcaParams>)
                    return p.loadings.cols();
                else if constexpr (std::is_same_v<T, KpcaParams>)
                    return p.coefficients.cols();
                else if constexpr (std::is_same_v<T, IdentityParams>)
                    return p.dim;
                else
                    return p->output_dim();
            },
            params_);
    }

    Matrix transform(const Matrix& rows) const
    {
        require(rows.cols() == input_dim(), "FRL '" + name() + "' expects " + std::to_string(input_dim()) +
                                                " columns, got " + std::to_string(rows.cols()));
        Matrix out = std::visit(
            [&](const auto& p) -> Matrix {
                using T = std::decay_t<decltype(p)>;
                // one row at a time, so a row's scores never depend on its batch
                if constexpr (std::is_same_v<T, PcaParams>) {
                    Matrix out(rows.rows(), p.loadings.cols());
                    for (Index i = 0; i < rows.rows(); ++i)
                        out.row(i) = (rows.row(i) - p.means.transpose()) * p.loadings;
                    return out;
                } else if constexpr (std::is_same_v<T, KpcaParams>) {
                    Matrix out(rows.rows(), p.coefficients.cols());
                    for (Index i = 0; i < rows.rows(); ++i) {
                        Matrix k = kernel_matrix(p.kernel, rows.row(i), p.train);
                        k.array() -= k.mean();
                        k -= p.train_row_means.transpose();
                        k.array() += p.grand_mean;
                        out.row(i) = k * p.coefficients;
                    }
                    return out;
                } else if constexpr (std::is_same_v<T, IdentityParams>) {
                    return rows;
                } else {
                    return p->transform(rows);
                }
            },
            params_);
        require(out.rows() == rows.rows() && out.cols() == output_dim(), "FRL '" + name() + "' returned a bad shape");
        require(all_finite(out), "FRL '" + name() + "' produced non-finite representations");
        return out;
    }

private:
    Params params_;
    std::vector<std::string> warnings_;
};

namespace detail {

/// Flips each column so its largest-magnitude entry (first on ties) is >= 0.
inline void fix_column_signs(Matrix& m)
{
    for (Index c = 0; c < m.cols(); ++c) {
        Index best = 0;
        for (Index r = 1; r < m.rows(); ++r)
            if (std::abs(m(r, c)) > std::abs(m(best, c)))
                best = r;
        if (m(best, c) < 0.0)
            m.col(c) = -m.col(c);
    }
}

} // namespace detail

/// PCA as the constrained least-squares fit of a rank-p linear map to the
/// column-centered data. Scores are plain projections (variance equal to
/// the component eigenvalue).
inline FittedFrl fit_pca(const UnlabeledDataset& data, Index p)
{
    const Index n = data.size();
    const Index d = data.dim();
    require(p >= 1 && p <= std::min(n - 1, d),
            "PCA dimension " + std::to_string(p) + " outside [1, " + std::to_string(std::min(n - 1, d)) + "]");
    PcaParams params;
    params.means = data.features().colwise().mean().transpose();
    const Matrix centered = data.features().rowwise() - params.means.transpose();
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cutoff = static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon() *
                          (s.size() > 0 ? s(0) : 0.0);
    Index rank = 0;
    while (rank < s.size() && s(rank) > cutoff && s(rank) > 0.0)
        ++rank;

    std::vector<std::string> warnings;
    Index keep = p;
    if (rank < p) {
        keep = std::max<Index>(rank, 1);
        warnings.push_back("pca: data rank " + std::to_string(rank) + " below requested dimension " +
                           std::to_string(p) + "; keeping " + std::to_string(keep));
    }
    params.loadings = svd.matrixV().leftCols(keep);
    detail::fix_column_signs(params.loadings);
    params.singular_values = s.head(keep);
    return FittedFrl(std::move(params), std::move(warnings));
}

/// Kernel PCA: double-centered Gram matrix, top eigenpairs above 1e-10.
inline FittedFrl fit_kpca(const UnlabeledDataset& data, const KernelSpec& kernel, Index p,
                          const TopEigenOptions& eigen_opts = {})
{
    const Index n = data.size();
    require(p >= 1 && p <= n - 1, "KPCA dimension " + std::to_string(p) + " outside [1, " + std::to_string(n - 1) + "]");
    KpcaParams params;
    params.kernel = resolve_kernel(kernel, data.features());
    params.train = data.features();

    Matrix k = kernel_matrix(params.kernel, params.train, params.train);
    params.train_row_means = k.rowwise().mean();
    params.grand_mean = params.train_row_means.mean();
    k.colwise() -= params.train_row_means;
    k.rowwise() -= params.train_row_means.transpose();
    k.array() += params.grand_mean;
    k = 0.5 * (k + k.transpose()).eval();

    constexpr double kEigenFloor = 1e-10;
    EigenPairs eig = top_eigenpairs(k, p, eigen_opts);
    Index keep = 0;
    while (keep < p && eig.values(keep) > kEigenFloor)
        ++keep;
    require(keep >= 1, "KPCA (" + std::string(to_string(kernel.kind)) + "): no eigenvalue above 1e-10");
    std::vector<std::string> warnings;
    if (keep < p)
        warnings.push_back("kpca: only " + std::to_string(keep) + " eigenvalues above 1e-10; requested " +
                           std::to_string(p));

    Matrix vecs = eig.vectors.leftCols(keep);
    detail::fix_column_signs(vecs);
    params.eigenvalues = eig.values.head(keep);
    params.coefficients = vecs * params.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
    return FittedFrl(std::move(params), std::move(warnings));
}

inline FittedFrl fit_identity(Index dim) { return FittedFrl(IdentityParams{dim}); }

inline FittedFrl fit_custom(const UnlabeledDataset& data, const CustomFrlFactory& factory)
{
    require(static_cast<bool>(factory), "custom FRL factory is empty");
    auto fitted = factory(data);
    require(fitted != nullptr, "custom FRL factory returned null");
    require(fitted->input_dim() == data.dim(), "custom FRL input dimension mismatch");
    return FittedFrl(std::shared_ptr<const CustomFrl>(std::move(fitted)));
}

enum class FrlMethod { Pca, Kpca, Identity };

/// One entry of the experiment's FRL list.
struct FrlConfig {
    FrlMethod method = FrlMethod::Pca;
    KernelSpec kernel;
    Index p = 2;
};

inline FittedFrl fit_frl(const FrlConfig& cfg, const UnlabeledDataset& data)
{
    switch (cfg.method) {
    case FrlMethod::Pca: return fit_pca(data, cfg.p);
    case FrlMethod::Kpca: return fit_kpca(data, cfg.kernel, cfg.p);
    case FrlMethod::Identity: return fit_identity(data.dim());
    }
    throw Error("unknown FRL method");
}

inline std::vector<FittedFrl> fit_frls(const std::vector<FrlConfig>& cfgs, const UnlabeledDataset& data)
{
    std::vector<FittedFrl> out;
    out.reserve(cfgs.size());
    for (const auto& c : cfgs)
        out.push_back(fit_frl(c, data));
    return out;
}

/// The five learners of the synthetic benchmark: PCA and KPCA with Gaussian,
/// polynomial, sigmoid and cosine kernels.
inline std::vector<FrlConfig> synthetic_frl_configs(Index p = 2)
{
    return {
        {FrlMethod::Pca, KernelSpec::linear(), p},
        {FrlMethod::Kpca, KernelSpec::gaussian(), p},
        {FrlMethod::Kpca, KernelSpec::polynomial(), p},
        {FrlMethod::Kpca, KernelSpec::sigmoid(), p},
        {FrlMethod::Kpca, KernelSpec::cosine(), p},
    };
}

inline std::vector<Matrix> transform_all(const std::vector<FittedFrl>& frls, const Matrix& rows)
{
    std::vector<Matrix> out;
    out.reserve(frls.size());
    for (const auto& f : frls)
        out.push_back(f.transform(rows));
    return out;
}

} // namespace pearl

#endif // PEARL_FRL_HPP
