#ifndef PEARL_IO_HPP
#define PEARL_IO_HPP

#include "pearl/weights.hpp"

#include "json.hpp"

#include <fstream>
#include <string>

namespace pearl {

namespace detail {

using nlohmann::json;

inline json to_json(const Matrix& m)
{
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Index k = 0; k < m.cols(); ++k)
            r.push_back(m(i, k));
        rows.push_back(std::move(r));
    }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Matrix matrix_from_json(const json& j)
{
    const auto r = j.at("rows").get<Index>();
    const auto c = j.at("cols").get<Index>();
    Matrix m(r, c);
    const auto& data = j.at("data");
    require(static_cast<Index>(data.size()) == r, "model file: matrix row count mismatch");
    for (Index i = 0; i < r; ++i) {
        require(static_cast<Index>(data[static_cast<std::size_t>(i)].size()) == c, "model file: matrix width mismatch");
        for (Index k = 0; k < c; ++k)
            m(i, k) = data[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
    return m;
}

inline json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector vector_from_json(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline json to_json(const KernelSpec& k)
{
    json out{{"kind", std::string(to_string(k.kind))}, {"degree", k.degree}, {"coef0", k.coef0}};
    if (k.gamma)
        out["gamma"] = *k.gamma;
    return out;
}

inline KernelSpec kernel_from_json(const json& j)
{
    KernelSpec k;
    k.kind = parse_kernel_kind(j.at("kind").get<std::string>());
    k.degree = j.at("degree").get<int>();
    k.coef0 = j.at("coef0").get<double>();
    if (j.contains("gamma"))
        k.gamma = j.at("gamma").get<double>();
    return k;
}

inline json to_json(const FittedFrl& f)
{
    switch (f.kind()) {
    case FrlKind::Pca: {
        const auto& p = std::get<PcaParams>(f.params());
        return json{{"kind", "pca"},
                    {"means", to_json(p.means)},
                    {"loadings", to_json(p.loadings)},
                    {"singular_values", to_json(p.singular_values)}};
    }
    case FrlKind::Kpca: {
        const auto& p = std::get<KpcaParams>(f.params());
        return json{{"kind", "kpca"},
                    {"kernel", to_json(p.kernel)},
                    {"train", to_json(p.train)},
                    {"train_row_means", to_json(p.train_row_means)},
                    {"grand_mean", p.grand_mean},
                    {"coefficients", to_json(p.coefficients)},
                    {"eigenvalues", to_json(p.eigenvalues)}};
    }
    case FrlKind::Identity:
        return json{{"kind", "identity"}, {"dim", std::get<IdentityParams>(f.params()).dim}};
    case FrlKind::Custom:
        break;
    }
    throw Error("custom FRL '" + f.name() + "' cannot be serialized");
}

inline FittedFrl frl_from_json(const json& j)
{
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "pca")
        return FittedFrl(PcaParams{vector_from_json(j.at("means")), matrix_from_json(j.at("loadings")),
                                   vector_from_json(j.at("singular_values"))});
    if (kind == "kpca")
        return FittedFrl(KpcaParams{kernel_from_json(j.at("kernel")), matrix_from_json(j.at("train")),
                                    vector_from_json(j.at("train_row_means")), j.at("grand_mean").get<double>(),
                                    matrix_from_json(j.at("coefficients")), vector_from_json(j.at("eigenvalues"))});
    if (kind == "identity")
        return FittedFrl(IdentityParams{j.at("dim").get<Index>()});
    throw Error("model file: unknown FRL kind '" + kind + "'");
}

inline json to_json(const FittedPredictor& p)
{
    if (const auto* r = std::get_if<RidgeParams>(&p.params()))
        return json{{"kind", "ridge"}, {"coef", to_json(r->coef)}, {"intercept", r->intercept}, {"lambda", r->lambda}};
    const auto& s = std::get<SoftmaxParams>(p.params());
    return json{{"kind", "softmax"},
                {"weights", to_json(s.weights)},
                {"iterations", s.iterations},
                {"gradient_norm", s.gradient_norm}};
}

inline FittedPredictor predictor_from_json(const json& j)
{
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "ridge")
        return FittedPredictor(RidgeParams{vector_from_json(j.at("coef")), j.at("intercept").get<double>(),
                                           j.at("lambda").get<double>()});
    if (kind == "softmax") {
        SoftmaxParams s;
        s.weights = matrix_from_json(j.at("weights"));
        s.iterations = j.at("iterations").get<int>();
        s.gradient_norm = j.at("gradient_norm").get<double>();
        return FittedPredictor(std::move(s));
    }
    throw Error("model file: unknown predictor kind '" + kind + "'");
}

inline json to_json(const CandidateSpec& s)
{
    const char* kind = s.kind == CandidateKind::FrlSubset ? "frl_subset"
                       : s.kind == CandidateKind::FusionColumns ? "fusion_columns"
                                                                : "explicit";
    return json{{"kind", kind}, {"indices", s.indices}, {"name", s.name}};
}

inline CandidateSpec spec_from_json(const json& j)
{
    const auto kind = j.at("kind").get<std::string>();
    CandidateSpec s;
    s.kind = kind == "frl_subset"       ? CandidateKind::FrlSubset
             : kind == "fusion_columns" ? CandidateKind::FusionColumns
             : kind == "explicit"       ? CandidateKind::Explicit
                                        : throw Error("model file: unknown candidate kind '" + kind + "'");
    s.indices = j.at("indices").get<std::vector<int>>();
    s.name = j.at("name").get<std::string>();
    return s;
}

} // namespace detail

/// JSON document holding every fitted parameter of a model. Custom FRLs
/// are not serializable.
inline nlohmann::json model_to_json(const PearlModel& model)
{
    using detail::json;
    json frls = json::array();
    for (const auto& f : model.frls())
        frls.push_back(detail::to_json(f));
    json specs = json::array();
    for (const auto& s : model.pool().specs())
        specs.push_back(detail::to_json(s));
    json preds = json::array();
    for (const auto& p : model.predictors())
        preds.push_back(detail::to_json(p));
    return json{{"format", "pearl-model/1"},
                {"task", std::string(to_string(model.task()))},
                {"frls", std::move(frls)},
                {"foundation_dims", model.pool().foundation_dims()},
                {"candidates", std::move(specs)},
                {"predictors", std::move(preds)},
                {"weights", detail::to_json(model.weights().values())}};
}

inline PearlModel model_from_json(const nlohmann::json& j)
{
    try {
        require(j.at("format").get<std::string>() == "pearl-model/1", "model file: unsupported format");
        std::vector<FittedFrl> frls;
        for (const auto& f : j.at("frls"))
            frls.push_back(detail::frl_from_json(f));
        std::vector<CandidateSpec> specs;
        for (const auto& s : j.at("candidates"))
            specs.push_back(detail::spec_from_json(s));
        std::vector<FittedPredictor> preds;
        for (const auto& p : j.at("predictors"))
            preds.push_back(detail::predictor_from_json(p));
        const auto task = j.at("task").get<std::string>() == "regression" ? TaskKind::Regression
                                                                           : TaskKind::Classification;
        return PearlModel(std::move(frls),
                          CandidatePool(std::move(specs), j.at("foundation_dims").get<std::vector<Index>>()),
                          std::move(preds), WeightVector(detail::vector_from_json(j.at("weights"))), task);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("model file: ") + e.what());
    }
}

inline void save_model(const PearlModel& model, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write model file '" + path + "'");
    out << model_to_json(model).dump(1) << '\n';
    require(out.good(), "write failed for '" + path + "'");
}

inline PearlModel load_model(const std::string& path)
{
    std::ifstream in(path);
    require(in.good(), "cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

/// Diagnostics of a weight solve as a structured report.
inline nlohmann::json diagnostics_to_json(const WeightSolution& s)
{
    return nlohmann::json{{"objective", s.objective},
                          {"iterations", s.iterations},
                          {"kkt_residual", s.kkt_residual},
                          {"weights", detail::to_json(s.weights.values())},
                          {"warnings", s.warnings}};
}

} // namespace pearl

#endif // PEARL_IO_HPP
