#ifndef PEARL_CONFIG_HPP
#define PEARL_CONFIG_HPP

#include "pearl/bench.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <string>

namespace pearl {

/// Everything an experiment config file can set. See README for the schema.
struct ExperimentConfig {
    std::vector<FrlConfig> frls = synthetic_frl_configs(2);
    CandidateScheme candidates;
    PearlOptions pearl;
    SyntheticConfig synthetic;
    std::vector<double> sigmas{0.1, 0.5, 0.9, 1.5};
    std::vector<Index> ns{100, 200, 400, 800};
    double consistency_sigma = 0.5;
    std::vector<Index> consistency_ns{50, 200, 1000, 2000};
    int consistency_reps = 10;
    bool include_oracle = true;
    bool timing = false;
    int threads = default_thread_count();

    SuiteConfig suite() const
    {
        SuiteConfig s;
        s.data = synthetic;
        s.sigmas = sigmas;
        s.ns = ns;
        s.frls = frls;
        s.scheme = candidates;
        s.pearl = pearl;
        s.timing = timing;
        s.threads = threads;
        return s;
    }

    ConsistencyConfig consistency() const
    {
        ConsistencyConfig c;
        c.data = synthetic;
        c.data.sigma = consistency_sigma;
        c.data.reps = consistency_reps;
        c.ns = consistency_ns;
        c.frls = frls;
        c.include_oracle = include_oracle;
        c.pearl = pearl;
        c.threads = threads;
        return c;
    }
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    require(j.is_object(), "config: '" + where + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        require(ok.count(k) > 0, "config: unknown key '" + k + "' in '" + where + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& out)
{
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw Error(std::string("config: bad value for '") + key + "': " + e.what());
        }
    }
}

inline std::vector<int> one_based(const json& arr, const std::string& what)
{
    require(arr.is_array(), "config: '" + what + "' must be an array of 1-based indices");
    std::vector<int> out;
    for (const auto& v : arr) {
        require(v.is_number_integer() && v.get<int>() >= 1, "config: '" + what + "' indices must be integers >= 1");
        out.push_back(v.get<int>() - 1);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline FrlConfig parse_frl(const json& j)
{
    check_keys(j, "frls[]", {"method", "kernel", "params", "p"});
    FrlConfig c;
    const auto method = j.value("method", std::string("pca"));
    if (method == "pca")
        c.method = FrlMethod::Pca;
    else if (method == "kpca")
        c.method = FrlMethod::Kpca;
    else if (method == "identity")
        c.method = FrlMethod::Identity;
    else
        throw Error("config: unknown FRL method '" + method + "'");
    read_opt(j, "p", c.p);
    if (c.method == FrlMethod::Kpca) {
        require(j.contains("kernel"), "config: kpca entries need a 'kernel'");
        const auto kind = parse_kernel_kind(j.at("kernel").get<std::string>());
        switch (kind) {
        case KernelKind::Linear: c.kernel = KernelSpec::linear(); break;
        case KernelKind::Gaussian: c.kernel = KernelSpec::gaussian(); break;
        case KernelKind::Polynomial: c.kernel = KernelSpec::polynomial(); break;
        case KernelKind::Sigmoid: c.kernel = KernelSpec::sigmoid(); break;
        case KernelKind::Cosine: c.kernel = KernelSpec::cosine(); break;
        }
        if (j.contains("params")) {
            const auto& p = j.at("params");
            check_keys(p, "frls[].params", {"gamma", "degree", "coef0"});
            if (p.contains("gamma"))
                c.kernel.gamma = p.at("gamma").get<double>();
            read_opt(p, "degree", c.kernel.degree);
            read_opt(p, "coef0", c.kernel.coef0);
        }
        c.kernel.validate();
    }
    return c;
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j)
{
    using detail::check_keys;
    using detail::read_opt;
    check_keys(j, "<root>",
               {"frls", "candidates", "downstream", "cv", "solver", "synthetic", "consistency", "report", "threads"});
    ExperimentConfig c;
    if (j.contains("frls")) {
        require(j.at("frls").is_array() && !j.at("frls").empty(), "config: 'frls' must be a nonempty array");
        c.frls.clear();
        for (const auto& f : j.at("frls"))
            c.frls.push_back(detail::parse_frl(f));
    }
    if (j.contains("candidates")) {
        const auto& cj = j.at("candidates");
        check_keys(cj, "candidates", {"scheme", "explicit"});
        const auto scheme = cj.value("scheme", std::string("frl_subsets"));
        if (scheme == "frl_subsets")
            c.candidates.kind = CandidateSchemeKind::FrlSubsets;
        else if (scheme == "fusion_columns")
            c.candidates.kind = CandidateSchemeKind::FusionColumns;
        else if (scheme == "explicit")
            c.candidates.kind = CandidateSchemeKind::Explicit;
        else
            throw Error("config: unknown candidates.scheme '" + scheme + "'");
        if (cj.contains("explicit")) {
            require(cj.at("explicit").is_array(), "config: candidates.explicit must be an array");
            for (const auto& e : cj.at("explicit")) {
                check_keys(e, "candidates.explicit[]", {"name", "frls", "columns"});
                if (e.contains("columns"))
                    c.candidates.explicit_specs.push_back(
                        CandidateSpec::fusion_columns(detail::one_based(e.at("columns"), "columns")));
                else
                    c.candidates.explicit_specs.push_back(CandidateSpec::explicit_set(
                        e.value("name", std::string("explicit")), detail::one_based(e.at("frls"), "frls")));
            }
        }
        require(c.candidates.kind != CandidateSchemeKind::Explicit || !c.candidates.explicit_specs.empty(),
                "config: explicit scheme needs candidates.explicit entries");
    }
    if (j.contains("downstream")) {
        const auto& d = j.at("downstream");
        check_keys(d, "downstream", {"model", "lambda", "l2", "max_iter", "tol"});
        const auto model = d.value("model", std::string("ridge"));
        require(model == "ridge" || model == "softmax", "config: downstream.model must be ridge or softmax");
        c.pearl.downstream.model = model == "ridge" ? DownstreamModel::Ridge : DownstreamModel::Softmax;
        read_opt(d, "lambda", c.pearl.downstream.lambda);
        read_opt(d, "l2", c.pearl.downstream.l2);
        read_opt(d, "max_iter", c.pearl.downstream.max_iter);
        read_opt(d, "tol", c.pearl.downstream.tol);
        if (c.pearl.downstream.model == DownstreamModel::Softmax && !j.contains("solver"))
            c.pearl.loss = SurrogateLoss::CrossEntropy;
    }
    if (j.contains("cv")) {
        const auto& cv = j.at("cv");
        check_keys(cv, "cv", {"folds", "seed"});
        read_opt(cv, "folds", c.pearl.folds);
        read_opt(cv, "seed", c.pearl.cv_seed);
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        check_keys(s, "solver", {"loss", "max_iter", "tol"});
        if (s.contains("loss"))
            c.pearl.loss = parse_loss(s.at("loss").get<std::string>());
        else if (c.pearl.downstream.model == DownstreamModel::Softmax)
            c.pearl.loss = SurrogateLoss::CrossEntropy;
        read_opt(s, "max_iter", c.pearl.solver.max_iter);
        read_opt(s, "tol", c.pearl.solver.tol);
    }
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        check_keys(s, "synthetic",
                   {"sigmas", "ns", "n_unlabeled", "n_test", "reps", "seed", "coefficient_policy", "coefficients"});
        read_opt(s, "sigmas", c.sigmas);
        read_opt(s, "ns", c.ns);
        read_opt(s, "n_unlabeled", c.synthetic.n_unlabeled);
        read_opt(s, "n_test", c.synthetic.n_test);
        read_opt(s, "reps", c.synthetic.reps);
        read_opt(s, "seed", c.synthetic.seed);
        const auto policy = s.value("coefficient_policy", std::string("per_rep"));
        require(policy == "per_rep" || policy == "fixed", "config: coefficient_policy must be per_rep or fixed");
        c.synthetic.coefficient_policy = policy == "per_rep" ? CoefficientPolicy::PerRep : CoefficientPolicy::Fixed;
        if (s.contains("coefficients")) {
            std::array<double, 6> coef{};
            const auto v = s.at("coefficients").get<std::vector<double>>();
            require(v.size() == 6, "config: synthetic.coefficients needs 6 values");
            std::copy(v.begin(), v.end(), coef.begin());
            c.synthetic.coefficients = coef;
        }
        for (double sg : c.sigmas)
            require(std::isfinite(sg) && sg >= 0.0, "config: sigmas must be >= 0");
        for (Index n : c.ns)
            require(n >= 1, "config: ns must be >= 1");
    }
    if (j.contains("consistency")) {
        const auto& s = j.at("consistency");
        check_keys(s, "consistency", {"sigma", "ns", "reps", "include_oracle"});
        read_opt(s, "sigma", c.consistency_sigma);
        read_opt(s, "ns", c.consistency_ns);
        read_opt(s, "reps", c.consistency_reps);
        read_opt(s, "include_oracle", c.include_oracle);
    }
    if (j.contains("report")) {
        check_keys(j.at("report"), "report", {"timing"});
        read_opt(j.at("report"), "timing", c.timing);
    }
    read_opt(j, "threads", c.threads);
    require(c.threads >= 1, "config: threads must be >= 1");
    return c;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    require(in.good(), "cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw Error("config '" + path + "': " + e.what());
    }
    return parse_config(j);
}

} // namespace pearl

#endif // PEARL_CONFIG_HPP
