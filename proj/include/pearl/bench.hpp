#ifndef PEARL_BENCH_HPP
#define PEARL_BENCH_HPP

#include "pearl/baselines.hpp"
#include "pearl/csv.hpp"
#include "pearl/weights.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace pearl {

enum class CoefficientPolicy { PerRep, Fixed };

/// Synthetic regression benchmark settings.
struct SyntheticConfig {
    double sigma = 0.5;
    Index n_labeled = 200;
    Index n_unlabeled = 2000;
    Index n_test = 1000;
    int reps = 20;
    std::uint64_t seed = 20240611;
    CoefficientPolicy coefficient_policy = CoefficientPolicy::PerRep;
    /// (beta0, beta1, beta2, alpha1, alpha2, gamma); drawn from N(0, 0.09) when absent.
    std::optional<std::array<double, 6>> coefficients;

    void validate() const
    {
        require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be >= 0");
        require(n_labeled >= 1 && n_unlabeled >= 2 && n_test >= 1 && reps >= 1, "synthetic sample counts must be >= 1");
    }
};

struct SyntheticData {
    UnlabeledDataset unlabeled;
    LabeledDataset labeled;
    LabeledDataset test;
    std::array<double, 6> coefficients;
};

/// Seed of one repetition, hashed from (base seed, sigma, n, rep).
inline std::uint64_t rep_seed(const SyntheticConfig& cfg, int rep)
{
    return derive_seed(cfg.seed, {seed_tag(cfg.sigma), static_cast<std::uint64_t>(cfg.n_labeled),
                                  static_cast<std::uint64_t>(rep)});
}

/// y = b0 + b1 x1 + b2 x2 + a1 x1^2 + a2 x2^2 + g x1 x2 + sin^2(x1)
inline double synthetic_mean(const std::array<double, 6>& c, double x1, double x2)
{
    const double s = std::sin(x1);
    return c[0] + c[1] * x1 + c[2] * x2 + c[3] * x1 * x1 + c[4] * x2 * x2 + c[5] * x1 * x2 + s * s;
}

namespace detail {

enum StreamTag : std::uint64_t { kUnlabeledStream = 1, kLabeledStream = 2, kTestStream = 3, kCoefStream = 4, kCvStream = 5 };

inline Matrix gaussian_rows(Rng& rng, Index n)
{
    Matrix x(n, 2);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
    }
    return x;
}

inline LabeledDataset labeled_draw(Rng& rng, Index n, double sigma, const std::array<double, 6>& coef)
{
    Matrix x = gaussian_rows(rng, n);
    Vector y(n);
    for (Index i = 0; i < n; ++i)
        y(i) = synthetic_mean(coef, x(i, 0), x(i, 1)) + sigma * rng.normal();
    return LabeledDataset(std::move(x), RealTargets{std::move(y)});
}

} // namespace detail

/// x ~ N(0, I_2), y from the nonlinear mean plus N(0, sigma^2) noise.
/// Unlabeled, labeled and test rows come from disjoint seeded substreams.
inline SyntheticData generate_synthetic(const SyntheticConfig& cfg, int rep)
{
    cfg.validate();
    const auto seed = rep_seed(cfg, rep);
    std::array<double, 6> coef{};
    if (cfg.coefficients) {
        coef = *cfg.coefficients;
    } else {
        Rng crng(cfg.coefficient_policy == CoefficientPolicy::PerRep
                     ? derive_seed(seed, {detail::kCoefStream})
                     : derive_seed(cfg.seed, {detail::kCoefStream}));
        for (auto& c : coef)
            c = crng.normal(0.0, 0.3);
    }
    Rng urng(derive_seed(seed, {detail::kUnlabeledStream}));
    Rng lrng(derive_seed(seed, {detail::kLabeledStream}));
    Rng trng(derive_seed(seed, {detail::kTestStream}));
    return SyntheticData{UnlabeledDataset(detail::gaussian_rows(urng, cfg.n_unlabeled)),
                         detail::labeled_draw(lrng, cfg.n_labeled, cfg.sigma, coef),
                         detail::labeled_draw(trng, cfg.n_test, cfg.sigma, coef), coef};
}

/// Correctly specified representation for the synthetic mean:
/// (x1, x2, x1^2, x2^2, x1 x2, sin^2 x1).
class OracleFeatureFrl final : public CustomFrl {
public:
    std::string name() const override { return "oracle-features"; }
    Index input_dim() const override { return 2; }
    Index output_dim() const override { return 6; }
    Matrix transform(const Matrix& rows) const override
    {
        Matrix out(rows.rows(), 6);
        for (Index i = 0; i < rows.rows(); ++i) {
            const double a = rows(i, 0);
            const double b = rows(i, 1);
            const double s = std::sin(a);
            out.row(i) << a, b, a * a, b * b, a * b, s * s;
        }
        return out;
    }
};

inline CustomFrlFactory oracle_feature_factory()
{
    return [](const UnlabeledDataset&) { return std::make_shared<const OracleFeatureFrl>(); };
}

/// One (method, sigma, n, rep) outcome.
struct ResultRow {
    std::string method;
    double sigma = 0.0;
    Index n = 0;
    int rep = 0;
    Metrics metrics;
    std::optional<double> tau;
    double runtime_ms = 0.0;
    std::vector<double> weights; // PEARL rows only
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<std::string> warnings;
    std::size_t candidates = 0;
    std::size_t failed_reps = 0;
};

struct SuiteConfig {
    SyntheticConfig data;
    std::vector<double> sigmas{0.1, 0.5, 0.9, 1.5};
    std::vector<Index> ns{100, 200, 400, 800};
    std::vector<FrlConfig> frls = synthetic_frl_configs(2);
    CandidateScheme scheme;
    PearlOptions pearl;
    /// Record wall-clock runtimes; off keeps reports byte-reproducible.
    bool timing = false;
    int threads = 1;
};

inline constexpr std::string_view kPearlMethod = "PEARL";

inline int method_rank(std::string_view m)
{
    if (m == kPearlMethod)
        return 0;
    for (std::size_t i = 0; i < std::size(kAllBaselines); ++i)
        if (m == to_string(kAllBaselines[i]))
            return static_cast<int>(i) + 1;
    return 100;
}

inline void sort_rows(std::vector<ResultRow>& rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.sigma != b.sigma)
            return a.sigma < b.sigma;
        if (a.n != b.n)
            return a.n < b.n;
        if (a.rep != b.rep)
            return a.rep < b.rep;
        return method_rank(a.method) < method_rank(b.method);
    });
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

inline std::vector<Index> output_dims(const std::vector<FittedFrl>& frls)
{
    std::vector<Index> dims;
    for (const auto& f : frls)
        dims.push_back(f.output_dim());
    return dims;
}

/// PEARL plus the five baselines for one repetition of one grid cell.
inline std::vector<ResultRow> run_suite_rep(const SuiteConfig& cfg, const SyntheticConfig& cell, int rep)
{
    const auto start = Clock::now();
    const auto data = generate_synthetic(cell, rep);
    auto frls = fit_frls(cfg.frls, data.unlabeled);
    const auto pool = build_pool(cfg.scheme, output_dims(frls));
    PearlOptions opts = cfg.pearl;
    opts.cv_seed = derive_seed(rep_seed(cell, rep), {kCvStream});
    opts.threads = 1;
    const auto fit = fit_pearl(data.labeled, std::move(frls), pool, opts);
    const auto test_preds = fit.model.candidate_predictions(data.test.features());
    const auto pearl_pred = aggregate(test_preds, fit.model.weights());
    const double pearl_ms = elapsed_ms(start);

    std::vector<ResultRow> rows;
    ResultRow pr{std::string(kPearlMethod), cell.sigma, cell.n_labeled, rep,
                 metric_suite(data.test.target(), pearl_pred), std::nullopt, cfg.timing ? pearl_ms : 0.0, {}};
    const auto& w = fit.model.weights().values();
    pr.weights.assign(w.data(), w.data() + w.size());
    rows.push_back(std::move(pr));

    const PipelineState state{&fit.model.pool(), &fit.cv_table, &test_preds, opts.loss};
    for (auto kind : kAllBaselines) {
        const auto t0 = Clock::now();
        const auto res = run_baseline(kind, state, &data.test.target());
        const double ms = elapsed_ms(t0);
        rows.push_back(ResultRow{std::string(to_string(kind)), cell.sigma, cell.n_labeled, rep,
                                 metric_suite(data.test.target(), res.prediction), std::nullopt,
                                 cfg.timing ? ms : 0.0, {}});
    }
    return rows;
}

struct Job {
    double sigma;
    Index n;
    int rep;
};

/// Runs body over the job list in parallel, tolerating per-rep failures up
/// to 5% of the jobs.
template <typename Out, typename Body>
std::vector<std::optional<Out>> run_jobs(const std::vector<Job>& jobs, int threads, std::vector<std::string>& warnings,
                                         std::size_t& failed, Body&& body)
{
    std::vector<std::optional<Out>> out(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        try {
            out[i] = body(jobs[i]);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    failed = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i)
        if (!out[i]) {
            ++failed;
            std::ostringstream msg;
            msg << "sigma=" << csv::format_double(jobs[i].sigma) << " n=" << jobs[i].n << " rep=" << jobs[i].rep
                << " failed: " << errors[i];
            warnings.push_back(msg.str());
        }
    require(failed * 20 <= jobs.size(), std::to_string(failed) + " of " + std::to_string(jobs.size()) +
                                            " repetitions failed (limit 5%)");
    return out;
}

} // namespace detail

/// Full (sigma, n, rep) grid: PEARL and the five baselines evaluated on the
/// test rows of every repetition.
inline ExperimentResult run_synthetic_suite(const SuiteConfig& cfg)
{
    cfg.data.validate();
    std::vector<detail::Job> jobs;
    for (double s : cfg.sigmas)
        for (Index n : cfg.ns)
            for (int r = 0; r < cfg.data.reps; ++r)
                jobs.push_back({s, n, r});

    ExperimentResult result;
    auto outputs = detail::run_jobs<std::vector<ResultRow>>(jobs, cfg.threads, result.warnings, result.failed_reps,
                                                           [&](const detail::Job& job) {
                                                               SyntheticConfig cell = cfg.data;
                                                               cell.sigma = job.sigma;
                                                               cell.n_labeled = job.n;
                                                               return detail::run_suite_rep(cfg, cell, job.rep);
                                                           });
    for (auto& o : outputs)
        if (o) {
            if (!o->empty())
                result.candidates = o->front().weights.size();
            for (auto& row : *o)
                result.rows.push_back(std::move(row));
        }
    sort_rows(result.rows);
    return result;
}

struct ConsistencyConfig {
    SyntheticConfig data;
    std::vector<Index> ns{50, 200, 1000, 2000};
    std::vector<FrlConfig> frls = synthetic_frl_configs(2);
    bool include_oracle = true;
    PearlOptions pearl;
    int threads = 1;
};

struct ConsistencyPoint {
    Index n = 0;
    double mean_tau = 0.0;
    double sd_tau = 0.0;
    std::vector<double> taus; // by rep
};

/// Pool for the weight-consistency study: every nonempty subset of the
/// misspecified FRLs, plus (when present) the oracle FRL as a singleton
/// Explicit candidate appended last.
inline CandidatePool consistency_pool(const std::vector<Index>& misspecified_dims, std::optional<Index> oracle_dim)
{
    auto specs = enumerate_frl_subsets(misspecified_dims).specs();
    auto dims = misspecified_dims;
    if (oracle_dim) {
        specs.push_back(CandidateSpec::explicit_set("oracle", {static_cast<int>(dims.size())}));
        dims.push_back(*oracle_dim);
    }
    return CandidatePool(std::move(specs), std::move(dims));
}

/// Mean total weight on the correctly specified candidate, per n.
inline std::vector<ConsistencyPoint> run_weight_consistency(const ConsistencyConfig& cfg,
                                                            std::vector<std::string>* warnings = nullptr)
{
    cfg.data.validate();
    std::vector<detail::Job> jobs;
    for (Index n : cfg.ns)
        for (int r = 0; r < cfg.data.reps; ++r)
            jobs.push_back({cfg.data.sigma, n, r});

    std::vector<std::string> local_warnings;
    std::size_t failed = 0;
    auto taus = detail::run_jobs<double>(jobs, cfg.threads, local_warnings, failed, [&](const detail::Job& job) {
        SyntheticConfig cell = cfg.data;
        cell.n_labeled = job.n;
        const auto data = generate_synthetic(cell, job.rep);
        auto frls = fit_frls(cfg.frls, data.unlabeled);
        const auto dims = detail::output_dims(frls);
        std::optional<Index> oracle_dim;
        if (cfg.include_oracle) {
            frls.push_back(fit_custom(data.unlabeled, oracle_feature_factory()));
            oracle_dim = frls.back().output_dim();
        }
        const auto pool = consistency_pool(dims, oracle_dim);
        const auto foundation = transform_all(frls, data.labeled.features());
        const auto plan = make_cv_plan(job.n, cfg.pearl.folds, derive_seed(rep_seed(cell, job.rep), {detail::kCvStream}));
        const auto table = cv_predictions(data.labeled.target(), pool, foundation, plan, cfg.pearl.downstream);
        const auto sol = solve_weights(table, cfg.pearl.loss, cfg.pearl.solver);
        return cfg.include_oracle ? sol.weights[static_cast<Index>(pool.size()) - 1] : 0.0;
    });
    if (warnings)
        warnings->insert(warnings->end(), local_warnings.begin(), local_warnings.end());

    std::vector<ConsistencyPoint> curve;
    std::size_t at = 0;
    for (Index n : cfg.ns) {
        ConsistencyPoint p;
        p.n = n;
        for (int r = 0; r < cfg.data.reps; ++r, ++at)
            if (taus[at])
                p.taus.push_back(*taus[at]);
        if (!p.taus.empty()) {
            double sum = 0.0;
            for (double t : p.taus)
                sum += t;
            p.mean_tau = sum / static_cast<double>(p.taus.size());
            double ss = 0.0;
            for (double t : p.taus)
                ss += (t - p.mean_tau) * (t - p.mean_tau);
            p.sd_tau = p.taus.size() > 1 ? std::sqrt(ss / static_cast<double>(p.taus.size() - 1)) : 0.0;
        }
        curve.push_back(std::move(p));
    }
    return curve;
}

struct OverfitComparison {
    int rep = 0;
    double cv_mse = 0.0;    // test MSE with cross-validated weights
    double naive_mse = 0.0; // test MSE with in-sample weights
};

/// Test MSE of cross-validated versus in-sample weight tuning on the same
/// fitted candidates, one entry per repetition of the configured cell.
inline std::vector<OverfitComparison> run_overfitting_comparison(const SuiteConfig& cfg)
{
    cfg.data.validate();
    std::vector<detail::Job> jobs;
    for (int r = 0; r < cfg.data.reps; ++r)
        jobs.push_back({cfg.data.sigma, cfg.data.n_labeled, r});
    std::vector<std::string> warnings;
    std::size_t failed = 0;
    auto out = detail::run_jobs<OverfitComparison>(jobs, cfg.threads, warnings, failed, [&](const detail::Job& job) {
        const auto data = generate_synthetic(cfg.data, job.rep);
        auto frls = fit_frls(cfg.frls, data.unlabeled);
        const auto pool = build_pool(cfg.scheme, detail::output_dims(frls));
        PearlOptions opts = cfg.pearl;
        opts.cv_seed = derive_seed(rep_seed(cfg.data, job.rep), {detail::kCvStream});
        opts.threads = 1;
        const auto fit = fit_pearl(data.labeled, std::move(frls), pool, opts);
        const auto naive = solve_weights_naive(data.labeled.target(), pool, fit.train_foundation, opts.downstream,
                                               opts.loss, opts.solver);
        const auto test_preds = fit.model.candidate_predictions(data.test.features());
        return OverfitComparison{job.rep,
                                 metric_suite(data.test.target(), aggregate(test_preds, fit.model.weights())).mse,
                                 metric_suite(data.test.target(), aggregate(test_preds, naive.weights)).mse};
    });
    std::vector<OverfitComparison> rows;
    for (auto& o : out)
        if (o)
            rows.push_back(*o);
    return rows;
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr std::string_view kTidyHeader = "method,sigma,n,rep,mse,acc,ce,tau,runtime_ms";
inline constexpr std::string_view kAggregateHeader =
    "method,sigma,n,reps,mse_mean,mse_sd,acc_mean,acc_sd,ce_mean,ce_sd,tau_mean,tau_sd,runtime_ms_mean";

namespace detail {

inline std::string cell(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

/// Two-pass mean and sample standard deviation (0 for a single value).
inline MeanSd mean_sd(const std::vector<double>& v)
{
    MeanSd r;
    if (v.empty())
        return r;
    for (double x : v)
        r.mean += x;
    r.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v)
            ss += (x - r.mean) * (x - r.mean);
        r.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return r;
}

} // namespace detail

inline void write_tidy_csv(std::ostream& out, const std::vector<ResultRow>& rows)
{
    out << kTidyHeader << '\n';
    for (const auto& r : rows)
        out << r.method << ',' << csv::format_double(r.sigma) << ',' << r.n << ',' << r.rep << ','
            << csv::format_double(r.metrics.mse) << ',' << detail::cell(r.metrics.accuracy) << ','
            << detail::cell(r.metrics.ce) << ',' << detail::cell(r.tau) << ',' << csv::format_double(r.runtime_ms)
            << '\n';
}

/// Mean and SD per (method, sigma, n), in the order the groups first
/// appear in the (sorted) rows.
inline void write_aggregate_csv(std::ostream& out, const std::vector<ResultRow>& rows)
{
    out << kAggregateHeader << '\n';
    struct Group {
        std::string method;
        double sigma;
        Index n;
        std::vector<double> mse, acc, ce, tau, runtime;
    };
    std::vector<Group> groups;
    std::map<std::tuple<std::string, double, Index>, std::size_t> index;
    for (const auto& r : rows) {
        const auto key = std::make_tuple(r.method, r.sigma, r.n);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, groups.size()).first;
            groups.push_back(Group{r.method, r.sigma, r.n, {}, {}, {}, {}, {}});
        }
        auto& g = groups[it->second];
        g.mse.push_back(r.metrics.mse);
        if (r.metrics.accuracy)
            g.acc.push_back(*r.metrics.accuracy);
        if (r.metrics.ce)
            g.ce.push_back(*r.metrics.ce);
        if (r.tau)
            g.tau.push_back(*r.tau);
        g.runtime.push_back(r.runtime_ms);
    }
    auto pair = [](const std::vector<double>& v) {
        if (v.empty())
            return std::string(",");
        const auto s = detail::mean_sd(v);
        return csv::format_double(s.mean) + "," + csv::format_double(s.sd);
    };
    for (const auto& g : groups)
        out << g.method << ',' << csv::format_double(g.sigma) << ',' << g.n << ',' << g.mse.size() << ',' << pair(g.mse)
            << ',' << pair(g.acc) << ',' << pair(g.ce) << ',' << pair(g.tau) << ','
            << csv::format_double(detail::mean_sd(g.runtime).mean) << '\n';
}

/// PEARL weight vectors, one row per (sigma, n, rep).
inline void write_weights_csv(std::ostream& out, const std::vector<ResultRow>& rows, std::size_t candidates)
{
    out << "sigma,n,rep";
    for (std::size_t j = 0; j < candidates; ++j)
        out << ",w" << j + 1;
    out << '\n';
    for (const auto& r : rows) {
        if (r.method != kPearlMethod)
            continue;
        out << csv::format_double(r.sigma) << ',' << r.n << ',' << r.rep;
        for (double w : r.weights)
            out << ',' << csv::format_double(w);
        out << '\n';
    }
}

inline void write_consistency_csv(std::ostream& out, const std::vector<ConsistencyPoint>& curve)
{
    out << "n,reps,tau_mean,tau_sd\n";
    for (const auto& p : curve)
        out << p.n << ',' << p.taus.size() << ',' << csv::format_double(p.mean_tau) << ','
            << csv::format_double(p.sd_tau) << '\n';
}

/// Writes results.csv, aggregate.csv and weights.csv into `dir` and returns
/// a short human-readable summary.
inline std::string emit_report(const ExperimentResult& result, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        require(f.good(), "cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("results.csv");
        write_tidy_csv(f, result.rows);
        require(f.good(), "write failed for results.csv");
    }
    {
        auto f = open("aggregate.csv");
        write_aggregate_csv(f, result.rows);
        require(f.good(), "write failed for aggregate.csv");
    }
    {
        auto f = open("weights.csv");
        write_weights_csv(f, result.rows, result.candidates);
        require(f.good(), "write failed for weights.csv");
    }
    std::ostringstream s;
    s << result.rows.size() << " result rows, J = " << result.candidates << " candidates";
    if (result.failed_reps)
        s << ", " << result.failed_reps << " failed repetitions";
    s << "\nBest-ORACLE picks its FRL with test labels and is not a deployable method.\n";
    std::ostringstream agg;
    write_aggregate_csv(agg, result.rows);
    s << agg.str();
    return s.str();
}

} // namespace pearl

#endif // PEARL_BENCH_HPP
