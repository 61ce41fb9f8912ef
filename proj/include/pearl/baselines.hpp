#ifndef PEARL_BASELINES_HPP
#define PEARL_BASELINES_HPP

#include "pearl/weights.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pearl {

enum class BaselineKind { Best, Fusion, SaFrl, SaCand, Ms };

inline std::string_view to_string(BaselineKind k)
{
    switch (k) {
    case BaselineKind::Best: return "Best-ORACLE";
    case BaselineKind::Fusion: return "Fusion";
    case BaselineKind::SaFrl: return "SA-FRL";
    case BaselineKind::SaCand: return "SA-cand";
    case BaselineKind::Ms: return "MS";
    }
    return "?";
}

inline constexpr BaselineKind kAllBaselines[] = {BaselineKind::Best, BaselineKind::Fusion, BaselineKind::SaFrl,
                                                 BaselineKind::SaCand, BaselineKind::Ms};

/// State shared by every baseline: the CV table of the labeled rows and
/// each candidate's full-data predictions on the test rows.
struct PipelineState {
    const CandidatePool* pool = nullptr;
    const CvPredictionTable* cv_table = nullptr;
    const std::vector<PredictionBlock>* test_predictions = nullptr;
    SurrogateLoss loss = SurrogateLoss::SquaredError;
};

struct BaselineReport {
    BaselineKind kind;
    WeightVector weights;
    std::optional<std::size_t> chosen; // single-candidate methods
    bool oracle = false;               // used test labels
};

struct BaselineResult {
    PredictionBlock prediction;
    BaselineReport report;
};

/// The task's original loss on a test block: MSE for regression, error
/// rate (1 - accuracy) for classification.
inline double original_loss(const Targets& truth, const PredictionBlock& pred)
{
    const auto m = metric_suite(truth, pred);
    return m.accuracy ? 1.0 - *m.accuracy : m.mse;
}

inline BaselineResult run_baseline(BaselineKind kind, const PipelineState& state, const Targets* test_truth = nullptr)
{
    require(state.pool && state.cv_table && state.test_predictions, "baseline pipeline state is incomplete");
    const auto& pool = *state.pool;
    const auto& test = *state.test_predictions;
    const auto j = static_cast<Index>(pool.size());
    require(test.size() == pool.size() && state.cv_table->candidates() == pool.size(),
            "pipeline state disagrees on candidate count");

    auto single = [&](std::size_t at, bool oracle) {
        auto w = WeightVector::vertex(j, static_cast<Index>(at));
        return BaselineResult{aggregate(test, w), BaselineReport{kind, std::move(w), at, oracle}};
    };
    auto averaged = [&](const std::vector<std::size_t>& members) {
        Vector w = Vector::Zero(j);
        for (auto m : members)
            w(static_cast<Index>(m)) = 1.0 / static_cast<double>(members.size());
        WeightVector wv(std::move(w));
        return BaselineResult{aggregate(test, wv), BaselineReport{kind, std::move(wv), std::nullopt, false}};
    };

    switch (kind) {
    case BaselineKind::Best: {
        require(test_truth != nullptr, "oracle baseline needs labels");
        const auto singles = pool.single_frl_indices();
        require(!singles.empty(), "Best needs single-FRL candidates in the pool");
        std::size_t best = singles.front();
        double best_loss = std::numeric_limits<double>::infinity();
        for (auto s : singles) {
            const double l = original_loss(*test_truth, test[s]);
            if (l < best_loss) {
                best_loss = l;
                best = s;
            }
        }
        return single(best, true);
    }
    case BaselineKind::Fusion: {
        const auto f = pool.fusion_index();
        require(f.has_value(), "Fusion needs a candidate covering every FRL");
        return single(*f, false);
    }
    case BaselineKind::SaFrl: {
        const auto singles = pool.single_frl_indices();
        require(!singles.empty(), "SA-FRL needs single-FRL candidates in the pool");
        return averaged(singles);
    }
    case BaselineKind::SaCand: {
        std::vector<std::size_t> all(pool.size());
        for (std::size_t i = 0; i < all.size(); ++i)
            all[i] = i;
        return averaged(all);
    }
    case BaselineKind::Ms: {
        const WeightObjective obj(*state.cv_table, state.loss);
        std::size_t best = 0;
        double best_value = std::numeric_limits<double>::infinity();
        for (Index k = 0; k < j; ++k) {
            const double v = obj.value(obj.unit(k));
            if (v < best_value) {
                best_value = v;
                best = static_cast<std::size_t>(k);
            }
        }
        return single(best, false);
    }
    }
    throw Error("unknown baseline");
}

} // namespace pearl

#endif // PEARL_BASELINES_HPP
