// Command-line front end: synthetic benchmark, weight-consistency study,
// and fit/predict on CSV data.

#include "pearl/pearl.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

pearl::ExperimentConfig load_or_default(const std::string& path)
{
    return path.empty() ? pearl::ExperimentConfig{} : pearl::load_config(path);
}

void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    pearl::require(out.good(), "cannot write " + path.string());
    out << text;
}

int run_synthetic(const std::string& config_path, const std::string& out_dir, int threads)
{
    auto cfg = load_or_default(config_path);
    if (threads > 0)
        cfg.threads = threads;
    const auto result = pearl::run_synthetic_suite(cfg.suite());
    std::cout << pearl::emit_report(result, out_dir);
    for (const auto& w : result.warnings)
        std::cerr << "warning: " << w << '\n';
    return 0;
}

int weight_consistency(const std::string& config_path, const std::string& out_dir, int threads)
{
    auto cfg = load_or_default(config_path);
    if (threads > 0)
        cfg.threads = threads;
    std::vector<std::string> warnings;
    const auto curve = pearl::run_weight_consistency(cfg.consistency(), &warnings);
    std::ostringstream csv;
    pearl::write_consistency_csv(csv, curve);
    std::cout << csv.str();
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_file(std::filesystem::path(out_dir) / "consistency.csv", csv.str());
    }
    for (const auto& w : warnings)
        std::cerr << "warning: " << w << '\n';
    return 0;
}

int overfit_compare(const std::string& config_path, double sigma, pearl::Index n, int reps, int threads)
{
    auto cfg = load_or_default(config_path);
    if (threads > 0)
        cfg.threads = threads;
    auto suite = cfg.suite();
    suite.data.sigma = sigma;
    suite.data.n_labeled = n;
    if (reps > 0)
        suite.data.reps = reps;
    const auto rows = pearl::run_overfitting_comparison(suite);
    std::cout << "rep,cv_mse,naive_mse\n";
    std::size_t wins = 0;
    for (const auto& r : rows) {
        std::cout << r.rep << ',' << pearl::csv::format_double(r.cv_mse) << ','
                  << pearl::csv::format_double(r.naive_mse) << '\n';
        wins += r.cv_mse <= r.naive_mse ? 1 : 0;
    }
    std::cerr << "cross-validated weights at least as good in " << wins << " of " << rows.size() << " reps\n";
    return 0;
}

int fit(const std::string& data_path, const std::string& label, const std::string& config_path,
        const std::string& model_path, const std::string& unlabeled_path)
{
    const auto cfg = load_or_default(config_path);
    const auto task = cfg.pearl.downstream.model == pearl::DownstreamModel::Ridge ? pearl::TaskKind::Regression
                                                                                  : pearl::TaskKind::Classification;
    const auto train = pearl::read_labeled_csv(data_path, label, task);
    std::optional<pearl::UnlabeledDataset> unlabeled;
    if (!unlabeled_path.empty()) {
        std::ifstream in(unlabeled_path);
        pearl::require(in.good(), "cannot open '" + unlabeled_path + "'");
        unlabeled.emplace(pearl::read_feature_csv(in, label));
    }
    auto opts = cfg.pearl;
    opts.threads = cfg.threads;
    const auto [fitted, train_pred] = pearl::pearl_fit_predict(train, train.features(), cfg.frls, cfg.candidates, opts,
                                                               unlabeled ? &*unlabeled : nullptr);
    pearl::save_model(fitted.model, model_path);
    auto report = pearl::diagnostics_to_json(*fitted.solution);
    report["candidates"] = fitted.model.pool().size();
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& s : fitted.model.pool().specs())
        labels.push_back(s.label());
    report["candidate_labels"] = labels;
    std::cout << report.dump(2) << '\n';
    return 0;
}

int predict(const std::string& data_path, const std::string& label, const std::string& model_path,
            const std::string& out_path)
{
    const auto model = pearl::load_model(model_path);
    std::ifstream in(data_path);
    pearl::require(in.good(), "cannot open '" + data_path + "'");
    std::optional<pearl::LabeledDataset> labeled;
    pearl::Matrix features;
    if (!label.empty()) {
        labeled.emplace(pearl::read_labeled_csv(in, label, model.task()));
        features = labeled->features();
    } else {
        features = pearl::read_feature_csv(in);
    }
    const auto pred = model.predict(features);

    std::ostringstream out;
    if (pred.kind() == pearl::TaskKind::Regression) {
        out << "prediction\n";
    } else {
        for (pearl::Index k = 0; k < pred.cols(); ++k)
            out << (k ? "," : "") << "p" << k;
        out << '\n';
    }
    for (pearl::Index i = 0; i < pred.rows(); ++i) {
        for (pearl::Index k = 0; k < pred.cols(); ++k)
            out << (k ? "," : "") << pearl::csv::format_double(pred.values()(i, k));
        out << '\n';
    }
    if (out_path.empty())
        std::cout << out.str();
    else
        write_file(out_path, out.str());

    if (labeled) {
        const auto m = pearl::metric_suite(labeled->target(), pred);
        std::cerr << "mse " << pearl::csv::format_double(m.mse);
        if (m.accuracy)
            std::cerr << " acc " << pearl::csv::format_double(*m.accuracy);
        if (m.ce)
            std::cerr << " ce " << pearl::csv::format_double(*m.ce);
        std::cerr << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"pearl: aggregated representation learning with cross-validated averaging weights"};
    app.require_subcommand(1);

    std::string config, out, data, label, model, unlabeled;
    int threads = 0;

    auto* synth = app.add_subcommand("run-synthetic", "Run the synthetic benchmark grid");
    synth->add_option("--config", config, "Experiment config (JSON)");
    synth->add_option("--out", out, "Output directory")->required();
    synth->add_option("--threads", threads, "Worker threads (overrides PEARL_THREADS)");

    auto* cons = app.add_subcommand("weight-consistency", "Weight on the correctly specified candidate versus n");
    cons->add_option("--config", config, "Experiment config (JSON)");
    cons->add_option("--out", out, "Optional output directory for consistency.csv");
    cons->add_option("--threads", threads, "Worker threads (overrides PEARL_THREADS)");

    double sigma = 0.9;
    pearl::Index n = 100;
    int reps = 50;
    auto* over = app.add_subcommand("overfit-compare", "Cross-validated versus in-sample weight tuning");
    over->add_option("--config", config, "Experiment config (JSON)");
    over->add_option("--sigma", sigma, "Noise SD")->capture_default_str();
    over->add_option("--n", n, "Labeled sample size")->capture_default_str();
    over->add_option("--reps", reps, "Repetitions")->capture_default_str();
    over->add_option("--threads", threads, "Worker threads (overrides PEARL_THREADS)");

    auto* fitc = app.add_subcommand("fit", "Fit a model on a labeled CSV");
    fitc->add_option("--data", data, "Training CSV")->required();
    fitc->add_option("--label", label, "Label column name")->required();
    fitc->add_option("--config", config, "Experiment config (JSON)");
    fitc->add_option("--model", model, "Where to write the fitted model (JSON)")->required();
    fitc->add_option("--unlabeled", unlabeled, "Optional CSV of unlabeled rows for the FRLs");

    auto* pred = app.add_subcommand("predict", "Predict a CSV with a fitted model");
    pred->add_option("--data", data, "Input CSV")->required();
    pred->add_option("--model", model, "Fitted model (JSON)")->required();
    pred->add_option("--label", label, "Label column to drop and score against");
    pred->add_option("--out", out, "Prediction CSV (stdout when omitted)");
    pred->add_option("--config", config, "Accepted for symmetry with fit; unused");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth)
            return run_synthetic(config, out, threads);
        if (*cons)
            return weight_consistency(config, out, threads);
        if (*over)
            return overfit_compare(config, sigma, n, reps, threads);
        if (*fitc)
            return fit(data, label, config, model, unlabeled);
        if (*pred)
            return predict(data, label, model, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
