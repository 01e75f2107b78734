#include "ranknet/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ranknet/errors.hpp"
#include "ranknet/rng.hpp"

namespace ranknet {

MetricPair evaluate_model(const TrainedModel& model, const Dataset& ds,
                          std::span<const std::size_t> indices) {
    if (indices.size() < 2)
        throw InputError("evaluate_model needs at least 2 samples, got " +
                         std::to_string(indices.size()));
    std::vector<double> predicted, truth;
    predicted.reserve(indices.size());
    truth.reserve(indices.size());
    for (std::size_t idx : indices) {
        if (idx >= ds.size()) throw InputError("evaluation index out of range");
        predicted.push_back(score(model, ds[idx].features));
        truth.push_back(ds[idx].score);
    }
    const MetricValue r = pearson(predicted, truth);
    const MetricValue tau = kendall_tau(predicted, truth);
    MetricPair out;
    out.pearson_r = r.value;
    out.pearson_degenerate = r.degenerate;
    out.kendall_tau = tau.value;
    out.tau_degenerate = tau.degenerate;
    out.n = static_cast<int>(indices.size());
    return out;
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.fractions.empty()) throw ConfigError("experiment needs at least one dataset fraction");
    for (double f : cfg.fractions)
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("fractions must lie strictly between 0 and 1");
    if (cfg.lambdas.empty()) throw ConfigError("experiment needs at least one lambda");
    for (double l : cfg.lambdas)
        if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("lambdas must lie in [0,1]");
    if (cfg.n_folds < 1) throw ConfigError("n_folds must be >= 1");
    if (cfg.pair_threshold < 0.0) throw ConfigError("pair_threshold must be >= 0");
    if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
    TrainConfig probe = cfg.base;
    probe.loss = LossConfig{LossVariant::lupi, cfg.lambdas.front(), cfg.base.loss.tau};
    validate(probe);
}

namespace {

struct CellTask {
    std::size_t frac_idx, fold, method_idx;
};

std::string method_name(LossVariant variant, double lambda) {
    if (variant == LossVariant::plain) return "ranknet";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "lupi_%g", lambda);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

ExperimentReport run_experiment(const Dataset& ds, const ExperimentConfig& cfg) {
    validate(cfg);
    if (ds.empty()) throw InputError("run_experiment needs a non-empty dataset");

    ExperimentReport report;
    report.config = cfg;
    report.dataset_size = ds.size();
    report.feature_dim = ds.feature_dim();

    // method 0 = plain ranknet; then one lupi method per lambda
    std::vector<std::pair<LossVariant, double>> methods;
    methods.emplace_back(LossVariant::plain, 1.0);
    for (double l : cfg.lambdas) methods.emplace_back(LossVariant::lupi, l);

    const std::uint64_t master = cfg.base.seed;
    const auto n_folds = static_cast<std::size_t>(cfg.n_folds);

    // fixed per-fold inputs, shared by every method for a fair comparison
    struct FoldData {
        std::vector<std::size_t> train_idx, val_idx, test_idx;
        std::vector<PairSample> train_pairs, val_pairs;
        std::uint64_t train_seed = 0;
    };
    std::vector<std::vector<FoldData>> fold_data(cfg.fractions.size());

    report.fractions.resize(cfg.fractions.size());
    for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
        FractionReport& fr = report.fractions[fi];
        fr.fraction = cfg.fractions[fi];
        fr.plans = group_holdout_split(ds, fr.fraction, cfg.n_folds,
                                       derive_seed(master, 0x5011u + fi), cfg.validation_fraction);
        fr.methods.resize(methods.size());
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            fr.methods[mi].name = method_name(methods[mi].first, methods[mi].second);
            fr.methods[mi].variant = methods[mi].first;
            fr.methods[mi].lambda = methods[mi].second;
            fr.methods[mi].folds.resize(n_folds);
        }

        fold_data[fi].resize(n_folds);
        for (std::size_t fold = 0; fold < n_folds; ++fold) {
            const SplitPlan& plan = fr.plans[fold];
            FoldData& fd = fold_data[fi][fold];
            const auto eff_train = plan.effective_train_groups();
            fd.train_idx = ds.indices_for_groups(eff_train);
            fd.val_idx = ds.indices_for_groups(plan.validation_groups);
            fd.test_idx = ds.indices_for_groups(plan.test_groups);
            const std::uint64_t pair_seed = derive_seed(master, 0xbadb0000u + fi * 1024 + fold);
            fd.train_pairs =
                make_pairs(ds, fd.train_idx, cfg.pair_threshold, pair_seed, cfg.pair_cap);
            fd.val_pairs =
                make_pairs(ds, fd.val_idx, cfg.pair_threshold, pair_seed + 1, cfg.pair_cap);
            fd.train_seed = derive_seed(master, 0x7ea10000u + fi * 1024 + fold);
            if (fd.train_pairs.empty())
                throw InputError("fraction=" + fmt_g(fr.fraction) + " fold=" +
                                 std::to_string(fold) + ": no training pairs above threshold");
            if (fd.val_pairs.empty())
                throw InputError("fraction=" + fmt_g(fr.fraction) + " fold=" +
                                 std::to_string(fold) + ": no validation pairs above threshold");
        }
    }

    // flatten the grid into independent cells
    std::vector<CellTask> tasks;
    for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi)
        for (std::size_t fold = 0; fold < n_folds; ++fold)
            for (std::size_t mi = 0; mi < methods.size(); ++mi) tasks.push_back({fi, fold, mi});

    std::vector<std::string> failures(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};

    auto run_cell = [&](const CellTask& task) {
        const FoldData& fd = fold_data[task.frac_idx][task.fold];
        TrainConfig tc = cfg.base;
        tc.seed = fd.train_seed; // identical across methods on purpose
        if (methods[task.method_idx].first == LossVariant::plain) {
            tc.loss = LossConfig{LossVariant::plain, 1.0, cfg.base.loss.tau};
        } else {
            tc.loss =
                LossConfig{LossVariant::lupi, methods[task.method_idx].second, cfg.base.loss.tau};
        }
        const TrainedModel model = train(ds, fd.train_pairs, fd.val_pairs, tc);
        FoldOutcome& out =
            report.fractions[task.frac_idx].methods[task.method_idx].folds[task.fold];
        out.test = evaluate_model(model, ds, fd.test_idx);
        out.validation = evaluate_model(model, ds, fd.val_idx);
        out.stopped_epoch = model.stopped_epoch;
        out.best_epoch = model.best_epoch;
    };

    auto worker = [&]() {
        while (true) {
            const std::size_t k = next.fetch_add(1);
            if (k >= tasks.size()) return;
            try {
                run_cell(tasks[k]);
            } catch (const std::exception& e) {
                const CellTask& t = tasks[k];
                failures[k] = "fraction=" + fmt_g(cfg.fractions[t.frac_idx]) +
                              " fold=" + std::to_string(t.fold) + " method=" +
                              report.fractions[t.frac_idx].methods[t.method_idx].name + ": " +
                              e.what();
                failed.store(true);
            }
        }
    };

    const int n_threads = std::min<int>(cfg.jobs, static_cast<int>(tasks.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int k = 0; k < n_threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) {
        for (const auto& f : failures)
            if (!f.empty()) throw TrainingError("experiment cell failed: " + f);
    }

    // aggregates, lambda selection, significance tests
    for (FractionReport& fr : report.fractions) {
        for (MethodSummary& ms : fr.methods) {
            std::vector<double> rs, taus, vrs, vtaus;
            for (const FoldOutcome& fo : ms.folds) {
                rs.push_back(fo.test.pearson_r);
                taus.push_back(fo.test.kendall_tau);
                vrs.push_back(fo.validation.pearson_r);
                vtaus.push_back(fo.validation.kendall_tau);
            }
            ms.mean_pearson = mean_of(rs);
            ms.sd_pearson = sd_of(rs);
            ms.mean_tau = mean_of(taus);
            ms.sd_tau = sd_of(taus);
            ms.mean_val_pearson = mean_of(vrs);
            ms.mean_val_tau = mean_of(vtaus);
        }
        fr.best_lupi_index = 1;
        for (std::size_t mi = 2; mi < fr.methods.size(); ++mi)
            if (fr.methods[mi].mean_val_tau > fr.methods[fr.best_lupi_index].mean_val_tau)
                fr.best_lupi_index = mi;

        std::vector<double> plain_r, plain_tau, best_r, best_tau;
        for (std::size_t fold = 0; fold < n_folds; ++fold) {
            plain_r.push_back(fr.methods[0].folds[fold].test.pearson_r);
            plain_tau.push_back(fr.methods[0].folds[fold].test.kendall_tau);
            best_r.push_back(fr.methods[fr.best_lupi_index].folds[fold].test.pearson_r);
            best_tau.push_back(fr.methods[fr.best_lupi_index].folds[fold].test.kendall_tau);
        }
        if (n_folds >= 2) {
            fr.ttest_pearson = paired_ttest(best_r, plain_r);
            fr.ttest_tau = paired_ttest(best_tau, plain_tau);
        } else {
            fr.ttest_pearson.degenerate = true;
            fr.ttest_tau.degenerate = true;
        }
    }
    return report;
}

// --- report files -----------------------------------------------------------------

namespace {

nlohmann::json ttest_to_json(const TTestResult& t) {
    return {{"t_statistic", t.t_statistic},
            {"degrees_of_freedom", t.degrees_of_freedom},
            {"p_value", t.p_value},
            {"significant_at_005", t.significant_at_005},
            {"degenerate", t.degenerate}};
}

nlohmann::json metric_pair_to_json(const MetricPair& m) {
    return {{"pearson_r", m.pearson_r},
            {"kendall_tau", m.kendall_tau},
            {"n", m.n},
            {"pearson_degenerate", m.pearson_degenerate},
            {"tau_degenerate", m.tau_degenerate}};
}

void write_metric_table(const ExperimentReport& report, const std::string& path,
                        const std::string& manifest_name, bool use_tau) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    if (!manifest_name.empty()) out << "# manifest: " << manifest_name << "\n";
    out << "# cell values: mean and sample sd over " << report.config.n_folds
        << " folds of test " << (use_tau ? "kendall_tau" : "pearson_r") << "\n";
    out << "method";
    for (const auto& fr : report.fractions)
        out << ",frac_" << fmt_g(fr.fraction) << "_mean,frac_" << fmt_g(fr.fraction) << "_sd";
    out << "\n";
    const std::size_t n_methods = report.fractions.front().methods.size();
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
        out << report.fractions.front().methods[mi].name;
        for (const auto& fr : report.fractions) {
            const MethodSummary& ms = fr.methods[mi];
            out << ',' << fmt9(use_tau ? ms.mean_tau : ms.mean_pearson) << ','
                << fmt9(use_tau ? ms.sd_tau : ms.sd_pearson);
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

} // namespace

void write_report_files(const ExperimentReport& report, const std::string& out_dir,
                        const std::string& manifest_name) {
    write_metric_table(report, out_dir + "/table_pearson.csv", manifest_name, false);
    write_metric_table(report, out_dir + "/table_kendall.csv", manifest_name, true);

    {
        std::ofstream out(out_dir + "/folds.csv", std::ios::binary);
        if (!out) throw IoError("cannot open '" + out_dir + "/folds.csv' for writing");
        if (!manifest_name.empty()) out << "# manifest: " << manifest_name << "\n";
        out << "fraction,fold,method,test_pearson,test_tau,test_pearson_degenerate,"
               "test_tau_degenerate,val_pearson,val_tau,n_test,stopped_epoch,best_epoch\n";
        for (const auto& fr : report.fractions)
            for (const auto& ms : fr.methods)
                for (std::size_t fold = 0; fold < ms.folds.size(); ++fold) {
                    const FoldOutcome& fo = ms.folds[fold];
                    out << fmt_g(fr.fraction) << ',' << fold << ',' << ms.name << ','
                        << fmt9(fo.test.pearson_r) << ',' << fmt9(fo.test.kendall_tau) << ','
                        << (fo.test.pearson_degenerate ? 1 : 0) << ','
                        << (fo.test.tau_degenerate ? 1 : 0) << ','
                        << fmt9(fo.validation.pearson_r) << ',' << fmt9(fo.validation.kendall_tau)
                        << ',' << fo.test.n << ',' << fo.stopped_epoch << ',' << fo.best_epoch
                        << "\n";
                }
    }

    {
        std::ofstream out(out_dir + "/significance.csv", std::ios::binary);
        if (!out) throw IoError("cannot open '" + out_dir + "/significance.csv' for writing");
        if (!manifest_name.empty()) out << "# manifest: " << manifest_name << "\n";
        out << "fraction,metric,baseline,challenger,t_statistic,dof,p_value,significant_at_005,"
               "degenerate\n";
        for (const auto& fr : report.fractions) {
            const std::string& challenger = fr.methods[fr.best_lupi_index].name;
            const auto row = [&](const char* metric, const TTestResult& t) {
                out << fmt_g(fr.fraction) << ',' << metric << ",ranknet," << challenger << ','
                    << fmt9(t.t_statistic) << ',' << t.degrees_of_freedom << ','
                    << fmt9(t.p_value) << ',' << (t.significant_at_005 ? 1 : 0) << ','
                    << (t.degenerate ? 1 : 0) << "\n";
            };
            row("pearson_r", fr.ttest_pearson);
            row("kendall_tau", fr.ttest_tau);
        }
    }

    nlohmann::json j;
    if (!manifest_name.empty()) j["manifest"] = manifest_name;
    j["dataset_size"] = report.dataset_size;
    j["feature_dim"] = report.feature_dim;
    j["config"] = {{"fractions", report.config.fractions},
                   {"lambdas", report.config.lambdas},
                   {"n_folds", report.config.n_folds},
                   {"pair_threshold", report.config.pair_threshold},
                   {"pair_cap", report.config.pair_cap},
                   {"validation_fraction", report.config.validation_fraction},
                   {"jobs", report.config.jobs},
                   {"tau", report.config.base.loss.tau},
                   {"hidden_dims", report.config.base.hidden_dims},
                   {"hidden_activation", to_string(report.config.base.hidden_activation)},
                   {"learning_rate", report.config.base.learning_rate},
                   {"batch_size", report.config.base.batch_size},
                   {"max_epochs", report.config.base.max_epochs},
                   {"patience", report.config.base.patience},
                   {"seed", report.config.base.seed}};
    nlohmann::json fractions = nlohmann::json::array();
    for (const auto& fr : report.fractions) {
        nlohmann::json jf;
        jf["fraction"] = fr.fraction;
        nlohmann::json plans = nlohmann::json::array();
        for (const auto& plan : fr.plans)
            plans.push_back({{"fold", plan.fold},
                             {"train_groups", plan.train_groups},
                             {"validation_groups", plan.validation_groups},
                             {"test_groups", plan.test_groups},
                             {"warnings", plan.warnings}});
        jf["plans"] = plans;
        nlohmann::json jms = nlohmann::json::array();
        for (const auto& ms : fr.methods) {
            nlohmann::json jm;
            jm["method"] = ms.name;
            jm["lambda"] = ms.lambda;
            jm["variant"] = to_string(ms.variant);
            jm["mean_pearson"] = ms.mean_pearson;
            jm["sd_pearson"] = ms.sd_pearson;
            jm["mean_tau"] = ms.mean_tau;
            jm["sd_tau"] = ms.sd_tau;
            jm["mean_val_pearson"] = ms.mean_val_pearson;
            jm["mean_val_tau"] = ms.mean_val_tau;
            nlohmann::json folds = nlohmann::json::array();
            for (const auto& fo : ms.folds)
                folds.push_back({{"test", metric_pair_to_json(fo.test)},
                                 {"validation", metric_pair_to_json(fo.validation)},
                                 {"stopped_epoch", fo.stopped_epoch},
                                 {"best_epoch", fo.best_epoch}});
            jm["folds"] = folds;
            jms.push_back(jm);
        }
        jf["methods"] = jms;
        jf["best_lupi_method"] = fr.methods[fr.best_lupi_index].name;
        jf["best_lambda"] = fr.methods[fr.best_lupi_index].lambda;
        jf["ttest_pearson"] = ttest_to_json(fr.ttest_pearson);
        jf["ttest_kendall"] = ttest_to_json(fr.ttest_tau);
        fractions.push_back(jf);
    }
    j["fractions"] = fractions;
    std::ofstream out(out_dir + "/report.json", std::ios::binary);
    if (!out) throw IoError("cannot open '" + out_dir + "/report.json' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing '" + out_dir + "/report.json'");
}

} // namespace ranknet
