#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ranknet/dataset.hpp"
#include "ranknet/metrics.hpp"
#include "ranknet/trainer.hpp"

namespace ranknet {

// Pearson and Kendall tau between the model's scores and the per-sample
// annotation scores over the given dataset indices.
MetricPair evaluate_model(const TrainedModel& model, const Dataset& ds,
                          std::span<const std::size_t> indices);

struct ExperimentConfig {
    std::vector<double> fractions{0.05, 0.10, 0.20};
    std::vector<double> lambdas{0.3, 0.5, 0.8};
    int n_folds = 10;
    double pair_threshold = 4.0;
    std::size_t pair_cap = 0; // 0 = unlimited
    double validation_fraction = 0.10;
    TrainConfig base; // base.seed is the master seed; base.loss.tau is the lupi tau
    int jobs = 1;
};

void validate(const ExperimentConfig& cfg);

struct FoldOutcome {
    MetricPair test;
    MetricPair validation;
    int stopped_epoch = 0;
    int best_epoch = 0;
};

// One method (plain ranknet or one lupi lambda) at one dataset fraction.
struct MethodSummary {
    std::string name;
    LossVariant variant = LossVariant::plain;
    double lambda = 1.0;
    std::vector<FoldOutcome> folds;
    double mean_pearson = 0.0, sd_pearson = 0.0;
    double mean_tau = 0.0, sd_tau = 0.0;
    double mean_val_pearson = 0.0, mean_val_tau = 0.0;
};

struct FractionReport {
    double fraction = 0.0;
    std::vector<SplitPlan> plans;
    std::vector<MethodSummary> methods; // methods[0] is always plain ranknet
    std::size_t best_lupi_index = 0;    // into methods; lambda picked on validation tau
    TTestResult ttest_pearson;          // best lupi vs plain, paired by fold
    TTestResult ttest_tau;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::size_t dataset_size = 0;
    std::size_t feature_dim = 0;
    std::vector<FractionReport> fractions;
};

// Full protocol: per fraction, n_folds group-holdout splits; per fold, the
// plain model and one lupi model per lambda trained on identical pair sets
// and seeds, evaluated on the held-out groups. The comparison lambda is
// selected per fraction by mean validation Kendall tau. Cells may run
// concurrently up to cfg.jobs.
ExperimentReport run_experiment(const Dataset& ds, const ExperimentConfig& cfg);

// table_pearson.csv, table_kendall.csv (rows = method, cols = fraction),
// folds.csv (one row per cell), significance.csv, report.json.
void write_report_files(const ExperimentReport& report, const std::string& out_dir,
                        const std::string& manifest_name = "");

} // namespace ranknet
