#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ranknet/dataset.hpp"
#include "ranknet/loss.hpp"
#include "ranknet/network.hpp"

namespace ranknet {

struct TrainConfig {
    LossConfig loss;
    std::vector<int> hidden_dims{512};
    Activation hidden_activation = Activation::relu;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int max_epochs = 500;
    int patience = 15;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct EpochStats {
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

struct TrainedModel {
    Network network; // parameters restored to the best-validation epoch
    std::vector<EpochStats> history;
    int stopped_epoch = 0; // == history.size()
    int best_epoch = 0;    // 1-based epoch the weights come from
    TrainConfig config;
};

// Strict-decrease early stopping with best-snapshot restoration. Feed the
// validation loss after each epoch; stop() flips once `patience` consecutive
// epochs fail to improve on the best.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience);

    // Returns true when training should halt after this epoch.
    bool observe(int epoch, double validation_loss, const Network& net);

    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }
    const Network& best_network() const;

private:
    int patience_;
    int stale_epochs_ = 0;
    int best_epoch_ = 0;
    double best_loss_ = 0.0;
    Network best_network_;
};

struct BatchGradient {
    double mean_loss = 0.0;
    GradientBuffer grads; // mean over pairs of the two tied-stream gradients
};

// Feeds each pair's two points through the shared network, combines the
// per-stream loss gradients through both traces, and averages over the batch.
BatchGradient compute_batch_gradient(const Network& net, const Dataset& ds,
                                     std::span<const PairSample> pairs, const LossConfig& loss);

// Mean per-pair loss of `net` over `pairs` (no gradients).
double dataset_risk(const Network& net, const Dataset& ds, std::span<const PairSample> pairs,
                    const LossConfig& loss);

// Called after each epoch. Concurrent training runs may share one callback,
// so it must be safe to invoke from any run's thread.
using ProgressCallback = std::function<void(int epoch, const EpochStats&)>;

// Mini-batch Adam on the tied two-stream objective with early stopping on
// the validation pairs. Deterministic given cfg.seed.
TrainedModel train(const Dataset& ds, const std::vector<PairSample>& train_pairs,
                   const std::vector<PairSample>& val_pairs, const TrainConfig& cfg,
                   const ProgressCallback& progress = {});

double score(const TrainedModel& model, std::span<const double> x);

// 1 iff sigma(h(x)-h(x')) > 0.5, i.e. iff h(x) > h(x'); ties give 0.
int predict_pair(const TrainedModel& model, std::span<const double> x,
                 std::span<const double> xp);

// Fraction of pairs whose predicted label matches.
double pairwise_accuracy(const TrainedModel& model, const Dataset& ds,
                         std::span<const PairSample> pairs);

// Model file (network format) plus a JSON sidecar with config and history.
void save_trained_model(const TrainedModel& model, const std::string& model_path,
                        const std::string& sidecar_path,
                        const std::string& manifest_name = "");
TrainedModel load_trained_model(const std::string& model_path, const std::string& sidecar_path);

} // namespace ranknet
