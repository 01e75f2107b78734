#include "ranknet/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "ranknet/errors.hpp"
#include "ranknet/rng.hpp"

namespace ranknet {

void validate(const TrainConfig& cfg) {
    validate(cfg.loss);
    if (cfg.hidden_dims.empty()) throw ConfigError("need at least one hidden layer dimension");
    for (int d : cfg.hidden_dims)
        if (d <= 0) throw ConfigError("hidden layer dimensions must be positive");
    if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (cfg.max_epochs <= 0) throw ConfigError("max_epochs must be positive");
    if (cfg.patience <= 0) throw ConfigError("patience must be positive");
    if (cfg.patience > cfg.max_epochs)
        throw ConfigError("patience (" + std::to_string(cfg.patience) +
                          ") must not exceed max_epochs (" + std::to_string(cfg.max_epochs) + ")");
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be >= 1");
}

bool EarlyStopping::observe(int epoch, double validation_loss, const Network& net) {
    if (best_epoch_ == 0 || validation_loss < best_loss_) {
        best_epoch_ = epoch;
        best_loss_ = validation_loss;
        best_network_ = net;
        stale_epochs_ = 0;
        return false;
    }
    ++stale_epochs_;
    return stale_epochs_ >= patience_;
}

const Network& EarlyStopping::best_network() const {
    if (best_epoch_ == 0) throw InternalError("early stopping queried before any epoch");
    return best_network_;
}

namespace {

void check_pairs(const Dataset& ds, std::span<const PairSample> pairs, const char* what) {
    for (const PairSample& p : pairs) {
        if (p.i >= ds.size() || p.j >= ds.size())
            throw InputError(std::string(what) + ": pair index out of range");
        if (p.i == p.j) throw InputError(std::string(what) + ": pair references one sample twice");
    }
}

} // namespace

BatchGradient compute_batch_gradient(const Network& net, const Dataset& ds,
                                     std::span<const PairSample> pairs, const LossConfig& loss) {
    if (pairs.empty()) throw InputError("compute_batch_gradient needs a non-empty batch");
    BatchGradient out;
    out.grads = make_gradient_buffer(net);
    ForwardTrace trace_x, trace_xp;
    double loss_sum = 0.0;
    for (const PairSample& p : pairs) {
        const ScoredSample& sx = ds[p.i];
        const ScoredSample& sxp = ds[p.j];
        const double hx = forward_traced(net, sx.features, trace_x);
        const double hxp = forward_traced(net, sxp.features, trace_xp);
        const PairLossResult r = pair_loss(hx, hxp, p.t, sx.score, sxp.score, loss);
        loss_sum += r.loss;
        // tied weights: both streams accumulate into the same buffer
        accumulate_backward(net, trace_x, r.grad_hx, out.grads);
        accumulate_backward(net, trace_xp, r.grad_hxp, out.grads);
    }
    const double inv = 1.0 / static_cast<double>(pairs.size());
    out.grads.scale(inv);
    out.mean_loss = loss_sum * inv;
    return out;
}

double dataset_risk(const Network& net, const Dataset& ds, std::span<const PairSample> pairs,
                    const LossConfig& loss) {
    if (pairs.empty()) throw InputError("dataset_risk needs a non-empty pair list");
    double sum = 0.0;
    for (const PairSample& p : pairs) {
        const ScoredSample& sx = ds[p.i];
        const ScoredSample& sxp = ds[p.j];
        const double hx = forward(net, sx.features);
        const double hxp = forward(net, sxp.features);
        sum += pair_loss(hx, hxp, p.t, sx.score, sxp.score, loss).loss;
    }
    return sum / static_cast<double>(pairs.size());
}

TrainedModel train(const Dataset& ds, const std::vector<PairSample>& train_pairs,
                   const std::vector<PairSample>& val_pairs, const TrainConfig& cfg,
                   const ProgressCallback& progress) {
    validate(cfg);
    if (train_pairs.empty()) throw InputError("train needs a non-empty training pair list");
    if (val_pairs.empty()) throw InputError("train needs a non-empty validation pair list");
    check_pairs(ds, train_pairs, "train_pairs");
    check_pairs(ds, val_pairs, "val_pairs");

    std::vector<int> dims;
    dims.push_back(static_cast<int>(ds.feature_dim()));
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(1);

    TrainedModel model;
    model.config = cfg;
    Network net = init_network(dims, cfg.hidden_activation, cfg.seed);
    AdamState adam = make_adam_state(net, cfg.learning_rate);
    EarlyStopping stopper(cfg.patience);
    Rng shuffle_rng(derive_seed(cfg.seed, 0xe90c4u));

    std::vector<PairSample> epoch_pairs = train_pairs;
    const auto n = train_pairs.size();
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(epoch_pairs);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            const std::span<const PairSample> slice(epoch_pairs.data() + start, count);
            BatchGradient bg = compute_batch_gradient(net, ds, slice, cfg.loss);
            if (!std::isfinite(bg.mean_loss))
                throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(start / batch));
            loss_sum += bg.mean_loss * static_cast<double>(count);
            adam_step(net, bg.grads, adam);
        }
        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(n);
        stats.validation_loss = dataset_risk(net, ds, val_pairs, cfg.loss);
        if (!std::isfinite(stats.validation_loss))
            throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        model.history.push_back(stats);
        if (progress) progress(epoch, stats);
        if (stopper.observe(epoch, stats.validation_loss, net)) break;
    }

    model.network = stopper.best_network();
    model.stopped_epoch = static_cast<int>(model.history.size());
    model.best_epoch = stopper.best_epoch();
    return model;
}

double score(const TrainedModel& model, std::span<const double> x) {
    return forward(model.network, x);
}

int predict_pair(const TrainedModel& model, std::span<const double> x,
                 std::span<const double> xp) {
    return forward(model.network, x) > forward(model.network, xp) ? 1 : 0;
}

double pairwise_accuracy(const TrainedModel& model, const Dataset& ds,
                         std::span<const PairSample> pairs) {
    if (pairs.empty()) throw InputError("pairwise_accuracy needs a non-empty pair list");
    std::size_t hits = 0;
    for (const PairSample& p : pairs)
        if (predict_pair(model, ds[p.i].features, ds[p.j].features) == p.t) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

// --- persistence ---------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["loss_variant"] = to_string(cfg.loss.variant);
    j["lambda"] = cfg.loss.lambda;
    j["tau"] = cfg.loss.tau;
    j["hidden_dims"] = cfg.hidden_dims;
    j["hidden_activation"] = to_string(cfg.hidden_activation);
    j["learning_rate"] = cfg.learning_rate;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["patience"] = cfg.patience;
    j["seed"] = cfg.seed;
    return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.loss.variant = loss_variant_from_string(j.at("loss_variant").get<std::string>());
    cfg.loss.lambda = j.at("lambda").get<double>();
    cfg.loss.tau = j.at("tau").get<double>();
    cfg.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
    cfg.hidden_activation = activation_from_string(j.at("hidden_activation").get<std::string>());
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.max_epochs = j.at("max_epochs").get<int>();
    cfg.patience = j.at("patience").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

} // namespace

void save_trained_model(const TrainedModel& model, const std::string& model_path,
                        const std::string& sidecar_path, const std::string& manifest_name) {
    save_network(model.network, model_path);
    nlohmann::json j;
    j["format_version"] = 1;
    if (!manifest_name.empty()) j["manifest"] = manifest_name;
    j["model_file"] = model_path.substr(model_path.find_last_of('/') + 1);
    j["config"] = config_to_json(model.config);
    j["stopped_epoch"] = model.stopped_epoch;
    j["best_epoch"] = model.best_epoch;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : model.history)
        hist.push_back({{"train_loss", e.train_loss}, {"validation_loss", e.validation_loss}});
    j["history"] = hist;
    std::ofstream out(sidecar_path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + sidecar_path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing sidecar to '" + sidecar_path + "'");
}

TrainedModel load_trained_model(const std::string& model_path, const std::string& sidecar_path) {
    TrainedModel model;
    model.network = load_network(model_path);
    std::ifstream in(sidecar_path, std::ios::binary);
    if (!in) throw IoError("cannot open sidecar file '" + sidecar_path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(sidecar_path, 0, std::string("invalid JSON: ") + e.what());
    }
    model.config = config_from_json(j.at("config"));
    model.stopped_epoch = j.at("stopped_epoch").get<int>();
    model.best_epoch = j.at("best_epoch").get<int>();
    for (const auto& e : j.at("history"))
        model.history.push_back(
            {e.at("train_loss").get<double>(), e.at("validation_loss").get<double>()});
    return model;
}

} // namespace ranknet
