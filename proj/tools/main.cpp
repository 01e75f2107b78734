#include <algorithm>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ranknet/dataset.hpp"
#include "ranknet/errors.hpp"
#include "ranknet/experiment.hpp"
#include "ranknet/loss.hpp"
#include "ranknet/rng.hpp"
#include "ranknet/trainer.hpp"

namespace {

constexpr const char* kToolVersion = "ranknet 1.0.0";

using nlohmann::json;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json base_manifest(const std::string& command, std::uint64_t seed) {
    json m;
    m["tool"] = kToolVersion;
    m["command"] = command;
    m["timestamp"] = utc_timestamp();
    m["seed"] = seed;
    return m;
}

// The manifest is written before any compute so a crashed run still leaves
// its provenance behind.
std::string write_manifest(const json& m, const std::string& out_dir, const std::string& command) {
    std::filesystem::create_directories(out_dir);
    const std::string name = "manifest_" + command + ".json";
    std::ofstream out(out_dir + "/" + name, std::ios::binary);
    if (!out) throw ranknet::IoError("cannot open '" + out_dir + "/" + name + "' for writing");
    out << m.dump(2) << "\n";
    if (!out) throw ranknet::IoError("failed writing manifest '" + name + "'");
    return name;
}

void require_file(const std::string& path, const char* what) {
    if (!std::filesystem::exists(path))
        throw ranknet::IoError(std::string(what) + " file not found: '" + path + "'");
}

// Expands a flat key=value config file into --key=value tokens placed right
// after the subcommand name. Options parse with a take-last policy, so real
// command-line flags (parsed later) override config values, which override
// built-in defaults.
std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    std::string config_path;
    for (std::size_t k = 1; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) {
            config_path = args[k + 1];
            break;
        }
        if (args[k].rfind("--config=", 0) == 0) {
            config_path = args[k].substr(9);
            break;
        }
    }
    if (config_path.empty()) return args;
    require_file(config_path, "config");

    std::vector<std::string> tokens;
    std::ifstream in(config_path);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ranknet::ParseError(config_path, line_no, "expected key=value");
        tokens.push_back("--" + line.substr(0, eq) + "=" + line.substr(eq + 1));
    }

    // insert after the subcommand name (first bare token)
    std::size_t insert_at = args.size();
    for (std::size_t k = 1; k < args.size(); ++k) {
        if (!args[k].empty() && args[k][0] != '-') {
            insert_at = k + 1;
            break;
        }
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at), tokens.begin(),
                tokens.end());
    return args;
}

struct TrainFlags {
    std::string variant = "auto"; // lupi when --lambda is given, else plain
    double lambda = 0.5;
    bool lambda_given = false;
    double tau = 1.0;
    double threshold = 4.0;
    double train_fraction = 0.2;
    double val_fraction = 0.1;
    std::size_t pair_cap = 0;
    std::vector<int> hidden{512};
    std::string activation = "relu";
    double lr = 1e-3;
    int batch_size = 64;
    int max_epochs = 500;
    int patience = 15;
};

void add_train_flags(CLI::App* sub, TrainFlags& f, bool with_variant) {
    if (with_variant) {
        sub->add_option("--variant", f.variant, "loss variant: plain or lupi")
            ->check(CLI::IsMember({"auto", "plain", "lupi"}))
            ->capture_default_str();
        sub->add_option("--lambda", f.lambda, "lupi mixing weight in [0,1]; implies --variant lupi")
            ->check(CLI::Range(0.0, 1.0));
    }
    sub->add_option("--tau", f.tau, "temperature on the squared score residual")
        ->capture_default_str();
    sub->add_option("--threshold", f.threshold, "minimum score gap (strict) for a pair")
        ->capture_default_str();
    sub->add_option("--val-fraction", f.val_fraction, "share of training samples held out, whole groups")
        ->capture_default_str();
    sub->add_option("--pair-cap", f.pair_cap, "subsample pair lists above this size (0 = off)")
        ->capture_default_str();
    sub->add_option("--hidden", f.hidden, "hidden layer widths")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--activation", f.activation, "hidden activation: relu or tanh")
        ->check(CLI::IsMember({"relu", "tanh"}))
        ->capture_default_str();
    sub->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
    sub->add_option("--batch-size", f.batch_size, "mini-batch size")->capture_default_str();
    sub->add_option("--max-epochs", f.max_epochs, "epoch cap")->capture_default_str();
    sub->add_option("--patience", f.patience, "early-stopping patience in epochs")
        ->capture_default_str();
}

ranknet::TrainConfig to_train_config(const TrainFlags& f, std::uint64_t seed) {
    ranknet::TrainConfig cfg;
    const bool lupi = f.variant == "lupi" || (f.variant == "auto" && f.lambda_given);
    cfg.loss.variant = lupi ? ranknet::LossVariant::lupi : ranknet::LossVariant::plain;
    cfg.loss.lambda = f.lambda;
    cfg.loss.tau = f.tau;
    cfg.hidden_dims = f.hidden;
    cfg.hidden_activation = ranknet::activation_from_string(f.activation);
    cfg.learning_rate = f.lr;
    cfg.batch_size = f.batch_size;
    cfg.max_epochs = f.max_epochs;
    cfg.patience = f.patience;
    cfg.seed = seed;
    return cfg;
}

json train_flags_to_json(const TrainFlags& f, const ranknet::TrainConfig& cfg) {
    json j;
    j["variant"] = to_string(cfg.loss.variant);
    j["lambda"] = cfg.loss.lambda;
    j["tau"] = cfg.loss.tau;
    j["threshold"] = f.threshold;
    j["val_fraction"] = f.val_fraction;
    j["pair_cap"] = f.pair_cap;
    j["hidden"] = f.hidden;
    j["activation"] = f.activation;
    j["lr"] = f.lr;
    j["batch_size"] = f.batch_size;
    j["max_epochs"] = f.max_epochs;
    j["patience"] = f.patience;
    return j;
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    ranknet::SyntheticSpec spec;
};

void run_generate(const GenerateArgs& args) {
    ranknet::SyntheticSpec spec = args.spec;
    spec.seed = args.seed;

    json m = base_manifest("generate", args.seed);
    m["config"] = {{"groups", spec.n_groups},
                   {"samples_per_group", spec.samples_per_group},
                   {"feature_dim", spec.feature_dim},
                   {"noise_sd", spec.noise_sd},
                   {"group_spread", spec.group_spread},
                   {"score_min", spec.score_min},
                   {"score_max", spec.score_max},
                   {"seed", spec.seed}};
    m["outputs"] = {"dataset.csv"};
    const std::string manifest = write_manifest(m, args.out_dir, "generate");

    const ranknet::SyntheticData data = ranknet::generate_synthetic(spec);
    const std::vector<std::string> comments{"manifest: " + manifest};
    ranknet::save_csv(data.dataset, args.out_dir + "/dataset.csv", comments);
    std::cout << "wrote " << args.out_dir << "/dataset.csv (" << data.dataset.size()
              << " samples, " << spec.n_groups << " groups, dim " << spec.feature_dim << ")\n";
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
    std::string dataset_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    double train_fraction = 0.2;
    TrainFlags flags;
};

void run_train(const TrainArgs& args) {
    require_file(args.dataset_path, "dataset");
    const ranknet::TrainConfig cfg =
        to_train_config(args.flags, ranknet::derive_seed(args.seed, 0x7e4a11u));

    json m = base_manifest("train", args.seed);
    m["inputs"] = {{"dataset", args.dataset_path}};
    m["config"] = train_flags_to_json(args.flags, cfg);
    m["config"]["train_fraction"] = args.train_fraction;
    m["outputs"] = {"model.txt", "model.json", "split.json"};
    const std::string manifest = write_manifest(m, args.out_dir, "train");

    const ranknet::Dataset ds = ranknet::load_csv(args.dataset_path);
    const auto plans = ranknet::group_holdout_split(
        ds, args.train_fraction, 1, ranknet::derive_seed(args.seed, 0x5b117u), args.flags.val_fraction);
    const ranknet::SplitPlan& plan = plans.front();
    for (const auto& w : plan.warnings) std::cerr << "warning: " << w << "\n";

    const auto train_idx = ds.indices_for_groups(plan.effective_train_groups());
    const auto val_idx = ds.indices_for_groups(plan.validation_groups);
    const std::uint64_t pair_seed = ranknet::derive_seed(args.seed, 0xbadb1u);
    const auto train_pairs =
        ranknet::make_pairs(ds, train_idx, args.flags.threshold, pair_seed, args.flags.pair_cap);
    const auto val_pairs =
        ranknet::make_pairs(ds, val_idx, args.flags.threshold, pair_seed + 1, args.flags.pair_cap);

    const ranknet::TrainedModel model = ranknet::train(ds, train_pairs, val_pairs, cfg);
    ranknet::save_split_plan(plan, args.out_dir + "/split.json", manifest);
    ranknet::save_trained_model(model, args.out_dir + "/model.txt", args.out_dir + "/model.json",
                                manifest);
    std::cout << "trained " << to_string(cfg.loss.variant) << " model on " << train_pairs.size()
              << " pairs (" << val_pairs.size() << " validation pairs)\n"
              << "stopped at epoch " << model.stopped_epoch << ", best epoch " << model.best_epoch
              << ", best validation loss "
              << model.history[static_cast<std::size_t>(model.best_epoch) - 1].validation_loss
              << "\n";
}

// --- eval ----------------------------------------------------------------------

struct EvalArgs {
    std::string model_path;
    std::string sidecar_path;
    std::string dataset_path;
    std::string split_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
};

void run_eval(const EvalArgs& args) {
    require_file(args.model_path, "model");
    require_file(args.dataset_path, "dataset");
    require_file(args.split_path, "split");
    std::string sidecar = args.sidecar_path;
    if (sidecar.empty()) {
        sidecar = args.model_path;
        const auto dot = sidecar.find_last_of('.');
        sidecar = (dot == std::string::npos ? sidecar : sidecar.substr(0, dot)) + ".json";
    }
    require_file(sidecar, "model sidecar");

    json m = base_manifest("eval", args.seed);
    m["inputs"] = {{"model", args.model_path},
                   {"sidecar", sidecar},
                   {"dataset", args.dataset_path},
                   {"split", args.split_path}};
    m["outputs"] = {"metrics.csv"};
    const std::string manifest = write_manifest(m, args.out_dir, "eval");

    const ranknet::TrainedModel model = ranknet::load_trained_model(args.model_path, sidecar);
    const ranknet::Dataset ds = ranknet::load_csv(args.dataset_path);
    if (static_cast<std::size_t>(model.network.input_dim()) != ds.feature_dim())
        throw ranknet::InputError(
            "model expects feature dimension " + std::to_string(model.network.input_dim()) +
            " but dataset has " + std::to_string(ds.feature_dim()));
    const ranknet::SplitPlan plan = ranknet::load_split_plan(args.split_path);
    const auto test_idx = ds.indices_for_groups(plan.test_groups);
    const ranknet::MetricPair metrics = ranknet::evaluate_model(model, ds, test_idx);

    char line[256];
    std::snprintf(line, sizeof(line), "pearson_r=%.6f%s kendall_tau=%.6f%s n=%d\n",
                  metrics.pearson_r, metrics.pearson_degenerate ? " (degenerate)" : "",
                  metrics.kendall_tau, metrics.tau_degenerate ? " (degenerate)" : "", metrics.n);
    std::cout << line;

    std::ofstream out(args.out_dir + "/metrics.csv", std::ios::binary);
    if (!out) throw ranknet::IoError("cannot open '" + args.out_dir + "/metrics.csv' for writing");
    out << "# manifest: " << manifest << "\n";
    out << "pearson_r,kendall_tau,n,pearson_degenerate,tau_degenerate\n";
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%d,%d,%d\n", metrics.pearson_r,
                  metrics.kendall_tau, metrics.n, metrics.pearson_degenerate ? 1 : 0,
                  metrics.tau_degenerate ? 1 : 0);
    out << line;
}

// --- experiment -------------------------------------------------------------------

struct ExperimentArgs {
    std::string dataset_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int jobs = 1;
    int folds = 10;
    std::vector<double> fractions{0.05, 0.10, 0.20};
    std::vector<double> lambdas{0.3, 0.5, 0.8};
    TrainFlags flags;
};

void run_experiment_cmd(const ExperimentArgs& args) {
    require_file(args.dataset_path, "dataset");

    ranknet::ExperimentConfig cfg;
    cfg.fractions = args.fractions;
    cfg.lambdas = args.lambdas;
    cfg.n_folds = args.folds;
    cfg.pair_threshold = args.flags.threshold;
    cfg.pair_cap = args.flags.pair_cap;
    cfg.validation_fraction = args.flags.val_fraction;
    cfg.jobs = args.jobs;
    cfg.base = to_train_config(args.flags, args.seed);
    cfg.base.seed = args.seed;

    json m = base_manifest("experiment", args.seed);
    m["inputs"] = {{"dataset", args.dataset_path}};
    m["config"] = train_flags_to_json(args.flags, cfg.base);
    m["config"]["fractions"] = args.fractions;
    m["config"]["lambdas"] = args.lambdas;
    m["config"]["folds"] = args.folds;
    m["config"]["jobs"] = args.jobs;
    m["outputs"] = {"table_pearson.csv", "table_kendall.csv", "folds.csv", "significance.csv",
                    "report.json"};
    const std::string manifest = write_manifest(m, args.out_dir, "experiment");

    const ranknet::Dataset ds = ranknet::load_csv(args.dataset_path);
    const ranknet::ExperimentReport report = ranknet::run_experiment(ds, cfg);
    ranknet::write_report_files(report, args.out_dir, manifest);

    for (const auto& fr : report.fractions) {
        const auto& best = fr.methods[fr.best_lupi_index];
        std::cout << "fraction " << fr.fraction << ": ranknet tau " << fr.methods[0].mean_tau
                  << ", best lupi (" << best.name << ") tau " << best.mean_tau
                  << ", p=" << fr.ttest_tau.p_value
                  << (fr.ttest_tau.significant_at_005 ? " (significant)" : "") << "\n";
    }
    std::cout << "report written to " << args.out_dir << "\n";
}

// --- surface -----------------------------------------------------------------------

struct SurfaceArgs {
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    std::string panel = "lupi";
    int t = 1;
    double gz = 8.0;
    double gzp = 4.0;
    double lambda = 0.5;
    double tau = 1.0;
    double axis_min = 0.0;
    double axis_max = 10.0;
    double axis_step = 0.1;
    bool normalize = false;
};

void run_surface(const SurfaceArgs& args) {
    json m = base_manifest("surface", args.seed);
    m["config"] = {{"panel", args.panel}, {"t", args.t},
                   {"gz", args.gz},       {"gzp", args.gzp},
                   {"lambda", args.lambda}, {"tau", args.tau},
                   {"min", args.axis_min}, {"max", args.axis_max},
                   {"step", args.axis_step}, {"normalize", args.normalize}};
    const std::string out_name = "surface_" + args.panel + ".csv";
    m["outputs"] = {out_name};
    const std::string manifest = write_manifest(m, args.out_dir, "surface");

    ranknet::SurfaceSpec spec;
    spec.panel = ranknet::surface_panel_from_string(args.panel);
    spec.hx_axis = {args.axis_min, args.axis_max, args.axis_step};
    spec.hxp_axis = {args.axis_min, args.axis_max, args.axis_step};
    spec.normalize = args.normalize;
    ranknet::LossConfig loss{spec.panel == ranknet::SurfacePanel::plain
                                 ? ranknet::LossVariant::plain
                                 : ranknet::LossVariant::lupi,
                             args.lambda, args.tau};
    const ranknet::SurfaceGrid grid =
        ranknet::export_surface(args.t, args.gz, args.gzp, loss, spec);

    char note[128];
    std::snprintf(note, sizeof(note), "scenario: t=%d gz=%g gzp=%g lambda=%g tau=%g", args.t,
                  args.gz, args.gzp, args.lambda, args.tau);
    const std::vector<std::string> comments{"manifest: " + manifest, note};
    ranknet::save_surface_csv(grid, args.out_dir + "/" + out_name, comments);
    std::cout << "wrote " << args.out_dir << "/" << out_name << " (" << grid.n_hx << "x"
              << grid.n_hxp << " cells)\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pairwise ranking models with optional privileged-information training"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    // config-file tokens come first, so the last occurrence (a real flag) wins
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::string config_path;

    GenerateArgs gen;
    auto* sub_gen = app.add_subcommand("generate", "write a synthetic scored dataset as CSV");
    sub_gen->add_option("--config", config_path, "flat key=value config file");
    sub_gen->add_option("--out-dir", gen.out_dir, "output directory")->capture_default_str();
    sub_gen->add_option("--seed", gen.seed, "master seed")->capture_default_str();
    sub_gen->add_option("--groups", gen.spec.n_groups, "number of groups")->capture_default_str();
    sub_gen->add_option("--samples-per-group", gen.spec.samples_per_group, "samples per group")
        ->capture_default_str();
    sub_gen->add_option("--feature-dim", gen.spec.feature_dim, "feature dimension")
        ->capture_default_str();
    sub_gen->add_option("--noise-sd", gen.spec.noise_sd, "sd of the integer annotation noise")
        ->capture_default_str();
    sub_gen->add_option("--group-spread", gen.spec.group_spread, "sd of the per-group feature offset")
        ->capture_default_str();
    sub_gen->add_option("--score-min", gen.spec.score_min, "annotation lower bound")
        ->capture_default_str();
    sub_gen->add_option("--score-max", gen.spec.score_max, "annotation upper bound")
        ->capture_default_str();
    sub_gen->callback([&gen]() { run_generate(gen); });

    TrainArgs tr;
    auto* sub_tr = app.add_subcommand("train", "train one ranking model on one group split");
    sub_tr->add_option("--config", config_path, "flat key=value config file");
    sub_tr->add_option("--dataset", tr.dataset_path, "dataset CSV path")->required();
    sub_tr->add_option("--out-dir", tr.out_dir, "output directory")->capture_default_str();
    sub_tr->add_option("--seed", tr.seed, "master seed")->capture_default_str();
    sub_tr->add_option("--train-fraction", tr.train_fraction, "share of samples assigned to training")
        ->capture_default_str();
    add_train_flags(sub_tr, tr.flags, true);
    sub_tr->callback([&tr, sub_tr]() {
        tr.flags.lambda_given = sub_tr->count("--lambda") > 0;
        run_train(tr);
    });

    EvalArgs ev;
    auto* sub_ev = app.add_subcommand("eval", "evaluate a trained model on a split's test groups");
    sub_ev->add_option("--config", config_path, "flat key=value config file");
    sub_ev->add_option("--model", ev.model_path, "model file")->required();
    sub_ev->add_option("--sidecar", ev.sidecar_path, "model sidecar JSON (default: model path with .json)");
    sub_ev->add_option("--dataset", ev.dataset_path, "dataset CSV path")->required();
    sub_ev->add_option("--split", ev.split_path, "split plan JSON")->required();
    sub_ev->add_option("--out-dir", ev.out_dir, "output directory")->capture_default_str();
    sub_ev->add_option("--seed", ev.seed, "recorded in the manifest")->capture_default_str();
    sub_ev->callback([&ev]() { run_eval(ev); });

    ExperimentArgs ex;
    auto* sub_ex = app.add_subcommand(
        "experiment", "grid of group-holdout folds: plain ranknet vs lupi per lambda");
    sub_ex->add_option("--config", config_path, "flat key=value config file");
    sub_ex->add_option("--dataset", ex.dataset_path, "dataset CSV path")->required();
    sub_ex->add_option("--out-dir", ex.out_dir, "output directory")->capture_default_str();
    sub_ex->add_option("--seed", ex.seed, "master seed")->capture_default_str();
    sub_ex->add_option("--jobs", ex.jobs, "parallel training cells")->capture_default_str();
    sub_ex->add_option("--folds", ex.folds, "folds per fraction")->capture_default_str();
    sub_ex->add_option("--fractions", ex.fractions, "training-set fractions")
        ->delimiter(',')
        ->capture_default_str();
    sub_ex->add_option("--lambdas", ex.lambdas, "lupi lambda grid")
        ->delimiter(',')
        ->capture_default_str();
    add_train_flags(sub_ex, ex.flags, false);
    sub_ex->callback([&ex]() { run_experiment_cmd(ex); });

    SurfaceArgs su;
    auto* sub_su = app.add_subcommand("surface", "export a pair-loss surface grid as CSV");
    sub_su->add_option("--config", config_path, "flat key=value config file");
    sub_su->add_option("--out-dir", su.out_dir, "output directory")->capture_default_str();
    sub_su->add_option("--seed", su.seed, "recorded in the manifest")->capture_default_str();
    sub_su->add_option("--panel", su.panel, "plain, lupi or privileged")
        ->check(CLI::IsMember({"plain", "lupi", "privileged"}))
        ->capture_default_str();
    sub_su->add_option("--t", su.t, "pair label")->check(CLI::Range(0, 1))->capture_default_str();
    sub_su->add_option("--gz", su.gz, "teacher score for x")->capture_default_str();
    sub_su->add_option("--gzp", su.gzp, "teacher score for x'")->capture_default_str();
    sub_su->add_option("--lambda", su.lambda, "lupi mixing weight")->capture_default_str();
    sub_su->add_option("--tau", su.tau, "temperature")->capture_default_str();
    sub_su->add_option("--min", su.axis_min, "axis minimum")->capture_default_str();
    sub_su->add_option("--max", su.axis_max, "axis maximum")->capture_default_str();
    sub_su->add_option("--step", su.axis_step, "axis step")->capture_default_str();
    sub_su->add_flag("--normalize", su.normalize, "min-max normalize to [0,1]");
    sub_su->callback([&su]() { run_surface(su); });

    try {
        std::vector<std::string> args = expand_config_args(argc, argv);
        args.erase(args.begin()); // program name
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ranknet::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
