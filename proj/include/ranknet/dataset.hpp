#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ranknet {

// One data point: feature vector, group identifier (e.g. source video) and
// the privileged preference score attached to it at training time.
struct ScoredSample {
    long id = 0;
    std::string group;
    double score = 0.0;
    std::vector<double> features;

    bool operator==(const ScoredSample&) const = default;
};

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::size_t feature_dim) : feature_dim_(feature_dim) {}

    void add(ScoredSample sample); // enforces uniform dim, finite values
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    std::size_t feature_dim() const { return feature_dim_; }
    const ScoredSample& operator[](std::size_t i) const { return samples_[i]; }
    const std::vector<ScoredSample>& samples() const { return samples_; }

    std::vector<std::string> group_names() const;         // sorted, unique
    std::map<std::string, std::size_t> group_sizes() const;
    std::vector<std::size_t> indices_for_groups(std::span<const std::string> groups) const;

    bool operator==(const Dataset&) const = default;

private:
    std::size_t feature_dim_ = 0;
    std::vector<ScoredSample> samples_;
};

// CSV schema: header "id,group,score,f0,...,f{d-1}", one sample per row,
// '#' lines skipped. Doubles are written with 17 significant digits so a
// save/load round trip is exact.
Dataset load_csv(const std::string& path);
Dataset read_csv(std::istream& in, const std::string& origin);
void save_csv(const Dataset& ds, const std::string& path,
              std::span<const std::string> comments = {});
void write_csv(const Dataset& ds, std::ostream& out,
               std::span<const std::string> comments = {});

// A labelled pair of dataset indices; t=1 means the first index is ranked
// above the second.
struct PairSample {
    std::size_t i = 0;
    std::size_t j = 0;
    int t = 0;

    bool operator==(const PairSample&) const = default;
};

// Every unordered pair within `indices` whose score gap strictly exceeds
// `threshold` yields one PairSample. Orientation is randomized per pair so
// both label classes appear. `max_pairs` (0 = unlimited) uniformly
// subsamples the result when it is larger.
std::vector<PairSample> make_pairs(const Dataset& ds, std::span<const std::size_t> indices,
                                   double threshold, std::uint64_t seed,
                                   std::size_t max_pairs = 0);

// One fold of a group holdout split. validation_groups is a subset of
// train_groups; the effective training groups are the remainder.
struct SplitPlan {
    int fold = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> train_groups;
    std::vector<std::string> validation_groups;
    std::vector<std::string> test_groups;
    std::vector<std::string> warnings;

    std::vector<std::string> effective_train_groups() const;
};

// Greedy group packing towards train_fraction of total samples, then a
// validation reservation of roughly validation_fraction of the training
// samples, whole groups only. No group ever appears on both sides.
std::vector<SplitPlan> group_holdout_split(const Dataset& ds, double train_fraction, int n_folds,
                                           std::uint64_t seed,
                                           double validation_fraction = 0.10);

void save_split_plan(const SplitPlan& plan, const std::string& path,
                     const std::string& manifest_name = "");
SplitPlan load_split_plan(const std::string& path);

// --- synthetic data ---------------------------------------------------------

struct SyntheticSpec {
    int n_groups = 80;
    int samples_per_group = 12;
    int feature_dim = 16;
    double noise_sd = 1.0;     // sd of the integer annotation noise
    double group_spread = 0.5; // sd of the per-group feature offset
    double score_min = -10.0;
    double score_max = 10.0;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    Dataset dataset;
    std::vector<double> latent_utility; // pre-quantization utility, per sample
};

// Hidden linear-plus-tanh utility over gaussian features with per-group
// offsets; scores are the rounded utility plus integer noise, clamped to
// [score_min, score_max].
SyntheticData generate_synthetic(const SyntheticSpec& spec);

} // namespace ranknet
