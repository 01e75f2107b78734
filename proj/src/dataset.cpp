#include "ranknet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ranknet/errors.hpp"
#include "ranknet/rng.hpp"

namespace ranknet {

void Dataset::add(ScoredSample sample) {
    if (samples_.empty() && feature_dim_ == 0) feature_dim_ = sample.features.size();
    if (sample.features.size() != feature_dim_)
        throw InputError("sample " + std::to_string(sample.id) + " has " +
                         std::to_string(sample.features.size()) + " features, dataset has " +
                         std::to_string(feature_dim_));
    if (sample.group.empty()) throw InputError("sample group identifier must be non-empty");
    if (!std::isfinite(sample.score))
        throw NumericError("non-finite score on sample " + std::to_string(sample.id));
    for (double f : sample.features)
        if (!std::isfinite(f))
            throw NumericError("non-finite feature on sample " + std::to_string(sample.id));
    samples_.push_back(std::move(sample));
}

std::vector<std::string> Dataset::group_names() const {
    std::set<std::string> seen;
    for (const auto& s : samples_) seen.insert(s.group);
    return {seen.begin(), seen.end()};
}

std::map<std::string, std::size_t> Dataset::group_sizes() const {
    std::map<std::string, std::size_t> sizes;
    for (const auto& s : samples_) ++sizes[s.group];
    return sizes;
}

std::vector<std::size_t> Dataset::indices_for_groups(std::span<const std::string> groups) const {
    const std::unordered_set<std::string> wanted(groups.begin(), groups.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples_.size(); ++i)
        if (wanted.count(samples_[i].group)) out.push_back(i);
    return out;
}

// --- CSV ---------------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_field_double(const std::string& field, const std::string& origin, long line,
                          const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end == field.c_str() || *end != '\0')
        throw ParseError(origin, line, "non-numeric " + what + " '" + field + "'");
    return v;
}

long parse_field_long(const std::string& field, const std::string& origin, long line,
                      const std::string& what) {
    char* end = nullptr;
    const long v = std::strtol(field.c_str(), &end, 10);
    if (field.empty() || end == field.c_str() || *end != '\0')
        throw ParseError(origin, line, "non-integer " + what + " '" + field + "'");
    return v;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

Dataset read_csv(std::istream& in, const std::string& origin) {
    std::string line;
    long line_no = 0;
    // header (comments may precede it)
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        header = split_fields(line);
        break;
    }
    if (header.empty()) throw ParseError(origin, line_no, "missing CSV header");
    if (header.size() < 4 || header[0] != "id" || header[1] != "group" || header[2] != "score")
        throw ParseError(origin, line_no, "header must start with id,group,score,f0,...");
    const std::size_t dim = header.size() - 3;
    for (std::size_t k = 0; k < dim; ++k)
        if (header[3 + k] != "f" + std::to_string(k))
            throw ParseError(origin, line_no, "expected feature column f" + std::to_string(k) +
                                                  ", got '" + header[3 + k] + "'");

    Dataset ds(dim);
    std::unordered_set<long> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw ParseError(origin, line_no,
                             "expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
        ScoredSample s;
        s.id = parse_field_long(fields[0], origin, line_no, "id");
        if (!ids.insert(s.id).second)
            throw ParseError(origin, line_no, "duplicate id " + std::to_string(s.id));
        s.group = fields[1];
        if (s.group.empty()) throw ParseError(origin, line_no, "empty group field");
        s.score = parse_field_double(fields[2], origin, line_no, "score");
        s.features.reserve(dim);
        for (std::size_t k = 0; k < dim; ++k)
            s.features.push_back(
                parse_field_double(fields[3 + k], origin, line_no, "feature f" + std::to_string(k)));
        ds.add(std::move(s));
    }
    return ds;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file '" + path + "'");
    return read_csv(in, path);
}

void write_csv(const Dataset& ds, std::ostream& out, std::span<const std::string> comments) {
    for (const auto& c : comments) out << "# " << c << "\n";
    out << "id,group,score";
    for (std::size_t k = 0; k < ds.feature_dim(); ++k) out << ",f" << k;
    out << "\n";
    for (const auto& s : ds.samples()) {
        out << s.id << ',' << s.group << ',' << fmt17(s.score);
        for (double f : s.features) out << ',' << fmt17(f);
        out << "\n";
    }
}

void save_csv(const Dataset& ds, const std::string& path, std::span<const std::string> comments) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_csv(ds, out, comments);
    if (!out) throw IoError("failed writing dataset to '" + path + "'");
}

// --- pair construction ---------------------------------------------------------

std::vector<PairSample> make_pairs(const Dataset& ds, std::span<const std::size_t> indices,
                                   double threshold, std::uint64_t seed, std::size_t max_pairs) {
    if (threshold < 0.0) throw InputError("pair threshold must be >=  0");
    for (std::size_t idx : indices)
        if (idx >= ds.size())
            throw InputError("pair index " + std::to_string(idx) + " out of range");

    std::vector<std::size_t> sorted(indices.begin(), indices.end());
    std::sort(sorted.begin(), sorted.end());

    Rng rng(derive_seed(seed, 0x70a1u));
    std::vector<PairSample> pairs;
    for (std::size_t a = 0; a < sorted.size(); ++a) {
        for (std::size_t b = a + 1; b < sorted.size(); ++b) {
            const std::size_t ia = sorted[a], ib = sorted[b];
            const double gap = ds[ia].score - ds[ib].score;
            if (!(std::fabs(gap) > threshold)) continue;
            const std::size_t hi = gap > 0.0 ? ia : ib;
            const std::size_t lo = gap > 0.0 ? ib : ia;
            // randomize orientation so t=0 and t=1 are equally likely
            if (rng.coin())
                pairs.push_back({hi, lo, 1});
            else
                pairs.push_back({lo, hi, 0});
        }
    }

    if (max_pairs > 0 && pairs.size() > max_pairs) {
        std::vector<std::size_t> pick(pairs.size());
        for (std::size_t k = 0; k < pick.size(); ++k) pick[k] = k;
        rng.shuffle(pick);
        pick.resize(max_pairs);
        std::sort(pick.begin(), pick.end());
        std::vector<PairSample> kept;
        kept.reserve(max_pairs);
        for (std::size_t k : pick) kept.push_back(pairs[k]);
        pairs.swap(kept);
    }
    return pairs;
}

// --- group holdout -----------------------------------------------------------

namespace {

struct GroupInfo {
    std::string name;
    std::size_t size;
};

// Walk `order`, adding groups while below target; then drop the crossing
// group if that lands closer, keeping at least min_keep groups. Final
// deviation from target is at most the largest group size.
std::vector<std::size_t> greedy_pack(const std::vector<GroupInfo>& groups,
                                     const std::vector<std::size_t>& order, double target,
                                     std::size_t min_keep) {
    std::vector<std::size_t> picked;
    double count = 0.0;
    for (std::size_t gi : order) {
        if (count >= target) break;
        picked.push_back(gi);
        count += static_cast<double>(groups[gi].size);
    }
    if (picked.size() > min_keep) {
        const double last = static_cast<double>(groups[picked.back()].size);
        if (std::fabs(count - last - target) < std::fabs(count - target)) {
            picked.pop_back();
        }
    }
    while (picked.size() < min_keep && picked.size() < order.size())
        picked.push_back(order[picked.size()]);
    return picked;
}

} // namespace

std::vector<std::string> SplitPlan::effective_train_groups() const {
    const std::set<std::string> val(validation_groups.begin(), validation_groups.end());
    std::vector<std::string> out;
    for (const auto& g : train_groups)
        if (!val.count(g)) out.push_back(g);
    return out;
}

std::vector<SplitPlan> group_holdout_split(const Dataset& ds, double train_fraction, int n_folds,
                                           std::uint64_t seed, double validation_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InputError("train_fraction must lie strictly between 0 and 1");
    if (n_folds < 1) throw InputError("n_folds must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw InputError("validation_fraction must lie in [0,1)");

    const auto sizes = ds.group_sizes();
    if (sizes.size() < 2) throw InputError("group holdout needs at least two groups");
    std::vector<GroupInfo> groups;
    groups.reserve(sizes.size());
    std::size_t total = 0;
    std::size_t max_group = 0;
    for (const auto& [name, size] : sizes) {
        groups.push_back({name, size});
        total += size;
        max_group = std::max(max_group, size);
    }

    const double train_target = train_fraction * static_cast<double>(total);
    std::vector<SplitPlan> plans;
    plans.reserve(static_cast<std::size_t>(n_folds));

    for (int fold = 0; fold < n_folds; ++fold) {
        SplitPlan plan;
        plan.fold = fold;
        plan.seed = seed;
        Rng rng(derive_seed(seed, 0x5f01dull + static_cast<std::uint64_t>(fold)));

        std::vector<std::size_t> order(groups.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        rng.shuffle(order);

        auto train_pick = greedy_pack(groups, order, train_target, 1);
        if (train_pick.size() == order.size()) train_pick.pop_back(); // keep a test side

        std::set<std::size_t> in_train(train_pick.begin(), train_pick.end());
        std::size_t train_count = 0;
        for (std::size_t gi : train_pick) train_count += groups[gi].size;

        if (static_cast<double>(max_group) > train_target)
            plan.warnings.push_back("a single group exceeds the train target (" +
                                    std::to_string(max_group) + " samples vs target " +
                                    std::to_string(train_target) + "); using closest achievable");

        // validation: whole groups out of the train side, ~validation_fraction
        // of training samples, always leaving at least one effective group
        std::vector<std::size_t> val_pick;
        if (validation_fraction > 0.0 && train_pick.size() >= 2) {
            std::vector<std::size_t> vorder = train_pick;
            rng.shuffle(vorder);
            const double val_target = validation_fraction * static_cast<double>(train_count);
            val_pick = greedy_pack(groups, vorder, val_target, 1);
            if (val_pick.size() >= train_pick.size()) val_pick.resize(train_pick.size() - 1);
        } else if (validation_fraction > 0.0) {
            plan.warnings.push_back("train side has a single group; no validation groups reserved");
        }
        const std::set<std::size_t> in_val(val_pick.begin(), val_pick.end());

        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            if (in_train.count(gi))
                plan.train_groups.push_back(groups[gi].name);
            else
                plan.test_groups.push_back(groups[gi].name);
        }
        for (std::size_t gi : val_pick) plan.validation_groups.push_back(groups[gi].name);
        std::sort(plan.train_groups.begin(), plan.train_groups.end());
        std::sort(plan.validation_groups.begin(), plan.validation_groups.end());
        std::sort(plan.test_groups.begin(), plan.test_groups.end());
        plans.push_back(std::move(plan));
    }
    return plans;
}

void save_split_plan(const SplitPlan& plan, const std::string& path,
                     const std::string& manifest_name) {
    nlohmann::json j;
    if (!manifest_name.empty()) j["manifest"] = manifest_name;
    j["fold"] = plan.fold;
    j["seed"] = plan.seed;
    j["train_groups"] = plan.train_groups;
    j["validation_groups"] = plan.validation_groups;
    j["test_groups"] = plan.test_groups;
    if (!plan.warnings.empty()) j["warnings"] = plan.warnings;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

SplitPlan load_split_plan(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open split file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
    }
    SplitPlan plan;
    plan.fold = j.at("fold").get<int>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.train_groups = j.at("train_groups").get<std::vector<std::string>>();
    plan.validation_groups = j.at("validation_groups").get<std::vector<std::string>>();
    plan.test_groups = j.at("test_groups").get<std::vector<std::string>>();
    if (j.contains("warnings")) plan.warnings = j["warnings"].get<std::vector<std::string>>();
    return plan;
}

// --- synthetic generator -------------------------------------------------------

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_groups <= 0 || spec.samples_per_group <= 0 || spec.feature_dim <= 0)
        throw InputError("synthetic spec sizes must be positive");
    if (spec.noise_sd < 0.0) throw InputError("noise_sd must be >= 0");
    if (spec.group_spread < 0.0) throw InputError("group_spread must be >= 0");
    if (!(spec.score_max > spec.score_min)) throw InputError("score range must be non-empty");

    Rng rng(derive_seed(spec.seed, 0x5e3du));
    const int d = spec.feature_dim;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    std::vector<double> w(d), v(d);
    for (double& x : w) x = rng.normal();
    for (double& x : v) x = rng.normal();

    // utility scale chosen so scores spread over the annotation range
    const double scale = 0.25 * (spec.score_max - spec.score_min);

    SyntheticData out;
    out.dataset = Dataset(static_cast<std::size_t>(d));
    long id = 0;
    for (int g = 0; g < spec.n_groups; ++g) {
        std::vector<double> offset(d);
        for (double& x : offset) x = rng.normal(0.0, spec.group_spread);
        for (int k = 0; k < spec.samples_per_group; ++k) {
            ScoredSample s;
            s.id = id++;
            s.group = "g" + std::to_string(g);
            s.features.resize(d);
            for (int f = 0; f < d; ++f) s.features[f] = offset[f] + rng.normal();
            double lin = 0.0, nl = 0.0;
            for (int f = 0; f < d; ++f) {
                lin += w[f] * s.features[f];
                nl += v[f] * s.features[f];
            }
            const double u = scale * (lin * inv_sqrt_d + 0.5 * std::tanh(nl * inv_sqrt_d));
            const double noise = spec.noise_sd > 0.0 ? std::round(rng.normal(0.0, spec.noise_sd)) : 0.0;
            s.score = std::clamp(std::round(u) + noise, spec.score_min, spec.score_max);
            out.latent_utility.push_back(u);
            out.dataset.add(std::move(s));
        }
    }
    return out;
}

} // namespace ranknet
