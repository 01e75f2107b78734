#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ranknet {

enum class LossVariant { plain, lupi };

LossVariant loss_variant_from_string(const std::string& name);
std::string to_string(LossVariant v);

// lambda mixes the pairwise BCE term against the two score-matching terms;
// tau scales the squared score residual inside tanh. Both are ignored by the
// plain variant.
struct LossConfig {
    LossVariant variant = LossVariant::plain;
    double lambda = 1.0;
    double tau = 1.0;
};

void validate(const LossConfig& cfg);

struct PairLossResult {
    double loss = 0.0;
    double grad_hx = 0.0;  // d loss / d h(x)
    double grad_hxp = 0.0; // d loss / d h(x')
};

// sigma(s) computed without exponentiating large positives.
double stable_sigmoid(double s);
// log(1 + exp(s)), overflow-safe.
double softplus(double s);

// Pairwise BCE with p = sigma(hx - hxp):
//   loss = -[t log p + (1-t) log(1-p)] = t softplus(hxp-hx) + (1-t) softplus(hx-hxp)
PairLossResult bce_pair_loss(double hx, double hxp, int t);

// lambda * BCE + (1-lambda) * [tanh((hx-gz)^2/tau) + tanh((hxp-gzp)^2/tau)].
// gz, gzp are teacher preference scores for the two points.
PairLossResult lupi_pair_loss(double hx, double hxp, int t, double gz, double gzp,
                              const LossConfig& cfg);

// Dispatch on cfg.variant; plain ignores gz/gzp.
PairLossResult pair_loss(double hx, double hxp, int t, double gz, double gzp,
                         const LossConfig& cfg);

struct PairTerm {
    double hx = 0.0;
    double hxp = 0.0;
    int t = 0;
    double gz = 0.0;
    double gzp = 0.0;
};

struct BatchRisk {
    double mean_loss = 0.0;
    std::vector<PairLossResult> per_pair;
};

// Arithmetic mean of the per-pair loss over the batch; the privileged terms
// sit inside the mean.
BatchRisk batch_risk(std::span<const PairTerm> pairs, const LossConfig& cfg);

// --- loss-surface export --------------------------------------------------

enum class SurfacePanel { plain, lupi, privileged_only };

SurfacePanel surface_panel_from_string(const std::string& name);
std::string to_string(SurfacePanel p);

struct AxisSpec {
    double min = 0.0;
    double max = 10.0;
    double step = 0.1;

    std::size_t point_count() const;
    double value(std::size_t i) const { return min + static_cast<double>(i) * step; }
};

struct SurfaceSpec {
    AxisSpec hx_axis;
    AxisSpec hxp_axis;
    SurfacePanel panel = SurfacePanel::lupi;
    bool normalize = false; // min-max to [0,1]
};

// Loss over the (h(x), h(x')) plane; row-major with hx as the row axis.
struct SurfaceGrid {
    AxisSpec hx_axis;
    AxisSpec hxp_axis;
    SurfacePanel panel = SurfacePanel::lupi;
    bool normalized = false;
    std::size_t n_hx = 0;
    std::size_t n_hxp = 0;
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const { return values[i * n_hxp + j]; }
};

SurfaceGrid export_surface(int t, double gz, double gzp, const LossConfig& cfg,
                           const SurfaceSpec& spec);

// '#'-prefixed metadata lines, then "hx,hxp,loss" rows, 9 significant digits.
void write_surface_csv(const SurfaceGrid& grid, std::ostream& out,
                       std::span<const std::string> extra_comments = {});
void save_surface_csv(const SurfaceGrid& grid, const std::string& path,
                      std::span<const std::string> extra_comments = {});

} // namespace ranknet
