#include "ranknet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "ranknet/errors.hpp"

namespace ranknet {

LossVariant loss_variant_from_string(const std::string& name) {
    if (name == "plain") return LossVariant::plain;
    if (name == "lupi") return LossVariant::lupi;
    throw ConfigError("unknown loss variant '" + name + "' (expected plain or lupi)");
}

std::string to_string(LossVariant v) { return v == LossVariant::plain ? "plain" : "lupi"; }

void validate(const LossConfig& cfg) {
    if (cfg.variant == LossVariant::plain) return;
    if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0))
        throw ConfigError("lambda must lie in [0,1], got " + std::to_string(cfg.lambda));
    if (!(cfg.tau > 0.0)) throw ConfigError("tau must be positive, got " + std::to_string(cfg.tau));
}

double softplus(double s) {
    // max(s,0) + log1p(exp(-|s|))
    return (s > 0.0 ? s : 0.0) + std::log1p(std::exp(-std::fabs(s)));
}

double stable_sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

namespace {

void check_finite_pair(double hx, double hxp) {
    if (!std::isfinite(hx) || !std::isfinite(hxp))
        throw NumericError("non-finite score fed to pair loss");
}

void check_label(int t) {
    if (t != 0 && t != 1) throw InputError("pair label must be 0 or 1, got " + std::to_string(t));
}

} // namespace

PairLossResult bce_pair_loss(double hx, double hxp, int t) {
    check_finite_pair(hx, hxp);
    check_label(t);
    const double s = hx - hxp;
    const double p = stable_sigmoid(s);
    PairLossResult r;
    r.loss = (t == 1) ? softplus(-s) : softplus(s);
    r.grad_hx = p - static_cast<double>(t);
    r.grad_hxp = static_cast<double>(t) - p;
    return r;
}

PairLossResult lupi_pair_loss(double hx, double hxp, int t, double gz, double gzp,
                              const LossConfig& cfg) {
    if (cfg.variant != LossVariant::lupi) throw ConfigError("lupi_pair_loss needs variant=lupi");
    validate(cfg);
    if (!std::isfinite(gz) || !std::isfinite(gzp))
        throw NumericError("non-finite teacher score fed to pair loss");

    const PairLossResult bce = bce_pair_loss(hx, hxp, t);
    const double lam = cfg.lambda;
    const double dx = hx - gz;
    const double dxp = hxp - gzp;
    const double phi_x = std::tanh(dx * dx / cfg.tau);
    const double phi_xp = std::tanh(dxp * dxp / cfg.tau);

    PairLossResult r;
    r.loss = lam * bce.loss + (1.0 - lam) * (phi_x + phi_xp);
    // d/dh tanh(d^2/tau) = (1 - tanh^2(d^2/tau)) * 2d/tau
    r.grad_hx = lam * bce.grad_hx + (1.0 - lam) * (1.0 - phi_x * phi_x) * 2.0 * dx / cfg.tau;
    r.grad_hxp = lam * bce.grad_hxp + (1.0 - lam) * (1.0 - phi_xp * phi_xp) * 2.0 * dxp / cfg.tau;
    return r;
}

PairLossResult pair_loss(double hx, double hxp, int t, double gz, double gzp,
                         const LossConfig& cfg) {
    return cfg.variant == LossVariant::plain ? bce_pair_loss(hx, hxp, t)
                                             : lupi_pair_loss(hx, hxp, t, gz, gzp, cfg);
}

BatchRisk batch_risk(std::span<const PairTerm> pairs, const LossConfig& cfg) {
    if (pairs.empty()) throw InputError("batch_risk needs a non-empty pair list");
    BatchRisk out;
    out.per_pair.reserve(pairs.size());
    double sum = 0.0;
    for (const PairTerm& p : pairs) {
        out.per_pair.push_back(pair_loss(p.hx, p.hxp, p.t, p.gz, p.gzp, cfg));
        sum += out.per_pair.back().loss;
    }
    out.mean_loss = sum / static_cast<double>(pairs.size());
    return out;
}

// --- surfaces --------------------------------------------------------------

SurfacePanel surface_panel_from_string(const std::string& name) {
    if (name == "plain") return SurfacePanel::plain;
    if (name == "lupi") return SurfacePanel::lupi;
    if (name == "privileged") return SurfacePanel::privileged_only;
    throw ConfigError("unknown surface panel '" + name + "' (expected plain, lupi or privileged)");
}

std::string to_string(SurfacePanel p) {
    switch (p) {
    case SurfacePanel::plain: return "plain";
    case SurfacePanel::lupi: return "lupi";
    default: return "privileged";
    }
}

std::size_t AxisSpec::point_count() const {
    if (!(step > 0.0) || !(max > min) || !std::isfinite(min) || !std::isfinite(max))
        throw InputError("degenerate surface axis: need finite max > min and step > 0");
    // small slack so e.g. (10-0)/0.1 lands on 100 points + endpoint
    return static_cast<std::size_t>(std::floor((max - min) / step + 1e-9)) + 1;
}

SurfaceGrid export_surface(int t, double gz, double gzp, const LossConfig& cfg,
                           const SurfaceSpec& spec) {
    if (t != 0 && t != 1) throw InputError("surface label must be 0 or 1");
    LossConfig eval_cfg = cfg;
    if (spec.panel != SurfacePanel::plain) {
        eval_cfg.variant = LossVariant::lupi;
        validate(eval_cfg);
    }

    SurfaceGrid grid;
    grid.hx_axis = spec.hx_axis;
    grid.hxp_axis = spec.hxp_axis;
    grid.panel = spec.panel;
    grid.n_hx = spec.hx_axis.point_count();
    grid.n_hxp = spec.hxp_axis.point_count();
    grid.values.resize(grid.n_hx * grid.n_hxp);

    for (std::size_t i = 0; i < grid.n_hx; ++i) {
        const double hx = spec.hx_axis.value(i);
        for (std::size_t j = 0; j < grid.n_hxp; ++j) {
            const double hxp = spec.hxp_axis.value(j);
            double v = 0.0;
            switch (spec.panel) {
            case SurfacePanel::plain: v = bce_pair_loss(hx, hxp, t).loss; break;
            case SurfacePanel::lupi: v = lupi_pair_loss(hx, hxp, t, gz, gzp, eval_cfg).loss; break;
            case SurfacePanel::privileged_only: {
                const double dx = hx - gz;
                const double dxp = hxp - gzp;
                v = (1.0 - eval_cfg.lambda) *
                    (std::tanh(dx * dx / eval_cfg.tau) + std::tanh(dxp * dxp / eval_cfg.tau));
                break;
            }
            }
            grid.values[i * grid.n_hxp + j] = v;
        }
    }

    if (spec.normalize) {
        const auto [lo_it, hi_it] = std::minmax_element(grid.values.begin(), grid.values.end());
        const double lo = *lo_it, hi = *hi_it;
        const double range = hi - lo;
        for (double& v : grid.values) v = range > 0.0 ? (v - lo) / range : 0.0;
        grid.normalized = true;
    }
    return grid;
}

void write_surface_csv(const SurfaceGrid& grid, std::ostream& out,
                       std::span<const std::string> extra_comments) {
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    for (const auto& c : extra_comments) out << "# " << c << "\n";
    out << "# panel: " << to_string(grid.panel) << "\n";
    out << "# hx axis: min=" << fmt(grid.hx_axis.min) << " max=" << fmt(grid.hx_axis.max)
        << " step=" << fmt(grid.hx_axis.step) << " points=" << grid.n_hx << "\n";
    out << "# hxp axis: min=" << fmt(grid.hxp_axis.min) << " max=" << fmt(grid.hxp_axis.max)
        << " step=" << fmt(grid.hxp_axis.step) << " points=" << grid.n_hxp << "\n";
    out << "# normalized: " << (grid.normalized ? "true" : "false") << "\n";
    out << "hx,hxp,loss\n";
    for (std::size_t i = 0; i < grid.n_hx; ++i)
        for (std::size_t j = 0; j < grid.n_hxp; ++j)
            out << fmt(grid.hx_axis.value(i)) << ',' << fmt(grid.hxp_axis.value(j)) << ','
                << fmt(grid.at(i, j)) << "\n";
}

void save_surface_csv(const SurfaceGrid& grid, const std::string& path,
                      std::span<const std::string> extra_comments) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_surface_csv(grid, out, extra_comments);
    if (!out) throw IoError("failed writing surface CSV to '" + path + "'");
}

} // namespace ranknet
