#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fakeclr/autodiff.hpp"
#include "fakeclr/rng.hpp"
#include "fakeclr/tensor.hpp"

namespace fakeclr {

// ---------------------------------------------------------------------------
// Latent perturbation. Each coordinate receives zero-mean Gaussian noise whose
// standard deviation depends on the mode:
//   fixed          s_i = sigma_fixed
//   noise_related  s_i = l1 * |z_i|       (stronger push where |z| is large)
//   negative_prior s_i = l1 / max(|z_i|, 0.1)
// ---------------------------------------------------------------------------

enum class PerturbationMode { fixed, noise_related, negative_prior };

struct PerturbationConfig {
    PerturbationMode mode = PerturbationMode::noise_related;
    double l1 = 0.1;
    double sigma_fixed = 0.1;

    void validate() const {
        if (!(l1 >= 0.0))
            throw invalid_parameter("perturbation: l1 must be non-negative");
        if (!(sigma_fixed >= 0.0))
            throw invalid_parameter("perturbation: sigma_fixed must be non-negative");
    }
};

inline const char* to_string(PerturbationMode m) {
    switch (m) {
        case PerturbationMode::fixed: return "fixed";
        case PerturbationMode::noise_related: return "noise_related";
        case PerturbationMode::negative_prior: return "negative_prior";
    }
    return "?";
}

inline PerturbationMode perturbation_mode_from_string(const std::string& s) {
    if (s == "fixed") return PerturbationMode::fixed;
    if (s == "noise_related") return PerturbationMode::noise_related;
    if (s == "negative_prior") return PerturbationMode::negative_prior;
    throw invalid_parameter("unknown perturbation mode: " + s);
}

inline std::vector<double> perturb_latent(const std::vector<double>& z,
                                          const PerturbationConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        double s = 0.0;
        switch (cfg.mode) {
            case PerturbationMode::fixed: s = cfg.sigma_fixed; break;
            case PerturbationMode::noise_related: s = cfg.l1 * std::abs(z[i]); break;
            case PerturbationMode::negative_prior:
                s = cfg.l1 / std::max(std::abs(z[i]), 0.1);
                break;
        }
        out[i] = z[i] + s * rng.normal();
    }
    return out;
}

// Row-wise batch form; rows are perturbed in order, coordinates left to right.
inline Tensor perturb_latent(const Tensor& z, const PerturbationConfig& cfg, Rng& rng) {
    cfg.validate();
    Tensor out(z.shape());
    const std::size_t b = z.rows(), d = z.cols();
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            switch (cfg.mode) {
                case PerturbationMode::fixed: s = cfg.sigma_fixed; break;
                case PerturbationMode::noise_related: s = cfg.l1 * std::abs(z.at(i, j)); break;
                case PerturbationMode::negative_prior:
                    s = cfg.l1 / std::max(std::abs(z.at(i, j)), 0.1);
                    break;
            }
            out.at(i, j) = z.at(i, j) + s * rng.normal();
        }
    return out;
}

// ---------------------------------------------------------------------------
// 2-D data-space augmentation: per-point rotation by a uniform angle about the
// batch mean, then additive Gaussian jitter. Disabled or fully degenerate
// configs return the input unchanged and consume no randomness. The sampled
// angles and offsets are split out so the same transform can be applied either
// to plain tensors or inside a gradient tape.
// ---------------------------------------------------------------------------

struct AugmentationConfig {
    double jitter_std = 0.05;
    double rotation_max = 0.25;  // radians
    bool enabled = true;

    void validate() const {
        if (!(jitter_std >= 0.0))
            throw invalid_parameter("augmentation: jitter_std must be non-negative");
        if (!(rotation_max >= 0.0 && rotation_max <= 3.14159265358979323846))
            throw invalid_parameter("augmentation: rotation_max outside [0, pi]");
    }

    bool active() const { return enabled && (jitter_std > 0.0 || rotation_max > 0.0); }
};

struct AugmentationDraw {
    std::vector<double> angle, jx, jy;  // one rotation and jitter pair per point
};

// Per point the draw order is angle, x jitter, y jitter.
inline AugmentationDraw sample_augmentation(std::size_t n, const AugmentationConfig& cfg,
                                            Rng& rng) {
    cfg.validate();
    AugmentationDraw d;
    d.angle.resize(n);
    d.jx.resize(n);
    d.jy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.angle[i] = rng.uniform(-cfg.rotation_max, cfg.rotation_max);
        d.jx[i] = cfg.jitter_std * rng.normal();
        d.jy[i] = cfg.jitter_std * rng.normal();
    }
    return d;
}

inline Tensor augment_apply(const Tensor& x, const AugmentationDraw& d) {
    const std::size_t n = x.rows();
    if (x.cols() != 2)
        throw invalid_parameter("augment_apply: expected an [n,2] batch");
    if (d.angle.size() != n)
        throw contract_violation("augment_apply: draw size mismatch");
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cx += x.at(i, 0);
        cy += x.at(i, 1);
    }
    if (n > 0) {
        cx /= static_cast<double>(n);
        cy /= static_cast<double>(n);
    }
    Tensor out(x.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const double c = std::cos(d.angle[i]), s = std::sin(d.angle[i]);
        const double dx = x.at(i, 0) - cx, dy = x.at(i, 1) - cy;
        out.at(i, 0) = cx + c * dx - s * dy + d.jx[i];
        out.at(i, 1) = cy + s * dx + c * dy + d.jy[i];
    }
    return out;
}

inline Tensor augment_data(const Tensor& x, const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    if (!cfg.active()) return x;
    return augment_apply(x, sample_augmentation(x.rows(), cfg, rng));
}

namespace ad {

// Tape version of augment_apply. With center c the batch mean and R_i the
// per-point rotation, out_i = c + R_i (x_i - c) + jitter_i, so
//   dL/dx_l = R_l^T g_l + (1/n) sum_i (I - R_i)^T g_i.
inline Var augment_rows(const Var& x, const AugmentationDraw& d) {
    Tensor value = augment_apply(x->value, d);
    const std::size_t n = x->value.rows();
    std::vector<double> angles = d.angle;
    return make_op(std::move(value), {x}, [n, angles](Node& node) {
        Node& xs = *node.parents[0];
        if (!xs.requires_grad) return;
        if (xs.grad.empty()) xs.grad.assign(xs.value.size(), 0.0);
        double mx = 0.0, my = 0.0;  // (1/n) sum_i (I - R_i)^T g_i
        for (std::size_t i = 0; i < n; ++i) {
            const double c = std::cos(angles[i]), s = std::sin(angles[i]);
            const double gx = node.grad[2 * i], gy = node.grad[2 * i + 1];
            mx += (1.0 - c) * gx - s * gy;
            my += s * gx + (1.0 - c) * gy;
        }
        if (n > 0) {
            mx /= static_cast<double>(n);
            my /= static_cast<double>(n);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double c = std::cos(angles[i]), s = std::sin(angles[i]);
            const double gx = node.grad[2 * i], gy = node.grad[2 * i + 1];
            xs.grad[2 * i] += c * gx + s * gy + mx;
            xs.grad[2 * i + 1] += -s * gx + c * gy + my;
        }
    });
}

} // namespace ad
} // namespace fakeclr
