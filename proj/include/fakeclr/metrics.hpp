#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "fakeclr/model.hpp"
#include "fakeclr/rng.hpp"
#include "fakeclr/tensor.hpp"

namespace fakeclr {

// ---------------------------------------------------------------------------
// Gaussian summaries and the 2-D Frechet distance.
// ---------------------------------------------------------------------------

struct GaussianSummary {
    std::vector<double> mu{0.0, 0.0};
    // Row-major 2x2 covariance {xx, xy, yx, yy}.
    std::vector<double> cov{1.0, 0.0, 0.0, 1.0};

    void validate() const {
        if (mu.size() != 2 || cov.size() != 4)
            throw invalid_input("gaussian summary: wrong dimensions");
        for (double v : mu)
            if (!std::isfinite(v)) throw invalid_input("gaussian summary: non-finite mean");
        for (double v : cov)
            if (!std::isfinite(v)) throw invalid_input("gaussian summary: non-finite covariance");
        if (std::abs(cov[1] - cov[2]) > 1e-12)
            throw invalid_input("gaussian summary: covariance not symmetric");
        const double tr = cov[0] + cov[3];
        const double det = cov[0] * cov[3] - cov[1] * cov[2];
        const double disc = std::sqrt(std::max(tr * tr / 4.0 - det, 0.0));
        if (tr / 2.0 - disc < -1e-10)
            throw invalid_input("gaussian summary: covariance has a negative eigenvalue");
    }
};

// Sample mean and unbiased (n-1) covariance of an [n,2] point batch.
inline GaussianSummary summarize(const Tensor& pts) {
    const std::size_t n = pts.rows();
    if (pts.cols() != 2 || n < 2)
        throw invalid_input("summarize: need an [n,2] batch with n >= 2");
    GaussianSummary s;
    s.mu = {0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        s.mu[0] += pts.at(i, 0);
        s.mu[1] += pts.at(i, 1);
    }
    s.mu[0] /= static_cast<double>(n);
    s.mu[1] /= static_cast<double>(n);
    double xx = 0.0, xy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = pts.at(i, 0) - s.mu[0], dy = pts.at(i, 1) - s.mu[1];
        xx += dx * dx;
        xy += dx * dy;
        yy += dy * dy;
    }
    const double inv = 1.0 / static_cast<double>(n - 1);
    s.cov = {xx * inv, xy * inv, xy * inv, yy * inv};
    return s;
}

namespace detail {

// Eigen-decomposition of a symmetric 2x2 {a,b,b,c}: eigenvalues plus an
// orthonormal eigenbasis. The diagonal case is handled exactly.
struct SymEigen2 {
    double l1, l2;      // eigenvalues, l1 >= l2
    double v1x, v1y;    // unit eigenvector for l1; the other is (-v1y, v1x)
};

inline SymEigen2 sym_eigen2(double a, double b, double c) {
    if (b == 0.0) {
        if (a >= c) return {a, c, 1.0, 0.0};
        return {c, a, 0.0, 1.0};
    }
    const double half_tr = 0.5 * (a + c);
    const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    const double l1 = half_tr + disc, l2 = half_tr - disc;
    // (a - l1, b) is orthogonal to the l1 eigenvector; rotate it.
    double vx = b, vy = l1 - a;
    const double norm = std::sqrt(vx * vx + vy * vy);
    return {l1, l2, vx / norm, vy / norm};
}

// Principal square root of a symmetric PSD 2x2; tiny negative eigenvalues
// are clamped to zero.
inline std::vector<double> sym_sqrt2(const std::vector<double>& m) {
    const SymEigen2 e = sym_eigen2(m[0], m[1], m[3]);
    const double s1 = std::sqrt(std::max(e.l1, 0.0)), s2 = std::sqrt(std::max(e.l2, 0.0));
    const double v1x = e.v1x, v1y = e.v1y, v2x = -e.v1y, v2y = e.v1x;
    return {s1 * v1x * v1x + s2 * v2x * v2x, s1 * v1x * v1y + s2 * v2x * v2y,
            s1 * v1x * v1y + s2 * v2x * v2y, s1 * v1y * v1y + s2 * v2y * v2y};
}

inline std::vector<double> mat2_mul(const std::vector<double>& a, const std::vector<double>& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

} // namespace detail

// ||mu_A - mu_B||^2 + Tr(S_A + S_B - 2 (S_A S_B)^{1/2}), the square root taken
// through the symmetrized product sqrt(S_A) S_B sqrt(S_A).
inline double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
    a.validate();
    b.validate();
    const double dx = a.mu[0] - b.mu[0], dy = a.mu[1] - b.mu[1];
    const std::vector<double> ra = detail::sym_sqrt2(a.cov);
    std::vector<double> prod = detail::mat2_mul(detail::mat2_mul(ra, b.cov), ra);
    const double off = 0.5 * (prod[1] + prod[2]);  // symmetrize roundoff
    const detail::SymEigen2 e = detail::sym_eigen2(prod[0], off, prod[3]);
    const double tr_sqrt =
        std::sqrt(std::max(e.l1, 0.0)) + std::sqrt(std::max(e.l2, 0.0));
    double d = dx * dx + dy * dy + a.cov[0] + a.cov[3] + b.cov[0] + b.cov[3] - 2.0 * tr_sqrt;
    if (d < -1e-8)
        throw evaluation_error("frechet_distance: negative beyond tolerance");
    return std::max(d, 0.0);
}

// ---------------------------------------------------------------------------
// Unbiased squared MMD with the cubic kernel k(a,b) = (a.b/2 + 1)^3.
// ---------------------------------------------------------------------------

inline double mmd_poly(const Tensor& x, const Tensor& y) {
    const std::size_t m = x.rows(), n = y.rows();
    if (x.cols() != 2 || y.cols() != 2 || m < 2 || n < 2)
        throw invalid_input("mmd_poly: need [n,2] batches with n >= 2");
    auto kernel = [](double ax, double ay, double bx, double by) {
        const double t = 0.5 * (ax * bx + ay * by) + 1.0;
        return t * t * t;
    };
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j) kxx += kernel(x.at(i, 0), x.at(i, 1), x.at(j, 0), x.at(j, 1));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) kyy += kernel(y.at(i, 0), y.at(i, 1), y.at(j, 0), y.at(j, 1));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            kxy += kernel(x.at(i, 0), x.at(i, 1), y.at(j, 0), y.at(j, 1));
    return kxx / static_cast<double>(m * (m - 1)) + kyy / static_cast<double>(n * (n - 1)) -
           2.0 * kxy / static_cast<double>(m * n);
}

// ---------------------------------------------------------------------------
// Path-length analog: squared data-space displacement per unit latent step
// along random interpolation paths. Endpoints are standard normal draws;
// z-space interpolates before the mapping net, w-space after.
// ---------------------------------------------------------------------------

enum class PathSpace { z, w };

inline const char* to_string(PathSpace s) { return s == PathSpace::z ? "z" : "w"; }

struct PathLengthStats {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation over paths
    PathSpace space = PathSpace::z;
};

// One path step for a caller-supplied forward map ([1,d] -> [1,k]).
template <typename Fwd>
double ppl_step(Fwd&& fwd, const std::vector<double>& e1, const std::vector<double>& e2,
                double t, double eps) {
    if (!(eps > 0.0)) throw invalid_parameter("ppl_step: eps must be positive");
    const std::size_t d = e1.size();
    Tensor a({1, d}), b({1, d});
    for (std::size_t j = 0; j < d; ++j) {
        a[j] = e1[j] + t * (e2[j] - e1[j]);
        b[j] = e1[j] + (t + eps) * (e2[j] - e1[j]);
    }
    const Tensor xa = fwd(a), xb = fwd(b);
    double s = 0.0;
    for (std::size_t j = 0; j < xa.size(); ++j) {
        const double diff = xb[j] - xa[j];
        s += diff * diff;
    }
    return s / (eps * eps);
}

// Generic aggregate over random paths. map_fn takes latents [1,d_in] to the
// interpolation space; synth_fn takes that space to data points. Per path the
// draws are: d_in normals for each endpoint, then one uniform t.
template <typename MapFn, typename SynthFn>
PathLengthStats path_length_fn(MapFn&& map_fn, SynthFn&& synth_fn, std::size_t d_in,
                               PathSpace space, std::size_t n_paths, double eps, Rng& rng) {
    if (!(eps > 0.0)) throw invalid_parameter("path_length: eps must be positive");
    if (n_paths < 1) throw invalid_parameter("path_length: need at least one path");
    std::vector<double> steps(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
        Tensor z1({1, d_in}), z2({1, d_in});
        for (std::size_t j = 0; j < d_in; ++j) z1[j] = rng.normal();
        for (std::size_t j = 0; j < d_in; ++j) z2[j] = rng.normal();
        const double t = rng.uniform();
        std::vector<double> e1, e2;
        if (space == PathSpace::z) {
            e1 = z1.values();
            e2 = z2.values();
            steps[i] = ppl_step([&](const Tensor& v) { return synth_fn(map_fn(v)); }, e1, e2,
                                t, eps);
        } else {
            e1 = map_fn(z1).values();
            e2 = map_fn(z2).values();
            steps[i] = ppl_step(synth_fn, e1, e2, t, eps);
        }
    }
    PathLengthStats out;
    out.space = space;
    for (double s : steps) out.mean += s;
    out.mean /= static_cast<double>(n_paths);
    for (double s : steps) out.stddev += (s - out.mean) * (s - out.mean);
    out.stddev = std::sqrt(out.stddev / static_cast<double>(n_paths));
    return out;
}

inline PathLengthStats path_length(GeneratorNet& g, PathSpace space, std::size_t n_paths,
                                   double eps, Rng& rng) {
    return path_length_fn(
        [&g](const Tensor& z) { return generator_forward(g, z).first; },
        [&g](const Tensor& w) { return generator_synthesis(g, w); }, g.dims.d_z, space,
        n_paths, eps, rng);
}

// ---------------------------------------------------------------------------
// Nearest-neighbor memorization report.
// ---------------------------------------------------------------------------

struct NeighborMatch {
    double distance;
    std::size_t index;
};

struct NearestNeighborReport {
    std::vector<std::vector<NeighborMatch>> neighbors;  // per generated point, ascending
    double min_distance = 0.0;   // smallest nearest-neighbor distance
    double mean_distance = 0.0;  // mean nearest-neighbor distance
    double within_delta = 0.0;   // fraction of generated points with NN closer than delta
    double delta = 0.0;
};

inline NearestNeighborReport nearest_neighbor_report(const Tensor& generated,
                                                     const Tensor& train, std::size_t k,
                                                     double delta = 0.1) {
    const std::size_t g = generated.rows(), n = train.rows();
    if (n == 0) throw invalid_input("nearest_neighbor_report: empty training set");
    if (k < 1 || k > n)
        throw invalid_parameter("nearest_neighbor_report: k outside [1, |train|]");
    NearestNeighborReport rep;
    rep.delta = delta;
    rep.neighbors.resize(g);
    double sum_nn = 0.0;
    std::size_t close = 0;
    std::vector<NeighborMatch> all(n);
    for (std::size_t i = 0; i < g; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = generated.at(i, 0) - train.at(j, 0);
            const double dy = generated.at(i, 1) - train.at(j, 1);
            all[j] = {std::sqrt(dx * dx + dy * dy), j};
        }
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                          all.end(), [](const NeighborMatch& a, const NeighborMatch& b) {
                              return a.distance < b.distance ||
                                     (a.distance == b.distance && a.index < b.index);
                          });
        rep.neighbors[i].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
        const double nn = rep.neighbors[i][0].distance;
        sum_nn += nn;
        if (nn < delta) ++close;
        if (i == 0 || nn < rep.min_distance) rep.min_distance = nn;
    }
    if (g > 0) {
        rep.mean_distance = sum_nn / static_cast<double>(g);
        rep.within_delta = static_cast<double>(close) / static_cast<double>(g);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Latent inversion: plain gradient descent on ||G(z) - x_target||^2 from a
// standard normal start. Returns the best iterate and its Euclidean residual.
// ---------------------------------------------------------------------------

struct InversionResult {
    std::vector<double> z;
    double residual = 0.0;  // ||G(z*) - x_target||
};

// Gradient descent on ||fwd(z) - x_target||^2 from a given start. fwd maps a
// taped [1,d] latent to a taped [1,2] point; the best iterate (including the
// start) wins, measured by Euclidean residual.
template <typename Fwd>
InversionResult invert_fn(Fwd&& fwd, const std::vector<double>& x_target,
                          std::size_t steps, double lr, Tensor z) {
    if (steps < 1) throw invalid_parameter("invert: need at least one step");
    if (!(lr > 0.0)) throw invalid_parameter("invert: lr must be positive");
    if (x_target.size() != 2) throw invalid_parameter("invert: target must be 2-D");
    const Tensor target({1, 2}, {x_target[0], x_target[1]});
    InversionResult best;
    best.residual = std::numeric_limits<double>::infinity();
    auto consider = [&](const Tensor& x, const Tensor& zv) {
        const double dx = x[0] - target[0], dy = x[1] - target[1];
        const double res = std::sqrt(dx * dx + dy * dy);
        if (res < best.residual) {
            best.residual = res;
            best.z = zv.values();
        }
    };
    for (std::size_t it = 0; it <= steps; ++it) {
        ad::Var zv = ad::leaf(z, true);
        ad::Var x = fwd(zv);
        consider(x->value, z);
        if (it == steps) break;
        ad::Var diff = ad::sub(x, ad::constant(target));
        ad::Var loss = ad::sum(ad::mul(diff, diff));
        ad::backward(loss);
        for (std::size_t j = 0; j < z.size(); ++j) z[j] -= lr * zv->grad[j];
    }
    return best;
}

inline InversionResult invert_from(GeneratorNet& g, const std::vector<double>& x_target,
                                   std::size_t steps, double lr, Tensor z) {
    BoundParams bp;
    GeneratorGraph graph = bind(g, bp, false);
    return invert_fn([&](const ad::Var& zv) { return graph.forward(zv).second; }, x_target,
                     steps, lr, std::move(z));
}

inline InversionResult invert(GeneratorNet& g, const std::vector<double>& x_target,
                              std::size_t steps, double lr, Rng& rng) {
    if (x_target.size() != 2) throw invalid_parameter("invert: target must be 2-D");
    const std::size_t d = g.dims.d_z;
    Tensor z({1, d});
    for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
    return invert_from(g, x_target, steps, lr, std::move(z));
}

} // namespace fakeclr
