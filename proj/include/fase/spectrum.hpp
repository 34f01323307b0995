#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fase/errors.hpp"
#include "fase/fft.hpp"
#include "fase/grid.hpp"

namespace fase {

// One power spectrum sampled on the half domain, in periodogram units
// (1/N^d normalization). Values from periodogram/multitaper are nonnegative;
// projection output may dip below zero unless clipped.
struct SpectrumVector {
    GridPtr grid;
    Eigen::VectorXd values;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// Periodogram restricted to M_{N,+}^d:
//   P[k] = (1/N^d) |sum_p Y[p] e^{-2pi i <k,p>/N}|^2.
inline SpectrumVector periodogram(std::span<const double> field, const GridPtr& grid) {
    if (field.size() != grid->full_size())
        throw std::invalid_argument("periodogram: field size does not match grid");
    for (double v : field)
        if (!std::isfinite(v)) throw std::invalid_argument("periodogram: non-finite input");

    std::vector<std::complex<double>> bins;
    detail::fft_forward_real(grid->dim(), grid->n_side(), field, bins);

    const double norm = 1.0 / static_cast<double>(grid->full_size());
    Eigen::VectorXd vals(static_cast<Eigen::Index>(grid->half_size()));
    for (std::size_t i = 0; i < grid->half_size(); ++i)
        vals[static_cast<Eigen::Index>(i)] = std::norm(bins[grid->bin_of_half(i)]) * norm;
    return SpectrumVector{grid, std::move(vals)};
}

// K = floor(2NW) discrete prolate spheroidal sequences for one axis, unit
// norm, most concentrated first.
struct TaperSet {
    int n_side = 0;
    double bandwidth = 0.0;
    int order = 0;                    // K
    Eigen::MatrixXd tapers;           // N x K, column l = taper of order l
    Eigen::VectorXd concentrations;   // energy fraction in [-W, W]
};

// DPSS via the symmetric tridiagonal matrix that commutes with the
// concentration operator: diagonal ((N-1-2t)/2)^2 cos(2piW), off-diagonal
// t(N-t)/2. Concentrations are v^T S v with the sinc kernel
// S[t,s] = sin(2piW(t-s))/(pi(t-s)), S[t,t] = 2W.
inline TaperSet dpss(int n_side, double bandwidth) {
    const int n = n_side;
    if (n < 2) throw std::invalid_argument("dpss: side length must be >= 2");
    const double w = bandwidth;
    if (!(w > 0.0 && w < 0.5))
        throw std::invalid_argument("dpss: bandwidth must satisfy 0 < W < 1/2");
    const int order = static_cast<int>(std::floor(2.0 * n * w));
    // W >= 1/(2N) is equivalent to K >= 1; W = 1/(2N) gives the single-taper
    // estimator
    if (order < 1) throw std::invalid_argument("dpss: taper count floor(2NW) is zero");

    Eigen::VectorXd diag(n), subdiag(n - 1);
    const double c = std::cos(2.0 * std::numbers::pi * w);
    for (int t = 0; t < n; ++t) {
        const double half = (n - 1.0 - 2.0 * t) / 2.0;
        diag[t] = half * half * c;
    }
    for (int t = 1; t < n; ++t) subdiag[t - 1] = t * (n - t) / 2.0;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, subdiag, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success)
        throw numerical_error("dpss: tridiagonal eigendecomposition failed");

    TaperSet out;
    out.n_side = n;
    out.bandwidth = w;
    out.order = order;
    out.tapers.resize(n, order);
    out.concentrations.resize(order);

    for (int l = 0; l < order; ++l) {
        Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - l);  // descending
        v.normalize();
        // sign convention: even order -> positive sum, odd order -> positive
        // first moment sum_t t*v[t]
        double s = 0.0;
        if (l % 2 == 0) {
            s = v.sum();
        } else {
            for (int t = 0; t < n; ++t) s += t * v[t];
        }
        if (s < 0.0) v = -v;
        out.tapers.col(l) = v;

        double conc = 0.0;
        for (int t = 0; t < n; ++t)
            for (int u = 0; u < n; ++u) {
                const double kernel =
                    (t == u) ? 2.0 * w
                             : std::sin(2.0 * std::numbers::pi * w * (t - u)) /
                                   (std::numbers::pi * (t - u));
                conc += v[t] * kernel * v[u];
            }
        out.concentrations[l] = conc;
    }
    return out;
}

namespace detail {

// Visit every taper index tuple in {0..K-1}^d in odometer order.
template <typename F>
void for_each_taper_tuple(int dim, int order, F&& body) {
    std::vector<int> tuple(static_cast<std::size_t>(dim), 0);
    for (;;) {
        body(tuple);
        int axis = dim - 1;
        while (axis >= 0 && tuple[static_cast<std::size_t>(axis)] == order - 1) {
            tuple[static_cast<std::size_t>(axis)] = 0;
            --axis;
        }
        if (axis < 0) break;
        ++tuple[static_cast<std::size_t>(axis)];
    }
}

}  // namespace detail

// Multitaper estimate: average of the periodograms of the sample multiplied
// by all K^d tensor-product tapers. Tapers are stored unit-norm; each axis
// contributes a sqrt(N) factor so the tapered periodogram sits on the same
// power scale as the raw periodogram (boxcar 1/sqrt(N) is the K=1 analogue).
inline SpectrumVector multitaper(std::span<const double> field, const TaperSet& tapers,
                                 const GridPtr& grid) {
    if (tapers.n_side != grid->n_side())
        throw std::invalid_argument("multitaper: taper length does not match grid side");
    if (field.size() != grid->full_size())
        throw std::invalid_argument("multitaper: field size does not match grid");

    const int d = grid->dim();
    const int n = grid->n_side();
    const double axis_scale = std::sqrt(static_cast<double>(n));

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid->half_size()));
    std::vector<double> tapered(grid->full_size());
    std::size_t combos = 0;

    detail::for_each_taper_tuple(d, tapers.order, [&](const std::vector<int>& tuple) {
        for (std::size_t p = 0; p < grid->full_size(); ++p) {
            double weight = 1.0;
            std::size_t rem = p;
            for (int a = d - 1; a >= 0; --a) {
                const int pos = static_cast<int>(rem % static_cast<std::size_t>(n));
                rem /= static_cast<std::size_t>(n);
                weight *= axis_scale * tapers.tapers(pos, tuple[static_cast<std::size_t>(a)]);
            }
            tapered[p] = weight * field[p];
        }
        acc += periodogram(tapered, grid).values;
        ++combos;
    });

    acc /= static_cast<double>(combos);
    return SpectrumVector{grid, std::move(acc)};
}

// Inverse transform of the symmetrized spectrum; returns the lag table on
// M_N^d in full_points order. Imaginary residue below 1e-10 is discarded.
inline std::vector<double> autocovariance_from_spectrum(const SpectrumVector& spectrum) {
    const FreqGrid& g = *spectrum.grid;
    if (spectrum.size() != g.half_size())
        throw std::invalid_argument("autocovariance_from_spectrum: size mismatch");

    std::vector<std::complex<double>> bins(g.full_size());
    for (std::size_t b = 0; b < g.full_size(); ++b)
        bins[b] = spectrum.values[static_cast<Eigen::Index>(g.half_of_bin(b))];

    std::vector<std::complex<double>> lags;
    detail::fft_inverse(g.dim(), g.n_side(), bins, lags);

    const double norm = 1.0 / static_cast<double>(g.full_size());
    std::vector<double> out(g.full_size());
    for (std::size_t i = 0; i < g.full_size(); ++i)
        out[i] = lags[g.bin_index(g.full_points()[i])].real() * norm;
    return out;
}

}  // namespace fase
