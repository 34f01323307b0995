#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/errors.hpp"
#include "fase/grid.hpp"
#include "fase/rng.hpp"
#include "fase/spectrum.hpp"

namespace fase {

inline constexpr std::size_t kDefaultDenseThreshold = 2048;
inline constexpr std::size_t kDefaultEigenCount = 16;

namespace detail {

// Neumaier compensated add; the running value is sum + comp.
inline void neumaier_add(double& sum, double& comp, double term) {
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term))
        comp += (sum - t) + term;
    else
        comp += (term - t) + sum;
    sum = t;
}

}  // namespace detail

// Running first and second moments of per-signal spectra: sum of values
// (for mu_n) and sum of outer products (for C_n). Dense mode keeps the
// m x m upper triangle with compensated summation; above the dense
// threshold the per-signal rows are kept instead, enabling implicit
// products. Shards accumulated independently merge associatively up to
// floating-point tolerance.
class EnsembleMoments {
public:
    explicit EnsembleMoments(GridPtr grid, std::size_t dense_threshold = kDefaultDenseThreshold)
        : grid_(std::move(grid)), dense_threshold_(dense_threshold) {
        const auto m = static_cast<Eigen::Index>(grid_->half_size());
        sum_p_ = Eigen::VectorXd::Zero(m);
        comp_p_ = Eigen::VectorXd::Zero(m);
        if (is_dense()) {
            sum_pp_ = Eigen::MatrixXd::Zero(m, m);
            comp_pp_ = Eigen::MatrixXd::Zero(m, m);
        }
    }

    bool is_dense() const { return grid_->half_size() <= dense_threshold_; }
    std::size_t count() const { return count_; }
    const GridPtr& grid() const { return grid_; }
    std::size_t dense_threshold() const { return dense_threshold_; }

    void accumulate(const SpectrumVector& spectrum) {
        if (!spectrum.grid || !same_grid(*spectrum.grid, *grid_))
            throw std::invalid_argument("EnsembleMoments: spectrum grid mismatch");
        const auto m = static_cast<Eigen::Index>(grid_->half_size());
        if (spectrum.values.size() != m)
            throw std::invalid_argument("EnsembleMoments: spectrum size mismatch");

        const Eigen::VectorXd& v = spectrum.values;
        for (Eigen::Index i = 0; i < m; ++i)
            detail::neumaier_add(sum_p_[i], comp_p_[i], v[i]);
        if (is_dense()) {
            for (Eigen::Index i = 0; i < m; ++i) {
                const double vi = v[i];
                double* sum_row = sum_pp_.data() + i * m;  // column-major: col i
                double* comp_row = comp_pp_.data() + i * m;
                for (Eigen::Index j = i; j < m; ++j)
                    detail::neumaier_add(sum_row[j], comp_row[j], vi * v[j]);
            }
        } else {
            rows_.insert(rows_.end(), v.data(), v.data() + m);
        }
        ++count_;
    }

    void merge(const EnsembleMoments& other) {
        if (!same_grid(*other.grid_, *grid_))
            throw std::invalid_argument("EnsembleMoments: merge grid mismatch");
        if (other.dense_threshold_ != dense_threshold_)
            throw std::invalid_argument("EnsembleMoments: merge dense-threshold mismatch");
        const auto m = static_cast<Eigen::Index>(grid_->half_size());
        for (Eigen::Index i = 0; i < m; ++i) {
            detail::neumaier_add(sum_p_[i], comp_p_[i], other.sum_p_[i]);
            detail::neumaier_add(sum_p_[i], comp_p_[i], other.comp_p_[i]);
        }
        if (is_dense()) {
            for (Eigen::Index i = 0; i < m; ++i) {
                double* sum_col = sum_pp_.data() + i * m;
                double* comp_col = comp_pp_.data() + i * m;
                const double* osum = other.sum_pp_.data() + i * m;
                const double* ocomp = other.comp_pp_.data() + i * m;
                for (Eigen::Index j = i; j < m; ++j) {
                    detail::neumaier_add(sum_col[j], comp_col[j], osum[j]);
                    detail::neumaier_add(sum_col[j], comp_col[j], ocomp[j]);
                }
            }
        } else {
            rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
        }
        count_ += other.count_;
    }

    // mu_n
    Eigen::VectorXd mean() const {
        if (count_ == 0) throw std::invalid_argument("EnsembleMoments: empty");
        return (sum_p_ + comp_p_) / static_cast<double>(count_);
    }

    // C_n as a full symmetric matrix (dense mode only)
    Eigen::MatrixXd second_moment() const {
        if (!is_dense())
            throw std::invalid_argument("EnsembleMoments: second_moment needs dense mode");
        if (count_ == 0) throw std::invalid_argument("EnsembleMoments: empty");
        const auto m = static_cast<Eigen::Index>(grid_->half_size());
        Eigen::MatrixXd c(m, m);
        const double inv = 1.0 / static_cast<double>(count_);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i; j < m; ++j) {
                const double v = (sum_pp_(j, i) + comp_pp_(j, i)) * inv;
                c(i, j) = v;
                c(j, i) = v;
            }
        return c;
    }

    // per-signal rows (implicit mode only), count x m row-major
    const std::vector<double>& rows() const {
        if (is_dense()) throw std::invalid_argument("EnsembleMoments: rows need implicit mode");
        return rows_;
    }

private:
    GridPtr grid_;
    std::size_t dense_threshold_;
    std::size_t count_ = 0;
    Eigen::VectorXd sum_p_, comp_p_;
    Eigen::MatrixXd sum_pp_, comp_pp_;  // upper triangle (i <= j) at (j, i) of column i
    std::vector<double> rows_;
};

// Sigma_n = C_n / (1 + delta) - mu_n mu_n^T. delta vanishes off the
// diagonal, so the implicit form is (1/n) D^T D - mu mu^T minus a diagonal
// correction w_k = C_n[k,k] * delta_k / (1 + delta_k) (delta_k = 1 at
// ordinary points, 2 at self-negating ones).
struct CovarianceEstimate {
    GridPtr grid;
    bool dense = true;
    std::size_t count = 0;
    Eigen::MatrixXd matrix;           // dense mode
    Eigen::MatrixXd data;             // implicit mode, n x m
    Eigen::VectorXd mean;             // mu_n
    Eigen::VectorXd diag_correction;  // implicit mode, w

    std::size_t size() const { return grid->half_size(); }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        if (x.size() != static_cast<Eigen::Index>(size()))
            throw std::invalid_argument("CovarianceEstimate: vector size mismatch");
        if (dense) return matrix * x;
        const Eigen::VectorXd dx = data * x;
        Eigen::VectorXd y = data.transpose() * dx / static_cast<double>(count);
        y.noalias() -= mean * (mean.dot(x));
        y -= diag_correction.cwiseProduct(x);
        return y;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        if (x.rows() != static_cast<Eigen::Index>(size()))
            throw std::invalid_argument("CovarianceEstimate: block size mismatch");
        if (dense) return matrix * x;
        Eigen::MatrixXd y = data.transpose() * (data * x) / static_cast<double>(count);
        y.noalias() -= mean * (mean.transpose() * x);
        y -= diag_correction.asDiagonal() * x;
        return y;
    }
};

inline CovarianceEstimate covariance_estimate(const EnsembleMoments& moments) {
    if (moments.count() < 2)
        throw std::invalid_argument("covariance_estimate: needs at least 2 spectra");
    const FreqGrid& g = *moments.grid();
    const auto m = static_cast<Eigen::Index>(g.half_size());

    CovarianceEstimate est;
    est.grid = moments.grid();
    est.count = moments.count();
    est.mean = moments.mean();
    est.dense = moments.is_dense();

    if (est.dense) {
        Eigen::MatrixXd c = moments.second_moment();
        est.matrix.resize(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double mi = est.mean[i];
            for (Eigen::Index j = i; j < m; ++j) {
                double v = c(i, j);
                if (i == j)
                    v /= g.half_point_self_negating(static_cast<std::size_t>(i)) ? 3.0 : 2.0;
                v -= mi * est.mean[j];
                est.matrix(i, j) = v;
                est.matrix(j, i) = v;
            }
        }
    } else {
        const auto& rows = moments.rows();
        est.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>(
            rows.data(), static_cast<Eigen::Index>(moments.count()), m);
        est.diag_correction.resize(m);
        const double inv = 1.0 / static_cast<double>(moments.count());
        for (Eigen::Index k = 0; k < m; ++k) {
            double sum = 0.0, comp = 0.0;
            for (Eigen::Index s = 0; s < est.data.rows(); ++s) {
                const double v = est.data(s, k);
                detail::neumaier_add(sum, comp, v * v);
            }
            const double ckk = (sum + comp) * inv;
            const double dk = g.half_point_self_negating(static_cast<std::size_t>(k)) ? 2.0 : 1.0;
            est.diag_correction[k] = ckk * dk / (1.0 + dk);
        }
    }
    return est;
}

struct EigenPairs {
    Eigen::VectorXd values;   // nonincreasing
    Eigen::MatrixXd vectors;  // columns, sign-fixed
    std::size_t iterations = 0;
};

struct EigsOptions {
    std::size_t max_iterations = 500;
    double angle_tol = 1e-8;
    double residual_rtol = 1e-6;
};

namespace detail {

inline void fix_eigenvector_signs(Eigen::MatrixXd& vectors) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        Eigen::Index imax = 0;
        double best = 0.0;
        for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
            const double a = std::abs(vectors(i, c));
            if (a > best) {
                best = a;
                imax = i;
            }
        }
        if (vectors(imax, c) < 0.0) vectors.col(c) = -vectors.col(c);
    }
}

inline Eigen::MatrixXd thin_q(const Eigen::MatrixXd& y) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace detail

// Top eigenpairs of Sigma_n. Dense path: full symmetric eigendecomposition.
// Implicit path: orthogonal iteration (block power method) on the implicit
// matvec with a spectral shift so algebraically-largest eigenvalues
// dominate, followed by Rayleigh-Ritz extraction; convergence when the
// subspace angle change drops below angle_tol, capped at max_iterations.
// Ritz residuals are verified; failure raises numerical_error with the
// residual norms.
inline EigenPairs top_eigenpairs(const CovarianceEstimate& cov, std::size_t how_many,
                                 const EigsOptions& opts = {}) {
    const auto m = static_cast<Eigen::Index>(cov.size());
    const auto want = static_cast<Eigen::Index>(how_many);
    if (want < 1 || want > m)
        throw std::invalid_argument("top_eigenpairs: invalid eigenpair count");

    EigenPairs out;
    if (cov.dense) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.matrix);
        if (es.info() != Eigen::Success)
            throw numerical_error("top_eigenpairs: dense eigendecomposition failed");
        out.values.resize(want);
        out.vectors.resize(m, want);
        for (Eigen::Index i = 0; i < want; ++i) {
            out.values[i] = es.eigenvalues()[m - 1 - i];
            out.vectors.col(i) = es.eigenvectors().col(m - 1 - i);
        }
        detail::fix_eigenvector_signs(out.vectors);
        return out;
    }

    const Eigen::Index block = std::min<Eigen::Index>(m, want + 8);
    Rng rng(substream(0xfa5e5eedULL, static_cast<std::uint64_t>(m),
                      static_cast<std::uint64_t>(want)));

    // crude spectral-radius estimate for the shift
    Eigen::VectorXd probe(m);
    for (Eigen::Index i = 0; i < m; ++i) probe[i] = rng.gaussian();
    probe.normalize();
    double radius = 0.0;
    for (int it = 0; it < 30; ++it) {
        Eigen::VectorXd next = cov.apply(probe);
        radius = next.norm();
        if (radius == 0.0) break;
        probe = next / radius;
    }
    const double shift = 1.5 * radius + std::numeric_limits<double>::min();

    Eigen::MatrixXd x(m, block);
    for (Eigen::Index j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < m; ++i) x(i, j) = rng.gaussian();
    x = detail::thin_q(x);

    std::size_t iterations = 0;
    for (; iterations < opts.max_iterations; ++iterations) {
        Eigen::MatrixXd y = cov.apply(x) + shift * x;
        Eigen::MatrixXd xn = detail::thin_q(y);
        // subspace angle change via the singular values of X^T X_new
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(x.transpose() * xn);
        const double cos_min = svd.singularValues().minCoeff();
        x = std::move(xn);
        const double change = std::sqrt(std::max(0.0, 1.0 - cos_min * cos_min));
        if (change < opts.angle_tol) {
            ++iterations;
            break;
        }
    }

    // Rayleigh-Ritz on the unshifted operator
    Eigen::MatrixXd ax = cov.apply(x);
    Eigen::MatrixXd small = x.transpose() * ax;
    small = 0.5 * (small + small.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
    if (es.info() != Eigen::Success)
        throw numerical_error("top_eigenpairs: Rayleigh-Ritz eigendecomposition failed");

    out.values.resize(want);
    out.vectors.resize(m, want);
    for (Eigen::Index i = 0; i < want; ++i) {
        out.values[i] = es.eigenvalues()[block - 1 - i];
        out.vectors.col(i) = x * es.eigenvectors().col(block - 1 - i);
        out.vectors.col(i).normalize();
    }
    out.iterations = iterations;

    const double scale = std::max(std::abs(out.values[0]), 1e-300);
    std::vector<double> residuals(static_cast<std::size_t>(want));
    bool converged = true;
    for (Eigen::Index i = 0; i < want; ++i) {
        const Eigen::VectorXd r = cov.apply(Eigen::VectorXd(out.vectors.col(i))) -
                                  out.values[i] * out.vectors.col(i);
        residuals[static_cast<std::size_t>(i)] = r.norm();
        if (r.norm() > opts.residual_rtol * scale) converged = false;
    }
    if (!converged)
        throw numerical_error(
            "top_eigenpairs: orthogonal iteration did not converge in " +
                std::to_string(iterations) + " iterations",
            residuals);

    detail::fix_eigenvector_signs(out.vectors);
    return out;
}

// Selected factor subspace: rank from the eigenvalue knee, orthonormal
// basis, and the share of mu_n energy the span retains.
struct FactorSubspace {
    std::size_t rank = 0;
    Eigen::VectorXd eigenvalues;  // all candidates, nonincreasing
    Eigen::MatrixXd basis;        // m x rank
    double mean_energy_ratio = 1.0;
    double knee_ratio = 0.0;      // winning lambda_l / lambda_{l+1}
    std::size_t knee_index = 0;   // 1-based l of the winning ratio
    bool low_confidence = false;
    bool mean_energy_warning = false;
};

// Knee rule: r = argmax_l lambda_l / lambda_{l+1} over l with
// lambda_{l+1} > 0; if the best ratio is below 2 fall back to r = 1 and
// flag low confidence. Scale-invariant by construction. A warning fires
// when the span keeps less than 95% of mu_n's energy.
inline FactorSubspace select_rank(const Eigen::VectorXd& eigenvalues, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& basis_candidates) {
    const Eigen::Index l = eigenvalues.size();
    if (l < 3) throw std::invalid_argument("select_rank: needs at least 3 eigenvalues");
    if (basis_candidates.cols() != l)
        throw std::invalid_argument("select_rank: candidate count mismatch");
    if (basis_candidates.rows() != mean.size())
        throw std::invalid_argument("select_rank: mean dimension mismatch");
    for (Eigen::Index i = 1; i < l; ++i)
        if (eigenvalues[i] > eigenvalues[i - 1] * (1.0 + 1e-12) + 1e-300)
            throw std::invalid_argument("select_rank: eigenvalues must be nonincreasing");

    FactorSubspace out;
    out.eigenvalues = eigenvalues;

    double best = 0.0;
    Eigen::Index best_l = 0;
    for (Eigen::Index i = 0; i + 1 < l; ++i) {
        if (!(eigenvalues[i + 1] > 0.0)) continue;
        const double ratio = eigenvalues[i] / eigenvalues[i + 1];
        if (ratio > best) {
            best = ratio;
            best_l = i + 1;  // 1-based rank candidate
        }
    }
    if (best_l == 0 || best < 2.0) {
        out.rank = 1;
        out.low_confidence = true;
        out.knee_ratio = best;
        out.knee_index = best_l > 0 ? static_cast<std::size_t>(best_l) : 0;
    } else {
        out.rank = static_cast<std::size_t>(best_l);
        out.knee_ratio = best;
        out.knee_index = static_cast<std::size_t>(best_l);
    }

    out.basis = basis_candidates.leftCols(static_cast<Eigen::Index>(out.rank));
    const double total = mean.squaredNorm();
    if (total > 0.0) {
        const Eigen::VectorXd proj = out.basis.transpose() * mean;
        out.mean_energy_ratio = proj.squaredNorm() / total;
    } else {
        out.mean_energy_ratio = 1.0;
    }
    out.mean_energy_warning = out.mean_energy_ratio < 0.95;
    return out;
}

// Orthogonal projection onto the selected span; negative components are
// zeroed afterwards when clip_negative is set.
inline SpectrumVector project_spectrum(const SpectrumVector& estimate,
                                       const FactorSubspace& subspace,
                                       bool clip_negative = true) {
    if (subspace.rank == 0) throw std::invalid_argument("project_spectrum: rank-0 subspace");
    if (estimate.values.size() != subspace.basis.rows())
        throw std::invalid_argument("project_spectrum: grid size mismatch");

    Eigen::VectorXd coeffs = subspace.basis.transpose() * estimate.values;
    Eigen::VectorXd projected = subspace.basis * coeffs;
    if (clip_negative) projected = projected.cwiseMax(0.0);
    return SpectrumVector{estimate.grid, std::move(projected)};
}

// mu_n assigned as the estimate for every signal.
inline SpectrumVector baseline_mean_estimator(const EnsembleMoments& moments) {
    if (moments.count() < 1) throw std::invalid_argument("baseline_mean_estimator: empty moments");
    return SpectrumVector{moments.grid(), moments.mean()};
}

}  // namespace fase
