#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fase/field.hpp"
#include "fase/grid.hpp"
#include "fase/spectrum.hpp"

using namespace fase;

namespace {

FactorModel section_iv_model() {
    return FactorModel::with_normal_coeffs(
        {AnalyticSpectrum::rect_lowpass(2.0, 4.0), AnalyticSpectrum::rational(4.0)});
}

}  // namespace

TEST_CASE("analytic spectrum families", "[field]") {
    auto rect = AnalyticSpectrum::rect_lowpass(2.0, 4.0);
    std::vector<double> origin = {0.0, 0.0};
    CHECK(rect(origin) == 2.0);
    std::vector<double> edge = {0.125, 0.0};
    CHECK(rect(edge) == 2.0);  // closed support
    std::vector<double> beyond = {0.126, 0.0};
    CHECK(rect(beyond) == 0.0);

    auto rat = AnalyticSpectrum::rational(4.0);
    CHECK(rat(origin) == 1.0);
    std::vector<double> nyq = {0.5, 0.0};
    CHECK(rat(nyq) == Catch::Approx(1.0 / 3.0).epsilon(1e-14));

    // symmetry P(xi) = P(-xi)
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xi = {rng.uniform() - 0.5, rng.uniform() - 0.5};
        std::vector<double> neg = {-xi[0], -xi[1]};
        CHECK(rect(xi) == rect(neg));
        CHECK(rat(xi) == rat(neg));
    }

    // flat spectrum via a zero cutoff scale
    auto flat = AnalyticSpectrum::rect_lowpass(1.0, 0.0);
    std::vector<double> far = {0.5, -0.5};
    CHECK(flat(far) == 1.0);

    auto g = make_grid(1, 8);
    Eigen::VectorXd bad = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(g->half_size()));
    bad[2] = -0.5;
    CHECK_THROWS_AS(AnalyticSpectrum::tabulated(g, bad), std::invalid_argument);
    CHECK_THROWS_AS(AnalyticSpectrum::rect_lowpass(-1.0, 4.0), std::invalid_argument);
}

TEST_CASE("tabulated spectrum evaluates grid frequencies", "[field]") {
    auto g = make_grid(1, 8);
    Eigen::VectorXd vals(static_cast<Eigen::Index>(g->half_size()));
    for (Eigen::Index i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>(i + 1);
    auto tab = AnalyticSpectrum::tabulated(g, vals);
    for (std::size_t i = 0; i < g->half_size(); ++i)
        CHECK(tab.at_half_point(*g, i) == vals[static_cast<Eigen::Index>(i)]);
    // negative frequencies hit the symmetric slot
    std::vector<double> xi = {-1.0 / 8.0};
    std::vector<double> pos = {1.0 / 8.0};
    CHECK(tab(xi) == tab(pos));
}

TEST_CASE("white noise sampling moments and determinism", "[field]") {
    auto tiny = make_grid(1, 4);
    auto one = sample_white_noise(tiny, 1, 42);
    REQUIRE(one.samples.size() == 4);
    for (double v : one.samples) CHECK(std::isfinite(v));
    auto again = sample_white_noise(tiny, 1, 42);
    CHECK(one.samples == again.samples);
    auto other = sample_white_noise(tiny, 1, 43);
    CHECK(one.samples != other.samples);

    auto g = make_grid(2, 32);
    const std::size_t n = 1000;
    auto stack = sample_white_noise(g, n, 7);
    const double total = static_cast<double>(stack.samples.size());
    double mean = 0.0;
    for (double v : stack.samples) mean += v;
    mean /= total;
    CHECK(std::abs(mean) <= 4.0 / std::sqrt(total));

    double var = 0.0;
    for (double v : stack.samples) var += (v - mean) * (v - mean);
    var /= total;
    CHECK(var >= 0.98);
    CHECK(var <= 1.02);

    // oracle at 10x the budget pins the interval much tighter
    auto big = sample_white_noise(g, 10 * n, 8);
    double bmean = 0.0;
    for (double v : big.samples) bmean += v;
    bmean /= static_cast<double>(big.samples.size());
    double bvar = 0.0;
    for (double v : big.samples) bvar += (v - bmean) * (v - bmean);
    bvar /= static_cast<double>(big.samples.size());
    CHECK(std::abs(bvar - 1.0) < 0.006);
}

TEST_CASE("convolution identities", "[field]") {
    auto g = make_grid(2, 8);
    auto noise = sample_white_noise(g, 3, 9);

    auto same = convolve_kernel(noise, Kernel::identity(2));
    CHECK(same.samples == noise.samples);

    Kernel zero;
    zero.taps.push_back({{0, 0}, 0.0});
    auto annihilated = convolve_kernel(noise, zero);
    for (double v : annihilated.samples) CHECK(v == 0.0);

    Kernel too_large;
    too_large.taps.push_back({{8, 0}, 1.0});
    CHECK_THROWS_AS(convolve_kernel(noise, too_large), std::invalid_argument);
}

TEST_CASE("two-tap kernel autocovariance via Monte Carlo", "[field][montecarlo]") {
    const int n = 64;
    auto g = make_grid(1, n);
    const std::size_t signals = 10000;
    auto noise = sample_white_noise(g, signals, 77);

    Kernel k;
    k.taps.push_back({{0}, 1.0});
    k.taps.push_back({{1}, 1.0});
    auto out = convolve_kernel(noise, k);

    // empirical circular autocovariance averaged over signals
    auto lag_mean = [&](int lag) {
        double acc = 0.0;
        for (std::size_t s = 0; s < signals; ++s) {
            auto y = out.signal(s);
            double r = 0.0;
            for (int j = 0; j < n; ++j)
                r += y[static_cast<std::size_t>(j)] * y[static_cast<std::size_t>((j + lag) % n)];
            acc += r / n;
        }
        return acc / static_cast<double>(signals);
    };

    CHECK(std::abs(lag_mean(0) - 2.0) < 0.05);
    CHECK(std::abs(lag_mean(1) - 1.0) < 0.05);
    CHECK(std::abs(lag_mean(2) - 0.0) < 0.05);
    CHECK(std::abs(lag_mean(5) - 0.0) < 0.05);
}

TEST_CASE("synthesized flat spectrum has unit expected periodogram",
          "[field][montecarlo]") {
    auto g = make_grid(2, 16);
    auto flat = AnalyticSpectrum::rect_lowpass(1.0, 0.0);
    const std::size_t signals = 2000;
    auto stack = synthesize_field(g, flat, signals, 1234);

    const auto m = static_cast<Eigen::Index>(g->half_size());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m), sumsq = Eigen::VectorXd::Zero(m);
    for (std::size_t s = 0; s < signals; ++s) {
        auto p = periodogram(stack.signal(s), g);
        sum += p.values;
        sumsq += p.values.cwiseProduct(p.values);
    }
    Eigen::VectorXd mean = sum / static_cast<double>(signals);
    Eigen::VectorXd var =
        sumsq / static_cast<double>(signals) - mean.cwiseProduct(mean);

    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double se = std::sqrt(var[i] / static_cast<double>(signals));
        if (std::abs(mean[i] - 1.0) <= 3.0 * se) ++ok;
    }
    // >= 99% of frequencies within 3 standard errors
    CHECK(static_cast<double>(ok) >= 0.99 * static_cast<double>(m));
}

TEST_CASE("synthesized rect spectrum is exactly band-limited", "[field]") {
    auto g = make_grid(2, 32);
    auto rect = AnalyticSpectrum::rect_lowpass(2.0, 4.0);
    const std::size_t signals = 500;
    auto stack = synthesize_field(g, rect, signals, 99);

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g->half_size()));
    for (std::size_t s = 0; s < signals; ++s) mean += periodogram(stack.signal(s), g).values;
    mean /= static_cast<double>(signals);

    double inside_mean = 0.0;
    std::size_t inside_count = 0;
    for (std::size_t i = 0; i < g->half_size(); ++i) {
        const auto xi = g->frequency(i);
        const double norm = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1]);
        if (norm > 0.125) {
            // zero Fourier coefficients; only FFT round-trip dust remains
            CHECK(mean[static_cast<Eigen::Index>(i)] < 1e-20);
        } else {
            inside_mean += mean[static_cast<Eigen::Index>(i)];
            ++inside_count;
        }
    }
    inside_mean /= static_cast<double>(inside_count);
    CHECK(std::abs(inside_mean - 2.0) < 0.1);
}

TEST_CASE("synthesized rational spectrum endpoint values", "[field][montecarlo]") {
    auto g = make_grid(2, 32);
    auto rat = AnalyticSpectrum::rational(4.0);
    const std::size_t signals = 3000;
    auto stack = synthesize_field(g, rat, signals, 5150);

    // k = 0 and k = (16, 0): self-negating, variance 2 P^2
    const auto i0 = g->half_index({0, 0}).index;
    const auto inyq = g->half_index({16, 0}).index;
    double s0 = 0.0, snyq = 0.0;
    for (std::size_t s = 0; s < signals; ++s) {
        auto p = periodogram(stack.signal(s), g);
        s0 += p.values[static_cast<Eigen::Index>(i0)];
        snyq += p.values[static_cast<Eigen::Index>(inyq)];
    }
    s0 /= static_cast<double>(signals);
    snyq /= static_cast<double>(signals);

    const double se0 = std::sqrt(2.0) * 1.0 / std::sqrt(static_cast<double>(signals));
    CHECK(std::abs(s0 - 1.0) < 3.0 * se0);
    const double pn = 1.0 / 3.0;
    const double sen = std::sqrt(2.0) * pn / std::sqrt(static_cast<double>(signals));
    CHECK(std::abs(snyq - pn) < 3.0 * sen);
}

TEST_CASE("factor model sampling collapses and reproduces", "[field]") {
    auto g = make_grid(2, 16);
    auto rat = AnalyticSpectrum::rational(4.0);

    FactorModel degenerate;
    degenerate.sources = {rat};
    degenerate.coeff_laws = {CoeffLaw::constant(1.0)};
    auto from_model = sample_factor_model(g, degenerate, 5, 321);
    auto direct = synthesize_field(g, rat, 5, 321);
    CHECK(from_model.samples == direct.samples);  // bitwise collapse
    REQUIRE(from_model.coeffs.has_value());
    CHECK(from_model.coeffs->rows() == 5);
    CHECK(from_model.coeffs->cols() == 1);
    CHECK((*from_model.coeffs)(0, 0) == 1.0);

    FactorModel forced;
    forced.sources = {AnalyticSpectrum::rect_lowpass(2.0, 4.0), rat};
    forced.coeff_laws = {CoeffLaw::constant(1.0), CoeffLaw::constant(0.0)};
    auto mixed = sample_factor_model(g, forced, 4, 555);
    auto z1_only = synthesize_field(g, forced.sources[0], 4, 555);
    CHECK(mixed.samples == z1_only.samples);

    auto rerun = sample_factor_model(g, forced, 4, 555);
    CHECK(mixed.samples == rerun.samples);

    auto iv = sample_factor_model(g, section_iv_model(), 8, 777);
    CHECK(iv.coeffs->rows() == 8);
    CHECK(iv.coeffs->cols() == 2);
    auto iv2 = sample_factor_model(g, section_iv_model(), 8, 777);
    CHECK(iv.samples == iv2.samples);
    CHECK((*iv.coeffs) == (*iv2.coeffs));
}

TEST_CASE("conditional spectrum algebra", "[field]") {
    auto g = make_grid(2, 32);
    auto model = section_iv_model();

    std::vector<double> zero = {0.0, 0.0};
    auto s0 = conditional_spectrum(model, zero, g);
    CHECK(s0.values.cwiseAbs().maxCoeff() == 0.0);

    std::vector<double> ones = {1.0, 1.0};
    auto s1 = conditional_spectrum(model, ones, g);
    const auto origin = g->half_index({0, 0}).index;
    CHECK(s1.values[static_cast<Eigen::Index>(origin)] == Catch::Approx(3.0).epsilon(1e-14));

    std::vector<double> scaled = {2.0, 0.0};
    auto s2 = conditional_spectrum(model, scaled, g);
    Eigen::VectorXd p1 = model.sources[0].sample_half(*g);
    CHECK((s2.values - 4.0 * p1).cwiseAbs().maxCoeff() < 1e-12);

    std::vector<double> wrong = {1.0};
    CHECK_THROWS_AS(conditional_spectrum(model, wrong, g), std::invalid_argument);

    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> a = {rng.gaussian(), rng.gaussian()};
        auto s = conditional_spectrum(model, a, g);
        CHECK(s.values.minCoeff() >= 0.0);
    }
}

TEST_CASE("population covariance structure", "[field]") {
    auto g = make_grid(2, 8);

    FactorModel flat;
    flat.sources = {AnalyticSpectrum::rect_lowpass(1.0, 0.0)};
    flat.coeff_laws = {CoeffLaw::standard_normal()};
    auto cov_flat = population_covariance(flat, *g);
    CHECK((cov_flat.array() - 2.0).abs().maxCoeff() < 1e-14);  // Var(a^2) = 2

    auto model = section_iv_model();
    auto cov = population_covariance(model, *g);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() == 0.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const auto m = cov.rows();
    const double top = es.eigenvalues()[m - 1];
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * top);
    int above = 0;
    for (Eigen::Index i = 0; i < m; ++i)
        if (es.eigenvalues()[i] > 1e-10 * top) ++above;
    CHECK(above == 2);

    // eigenvectors span the source spectra
    Eigen::MatrixXd basis = es.eigenvectors().rightCols(2);
    for (const auto& src : model.sources) {
        Eigen::VectorXd p = src.sample_half(*g);
        Eigen::VectorXd residual = p - basis * (basis.transpose() * p);
        CHECK(residual.norm() <= 1e-8 * p.norm());
    }

    FactorModel degenerate;
    degenerate.sources = {AnalyticSpectrum::rational(4.0)};
    degenerate.coeff_laws = {CoeffLaw::constant(1.0)};
    auto cov_zero = population_covariance(degenerate, *g);
    CHECK(cov_zero.cwiseAbs().maxCoeff() == 0.0);
}
