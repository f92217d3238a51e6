#include <pvlc/compensation.hpp>
#include <pvlc/presets.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace pvlc;
using namespace pvlc::compensation;

namespace {

const device::ModuleSpec spec{};
constexpr double inf = std::numeric_limits<double>::infinity();

link::LinkConfig quiet(double tx_dc, double m) {
    link::LinkConfig cfg;
    cfg.tx_dc_lux = tx_dc;
    cfg.mod_index = m;
    cfg.thermal_sigma_v = 0.0;
    cfg.shot_noise_enabled = false;
    return cfg;
}

link::Bits payload(std::size_t count, std::uint64_t seed) {
    auto engine = rng::make_engine(seed, rng::Stream::payload);
    return link::random_bits(count, engine);
}

double rms(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

TEST(PostDistortion, ConfigValidation) {
    EXPECT_NO_THROW((PostDistortionConfig{}.validate()));
    EXPECT_THROW((PostDistortionConfig{0.0, 4.0}.validate()), ValidationError);
    EXPECT_THROW((PostDistortionConfig{350.0, 0.5}.validate()), ValidationError);
    EXPECT_EQ(PostDistortionConfig{}.gain_cap, 4.0);
}

TEST(PostDistortion, ZeroIsFixedPoint) {
    const std::vector<double> zero(64, 0.0);
    for (double x : post_distort(zero, spec, {})) EXPECT_EQ(x, 0.0);
    EXPECT_TRUE(post_distort(std::vector<double>{}, spec, {}).empty());
}

TEST(PostDistortion, RejectsNonZeroMean) {
    const std::vector<double> biased{0.1, 0.2, 0.3};
    EXPECT_THROW(post_distort(biased, spec, {}), InputError);
}

TEST(PostDistortion, PerfectInversionRecoversIlluminanceShape) {
    const double dc = 350.0;
    std::vector<double> lux;
    for (int k = 0; k < 2000; ++k) lux.push_back(dc * (1.0 + 0.4 * std::sin(0.013 * k) * std::cos(0.0007 * k)));
    double lux_mean = 0.0, v_mean = 0.0;
    std::vector<double> v;
    for (double l : lux) {
        lux_mean += l;
        v.push_back(device::module_voltage(l, spec));
        v_mean += v.back();
    }
    lux_mean /= 2000.0;
    v_mean /= 2000.0;
    for (auto& x : v) x -= v_mean;

    // The operating point is the DC level whose voltage the AC coupler removed.
    const double operating = device::inverse_voltage(v_mean, spec);
    const auto out = post_distort(v, spec, {operating, inf});
    const double slope = device::first_derivative(operating, spec);
    for (std::size_t k = 0; k < lux.size(); ++k) {
        const double want = (lux[k] - lux_mean) * slope;
        EXPECT_NEAR(out[k], want, 1e-9 * rms(out) + 1e-9 * std::abs(want)) << k;
    }
}

TEST(PostDistortion, NoiselessCentroidsBecomeUniform) {
    const auto cfg = quiet(350.0, 0.3);
    const auto bits = payload(8000, 1);
    const auto frame = link::transmit(cfg, spec, bits);

    double v_mean = 0.0;
    for (double l : frame.rx_lux) v_mean += device::module_voltage(l, spec);
    v_mean /= static_cast<double>(frame.rx_lux.size());
    const auto out = post_distort(frame.v_ac, spec, {device::inverse_voltage(v_mean, spec), inf});

    const auto c = link::detect_pam4_full(out, cfg, frame.training).centroids;
    const double g0 = c[1] - c[0], g1 = c[2] - c[1], g2 = c[3] - c[2];
    EXPECT_NEAR(g1 / g0, 1.0, 1e-6);
    EXPECT_NEAR(g2 / g0, 1.0, 1e-6);

    const auto plain = link::detect_pam4_full(frame.v_ac, cfg, frame.training).centroids;
    EXPECT_LT((plain[3] - plain[2]) / (plain[1] - plain[0]), 0.9);
}

TEST(PostDistortion, NoiseAmplificationGrowsWithGainCap) {
    std::mt19937_64 engine(3);
    std::normal_distribution<double> gauss(0.0, 2e-3);
    std::vector<double> noise(20000);
    for (auto& x : noise) x = gauss(engine);
    double mean = 0.0;
    for (double x : noise) mean += x;
    mean /= static_cast<double>(noise.size());
    for (auto& x : noise) x -= mean;

    double prev = 0.0;
    for (double cap : {1.0, 1.01, 1.05, 1.2, 2.0, 4.0, 100.0, inf}) {
        const double amp = rms(post_distort(noise, spec, {350.0, cap})) / rms(noise);
        EXPECT_GE(amp, prev) << cap;
        prev = amp;
    }
}

TEST(OptimizeDcl, SinglePointGrid) {
    const auto r = optimize_dcl(quiet(425.0, 0.3), spec, std::vector<double>{300.0}, 2000);
    EXPECT_EQ(r.best_dcl, 300.0);
    ASSERT_EQ(r.curve.size(), 1u);
}

TEST(OptimizeDcl, NoiselessTieBreaksToSmallest) {
    const std::vector<double> grid{0.0, 100.0, 500.0, 1000.0};
    const auto r = optimize_dcl(quiet(425.0, 0.3), spec, grid, 4000);
    EXPECT_EQ(r.best_dcl, 0.0);
    for (const auto& [dcl, ber] : r.curve) EXPECT_EQ(ber, 0.0);
}

TEST(OptimizeDcl, RejectsBadGrid) {
    EXPECT_THROW(optimize_dcl(quiet(425.0, 0.3), spec, std::vector<double>{}, 100), DomainError);
    EXPECT_THROW(optimize_dcl(quiet(425.0, 0.3), spec, std::vector<double>{200.0, 100.0}, 100), DomainError);
}

TEST(OptimizeDcl, InteriorMinimumWithCalibratedLink) {
    auto cfg = presets::ber_vs_dcl_link();
    cfg.mod_index = 0.3;
    const std::vector<double> grid{0.0, 200.0, 400.0, 600.0, 900.0, 1500.0};
    const auto r = optimize_dcl(cfg, spec, grid, 100'000);
    const double min_ber = [&] {
        double m = 1.0;
        for (const auto& p : r.curve) m = std::min(m, p.second);
        return m;
    }();
    EXPECT_GT(r.curve.front().second, min_ber);
    EXPECT_GT(r.curve.back().second, min_ber);
    EXPECT_GT(r.best_dcl, grid.front());
    EXPECT_LT(r.best_dcl, grid.back());
}

TEST(OptimizeDcl, CurveMatchesPointwiseRuns) {
    auto cfg = presets::ber_vs_dcl_link();
    cfg.mod_index = 0.2;
    const std::vector<double> grid{0.0, 300.0, 700.0};
    const std::size_t n_bits = 40'000;
    const auto r = optimize_dcl(cfg, spec, grid, n_bits);

    const auto seed = rng::point_seed(cfg.seed, cfg.tx_dc_lux, cfg.mod_index, 0);
    const auto bits = payload(n_bits, seed);
    for (const auto& [dcl, ber] : r.curve) {
        auto point = cfg;
        point.dcl_lux = dcl;
        point.seed = seed;
        EXPECT_EQ(link::run_link(point, spec, bits).ber, ber);
    }
}
