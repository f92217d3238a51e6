#include <pvlc/calibration.hpp>
#include <pvlc/rng.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace pvlc;
using namespace pvlc::calibration;

namespace {

const device::ModuleSpec reference{};

std::vector<ResponseSample> synthetic(std::size_t count, double lo, double hi, double sigma,
                                      std::uint64_t seed, const device::ModuleSpec& spec = reference) {
    auto engine = rng::make_engine(seed, rng::Stream::noise);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<ResponseSample> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double lux = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        const double noise = sigma > 0.0 ? gauss(engine) : 0.0;
        out.push_back({lux, std::max(0.0, device::module_voltage(lux, spec) + noise)});
    }
    return out;
}

std::vector<ResponseSample> parse(const std::string& text) {
    std::istringstream in(text);
    return load_samples(in);
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("pvlc_test_" + name);
}

}  // namespace

TEST(LoadSamples, Examples) {
    const auto one = parse("lux,volts\n0,0\n");
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].lux, 0.0);
    EXPECT_EQ(one[0].volts, 0.0);

    const auto two = parse("lux,volts\n250,0.3303\n1000,0.3840\n");
    ASSERT_EQ(two.size(), 2u);
    EXPECT_EQ(two[0].lux, 250.0);
    EXPECT_EQ(two[0].volts, 0.3303);
    EXPECT_EQ(two[1].lux, 1000.0);
    EXPECT_EQ(two[1].volts, 0.3840);

    EXPECT_THROW(parse("lux,volts\n-5,0.1\n"), ValidationError);
}

TEST(LoadSamples, PreservesInputOrder) {
    const auto s = parse("lux,volts\n1000,0.38\n10,0.2\n500,0.36\n");
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].lux, 1000.0);
    EXPECT_EQ(s[1].lux, 10.0);
    EXPECT_EQ(s[2].lux, 500.0);
}

TEST(LoadSamples, ToleratesBomCrlfAndBlankLines) {
    const auto s = parse("\xEF\xBB\xBFlux,volts\r\n\r\n10, 0.2\r\n 20 ,0.25\r\n\n");
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[1].lux, 20.0);
    EXPECT_EQ(s[1].volts, 0.25);
}

TEST(LoadSamples, MalformedRowNamesLine) {
    try {
        parse("lux,volts\n10,0.2\n20,abc\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    EXPECT_THROW(parse("lux,volts\n10\n"), ParseError);
    EXPECT_THROW(parse("lux,volts\n10,0.1,5\n"), ParseError);
    EXPECT_THROW(parse("volts,lux\n10,0.1\n"), ParseError);
    EXPECT_THROW(parse(""), ParseError);
    EXPECT_THROW(parse("lux,volts\n10,nan\n"), ParseError);
}

TEST(LoadSamples, MissingFile) {
    EXPECT_THROW(load_samples(std::filesystem::path("/nonexistent/samples.csv")), InputError);
}

TEST(FitResponse, NoiselessRecovery) {
    const auto samples = synthetic(50, 10.0, 1000.0, 0.0, 1);
    const auto t0 = std::chrono::steady_clock::now();
    const auto fit = fit_response(samples, 1);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.n_hat / 1.5, 1.0, 1e-6);
    EXPECT_NEAR(fit.a_hat / 20.0, 1.0, 1e-5);
    EXPECT_LT(fit.rmse, 1e-9);
    EXPECT_LT(ms, 100.0);
}

TEST(FitResponse, NoisyRecoveryMedian) {
    std::vector<double> n_hats;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        n_hats.push_back(fit_response(synthetic(50, 10.0, 1000.0, 1e-3, seed), 1).n_hat);
    std::nth_element(n_hats.begin(), n_hats.begin() + 50, n_hats.end());
    EXPECT_NEAR(n_hats[50] / 1.5, 1.0, 0.05);
}

TEST(FitResponse, MultiCellModule) {
    const device::ModuleSpec four{4, {}};
    const auto fit = fit_response(synthetic(40, 5.0, 2000.0, 0.0, 2, four), 4);
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.n_hat, 1.5, 1e-6);
    EXPECT_NEAR(fit.a_hat / 20.0, 1.0, 1e-5);
}

TEST(FitResponse, ObjectiveNonIncreasing) {
    const auto fit = fit_response(synthetic(30, 10.0, 1000.0, 2e-3, 7), 1);
    ASSERT_GE(fit.objective_trace.size(), 1u);
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
        EXPECT_LE(fit.objective_trace[i], fit.objective_trace[i - 1]);
}

TEST(FitResponse, PermutationInvariant) {
    auto samples = synthetic(40, 10.0, 1000.0, 1e-3, 11);
    const auto a = fit_response(samples, 1);
    std::mt19937_64 shuffle(3);
    std::shuffle(samples.begin(), samples.end(), shuffle);
    const auto b = fit_response(samples, 1);
    EXPECT_NEAR(a.n_hat, b.n_hat, 1e-12 * a.n_hat);
    EXPECT_NEAR(a.a_hat, b.a_hat, 1e-12 * a.a_hat);
}

TEST(FitResponse, EstimatesRatioOnly) {
    // Same eta / I0 ratio, different absolute values: identical data, identical fit.
    const device::ModuleSpec scaled{1, {1.5, 3e-10, 6e-9, 300.0}};
    const auto a = fit_response(synthetic(30, 10.0, 1000.0, 0.0, 0), 1);
    const auto b = fit_response(synthetic(30, 10.0, 1000.0, 0.0, 0, scaled), 1);
    EXPECT_NEAR(a.n_hat, b.n_hat, 1e-9);
    EXPECT_NEAR(a.a_hat, b.a_hat, 1e-7);
}

TEST(FitResponse, DegenerateDesigns) {
    EXPECT_THROW(fit_response(std::vector<ResponseSample>{{10, 0.2}, {20, 0.25}, {30, 0.27}}, 1), InputError);
    const std::vector<ResponseSample> single_lux(6, {250.0, 0.33});
    EXPECT_THROW(fit_response(single_lux, 1), UnidentifiableError);
    const std::vector<ResponseSample> narrow{{100, 0.3}, {200, 0.32}, {300, 0.33}, {400, 0.34}};
    EXPECT_THROW(fit_response(narrow, 1), UnidentifiableError);
    const std::vector<ResponseSample> dark(5, {0.0, 0.0});
    EXPECT_THROW(fit_response(dark, 1), UnidentifiableError);
}

TEST(FitResponse, WarnsOnLitDarkSample) {
    auto samples = synthetic(20, 10.0, 1000.0, 0.0, 0);
    samples.push_back({0.0, 0.05});
    const auto fit = fit_response(samples, 1);
    ASSERT_EQ(fit.warnings.size(), 1u);
}

TEST(FitResponse, FollowsConcaveCurveOverZeroToThousand) {
    const auto samples = synthetic(101, 0.0, 1000.0, 0.0, 0);
    const auto fit = fit_response(samples, 1);
    EXPECT_TRUE(fit.converged);
    EXPECT_LT(fit.rmse, 1e-9);
}

TEST(ToI0, Examples) {
    FitResult fit;
    fit.a_hat = 20.0;
    EXPECT_NEAR(to_i0(fit, 2e-9), 1e-10, 1e-24);
    EXPECT_NEAR(to_i0(fit, 4e-9), 2e-10, 1e-24);
    EXPECT_THROW(to_i0(fit, 0.0), DomainError);
}

TEST(ModelCard, RoundTripIsExact) {
    const device::ModuleSpec spec{3, {1.2345678901234567, 1.1e-10, 2.3e-9, 301.15}};
    FitResult fit;
    fit.rmse = 1.25e-4;
    fit.converged = true;
    const auto path = temp_path("card.json");
    save_model_card(spec, fit, path);
    EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    const auto card = read_model_card(path);
    EXPECT_EQ(card.spec, spec);
    EXPECT_EQ(card.rmse, fit.rmse);
    EXPECT_TRUE(card.converged);
    EXPECT_EQ(load_model_card(path), spec);
    std::filesystem::remove(path);
}

TEST(ModelCard, SchemaErrors) {
    const auto good = to_json(ModelCard{reference, 1e-3, true});
    EXPECT_EQ(model_card_from_json(good).spec, reference);

    auto missing = good;
    missing.erase("n");
    EXPECT_THROW(model_card_from_json(missing), SchemaError);

    auto extra = good;
    extra["colour"] = "blue";
    EXPECT_THROW(model_card_from_json(extra), SchemaError);

    auto wrong_type = good;
    wrong_type["n"] = "1.5";
    EXPECT_THROW(model_card_from_json(wrong_type), SchemaError);

    auto bad_fit = good;
    bad_fit["fit"].erase("rmse");
    EXPECT_THROW(model_card_from_json(bad_fit), SchemaError);

    auto negative = good;
    negative["n"] = -1.0;
    EXPECT_THROW(model_card_from_json(negative), ValidationError);

    auto fractional_cells = good;
    fractional_cells["cell_count"] = 1.5;
    EXPECT_THROW(model_card_from_json(fractional_cells), SchemaError);
}

TEST(ModelCard, InvalidJsonFile) {
    const auto path = temp_path("broken.json");
    std::ofstream(path) << "{ not json";
    EXPECT_THROW(read_model_card(path), SchemaError);
    std::filesystem::remove(path);
    EXPECT_THROW(read_model_card(path), InputError);
}
