#ifndef PVLC_CALIBRATION_HPP
#define PVLC_CALIBRATION_HPP

#include "device_model.hpp"
#include "error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/// Extraction of the diode parameters from measured (illuminance, voltage)
/// pairs, and model-card persistence.
///
/// (L, V) data only constrain eta and I0 through their ratio a = eta / I0, so
/// the fitter estimates (n, a). I0 is recovered with to_i0() once eta is known
/// from an independent measurement.
namespace pvlc::calibration {

struct ResponseSample {
    double lux = 0.0;
    double volts = 0.0;

    friend bool operator==(const ResponseSample&, const ResponseSample&) = default;
};

struct FitResult {
    double n_hat = 0.0;
    double a_hat = 0.0;  // eta / I0 [1/lux]
    double rmse = 0.0;   // [V]
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // residual sum of squares per accepted iterate
    std::vector<std::string> warnings;
};

struct FitOptions {
    double n_min = 0.5;
    double n_max = 5.0;
    double a_min = 1e-4;
    double a_max = 1e6;
    int max_iterations = 200;
    double xtol = 1e-8;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_number(std::string_view field, std::size_t line, const char* name) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (field.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value))
        throw ParseError(line, std::string("malformed ") + name + " value '" + std::string(field) + "'");
    return value;
}

}  // namespace detail

/// Parses `lux,volts` CSV (LF or CRLF). Blank lines are ignored.
inline std::vector<ResponseSample> load_samples(std::istream& in) {
    std::vector<ResponseSample> out;
    std::string raw;
    std::size_t line = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line;
        auto text = detail::trim(raw);
        if (line == 1 && text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
        if (text.empty()) continue;
        if (!header_seen) {
            const auto comma = text.find(',');
            if (comma == std::string_view::npos || detail::trim(text.substr(0, comma)) != "lux" ||
                detail::trim(text.substr(comma + 1)) != "volts")
                throw ParseError(line, "expected header 'lux,volts'");
            header_seen = true;
            continue;
        }
        const auto comma = text.find(',');
        if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos)
            throw ParseError(line, "expected exactly two fields");
        ResponseSample s{detail::parse_number(text.substr(0, comma), line, "lux"),
                         detail::parse_number(text.substr(comma + 1), line, "volts")};
        if (s.lux < 0.0 || s.volts < 0.0)
            throw ValidationError("line " + std::to_string(line) + ": lux and volts must be >= 0");
        out.push_back(s);
    }
    if (!header_seen) throw ParseError(line == 0 ? 1 : line, "missing header 'lux,volts'");
    return out;
}

inline std::vector<ResponseSample> load_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return load_samples(in);
}

/// Sum of squared residuals of N*n*v_t*ln(a*L + 1) against the samples.
inline double residual_sum(std::span<const ResponseSample> samples, double slope, double a) {
    double sse = 0.0;
    for (const auto& s : samples) {
        const double r = slope * std::log1p(a * s.lux) - s.volts;
        sse += r * r;
    }
    return sse;
}

/// Fits (n, a) by bounded Levenberg-Marquardt over (log n, log a).
///
/// The start point comes from a decade grid over a; for each a the model is
/// linear in the prefactor N*n*v_t, which is solved in closed form.
inline FitResult fit_response(std::span<const ResponseSample> input, int cells,
                              double temperature = constants::default_temperature_k,
                              const FitOptions& opt = {}) {
    if (input.size() < 4) throw InputError("fit needs at least 4 samples");
    if (cells < 1) throw ValidationError("cell count must be >= 1");
    if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0 K");

    FitResult result;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& s : input) {
        if (s.lux < 0.0 || s.volts < 0.0) throw ValidationError("samples must be nonnegative");
        if (s.lux > 0.0) {
            lo = std::min(lo, s.lux);
            hi = std::max(hi, s.lux);
        } else if (s.volts > 1e-3) {
            result.warnings.push_back("zero-lux sample reads " + std::to_string(s.volts) +
                                      " V; ambient light during calibration?");
        }
    }
    if (hi == 0.0 || hi < 10.0 * lo)
        throw UnidentifiableError(
            "unidentifiable: nonzero illuminance must span at least one decade");

    // Canonical order makes the result independent of input order.
    std::vector<ResponseSample> samples(input.begin(), input.end());
    std::sort(samples.begin(), samples.end(), [](const auto& x, const auto& y) {
        return x.lux < y.lux || (x.lux == y.lux && x.volts < y.volts);
    });

    const double unit = static_cast<double>(cells) * constants::boltzmann * temperature /
                        constants::elementary_charge;  // N * v_t
    const std::array<double, 2> lower{std::log(opt.n_min), std::log(opt.a_min)};
    const std::array<double, 2> upper{std::log(opt.n_max), std::log(opt.a_max)};
    const auto clamp = [&](std::array<double, 2> t) {
        for (int i = 0; i < 2; ++i) t[i] = std::clamp(t[i], lower[i], upper[i]);
        return t;
    };
    const auto sse_at = [&](const std::array<double, 2>& t) {
        return residual_sum(samples, unit * std::exp(t[0]), std::exp(t[1]));
    };

    std::array<double, 2> theta{};
    double best = std::numeric_limits<double>::infinity();
    for (double a = 1e-2; a <= 1e3 * 1.0001; a *= 10.0) {
        double gv = 0.0, gg = 0.0;
        for (const auto& s : samples) {
            const double g = std::log1p(a * s.lux);
            gv += g * s.volts;
            gg += g * g;
        }
        const double n0 = gg > 0.0 ? gv / gg / unit : 1.0;
        const auto t = clamp({std::log(std::max(n0, 1e-300)), std::log(a)});
        const double e = sse_at(t);
        if (e < best) {
            best = e;
            theta = t;
        }
    }

    double sse = best;
    result.objective_trace.push_back(sse);
    double lambda = 1e-3;
    for (int it = 0; it < opt.max_iterations; ++it) {
        result.iterations = it + 1;
        const double slope = unit * std::exp(theta[0]);
        const double a = std::exp(theta[1]);
        // Normal equations of the 2-parameter problem.
        double jtj00 = 0.0, jtj01 = 0.0, jtj11 = 0.0, jtr0 = 0.0, jtr1 = 0.0;
        for (const auto& s : samples) {
            const double model = slope * std::log1p(a * s.lux);
            const double r = model - s.volts;
            const double j0 = model;
            const double j1 = slope * a * s.lux / (1.0 + a * s.lux);
            jtj00 += j0 * j0;
            jtj01 += j0 * j1;
            jtj11 += j1 * j1;
            jtr0 += j0 * r;
            jtr1 += j1 * r;
        }
        if (jtr0 == 0.0 && jtr1 == 0.0) {
            result.converged = true;
            break;
        }

        bool accepted = false;
        while (!accepted) {
            const double d00 = jtj00 * (1.0 + lambda);
            const double d11 = jtj11 * (1.0 + lambda);
            const double det = d00 * d11 - jtj01 * jtj01;
            if (!(det > 0.0) || !std::isfinite(det)) {
                lambda *= 10.0;
                if (lambda > 1e20) break;
                continue;
            }
            const std::array<double, 2> step{-(d11 * jtr0 - jtj01 * jtr1) / det,
                                             -(d00 * jtr1 - jtj01 * jtr0) / det};
            const auto candidate = clamp({theta[0] + step[0], theta[1] + step[1]});
            const double moved =
                std::max(std::abs(candidate[0] - theta[0]), std::abs(candidate[1] - theta[1]));
            const double e = sse_at(candidate);
            if (e <= sse) {
                theta = candidate;
                sse = e;
                result.objective_trace.push_back(sse);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (moved < opt.xtol) result.converged = true;
            } else {
                if (moved < opt.xtol) {
                    // No representable improvement left along the damped step.
                    result.converged = true;
                    break;
                }
                lambda *= 10.0;
                if (lambda > 1e20) break;
            }
        }
        if (result.converged || !accepted) break;
    }

    result.n_hat = std::exp(theta[0]);
    result.a_hat = std::exp(theta[1]);
    result.rmse = std::sqrt(sse / static_cast<double>(samples.size()));
    return result;
}

/// I0 = eta / a, given an independently calibrated eta.
inline double to_i0(const FitResult& fit, double eta) {
    if (!(eta > 0.0)) throw DomainError("eta must be > 0");
    if (!(fit.a_hat > 0.0)) throw DomainError("fit has no valid gain ratio");
    return eta / fit.a_hat;
}

struct ModelCard {
    device::ModuleSpec spec;
    double rmse = 0.0;
    bool converged = true;
};

inline nlohmann::json to_json(const ModelCard& card) {
    const auto& p = card.spec.params;
    return {{"cell_count", card.spec.cell_count},
            {"n", p.n},
            {"i0", p.i0},
            {"eta", p.eta},
            {"temperature", p.temperature},
            {"fit", {{"rmse", card.rmse}, {"converged", card.converged}}}};
}

inline ModelCard model_card_from_json(const nlohmann::json& doc) {
    static constexpr std::array<std::string_view, 6> keys{"cell_count", "n",           "i0",
                                                          "eta",        "temperature", "fit"};
    if (!doc.is_object()) throw SchemaError("model card must be a JSON object");
    for (const auto& [key, _] : doc.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw SchemaError("unexpected field '" + key + "'");
    for (auto key : keys)
        if (!doc.contains(key)) throw SchemaError("missing field '" + std::string(key) + "'");
    const auto& fit = doc.at("fit");
    if (!fit.is_object() || fit.size() != 2 || !fit.contains("rmse") || !fit.contains("converged"))
        throw SchemaError("field 'fit' must be {rmse, converged}");

    const auto number = [](const nlohmann::json& j, const char* name) {
        if (!j.is_number()) throw SchemaError(std::string("field '") + name + "' must be a number");
        return j.get<double>();
    };
    ModelCard card;
    if (!doc.at("cell_count").is_number_integer())
        throw SchemaError("field 'cell_count' must be an integer");
    card.spec.cell_count = doc.at("cell_count").get<int>();
    card.spec.params.n = number(doc.at("n"), "n");
    card.spec.params.i0 = number(doc.at("i0"), "i0");
    card.spec.params.eta = number(doc.at("eta"), "eta");
    card.spec.params.temperature = number(doc.at("temperature"), "temperature");
    card.rmse = number(fit.at("rmse"), "fit.rmse");
    if (!fit.at("converged").is_boolean()) throw SchemaError("field 'fit.converged' must be a boolean");
    card.converged = fit.at("converged").get<bool>();
    card.spec.validate();
    if (!(card.rmse >= 0.0)) throw ValidationError("fit.rmse must be >= 0");
    return card;
}

/// Writes the card through a temporary file and a rename.
inline void save_model_card(const device::ModuleSpec& spec, const FitResult& fit,
                            const std::filesystem::path& destination) {
    spec.validate();
    const ModelCard card{spec, fit.rmse, fit.converged};
    auto tmp = destination;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw InputError("cannot write " + tmp.string());
        out << to_json(card).dump(2) << '\n';
        if (!out) throw InputError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, destination);
}

inline ModelCard read_model_card(const std::filesystem::path& source) {
    std::ifstream in(source);
    if (!in) throw InputError("cannot open " + source.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("model card is not valid JSON: ") + e.what());
    }
    return model_card_from_json(doc);
}

inline device::ModuleSpec load_model_card(const std::filesystem::path& source) {
    return read_model_card(source).spec;
}

}  // namespace pvlc::calibration

#endif
