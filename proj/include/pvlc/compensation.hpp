#ifndef PVLC_COMPENSATION_HPP
#define PVLC_COMPENSATION_HPP

#include "device_model.hpp"
#include "error.hpp"
#include "link_sim.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

/// Receiver-side and illumination-side mitigation of the PV nonlinearity.
namespace pvlc::compensation {

struct PostDistortionConfig {
    double operating_lux = 350.0;  // DC illuminance at the receiver, assumed known
    // Largest small-signal gain of the inverse relative to its gain at the
    // operating point. Infinity gives exact inversion.
    double gain_cap = 4.0;

    void validate() const {
        if (!(operating_lux > 0.0)) throw ValidationError("operating_lux must be > 0");
        if (!(gain_cap >= 1.0)) throw ValidationError("gain_cap must be >= 1");
    }
};

/// Gain-capped inverse of the module response applied to an AC-coupled
/// waveform. Output is zero-mean and scaled back to volts by the
/// operating-point slope.
inline std::vector<double> post_distort(std::span<const double> v_ac, const device::ModuleSpec& spec,
                                        const PostDistortionConfig& cfg) {
    cfg.validate();
    spec.validate();
    if (v_ac.empty()) return {};
    const double n = static_cast<double>(v_ac.size());
    double mean = 0.0, power = 0.0;
    for (double x : v_ac) {
        mean += x;
        power += x * x;
    }
    mean /= n;
    const double rms = std::sqrt(power / n);
    if (std::abs(mean) > 1e-6 * rms) throw InputError("post_distort expects an AC-coupled waveform");

    const double v_dc = device::module_voltage(cfg.operating_lux, spec);
    const double upper = v_dc + spec.log_slope() * std::log(cfg.gain_cap);
    const double slope = device::first_derivative(cfg.operating_lux, spec);

    std::vector<double> lux(v_ac.size());
    for (std::size_t k = 0; k < v_ac.size(); ++k)
        lux[k] = device::inverse_voltage(std::clamp(v_ac[k] + v_dc, 0.0, upper), spec);
    // Mean about the first sample keeps constant inputs exactly at zero.
    double offset = 0.0;
    for (double x : lux) offset += x - lux.front();
    const double lux_mean = lux.front() + offset / n;
    for (auto& x : lux) x = (x - lux_mean) * slope;
    return lux;
}

struct DclOptimum {
    double best_dcl = 0.0;
    std::vector<std::pair<double, double>> curve;  // (dcl lux, ber)
};

/// BER over a grid of local DC illuminance values. Every point uses the same
/// payload and the seed derived from (tx illuminance, m); ties in BER resolve
/// to the smaller DCL level.
inline DclOptimum optimize_dcl(const link::LinkConfig& base, const device::ModuleSpec& spec,
                               std::span<const double> dcl_grid, std::size_t payload_bits = 500'000) {
    if (dcl_grid.empty()) throw DomainError("DCL grid is empty");
    if (!std::is_sorted(dcl_grid.begin(), dcl_grid.end()))
        throw DomainError("DCL grid must be ascending");
    const std::uint64_t seed = rng::point_seed(base.seed, base.tx_dc_lux, base.mod_index, 0);
    auto engine = rng::make_engine(seed, rng::Stream::payload);
    const auto bits = link::random_bits(payload_bits, engine);

    DclOptimum out;
    double best_ber = std::numeric_limits<double>::infinity();
    for (double dcl : dcl_grid) {
        auto cfg = base;
        cfg.dcl_lux = dcl;
        cfg.seed = seed;
        const double ber = link::run_link(cfg, spec, bits).ber;
        out.curve.emplace_back(dcl, ber);
        if (ber < best_ber) {
            best_ber = ber;
            out.best_dcl = dcl;
        }
    }
    return out;
}

}  // namespace pvlc::compensation

#endif
