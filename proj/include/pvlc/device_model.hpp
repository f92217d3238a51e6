#ifndef PVLC_DEVICE_MODEL_HPP
#define PVLC_DEVICE_MODEL_HPP

#include "constants.hpp"
#include "error.hpp"

#include <cmath>
#include <span>

/// Static optical-to-electrical model of a photovoltaic cell and of a serial
/// chain of identical cells operated open-circuit (no reverse bias).
///
/// A cell under illuminance L produces photocurrent I_ph = eta * L and an
/// output voltage n * v_t * ln(I_ph / I0 + 1). N identical cells in series
/// give N times that voltage.
namespace pvlc::device {

struct PVCellParams {
    double n = 1.5;          // diode ideality factor
    double i0 = 1e-10;       // reverse saturation current [A]
    double eta = 2e-9;       // illuminance-to-photocurrent factor [A/lux]
    double temperature = constants::default_temperature_k;  // [K]

    /// k_B * T / q [V].
    double thermal_voltage() const noexcept {
        return constants::boltzmann * temperature / constants::elementary_charge;
    }

    /// Knee illuminance I0 / eta [lux], where the response turns logarithmic.
    double knee_lux() const noexcept { return i0 / eta; }

    void validate() const {
        if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("ideality factor n must be > 0");
        if (!(i0 > 0.0) || !std::isfinite(i0)) throw ValidationError("saturation current i0 must be > 0");
        if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("conversion factor eta must be > 0");
        if (!(temperature > 0.0) || !std::isfinite(temperature))
            throw ValidationError("temperature must be > 0 K");
    }

    friend bool operator==(const PVCellParams&, const PVCellParams&) = default;
};

struct ModuleSpec {
    int cell_count = 1;
    PVCellParams params{};

    /// N * n * v_t, the prefactor of the module's logarithmic response [V].
    double log_slope() const noexcept {
        return static_cast<double>(cell_count) * params.n * params.thermal_voltage();
    }

    void validate() const {
        if (cell_count < 1) throw ValidationError("cell_count must be >= 1");
        params.validate();
    }

    friend bool operator==(const ModuleSpec&, const ModuleSpec&) = default;
};

struct CellElectrical {
    double i_ph = 0.0;     // [A]
    double r_shunt = 1.0;  // [ohm]
};

enum class DerivativeForm { exact, asymptotic };

inline double photocurrent(double lux, const PVCellParams& params) {
    if (!(lux >= 0.0)) throw DomainError("illuminance must be >= 0");
    return params.eta * lux;
}

inline double cell_voltage(double lux, const PVCellParams& params) {
    if (!(lux >= 0.0)) throw DomainError("illuminance must be >= 0");
    return params.n * params.thermal_voltage() * std::log1p(params.eta * lux / params.i0);
}

inline double module_voltage(double lux, const ModuleSpec& spec) {
    return static_cast<double>(spec.cell_count) * cell_voltage(lux, spec.params);
}

/// Short-circuit current of serially connected cells, each an ideal current
/// source with a shunt resistor: sum(I_ph,i * R_i) / sum(R_i).
inline double short_circuit_current(std::span<const CellElectrical> cells) {
    if (cells.empty()) throw DomainError("short_circuit_current needs at least one cell");
    // Weighted mean taken about the first current, so identical cells return
    // that current exactly.
    const double ref = cells.front().i_ph;
    double weighted = 0.0;
    double total_r = 0.0;
    for (const auto& c : cells) {
        if (!(c.r_shunt > 0.0)) throw DomainError("shunt resistance must be > 0");
        if (!(c.i_ph >= 0.0)) throw DomainError("photocurrent must be >= 0");
        weighted += (c.i_ph - ref) * c.r_shunt;
        total_r += c.r_shunt;
    }
    return ref + weighted / total_r;
}

/// dV_N/dL. The asymptotic form N*n*v_t/L is the eta*L >> I0 limit.
inline double first_derivative(double lux, const ModuleSpec& spec,
                               DerivativeForm form = DerivativeForm::exact) {
    const auto& p = spec.params;
    const double nvt = p.n * p.thermal_voltage();
    const double cells = static_cast<double>(spec.cell_count);
    if (form == DerivativeForm::asymptotic) {
        if (!(lux > 0.0)) throw DomainError("asymptotic derivative needs illuminance > 0");
        return cells * (nvt / lux);
    }
    if (!(lux >= 0.0)) throw DomainError("illuminance must be >= 0");
    return cells * (nvt * p.eta / (p.eta * lux + p.i0));
}

/// d^2V_N/dL^2. Strictly negative: the response is concave everywhere.
inline double second_derivative(double lux, const ModuleSpec& spec,
                                DerivativeForm form = DerivativeForm::exact) {
    const auto& p = spec.params;
    const double nvt = p.n * p.thermal_voltage();
    const double cells = static_cast<double>(spec.cell_count);
    if (form == DerivativeForm::asymptotic) {
        if (!(lux > 0.0)) throw DomainError("asymptotic derivative needs illuminance > 0");
        return cells * (-nvt / (lux * lux));
    }
    if (!(lux >= 0.0)) throw DomainError("illuminance must be >= 0");
    const double g = p.eta / (p.eta * lux + p.i0);
    return cells * (-nvt * g * g);
}

/// Exact inverse of module_voltage on lux >= 0.
inline double inverse_voltage(double volts, const ModuleSpec& spec) {
    if (!(volts >= 0.0)) throw DomainError("voltage must be >= 0");
    return spec.params.knee_lux() * std::expm1(volts / spec.log_slope());
}

}  // namespace pvlc::device

#endif
