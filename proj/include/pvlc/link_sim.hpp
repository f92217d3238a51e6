#ifndef PVLC_LINK_SIM_HPP
#define PVLC_LINK_SIM_HPP

#include "constants.hpp"
#include "device_model.hpp"
#include "error.hpp"
#include "rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

/// Baseband PAM4 link over a PV-module receiver.
///
/// Pipeline: bits -> Gray-mapped PAM4 -> NRZ illuminance waveform -> additive
/// DC light (DCL, ambient) -> PV module response + receiver noise ->
/// AC coupling -> trained-threshold slicer -> BER.
namespace pvlc::link {

using Bits = std::vector<std::uint8_t>;

struct LinkConfig {
    double bit_rate = 1e6;                // [bit/s]
    int samples_per_symbol = 8;
    double mod_index = 0.3;               // peak AC / DC illuminance
    double tx_dc_lux = 425.0;
    double dcl_lux = 0.0;
    double ambient_lux = 0.0;
    double thermal_sigma_v = 1e-3;        // RMS [V]
    bool shot_noise_enabled = true;
    double noise_bandwidth_hz = 1e6;
    std::optional<double> lpf_cutoff_hz;  // single-pole low-pass on the voltage, off when empty
    // Single-pole low-pass on the transmitted illuminance (LED phosphor
    // response), off when empty.
    std::optional<double> optical_cutoff_hz;
    // Per-cell junction capacitance [F]. Zero means a memoryless receiver.
    double junction_capacitance_f = 0.0;
    int training_symbols = 256;
    std::uint64_t seed = 1;

    double symbol_rate() const noexcept { return bit_rate / 2.0; }
    double sample_period() const noexcept { return 1.0 / (symbol_rate() * samples_per_symbol); }

    void validate() const {
        if (!(bit_rate > 0.0)) throw ValidationError("bit_rate must be > 0");
        if (samples_per_symbol < 2) throw ValidationError("samples_per_symbol must be >= 2");
        if (!(mod_index > 0.0 && mod_index <= 1.0))
            throw ValidationError("mod_index must be in (0, 1]");
        if (!(tx_dc_lux > 0.0)) throw ValidationError("tx_dc_lux must be > 0");
        if (!(dcl_lux >= 0.0)) throw ValidationError("dcl_lux must be >= 0");
        if (!(ambient_lux >= 0.0)) throw ValidationError("ambient_lux must be >= 0");
        if (!(thermal_sigma_v >= 0.0)) throw ValidationError("thermal_sigma_v must be >= 0");
        if (!(noise_bandwidth_hz >= 0.0)) throw ValidationError("noise_bandwidth_hz must be >= 0");
        if (lpf_cutoff_hz && !(*lpf_cutoff_hz > 0.0))
            throw ValidationError("lpf_cutoff_hz must be > 0");
        if (optical_cutoff_hz && !(*optical_cutoff_hz > 0.0))
            throw ValidationError("optical_cutoff_hz must be > 0");
        if (!(junction_capacitance_f >= 0.0))
            throw ValidationError("junction_capacitance_f must be >= 0");
        if (training_symbols < 64) throw ValidationError("training_symbols must be >= 64");
    }
};

struct BerReport {
    std::uint64_t bits_total = 0;
    std::uint64_t bits_errored = 0;
    double ber = 0.0;
    bool pass_fec = true;

    static BerReport from_counts(std::uint64_t errored, std::uint64_t total) {
        BerReport r;
        r.bits_total = total;
        r.bits_errored = errored;
        r.ber = total ? static_cast<double>(errored) / static_cast<double>(total) : 0.0;
        r.pass_fec = r.ber < constants::fec_threshold;
        return r;
    }

    friend bool operator==(const BerReport&, const BerReport&) = default;
};

// --- PAM4 mapping -------------------------------------------------------

inline constexpr std::array<double, 4> pam4_levels{-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0};

/// Gray code: level index 0..3 carries bit pairs 00, 01, 11, 10.
inline constexpr std::array<std::array<std::uint8_t, 2>, 4> pam4_gray{{{0, 0}, {0, 1}, {1, 1}, {1, 0}}};

inline int level_index(double amplitude) {
    const long idx = std::lround((amplitude + 1.0) * 1.5);
    if (idx < 0 || idx > 3 || std::abs(pam4_levels[static_cast<std::size_t>(idx)] - amplitude) > 1e-9)
        throw InputError("not a PAM4 amplitude");
    return static_cast<int>(idx);
}

inline std::vector<double> encode_pam4(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2 != 0) throw InputError("PAM4 needs an even number of bits");
    std::vector<double> symbols(bits.size() / 2);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const unsigned pair = (bits[2 * i] ? 2u : 0u) | (bits[2 * i + 1] ? 1u : 0u);
        // 00 -> 0, 01 -> 1, 11 -> 2, 10 -> 3
        static constexpr std::array<int, 4> to_level{0, 1, 3, 2};
        symbols[i] = pam4_levels[static_cast<std::size_t>(to_level[pair])];
    }
    return symbols;
}

inline Bits decode_levels(std::span<const int> levels) {
    Bits bits;
    bits.reserve(levels.size() * 2);
    for (int l : levels) {
        const auto& g = pam4_gray.at(static_cast<std::size_t>(l));
        bits.push_back(g[0]);
        bits.push_back(g[1]);
    }
    return bits;
}

inline Bits decode_pam4(std::span<const double> symbols) {
    std::vector<int> levels(symbols.size());
    std::transform(symbols.begin(), symbols.end(), levels.begin(), level_index);
    return decode_levels(levels);
}

inline Bits random_bits(std::size_t count, rng::Engine& engine) {
    Bits bits(count);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < count; ++i) {
        if (i % 64 == 0) word = engine();
        bits[i] = static_cast<std::uint8_t>(word & 1u);
        word >>= 1;
    }
    return bits;
}

/// Balanced training sequence (equal count of each level), shuffled.
inline std::vector<double> training_sequence(const LinkConfig& cfg) {
    std::vector<double> seq(static_cast<std::size_t>(cfg.training_symbols));
    for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = pam4_levels[i % 4];
    auto engine = rng::make_engine(cfg.seed, rng::Stream::training);
    std::shuffle(seq.begin(), seq.end(), engine);
    return seq;
}

// --- Waveforms ------------------------------------------------------------

/// NRZ illuminance: tx_dc * (1 + m * s) held for samples_per_symbol samples.
inline std::vector<double> tx_waveform(std::span<const double> symbols, const LinkConfig& cfg) {
    cfg.validate();
    const auto sps = static_cast<std::size_t>(cfg.samples_per_symbol);
    std::vector<double> out(symbols.size() * sps);
    for (std::size_t i = 0; i < symbols.size(); ++i)
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(i * sps), sps,
                    cfg.tx_dc_lux * (1.0 + cfg.mod_index * symbols[i]));
    return out;
}

namespace detail {

/// In-place single-pole low-pass, state initialised to the first sample.
inline void one_pole(std::span<double> x, double cutoff_hz, double sample_period) {
    if (x.empty()) return;
    const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz * sample_period);
    double state = x[0];
    for (auto& v : x) {
        state += alpha * (v - state);
        v = state;
    }
}

}  // namespace detail

/// Receiver illuminance: the (optionally band-limited) transmitter light plus
/// the DC contributions of the DCL and ambient light.
inline std::vector<double> channel(std::span<const double> tx, const LinkConfig& cfg) {
    const double shift = cfg.dcl_lux + cfg.ambient_lux;
    std::vector<double> out(tx.begin(), tx.end());
    if (cfg.optical_cutoff_hz) detail::one_pole(out, *cfg.optical_cutoff_hz, cfg.sample_period());
    for (auto& x : out) x += shift;
    return out;
}

/// RMS of the shot-noise voltage at illuminance L: the photocurrent shot
/// density 2 q I_ph B mapped through the small-signal slope dV/dI_ph.
inline double shot_sigma(double lux, const device::ModuleSpec& spec, double bandwidth_hz) {
    const auto& p = spec.params;
    const double iph = p.eta * lux;
    return std::sqrt(2.0 * constants::elementary_charge * iph * bandwidth_hz) * spec.log_slope() /
           (iph + p.i0);
}

inline double noise_sigma(double lux, const device::ModuleSpec& spec, const LinkConfig& cfg) {
    const double shot = cfg.shot_noise_enabled ? shot_sigma(lux, spec, cfg.noise_bandwidth_hz) : 0.0;
    return std::sqrt(cfg.thermal_sigma_v * cfg.thermal_sigma_v + shot * shot);
}

/// Noiseless module voltage for an illuminance waveform.
///
/// Without junction capacitance the response is the static curve. With it,
/// each cell is a diode in parallel with C_j driven by I_ph; the state
/// y = exp(-v / (n v_t)) obeys dy/dt = (I0 - (I_ph + I0) y) / (C_j n v_t),
/// which is linear for a held input and is integrated exactly per sample.
/// The small-signal bandwidth therefore rises with photocurrent.
inline std::vector<double> noiseless_response(std::span<const double> lux,
                                              const device::ModuleSpec& spec,
                                              const LinkConfig& cfg) {
    std::vector<double> v(lux.size());
    if (lux.empty()) return v;
    const auto& p = spec.params;
    const double cells = static_cast<double>(spec.cell_count);
    if (cfg.junction_capacitance_f > 0.0) {
        const double nvt = p.n * p.thermal_voltage();
        const double dt = cfg.sample_period();
        double y = p.i0 / (p.eta * lux[0] + p.i0);
        double held = std::numeric_limits<double>::quiet_NaN(), y_eq = 0.0, decay = 0.0;
        for (std::size_t k = 0; k < lux.size(); ++k) {
            if (lux[k] != held) {
                if (!(lux[k] >= 0.0)) throw DomainError("illuminance must be >= 0");
                held = lux[k];
                const double current = p.eta * held + p.i0;
                y_eq = p.i0 / current;
                decay = std::exp(-dt * current / (cfg.junction_capacitance_f * nvt));
            }
            y = y_eq + (y - y_eq) * decay;
            v[k] = cells * (-nvt * std::log(y));
        }
    } else {
        double held = std::numeric_limits<double>::quiet_NaN(), volts = 0.0;
        for (std::size_t k = 0; k < lux.size(); ++k) {
            if (lux[k] != held) {
                held = lux[k];
                volts = device::module_voltage(held, spec);
            }
            v[k] = volts;
        }
    }
    if (cfg.lpf_cutoff_hz) detail::one_pole(v, *cfg.lpf_cutoff_hz, cfg.sample_period());
    return v;
}

/// Received voltage: noiseless response plus zero-mean Gaussian noise with
/// variance thermal^2 + shot^2(L) per sample.
template <class Engine>
std::vector<double> receive(std::span<const double> lux, const device::ModuleSpec& spec,
                            const LinkConfig& cfg, Engine& engine) {
    auto v = noiseless_response(lux, spec, cfg);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double held = std::numeric_limits<double>::quiet_NaN(), sigma = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (lux[k] != held) {
            held = lux[k];
            sigma = noise_sigma(held, spec, cfg);
        }
        if (sigma > 0.0) v[k] += sigma * gauss(engine);
    }
    return v;
}

inline std::vector<double> ac_couple(std::span<const double> v) {
    if (v.empty()) throw InputError("ac_couple needs a nonempty waveform");
    const long double sum = std::accumulate(v.begin(), v.end(), 0.0L);
    const double mean = static_cast<double>(sum / static_cast<long double>(v.size()));
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [mean](double x) { return x - mean; });
    return out;
}

// --- Detection ------------------------------------------------------------

struct Detection {
    std::vector<double> statistics;   // one per symbol
    std::array<double, 4> centroids{};
    std::array<double, 3> thresholds{};
    std::vector<int> levels;          // payload decisions
    Bits bits;                        // payload bits
};

/// Mean of the middle half of every symbol window.
inline std::vector<double> decision_statistics(std::span<const double> v, int samples_per_symbol) {
    const auto sps = static_cast<std::size_t>(samples_per_symbol);
    if (sps == 0 || v.size() % sps != 0)
        throw InputError("waveform length is not a whole number of symbols");
    const std::size_t first = sps / 4;
    const std::size_t last = sps - sps / 4;
    std::vector<double> stats(v.size() / sps);
    for (std::size_t i = 0; i < stats.size(); ++i) {
        double s = 0.0;
        for (std::size_t k = first; k < last; ++k) s += v[i * sps + k];
        stats[i] = s / static_cast<double>(last - first);
    }
    return stats;
}

/// Trained-threshold PAM4 slicer. Centroids are the mean statistic per
/// transmitted training level; thresholds are midpoints of adjacent centroids.
inline Detection detect_pam4_full(std::span<const double> v, const LinkConfig& cfg,
                                  std::span<const double> training) {
    Detection d;
    d.statistics = decision_statistics(v, cfg.samples_per_symbol);
    if (training.size() > d.statistics.size())
        throw InputError("training longer than the received frame");
    std::array<double, 4> sum{};
    std::array<std::size_t, 4> count{};
    for (std::size_t i = 0; i < training.size(); ++i) {
        const auto l = static_cast<std::size_t>(level_index(training[i]));
        sum[l] += d.statistics[i];
        ++count[l];
    }
    for (std::size_t l = 0; l < 4; ++l) {
        if (count[l] == 0) throw DetectionError("training sequence lacks a PAM4 level");
        d.centroids[l] = sum[l] / static_cast<double>(count[l]);
    }
    for (std::size_t l = 0; l < 3; ++l) d.thresholds[l] = 0.5 * (d.centroids[l] + d.centroids[l + 1]);

    d.levels.reserve(d.statistics.size() - training.size());
    for (std::size_t i = training.size(); i < d.statistics.size(); ++i) {
        const double s = d.statistics[i];
        int level = 0;
        for (double t : d.thresholds) level += s > t ? 1 : 0;
        d.levels.push_back(level);
    }
    d.bits = decode_levels(d.levels);
    return d;
}

inline Bits detect_pam4(std::span<const double> v, const LinkConfig& cfg,
                        std::span<const double> training) {
    return detect_pam4_full(v, cfg, training).bits;
}

inline std::uint64_t count_bit_errors(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> got) {
    if (sent.size() != got.size()) throw InputError("bit sequences differ in length");
    std::uint64_t errors = 0;
    for (std::size_t i = 0; i < sent.size(); ++i) errors += (sent[i] != 0) != (got[i] != 0);
    return errors;
}

// --- End to end ---------------------------------------------------------

/// Everything the receiver DSP sees for one frame.
struct ReceivedFrame {
    std::vector<double> training;  // known training amplitudes
    std::vector<double> symbols;   // training followed by payload amplitudes
    std::vector<double> rx_lux;    // illuminance at the receiver
    std::vector<double> v_ac;      // AC-coupled received voltage
};

inline ReceivedFrame transmit(const LinkConfig& cfg, const device::ModuleSpec& spec,
                              std::span<const std::uint8_t> payload_bits) {
    cfg.validate();
    spec.validate();
    ReceivedFrame f;
    f.training = training_sequence(cfg);
    const auto payload = encode_pam4(payload_bits);
    f.symbols.reserve(f.training.size() + payload.size());
    f.symbols.insert(f.symbols.end(), f.training.begin(), f.training.end());
    f.symbols.insert(f.symbols.end(), payload.begin(), payload.end());
    f.rx_lux = channel(tx_waveform(f.symbols, cfg), cfg);
    auto engine = rng::make_engine(cfg.seed, rng::Stream::noise);
    f.v_ac = ac_couple(receive(f.rx_lux, spec, cfg, engine));
    return f;
}

inline BerReport score(const ReceivedFrame& frame, std::span<const double> v, const LinkConfig& cfg,
                       std::span<const std::uint8_t> payload_bits) {
    const auto got = detect_pam4(v, cfg, frame.training);
    return BerReport::from_counts(count_bit_errors(payload_bits, got), payload_bits.size());
}

inline BerReport run_link(const LinkConfig& cfg, const device::ModuleSpec& spec,
                          std::span<const std::uint8_t> payload_bits) {
    const auto frame = transmit(cfg, spec, payload_bits);
    return score(frame, frame.v_ac, cfg, payload_bits);
}

/// `sample_index,value` CSV for debugging.
inline void write_waveform_csv(std::ostream& out, std::span<const double> v) {
    const auto old = out.precision(17);
    out << "sample_index,value\n";
    for (std::size_t i = 0; i < v.size(); ++i) out << i << ',' << v[i] << '\n';
    out.precision(old);
}

}  // namespace pvlc::link

#endif
