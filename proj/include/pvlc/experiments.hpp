#ifndef PVLC_EXPERIMENTS_HPP
#define PVLC_EXPERIMENTS_HPP

#include "compensation.hpp"
#include "device_model.hpp"
#include "error.hpp"
#include "link_sim.hpp"
#include "rng.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

/// Sweep harness producing the reference datasets (response curves,
/// derivatives, BER vs modulation index, BER vs DCL illuminance,
/// post-distortion comparison, eye traces).
///
/// BER points are computed independently: each (point, repetition) pair gets
/// its seed from rng::point_seed, so a single cell can be re-run in isolation
/// and parallel execution reproduces serial output bit for bit.
namespace pvlc::experiments {

struct SweepOptions {
    int repetitions = 5;
    std::size_t payload_bits = 500'000;
    unsigned jobs = 1;
};

struct ResponseRow {
    double lux;
    int cells;
    double volts;
};

struct DerivativeRow {
    double lux;
    int cells;
    double dv;
    double d2v;
};

struct BerVsMRow {
    double tx_dc_lux;
    double mod_index;
    double ber;
    bool pass_fec;
};

struct BerVsDclRow {
    double mod_index;
    double dcl_lux;
    double ber;
};

struct PostDistRow {
    double mod_index;
    double ber_plain;
    double ber_compensated;
};

namespace detail {

inline void check_grid(std::span<const double> grid, const char* name) {
    if (grid.empty()) throw ValidationError(std::string(name) + " grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ValidationError(std::string(name) + " grid must be strictly ascending");
}

inline void check_cells(std::span<const int> cells) {
    if (cells.empty()) throw ValidationError("cell-count list is empty");
    for (int n : cells)
        if (n < 1) throw ValidationError("cell counts must be >= 1");
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw InputError("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace detail

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. The first
/// exception thrown by any task is rethrown to the caller.
template <class Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        const auto n = std::min<std::size_t>(jobs, count);
        for (std::size_t w = 0; w < n; ++w)
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = count;
                    }
                }
            });
    }
    if (failure) std::rethrow_exception(failure);
}

/// One BER draw. The seed depends on (base seed, tx illuminance, m,
/// repetition) but not on DCL illuminance.
inline link::BerReport ber_draw(const link::LinkConfig& base, const device::ModuleSpec& spec,
                                int repetition, std::size_t payload_bits) {
    auto cfg = base;
    cfg.seed = rng::point_seed(base.seed, base.tx_dc_lux, base.mod_index,
                               static_cast<std::uint64_t>(repetition));
    auto engine = rng::make_engine(cfg.seed, rng::Stream::payload);
    const auto bits = link::random_bits(payload_bits, engine);
    return link::run_link(cfg, spec, bits);
}

/// Median BER over `repetitions` draws of one configuration.
inline double ber_point(const link::LinkConfig& cfg, const device::ModuleSpec& spec,
                        const SweepOptions& opt) {
    std::vector<double> draws;
    for (int r = 0; r < opt.repetitions; ++r)
        draws.push_back(ber_draw(cfg, spec, r, opt.payload_bits).ber);
    return detail::median(std::move(draws));
}

inline std::vector<ResponseRow> sweep_response(std::span<const double> lux_grid,
                                               std::span<const int> cells,
                                               const device::PVCellParams& params) {
    detail::check_grid(lux_grid, "illuminance");
    detail::check_cells(cells);
    params.validate();
    std::vector<ResponseRow> rows;
    for (double lux : lux_grid)
        for (int n : cells)
            rows.push_back({lux, n, device::module_voltage(lux, {n, params})});
    return rows;
}

inline std::vector<DerivativeRow> sweep_derivatives(
    std::span<const double> lux_grid, std::span<const int> cells, const device::PVCellParams& params,
    device::DerivativeForm form = device::DerivativeForm::exact) {
    detail::check_grid(lux_grid, "illuminance");
    detail::check_cells(cells);
    params.validate();
    std::vector<DerivativeRow> rows;
    for (double lux : lux_grid)
        for (int n : cells) {
            const device::ModuleSpec spec{n, params};
            rows.push_back({lux, n, device::first_derivative(lux, spec, form),
                            device::second_derivative(lux, spec, form)});
        }
    return rows;
}

inline std::vector<BerVsMRow> sweep_ber_vs_m(std::span<const double> m_grid,
                                             std::span<const double> lux_list,
                                             const link::LinkConfig& base,
                                             const device::ModuleSpec& spec,
                                             const SweepOptions& opt = {}) {
    detail::check_grid(m_grid, "modulation index");
    detail::check_grid(lux_list, "illuminance");
    if (m_grid.front() <= 0.0 || m_grid.back() > 1.0)
        throw ValidationError("modulation indices must lie in (0, 1]");
    if (opt.repetitions < 1) throw ValidationError("repetitions must be >= 1");

    const std::size_t points = m_grid.size() * lux_list.size();
    const auto reps = static_cast<std::size_t>(opt.repetitions);
    std::vector<double> draws(points * reps);
    parallel_for(points * reps, opt.jobs, [&](std::size_t task) {
        const std::size_t point = task / reps;
        auto cfg = base;
        cfg.tx_dc_lux = lux_list[point / m_grid.size()];
        cfg.mod_index = m_grid[point % m_grid.size()];
        draws[task] = ber_draw(cfg, spec, static_cast<int>(task % reps), opt.payload_bits).ber;
    });

    std::vector<BerVsMRow> rows;
    for (std::size_t p = 0; p < points; ++p) {
        const double ber = detail::median({draws.begin() + static_cast<std::ptrdiff_t>(p * reps),
                                           draws.begin() + static_cast<std::ptrdiff_t>((p + 1) * reps)});
        rows.push_back({lux_list[p / m_grid.size()], m_grid[p % m_grid.size()], ber,
                        ber < constants::fec_threshold});
    }
    return rows;
}

inline std::vector<BerVsDclRow> sweep_ber_vs_dcl(std::span<const double> dcl_grid,
                                                 std::span<const double> m_list,
                                                 const link::LinkConfig& base,
                                                 const device::ModuleSpec& spec,
                                                 const SweepOptions& opt = {}) {
    if (dcl_grid.empty()) throw ValidationError("DCL grid is empty");
    for (std::size_t i = 1; i < dcl_grid.size(); ++i)
        if (!(dcl_grid[i] > dcl_grid[i - 1]))
            throw ValidationError("DCL grid must be strictly ascending");
    if (dcl_grid.front() < 0.0) throw ValidationError("DCL illuminance must be >= 0");
    detail::check_grid(m_list, "modulation index");
    if (opt.repetitions < 1) throw ValidationError("repetitions must be >= 1");

    const std::size_t points = dcl_grid.size() * m_list.size();
    const auto reps = static_cast<std::size_t>(opt.repetitions);
    std::vector<double> draws(points * reps);
    parallel_for(points * reps, opt.jobs, [&](std::size_t task) {
        const std::size_t point = task / reps;
        auto cfg = base;
        cfg.mod_index = m_list[point / dcl_grid.size()];
        cfg.dcl_lux = dcl_grid[point % dcl_grid.size()];
        draws[task] = ber_draw(cfg, spec, static_cast<int>(task % reps), opt.payload_bits).ber;
    });

    std::vector<BerVsDclRow> rows;
    for (std::size_t p = 0; p < points; ++p)
        rows.push_back({m_list[p / dcl_grid.size()], dcl_grid[p % dcl_grid.size()],
                        detail::median({draws.begin() + static_cast<std::ptrdiff_t>(p * reps),
                                        draws.begin() + static_cast<std::ptrdiff_t>((p + 1) * reps)})});
    return rows;
}

/// Plain and post-distorted BER on the same received frames.
inline std::vector<PostDistRow> sweep_postdistortion(std::span<const double> m_grid,
                                                     const link::LinkConfig& base,
                                                     const device::ModuleSpec& spec,
                                                     const compensation::PostDistortionConfig& pd,
                                                     const SweepOptions& opt = {}) {
    detail::check_grid(m_grid, "modulation index");
    if (opt.repetitions < 1) throw ValidationError("repetitions must be >= 1");
    pd.validate();

    const auto reps = static_cast<std::size_t>(opt.repetitions);
    std::vector<std::array<double, 2>> draws(m_grid.size() * reps);
    parallel_for(draws.size(), opt.jobs, [&](std::size_t task) {
        auto cfg = base;
        cfg.mod_index = m_grid[task / reps];
        cfg.seed = rng::point_seed(base.seed, cfg.tx_dc_lux, cfg.mod_index, task % reps);
        auto engine = rng::make_engine(cfg.seed, rng::Stream::payload);
        const auto bits = link::random_bits(opt.payload_bits, engine);
        const auto frame = link::transmit(cfg, spec, bits);
        const auto compensated = compensation::post_distort(frame.v_ac, spec, pd);
        draws[task] = {link::score(frame, frame.v_ac, cfg, bits).ber,
                       link::score(frame, compensated, cfg, bits).ber};
    });

    std::vector<PostDistRow> rows;
    for (std::size_t i = 0; i < m_grid.size(); ++i) {
        std::vector<double> plain, comp;
        for (std::size_t r = 0; r < reps; ++r) {
            plain.push_back(draws[i * reps + r][0]);
            comp.push_back(draws[i * reps + r][1]);
        }
        rows.push_back({m_grid[i], detail::median(std::move(plain)), detail::median(std::move(comp))});
    }
    return rows;
}

// --- Eye diagrams -----------------------------------------------------------

/// Consecutive two-symbol-wide traces, one row each.
inline std::vector<std::vector<double>> export_eye(std::span<const double> v, int samples_per_symbol,
                                                   std::size_t traces) {
    if (samples_per_symbol < 1) throw InputError("samples_per_symbol must be >= 1");
    const auto width = 2 * static_cast<std::size_t>(samples_per_symbol);
    if (v.size() < traces * width) throw InputError("waveform too short for requested eye traces");
    std::vector<std::vector<double>> rows(traces);
    for (std::size_t t = 0; t < traces; ++t)
        rows[t].assign(v.begin() + static_cast<std::ptrdiff_t>(t * width),
                       v.begin() + static_cast<std::ptrdiff_t>((t + 1) * width));
    return rows;
}

/// Vertical openings of the three PAM4 eyes (bottom, middle, top), measured
/// on the decision statistic: min of the upper level minus max of the lower.
inline std::array<double, 3> eye_openings(std::span<const double> v, int samples_per_symbol,
                                          std::span<const double> symbols) {
    const auto stats = link::decision_statistics(v, samples_per_symbol);
    if (stats.size() != symbols.size()) throw InputError("symbol count does not match waveform");
    std::array<double, 4> lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const auto l = static_cast<std::size_t>(link::level_index(symbols[i]));
        lo[l] = std::min(lo[l], stats[i]);
        hi[l] = std::max(hi[l], stats[i]);
    }
    return {lo[1] - hi[0], lo[2] - hi[1], lo[3] - hi[2]};
}

// --- CSV ----------------------------------------------------------------------

namespace detail {

struct PrecisionGuard {
    explicit PrecisionGuard(std::ostream& o) : out(o), old(o.precision(17)) {}
    ~PrecisionGuard() { out.precision(old); }
    std::ostream& out;
    std::streamsize old;
};

}  // namespace detail

inline void write_csv(std::ostream& out, std::span<const ResponseRow> rows) {
    detail::PrecisionGuard g(out);
    out << "lux,cells,volts\n";
    for (const auto& r : rows) out << r.lux << ',' << r.cells << ',' << r.volts << '\n';
}

inline void write_csv(std::ostream& out, std::span<const DerivativeRow> rows) {
    detail::PrecisionGuard g(out);
    out << "lux,cells,dv,d2v\n";
    for (const auto& r : rows) out << r.lux << ',' << r.cells << ',' << r.dv << ',' << r.d2v << '\n';
}

inline void write_csv(std::ostream& out, std::span<const BerVsMRow> rows) {
    detail::PrecisionGuard g(out);
    out << "tx_dc_lux,mod_index,ber,pass_fec\n";
    for (const auto& r : rows)
        out << r.tx_dc_lux << ',' << r.mod_index << ',' << r.ber << ',' << (r.pass_fec ? 1 : 0) << '\n';
}

inline void write_csv(std::ostream& out, std::span<const BerVsDclRow> rows) {
    detail::PrecisionGuard g(out);
    out << "mod_index,dcl_lux,ber\n";
    for (const auto& r : rows) out << r.mod_index << ',' << r.dcl_lux << ',' << r.ber << '\n';
}

inline void write_csv(std::ostream& out, std::span<const PostDistRow> rows) {
    detail::PrecisionGuard g(out);
    out << "mod_index,ber_plain,ber_compensated\n";
    for (const auto& r : rows) out << r.mod_index << ',' << r.ber_plain << ',' << r.ber_compensated << '\n';
}

/// Eye matrix: header `trace,s0,s1,...`, one row per trace.
inline void write_eye_csv(std::ostream& out, const std::vector<std::vector<double>>& traces) {
    detail::PrecisionGuard g(out);
    out << "trace";
    const std::size_t width = traces.empty() ? 0 : traces.front().size();
    for (std::size_t k = 0; k < width; ++k) out << ",s" << k;
    out << '\n';
    for (std::size_t t = 0; t < traces.size(); ++t) {
        out << t;
        for (double x : traces[t]) out << ',' << x;
        out << '\n';
    }
}

}  // namespace pvlc::experiments

#endif
