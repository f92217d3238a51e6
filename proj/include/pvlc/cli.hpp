#ifndef PVLC_CLI_HPP
#define PVLC_CLI_HPP

#include "calibration.hpp"
#include "compensation.hpp"
#include "constants.hpp"
#include "device_model.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "link_sim.hpp"
#include "presets.hpp"
#include "rng.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

/// Command-line front end: `fit`, `simulate` and `sweep`.
///
/// Every option can also come from a JSON config file (`--config`) whose keys
/// are the long option names without dashes, e.g. {"seed": 7, "m-grid": [0.1,
/// 0.2]}. Command-line values win over config values. Exit codes: 0 success,
/// 1 computation failure, 2 usage or validation error.
namespace pvlc::cli {

namespace fs = std::filesystem;

inline constexpr std::array<std::string_view, 6> sweep_kinds{"response", "derivatives", "ber_vs_m",
                                                             "ber_vs_dcl", "postdist", "eye"};

/// Link flags; unset fields keep the base configuration's value.
struct LinkOverrides {
    std::optional<double> bit_rate, mod_index, tx_dc_lux, dcl_lux, ambient_lux, thermal_sigma_v,
        noise_bandwidth_hz, lpf_cutoff_hz, optical_cutoff_hz, junction_capacitance_f;
    std::optional<int> samples_per_symbol, training_symbols;
    std::optional<bool> shot;

    link::LinkConfig apply(link::LinkConfig cfg) const {
        if (bit_rate) cfg.bit_rate = *bit_rate;
        if (mod_index) cfg.mod_index = *mod_index;
        if (tx_dc_lux) cfg.tx_dc_lux = *tx_dc_lux;
        if (dcl_lux) cfg.dcl_lux = *dcl_lux;
        if (ambient_lux) cfg.ambient_lux = *ambient_lux;
        if (thermal_sigma_v) cfg.thermal_sigma_v = *thermal_sigma_v;
        if (noise_bandwidth_hz) cfg.noise_bandwidth_hz = *noise_bandwidth_hz;
        if (lpf_cutoff_hz) cfg.lpf_cutoff_hz = *lpf_cutoff_hz;
        if (optical_cutoff_hz) cfg.optical_cutoff_hz = *optical_cutoff_hz;
        if (junction_capacitance_f) cfg.junction_capacitance_f = *junction_capacitance_f;
        if (samples_per_symbol) cfg.samples_per_symbol = *samples_per_symbol;
        if (training_symbols) cfg.training_symbols = *training_symbols;
        if (shot) cfg.shot_noise_enabled = *shot;
        return cfg;
    }
};

inline void add_link_options(CLI::App& app, LinkOverrides& o) {
    app.add_option("--bit-rate", o.bit_rate, "Bit rate [bit/s]");
    app.add_option("--sps", o.samples_per_symbol, "Samples per PAM4 symbol");
    app.add_option("--mod-index", o.mod_index, "Modulation index m in (0, 1]");
    app.add_option("--tx-dc", o.tx_dc_lux, "Transmitter DC illuminance at the receiver [lux]");
    app.add_option("--dcl", o.dcl_lux, "Local DC light illuminance [lux]");
    app.add_option("--ambient", o.ambient_lux, "Ambient illuminance [lux]");
    app.add_option("--thermal-sigma", o.thermal_sigma_v, "Thermal noise RMS [V]");
    app.add_flag("--shot,!--no-shot", o.shot, "Enable or disable shot noise");
    app.add_option("--noise-bandwidth", o.noise_bandwidth_hz, "Shot-noise bandwidth [Hz]");
    app.add_option("--lpf-cutoff", o.lpf_cutoff_hz, "Receiver voltage low-pass cutoff [Hz]");
    app.add_option("--optical-cutoff", o.optical_cutoff_hz, "LED optical low-pass cutoff [Hz]");
    app.add_option("--junction-capacitance", o.junction_capacitance_f, "Cell junction capacitance [F]");
    app.add_option("--training-symbols", o.training_symbols, "Training symbols per frame");
}

inline nlohmann::json to_json(const link::LinkConfig& c) {
    nlohmann::json j{{"bit_rate", c.bit_rate},
                     {"samples_per_symbol", c.samples_per_symbol},
                     {"mod_index", c.mod_index},
                     {"tx_dc_lux", c.tx_dc_lux},
                     {"dcl_lux", c.dcl_lux},
                     {"ambient_lux", c.ambient_lux},
                     {"thermal_sigma_v", c.thermal_sigma_v},
                     {"shot_noise_enabled", c.shot_noise_enabled},
                     {"noise_bandwidth_hz", c.noise_bandwidth_hz},
                     {"lpf_cutoff_hz", nullptr},
                     {"optical_cutoff_hz", nullptr},
                     {"junction_capacitance_f", c.junction_capacitance_f},
                     {"training_symbols", c.training_symbols},
                     {"seed", c.seed}};
    if (c.lpf_cutoff_hz) j["lpf_cutoff_hz"] = *c.lpf_cutoff_hz;
    if (c.optical_cutoff_hz) j["optical_cutoff_hz"] = *c.optical_cutoff_hz;
    return j;
}

inline nlohmann::json to_json(const link::BerReport& r) {
    return {{"bits_total", r.bits_total},
            {"bits_errored", r.bits_errored},
            {"ber", r.ber},
            {"pass_fec", r.pass_fec}};
}

namespace detail {

inline std::string config_value(const nlohmann::json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw ValidationError("config key '" + key + "' must be a number, string, boolean or array");
}

/// Feeds config-file values into options the command line left unset.
inline void merge_config(CLI::App& root, CLI::App& active, const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ValidationError("config must be a JSON object");

    for (const auto& [key, value] : doc.items()) {
        const auto owns = [&](CLI::App* app) {
            const auto* opt = app->get_option_no_throw("--" + key);
            return opt != nullptr && opt->get_single_name() == key;
        };
        if (key == "config") throw ValidationError("config files cannot include other configs");
        if (!owns(&active)) {
            bool known = false;
            for (auto* sub : root.get_subcommands({})) known = known || owns(sub);
            if (!known) throw ValidationError("unknown config key '" + key + "'");
            continue;
        }
        auto* opt = active.get_option("--" + key);
        if (opt->count() > 0) continue;
        if (value.is_array()) {
            for (const auto& item : value) opt->add_result(config_value(item, key));
        } else {
            opt->add_result(config_value(value, key));
        }
        try {
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw ValidationError("config key '" + key + "': " + e.what());
        }
    }
}

inline void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " not found: " + path);
}

inline void prepare_output_dir(const fs::path& dir) {
    fs::create_directories(dir);
    const auto probe = dir / ".pvlc_write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw InputError("output directory is not writable: " + dir.string());
    }
    fs::remove(probe);
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("write failed: " + path.string());
}

template <class Rows>
void write_rows(const fs::path& path, const Rows& rows) {
    std::ostringstream s;
    experiments::write_csv(s, std::span(rows));
    write_text(path, s.str());
}

inline std::string lux_tag(double lux) {
    std::ostringstream s;
    s << lux;
    return s.str();
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one command.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Photovoltaic visible-light link modelling toolkit", "pvlc"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default(false);

    std::string config_path;
    const auto add_config = [&](CLI::App& sub) {
        sub.add_option("--config", config_path, "JSON config file; flags override its values");
    };

    // fit
    auto& fit = *app.add_subcommand("fit", "Fit the cell model to a lux,volts CSV and write a model card");
    std::string samples_path, fit_out;
    int fit_cells = 1;
    double fit_temp = constants::default_temperature_k;
    double fit_eta = presets::default_module().params.eta;
    fit.add_option("samples", samples_path, "CSV with header lux,volts")->required();
    fit.add_option("--cells", fit_cells, "Series cells in the measured module");
    fit.add_option("--temp", fit_temp, "Cell temperature [K]");
    fit.add_option("--eta", fit_eta, "Photocurrent responsivity used to split a into I0 [A/lux]");
    fit.add_option("--out", fit_out, "Model card destination")->required();
    add_config(fit);

    // simulate
    auto& sim = *app.add_subcommand("simulate", "Run one PAM4 link and print its BER report as JSON");
    std::string model_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t sim_bits = 100'000;
    LinkOverrides sim_link;
    sim.add_option("--model", model_path, "Model card JSON (default: built-in single cell)");
    sim.add_option("--seed", seed, "Random seed");
    sim.add_option("--payload-bits", sim_bits, "Payload bits");
    sim.add_option("--out", out_dir, "Optional directory for report.json and run_manifest.json");
    add_link_options(sim, sim_link);
    add_config(sim);

    // sweep
    auto& sweep = *app.add_subcommand("sweep", "Run a parameter sweep and write CSV files");
    std::string kind;
    LinkOverrides sweep_link;
    std::optional<int> reps;
    std::size_t sweep_bits = 500'000;
    unsigned jobs = 1;
    std::vector<double> lux_grid, m_grid, tx_list, dcl_grid;
    std::vector<int> cells;
    std::optional<double> gain_cap, operating_lux;
    std::size_t traces = 200;
    sweep.add_option("kind", kind, "response | derivatives | ber_vs_m | ber_vs_dcl | postdist | eye")
        ->required();
    sweep.add_option("--model", model_path, "Model card JSON (default: built-in single cell)");
    sweep.add_option("--out", out_dir, "Output directory")->required();
    sweep.add_option("--seed", seed, "Base seed for randomized kinds");
    sweep.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sweep.add_option("--reps", reps, "Repetitions per point (median is reported)");
    sweep.add_option("--payload-bits", sweep_bits, "Payload bits per repetition");
    sweep.add_option("--lux-grid", lux_grid, "Illuminance grid for response/derivatives [lux]");
    sweep.add_option("--cells", cells, "Cell counts for response/derivatives");
    sweep.add_option("--m-grid", m_grid, "Modulation indices");
    sweep.add_option("--tx-list", tx_list, "Transmitter illuminances for ber_vs_m and eye [lux]");
    sweep.add_option("--dcl-grid", dcl_grid, "DCL illuminance grid [lux]");
    sweep.add_option("--gain-cap", gain_cap, "Post-distortion gain cap");
    sweep.add_option("--operating-lux", operating_lux, "Post-distortion operating illuminance [lux]");
    sweep.add_option("--traces", traces, "Eye traces to export");
    add_link_options(sweep, sweep_link);
    add_config(sweep);

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    CLI::App& active = *app.get_subcommands().front();
    try {
        if (!config_path.empty()) {
            detail::require_file(config_path, "config");
            detail::merge_config(app, active, config_path);
        }

        nlohmann::json manifest{{"command", active.get_name()}};
        if (!config_path.empty()) manifest["config"] = config_path;

        if (&active == &fit) {
            detail::require_file(samples_path, "samples file");
            const auto dest = fs::path(fit_out);
            if (dest.has_parent_path()) detail::prepare_output_dir(dest.parent_path());
            const auto samples = calibration::load_samples(fs::path(samples_path));
            const auto result = calibration::fit_response(samples, fit_cells, fit_temp);
            device::ModuleSpec spec{fit_cells, {result.n_hat, calibration::to_i0(result, fit_eta), fit_eta, fit_temp}};
            calibration::save_model_card(spec, result, dest);
            manifest["samples"] = samples_path;
            manifest["cells"] = fit_cells;
            manifest["temperature"] = fit_temp;
            manifest["eta"] = fit_eta;
            manifest["out"] = fit_out;
            detail::write_text(dest.parent_path() / "run_manifest.json", manifest.dump(2) + "\n");
            for (const auto& w : result.warnings) err << "warning: " << w << '\n';
            out << nlohmann::json{{"n", result.n_hat},
                                  {"a", result.a_hat},
                                  {"rmse", result.rmse},
                                  {"iterations", result.iterations},
                                  {"converged", result.converged}}
                       .dump()
                << '\n';
            if (!result.converged) {
                err << "error: fit did not converge within " << calibration::FitOptions{}.max_iterations
                    << " iterations\n";
                return 1;
            }
            return 0;
        }

        if (!model_path.empty()) detail::require_file(model_path, "model card");
        const auto spec = model_path.empty() ? presets::default_module()
                                             : calibration::load_model_card(model_path);
        manifest["model"] = model_path.empty() ? nlohmann::json("builtin") : nlohmann::json(model_path);

        if (&active == &sim) {
            if (!seed) throw ValidationError("simulate requires --seed (or \"seed\" in the config)");
            auto cfg = sim_link.apply(link::LinkConfig{});
            cfg.seed = *seed;
            cfg.validate();
            if (!out_dir.empty()) detail::prepare_output_dir(out_dir);
            auto engine = rng::make_engine(cfg.seed, rng::Stream::payload);
            const auto bits = link::random_bits(sim_bits, engine);
            const auto report = link::run_link(cfg, spec, bits);
            const auto line = to_json(report).dump();
            out << line << '\n';
            if (!out_dir.empty()) {
                manifest["link"] = to_json(cfg);
                manifest["payload_bits"] = sim_bits;
                detail::write_text(fs::path(out_dir) / "report.json", line + "\n");
                detail::write_text(fs::path(out_dir) / "run_manifest.json", manifest.dump(2) + "\n");
            }
            return 0;
        }

        // sweep
        if (std::find(sweep_kinds.begin(), sweep_kinds.end(), kind) == sweep_kinds.end()) {
            std::string valid;
            for (auto k : sweep_kinds) valid += (valid.empty() ? "" : ", ") + std::string(k);
            throw ValidationError("unknown sweep kind '" + kind + "'; valid kinds: " + valid);
        }
        const bool randomized = kind == "ber_vs_m" || kind == "ber_vs_dcl" || kind == "postdist";
        if (randomized && !seed)
            throw ValidationError("sweep " + kind + " requires --seed (or \"seed\" in the config)");
        detail::prepare_output_dir(out_dir);
        const fs::path dir(out_dir);
        experiments::SweepOptions opt{reps.value_or(kind == "postdist" ? 20 : 5), sweep_bits, jobs};
        manifest["kind"] = kind;
        manifest["jobs"] = jobs;
        const auto or_default = [](std::vector<double> v, std::vector<double> d) { return v.empty() ? d : v; };
        const auto with_seed = [&](link::LinkConfig cfg) {
            cfg = sweep_link.apply(cfg);
            if (seed) cfg.seed = *seed;
            cfg.validate();
            manifest["link"] = to_json(cfg);
            return cfg;
        };

        if (kind == "response" || kind == "derivatives") {
            const auto grid = or_default(lux_grid, presets::response_lux_grid());
            const auto ns = cells.empty() ? presets::response_cells() : cells;
            manifest["lux_grid"] = grid;
            manifest["cells"] = ns;
            if (kind == "response")
                detail::write_rows(dir / "response.csv", experiments::sweep_response(grid, ns, spec.params));
            else
                detail::write_rows(dir / "derivatives.csv", experiments::sweep_derivatives(grid, ns, spec.params));
        } else if (kind == "ber_vs_m") {
            const auto cfg = with_seed(presets::ber_vs_m_link());
            const auto ms = or_default(m_grid, presets::ber_vs_m_grid());
            const auto txs = or_default(tx_list, presets::ber_vs_m_lux());
            manifest["m_grid"] = ms;
            manifest["tx_list"] = txs;
            detail::write_rows(dir / "ber_vs_m.csv", experiments::sweep_ber_vs_m(ms, txs, cfg, spec, opt));
        } else if (kind == "ber_vs_dcl") {
            const auto cfg = with_seed(presets::ber_vs_dcl_link());
            const auto grid = or_default(dcl_grid, presets::dcl_grid());
            const auto ms = or_default(m_grid, presets::dcl_mod_indices());
            manifest["dcl_grid"] = grid;
            manifest["m_grid"] = ms;
            detail::write_rows(dir / "ber_vs_dcl.csv", experiments::sweep_ber_vs_dcl(grid, ms, cfg, spec, opt));
        } else if (kind == "postdist") {
            const auto cfg = with_seed(presets::postdist_link());
            const auto ms = or_default(m_grid, presets::postdist_mod_indices());
            auto pd = presets::postdist_config();
            if (gain_cap) pd.gain_cap = *gain_cap;
            if (operating_lux) pd.operating_lux = *operating_lux;
            manifest["m_grid"] = ms;
            manifest["gain_cap"] = pd.gain_cap;
            manifest["operating_lux"] = pd.operating_lux;
            detail::write_rows(dir / "postdist.csv",
                               experiments::sweep_postdistortion(ms, cfg, spec, pd, opt));
        } else {
            const auto txs = or_default(tx_list, {250.0, 1250.0});
            manifest["tx_list"] = txs;
            manifest["traces"] = traces;
            nlohmann::json links = nlohmann::json::array();
            for (double tx : txs) {
                auto cfg = sweep_link.apply(presets::eye_link(tx));
                if (seed) cfg.seed = *seed;
                cfg.validate();
                links.push_back(to_json(cfg));
                const std::size_t symbols = traces * 2;
                auto engine = rng::make_engine(cfg.seed, rng::Stream::payload);
                const auto bits = link::random_bits(2 * symbols, engine);
                const auto frame = link::transmit(cfg, spec, bits);
                const std::span<const double> payload(frame.v_ac.begin() + static_cast<std::ptrdiff_t>(
                                                          frame.training.size() * cfg.samples_per_symbol),
                                                      frame.v_ac.end());
                std::ostringstream s;
                experiments::write_eye_csv(s, experiments::export_eye(payload, cfg.samples_per_symbol, traces));
                detail::write_text(dir / ("eye_" + detail::lux_tag(tx) + ".csv"), s.str());
            }
            manifest["link"] = links;
        }
        if (randomized) {
            manifest["repetitions"] = opt.repetitions;
            manifest["payload_bits"] = opt.payload_bits;
        }
        detail::write_text(dir / "run_manifest.json", manifest.dump(2) + "\n");
        return 0;
    } catch (const UnidentifiableError& e) {
        err << "error: unidentifiable: " << e.what() << '\n';
        return 1;
    } catch (const ComputationError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace pvlc::cli

#endif
