#include "omcav/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "json_util.hpp"
#include "omcav/constants.hpp"
#include "omcav/electrotune.hpp"
#include "omcav/errors.hpp"
#include "omcav/fitkit.hpp"
#include "omcav/io.hpp"
#include "omcav/netfoster.hpp"
#include "omcav/omresponse.hpp"
#include "omcav/plot.hpp"

namespace omcav::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::dump_json;
using detail::load_json;
using detail::optional_number;
using detail::optional_string;
using detail::require_key;
using detail::require_number;
using detail::require_string;

namespace {

// --- logging (OMCAVITY_LOG = quiet|info|debug) ------------------------------

int log_level() {
    const char* v = std::getenv("OMCAVITY_LOG");
    if (!v) return 0;
    const std::string s(v);
    if (s == "debug") return 2;
    if (s == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[omcavity] " << msg << '\n';
}

// --- output directory ownership ----------------------------------------------

// A single process owns the output directory while writing into it.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".omcavity.lock") {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            if (errno == EEXIST)
                throw InputError("output directory is locked: " + path_.string() +
                                 " exists (remove it if stale)");
            throw InputError("cannot create lockfile " + path_.string());
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const ssize_t n = ::write(fd, pid.c_str(), pid.size());
        ::close(fd);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path path_;
};

// --- config plumbing ---------------------------------------------------------

struct Run {
    json config;
    fs::path config_dir;
    fs::path out;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

Run open_run(const CommonOptions& options, const std::string& command) {
    Run run;
    run.config = load_json(options.config);
    run.config_dir = options.config.parent_path();
    if (!options.out_dir.empty()) {
        run.out = options.out_dir;
    } else if (auto dir = optional_string(run.config, "out_dir", command)) {
        run.out = resolve(run.config_dir, *dir);
    } else {
        throw InputError(command + ": no output directory (--out or config 'out_dir')");
    }
    fs::create_directories(run.out);
    return run;
}

bool glob_match(std::string_view pattern, std::string_view name) {
    if (pattern.empty()) return name.empty();
    if (pattern[0] == '*')
        return glob_match(pattern.substr(1), name) ||
               (!name.empty() && glob_match(pattern, name.substr(1)));
    if (name.empty()) return false;
    if (pattern[0] == '?' || pattern[0] == name[0])
        return glob_match(pattern.substr(1), name.substr(1));
    return false;
}

std::vector<fs::path> expand_trace_paths(const json& config, const fs::path& base,
                                         const std::string& context) {
    const json& entries = require_key(config, "traces", context);
    if (!entries.is_array() || entries.empty())
        throw ParseError(context + ": key 'traces' must be a non-empty array");
    std::vector<fs::path> paths;
    for (const auto& e : entries) {
        if (!e.is_string()) throw ParseError(context + ": 'traces' entries must be strings");
        const fs::path entry = resolve(base, e.get<std::string>());
        const std::string name = entry.filename().string();
        if (name.find('*') == std::string::npos && name.find('?') == std::string::npos) {
            if (!fs::exists(entry)) throw InputError(context + ": no such file " + entry.string());
            paths.push_back(entry);
            continue;
        }
        std::vector<fs::path> matched;
        if (fs::is_directory(entry.parent_path()))
            for (const auto& de : fs::directory_iterator(entry.parent_path()))
                if (de.is_regular_file() && glob_match(name, de.path().filename().string()))
                    matched.push_back(de.path());
        std::sort(matched.begin(), matched.end());
        if (matched.empty())
            throw InputError(context + ": pattern matches nothing: " + entry.string());
        paths.insert(paths.end(), matched.begin(), matched.end());
    }
    return paths;
}

int guard(const std::string& command, const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const InsufficientData& e) {
        std::cerr << command << ": " << e.what() << '\n';
        return kExitInsufficient;
    } catch (const ConvergenceError& e) {
        std::cerr << command << ": " << e.what() << '\n';
        return kExitNotConverged;
    } catch (const DomainError& e) {
        std::cerr << command << ": " << e.what() << '\n';
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << command << ": " << e.what() << '\n';
        return kExitInput;
    }
}

std::string indexed_name(const char* stem, size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03zu.csv", stem, i);
    return buf;
}

std::vector<double> linspace(double lo, double hi, int points) {
    std::vector<double> v(static_cast<size_t>(points));
    for (int i = 0; i < points; ++i)
        v[static_cast<size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// modes: equivalent-circuit extraction from a network description
// ---------------------------------------------------------------------------

namespace {

// Piecewise grid spanning every inter-pole interval of the network (plus
// the region below the first pole and an expansion above the last one),
// keeping a safe margin off each pole.
std::vector<double> auto_grid(const FosterNetwork& net, double c_m, int per_interval = 4001) {
    const auto poles = net.pole_freqs();
    const double margin = 1e-5;
    double c_total = net.shunt_c + c_m;
    for (const auto& br : net.branches) c_total += br.c_f;

    auto y_total = [&](double w) {
        double y = w * net.shunt_c + w * c_m;
        if (net.series_l) y -= 1.0 / (w * *net.series_l);
        for (const auto& br : net.branches) y += w * br.c_f / (1.0 - w * w * br.l_h * br.c_f);
        return y;
    };

    std::vector<std::pair<double, double>> segments;
    if (net.series_l && c_total > 0.0) {
        const double w_est = 1.0 / std::sqrt(*net.series_l * c_total);
        const double lo = (poles.empty() ? w_est : std::min(w_est, poles.front())) / 100.0;
        const double hi =
            poles.empty() ? 100.0 * w_est : std::min(100.0 * w_est, poles.front() * (1.0 - margin));
        if (hi > lo) segments.emplace_back(lo, hi);
    } else if (!poles.empty()) {
        segments.emplace_back(poles.front() / 10.0, poles.front() * (1.0 - margin));
    } else {
        // Plain capacitive network: no intrinsic scale, cover the usual
        // microwave range so the trace is still plottable.
        segments.emplace_back(kTwoPi * 1e6, kTwoPi * 100e9);
    }
    for (size_t k = 0; k < poles.size(); ++k) {
        const double lo = poles[k] * (1.0 + margin);
        double hi;
        if (k + 1 < poles.size()) {
            hi = poles[k + 1] * (1.0 - margin);
        } else {
            hi = poles[k] * 2.0;
            int doublings = 0;
            while (y_total(hi) <= 0.0 && doublings++ < 60) hi *= 2.0;
            hi *= 1.5;
        }
        if (hi > lo) segments.emplace_back(lo, hi);
    }

    std::vector<double> grid;
    grid.reserve(segments.size() * static_cast<size_t>(per_interval));
    for (const auto& [lo, hi] : segments) {
        const double step = (hi - lo) / (per_interval - 1);
        double prev_w = lo, prev_y = y_total(lo);
        for (int i = 0; i < per_interval; ++i) {
            const double w = lo + step * i;
            grid.push_back(w);
            // Densify around each upward crossing so the extracted slope is
            // grid-converged.
            const double y = y_total(w);
            if (i > 0 && prev_y < 0.0 && y >= 0.0) {
                const double win_lo = std::max(lo, prev_w - 2.0 * step);
                const double win_hi = std::min(hi, w + 2.0 * step);
                for (int j = 0; j < 2001; ++j)
                    grid.push_back(win_lo + (win_hi - win_lo) * j / 2000.0);
            }
            prev_w = w;
            prev_y = y;
        }
    }
    std::sort(grid.begin(), grid.end());
    std::vector<double> out;
    out.reserve(grid.size());
    for (double w : grid)
        if (out.empty() || w > out.back() * (1.0 + 1e-15)) out.push_back(w);
    return out;
}

}  // namespace

int run_modes(const CommonOptions& options) {
    return guard("modes", [&] {
        const Run run = open_run(options, "modes");
        DirLock lock(run.out);

        const auto net =
            read_network_json(resolve(run.config_dir, require_string(run.config, "network", "modes")));
        const double c_m = optional_number(run.config, "c_m_f", "modes").value_or(0.0);
        if (c_m < 0.0) throw ValidationError("modes: c_m_f must be >= 0");

        std::vector<double> grid;
        if (run.config.contains("grid") && !run.config.at("grid").is_null()) {
            const json& g = run.config.at("grid");
            const double f_lo = require_number(g, "f_min_hz", "modes.grid");
            const double f_hi = require_number(g, "f_max_hz", "modes.grid");
            const int points = static_cast<int>(require_number(g, "points", "modes.grid"));
            if (!(f_hi > f_lo) || points < 3)
                throw ValidationError("modes.grid: need f_max_hz > f_min_hz and points >= 3");
            grid = linspace(hz_to_rad(f_lo), hz_to_rad(f_hi), points);
        } else {
            grid = auto_grid(net, c_m);
        }

        const AdmittanceTrace env = synthesize_admittance(net, grid);
        const AdmittanceTrace total = total_admittance(env, c_m);
        const auto modes = find_modes(total);
        log_info("modes: found " + std::to_string(modes.size()) + " modes");

        json out;
        out["schema_version"] = kSchemaVersion;
        out["c_m_f"] = c_m;
        out["modes"] = json::array();
        for (const auto& m : modes) {
            json row;
            row["f0_ghz"] = rad_to_hz(m.omega0) / 1e9;
            row["z_ohm"] = m.impedance_z;
            row["c_mode_ff"] = m.c_p * 1e15;          // full mode capacitance, 1/(Z w0)
            row["c_p_ff"] = (m.c_p - c_m) * 1e15;     // environment share
            row["l_p_nh"] = m.l_p * 1e9;
            row["participation"] = c_m > 0.0 ? c_m / m.c_p : 0.0;
            out["modes"].push_back(row);
        }
        dump_json(run.out / "modes.json", out);

        write_admittance_csv(run.out / "admittance.csv", total);

        // Display copy is winsorized so pole-adjacent divergences do not
        // flatten the rest of the curve.
        auto make_series = [](const AdmittanceTrace& t, const std::string& label) {
            PlotSeries s;
            s.x_label = "freq_hz";
            s.y_label = "y_imag_siemens";
            s.label = label;
            s.x.reserve(t.freqs.size());
            s.y = t.y_imag;
            for (double w : t.freqs) s.x.push_back(rad_to_hz(w));
            std::vector<double> mags;
            for (double v : s.y) mags.push_back(std::abs(v));
            std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
            const double clip = 10.0 * std::max(mags[mags.size() / 2], 1e-300);
            for (double& v : s.y) v = std::clamp(v, -clip, clip);
            return s;
        };
        const PlotSeries series[] = {make_series(env, "environment"),
                                     make_series(total, "total")};
        write_series_svg(run.out / "admittance.svg", series, "Im[Y] vs frequency");
    });
}

// ---------------------------------------------------------------------------
// simulate: synthetic bare / two-tone sweeps with seeded noise
// ---------------------------------------------------------------------------

namespace {

std::vector<double> merge_grids(std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    std::vector<double> out;
    out.reserve(a.size());
    for (double v : a)
        if (out.empty() || v > out.back() * (1.0 + 1e-15)) out.push_back(v);
    return out;
}

struct NoiseSource {
    std::mt19937_64 rng;
    std::normal_distribution<double> gauss{0.0, 1.0};
    std::optional<double> snr_db;

    std::complex<double> perturb(std::complex<double> s, double full_scale) {
        if (!snr_db) return s;
        const double sigma = full_scale * std::pow(10.0, -*snr_db / 20.0) / std::sqrt(2.0);
        return s + std::complex<double>(sigma * gauss(rng), sigma * gauss(rng));
    }
};

Trace make_trace(const std::vector<double>& freqs_hz, const std::vector<std::complex<double>>& s21,
                 bool complex_out, NoiseSource& noise, double full_scale) {
    Trace t;
    t.freqs_hz = freqs_hz;
    t.mag.reserve(s21.size());
    if (complex_out) t.phase_rad.emplace();
    for (const auto& s : s21) {
        const std::complex<double> v = noise.perturb(s, full_scale);
        t.mag.push_back(std::abs(v));
        if (complex_out) t.phase_rad->push_back(std::arg(v));
    }
    return t;
}

}  // namespace

int run_simulate(const CommonOptions& options) {
    return guard("simulate", [&] {
        const Run run = open_run(options, "simulate");
        DirLock lock(run.out);

        const auto sys = read_omsystem_json(
            resolve(run.config_dir, require_string(run.config, "omsystem", "simulate")));
        const std::string kind = require_string(run.config, "kind", "simulate");
        if (kind != "bare" && kind != "omia")
            throw ParseError("simulate: 'kind' must be \"bare\" or \"omia\"");

        const json& sweep = require_key(run.config, "sweep", "simulate");
        const double span_hz = require_number(sweep, "span_hz", "simulate.sweep");
        const int points = static_cast<int>(require_number(sweep, "points", "simulate.sweep"));
        if (!(span_hz > 0.0) || points < 3)
            throw ValidationError("simulate.sweep: need span_hz > 0 and points >= 3");
        const double fine_factor =
            optional_number(sweep, "fine_span_factor", "simulate.sweep").value_or(30.0);
        const int fine_points = static_cast<int>(
            optional_number(sweep, "fine_points", "simulate.sweep").value_or(801.0));
        // The innermost zone must resolve the intrinsic gamma_m: outside a
        // core of that scale the lineshape only constrains the product
        // C * gamma_m, not the two separately.
        const double core_factor =
            optional_number(sweep, "core_span_factor", "simulate.sweep").value_or(20.0);
        const int core_points = static_cast<int>(
            optional_number(sweep, "core_points", "simulate.sweep").value_or(401.0));

        const bool complex_out = run.config.value("complex", false);

        NoiseSource noise;
        noise.snr_db = options.snr_db ? options.snr_db
                                      : optional_number(run.config, "snr_db", "simulate");
        const std::uint64_t seed =
            options.seed ? *options.seed
                         : static_cast<std::uint64_t>(
                               optional_number(run.config, "seed", "simulate").value_or(0.0));
        noise.rng.seed(seed);

        const CavityParams& cav = sys.cavity;
        const double f_c = rad_to_hz(cav.omega_c);
        const std::vector<double> coarse =
            linspace(f_c - span_hz / 2.0, f_c + span_hz / 2.0, points);

        auto common_meta = [&](Trace& t) {
            t.meta.extra["gen_seed"] = static_cast<double>(seed);
            if (noise.snr_db) t.meta.extra["gen_snr_db"] = *noise.snr_db;
            t.meta.extra["gen_omega_c_hz"] = f_c;
            t.meta.extra["gen_kappa_hz"] = rad_to_hz(cav.kappa());
            t.meta.extra["gen_amp_scale"] = cav.amp_scale;
        };

        if (kind == "bare") {
            std::vector<double> offsets;
            for (double f : coarse) offsets.push_back(hz_to_rad(f) - cav.omega_c);
            Trace t = make_trace(coarse, s21_bare(cav, offsets), complex_out, noise,
                                 cav.amp_scale);
            common_meta(t);
            write_trace_csv(run.out / indexed_name("trace", 0), t);
            log_info("simulate: wrote 1 bare trace");
            return;
        }

        // Two-tone: drive on the lower sideband of the first mechanical mode.
        const MechMode& mech1 = sys.mech.front();
        const double omega_d = cav.omega_c - mech1.omega_m;
        const double atten_db =
            optional_number(run.config, "atten_db", "simulate").value_or(0.0);

        struct Drive {
            std::optional<double> power_dbm;
            double n_d = 0.0;
        };
        std::vector<Drive> drives;
        const json& pump = require_key(run.config, "pump", "simulate");
        auto n_d_of_power = [&](double dbm) {
            PumpConfig pc;
            pc.omega_d = omega_d;
            pc.power_w = dbm_to_watt(dbm);
            pc.attenuation_db = atten_db;
            return photons_from_power(cav, pc);
        };
        if (pump.contains("powers_dbm")) {
            for (const auto& p : pump.at("powers_dbm"))
                drives.push_back({p.get<double>(), n_d_of_power(p.get<double>())});
        } else if (auto p = optional_number(pump, "power_dbm", "simulate.pump")) {
            drives.push_back({*p, n_d_of_power(*p)});
        } else if (auto nd = optional_number(pump, "n_d", "simulate.pump")) {
            drives.push_back({std::nullopt, *nd});
        } else {
            throw ParseError("simulate.pump: need one of powers_dbm / power_dbm / n_d");
        }

        for (size_t i = 0; i < drives.size(); ++i) {
            const Drive& drive = drives[i];
            std::vector<MechTerm> terms;
            for (const auto& mode : sys.mech) {
                if (mode.g0 <= 0.0) continue;
                terms.push_back({cooperativity(mode.g0, drive.n_d, cav.kappa(), mode.gamma_m),
                                 mode.gamma_m, mode.omega_m - mech1.omega_m});
            }
            if (terms.empty()) throw ValidationError("simulate: no mode has g0 > 0");

            const double feature_hz = rad_to_hz(mech1.gamma_m * (1.0 + terms.front().coop));
            const double gamma_hz = rad_to_hz(mech1.gamma_m);
            const std::vector<double> fine =
                linspace(f_c - fine_factor * feature_hz / 2.0,
                         f_c + fine_factor * feature_hz / 2.0, fine_points);
            const std::vector<double> core =
                linspace(f_c - core_factor * gamma_hz / 2.0,
                         f_c + core_factor * gamma_hz / 2.0, core_points);
            const std::vector<double> grid = merge_grids(merge_grids(coarse, fine), core);

            std::vector<double> offsets;
            offsets.reserve(grid.size());
            for (double f : grid) offsets.push_back(hz_to_rad(f) - cav.omega_c);

            const auto resp = s21_two_tone(cav, mech1, terms, offsets);
            if (!resp.sideband_resolved)
                std::cerr << "simulate: warning: omega_m <= kappa, model outside its regime\n";

            Trace t = make_trace(grid, resp.s21, complex_out, noise, cav.amp_scale);
            common_meta(t);
            if (drive.power_dbm) t.meta.pump_dbm = *drive.power_dbm;
            t.meta.atten_db = atten_db;
            t.meta.pump_hz = rad_to_hz(omega_d);
            t.meta.extra["gen_nd"] = drive.n_d;
            t.meta.extra["gen_coop"] = terms.front().coop;
            t.meta.extra["gen_g0_hz"] = rad_to_hz(mech1.g0);
            t.meta.extra["gen_gamma_m_hz"] = rad_to_hz(mech1.gamma_m);
            t.meta.extra["gen_omega_m_hz"] = rad_to_hz(mech1.omega_m);
            write_trace_csv(run.out / indexed_name("trace", i), t);
        }
        log_info("simulate: wrote " + std::to_string(drives.size()) + " two-tone traces");
    });
}

// ---------------------------------------------------------------------------
// fit: bare | omia | batch
// ---------------------------------------------------------------------------

namespace {

CavityParams cavity_from_config(const json& cav, const std::string& context) {
    CavityParams out;
    out.omega_c = hz_to_rad(require_number(cav, "omega_c_hz", context));
    out.amp_scale = require_number(cav, "amp_scale", context);
    if (cav.contains("kappa_hz")) {
        // Shorthand: only the total linewidth matters for a fixed-cavity fit.
        const double kappa = hz_to_rad(require_number(cav, "kappa_hz", context));
        out.kappa_int = kappa / 2.0;
        out.kappa_in = kappa / 4.0;
        out.kappa_out = kappa / 4.0;
    } else {
        out.kappa_int = hz_to_rad(require_number(cav, "kappa_int_hz", context));
        out.kappa_in = hz_to_rad(require_number(cav, "kappa_in_hz", context));
        out.kappa_out = hz_to_rad(require_number(cav, "kappa_out_hz", context));
    }
    out.validate();
    return out;
}

std::optional<std::pair<double, double>> window_from_config(const json& config,
                                                            const std::string& context) {
    if (!config.contains("window_hz") || config.at("window_hz").is_null()) return std::nullopt;
    const json& w = config.at("window_hz");
    if (!w.is_array() || w.size() != 2)
        throw ParseError(context + ": 'window_hz' must be [lo, hi]");
    return std::make_pair(w.at(0).get<double>(), w.at(1).get<double>());
}

PlotSeries residual_series(const Trace& trace, const std::vector<double>& model_mag) {
    PlotSeries s;
    s.x = trace.freqs_hz;
    s.x_label = "freq_hz";
    s.y_label = "residual_mag";
    s.label = "data - model";
    s.y.resize(trace.mag.size());
    for (size_t i = 0; i < trace.mag.size(); ++i) s.y[i] = trace.mag[i] - model_mag[i];
    return s;
}

}  // namespace

int run_fit(const CommonOptions& options) {
    return guard("fit", [&] {
        const Run run = open_run(options, "fit");
        DirLock lock(run.out);

        const std::string mode = require_string(run.config, "mode", "fit");
        const auto paths = expand_trace_paths(run.config, run.config_dir, "fit");
        log_info("fit: mode=" + mode + ", " + std::to_string(paths.size()) + " trace(s)");

        if (mode == "bare") {
            if (paths.size() != 1) throw InputError("fit: bare mode expects exactly one trace");
            const Trace trace = read_trace_csv(paths[0]);
            const FitReport report = fit_bare_cavity(trace);
            write_fit_report_json(run.out / "fitreport.json", report);

            const double wc = hz_to_rad(report.params.at("omega_c_hz"));
            const double kappa = hz_to_rad(report.params.at("kappa_hz"));
            const double amp = report.params.at("amp_scale");
            std::vector<double> model(trace.freqs_hz.size());
            for (size_t i = 0; i < model.size(); ++i) {
                const double delta = hz_to_rad(trace.freqs_hz[i]) - wc;
                model[i] = amp / std::hypot(1.0, delta / (kappa / 2.0));
            }
            const PlotSeries resid = residual_series(trace, model);
            write_series_csv(run.out / "residual.csv", resid);
            write_series_svg(run.out / "residual.svg", {&resid, 1}, "bare-cavity fit residual");
            return;
        }

        if (mode == "omia") {
            if (paths.size() != 1) throw InputError("fit: omia mode expects exactly one trace");
            const Trace trace = read_trace_csv(paths[0]);
            const CavityParams cav =
                cavity_from_config(require_key(run.config, "cavity", "fit"), "fit.cavity");
            const FitReport report = fit_omia(trace, cav, window_from_config(run.config, "fit"));
            write_fit_report_json(run.out / "fitreport.json", report);

            const double omega_d = hz_to_rad(*trace.meta.pump_hz);
            const double wm = hz_to_rad(report.params.at("omega_m_hz"));
            const double gm = hz_to_rad(report.params.at("gamma_m_hz"));
            const double coop = report.params.at("coop");
            std::vector<double> model(trace.freqs_hz.size());
            for (size_t i = 0; i < model.size(); ++i) {
                const double w = hz_to_rad(trace.freqs_hz[i]);
                const std::complex<double> denom =
                    std::complex<double>(1.0, -(w - cav.omega_c) / (cav.kappa() / 2.0)) +
                    coop / std::complex<double>(1.0, -(w - omega_d - wm) / (gm / 2.0));
                model[i] = std::abs(cav.amp_scale / denom);
            }
            const PlotSeries resid = residual_series(trace, model);
            write_series_csv(run.out / "residual.csv", resid);
            write_series_svg(run.out / "residual.svg", {&resid, 1}, "two-tone fit residual");
            return;
        }

        if (mode != "batch") throw ParseError("fit: 'mode' must be bare, omia or batch");

        std::vector<Trace> traces;
        traces.reserve(paths.size());
        std::vector<std::string> names;
        for (const auto& p : paths) {
            names.push_back(p.filename().string());
            traces.push_back(read_trace_csv(p));
        }

        BatchOptions bopt;
        bopt.kappa_in_hz = require_number(run.config, "kappa_in_hz", "fit");
        bopt.kappa_out_hz = optional_number(run.config, "kappa_out_hz", "fit").value_or(0.0);
        bopt.atten_db = optional_number(run.config, "atten_db", "fit").value_or(0.0);
        bopt.linear_max_nd = options.linear_max_nd
                                 ? options.linear_max_nd
                                 : optional_number(run.config, "linear_max_nd", "fit");
        bopt.window_hz = window_from_config(run.config, "fit");

        const BatchResult result = batch_extract(traces, bopt);

        write_fit_report_json(run.out / "report_cavity.json", result.cavity);
        for (size_t i = 0; i < result.traces.size(); ++i)
            if (result.traces[i].ok) {
                char buf[48];
                std::snprintf(buf, sizeof(buf), "report_trace_%03zu.json", i);
                write_fit_report_json(run.out / buf, result.traces[i].omia);
            }
        write_coop_points_csv(run.out / "coop_points.csv", result.points);

        json summary;
        summary["schema_version"] = kSchemaVersion;
        summary["traces"] = json::array();
        for (size_t i = 0; i < result.traces.size(); ++i) {
            const auto& tr = result.traces[i];
            json row;
            row["file"] = names[i];
            row["ok"] = tr.ok;
            if (!tr.ok) row["error"] = tr.error;
            if (tr.ok) {
                row["n_d"] = tr.n_d;
                row["coop"] = tr.omia.params.at("coop");
            }
            summary["traces"].push_back(row);
        }
        summary["warnings"] = result.warnings;
        if (result.g0) {
            summary["g0_hz"] = result.g0->params.at("g0_hz");
            summary["g0_sigma_hz"] = result.g0->sigmas.at("g0_hz");
        } else {
            summary["g0_error"] = result.g0_error;
        }
        dump_json(run.out / "batch.json", summary);

        if (!result.points.empty()) {
            PlotSeries data;
            data.kind = PlotSeries::Kind::scatter;
            data.x_label = "n_d";
            data.y_label = "coop";
            data.label = "extracted";
            for (const auto& p : result.points) {
                data.x.push_back(p.n_d);
                data.y.push_back(p.coop);
            }
            std::vector<PlotSeries> series{data};
            if (result.g0) {
                PlotSeries line;
                line.x_label = "n_d";
                line.y_label = "coop";
                line.label = "linear fit";
                const double slope = result.g0->params.at("slope_per_photon");
                line.x = {0.0, result.points.back().n_d};
                line.y = {0.0, slope * result.points.back().n_d};
                series.push_back(line);
            }
            write_series_svg(run.out / "coop.svg", series, "cooperativity vs pump photons");
        }

        if (result.g0) {
            write_fit_report_json(run.out / "fitreport.json", *result.g0);
            for (const auto& warning : result.warnings)
                std::cerr << "fit: warning: " << warning << '\n';
            return;
        }
        switch (result.g0_fail) {
            case FailKind::insufficient:
                throw TooFewPoints(result.g0_error);
            case FailKind::convergence:
                throw NotConverged(result.g0_error);
            case FailKind::domain:
                throw DomainError(result.g0_error);
            default:
                throw InputError(result.g0_error);
        }
    });
}

// ---------------------------------------------------------------------------
// tune: DC-bias forward model or parabola fit
// ---------------------------------------------------------------------------

namespace {

TuneModel tune_model_from_config(const json& m, const std::string& context) {
    const double omega_m0 = hz_to_rad(require_number(m, "f0_hz", context));
    const double d2c = require_number(m, "d2c_dx2_f_per_m2", context);
    const auto mass = optional_number(m, "mass_eff_kg", context);
    const auto spring = optional_number(m, "spring_k_n_per_m", context);
    if (!mass && !spring)
        throw ParseError(context + ": need mass_eff_kg or spring_k_n_per_m");
    const double mass_eff = mass ? *mass : *spring / (omega_m0 * omega_m0);
    TuneModel model = TuneModel::from_mass(mass_eff, omega_m0, d2c);
    if (mass && spring) {
        model.spring_k = *spring;  // both given: must agree
        model.validate();
    }
    return model;
}

}  // namespace

int run_tune(const CommonOptions& options) {
    return guard("tune", [&] {
        const Run run = open_run(options, "tune");
        DirLock lock(run.out);

        json report;
        report["schema_version"] = kSchemaVersion;
        std::vector<PlotSeries> series;

        if (auto sweep_path = optional_string(run.config, "vsweep", "tune")) {
            // Fit mode.
            const VSweep sweep = read_vsweep_csv(resolve(run.config_dir, *sweep_path));
            const ParabolaFit fit = fit_parabola(sweep);

            std::optional<double> spring_k =
                optional_number(run.config, "spring_k_n_per_m", "tune");
            if (!spring_k && run.config.contains("model"))
                spring_k = tune_model_from_config(run.config.at("model"), "tune.model").spring_k;

            report["f0_hz"] = rad_to_hz(fit.omega_m0);
            report["curvature_hz_per_v2"] = rad_to_hz(fit.curvature);
            if (spring_k)
                report["c_dprime_f_per_m2"] = infer_d2c_dx2(fit, *spring_k);
            else
                report["c_dprime_f_per_m2"] = nullptr;
            if (fit.positive_curvature) {
                report["positive_curvature"] = true;
                std::cerr << "tune: warning: positive curvature (stress stiffening is not"
                             " part of the softening model)\n";
            }

            PlotSeries data;
            data.kind = PlotSeries::Kind::scatter;
            data.x_label = "vdc_v";
            data.y_label = "freq_hz";
            data.label = "data";
            data.x = sweep.volts;
            for (double w : sweep.freqs) data.y.push_back(rad_to_hz(w));
            series.push_back(data);

            PlotSeries curve;
            curve.x_label = "vdc_v";
            curve.y_label = "freq_hz";
            curve.label = "parabola fit";
            const auto [vmin_it, vmax_it] =
                std::minmax_element(sweep.volts.begin(), sweep.volts.end());
            curve.x = linspace(*vmin_it, *vmax_it, 201);
            for (double v : curve.x)
                curve.y.push_back(rad_to_hz(fit.omega_m0 + fit.curvature * v * v));
            series.push_back(curve);
        } else {
            // Forward mode.
            const TuneModel model =
                tune_model_from_config(require_key(run.config, "model", "tune"), "tune.model");

            std::vector<double> volts;
            const json& vspec = require_key(run.config, "volts", "tune");
            if (vspec.is_array()) {
                for (const auto& v : vspec) volts.push_back(v.get<double>());
            } else {
                volts = linspace(require_number(vspec, "v_min", "tune.volts"),
                                 require_number(vspec, "v_max", "tune.volts"),
                                 static_cast<int>(require_number(vspec, "points", "tune.volts")));
            }
            if (volts.size() < 3) throw TooFewPoints("tune: need at least 3 bias points");

            VSweep sweep;
            sweep.volts = volts;
            for (double v : volts) sweep.freqs.push_back(softened_frequency(model, v));
            write_vsweep_csv(run.out / "vsweep.csv", sweep);

            report["f0_hz"] = rad_to_hz(model.omega_m0);
            report["curvature_hz_per_v2"] =
                rad_to_hz(-model.omega_m0 * model.d2c_dx2 / (4.0 * model.spring_k));
            report["c_dprime_f_per_m2"] = model.d2c_dx2;

            PlotSeries curve;
            curve.x_label = "vdc_v";
            curve.y_label = "freq_hz";
            curve.label = "softened frequency";
            curve.x = sweep.volts;
            for (double w : sweep.freqs) curve.y.push_back(rad_to_hz(w));
            series.push_back(curve);
        }

        dump_json(run.out / "tunereport.json", report);
        for (const auto& s : series)
            write_series_csv(run.out / ("tune_" + s.label.substr(0, s.label.find(' ')) + ".csv"), s);
        write_series_svg(run.out / "tune.svg", series, "drum frequency vs DC bias");
    });
}

}  // namespace omcav::cli
