#include "omcav/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "json_util.hpp"
#include "omcav/constants.hpp"
#include "omcav/errors.hpp"

namespace omcav {

using nlohmann::json;
using detail::dump_json;
using detail::load_json;
using detail::optional_number;
using detail::require_key;
using detail::require_number;

void OmSystem::validate() const {
    cavity.validate();
    if (mech.empty()) throw ValidationError("omsystem: at least one mechanical mode required");
    for (const auto& m : mech) m.validate();
    if (geometry) geometry->validate();
}

std::string format_double(double value) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) return "0";
    return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

namespace {

double parse_number(std::string_view text, const std::string& context) {
    // Trim surrounding whitespace; from_chars is strict about it.
    size_t b = text.find_first_not_of(" \t\r");
    size_t e = text.find_last_not_of(" \t\r");
    if (b == std::string_view::npos)
        throw ParseError(context + ": empty numeric field");
    text = text.substr(b, e - b + 1);
    double value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError(context + ": cannot parse '" + std::string(text) + "' as a number");
    return value;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

std::string strip(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct CsvFile {
    std::vector<std::pair<std::string, std::string>> meta;  // key=value comment lines
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvFile read_csv(const std::filesystem::path& path, size_t min_columns) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    CsvFile out;
    const std::string context = path.filename().string();
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        line = strip(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                std::string key = strip(line.substr(1, eq - 1));
                std::string value = strip(line.substr(eq + 1));
                if (!key.empty()) out.meta.emplace_back(key, value);
            }
            continue;
        }
        if (!have_header) {
            for (auto& f : split_csv(line)) out.header.push_back(strip(f));
            if (out.header.size() < min_columns)
                throw ParseError(context + ": expected at least " +
                                 std::to_string(min_columns) + " columns in header");
            have_header = true;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != out.header.size())
            throw ParseError(context + ": row with " + std::to_string(fields.size()) +
                             " fields, header has " + std::to_string(out.header.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(parse_number(f, context));
        out.rows.push_back(std::move(row));
    }
    if (!have_header) throw ParseError(context + ": no header line");
    return out;
}

void expect_header(const CsvFile& csv, const std::vector<std::string>& expected,
                   const std::string& context) {
    if (csv.header.size() < expected.size())
        throw ParseError(context + ": header mismatch");
    for (size_t i = 0; i < expected.size(); ++i)
        if (csv.header[i] != expected[i])
            throw ParseError(context + ": expected column '" + expected[i] + "', found '" +
                             csv.header[i] + "'");
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Admittance traces
// ---------------------------------------------------------------------------

AdmittanceTrace read_admittance_csv(const std::filesystem::path& path) {
    const auto csv = read_csv(path, 2);
    expect_header(csv, {"freq_hz", "y_imag_siemens"}, path.filename().string());
    AdmittanceTrace trace;
    for (const auto& row : csv.rows) {
        trace.freqs.push_back(hz_to_rad(row[0]));
        trace.y_imag.push_back(row[1]);
    }
    trace.validate();  // rejects non-finite and unordered input
    return trace;
}

void write_admittance_csv(const std::filesystem::path& path, const AdmittanceTrace& trace) {
    trace.validate();
    auto out = open_out(path);
    out << "freq_hz,y_imag_siemens\n";
    for (size_t i = 0; i < trace.freqs.size(); ++i)
        out << format_double(rad_to_hz(trace.freqs[i])) << ','
            << format_double(trace.y_imag[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Network descriptions
// ---------------------------------------------------------------------------

FosterNetwork read_network_json(const std::filesystem::path& path) {
    const json j = load_json(path);
    const std::string ctx = path.filename().string();
    FosterNetwork net;
    if (auto c = optional_number(j, "shunt_c_f", ctx)) net.shunt_c = *c;
    if (auto l = optional_number(j, "series_l_h", ctx)) net.series_l = *l;
    if (j.contains("branches") && !j.at("branches").is_null()) {
        const json& branches = j.at("branches");
        if (!branches.is_array()) throw ParseError(ctx + ": key 'branches' is not an array");
        for (const auto& b : branches)
            net.branches.push_back(
                {require_number(b, "l_h", ctx + ".branches"),
                 require_number(b, "c_f", ctx + ".branches")});
    }
    net.validate();
    return net;
}

void write_network_json(const std::filesystem::path& path, const FosterNetwork& network) {
    network.validate();
    json j;
    j["schema_version"] = kSchemaVersion;
    j["shunt_c_f"] = network.shunt_c;
    if (network.series_l) j["series_l_h"] = *network.series_l;
    j["branches"] = json::array();
    for (const auto& b : network.branches)
        j["branches"].push_back({{"l_h", b.l_h}, {"c_f", b.c_f}});
    dump_json(path, j);
}

// ---------------------------------------------------------------------------
// Probe sweeps
// ---------------------------------------------------------------------------

Trace read_trace_csv(const std::filesystem::path& path) {
    const auto csv = read_csv(path, 2);
    const std::string ctx = path.filename().string();
    expect_header(csv, {"freq_hz", "mag_db"}, ctx);
    const bool with_phase = csv.header.size() >= 3 && csv.header[2] == "phase_rad";

    Trace trace;
    if (with_phase) trace.phase_rad.emplace();
    for (const auto& row : csv.rows) {
        trace.freqs_hz.push_back(row[0]);
        trace.mag.push_back(std::pow(10.0, row[1] / 20.0));
        if (with_phase) trace.phase_rad->push_back(row[2]);
    }
    for (const auto& [key, value] : csv.meta) {
        const double num = parse_number(value, ctx + " metadata '" + key + "'");
        if (key == "pump_dbm")
            trace.meta.pump_dbm = num;
        else if (key == "atten_db")
            trace.meta.atten_db = num;
        else if (key == "vdc_v")
            trace.meta.vdc_v = num;
        else if (key == "pump_hz")
            trace.meta.pump_hz = num;
        else
            trace.meta.extra[key] = num;
    }
    trace.validate();
    return trace;
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
    trace.validate();
    auto out = open_out(path);
    auto put_meta = [&out](const char* key, const std::optional<double>& v) {
        if (v) out << '#' << key << '=' << format_double(*v) << '\n';
    };
    put_meta("pump_dbm", trace.meta.pump_dbm);
    put_meta("atten_db", trace.meta.atten_db);
    put_meta("vdc_v", trace.meta.vdc_v);
    put_meta("pump_hz", trace.meta.pump_hz);
    for (const auto& [key, value] : trace.meta.extra)
        out << '#' << key << '=' << format_double(value) << '\n';

    out << (trace.phase_rad ? "freq_hz,mag_db,phase_rad\n" : "freq_hz,mag_db\n");
    for (size_t i = 0; i < trace.freqs_hz.size(); ++i) {
        const double db = 20.0 * std::log10(std::max(trace.mag[i], 1e-300));
        out << format_double(trace.freqs_hz[i]) << ',' << format_double(db);
        if (trace.phase_rad) out << ',' << format_double((*trace.phase_rad)[i]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Parameter sets
// ---------------------------------------------------------------------------

OmSystem read_omsystem_json(const std::filesystem::path& path) {
    const json j = load_json(path);
    const std::string ctx = path.filename().string();

    OmSystem sys;
    const json& cav = require_key(j, "cavity", ctx);
    sys.cavity.omega_c = hz_to_rad(require_number(cav, "omega_c_hz", ctx + ".cavity"));
    sys.cavity.kappa_int = hz_to_rad(require_number(cav, "kappa_int_hz", ctx + ".cavity"));
    sys.cavity.kappa_in = hz_to_rad(require_number(cav, "kappa_in_hz", ctx + ".cavity"));
    sys.cavity.kappa_out = hz_to_rad(require_number(cav, "kappa_out_hz", ctx + ".cavity"));
    sys.cavity.amp_scale = require_number(cav, "amp_scale", ctx + ".cavity");

    const json& modes = require_key(j, "mech_modes", ctx);
    if (!modes.is_array() || modes.empty())
        throw ParseError(ctx + ": key 'mech_modes' must be a non-empty array");
    for (const auto& m : modes) {
        MechMode mode;
        mode.omega_m = hz_to_rad(require_number(m, "omega_m_hz", ctx + ".mech_modes"));
        mode.gamma_m = hz_to_rad(require_number(m, "gamma_m_hz", ctx + ".mech_modes"));
        mode.g0 = hz_to_rad(require_number(m, "g0_hz", ctx + ".mech_modes"));
        if (auto mass = optional_number(m, "mass_eff_kg", ctx + ".mech_modes"))
            mode.mass_eff = *mass;
        sys.mech.push_back(mode);
    }

    if (j.contains("geometry") && !j.at("geometry").is_null()) {
        const json& g = j.at("geometry");
        DrumGeometry geom;
        geom.diameter = require_number(g, "diameter_m", ctx + ".geometry");
        geom.gap_d = require_number(g, "gap_m", ctx + ".geometry");
        geom.plate_area = require_number(g, "plate_area_m2", ctx + ".geometry");
        geom.film_thickness = require_number(g, "film_thickness_m", ctx + ".geometry");
        geom.density = require_number(g, "density_kg_m3", ctx + ".geometry");
        sys.geometry = geom;
    }

    sys.validate();
    return sys;
}

void write_omsystem_json(const std::filesystem::path& path, const OmSystem& system) {
    system.validate();
    json j;
    j["schema_version"] = kSchemaVersion;
    j["cavity"] = {{"omega_c_hz", rad_to_hz(system.cavity.omega_c)},
                   {"kappa_int_hz", rad_to_hz(system.cavity.kappa_int)},
                   {"kappa_in_hz", rad_to_hz(system.cavity.kappa_in)},
                   {"kappa_out_hz", rad_to_hz(system.cavity.kappa_out)},
                   {"amp_scale", system.cavity.amp_scale}};
    j["mech_modes"] = json::array();
    for (const auto& m : system.mech) {
        json mode = {{"omega_m_hz", rad_to_hz(m.omega_m)},
                     {"gamma_m_hz", rad_to_hz(m.gamma_m)},
                     {"g0_hz", rad_to_hz(m.g0)}};
        if (m.mass_eff) mode["mass_eff_kg"] = *m.mass_eff;
        j["mech_modes"].push_back(mode);
    }
    if (system.geometry) {
        j["geometry"] = {{"diameter_m", system.geometry->diameter},
                         {"gap_m", system.geometry->gap_d},
                         {"plate_area_m2", system.geometry->plate_area},
                         {"film_thickness_m", system.geometry->film_thickness},
                         {"density_kg_m3", system.geometry->density}};
    }
    dump_json(path, j);
}

// ---------------------------------------------------------------------------
// Voltage sweeps and cooperativity points
// ---------------------------------------------------------------------------

VSweep read_vsweep_csv(const std::filesystem::path& path) {
    const auto csv = read_csv(path, 2);
    expect_header(csv, {"vdc_v", "freq_hz"}, path.filename().string());
    VSweep sweep;
    for (const auto& row : csv.rows) {
        sweep.volts.push_back(row[0]);
        sweep.freqs.push_back(hz_to_rad(row[1]));
    }
    sweep.validate();
    return sweep;
}

void write_vsweep_csv(const std::filesystem::path& path, const VSweep& sweep) {
    sweep.validate();
    auto out = open_out(path);
    out << "vdc_v,freq_hz\n";
    for (size_t i = 0; i < sweep.volts.size(); ++i)
        out << format_double(sweep.volts[i]) << ','
            << format_double(rad_to_hz(sweep.freqs[i])) << '\n';
}

std::vector<CoopPoint> read_coop_points_csv(const std::filesystem::path& path) {
    const auto csv = read_csv(path, 3);
    expect_header(csv, {"n_d", "coop", "coop_sigma"}, path.filename().string());
    std::vector<CoopPoint> points;
    for (const auto& row : csv.rows) points.push_back({row[0], row[1], row[2]});
    return points;
}

void write_coop_points_csv(const std::filesystem::path& path,
                           const std::vector<CoopPoint>& points) {
    auto out = open_out(path);
    out << "n_d,coop,coop_sigma\n";
    for (const auto& p : points)
        out << format_double(p.n_d) << ',' << format_double(p.coop) << ','
            << format_double(p.coop_sigma) << '\n';
}

// ---------------------------------------------------------------------------
// Fit reports
// ---------------------------------------------------------------------------

FitReport read_fit_report_json(const std::filesystem::path& path) {
    const json j = load_json(path);
    const std::string ctx = path.filename().string();
    FitReport report;
    for (const auto& [key, value] : require_key(j, "params", ctx).items())
        report.params[key] = value.get<double>();
    for (const auto& [key, value] : require_key(j, "sigmas", ctx).items())
        report.sigmas[key] = value.get<double>();
    report.residual_norm = require_number(j, "residual_norm", ctx);
    report.converged = require_key(j, "converged", ctx).get<bool>();
    report.iterations = static_cast<int>(require_number(j, "iterations", ctx));
    return report;
}

void write_fit_report_json(const std::filesystem::path& path, const FitReport& report) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["params"] = report.params;
    j["sigmas"] = report.sigmas;
    j["residual_norm"] = report.residual_norm;
    j["converged"] = report.converged;
    j["iterations"] = report.iterations;
    dump_json(path, j);
}

}  // namespace omcav
