#ifndef OMCAV_IO_HPP
#define OMCAV_IO_HPP

// File formats. All frequencies on disk are ordinary Hz; conversion to
// angular frequency happens here and nowhere else.
//
//   admittance CSV : header `freq_hz,y_imag_siemens`, '#' comments
//   network JSON   : {shunt_c_f, series_l_h, branches:[{l_h, c_f}]}
//   trace CSV      : header `freq_hz,mag_db[,phase_rad]`, '#key=value'
//                    metadata lines (pump_dbm, atten_db, vdc_v, pump_hz, ...)
//   omsystem JSON  : cavity + mechanical modes, unit-suffixed keys
//   vsweep CSV     : header `vdc_v,freq_hz`
//   coop CSV       : header `n_d,coop,coop_sigma`
//   fit report JSON: params/sigmas maps plus convergence diagnostics
//
// Every JSON document carries a top-level `schema_version: 1`.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "omcav/electrotune.hpp"
#include "omcav/fitkit.hpp"
#include "omcav/netfoster.hpp"
#include "omcav/omresponse.hpp"

namespace omcav {

// Full optomechanical parameter set.
struct OmSystem {
    CavityParams cavity;
    std::vector<MechMode> mech;
    std::optional<DrumGeometry> geometry;

    void validate() const;
};

inline constexpr int kSchemaVersion = 1;

// Shortest round-trip decimal representation; used for all CSV output so
// that identical values always serialize to identical bytes.
std::string format_double(double value);

AdmittanceTrace read_admittance_csv(const std::filesystem::path& path);
void write_admittance_csv(const std::filesystem::path& path, const AdmittanceTrace& trace);

FosterNetwork read_network_json(const std::filesystem::path& path);
void write_network_json(const std::filesystem::path& path, const FosterNetwork& network);

Trace read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);

OmSystem read_omsystem_json(const std::filesystem::path& path);
void write_omsystem_json(const std::filesystem::path& path, const OmSystem& system);

VSweep read_vsweep_csv(const std::filesystem::path& path);
void write_vsweep_csv(const std::filesystem::path& path, const VSweep& sweep);

std::vector<CoopPoint> read_coop_points_csv(const std::filesystem::path& path);
void write_coop_points_csv(const std::filesystem::path& path,
                           const std::vector<CoopPoint>& points);

FitReport read_fit_report_json(const std::filesystem::path& path);
void write_fit_report_json(const std::filesystem::path& path, const FitReport& report);

}  // namespace omcav

#endif  // OMCAV_IO_HPP
