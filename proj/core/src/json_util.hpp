#ifndef OMCAV_SRC_JSON_UTIL_HPP
#define OMCAV_SRC_JSON_UTIL_HPP

// Internal JSON loading helpers shared by the readers and the CLI. Parse
// failures and missing/mistyped keys surface as ParseError with the
// offending key named.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "omcav/errors.hpp"

namespace omcav::detail {

inline nlohmann::json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.filename().string() + ": " + e.what());
    }
}

inline void dump_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline const nlohmann::json& require_key(const nlohmann::json& j, const std::string& key,
                                         const std::string& context) {
    if (!j.is_object() || !j.contains(key))
        throw ParseError(context + ": missing key '" + key + "'");
    return j.at(key);
}

inline double require_number(const nlohmann::json& j, const std::string& key,
                             const std::string& context) {
    const nlohmann::json& v = require_key(j, key, context);
    if (!v.is_number()) throw ParseError(context + ": key '" + key + "' is not a number");
    return v.get<double>();
}

inline std::optional<double> optional_number(const nlohmann::json& j, const std::string& key,
                                             const std::string& context) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_number())
        throw ParseError(context + ": key '" + key + "' is not a number");
    return j.at(key).get<double>();
}

inline std::string require_string(const nlohmann::json& j, const std::string& key,
                                  const std::string& context) {
    const nlohmann::json& v = require_key(j, key, context);
    if (!v.is_string()) throw ParseError(context + ": key '" + key + "' is not a string");
    return v.get<std::string>();
}

inline std::optional<std::string> optional_string(const nlohmann::json& j,
                                                  const std::string& key,
                                                  const std::string& context) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string())
        throw ParseError(context + ": key '" + key + "' is not a string");
    return j.at(key).get<std::string>();
}

}  // namespace omcav::detail

#endif  // OMCAV_SRC_JSON_UTIL_HPP
