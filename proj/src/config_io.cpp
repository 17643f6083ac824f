#include "covisac/harness.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace covisac {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const char* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, x);
    if (r.ec != std::errc() || r.ptr != end) throw Error(ErrorCode::InvalidConfig, key + ": not a number: '" + v + "'");
    return x;
}

long long to_int(const std::string& key, const std::string& v) {
    long long x = 0;
    const char* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, x);
    if (r.ec != std::errc() || r.ptr != end) throw Error(ErrorCode::InvalidConfig, key + ": not an integer: '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw Error(ErrorCode::InvalidConfig, key + ": not a boolean: '" + v + "'");
}

nlohmann::ordered_json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return std::stod(format_number(v));
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream o;
    o << "scheme,sweepVar,sweepValue,trial_count,infeasible_count,covert_rate_mean,covert_rate_std,"
         "overt_rate_min_mean,pE_mean,kl_mean,sensing_sinr_db_mean,pd_mean,runtime_ms_mean,audit_fail_count,pfa\n";
    for (const auto& r : rows) {
        o << to_string(r.scheme) << ',' << to_string(r.sweepVar) << ',' << format_number(r.sweepValue) << ','
          << r.trialCount << ',' << r.infeasibleCount << ',' << format_number(r.covertRateMean) << ','
          << format_number(r.covertRateStd) << ',' << format_number(r.overtRateMinMean) << ','
          << format_number(r.pEMean) << ',' << format_number(r.klMean) << ',' << format_number(r.sensingSinrDbMean)
          << ',' << format_number(r.pdMean) << ',' << format_number(r.runtimeMsMean) << ',' << r.auditFailCount << ','
          << format_number(r.pfa) << '\n';
    }
    return o.str();
}

std::string rows_to_json(const std::vector<ResultRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["scheme"] = to_string(r.scheme);
        j["sweepVar"] = to_string(r.sweepVar);
        j["sweepValue"] = json_number(r.sweepValue);
        j["trial_count"] = r.trialCount;
        j["infeasible_count"] = r.infeasibleCount;
        j["covert_rate_mean"] = json_number(r.covertRateMean);
        j["covert_rate_std"] = json_number(r.covertRateStd);
        j["overt_rate_min_mean"] = json_number(r.overtRateMinMean);
        j["pE_mean"] = json_number(r.pEMean);
        j["kl_mean"] = json_number(r.klMean);
        j["sensing_sinr_db_mean"] = json_number(r.sensingSinrDbMean);
        j["pd_mean"] = json_number(r.pdMean);
        j["runtime_ms_mean"] = json_number(r.runtimeMsMean);
        j["audit_fail_count"] = r.auditFailCount;
        j["pfa"] = json_number(r.pfa);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::string beampattern_to_csv(const std::vector<BeampatternRow>& rows) {
    std::ostringstream o;
    o << "scheme,clutter_power_db,angle_deg,power_db\n";
    for (const auto& r : rows)
        o << to_string(r.scheme) << ',' << format_number(r.clutterPowerDb) << ',' << format_number(r.angleDeg) << ','
          << format_number(r.powerDb) << '\n';
    return o.str();
}

std::string beampattern_to_json(const std::vector<BeampatternRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["scheme"] = to_string(r.scheme);
        j["clutter_power_db"] = json_number(r.clutterPowerDb);
        j["angle_deg"] = json_number(r.angleDeg);
        j["power_db"] = json_number(r.powerDb);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    f << text;
    f.close();
    if (!f) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(n) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(n) + ": empty key");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::IoError, "cannot read config '" + path + "'");
    std::ostringstream s;
    s << f.rdbuf();
    return parse_config_text(s.str());
}

std::vector<double> parse_values(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split(s, ',')) out.push_back(to_double("values", tok));
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "values: empty list");
    return out;
}

std::vector<Scheme> parse_schemes(const std::string& s) {
    std::vector<Scheme> out;
    for (const auto& tok : split(s, ',')) out.push_back(parse_scheme(tok));
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "schemes: empty list");
    return out;
}

void apply_config(const std::map<std::string, std::string>& kv, ExperimentSpec& spec) {
    SystemConfig& c = spec.baseConfig;
    for (const auto& [key, v] : kv) {
        if (key == "sweep") spec.sweepVariable = parse_sweep_var(v);
        else if (key == "values") spec.sweepValues = parse_values(v);
        else if (key == "schemes") spec.schemes = parse_schemes(v);
        else if (key == "trials") spec.trials = static_cast<int>(to_int(key, v));
        else if (key == "seed") spec.seed = static_cast<std::uint64_t>(to_int(key, v));
        else if (key == "out") spec.outputPath = v;
        else if (key == "format") spec.format = parse_format(v);
        else if (key == "paths") spec.paths = static_cast<int>(to_int(key, v));
        else if (key == "clutter_power_db") spec.clutterPowerDb = to_double(key, v);
        else if (key == "delta_sq") spec.deltaSq = to_double(key, v);
        else if (key == "pfa") spec.pfa = to_double(key, v);
        else if (key == "timing") spec.timing = to_bool(key, v);
        else if (key == "threads") spec.threads = static_cast<int>(to_int(key, v));
        else if (key == "mt") c.mt = static_cast<int>(to_int(key, v));
        else if (key == "mr") c.mr = static_cast<int>(to_int(key, v));
        else if (key == "carols") c.uCarols = static_cast<int>(to_int(key, v));
        else if (key == "rf_chains") c.nRf = static_cast<int>(to_int(key, v));
        else if (key == "power") c.totalPower = to_double(key, v);
        else if (key == "noise_carol_dbw") c.noiseCarol = db_to_lin(to_double(key, v));
        else if (key == "noise_willie_dbw") c.noiseWillie = db_to_lin(to_double(key, v));
        else if (key == "noise_bob_dbw") c.noiseBob = db_to_lin(to_double(key, v));
        else if (key == "noise_radar_dbw") c.noiseRadar = db_to_lin(to_double(key, v));
        else if (key == "qos_carol") c.qosCarol = to_double(key, v);
        else if (key == "qos_willie") c.qosWillie = to_double(key, v);
        else if (key == "eps") c.covertEps = to_double(key, v);
        else if (key == "gamma_db") c.sensingGammaDb = to_double(key, v);
        else if (key == "angular_samples") c.angularSamples = static_cast<int>(to_int(key, v));
        else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    }
}

}  // namespace covisac
