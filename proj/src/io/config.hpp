#ifndef VDIFF_IO_CONFIG_HPP
#define VDIFF_IO_CONFIG_HPP

#include <fstream>
#include <map>

#include <json.hpp>

#include "core/common.hpp"

namespace vd {

using json = nlohmann::ordered_json;

// key=value text config; '#' starts a comment. Later set() calls win, which
// gives the precedence chain default < config file < CLI flag.
struct KVConfig {
    std::map<std::string, std::string> values;

    static KVConfig from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw config_error("config: cannot open " + path);
        KVConfig c;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            lineno++;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto trim = [](std::string s) {
                size_t a = s.find_first_not_of(" \t\r");
                size_t b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            std::string t = trim(line);
            if (t.empty()) continue;
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw config_error("config " + path + ":" + std::to_string(lineno) +
                                   ": expected key=value");
            c.values[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
        }
        return c;
    }

    void set(const std::string& k, const std::string& v) { values[k] = v; }
    bool has(const std::string& k) const { return values.count(k) > 0; }

    std::string get_str(const std::string& k, const std::string& def) const {
        auto it = values.find(k);
        return it == values.end() ? def : it->second;
    }

    std::string require(const std::string& k) const {
        auto it = values.find(k);
        if (it == values.end()) throw config_error("missing required option '" + k + "'");
        return it->second;
    }

    int64_t get_int(const std::string& k, int64_t def) const {
        auto it = values.find(k);
        if (it == values.end()) return def;
        try {
            return std::stoll(it->second);
        } catch (...) {
            throw config_error("option '" + k + "': expected integer, got '" + it->second + "'");
        }
    }

    double get_real(const std::string& k, double def) const {
        auto it = values.find(k);
        if (it == values.end()) return def;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw config_error("option '" + k + "': expected number, got '" + it->second + "'");
        }
    }

    bool get_bool(const std::string& k, bool def) const {
        auto it = values.find(k);
        if (it == values.end()) return def;
        const std::string& v = it->second;
        if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
        if (v == "0" || v == "false" || v == "no" || v == "off") return false;
        throw config_error("option '" + k + "': expected boolean, got '" + v + "'");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (auto& [k, v] : values) j[k] = v;
        return j;
    }

    static KVConfig from_json(const nlohmann::ordered_json& j) {
        KVConfig c;
        for (auto& [k, v] : j.items()) c.values[k] = v.get<std::string>();
        return c;
    }
};

}  // namespace vd

#endif
