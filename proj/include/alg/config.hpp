#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace alg {

// Bad usage or bad configuration (mapped to its own exit code by the CLI).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat `key = value` config with dotted key prefixes and '#' comments.  Values
// are kept as strings; serialization is canonical: keys sorted, one
// `key = value` per line, LF endings.
struct FlatConfig {
    std::map<std::string, std::string> kv;

    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    static FlatConfig parse(const std::string& text) {
        FlatConfig cfg;
        std::istringstream is(text);
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::string t = trim(line);
            if (t.empty()) continue;
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(t.substr(0, eq));
            std::string val = trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            cfg.kv[key] = val;
        }
        return cfg;
    }

    static FlatConfig load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config: " + path);
        std::ostringstream ss;
        ss << is.rdbuf();
        return parse(ss.str());
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
        return out;
    }

    bool has(const std::string& key) const { return kv.count(key) > 0; }
    void set(const std::string& key, const std::string& val) { kv[key] = val; }

    std::string get_string(const std::string& key, const std::string& dflt) const {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : it->second;
    }

    int get_int(const std::string& key, int dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        try {
            size_t pos = 0;
            int v = std::stoi(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("config key " + key + ": expected integer, got '" + it->second + "'");
        }
    }

    double get_double(const std::string& key, double dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        try {
            size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ConfigError("config key " + key + ": expected number, got '" + it->second + "'");
        }
    }

    bool get_bool(const std::string& key, bool dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "off" || v == "no") return false;
        throw ConfigError("config key " + key + ": expected boolean, got '" + v + "'");
    }

    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        std::vector<std::string> out;
        std::string item;
        std::istringstream is(it->second);
        while (std::getline(is, item, ',')) {
            std::string t = trim(item);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

    std::vector<double> get_list_double(const std::string& key,
                                        const std::vector<double>& dflt) const {
        if (!has(key)) return dflt;
        std::vector<double> out;
        for (const auto& s : get_list(key, {})) {
            try {
                out.push_back(std::stod(s));
            } catch (...) {
                throw ConfigError("config key " + key + ": expected number list, got '" + s + "'");
            }
        }
        return out;
    }
};

}  // namespace alg
