#ifndef VDIFF_IO_MANIFEST_HPP
#define VDIFF_IO_MANIFEST_HPP

#include <chrono>
#include <filesystem>
#include <fstream>

#include "io/config.hpp"

namespace vd {

constexpr const char* kVersion = "vdiff 0.1.0 ckpt1";

inline uint64_t hash_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("hash_file: cannot open " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0)
        h = fnv1a64(buf, (size_t)is.gcount(), h);
    return h;
}

// Everything needed to re-run a command bit-identically: the argv, the
// effective config, seeds and input hashes; plus hashes of what it produced.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    KVConfig config;
    uint64_t seed = 0;
    nlohmann::ordered_json dataset_hashes = nlohmann::ordered_json::object();
    nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    double wall_time_s = 0;

    void add_output(const std::string& rel, const std::string& abs_path) {
        outputs[rel] = hash_hex(hash_file(abs_path));
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["version"] = kVersion;
        j["command"] = command;
        j["argv"] = argv;
        j["config"] = config.to_json();
        j["seed"] = seed;
        j["dataset_hashes"] = dataset_hashes;
        j["outputs"] = outputs;
        j["metrics"] = metrics;
        j["wall_time_s"] = wall_time_s;
        return j;
    }

    static RunManifest from_json(const nlohmann::ordered_json& j) {
        RunManifest m;
        m.command = j.value("command", "");
        m.argv = j.value("argv", std::vector<std::string>{});
        m.config = KVConfig::from_json(j.value("config", nlohmann::ordered_json::object()));
        m.seed = j.value("seed", (uint64_t)0);
        m.dataset_hashes = j.value("dataset_hashes", nlohmann::ordered_json::object());
        m.outputs = j.value("outputs", nlohmann::ordered_json::object());
        m.metrics = j.value("metrics", nlohmann::ordered_json::object());
        m.wall_time_s = j.value("wall_time_s", 0.0);
        return m;
    }
};

inline void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream os(path);
    if (!os) throw io_error("write_json_file: cannot open " + path);
    os << j.dump(2) << "\n";
}

inline nlohmann::ordered_json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("read_json_file: cannot open " + path);
    try {
        return nlohmann::ordered_json::parse(is);
    } catch (const std::exception& e) {
        throw io_error("read_json_file: " + path + ": " + e.what());
    }
}

struct WallTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

}  // namespace vd

#endif
