#ifndef VDIFF_IO_CHECKPOINT_HPP
#define VDIFF_IO_CHECKPOINT_HPP

#include <bit>
#include <fstream>
#include <set>

#include "core/params.hpp"
#include "io/config.hpp"

namespace vd {

// Checkpoint file layout:
//   [0..7]   magic "VDCKPT01"
//   [8..15]  u64 LE header length H
//   [16..)   header JSON (format_version, kind, tensor manifest, config,
//            body hash), zero-padded to a 64-byte boundary
//   body     raw little-endian f32 tensor data, each tensor offset 64-aligned
// Loading is fail-closed: header, bounds and body hash are verified before
// any tensor is handed to the caller.

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes LE host");

constexpr int kCheckpointVersion = 1;
inline const char* kCheckpointMagic = "VDCKPT01";

inline const std::set<std::string>& checkpoint_kinds() {
    static const std::set<std::string> kinds = {"base_t2i",      "autoencoder", "domain_adapter",
                                                "motion_module", "motion_lora", "personalization"};
    return kinds;
}

struct CheckpointData {
    std::string kind;
    json config;
    ParamDict params;
};

inline void save_checkpoint(const std::string& path, const std::string& kind,
                            const ParamDict& params, const json& config) {
    VD_CHECK_CONFIG(checkpoint_kinds().count(kind), "save_checkpoint: unknown kind '" + kind + "'");
    auto align64 = [](uint64_t off) { return (off + 63) & ~uint64_t(63); };

    json manifest = json::array();
    uint64_t off = 0;
    for (auto& name : params.order) {
        const Tensor& t = params.at(name);
        off = align64(off);
        json e;
        e["name"] = name;
        e["dims"] = t.shape;
        e["dtype"] = "f32";
        e["offset"] = off;
        e["nbytes"] = (uint64_t)t.numel() * 4;
        manifest.push_back(e);
        off += (uint64_t)t.numel() * 4;
    }
    uint64_t body_size = off;
    std::vector<char> body(body_size, 0);
    off = 0;
    for (auto& name : params.order) {
        const Tensor& t = params.at(name);
        off = align64(off);
        std::memcpy(body.data() + off, t.data(), t.numel() * 4);
        off += (uint64_t)t.numel() * 4;
    }

    json header;
    header["format_version"] = kCheckpointVersion;
    header["kind"] = kind;
    header["tensors"] = manifest;
    header["config"] = config;
    header["body_size"] = body_size;
    header["body_hash"] = hash_hex(fnv1a64(body.data(), body.size()));
    std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("save_checkpoint: cannot open " + path);
    os.write(kCheckpointMagic, 8);
    uint64_t hlen = hs.size();
    os.write((const char*)&hlen, 8);
    os.write(hs.data(), (std::streamsize)hs.size());
    uint64_t pos = 16 + hlen;
    uint64_t pad = align64(pos) - pos;
    for (uint64_t i = 0; i < pad; i++) os.put(0);
    os.write(body.data(), (std::streamsize)body.size());
    if (!os) throw io_error("save_checkpoint: write failed on " + path);
}

inline json read_checkpoint_header(std::ifstream& is, const std::string& path,
                                   uint64_t* body_start) {
    char magic[8];
    uint64_t hlen = 0;
    if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw io_error("checkpoint " + path + ": bad magic");
    if (!is.read((char*)&hlen, 8) || hlen == 0 || hlen > (64ull << 20))
        throw io_error("checkpoint " + path + ": corrupt header length");
    std::string hs(hlen, 0);
    if (!is.read(hs.data(), (std::streamsize)hlen))
        throw io_error("checkpoint " + path + ": truncated header");
    json header;
    try {
        header = json::parse(hs);
    } catch (const std::exception& e) {
        throw io_error("checkpoint " + path + ": header parse error: " + e.what());
    }
    *body_start = (16 + hlen + 63) & ~uint64_t(63);
    return header;
}

inline CheckpointData load_checkpoint(const std::string& path,
                                      const std::string& expected_kind = "") {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("load_checkpoint: cannot open " + path);
    uint64_t body_start = 0;
    json header = read_checkpoint_header(is, path, &body_start);

    if ((int)header.value("format_version", -1) != kCheckpointVersion)
        throw io_error("checkpoint " + path + ": unsupported format version");
    std::string kind = header.value("kind", "");
    if (!checkpoint_kinds().count(kind))
        throw io_error("checkpoint " + path + ": unknown kind '" + kind + "'");
    if (!expected_kind.empty() && kind != expected_kind)
        throw config_error("checkpoint " + path + ": kind mismatch, expected '" + expected_kind +
                           "' got '" + kind + "'");

    uint64_t body_size = header.value("body_size", (uint64_t)0);
    std::vector<char> body(body_size);
    is.seekg((std::streamoff)body_start);
    if (body_size && !is.read(body.data(), (std::streamsize)body_size))
        throw io_error("checkpoint " + path + ": truncated body");
    std::string got = hash_hex(fnv1a64(body.data(), body.size()));
    if (got != header.value("body_hash", ""))
        throw io_error("checkpoint " + path + ": body hash mismatch (corrupt file)");

    CheckpointData out;
    out.kind = kind;
    out.config = header.value("config", json::object());
    uint64_t prev_end = 0;
    for (auto& e : header.at("tensors")) {
        std::string name = e.at("name");
        Shape dims = e.at("dims").get<Shape>();
        uint64_t off = e.at("offset"), nbytes = e.at("nbytes");
        if (e.value("dtype", "") != "f32")
            throw io_error("checkpoint " + path + ": unsupported dtype for " + name);
        if (off % 64 != 0 || off < prev_end || off + nbytes > body_size)
            throw io_error("checkpoint " + path + ": tensor '" + name +
                           "' offsets overlap or out of bounds");
        if ((uint64_t)shape_numel(dims) * 4 != nbytes)
            throw io_error("checkpoint " + path + ": tensor '" + name + "' size mismatch");
        prev_end = off + nbytes;
        Tensor t(dims);
        std::memcpy(t.data(), body.data() + off, nbytes);
        out.params.add(name, std::move(t));
    }
    return out;
}

// architecture check used before adopting loaded weights: every expected
// name must exist with the expected shape, nothing extra
inline void validate_params(const ParamDict& loaded, const ParamDict& expected,
                            const std::string& what) {
    for (auto& name : expected.order) {
        if (!loaded.has(name))
            throw config_error(what + ": missing tensor '" + name + "' for this architecture");
        if (loaded.at(name).shape != expected.at(name).shape)
            throw config_error(what + ": tensor '" + name + "' has shape " +
                               shape_str(loaded.at(name).shape) + ", architecture needs " +
                               shape_str(expected.at(name).shape));
    }
    for (auto& name : loaded.order)
        if (!expected.has(name))
            throw config_error(what + ": unexpected tensor '" + name + "'");
}

}  // namespace vd

#endif
