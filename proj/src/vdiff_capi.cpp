#include "vdiff.h"

#include "pipeline/commands.hpp"

using namespace vd;

namespace {

thread_local std::string t_last_error;

vd_status run_guarded(const std::function<void()>& fn) {
    t_last_error.clear();
    try {
        fn();
        return VD_STATUS_OK;
    } catch (const config_error& e) {
        t_last_error = e.what();
        return VD_STATUS_INVALID_ARG;
    } catch (const io_error& e) {
        t_last_error = e.what();
        return VD_STATUS_IO_ERROR;
    } catch (const contract_error& e) {
        t_last_error = e.what();
        return VD_STATUS_CONTRACT;
    } catch (const numeric_error& e) {
        t_last_error = e.what();
        return VD_STATUS_NUMERIC;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return VD_STATUS_INTERNAL;
    } catch (...) {
        t_last_error = "unknown error";
        return VD_STATUS_INTERNAL;
    }
}

}  // namespace

struct vd_opts {
    KVConfig config;
};

struct vd_checkpoint {
    std::string kind;
    std::string header_json;
    std::vector<std::string> names;
    std::vector<Shape> dims;
};

extern "C" {

const char* vd_version(void) { return kVersion; }

const char* vd_status_name(vd_status s) {
    switch (s) {
        case VD_STATUS_OK: return "ok";
        case VD_STATUS_INVALID_ARG: return "invalid-argument";
        case VD_STATUS_IO_ERROR: return "io-error";
        case VD_STATUS_CONTRACT: return "contract-violation";
        case VD_STATUS_NUMERIC: return "numeric-error";
        case VD_STATUS_INTERNAL: return "internal-error";
    }
    return "unknown";
}

const char* vd_last_error(void) { return t_last_error.c_str(); }

vd_opts* vd_opts_new(void) { return new vd_opts(); }

void vd_opts_free(vd_opts* o) { delete o; }

vd_status vd_opts_load_file(vd_opts* o, const char* path) {
    if (!o || !path) {
        t_last_error = "null argument";
        return VD_STATUS_INVALID_ARG;
    }
    return run_guarded([&] {
        KVConfig file = KVConfig::from_file(path);
        for (auto& [k, v] : file.values) o->config.values[k] = v;
    });
}

vd_status vd_opts_set(vd_opts* o, const char* key, const char* value) {
    if (!o || !key || !value) {
        t_last_error = "null argument";
        return VD_STATUS_INVALID_ARG;
    }
    o->config.set(key, value);
    return VD_STATUS_OK;
}

const char* vd_opts_get(const vd_opts* o, const char* key) {
    if (!o || !key) return nullptr;
    auto it = o->config.values.find(key);
    return it == o->config.values.end() ? nullptr : it->second.c_str();
}

#define VD_CMD(fn, impl)                                        \
    vd_status fn(const vd_opts* o) {                            \
        if (!o) {                                               \
            t_last_error = "null options";                      \
            return VD_STATUS_INVALID_ARG;                       \
        }                                                       \
        return run_guarded([&] { impl(o->config); });           \
    }

VD_CMD(vd_cmd_datagen, cmd_datagen)
VD_CMD(vd_cmd_pretrain, cmd_pretrain)
VD_CMD(vd_cmd_train_adapter, cmd_train_adapter)
VD_CMD(vd_cmd_train_motion, cmd_train_motion)
VD_CMD(vd_cmd_train_motionlora, cmd_train_motionlora)
VD_CMD(vd_cmd_personalize, cmd_personalize)
VD_CMD(vd_cmd_augment, cmd_augment)
VD_CMD(vd_cmd_animate, cmd_animate)
VD_CMD(vd_cmd_eval, cmd_eval)

#undef VD_CMD

vd_status vd_checkpoint_open(const char* path, vd_checkpoint** out) {
    if (!path || !out) {
        t_last_error = "null argument";
        return VD_STATUS_INVALID_ARG;
    }
    *out = nullptr;
    return run_guarded([&] {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw io_error(std::string("cannot open ") + path);
        uint64_t body_start = 0;
        json header = read_checkpoint_header(is, path, &body_start);
        auto ck = std::make_unique<vd_checkpoint>();
        ck->kind = header.value("kind", "");
        ck->header_json = header.dump(2);
        for (auto& e : header.at("tensors")) {
            ck->names.push_back(e.at("name"));
            ck->dims.push_back(e.at("dims").get<Shape>());
        }
        *out = ck.release();
    });
}

void vd_checkpoint_close(vd_checkpoint* ck) { delete ck; }

const char* vd_checkpoint_kind(const vd_checkpoint* ck) { return ck ? ck->kind.c_str() : nullptr; }

const char* vd_checkpoint_header_json(const vd_checkpoint* ck) {
    return ck ? ck->header_json.c_str() : nullptr;
}

int64_t vd_checkpoint_tensor_count(const vd_checkpoint* ck) {
    return ck ? (int64_t)ck->names.size() : 0;
}

const char* vd_checkpoint_tensor_name(const vd_checkpoint* ck, int64_t index) {
    if (!ck || index < 0 || index >= (int64_t)ck->names.size()) return nullptr;
    return ck->names[index].c_str();
}

vd_status vd_checkpoint_tensor_dims(const vd_checkpoint* ck, int64_t index, int64_t dims[8],
                                    int* ndims) {
    if (!ck || !dims || !ndims || index < 0 || index >= (int64_t)ck->dims.size()) {
        t_last_error = "bad checkpoint tensor index";
        return VD_STATUS_INVALID_ARG;
    }
    const Shape& s = ck->dims[index];
    if (s.size() > 8) {
        t_last_error = "tensor rank exceeds 8";
        return VD_STATUS_INTERNAL;
    }
    *ndims = (int)s.size();
    for (size_t i = 0; i < s.size(); i++) dims[i] = s[i];
    return VD_STATUS_OK;
}

}  // extern "C"
