/* vdiff — tiny latent video-diffusion toolkit.
 *
 * C API over the pipeline: synthetic data generation, staged training
 * (autoencoder + text-to-image base, domain adapter, temporal motion module,
 * motion LoRAs, personalization), camera-motion augmentation, DDIM animation
 * sampling, metric evaluation, and checkpoint inspection.
 *
 * All commands are driven by an opaque key=value option set. Functions
 * return VD_STATUS_OK (0) on success; on failure, vd_last_error() returns a
 * message for the calling thread.
 */
#ifndef VDIFF_H
#define VDIFF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define VD_API __declspec(dllexport)
#else
#define VD_API __attribute__((visibility("default")))
#endif

typedef enum vd_status {
    VD_STATUS_OK = 0,
    VD_STATUS_INVALID_ARG = 1, /* bad option value, missing file, config error */
    VD_STATUS_IO_ERROR = 2,    /* unreadable/corrupt artifact */
    VD_STATUS_CONTRACT = 3,    /* shape/precondition violation inside the core */
    VD_STATUS_NUMERIC = 4,     /* non-finite values during training/sampling */
    VD_STATUS_INTERNAL = 5
} vd_status;

VD_API const char* vd_version(void);
VD_API const char* vd_status_name(vd_status s);

/* message describing the most recent failure on this thread ("" if none) */
VD_API const char* vd_last_error(void);

/* ---- option sets ---- */

typedef struct vd_opts vd_opts;

VD_API vd_opts* vd_opts_new(void);
VD_API void vd_opts_free(vd_opts* o);
/* merge a key=value config file; later vd_opts_set calls override it */
VD_API vd_status vd_opts_load_file(vd_opts* o, const char* path);
VD_API vd_status vd_opts_set(vd_opts* o, const char* key, const char* value);
/* NULL when the key is unset */
VD_API const char* vd_opts_get(const vd_opts* o, const char* key);

/* ---- pipeline commands (one per CLI subcommand) ----
 *
 * Common keys: out, seed, config. Each command writes its artifacts plus a
 * run_manifest.json that reproduces the run. Command-specific keys:
 *   datagen         out, videos, frames, images, styles, style_n, watermark
 *   pretrain        data, out, ae_iters, t2i_iters, batch, ae_lr, t2i_lr
 *   train-adapter   data, base, ae, out, iters, batch, lr, rank
 *   train-motion    data, base, ae, adapter | no_adapter=1, out, iters,
 *                   batch, lr, frames, variant=transformer|conv, use_pe
 *   train-motionlora refs, base, ae, adapter | no_adapter=1, motion, out,
 *                   iters, batch, lr, rank
 *   personalize     style_set, base, ae, out, mode=full|lora, iters, lr
 *   augment         source, pattern, frames, count, seed, out
 *   animate         model, ae, motion_module, [adapter, adapter_alpha,
 *                   person_lora, motion_loras=path[:w],...], prompt, frames,
 *                   steps, guidance, seed, noise=independent|shared, fps, out
 *   eval            clips, ae, [refs], out, resamples
 */
VD_API vd_status vd_cmd_datagen(const vd_opts* o);
VD_API vd_status vd_cmd_pretrain(const vd_opts* o);
VD_API vd_status vd_cmd_train_adapter(const vd_opts* o);
VD_API vd_status vd_cmd_train_motion(const vd_opts* o);
VD_API vd_status vd_cmd_train_motionlora(const vd_opts* o);
VD_API vd_status vd_cmd_personalize(const vd_opts* o);
VD_API vd_status vd_cmd_augment(const vd_opts* o);
VD_API vd_status vd_cmd_animate(const vd_opts* o);
VD_API vd_status vd_cmd_eval(const vd_opts* o);

/* ---- checkpoint inspection ---- */

typedef struct vd_checkpoint vd_checkpoint;

VD_API vd_status vd_checkpoint_open(const char* path, vd_checkpoint** out);
VD_API void vd_checkpoint_close(vd_checkpoint* ck);
VD_API const char* vd_checkpoint_kind(const vd_checkpoint* ck);
/* full header (kind, tensor manifest, config snapshot, body hash) as JSON */
VD_API const char* vd_checkpoint_header_json(const vd_checkpoint* ck);
VD_API int64_t vd_checkpoint_tensor_count(const vd_checkpoint* ck);
VD_API const char* vd_checkpoint_tensor_name(const vd_checkpoint* ck, int64_t index);
VD_API vd_status vd_checkpoint_tensor_dims(const vd_checkpoint* ck, int64_t index,
                                           int64_t dims[8], int* ndims);

#ifdef __cplusplus
}
#endif

#endif /* VDIFF_H */
