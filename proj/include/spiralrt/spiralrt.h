/*
 * Copyright 2026 The spiralrt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SPIRALRT_H_
#define SPIRALRT_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SPIRALRT_API __declspec(dllexport)
#else
#define SPIRALRT_API __attribute__((visibility("default")))
#endif

/* Status codes. Every function returning int returns one of these. */
enum {
  SPIRALRT_OK = 0,
  SPIRALRT_ERR_INVALID_ARGUMENT = 1,
  SPIRALRT_ERR_IO = 2,
  SPIRALRT_ERR_FORMAT = 3,
  SPIRALRT_ERR_CHECKSUM = 4,
  SPIRALRT_ERR_NUMERIC = 5,
  SPIRALRT_ERR_INSUFFICIENT_DATA = 6,
  SPIRALRT_ERR_SHAPE_MISMATCH = 7,
  SPIRALRT_ERR_INTERNAL = 99
};

typedef struct spiralrt_images spiralrt_images; /* IMGS stack */
typedef struct spiralrt_masks spiralrt_masks;   /* MASK stack */
typedef struct spiralrt_raw spiralrt_raw;       /* RAWK acquisition */
typedef struct spiralrt_traj spiralrt_traj;     /* TRAJ trajectory */
typedef struct spiralrt_model spiralrt_model;   /* loaded xSDNet weights */

SPIRALRT_API const char* spiralrt_version(void);
SPIRALRT_API const char* spiralrt_status_name(int status);

/* Per-thread JSON of the last failure on this thread:
   {"status", "error", "message", "file", "offset"}. Empty after a success. */
SPIRALRT_API const char* spiralrt_last_error(void);
/* Per-thread JSON report of the last successful call that produces one. */
SPIRALRT_API const char* spiralrt_last_report(void);

/* ---- containers. Writers are atomic (temp file + rename). */
SPIRALRT_API int spiralrt_images_read(const char* path, spiralrt_images** out);
SPIRALRT_API int spiralrt_images_write(const spiralrt_images* images, const char* path);
/* Copies `data` (f32 values, or (re, im) pairs when is_complex) ordered
   [frame][slice][coil][y][x]. */
SPIRALRT_API int spiralrt_images_create(int height, int width, int n_frames, int n_slices, int n_coils,
                                        int is_complex, double pixel_size_mm, double slice_thickness_mm,
                                        double frame_dt_ms, const float* data, spiralrt_images** out);
/* Report: the header as JSON. */
SPIRALRT_API int spiralrt_images_info(const spiralrt_images* images);
SPIRALRT_API int spiralrt_images_data(const spiralrt_images* images, const float** data, size_t* count);
SPIRALRT_API void spiralrt_images_free(spiralrt_images* images);

SPIRALRT_API int spiralrt_masks_read(const char* path, spiralrt_masks** out);
SPIRALRT_API int spiralrt_masks_write(const spiralrt_masks* masks, const char* path);
SPIRALRT_API int spiralrt_masks_info(const spiralrt_masks* masks);
SPIRALRT_API int spiralrt_masks_data(const spiralrt_masks* masks, const uint8_t** labels, size_t* count);
SPIRALRT_API void spiralrt_masks_free(spiralrt_masks* masks);

SPIRALRT_API int spiralrt_raw_read(const char* path, spiralrt_raw** out);
SPIRALRT_API int spiralrt_raw_write(const spiralrt_raw* raw, const char* path);
SPIRALRT_API int spiralrt_raw_info(const spiralrt_raw* raw);
/* Sets the trajectory file name recorded in the header. */
SPIRALRT_API int spiralrt_raw_set_trajectory_file(spiralrt_raw* raw, const char* name);
SPIRALRT_API void spiralrt_raw_free(spiralrt_raw* raw);

SPIRALRT_API int spiralrt_traj_read(const char* path, spiralrt_traj** out);
SPIRALRT_API int spiralrt_traj_write(const spiralrt_traj* traj, const char* path);
SPIRALRT_API int spiralrt_traj_info(const spiralrt_traj* traj);
SPIRALRT_API void spiralrt_traj_free(spiralrt_traj* traj);

/* ---- pipeline. `options` is a JSON object (NULL or "" means defaults);
   unknown keys are rejected. */

/* Beating-heart phantom. Report: ground truth (volumes, cycles, EF). */
SPIRALRT_API int spiralrt_phantom_generate(const char* config, spiralrt_images** images, spiralrt_masks** masks);

/* Spiral design, rotation schedule and optional gradient-system correction.
   Report: design summary. */
SPIRALRT_API int spiralrt_traj_design(const char* params, spiralrt_traj** out);

/* Simulates multi-coil k-space of one phantom slice. `maps` (may be NULL)
   receives the true coil sensitivities. */
SPIRALRT_API int spiralrt_acquire(const spiralrt_images* phantom, const spiralrt_traj* traj, const char* options,
                                  spiralrt_raw** raw, spiralrt_images** maps);

/* Walsh coil maps from the temporal average of all frames. */
SPIRALRT_API int spiralrt_estimate_maps(const spiralrt_raw* raw, const spiralrt_traj* traj, const char* options,
                                        spiralrt_images** maps);

/* Frame reconstruction (gridding, cgsense, cs, lrs). `maps` may be NULL to
   estimate them. Report: residual histories and parameters. */
SPIRALRT_API int spiralrt_recon(const spiralrt_raw* raw, const spiralrt_traj* traj, const spiralrt_images* maps,
                                const char* options, spiralrt_images** out);

/* Self-gating. Report: cycle boundaries and spacings. */
SPIRALRT_API int spiralrt_gate(const spiralrt_raw* raw, const spiralrt_traj* traj, const char* options);

/* Segmented binning into `phases` fully sampled frames (root-sum-of-squares
   magnitude). Report: per-phase completeness. */
SPIRALRT_API int spiralrt_bin(const spiralrt_raw* raw, const spiralrt_traj* traj, const char* options,
                              spiralrt_images** out);

SPIRALRT_API int spiralrt_weights_init(const char* hyper, uint64_t seed, const char* path);
SPIRALRT_API int spiralrt_model_load(const char* path, spiralrt_model** out);
SPIRALRT_API void spiralrt_model_free(spiralrt_model* model);
/* Segmentation and reconstruction of every image of an interim stack. */
SPIRALRT_API int spiralrt_infer(const spiralrt_model* model, const spiralrt_images* interim, int threads,
                                spiralrt_images** reconstruction, spiralrt_masks** segmentation);

/* Volume curve, ED/ES and EF from masks. Report: volume report. */
SPIRALRT_API int spiralrt_volumetry(const spiralrt_masks* masks, const char* options);

/* Agreement and quality metrics. Reports carry the values. */
SPIRALRT_API int spiralrt_eval_ba(const double* a, const double* b, size_t n);
SPIRALRT_API int spiralrt_eval_nrmse(const spiralrt_images* x, const spiralrt_images* ref);
SPIRALRT_API int spiralrt_eval_dice(const spiralrt_masks* a, const spiralrt_masks* b, int label);

#ifdef __cplusplus
}
#endif

#endif /* SPIRALRT_H_ */
