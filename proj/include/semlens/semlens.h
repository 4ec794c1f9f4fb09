/* semlens — semantics-guided video super-resolution; public C interface.
 *
 * Every function returns a status code:
 *   SLZ_OK (0)          success
 *   SLZ_ERR_RUNTIME (1) runtime failure (non-finite values, I/O, internal)
 *   SLZ_ERR_VALIDATION (2) invalid input (bad config, shapes, paths, bounds)
 * On failure, slz_last_error() returns a thread-local diagnostic message that
 * stays valid until the next slz_* call on the same thread.
 *
 * All paths are UTF-8. Passing NULL for an optional argument selects the
 * documented default. A seed argument < 0 means "use train.seed from the
 * config". The library is single-threaded per model handle; distinct handles
 * may be used from distinct threads.
 */
#ifndef SEMLENS_H
#define SEMLENS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SLZ_OK 0
#define SLZ_ERR_RUNTIME 1
#define SLZ_ERR_VALIDATION 2

/* Last error message for the calling thread ("" if none). */
const char* slz_last_error(void);

/* --- one-shot commands ------------------------------------------------- */

/* Generate a synthetic dataset (clip directories + manifest.tsv) under
 * out_dir. config_path NULL = built-in defaults. */
int slz_gen_data(const char* config_path, int64_t seed, const char* out_dir);

/* Train a model on the dataset's train split; writes model.ckpt, metrics.csv
 * and train_log.txt into out_dir. */
int slz_train(const char* config_path, int64_t seed, const char* dataset_dir,
              const char* out_dir);

/* Evaluate a checkpoint (NULL = freshly initialized model) on the dataset's
 * val split (falls back to the train split) and write a metrics CSV.
 * force != 0 skips the checkpoint/config hash compatibility check. */
int slz_eval(const char* config_path, int64_t seed, const char* checkpoint_path,
             int force, const char* dataset_dir, const char* out_csv);

/* Super-resolve frame t_ref (< 0 = middle frame) of clip_id (NULL = every
 * val-split clip) and write <clip>_sr.ppm plus a <clip>_bicubic.ppm baseline
 * into out_dir. */
int slz_infer(const char* config_path, int64_t seed, const char* checkpoint_path,
              int force, const char* dataset_dir, const char* clip_id, int t_ref,
              const char* out_dir);

/* Gradient attribution of an SR target patch: writes one attribution_NN.pgm
 * heat map per input frame into out_dir. clip_id NULL = first val clip;
 * y0/x0/ph/pw < 0 = centered patch of half the frame extent (HR pixels). */
int slz_attribute(const char* config_path, int64_t seed, const char* checkpoint_path,
                  int force, const char* dataset_dir, const char* clip_id, int t_ref,
                  int64_t y0, int64_t x0, int64_t ph, int64_t pw, const char* out_dir);

/* Run the built-in invariant suite. The per-check report (PASS/FAIL lines) is
 * copied into report (NUL-terminated, truncated to report_len) when report is
 * non-NULL. corrupt_softmax != 0 enables the negative-control fault injection.
 * Returns SLZ_OK iff every check passed. */
int slz_selftest(int corrupt_softmax, char* report, size_t report_len);

/* --- model handle ------------------------------------------------------ */

typedef struct slz_model slz_model;

/* Build a model from config (+ optional checkpoint). Returns NULL on error;
 * consult slz_last_error(). */
slz_model* slz_model_open(const char* config_path, int64_t seed,
                          const char* checkpoint_path, int force);

/* As slz_infer, but reusing an open model. clip_id must name a manifest clip. */
int slz_model_infer_clip(slz_model* model, const char* dataset_dir,
                         const char* clip_id, int t_ref, const char* out_dir);

/* As slz_attribute, but reusing an open model. */
int slz_model_attribute(slz_model* model, const char* dataset_dir,
                        const char* clip_id, int t_ref, int64_t y0, int64_t x0,
                        int64_t ph, int64_t pw, const char* out_dir);

/* Number of learnable parameters (useful for smoke checks). Returns 0 if
 * model is NULL. */
int64_t slz_model_param_count(const slz_model* model);

void slz_model_close(slz_model* model);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SEMLENS_H */
