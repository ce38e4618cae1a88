#ifndef MRFCS_H
#define MRFCS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum MrfcsStatus {
  MRFCS_STATUS_OK = 0,
  MRFCS_STATUS_NULL_POINTER = 1,
  MRFCS_STATUS_INVALID_ARGUMENT = 2,
  MRFCS_STATUS_FORMAT = 3,
  MRFCS_STATUS_IO = 4,
  MRFCS_STATUS_INTERNAL = 5,
  MRFCS_STATUS_PANIC = 6,
} MrfcsStatus;

typedef struct MrfcsDictionary MrfcsDictionary;

typedef struct MrfcsPhantom MrfcsPhantom;

typedef struct MrfcsSequence MrfcsSequence;

/**
 * One voxel's relaxation times (ms) and proton density.
 */
typedef struct MrfcsTissue {
  double t1_ms;
  double t2_ms;
  double pd;
} MrfcsTissue;

/**
 * Dictionary match. `atom_index` is -1 for the null match, in which
 * case every other field is 0.
 */
typedef struct MrfcsMatch {
  double t1_ms;
  double t2_ms;
  double pd;
  double similarity;
  int64_t atom_index;
} MrfcsMatch;

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *mrfcs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mrfcs_version(void);

/**
 * FISP fingerprinting sequence with the default timing and a seeded
 * flip-angle schedule.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum MrfcsStatus mrfcs_sequence_new(size_t n_tr,
                                    uint64_t schedule_seed,
                                    struct MrfcsSequence **out);

/**
 * # Safety
 * `seq` must be null or a handle from [`mrfcs_sequence_new`] not yet freed.
 */
void mrfcs_sequence_free(struct MrfcsSequence *seq);

/**
 * # Safety
 * `seq` must be a live sequence handle.
 */
size_t mrfcs_sequence_n_tr(const struct MrfcsSequence *seq);

/**
 * Complex fingerprint of one tissue; `len` must equal the sequence's TR count.
 *
 * # Safety
 * `seq` and `tissue` must be valid; `out_re` and `out_im` must hold `len` doubles.
 */
enum MrfcsStatus mrfcs_simulate_fingerprint(const struct MrfcsSequence *seq,
                                            const struct MrfcsTissue *tissue_in,
                                            double *out_re,
                                            double *out_im,
                                            size_t len);

/**
 * T1-weighted spin echo, T2-weighted TSE and FLAIR intensities with the
 * default protocol, written to `out[0..3]`.
 *
 * # Safety
 * `tissue` must be valid; `out` must hold 3 doubles.
 */
enum MrfcsStatus mrfcs_simulate_contrasts(const struct MrfcsTissue *tissue_in, double *out);

/**
 * Dictionary over a named grid preset (`"desk"` or `"full"`).
 *
 * # Safety
 * `preset` must be a NUL-terminated string; `seq` a live handle; `out` writable.
 */
enum MrfcsStatus mrfcs_dictionary_build_preset(const char *preset,
                                               const struct MrfcsSequence *seq,
                                               struct MrfcsDictionary **out);

/**
 * Dictionary over explicit T1 and T2 values (ms, strictly increasing).
 * Pairs with T2 > T1 are excluded.
 *
 * # Safety
 * `t1_ms`/`t2_ms` must hold `n_t1`/`n_t2` doubles; `seq` live; `out` writable.
 */
enum MrfcsStatus mrfcs_dictionary_build(const double *t1_ms,
                                        size_t n_t1,
                                        const double *t2_ms,
                                        size_t n_t2,
                                        const struct MrfcsSequence *seq,
                                        struct MrfcsDictionary **out);

/**
 * Loads a dictionary container written by [`mrfcs_dictionary_save`] or the CLI.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` writable.
 */
enum MrfcsStatus mrfcs_dictionary_load(const char *path, struct MrfcsDictionary **out);

/**
 * # Safety
 * `dict` must be live; `path` a NUL-terminated string.
 */
enum MrfcsStatus mrfcs_dictionary_save(const struct MrfcsDictionary *dict, const char *path);

/**
 * # Safety
 * `dict` must be null or a live dictionary handle.
 */
void mrfcs_dictionary_free(struct MrfcsDictionary *dict);

/**
 * # Safety
 * `dict` must be a live dictionary handle.
 */
size_t mrfcs_dictionary_n_atoms(const struct MrfcsDictionary *dict);

/**
 * # Safety
 * `dict` must be a live dictionary handle.
 */
size_t mrfcs_dictionary_atom_len(const struct MrfcsDictionary *dict);

/**
 * Content hash (hex SHA-256), NUL-terminated, copied into `buf` of
 * `buf_len` bytes. Needs 65 bytes.
 *
 * # Safety
 * `dict` must be live; `buf` must hold `buf_len` bytes.
 */
enum MrfcsStatus mrfcs_dictionary_hash(const struct MrfcsDictionary *dict,
                                       char *buf,
                                       size_t buf_len);

/**
 * Matches one complex signal of `len` samples.
 *
 * # Safety
 * `dict` live; `re`/`im` hold `len` doubles; `out` writable.
 */
enum MrfcsStatus mrfcs_dictionary_match(const struct MrfcsDictionary *dict,
                                        const double *re,
                                        const double *im,
                                        size_t len,
                                        struct MrfcsMatch *out);

/**
 * Square desk phantom of `size` pixels with the default tissue table.
 *
 * # Safety
 * `out` must be writable.
 */
enum MrfcsStatus mrfcs_phantom_create(size_t size, uint64_t seed, struct MrfcsPhantom **out);

/**
 * # Safety
 * `p` must be null or a live phantom handle.
 */
void mrfcs_phantom_free(struct MrfcsPhantom *p);

/**
 * # Safety
 * `p` live; `height` and `width` writable.
 */
enum MrfcsStatus mrfcs_phantom_dims(const struct MrfcsPhantom *p, size_t *height, size_t *width);

/**
 * Copies the T1 (ms), T2 (ms), PD, B0 (Hz) and label maps. Any output
 * pointer may be null to skip that map; the others hold `len` =
 * height*width elements.
 *
 * # Safety
 * `p` live; each non-null output holds `len` elements.
 */
enum MrfcsStatus mrfcs_phantom_copy_maps(const struct MrfcsPhantom *p,
                                         double *t1_ms,
                                         double *t2_ms,
                                         double *pd,
                                         double *b0_hz,
                                         uint8_t *labels,
                                         size_t len);

/**
 * 100 * |x - ref| / |ref|.
 *
 * # Safety
 * `x` and `reference` hold `height*width` doubles; `out` writable.
 */
enum MrfcsStatus mrfcs_nrmse(const double *x,
                             const double *reference,
                             size_t height,
                             size_t width,
                             double *out);

/**
 * PSNR in dB with the reference maximum as peak; +infinity for identical images.
 *
 * # Safety
 * As [`mrfcs_nrmse`].
 */
enum MrfcsStatus mrfcs_psnr(const double *x,
                            const double *reference,
                            size_t height,
                            size_t width,
                            double *out);

/**
 * Mean SSIM over 11x11 Gaussian windows.
 *
 * # Safety
 * As [`mrfcs_nrmse`].
 */
enum MrfcsStatus mrfcs_ssim(const double *x,
                            const double *reference,
                            size_t height,
                            size_t width,
                            double *out);

#endif  /* MRFCS_H */
