#ifndef SUPERCHARS_H
#define SUPERCHARS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScSegmentation {
  SC_SEGMENTATION_CHAR_LEVEL = 0,
  SC_SEGMENTATION_WORD_LEVEL = 1,
} ScSegmentation;

// Status codes. 1 to 4 match the command-line exit codes.
typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_IO = 1,
  SC_STATUS_CONFIG = 2,
  SC_STATUS_FONT = 3,
  SC_STATUS_MISMATCH = 4,
  // A required pointer was null or a string was not UTF-8.
  SC_STATUS_INVALID_ARGUMENT = 5,
  // The caller's buffer is smaller than the result.
  SC_STATUS_BUFFER_TOO_SMALL = 6,
  // An internal panic was caught.
  SC_STATUS_INTERNAL = 7,
} ScStatus;

// Opaque font handle.
typedef struct ScFont ScFont;

// Opaque model handle.
typedef struct ScModel ScModel;

// Grid layout. `cut_length` must equal `grid_dim * grid_dim`.
typedef struct ScLayout {
  uint32_t image_size;
  uint32_t grid_dim;
  uint32_t cut_length;
  enum ScSegmentation segmentation;
} ScLayout;

// Byte buffer allocated by the library; release with [`sc_bytes_free`].
typedef struct ScBytes {
  uint8_t *data;
  uintptr_t len;
} ScBytes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message of this thread into `buf` (NUL-terminated,
// truncated to fit) and return its full length in bytes, excluding the
// terminator. Pass a null `buf` to query the length.
//
// # Safety
// `buf` must be null or point to `buf_len` writable bytes.
uintptr_t sc_last_error_message(char *buf, uintptr_t buf_len);

// Pixel size of one grid cell.
//
// # Safety
// `out_cell_px` must be a valid pointer.
enum ScStatus sc_cell_px(const struct ScLayout *layout, uint32_t *out_cell_px);

// Load a TrueType/OpenType font from a UTF-8 path.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ScStatus sc_font_load(const char *path, struct ScFont **out);

// The font compiled into the library.
struct ScFont *sc_font_bundled(void);

// # Safety
// `font` must be null or a handle from this library not yet freed.
void sc_font_free(struct ScFont *font);

// Render UTF-8 `text` into `out_pixels`, which must hold
// `image_size * image_size` bytes (row-major, 0 = background).
// `out_truncated` may be null.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum ScStatus sc_render_text(const struct ScFont *font,
                             const struct ScLayout *layout,
                             const uint8_t *text,
                             uintptr_t text_len,
                             uint8_t *out_pixels,
                             uintptr_t out_len,
                             bool *out_truncated);

// Encode a square grayscale buffer of `side * side` bytes as PNG.
//
// # Safety
// `pixels` must hold `side * side` bytes and `out` must be valid.
enum ScStatus sc_encode_png(const uint8_t *pixels, uint32_t side, struct ScBytes *out);

// # Safety
// `bytes` must come from this library and not have been freed.
void sc_bytes_free(struct ScBytes bytes);

// Load a `.scm` model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ScStatus sc_model_load(const char *path, struct ScModel **out);

// # Safety
// `model` must be null or a handle from this library not yet freed.
void sc_model_free(struct ScModel *model);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uint32_t sc_model_num_classes(const struct ScModel *model);

// Input image side in pixels, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uint32_t sc_model_input_side(const struct ScModel *model);

// Classify UTF-8 `text`. Writes the 0-based class to `out_class` and, when
// `out_probs` is non-null, the class probabilities (it must hold
// `sc_model_num_classes` values). Unless `allow_mismatch` is set, a layout
// or font that differs from the training dataset returns
// [`ScStatus::Mismatch`].
//
// # Safety
// Pointers must be valid for the stated lengths.
enum ScStatus sc_predict(const struct ScModel *model,
                         const struct ScFont *font,
                         const struct ScLayout *layout,
                         const uint8_t *text,
                         uintptr_t text_len,
                         bool allow_mismatch,
                         uint32_t *out_class,
                         double *out_probs,
                         uintptr_t probs_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUPERCHARS_H */
