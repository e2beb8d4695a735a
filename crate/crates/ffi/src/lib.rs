//! C interface to `superchars`.
//!
//! Fonts and models are opaque heap handles created by `sc_*_load` and
//! released with the matching `sc_*_free`. Every fallible call returns an
//! [`ScStatus`]; the message of the most recent failure on the calling
//! thread is available from [`sc_last_error_message`]. Panics never cross
//! the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use superchars::classifier::{load_model, predict, Model};
use superchars::layout::{derive_geometry, plan_layout, FontSpec, LayoutConfig, Segmentation, SizePolicy};
use superchars::raster::{encode_png, render, FontHandle, ScImage};
use superchars::{exit, Error};

/// Status codes. 1 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Font = 3,
    Mismatch = 4,
    /// A required pointer was null or a string was not UTF-8.
    InvalidArgument = 5,
    /// The caller's buffer is smaller than the result.
    BufferTooSmall = 6,
    /// An internal panic was caught.
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScSegmentation {
    CharLevel = 0,
    WordLevel = 1,
}

/// Grid layout. `cut_length` must equal `grid_dim * grid_dim`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScLayout {
    pub image_size: u32,
    pub grid_dim: u32,
    pub cut_length: u32,
    pub segmentation: ScSegmentation,
}

/// Byte buffer allocated by the library; release with [`sc_bytes_free`].
#[repr(C)]
#[derive(Debug)]
pub struct ScBytes {
    pub data: *mut u8,
    pub len: usize,
}

/// Opaque font handle.
pub struct ScFont(FontHandle);

/// Opaque model handle.
pub struct ScModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(ScStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            exit::IO => ScStatus::Io,
            exit::CONFIG => ScStatus::Config,
            exit::FONT => ScStatus::Font,
            exit::MISMATCH => ScStatus::Mismatch,
            _ => ScStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(ScStatus::InvalidArgument, msg.to_owned())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ScStatus {
    let result = catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|_| Err(Failure(ScStatus::Internal, "internal panic".into())));
    match result {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            ScStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not UTF-8")))
}

unsafe fn text_arg<'a>(p: *const u8, len: usize) -> Result<&'a str, Failure> {
    if len == 0 {
        return Ok("");
    }
    if p.is_null() {
        return Err(invalid("text is null"));
    }
    std::str::from_utf8(std::slice::from_raw_parts(p, len)).map_err(|_| invalid("text is not UTF-8"))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid(&format!("{what} is null")))
}

fn layout_config(l: &ScLayout) -> Result<LayoutConfig, Failure> {
    let config = LayoutConfig {
        image_size: l.image_size,
        grid_dim: l.grid_dim,
        cut_length: l.cut_length,
        segmentation: match l.segmentation {
            ScSegmentation::CharLevel => Segmentation::CharLevel,
            ScSegmentation::WordLevel => Segmentation::WordLevel,
        },
        font: FontSpec {
            path: None,
            size_policy: SizePolicy::EmToCell,
        },
    };
    derive_geometry(&config).map_err(|e| Failure::from(Error::from(e)))?;
    Ok(config)
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to fit) and return its full length in bytes, excluding the
/// terminator. Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or point to `buf_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sc_last_error_message(buf: *mut c_char, buf_len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && buf_len > 0 {
            let n = msg.len().min(buf_len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Pixel size of one grid cell.
///
/// # Safety
/// `out_cell_px` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_cell_px(layout: *const ScLayout, out_cell_px: *mut u32) -> ScStatus {
    guard(|| {
        let layout = layout_config(ref_arg(layout, "layout")?)?;
        if out_cell_px.is_null() {
            return Err(invalid("out_cell_px is null"));
        }
        let geom = derive_geometry(&layout).map_err(|e| Failure::from(Error::from(e)))?;
        *out_cell_px = geom.cell_px;
        Ok(())
    })
}

/// Load a TrueType/OpenType font from a UTF-8 path.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_font_load(path: *const c_char, out: *mut *mut ScFont) -> ScStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let font = FontHandle::load(path).map_err(|e| Failure::from(Error::from(e)))?;
        *out = Box::into_raw(Box::new(ScFont(font)));
        Ok(())
    })
}

/// The font compiled into the library.
#[no_mangle]
pub extern "C" fn sc_font_bundled() -> *mut ScFont {
    Box::into_raw(Box::new(ScFont(FontHandle::bundled())))
}

/// # Safety
/// `font` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_font_free(font: *mut ScFont) {
    if !font.is_null() {
        drop(Box::from_raw(font));
    }
}

/// Render UTF-8 `text` into `out_pixels`, which must hold
/// `image_size * image_size` bytes (row-major, 0 = background).
/// `out_truncated` may be null.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn sc_render_text(
    font: *const ScFont,
    layout: *const ScLayout,
    text: *const u8,
    text_len: usize,
    out_pixels: *mut u8,
    out_len: usize,
    out_truncated: *mut bool,
) -> ScStatus {
    guard(|| {
        let font = ref_arg(font, "font")?;
        let layout = layout_config(ref_arg(layout, "layout")?)?;
        let text = text_arg(text, text_len)?;
        let need = layout.image_size as usize * layout.image_size as usize;
        if out_pixels.is_null() {
            return Err(invalid("out_pixels is null"));
        }
        if out_len < need {
            return Err(Failure(
                ScStatus::BufferTooSmall,
                format!("need {need} bytes, got {out_len}"),
            ));
        }
        let plan = plan_layout(text, &layout).map_err(|e| Failure::from(Error::from(e)))?;
        let img = render(&plan, &font.0, &layout).map_err(|e| Failure::from(Error::from(e)))?;
        ptr::copy_nonoverlapping(img.pixels.as_ptr(), out_pixels, need);
        if !out_truncated.is_null() {
            *out_truncated = plan.truncated;
        }
        Ok(())
    })
}

/// Encode a square grayscale buffer of `side * side` bytes as PNG.
///
/// # Safety
/// `pixels` must hold `side * side` bytes and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sc_encode_png(pixels: *const u8, side: u32, out: *mut ScBytes) -> ScStatus {
    guard(|| {
        if pixels.is_null() || out.is_null() {
            return Err(invalid("pixels or out is null"));
        }
        if side == 0 {
            return Err(invalid("side is zero"));
        }
        let n = side as usize * side as usize;
        let img = ScImage {
            side,
            pixels: std::slice::from_raw_parts(pixels, n).to_vec(),
        };
        let bytes = encode_png(&img).into_boxed_slice();
        let len = bytes.len();
        *out = ScBytes {
            data: Box::into_raw(bytes).cast::<u8>(),
            len,
        };
        Ok(())
    })
}

/// # Safety
/// `bytes` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sc_bytes_free(bytes: ScBytes) {
    if !bytes.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(bytes.data, bytes.len)));
    }
}

/// Load a `.scm` model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_model_load(path: *const c_char, out: *mut *mut ScModel) -> ScStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let model = load_model(path).map_err(|e| Failure::from(Error::from(e)))?;
        *out = Box::into_raw(Box::new(ScModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_model_free(model: *mut ScModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_model_num_classes(model: *const ScModel) -> u32 {
    model.as_ref().map_or(0, |m| m.0.config.num_classes)
}

/// Input image side in pixels, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_model_input_side(model: *const ScModel) -> u32 {
    model.as_ref().map_or(0, |m| m.0.config.input_side)
}

/// Classify UTF-8 `text`. Writes the 0-based class to `out_class` and, when
/// `out_probs` is non-null, the class probabilities (it must hold
/// `sc_model_num_classes` values). Unless `allow_mismatch` is set, a layout
/// or font that differs from the training dataset returns
/// [`ScStatus::Mismatch`].
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn sc_predict(
    model: *const ScModel,
    font: *const ScFont,
    layout: *const ScLayout,
    text: *const u8,
    text_len: usize,
    allow_mismatch: bool,
    out_class: *mut u32,
    out_probs: *mut f64,
    probs_len: usize,
) -> ScStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let font = ref_arg(font, "font")?;
        let layout = layout_config(ref_arg(layout, "layout")?)?;
        let text = text_arg(text, text_len)?;
        if out_class.is_null() {
            return Err(invalid("out_class is null"));
        }
        let k = model.0.num_classes();
        if !out_probs.is_null() && probs_len < k {
            return Err(Failure(
                ScStatus::BufferTooSmall,
                format!("need {k} probabilities, got room for {probs_len}"),
            ));
        }
        let pred = predict(&model.0, text, &layout, &font.0, allow_mismatch)
            .map_err(|e| Failure::from(Error::from(e)))?;
        *out_class = pred.class as u32;
        if !out_probs.is_null() {
            ptr::copy_nonoverlapping(pred.probs.as_ptr(), out_probs, k);
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid8() -> ScLayout {
        ScLayout {
            image_size: 64,
            grid_dim: 8,
            cut_length: 64,
            segmentation: ScSegmentation::CharLevel,
        }
    }

    fn last_error() -> String {
        unsafe {
            let n = sc_last_error_message(ptr::null_mut(), 0);
            let mut buf = vec![0 as c_char; n + 1];
            sc_last_error_message(buf.as_mut_ptr(), buf.len());
            CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
        }
    }

    #[test]
    fn cell_px_and_bad_layouts() {
        let mut cell = 0;
        unsafe {
            assert_eq!(sc_cell_px(&grid8(), &mut cell), ScStatus::Ok);
            assert_eq!(cell, 8);
            let bad = ScLayout { cut_length: 10, ..grid8() };
            assert_eq!(sc_cell_px(&bad, &mut cell), ScStatus::Config);
            assert!(last_error().contains("cut_length"));
            assert_eq!(sc_cell_px(ptr::null(), &mut cell), ScStatus::InvalidArgument);
        }
    }

    #[test]
    fn render_matches_library() {
        let font = sc_font_bundled();
        let text = "你好 world";
        let mut px = vec![0u8; 64 * 64];
        let mut truncated = true;
        unsafe {
            let st = sc_render_text(font, &grid8(), text.as_ptr(), text.len(), px.as_mut_ptr(), px.len(), &mut truncated);
            assert_eq!(st, ScStatus::Ok);
            let small = sc_render_text(font, &grid8(), text.as_ptr(), text.len(), px.as_mut_ptr(), 10, ptr::null_mut());
            assert_eq!(small, ScStatus::BufferTooSmall);
            sc_font_free(font);
        }
        assert!(!truncated);
        let layout = LayoutConfig::new(64, 8, Segmentation::CharLevel);
        let expected = superchars::raster::render_text(text, &FontHandle::bundled(), &layout).unwrap();
        assert_eq!(px, expected.pixels);
    }

    #[test]
    fn png_bytes_round_trip() {
        let px: Vec<u8> = (0..=255).collect();
        let mut out = ScBytes { data: ptr::null_mut(), len: 0 };
        unsafe {
            assert_eq!(sc_encode_png(px.as_ptr(), 16, &mut out), ScStatus::Ok);
            let bytes = std::slice::from_raw_parts(out.data, out.len).to_vec();
            sc_bytes_free(out);
            assert_eq!(superchars::raster::decode_png(&bytes).unwrap().pixels, px);
        }
    }

    #[test]
    fn missing_files_report_codes() {
        let mut font = ptr::null_mut();
        let mut model = ptr::null_mut();
        unsafe {
            assert_eq!(sc_font_load(c"/no/such.ttf".as_ptr(), &mut font), ScStatus::Font);
            assert!(font.is_null());
            assert_eq!(sc_model_load(c"/no/such.scm".as_ptr(), &mut model), ScStatus::Io);
            assert!(model.is_null());
            assert_eq!(sc_font_load(ptr::null(), &mut font), ScStatus::InvalidArgument);
            sc_font_free(ptr::null_mut());
            sc_model_free(ptr::null_mut());
            assert_eq!(sc_model_num_classes(ptr::null()), 0);
        }
    }
}
