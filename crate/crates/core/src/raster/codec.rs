use std::io::Cursor;

use super::{RasterError, ScImage};

/// Encode as an 8-bit grayscale PNG.
pub fn encode_png(image: &ScImage) -> Vec<u8> {
    encode(image.side, png::ColorType::Grayscale, &image.pixels)
}

/// Encode with the gray channel replicated into RGB, for consumers that
/// expect three channels.
pub fn encode_png_rgb(image: &ScImage) -> Vec<u8> {
    let rgb: Vec<u8> = image.pixels.iter().flat_map(|&v| [v, v, v]).collect();
    encode(image.side, png::ColorType::Rgb, &rgb)
}

fn encode(side: u32, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, side, side);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer
            .write_image_data(data)
            .expect("buffer length matches image size");
    }
    out
}

/// Decode a square 8-bit grayscale PNG. RGB input is accepted when all three
/// channels agree.
pub fn decode_png(bytes: &[u8]) -> Result<ScImage, RasterError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| RasterError::PngDecode(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| RasterError::PngDecode(e.to_string()))?;
    buf.truncate(info.buffer_size());
    if info.width != info.height {
        return Err(RasterError::PngDecode(format!(
            "image is {}x{}, expected a square",
            info.width, info.height
        )));
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(RasterError::PngDecode("expected 8-bit samples".into()));
    }
    let pixels = match info.color_type {
        png::ColorType::Grayscale => buf,
        png::ColorType::Rgb => {
            let mut gray = Vec::with_capacity(buf.len() / 3);
            for px in buf.chunks_exact(3) {
                if px[0] != px[1] || px[1] != px[2] {
                    return Err(RasterError::PngDecode("RGB image is not gray".into()));
                }
                gray.push(px[0]);
            }
            gray
        }
        other => {
            return Err(RasterError::PngDecode(format!(
                "unsupported color type {other:?}"
            )))
        }
    };
    Ok(ScImage {
        side: info.width,
        pixels,
    })
}
