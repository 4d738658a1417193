//! 8-bit grayscale images and PNG interchange for frames and masks.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Mask;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Format(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                pixels.push(f(i, j));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.pixels[j * self.width + i]
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().expect("in-memory write");
            writer
                .write_image_data(&self.pixels)
                .expect("in-memory write");
        }
        out
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let (width, height, pixels) = decode_gray(bytes)?;
        Self::new(width, height, pixels)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode_png())?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode_png(&fs::read(path)?)
    }
}

/// Decodes any grayscale (or RGB/RGBA, averaged) PNG to 8-bit samples.
fn decode_gray(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec
        .read_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::Format("png: unexpanded palette".into()));
        }
    };
    let pixels = match channels {
        1 => buf,
        2 => buf.chunks_exact(2).map(|c| c[0]).collect(),
        n => buf
            .chunks_exact(n)
            .map(|c| ((c[0] as u16 + c[1] as u16 + c[2] as u16 + 1) / 3) as u8)
            .collect(),
    };
    Ok((w, h, pixels))
}

/// 1-bit grayscale PNG, white = foreground.
pub fn encode_mask_png(mask: &Mask) -> Vec<u8> {
    let (w, h) = (mask.width(), mask.height());
    let stride = w.div_ceil(8);
    let mut data = vec![0u8; stride * h];
    for r in mask.runs() {
        for i in r.start as usize..(r.start + r.len) as usize {
            data[r.row as usize * stride + i / 8] |= 0x80 >> (i % 8);
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::One);
        let mut writer = enc.write_header().expect("in-memory write");
        writer.write_image_data(&data).expect("in-memory write");
    }
    out
}

/// Reads a mask PNG of any depth; samples `>= 128` are foreground.
pub fn decode_mask_png(bytes: &[u8]) -> Result<Mask> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::IDENTITY);
    let header = dec
        .read_header_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let one_bit =
        header.bit_depth == png::BitDepth::One && header.color_type == png::ColorType::Grayscale;
    if one_bit {
        let (w, h) = (header.width as usize, header.height as usize);
        let mut reader = dec
            .read_info()
            .map_err(|e| Error::Format(format!("png: {e}")))?;
        let mut buf = vec![0; reader.output_buffer_size()];
        reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Format(format!("png: {e}")))?;
        let stride = w.div_ceil(8);
        let bits: Vec<bool> = (0..h)
            .flat_map(|j| (0..w).map(move |i| (j, i)))
            .map(|(j, i)| buf[j * stride + i / 8] & (0x80 >> (i % 8)) != 0)
            .collect();
        return Mask::from_bits(w, h, &bits);
    }
    let (w, h, pixels) = decode_gray(bytes)?;
    let bits: Vec<bool> = pixels.iter().map(|&p| p >= 128).collect();
    Mask::from_bits(w, h, &bits)
}

pub fn save_mask_png(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    fs::write(path, encode_mask_png(mask))?;
    Ok(())
}

pub fn load_mask_png(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask_png(&fs::read(path)?)
}
