use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// RGB image in planar CHW layout with values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(w: usize, h: usize) -> Image {
        Image { w, h, data: vec![0.0; 3 * w * h] }
    }

    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.h + y) * self.w + x
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.idx(c, y, x)]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        let i = self.idx(c, y, x);
        self.data[i] = v;
    }
}

/// Writes binary 8-bit PPM (P6). Values are clamped to [0, 1] and
/// quantized by round(v * 255).
pub fn write_ppm(path: &Path, img: &Image) -> Result<()> {
    let mut bytes = Vec::with_capacity(3 * img.w * img.h + 32);
    bytes.extend_from_slice(format!("P6\n{} {}\n255\n", img.w, img.h).as_bytes());
    for y in 0..img.h {
        for x in 0..img.w {
            for c in 0..3 {
                let v = img.get(c, y, x).clamp(0.0, 1.0);
                bytes.push((v * 255.0).round() as u8);
            }
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    let mut raw = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;

    let parse = |msg: &str| Error::Parse { path: path.to_path_buf(), msg: msg.to_string() };
    // header: "P6", width, height, maxval as whitespace-separated tokens,
    // then a single whitespace byte before the pixel payload
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        while pos < raw.len() && raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse("truncated header"));
        }
        Ok(String::from_utf8_lossy(&raw[start..pos]).into_owned())
    };

    if token()? != "P6" {
        return Err(parse("not a binary PPM (P6) file"));
    }
    let w: usize = token()?.parse().map_err(|_| parse("bad width"))?;
    let h: usize = token()?.parse().map_err(|_| parse("bad height"))?;
    let maxval: usize = token()?.parse().map_err(|_| parse("bad maxval"))?;
    if maxval != 255 {
        return Err(parse("only maxval 255 supported"));
    }
    let body = pos + 1;
    if raw.len() < body + 3 * w * h {
        return Err(parse("truncated pixel data"));
    }

    let mut img = Image::new(w, h);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let v = raw[body + 3 * (y * w + x) + c] as f32 / 255.0;
                img.set(c, y, x, v);
            }
        }
    }
    Ok(img)
}
