use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// RGB image with channel values in `[0, 1]`, stored `H x W x 3` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image { width, height, data: vec![0.0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut img = Self::new(width, height);
        for px in img.data.chunks_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn fill_rect(&mut self, x0: usize, y0: usize, w: usize, h: usize, rgb: [f32; 3]) {
        for y in y0..(y0 + h).min(self.height) {
            for x in x0..(x0 + w).min(self.width) {
                self.set(x, y, rgb);
            }
        }
    }

    /// Binary P6 encoding with maxval 255.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PPM header".into()));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Format("bad PPM header".into()))?);
        }
        if fields[0] != "P6" {
            return Err(Error::Format(format!("expected P6 magic, found {:?}", fields[0])));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PPM header field {s:?}")));
        let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(Error::Format(format!("unsupported PPM maxval {maxval}")));
        }
        pos += 1; // single whitespace after maxval
        let n = width * height * 3;
        let body = bytes.get(pos..pos + n).ok_or_else(|| Error::Format("truncated PPM body".into()))?;
        Ok(Image { width, height, data: body.iter().map(|&b| b as f32 / 255.0).collect() })
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_ppm()).map_err(|e| Error::io(path, e))
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_ppm(&bytes)
    }
}

/// File name of frame `i` inside a video directory.
pub fn frame_file_name(i: usize) -> String {
    format!("frame_{i:05}.ppm")
}

/// Read every `frame_%05d.ppm` in `dir`, in index order.
pub fn read_video_dir(dir: &Path) -> Result<Vec<Image>> {
    let mut frames = Vec::new();
    loop {
        let p = dir.join(frame_file_name(frames.len()));
        if !p.exists() {
            break;
        }
        frames.push(Image::read_ppm(&p)?);
    }
    if frames.is_empty() && !dir.is_dir() {
        return Err(Error::Data(format!("video directory {} does not exist", dir.display())));
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_is_exact_on_8bit_values() {
        let mut img = Image::new(5, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = ((i * 37) % 256) as f32 / 255.0;
        }
        let bytes = img.to_ppm();
        assert!(bytes.starts_with(b"P6\n5 3\n255\n"));
        let back = Image::from_ppm(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.to_ppm(), bytes);
    }

    #[test]
    fn ppm_rejects_other_magic() {
        assert!(Image::from_ppm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(Image::from_ppm(b"P6\n2 2\n255\n\x00").is_err());
    }
}
