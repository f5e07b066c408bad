use rand::Rng;

use super::{Image, NUM_FRAMES, PATCH};
use crate::error::{Error, Result};
use crate::numerics::Array;

/// Exactly [`NUM_FRAMES`] frames of one clip, shape `16 x H x W x 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub frames: Array<f32>,
    pub source_frame_count: usize,
    pub source_id: String,
}

impl FrameStack {
    pub fn from_images(images: &[Image], source_frame_count: usize, source_id: impl Into<String>) -> Result<Self> {
        if images.len() != NUM_FRAMES {
            return Err(Error::contract(format!("frame stack needs {NUM_FRAMES} frames, got {}", images.len())));
        }
        let (w, h) = (images[0].width, images[0].height);
        if images.iter().any(|i| i.width != w || i.height != h) {
            return Err(Error::contract("frame stack images differ in size"));
        }
        let mut data = Vec::with_capacity(NUM_FRAMES * w * h * 3);
        for img in images {
            data.extend_from_slice(&img.data);
        }
        Ok(FrameStack { frames: Array::new([NUM_FRAMES, h, w, 3], data)?, source_frame_count, source_id: source_id.into() })
    }

    pub fn height(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.frames.shape()[2]
    }

    pub fn frame(&self, t: usize) -> Image {
        let (h, w) = (self.height(), self.width());
        let n = h * w * 3;
        Image { width: w, height: h, data: self.frames.data()[t * n..(t + 1) * n].to_vec() }
    }

    pub fn images(&self) -> Vec<Image> {
        (0..NUM_FRAMES).map(|t| self.frame(t)).collect()
    }

    fn with_images(&self, images: &[Image]) -> Result<Self> {
        Self::from_images(images, self.source_frame_count, self.source_id.clone())
    }
}

/// Indices `round(i (L-1) / (n-1))`, evenly spanning first to last frame.
pub fn sample_indices(len: usize, n: usize) -> Result<Vec<usize>> {
    if len < n {
        return Err(Error::Data(format!("video rejected: {len} frames, need at least {n}")));
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let step = (len - 1) as f64 / (n - 1) as f64;
    Ok((0..n).map(|i| (i as f64 * step).round() as usize).collect())
}

/// Evenly sample a 16-frame clip from a whole video.
pub fn sample_frames(video: &[Image], source_id: &str) -> Result<FrameStack> {
    let idx = sample_indices(video.len(), NUM_FRAMES).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{source_id}: {m}")),
        other => other,
    })?;
    let picked: Vec<Image> = idx.iter().map(|&i| video[i].clone()).collect();
    FrameStack::from_images(&picked, video.len(), source_id)
}

/// Bilinear resample with corner alignment; output clamped to `[0, 1]`.
pub fn resize_image(img: &Image, out_w: usize, out_h: usize) -> Image {
    if img.width == out_w && img.height == out_h {
        return img.clone();
    }
    let map = |o: usize, out: usize, inp: usize| -> (usize, usize, f32) {
        if out <= 1 || inp <= 1 {
            return (0, 0, 0.0);
        }
        let s = o as f64 * (inp - 1) as f64 / (out - 1) as f64;
        let i0 = (s.floor() as usize).min(inp - 1);
        let i1 = (i0 + 1).min(inp - 1);
        (i0, i1, (s - i0 as f64) as f32)
    };
    let mut out = Image::new(out_w, out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = map(y, out_h, img.height);
        for x in 0..out_w {
            let (x0, x1, fx) = map(x, out_w, img.width);
            let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
            let mut px = [0.0f32; 3];
            for ch in 0..3 {
                let top = a[ch] + (b[ch] - a[ch]) * fx;
                let bot = c[ch] + (d[ch] - c[ch]) * fx;
                px[ch] = (top + (bot - top) * fy).clamp(0.0, 1.0);
            }
            out.set(x, y, px);
        }
    }
    out
}

/// Resize every frame to `res x res` (anisotropic when the source is not square).
pub fn resize(stack: &FrameStack, res: usize) -> Result<FrameStack> {
    if res == 0 || res % PATCH != 0 {
        return Err(Error::contract(format!("resolution {res} is not a positive multiple of {PATCH}")));
    }
    if stack.width() == res && stack.height() == res {
        return Ok(stack.clone());
    }
    let images: Vec<Image> = stack.images().iter().map(|i| resize_image(i, res, res)).collect();
    stack.with_images(&images)
}

/// Data augmentation, only used to reproduce the augmentation ablation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Augmentation {
    pub flip: bool,
    pub crop: bool,
}

impl Augmentation {
    pub const NONE: Augmentation = Augmentation { flip: false, crop: false };

    pub fn is_none(&self) -> bool {
        !self.flip && !self.crop
    }

    /// Same random flip/crop applied to every frame of the clip.
    pub fn apply(&self, stack: &FrameStack, rng: &mut impl Rng) -> Result<FrameStack> {
        if self.is_none() {
            return Ok(stack.clone());
        }
        let (w, h) = (stack.width(), stack.height());
        let flip = self.flip && rng.gen_bool(0.5);
        let crop = if self.crop {
            let scale: f64 = rng.gen_range(0.64..1.0);
            let (cw, ch) = (((w as f64) * scale.sqrt()).round() as usize, ((h as f64) * scale.sqrt()).round() as usize);
            let (cw, ch) = (cw.clamp(1, w), ch.clamp(1, h));
            Some((rng.gen_range(0..=w - cw), rng.gen_range(0..=h - ch), cw, ch))
        } else {
            None
        };
        let images: Vec<Image> = stack
            .images()
            .into_iter()
            .map(|img| {
                let mut img = match crop {
                    Some((x0, y0, cw, ch)) => {
                        let mut c = Image::new(cw, ch);
                        for y in 0..ch {
                            for x in 0..cw {
                                c.set(x, y, img.get(x0 + x, y0 + y));
                            }
                        }
                        resize_image(&c, w, h)
                    }
                    None => img,
                };
                if flip {
                    for y in 0..h {
                        for x in 0..w / 2 {
                            let (a, b) = (img.get(x, y), img.get(w - 1 - x, y));
                            img.set(x, y, b);
                            img.set(w - 1 - x, y, a);
                        }
                    }
                }
                img
            })
            .collect();
        stack.with_images(&images)
    }
}
