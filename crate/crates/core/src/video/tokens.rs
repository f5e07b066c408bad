use super::{FrameStack, NUM_FRAMES, PATCH, TUBELET};
use crate::error::{Error, Result};
use crate::numerics::{Array, Scalar};

/// Tubelet token dimension: `2 x 16 x 16 x 3` pixels.
pub const TOKEN_DIM: usize = TUBELET * PATCH * PATCH * 3;

/// Extent of the token grid: hyper-frames, patch rows, patch columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct GridDims {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl GridDims {
    pub fn new(t: usize, h: usize, w: usize) -> Self {
        GridDims { t, h, w }
    }

    /// Grid of a 16-frame clip at `res x res`.
    pub fn for_resolution(res: usize) -> Self {
        GridDims { t: NUM_FRAMES / TUBELET, h: res / PATCH, w: res / PATCH }
    }

    pub fn len(&self) -> usize {
        self.t * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spatial(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub fn index(&self, c: Coord) -> usize {
        (c.t * self.h + c.h) * self.w + c.w
    }

    #[inline]
    pub fn coord(&self, index: usize) -> Coord {
        Coord { t: index / self.spatial(), h: (index / self.w) % self.h, w: index % self.w }
    }

    /// All coordinates in row-major `(t, h, w)` order.
    pub fn coords(&self) -> Vec<Coord> {
        (0..self.len()).map(|i| self.coord(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

/// Tubelet tokens of one clip with their grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGrid {
    /// `N x TOKEN_DIM` flattened pixel blocks.
    pub tokens: Array<f32>,
    pub coords: Vec<Coord>,
    pub dims: GridDims,
}

impl TokenGrid {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn tokens_as<T: Scalar>(&self) -> Array<T> {
        self.tokens.cast()
    }
}

/// Cut a clip into `2 x 16 x 16` tubelets. Each token flattens its block in
/// `(frame, row, column, channel)` order.
pub fn tubelet_tokenize(stack: &FrameStack) -> Result<TokenGrid> {
    let (h, w) = (stack.height(), stack.width());
    if h % PATCH != 0 || w % PATCH != 0 || h == 0 || w == 0 {
        return Err(Error::contract(format!("frame size {w}x{h} is not a multiple of {PATCH}")));
    }
    let dims = GridDims::new(NUM_FRAMES / TUBELET, h / PATCH, w / PATCH);
    let src = stack.frames.data();
    let frame_len = h * w * 3;
    let mut data = Vec::with_capacity(dims.len() * TOKEN_DIM);
    let coords = dims.coords();
    for c in &coords {
        for dt in 0..TUBELET {
            let f = c.t * TUBELET + dt;
            for dy in 0..PATCH {
                let y = c.h * PATCH + dy;
                let start = f * frame_len + (y * w + c.w * PATCH) * 3;
                data.extend_from_slice(&src[start..start + PATCH * 3]);
            }
        }
    }
    Ok(TokenGrid { tokens: Array::new([dims.len(), TOKEN_DIM], data)?, coords, dims })
}

/// Inverse of [`tubelet_tokenize`].
pub fn detokenize(grid: &TokenGrid, source_id: &str, source_frame_count: usize) -> Result<FrameStack> {
    let dims = grid.dims;
    let (h, w) = (dims.h * PATCH, dims.w * PATCH);
    let frame_len = h * w * 3;
    let mut data = vec![0.0f32; NUM_FRAMES * frame_len];
    for (i, c) in grid.coords.iter().enumerate() {
        let tok = grid.tokens.row(i);
        let mut k = 0;
        for dt in 0..TUBELET {
            let f = c.t * TUBELET + dt;
            for dy in 0..PATCH {
                let y = c.h * PATCH + dy;
                let start = f * frame_len + (y * w + c.w * PATCH) * 3;
                data[start..start + PATCH * 3].copy_from_slice(&tok[k..k + PATCH * 3]);
                k += PATCH * 3;
            }
        }
    }
    Ok(FrameStack {
        frames: Array::new([NUM_FRAMES, h, w, 3], data)?,
        source_frame_count,
        source_id: source_id.to_string(),
    })
}
