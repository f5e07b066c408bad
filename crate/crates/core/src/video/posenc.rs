use super::Coord;
use crate::numerics::{Array, Scalar};

/// Channel widths for the `(t, h, w)` axes: even split, remainder to `w`.
pub fn axis_split(width: usize) -> [usize; 3] {
    let third = width / 3;
    [third, third, width - 2 * third]
}

fn encode_axis(out: &mut [f64], pos: usize) {
    let n = out.len();
    let sines = n.div_ceil(2);
    let cosines = n / 2;
    for i in 0..sines {
        let freq = 10_000f64.powf(-(i as f64) / sines.max(1) as f64);
        out[i] = (pos as f64 * freq).sin();
    }
    for i in 0..cosines {
        let freq = 10_000f64.powf(-(i as f64) / sines.max(1) as f64);
        out[sines + i] = (pos as f64 * freq).cos();
    }
}

/// Fixed sinusoidal encoding factorized over the three grid axes.
///
/// Each axis block holds its sine channels first, then its cosine channels.
pub fn positional_encoding<T: Scalar>(coords: &[Coord], width: usize) -> Array<T> {
    let split = axis_split(width);
    let mut data = vec![0.0f64; coords.len() * width];
    for (row, c) in data.chunks_mut(width.max(1)).zip(coords) {
        let (t, rest) = row.split_at_mut(split[0]);
        let (h, w) = rest.split_at_mut(split[1]);
        encode_axis(t, c.t);
        encode_axis(h, c.h);
        encode_axis(w, c.w);
    }
    Array::new([coords.len(), width], data.into_iter().map(T::of).collect()).expect("shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::GridDims;

    #[test]
    fn origin_has_zero_sines_and_unit_cosines() {
        let e = positional_encoding::<f64>(&[Coord { t: 0, h: 0, w: 0 }], 192);
        let split = axis_split(192);
        let mut off = 0;
        for n in split {
            let s = n.div_ceil(2);
            assert!(e.data()[off..off + s].iter().all(|&v| v == 0.0));
            assert!(e.data()[off + s..off + n].iter().all(|&v| v == 1.0));
            off += n;
        }
    }

    #[test]
    fn deterministic() {
        let c = GridDims::new(8, 4, 4).coords();
        assert_eq!(positional_encoding::<f32>(&c, 96), positional_encoding::<f32>(&c, 96));
    }

    #[test]
    fn odd_width_split() {
        assert_eq!(axis_split(16), [5, 5, 6]);
        assert_eq!(axis_split(192), [64, 64, 64]);
        assert_eq!(positional_encoding::<f64>(&[Coord { t: 1, h: 2, w: 3 }], 16).len(), 16);
    }
}
