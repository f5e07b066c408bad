//! 5x7 bitmap glyphs, text drawing, and a pixel-level reader that recovers
//! drawn text from a frame.

use crate::video::Image;

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;
/// Horizontal advance per character in glyph pixels.
pub const ADVANCE: usize = 6;

pub const INK: [f32; 3] = [0.08, 0.08, 0.1];

/// Rows top to bottom, five bits each (bit 4 = leftmost pixel).
const GLYPHS: &[(char, [u8; 7])] = &[
    ('A', [0b01110, 0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001]),
    ('B', [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110]),
    ('C', [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110]),
    ('D', [0b11100, 0b10010, 0b10001, 0b10001, 0b10001, 0b10010, 0b11100]),
    ('E', [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111]),
    ('F', [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000]),
    ('G', [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111]),
    ('H', [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001]),
    ('I', [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110]),
    ('J', [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100]),
    ('K', [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001]),
    ('L', [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111]),
    ('M', [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001]),
    ('N', [0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001]),
    ('O', [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110]),
    ('P', [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000]),
    ('Q', [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101]),
    ('R', [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001]),
    ('S', [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110]),
    ('T', [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100]),
    ('U', [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110]),
    ('V', [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100]),
    ('W', [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010]),
    ('X', [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001]),
    ('Y', [0b10001, 0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100]),
    ('Z', [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111]),
    ('0', [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110]),
    ('1', [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110]),
    ('2', [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111]),
    ('3', [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110]),
    ('4', [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010]),
    ('5', [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110]),
    ('6', [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110]),
    ('7', [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000]),
    ('8', [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110]),
    ('9', [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100]),
    (':', [0b00000, 0b01100, 0b01100, 0b00000, 0b01100, 0b01100, 0b00000]),
    ('-', [0b00000, 0b00000, 0b00000, 0b11111, 0b00000, 0b00000, 0b00000]),
    ('.', [0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100]),
    (',', [0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b00100, 0b01000]),
    ('\'', [0b00100, 0b00100, 0b01000, 0b00000, 0b00000, 0b00000, 0b00000]),
    ('?', [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b00000, 0b00100]),
    ('!', [0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00000, 0b00100]),
    ('/', [0b00000, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b00000]),
    ('<', [0b00010, 0b00100, 0b01000, 0b10000, 0b01000, 0b00100, 0b00010]),
    ('+', [0b00000, 0b00100, 0b00100, 0b11111, 0b00100, 0b00100, 0b00000]),
    ('&', [0b01100, 0b10010, 0b10100, 0b01000, 0b10101, 0b10010, 0b01101]),
    ('$', [0b00100, 0b01111, 0b10100, 0b01110, 0b00101, 0b11110, 0b00100]),
];

/// Bitmap for `c`, case-folded; `None` for space and unsupported characters.
pub fn glyph(c: char) -> Option<&'static [u8; 7]> {
    let c = c.to_ascii_uppercase();
    GLYPHS.iter().find(|(g, _)| *g == c).map(|(_, b)| b)
}

/// Whether every character of `s` can be drawn (spaces included).
pub fn is_drawable(s: &str) -> bool {
    s.chars().all(|c| c == ' ' || glyph(c).is_some())
}

pub fn supported_chars() -> impl Iterator<Item = char> {
    GLYPHS.iter().map(|(c, _)| *c)
}

/// Greedy word wrap to at most `width` characters per line. Words longer
/// than a line are split.
pub fn wrap(text: &str, width: usize) -> Vec<String> {
    let width = width.max(1);
    let mut lines = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        let mut word: Vec<char> = word.chars().collect();
        while word.len() > width {
            if !cur.is_empty() {
                lines.push(std::mem::take(&mut cur));
            }
            lines.push(word[..width].iter().collect());
            word.drain(..width);
        }
        if word.is_empty() {
            continue;
        }
        let needed = if cur.is_empty() { word.len() } else { cur.chars().count() + 1 + word.len() };
        if needed > width && !cur.is_empty() {
            lines.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.extend(word);
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

/// Draw one line of text with its top-left at `(x, y)`, each glyph pixel
/// scaled to `scale x scale`. Characters past the right edge are clipped.
pub fn draw_text(img: &mut Image, x: usize, y: usize, text: &str, scale: usize) {
    for (i, c) in text.chars().enumerate() {
        let Some(bits) = glyph(c) else { continue };
        let gx = x + i * ADVANCE * scale;
        for (r, row) in bits.iter().enumerate() {
            for col in 0..GLYPH_W {
                if row & (1 << (GLYPH_W - 1 - col)) != 0 {
                    img.fill_rect(gx + col * scale, y + r * scale, scale, scale, INK);
                }
            }
        }
    }
}

fn is_ink(rgb: [f32; 3]) -> bool {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2] < 0.4
}

/// Recover text lines from a frame by exact glyph matching.
///
/// Scans every position for a `5 x 7` ink pattern (at the given pixel scale)
/// equal to a known glyph and bordered by a blank one-cell margin. A glyph
/// with separate strokes (':', '!', '?') can also show a smaller glyph inside
/// its box; such hits own a strict subset of another hit's ink, so hits are
/// accepted largest first and any hit touching claimed ink is dropped. The
/// survivors are then
/// groups matches on the same baseline into strings; a gap of one advance
/// becomes a space. Lines come back top to bottom, left to right.
pub fn read_text(img: &Image, scale: usize) -> Vec<String> {
    let (w, h) = (img.width / scale, img.height / scale);
    // downsample to glyph cells; a cell is ink if its top-left pixel is
    let ink: Vec<bool> = (0..h * w).map(|i| is_ink(img.get((i % w) * scale, (i / w) * scale))).collect();
    let at = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && ink[y as usize * w + x as usize];
    let mut hits: Vec<(usize, usize, char)> = Vec::new();
    for y in 0..h.saturating_sub(GLYPH_H - 1) {
        for x in 0..w.saturating_sub(GLYPH_W - 1) {
            let (xi, yi) = (x as isize, y as isize);
            let border_clear = (-1..=GLYPH_W as isize).all(|dx| !at(xi + dx, yi - 1) && !at(xi + dx, yi + GLYPH_H as isize))
                && (0..GLYPH_H as isize).all(|dy| !at(xi - 1, yi + dy) && !at(xi + GLYPH_W as isize, yi + dy));
            if !border_clear {
                continue;
            }
            for (c, bits) in GLYPHS {
                let matches = bits.iter().enumerate().all(|(r, row)| {
                    (0..GLYPH_W).all(|col| (row & (1 << (GLYPH_W - 1 - col)) != 0) == at(xi + col as isize, yi + r as isize))
                });
                if matches {
                    hits.push((y, x, *c));
                    break;
                }
            }
        }
    }
    let ink_cells = |&(y, x, c): &(usize, usize, char)| {
        let bits = glyph(c).unwrap();
        let mut cells = Vec::new();
        for (r, row) in bits.iter().enumerate() {
            cells.extend((0..GLYPH_W).filter(|col| row & (1 << (GLYPH_W - 1 - col)) != 0).map(|col| (y + r) * w + x + col));
        }
        cells
    };
    hits.sort_by_key(|h| std::cmp::Reverse(ink_cells(h).len()));
    let mut claimed = vec![false; w * h];
    hits.retain(|hit| {
        let cells = ink_cells(hit);
        if cells.iter().any(|&i| claimed[i]) {
            return false;
        }
        cells.into_iter().for_each(|i| claimed[i] = true);
        true
    });
    hits.sort();
    let mut lines: Vec<String> = Vec::new();
    let mut prev: Option<(usize, usize)> = None;
    for (y, x, c) in hits {
        match prev {
            Some((py, px)) if py == y && x - px == ADVANCE => {}
            Some((py, px)) if py == y && x - px == 2 * ADVANCE => lines.last_mut().unwrap().push(' '),
            _ => lines.push(String::new()),
        }
        lines.last_mut().unwrap().push(c);
        prev = Some((y, x));
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyphs_are_distinct() {
        for (i, (a, ga)) in GLYPHS.iter().enumerate() {
            for (b, gb) in &GLYPHS[i + 1..] {
                assert_ne!(ga, gb, "{a} and {b}");
            }
        }
    }

    #[test]
    fn wrap_respects_width_and_keeps_words() {
        assert_eq!(wrap("see you soon", 10), ["SEE YOU", "SOON"].iter().map(|s| s.to_lowercase()).collect::<Vec<_>>());
        assert_eq!(wrap("abcdefghijkl", 5), vec!["abcde", "fghij", "kl"]);
        assert!(wrap("", 5).is_empty());
        for line in wrap("the quick brown fox jumps over the lazy dog", 7) {
            assert!(line.len() <= 7);
        }
    }

    #[test]
    fn read_back_every_glyph() {
        for scale in [1, 2] {
            let text: String = supported_chars().collect();
            let mut img = Image::filled(ADVANCE * scale * (text.len() + 2), 12 * scale, [0.95, 0.95, 0.95]);
            draw_text(&mut img, 2 * scale, 2 * scale, &text, scale);
            assert_eq!(read_text(&img, scale), vec![text]);
        }
    }

    #[test]
    fn read_back_words_and_lines() {
        let mut img = Image::filled(64, 40, [0.9, 0.85, 0.8]);
        draw_text(&mut img, 2, 2, "Call Ravi", 1);
        draw_text(&mut img, 2, 12, "7:30 AM", 1);
        draw_text(&mut img, 40, 30, "ON", 1);
        assert_eq!(read_text(&img, 1), vec!["CALL RAVI", "7:30 AM", "ON"]);
    }

    #[test]
    fn stacked_pairs_read_back() {
        // every glyph above and below every other, at line pitch 9
        let chars: Vec<char> = supported_chars().collect();
        for &a in &chars {
            let top: String = std::iter::repeat_n(a, chars.len()).collect();
            let bottom: String = chars.iter().collect();
            let mut img = Image::filled(ADVANCE * (chars.len() + 2), 24, [0.95; 3]);
            draw_text(&mut img, 2, 2, &top, 1);
            draw_text(&mut img, 2, 11, &bottom, 1);
            assert_eq!(read_text(&img, 1), vec![top, bottom]);
        }
    }
}
