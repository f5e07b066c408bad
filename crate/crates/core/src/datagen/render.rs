//! Flat raster rendering of screen states.

use std::collections::BTreeMap;

use super::catalog::{fill, screen_background, Slot};
use super::font::{draw_text, wrap, ADVANCE};
use super::graph::{ScreenSpec, Tap, Trace, UiGraph};
use crate::error::{Error, Result};
use crate::video::{Image, NUM_FRAMES};

// layout in glyph cells; one cell is `scale` pixels
const MARGIN: usize = 2;
const LINE: usize = 9;
const KEYBOARD_H: usize = 20;
const ICON: usize = 10;
const ICON_GAP: usize = 4;
const ICON_COLS: usize = 4;

const HIGHLIGHT: [f32; 3] = [0.7, 0.85, 1.0];
const KEYBOARD_BG: [f32; 3] = [0.8, 0.8, 0.83];
const KEY: [f32; 3] = [0.98, 0.98, 0.98];

/// Pixel size of one glyph cell at resolution `res`.
pub fn glyph_scale(res: usize) -> usize {
    (res / 64).max(1)
}

/// Characters per text line at resolution `res`.
pub fn line_chars(res: usize) -> usize {
    (res / glyph_scale(res)).saturating_sub(2 * MARGIN) / ADVANCE
}

/// A screen with its slots filled and text wrapped into display lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Layout {
    pub fn new(screen: &ScreenSpec, params: &BTreeMap<Slot, String>, res: usize) -> Self {
        let width = line_chars(res);
        Layout {
            header: wrap(&fill(&screen.header, params), width),
            rows: screen.rows.iter().map(|r| wrap(&fill(&r.text, params), width)).collect(),
        }
    }

    /// Every text line in reading order.
    pub fn lines(&self) -> Vec<String> {
        self.header.iter().chain(self.rows.iter().flatten()).cloned().collect()
    }

    fn header_cells(&self) -> usize {
        LINE * self.header.len().max(1) + 1
    }
}

/// Draw one screen. `tap` highlights the touch target of the macro about to
/// fire. Errors when wrapped text runs past the available height.
pub fn render_screen(
    screen: &ScreenSpec,
    params: &BTreeMap<Slot, String>,
    res: usize,
    tap: Option<Tap>,
) -> Result<Image> {
    if res == 0 || res % 16 != 0 {
        return Err(Error::contract(format!("resolution {res} is not a positive multiple of 16")));
    }
    let s = glyph_scale(res);
    let cells = res / s;
    let layout = Layout::new(screen, params, res);
    let mut img = Image::filled(res, res, screen_background());
    let rect = |img: &mut Image, x: usize, y: usize, w: usize, h: usize, c: [f32; 3]| {
        img.fill_rect(x * s, y * s, w * s, h * s, c)
    };

    let header_h = layout.header_cells();
    let header_fill = if tap == Some(Tap::Header) { HIGHLIGHT } else { screen.header_fill };
    rect(&mut img, 0, 0, cells, header_h, header_fill);
    for (i, line) in layout.header.iter().enumerate() {
        draw_text(&mut img, MARGIN * s, (MARGIN + i * LINE) * s, line, s);
    }

    let bottom = if screen.keyboard { cells.saturating_sub(KEYBOARD_H) } else { cells };
    let mut y = header_h + MARGIN;
    for (i, lines) in layout.rows.iter().enumerate() {
        let h = LINE * lines.len().max(1) - 1;
        if y + h > bottom {
            return Err(Error::contract(format!("text of screen {} overflows {res}x{res}", screen.name)));
        }
        let fill = if tap == Some(Tap::Row(i)) { HIGHLIGHT } else { screen.rows[i].fill };
        rect(&mut img, 1, y, cells - 2, h, fill);
        for (j, line) in lines.iter().enumerate() {
            draw_text(&mut img, MARGIN * s, (y + 1 + j * LINE) * s, line, s);
        }
        y += h + 1;
    }

    let x0 = cells.saturating_sub(ICON_COLS * ICON + (ICON_COLS - 1) * ICON_GAP) / 2;
    for (i, colour) in screen.icons.iter().enumerate() {
        let (r, c) = (i / ICON_COLS, i % ICON_COLS);
        let fill = if tap == Some(Tap::Icon(i)) { HIGHLIGHT } else { colour.map(|v| 0.35 + 0.65 * v) };
        let top = y + r * (ICON + ICON_GAP);
        if top + ICON > bottom {
            return Err(Error::contract(format!("icons of screen {} overflow {res}x{res}", screen.name)));
        }
        rect(&mut img, x0 + c * (ICON + ICON_GAP), top, ICON, ICON, fill);
    }

    if screen.keyboard {
        rect(&mut img, 0, bottom, cells, KEYBOARD_H, KEYBOARD_BG);
        let key = if tap == Some(Tap::Keyboard) { HIGHLIGHT } else { KEY };
        for row in 0..3 {
            for col in 0..cells / 6 {
                rect(&mut img, col * 6 + 1, bottom + 2 + row * 6, 4, 4, key);
            }
        }
    }
    Ok(img)
}

/// Rendered clip plus the text of its final frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub frames: Vec<Image>,
    pub ocr_final_frame: Vec<String>,
}

/// Two frames per edge: the source screen with the tap target highlighted,
/// then the destination screen at rest. A trace without edges yields the
/// start screen alone. Padded to at least 16 frames by repeating the last.
pub fn render_trace(graph: &UiGraph, trace: &Trace, res: usize) -> Result<Rendered> {
    let params = &trace.params;
    let mut frames = Vec::with_capacity(2 * trace.edges.len());
    if trace.edges.is_empty() {
        frames.push(render_screen(&graph.vertices[trace.vertices[0]], params, res, None)?);
    }
    for &e in &trace.edges {
        let edge = &graph.edges[e];
        frames.push(render_screen(&graph.vertices[edge.from], params, res, Some(edge.tap))?);
        frames.push(render_screen(&graph.vertices[edge.to], params, res, None)?);
    }
    while frames.len() < NUM_FRAMES {
        frames.push(frames.last().unwrap().clone());
    }
    let last = *trace.vertices.last().unwrap();
    let ocr_final_frame = Layout::new(&graph.vertices[last], params, res).lines();
    Ok(Rendered { frames, ocr_final_frame })
}
