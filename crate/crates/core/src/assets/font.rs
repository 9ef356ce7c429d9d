//! A 5x7 bitmap alphabet (A-Z, 0-9) and three drawing styles derived from it.

use image::{Rgba, RgbaImage};

const ROWS: usize = 7;
const COLS: usize = 5;

#[rustfmt::skip]
const GLYPHS: &[(char, [&str; ROWS])] = &[
    ('A', [" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"]),
    ('B', ["#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "]),
    ('C', [" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "]),
    ('D', ["#### ", "#   #", "#   #", "#   #", "#   #", "#   #", "#### "]),
    ('E', ["#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"]),
    ('F', ["#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "]),
    ('G', [" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ####"]),
    ('H', ["#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"]),
    ('I', [" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "]),
    ('J', ["  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "]),
    ('K', ["#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"]),
    ('L', ["#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"]),
    ('M', ["#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"]),
    ('N', ["#   #", "#   #", "##  #", "# # #", "#  ##", "#   #", "#   #"]),
    ('O', [" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "]),
    ('P', ["#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "]),
    ('Q', [" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"]),
    ('R', ["#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"]),
    ('S', [" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "]),
    ('T', ["#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "]),
    ('U', ["#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "]),
    ('V', ["#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "]),
    ('W', ["#   #", "#   #", "#   #", "# # #", "# # #", "# # #", " # # "]),
    ('X', ["#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"]),
    ('Y', ["#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "]),
    ('Z', ["#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"]),
    ('0', [" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "]),
    ('1', ["  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "]),
    ('2', [" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"]),
    ('3', ["#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "]),
    ('4', ["   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "]),
    ('5', ["#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "]),
    ('6', ["  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "]),
    ('7', ["#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "]),
    ('8', [" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "]),
    ('9', [" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "]),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum FontStyle {
    Block,
    Round,
    Slant,
}

impl FontStyle {
    pub(crate) const ALL: [FontStyle; 3] = [FontStyle::Block, FontStyle::Round, FontStyle::Slant];

    pub(crate) fn name(self) -> &'static str {
        match self {
            FontStyle::Block => "block",
            FontStyle::Round => "round",
            FontStyle::Slant => "slant",
        }
    }
}

pub(crate) fn chars() -> impl Iterator<Item = char> {
    GLYPHS.iter().map(|(c, _)| *c)
}

fn cell_on(bits: &[&str; ROWS], col: usize, row: usize) -> bool {
    bits[row].as_bytes()[col] == b'#'
}

/// White glyph with a one-pixel transparent margin.
pub(crate) fn render_glyph(ch: char, style: FontStyle) -> Option<RgbaImage> {
    let bits = &GLYPHS.iter().find(|(c, _)| *c == ch)?.1;
    let img = match style {
        FontStyle::Block => {
            const CELL: u32 = 2;
            RgbaImage::from_fn(COLS as u32 * CELL + 2, ROWS as u32 * CELL + 2, |x, y| {
                let on = x >= 1
                    && y >= 1
                    && ((x - 1) / CELL) < COLS as u32
                    && ((y - 1) / CELL) < ROWS as u32
                    && cell_on(bits, ((x - 1) / CELL) as usize, ((y - 1) / CELL) as usize);
                Rgba([255, 255, 255, if on { 255 } else { 0 }])
            })
        }
        FontStyle::Slant => {
            const CELL: u32 = 2;
            let shear = (ROWS as u32 - 1) * CELL / 2;
            RgbaImage::from_fn(COLS as u32 * CELL + shear + 2, ROWS as u32 * CELL + 2, |x, y| {
                if y < 1 || y > ROWS as u32 * CELL {
                    return Rgba([255, 255, 255, 0]);
                }
                let row = ((y - 1) / CELL) as usize;
                let offset = (ROWS as u32 - 1 - row as u32) * CELL / 2;
                let on = x > offset
                    && (x - 1 - offset) / CELL < COLS as u32
                    && cell_on(bits, ((x - 1 - offset) / CELL) as usize, row);
                Rgba([255, 255, 255, if on { 255 } else { 0 }])
            })
        }
        FontStyle::Round => {
            // each cell is a 3x3 block holding an anti-aliased dot
            const CELL: f64 = 3.0;
            const R: f64 = 1.7;
            const SS: u32 = 4;
            let w = COLS as u32 * 3 + 2;
            let h = ROWS as u32 * 3 + 2;
            RgbaImage::from_fn(w, h, |x, y| {
                let mut hits = 0u32;
                for sy in 0..SS {
                    for sx in 0..SS {
                        let px = x as f64 + (sx as f64 + 0.5) / SS as f64 - 1.0;
                        let py = y as f64 + (sy as f64 + 0.5) / SS as f64 - 1.0;
                        let col = (px / CELL).floor();
                        let row = (py / CELL).floor();
                        let covered = [(0.0, 0.0), (-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)]
                            .iter()
                            .any(|(dc, dr)| {
                                let (c, r) = (col + dc, row + dr);
                                if c < 0.0 || r < 0.0 || c >= COLS as f64 || r >= ROWS as f64 {
                                    return false;
                                }
                                if !cell_on(bits, c as usize, r as usize) {
                                    return false;
                                }
                                let cx = (c + 0.5) * CELL;
                                let cy = (r + 0.5) * CELL;
                                (px - cx).powi(2) + (py - cy).powi(2) <= R * R
                            });
                        hits += covered as u32;
                    }
                }
                let a = crate::raster::quantize(255.0 * hits as f64 / (SS * SS) as f64);
                Rgba([255, 255, 255, a])
            })
        }
    };
    Some(img)
}
