//! Raster and vector rendering of sweep CSVs.
//!
//! Heatmaps use a diverging colormap centred at `diff = 0`: blue where MSGD
//! certifies the faster rate, red where SGD does. Cells where SGD diverges
//! carry a black diagonal hatch; cells without an MSGD certificate are grey.
//! The first CSV row is drawn bottom-left.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::sweep::{DISCRETE_HEADER, SDE_HEADER};
use crate::{Error, Result};

/// Edge length of one heatmap cell in pixels.
pub const CELL_PX: u32 = 10;

const CURVE_W: u32 = 600;
const CURVE_H: u32 = 400;
const MARGIN: u32 = 40;

const BLUE: [u8; 3] = [33, 102, 172];
const RED: [u8; 3] = [178, 24, 43];
const WHITE: [u8; 3] = [247, 247, 247];
const GREY: [u8; 3] = [160, 160, 160];
const BLACK: [u8; 3] = [0, 0, 0];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RenderStyle {
    /// Heatmap for discrete sweeps, curves for SDE sweeps.
    #[default]
    Auto,
    Heatmap,
    Curves,
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).expect("schema checked")
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Err(parse_err(path, 1, "empty CSV"));
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let line_of = |e: &csv::Error| e.position().map_or(0, |p| p.line() as usize);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, line_of(&e).max(1), e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let joined = header.join(",");
    if joined != DISCRETE_HEADER && joined != SDE_HEADER {
        return Err(parse_err(path, 1, format!("unrecognised header `{joined}`")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, line_of(&e), e.to_string()))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(parse_err(path, 2, "no data rows"));
    }
    Ok(Table { header, rows })
}

fn number(path: &Path, line: usize, field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| parse_err(path, line, format!("`{field}` is not a number")))
}

/// One heatmap cell as read from a discrete CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub diff: Option<f64>,
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major, as in the CSV.
    pub cells: Vec<Cell>,
}

/// Group a discrete CSV into rows: a new row starts whenever the outer
/// parameters `(L, gamma, sigma)` change from the first row's run.
fn heatmap_grid(path: &Path, t: &Table) -> Result<HeatmapGrid> {
    let keys = [t.col("L"), t.col("gamma"), t.col("sigma")];
    let key = |r: &Vec<String>| keys.map(|k| r[k].clone());
    let first = key(&t.rows[0]);
    let n_cols = t.rows.iter().take_while(|r| key(r) == first).count();
    if !t.rows.len().is_multiple_of(n_cols) {
        return Err(parse_err(path, 2, format!("{} rows do not form a grid of width {n_cols}", t.rows.len())));
    }
    let (diff, winner) = (t.col("diff"), t.col("winner"));
    let mut cells = Vec::with_capacity(t.rows.len());
    for (i, r) in t.rows.iter().enumerate() {
        let divergent = match r[winner].as_str() {
            "sgd-divergent" => true,
            "msgd" | "sgd" => false,
            w => return Err(parse_err(path, i + 2, format!("unknown winner `{w}`"))),
        };
        cells.push(Cell { diff: number(path, i + 2, &r[diff])?, divergent });
    }
    Ok(HeatmapGrid { n_rows: t.rows.len() / n_cols, n_cols, cells })
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    [0, 1, 2].map(|i| (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t).round() as u8)
}

/// Diverging colour for `diff` normalised by `scale = max |diff|`.
pub fn diverging_color(diff: f64, scale: f64) -> [u8; 3] {
    if !(scale > 0.0) || diff == 0.0 {
        return WHITE;
    }
    let t = (diff.abs() / scale).sqrt();
    if diff > 0.0 {
        lerp(WHITE, BLUE, t)
    } else {
        lerp(WHITE, RED, t)
    }
}

fn cell_color(c: &Cell, scale: f64) -> [u8; 3] {
    c.diff.map_or(GREY, |d| diverging_color(d, scale))
}

fn hatched(px: u32, py: u32) -> bool {
    (px + py).is_multiple_of(4)
}

fn heatmap_png(grid: &HeatmapGrid) -> RgbImage {
    let scale = grid.cells.iter().filter_map(|c| c.diff).fold(0.0, |m, d| f64::max(m, d.abs()));
    let (w, h) = (grid.n_cols as u32 * CELL_PX, grid.n_rows as u32 * CELL_PX);
    let mut img = RgbImage::new(w, h);
    for (i, c) in grid.cells.iter().enumerate() {
        let (row, col) = ((i / grid.n_cols) as u32, (i % grid.n_cols) as u32);
        let y0 = h - (row + 1) * CELL_PX;
        let x0 = col * CELL_PX;
        let fill = cell_color(c, scale);
        for py in 0..CELL_PX {
            for px in 0..CELL_PX {
                let color = if c.divergent && hatched(px, py) { BLACK } else { fill };
                img.put_pixel(x0 + px, y0 + py, Rgb(color));
            }
        }
    }
    img
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn heatmap_svg(grid: &HeatmapGrid) -> String {
    let scale = grid.cells.iter().filter_map(|c| c.diff).fold(0.0, |m, d| f64::max(m, d.abs()));
    let (w, h) = (grid.n_cols as u32 * CELL_PX, grid.n_rows as u32 * CELL_PX);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <defs><pattern id=\"hatch\" width=\"4\" height=\"4\" patternUnits=\"userSpaceOnUse\">\
         <path d=\"M0,4 L4,0\" stroke=\"#000\" stroke-width=\"1\"/></pattern></defs>\n"
    );
    for (i, c) in grid.cells.iter().enumerate() {
        let (row, col) = ((i / grid.n_cols) as u32, (i % grid.n_cols) as u32);
        let (x, y) = (col * CELL_PX, h - (row + 1) * CELL_PX);
        let _ = writeln!(
            s,
            "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL_PX}\" height=\"{CELL_PX}\" fill=\"{}\"/>",
            hex(cell_color(c, scale))
        );
        if c.divergent {
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL_PX}\" height=\"{CELL_PX}\" fill=\"url(#hatch)\"/>"
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
struct Curves {
    x: Vec<f64>,
    msgd: Vec<f64>,
    sgd: Vec<f64>,
}

fn curves(path: &Path, t: &Table) -> Result<Curves> {
    let (cx, cm, cs) = (t.col("sigma"), t.col("m_msgd"), t.col("m_sgd"));
    let mut out = Curves { x: vec![], msgd: vec![], sgd: vec![] };
    for (i, r) in t.rows.iter().enumerate() {
        let get = |c: usize| {
            number(path, i + 2, &r[c])?.ok_or_else(|| parse_err(path, i + 2, "missing value"))
        };
        out.x.push(get(cx)?);
        out.msgd.push(get(cm)?);
        out.sgd.push(get(cs)?);
    }
    Ok(out)
}

/// Map data to pixel coordinates inside the plot margins.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(c: &Curves) -> Self {
        let span = |v: &mut dyn Iterator<Item = f64>| {
            v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        };
        let mut x = span(&mut c.x.iter().copied());
        let mut y = span(&mut c.msgd.iter().chain(&c.sgd).copied().chain([0.0]));
        for r in [&mut x, &mut y] {
            if r.1 - r.0 <= 0.0 {
                *r = (r.0 - 0.5, r.1 + 0.5);
            }
        }
        Frame { x, y }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let w = (CURVE_W - 2 * MARGIN) as f64;
        let h = (CURVE_H - 2 * MARGIN) as f64;
        (
            MARGIN as f64 + (x - self.x.0) / (self.x.1 - self.x.0) * w,
            (CURVE_H - MARGIN) as f64 - (y - self.y.0) / (self.y.1 - self.y.0) * h,
        )
    }
}

fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: [u8; 3]) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let (x, y) = (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
        for (dx, dy) in [(0, 0), (1, 0), (0, 1)] {
            let (px, py) = (x.round() as i64 + dx, y.round() as i64 + dy);
            if px >= 0 && py >= 0 && (px as u32) < img.width() && (py as u32) < img.height() {
                img.put_pixel(px as u32, py as u32, Rgb(color));
            }
        }
    }
}

fn curves_png(c: &Curves) -> RgbImage {
    let mut img = RgbImage::from_pixel(CURVE_W, CURVE_H, Rgb([255, 255, 255]));
    let f = Frame::new(c);
    let (x0, x1) = (f.x.0, f.x.1);
    draw_line(&mut img, f.px(x0, f.y.0), f.px(x1, f.y.0), BLACK);
    draw_line(&mut img, f.px(x0, f.y.0), f.px(x0, f.y.1), BLACK);
    draw_line(&mut img, f.px(x0, 0.0), f.px(x1, 0.0), GREY);
    for (ys, color) in [(&c.msgd, BLUE), (&c.sgd, RED)] {
        for i in 1..c.x.len() {
            draw_line(&mut img, f.px(c.x[i - 1], ys[i - 1]), f.px(c.x[i], ys[i]), color);
        }
    }
    img
}

fn curves_svg(c: &Curves) -> String {
    let f = Frame::new(c);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CURVE_W}\" height=\"{CURVE_H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
    );
    let line = |a: (f64, f64), b: (f64, f64), color: [u8; 3]| {
        format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\"/>\n",
            a.0, a.1, b.0, b.1, hex(color)
        )
    };
    s += &line(f.px(f.x.0, f.y.0), f.px(f.x.1, f.y.0), BLACK);
    s += &line(f.px(f.x.0, f.y.0), f.px(f.x.0, f.y.1), BLACK);
    s += &line(f.px(f.x.0, 0.0), f.px(f.x.1, 0.0), GREY);
    for (ys, color, label) in [(&c.msgd, BLUE, "m_msgd"), (&c.sgd, RED, "m_sgd")] {
        let pts: Vec<String> = c
            .x
            .iter()
            .zip(ys.iter())
            .map(|(&x, &y)| {
                let (px, py) = f.px(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"><title>{label}</title></polyline>",
            pts.join(" "),
            hex(color)
        );
    }
    s.push_str("</svg>\n");
    s
}

enum Format {
    Png,
    Svg,
}

fn format_for(out: &Path) -> Result<Format> {
    match out.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => Ok(Format::Png),
        Some("svg") => Ok(Format::Svg),
        _ => Err(Error::invalid(format!("{}: output must end in .png or .svg", out.display()))),
    }
}

/// Render a sweep CSV to a PNG or SVG chosen by the output extension.
/// Nothing is written when the CSV cannot be parsed.
pub fn render(csv: &Path, out: &Path, style: RenderStyle) -> Result<PathBuf> {
    let format = format_for(out)?;
    let table = read_table(csv)?;
    let discrete = table.header.join(",") == DISCRETE_HEADER;
    let style = match style {
        RenderStyle::Auto if discrete => RenderStyle::Heatmap,
        RenderStyle::Auto => RenderStyle::Curves,
        s => s,
    };
    match (style, discrete) {
        (RenderStyle::Heatmap, true) => {
            let grid = heatmap_grid(csv, &table)?;
            match format {
                Format::Png => heatmap_png(&grid).save(out)?,
                Format::Svg => std::fs::write(out, heatmap_svg(&grid))?,
            }
        }
        (RenderStyle::Curves, false) => {
            let c = curves(csv, &table)?;
            match format {
                Format::Png => curves_png(&c).save(out)?,
                Format::Svg => std::fs::write(out, curves_svg(&c))?,
            }
        }
        _ => return Err(parse_err(csv, 1, "style does not match the CSV schema")),
    }
    Ok(out.to_path_buf())
}

/// Parse a discrete CSV into its heatmap grid without rendering.
pub fn read_heatmap(csv: &Path) -> Result<HeatmapGrid> {
    let table = read_table(csv)?;
    if table.header.join(",") != DISCRETE_HEADER {
        return Err(parse_err(csv, 1, "not a discrete sweep CSV"));
    }
    heatmap_grid(csv, &table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_halves() {
        let c = diverging_color(0.3, 1.0);
        assert!(c[2] > c[0], "{c:?}");
        let c = diverging_color(-0.3, 1.0);
        assert!(c[0] > c[2], "{c:?}");
        assert_eq!(diverging_color(0.0, 1.0), WHITE);
        assert_eq!(diverging_color(1.0, 1.0), BLUE);
    }

    #[test]
    fn unknown_extension_is_rejected() {
        assert!(format_for(Path::new("x.jpg")).is_err());
        assert!(matches!(format_for(Path::new("x.SVG")), Ok(Format::Svg)));
    }
}
