//! Hinton diagrams of density matrices.
//!
//! Each diagram has a real and an imaginary panel. A cell's square has area
//! proportional to `|part| / max_magnitude`; white squares are positive,
//! black squares negative, on a grey background. Row and column labels are
//! ket strings with qubit 0 leftmost.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::qstate::{ket_string, Complex, DensityMatrix};

pub const POSITIVE_FILL: &str = "#FFFFFF";
pub const NEGATIVE_FILL: &str = "#000000";
pub const BACKGROUND_FILL: &str = "#808080";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HintonCell {
    pub row: usize,
    pub col: usize,
    pub magnitude: f64,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HintonDiagram {
    pub dimension: usize,
    /// Row-major cells of the real part.
    pub real_panel: Vec<HintonCell>,
    /// Row-major cells of the imaginary part.
    pub imag_panel: Vec<HintonCell>,
    pub max_magnitude: f64,
    pub basis_labels: Vec<String>,
}

impl HintonDiagram {
    pub fn cell(&self, imaginary: bool, row: usize, col: usize) -> &HintonCell {
        let panel = if imaginary { &self.imag_panel } else { &self.real_panel };
        &panel[row * self.dimension + col]
    }
}

fn panel(m: &DMatrix<Complex>, part: fn(&Complex) -> f64) -> Vec<HintonCell> {
    let dim = m.nrows();
    (0..dim * dim)
        .map(|i| {
            let (row, col) = (i / dim, i % dim);
            let v = part(&m[(row, col)]);
            HintonCell {
                row,
                col,
                magnitude: v.abs(),
                sign: if v < 0.0 { Sign::Negative } else { Sign::Positive },
            }
        })
        .collect()
}

/// Builds a diagram from any square matrix whose side is a power of two.
pub fn build_hinton_matrix(m: &DMatrix<Complex>) -> HintonDiagram {
    let dim = m.nrows();
    assert_eq!(dim, m.ncols(), "Hinton diagrams need a square matrix");
    let width = dim.trailing_zeros() as usize;
    let real_panel = panel(m, |z| z.re);
    let imag_panel = panel(m, |z| z.im);
    let max_magnitude = real_panel
        .iter()
        .chain(&imag_panel)
        .map(|c| c.magnitude)
        .fold(0.0, f64::max);
    HintonDiagram {
        dimension: dim,
        real_panel,
        imag_panel,
        max_magnitude,
        basis_labels: (0..dim).map(|i| format!("|{}⟩", ket_string(i, width))).collect(),
    }
}

pub fn build_hinton(rho: &DensityMatrix) -> HintonDiagram {
    build_hinton_matrix(rho.matrix())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgStyle {
    /// Side of one grid cell, in user units.
    pub cell_size: f64,
    /// Gap between the real and imaginary panels.
    pub panel_gap: f64,
    pub font_size: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            cell_size: 40.0,
            panel_gap: 30.0,
            font_size: 12.0,
        }
    }
}

/// Side length of the square drawn for `magnitude`.
pub fn square_side(magnitude: f64, max_magnitude: f64, cell_size: f64) -> f64 {
    if max_magnitude <= 0.0 {
        0.0
    } else {
        cell_size * (magnitude / max_magnitude).sqrt()
    }
}

struct Geometry {
    label_width: f64,
    header: f64,
    panel_side: f64,
    row_height: f64,
    title_height: f64,
}

impl Geometry {
    fn new(diagram: &HintonDiagram, style: &SvgStyle, titled: bool) -> Self {
        let label_chars = diagram.basis_labels.first().map_or(3, |l| l.chars().count());
        let label_width = (style.font_size * 0.7 * label_chars as f64 + 8.0).ceil();
        let header = style.font_size * 2.0 + 10.0;
        let panel_side = style.cell_size * diagram.dimension as f64;
        let title_height = if titled { style.font_size * 1.5 + 6.0 } else { 0.0 };
        Self {
            label_width,
            header,
            panel_side,
            row_height: title_height + header + panel_side + 10.0,
            title_height,
        }
    }

    fn width(&self, style: &SvgStyle) -> f64 {
        2.0 * (self.label_width + self.panel_side) + style.panel_gap + 10.0
    }
}

fn write_panel(
    out: &mut String,
    diagram: &HintonDiagram,
    style: &SvgStyle,
    x0: f64,
    y0: f64,
    imaginary: bool,
) {
    let cs = style.cell_size;
    let dim = diagram.dimension;
    let side = cs * dim as f64;
    let class = if imaginary { "im" } else { "re" };
    let _ = writeln!(
        out,
        r#"<g class="panel {class}" data-max="{}">"#,
        diagram.max_magnitude
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="{}" text-anchor="middle">{}</text>"#,
        x0 + side / 2.0,
        y0 - style.font_size * 1.5 - 4.0,
        style.font_size,
        if imaginary { "Im" } else { "Re" }
    );
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{side}" height="{side}" fill="{BACKGROUND_FILL}"/>"#
    );
    for k in 0..=dim {
        let offset = cs * k as f64;
        let _ = writeln!(
            out,
            r##"<line x1="{x0}" y1="{}" x2="{}" y2="{}" stroke="#5A5A5A" stroke-width="1"/>"##,
            y0 + offset,
            x0 + side,
            y0 + offset
        );
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y0}" x2="{}" y2="{}" stroke="#5A5A5A" stroke-width="1"/>"##,
            x0 + offset,
            x0 + offset,
            y0 + side
        );
    }
    for (i, label) in diagram.basis_labels.iter().enumerate() {
        let centre = cs * i as f64 + cs / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="{}" text-anchor="end">{label}</text>"#,
            x0 - 4.0,
            y0 + centre + style.font_size / 3.0,
            style.font_size
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="{}" text-anchor="middle">{label}</text>"#,
            x0 + centre,
            y0 - 4.0,
            style.font_size
        );
    }
    let cells = if imaginary { &diagram.imag_panel } else { &diagram.real_panel };
    for cell in cells {
        let s = square_side(cell.magnitude, diagram.max_magnitude, cs);
        if s <= 0.0 {
            continue;
        }
        let fill = match cell.sign {
            Sign::Positive => POSITIVE_FILL,
            Sign::Negative => NEGATIVE_FILL,
        };
        let _ = writeln!(
            out,
            r#"<rect class="cell {class}" data-row="{}" data-col="{}" x="{}" y="{}" width="{s}" height="{s}" fill="{fill}"/>"#,
            cell.row,
            cell.col,
            x0 + cs * cell.col as f64 + (cs - s) / 2.0,
            y0 + cs * cell.row as f64 + (cs - s) / 2.0,
        );
    }
    out.push_str("</g>\n");
}

/// Renders titled diagrams stacked vertically, each as a Re/Im panel pair.
pub fn render_svg_stack(diagrams: &[(&str, &HintonDiagram)], style: &SvgStyle) -> String {
    let titled = diagrams.iter().any(|(t, _)| !t.is_empty());
    let geoms: Vec<Geometry> = diagrams
        .iter()
        .map(|(_, d)| Geometry::new(d, style, titled))
        .collect();
    let width = geoms.iter().map(|g| g.width(style)).fold(0.0, f64::max);
    let height: f64 = geoms.iter().map(|g| g.row_height).sum();
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"monospace\">\n"
    );
    let mut y = 0.0;
    for ((title, diagram), g) in diagrams.iter().zip(&geoms) {
        if !title.is_empty() {
            let _ = writeln!(
                out,
                r#"<text x="5" y="{}" font-size="{}" font-weight="bold">{title}</text>"#,
                y + style.font_size * 1.2,
                style.font_size * 1.2
            );
        }
        let top = y + g.title_height + g.header;
        write_panel(&mut out, diagram, style, g.label_width, top, false);
        write_panel(
            &mut out,
            diagram,
            style,
            2.0 * g.label_width + g.panel_side + style.panel_gap,
            top,
            true,
        );
        y += g.row_height;
    }
    out.push_str("</svg>\n");
    out
}

/// Renders one diagram as a standalone SVG document.
pub fn render_svg(diagram: &HintonDiagram, style: &SvgStyle) -> String {
    render_svg_stack(&[("", diagram)], style)
}

const BLOCKS: [char; 5] = [' ', '░', '▒', '▓', '█'];

/// Block character for a magnitude ratio in `[0, 1]`.
pub fn block_for(ratio: f64) -> char {
    let bucket = match ratio {
        r if r < 0.05 => 0,
        r if r < 0.25 => 1,
        r if r < 0.5 => 2,
        r if r < 0.8 => 3,
        _ => 4,
    };
    BLOCKS[bucket]
}

/// Text rendering. Each grid row is `label signs │blocks│`, where `signs`
/// holds one `+`/`−` per visible cell and `blocks` gives each cell
/// `width / dimension` block characters.
pub fn render_text(diagram: &HintonDiagram, width: usize) -> String {
    let dim = diagram.dimension;
    let cell_width = (width / dim).max(1);
    let label_width = diagram.basis_labels.iter().map(|l| l.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for imaginary in [false, true] {
        let _ = writeln!(
            out,
            "{} (max {:.6})",
            if imaginary { "Im" } else { "Re" },
            diagram.max_magnitude
        );
        for row in 0..dim {
            let mut signs = String::new();
            let mut blocks = String::new();
            for col in 0..dim {
                let cell = diagram.cell(imaginary, row, col);
                let ratio = if diagram.max_magnitude > 0.0 {
                    cell.magnitude / diagram.max_magnitude
                } else {
                    0.0
                };
                let block = block_for(ratio);
                signs.push(match (block, cell.sign) {
                    (' ', _) => ' ',
                    (_, Sign::Positive) => '+',
                    (_, Sign::Negative) => '−',
                });
                blocks.extend(std::iter::repeat(block).take(cell_width));
            }
            let label = &diagram.basis_labels[row];
            let pad = label_width - label.chars().count();
            let _ = writeln!(out, "{label}{} {signs} │{blocks}│", " ".repeat(pad));
        }
    }
    out
}
