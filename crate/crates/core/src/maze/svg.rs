//! SVG 1.1 rendering of a maze and labelled paths.

use std::fmt::Write as _;

use crate::error::{Result, TatError};

use super::grid::{Cell, Maze};

/// Pixels per grid cell.
pub const CELL_PX: i64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathStyle {
    Plan,
    Artifact,
    Selected,
    Executed,
}

impl PathStyle {
    fn attributes(self) -> &'static str {
        match self {
            PathStyle::Plan => r##"stroke="#4c78a8" stroke-width="1.5" stroke-opacity="0.6""##,
            PathStyle::Artifact => r##"stroke="#d62728" stroke-width="1.5" stroke-dasharray="4 3""##,
            PathStyle::Selected => r##"stroke="#ff7f0e" stroke-width="3""##,
            PathStyle::Executed => r##"stroke="#2ca02c" stroke-width="2.5""##,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPath {
    pub label: String,
    pub style: PathStyle,
    pub cells: Vec<Cell>,
}

impl LabeledPath {
    pub fn new(label: impl Into<String>, style: PathStyle, cells: Vec<Cell>) -> Self {
        Self {
            label: label.into(),
            style,
            cells,
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

fn centre(c: i64) -> i64 {
    c * CELL_PX + CELL_PX / 2
}

pub fn render_svg(maze: &Maze, paths: &[LabeledPath]) -> Result<String> {
    for p in paths {
        if let Some(&(row, col)) = p.cells.iter().find(|&&c| !maze.in_bounds(c)) {
            return Err(TatError::OutOfBounds { row, col });
        }
    }
    let (w, h) = (maze.width() as i64 * CELL_PX, maze.height() as i64 * CELL_PX);
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    s.push_str("<g id=\"walls\" fill=\"#404040\">\n");
    for (r, c) in maze.walls() {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{CELL_PX}" height="{CELL_PX}"/>"#,
            c * CELL_PX,
            r * CELL_PX
        );
    }
    s.push_str("</g>\n");
    s.push_str("<g id=\"paths\" fill=\"none\" stroke-linecap=\"round\" stroke-linejoin=\"round\">\n");
    for p in paths {
        // stay moves repeat a cell; one vertex is enough
        let mut cells = p.cells.clone();
        cells.dedup();
        let points: Vec<String> = cells
            .iter()
            .map(|&(r, c)| format!("{},{}", centre(c), centre(r)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-label="{}" points="{}" {}/>"#,
            escape(&p.label),
            points.join(" "),
            p.style.attributes()
        );
    }
    s.push_str("</g>\n");
    for (id, cell, colour) in [("start", maze.start(), "#2a9d3f"), ("goal", maze.goal(), "#c0392b")] {
        let _ = writeln!(
            s,
            r#"<circle id="{id}" cx="{}" cy="{}" r="{}" fill="{colour}"/>"#,
            centre(cell.1),
            centre(cell.0),
            CELL_PX * 3 / 10
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::grid::preset;

    #[test]
    fn maze_only() {
        let m = preset("large").unwrap();
        let svg = render_svg(&m, &[]).unwrap();
        assert_eq!(svg.matches("<rect ").count(), m.wall_count());
        assert_eq!(m.wall_count(), m.width() * m.height() - m.open_count());
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert!(svg.contains("id=\"start\"") && svg.contains("id=\"goal\""));
    }

    #[test]
    fn single_path() {
        let m = preset("umaze").unwrap();
        let p = LabeledPath::new("a<b", PathStyle::Artifact, vec![(3, 1), (2, 1), (1, 1)]);
        let svg = render_svg(&m, &[p]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(r#"data-label="a&lt;b" points="30,70 30,50 30,30" "#));
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn out_of_bounds() {
        let m = preset("umaze").unwrap();
        let p = LabeledPath::new("x", PathStyle::Plan, vec![(0, 0), (0, 9)]);
        assert_eq!(render_svg(&m, &[p]), Err(TatError::OutOfBounds { row: 0, col: 9 }));
    }
}
