//! SVG pictures of boards and routings.
//!
//! Cells are squares with `y` growing upward. Obstacles are black, pins are
//! colored squares labeled with their net id, and each path is a polyline
//! through the centers of its cells. Output depends only on the input.

use std::fmt::Write as _;
use std::io;

use crate::grid::{Path, Point, RoutingProblem};

const CELL: usize = 24;
const MARGIN: usize = 12;

const PALETTE: [&str; 10] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#9a6324", "#469990", "#808000",
];

fn color(net_id: usize) -> &'static str {
    PALETTE[(net_id - 1) % PALETTE.len()]
}

fn corner(problem: &RoutingProblem, p: Point) -> (usize, usize) {
    (MARGIN + p.x * CELL, MARGIN + (problem.height() - 1 - p.y) * CELL)
}

fn center(problem: &RoutingProblem, p: Point) -> (usize, usize) {
    let (x, y) = corner(problem, p);
    (x + CELL / 2, y + CELL / 2)
}

/// SVG document for `problem` with `paths` drawn on top; `paths[i]` takes the
/// color of net `i + 1`.
pub fn render_svg(problem: &RoutingProblem, paths: &[Path]) -> String {
    let (w, h) = (problem.width(), problem.height());
    let (pw, ph) = (2 * MARGIN + w * CELL, 2 * MARGIN + h * CELL);
    let mut s = String::new();
    let line = |s: &mut String, text: String| {
        s.push_str(&text);
        s.push('\n');
    };
    line(
        &mut s,
        format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{pw}" height="{ph}" viewBox="0 0 {pw} {ph}">"#),
    );
    line(&mut s, format!(r#"<rect x="0" y="0" width="{pw}" height="{ph}" fill="white"/>"#));
    line(&mut s, r##"<g stroke="#bbbbbb" stroke-width="1">"##.to_string());
    for i in 0..=w {
        let x = MARGIN + i * CELL;
        line(&mut s, format!(r#"<line x1="{x}" y1="{MARGIN}" x2="{x}" y2="{}"/>"#, MARGIN + h * CELL));
    }
    for j in 0..=h {
        let y = MARGIN + j * CELL;
        line(&mut s, format!(r#"<line x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}"/>"#, MARGIN + w * CELL));
    }
    line(&mut s, "</g>".to_string());
    for &o in problem.obstacles() {
        let (x, y) = corner(problem, o);
        line(&mut s, format!(r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="black"/>"#));
    }
    for (i, path) in paths.iter().enumerate() {
        let mut pts = String::new();
        for (k, &v) in path.vertices().iter().enumerate() {
            let (x, y) = center(problem, v);
            if k > 0 {
                pts.push(' ');
            }
            write!(pts, "{x},{y}").expect("string write");
        }
        line(
            &mut s,
            format!(
                r#"<polyline points="{pts}" fill="none" stroke="{}" stroke-width="6" stroke-linecap="round" stroke-linejoin="round"/>"#,
                color(i + 1)
            ),
        );
    }
    for net in problem.nets() {
        for pin in [net.pin_a, net.pin_b] {
            let (x, y) = corner(problem, pin);
            let (cx, cy) = center(problem, pin);
            line(
                &mut s,
                format!(
                    r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="black"/>"#,
                    x + 2,
                    y + 2,
                    CELL - 4,
                    CELL - 4,
                    color(net.id)
                ),
            );
            line(
                &mut s,
                format!(
                    r#"<text x="{cx}" y="{}" font-family="monospace" font-size="12" text-anchor="middle" fill="white">{}</text>"#,
                    cy + 4,
                    net.id
                ),
            );
        }
    }
    line(&mut s, "</svg>".to_string());
    s
}

pub fn write_svg(problem: &RoutingProblem, paths: &[Path], out: impl AsRef<std::path::Path>) -> io::Result<()> {
    std::fs::write(out, render_svg(problem, paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Net;

    #[test]
    fn empty_board_has_grid_only() {
        let p = RoutingProblem::new(3, 3, [], vec![Net::new(1, Point::new(0, 0), Point::new(2, 2))]).unwrap();
        let svg = render_svg(&p, &[]);
        let lines = svg.matches("<line ").count();
        assert_eq!(lines, 8);
        // Four vertical times four horizontal lines cross in 16 points.
        assert_eq!((lines / 2) * (lines / 2), 16);
        assert!(!svg.contains("<polyline"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn path_becomes_one_polyline() {
        let p = RoutingProblem::new(3, 2, [Point::new(1, 1)], vec![Net::new(1, Point::new(0, 0), Point::new(2, 0))]).unwrap();
        let path = Path::new(vec![Point::new(0, 0), Point::new(1, 0), Point::new(2, 0)]).unwrap();
        let svg = render_svg(&p, std::slice::from_ref(&path));
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), path.len());
        assert_eq!(svg.matches(r#"fill="black"/>"#).count(), 1);
        assert_eq!(svg, render_svg(&p, &[path]));
    }
}
