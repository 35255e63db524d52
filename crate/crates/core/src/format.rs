//! Plain-text circuit files.
//!
//! ```text
//! # comment
//! grid <width> <height>
//! obstacle <x> <y>
//! net <id> <x1> <y1> <x2> <y2>
//! ```
//!
//! The writer emits obstacles sorted by `(y, x)` and nets by id, so a problem
//! always serializes to the same bytes.

use std::fmt::Write as _;

use thiserror::Error;

use crate::grid::{GridError, Net, Point, RoutingProblem};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `grid` statement")]
    MissingGrid,
    #[error(transparent)]
    Problem(#[from] GridError),
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

pub fn parse_circuit(text: &str) -> Result<RoutingProblem, FormatError> {
    let mut grid = None;
    let mut obstacles = Vec::new();
    let mut nets = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or_default();
        let nums: Vec<usize> = words
            .map(|w| {
                w.parse::<usize>()
                    .map_err(|_| syntax(line_no, format!("`{w}` is not a non-negative integer")))
            })
            .collect::<Result<_, _>>()?;
        let expect = |count: usize| {
            if nums.len() == count {
                Ok(())
            } else {
                Err(syntax(
                    line_no,
                    format!("`{keyword}` takes {count} numbers, found {}", nums.len()),
                ))
            }
        };
        match keyword {
            "grid" => {
                expect(2)?;
                if grid.is_some() {
                    return Err(syntax(line_no, "duplicate `grid` statement"));
                }
                grid = Some((nums[0], nums[1]));
            }
            "obstacle" => {
                expect(2)?;
                obstacles.push(Point::new(nums[0], nums[1]));
            }
            "net" => {
                expect(5)?;
                nets.push(Net::new(
                    nums[0],
                    Point::new(nums[1], nums[2]),
                    Point::new(nums[3], nums[4]),
                ));
            }
            other => return Err(syntax(line_no, format!("unknown statement `{other}`"))),
        }
    }
    let (width, height) = grid.ok_or(FormatError::MissingGrid)?;
    Ok(RoutingProblem::new(width, height, obstacles, nets)?)
}

pub fn write_circuit(problem: &RoutingProblem) -> String {
    let mut out = String::new();
    writeln!(out, "grid {} {}", problem.width(), problem.height()).unwrap();
    for p in problem.obstacles() {
        writeln!(out, "obstacle {} {}", p.x, p.y).unwrap();
    }
    for net in problem.nets() {
        writeln!(
            out,
            "net {} {} {} {} {}",
            net.id, net.pin_a.x, net.pin_a.y, net.pin_b.x, net.pin_b.y
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# two nets\ngrid 4 3\nobstacle 2 1\nobstacle 0 2\nnet 1 0 0 3 0\nnet 2 1 2 3 2 # trailing\n";

    #[test]
    fn parse_and_write_are_canonical() {
        let p = parse_circuit(SAMPLE).unwrap();
        assert_eq!(p.width(), 4);
        assert_eq!(p.obstacles(), &[Point::new(2, 1), Point::new(0, 2)]);
        let text = write_circuit(&p);
        assert_eq!(
            text,
            "grid 4 3\nobstacle 2 1\nobstacle 0 2\nnet 1 0 0 3 0\nnet 2 1 2 3 2\n"
        );
        assert_eq!(parse_circuit(&text).unwrap(), p);
    }

    #[test]
    fn obstacles_sorted_by_row_then_column() {
        let p = parse_circuit("grid 3 3\nobstacle 2 0\nobstacle 0 1\nobstacle 1 0\nnet 1 0 0 2 2\n").unwrap();
        assert!(write_circuit(&p).starts_with("grid 3 3\nobstacle 1 0\nobstacle 2 0\nobstacle 0 1\n"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_circuit("grid 3 3\nnet 1 0 0 2\n") {
            Err(FormatError::Syntax { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_circuit("net 1 0 0 1 1\n"), Err(FormatError::MissingGrid)));
        assert!(matches!(parse_circuit("grid 3 3\nvia 1 1\n"), Err(FormatError::Syntax { .. })));
        assert!(matches!(
            parse_circuit("grid 3 3\nnet 1 0 0 5 5\n"),
            Err(FormatError::Problem(GridError::OutOfBounds { .. }))
        ));
    }
}
