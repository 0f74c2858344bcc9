//! The `.pts` landmark format used by 300-W style datasets:
//!
//! ```text
//! version: 1
//! n_points: 5
//! {
//! 30.500000 41.250000
//! ...
//! }
//! ```
//!
//! Coordinates are stored as given, with no 1-based offset applied.

use std::fmt::Write as _;
use std::path::Path;

use landmark_cascade_core::{Point2, Shape};

use crate::error::{Error, Result};

pub fn parse_pts(text: &str) -> Result<Shape> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let bad = |n: usize, what: &str| Error::Data(format!("line {n}: {what}"));

    let mut count = None;
    loop {
        let (n, line) = lines.next().ok_or_else(|| Error::Data("missing '{'".into()))?;
        if line == "{" {
            break;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| bad(n, "expected 'key: value' header"))?;
        match key.trim() {
            "version" => {}
            "n_points" => {
                count = Some(value.trim().parse::<usize>().map_err(|_| bad(n, "n_points is not an integer"))?)
            }
            other => return Err(bad(n, &format!("unknown header '{other}'"))),
        }
    }
    let count = count.ok_or_else(|| Error::Data("missing n_points header".into()))?;

    let mut points = Vec::with_capacity(count);
    loop {
        let (n, line) = lines.next().ok_or_else(|| Error::Data("missing '}'".into()))?;
        if line == "}" {
            break;
        }
        let mut fields = line.split_whitespace().map(str::parse::<f64>);
        match (fields.next(), fields.next(), fields.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => points.push(Point2::new(x, y)),
            _ => return Err(bad(n, "expected two numbers")),
        }
    }
    if let Some((n, _)) = lines.next() {
        return Err(bad(n, "content after '}'"));
    }
    if points.len() != count {
        return Err(Error::Data(format!("n_points is {count} but {} points follow", points.len())));
    }
    Ok(Shape::new(points)?)
}

/// Serialise with six decimals.
pub fn format_pts(shape: &Shape) -> String {
    let mut out = format!("version: 1\nn_points: {}\n{{\n", shape.len());
    for p in shape.points() {
        let _ = writeln!(out, "{:.6} {:.6}", p.x, p.y);
    }
    out.push_str("}\n");
    out
}

pub fn read_pts(path: &Path) -> Result<Shape> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_pts(&text).map_err(|e| e.at(path))
}

pub fn write_pts(path: &Path, shape: &Shape) -> Result<()> {
    std::fs::write(path, format_pts(shape)).map_err(Error::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_300w_layout() {
        let text = "version: 1\nn_points:  2\n{\n336.820955 240.864510\n334.238298 260.922709\n}\n";
        let s = parse_pts(text).unwrap();
        assert_eq!(s.points(), &[Point2::new(336.820955, 240.86451), Point2::new(334.238298, 260.922709)]);
    }

    #[test]
    fn format_is_stable() {
        let s = Shape::new(vec![Point2::new(1.0, -2.5), Point2::new(0.1234567, 3.0)]).unwrap();
        assert_eq!(format_pts(&s), "version: 1\nn_points: 2\n{\n1.000000 -2.500000\n0.123457 3.000000\n}\n");
        assert_eq!(parse_pts(&format_pts(&s)).unwrap().points()[0], s.points()[0]);
    }

    #[test]
    fn rejects_malformed() {
        for text in [
            "",
            "n_points: 2\n{\n1 2\n}\n",
            "version: 1\n{\n1 2\n}\n",
            "n_points: 1\n{\n1 2 3\n}\n",
            "n_points: 1\n{\n1 x\n}\n",
            "n_points: 1\n{\n1 2\n",
            "n_points: 1\n{\n1 2\n}\nextra\n",
            "n_points: 0\n{\n}\n",
            "n_points: 1\n{\nNaN 2\n}\n",
        ] {
            assert!(parse_pts(text).is_err(), "{text:?}");
        }
    }
}
