//! Two-column numeric tables (`x y` per line, `#` starts a comment) with
//! linear interpolation.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Curve {
    /// Builds a curve from points; x must be strictly increasing.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Curve> {
        if points.len() < 2 {
            return Err(Error::Config("a table needs at least two rows".into()));
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::Config(format!("row {}: non-finite value", i + 1)));
            }
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config(
                "first column must be strictly increasing".into(),
            ));
        }
        let (xs, ys) = points.into_iter().unzip();
        Ok(Curve { xs, ys })
    }

    pub fn parse(text: &str) -> Result<Curve> {
        let mut points = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Config(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let x: f64 = cols[0].parse().map_err(|_| {
                Error::Config(format!("line {}: bad number {:?}", lineno + 1, cols[0]))
            })?;
            let y: f64 = cols[1].parse().map_err(|_| {
                Error::Config(format!("line {}: bad number {:?}", lineno + 1, cols[1]))
            })?;
            points.push((x, y));
        }
        Curve::new(points)
    }

    pub fn load(path: &Path) -> Result<Curve> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Curve::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Parse {
                path: path.to_path_buf(),
                message: m,
            },
            other => other,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Linear interpolation; `None` outside the tabulated range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if !(x >= self.x_min() && x <= self.x_max()) {
            return None;
        }
        let i = self.xs.partition_point(|&v| v <= x);
        if i == self.xs.len() {
            return Some(self.ys[self.ys.len() - 1]);
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    pub fn max_y(&self) -> (f64, f64) {
        let mut best = (self.xs[0], self.ys[0]);
        for (x, y) in self.points() {
            if y > best.1 {
                best = (x, y);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_interpolates() {
        let c = Curve::parse("# header\n0 0\n2 1 # mid\n\n4 0\n").unwrap();
        assert_eq!(c.eval(1.0), Some(0.5));
        assert_eq!(c.eval(3.0), Some(0.5));
        assert_eq!(c.eval(4.0), Some(0.0));
        assert_eq!(c.eval(4.5), None);
    }

    #[test]
    fn rejects_unsorted_rows() {
        assert!(Curve::parse("0 0\n2 1\n1 0\n").is_err());
    }

    #[test]
    fn reports_bad_line() {
        let err = Curve::parse("0 0\n1 x\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
