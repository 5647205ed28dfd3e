//! Regular grid sampling of the guidance field for external plotting.

use std::io::Write;
use std::str::FromStr;

use crate::error::{CvfError, Result};
use crate::format::fmt17;
use crate::geometry::Vec2;

use super::{CvfParams, RegionId};

pub const GRID_HEADER: &str = "x y Tx Ty theta_r kappa region";

/// Rectangular grid `[x_min, x_max] x [y_min, y_max]` with `resolution`
/// points per axis, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub resolution: usize,
}

impl GridSpec {
    /// Square grid `[-half, half]^2` around `center`.
    pub fn square(center: Vec2, half: f64, resolution: usize) -> Self {
        GridSpec {
            x_min: center.x - half,
            x_max: center.x + half,
            y_min: center.y - half,
            y_max: center.y + half,
            resolution,
        }
    }

    fn axis(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * (i as f64 / (n - 1) as f64)
        }
    }

    /// Grid points in row-major order (`y` outer, `x` inner).
    pub fn points(&self) -> impl Iterator<Item = Vec2> + '_ {
        let n = self.resolution;
        (0..n).flat_map(move |j| {
            let y = Self::axis(self.y_min, self.y_max, n, j);
            (0..n).map(move |i| Vec2::new(Self::axis(self.x_min, self.x_max, n, i), y))
        })
    }
}

impl FromStr for GridSpec {
    type Err = CvfError;

    /// Parses `XMIN:XMAX:YMIN:YMAX:RES`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = |msg: String| CvfError::Parse {
            line: 1,
            column: 1,
            message: msg,
        };
        if parts.len() != 5 {
            return Err(bad(format!(
                "grid must be XMIN:XMAX:YMIN:YMAX:RES, got '{s}'"
            )));
        }
        let num = |i: usize| -> Result<f64> {
            parts[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("grid field {} ('{}'): {e}", i + 1, parts[i])))
        };
        let resolution: usize = parts[4]
            .trim()
            .parse()
            .map_err(|e| bad(format!("grid resolution '{}': {e}", parts[4])))?;
        let spec = GridSpec {
            x_min: num(0)?,
            x_max: num(1)?,
            y_min: num(2)?,
            y_max: num(3)?,
            resolution,
        };
        if resolution == 0 || !(spec.x_min <= spec.x_max) || !(spec.y_min <= spec.y_max) {
            return Err(bad(format!("degenerate grid '{s}'")));
        }
        Ok(spec)
    }
}

/// Field sample at one grid point. `region` is `None` at the singular point,
/// where the direction, orientation and curvature are undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSample {
    pub p: Vec2,
    pub t: Vec2,
    pub theta_r: f64,
    pub kappa: f64,
    pub region: Option<RegionId>,
}

pub fn sample_grid(params: &CvfParams, spec: &GridSpec) -> Vec<GridSample> {
    spec.points()
        .map(|p| match params.geometry(p) {
            Ok(g) => GridSample {
                p,
                t: params.cvf(p),
                theta_r: g.theta_r,
                kappa: params.curvature(p).unwrap_or(f64::NAN),
                region: Some(g.region),
            },
            Err(_) => GridSample {
                p,
                t: Vec2::ZERO,
                theta_r: f64::NAN,
                kappa: f64::NAN,
                region: None,
            },
        })
        .collect()
}

/// Writes samples as a space-separated table with 17 significant digits.
/// The singular cell is written with region `S` and `nan` orientation and
/// curvature.
pub fn write_grid<W: Write>(mut out: W, samples: &[GridSample]) -> Result<()> {
    writeln!(out, "{GRID_HEADER}")?;
    for s in samples {
        let region = s.region.map_or_else(|| "S".to_string(), |r| r.to_string());
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            fmt17(s.p.x),
            fmt17(s.p.y),
            fmt17(s.t.x),
            fmt17(s.t.y),
            fmt17(s.theta_r),
            fmt17(s.kappa),
            region
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_grid_spec() {
        let g: GridSpec = "-18:18:-18.5:18:400".parse().unwrap();
        assert_eq!(g.x_min, -18.0);
        assert_eq!(g.y_min, -18.5);
        assert_eq!(g.resolution, 400);
        assert!("1:2:3".parse::<GridSpec>().is_err());
        assert!("1:0:0:1:5".parse::<GridSpec>().is_err());
        assert!("0:1:0:1:x".parse::<GridSpec>().is_err());
    }

    #[test]
    fn grid_marks_singular_cell() {
        let params = CvfParams::new(Vec2::new(0.0, 8.0), std::f64::consts::PI, 4.0, 8.0, 12.0, 1.0)
            .unwrap();
        // singular point at the origin, which is the center grid point
        assert!(params.singular_point().norm() < 1e-12);
        let spec: GridSpec = "-1:1:-1:1:3".parse().unwrap();
        let samples = sample_grid(&params, &spec);
        assert_eq!(samples.len(), 9);
        assert!(samples[4].region.is_none());
        let mut buf = Vec::new();
        write_grid(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], GRID_HEADER);
        assert_eq!(lines.len(), 10);
        assert!(lines[5].ends_with(" S"));
        assert!(lines[1].ends_with(" A1"));
        assert_eq!(lines[1].split(' ').count(), 7);
    }
}
