use crate::error::{Error, Result};

use super::Point;

/// Cubic Bézier curve in the plane.
///
/// `free[i][c]` marks coordinate `c` of control point `i` as a design
/// variable; the mesh builders use it to map a design vector onto the
/// control polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve {
    pub points: [Point; 4],
    pub free: [[bool; 2]; 4],
}

impl BezierCurve {
    pub fn new(points: [Point; 4]) -> Self {
        Self { points, free: [[false; 2]; 4] }
    }

    fn check(t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain { what: "bezier parameter t".into(), value: t, lo: 0.0, hi: 1.0 });
        }
        Ok(())
    }

    /// Bernstein form `(1-t)^3 P1 + 3(1-t)^2 t P2 + 3(1-t) t^2 P3 + t^3 P4`.
    pub fn eval(&self, t: f64) -> Result<Point> {
        Self::check(t)?;
        let s = 1.0 - t;
        let b = [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t];
        let mut p = [0.0; 2];
        for (w, q) in b.iter().zip(&self.points) {
            p[0] += w * q[0];
            p[1] += w * q[1];
        }
        Ok(p)
    }

    /// de Casteljau evaluation, used to cross-check [`BezierCurve::eval`].
    pub fn eval_de_casteljau(&self, t: f64) -> Result<Point> {
        Self::check(t)?;
        let mut q = self.points;
        for level in (1..4).rev() {
            for i in 0..level {
                for c in 0..2 {
                    q[i][c] = (1.0 - t) * q[i][c] + t * q[i + 1][c];
                }
            }
        }
        Ok(q[0])
    }

    /// Derivative `dB/dt`.
    pub fn tangent(&self, t: f64) -> Result<Point> {
        Self::check(t)?;
        let s = 1.0 - t;
        let p = &self.points;
        let mut d = [0.0; 2];
        for c in 0..2 {
            d[c] = 3.0 * s * s * (p[1][c] - p[0][c])
                + 6.0 * s * t * (p[2][c] - p[1][c])
                + 3.0 * t * t * (p[3][c] - p[2][c]);
        }
        Ok(d)
    }
}
