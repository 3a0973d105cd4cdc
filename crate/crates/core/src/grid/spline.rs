//! Shape-preserving monotone cubic Hermite interpolation (Fritsch–Carlson).

use serde::{Deserialize, Serialize};

use super::GridError;

/// Ordinates closer than this to their predecessor are snapped up to it.
pub const MONOTONE_SNAP_TOL: f64 = 1e-9;

/// Piecewise cubic Hermite interpolant through nondecreasing knots.
///
/// Segment `i` on `[x_i, x_{i+1}]` is determined by the knot values and the
/// limited slopes `slopes[i]`, `slopes[i+1]`. Outside the knot range the
/// interpolant is held constant at the end values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSpline {
    knots_x: Vec<f64>,
    knots_y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneSpline {
    /// Fits the interpolant.
    ///
    /// `xs` must be strictly increasing and `ys` nondecreasing; dips of at most
    /// [`MONOTONE_SNAP_TOL`] are snapped flat, anything larger is rejected.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self, GridError> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(GridError::LengthMismatch {
                expected: n.max(2),
                found: ys.len(),
            });
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(GridError::InvalidGrid("non-finite knot".into()));
        }
        if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(GridError::InvalidGrid(format!(
                "knots not strictly increasing at index {}",
                i + 1
            )));
        }
        let mut knots_y = ys.to_vec();
        for i in 1..n {
            if knots_y[i] < knots_y[i - 1] {
                if knots_y[i] < knots_y[i - 1] - MONOTONE_SNAP_TOL {
                    return Err(GridError::NonMonotoneInput { index: i });
                }
                knots_y[i] = knots_y[i - 1];
            }
        }

        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = knots_y
            .windows(2)
            .zip(&h)
            .map(|(w, h)| (w[1] - w[0]) / h)
            .collect();

        let mut slopes = vec![0.0; n];
        slopes[0] = delta[0];
        slopes[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            slopes[i] = if delta[i - 1] > 0.0 && delta[i] > 0.0 {
                0.5 * (delta[i - 1] + delta[i])
            } else {
                0.0
            };
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                slopes[i] = 0.0;
                slopes[i + 1] = 0.0;
                continue;
            }
            let a = slopes[i] / delta[i];
            let b = slopes[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                slopes[i] = tau * a * delta[i];
                slopes[i + 1] = tau * b * delta[i];
            }
        }

        Ok(Self {
            knots_x: xs.to_vec(),
            knots_y,
            slopes,
        })
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.knots_x
    }

    pub fn knots_y(&self) -> &[f64] {
        &self.knots_y
    }

    /// Index of the segment containing `x`, or `None` when `x` is off the knot range.
    fn segment(&self, x: f64) -> Option<usize> {
        let n = self.knots_x.len();
        if !(x >= self.knots_x[0] && x <= self.knots_x[n - 1]) {
            return None;
        }
        let idx = self.knots_x.partition_point(|&k| k <= x);
        Some(idx.saturating_sub(1).min(n - 2))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots_x.len();
        let Some(i) = self.segment(x) else {
            return if x < self.knots_x[0] {
                self.knots_y[0]
            } else {
                self.knots_y[n - 1]
            };
        };
        if x == self.knots_x[i] {
            return self.knots_y[i];
        }
        if x == self.knots_x[i + 1] {
            return self.knots_y[i + 1];
        }
        let h = self.knots_x[i + 1] - self.knots_x[i];
        let t = (x - self.knots_x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * self.knots_y[i]
            + h10 * h * self.slopes[i]
            + h01 * self.knots_y[i + 1]
            + h11 * h * self.slopes[i + 1];
        // Rounding can push the cubic a hair outside its (monotone) segment range.
        v.clamp(self.knots_y[i], self.knots_y[i + 1])
    }

    /// Analytic first derivative; zero outside the knot range.
    pub fn derivative(&self, x: f64) -> f64 {
        let Some(i) = self.segment(x) else {
            return 0.0;
        };
        let h = self.knots_x[i + 1] - self.knots_x[i];
        let t = (x - self.knots_x[i]) / h;
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.knots_y[i] + d01 * self.knots_y[i + 1]) / h
            + d10 * self.slopes[i]
            + d11 * self.slopes[i + 1]
    }

    /// Smallest `x` in the knot range with `eval(x) >= target`.
    ///
    /// Returns the first knot when `target` is at or below the first value and
    /// the last knot when it exceeds every value.
    pub fn solve_smallest(&self, target: f64) -> f64 {
        let n = self.knots_x.len();
        let first = self.knots_y.partition_point(|&v| v < target);
        if first == 0 {
            return self.knots_x[0];
        }
        if first == n {
            return self.knots_x[n - 1];
        }
        // A rising segment first reaches its right knot value at that knot.
        if self.knots_y[first] == target {
            return self.knots_x[first];
        }
        let (mut lo, mut hi) = (self.knots_x[first - 1], self.knots_x[first]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}
