//! Linear least-squares fit of `a + c·sin(2π s / P + φ)` at a fixed period.

use crate::error::{domain, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineFit<T> {
    pub offset: T,
    /// Non-negative amplitude `c`.
    pub amplitude: T,
    /// φ in (−π, π].
    pub phase: T,
    pub period: T,
    /// Residual sum of squares.
    pub rss: T,
}

impl<T: Real> SineFit<T> {
    pub fn eval(&self, s: T) -> T {
        self.offset + self.amplitude * (T::TAU() * s / self.period + self.phase).sin()
    }

    /// Value of the fitted harmonic alone (no offset).
    pub fn harmonic(&self, s: T) -> T {
        self.amplitude * (T::TAU() * s / self.period + self.phase).sin()
    }
}

/// Fits offset, amplitude and phase at the given period.
pub fn fit_sine<T: Real>(positions: &[T], values: &[T], period: T) -> Result<SineFit<T>> {
    if positions.len() != values.len() {
        return Err(domain("positions and values differ in length"));
    }
    if positions.len() < 3 {
        return Err(domain("a sine fit needs at least three samples"));
    }
    if !(period > T::zero()) {
        return Err(domain(format!("period must be positive, got {period}")));
    }
    let k = T::TAU() / period;
    // normal equations for the basis {1, sin, cos}
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (&s, &y) in positions.iter().zip(values) {
        let arg = (k * s).as_f64();
        let basis = [1.0, arg.sin(), arg.cos()];
        let y = y.as_f64();
        for i in 0..3 {
            rhs[i] += basis[i] * y;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let coef = solve3(m, rhs).ok_or_else(|| domain("sine fit is singular for this sampling"))?;
    let (a, p, q) = (coef[0], coef[1], coef[2]);
    let rss = positions
        .iter()
        .zip(values)
        .map(|(&s, &y)| {
            let arg = (k * s).as_f64();
            let r = y.as_f64() - (a + p * arg.sin() + q * arg.cos());
            r * r
        })
        .sum::<f64>();
    Ok(SineFit {
        offset: T::of(a),
        amplitude: T::of(p.hypot(q)),
        phase: T::of(q.atan2(p)),
        period,
        rss: T::of(rss),
    })
}

/// Gaussian elimination with partial pivoting on a 3×3 system.
fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() <= scale * 1e-13 {
            return None;
        }
        m.swap(col, pivot);
        r.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (r[row] - tail) / m[row][row];
    }
    Some(x)
}
