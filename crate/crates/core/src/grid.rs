//! Uniform grids, sampled functions, and trapezoid-rule transforms.

use crate::error::QlError;
use crate::linalg::C64;
use serde::{Deserialize, Serialize};

/// Uniform symmetric grid `[-half, half]` with `2*n_half + 1` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(half: f64, step: f64) -> Result<Self, QlError> {
        if !(half > 0.0) || !(step > 0.0) || step > half {
            return Err(QlError::Grid(format!(
                "invalid grid: half={half}, step={step}"
            )));
        }
        Ok(Grid { half, step })
    }

    /// Default time grid for kernel sampling.
    pub fn default_time() -> Self {
        Grid { half: 200.0, step: 0.01 }
    }

    /// Default frequency grid for response tables.
    pub fn default_freq() -> Self {
        Grid { half: 20.0, step: 0.005 }
    }

    pub fn n_half(&self) -> usize {
        (self.half / self.step).round() as usize
    }

    pub fn len(&self) -> usize {
        2 * self.n_half() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, idx: usize) -> f64 {
        (idx as f64 - self.n_half() as f64) * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn covers(&self, x: f64) -> bool {
        x.abs() <= self.half + 1e-12
    }
}

/// Interpolation rule for a sampled function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    Linear,
    None,
}

/// Complex samples over a strictly increasing real grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampledFunction {
    pub grid: Vec<f64>,
    pub values: Vec<C64>,
    pub interpolation: Interpolation,
}

impl SampledFunction {
    pub fn new(grid: Vec<f64>, values: Vec<C64>, interpolation: Interpolation) -> Result<Self, QlError> {
        if grid.len() != values.len() {
            return Err(QlError::Grid(format!(
                "sampled function length mismatch: {} grid vs {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QlError::Grid("sampled function grid not strictly increasing".into()));
        }
        Ok(SampledFunction { grid, values, interpolation })
    }

    pub fn from_uniform(g: &Grid, values: Vec<C64>, interpolation: Interpolation) -> Result<Self, QlError> {
        Self::new(g.points().collect(), values, interpolation)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn min_x(&self) -> f64 {
        *self.grid.first().unwrap()
    }

    pub fn max_x(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Evaluate at `x`. Outside the grid or with `Interpolation::None` off a
    /// sample point, returns an error.
    pub fn eval(&self, x: f64) -> Result<C64, QlError> {
        if self.grid.is_empty() {
            return Err(QlError::Grid("empty sampled function".into()));
        }
        if x < self.min_x() - 1e-12 || x > self.max_x() + 1e-12 {
            return Err(QlError::Grid(format!(
                "evaluation point {x} outside sampled range [{}, {}]",
                self.min_x(),
                self.max_x()
            )));
        }
        let idx = match self.grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
            Ok(i) => return Ok(self.values[i]),
            Err(i) => i,
        };
        match self.interpolation {
            Interpolation::None => {
                // Accept near-exact hits.
                for &j in &[idx.saturating_sub(1), idx.min(self.grid.len() - 1)] {
                    if (self.grid[j] - x).abs() < 1e-9 {
                        return Ok(self.values[j]);
                    }
                }
                Err(QlError::Grid(format!("{x} is not a sample point and interpolation is off")))
            }
            Interpolation::Linear => {
                let i1 = idx.clamp(1, self.grid.len() - 1);
                let i0 = i1 - 1;
                let (x0, x1) = (self.grid[i0], self.grid[i1]);
                let t = (x - x0) / (x1 - x0);
                Ok(self.values[i0] * (1.0 - t) + self.values[i1] * t)
            }
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Trapezoid quadrature of complex samples on a uniform grid.
pub fn trapezoid(values: &[C64], step: f64) -> C64 {
    if values.len() < 2 {
        return C64::new(0.0, 0.0);
    }
    let inner: C64 = values[1..values.len() - 1].iter().sum();
    (inner + 0.5 * (values[0] + values[values.len() - 1])) * step
}

pub fn trapezoid_real(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    (inner + 0.5 * (values[0] + values[values.len() - 1])) * step
}

/// Forward transform `F(omega) = scale * integral dt f(t) exp(i omega t)` by
/// trapezoid rule over the sample grid.
pub fn fourier_forward(tg: &Grid, samples: &[C64], omega: f64, scale: f64) -> C64 {
    debug_assert_eq!(tg.len(), samples.len());
    let mut acc = C64::new(0.0, 0.0);
    let n = samples.len();
    for (i, &v) in samples.iter().enumerate() {
        let t = tg.point(i);
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += v * C64::from_polar(w, omega * t);
    }
    acc * (tg.step * scale)
}

/// Tabulate the forward transform on a frequency grid.
pub fn fourier_table(tg: &Grid, samples: &[C64], wg: &Grid, scale: f64) -> SampledFunction {
    let values: Vec<C64> = wg.points().map(|w| fourier_forward(tg, samples, w, scale)).collect();
    SampledFunction::from_uniform(wg, values, Interpolation::Linear).expect("uniform grid")
}

/// Inverse transform `f(t) = integral domega F(omega) exp(-i omega t)` by
/// trapezoid rule (the inverse pair of `fourier_forward` with scale
/// `1/(2 pi)`).
pub fn fourier_inverse(wg: &Grid, table: &[C64], t: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let n = table.len();
    for (i, &v) in table.iter().enumerate() {
        let w = wg.point(i);
        let wt = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += v * C64::from_polar(wt, -w * t);
    }
    acc * wg.step
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_symmetric() {
        let g = Grid::new(2.0, 0.5).unwrap();
        let pts: Vec<f64> = g.points().collect();
        assert_eq!(pts.len(), 9);
        assert!((pts[0] + 2.0).abs() < 1e-14);
        assert!((pts[8] - 2.0).abs() < 1e-14);
        assert!(pts[4].abs() < 1e-14);
    }

    #[test]
    fn gaussian_transform_pair() {
        // f(t) = exp(-t^2/2), (1/2pi) transform = exp(-w^2/2)/sqrt(2 pi)
        let tg = Grid::new(20.0, 0.01).unwrap();
        let samples: Vec<C64> = tg.points().map(|t| C64::new((-t * t / 2.0).exp(), 0.0)).collect();
        let scale = 1.0 / (2.0 * std::f64::consts::PI);
        for &w in &[0.0, 0.7, 2.0] {
            let got = fourier_forward(&tg, &samples, w, scale);
            let expect = (-w * w / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((got.re - expect).abs() < 1e-10, "w={w}: {} vs {expect}", got.re);
            assert!(got.im.abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_and_bounds() {
        let g = Grid::new(1.0, 0.5).unwrap();
        let sf = SampledFunction::from_uniform(
            &g,
            g.points().map(|x| C64::new(x * x, 0.0)).collect(),
            Interpolation::Linear,
        )
        .unwrap();
        let v = sf.eval(0.25).unwrap();
        assert!((v.re - 0.125).abs() < 1e-14); // linear between 0 and 0.25
        assert!(sf.eval(2.0).is_err());
    }
}
