//! Filter functions: low-pass kernels, quasi-adiabatic kernels, and the
//! auxiliary step/band kernels, together with their frequency responses.
//!
//! Conventions used throughout the crate:
//!
//! * The frequency response of a low-pass kernel `G` is
//!   `G~(w) = (1/2pi) Int dt G(t) exp(i w t)`, so the passband response is
//!   close to one. Energy filtering multiplies eigenbasis matrix elements by
//!   `G~((E_i - E_j)/gamma)`.
//! * The response of a quasi-adiabatic kernel `F` is the plain transform
//!   `F~(w) = Int dt F(t) exp(i w t)`, which approximates `-1/w` above the
//!   band edge and vanishes at zero.
//! * `step-plus` carries its own `1/2pi` inside the kernel and uses the plain
//!   transform; `band-d` uses the `1/2pi` normalization like a low-pass.
//!
//! Responses are evaluated from closed forms or from a long auxiliary grid
//! where the kernel is band-limited (so the trapezoid transform is exact up
//! to truncation); the stored `fourier_table` is a sampled convenience view.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{QlError, Result};
use crate::grid::{fourier_forward, fourier_inverse, trapezoid_real, Grid, Interpolation, SampledFunction};
use crate::linalg::C64;

/// Which kernel a `FilterSpec` holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterKind {
    GaussianLowpass,
    ExactLowpass,
    GaussianQac,
    SubexpQac,
    StepPlus,
    BandD,
}

impl FilterKind {
    pub fn is_lowpass(self) -> bool {
        matches!(self, FilterKind::GaussianLowpass | FilterKind::ExactLowpass)
    }
    pub fn is_qac(self) -> bool {
        matches!(self, FilterKind::GaussianQac | FilterKind::SubexpQac)
    }
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::GaussianLowpass => "gaussian-lowpass",
            FilterKind::ExactLowpass => "exact-lowpass",
            FilterKind::GaussianQac => "gaussian-qac",
            FilterKind::SubexpQac => "subexp-qac",
            FilterKind::StepPlus => "step-plus",
            FilterKind::BandD => "band-d",
        }
    }
}

/// Envelope families for kernel decay in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayFamily {
    /// exp(-t / log^2(2+t))
    LogSquared,
    /// exp(-t / (log(2+t) log^2(log(2+t)+1)))
    LogLogSquared,
    /// exp(-t / (log(2+t) log(log(2+t)+1) log^2(log(log(2+t)+1)+1)))
    LogLogLogSquared,
    /// exp(-t^2)
    Gaussian,
    /// t^-1
    PowerLaw,
}

impl DecayFamily {
    /// The rate function eps(y) such that the envelope is exp(-y eps(y))
    /// (for the power-law family this is log y / y so the envelope is 1/y).
    pub fn epsilon(self, y: f64) -> f64 {
        let y = y.max(1e-12);
        match self {
            DecayFamily::LogSquared => 1.0 / (2.0 + y).ln().powi(2),
            DecayFamily::LogLogSquared => {
                let l = (2.0 + y).ln();
                1.0 / (l * (l + 1.0).ln().powi(2))
            }
            DecayFamily::LogLogLogSquared => {
                let l = (2.0 + y).ln();
                let ll = (l + 1.0).ln();
                1.0 / (l * ll * (ll + 1.0).ln().powi(2))
            }
            DecayFamily::Gaussian => y,
            DecayFamily::PowerLaw => y.max(1.0).ln() / y.max(1.0),
        }
    }

    /// Shape x(t) such that the envelope is exp(-c2 x(t)).
    pub fn shape(self, t: f64) -> f64 {
        let t = t.max(1e-12);
        match self {
            DecayFamily::Gaussian => t * t,
            DecayFamily::PowerLaw => t.ln().max(0.0),
            _ => t * self.epsilon(t),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecayFamily::LogSquared => "log-squared",
            DecayFamily::LogLogSquared => "log-log-squared",
            DecayFamily::LogLogLogSquared => "log-log-log-squared",
            DecayFamily::Gaussian => "gaussian",
            DecayFamily::PowerLaw => "power-law",
        }
    }

    /// Subexponential ladder families (the admissible inputs for the exact
    /// low-pass construction).
    pub fn ladder() -> [DecayFamily; 3] {
        [DecayFamily::LogSquared, DecayFamily::LogLogSquared, DecayFamily::LogLogLogSquared]
    }
}

/// A decay class: envelope family plus fitted constants, `|f(t)| <= c1 exp(-c2 shape(t))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayClass {
    pub family: DecayFamily,
    pub c1: f64,
    pub c2: f64,
}

impl DecayClass {
    pub fn envelope(&self, t: f64) -> f64 {
        self.c1 * (-self.c2 * self.family.shape(t)).exp()
    }

    /// Partial integrals of eps(y)/y over [1, 10^k] for k = 1..=decades.
    /// The per-decade increments must stay below `slack` for the class to be
    /// admissible for the exact low-pass construction.
    pub fn partial_integral_increments(family: DecayFamily, decades: usize) -> Vec<f64> {
        let mut incs = Vec::with_capacity(decades);
        let mut lo = 1.0f64;
        for _ in 0..decades {
            let hi = lo * 10.0;
            // log-spaced trapezoid in u = ln y: Int eps(y)/y dy = Int eps(e^u) du
            let n = 400;
            let du = (hi.ln() - lo.ln()) / n as f64;
            let vals: Vec<f64> = (0..=n)
                .map(|i| family.epsilon((lo.ln() + i as f64 * du).exp()))
                .collect();
            incs.push(trapezoid_real(&vals, du));
            lo = hi;
        }
        incs
    }
}

/// Analytic kernel parameters, used for exact (grid-independent) response
/// evaluation.
#[derive(Clone, Debug)]
pub enum KernelModel {
    GaussianLowpass { q: f64 },
    /// Box of half-width 3/4 convolved with a product-of-boxes bump (full
    /// widths `a`, bump support +-1/4). Time kernel is an explicit product
    /// of sinc factors.
    BoxProduct { a: Vec<f64>, long: LongGrid },
    GaussianQac { alpha: f64 },
    /// Antiderivative kernel built from a normalized low-pass `g`; the
    /// response is `-(1 - g~(w))/w`.
    QacFromLowpass { a: Vec<f64>, long: LongGrid },
    StepPlus { q: f64, gamma: f64, eps: f64, long: LongGrid },
    BandD { q1: f64, gamma: f64, lambda_min: f64, long: LongGrid },
}

/// A long, coarse auxiliary grid holding kernel samples for response
/// quadrature. For band-limited kernels the trapezoid transform on this grid
/// is exact up to truncation.
#[derive(Clone, Debug)]
pub struct LongGrid {
    pub grid: Grid,
    pub samples: Vec<C64>,
    /// Bound on the neglected tail integral `2 Int_{T}^{inf} |f|`.
    pub tail_bound: f64,
}

impl LongGrid {
    fn transform(&self, omega: f64, scale: f64) -> C64 {
        fourier_forward(&self.grid, &self.samples, omega, scale)
    }
}

/// A constructed filter: literal time kernel, response table, decay
/// metadata, and the analytic model behind it.
#[derive(Clone, Debug)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub params: BTreeMap<String, f64>,
    pub time_grid: Grid,
    pub time_kernel: Vec<C64>,
    pub fourier_table: SampledFunction,
    pub decay_class: DecayClass,
    /// Stored quadrature-error bound: the response table and the directly
    /// transformed time kernel agree within this.
    pub quad_bound: f64,
    pub model: KernelModel,
}

const BAND_TOL: f64 = 1e-8;

impl FilterSpec {
    /// Exact-as-possible response at a single frequency.
    pub fn response(&self, omega: f64) -> C64 {
        match &self.model {
            KernelModel::GaussianLowpass { q } => {
                let s = (q / 2.0).sqrt();
                C64::new(0.5 * (libm::erf(s * (omega + 0.75)) - libm::erf(s * (omega - 0.75))), 0.0)
            }
            KernelModel::BoxProduct { long, .. } => {
                C64::new(long.transform(omega, 1.0 / (2.0 * PI)).re, 0.0)
            }
            KernelModel::GaussianQac { alpha } => {
                if omega == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(-(1.0 - (-alpha * alpha * omega * omega / 2.0).exp()) / omega, 0.0)
                }
            }
            KernelModel::QacFromLowpass { long, .. } => {
                if omega == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                if omega.abs() >= 1.0 {
                    // g~ vanishes beyond the band by construction.
                    return C64::new(-1.0 / omega, 0.0);
                }
                let raw0 = long.transform(0.0, 1.0).re;
                let g = long.transform(omega, 1.0).re / raw0;
                C64::new(-(1.0 - g) / omega, 0.0)
            }
            KernelModel::StepPlus { long, .. } => long.transform(omega, 1.0),
            KernelModel::BandD { long, .. } => long.transform(omega, 1.0 / (2.0 * PI)),
        }
    }

    /// Kernel value at time `t` from the analytic model.
    pub fn kernel_at(&self, t: f64) -> C64 {
        match &self.model {
            KernelModel::GaussianLowpass { q } => C64::new(gaussian_lowpass_kernel(*q, t), 0.0),
            // Stored with unit time integral (plain-transform convention).
            KernelModel::BoxProduct { a, .. } => C64::new(box_product_kernel(a, t) / (2.0 * PI), 0.0),
            KernelModel::GaussianQac { alpha } => {
                let mag = 0.5 * libm::erfc(t.abs() / (alpha * std::f64::consts::SQRT_2));
                C64::new(0.0, mag * t.signum())
            }
            KernelModel::QacFromLowpass { a, long } => {
                let mag = qac_tail_integral(a, long, t.abs());
                C64::new(0.0, mag * t.signum())
            }
            KernelModel::StepPlus { q, gamma, eps, .. } => {
                let w = (-(t * gamma / 2.0).powi(2) / (2.0 * q)).exp();
                w / (2.0 * PI) / C64::new(*eps, t)
            }
            KernelModel::BandD { q1, gamma, lambda_min, .. } => {
                let w = (-(t * lambda_min).powi(2) / (2.0 * q1)).exp();
                if t.abs() < 1e-14 {
                    C64::new(2.0 * gamma * w, 0.0)
                } else {
                    w * (C64::new(1.0, 0.0) - C64::from_polar(1.0, -2.0 * gamma * t)) / C64::new(0.0, t)
                }
            }
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// Parity/normalization invariants for the stored kind.
    pub fn verify_invariants(&self) -> Result<()> {
        let n = self.time_kernel.len();
        if self.kind.is_lowpass() {
            // even kernel, real even response
            let mut parity = 0.0f64;
            for i in 0..n / 2 {
                parity = parity.max((self.time_kernel[i] - self.time_kernel[n - 1 - i]).norm());
            }
            if parity > 1e-10 {
                return Err(QlError::Filter(format!("low-pass kernel not even (residual {parity:.2e})")));
            }
            let im_max = self.fourier_table.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
            if im_max > 1e-10 {
                return Err(QlError::Filter(format!("low-pass response not real (residual {im_max:.2e})")));
            }
        }
        if self.kind.is_qac() {
            let m = self.fourier_table.len();
            let mut odd = 0.0f64;
            for i in 0..m / 2 {
                odd = odd.max((self.fourier_table.values[i] + self.fourier_table.values[m - 1 - i]).norm());
            }
            if odd > 1e-10 {
                return Err(QlError::Filter(format!("qac response not odd (residual {odd:.2e})")));
            }
            let at0 = self.fourier_table.eval(0.0).unwrap_or(C64::new(f64::NAN, 0.0));
            if at0.norm() > 1e-10 {
                return Err(QlError::Filter(format!("qac response nonzero at omega=0 ({:.2e})", at0.norm())));
            }
        }
        Ok(())
    }

    /// Two-column (t, Re, Im) export of the time kernel.
    pub fn export_kernel_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# qaclab kernel kind={}", self.kind.name());
        for (k, v) in &self.params {
            let _ = writeln!(s, "# param {k}={v:.17e}");
        }
        let _ = writeln!(s, "# columns: t[1]\tre[1]\tim[1]");
        for (i, v) in self.time_kernel.iter().enumerate() {
            let _ = writeln!(s, "{:.12e}\t{:.17e}\t{:.17e}", self.time_grid.point(i), v.re, v.im);
        }
        s
    }
}

/// Parse a (t, Re, Im) kernel export back into samples.
pub fn import_kernel_text(text: &str) -> Result<SampledFunction> {
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(QlError::Filter(format!("kernel line has {} columns, expected 3", cols.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| QlError::Filter(format!("bad kernel number {s:?}: {e}")))
        };
        grid.push(parse(cols[0])?);
        values.push(C64::new(parse(cols[1])?, parse(cols[2])?));
    }
    SampledFunction::new(grid, values, Interpolation::Linear)
}

fn gaussian_lowpass_kernel(q: f64, t: f64) -> f64 {
    let window = (-t * t / (2.0 * q)).exp();
    let osc = if t.abs() < 1e-10 { 1.5 } else { 2.0 * (0.75 * t).sin() / t };
    window * osc
}

fn box_product_kernel(a: &[f64], t: f64) -> f64 {
    let box_part = if t.abs() < 1e-10 { 1.5 } else { 2.0 * (0.75 * t).sin() / t };
    let mut acc = box_part;
    for &ak in a {
        let x = ak * t / 2.0;
        acc *= if x.abs() < 1e-10 { 1.0 } else { x.sin() / x };
    }
    acc
}

/// `Int_{|t|}^{inf} g_n(u) du` for the normalized low-pass behind a qac
/// kernel, from the long grid (plus a negligible analytic tail).
fn qac_tail_integral(a: &[f64], long: &LongGrid, t_abs: f64) -> f64 {
    let g = &long.grid;
    let norm = long.transform(0.0, 1.0).re;
    // integrate g from t_abs to the grid end with trapezoid on the fly
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..g.len() {
        let u = g.point(i);
        if u < t_abs {
            continue;
        }
        let val = box_product_kernel(a, u) / norm;
        if let Some((pu, pv)) = prev {
            acc += 0.5 * (pv + val) * (u - pu);
        } else if u > t_abs {
            // partial cell from t_abs to the first grid point
            let v0 = box_product_kernel(a, t_abs) / norm;
            acc += 0.5 * (v0 + val) * (u - t_abs);
        }
        prev = Some((u, val));
    }
    acc
}

/// Internal: long-grid builder. `step` must keep alias images of the
/// response outside `[-w_need, w_need]` for band-limited kernels.
fn build_long_grid<F: Fn(f64) -> C64>(half: f64, step: f64, f: F) -> LongGrid {
    let g = Grid::new(half, step).expect("long grid");
    let samples: Vec<C64> = g.points().map(f).collect();
    // crude tail bound: |f| at the edge times a decade of width
    let edge = samples.first().map(|v| v.norm()).unwrap_or(0.0).max(samples.last().map(|v| v.norm()).unwrap_or(0.0));
    LongGrid { grid: g, samples, tail_bound: 2.0 * edge * half.min(1000.0) }
}

/// Fit (c1, c2) of `|vals|` against a decay family over [t_lo, t_hi] using
/// windowed maxima (the kernels oscillate through zeros) and linear
/// regression of log upper-envelope values on the family shape.
pub fn fit_decay_class(ts: &[f64], vals: &[f64], family: DecayFamily, t_lo: f64, t_hi: f64) -> DecayClass {
    let window = ((t_hi - t_lo) / 40.0).max(1e-6);
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut w_start = t_lo;
    while w_start < t_hi {
        let w_end = w_start + window;
        let mut best: Option<(f64, f64)> = None;
        for (&t, &v) in ts.iter().zip(vals.iter()) {
            if t >= w_start && t < w_end && v > 0.0 {
                if best.map(|(_, bv)| v > bv).unwrap_or(true) {
                    best = Some((t, v));
                }
            }
        }
        if let Some((t, v)) = best {
            if v > 1e-300 {
                xs.push(family.shape(t));
                ys.push(v.ln());
            }
        }
        w_start = w_end;
    }
    if xs.len() < 3 {
        return DecayClass { family, c1: f64::NAN, c2: f64::NAN };
    }
    // least squares y = b - c2 x
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    DecayClass { family, c1: intercept.exp(), c2: -slope }
}

/// Gaussian low-pass `f_q(t) = exp(-t^2/2q) [exp(i3t/4)-exp(-i3t/4)]/(it)`.
pub fn make_gaussian_lowpass(q: f64, t_grid: &Grid, w_grid: &Grid) -> Result<FilterSpec> {
    if !(q > 0.0) {
        return Err(QlError::Filter("gaussian low-pass requires q > 0".into()));
    }
    // Resolve the oscillation against the worst response frequency and cover
    // the Gaussian envelope.
    let required_step = 0.2 * PI / (0.75 + w_grid.half);
    if t_grid.step > required_step {
        return Err(QlError::Filter(format!(
            "time grid too coarse for quadrature: step {} > required {:.4}",
            t_grid.step, required_step
        )));
    }
    let required_half = 6.0 * q.sqrt();
    if t_grid.half < required_half {
        return Err(QlError::Filter(format!(
            "time grid too short: half {} < required {:.1} (6 sqrt q)",
            t_grid.half, required_half
        )));
    }
    let time_kernel: Vec<C64> = t_grid.points().map(|t| C64::new(gaussian_lowpass_kernel(q, t), 0.0)).collect();
    let model = KernelModel::GaussianLowpass { q };
    let mut params = BTreeMap::new();
    params.insert("q".into(), q);
    finish_spec(FilterKind::GaussianLowpass, params, t_grid.clone(), time_kernel, w_grid, model, DecayFamily::Gaussian)
}

/// Exact low-pass: response 1 on |w|<=1/2 and 0 on |w|>=1, built as a box of
/// half-width 3/4 convolved with a product-of-boxes bump of support +-1/4.
/// Widths follow the requested subexponential family.
pub fn make_exact_lowpass(family: DecayFamily, k_terms: usize, t_grid: &Grid, w_grid: &Grid) -> Result<FilterSpec> {
    make_exact_lowpass_tol(family, k_terms, t_grid, w_grid, BAND_TOL)
}

pub fn make_exact_lowpass_tol(
    family: DecayFamily,
    k_terms: usize,
    t_grid: &Grid,
    w_grid: &Grid,
    band_tol: f64,
) -> Result<FilterSpec> {
    if k_terms < 1 {
        return Err(QlError::Filter("exact low-pass requires K >= 1".into()));
    }
    if !DecayFamily::ladder().contains(&family) {
        return Err(QlError::Filter(format!(
            "decay family {} is not in the subexponential ladder",
            family.name()
        )));
    }
    let weights: Vec<f64> = (1..=k_terms)
        .map(|k| match family {
            DecayFamily::LogSquared => 1.0 / (k as f64 * (k as f64 + 1.0).ln().powi(2)),
            DecayFamily::LogLogSquared => {
                let l = (k as f64 + 2.0).ln();
                1.0 / (k as f64 * l * (l + 1.0).ln().powi(2) / (2.0f64).ln())
            }
            DecayFamily::LogLogLogSquared => {
                let l = (k as f64 + 2.0).ln();
                let ll = (l + 1.0).ln();
                1.0 / (k as f64 * l * ll * (ll + 1.0).ln().powi(2) * 2.0)
            }
            _ => unreachable!(),
        })
        .collect();
    let wsum: f64 = weights.iter().sum();
    let a: Vec<f64> = weights.iter().map(|w| w / wsum * 0.5).collect();

    // Long grid: band-limited to |w| <= 1, so step only has to keep alias
    // images of the support outside the tabulated range.
    let step = (PI / (w_grid.half + 2.0)).min(0.25);
    let half = 4000.0;
    let long = build_long_grid(half, step, |t| C64::new(box_product_kernel(&a, t), 0.0));

    // Achievable band tolerance: the truncation tail of the quadrature.
    let tail = tail_bound_box_product(&a, half);
    if tail > band_tol {
        return Err(QlError::Filter(format!(
            "K={k_terms} too small for requested band tolerance {band_tol:.1e}; achievable about {tail:.1e}"
        )));
    }

    let time_kernel: Vec<C64> =
        t_grid.points().map(|t| C64::new(box_product_kernel(&a, t) / (2.0 * PI), 0.0)).collect();
    let model = KernelModel::BoxProduct { a, long };
    let mut params = BTreeMap::new();
    params.insert("K".into(), k_terms as f64);
    params.insert("band_tol".into(), band_tol);
    finish_spec(FilterKind::ExactLowpass, params, t_grid.clone(), time_kernel, w_grid, model, family)
}

fn tail_bound_box_product(a: &[f64], t_from: f64) -> f64 {
    // |g(t)| <= (2/t) prod min(1, 2/(a_k t)); integrate the bound outward by
    // log-spaced trapezoid until it stops mattering.
    let bound = |t: f64| -> f64 {
        let mut acc: f64 = 2.0 / t;
        for &ak in a {
            acc *= (2.0 / (ak * t)).min(1.0);
        }
        acc
    };
    let mut acc = 0.0;
    let mut lo = t_from;
    for _ in 0..40 {
        let hi = lo * 1.3;
        acc += 0.5 * (bound(lo) + bound(hi)) * (hi - lo);
        lo = hi;
        if bound(lo) * lo < 1e-18 {
            break;
        }
    }
    2.0 * acc
}

/// Quasi-adiabatic kernel from an exact low-pass: `F(t) = i sign(t)
/// Int_{|t|}^{inf} g_n(u) du`, response `-(1 - g~(w))/w`.
pub fn make_qac_kernel(lowpass: &FilterSpec) -> Result<FilterSpec> {
    lowpass.verify_invariants()?;
    let (a, long) = match &lowpass.model {
        KernelModel::BoxProduct { a, long } => (a.clone(), long.clone()),
        _ => {
            // The construction needs the response to vanish beyond the band.
            let r1 = lowpass.response(1.0).norm();
            return Err(QlError::Filter(format!(
                "qac construction needs an exact low-pass (response at band edge {r1:.2e} does not vanish)"
            )));
        }
    };
    let g0 = lowpass.response(0.0).re;
    if (g0 - 1.0).abs() > 1e-6 {
        return Err(QlError::Filter(format!("low-pass response at 0 is {g0}, expected 1")));
    }
    let t_grid = lowpass.time_grid.clone();
    let w_grid_pts = &lowpass.fourier_table.grid;
    let w_grid = Grid::new(*w_grid_pts.last().unwrap(), w_grid_pts[1] - w_grid_pts[0])?;

    let model = KernelModel::QacFromLowpass { a: a.clone(), long };
    let spec_stub = FilterSpec {
        kind: FilterKind::SubexpQac,
        params: lowpass.params.clone(),
        time_grid: t_grid.clone(),
        time_kernel: vec![],
        fourier_table: SampledFunction::new(vec![0.0], vec![C64::new(0.0, 0.0)], Interpolation::None)?,
        decay_class: lowpass.decay_class.clone(),
        quad_bound: 0.0,
        model,
    };
    // Evaluate the antiderivative on the requested grid via cumulative sums
    // over the long grid (cheap: one backward pass).
    let time_kernel = cumulative_qac_kernel(&a, &spec_stub, &t_grid);
    let model = spec_stub.model;
    finish_spec(
        FilterKind::SubexpQac,
        lowpass.params.clone(),
        t_grid,
        time_kernel,
        &w_grid,
        model,
        lowpass.decay_class.family,
    )
}

fn cumulative_qac_kernel(a: &[f64], stub: &FilterSpec, t_grid: &Grid) -> Vec<C64> {
    let long = match &stub.model {
        KernelModel::QacFromLowpass { long, .. } => long,
        _ => unreachable!(),
    };
    let g = &long.grid;
    let norm = long.transform(0.0, 1.0).re;
    // cumulative integral from each long-grid point to the end
    let n = g.len();
    let mut cum = vec![0.0f64; n];
    for i in (0..n - 1).rev() {
        let v0 = box_product_kernel(a, g.point(i)) / norm;
        let v1 = box_product_kernel(a, g.point(i + 1)) / norm;
        cum[i] = cum[i + 1] + 0.5 * (v0 + v1) * g.step;
    }
    // interpolate to requested |t|
    t_grid
        .points()
        .map(|t| {
            let ta = t.abs();
            let pos = (ta + g.half) / g.step;
            let idx = pos.floor() as usize;
            let mag = if idx + 1 >= n {
                0.0
            } else {
                let frac = pos - idx as f64;
                cum[idx] * (1.0 - frac) + cum[idx + 1] * frac
            };
            C64::new(0.0, mag * t.signum())
        })
        .collect()
}

/// Gaussian quasi-adiabatic kernel at width `alpha`.
pub fn make_gaussian_qac(alpha: f64, t_grid: &Grid, w_grid: &Grid) -> Result<FilterSpec> {
    if !(alpha > 0.0) {
        return Err(QlError::Filter("gaussian qac requires alpha > 0".into()));
    }
    if t_grid.half < 6.0 * alpha {
        return Err(QlError::Filter(format!(
            "time grid must cover +-{:.1} (6 alpha), has +-{}",
            6.0 * alpha,
            t_grid.half
        )));
    }
    let time_kernel: Vec<C64> = t_grid
        .points()
        .map(|t| {
            let mag = 0.5 * libm::erfc(t.abs() / (alpha * std::f64::consts::SQRT_2));
            C64::new(0.0, mag * t.signum())
        })
        .collect();
    let model = KernelModel::GaussianQac { alpha };
    let mut params = BTreeMap::new();
    params.insert("alpha".into(), alpha);
    finish_spec(FilterKind::GaussianQac, params, t_grid.clone(), time_kernel, w_grid, model, DecayFamily::Gaussian)
}

/// Auxiliary kernels: the step selector and the band selector.
pub enum AuxKind {
    StepPlus { q: f64, gamma: f64, eps: f64 },
    BandD { q1: f64, gamma: f64, lambda_min: f64 },
}

pub fn make_aux_kernel(kind: AuxKind, t_grid: &Grid, w_grid: &Grid) -> Result<FilterSpec> {
    match kind {
        AuxKind::StepPlus { q, gamma, eps } => {
            if !(eps > 0.0) {
                return Err(QlError::Filter("step-plus regulator eps must be positive".into()));
            }
            if !(q > 0.0) || !(gamma > 0.0) {
                return Err(QlError::Filter("step-plus requires positive q and gamma".into()));
            }
            let kernel = move |t: f64| {
                let w = (-(t * gamma / 2.0).powi(2) / (2.0 * q)).exp();
                w / (2.0 * PI) / C64::new(eps, t)
            };
            let width = 8.0 * (2.0 * q).sqrt() / gamma;
            let long = build_long_grid(width.max(50.0), (PI / (w_grid.half + 2.0)).min(0.02), kernel);
            let time_kernel: Vec<C64> = t_grid.points().map(kernel).collect();
            let model = KernelModel::StepPlus { q, gamma, eps, long };
            let mut params = BTreeMap::new();
            params.insert("q".into(), q);
            params.insert("gamma".into(), gamma);
            params.insert("eps".into(), eps);
            finish_spec(FilterKind::StepPlus, params, t_grid.clone(), time_kernel, w_grid, model, DecayFamily::Gaussian)
        }
        AuxKind::BandD { q1, gamma, lambda_min } => {
            if !(q1 > 0.0) || !(gamma > 0.0) || !(lambda_min > 0.0) {
                return Err(QlError::Filter("band-d requires positive q1, gamma, lambda_min".into()));
            }
            let kernel = move |t: f64| {
                let w = (-(t * lambda_min).powi(2) / (2.0 * q1)).exp();
                if t.abs() < 1e-14 {
                    C64::new(2.0 * gamma * w, 0.0)
                } else {
                    w * (C64::new(1.0, 0.0) - C64::from_polar(1.0, -2.0 * gamma * t)) / C64::new(0.0, t)
                }
            };
            let width = 8.0 * (2.0 * q1).sqrt() / lambda_min;
            let long = build_long_grid(width.max(50.0), (PI / (w_grid.half + 2.0 * gamma + 2.0)).min(0.02), kernel);
            let time_kernel: Vec<C64> = t_grid.points().map(kernel).collect();
            let model = KernelModel::BandD { q1, gamma, lambda_min, long };
            let mut params = BTreeMap::new();
            params.insert("q1".into(), q1);
            params.insert("gamma".into(), gamma);
            params.insert("lambda_min".into(), lambda_min);
            finish_spec(FilterKind::BandD, params, t_grid.clone(), time_kernel, w_grid, model, DecayFamily::Gaussian)
        }
    }
}

/// Common tail: tabulate the response, measure the quadrature bound, fit the
/// decay class, verify invariants.
fn finish_spec(
    kind: FilterKind,
    params: BTreeMap<String, f64>,
    time_grid: Grid,
    time_kernel: Vec<C64>,
    w_grid: &Grid,
    model: KernelModel,
    family: DecayFamily,
) -> Result<FilterSpec> {
    let mut spec = FilterSpec {
        kind,
        params,
        time_grid,
        time_kernel,
        fourier_table: SampledFunction::new(vec![0.0], vec![C64::new(0.0, 0.0)], Interpolation::None)?,
        decay_class: DecayClass { family, c1: 1.0, c2: 0.0 },
        quad_bound: 0.0,
        model,
    };
    let values: Vec<C64> = w_grid.points().map(|w| spec.response(w)).collect();
    spec.fourier_table = SampledFunction::from_uniform(w_grid, values, Interpolation::Linear)?;

    // Measured quadrature bound: table vs direct transform of the stored
    // time kernel, on a subsample of frequencies.
    let scale = direct_transform_scale(kind);
    let mut dev = 0.0f64;
    let probes = 41;
    for i in 0..probes {
        let w = -w_grid.half + (2.0 * w_grid.half) * i as f64 / (probes - 1) as f64;
        let direct = fourier_forward(&spec.time_grid, &spec.time_kernel, w, scale);
        dev = dev.max((direct - spec.response(w)).norm());
    }
    // Round-trip deviation at a few interior times.
    let mut rt = 0.0f64;
    for &t in &[0.0, 0.7, 3.3, 11.0] {
        if t < spec.time_grid.half {
            let back = fourier_inverse(
                &Grid::new(spec.fourier_table.max_x(), spec.fourier_table.grid[1] - spec.fourier_table.grid[0])?,
                &spec.fourier_table.values,
                t,
            ) / C64::new(2.0 * PI * scale, 0.0);
            let idx = ((t + spec.time_grid.half) / spec.time_grid.step).round() as usize;
            rt = rt.max((back - spec.time_kernel[idx]).norm());
        }
    }
    spec.quad_bound = (dev.max(rt) * 1.25).max(1e-12);

    // Fit the decay class on |kernel|.
    let ts: Vec<f64> = spec.time_grid.points().collect();
    let vals: Vec<f64> = spec.time_kernel.iter().map(|v| v.norm()).collect();
    let t_hi = spec.time_grid.half * 0.9;
    let t_lo = (t_hi * 0.05).max(2.0);
    spec.decay_class = fit_decay_class(&ts, &vals, family, t_lo, t_hi);

    spec.verify_invariants()?;
    Ok(spec)
}

/// The scale that makes the direct trapezoid transform of the stored time
/// kernel comparable with `response()`.
pub fn direct_transform_scale(kind: FilterKind) -> f64 {
    match kind {
        FilterKind::GaussianLowpass | FilterKind::BandD => 1.0 / (2.0 * PI),
        // exact low-pass is stored with unit time integral
        FilterKind::ExactLowpass | FilterKind::StepPlus => 1.0,
        // qac responses are -(1-g~)/w; the direct transform of the stored
        // kernel uses the plain convention.
        FilterKind::GaussianQac | FilterKind::SubexpQac => 1.0,
    }
}

/// The composite response of a corrected quasi-adiabatic pair:
/// `C(w) = (1/l) F~(w/l) G~(w) + (1/2g) F~(w/2g) (1 - G~(w))`.
pub struct CompositeResponse {
    pub table: SampledFunction,
    /// `max over lambda_min <= |w| <= w_max of |C(w) + 1/w|`.
    pub residual_sup: f64,
}

pub fn composite_response(
    f: &FilterSpec,
    g: &FilterSpec,
    lambda_lt: f64,
    gamma: f64,
    w_grid: &Grid,
    lambda_min: f64,
) -> Result<CompositeResponse> {
    if !f.kind.is_qac() {
        return Err(QlError::Filter("composite response needs a qac kernel for F".into()));
    }
    if !g.kind.is_lowpass() {
        return Err(QlError::Filter("composite response needs a low-pass kernel for G".into()));
    }
    if !(lambda_lt > 0.0 && lambda_lt <= gamma) {
        return Err(QlError::Filter(format!("need 0 < lambda_lt <= gamma, got {lambda_lt} and {gamma}")));
    }
    let mut residual = 0.0f64;
    let values: Vec<C64> = w_grid
        .points()
        .map(|w| {
            let gv = g.response(w);
            let c = composite_at(f, gv, lambda_lt, gamma, w);
            if w.abs() >= lambda_min {
                residual = residual.max((c + C64::new(1.0 / w, 0.0)).norm());
            }
            c
        })
        .collect();
    Ok(CompositeResponse {
        table: SampledFunction::from_uniform(w_grid, values, Interpolation::Linear)?,
        residual_sup: residual,
    })
}

pub fn composite_at(f: &FilterSpec, g_at_w: C64, lambda_lt: f64, gamma: f64, w: f64) -> C64 {
    let f1 = f.response(w / lambda_lt) / lambda_lt;
    let f2 = f.response(w / (2.0 * gamma)) / (2.0 * gamma);
    f1 * g_at_w + f2 * (C64::new(1.0, 0.0) - g_at_w)
}

/// Diagnostics for a constructed filter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FilterDiagnostics {
    pub kind: String,
    pub fitted: DecayClass,
    pub forward_transform_error: f64,
    pub round_trip_error: f64,
    pub parity_residual: f64,
    pub quad_bound: f64,
    pub pass: bool,
}

pub fn filter_diagnostics(spec: &FilterSpec) -> FilterDiagnostics {
    let scale = direct_transform_scale(spec.kind);
    let mut fwd = 0.0f64;
    let wg = &spec.fourier_table;
    let probes = 41;
    for i in 0..probes {
        let w = wg.min_x() + (wg.max_x() - wg.min_x()) * i as f64 / (probes - 1) as f64;
        let direct = fourier_forward(&spec.time_grid, &spec.time_kernel, w, scale);
        fwd = fwd.max((direct - spec.response(w)).norm());
    }
    let wgrid = Grid::new(wg.max_x(), wg.grid[1] - wg.grid[0]).unwrap();
    let mut rt = 0.0f64;
    for &t in &[0.0, 0.7, 3.3, 11.0] {
        if t < spec.time_grid.half {
            let back = fourier_inverse(&wgrid, &wg.values, t) / C64::new(2.0 * PI * scale, 0.0);
            let idx = ((t + spec.time_grid.half) / spec.time_grid.step).round() as usize;
            rt = rt.max((back - spec.time_kernel[idx]).norm());
        }
    }
    let n = spec.time_kernel.len();
    let mut parity = 0.0f64;
    for i in 0..n / 2 {
        let d = if spec.kind.is_lowpass() {
            (spec.time_kernel[i] - spec.time_kernel[n - 1 - i]).norm()
        } else if spec.kind.is_qac() {
            (spec.time_kernel[i] + spec.time_kernel[n - 1 - i]).norm()
        } else {
            0.0
        };
        parity = parity.max(d);
    }
    let ts: Vec<f64> = spec.time_grid.points().collect();
    let vals: Vec<f64> = spec.time_kernel.iter().map(|v| v.norm()).collect();
    let t_hi = spec.time_grid.half * 0.9;
    let fitted = fit_decay_class(&ts, &vals, spec.decay_class.family, (t_hi * 0.05).max(2.0), t_hi);
    let pass = fitted.c2 > 0.0 && fwd <= spec.quad_bound && rt <= spec.quad_bound.max(1e-9);
    FilterDiagnostics {
        kind: spec.kind.name().into(),
        fitted,
        forward_transform_error: fwd,
        round_trip_error: rt,
        parity_residual: parity,
        quad_bound: spec.quad_bound,
        pass,
    }
}
