//! Large-N radial eigenvalue distribution.
//!
//! The integrated radial density `y(s)` (fraction of eigenvalues with
//! `|z|^2 <= s`, the atom at the origin included) solves
//!
//! ```text
//! psi((y - 1) / (y s)) = y - 1
//! ```
//!
//! on the annulus `1/μ_g(-1) < s < μ_g(1)`. Two densities are reported:
//! `rho_s = dy/ds` (per unit `|z|^2`) and `nu_area = rho_s / π` (per unit
//! area of the complex plane).
//!
//! The saddle-point diagnostics ([`phi`], [`phi_second`], [`saddle_identity`])
//! evaluate the exponent of the exact finite-N integrand at its stationary
//! point so the large-N density can be reconstructed from curvature plus
//! pole contribution and compared against `dy/ds`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{GSpectrum, Moment};
use crate::roots::{bisect_polish, Tolerance};

/// Bracket margin for the `y` search on `(0, 1)`.
pub const Y_EPSILON: f64 = 1e-13;
/// Number of subintervals scanned for sign changes before refinement.
pub const SCAN_INTERVALS: usize = 64;
/// Padding applied around the annulus by default grids.
pub const DEFAULT_PAD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusBounds {
    pub r_inner: f64,
    pub r_outer: f64,
}

impl AnnulusBounds {
    pub fn s_inner(&self) -> f64 {
        self.r_inner * self.r_inner
    }

    pub fn s_outer(&self) -> f64 {
        self.r_outer * self.r_outer
    }

    /// Strictly inside the open annulus in `s = |z|^2`.
    pub fn contains_s(&self, s: f64) -> bool {
        s > self.s_inner() && s < self.s_outer()
    }
}

/// Support of the limiting density: `r_outer = sqrt(μ_g(1))`,
/// `r_inner = sqrt(1/μ_g(-1))`, with `r_inner = 0` when `μ_g(-1)` diverges.
pub fn annulus(m: &GSpectrum) -> AnnulusBounds {
    let r_outer = m.moment(1).finite().unwrap_or(0.0).sqrt();
    let r_inner = match m.moment(-1) {
        Moment::Infinite => 0.0,
        Moment::Finite(v) => (1.0 / v).sqrt(),
    };
    AnnulusBounds {
        r_inner: r_inner.min(r_outer),
        r_outer,
    }
}

/// Which edge a clamped value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Inner,
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YValue {
    pub y: f64,
    /// Set when `s` lies outside the open annulus and `y` is the clamped edge value.
    pub boundary: Option<Boundary>,
}

/// Reduced master-equation residual.
///
/// With `u = (y - 1)/(y s)` one has
/// `psi(u) - (y - 1) = y (1 - y) · Σ_k w_k (s - g_k) / (y s + (1 - y) g_k)`,
/// so the sum carries the sign of the full residual on `(0, 1)` without the
/// trivial zeros at `y = 0` and `y = 1`. It is strictly decreasing in `y`.
fn reduced_residual(m: &GSpectrum, s: f64, y: f64) -> f64 {
    m.atoms()
        .iter()
        .map(|a| a.weight * (s - a.g) / (y * s + (1.0 - y) * a.g))
        .sum()
}

fn reduced_residual_derivative(m: &GSpectrum, s: f64, y: f64) -> f64 {
    -m.atoms()
        .iter()
        .map(|a| {
            let d = y * s + (1.0 - y) * a.g;
            a.weight * (s - a.g) * (s - a.g) / (d * d)
        })
        .sum::<f64>()
}

/// Residual of the master equation as written, `psi((y-1)/(y s)) - (y - 1)`.
pub fn master_residual(m: &GSpectrum, s: f64, y: f64) -> f64 {
    m.psi_unchecked((y - 1.0) / (y * s)) - (y - 1.0)
}

/// Integrated radial density `y` at `s = |z|^2`.
///
/// Outside the open annulus the edge value is returned with a boundary flag:
/// `weight_at_zero` at or below the inner edge, `1` at or above the outer edge.
pub fn solve_y(m: &GSpectrum, s: f64) -> Result<YValue> {
    let bounds = annulus(m);
    if !(s > bounds.s_inner()) {
        return Ok(YValue {
            y: m.weight_at_zero(),
            boundary: Some(Boundary::Inner),
        });
    }
    if !(s < bounds.s_outer()) {
        return Ok(YValue {
            y: 1.0,
            boundary: Some(Boundary::Outer),
        });
    }

    let lo = Y_EPSILON;
    let hi = 1.0 - Y_EPSILON;
    let step = (hi - lo) / SCAN_INTERVALS as f64;
    let mut bracket = None;
    let mut changes = 0;
    let mut prev_y = lo;
    let mut prev = reduced_residual(m, s, lo);
    for i in 1..=SCAN_INTERVALS {
        let y = if i == SCAN_INTERVALS { hi } else { lo + step * i as f64 };
        let value = reduced_residual(m, s, y);
        if value == 0.0 {
            return Ok(YValue { y, boundary: None });
        }
        if value.signum() != prev.signum() {
            changes += 1;
            bracket.get_or_insert((prev_y, y));
        }
        prev_y = y;
        prev = value;
    }
    if changes > 1 {
        return Err(Error::MultipleRoots {
            op: "solve_y",
            s,
            count: changes,
        });
    }
    let Some((a, b)) = bracket else {
        return Err(Error::NoSignChange {
            op: "solve_y",
            lo,
            hi,
            f_lo: reduced_residual(m, s, lo),
            f_hi: reduced_residual(m, s, hi),
        });
    };
    let y = bisect_polish(
        "solve_y",
        |y| reduced_residual(m, s, y),
        |y| reduced_residual_derivative(m, s, y),
        a,
        b,
        Tolerance {
            residual: 0.0,
            relative_width: 4.0 * f64::EPSILON,
        },
    )?;
    Ok(YValue { y, boundary: None })
}

/// `u = (y - 1)/(y s)` together with `1 - psi'(u)/(y^2 s)`, the bracket shared
/// by the curvature and the density.
fn saddle_bracket(m: &GSpectrum, s: f64, y: f64) -> (f64, f64) {
    let u = (y - 1.0) / (y * s);
    let dpsi = m.psi_prime_unchecked(u);
    (dpsi, 1.0 - dpsi / (y * y * s))
}

/// `rho_s = dy/ds`, from differentiating the master equation:
/// `dy/ds · [1 - psi'(u)/(y^2 s)] = -(y - 1)/(y s^2) · psi'(u)`.
/// Zero outside the open annulus. When the support is a disk the value at
/// `s = 0` is the limit from above, `w0 · μ'(-1) / (1 - w0)` with `μ'(-1)` the
/// inverse moment of the atoms away from zero.
pub fn density_s(m: &GSpectrum, s: f64) -> Result<f64> {
    let w0 = m.weight_at_zero();
    if s == 0.0 && w0 > 0.0 && w0 < 1.0 {
        let inverse: f64 = m.atoms().iter().filter(|a| a.g > 0.0).map(|a| a.weight / a.g).sum();
        return Ok(w0 * inverse / (1.0 - w0));
    }
    let sol = solve_y(m, s)?;
    if sol.boundary.is_some() {
        return Ok(0.0);
    }
    let y = sol.y;
    let (dpsi, denominator) = saddle_bracket(m, s, y);
    if !(denominator.abs() > 1e-14) {
        return Err(Error::DegenerateSaddle { s, y, denominator });
    }
    Ok(-(y - 1.0) / (y * s * s) * dpsi / denominator)
}

/// Exponent of the finite-N integrand per unit N:
/// `phi(v) = ln v + Σ_k w_k ln(1 - (v - 1) g_k / (v s))`.
pub fn phi(m: &GSpectrum, v: f64, s: f64) -> Result<f64> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Domain {
            op: "phi",
            value: v,
            detail: "requires 0 < v <= 1".into(),
        });
    }
    if !(s > 0.0) {
        return Err(Error::Domain {
            op: "phi",
            value: s,
            detail: "requires s > 0".into(),
        });
    }
    let spread = (1.0 - v) / (v * s);
    let tail: f64 = m.atoms().iter().map(|a| a.weight * (spread * a.g).ln_1p()).sum();
    Ok(v.ln() + tail)
}

/// `phi''` at the stationary point `y`:
/// `1/(y (y - 1)) · [1 - psi'(u)/(y^2 s)]`, negative inside the annulus.
pub fn phi_second(m: &GSpectrum, y: f64, s: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0 && s > 0.0) {
        return Err(Error::Domain {
            op: "phi_second",
            value: y,
            detail: "requires 0 < y < 1 and s > 0".into(),
        });
    }
    let (_, bracket) = saddle_bracket(m, s, y);
    Ok(bracket / (y * (y - 1.0)))
}

/// Contribution of the pole crossed while deforming the contour onto the
/// saddle: `y (y - 1) / s`.
pub fn pole_term(y: f64, s: f64) -> f64 {
    y * (y - 1.0) / s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleDiagnostics {
    pub s: f64,
    pub y: f64,
    pub phi_second: f64,
    pub pole_term: f64,
    /// `(1/s) (1/|phi''| + y (y - 1))`.
    pub density_lhs: f64,
    /// `dy/ds` from the master equation.
    pub density_rhs: f64,
}

impl SaddleDiagnostics {
    pub fn relative_difference(&self) -> f64 {
        (self.density_lhs - self.density_rhs).abs() / self.density_rhs.abs()
    }
}

pub fn saddle_identity(m: &GSpectrum, s: f64) -> Result<SaddleDiagnostics> {
    let sol = solve_y(m, s)?;
    if sol.boundary.is_some() {
        return Err(Error::Domain {
            op: "saddle_identity",
            value: s,
            detail: "s must lie strictly inside the annulus".into(),
        });
    }
    let y = sol.y;
    let curvature = phi_second(m, y, s)?;
    let pole = pole_term(y, s);
    Ok(SaddleDiagnostics {
        s,
        y,
        phi_second: curvature,
        pole_term: pole,
        density_lhs: (1.0 / curvature.abs() + y * (y - 1.0)) / s,
        density_rhs: density_s(m, s)?,
    })
}

/// Radial grid: `points` equally spaced radii on `[r_min, r_max]`. Missing
/// bounds default to the annulus padded by [`DEFAULT_PAD`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 101,
            r_min: None,
            r_max: None,
        }
    }
}

impl GridSpec {
    pub fn new(points: usize, r_min: f64, r_max: f64) -> Self {
        Self {
            points,
            r_min: Some(r_min),
            r_max: Some(r_max),
        }
    }

    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.points < 2 {
            out.push(("grid.points".into(), "points must be >= 2".into()));
        }
        if let Some(lo) = self.r_min {
            if !(lo >= 0.0 && lo.is_finite()) {
                out.push(("grid.r_min".into(), "r_min must be >= 0".into()));
            }
        }
        if let (Some(lo), Some(hi)) = (self.r_min, self.r_max) {
            if !(lo < hi) {
                out.push(("grid.r_max".into(), "r_min < r_max required".into()));
            }
        }
        if let Some(hi) = self.r_max {
            if !(hi > 0.0 && hi.is_finite()) {
                out.push(("grid.r_max".into(), "r_max must be positive".into()));
            }
        }
        out
    }

    pub fn radii(&self, bounds: &AnnulusBounds) -> Vec<f64> {
        let lo = self
            .r_min
            .unwrap_or((bounds.r_inner - DEFAULT_PAD).max(0.0));
        let hi = self.r_max.unwrap_or(bounds.r_outer + DEFAULT_PAD);
        let n = self.points.max(2);
        let step = (hi - lo) / (n - 1) as f64;
        (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialRow {
    pub r: f64,
    pub s: f64,
    pub y: f64,
    pub rho_s: f64,
    pub nu_area: f64,
    pub boundary: Option<Boundary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub grid: Vec<RadialRow>,
    pub atom_at_zero: f64,
    pub bounds: AnnulusBounds,
}

fn radial_row(m: &GSpectrum, r: f64) -> Result<RadialRow> {
    let s = r * r;
    let sol = solve_y(m, s)?;
    let rho_s = density_s(m, s)?;
    Ok(RadialRow {
        r,
        s,
        y: sol.y,
        rho_s,
        nu_area: rho_s / std::f64::consts::PI,
        boundary: sol.boundary,
    })
}

/// Evaluates `y`, `rho_s` and `nu_area` over a radial grid. Points are
/// independent, so evaluation is parallel and order-free.
pub fn tabulate(m: &GSpectrum, grid: &GridSpec) -> Result<RadialSolution> {
    let bounds = annulus(m);
    let radii = grid.radii(&bounds);
    let rows = radii
        .par_iter()
        .enumerate()
        .map(|(index, &r)| {
            radial_row(m, r).map_err(|e| Error::GridPoint {
                index,
                r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RadialSolution {
        grid: rows,
        atom_at_zero: m.weight_at_zero(),
        bounds,
    })
}

/// `y(r)` for any `r >= 0`, clamped outside the annulus.
pub fn integrated_density(m: &GSpectrum, r: f64) -> Result<f64> {
    Ok(solve_y(m, r * r)?.y)
}
