//! Exact finite-N mean radial density for strictly distinct `0 < g_1 < … < g_N`.
//!
//! For `g_k < s < g_{k+1}` (with `s = |z|^2`) the density per unit `s` is
//! `(1/N) Σ_{i>k} F(g_i)` where
//!
//! ```text
//! F(g_i) = (g_i - s)^(N-2) / Π_{j≠i} (g_i - g_j)
//!          · ∫_0^∞ N (1 + t)^-(N+2) Π_{j≠i} (1 + t g_j / s) [N - t + (g_i/s)(N t - 1)] dt
//! ```
//!
//! and it vanishes below `g_1` and above `g_N`. Mapping `t = (1 - u)/u`
//! turns the `t`-integral into `∫_0^1 N Π_{j≠i} (u + (1-u) g_j/s) · B_i(u) du`
//! with `B_i(u) = N u - (1 - u) + (g_i/s)(N (1 - u) - u)`, a polynomial in
//! `u` of degree `N`.
//!
//! Individual [`f_delta`] terms are evaluated in double precision with the
//! prefactor kept as a [`SignedLog`]. The terms alternate in sign and their
//! magnitudes grow roughly like `e^N` while the density stays of order one,
//! so [`exact_density`] sums them pointwise in `u` in multiprecision
//! arithmetic (precision sized from the log-magnitude of the largest term)
//! and only then integrates over `u`.

use std::ops::{Div, Mul};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, GridSpec};
use crate::error::{Error, Result};
use crate::measure::{GSpectrum, Quantile};
use crate::quadrature::{CompositeRule, GaussLegendre, NeumaierSum};

/// Minimum spacing between consecutive `g_i`.
pub const MIN_GAP: f64 = 1e-9;
/// Half-width of the interval over which tied quantiles are spread.
pub const TIE_SPREAD: f64 = 1e-6;
/// Evaluation points closer than this to some `g_i` are rejected.
pub const POLE_TOLERANCE: f64 = 1e-12;
/// Gauss–Legendre nodes per piece `(g_k, g_{k+1})` when integrating over `s`.
pub const PIECE_NODES: usize = 24;
/// Densities below this are treated as a numerical failure.
pub const NEGATIVE_DENSITY_LIMIT: f64 = -1e-6;

type Big = FBig<HalfEven, 2>;

/// Sign and natural-log magnitude of a real number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub log_magnitude: f64,
    /// `-1`, `0` or `+1`; `log_magnitude` is meaningless when zero.
    pub sign: i8,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };
    pub const ONE: SignedLog = SignedLog {
        log_magnitude: 0.0,
        sign: 1,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                log_magnitude: x.abs().ln(),
                sign: if x > 0.0 { 1 } else { -1 },
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.exp(),
        }
    }

    pub fn powi(self, n: i32) -> Self {
        match (self.sign, n) {
            (_, 0) => Self::ONE,
            (0, n) if n > 0 => Self::ZERO,
            (0, _) => Self {
                log_magnitude: f64::INFINITY,
                sign: 1,
            },
            (s, n) => Self {
                log_magnitude: self.log_magnitude * f64::from(n),
                sign: if n % 2 == 0 { 1 } else { s },
            },
        }
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;

    fn mul(self, rhs: SignedLog) -> SignedLog {
        if self.sign == 0 || rhs.sign == 0 {
            return Self::ZERO;
        }
        Self {
            log_magnitude: self.log_magnitude + rhs.log_magnitude,
            sign: self.sign * rhs.sign,
        }
    }
}

impl Div for SignedLog {
    type Output = SignedLog;

    fn div(self, rhs: SignedLog) -> SignedLog {
        assert!(rhs.sign != 0, "SignedLog division by zero");
        if self.sign == 0 {
            return Self::ZERO;
        }
        Self {
            log_magnitude: self.log_magnitude - rhs.log_magnitude,
            sign: self.sign * rhs.sign,
        }
    }
}

/// Strictly increasing `g_i` in `(0, 1]` with spacing at least [`MIN_GAP`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactEnsemble {
    g: Vec<f64>,
}

impl ExactEnsemble {
    /// Sorts the input and checks range and spacing.
    pub fn new(mut g: Vec<f64>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::InvalidEnsemble("no g values".into()));
        }
        if let Some(bad) = g.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::InvalidEnsemble(format!("g = {bad} outside (0, 1]")));
        }
        g.sort_by(f64::total_cmp);
        if let Some(w) = g.windows(2).find(|w| w[1] - w[0] < MIN_GAP) {
            return Err(Error::InvalidEnsemble(format!(
                "g values {} and {} closer than {MIN_GAP}",
                w[0], w[1]
            )));
        }
        Ok(Self { g })
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn min_gap(&self) -> f64 {
        self.g
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    fn check_not_pole(&self, s: f64) -> Result<()> {
        let idx = self.g.partition_point(|&g| g < s);
        for index in [idx.wrapping_sub(1), idx] {
            if let Some(&g) = self.g.get(index) {
                if (g - s).abs() <= POLE_TOLERANCE {
                    return Err(Error::PoleCoincidence { s, index, g });
                }
            }
        }
        Ok(())
    }

    /// `(g_i - s)^(N-2) / Π_{j≠i} (g_i - g_j)` in log-magnitude form.
    fn prefactor(&self, i: usize, s: f64) -> SignedLog {
        let n = self.len() as i32;
        let gi = self.g[i];
        let mut acc = SignedLog::from_f64(gi - s).powi(n - 2);
        for (j, &gj) in self.g.iter().enumerate() {
            if j != i {
                acc = acc / SignedLog::from_f64(gi - gj);
            }
        }
        acc
    }
}

/// Composite Gauss–Legendre rule on `u ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub nodes_per_panel: usize,
    /// Repeat with twice the nodes per panel and require agreement.
    pub refine: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panels: 8,
            nodes_per_panel: 32,
            refine: true,
        }
    }
}

impl QuadratureSpec {
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.panels == 0 {
            out.push(("quad.panels".into(), "panels must be positive".into()));
        }
        if self.nodes_per_panel == 0 {
            out.push(("quad.nodes_per_panel".into(), "nodes_per_panel must be positive".into()));
        }
        out
    }

    fn rule(&self) -> CompositeRule {
        CompositeRule::new(0.0, 1.0, self.panels, self.nodes_per_panel)
    }

    fn refined_rule(&self) -> CompositeRule {
        CompositeRule::new(0.0, 1.0, self.panels, 2 * self.nodes_per_panel)
    }
}

/// Relative agreement required between the base and refined quadratures,
/// measured against the L1 size of the integrand.
const REFINE_TOLERANCE: f64 = 1e-9;

/// Integrates `f` over `[0, 1]` per `quad`; returns the result and the L1
/// norm of the integrand on the final rule.
fn integrate_u<F: Fn(f64) -> f64 + Sync>(quad: &QuadratureSpec, f: F) -> Result<(f64, f64)> {
    let run = |rule: &CompositeRule| {
        let values: Vec<f64> = rule.points().par_iter().map(|&(u, w)| w * f(u)).collect();
        let total: NeumaierSum = values.iter().copied().collect();
        let l1: f64 = values.iter().map(|v| v.abs()).sum();
        (total.total(), l1)
    };
    let (coarse, l1) = run(&quad.rule());
    if !quad.refine {
        return Ok((coarse, l1));
    }
    let (refined, l1_refined) = run(&quad.refined_rule());
    if (refined - coarse).abs() > REFINE_TOLERANCE * l1.max(l1_refined) + 1e-300 || !refined.is_finite() {
        return Err(Error::QuadratureNonConvergence { coarse, refined });
    }
    Ok((refined, l1_refined))
}

/// One term `F(g_i)` of the exact density (`i` is zero-based).
pub fn f_delta(e: &ExactEnsemble, i: usize, s: f64, quad: &QuadratureSpec) -> Result<f64> {
    let n = e.len();
    if i >= n {
        return Err(Error::Domain {
            op: "f_delta",
            value: i as f64,
            detail: format!("index must be below N = {n}"),
        });
    }
    let g_top = e.g[n - 1];
    if !(s > 0.0 && s < g_top) {
        return Err(Error::Domain {
            op: "f_delta",
            value: s,
            detail: format!("requires 0 < s < g_N = {g_top}"),
        });
    }
    e.check_not_pole(s)?;

    let prefactor = e.prefactor(i, s);
    let nf = n as f64;
    let ci = e.g[i] / s;
    let ratios: Vec<f64> = e
        .g
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &g)| g / s)
        .collect();
    // ln of N Π_{j≠i}(u + (1-u) c_j), bounded above by its value at u = 0 or u = 1.
    let log_product = |u: f64| -> f64 {
        nf.ln() + ratios.iter().map(|&c| (u + (1.0 - u) * c).ln()).sum::<f64>()
    };
    let scale = log_product(0.0).max(log_product(1.0));
    let bracket = |u: f64| nf * u - (1.0 - u) + ci * (nf * (1.0 - u) - u);
    let (scaled, _) = integrate_u(quad, |u| (log_product(u) - scale).exp() * bracket(u))?;

    let integral = SignedLog::from_f64(scaled)
        * SignedLog {
            log_magnitude: scale,
            sign: 1,
        };
    Ok((prefactor * integral).to_f64())
}

/// Precomputed multiprecision data for summing the terms `i >= k` at one `s`.
struct DensityKernel {
    precision: usize,
    nf: f64,
    ratios: Vec<Big>,
    prefactors: Vec<Big>,
    first: usize,
}

impl DensityKernel {
    fn new(e: &ExactEnsemble, s: f64, first: usize) -> Self {
        let n = e.len();
        let nf = n as f64;
        // Bound the largest term's magnitude in log space to size the precision.
        let log_ratio_max: Vec<f64> = e.g.iter().map(|&g| (g / s).max(1.0).ln()).collect();
        let total_log_ratio: f64 = log_ratio_max.iter().sum();
        let mut log_bound: f64 = 0.0;
        for i in first..n {
            let ci = e.g[i] / s;
            let b = (ci * nf - 1.0).abs().max((nf - ci).abs()).max(1.0);
            let term = e.prefactor(i, s).log_magnitude + total_log_ratio - log_ratio_max[i] + b.ln();
            log_bound = log_bound.max(term);
        }
        let extra_bits = (log_bound / std::f64::consts::LN_2).ceil().max(0.0) as usize;
        let precision = (96 + extra_bits).div_ceil(32) * 32;

        let big = |x: f64| Big::try_from(x).expect("finite double").with_precision(precision).value();
        let s_big = big(s);
        let g_big: Vec<Big> = e.g.iter().map(|&g| big(g)).collect();
        let ratios: Vec<Big> = g_big.iter().map(|g| g / &s_big).collect();
        let prefactors = (first..n)
            .map(|i| {
                let diff = &g_big[i] - &s_big;
                let mut num = big(1.0);
                let exponent = n as i64 - 2;
                for _ in 0..exponent.max(0) {
                    num = &num * &diff;
                }
                let mut den = big(1.0);
                for (j, gj) in g_big.iter().enumerate() {
                    if j != i {
                        den = &den * &(&g_big[i] - gj);
                    }
                }
                if exponent < 0 {
                    den = &den * &diff;
                }
                num / den
            })
            .collect();
        Self {
            precision,
            nf,
            ratios,
            prefactors,
            first,
        }
    }

    /// `Σ_{i>=first} prefactor_i · Π_{j≠i}(u + (1-u) c_j) · B_i(u)`.
    fn value(&self, u: f64) -> f64 {
        let big = |x: f64| Big::try_from(x).expect("finite double").with_precision(self.precision).value();
        let bu = big(u);
        let bv = big(1.0) - &bu;
        let factors: Vec<Big> = self.ratios.iter().map(|c| &bu + &(&bv * c)).collect();
        let mut product = big(1.0);
        for f in &factors {
            product = &product * f;
        }
        let nf = big(self.nf);
        let alpha = &(&nf * &bu) - &bv;
        let beta = &(&nf * &bv) - &bu;
        let mut sum = big(0.0);
        for (offset, pre) in self.prefactors.iter().enumerate() {
            let i = self.first + offset;
            let bracket = &alpha + &(&self.ratios[i] * &beta);
            let term = &(pre * &bracket) / &factors[i];
            sum = &sum + &term;
        }
        (sum * product).to_f64().value()
    }
}

/// Mean density per unit `s = |z|^2` at finite N.
pub fn exact_density(e: &ExactEnsemble, s: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain {
            op: "exact_density",
            value: s,
            detail: "requires s > 0".into(),
        });
    }
    e.check_not_pole(s)?;
    let first = e.g.partition_point(|&g| g < s);
    if first == 0 || first == e.len() {
        return Ok(0.0);
    }
    let kernel = DensityKernel::new(e, s, first);
    let (density, _) = integrate_u(quad, |u| kernel.value(u))?;
    if density < NEGATIVE_DENSITY_LIMIT {
        return Err(Error::NegativeDensity { s, value: density });
    }
    Ok(density)
}

/// Density samples on each smooth piece `(g_k, g_{k+1})`, supporting the
/// cumulative distribution and the total mass.
#[derive(Debug, Clone)]
pub struct ExactProfile {
    pieces: Vec<Piece>,
    rule: GaussLegendre,
    barycentric: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Piece {
    lo: f64,
    hi: f64,
    densities: Vec<f64>,
    mass: f64,
    mass_below: f64,
}

impl ExactProfile {
    pub fn build(e: &ExactEnsemble, quad: &QuadratureSpec) -> Result<Self> {
        let rule = GaussLegendre::new(PIECE_NODES);
        let x = rule.nodes();
        let barycentric: Vec<f64> = (0..x.len())
            .map(|j| {
                let prod: f64 = (0..x.len()).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
                1.0 / prod
            })
            .collect();
        let g = e.g();
        let mut pieces = Vec::with_capacity(g.len().saturating_sub(1));
        let mut mass_below = 0.0;
        for w in g.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let nodes: Vec<(f64, f64)> = rule.on_interval(lo, hi).collect();
            let densities = nodes
                .iter()
                .map(|&(s, _)| exact_density(e, s, quad))
                .collect::<Result<Vec<f64>>>()?;
            let mass: NeumaierSum = nodes.iter().zip(&densities).map(|(&(_, wt), &d)| wt * d).collect();
            let mass = mass.total();
            pieces.push(Piece {
                lo,
                hi,
                densities,
                mass,
                mass_below,
            });
            mass_below += mass;
        }
        Ok(Self {
            pieces,
            rule,
            barycentric,
        })
    }

    /// `∫ density ds` over `(g_1, g_N)`.
    pub fn total(&self) -> f64 {
        self.pieces.iter().map(|p| p.mass).collect::<NeumaierSum>().total()
    }

    /// Interpolated density inside a piece.
    fn interpolate(&self, piece: &Piece, s: f64) -> f64 {
        let t = (2.0 * s - piece.lo - piece.hi) / (piece.hi - piece.lo);
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&xj, &wj), &fj) in self.rule.nodes().iter().zip(&self.barycentric).zip(&piece.densities) {
            let d = t - xj;
            if d == 0.0 {
                return fj;
            }
            let c = wj / d;
            num += c * fj;
            den += c;
        }
        num / den
    }

    /// `∫_0^s density ds'`.
    pub fn cdf(&self, s: f64) -> f64 {
        let Some(first) = self.pieces.first() else {
            return 0.0;
        };
        if s <= first.lo {
            return 0.0;
        }
        let idx = self.pieces.partition_point(|p| p.hi <= s);
        let Some(piece) = self.pieces.get(idx) else {
            return self.total();
        };
        let partial = self
            .rule
            .integrate(piece.lo, s, |x| self.interpolate(piece, x));
        piece.mass_below + partial
    }
}

/// `∫ density ds` over the support, piece by piece between consecutive `g_i`.
pub fn normalization_check(e: &ExactEnsemble, quad: &QuadratureSpec) -> Result<f64> {
    Ok(ExactProfile::build(e, quad)?.total())
}

/// Mid-quantile ensemble `g_i = Q((i - 1/2)/N)` of a measure.
///
/// Runs of values closer than [`MIN_GAP`] (ties from atoms) are spread evenly
/// over `[g - δ, g + δ]` with `δ =` [`TIE_SPREAD`]; near the ends the window
/// shifts to `(0, 2δ]` or `[1 - 2δ, 1]` so all values stay in `(0, 1]`.
pub fn ensemble_from_measure<Q: Quantile + ?Sized>(m: &Q, n: usize) -> Result<ExactEnsemble> {
    if n == 0 {
        return Err(Error::InvalidEnsemble("N must be positive".into()));
    }
    let raw: Vec<f64> = (0..n).map(|i| m.quantile((i as f64 + 0.5) / n as f64)).collect();
    if raw.iter().any(|g| g.is_nan()) {
        return Err(Error::InvalidEnsemble("measure quantile undefined".into()));
    }
    if raw.iter().all(|&g| g <= 0.0) {
        return Err(Error::InvalidEnsemble("measure is entirely at g = 0".into()));
    }
    let mut sorted = raw;
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && sorted[end] - sorted[end - 1] < MIN_GAP {
            end += 1;
        }
        let count = end - start;
        let center = sorted[start];
        let d = TIE_SPREAD;
        if center - d <= 0.0 {
            out.extend((0..count).map(|k| 2.0 * d * (k + 1) as f64 / count as f64));
        } else if count == 1 {
            out.push(center.min(1.0));
        } else if center + d > 1.0 {
            out.extend((0..count).map(|k| 1.0 - 2.0 * d * k as f64 / count as f64));
        } else {
            out.extend((0..count).map(|k| center - d + 2.0 * d * k as f64 / (count - 1) as f64));
        }
        start = end;
    }
    ExactEnsemble::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub r: f64,
    pub s: f64,
    pub exact: f64,
    pub asymptotic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfComparison {
    pub sup_distance: f64,
    pub normalization: f64,
    pub rows: Vec<CdfRow>,
}

/// Sup distance over the grid between the exact finite-N cumulative density
/// and the large-N `y(s)` of the limiting measure `m`.
pub fn exact_cdf_vs_asymptotic(
    e: &ExactEnsemble,
    m: &GSpectrum,
    grid: &GridSpec,
    quad: &QuadratureSpec,
) -> Result<CdfComparison> {
    let profile = ExactProfile::build(e, quad)?;
    let bounds = asymptotic::annulus(m);
    let rows = grid
        .radii(&bounds)
        .into_iter()
        .map(|r| {
            let s = r * r;
            Ok(CdfRow {
                r,
                s,
                exact: profile.cdf(s),
                asymptotic: asymptotic::solve_y(m, s)?.y,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_distance = rows
        .iter()
        .map(|row| (row.exact - row.asymptotic).abs())
        .fold(0.0, f64::max);
    Ok(CdfComparison {
        sup_distance,
        normalization: profile.total(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureSpec;

    fn quick() -> QuadratureSpec {
        QuadratureSpec {
            panels: 2,
            nodes_per_panel: 32,
            refine: true,
        }
    }

    #[test]
    fn signed_log_arithmetic() {
        let a = SignedLog::from_f64(-3.0);
        let b = SignedLog::from_f64(0.5);
        assert!(((a * b).to_f64() + 1.5).abs() < 1e-15);
        assert!(((a / b).to_f64() + 6.0).abs() < 1e-14);
        assert!((a.powi(3).to_f64() + 27.0).abs() < 1e-12);
        assert!((a.powi(-1).to_f64() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!((a * SignedLog::ZERO).sign, 0);
        assert_eq!(SignedLog::from_f64(0.0).to_f64(), 0.0);
        // Magnitudes far outside double range survive.
        let huge = SignedLog::from_f64(1e300).powi(4) / SignedLog::from_f64(1e300).powi(3);
        assert!((huge.to_f64() / 1e300 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ensemble_constructor() {
        let e = ExactEnsemble::new(vec![0.9, 0.3]).unwrap();
        assert_eq!(e.g(), &[0.3, 0.9]);
        assert!(ExactEnsemble::new(vec![0.3, 0.3 + 1e-10]).is_err());
        assert!(ExactEnsemble::new(vec![0.0, 0.5]).is_err());
        assert!(ExactEnsemble::new(vec![1.1]).is_err());
        assert!(ExactEnsemble::new(vec![]).is_err());
    }

    #[test]
    fn single_g_term_vanishes() {
        let e = ExactEnsemble::new(vec![0.6]).unwrap();
        for s in [0.05, 0.3, 0.59] {
            let v = f_delta(&e, 0, s, &QuadratureSpec::default()).unwrap();
            assert!(v.abs() <= 1e-10, "s = {s}: {v}");
        }
    }

    #[test]
    fn density_outside_support_is_zero() {
        let e = ExactEnsemble::new(vec![0.3, 0.5, 0.9]).unwrap();
        assert_eq!(exact_density(&e, 0.2, &quick()).unwrap(), 0.0);
        assert_eq!(exact_density(&e, 0.95, &quick()).unwrap(), 0.0);
        assert!(matches!(
            exact_density(&e, 0.5 + 1e-13, &quick()),
            Err(Error::PoleCoincidence { index: 1, .. })
        ));
    }

    #[test]
    fn multiprecision_sum_matches_double_terms_for_small_n() {
        let e = ExactEnsemble::new(vec![0.2, 0.45, 0.7, 0.95]).unwrap();
        for s in [0.3, 0.5, 0.8] {
            let first = e.g().partition_point(|&g| g < s);
            let direct: f64 = (first..e.len())
                .map(|i| f_delta(&e, i, s, &quick()).unwrap())
                .sum::<f64>()
                / e.len() as f64;
            let summed = exact_density(&e, s, &quick()).unwrap();
            assert!((direct - summed).abs() <= 1e-10 * direct.abs().max(1.0), "s = {s}: {direct} vs {summed}");
        }
    }

    #[test]
    fn two_g_normalization() {
        let e = ExactEnsemble::new(vec![0.3, 0.9]).unwrap();
        let total = normalization_check(&e, &quick()).unwrap();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        let single = ExactEnsemble::new(vec![0.5]).unwrap();
        assert_eq!(normalization_check(&single, &quick()).unwrap(), 0.0);
    }

    #[test]
    fn profile_cdf_is_monotone_and_matches_total() {
        let source = MeasureSpec::Uniform { a: 0.1, b: 0.9, points: 8 };
        let e = ensemble_from_measure(&source, 6).unwrap();
        let p = ExactProfile::build(&e, &quick()).unwrap();
        let mut prev = 0.0;
        for i in 0..=60 {
            let s = i as f64 / 60.0;
            let c = p.cdf(s);
            assert!(c >= prev - 1e-12);
            prev = c;
        }
        assert_eq!(p.cdf(1.0), p.total());
        assert_eq!(p.cdf(0.05), 0.0);
        // The interpolated partial integral agrees with direct quadrature.
        let s = 0.5 * (e.g()[2] + e.g()[3]);
        let direct = GaussLegendre::new(24).integrate(e.g()[2], s, |x| exact_density(&e, x, &quick()).unwrap());
        let via_profile = p.cdf(s) - p.cdf(e.g()[2]);
        assert!((direct - via_profile).abs() < 1e-10);
    }

    #[test]
    fn quantile_ensembles() {
        let source = MeasureSpec::Uniform { a: 0.0, b: 1.0, points: 8 };
        let e = ensemble_from_measure(&source, 4).unwrap();
        assert_eq!(e.g(), &[0.125, 0.375, 0.625, 0.875]);

        let t = MeasureSpec::Truncated { mu: 0.5 };
        let e = ensemble_from_measure(&t, 4).unwrap();
        let g = e.g();
        assert!(g[0] > 0.0 && g[1] <= 2e-6);
        assert!(g[2] >= 1.0 - 2e-6 && g[3] <= 1.0);
        assert!(e.min_gap() >= MIN_GAP);

        let e = ensemble_from_measure(&MeasureSpec::Uniform { a: 0.1, b: 0.9, points: 8 }, 32).unwrap();
        assert!(e.min_gap() >= MIN_GAP);

        let zero = GSpectrum::single(0.0).unwrap();
        assert!(ensemble_from_measure(&zero, 4).is_err());
    }

    #[test]
    fn interior_atom_ties_are_spread_symmetrically() {
        let m = GSpectrum::new([(0.4, 0.5), (0.8, 0.5)]).unwrap();
        let e = ensemble_from_measure(&m, 4).unwrap();
        let g = e.g();
        assert!((g[0] - (0.4 - TIE_SPREAD)).abs() < 1e-15);
        assert!((g[1] - (0.4 + TIE_SPREAD)).abs() < 1e-15);
        assert!((g[3] - (0.8 + TIE_SPREAD)).abs() < 1e-15);
    }
}
