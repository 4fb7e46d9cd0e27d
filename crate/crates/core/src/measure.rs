//! Limiting measure of the `g_i` and its transform calculus.
//!
//! Every measure is reduced to finitely many weighted atoms, so the moment
//! generating function `psi(u) = Σ w g u / (1 - u g)` and its derivative are
//! exact finite sums. The S-transform and the radius function `F(y)` are built
//! on the real-branch inverse `chi` of `psi`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::roots::{bisect_polish, Tolerance};

/// Atoms closer than this in `g` are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub g: f64,
    pub weight: f64,
}

/// Normalized atomic measure of the `g_i`, sorted by strictly increasing `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct GSpectrum {
    atoms: Vec<Atom>,
}

/// A moment `μ_g(n)`; negative moments diverge when there is mass at `g = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Moment::Infinite)
    }
}

impl GSpectrum {
    /// Builds a measure from `(g, weight)` pairs. Weights are relative: they
    /// must be positive and are rescaled to total mass one. Entries whose `g`
    /// agree within [`MERGE_TOLERANCE`] are merged.
    pub fn new<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<Self> {
        let mut atoms: Vec<Atom> = Vec::new();
        for (g, weight) in pairs {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidMeasure(format!("g = {g} outside [0, 1]")));
            }
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::InvalidMeasure(format!("weight {weight} at g = {g} must be positive")));
            }
            atoms.push(Atom { g, weight });
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        atoms.sort_by(|a, b| a.g.total_cmp(&b.g));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if atom.g - last.g <= MERGE_TOLERANCE => last.weight += atom.weight,
                _ => merged.push(atom),
            }
        }
        let total: f64 = merged.iter().map(|a| a.weight).sum();
        for atom in &mut merged {
            atom.weight /= total;
        }
        Ok(Self { atoms: merged })
    }

    /// The truncated-unitary measure: mass `mu` at `g = 1`, the rest at `g = 0`.
    pub fn truncated(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::InvalidMeasure(format!("mu = {mu} must be in (0,1)")));
        }
        Self::new([(0.0, 1.0 - mu), (1.0, mu)])
    }

    pub fn single(g: f64) -> Result<Self> {
        Self::new([(g, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weight_at_zero(&self) -> f64 {
        match self.atoms.first() {
            Some(a) if a.g == 0.0 => a.weight,
            _ => 0.0,
        }
    }

    /// Largest atom location (every atom carries positive weight).
    pub fn g_max(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.g)
    }

    pub fn moment(&self, n: i32) -> Moment {
        if n < 0 && self.weight_at_zero() > 0.0 {
            return Moment::Infinite;
        }
        Moment::Finite(self.atoms.iter().map(|a| a.weight * a.g.powi(n)).sum())
    }

    /// Smallest `p`-quantile: the least `g` with `P(G ≤ g) ≥ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let mut cdf = 0.0;
        for atom in &self.atoms {
            cdf += atom.weight;
            if cdf >= p - 1e-15 {
                return atom.g;
            }
        }
        self.g_max()
    }

    fn check_psi_domain(&self, op: &'static str, u: f64) -> Result<()> {
        if 1.0 - u * self.g_max() > 0.0 && u.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                op,
                value: u,
                detail: format!("requires u < 1/g_max = {}", 1.0 / self.g_max()),
            })
        }
    }

    pub fn psi(&self, u: f64) -> Result<f64> {
        self.check_psi_domain("psi", u)?;
        Ok(self.psi_unchecked(u))
    }

    pub fn psi_prime(&self, u: f64) -> Result<f64> {
        self.check_psi_domain("psi_prime", u)?;
        Ok(self.psi_prime_unchecked(u))
    }

    pub(crate) fn psi_unchecked(&self, u: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let ug = u * a.g;
                a.weight * ug / (1.0 - ug)
            })
            .sum()
    }

    pub(crate) fn psi_prime_unchecked(&self, u: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let d = 1.0 - u * a.g;
                a.weight * a.g / (d * d)
            })
            .sum()
    }

    /// Real-branch inverse of `psi`: the unique `u < 1/g_max` with `psi(u) = y`.
    ///
    /// `psi` increases from `-(1 - weight_at_zero)` at `u → -∞` to `+∞` at the
    /// pole, so any `y` strictly above the lower limit is attained.
    pub fn chi(&self, y: f64) -> Result<f64> {
        let lower = -(1.0 - self.weight_at_zero());
        let g_max = self.g_max();
        if y == 0.0 {
            return Ok(0.0);
        }
        if !(y > lower) || !y.is_finite() || g_max == 0.0 {
            return Err(Error::Domain {
                op: "chi",
                value: y,
                detail: format!("attainable range of psi is ({lower}, +inf)"),
            });
        }
        let (lo, hi) = if y < 0.0 {
            let mut lo = -1.0;
            while self.psi_unchecked(lo) >= y {
                lo *= 2.0;
                if !lo.is_finite() {
                    return Err(Error::Domain {
                        op: "chi",
                        value: y,
                        detail: "too close to the lower limit of psi".into(),
                    });
                }
            }
            (lo, 0.0)
        } else {
            let pole = 1.0 / g_max;
            let mut gap = 0.5;
            let mut hi = pole * (1.0 - gap);
            while self.psi_unchecked(hi) <= y {
                gap *= 0.5;
                hi = pole * (1.0 - gap);
                if gap < f64::EPSILON {
                    return Err(Error::Domain {
                        op: "chi",
                        value: y,
                        detail: "beyond double precision resolution of the pole".into(),
                    });
                }
            }
            (0.0, hi)
        };
        bisect_polish(
            "chi",
            |u| self.psi_unchecked(u) - y,
            |u| self.psi_prime_unchecked(u),
            lo,
            hi,
            Tolerance {
                residual: 1e-12 * y.abs().min(1.0),
                ..Tolerance::default()
            },
        )
    }

    /// `S(w) = (w + 1)/w · chi(w)`. The removable singularity `w = 0` is an error.
    pub fn s_transform(&self, w: f64) -> Result<f64> {
        if w == 0.0 {
            return Err(Error::Domain {
                op: "s_transform",
                value: w,
                detail: "w = 0 is a removable singularity; sample at small |w|".into(),
            });
        }
        Ok((w + 1.0) / w * self.chi(w)?)
    }

    /// Radius `F(y) = S(y - 1)^(-1/2)` at which the integrated radial density
    /// reaches `y`.
    pub fn f_of_y(&self, y: f64) -> Result<f64> {
        let w0 = self.weight_at_zero();
        if !(y > w0 && y < 1.0) {
            return Err(Error::Domain {
                op: "f_of_y",
                value: y,
                detail: format!("requires {w0} < y < 1"),
            });
        }
        let s = self.s_transform(y - 1.0)?;
        if !(s > 0.0) {
            return Err(Error::Domain {
                op: "f_of_y",
                value: y,
                detail: format!("S(y - 1) = {s} is not positive"),
            });
        }
        Ok(s.powf(-0.5))
    }
}

/// Configuration-level description of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Truncated { mu: f64 },
    /// Explicit `[g, weight]` pairs.
    Atoms(Vec<(f64, f64)>),
    /// Continuous uniform density on `[a, b]`, discretized by a
    /// `points`-node Gauss–Legendre rule.
    Uniform { a: f64, b: f64, points: usize },
    /// One `g` per line, equal weights.
    File { path: PathBuf },
}

impl MeasureSpec {
    /// Constraint violations, as `(key, message)` pairs.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        match self {
            MeasureSpec::Truncated { mu } => {
                if !(*mu > 0.0 && *mu < 1.0) {
                    out.push(("measure.truncated.mu".into(), "mu must be in (0,1)".into()));
                }
            }
            MeasureSpec::Atoms(atoms) => {
                if atoms.is_empty() {
                    out.push(("measure.atoms".into(), "at least one atom required".into()));
                }
                for (i, (g, w)) in atoms.iter().enumerate() {
                    if !(0.0..=1.0).contains(g) {
                        out.push((format!("measure.atoms[{i}]"), "g must be in [0,1]".into()));
                    }
                    if !(*w > 0.0 && w.is_finite()) {
                        out.push((format!("measure.atoms[{i}]"), "weight must be positive".into()));
                    }
                }
            }
            MeasureSpec::Uniform { a, b, points } => {
                if !(a < b) {
                    out.push(("measure.uniform".into(), "a < b required".into()));
                }
                if !(*a >= 0.0 && *b <= 1.0) {
                    out.push(("measure.uniform".into(), "0 <= a and b <= 1 required".into()));
                }
                if *points == 0 {
                    out.push(("measure.uniform.points".into(), "points must be positive".into()));
                }
            }
            MeasureSpec::File { path } => {
                if let Err(e) = read_measure_file(path) {
                    out.push(("measure.file.path".into(), e.to_string()));
                }
            }
        }
        out
    }

    pub fn discretize(&self) -> Result<GSpectrum> {
        if let Some((key, msg)) = self.violations().into_iter().next() {
            return Err(Error::InvalidMeasure(format!("{key}: {msg}")));
        }
        match self {
            MeasureSpec::Truncated { mu } => GSpectrum::truncated(*mu),
            MeasureSpec::Atoms(atoms) => GSpectrum::new(atoms.iter().copied()),
            MeasureSpec::Uniform { a, b, points } => {
                let rule = GaussLegendre::new(*points);
                let width = b - a;
                GSpectrum::new(rule.on_interval(*a, *b).map(|(g, w)| (g, w / width)))
            }
            MeasureSpec::File { path } => {
                let values = read_measure_file(path)?;
                GSpectrum::new(values.into_iter().map(|g| (g, 1.0)))
            }
        }
    }
}

/// Parses the plain-text measure format: one decimal `g` per line, blank
/// lines and `#` comments ignored, every value in `[0, 1]`.
pub fn read_measure_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::MeasureFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_measure_text(&text)
}

pub fn parse_measure_text(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let g: f64 = line
            .parse()
            .map_err(|_| Error::InvalidMeasure(format!("line {}: cannot parse {line:?}", lineno + 1)))?;
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::InvalidMeasure(format!("line {}: g = {g} outside [0, 1]", lineno + 1)));
        }
        values.push(g);
    }
    if values.is_empty() {
        return Err(Error::InvalidMeasure("measure file has no values".into()));
    }
    Ok(values)
}

/// Quantile access shared by atomic measures and their continuous specs.
pub trait Quantile {
    fn quantile(&self, p: f64) -> f64;
}

impl Quantile for GSpectrum {
    fn quantile(&self, p: f64) -> f64 {
        GSpectrum::quantile(self, p)
    }
}

/// Uniform specs use the continuous quantile `a + (b - a) p`; the rest use
/// the step quantile of their atoms.
impl Quantile for MeasureSpec {
    fn quantile(&self, p: f64) -> f64 {
        match self {
            MeasureSpec::Uniform { a, b, .. } => a + (b - a) * p,
            other => other
                .discretize()
                .map(|m| m.quantile(p))
                .unwrap_or(f64::NAN),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atom() -> GSpectrum {
        GSpectrum::new([(0.25, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn truncated_expands_to_two_atoms() {
        let m = MeasureSpec::Truncated { mu: 0.5 }.discretize().unwrap();
        assert_eq!(
            m.atoms(),
            &[Atom { g: 0.0, weight: 0.5 }, Atom { g: 1.0, weight: 0.5 }]
        );
        assert_eq!(m.weight_at_zero(), 0.5);
    }

    #[test]
    fn single_atom_identity() {
        let m = MeasureSpec::Atoms(vec![(0.3, 1.0)]).discretize().unwrap();
        assert_eq!(m.atoms(), &[Atom { g: 0.3, weight: 1.0 }]);
    }

    #[test]
    fn uniform_discretization_is_normalized_and_interior() {
        let m = MeasureSpec::Uniform { a: 0.0, b: 1.0, points: 16 }.discretize().unwrap();
        assert_eq!(m.atoms().len(), 16);
        let total: f64 = m.atoms().iter().map(|a| a.weight).sum();
        assert!(close(total, 1.0, 1e-12));
        assert!(m.atoms().iter().all(|a| a.g > 0.0 && a.g < 1.0));
        // Gauss-Legendre integrates g^3 exactly: ∫ g^3 dg = 1/4.
        assert!(close(m.moment(3).finite().unwrap(), 0.25, 1e-14));
    }

    #[test]
    fn construction_merges_and_rejects() {
        let m = GSpectrum::new([(0.5, 1.0), (0.5 + 1e-13, 1.0), (0.2, 2.0)]).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert!(close(m.atoms()[1].weight, 0.5, 1e-15));
        assert!(GSpectrum::new([(1.2, 1.0)]).is_err());
        assert!(GSpectrum::new([(0.2, 0.0)]).is_err());
        assert!(GSpectrum::new(Vec::new()).is_err());
    }

    #[test]
    fn moments() {
        let t = GSpectrum::truncated(0.5).unwrap();
        assert_eq!(t.moment(1), Moment::Finite(0.5));
        assert_eq!(t.moment(-1), Moment::Infinite);
        assert!(close(two_atom().moment(-1).finite().unwrap(), 2.5, 1e-15));
    }

    #[test]
    fn psi_examples() {
        let t = GSpectrum::truncated(0.3).unwrap();
        for u in [-5.0, -0.5, 0.2, 0.9] {
            assert!(close(t.psi(u).unwrap(), 0.3 * u / (1.0 - u), 1e-15));
        }
        assert_eq!(two_atom().psi(0.0).unwrap(), 0.0);
        assert!(close(two_atom().psi(-1.0).unwrap(), -0.35, 1e-15));
        assert!(t.psi(1.0).is_err());
        assert!(two_atom().psi(1.5).is_err());
    }

    #[test]
    fn psi_prime_examples() {
        let m = two_atom();
        assert!(close(m.psi_prime(0.0).unwrap(), m.moment(1).finite().unwrap(), 1e-15));
        let t = GSpectrum::truncated(0.5).unwrap();
        assert!(close(t.psi_prime(-1.0).unwrap(), 0.125, 1e-15));
        let u = -0.7;
        let h = 1e-5;
        let fd = (m.psi(u + h).unwrap() - m.psi(u - h).unwrap()) / (2.0 * h);
        let exact = m.psi_prime(u).unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-6);
    }

    #[test]
    fn chi_examples() {
        let t = GSpectrum::truncated(0.5).unwrap();
        assert_eq!(two_atom().chi(0.0).unwrap(), 0.0);
        assert!(close(t.chi(1.0).unwrap(), 2.0 / 3.0, 1e-12));
        for y in [-0.4, -0.1, 0.3, 2.0] {
            assert!(close(t.chi(y).unwrap(), y / (0.5 + y), 1e-12));
        }
        let m = two_atom();
        let y = m.psi(-2.0).unwrap();
        assert!(close(m.chi(y).unwrap(), -2.0, 1e-10));
        assert!(t.chi(-0.5).is_err());
        assert!(t.chi(-0.7).is_err());
    }

    #[test]
    fn s_transform_examples() {
        let t = GSpectrum::truncated(0.5).unwrap();
        assert!(close(t.s_transform(-1.0 / 3.0).unwrap(), 4.0, 1e-10));
        let haar = GSpectrum::single(1.0).unwrap();
        for w in [-0.9, -0.5, -0.1, 0.5, 3.0] {
            assert!(close(haar.s_transform(w).unwrap(), 1.0, 1e-10));
        }
        // S(w) → 1/μ_g(1) as w → 0.
        assert!(close(two_atom().s_transform(1e-8).unwrap(), 1.6, 1e-6));
        assert!(t.s_transform(0.0).is_err());
    }

    #[test]
    fn f_of_y_examples() {
        let t = GSpectrum::truncated(0.5).unwrap();
        assert!(close(t.f_of_y(2.0 / 3.0).unwrap(), 0.5, 1e-10));
        let m = two_atom();
        assert!(close(m.f_of_y(1.0 - 1e-6).unwrap(), 0.625f64.sqrt(), 1e-4));
        let single = GSpectrum::single(0.4).unwrap();
        for y in [0.1, 0.5, 0.9] {
            assert!(close(single.f_of_y(y).unwrap(), 0.4f64.sqrt(), 1e-9));
        }
        assert!(t.f_of_y(0.5).is_err());
        assert!(t.f_of_y(1.0).is_err());
    }

    #[test]
    fn psi_lower_limit() {
        for m in [two_atom(), GSpectrum::truncated(0.3).unwrap()] {
            let limit = -(1.0 - m.weight_at_zero());
            assert!(close(m.psi(-1e8).unwrap(), limit, 1e-6));
        }
    }

    #[test]
    fn measure_file_format() {
        let values = parse_measure_text("# header\n0.1\n\n  0.5 \n# c\n1\n").unwrap();
        assert_eq!(values, vec![0.1, 0.5, 1.0]);
        assert!(parse_measure_text("0.1\n1.5\n").is_err());
        assert!(parse_measure_text("abc\n").is_err());
        assert!(parse_measure_text("# only comments\n").is_err());
    }

    #[test]
    fn file_spec_reads_equal_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        fs::write(&path, "0.2\n0.4\n0.4\n0.8\n").unwrap();
        let m = MeasureSpec::File { path: path.clone() }.discretize().unwrap();
        assert_eq!(m.atoms().len(), 3);
        assert!(close(m.atoms()[1].weight, 0.5, 1e-15));
        let missing = MeasureSpec::File { path: dir.path().join("nope.txt") };
        assert!(missing.discretize().is_err());
    }

    #[test]
    fn spec_violations() {
        let v = MeasureSpec::Truncated { mu: 1.5 }.violations();
        assert_eq!(v[0].1, "mu must be in (0,1)");
        let v = MeasureSpec::Uniform { a: 0.5, b: 0.5, points: 4 }.violations();
        assert_eq!(v[0].1, "a < b required");
        assert!(MeasureSpec::Uniform { a: 0.1, b: 0.9, points: 4 }.violations().is_empty());
    }

    #[test]
    fn quantiles() {
        let t = GSpectrum::truncated(0.5).unwrap();
        assert_eq!(t.quantile(0.25), 0.0);
        assert_eq!(t.quantile(0.75), 1.0);
        let u = MeasureSpec::Uniform { a: 0.0, b: 1.0, points: 8 };
        assert_eq!(Quantile::quantile(&u, 0.125), 0.125);
    }
}
