//! Monte Carlo ground truth: eigenvalue moduli of `T = U·diag(√g)` with `U`
//! Haar-distributed.
//!
//! Each sample draws from its own ChaCha stream keyed by `(seed, sample
//! index)`, so results do not depend on how samples are scheduled across
//! worker threads.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic;
use crate::error::{Error, Result};
use crate::measure::{GSpectrum, Quantile};

pub type C64 = Complex<f64>;

/// Moduli at or below this are counted as exact zeros.
pub const ZERO_THRESHOLD: f64 = 1e-10;
/// Largest acceptable `‖U*U - I‖_max` for a sampled unitary.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

/// Haar-random `n × n` unitary.
///
/// QR of a complex Ginibre matrix, with each column of `Q` multiplied by the
/// phase of the matching diagonal entry of `R`. Without that correction the
/// distribution of `Q` depends on the sign convention of the factorization
/// and is not Haar.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { C64::new(1.0, 0.0) };
        q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
    }
    q
}

/// `max |(U*U - I)_{ij}|`.
pub fn unitarity_residual(u: &DMatrix<C64>) -> f64 {
    let gram = u.adjoint() * u;
    let n = u.ncols();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub g: Vec<f64>,
}

impl SampleConfig {
    /// Uses the mid-quantiles `Q((i - 1/2)/N)` of `m` as the `g_i`, without
    /// any tie spreading (atoms stay exact).
    pub fn from_measure<Q: Quantile + ?Sized>(m: &Q, n: usize, samples: usize, seed: u64) -> Self {
        let g = (0..n).map(|i| m.quantile((i as f64 + 0.5) / n as f64)).collect();
        Self { n, samples, seed, g }
    }

    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(("sample.N".into(), "N must be >= 1".into()));
        }
        if self.samples == 0 {
            out.push(("sample.samples".into(), "samples must be positive".into()));
        }
        if self.g.len() != self.n {
            out.push(("sample.g".into(), format!("expected {} g values, got {}", self.n, self.g.len())));
        }
        if self.g.iter().any(|g| !(0.0..=1.0).contains(g)) {
            out.push(("sample.g".into(), "every g must be in [0,1]".into()));
        }
        out
    }
}

/// Random stream for one sample.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Eigenvalues of one sampled `T`.
pub fn sample_eigenvalues(cfg: &SampleConfig, index: usize) -> Result<Vec<C64>> {
    let mut rng = sample_rng(cfg.seed, index);
    let mut t = haar_unitary(cfg.n, &mut rng);
    if unitarity_residual(&t) > UNITARITY_TOLERANCE {
        return Err(Error::Eigensolver { sample: index });
    }
    for (j, &g) in cfg.g.iter().enumerate() {
        t.column_mut(j).scale_mut(g.sqrt());
    }
    let schur = nalgebra::linalg::Schur::try_new(t, f64::EPSILON, 10_000 * cfg.n.max(1))
        .ok_or(Error::Eigensolver { sample: index })?;
    let (_, tri) = schur.unpack();
    let eigenvalues: Vec<C64> = (0..cfg.n).map(|i| tri[(i, i)]).collect();
    if eigenvalues.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigensolver { sample: index });
    }
    Ok(eigenvalues)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSample {
    /// Sorted ascending; `samples · N` entries unless some samples failed.
    pub moduli: Vec<f64>,
    pub zero_fraction: f64,
    pub provenance: SampleConfig,
    /// Indices of samples whose eigensolve failed and were excluded.
    pub failed_samples: Vec<usize>,
}

impl EigenSample {
    pub fn max_modulus(&self) -> f64 {
        self.moduli.last().copied().unwrap_or(0.0)
    }
}

pub fn sample_moduli(cfg: &SampleConfig) -> Result<EigenSample> {
    if let Some((key, msg)) = cfg.violations().into_iter().next() {
        return Err(Error::Config(format!("{key}: {msg}")));
    }
    let per_sample: Vec<Result<Vec<f64>>> = (0..cfg.samples)
        .into_par_iter()
        .map(|index| {
            sample_eigenvalues(cfg, index).map(|ev| ev.iter().map(|z| z.norm()).collect())
        })
        .collect();
    let mut moduli = Vec::with_capacity(cfg.samples * cfg.n);
    let mut failed_samples = Vec::new();
    for (index, result) in per_sample.into_iter().enumerate() {
        match result {
            Ok(m) => moduli.extend(m),
            Err(_) => failed_samples.push(index),
        }
    }
    if moduli.is_empty() {
        return Err(Error::Eigensolver {
            sample: failed_samples.first().copied().unwrap_or(0),
        });
    }
    moduli.sort_by(f64::total_cmp);
    let zeros = moduli.partition_point(|&r| r <= ZERO_THRESHOLD);
    Ok(EigenSample {
        zero_fraction: zeros as f64 / moduli.len() as f64,
        moduli,
        provenance: cfg.clone(),
        failed_samples,
    })
}

/// Fraction of moduli `<= r` (right-continuous).
pub fn empirical_cdf(es: &EigenSample, r: f64) -> f64 {
    if es.moduli.is_empty() {
        return 0.0;
    }
    es.moduli.partition_point(|&x| x <= r) as f64 / es.moduli.len() as f64
}

/// `sup_r |F_n(r) - G(r)|` for sorted samples against a CDF `G` that is
/// continuous on `r > 0`, checked on both sides of every jump. Moduli at or
/// below [`ZERO_THRESHOLD`] belong to the atom at the origin and are only
/// compared from the right.
pub fn ks_distance_to<F>(sorted: &[f64], mut cdf: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let target = cdf(x)?;
        let below = i as f64 / n;
        let at = j as f64 / n;
        if x > ZERO_THRESHOLD {
            worst = worst.max((target - below).abs());
        }
        worst = worst.max((target - at).abs());
        i = j;
    }
    Ok(worst)
}

/// Distance between the empirical radial CDF and the large-N `y(r)`.
pub fn ks_distance(es: &EigenSample, m: &GSpectrum) -> Result<f64> {
    ks_distance_to(&es.moduli, |r| asymptotic::integrated_density(m, r))
}

/// Two-sample KS statistic between sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// `modulus` column, 17 significant digits, LF line endings.
pub fn write_moduli_csv(path: &Path, es: &EigenSample) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "modulus")?;
    for r in &es.moduli {
        writeln!(out, "{r:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_moduli_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("modulus") {
        return Err(Error::Config(format!("{}: missing `modulus` header", path.display())));
    }
    lines
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{}: bad value {l:?}", path.display())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub g_source: serde_json::Value,
    pub zero_fraction: f64,
    pub failed_samples: Vec<usize>,
}

pub fn provenance(es: &EigenSample, g_source: serde_json::Value) -> Provenance {
    Provenance {
        seed: es.provenance.seed,
        n: es.provenance.n,
        samples: es.provenance.samples,
        g_source,
        zero_fraction: es.zero_fraction,
        failed_samples: es.failed_samples.clone(),
    }
}
