//! Rapidity bands, finite-chain rapidities, winding numbers, stability gaps
//! and dynamical phase classification.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, AssembledSystem, BoundaryCondition, BulkModel};
use crate::linalg::{self, c, C};

/// Tolerance on min_k s_min(−ig(k) − λ0) below which λ0 is on a band.
pub const ON_BAND_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct RapidityBands {
    /// Uniform samples of [−π, π).
    pub k_grid: Vec<f64>,
    /// bands[b][i] is band b at k_grid[i].
    pub bands: Vec<Vec<C>>,
    /// False when continuation failed and `bands` is only a per-k point cloud.
    pub tracked: bool,
}

impl RapidityBands {
    pub fn max_re(&self) -> f64 {
        self.bands.iter().flatten().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn points(&self) -> impl Iterator<Item = C> + '_ {
        self.bands.iter().flatten().copied()
    }
}

fn k_grid(n_k: usize) -> Vec<f64> {
    (0..n_k).map(|i| -PI + 2.0 * PI * i as f64 / n_k as f64).collect()
}

fn symbol_eigs(model: &BulkModel, k: f64) -> Vec<C> {
    linalg::eigvals(&lattice::rapidity_symbol(model, k)).expect("small dense eigenproblem")
}

/// Joins per-k eigenvalues into curves, matching each step against the linear
/// extrapolation of the previous two samples so that transversal crossings
/// are followed through. Returns the curves and whether tracking succeeded.
fn track(samples: &[Vec<C>]) -> (Vec<Vec<C>>, bool) {
    let nb = samples[0].len();
    let nk = samples.len();
    let mut bands: Vec<Vec<C>> = (0..nb).map(|b| vec![samples[0][b]]).collect();
    let pick = |bands: &Vec<Vec<C>>, cand: &[C], i: usize| -> Vec<usize> {
        let cost: Vec<Vec<f64>> = bands
            .iter()
            .map(|curve| {
                let guess = if i >= 2 { curve[i - 1] * 2.0 - curve[i - 2] } else { curve[i - 1] };
                cand.iter().map(|z| (z - guess).norm()).collect()
            })
            .collect();
        linalg::hungarian(&cost)
    };
    for i in 1..nk {
        let assign = pick(&bands, &samples[i], i);
        for (b, &j) in assign.iter().enumerate() {
            bands[b].push(samples[i][j]);
        }
    }
    // closing step back to k = −π must map each band onto itself
    let mut ext = bands.clone();
    let assign = pick(&ext, &samples[0], nk);
    let closed = assign.iter().enumerate().all(|(b, &j)| (samples[0][j] - bands[b][0]).norm() <= 1e-9 * (1.0 + bands[b][0].norm()) || j == b);
    for (b, &j) in assign.iter().enumerate() {
        ext[b].push(samples[0][j]);
    }
    // a continuous curve has no step far larger than its typical step
    let mut smooth = true;
    for curve in &ext {
        let mut steps: Vec<f64> = curve.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let max = steps.iter().copied().fold(0.0, f64::max);
        steps.sort_by(f64::total_cmp);
        let median = steps[steps.len() / 2];
        let scale = curve.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        if max > 20.0 * median.max(1e-9 * scale) && max > 1e-6 * scale {
            smooth = false;
        }
    }
    (bands, closed && smooth)
}

/// Rapidity bands: eigenvalues of −ig(k) on a uniform grid, joined into curves.
pub fn rapidity_bands(model: &BulkModel, n_k: usize) -> Result<RapidityBands> {
    if n_k < 64 {
        return Err(Error::Parameter("rapidity_bands needs n_k >= 64".into()));
    }
    let ks = k_grid(n_k);
    let samples: Vec<Vec<C>> = ks.par_iter().map(|&k| symbol_eigs(model, k)).collect();
    let (bands, tracked) = track(&samples);
    if tracked {
        Ok(RapidityBands { k_grid: ks, bands, tracked })
    } else {
        let nb = samples[0].len();
        let cloud = (0..nb).map(|b| samples.iter().map(|s| s[b]).collect()).collect();
        Ok(RapidityBands { k_grid: ks, bands: cloud, tracked })
    }
}

/// Eigenvalues of −iG for an open chain, sorted by (Re, Im).
pub fn obc_rapidities(system: &AssembledSystem) -> Result<Vec<C>> {
    if system.bc != BoundaryCondition::Obc {
        return Err(Error::Precondition("obc_rapidities requires an OBC system".into()));
    }
    spectrum(system)
}

/// Eigenvalues of −iG for any assembled system, sorted by (Re, Im).
pub fn spectrum(system: &AssembledSystem) -> Result<Vec<C>> {
    let a = system.rapidity_matrix();
    let mut ev = linalg::eigvals(&a)?;
    linalg::sort_complex(&mut ev);
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Winding {
    pub total: i64,
    /// One integer per tracked band; empty when band tracking failed.
    pub per_band: Vec<i64>,
}

fn unwrap_winding<F: Fn(usize) -> C>(n: usize, f: F) -> f64 {
    let mut acc = 0.0;
    let mut prev = f(0);
    for i in 1..=n {
        let cur = f(i % n);
        acc += (cur / prev).arg();
        prev = cur;
    }
    acc / (2.0 * PI)
}

fn det_shifted(model: &BulkModel, k: f64, l0: C) -> C {
    let a = linalg::shift(&lattice::rapidity_symbol(model, k), -l0);
    linalg::det(&a)
}

/// Golden-section maximum of f on [a, b].
fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    f1.max(f2)
}

/// Global maximum over the circle of a smooth f: grid of n points, then
/// golden-section refinement of every local maximum near the grid maximum.
fn circle_max(f: impl Fn(f64) -> f64 + Sync, n: usize) -> f64 {
    let ks = k_grid(n);
    let vals: Vec<f64> = ks.par_iter().map(|&k| f(k)).collect();
    let h = 2.0 * PI / n as f64;
    let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = best;
    for i in 0..n {
        let (l, r) = (vals[(i + n - 1) % n], vals[(i + 1) % n]);
        if vals[i] >= l && vals[i] >= r && vals[i] > best - 1e-3 * (1.0 + best.abs()) {
            out = out.max(golden_max(&f, ks[i] - h, ks[i] + h));
        }
    }
    out
}

/// min_k s_min(−ig(k) − λ0), the distance from λ0 to the bands for normal
/// symbols and a lower-bounded proxy of it in general.
pub fn band_proximity(model: &BulkModel, l0: C, n: usize) -> f64 {
    let f = |k: f64| {
        let a = linalg::shift(&lattice::rapidity_symbol(model, k), -l0);
        -linalg::singular_values(&a).expect("small SVD")[0]
    };
    -circle_max(f, n)
}

fn total_winding_at(model: &BulkModel, l0: C, n: usize) -> f64 {
    let ks = k_grid(n);
    let dets: Vec<C> = ks.par_iter().map(|&k| det_shifted(model, k, l0)).collect();
    unwrap_winding(n, |i| dets[i])
}

fn per_band_at(model: &BulkModel, l0: C, n: usize) -> Option<Vec<f64>> {
    let bands = rapidity_bands(model, n).ok()?;
    if !bands.tracked {
        return None;
    }
    Some(bands.bands.iter().map(|curve| unwrap_winding(curve.len(), |i| curve[i] - l0)).collect())
}

fn stable_integer(mut f: impl FnMut(usize) -> Option<Vec<f64>>) -> Option<Vec<i64>> {
    let mut n = 1024;
    let mut last: Option<Vec<i64>> = None;
    while n <= 1 << 17 {
        let vals = f(n)?;
        let ints: Vec<i64> = vals.iter().map(|v| v.round() as i64).collect();
        let clean = vals.iter().zip(&ints).all(|(v, i)| (v - *i as f64).abs() < 1e-6);
        if clean && last.as_ref() == Some(&ints) {
            return Some(ints);
        }
        last = if clean { Some(ints) } else { None };
        n *= 2;
    }
    None
}

/// Winding number of the bands about λ0: total from det(−ig(k) − λ0), per band
/// from the tracked curves. The grid doubles from 1024 points until the
/// integers stabilize.
pub fn winding_number(model: &BulkModel, l0: C) -> Result<Winding> {
    let prox = band_proximity(model, l0, 4096);
    if prox < ON_BAND_TOL {
        return Err(Error::Precondition(format!("on-band: λ0 = {l0} lies on a rapidity band ({prox:.2e})")));
    }
    let total = stable_integer(|n| Some(vec![total_winding_at(model, l0, n)]))
        .ok_or_else(|| Error::Numerical("winding number did not stabilize; λ0 may be too close to a band".into()))?[0];
    let per_band = stable_integer(|n| per_band_at(model, l0, n)).unwrap_or_default();
    if !per_band.is_empty() && per_band.iter().sum::<i64>() != total {
        return Ok(Winding { total, per_band: Vec::new() });
    }
    Ok(Winding { total, per_band })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityGaps {
    pub obc_gap: f64,
    pub sibc_gap: f64,
    /// −obc_gap when the chain is stable, otherwise absent.
    pub lindblad_gap: Option<f64>,
}

/// max_k max Re σ(−ig(k)), from a 4096-point grid refined by golden section.
pub fn band_max_re(model: &BulkModel) -> f64 {
    circle_max(|k| symbol_eigs(model, k).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max), 4096)
}

/// OBC gap at size N and SIBC gap. A bounded region enclosed by the bands
/// attains its rightmost point on its boundary, so the SIBC gap is the band
/// maximum of Re λ.
pub fn stability_gaps(model: &BulkModel, n: usize) -> Result<StabilityGaps> {
    let sys = lattice::assemble(model, BoundaryCondition::Obc, n)?;
    let ev = obc_rapidities(&sys)?;
    let obc_gap = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let sibc_gap = band_max_re(model);
    Ok(StabilityGaps { obc_gap, sibc_gap, lindblad_gap: (obc_gap < 0.0).then_some(-obc_gap) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseTag {
    IllDefined,
    Unstable,
    AnomalouslyRelaxing,
    DynMetastableNonTopological,
    TopologicallyMetastable,
}

impl PhaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseTag::IllDefined => "IllDefined",
            PhaseTag::Unstable => "Unstable",
            PhaseTag::AnomalouslyRelaxing => "AnomalouslyRelaxing",
            PhaseTag::DynMetastableNonTopological => "DynMetastableNonTopological",
            PhaseTag::TopologicallyMetastable => "TopologicallyMetastable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseClassification {
    pub tag: PhaseTag,
    /// Per-band windings about λ = 0; empty when not computed or 0 is on a band.
    pub windings: Vec<i64>,
    pub gaps: Option<StabilityGaps>,
    /// Set when a deciding gap is within tolerance of zero.
    pub critical: bool,
}

/// Dynamical phase of the OBC chain of size N.
pub fn classify_phase(model: &BulkModel, n: usize) -> Result<PhaseClassification> {
    let sys = lattice::assemble(model, BoundaryCondition::Obc, n)?;
    let psd = lattice::gkls_psd_check(&sys.m)?;
    if !psd.ok {
        return Ok(PhaseClassification { tag: PhaseTag::IllDefined, windings: Vec::new(), gaps: None, critical: false });
    }
    let gaps = stability_gaps(model, n)?;
    let tol = 1e-9 * linalg::max_abs(&sys.g).max(1.0);
    let done = |tag, windings, critical| Ok(PhaseClassification { tag, windings, gaps: Some(gaps), critical });
    if gaps.obc_gap > tol {
        return done(PhaseTag::Unstable, Vec::new(), false);
    }
    let obc_critical = gaps.obc_gap.abs() <= tol;
    if gaps.sibc_gap < -tol {
        return done(PhaseTag::AnomalouslyRelaxing, Vec::new(), obc_critical);
    }
    let critical = obc_critical || gaps.sibc_gap.abs() <= tol;
    match winding_number(model, c(0.0, 0.0)) {
        Ok(w) => {
            let topo = if w.per_band.is_empty() { w.total != 0 } else { w.per_band.iter().any(|&v| v != 0) };
            let tag = if topo { PhaseTag::TopologicallyMetastable } else { PhaseTag::DynMetastableNonTopological };
            done(tag, w.per_band, critical)
        }
        Err(Error::Precondition(_)) => done(PhaseTag::DynMetastableNonTopological, Vec::new(), true),
        Err(e) => Err(e),
    }
}
