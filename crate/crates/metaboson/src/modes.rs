//! Majorana bosons: numerical extraction of approximate zero modes (ZMs) and
//! Weyl symmetry generators (SGs), canonical pairing and normalization,
//! Dirac bosons of number-symmetric chains, and kernel-dimension checks.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{AssembledSystem, BoundaryCondition};
use crate::linalg::{self, c, CMat, C, I, ZERO};
use crate::nambu;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeKind {
    ZM,
    SG,
    NonSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    Left,
    Right,
    Unlocalized,
}

/// Coefficient vector v of a Hermitian linear form v†τ3Φ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoetherMode {
    pub vector: Vec<C>,
    pub kind: ModeKind,
    pub edge: Edge,
    /// ‖G̃v‖ for ZMs, ‖Gv‖ for SGs, the larger of the two for non-split modes,
    /// at unit norm.
    pub accuracy: f64,
    /// Singular value of G (SG) or G̃ (ZM) the mode was extracted from.
    pub singular_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub zm_residual: f64,
    pub sg_residual: f64,
}

/// ‖G̃v‖ and ‖Gv‖.
pub fn residuals(v: &[C], system: &AssembledSystem) -> Residuals {
    Residuals {
        zm_residual: linalg::vnorm(&linalg::matvec(&system.g_tilde, v)),
        sg_residual: linalg::vnorm(&linalg::matvec(&system.g, v)),
    }
}

/// Per-site weight Σ|v_i|² over the Nambu components of each site.
pub fn site_weights(v: &[C], n_sites: usize) -> Vec<f64> {
    let per = v.len() / n_sites;
    (0..n_sites).map(|s| v[s * per..(s + 1) * per].iter().map(|z| z.norm_sqr()).sum()).collect()
}

/// Left/right by the site where the cumulative weight reaches one half.
pub fn edge_of(v: &[C], n_sites: usize) -> Edge {
    let w = site_weights(v, n_sites);
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut median = n_sites - 1;
    for (s, x) in w.iter().enumerate() {
        acc += x;
        if acc >= 0.5 * total {
            median = s;
            break;
        }
    }
    let center = (n_sites as f64 - 1.0) / 2.0;
    let band = 0.1 * n_sites as f64;
    if (median as f64) < center - band {
        Edge::Left
    } else if (median as f64) > center + band {
        Edge::Right
    } else {
        Edge::Unlocalized
    }
}

/// Midgap right-singular vectors of `a`: singular values below
/// √frac·s_gap, where s_gap follows the largest relative jump in the lower
/// half of the sorted singular values.
fn midgap_subspace(a: &CMat, frac: f64) -> Result<(Vec<Vec<C>>, Vec<f64>)> {
    let (_, s, v) = linalg::svd(a)?;
    let n = s.len();
    let smax = s[n - 1].max(1e-300);
    let floor = 1e-300_f64.max(f64::EPSILON * 1e-3 * smax);
    let mut best = (1usize, 0.0f64);
    for k in 1..=n / 2 {
        let ratio = s[k] / s[k - 1].max(floor);
        if ratio > best.1 {
            best = (k, ratio);
        }
    }
    let (k, ratio) = best;
    if ratio * ratio < 10.0 {
        return Err(Error::Precondition(format!(
            "no reliable midgap: largest separation of G†G eigenvalues is ×{:.3}",
            ratio * ratio
        )));
    }
    let cut = s[k] * frac.sqrt();
    let idx: Vec<usize> = (0..k).filter(|&i| s[i] < cut).collect();
    if idx.is_empty() {
        return Err(Error::Precondition(format!(
            "no reliable midgap: separation ×{:.3} is below the midgap threshold",
            ratio * ratio
        )));
    }
    Ok((idx.iter().map(|&i| linalg::col(&v, i)).collect(), idx.iter().map(|&i| s[i]).collect()))
}

/// Real orthonormal basis of Hermitian forms spanning a 𝒞-invariant complex
/// subspace, via the real structure v ↦ −𝒞v.
fn hermitian_basis(vs: &[Vec<C>]) -> Result<Vec<Vec<C>>> {
    let k = vs.len();
    let dim = vs[0].len();
    let mut cands: Vec<Vec<C>> = Vec::with_capacity(2 * k);
    for u in vs {
        let cu = nambu::conjugate_vector(u);
        cands.push(u.iter().zip(&cu).map(|(a, b)| a - b).collect());
        cands.push(u.iter().zip(&cu).map(|(a, b)| (a + b) * I).collect());
    }
    // real Gram matrix Re⟨v_a, v_b⟩ of the 2k candidates
    let gram = Mat::from_fn(2 * k, 2 * k, |a, b| linalg::dot(&cands[a], &cands[b]).re);
    let (vals, w) = linalg::eigh_real(&gram)?;
    let top = vals[2 * k - 1];
    if vals[k] < 1e-12 * top {
        return Err(Error::Numerical("midgap subspace is not closed under the conjugation".into()));
    }
    Ok((0..k)
        .map(|j| {
            let col = 2 * k - 1 - j;
            let mut v = vec![ZERO; dim];
            for (a, cand) in cands.iter().enumerate() {
                for (vi, x) in v.iter_mut().zip(cand) {
                    *vi += x * w[(a, col)];
                }
            }
            let nv = linalg::vnorm(&v);
            v.iter().map(|z| z / nv).collect()
        })
        .collect())
}

/// Rotates a real orthonormal Hermitian basis into eigenvectors of the
/// left-half projector, separating left- and right-localized modes.
fn localize(basis: &[Vec<C>], n_sites: usize) -> Result<Vec<Vec<C>>> {
    let k = basis.len();
    let half = n_sites / 2;
    let per = basis[0].len() / n_sites;
    let cut = half * per;
    let odd_center = n_sites % 2 == 1;
    let weight = |i: usize| -> f64 {
        if i < cut {
            1.0
        } else if odd_center && i < cut + per {
            0.5
        } else {
            0.0
        }
    };
    let kmat = Mat::from_fn(k, k, |a, b| {
        basis[a].iter().zip(&basis[b]).enumerate().map(|(i, (x, y))| (x.conj() * y).re * weight(i)).sum::<f64>()
    });
    let (_, w) = linalg::eigh_real(&kmat)?;
    Ok((0..k)
        .map(|j| {
            let mut v = vec![ZERO; basis[0].len()];
            for (a, b) in basis.iter().enumerate() {
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi += bi * w[(a, j)];
                }
            }
            v
        })
        .collect())
}

fn hermitian_midgap(a: &CMat, frac: f64, n_sites: usize) -> Result<(Vec<Vec<C>>, f64)> {
    let (vs, s) = midgap_subspace(a, frac)?;
    let basis = localize(&hermitian_basis(&vs)?, n_sites)?;
    Ok((basis, s.iter().copied().fold(0.0, f64::max)))
}

/// Approximate ZMs (from G̃) and SGs (from G) of an open chain, as localized
/// Hermitian forms of unit norm. When the two midgap subspaces coincide the
/// modes are reported once as non-split.
pub fn extract_modes(system: &AssembledSystem, eps_gap_fraction: f64) -> Result<Vec<NoetherMode>> {
    if system.bc != BoundaryCondition::Obc {
        return Err(Error::Precondition("extract_modes requires an OBC system".into()));
    }
    if !(eps_gap_fraction > 0.0 && eps_gap_fraction < 1.0) {
        return Err(Error::Parameter("ε_gap_fraction must lie in (0, 1)".into()));
    }
    let n = system.n_sites;
    let (sgs, s_sg) = hermitian_midgap(&system.g, eps_gap_fraction, n)?;
    let (zms, s_zm) = hermitian_midgap(&system.g_tilde, eps_gap_fraction, n)?;
    let scale = linalg::max_abs(&system.g).max(1e-300);
    let thr_s = s_sg.max(1e-12 * scale) * 10.0;
    let thr_z = s_zm.max(1e-12 * scale) * 10.0;
    let make = |v: Vec<C>, kind: ModeKind, sv: f64| {
        let r = residuals(&v, system);
        let accuracy = match kind {
            ModeKind::ZM => r.zm_residual,
            ModeKind::SG => r.sg_residual,
            ModeKind::NonSplit => r.zm_residual.max(r.sg_residual),
        };
        NoetherMode { edge: edge_of(&v, n), vector: v, kind, accuracy, singular_value: sv }
    };
    // both subspaces are real-orthonormal, so coincidence shows as unit projections
    let captured = |v: &[C], basis: &[Vec<C>]| basis.iter().map(|b| linalg::dot(b, v).norm_sqr()).sum::<f64>();
    let non_split = sgs.len() == zms.len()
        && sgs.iter().all(|v| residuals(v, system).zm_residual < thr_z && captured(v, &zms) > 0.99)
        && zms.iter().all(|v| residuals(v, system).sg_residual < thr_s && captured(v, &sgs) > 0.99);
    if non_split {
        return Ok(sgs.into_iter().map(|v| make(v, ModeKind::NonSplit, s_sg)).collect());
    }
    let mut out: Vec<NoetherMode> = zms.into_iter().map(|v| make(v, ModeKind::ZM, s_zm)).collect();
    out.extend(sgs.into_iter().map(|v| make(v, ModeKind::SG, s_sg)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Equal norms for both members of each pair.
    Symmetric,
    /// Unit max-modulus ZM coefficients, scale carried by the SG.
    UnitZM,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajoranaPair {
    pub zm: NoetherMode,
    pub sg: NoetherMode,
    /// [γz, γs] = γz†τ3γs after normalization.
    pub commutator: C,
    /// Commutator of the unit-norm ZM with the unit-norm SG that dominates
    /// its dual, before normalization.
    pub raw_commutator: C,
}

fn scaled(m: &NoetherMode, v: Vec<C>, system: Option<&AssembledSystem>) -> NoetherMode {
    let mut out = m.clone();
    let norm = linalg::vnorm(&v);
    if let Some(sys) = system {
        let r = residuals(&v, sys);
        out.accuracy = match m.kind {
            ModeKind::ZM => r.zm_residual,
            ModeKind::SG => r.sg_residual,
            ModeKind::NonSplit => r.zm_residual.max(r.sg_residual),
        };
    } else {
        out.accuracy *= norm / linalg::vnorm(&m.vector).max(1e-300);
    }
    out.vector = v;
    out
}

/// Canonical pairs with [γz, γs] = i. Each SG is replaced by the dual
/// combination of SGs for one ZM through the inverse pairing matrix, then the
/// pair is rescaled per `scheme`. Non-split modes pair left with right.
pub fn pair_and_normalize(modes: &[NoetherMode], scheme: Normalization) -> Result<Vec<MajoranaPair>> {
    pair_impl(modes, scheme, None)
}

/// As [`pair_and_normalize`], recomputing residuals on `system` after rescaling.
pub fn pair_and_normalize_on(system: &AssembledSystem, modes: &[NoetherMode], scheme: Normalization) -> Result<Vec<MajoranaPair>> {
    pair_impl(modes, scheme, Some(system))
}

fn pair_impl(modes: &[NoetherMode], scheme: Normalization, system: Option<&AssembledSystem>) -> Result<Vec<MajoranaPair>> {
    let (zs, ss): (Vec<&NoetherMode>, Vec<&NoetherMode>) =
        if modes.iter().all(|m| m.kind == ModeKind::NonSplit) {
            (
                modes.iter().filter(|m| m.edge != Edge::Right).collect(),
                modes.iter().filter(|m| m.edge == Edge::Right).collect(),
            )
        } else {
            (
                modes.iter().filter(|m| m.kind != ModeKind::SG).collect(),
                modes.iter().filter(|m| m.kind == ModeKind::SG).collect(),
            )
        };
    let k = zs.len();
    if k == 0 || ss.len() != k {
        return Err(Error::Precondition(format!("cannot pair {} ZM-type with {} SG-type modes", k, ss.len())));
    }
    // F_{jk} = γz_j†τ3γs_k is i times a real matrix for Hermitian forms
    let f = Mat::from_fn(k, k, |a, b| nambu::tau3_form(&zs[a].vector, &ss[b].vector));
    let e = Mat::from_fn(k, k, |a, b| c((f[(a, b)] * -I).re, 0.0));
    // the modes have unit norm, so |E_ab| <= 1 and rounding sits near 1e-16
    let sv = linalg::singular_values(&e)?;
    if sv[0] <= 1e-13 {
        return Err(Error::Numerical("pairing matrix is singular; increase N".into()));
    }
    let einv = linalg::inverse(&e)?;
    let mut out = Vec::with_capacity(k);
    for a in 0..k {
        let z = zs[a].vector.clone();
        // dual SG: Σ_b γs_b (E⁻¹)_{b a} so that γz_a†τ3 dual = i
        let mut s = vec![ZERO; z.len()];
        for (b, sm) in ss.iter().enumerate() {
            let w = einv[(b, a)].re;
            for (si, x) in s.iter_mut().zip(&sm.vector) {
                *si += x * w;
            }
        }
        let (zn, sn) = (linalg::vnorm(&z), linalg::vnorm(&s));
        let (fz, fs) = match scheme {
            Normalization::Symmetric => {
                let r = (sn / zn).sqrt();
                (r, 1.0 / r)
            }
            Normalization::UnitZM => {
                let m = z.iter().map(|x| x.norm()).fold(0.0, f64::max);
                (1.0 / m, m)
            }
        };
        let z2: Vec<C> = z.iter().map(|x| x * fz).collect();
        let s2: Vec<C> = s.iter().map(|x| x * fs).collect();
        let comm = nambu::tau3_form(&z2, &s2);
        let dominant = (0..k).max_by(|&x, &y| einv[(x, a)].re.abs().total_cmp(&einv[(y, a)].re.abs())).unwrap();
        out.push(MajoranaPair {
            zm: scaled(zs[a], z2, system),
            sg: scaled(ss[dominant], s2, system),
            commutator: comm,
            raw_commutator: f[(a, dominant)],
        });
    }
    Ok(out)
}

/// Cosine distance 1 − |⟨u, v⟩| / (‖u‖‖v‖).
pub fn cosine_distance(u: &[C], v: &[C]) -> f64 {
    1.0 - linalg::dot(u, v).norm() / (linalg::vnorm(u) * linalg::vnorm(v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracBoson {
    /// Coefficients of α = Σ_j alpha_j a_j over the chain's annihilation operators.
    pub alpha: Vec<C>,
    pub beta: Vec<C>,
    /// Normalization constants dividing (γz₁ − iγz₂)/2 and (γs₁ − iγs₂)/2.
    pub norm_alpha: f64,
    pub norm_beta: f64,
}

/// Coefficient vector of the form rotated by a_j → i a_j. Vectors enter the
/// form v†τ3Φ conjugated, so the components pick up the opposite phases.
fn rotate_quarter(v: &[C]) -> Vec<C> {
    v.iter().enumerate().map(|(i, z)| if i % 2 == 0 { z * -I } else { z * I }).collect()
}

/// Dirac bosons α = (γz₁ − iγz₂)/(2√C_z), β = (γs₁ − iγs₂)/(2√C_s) of a
/// number-symmetric chain, with γ₂ the π/2 phase rotation of γ₁.
pub fn dirac_bosons(system: &AssembledSystem, pairs: &[MajoranaPair]) -> Result<Vec<DiracBoson>> {
    let t3 = nambu::pauli(nambu::Pauli::Tau3, system.dim())?;
    let comm = &(&system.g * &t3) - &(&t3 * &system.g);
    if linalg::max_abs(&comm) > 1e-12 * linalg::max_abs(&system.g).max(1.0) {
        return Err(Error::Precondition("Dirac bosons need a number-symmetric system ([G, τ3] ≠ 0)".into()));
    }
    let mut out = Vec::new();
    for p in pairs {
        let build = |g1: &[C]| -> Result<(Vec<C>, f64)> {
            // the form (γ₁ − iγ₂)/2 has coefficient vector (v₁ + iv₂)/2
            let g2 = rotate_quarter(g1);
            let lin: Vec<C> = g1.iter().zip(&g2).map(|(a, b)| (a + b * I) * 0.5).collect();
            if lin.iter().skip(1).step_by(2).any(|z| z.norm() > 1e-12 * linalg::vnorm(&lin).max(1e-300)) {
                return Err(Error::Numerical("rotated pair does not combine into an annihilation-type mode".into()));
            }
            let cn = nambu::tau3_form(&lin, &lin).re;
            if cn <= 0.0 {
                return Err(Error::Numerical("Dirac boson normalization is not positive".into()));
            }
            let sq = cn.sqrt();
            Ok((lin.iter().step_by(2).map(|z| z.conj() / sq).collect(), sq))
        };
        let (alpha, na) = build(&p.zm.vector)?;
        let (beta, nb) = build(&p.sg.vector)?;
        out.push(DiracBoson { alpha, beta, norm_alpha: na, norm_beta: nb });
    }
    Ok(out)
}

/// Nambu coefficient vector of Σ_j w_j a_j.
pub fn annihilation_vector(w: &[C]) -> Vec<C> {
    let mut v = vec![ZERO; 2 * w.len()];
    for (j, z) in w.iter().enumerate() {
        v[2 * j] = z.conj();
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KernelDimensions {
    pub dim_ker_g: usize,
    pub dim_ker_g_tilde: usize,
    pub equal: bool,
}

/// Numerical kernel dimensions of G and G̃ (singular values below 1e-10·‖G‖₂).
pub fn theorem1_dimension_check(system: &AssembledSystem) -> Result<KernelDimensions> {
    let sg = linalg::singular_values(&system.g)?;
    let st = linalg::singular_values(&system.g_tilde)?;
    let norm = sg.last().copied().unwrap_or(0.0).max(1e-300);
    let count = |s: &[f64]| s.iter().filter(|&&x| x < 1e-10 * norm).count();
    let (a, b) = (count(&sg), count(&st));
    Ok(KernelDimensions { dim_ker_g: a, dim_ker_g_tilde: b, equal: a == b })
}

#[derive(Serialize)]
struct ModeJson<'a> {
    kind: ModeKind,
    edge: Edge,
    accuracy: f64,
    singular_value: f64,
    coefficients: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair: Option<&'a str>,
}

/// JSON record {kind, edge, accuracy, singular_value, coefficients}.
pub fn mode_to_json(m: &NoetherMode) -> String {
    let rec = ModeJson {
        kind: m.kind,
        edge: m.edge,
        accuracy: m.accuracy,
        singular_value: m.singular_value,
        coefficients: m.vector.iter().map(|z| [z.re, z.im]).collect(),
        pair: None,
    };
    serde_json::to_string_pretty(&rec).expect("mode serializes")
}
