//! Bulk-translationally-invariant chains: internal coupling blocks, finite
//! assembly under open or periodic boundaries, and the Bloch symbol.

use std::collections::BTreeMap;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C, I};
use crate::nambu;

const BLOCK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    Obc,
    Pbc,
    /// Semi-infinite chain; described analytically by the symbol.
    Sibc,
    /// Bi-infinite chain; described analytically by the symbol.
    Bibc,
}

impl BoundaryCondition {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obc" | "open" => Ok(Self::Obc),
            "pbc" | "periodic" => Ok(Self::Pbc),
            "sibc" => Ok(Self::Sibc),
            "bibc" => Ok(Self::Bibc),
            other => Err(Error::Parameter(format!("unknown boundary condition '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Obc => "obc",
            Self::Pbc => "pbc",
            Self::Sibc => "sibc",
            Self::Bibc => "bibc",
        }
    }
}

/// Internal blocks h_r, m_r (r = −R..=R) of a chain with `d_int` modes per site.
/// Block r couples site j to site j + r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BulkModelJson", into = "BulkModelJson")]
pub struct BulkModel {
    d_int: usize,
    range: usize,
    h: Vec<CMat>,
    m: Vec<CMat>,
}

impl BulkModel {
    /// Builds a model from blocks indexed by r + R and validates
    /// h_r† = h_{−r}, m_r† = m_{−r} and h_r* = τ1h_rτ1.
    pub fn new(d_int: usize, range: usize, h: Vec<CMat>, m: Vec<CMat>) -> Result<Self> {
        let nb = 2 * range + 1;
        let bd = 2 * d_int;
        if d_int == 0 {
            return Err(Error::Dimension("d_int must be positive".into()));
        }
        if h.len() != nb || m.len() != nb {
            return Err(Error::Dimension(format!("expected {nb} blocks for range {range}")));
        }
        for b in h.iter().chain(m.iter()) {
            if b.nrows() != bd || b.ncols() != bd {
                return Err(Error::Dimension(format!("blocks must be {bd}x{bd}")));
            }
        }
        let scale = h.iter().chain(m.iter()).map(linalg::max_abs).fold(1.0, f64::max);
        for k in 0..nb {
            let mk = nb - 1 - k;
            if linalg::max_abs(&(h[k].adjoint() - &h[mk])) > BLOCK_TOL * scale {
                return Err(Error::Validation(format!("h_r† != h_(-r) at r = {}", k as i64 - range as i64)));
            }
            if linalg::max_abs(&(m[k].adjoint() - &m[mk])) > BLOCK_TOL * scale {
                return Err(Error::Validation(format!("m_r† != m_(-r) at r = {}", k as i64 - range as i64)));
            }
            if linalg::max_abs(&(nambu::tau1_conj(&h[k]) - &h[k])) > BLOCK_TOL * scale
            {
                return Err(Error::Validation(format!("h_r is not bosonic at r = {}", k as i64 - range as i64)));
            }
        }
        Ok(Self { d_int, range, h, m })
    }

    pub fn d_int(&self) -> usize {
        self.d_int
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn h(&self, r: i64) -> &CMat {
        &self.h[(r + self.range as i64) as usize]
    }

    pub fn m(&self, r: i64) -> &CMat {
        &self.m[(r + self.range as i64) as usize]
    }

    /// g_r = τ3h_r − (i/2)τ3(m_r − τ1m_r*τ1).
    pub fn g_block(&self, r: i64) -> CMat {
        let h = self.h(r);
        let m = self.m(r);
        let mc = nambu::tau1_conj(m);
        let inner = Mat::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] - I * 0.5 * (m[(i, j)] - mc[(i, j)]));
        nambu::tau3_left(&inner)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bulk model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parameter(format!("bulk model JSON: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct BlockPairJson {
    h: Vec<Vec<[f64; 2]>>,
    m: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct BulkModelJson {
    d_int: usize,
    #[serde(rename = "R")]
    range: usize,
    blocks: BTreeMap<i64, BlockPairJson>,
}

fn mat_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn rows_to_mat(rows: &[Vec<[f64; 2]>], dim: usize) -> Result<CMat> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension(format!("block must be {dim}x{dim}")));
    }
    Ok(Mat::from_fn(dim, dim, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

impl From<BulkModel> for BulkModelJson {
    fn from(m: BulkModel) -> Self {
        let r0 = m.range as i64;
        let blocks = (-r0..=r0)
            .map(|r| (r, BlockPairJson { h: mat_to_rows(m.h(r)), m: mat_to_rows(m.m(r)) }))
            .collect();
        Self { d_int: m.d_int, range: m.range, blocks }
    }
}

impl TryFrom<BulkModelJson> for BulkModel {
    type Error = Error;

    fn try_from(j: BulkModelJson) -> Result<Self> {
        let r0 = j.range as i64;
        let bd = 2 * j.d_int;
        let mut h = Vec::new();
        let mut m = Vec::new();
        for r in -r0..=r0 {
            match j.blocks.get(&r) {
                Some(b) => {
                    h.push(rows_to_mat(&b.h, bd)?);
                    m.push(rows_to_mat(&b.m, bd)?);
                }
                None => {
                    h.push(linalg::zeros(bd, bd));
                    m.push(linalg::zeros(bd, bd));
                }
            }
        }
        if j.blocks.keys().any(|r| r.abs() > r0) {
            return Err(Error::Parameter("block index exceeds range R".into()));
        }
        BulkModel::new(j.d_int, j.range, h, m)
    }
}

impl std::fmt::Display for BulkModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BulkModel(d_int={}, R={})", self.d_int, self.range)
    }
}

/// Finite dynamical, adjoint and GKLS matrices of a chain.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub bc: BoundaryCondition,
    pub n_sites: usize,
    pub d_int: usize,
    pub h: CMat,
    pub m: CMat,
    pub g: CMat,
    pub g_tilde: CMat,
    pub model: Option<BulkModel>,
}

impl AssembledSystem {
    /// Builds a system directly from finite H and M.
    pub fn from_matrices(bc: BoundaryCondition, n_sites: usize, d_int: usize, h: CMat, m: CMat) -> Result<Self> {
        if h.nrows() != 2 * d_int * n_sites {
            return Err(Error::Dimension("matrix size does not match n_sites and d_int".into()));
        }
        let g = nambu::dynamical_matrix(&h, &m)?;
        let g_tilde = nambu::tilde(&g)?;
        Ok(Self { bc, n_sites, d_int, h, m, g, g_tilde, model: None })
    }

    /// Number of bosonic modes N·d_int.
    pub fn modes(&self) -> usize {
        self.n_sites * self.d_int
    }

    pub fn dim(&self) -> usize {
        2 * self.modes()
    }

    /// −iG, whose spectrum is the rapidity spectrum.
    pub fn rapidity_matrix(&self) -> CMat {
        linalg::scale(&self.g, -I)
    }
}

fn place(target: &mut CMat, block: &CMat, row_site: usize, col_site: usize) {
    let bd = block.nrows();
    for i in 0..bd {
        for j in 0..bd {
            target[(row_site * bd + i, col_site * bd + j)] += block[(i, j)];
        }
    }
}

/// Assembles H_N, M_N and G_N for N sites under OBC or PBC.
pub fn assemble(model: &BulkModel, bc: BoundaryCondition, n: usize) -> Result<AssembledSystem> {
    if !matches!(bc, BoundaryCondition::Obc | BoundaryCondition::Pbc) {
        return Err(Error::Parameter(format!("{} cannot be assembled as a finite matrix", bc.as_str())));
    }
    if n <= model.range {
        return Err(Error::Parameter(format!("N = {n} must exceed the coupling range R = {}", model.range)));
    }
    let dim = 2 * model.d_int * n;
    let mut h = linalg::zeros(dim, dim);
    let mut m = linalg::zeros(dim, dim);
    let r0 = model.range as i64;
    for j in 0..n as i64 {
        for r in -r0..=r0 {
            let k = j + r;
            let k = match bc {
                BoundaryCondition::Obc if k < 0 || k >= n as i64 => continue,
                BoundaryCondition::Obc => k,
                _ => k.rem_euclid(n as i64),
            };
            place(&mut h, model.h(r), j as usize, k as usize);
            place(&mut m, model.m(r), j as usize, k as usize);
        }
    }
    let mut sys = AssembledSystem::from_matrices(bc, n, model.d_int, h, m)?;
    sys.model = Some(model.clone());
    Ok(sys)
}

/// g(k) = Σ_r g_r e^{ikr}.
pub fn bloch_symbol(model: &BulkModel, k: f64) -> CMat {
    let bd = 2 * model.d_int;
    let mut g = linalg::zeros(bd, bd);
    let r0 = model.range as i64;
    for r in -r0..=r0 {
        let ph = C::from_polar(1.0, k * r as f64);
        let b = model.g_block(r);
        for i in 0..bd {
            for j in 0..bd {
                g[(i, j)] += b[(i, j)] * ph;
            }
        }
    }
    g
}

/// −i g(k), whose eigenvalues are the rapidity bands at momentum k.
pub fn rapidity_symbol(model: &BulkModel, k: f64) -> CMat {
    linalg::scale(&bloch_symbol(model, k), -I)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub ok: bool,
    pub min_eigenvalue: f64,
}

/// Positivity of a GKLS matrix, admitting eigenvalues down to −1e-10·‖M‖.
pub fn gkls_psd_check(m: &CMat) -> Result<PsdReport> {
    if nambu::hermiticity_defect(m) > BLOCK_TOL {
        return Err(Error::Validation("GKLS matrix is not Hermitian".into()));
    }
    let ev = linalg::eigvalsh(m)?;
    let min = ev.first().copied().unwrap_or(0.0);
    let norm = ev.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    Ok(PsdReport { ok: min >= -1e-10 * norm.max(1.0), min_eigenvalue: min })
}
