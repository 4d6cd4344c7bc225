//! Model constructors: the dissipative bosonic Kitaev chain and its pure
//! steady-state variant, the purely dissipative Majorana chain, the
//! number-symmetric chain, the double-winding chain, and the two generic
//! design procedures (fermion-to-boson map and pure steady-state engineering).

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, AssembledSystem, BoundaryCondition, BulkModel};
use crate::linalg::{self, c, CMat, C, I, ONE, ZERO};
use crate::nambu;

/// A single-mode ladder operator at a site of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    A(i64),
    Ad(i64),
}

/// Accumulates quadratic Hamiltonian terms and dissipators on a chain with one
/// mode per site, producing the Nambu matrices H and M.
#[derive(Debug, Clone)]
pub struct ChainBuilder {
    n: usize,
    periodic: bool,
    x: CMat,
    m: CMat,
}

impl ChainBuilder {
    pub fn new(n: usize, periodic: bool) -> Self {
        Self { n, periodic, x: linalg::zeros(2 * n, 2 * n), m: linalg::zeros(2 * n, 2 * n) }
    }

    fn site(&self, j: i64) -> Option<usize> {
        if self.periodic {
            Some(j.rem_euclid(self.n as i64) as usize)
        } else if j >= 0 && (j as usize) < self.n {
            Some(j as usize)
        } else {
            None
        }
    }

    /// Index k such that the operator equals Φ_k.
    fn phi_index(&self, op: Op) -> Option<usize> {
        match op {
            Op::A(j) => self.site(j).map(|s| 2 * s),
            Op::Ad(j) => self.site(j).map(|s| 2 * s + 1),
        }
    }

    /// Index k such that the operator equals Φ_k†.
    fn phi_dag_index(&self, op: Op) -> Option<usize> {
        match op {
            Op::Ad(j) => self.site(j).map(|s| 2 * s),
            Op::A(j) => self.site(j).map(|s| 2 * s + 1),
        }
    }

    /// Adds coef·(left·right) + h.c. to the Hamiltonian. Terms reaching past
    /// an open boundary are dropped.
    pub fn hamiltonian(&mut self, coef: C, left: Op, right: Op) -> &mut Self {
        if let (Some(p), Some(q)) = (self.phi_dag_index(left), self.phi_index(right)) {
            self.x[(p, q)] += coef;
        }
        self
    }

    /// Adds coef·𝒟[x, y] with 𝒟[x, y]ρ = xρy − ½{yx, ρ}.
    pub fn dissipator(&mut self, coef: C, x: Op, y: Op) -> &mut Self {
        if let (Some(k), Some(j)) = (self.phi_index(x), self.phi_dag_index(y)) {
            self.m[(j, k)] += coef;
        }
        self
    }

    /// Adds weight·𝒟[L] for L = Σ_k ℓ_k Φ_k given as (operator, ℓ) pairs.
    pub fn lindblad(&mut self, weight: f64, terms: &[(Op, C)]) -> &mut Self {
        let mut l = vec![ZERO; 2 * self.n];
        for &(op, coef) in terms {
            if let Some(k) = self.phi_index(op) {
                l[k] += coef;
            }
        }
        for j in 0..2 * self.n {
            for k in 0..2 * self.n {
                self.m[(j, k)] += l[j].conj() * l[k] * weight;
            }
        }
        self
    }

    /// (H, M) with Ĥ = ½Φ†HΦ up to a constant.
    pub fn finish(&self) -> Result<(CMat, CMat)> {
        let xs = &self.x + self.x.adjoint();
        let h = linalg::scale(&nambu::bosonic_project(&xs)?, c(2.0, 0.0));
        Ok((h, self.m.clone()))
    }

    /// Reads bulk blocks of range `range` from block row 0 of a periodic chain.
    pub fn bulk_blocks(&self, range: usize) -> Result<BulkModel> {
        if !self.periodic || self.n < 2 * range + 3 {
            return Err(Error::Parameter("bulk extraction needs a periodic chain of at least 2R+3 sites".into()));
        }
        let (h, m) = self.finish()?;
        let n = self.n as i64;
        let block = |a: &CMat, r: i64| -> CMat {
            let s = r.rem_euclid(n) as usize;
            Mat::from_fn(2, 2, |i, j| a[(i, 2 * s + j)])
        };
        let r0 = range as i64;
        let hb = (-r0..=r0).map(|r| block(&h, r)).collect();
        let mb = (-r0..=r0).map(|r| block(&m, r)).collect();
        BulkModel::new(1, range, hb, mb)
    }
}

fn bulk_builder(range: usize) -> ChainBuilder {
    ChainBuilder::new(2 * range + 3, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbkcParams {
    pub j: f64,
    pub delta: f64,
    pub mu: f64,
    pub kappa: f64,
    pub gamma: f64,
}

fn dbkc_terms(b: &mut ChainBuilder, p: &DbkcParams, sites: std::ops::Range<i64>) {
    for j in sites.clone() {
        b.hamiltonian(c(0.0, 0.5 * p.j), Op::Ad(j + 1), Op::A(j));
        b.hamiltonian(c(0.0, 0.5 * p.delta), Op::Ad(j + 1), Op::Ad(j));
        b.hamiltonian(c(0.0, 0.5 * p.mu), Op::Ad(j), Op::Ad(j));
    }
    if p.kappa > 0.0 {
        let g2 = 2.0 * p.gamma;
        for j in sites {
            b.lindblad(p.kappa - g2 * g2 / p.kappa, &[(Op::A(j), ONE)]);
            b.lindblad(1.0, &[(Op::A(j), c(p.kappa.sqrt(), 0.0)), (Op::A(j + 2), c(g2 / p.kappa.sqrt(), 0.0))]);
        }
    }
}

/// Dissipative bosonic Kitaev chain with BKC Hamiltonian, on-site parametric
/// drive μ, local loss and next-nearest-neighbour correlated loss Γ.
pub fn make_dbkc(j: f64, delta: f64, mu: f64, kappa: f64, gamma: f64) -> Result<BulkModel> {
    if !(j >= delta && delta >= 0.0) {
        return Err(Error::Parameter(format!("DBKC requires J >= Δ >= 0 (J = {j}, Δ = {delta})")));
    }
    if !(kappa >= 2.0 * gamma && gamma >= 0.0) {
        return Err(Error::Parameter(format!("DBKC is ill-defined for κ < 2Γ (κ = {kappa}, Γ = {gamma})")));
    }
    make_dbkc_unchecked(DbkcParams { j, delta, mu, kappa, gamma })
}

/// DBKC without the admissibility checks, so that ill-defined parameter
/// regions (non-positive GKLS matrix) can be assembled and diagnosed.
pub fn make_dbkc_unchecked(p: DbkcParams) -> Result<BulkModel> {
    let mut b = bulk_builder(2);
    let n = b.n as i64;
    dbkc_terms(&mut b, &p, 0..n);
    b.bulk_blocks(2)
}

/// Fermionic Kitaev chain BdG blocks h_0 = diag(−μ, μ), h_1 = [[−J, Δ], [−Δ, J]].
pub fn fkc_blocks(j: f64, delta: f64, mu: f64) -> (CMat, CMat) {
    let mut h0 = linalg::zeros(2, 2);
    h0[(0, 0)] = c(-mu, 0.0);
    h0[(1, 1)] = c(mu, 0.0);
    let mut h1 = linalg::zeros(2, 2);
    h1[(0, 0)] = c(-j, 0.0);
    h1[(0, 1)] = c(delta, 0.0);
    h1[(1, 0)] = c(-delta, 0.0);
    h1[(1, 1)] = c(j, 0.0);
    (h0, h1)
}

/// Lowest eigenvalue of the FKC Bloch Hamiltonian, a lower bound for the
/// spectrum of every finite open or periodic chain.
pub fn fkc_min_eigenvalue(j: f64, delta: f64, mu: f64) -> f64 {
    let (h0, h1) = fkc_blocks(j, delta, mu);
    let nk = 4096;
    let mut min = f64::INFINITY;
    for q in 0..nk {
        let k = 2.0 * std::f64::consts::PI * q as f64 / nk as f64;
        let e = C::from_polar(1.0, k);
        let hk = Mat::from_fn(2, 2, |a, b| h0[(a, b)] + h1[(a, b)] * e + h1[(b, a)].conj() * e.conj());
        let ev = linalg::eigvalsh(&hk).expect("2x2 hermitian");
        min = min.min(ev[0]);
    }
    min
}

/// Purely dissipative Majorana chain: H = 0 and M = H_FKC + α·1.
pub fn make_pdmc(j_f: f64, delta_f: f64, mu_f: f64, alpha_shift: f64) -> Result<BulkModel> {
    let need = -fkc_min_eigenvalue(j_f, delta_f, mu_f);
    if alpha_shift < need - 1e-9 {
        return Err(Error::Parameter(format!(
            "α = {alpha_shift} is below |min eig H_FKC| = {need:.6}; M would not be PSD"
        )));
    }
    let (h0, h1) = fkc_blocks(j_f, delta_f, mu_f);
    let z = linalg::zeros(2, 2);
    let m0 = linalg::shift(&h0, c(alpha_shift, 0.0));
    BulkModel::new(1, 1, vec![z.clone(), z.clone(), z], vec![linalg::adjoint(&h1), m0, h1])
}

/// Smallest shift α making the PDMC GKLS matrix positive for every N.
pub fn pdmc_default_shift(j_f: f64, delta_f: f64, mu_f: f64) -> f64 {
    (-fkc_min_eigenvalue(j_f, delta_f, mu_f)).max(0.0) + 1e-6
}

/// Finite FKC BdG matrix under the given boundary condition.
pub fn fkc_bdg(j: f64, delta: f64, mu: f64, bc: BoundaryCondition, n: usize) -> Result<CMat> {
    let (h0, h1) = fkc_blocks(j, delta, mu);
    let z = linalg::zeros(2, 2);
    let model = BulkModel::new(1, 1, vec![z.clone(), z.clone(), z], vec![linalg::adjoint(&h1), h0, h1])?;
    let sys = lattice::assemble(&model, bc, n)?;
    Ok(sys.m)
}

#[derive(Debug, Clone)]
pub struct PureSsDbkc {
    pub system: AssembledSystem,
    pub squeezing: f64,
    /// Normal-mode vectors ψ_μ of the BKC Hamiltonian, μ = 1..N.
    pub normal_modes: Vec<Vec<C>>,
}

/// BKC Hamiltonian with site-dependent squeezed loss 2κ Σ_j 𝒟[α_j(r)],
/// α_j(r) = cosh(jr)a_j − sinh(jr)a_j†, tanh r = Δ/J, under OBC.
pub fn make_pure_ss_dbkc(j: f64, delta: f64, kappa: f64, n: usize) -> Result<PureSsDbkc> {
    if !(j > delta && delta >= 0.0) {
        return Err(Error::Parameter(format!("pure-SS DBKC requires J > Δ >= 0 (J = {j}, Δ = {delta})")));
    }
    if !(kappa > 0.0) {
        return Err(Error::Parameter("pure-SS DBKC requires κ > 0".into()));
    }
    if n < 2 {
        return Err(Error::Parameter("pure-SS DBKC requires N >= 2".into()));
    }
    let r = (delta / j).atanh();
    let mut b = ChainBuilder::new(n, false);
    let p = DbkcParams { j, delta, mu: 0.0, kappa: 0.0, gamma: 0.0 };
    dbkc_terms(&mut b, &p, 0..n as i64);
    for s in 0..n as i64 {
        let x = (s + 1) as f64 * r;
        b.lindblad(2.0 * kappa, &[(Op::A(s), c(x.cosh(), 0.0)), (Op::Ad(s), c(-x.sinh(), 0.0))]);
    }
    let (h, m) = b.finish()?;
    let system = AssembledSystem::from_matrices(BoundaryCondition::Obc, n, 1, h, m)?;
    let f = nambu::fermionic_project(&system.m)?;
    let t3 = nambu::pauli(nambu::Pauli::Tau3, 2 * n)?;
    let defect = linalg::max_abs(&(&f - &linalg::scale(&t3, c(kappa, 0.0))));
    if defect > 1e-10 * kappa.max(1.0) * (2.0 * n as f64 * r).exp() {
        return Err(Error::Validation(format!("F(M) deviates from κτ3 by {defect:.3e}")));
    }
    let normal_modes = pure_ss_normal_modes(j, delta, n);
    Ok(PureSsDbkc { system, squeezing: r, normal_modes })
}

/// ψ_μ = √(2/(N+1)) Σ_j i^j sin(μπj/(N+1)) α_j(r) as Nambu coefficient vectors.
pub fn pure_ss_normal_modes(j: f64, delta: f64, n: usize) -> Vec<Vec<C>> {
    let r = (delta / j).atanh();
    let norm = (2.0 / (n as f64 + 1.0)).sqrt();
    (1..=n)
        .map(|mu| {
            let mut v = vec![ZERO; 2 * n];
            for s in 1..=n {
                let amp = I.powi(s as i32) * norm * (mu as f64 * std::f64::consts::PI * s as f64 / (n as f64 + 1.0)).sin();
                let x = s as f64 * r;
                v[2 * (s - 1)] = amp.conj() * x.cosh();
                v[2 * (s - 1) + 1] = amp.conj() * x.sinh();
            }
            v
        })
        .collect()
}

/// S = (VV†)⁻¹ for V = [ψ_1 … ψ_N, τ1ψ_1* … τ1ψ_N*].
pub fn duality_metric(modes: &[Vec<C>]) -> Result<CMat> {
    linalg::inverse(&duality_metric_inverse(modes))
}

/// S⁻¹ = VV†, formed without inversion.
pub fn duality_metric_inverse(modes: &[Vec<C>]) -> CMat {
    let mut cols: Vec<Vec<C>> = modes.to_vec();
    cols.extend(modes.iter().map(|v| nambu::conjugate_vector(v)));
    let v = linalg::from_cols(&cols);
    &v * v.adjoint()
}

/// Number-symmetric chain with Hatano-Nelson hopping: onsite loss 2κ₋,
/// gain 2κ₊, coherent hopping J₊ and dissipative hopping J₋.
pub fn make_dns(j_plus: f64, j_minus: f64, kappa_minus: f64, kappa_plus: f64) -> Result<BulkModel> {
    if kappa_minus < 2.0 * j_minus.abs() {
        return Err(Error::Parameter(format!("DNS requires κ₋ >= 2|J₋| (κ₋ = {kappa_minus}, J₋ = {j_minus})")));
    }
    if !(kappa_minus >= kappa_plus && kappa_plus >= 0.0) {
        return Err(Error::Parameter("DNS requires κ₋ >= κ₊ >= 0".into()));
    }
    let mut b = bulk_builder(1);
    for s in 0..b.n as i64 {
        b.dissipator(c(2.0 * kappa_minus, 0.0), Op::A(s), Op::Ad(s));
        b.dissipator(c(2.0 * kappa_plus, 0.0), Op::Ad(s), Op::A(s));
        b.hamiltonian(c(0.5 * j_plus, 0.0), Op::Ad(s), Op::A(s + 1));
        b.hamiltonian(c(0.5 * j_plus, 0.0), Op::Ad(s + 1), Op::A(s));
        b.dissipator(c(0.0, 2.0 * j_minus), Op::A(s), Op::Ad(s + 1));
        b.dissipator(c(0.0, -2.0 * j_minus), Op::A(s + 1), Op::Ad(s));
    }
    b.bulk_blocks(1)
}

/// Double-winding chain: NN parametric drive Δ_h, onsite drive μ, onsite loss
/// 2κ₋ and gain 2κ₊, and NN incoherent pairing Δ_d.
pub fn make_ddw(delta_h: f64, delta_d: f64, mu: f64, kappa_minus: f64, kappa_plus: f64) -> Result<BulkModel> {
    if 4.0 * kappa_plus * kappa_minus < delta_d * delta_d || kappa_plus < 0.0 || kappa_minus < 0.0 {
        return Err(Error::Parameter("DDW requires 4κ₊κ₋ >= Δ_d²".into()));
    }
    if !(delta_d >= delta_h && delta_h >= 0.0) {
        return Err(Error::Parameter("DDW requires Δ_d >= Δ_h >= 0".into()));
    }
    let mut b = bulk_builder(1);
    let h = 0.5 * delta_d;
    for s in 0..b.n as i64 {
        b.hamiltonian(c(0.0, 0.5 * delta_h), Op::Ad(s), Op::Ad(s + 1));
        b.hamiltonian(c(0.0, 0.5 * mu), Op::Ad(s), Op::Ad(s));
        b.dissipator(c(2.0 * kappa_minus, 0.0), Op::A(s), Op::Ad(s));
        b.dissipator(c(2.0 * kappa_plus, 0.0), Op::Ad(s), Op::A(s));
        b.dissipator(c(h, 0.0), Op::Ad(s), Op::Ad(s + 1));
        b.dissipator(c(-h, 0.0), Op::Ad(s + 1), Op::Ad(s));
        b.dissipator(c(-h, 0.0), Op::A(s), Op::A(s + 1));
        b.dissipator(c(h, 0.0), Op::A(s + 1), Op::A(s));
    }
    b.bulk_blocks(1)
}

/// Maps a fermionic BdG matrix to a purely dissipative bosonic chain with
/// H = 0 and M = H_F + α·1, so that G = −iτ3H_F.
pub fn fermion_to_boson(h_f: &CMat, alpha_shift: f64) -> Result<(CMat, CMat)> {
    if nambu::hermiticity_defect(h_f) > nambu::VALIDATION_TOL {
        return Err(Error::Validation("H_F is not Hermitian".into()));
    }
    let f = nambu::fermionic_project(h_f)?;
    if linalg::max_abs(&(&f - h_f)) > nambu::VALIDATION_TOL * linalg::max_abs(h_f).max(1.0) {
        return Err(Error::Validation("H_F is not a fermionic BdG matrix".into()));
    }
    let m = linalg::shift(h_f, c(alpha_shift, 0.0));
    let psd = lattice::gkls_psd_check(&m)?;
    if !psd.ok {
        return Err(Error::Parameter(format!(
            "H_F + α·1 is not PSD (min eigenvalue {:.3e})",
            psd.min_eigenvalue
        )));
    }
    Ok((linalg::zeros(h_f.nrows(), h_f.ncols()), m))
}

/// Positive-τ3-norm eigenvectors of a dynamically stable G0, τ3-orthonormal.
/// Degenerate eigenvalue clusters are split by diagonalizing the τ3 Gram
/// matrix in a Euclidean-orthonormal basis of the cluster.
pub fn quasiparticle_modes(g0: &CMat) -> Result<Vec<Vec<C>>> {
    let dim = g0.nrows();
    let (vals, vecs) = linalg::eig(g0)?;
    let scale = linalg::max_abs(g0).max(1.0);
    if vals.iter().any(|v| v.im.abs() > 1e-8 * scale) {
        return Err(Error::Precondition("G0 has complex eigenvalues: the Hamiltonian is dynamically unstable".into()));
    }
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re));
    let tol = 1e-7 * scale;
    let mut modes = Vec::new();
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && vals[order[end]].re - vals[order[end - 1]].re < tol {
            end += 1;
        }
        let cluster: Vec<Vec<C>> = order[start..end].iter().map(|&k| linalg::col(&vecs, k)).collect();
        let b = linalg::from_cols(&cluster);
        let (u, s, _) = linalg::svd(&b)?;
        let smax = s.last().copied().unwrap_or(0.0);
        if s.iter().any(|&x| x < 1e-8 * smax) {
            return Err(Error::Precondition("G0 is not diagonalizable".into()));
        }
        let gram = nambu::pauli(nambu::Pauli::Tau3, dim)?;
        let k = &(u.adjoint() * &gram) * &u;
        let k = Mat::from_fn(k.nrows(), k.ncols(), |i, j| (k[(i, j)] + k[(j, i)].conj()) * 0.5);
        let (kv, kw) = linalg::eigh(&k)?;
        for (idx, &lam) in kv.iter().enumerate() {
            if lam.abs() < 1e-10 {
                return Err(Error::Precondition("zero-norm eigenvector: G0 is not dynamically stable".into()));
            }
            if lam > 0.0 {
                let w = linalg::col(&kw, idx);
                let v = linalg::matvec(&u, &w);
                modes.push(v.iter().map(|z| z / lam.sqrt()).collect());
            }
        }
        start = end;
    }
    if modes.len() != dim / 2 {
        return Err(Error::Precondition(format!(
            "found {} positive-norm modes, expected {}",
            modes.len(),
            dim / 2
        )));
    }
    Ok(modes)
}

/// Engineered dissipation M = κ(S + τ3) relaxing to the quasiparticle vacuum
/// of the stable Hamiltonian with dynamical matrix G0. Returns (H, M).
pub fn pure_ss_from_hamiltonian(g0: &CMat, kappa: f64) -> Result<(CMat, CMat)> {
    let modes = quasiparticle_modes(g0)?;
    pure_ss_from_normal_modes(g0, kappa, &modes)
}

/// As [`pure_ss_from_hamiltonian`] with an explicit choice of positive-norm
/// normal modes, selecting one vacuum when the normal modes are not unique.
pub fn pure_ss_from_normal_modes(g0: &CMat, kappa: f64, modes: &[Vec<C>]) -> Result<(CMat, CMat)> {
    if !(kappa > 0.0) {
        return Err(Error::Parameter("κ must be positive".into()));
    }
    let dim = g0.nrows();
    if modes.len() != dim / 2 {
        return Err(Error::Dimension("need one normal mode per bosonic mode".into()));
    }
    let h = nambu::tau3_left(g0);
    let s = duality_metric(modes)?;
    let s = Mat::from_fn(dim, dim, |i, j| (s[(i, j)] + s[(j, i)].conj()) * 0.5);
    let t3 = nambu::pauli(nambu::Pauli::Tau3, dim)?;
    let m = linalg::scale(&(&s + &t3), c(kappa, 0.0));
    Ok((h, m))
}

#[derive(Debug, Clone)]
pub struct IsospectralReport {
    /// Diagonal of Λ(π/2) = diag(e^{−iπ/2}, …, e^{−iNπ/2}) ⊗ 1_2.
    pub lambda: Vec<C>,
    /// max |Λ G_PDC Λ⁻¹ − i G_DBKC|.
    pub entry_error: f64,
    /// Multiset distance between σ(G_PDC) and i·σ(G_DBKC).
    pub spectrum_error: f64,
}

/// Checks Λ(π/2) G_PDC(μ_F = 0, J_F = −J/2, Δ_F = −Δ/2) Λ(π/2)⁻¹ = i G_DBKC(κ = 0, J, Δ).
pub fn pdmc_dbkc_isospectral_map(n: usize, j: f64, delta: f64) -> Result<IsospectralReport> {
    let shift = pdmc_default_shift(-j / 2.0, -delta / 2.0, 0.0);
    let pdc = lattice::assemble(&make_pdmc(-j / 2.0, -delta / 2.0, 0.0, shift)?, BoundaryCondition::Obc, n)?;
    let dbkc = make_dbkc_unchecked(DbkcParams { j, delta, mu: 0.0, kappa: 0.0, gamma: 0.0 })?;
    let dbkc = lattice::assemble(&dbkc, BoundaryCondition::Obc, n)?;
    let lambda: Vec<C> = (0..2 * n)
        .map(|k| C::from_polar(1.0, -std::f64::consts::FRAC_PI_2 * (k / 2 + 1) as f64))
        .collect();
    let conjugated = Mat::from_fn(2 * n, 2 * n, |a, b| lambda[a] * pdc.g[(a, b)] / lambda[b]);
    let target = linalg::scale(&dbkc.g, I);
    let entry_error = linalg::max_abs(&(&conjugated - &target));
    let sp = linalg::eigvals(&pdc.g)?;
    let sd: Vec<C> = linalg::eigvals(&dbkc.g)?.iter().map(|z| z * I).collect();
    Ok(IsospectralReport { lambda, entry_error, spectrum_error: linalg::multiset_distance(&sp, &sd) })
}

/// Named presets with their parameters, shared by the CLI and the tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Preset {
    Dbkc { j: f64, delta: f64, mu: f64, kappa: f64, gamma: f64 },
    Pdmc { j: f64, delta: f64, mu: f64, alpha: f64 },
    DbkcPureSs { j: f64, delta: f64, kappa: f64 },
    Dns { j_plus: f64, j_minus: f64, kappa_minus: f64, kappa_plus: f64 },
    Ddw { delta_h: f64, delta_d: f64, mu: f64, kappa_minus: f64, kappa_plus: f64 },
}

impl Preset {
    /// Bulk model, or None for the pure-SS DBKC which has no bulk form.
    pub fn bulk(&self) -> Result<Option<BulkModel>> {
        Ok(Some(match *self {
            Preset::Dbkc { j, delta, mu, kappa, gamma } => make_dbkc(j, delta, mu, kappa, gamma)?,
            Preset::Pdmc { j, delta, mu, alpha } => make_pdmc(j, delta, mu, alpha)?,
            Preset::DbkcPureSs { .. } => return Ok(None),
            Preset::Dns { j_plus, j_minus, kappa_minus, kappa_plus } => {
                make_dns(j_plus, j_minus, kappa_minus, kappa_plus)?
            }
            Preset::Ddw { delta_h, delta_d, mu, kappa_minus, kappa_plus } => {
                make_ddw(delta_h, delta_d, mu, kappa_minus, kappa_plus)?
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{assemble, bloch_symbol, gkls_psd_check, rapidity_symbol};
    use crate::nambu::{Pauli, VALIDATION_TOL};

    fn sigma1() -> CMat {
        nambu::pauli(Pauli::Tau1, 2).unwrap()
    }

    fn max_diff(a: &CMat, b: &CMat) -> f64 {
        linalg::max_abs(&(a - b))
    }

    #[test]
    fn dbkc_symbol() {
        let (j, d, mu, k, g) = (2.0, 0.5, 0.1, 0.3, 0.1);
        let model = make_dbkc(j, d, mu, k, g).unwrap();
        for &q in &[0.0, 0.37, 1.2, -2.5] {
            let sym = rapidity_symbol(&model, q);
            let diag = c(-k - 2.0 * g * (2.0 * q).cos(), -j * q.sin());
            let off = c(0.0, 0.0) + C::new(0.0, 0.0);
            let want = Mat::from_fn(2, 2, |a, b| if a == b { diag } else { off + c(mu + d * q.cos(), 0.0) });
            assert!(max_diff(&sym, &want) < 1e-13, "k = {q}");
        }
    }

    #[test]
    fn dbkc_obc_hand_assembly() {
        // N = 3 OBC, Γ = 0: G = τ3H − iκ, with H from the BKC couplings
        let (j, d, k) = (2.0, 0.5, 0.3);
        let sys = assemble(&make_dbkc(j, d, 0.0, k, 0.0).unwrap(), BoundaryCondition::Obc, 3).unwrap();
        let mut want = linalg::zeros(6, 6);
        for s in 0..3 {
            want[(2 * s, 2 * s)] = c(0.0, -k);
            want[(2 * s + 1, 2 * s + 1)] = c(0.0, -k);
        }
        for s in 0..2 {
            let (a0, c0, a1, c1) = (2 * s, 2 * s + 1, 2 * s + 2, 2 * s + 3);
            // H_{a(s+1),a(s)} = iJ/2 and H_{a(s+1),c(s)} = iΔ/2 with their bosonic partners
            let hop = c(0.0, j / 2.0);
            let pair = c(0.0, d / 2.0);
            want[(a1, a0)] = hop;
            want[(a0, a1)] = hop.conj();
            want[(c1, c0)] = -hop.conj();
            want[(c0, c1)] = -hop;
            want[(a1, c0)] = pair;
            want[(a0, c1)] = pair;
            want[(c0, a1)] = -pair.conj();
            want[(c1, a0)] = -pair.conj();
        }
        assert!(max_diff(&sys.g, &want) < 1e-14, "{:?}", sys.g);
    }

    #[test]
    fn dbkc_psd_boundary() {
        let ok = make_dbkc(2.0, 0.5, 0.0, 0.3, 0.15).unwrap();
        assert!(gkls_psd_check(&assemble(&ok, BoundaryCondition::Obc, 12).unwrap().m).unwrap().ok);
        let bad = make_dbkc_unchecked(DbkcParams { j: 2.0, delta: 0.5, mu: 0.0, kappa: 0.3, gamma: 0.2 }).unwrap();
        assert!(!gkls_psd_check(&assemble(&bad, BoundaryCondition::Obc, 12).unwrap().m).unwrap().ok);
        assert!(make_dbkc(2.0, 0.5, 0.0, 0.3, 0.2).is_err());
    }

    #[test]
    fn pdmc_symbol() {
        let (j, d, mu) = (1.0, 2.0, -0.5);
        let model = make_pdmc(j, d, mu, pdmc_default_shift(j, d, mu)).unwrap();
        for &q in &[0.0, 0.37, 1.2, -2.5] {
            let sym = rapidity_symbol(&model, q);
            let s1 = sigma1();
            let want = Mat::from_fn(2, 2, |a, b| {
                let id = if a == b { c(mu + 2.0 * j * q.cos(), 0.0) } else { ZERO };
                id + s1[(a, b)] * c(0.0, -2.0 * d * q.sin())
            });
            assert!(max_diff(&sym, &want) < 1e-13);
        }
        let sys = assemble(&model, BoundaryCondition::Obc, 10).unwrap();
        assert!(max_diff(&sys.g_tilde, &linalg::scale(&sys.g, c(-1.0, 0.0))) < 1e-14);
        assert!(make_pdmc(j, d, mu, 0.1).is_err());
    }

    #[test]
    fn fkc_zero_mode_at_odd_n() {
        let h = fkc_bdg(1.0, 0.6, 0.0, BoundaryCondition::Obc, 9).unwrap();
        let ev = linalg::eigvalsh(&h).unwrap();
        assert!(ev.iter().any(|e| e.abs() < 1e-12));
    }

    #[test]
    fn fermion_to_boson_matches_pdmc() {
        let (j, d, mu) = (1.0, 1.0, -0.5);
        let a = pdmc_default_shift(j, d, mu);
        let hf = fkc_bdg(j, d, mu, BoundaryCondition::Obc, 8).unwrap();
        let (h, m) = fermion_to_boson(&hf, a).unwrap();
        let sys = AssembledSystem::from_matrices(BoundaryCondition::Obc, 8, 1, h, m).unwrap();
        let direct = assemble(&make_pdmc(j, d, mu, a).unwrap(), BoundaryCondition::Obc, 8).unwrap();
        assert!(max_diff(&sys.g, &direct.g) < 1e-14);
        let g_expected = linalg::scale(&nambu::tau3_left(&hf), -I);
        assert!(max_diff(&sys.g, &g_expected) < 1e-14);
        assert!(fermion_to_boson(&hf, 0.0).is_err());
    }

    #[test]
    fn pure_ss_dbkc_structure() {
        let (j, d, k, n) = (2.0, 0.5, 0.3, 10);
        let p = make_pure_ss_dbkc(j, d, k, n).unwrap();
        let std = assemble(&make_dbkc(j, d, 0.0, k, 0.0).unwrap(), BoundaryCondition::Obc, n).unwrap();
        assert!(max_diff(&p.system.g, &std.g) < 1e-12);
        let ev = linalg::eigvalsh(&p.system.m).unwrap();
        let scale = ev.last().unwrap().abs();
        assert_eq!(ev.iter().filter(|e| e.abs() < 1e-10 * scale).count(), n);
        // ψ_μ are τ3-orthonormal eigenvectors of G at κ = 0
        let g0 = linalg::shift(&p.system.g, c(0.0, k));
        for (a, psi) in p.normal_modes.iter().enumerate() {
            for (b, phi) in p.normal_modes.iter().enumerate() {
                let want = if a == b { ONE } else { ZERO };
                assert!((nambu::tau3_form(psi, phi) - want).norm() < 1e-10);
            }
            let gp = linalg::matvec(&g0, psi);
            let w = linalg::dot(psi, &gp) / linalg::dot(psi, psi);
            let res: Vec<C> = gp.iter().zip(psi).map(|(x, y)| x - y * w).collect();
            assert!(linalg::vnorm(&res) < 1e-9 * linalg::vnorm(psi));
        }
        assert!(make_pure_ss_dbkc(1.0, 1.0, 0.3, 5).is_err());
    }

    #[test]
    fn single_oscillator_pure_ss_is_plain_loss() {
        let mut h = linalg::zeros(2, 2);
        h[(0, 0)] = c(1.3, 0.0);
        h[(1, 1)] = c(1.3, 0.0);
        let g0 = nambu::tau3_left(&h);
        let k = 0.4;
        let (_, m) = pure_ss_from_hamiltonian(&g0, k).unwrap();
        let mut want = linalg::zeros(2, 2);
        want[(0, 0)] = c(2.0 * k, 0.0);
        assert!(max_diff(&m, &want) < 1e-12);
    }

    #[test]
    fn unstable_hamiltonian_rejected() {
        // single-mode squeezing beyond the stability threshold
        let mut h = linalg::zeros(2, 2);
        h[(0, 0)] = c(0.5, 0.0);
        h[(1, 1)] = c(0.5, 0.0);
        h[(0, 1)] = c(1.0, 0.0);
        h[(1, 0)] = c(1.0, 0.0);
        let g0 = nambu::tau3_left(&h);
        assert!(matches!(pure_ss_from_hamiltonian(&g0, 0.3), Err(Error::Precondition(_))));
    }

    #[test]
    fn dns_and_ddw_symbols() {
        let (jp, jm, km, kp) = (1.0, 0.25, 0.5, 0.2);
        let model = make_dns(jp, jm, km, kp).unwrap();
        for &q in &[0.3, 1.1, -2.0] {
            let sym = rapidity_symbol(&model, q);
            let lam = c(-(km - kp) + 2.0 * jm * q.sin(), 2.0 * jp * q.cos());
            let lam_m = c(-(km - kp) - 2.0 * jm * q.sin(), -2.0 * jp * q.cos());
            assert!((sym[(1, 1)] - lam).norm() < 1e-13);
            assert!((sym[(0, 0)] - lam_m).norm() < 1e-13);
            assert!(sym[(0, 1)].norm() < 1e-15 && sym[(1, 0)].norm() < 1e-15);
        }
        let (dh, dd, mu, km, kp) = (0.3, 0.5, 0.1, 0.5, 0.3);
        let model = make_ddw(dh, dd, mu, km, kp).unwrap();
        for &q in &[0.3, 1.1, -2.0] {
            let sym = rapidity_symbol(&model, q);
            let off = c(mu + dh * q.cos(), dd * q.sin());
            let want = Mat::from_fn(2, 2, |a, b| if a == b { c(-(km - kp), 0.0) } else { off });
            assert!(max_diff(&sym, &want) < 1e-13);
        }
        assert!(make_ddw(0.3, 0.5, 0.0, 0.1, 0.1).is_err());
        assert!(make_dns(1.0, 0.3, 0.5, 0.0).is_err());
    }

    #[test]
    fn isospectral_identity() {
        let rep = pdmc_dbkc_isospectral_map(10, 2.0, 0.5).unwrap();
        assert!(rep.entry_error < 1e-12);
        assert!(rep.spectrum_error < 1e-10);
        for l in &rep.lambda {
            assert!((l.powi(4) - ONE).norm() < 1e-13);
        }
    }

    #[test]
    fn symbol_conjugation_all_models() {
        let models = vec![
            make_dbkc(2.0, 0.5, 0.2, 0.3, 0.1).unwrap(),
            make_pdmc(1.0, 2.0, -0.5, 5.0).unwrap(),
            make_dns(1.0, 0.25, 0.5, 0.1).unwrap(),
            make_ddw(0.3, 0.5, 0.1, 0.5, 0.3).unwrap(),
        ];
        let t1 = sigma1();
        for m in &models {
            for &q in &[0.11, -0.7, 2.2, 3.0] {
                let g = bloch_symbol(m, q);
                let gm = bloch_symbol(m, -q);
                let rhs = linalg::scale(&(&(&t1 * &gm) * &t1), c(-1.0, 0.0));
                assert!(max_diff(&linalg::conj(&g), &rhs) < 1e-13);
            }
            assert_eq!(&BulkModel::from_json(&m.to_json()).unwrap(), m);
        }
        let dns = assemble(&models[2], BoundaryCondition::Obc, 7).unwrap();
        let t3 = nambu::pauli(Pauli::Tau3, 14).unwrap();
        assert_eq!(linalg::max_abs(&(&dns.g * &t3 - &t3 * &dns.g)), 0.0);
        let _ = VALIDATION_TOL;
    }
}
