//! PT-TEBD propagation: an augmented MPS over system sites, with two-site
//! Trotter gates interleaved with process-tensor cores at bath-coupled
//! sites; plus closed-chain pure-state TEBD and the one-step-memory Markov
//! mode.
//!
//! Per step the schedule is the symmetric splitting: half system step,
//! one bath core per coupled site, half system step. Intermediate states
//! are read out by closing every open bath leg with its trace-cap vector.

use ndarray::{Array1, Array2, Array3, Array4};
use num_complex::Complex64 as C64;
use std::io::Write;
use std::time::Instant;

use crate::bath::{eta_coefficients, EtaTable};
use crate::error::{Error, Result};
use crate::liouville::{
    expm, hamiltonian_propagator, kron, liouvillian, DensityMatrix,
};
use crate::measures::{occupations, partial_trace_keep};
use crate::models::{
    coupling_rotation_x, identity2, pauli_x, pauli_z, AAChainModel, DrivenQubitModel,
    TwoQubitModel,
};
use crate::process_tensor::{build_process_tensor, ProcessTensor};
use crate::tensor::{truncated_svd_mat, TruncationPolicy};

const ZERO: C64 = C64::new(0.0, 0.0);

/// How the two-qubit system step is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    /// One composite propagator of the full two-qubit Hamiltonian
    /// (exact system step, no intra-system Trotter error).
    ExactComposite,
    /// On-site terms and the exchange bond split at second order.
    LocalBondSplit,
}

/// Which single-qubit operator couples to the bath.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitCoupling {
    SigmaX,
    SigmaZ,
}

/// System side of an evolution: Hamiltonian schedule plus the coupling
/// basis at each bath-attachable site.
#[derive(Debug, Clone)]
pub enum SystemModel {
    SingleQubit {
        hamiltonian: Array2<C64>,
        coupling: QubitCoupling,
    },
    TwoQubit {
        model: TwoQubitModel,
        mode: GateMode,
    },
    Chain(AAChainModel),
    DrivenQubit(DrivenQubitModel),
}

impl SystemModel {
    pub fn n_sites(&self) -> usize {
        match self {
            SystemModel::SingleQubit { .. } | SystemModel::DrivenQubit(_) => 1,
            SystemModel::TwoQubit { .. } => 2,
            SystemModel::Chain(c) => c.n_sites,
        }
    }

    fn time_dependent(&self) -> bool {
        matches!(self, SystemModel::DrivenQubit(_))
    }

    /// Eigenvector matrix of the coupling operator at `site` (1-based);
    /// identity when the coupling is already diagonal.
    fn coupling_frame(&self, site: usize) -> Array2<C64> {
        match self {
            SystemModel::SingleQubit { coupling, .. } => match coupling {
                QubitCoupling::SigmaX => coupling_rotation_x(),
                QubitCoupling::SigmaZ => identity2(),
            },
            SystemModel::TwoQubit { .. } => coupling_rotation_x(),
            SystemModel::Chain(_) | SystemModel::DrivenQubit(_) => {
                let _ = site;
                identity2()
            }
        }
    }

    /// Gate sequence for one half of the step starting at `t0`; the second
    /// half is applied in mirrored order. For the driven qubit the two
    /// halves integrate different time windows of the drive.
    fn half_plan(&self, t0: f64, dt: f64, second: bool) -> Result<Vec<Gate>> {
        match self {
            SystemModel::SingleQubit { hamiltonian, .. } => Ok(vec![Gate::One {
                site: 0,
                mat: one_site_liouville_gate(hamiltonian, 0.5 * dt)?,
            }]),
            SystemModel::DrivenQubit(m) => {
                // midpoint rule: re-exponentiate H(t) at the center of the
                // half window (second-order accurate in dt)
                let start = t0 + if second { 0.5 * dt } else { 0.0 };
                let t_mid = start + 0.25 * dt;
                let u = hamiltonian_propagator(&m.hamiltonian(t_mid), 0.5 * dt)?;
                let gate = kron(&u, &u.mapv(|z| z.conj()));
                Ok(vec![Gate::One { site: 0, mat: gate }])
            }
            SystemModel::TwoQubit { model, mode } => match mode {
                GateMode::ExactComposite => Ok(vec![Gate::Two {
                    bond: 0,
                    mat: two_site_liouville_gate(&model.hamiltonian(), 0.5 * dt)?,
                }]),
                GateMode::LocalBondSplit => {
                    let g1 = one_site_liouville_gate(
                        &pauli_z().mapv(|z| z * (0.5 * model.omega1)),
                        0.5 * dt,
                    )?;
                    let g2 = one_site_liouville_gate(
                        &pauli_z().mapv(|z| z * (0.5 * model.omega2)),
                        0.5 * dt,
                    )?;
                    let bond = kron(&pauli_x(), &pauli_x()).mapv(|z| z * model.j);
                    let gb = two_site_liouville_gate(&bond, 0.5 * dt)?;
                    Ok(vec![
                        Gate::One { site: 0, mat: g1 },
                        Gate::One { site: 1, mat: g2 },
                        Gate::Two { bond: 0, mat: gb },
                    ])
                }
            },
            SystemModel::Chain(chain) => {
                let mut plan = Vec::new();
                for parity in [1usize, 0] {
                    for bond in (1..chain.n_sites).filter(|b| b % 2 == parity) {
                        plan.push(Gate::Two {
                            bond: bond - 1,
                            mat: two_site_liouville_gate(
                                &chain.bond_hamiltonian(bond)?,
                                0.5 * dt,
                            )?,
                        });
                    }
                }
                Ok(plan)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Gate {
    /// Single-site gate over the physical leg (p x p).
    One { site: usize, mat: Array2<C64> },
    /// Two-site gate in site-major ordering, acting on 0-based `bond`.
    Two { bond: usize, mat: Array2<C64> },
}

/// Single-site Liouville half-step `exp(L_H t)` (d^2 x d^2).
fn one_site_liouville_gate(h: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let l = liouvillian(h)?;
    expm(&l.matrix().mapv(|z| z * t))
}

/// Two-site Liouville gate permuted from row-major vectorization
/// (rows a, cols b of the pair) to site-major pair ordering
/// (s_i = a_i d + b_i for each site).
fn two_site_liouville_gate(h2: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let d = 2usize;
    if h2.nrows() != d * d || h2.ncols() != d * d {
        return Err(Error::Shape(format!(
            "two-site Hamiltonian must be {0}x{0}, got {1}x{2}",
            d * d,
            h2.nrows(),
            h2.ncols()
        )));
    }
    let l = liouvillian(h2)?;
    let u = expm(&l.matrix().mapv(|z| z * t))?;
    let dd = d * d;
    let mut g = Array2::<C64>::zeros((dd * dd, dd * dd));
    for ai in 0..d {
        for aj in 0..d {
            for bi in 0..d {
                for bj in 0..d {
                    let row_vec = (ai * d + aj) * dd + (bi * d + bj);
                    let row_site = (ai * d + bi) * dd + (aj * d + bj);
                    for ci in 0..d {
                        for cj in 0..d {
                            for ei in 0..d {
                                for ej in 0..d {
                                    let col_vec = (ci * d + cj) * dd + (ei * d + ej);
                                    let col_site = (ci * d + ei) * dd + (cj * d + ej);
                                    g[(row_site, col_site)] = u[(row_vec, col_vec)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(g)
}

/// Two-site pure-state gate `exp(-i H t)`; the Hilbert pair index is
/// already site-major.
fn two_site_pure_gate(h2: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    hamiltonian_propagator(h2, t)
}

/// MPS over system sites; tensor legs `(left, phys, bath, right)` with the
/// bath leg of dimension 1 at uncoupled sites and at t = 0.
#[derive(Debug, Clone)]
pub struct AugmentedMps {
    pub tensors: Vec<Array4<C64>>,
    pub phys_dim: usize,
}

impl AugmentedMps {
    /// Exact MPS factorization of a dense site-major vector of length
    /// `phys_dim^n_sites`.
    pub fn from_dense(v: &Array1<C64>, n_sites: usize, phys_dim: usize) -> Result<Self> {
        let dim = phys_dim.pow(n_sites as u32);
        if v.len() != dim {
            return Err(Error::Shape(format!(
                "vector length {} is not {phys_dim}^{n_sites}",
                v.len()
            )));
        }
        let exact = TruncationPolicy::exact();
        let mut carry =
            Array2::from_shape_vec((1, dim), v.iter().cloned().collect()).expect("shape");
        let mut tensors = Vec::with_capacity(n_sites);
        for _ in 0..n_sites - 1 {
            let rows = carry.nrows() * phys_dim;
            let cols = carry.ncols() / phys_dim;
            let m = Array2::from_shape_vec((rows, cols), carry.iter().cloned().collect())
                .expect("shape");
            let (u, s, vt, _) = truncated_svd_mat(m, &exact)?;
            let chi = s.len();
            let mut t = Array4::<C64>::zeros((rows / phys_dim, phys_dim, 1, chi));
            for r in 0..rows {
                for c in 0..chi {
                    t[(r / phys_dim, r % phys_dim, 0, c)] = u[(r, c)];
                }
            }
            tensors.push(t);
            let mut sv = vt;
            for (i, &sing) in s.iter().enumerate() {
                for x in sv.row_mut(i).iter_mut() {
                    *x *= sing;
                }
            }
            carry = sv;
        }
        let chi = carry.nrows();
        let mut last = Array4::<C64>::zeros((chi, phys_dim, 1, 1));
        for l in 0..chi {
            for p in 0..phys_dim {
                last[(l, p, 0, 0)] = carry[(l, p)];
            }
        }
        tensors.push(last);
        Ok(Self { tensors, phys_dim })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    /// Largest bond (MPS or bath) currently held.
    pub fn max_bond(&self) -> usize {
        self.tensors
            .iter()
            .flat_map(|t| {
                let (_, _, b, r) = t.dim();
                [b, r]
            })
            .max()
            .unwrap_or(1)
    }

    fn apply_one_site(&mut self, site: usize, gate: &Array2<C64>) {
        let t = &self.tensors[site];
        let (l, p, b, r) = t.dim();
        let mut out = Array4::<C64>::zeros((l, p, b, r));
        for li in 0..l {
            for q in 0..p {
                for bi in 0..b {
                    for ri in 0..r {
                        let mut acc = ZERO;
                        for pi in 0..p {
                            acc += gate[(q, pi)] * t[(li, pi, bi, ri)];
                        }
                        out[(li, q, bi, ri)] = acc;
                    }
                }
            }
        }
        self.tensors[site] = out;
    }

    /// Apply a site-major two-site gate on `(bond, bond+1)` and re-split
    /// with a truncating SVD; returns the discarded weight.
    fn apply_two_site(
        &mut self,
        bond: usize,
        gate: &Array2<C64>,
        policy: &TruncationPolicy,
    ) -> Result<f64> {
        let p = self.phys_dim;
        let (l1, _, b1, r1) = self.tensors[bond].dim();
        let (l2, _, b2, r2) = self.tensors[bond + 1].dim();
        debug_assert_eq!(r1, l2);
        // theta0 rows (p1 p2), cols (l1 b1 b2 r2)
        let cols = l1 * b1 * b2 * r2;
        let mut theta0 = Array2::<C64>::zeros((p * p, cols));
        {
            let a = &self.tensors[bond];
            let b = &self.tensors[bond + 1];
            for li in 0..l1 {
                for p1 in 0..p {
                    for bb1 in 0..b1 {
                        for k in 0..r1 {
                            let av = a[(li, p1, bb1, k)];
                            if av == ZERO {
                                continue;
                            }
                            for p2 in 0..p {
                                for bb2 in 0..b2 {
                                    for ri in 0..r2 {
                                        let col = ((li * b1 + bb1) * b2 + bb2) * r2 + ri;
                                        theta0[(p1 * p + p2, col)] +=
                                            av * b[(k, p2, bb2, ri)];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let theta1 = gate.dot(&theta0);
        // regroup to (l1 q1 b1) x (q2 b2 r2)
        let mut m = Array2::<C64>::zeros((l1 * p * b1, p * b2 * r2));
        for li in 0..l1 {
            for q1 in 0..p {
                for bb1 in 0..b1 {
                    for q2 in 0..p {
                        for bb2 in 0..b2 {
                            for ri in 0..r2 {
                                let col = ((li * b1 + bb1) * b2 + bb2) * r2 + ri;
                                m[(
                                    (li * p + q1) * b1 + bb1,
                                    (q2 * b2 + bb2) * r2 + ri,
                                )] = theta1[(q1 * p + q2, col)];
                            }
                        }
                    }
                }
            }
        }
        let total: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        let (u, s, vt, dw) = truncated_svd_mat(m, policy)?;
        if policy.epsilon() == 0.0
            && policy.max_bond().is_some()
            && dw > 1e-14 * total.max(1e-300)
        {
            return Err(Error::Capacity(format!(
                "MPS bond exceeded the hard cap {} with epsilon = 0; \
                 increase epsilon to allow lossy compression",
                policy.max_bond().unwrap()
            )));
        }
        let chi = s.len();
        let mut a = Array4::<C64>::zeros((l1, p, b1, chi));
        for li in 0..l1 {
            for q1 in 0..p {
                for bb1 in 0..b1 {
                    for c in 0..chi {
                        a[(li, q1, bb1, c)] = u[((li * p + q1) * b1 + bb1, c)];
                    }
                }
            }
        }
        let mut sv = vt;
        for (i, &sing) in s.iter().enumerate() {
            for x in sv.row_mut(i).iter_mut() {
                *x *= sing;
            }
        }
        let mut b = Array4::<C64>::zeros((chi, p, b2, r2));
        for c in 0..chi {
            for q2 in 0..p {
                for bb2 in 0..b2 {
                    for ri in 0..r2 {
                        b[(c, q2, bb2, ri)] = sv[(c, (q2 * b2 + bb2) * r2 + ri)];
                    }
                }
            }
        }
        self.tensors[bond] = a;
        self.tensors[bond + 1] = b;
        Ok(dw)
    }

    /// Apply a bath step operator `W[b, p, b_out, p_out]` at `site`; the
    /// bath leg changes dimension from `b` to `b_out`.
    fn apply_bath_operator(&mut self, site: usize, w: &Array4<C64>) -> Result<()> {
        let t = &self.tensors[site];
        let (l, p, b, r) = t.dim();
        let (wb, wp, b_out, p_out) = w.dim();
        if wb != b || wp != p || p_out != p {
            return Err(Error::Shape(format!(
                "bath operator shape ({wb},{wp},{b_out},{p_out}) does not match \
                 site tensor ({l},{p},{b},{r})"
            )));
        }
        let mut out = Array4::<C64>::zeros((l, p, b_out, r));
        for li in 0..l {
            for ri in 0..r {
                for bo in 0..b_out {
                    for po in 0..p {
                        let mut acc = ZERO;
                        for bi in 0..b {
                            for pi in 0..p {
                                acc += t[(li, pi, bi, ri)] * w[(bi, pi, bo, po)];
                            }
                        }
                        out[(li, po, bo, ri)] = acc;
                    }
                }
            }
        }
        self.tensors[site] = out;
        Ok(())
    }

    /// Contract to a dense site-major vector after closing every bath leg
    /// with the given cap (None means the trivial dimension-1 leg).
    fn to_dense(&self, caps: &[Option<&Array1<C64>>]) -> Result<Array1<C64>> {
        let p = self.phys_dim;
        let mut acc = Array2::<C64>::ones((1, 1));
        for (i, t) in self.tensors.iter().enumerate() {
            let (l, _, b, r) = t.dim();
            let cap: Array1<C64> = match caps.get(i).and_then(|c| *c) {
                Some(c) => {
                    if c.len() != b {
                        return Err(Error::Shape(format!(
                            "cap length {} does not match bath leg {b} at site {}",
                            c.len(),
                            i + 1
                        )));
                    }
                    c.clone()
                }
                None => {
                    if b != 1 {
                        return Err(Error::Shape(format!(
                            "site {} has an open bath leg of dimension {b}",
                            i + 1
                        )));
                    }
                    Array1::ones(1)
                }
            };
            let rows = acc.nrows();
            let mut next = Array2::<C64>::zeros((rows * p, r));
            for x in 0..rows {
                for li in 0..l {
                    let av = acc[(x, li)];
                    if av == ZERO {
                        continue;
                    }
                    for pi in 0..p {
                        for ri in 0..r {
                            let mut site_val = ZERO;
                            for bi in 0..b {
                                site_val += t[(li, pi, bi, ri)] * cap[bi];
                            }
                            next[(x * p + pi, ri)] += av * site_val;
                        }
                    }
                }
            }
            acc = next;
        }
        Ok(Array1::from_iter(acc.column(0).iter().cloned()))
    }
}

/// Convert a full density matrix over `n` qubits to the site-major
/// Liouville vector (pairs `(a_i, b_i)` grouped per site).
fn dm_to_site_major(rho: &DensityMatrix, n: usize) -> Array1<C64> {
    let dim = 1usize << n;
    let m = rho.matrix();
    let mut v = Array1::<C64>::zeros(dim * dim);
    for a in 0..dim {
        for b in 0..dim {
            let mut idx = 0usize;
            for site in 0..n {
                let ai = (a >> (n - 1 - site)) & 1;
                let bi = (b >> (n - 1 - site)) & 1;
                idx = idx * 4 + (ai * 2 + bi);
            }
            v[idx] = m[(a, b)];
        }
    }
    v
}

/// Inverse of [`dm_to_site_major`].
fn site_major_to_dm(v: &Array1<C64>, n: usize) -> DensityMatrix {
    let dim = 1usize << n;
    let mut m = Array2::<C64>::zeros((dim, dim));
    for a in 0..dim {
        for b in 0..dim {
            let mut idx = 0usize;
            for site in 0..n {
                let ai = (a >> (n - 1 - site)) & 1;
                let bi = (b >> (n - 1 - site)) & 1;
                idx = idx * 4 + (ai * 2 + bi);
            }
            m[(a, b)] = v[idx];
        }
    }
    DensityMatrix::new_unchecked(m)
}

/// Trajectory of reduced states plus per-step diagnostics.
#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    /// Reduced density matrices of `readout_sites` at each time.
    pub states: Vec<DensityMatrix>,
    /// 1-based sites the stored states cover, in ascending order.
    pub readout_sites: Vec<usize>,
    pub n_sites: usize,
    /// Site occupations `<n_i>` at each time.
    pub occupations: Vec<Vec<f64>>,
    pub max_bond: Vec<usize>,
    /// Cumulative discarded weight up to each time.
    pub discarded_weight: Vec<f64>,
    /// Pre-normalization trace defect |tr - 1| at each time (states are
    /// stored renormalized, so this is the honest accuracy indicator).
    pub trace_defect: Vec<f64>,
    pub wall_time: f64,
}

impl EvolutionRecord {
    pub fn n_steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn peak_bond(&self) -> usize {
        self.max_bond.iter().copied().max().unwrap_or(1)
    }

    pub fn total_discarded_weight(&self) -> f64 {
        self.discarded_weight.last().copied().unwrap_or(0.0)
    }

    /// CSV export, one row per time step; state entries are flattened with
    /// real and imaginary columns.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let io = Error::Io;
        let dim = self.states.first().map(|s| s.dim()).unwrap_or(0);
        let mut header = vec!["time".to_string()];
        for i in 0..self.occupations.first().map(|o| o.len()).unwrap_or(0) {
            header.push(format!("n{}", i + 1));
        }
        for r in 0..dim {
            for c in 0..dim {
                header.push(format!("rho_{r}{c}_re"));
                header.push(format!("rho_{r}{c}_im"));
            }
        }
        header.push("max_bond".into());
        header.push("discarded_weight".into());
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for k in 0..self.times.len() {
            let mut row = vec![fmt17(self.times[k])];
            if let Some(occ) = self.occupations.get(k) {
                for &x in occ {
                    row.push(fmt17(x));
                }
            }
            let m = self.states[k].matrix();
            for r in 0..dim {
                for c in 0..dim {
                    row.push(fmt17(m[(r, c)].re));
                    row.push(fmt17(m[(r, c)].im));
                }
            }
            row.push(self.max_bond[k].to_string());
            row.push(fmt17(self.discarded_weight[k]));
            writeln!(w, "{}", row.join(",")).map_err(io)?;
        }
        Ok(())
    }

    /// JSON summary of run-level diagnostics.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "n_steps": self.n_steps(),
            "peak_bond": self.peak_bond(),
            "total_discarded_weight": self.total_discarded_weight(),
            "wall_time_s": self.wall_time,
        })
    }
}

/// 17-significant-digit decimal form, round-trip exact for f64.
pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Further reduce a recorded state to a subset of its stored sites.
pub fn reduced_state(
    record: &EvolutionRecord,
    t_index: usize,
    sites: &[usize],
) -> Result<DensityMatrix> {
    if t_index >= record.times.len() {
        return Err(Error::Argument(format!(
            "time index {t_index} out of range 0..{}",
            record.times.len()
        )));
    }
    let mut positions = Vec::with_capacity(sites.len());
    for &s in sites {
        match record.readout_sites.iter().position(|&r| r == s) {
            Some(p) => positions.push(p + 1),
            None => {
                return Err(Error::Argument(format!(
                    "site {s} is not covered by the stored reduction {:?}",
                    record.readout_sites
                )))
            }
        }
    }
    partial_trace_keep(
        &record.states[t_index],
        &positions,
        record.readout_sites.len(),
    )
}

/// Bath step operator for one core: rotate the site into the coupling
/// eigenframe, weight by the (diagonal-in-phys) core, rotate back.
/// `W[b, p, b_out, p_out] = sum_s rin[p, s] core[b, s, b_out] rfw[s, p_out]`.
fn bath_step_operator(
    core: &Array3<C64>,
    rfw: &Array2<C64>,
    rin: &Array2<C64>,
) -> Array4<C64> {
    let (b, dd, b_out) = core.dim();
    let mut w = Array4::<C64>::zeros((b, dd, b_out, dd));
    for bi in 0..b {
        for bo in 0..b_out {
            for p in 0..dd {
                for po in 0..dd {
                    let mut acc = ZERO;
                    for s in 0..dd {
                        acc += rin[(p, s)] * core[(bi, s, bo)] * rfw[(s, po)];
                    }
                    w[(bi, p, bo, po)] = acc;
                }
            }
        }
    }
    w
}

fn rotation_superops(v: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    // vec(V^dag rho V) = (V^dag (x) V^T) vec(rho) in row-major vectorization
    let vdag = v.t().mapv(|z| z.conj());
    let vt = v.t().to_owned();
    let rfw = kron(&vdag, &vt);
    let rin = kron(v, &v.mapv(|z| z.conj()));
    (rfw, rin)
}

fn default_readout(n: usize) -> Vec<usize> {
    if n <= 6 {
        (1..=n).collect()
    } else {
        vec![1, n]
    }
}

/// PT-TEBD propagation of a density matrix coupled to baths described by
/// process tensors at the listed 1-based sites.
pub fn pt_tebd_evolve(
    system: &SystemModel,
    baths: &[(usize, &ProcessTensor)],
    rho0: &DensityMatrix,
    n_steps: usize,
    delta_t: f64,
    policy: &TruncationPolicy,
) -> Result<EvolutionRecord> {
    let start = Instant::now();
    let n = system.n_sites();
    if rho0.dim() != 1 << n {
        return Err(Error::Shape(format!(
            "initial state dimension {} does not match {n} qubit sites",
            rho0.dim()
        )));
    }
    if !(delta_t > 0.0) {
        return Err(Error::Argument(format!("step size must be positive, got {delta_t}")));
    }
    let mut seen = vec![false; n + 1];
    for &(site, pt) in baths {
        if site == 0 || site > n {
            return Err(Error::Argument(format!("bath site {site} out of range 1..={n}")));
        }
        if seen[site] {
            return Err(Error::Argument(format!("duplicate bath at site {site}")));
        }
        seen[site] = true;
        if pt.site_dim() != 2 {
            return Err(Error::Config(format!(
                "process tensor physical dimension {} does not match qubit sites",
                pt.phys_dim
            )));
        }
        if (pt.delta_t - delta_t).abs() > 1e-9 * delta_t.abs().max(1.0) {
            return Err(Error::Config(format!(
                "process tensor step {} does not match evolution step {delta_t}",
                pt.delta_t
            )));
        }
        if pt.n_steps < n_steps {
            return Err(Error::Config(format!(
                "process tensor covers {} steps but {n_steps} were requested",
                pt.n_steps
            )));
        }
    }

    // per-bath cap vectors and coupling-frame rotations
    let caps: Vec<Vec<Array1<C64>>> = baths.iter().map(|(_, pt)| pt.cap_vectors()).collect();
    let frames: Vec<(Array2<C64>, Array2<C64>)> = baths
        .iter()
        .map(|&(site, _)| rotation_superops(&system.coupling_frame(site)))
        .collect();

    let mut mps = AugmentedMps::from_dense(&dm_to_site_major(rho0, n), n, 4)?;
    let readout_sites = default_readout(n);

    let static_plan = if system.time_dependent() {
        None
    } else {
        Some(system.half_plan(0.0, delta_t, false)?)
    };

    let mut record = EvolutionRecord {
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        readout_sites: readout_sites.clone(),
        n_sites: n,
        occupations: Vec::with_capacity(n_steps + 1),
        max_bond: Vec::with_capacity(n_steps + 1),
        discarded_weight: Vec::with_capacity(n_steps + 1),
        trace_defect: Vec::with_capacity(n_steps + 1),
        wall_time: 0.0,
    };
    let mut cum_dw = 0.0f64;

    for k in 0..=n_steps {
        if k > 0 {
            let t0 = (k - 1) as f64 * delta_t;
            let (first, second) = match &static_plan {
                Some(p) => (p.clone(), p.clone()),
                None => (
                    system.half_plan(t0, delta_t, false)?,
                    system.half_plan(t0, delta_t, true)?,
                ),
            };
            for gate in &first {
                cum_dw += apply_gate(&mut mps, gate, policy)?;
            }
            for (bi, &(site, pt)) in baths.iter().enumerate() {
                let w = bath_step_operator(&pt.cores[k - 1], &frames[bi].0, &frames[bi].1);
                mps.apply_bath_operator(site - 1, &w)?;
            }
            for gate in second.iter().rev() {
                cum_dw += apply_gate(&mut mps, gate, policy)?;
            }
        }

        // readout with trace caps at the current step index
        let mut cap_refs: Vec<Option<&Array1<C64>>> = vec![None; n];
        for (bi, &(site, _)) in baths.iter().enumerate() {
            cap_refs[site - 1] = Some(&caps[bi][k]);
        }
        let dense = mps.to_dense(&cap_refs)?;
        let (full, defect) = normalize_state(site_major_to_dm(&dense, n))?;
        let occ = occupations(&full, n)?;
        let reduced = if readout_sites.len() == n {
            full
        } else {
            partial_trace_keep(&full, &readout_sites, n)?
        };
        record.times.push(k as f64 * delta_t);
        record.states.push(reduced);
        record.occupations.push(occ);
        record.max_bond.push(mps.max_bond());
        record.discarded_weight.push(cum_dw);
        record.trace_defect.push(defect);
    }

    record.wall_time = start.elapsed().as_secs_f64();
    Ok(record)
}

/// Divide out the (truncation-drifted) trace so stored states are unit
/// trace; return the defect as a diagnostic.
fn normalize_state(rho: DensityMatrix) -> Result<(DensityMatrix, f64)> {
    let tr = rho.trace();
    let defect = (tr - C64::new(1.0, 0.0)).norm();
    if tr.norm() < 0.5 {
        return Err(Error::Numeric(format!(
            "state trace collapsed to {tr}; truncation too aggressive"
        )));
    }
    let m = rho.matrix().mapv(|z| z / tr);
    Ok((DensityMatrix::new_unchecked(m), defect))
}

fn apply_gate(mps: &mut AugmentedMps, gate: &Gate, policy: &TruncationPolicy) -> Result<f64> {
    match gate {
        Gate::One { site, mat } => {
            mps.apply_one_site(*site, mat);
            Ok(0.0)
        }
        Gate::Two { bond, mat } => mps.apply_two_site(*bond, mat, policy),
    }
}

/// One-step-memory (Markov) evolution: rebuild every bath's eta table with
/// the memory cutoff truncated to a single lag, then run the ordinary
/// PT-TEBD.
pub fn markov_evolve(
    system: &SystemModel,
    baths: &[(usize, &EtaTable)],
    rho0: &DensityMatrix,
    n_steps: usize,
    delta_t: f64,
    policy: &TruncationPolicy,
    pt_policy: &TruncationPolicy,
) -> Result<EvolutionRecord> {
    let mut tensors = Vec::with_capacity(baths.len());
    for &(site, table) in baths {
        let markov = eta_coefficients(
            &table.spectral_density,
            table.temperature,
            table.delta_t,
            n_steps,
            1.min(n_steps),
        )?;
        let eigs = eigenvalues_for(system, site);
        tensors.push((site, build_process_tensor(&markov, n_steps, &eigs, pt_policy)?));
    }
    let refs: Vec<(usize, &ProcessTensor)> =
        tensors.iter().map(|(s, pt)| (*s, pt)).collect();
    pt_tebd_evolve(system, &refs, rho0, n_steps, delta_t, policy)
}

/// Coupling-operator eigenvalues at `site`, in the order fixed by the
/// system's coupling frame.
pub fn eigenvalues_for(system: &SystemModel, site: usize) -> Vec<f64> {
    match system {
        SystemModel::SingleQubit { coupling, .. } => match coupling {
            QubitCoupling::SigmaX => crate::models::sigma_x_eigenvalues(),
            QubitCoupling::SigmaZ => vec![1.0, -1.0],
        },
        SystemModel::TwoQubit { .. } => crate::models::sigma_x_eigenvalues(),
        SystemModel::Chain(_) => {
            let _ = site;
            crate::models::spin_z_eigenvalues()
        }
        SystemModel::DrivenQubit(_) => vec![1.0, -1.0],
    }
}

/// Pure-state TEBD for the closed chain; records the same observables via
/// the projector density matrix.
pub fn closed_tebd_evolve(
    chain: &AAChainModel,
    psi0: &Array1<C64>,
    n_steps: usize,
    delta_t: f64,
    policy: &TruncationPolicy,
) -> Result<EvolutionRecord> {
    let start = Instant::now();
    let n = chain.n_sites;
    if psi0.len() != 1 << n {
        return Err(Error::Shape(format!(
            "state length {} does not match {n} sites",
            psi0.len()
        )));
    }
    let norm: f64 = psi0.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Argument(format!("initial state norm^2 = {norm} is not 1")));
    }
    let mut plan = Vec::new();
    for parity in [1usize, 0] {
        for bond in (1..n).filter(|b| b % 2 == parity) {
            plan.push(Gate::Two {
                bond: bond - 1,
                mat: two_site_pure_gate(&chain.bond_hamiltonian(bond)?, 0.5 * delta_t)?,
            });
        }
    }
    let mut mps = AugmentedMps::from_dense(psi0, n, 2)?;
    let readout_sites = default_readout(n);
    let mut record = EvolutionRecord {
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        readout_sites: readout_sites.clone(),
        n_sites: n,
        occupations: Vec::with_capacity(n_steps + 1),
        max_bond: Vec::with_capacity(n_steps + 1),
        discarded_weight: Vec::with_capacity(n_steps + 1),
        trace_defect: Vec::with_capacity(n_steps + 1),
        wall_time: 0.0,
    };
    let mut cum_dw = 0.0f64;
    let caps: Vec<Option<&Array1<C64>>> = vec![None; n];
    for k in 0..=n_steps {
        if k > 0 {
            for gate in &plan {
                cum_dw += apply_gate(&mut mps, gate, policy)?;
            }
            for gate in plan.iter().rev() {
                cum_dw += apply_gate(&mut mps, gate, policy)?;
            }
        }
        let psi = mps.to_dense(&caps)?;
        let nrm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let defect = (nrm2 - 1.0).abs();
        if nrm2 < 0.25 {
            return Err(Error::Numeric(format!(
                "state norm collapsed to {nrm2}; truncation too aggressive"
            )));
        }
        let psi = psi.mapv(|z| z / nrm2.sqrt());
        let full = DensityMatrix::pure(&psi)?;
        let occ = occupations(&full, n)?;
        let reduced = if readout_sites.len() == n {
            full
        } else {
            partial_trace_keep(&full, &readout_sites, n)?
        };
        record.times.push(k as f64 * delta_t);
        record.states.push(reduced);
        record.occupations.push(occ);
        record.max_bond.push(mps.max_bond());
        record.discarded_weight.push(cum_dw);
        record.trace_defect.push(defect);
    }
    record.wall_time = start.elapsed().as_secs_f64();
    Ok(record)
}
