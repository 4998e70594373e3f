//! Concrete systems: the coupled two-qubit pair, the Aubry-Andre / XXZ spin
//! chain, and the periodically driven qubit, plus the resonance analysis of
//! the chain against a given bath spectrum.
//!
//! Basis conventions, fixed here once:
//! - Qubit basis `|0>, |1>` with `sigma_z = diag(1, -1)`.
//! - Chain occupation basis: `|1>` is occupied, `n_i = S_i^z + 1/2`, so
//!   `S^z = diag(-1/2, +1/2)` over the index order `(|0>, |1>)`.
//! - Multi-site basis index: site 1 is the most significant bit.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::liouville::{kron, DensityMatrix};

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity2() -> Array2<C64> {
    Array2::eye(2)
}

pub fn pauli_x() -> Array2<C64> {
    ndarray::arr2(&[[cr(0.0), cr(1.0)], [cr(1.0), cr(0.0)]])
}

pub fn pauli_y() -> Array2<C64> {
    ndarray::arr2(&[[cr(0.0), C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), cr(0.0)]])
}

pub fn pauli_z() -> Array2<C64> {
    ndarray::arr2(&[[cr(1.0), cr(0.0)], [cr(0.0), cr(-1.0)]])
}

/// Chain spin operators in the occupation convention (`|1>` = up/occupied).
pub fn spin_z() -> Array2<C64> {
    ndarray::arr2(&[[cr(-0.5), cr(0.0)], [cr(0.0), cr(0.5)]])
}

pub fn spin_x() -> Array2<C64> {
    pauli_x().mapv(|z| z * 0.5)
}

pub fn spin_y() -> Array2<C64> {
    // same matrix elements as pauli_y/2; the occupation relabeling flips the
    // roles of raising and lowering but leaves S^x S^x + S^y S^y invariant
    pauli_y().mapv(|z| z * 0.5)
}

/// Occupation number operator `n = S^z + 1/2`.
pub fn number_op() -> Array2<C64> {
    ndarray::arr2(&[[cr(0.0), cr(0.0)], [cr(0.0), cr(1.0)]])
}

/// Embed a single-site operator at `site` (1-based) in an `n`-site chain.
pub fn site_operator(op: &Array2<C64>, site: usize, n_sites: usize) -> Result<Array2<C64>> {
    if site == 0 || site > n_sites {
        return Err(Error::Argument(format!(
            "site {site} out of range 1..={n_sites}"
        )));
    }
    let mut out = if site == 1 { op.clone() } else { identity2() };
    for s in 2..=n_sites {
        let factor = if s == site { op.clone() } else { identity2() };
        out = kron(&out, &factor);
    }
    Ok(out)
}

/// Pair of coupled qubits, `H = w1/2 sz_1 + w2/2 sz_2 + J sx_1 sx_2`,
/// each qubit coupled to its own bath through `sigma_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitModel {
    pub omega1: f64,
    pub omega2: f64,
    pub j: f64,
}

impl Default for TwoQubitModel {
    fn default() -> Self {
        Self { omega1: 1.0, omega2: 1.0, j: 0.375 }
    }
}

impl TwoQubitModel {
    pub fn hamiltonian(&self) -> Array2<C64> {
        let sz = pauli_z();
        let sx = pauli_x();
        let id = identity2();
        let mut h = kron(&sz, &id).mapv(|z| z * (0.5 * self.omega1));
        h = h + kron(&id, &sz).mapv(|z| z * (0.5 * self.omega2));
        h + kron(&sx, &sx).mapv(|z| z * self.j)
    }

    /// On-site part `w1/2 sz_1 + w2/2 sz_2` (for the split-gate schedule).
    pub fn local_hamiltonian(&self) -> Array2<C64> {
        let sz = pauli_z();
        let id = identity2();
        kron(&sz, &id).mapv(|z| z * (0.5 * self.omega1))
            + kron(&id, &sz).mapv(|z| z * (0.5 * self.omega2))
    }

    /// Interaction part `J sx_1 sx_2`.
    pub fn bond_hamiltonian(&self) -> Array2<C64> {
        let sx = pauli_x();
        kron(&sx, &sx).mapv(|z| z * self.j)
    }

    /// Ground state of the full interacting Hamiltonian.
    pub fn ground_state(&self) -> Result<DensityMatrix> {
        let (vecs, _) = dense_eigensolve(&self.hamiltonian())?;
        let psi = vecs.column(0).to_owned();
        DensityMatrix::pure(&psi)
    }
}

/// Eigenvalues of the `sigma_x` coupling operator, indexed consistently with
/// the eigenvector order of [`coupling_rotation_x`].
pub fn sigma_x_eigenvalues() -> Vec<f64> {
    vec![1.0, -1.0]
}

/// Unitary whose columns are the `sigma_x` eigenvectors `|+>, |->`.
pub fn coupling_rotation_x() -> Array2<C64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    ndarray::arr2(&[[cr(r), cr(r)], [cr(r), cr(-r)]])
}

/// Eigenvalues of the `S^z` chain coupling operator (already diagonal in the
/// occupation basis, index order `(|0>, |1>)`).
pub fn spin_z_eigenvalues() -> Vec<f64> {
    vec![-0.5, 0.5]
}

/// Aubry-Andre / XXZ spin-1/2 chain with open boundaries:
/// `H = sum_i J (Sx_i Sx_{i+1} + Sy_i Sy_{i+1}) + Delta Sz_i Sz_{i+1}
///      - sum_i h cos(2 pi beta i) Sz_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AAChainModel {
    pub n_sites: usize,
    pub j: f64,
    pub delta: f64,
    pub h: f64,
    pub beta: f64,
    /// Offset added to the site index inside the quasi-periodic potential
    /// (used when a short chain stands in for a segment of a longer one).
    pub site_offset: usize,
    /// 1-based sites carrying an `S^z` bath coupling.
    pub coupled_sites: Vec<usize>,
}

/// Default incommensurability: the inverse golden ratio.
pub fn golden_beta() -> f64 {
    (5.0_f64.sqrt() - 1.0) / 2.0
}

impl AAChainModel {
    pub fn new(n_sites: usize, delta: f64, h: f64) -> Result<Self> {
        Self::with_beta(n_sites, delta, h, golden_beta())
    }

    pub fn with_beta(n_sites: usize, delta: f64, h: f64, beta: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::Argument(format!(
                "chain needs at least 2 sites, got {n_sites}"
            )));
        }
        if n_sites > 10 {
            return Err(Error::Capacity(format!(
                "chains beyond 10 sites are unsupported, got {n_sites}"
            )));
        }
        // a commensurate beta (period 1 or 2) degenerates the potential
        if h != 0.0 && (2.0 * beta - (2.0 * beta).round()).abs() < 1e-9 {
            return Err(Error::Argument(format!(
                "beta = {beta} is commensurate (period <= 2); use an irrational value \
                 such as (sqrt(5)-1)/2"
            )));
        }
        Ok(Self { n_sites, j: 1.0, delta, h, beta, site_offset: 0, coupled_sites: Vec::new() })
    }

    pub fn with_bath_site(mut self, site: usize) -> Result<Self> {
        if site == 0 || site > self.n_sites {
            return Err(Error::Argument(format!(
                "bath site {site} out of range 1..={}",
                self.n_sites
            )));
        }
        self.coupled_sites.push(site);
        Ok(self)
    }

    pub fn with_site_offset(mut self, offset: usize) -> Self {
        self.site_offset = offset;
        self
    }

    pub fn potential(&self, i: usize) -> f64 {
        aa_potential(self.h, self.beta, i + self.site_offset)
    }

    /// Two-site bond term on `(i, i+1)` with the on-site fields absorbed:
    /// half of each interior field, the full field at the chain edges.
    pub fn bond_hamiltonian(&self, i: usize) -> Result<Array2<C64>> {
        if i == 0 || i + 1 > self.n_sites {
            return Err(Error::Argument(format!(
                "bond {i} out of range 1..={}",
                self.n_sites - 1
            )));
        }
        let (sx, sy, sz, id) = (spin_x(), spin_y(), spin_z(), identity2());
        let mut h = (kron(&sx, &sx) + kron(&sy, &sy)).mapv(|z| z * self.j)
            + kron(&sz, &sz).mapv(|z| z * self.delta);
        let w_left = if i == 1 { 1.0 } else { 0.5 };
        let w_right = if i + 1 == self.n_sites { 1.0 } else { 0.5 };
        h = h - kron(&sz, &id).mapv(|z| z * (w_left * self.potential(i)))
            - kron(&id, &sz).mapv(|z| z * (w_right * self.potential(i + 1)));
        Ok(h)
    }

    pub fn dense_hamiltonian(&self) -> Result<Array2<C64>> {
        let dim = 1usize << self.n_sites;
        let mut h = Array2::<C64>::zeros((dim, dim));
        let (sx, sy, sz) = (spin_x(), spin_y(), spin_z());
        for i in 1..self.n_sites {
            let xx = site_operator(&sx, i, self.n_sites)?
                .dot(&site_operator(&sx, i + 1, self.n_sites)?);
            let yy = site_operator(&sy, i, self.n_sites)?
                .dot(&site_operator(&sy, i + 1, self.n_sites)?);
            let zz = site_operator(&sz, i, self.n_sites)?
                .dot(&site_operator(&sz, i + 1, self.n_sites)?);
            h = h + (xx + yy).mapv(|z| z * self.j) + zz.mapv(|z| z * self.delta);
        }
        for i in 1..=self.n_sites {
            let zi = site_operator(&sz, i, self.n_sites)?;
            h = h - zi.mapv(|z| z * self.potential(i));
        }
        Ok(h)
    }

    /// Total magnetization `sum_i S_i^z` as a dense operator.
    pub fn total_sz(&self) -> Result<Array2<C64>> {
        let dim = 1usize << self.n_sites;
        let mut m = Array2::<C64>::zeros((dim, dim));
        for i in 1..=self.n_sites {
            m = m + site_operator(&spin_z(), i, self.n_sites)?;
        }
        Ok(m)
    }
}

/// Quasi-periodic on-site potential `h cos(2 pi beta i)`.
pub fn aa_potential(h: f64, beta: f64, i: usize) -> f64 {
    h * (2.0 * std::f64::consts::PI * beta * i as f64).cos()
}

/// Initial chain state with the two ends maximally entangled and the
/// interior in a Neel pattern (interior site occupied iff its index is
/// even); for N=8 this is `(|11010101> + |01010100>)/sqrt(2)`.
pub fn neel_bell_state(n_sites: usize) -> Result<Array1<C64>> {
    if n_sites < 4 || n_sites % 2 != 0 {
        return Err(Error::Argument(format!(
            "Neel-Bell state needs even N >= 4, got {n_sites}"
        )));
    }
    let mut interior = 0usize;
    for site in 2..n_sites {
        if site % 2 == 0 {
            interior |= 1 << (n_sites - site);
        }
    }
    // branch with both ends occupied, and with both ends empty
    let ends = (1 << (n_sites - 1)) | 1;
    let mut psi = Array1::<C64>::zeros(1 << n_sites);
    let amp = cr(std::f64::consts::FRAC_1_SQRT_2);
    psi[interior | ends] = amp;
    psi[interior] = amp;
    Ok(psi)
}

/// Qubit under a sinusoidal transverse drive,
/// `H(t) = omega/2 sigma_z + (Lambda sin(Omega t)/2) sigma_x`,
/// bath-coupled through `sigma_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivenQubitModel {
    pub omega: f64,
    pub lambda: f64,
    pub drive_freq: f64,
}

impl DrivenQubitModel {
    pub fn new(omega: f64, lambda: f64, drive_freq: f64) -> Self {
        Self { omega, lambda, drive_freq }
    }

    pub fn hamiltonian(&self, t: f64) -> Array2<C64> {
        let drive = 0.5 * self.lambda * (self.drive_freq * t).sin();
        pauli_z().mapv(|z| z * (0.5 * self.omega)) + pauli_x().mapv(|z| z * drive)
    }
}

/// One candidate bath-assisted transition of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    /// Positive transition energy `E_b - E_a`.
    pub gap: f64,
    /// Squared coupling matrix element of the bath operator.
    pub matrix_element_sq: f64,
    /// `|A_ab|^2 J(gap) n(gap)` with `n` the Bose occupation.
    pub weight: f64,
}

/// Eigenmode transitions of the chain that the bath can drive thermally:
/// every positive gap with a nonzero `S^z` matrix element at the coupled
/// site, weighted by the bath absorption spectrum `J(w) n(w)`.
/// Returns the list plus the summed flux proxy.
pub fn resonance_report(
    chain: &AAChainModel,
    j: &crate::bath::SpectralDensity,
    temperature: f64,
) -> Result<(Vec<Resonance>, f64)> {
    if temperature <= 0.0 {
        return Err(Error::Argument(format!(
            "resonance analysis needs positive temperature, got {temperature}"
        )));
    }
    let site = *chain
        .coupled_sites
        .first()
        .ok_or_else(|| Error::Argument("chain has no bath-coupled site".into()))?;
    let h = chain.dense_hamiltonian()?;
    let (vecs, vals) = dense_eigensolve(&h)?;
    let a_op = site_operator(&spin_z(), site, chain.n_sites)?;
    // rotate the coupling operator into the eigenbasis
    let a_eig = vecs.t().mapv(|z| z.conj()).dot(&a_op).dot(&vecs);

    let mut out = Vec::new();
    let mut flux = 0.0;
    let dim = vals.len();
    for a in 0..dim {
        for b in 0..dim {
            let gap = vals[b] - vals[a];
            if gap <= 1e-12 {
                continue;
            }
            let me = a_eig[(a, b)].norm_sqr();
            if me < 1e-24 {
                continue;
            }
            let n_bose = 1.0 / ((gap / temperature).exp() - 1.0);
            let weight = me * j.value(gap)? * n_bose;
            flux += weight;
            out.push(Resonance { gap, matrix_element_sq: me, weight });
        }
    }
    out.sort_by(|x, y| x.gap.partial_cmp(&y.gap).unwrap());
    Ok((out, flux))
}

/// Dense Hermitian eigensolve; returns (eigenvector columns, ascending
/// eigenvalues).
pub fn dense_eigensolve(h: &Array2<C64>) -> Result<(Array2<C64>, Vec<f64>)> {
    use ndarray_linalg::{Eigh, UPLO};
    let defect = crate::liouville::hermiticity_defect(h);
    if defect > 1e-8 {
        return Err(Error::Numeric(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    let (vals, vecs) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolve failed: {e}")))?;
    // eigh on a row-major array yields H = conj(V) diag Vt; the eigenvector
    // columns are conj(V)
    Ok((vecs.mapv(|z| z.conj()), vals.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures;
    use ndarray_linalg::Norm;

    fn commutator_norm(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        (a.dot(b) - b.dot(a)).norm_l2()
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
        // xy = iz
        assert!((x.dot(&y) - z.mapv(|v| v * C64::new(0.0, 1.0))).norm_l2() < 1e-15);
        assert!((x.dot(&x) - identity2()).norm_l2() < 1e-15);
        assert!((y.dot(&y) - identity2()).norm_l2() < 1e-15);
        assert!((z.dot(&z) - identity2()).norm_l2() < 1e-15);
    }

    #[test]
    fn two_qubit_spectrum_matches_analytic() {
        // H = (w/2)(sz1+sz2) + J sx sx with w1=w2=w: in the
        // {|00>,|11>} block eigenvalues are +-sqrt(w^2+J^2); in the
        // {|01>,|10>} block they are +-J.
        let m = TwoQubitModel::default();
        let (_, vals) = dense_eigensolve(&m.hamiltonian()).unwrap();
        let r = (1.0f64 + 0.375 * 0.375).sqrt();
        let mut expect = vec![-r, -0.375, 0.375, r];
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in vals.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn two_qubit_parity_symmetry_and_symmetric_spectrum() {
        let m = TwoQubitModel::default();
        let h = m.hamiltonian();
        // joint parity sz sz commutes with H
        let parity = kron(&pauli_z(), &pauli_z());
        assert!(commutator_norm(&h, &parity) < 1e-12);
        // spectrum is symmetric about zero (simultaneous spin flip maps
        // H -> -H up to the sx sx term's invariance)
        let (_, vals) = dense_eigensolve(&h).unwrap();
        for (lo, hi) in vals.iter().zip(vals.iter().rev()) {
            assert!((lo + hi).abs() < 1e-12);
        }
    }

    #[test]
    fn two_qubit_split_parts_sum() {
        let m = TwoQubitModel::default();
        let sum = m.local_hamiltonian() + m.bond_hamiltonian();
        assert!((sum - m.hamiltonian()).norm_l2() < 1e-15);
    }

    #[test]
    fn ground_state_is_lowest_eigenvector() {
        let m = TwoQubitModel::default();
        let rho = m.ground_state().unwrap();
        let h = m.hamiltonian();
        let e = crate::liouville::trace(&h.dot(rho.matrix())).re;
        let (_, vals) = dense_eigensolve(&h).unwrap();
        assert!((e - vals[0]).abs() < 1e-12);
    }

    #[test]
    fn coupling_rotation_diagonalizes_sigma_x() {
        let v = coupling_rotation_x();
        let d = v.t().mapv(|z| z.conj()).dot(&pauli_x()).dot(&v);
        let eig = sigma_x_eigenvalues();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { C64::new(eig[i], 0.0) } else { C64::new(0.0, 0.0) };
                assert!((d[(i, j)] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn aa_potential_values() {
        assert_eq!(aa_potential(0.0, golden_beta(), 3), 0.0);
        // h=4, beta=(sqrt(5)-1)/2, i=1: 4 cos(2 pi 0.6180339887...)
        let v = aa_potential(4.0, golden_beta(), 1);
        assert!((v - (-2.9494755123132794)).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn commensurate_beta_rejected() {
        assert!(AAChainModel::with_beta(6, 1.0, 4.0, 0.5).is_err());
        assert!(AAChainModel::with_beta(6, 1.0, 4.0, 1.0).is_err());
        // fine when the potential is off
        assert!(AAChainModel::with_beta(6, 1.0, 0.0, 0.5).is_ok());
    }

    #[test]
    fn free_xx_chain_single_particle_band() {
        // h=0, Delta=0: single-excitation energies of the open chain are
        // -J cos(pi k / (N+1)), k=1..N (relative to the all-down energy).
        let n = 6;
        let chain = AAChainModel::new(n, 0.0, 0.0).unwrap();
        let h = chain.dense_hamiltonian().unwrap();
        // project onto the one-excitation sector
        let dim = 1usize << n;
        let idx: Vec<usize> = (0..dim).filter(|b| b.count_ones() == 1).collect();
        let mut block = Array2::<C64>::zeros((n, n));
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                block[(r, c)] = h[(i, j)];
            }
        }
        let e0 = {
            // all-down reference energy (diagonal element of the vacuum)
            h[(0, 0)].re
        };
        let (_, mut vals) = dense_eigensolve(&block).unwrap();
        for v in vals.iter_mut() {
            *v -= e0;
        }
        let mut expect: Vec<f64> = (1..=n)
            .map(|k| -(std::f64::consts::PI * k as f64 / (n as f64 + 1.0)).cos())
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in vals.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn chain_u1_symmetry() {
        let chain = AAChainModel::new(6, 1.0, 4.0).unwrap();
        let h = chain.dense_hamiltonian().unwrap();
        let m = chain.total_sz().unwrap();
        assert!(commutator_norm(&h, &m) < 1e-12);
    }

    #[test]
    fn bond_terms_sum_to_dense_hamiltonian() {
        let chain = AAChainModel::new(5, 0.7, 2.3).unwrap();
        let dim = 1usize << 5;
        let mut h = Array2::<C64>::zeros((dim, dim));
        for i in 1..5 {
            let bond = chain.bond_hamiltonian(i).unwrap();
            // embed the two-site bond at (i, i+1)
            let left: Array2<C64> = Array2::eye(1 << (i - 1));
            let right: Array2<C64> = Array2::eye(1 << (5 - i - 1));
            h = h + kron(&kron(&left, &bond), &right);
        }
        assert!((h - chain.dense_hamiltonian().unwrap()).norm_l2() < 1e-12);
    }

    #[test]
    fn localization_indicator_jumps_at_duality_point() {
        // Delta=0 Aubry-Andre duality: midspectrum single-particle
        // eigenvectors delocalize for h<J and localize for h>J.
        let ipr = |h: f64| -> f64 {
            let n = 8;
            // single-particle hopping matrix (tridiagonal) with AA potential
            let mut m = Array2::<C64>::zeros((n, n));
            for i in 0..n - 1 {
                m[(i, i + 1)] = cr(0.5);
                m[(i + 1, i)] = cr(0.5);
            }
            for i in 0..n {
                m[(i, i)] = cr(-aa_potential(h, golden_beta(), i + 1));
            }
            let (vecs, _) = dense_eigensolve(&m).unwrap();
            let mid = vecs.column(n / 2);
            mid.iter().map(|z| z.norm_sqr().powi(2)).sum()
        };
        let deloc = ipr(0.2);
        let loc = ipr(4.0);
        assert!(loc > 3.0 * deloc, "IPR delocalized {deloc} vs localized {loc}");
    }

    #[test]
    fn neel_bell_state_n8_components() {
        let psi = neel_bell_state(8).unwrap();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
        // |11010101> and |01010100> (site 1 = MSB)
        let b1 = usize::from_str_radix("11010101", 2).unwrap();
        let b2 = usize::from_str_radix("01010100", 2).unwrap();
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        assert!((psi[b1].re - amp).abs() < 1e-14);
        assert!((psi[b2].re - amp).abs() < 1e-14);
        let others: f64 = psi
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != b1 && *i != b2)
            .map(|(_, z)| z.norm())
            .sum();
        assert_eq!(others, 0.0);
    }

    #[test]
    fn neel_bell_ends_maximally_entangled() {
        let psi = neel_bell_state(8).unwrap();
        let rho = DensityMatrix::pure(&psi).unwrap();
        let ends = measures::reduce_to_pair(&rho, 1, 8, 8).unwrap();
        let c = measures::concurrence(&ends).unwrap();
        assert!((c - 1.0).abs() < 1e-12, "end-pair concurrence {c}");
    }

    #[test]
    fn neel_bell_rejects_bad_sizes() {
        assert!(neel_bell_state(7).is_err());
        assert!(neel_bell_state(2).is_err());
    }

    #[test]
    fn driven_qubit_at_zero_time() {
        let m = DrivenQubitModel::new(1.0, 50.0, 100.0);
        let h = m.hamiltonian(0.0);
        assert!((h - pauli_z().mapv(|z| z * 0.5)).norm_l2() < 1e-15);
    }

    #[test]
    fn driven_qubit_drive_amplitude() {
        let m = DrivenQubitModel::new(1.0, 50.0, 100.0);
        // quarter period of the drive: sin = 1
        let t = 0.5 * std::f64::consts::PI / 100.0;
        let h = m.hamiltonian(t);
        assert!((h[(0, 1)].re - 25.0).abs() < 1e-10);
    }

    #[test]
    fn resonance_weights_vanish_without_coupling() {
        let chain = AAChainModel::new(4, 1.0, 0.6)
            .unwrap()
            .with_bath_site(1)
            .unwrap();
        let j = crate::bath::SpectralDensity::ohmic(0.0, 4.0).unwrap();
        let (res, flux) = resonance_report(&chain, &j, 1.0).unwrap();
        assert_eq!(flux, 0.0);
        assert!(res.iter().all(|r| r.weight == 0.0));
    }

    #[test]
    fn resonance_weights_vanish_at_low_temperature() {
        let chain = AAChainModel::new(4, 1.0, 0.6)
            .unwrap()
            .with_bath_site(1)
            .unwrap();
        let j = crate::bath::SpectralDensity::ohmic(0.1, 4.0).unwrap();
        let (_, flux_cold) = resonance_report(&chain, &j, 1e-3).unwrap();
        let (_, flux_warm) = resonance_report(&chain, &j, 1.0).unwrap();
        assert!(flux_cold < 1e-6 * flux_warm);
    }

    #[test]
    fn site_operator_rejects_bad_site() {
        assert!(site_operator(&spin_z(), 0, 4).is_err());
        assert!(site_operator(&spin_z(), 5, 4).is_err());
    }
}
