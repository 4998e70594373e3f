//! Correlation and localization observables: l1 coherence, concurrence,
//! Bloch decomposition, geometric discord, teleportation fidelity, and the
//! sublattice imbalance.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::liouville::DensityMatrix;
use crate::models::{identity2, number_op, pauli_x, pauli_y, pauli_z, site_operator};

fn require_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::Shape(format!(
            "expected a 4x4 two-qubit state, got dimension {}",
            rho.dim()
        )));
    }
    Ok(())
}

/// l1-norm coherence: sum of moduli of all off-diagonal elements.
pub fn l1_coherence(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let mut s = 0.0;
    for ((i, j), v) in m.indexed_iter() {
        if i != j {
            s += v.norm();
        }
    }
    s
}

/// Square root of a Hermitian positive-semidefinite matrix; small negative
/// eigenvalues from roundoff are clamped to zero.
fn sqrtm_psd(m: &Array2<C64>) -> Result<Array2<C64>> {
    let (vecs, vals) = crate::models::dense_eigensolve(m)?;
    let dim = vals.len();
    let mut out = Array2::<C64>::zeros((dim, dim));
    for (k, &v) in vals.iter().enumerate() {
        if v < -1e-8 {
            return Err(Error::Numeric(format!(
                "matrix is not positive semidefinite (eigenvalue {v:.3e})"
            )));
        }
        let r = v.max(0.0).sqrt();
        let col = vecs.column(k);
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] += col[i] * col[j].conj() * r;
            }
        }
    }
    Ok(out)
}

/// Wootters concurrence of a two-qubit state via the Hermitian route:
/// the eigenvalues of `rho rho~` equal those of `sqrt(rho) rho~ sqrt(rho)`,
/// which is Hermitian PSD and numerically well conditioned.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubit(rho)?;
    let yy = crate::liouville::kron(&pauli_y(), &pauli_y());
    let rho_tilde = yy.dot(&rho.matrix().t().to_owned()).dot(&yy);
    let sq = sqrtm_psd(rho.matrix())?;
    let m = sq.dot(&rho_tilde).dot(&sq);
    // m is Hermitian PSD up to roundoff; symmetrize before the eigensolve
    let m = (&m + &m.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let (_, vals) = crate::models::dense_eigensolve(&m)?;
    let mut lambdas: Vec<f64> = vals.iter().map(|&v| v.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Pauli decomposition of a two-qubit state:
/// `rho = (I + sum a_i s_i x I + sum b_i I x s_i + sum C_ij s_i x s_j)/4`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochDecomposition {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub c: Array2<f64>,
}

impl BlochDecomposition {
    /// Rebuild the density matrix from the decomposition.
    pub fn reconstruct(&self) -> DensityMatrix {
        let paulis = [pauli_x(), pauli_y(), pauli_z()];
        let id = identity2();
        let mut m = crate::liouville::kron(&id, &id);
        for i in 0..3 {
            m = m + crate::liouville::kron(&paulis[i], &id).mapv(|z| z * self.a[i])
                + crate::liouville::kron(&id, &paulis[i]).mapv(|z| z * self.b[i]);
            for j in 0..3 {
                m = m + crate::liouville::kron(&paulis[i], &paulis[j])
                    .mapv(|z| z * self.c[(i, j)]);
            }
        }
        DensityMatrix::new_unchecked(m.mapv(|z| z * 0.25))
    }
}

pub fn bloch_decompose(rho: &DensityMatrix) -> Result<BlochDecomposition> {
    require_two_qubit(rho)?;
    let paulis = [pauli_x(), pauli_y(), pauli_z()];
    let id = identity2();
    let m = rho.matrix();
    let tr = |op: &Array2<C64>| -> Result<f64> {
        let t = crate::liouville::trace(&m.dot(op));
        if t.im.abs() > 1e-10 {
            return Err(Error::Numeric(format!(
                "Bloch component has imaginary part {:.3e}",
                t.im
            )));
        }
        Ok(t.re)
    };
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    let mut c = Array2::<f64>::zeros((3, 3));
    for i in 0..3 {
        a[i] = tr(&crate::liouville::kron(&paulis[i], &id))?;
        b[i] = tr(&crate::liouville::kron(&id, &paulis[i]))?;
        for j in 0..3 {
            c[(i, j)] = tr(&crate::liouville::kron(&paulis[i], &paulis[j]))?;
        }
    }
    Ok(BlochDecomposition { a, b, c })
}

/// Geometric discord, closed form:
/// `D = (||a||^2 + ||C||^2)/4 - lambda_max(a a^T + C C^T)/4`.
pub fn geometric_discord(rho: &DensityMatrix) -> Result<f64> {
    let d = bloch_decompose(rho)?;
    let a_sq: f64 = d.a.iter().map(|x| x * x).sum();
    let c_sq: f64 = d.c.iter().map(|x| x * x).sum();
    let mut k = d.c.dot(&d.c.t());
    for i in 0..3 {
        for j in 0..3 {
            k[(i, j)] += d.a[i] * d.a[j];
        }
    }
    let lam_max = sym3_max_eigenvalue(&k)?;
    Ok(((a_sq + c_sq - lam_max) / 4.0).max(0.0))
}

fn sym3_max_eigenvalue(k: &Array2<f64>) -> Result<f64> {
    use ndarray_linalg::{Eigh, UPLO};
    let (vals, _) = k
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numeric(format!("3x3 eigensolve failed: {e}")))?;
    Ok(vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Optimal teleportation fidelity `F = (1 + Tr sqrt(C^T C) / 3) / 2`.
pub fn teleport_fidelity(rho: &DensityMatrix) -> Result<f64> {
    let d = bloch_decompose(rho)?;
    use ndarray_linalg::SVD;
    let (_, s, _) = d
        .c
        .svd(false, false)
        .map_err(|e| Error::Numeric(format!("SVD of correlation matrix failed: {e}")))?;
    let n: f64 = s.iter().sum();
    Ok(0.5 * (1.0 + n / 3.0))
}

/// Whether the state is useful as a teleportation channel (`F > 2/3`).
pub fn useful_for_teleportation(rho: &DensityMatrix) -> Result<bool> {
    Ok(teleport_fidelity(rho)? > 2.0 / 3.0)
}

/// Site occupations `<n_i> = <S_i^z> + 1/2` of a pure chain state.
pub fn occupations_pure(psi: &Array1<C64>, n_sites: usize) -> Result<Vec<f64>> {
    let dim = 1usize << n_sites;
    if psi.len() != dim {
        return Err(Error::Shape(format!(
            "state length {} does not match {n_sites} sites",
            psi.len()
        )));
    }
    let mut occ = vec![0.0; n_sites];
    for (idx, amp) in psi.iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for site in 1..=n_sites {
            if idx >> (n_sites - site) & 1 == 1 {
                occ[site - 1] += p;
            }
        }
    }
    Ok(occ)
}

/// Site occupations of a chain density matrix.
pub fn occupations(rho: &DensityMatrix, n_sites: usize) -> Result<Vec<f64>> {
    let dim = 1usize << n_sites;
    if rho.dim() != dim {
        return Err(Error::Shape(format!(
            "state dimension {} does not match {n_sites} sites",
            rho.dim()
        )));
    }
    let n_op = number_op();
    let mut occ = vec![0.0; n_sites];
    for site in 1..=n_sites {
        let op = site_operator(&n_op, site, n_sites)?;
        occ[site - 1] = crate::liouville::trace(&rho.matrix().dot(&op)).re;
    }
    Ok(occ)
}

/// Sublattice imbalance `(N_odd - N_even) / (N_odd + N_even)` from site
/// occupations (1-based site parity).
pub fn imbalance(occupations: &[f64]) -> Result<f64> {
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, &n) in occupations.iter().enumerate() {
        if (i + 1) % 2 == 1 {
            odd += n;
        } else {
            even += n;
        }
    }
    let total = odd + even;
    if total.abs() < 1e-12 {
        return Err(Error::Undefined(
            "imbalance undefined: total occupation is zero".into(),
        ));
    }
    Ok((odd - even) / total)
}

/// Partial trace of an `n_sites`-qubit density matrix keeping the listed
/// 1-based sites (in the given order).
pub fn partial_trace_keep(
    rho: &DensityMatrix,
    keep: &[usize],
    n_sites: usize,
) -> Result<DensityMatrix> {
    let dim = 1usize << n_sites;
    if rho.dim() != dim {
        return Err(Error::Shape(format!(
            "state dimension {} does not match {n_sites} sites",
            rho.dim()
        )));
    }
    for &s in keep {
        if s == 0 || s > n_sites {
            return Err(Error::Argument(format!("site {s} out of range 1..={n_sites}")));
        }
    }
    let k = keep.len();
    let out_dim = 1usize << k;
    let traced: Vec<usize> = (1..=n_sites).filter(|s| !keep.contains(s)).collect();
    let m = rho.matrix();
    let mut out = Array2::<C64>::zeros((out_dim, out_dim));

    // map (kept-bits, traced-bits) to a full basis index
    let full_index = |kept: usize, tr: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &s) in keep.iter().enumerate() {
            if kept >> (k - 1 - pos) & 1 == 1 {
                idx |= 1 << (n_sites - s);
            }
        }
        for (pos, &s) in traced.iter().enumerate() {
            if tr >> (traced.len() - 1 - pos) & 1 == 1 {
                idx |= 1 << (n_sites - s);
            }
        }
        idx
    };

    let tr_dim = 1usize << traced.len();
    for r in 0..out_dim {
        for c in 0..out_dim {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..tr_dim {
                acc += m[(full_index(r, t), full_index(c, t))];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(DensityMatrix::new_unchecked(out))
}

/// Two-site reduced state of sites `(a, b)` in that order.
pub fn reduce_to_pair(
    rho: &DensityMatrix,
    a: usize,
    b: usize,
    n_sites: usize,
) -> Result<DensityMatrix> {
    if a == b {
        return Err(Error::Argument(format!("pair sites must differ, got ({a}, {b})")));
    }
    partial_trace_keep(rho, &[a, b], n_sites)
}
