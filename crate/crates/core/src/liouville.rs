//! Liouville-space vectorization and superoperator construction.
//!
//! The single wire format used everywhere: a density matrix is vectorized
//! row-major, component `i*d + j` of the vector is `rho[i][j]` (ket tensor
//! bra ordering). Operators acting from the left become `O (x) I`, from the
//! right `I (x) O^T`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::cr;

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_SLACK: f64 = 1e-8;

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// up to numerical slack.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: usize,
    mat: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(mat: Array2<C64>) -> Result<Self> {
        let (r, c) = mat.dim();
        if r != c {
            return Err(Error::Shape(format!("density matrix must be square, got {r}x{c}")));
        }
        let herm = hermiticity_defect(&mat);
        if herm > HERMITICITY_TOL {
            return Err(Error::Argument(format!(
                "density matrix not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = trace(&mat);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Argument(format!("density matrix trace {tr} != 1")));
        }
        let min_eig = min_eigenvalue(&mat)?;
        if min_eig < -POSITIVITY_SLACK {
            return Err(Error::Argument(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { dim: r, mat })
    }

    /// Skip validation; for internal intermediates that are checked elsewhere.
    pub fn new_unchecked(mat: Array2<C64>) -> Self {
        let dim = mat.nrows();
        Self { dim, mat }
    }

    pub fn pure(psi: &Array1<C64>) -> Result<Self> {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (n2 - 1.0).abs() > 1e-10 {
            return Err(Error::Argument(format!("state vector norm^2 {n2} != 1")));
        }
        let d = psi.len();
        let mut mat = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                mat[[i, j]] = psi[i] * psi[j].conj();
            }
        }
        Ok(Self { dim: d, mat })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    /// Row-major vectorization: component `i*d + j` equals `rho[i][j]`.
    pub fn vectorize(&self) -> Array1<C64> {
        vectorize(&self.mat)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.mat)
    }

    pub fn trace(&self) -> C64 {
        trace(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(&self.mat)
    }
}

pub fn vectorize(m: &Array2<C64>) -> Array1<C64> {
    Array1::from_iter(m.iter().cloned())
}

pub fn devectorize(v: &Array1<C64>) -> Result<Array2<C64>> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::Shape(format!("vector length {n} is not a perfect square")));
    }
    Ok(Array2::from_shape_vec((d, d), v.to_vec()).expect("length checked"))
}

pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

fn min_eigenvalue(m: &Array2<C64>) -> Result<f64> {
    // symmetrize first so Eigh sees an exactly Hermitian input
    let h = m.mapv(|z| z * cr(0.5)) + m.t().mapv(|z| z.conj() * cr(0.5));
    let (vals, _) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numeric(format!("eigendecomposition failed: {e}")))?;
    Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// A dense superoperator on vectorized states.
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    mat: Array2<C64>,
}

impl Superoperator {
    pub fn from_matrix(mat: Array2<C64>) -> Result<Self> {
        let (r, c) = mat.dim();
        if r != c {
            return Err(Error::Shape(format!("superoperator must be square, got {r}x{c}")));
        }
        let d = (r as f64).sqrt().round() as usize;
        if d * d != r {
            return Err(Error::Shape(format!("superoperator side {r} is not d^2")));
        }
        Ok(Self { dim: d, mat })
    }

    /// System Hilbert-space dimension d (the matrix is d^2 x d^2).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn apply(&self, v: &Array1<C64>) -> Array1<C64> {
        self.mat.dot(v)
    }

    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator { dim: self.dim, mat: self.mat.dot(&other.mat) }
    }
}

/// Left action: `left_super(O) vec(rho) = vec(O rho)`, i.e. `O (x) I`.
pub fn left_super(op: &Array2<C64>) -> Superoperator {
    let d = op.nrows();
    let id = Array2::<C64>::eye(d);
    Superoperator { dim: d, mat: kron(op, &id) }
}

/// Right action: `right_super(O) vec(rho) = vec(rho O)`, i.e. `I (x) O^T`.
pub fn right_super(op: &Array2<C64>) -> Superoperator {
    let d = op.nrows();
    let id = Array2::<C64>::eye(d);
    let ot = op.t().to_owned();
    Superoperator { dim: d, mat: kron(&id, &ot) }
}

/// The coherent generator `-i [H, .]` for a Hermitian Hamiltonian.
pub fn liouvillian(h: &Array2<C64>) -> Result<Superoperator> {
    let defect = hermiticity_defect(h);
    if defect > 1e-8 {
        return Err(Error::Argument(format!(
            "Hamiltonian not Hermitian (defect {defect:.3e})"
        )));
    }
    let l = left_super(h);
    let r = right_super(h);
    let mat = (&l.mat - &r.mat).mapv(|z| z * C64::new(0.0, -1.0));
    Ok(Superoperator { dim: l.dim, mat })
}

/// Half-step propagator `exp(L_S dt/2)` for the symmetric splitting
/// system-half / bath-full / system-half. The per-step error of the
/// composition is third order in the step size.
pub fn trotter_factors(l_s: &Superoperator, dt: f64) -> Result<Superoperator> {
    if dt <= 0.0 {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    let scaled = l_s.mat.mapv(|z| z * cr(dt / 2.0));
    Ok(Superoperator { dim: l_s.dim, mat: expm(&scaled)? })
}

/// Unitary propagator `exp(-i H t)` via exact Hermitian eigendecomposition.
pub fn hamiltonian_propagator(h: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let hs = h.mapv(|z| z * cr(0.5)) + h.t().mapv(|z| z.conj() * cr(0.5));
    let (vals, vecs) = hs
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numeric(format!("eigendecomposition failed: {e}")))?;
    // eigh on a row-major array yields H = conj(V) diag Vt; the eigenvector
    // columns are conj(V)
    let w = vecs.mapv(|z| z.conj());
    let d = h.nrows();
    let mut phases = Array2::<C64>::zeros((d, d));
    for (i, &e) in vals.iter().enumerate() {
        phases[[i, i]] = C64::new(0.0, -e * t).exp();
    }
    Ok(w.dot(&phases).dot(&w.t().mapv(|z| z.conj())))
}

/// Unitary-conjugation superoperator `rho -> U rho U^\dagger` for `U = exp(-iHt)`.
pub fn unitary_step_super(h: &Array2<C64>, t: f64) -> Result<Superoperator> {
    let u = hamiltonian_propagator(h, t)?;
    let udag = u.t().mapv(|z| z.conj());
    Ok(left_super(&u).compose(&right_super(&udag)))
}

/// Matrix exponential by scaling and squaring with a Taylor series pushed to
/// machine precision. Used for non-Hermitian generators (Redfield).
pub fn expm(m: &Array2<C64>) -> Result<Array2<C64>> {
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::Shape("expm needs a square matrix".into()));
    }
    let norm1 = (0..d)
        .map(|j| (0..d).map(|i| m[[i, j]].norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = cr(1.0 / 2f64.powi(squarings as i32));
    let a = m.mapv(|z| z * scale);

    let mut result = Array2::<C64>::eye(d);
    let mut term = Array2::<C64>::eye(d);
    for k in 1..60 {
        term = term.dot(&a).mapv(|z| z / cr(k as f64));
        result = result + &term;
        let tn: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if tn < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    Ok(result)
}

/// Kronecker product.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}
