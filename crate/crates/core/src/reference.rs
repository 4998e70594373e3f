//! Independent solvers used to cross-check the tensor-network pipeline:
//! dense exact evolution, the Bloch-Redfield master equation, and a
//! brute-force path summation of the discretized influence functional.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::bath::{EtaTable, SpectralDensity};
use crate::error::{Error, Result};
use crate::liouville::{expm, hamiltonian_propagator, left_super, right_super, DensityMatrix, Superoperator};
use crate::models::dense_eigensolve;
use crate::quad::integrate;

/// Closed-system evolution `rho(t) = U rho0 U^dagger` at the given times.
pub fn exact_evolve(
    h: &Array2<C64>,
    rho0: &DensityMatrix,
    times: &[f64],
) -> Result<Vec<DensityMatrix>> {
    let d = h.nrows();
    if d > 1 << 10 {
        return Err(Error::Capacity(format!("dense evolution capped at 2^10, got {d}")));
    }
    if rho0.dim() != d {
        return Err(Error::Shape(format!(
            "state dimension {} does not match Hamiltonian dimension {d}",
            rho0.dim()
        )));
    }
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let u = hamiltonian_propagator(h, t)?;
        let udag = u.t().mapv(|z| z.conj());
        out.push(DensityMatrix::new_unchecked(u.dot(rho0.matrix()).dot(&udag)));
    }
    Ok(out)
}

/// One bath attached to the system for the Redfield solver.
#[derive(Debug, Clone)]
pub struct RedfieldBath {
    pub spectral_density: SpectralDensity,
    pub temperature: f64,
    /// Hermitian system-side coupling operator (full system dimension).
    pub coupling: Array2<C64>,
}

#[derive(Debug, Clone, Copy)]
pub struct RedfieldOptions {
    /// Rotating-wave (secular) approximation; full Redfield when false.
    pub secular: bool,
    /// Include the principal-value (Lamb-shift) part of the spectra.
    pub lamb_shift: bool,
}

impl Default for RedfieldOptions {
    fn default() -> Self {
        Self { secular: false, lamb_shift: true }
    }
}

/// Full Fourier transform of the bath correlation function,
/// `gamma(w) = 2 J(w)(n(w)+1)` for `w > 0`, `2 J(|w|) n(|w|)` for `w < 0`,
/// continuous limit at `w = 0`.
pub fn rate_spectrum(j: &SpectralDensity, temperature: f64, omega: f64) -> Result<f64> {
    if omega.abs() < 1e-12 {
        if temperature == 0.0 {
            return Ok(0.0);
        }
        // gamma(0) = 2 T lim_{w->0} J(w)/w
        let eps = 1e-8;
        return Ok(2.0 * temperature * j.value(eps)? / eps);
    }
    let w = omega.abs();
    let jw = j.value(w)?;
    if temperature == 0.0 {
        return Ok(if omega > 0.0 { 2.0 * jw } else { 0.0 });
    }
    let n = 1.0 / ((w / temperature).exp() - 1.0);
    Ok(if omega > 0.0 { 2.0 * jw * (n + 1.0) } else { 2.0 * jw * n })
}

/// Lamb-shift spectrum `S(w) = (1/2pi) PV int gamma(v)/(w - v) dv`,
/// computed with the symmetric-pair substitution that removes the pole.
pub fn lamb_shift_spectrum(j: &SpectralDensity, temperature: f64, omega: f64) -> Result<f64> {
    let window = 40.0 * j.omega_c + omega.abs();
    let pv = integrate(
        |u| {
            let lo = rate_spectrum(j, temperature, omega - u).unwrap_or(0.0);
            let hi = rate_spectrum(j, temperature, omega + u).unwrap_or(0.0);
            (lo - hi) / u
        },
        1e-12,
        window,
        1e-8,
        1e-12,
    )?;
    Ok(pv / (2.0 * std::f64::consts::PI))
}

/// One-sided spectrum `Gamma(w) = gamma(w)/2 + i S(w)`.
fn one_sided_spectrum(
    bath: &RedfieldBath,
    omega: f64,
    lamb_shift: bool,
) -> Result<C64> {
    let re = 0.5 * rate_spectrum(&bath.spectral_density, bath.temperature, omega)?;
    let im = if lamb_shift {
        lamb_shift_spectrum(&bath.spectral_density, bath.temperature, omega)?
    } else {
        0.0
    };
    Ok(C64::new(re, im))
}

/// Dense Bloch-Redfield generator with the second Markov approximation.
pub fn redfield_generator(
    h: &Array2<C64>,
    baths: &[RedfieldBath],
    opts: &RedfieldOptions,
) -> Result<Superoperator> {
    let d = h.nrows();
    let (vecs, vals) = dense_eigensolve(h)?;
    let vdag = vecs.t().mapv(|z| z.conj());

    let mut gen = crate::liouville::liouvillian(h)?.matrix().clone();

    for bath in baths {
        if bath.coupling.nrows() != d {
            return Err(Error::Shape(format!(
                "coupling operator dimension {} does not match system {d}",
                bath.coupling.nrows()
            )));
        }
        // coupling operator in the energy eigenbasis
        let a_eig = vdag.dot(&bath.coupling).dot(&vecs);

        if opts.secular {
            gen = gen + secular_dissipator(bath, &a_eig, &vals, &vecs, opts.lamb_shift)?;
        } else {
            // Lambda_ab = Gamma(E_b - E_a) A_ab, back in the original basis
            let mut lam_eig = Array2::<C64>::zeros((d, d));
            for a in 0..d {
                for b in 0..d {
                    if a_eig[(a, b)].norm() < 1e-14 {
                        continue;
                    }
                    let w = vals[b] - vals[a];
                    lam_eig[(a, b)] = one_sided_spectrum(bath, w, opts.lamb_shift)? * a_eig[(a, b)];
                }
            }
            let lam = vecs.dot(&lam_eig).dot(&vdag);
            let lam_dag = lam.t().mapv(|z| z.conj());
            let a_op = &bath.coupling;
            // rho' = Lam rho A - A Lam rho + A rho Lam^dag - rho Lam^dag A
            let term = left_super(&lam).compose(&right_super(a_op)).matrix().clone()
                - left_super(&a_op.dot(&lam)).matrix()
                + left_super(a_op).compose(&right_super(&lam_dag)).matrix()
                - right_super(&lam_dag.dot(a_op)).matrix().clone();
            gen = gen + term;
        }
    }
    Superoperator::from_matrix(gen)
}

fn secular_dissipator(
    bath: &RedfieldBath,
    a_eig: &Array2<C64>,
    vals: &[f64],
    vecs: &Array2<C64>,
    lamb_shift: bool,
) -> Result<Array2<C64>> {
    let d = vals.len();
    let vdag = vecs.t().mapv(|z| z.conj());
    // cluster transition frequencies
    let mut freqs: Vec<f64> = Vec::new();
    let tol = 1e-8;
    for a in 0..d {
        for b in 0..d {
            let w = vals[b] - vals[a];
            if !freqs.iter().any(|&f| (f - w).abs() < tol) {
                freqs.push(w);
            }
        }
    }
    // warn on clusters that merged distinct gaps
    for a in 0..d {
        for b in 0..d {
            let w = vals[b] - vals[a];
            if freqs
                .iter()
                .any(|&f| (f - w).abs() < tol && (f - w).abs() > 0.0 && f != w)
            {
                eprintln!(
                    "warning: secular approximation merged near-degenerate \
                     transition frequencies around {w:.6}"
                );
            }
        }
    }

    let d2 = d * d;
    let mut out = Array2::<C64>::zeros((d2, d2));
    for &w in &freqs {
        // A(w) in the eigenbasis, then rotated back
        let mut aw_eig = Array2::<C64>::zeros((d, d));
        for a in 0..d {
            for b in 0..d {
                if (vals[b] - vals[a] - w).abs() < tol {
                    aw_eig[(a, b)] = a_eig[(a, b)];
                }
            }
        }
        let aw = vecs.dot(&aw_eig).dot(&vdag);
        let aw_dag = aw.t().mapv(|z| z.conj());
        let adag_a = aw_dag.dot(&aw);
        let gamma = rate_spectrum(&bath.spectral_density, bath.temperature, w)?;
        // gamma(w) [ A rho A^dag - {A^dag A, rho}/2 ]
        let jump = left_super(&aw).compose(&right_super(&aw_dag)).matrix().clone();
        let anti = left_super(&adag_a).matrix().mapv(|z| z * 0.5)
            + right_super(&adag_a).matrix().mapv(|z| z * 0.5);
        out = out + (jump - anti).mapv(|z| z * gamma);
        if lamb_shift {
            let s = lamb_shift_spectrum(&bath.spectral_density, bath.temperature, w)?;
            // -i [ S(w) A^dag A, rho ]
            let comm = left_super(&adag_a).matrix() - right_super(&adag_a).matrix();
            out = out + comm.mapv(|z| z * C64::new(0.0, -s));
        }
    }
    Ok(out)
}

/// Propagate the Redfield equation with a fixed step, recording the state at
/// every step (index 0 is `rho0`). Positivity violations are reported to
/// stderr, not errored (a known artifact of the Redfield equation).
pub fn bloch_redfield_evolve(
    h: &Array2<C64>,
    baths: &[RedfieldBath],
    opts: &RedfieldOptions,
    rho0: &DensityMatrix,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<DensityMatrix>> {
    if dt <= 0.0 {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    let gen = redfield_generator(h, baths, opts)?;
    let step = expm(&gen.matrix().mapv(|z| z * C64::new(dt, 0.0)))?;
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(rho0.clone());
    let mut v = rho0.vectorize();
    let mut warned = false;
    for _ in 0..n_steps {
        v = step.dot(&v);
        let m = crate::liouville::devectorize(&v)?;
        let rho = DensityMatrix::new_unchecked(m);
        if !warned {
            if let Ok(min) = rho.min_eigenvalue() {
                if min < -1e-6 {
                    eprintln!(
                        "warning: Redfield state left the positive cone \
                         (min eigenvalue {min:.3e})"
                    );
                    warned = true;
                }
            }
        }
        states.push(rho);
    }
    Ok(states)
}

/// One bath entering the path summation: its eta table plus the coupling
/// eigenvalue carried by each Hilbert basis state of the (rotated) frame.
#[derive(Debug, Clone)]
pub struct PathBath {
    pub eta: EtaTable,
    pub eigenvalues: Vec<f64>,
}

const MAX_PATHS: u64 = 50_000_000;

/// Brute-force evaluation of the discretized open-system evolution by
/// explicit summation over all Liouville-index paths.
///
/// All inputs live in the coupling eigenbasis frame: `gh` is the half-step
/// system Liouville propagator and `rho0_vec` the vectorized initial state,
/// both rotated so every bath coupling operator is diagonal. The step
/// structure is half-system, bath window, half-system, repeated `n_steps`
/// times with interior half-steps merged.
pub fn path_sum(
    gh: &Superoperator,
    baths: &[PathBath],
    rho0_vec: &Array1<C64>,
    n_steps: usize,
) -> Result<Array1<C64>> {
    let d2 = rho0_vec.len();
    let d = (d2 as f64).sqrt().round() as usize;
    if d * d != d2 {
        return Err(Error::Shape(format!("state length {d2} is not d^2")));
    }
    if gh.dim() != d {
        return Err(Error::Shape(format!(
            "propagator dimension {} does not match state dimension {d}",
            gh.dim()
        )));
    }
    for bath in baths {
        if bath.eigenvalues.len() != d {
            return Err(Error::Shape(format!(
                "bath eigenvalue list length {} does not match dimension {d}",
                bath.eigenvalues.len()
            )));
        }
    }
    if n_steps == 0 {
        return Ok(rho0_vec.clone());
    }
    let n_paths = (d2 as u64).checked_pow(n_steps as u32).filter(|&p| p <= MAX_PATHS);
    if n_paths.is_none() {
        return Err(Error::Capacity(format!(
            "path summation over {d2}^{n_steps} paths exceeds the limit"
        )));
    }

    // influence factor between Liouville indices at lag m, per bath
    let influence = |bath: &PathBath, m: usize, s_late: usize, s_early: usize| -> C64 {
        let eta = bath.eta.eta_lag(m);
        let sp_l = bath.eigenvalues[s_late / d];
        let sm_l = bath.eigenvalues[s_late % d];
        let sp_e = bath.eigenvalues[s_early / d];
        let sm_e = bath.eigenvalues[s_early % d];
        let expo = -C64::new(sp_l - sm_l, 0.0) * (eta * sp_e - eta.conj() * sm_e);
        expo.exp()
    };

    let gf = gh.compose(gh); // interior full step
    let v1 = gh.apply(rho0_vec); // state entering the first bath window

    let mut acc = Array1::<C64>::zeros(d2);
    let mut path = vec![0usize; n_steps]; // s_1 .. s_N
    loop {
        // weight: propagators between consecutive window indices
        let mut w = v1[path[0]];
        if w.norm_sqr() > 0.0 {
            for k in 1..n_steps {
                w *= gf.matrix()[(path[k], path[k - 1])];
                if w.norm_sqr() == 0.0 {
                    break;
                }
            }
        }
        if w.norm_sqr() > 0.0 {
            // influence product over all ordered pairs within memory
            'inf: for bath in baths {
                let cutoff = bath.eta.memory_cutoff;
                for k in 0..n_steps {
                    for kp in k.saturating_sub(cutoff)..=k {
                        w *= influence(bath, k - kp, path[k], path[kp]);
                        if w.norm_sqr() == 0.0 {
                            break 'inf;
                        }
                    }
                }
            }
            acc[path[n_steps - 1]] += w;
        }
        // next path (odometer)
        let mut pos = 0;
        loop {
            path[pos] += 1;
            if path[pos] < d2 {
                break;
            }
            path[pos] = 0;
            pos += 1;
            if pos == n_steps {
                return Ok(gh.apply(&acc));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::eta_coefficients;
    use crate::liouville::{liouvillian, trotter_factors, vectorize};
    use crate::models::{pauli_x, pauli_z, TwoQubitModel};
    use ndarray::array;

    fn cr(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn plus_state() -> DensityMatrix {
        DensityMatrix::new_unchecked(array![[cr(0.5), cr(0.5)], [cr(0.5), cr(0.5)]])
    }

    #[test]
    fn exact_evolve_zero_hamiltonian_constant() {
        let h = Array2::<C64>::zeros((2, 2));
        let rho = plus_state();
        let states = exact_evolve(&h, &rho, &[0.0, 1.0, 5.0]).unwrap();
        for s in states {
            let gap = (s.matrix() - rho.matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(gap < 1e-14);
        }
    }

    #[test]
    fn exact_evolve_precession_phase() {
        let h = pauli_z().mapv(|z| z * cr(0.5));
        let t = 1.3;
        let states = exact_evolve(&h, &plus_state(), &[t]).unwrap();
        let expect = 0.5 * C64::new(0.0, -t).exp();
        assert!((states[0].matrix()[(0, 1)] - expect).norm() < 1e-12);
    }

    fn qubit_bath(alpha: f64) -> RedfieldBath {
        RedfieldBath {
            spectral_density: SpectralDensity::ohmic(alpha, 4.0).unwrap(),
            temperature: 0.2,
            coupling: pauli_x(),
        }
    }

    #[test]
    fn redfield_zero_coupling_reduces_to_unitary() {
        let model = TwoQubitModel::default();
        let h = model.hamiltonian();
        let rho0 = model.ground_state().unwrap();
        // perturb off the eigenstate so there is actual dynamics
        let mut m = rho0.matrix().clone();
        m[(0, 0)] += cr(0.1);
        m[(3, 3)] -= cr(0.1);
        let rho0 = DensityMatrix::new_unchecked(m);
        let bath = RedfieldBath {
            spectral_density: SpectralDensity::ohmic(0.0, 4.0).unwrap(),
            temperature: 0.2,
            coupling: crate::liouville::kron(&pauli_x(), &crate::models::identity2()),
        };
        let states = bloch_redfield_evolve(
            &h,
            &[bath],
            &RedfieldOptions::default(),
            &rho0,
            0.1,
            20,
        )
        .unwrap();
        let oracle = exact_evolve(&h, &rho0, &[2.0]).unwrap();
        let gap = (states[20].matrix() - oracle[0].matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(gap < 1e-8, "gap {gap}");
    }

    #[test]
    fn redfield_preserves_trace_and_hermiticity() {
        let h = pauli_z().mapv(|z| z * cr(0.5));
        let states = bloch_redfield_evolve(
            &h,
            &[qubit_bath(0.05)],
            &RedfieldOptions::default(),
            &plus_state(),
            0.2,
            50,
        )
        .unwrap();
        for s in &states {
            assert!((s.trace().re - 1.0).abs() < 1e-10);
            assert!(s.hermiticity_defect() < 1e-10);
        }
    }

    #[test]
    fn redfield_thermalizes_to_gibbs_ratio() {
        // single qubit, weak Ohmic coupling: detailed balance fixes the
        // population ratio at e^{-w/T}
        let omega = 1.0;
        let temp = 0.2;
        let h = pauli_z().mapv(|z| z * cr(omega / 2.0));
        let bath = qubit_bath(0.001);
        let states = bloch_redfield_evolve(
            &h,
            &[bath],
            &RedfieldOptions::default(),
            &plus_state(),
            5.0,
            1200,
        )
        .unwrap();
        let last = states.last().unwrap();
        let ratio = last.matrix()[(0, 0)].re / last.matrix()[(1, 1)].re;
        let want = (-omega / temp).exp();
        assert!(
            (ratio - want).abs() / want < 0.02,
            "population ratio {ratio} vs Gibbs {want}"
        );
    }

    #[test]
    fn secular_and_full_agree_for_nondegenerate_qubit() {
        let h = pauli_z().mapv(|z| z * cr(0.5));
        let full = bloch_redfield_evolve(
            &h,
            &[qubit_bath(0.01)],
            &RedfieldOptions { secular: false, lamb_shift: false },
            &plus_state(),
            0.5,
            40,
        )
        .unwrap();
        let sec = bloch_redfield_evolve(
            &h,
            &[qubit_bath(0.01)],
            &RedfieldOptions { secular: true, lamb_shift: false },
            &plus_state(),
            0.5,
            40,
        )
        .unwrap();
        // populations agree closely; coherences differ only at O(gamma/w)
        for (a, b) in full.iter().zip(sec.iter()) {
            assert!((a.matrix()[(0, 0)].re - b.matrix()[(0, 0)].re).abs() < 1e-3);
        }
    }

    #[test]
    fn rate_spectrum_detailed_balance() {
        let j = SpectralDensity::ohmic(0.1, 4.0).unwrap();
        let temp = 0.5;
        for w in [0.3, 1.0, 2.7] {
            let up = rate_spectrum(&j, temp, -w).unwrap();
            let down = rate_spectrum(&j, temp, w).unwrap();
            assert!((up / down - (-w / temp).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn path_sum_zero_coupling_matches_trotterized_unitary() {
        let h = pauli_z().mapv(|z| z * cr(0.5)) + pauli_x().mapv(|z| z * cr(0.3));
        let dt = 0.2;
        let n = 4;
        let l = liouvillian(&h).unwrap();
        let gh = trotter_factors(&l, dt).unwrap();
        let eta = eta_coefficients(
            &SpectralDensity::ohmic(0.0, 4.0).unwrap(),
            0.2,
            dt,
            n,
            n,
        )
        .unwrap();
        let bath = PathBath { eta, eigenvalues: vec![1.0, -1.0] };
        let rho0 = plus_state();
        let out = path_sum(&gh, &[bath], &rho0.vectorize(), n).unwrap();
        // oracle: 2n half steps of the same propagator
        let mut v = rho0.vectorize();
        for _ in 0..2 * n {
            v = gh.apply(&v);
        }
        let gap = out
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(gap < 1e-12, "gap {gap}");
    }

    #[test]
    fn path_sum_pure_dephasing_closed_form() {
        // H = 0, coupling diagonal with eigenvalues +-1: the coherence
        // picks up exp(-4 [N Re eta_0 + sum_m (N-m) Re eta_m]) and the
        // populations stay fixed.
        let dt = 0.2;
        let n = 4;
        let j = SpectralDensity::ohmic(0.1, 4.0).unwrap();
        let eta = eta_coefficients(&j, 0.2, dt, n, n).unwrap();
        let mut damping = n as f64 * eta.eta_lag(0).re;
        for m in 1..n {
            damping += (n - m) as f64 * eta.eta_lag(m).re;
        }
        let factor = (-4.0 * damping).exp();

        let gh = Superoperator::from_matrix(Array2::<C64>::eye(4)).unwrap();
        let bath = PathBath { eta, eigenvalues: vec![1.0, -1.0] };
        let rho0 = plus_state();
        let out = path_sum(&gh, &[bath], &rho0.vectorize(), n).unwrap();
        let m = crate::liouville::devectorize(&out).unwrap();
        assert!((m[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((m[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!(
            (m[(0, 1)].re - 0.5 * factor).abs() < 1e-12,
            "coherence {} vs closed form {}",
            m[(0, 1)].re,
            0.5 * factor
        );
        assert!(m[(0, 1)].im.abs() < 1e-12);
    }

    #[test]
    fn path_sum_preserves_trace() {
        let h = pauli_z().mapv(|z| z * cr(0.5)) + pauli_x().mapv(|z| z * cr(0.3));
        let dt = 0.2;
        let n = 3;
        // rotate into the sigma_x coupling eigenbasis
        let v = crate::models::coupling_rotation_x();
        let vdag = v.t().mapv(|z| z.conj());
        let h_rot = vdag.dot(&h).dot(&v);
        let l = liouvillian(&h_rot).unwrap();
        let gh = trotter_factors(&l, dt).unwrap();
        let j = SpectralDensity::ohmic(0.1, 4.0).unwrap();
        let eta = eta_coefficients(&j, 0.2, dt, n, n).unwrap();
        let bath = PathBath { eta, eigenvalues: vec![1.0, -1.0] };
        let rho0_rot = vdag.dot(plus_state().matrix()).dot(&v);
        let out = path_sum(&gh, &[bath], &vectorize(&rho0_rot), n).unwrap();
        let m = crate::liouville::devectorize(&out).unwrap();
        assert!((crate::liouville::trace(&m).re - 1.0).abs() < 1e-10);
        assert!(crate::liouville::trace(&m).im.abs() < 1e-10);
        assert!(crate::liouville::hermiticity_defect(&m) < 1e-10);
    }

    #[test]
    fn path_sum_capacity_guard() {
        let gh = Superoperator::from_matrix(Array2::<C64>::eye(16)).unwrap();
        let j = SpectralDensity::ohmic(0.1, 4.0).unwrap();
        let eta = eta_coefficients(&j, 0.2, 0.2, 10, 10).unwrap();
        let bath = PathBath { eta, eigenvalues: vec![1.0, 1.0, -1.0, -1.0] };
        let rho0 = Array1::<C64>::zeros(16);
        assert!(matches!(
            path_sum(&gh, &[bath], &rho0, 10),
            Err(Error::Capacity(_))
        ));
    }
}
