//! The discretized influence functional compressed into an MPO over time
//! steps (the process tensor), built by sequentially absorbing one
//! influence column per step and emitting one MPO core per step.
//!
//! Every core is diagonal in its physical Liouville leg: the full tensor
//! assigns a scalar weight to each path of Liouville pair indices, and the
//! MPO factorizes that weight with bonds carrying the memory of past steps.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64 as C64;
use std::io::{Read, Write};

use crate::bath::EtaTable;
use crate::error::{Error, Result};
use crate::tensor::{truncated_svd_mat, TruncationPolicy};

/// One influence function `I_m` over Liouville pair indices in the coupling
/// eigenbasis; `values[(late, early)]`, constant along `early` for `m = 0`
/// (stored expanded for uniformity).
#[derive(Debug, Clone)]
pub struct InfluenceFunction {
    pub lag: usize,
    pub values: Array2<C64>,
}

/// Build `I_m` from the eta table and the coupling-operator eigenvalues.
/// Lags beyond the memory cutoff give the all-ones (identity) tensor.
pub fn influence_function(
    eta: &EtaTable,
    m: usize,
    eigenvalues: &[f64],
) -> Result<InfluenceFunction> {
    let d = eigenvalues.len();
    if d == 0 {
        return Err(Error::Argument("empty eigenvalue list".into()));
    }
    let dd = d * d;
    let mut values = Array2::<C64>::ones((dd, dd));
    let eta_m = if m <= eta.memory_cutoff {
        eta.eta_lag(m)
    } else {
        C64::new(0.0, 0.0)
    };
    if eta_m != C64::new(0.0, 0.0) {
        for late in 0..dd {
            let sp_l = eigenvalues[late / d];
            let sm_l = eigenvalues[late % d];
            for early in 0..dd {
                let sp_e = eigenvalues[early / d];
                let sm_e = eigenvalues[early % d];
                let expo = -C64::new(sp_l - sm_l, 0.0)
                    * (eta_m * sp_e - eta_m.conj() * sm_e);
                values[(late, early)] = expo.exp();
            }
        }
    }
    Ok(InfluenceFunction { lag: m, values })
}

/// MPO process tensor: one core per time step, shape
/// `(left_bond, phys = d^2, right_bond)`, diagonal in the physical leg.
#[derive(Debug, Clone)]
pub struct ProcessTensor {
    pub n_steps: usize,
    pub phys_dim: usize,
    pub delta_t: f64,
    pub memory_cutoff: usize,
    pub cores: Vec<Array3<C64>>,
    pub max_bond: usize,
    pub discarded_weight: f64,
}

impl ProcessTensor {
    /// Hilbert dimension `d` of the coupled system site.
    pub fn site_dim(&self) -> usize {
        (self.phys_dim as f64).sqrt().round() as usize
    }

    pub fn bonds(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim().2).collect()
    }

    /// The identity process (no bath influence).
    pub fn identity(n_steps: usize, site_dim: usize, delta_t: f64) -> Self {
        let dd = site_dim * site_dim;
        let cores = (0..n_steps).map(|_| Array3::<C64>::ones((1, dd, 1))).collect();
        Self {
            n_steps,
            phys_dim: dd,
            delta_t,
            memory_cutoff: 1,
            cores,
            max_bond: 1,
            discarded_weight: 0.0,
        }
    }

    /// Weight assigned to one full path of Liouville pair indices.
    pub fn path_value(&self, config: &[usize]) -> Result<C64> {
        if config.len() != self.n_steps {
            return Err(Error::Argument(format!(
                "config length {} does not match {} steps",
                config.len(),
                self.n_steps
            )));
        }
        let mut vec = Array1::<C64>::ones(1);
        for (core, &s) in self.cores.iter().zip(config.iter()) {
            if s >= self.phys_dim {
                return Err(Error::Argument(format!("leg index {s} out of range")));
            }
            let (l, _, r) = core.dim();
            let mut next = Array1::<C64>::zeros(r);
            for b in 0..l {
                for bp in 0..r {
                    next[bp] += vec[b] * core[(b, s, bp)];
                }
            }
            vec = next;
        }
        Ok(vec[0])
    }

    /// Trace-cap vectors per bond: `caps[k]` closes the bond after core `k`
    /// assuming the future system evolution is trace preserving. The cap at
    /// a leg averages the diagonal Liouville pairs, under which every
    /// influence factor is exactly one.
    pub fn cap_vectors(&self) -> Vec<Array1<C64>> {
        let d = self.site_dim();
        let mut caps = vec![Array1::<C64>::ones(1); self.n_steps + 1];
        for k in (1..=self.n_steps).rev() {
            let core = &self.cores[k - 1];
            let (l, _, r) = core.dim();
            let mut c = Array1::<C64>::zeros(l);
            for b in 0..l {
                for i in 0..d {
                    let s = i * d + i;
                    for bp in 0..r {
                        c[b] += core[(b, s, bp)] * caps[k][bp];
                    }
                }
            }
            caps[k - 1] = c.mapv(|z| z / d as f64);
        }
        caps
    }

    /// Containment restriction: trace-cap all legs after step `k`, yielding
    /// a process tensor equivalent to a directly built `k`-step one.
    pub fn restrict(&self, k: usize) -> Result<ProcessTensor> {
        if k == 0 || k > self.n_steps {
            return Err(Error::Argument(format!(
                "restriction step {k} out of range 1..={}",
                self.n_steps
            )));
        }
        let caps = self.cap_vectors();
        let mut cores: Vec<Array3<C64>> = self.cores[..k].to_vec();
        // close the last kept core's right bond with the cap vector
        let last = cores.pop().expect("k >= 1");
        let (l, p, r) = last.dim();
        let mut closed = Array3::<C64>::zeros((l, p, 1));
        for b in 0..l {
            for s in 0..p {
                for bp in 0..r {
                    closed[(b, s, 0)] += last[(b, s, bp)] * caps[k][bp];
                }
            }
        }
        cores.push(closed);
        let max_bond = cores.iter().map(|c| c.dim().2).max().unwrap_or(1);
        Ok(ProcessTensor {
            n_steps: k,
            phys_dim: self.phys_dim,
            delta_t: self.delta_t,
            memory_cutoff: self.memory_cutoff,
            cores,
            max_bond,
            discarded_weight: self.discarded_weight,
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let io = Error::Io;
        w.write_all(b"PTMP").map_err(io)?;
        w.write_u32::<LittleEndian>(1).map_err(io)?;
        w.write_u64::<LittleEndian>(self.n_steps as u64).map_err(io)?;
        w.write_u64::<LittleEndian>(self.phys_dim as u64).map_err(io)?;
        w.write_f64::<LittleEndian>(self.delta_t).map_err(io)?;
        w.write_u64::<LittleEndian>(self.memory_cutoff as u64).map_err(io)?;
        w.write_f64::<LittleEndian>(self.discarded_weight).map_err(io)?;
        for core in &self.cores {
            let (l, _, r) = core.dim();
            w.write_u64::<LittleEndian>(l as u64).map_err(io)?;
            w.write_u64::<LittleEndian>(r as u64).map_err(io)?;
            for z in core.iter() {
                w.write_f64::<LittleEndian>(z.re).map_err(io)?;
                w.write_f64::<LittleEndian>(z.im).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<ProcessTensor> {
        let io = Error::Io;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != b"PTMP" {
            return Err(Error::Config("bad process-tensor file header".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != 1 {
            return Err(Error::Config(format!("unsupported container version {version}")));
        }
        let n_steps = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let phys_dim = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let delta_t = r.read_f64::<LittleEndian>().map_err(io)?;
        let memory_cutoff = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        let discarded_weight = r.read_f64::<LittleEndian>().map_err(io)?;
        let mut cores = Vec::with_capacity(n_steps);
        let mut max_bond = 1usize;
        for _ in 0..n_steps {
            let l = r.read_u64::<LittleEndian>().map_err(io)? as usize;
            let rb = r.read_u64::<LittleEndian>().map_err(io)? as usize;
            let mut data = Vec::with_capacity(l * phys_dim * rb);
            for _ in 0..l * phys_dim * rb {
                let re = r.read_f64::<LittleEndian>().map_err(io)?;
                let im = r.read_f64::<LittleEndian>().map_err(io)?;
                data.push(C64::new(re, im));
            }
            max_bond = max_bond.max(rb);
            cores.push(
                Array3::from_shape_vec((l, phys_dim, rb), data)
                    .map_err(|e| Error::Config(format!("bad core shape: {e}")))?,
            );
        }
        Ok(ProcessTensor {
            n_steps,
            phys_dim,
            delta_t,
            memory_cutoff,
            cores,
            max_bond,
            discarded_weight,
        })
    }
}

fn reshape_lp_r(t: &Array3<C64>) -> Array2<C64> {
    let (l, p, r) = t.dim();
    Array2::from_shape_vec((l * p, r), t.iter().cloned().collect()).expect("shape")
}

fn reshape_l_pr(t: &Array3<C64>) -> Array2<C64> {
    let (l, p, r) = t.dim();
    Array2::from_shape_vec((l, p * r), t.iter().cloned().collect()).expect("shape")
}

fn to3_from_lp_r(m: &Array2<C64>, l: usize, p: usize) -> Array3<C64> {
    let r = m.ncols();
    Array3::from_shape_vec((l, p, r), m.iter().cloned().collect()).expect("shape")
}

fn to3_from_l_pr(m: &Array2<C64>, p: usize, r: usize) -> Array3<C64> {
    let l = m.nrows();
    Array3::from_shape_vec((l, p, r), m.iter().cloned().collect()).expect("shape")
}

fn diag_dot(s: &[f64], vt: &Array2<C64>) -> Array2<C64> {
    let mut out = vt.clone();
    for (i, &sv) in s.iter().enumerate() {
        for v in out.row_mut(i).iter_mut() {
            *v *= sv;
        }
    }
    out
}

fn dot_diag(u: &Array2<C64>, s: &[f64]) -> Array2<C64> {
    let mut out = u.clone();
    for (j, &sv) in s.iter().enumerate() {
        for v in out.column_mut(j).iter_mut() {
            *v *= sv;
        }
    }
    out
}

/// Truncating SVD that raises a capacity error when the hard bond cap bites
/// with no tolerance to absorb the loss.
fn guarded_svd(
    m: Array2<C64>,
    policy: &TruncationPolicy,
) -> Result<(Array2<C64>, Vec<f64>, Array2<C64>, f64)> {
    let total: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    let (u, s, vt, dw) = truncated_svd_mat(m, policy)?;
    if policy.epsilon() == 0.0 && policy.max_bond().is_some() && dw > 1e-14 * total.max(1e-300) {
        return Err(Error::Capacity(format!(
            "bond dimension exceeded the hard cap {} with epsilon = 0; \
             increase epsilon to allow lossy compression",
            policy.max_bond().unwrap()
        )));
    }
    Ok((u, s, vt, dw))
}

/// Left-canonicalize, then sweep back right-to-left truncating under
/// `policy`, leaving the orthogonality center on the first tensor.
/// Returns the discarded weight.
fn compress_message(msg: &mut [Array3<C64>], policy: &TruncationPolicy) -> Result<f64> {
    let n = msg.len();
    let exact = TruncationPolicy::exact();
    for i in 0..n.saturating_sub(1) {
        let (l, p, _) = msg[i].dim();
        let (u, s, vt, _) = truncated_svd_mat(reshape_lp_r(&msg[i]), &exact)?;
        msg[i] = to3_from_lp_r(&u, l, p);
        let carry = diag_dot(&s, &vt);
        let (_, p2, r2) = msg[i + 1].dim();
        let merged = carry.dot(&reshape_l_pr(&msg[i + 1]));
        msg[i + 1] = to3_from_l_pr(&merged, p2, r2);
    }
    let mut dw = 0.0;
    for i in (1..n).rev() {
        let (_, p, r) = msg[i].dim();
        let (u, s, vt, step_dw) = guarded_svd(reshape_l_pr(&msg[i]), policy)?;
        dw += step_dw;
        msg[i] = to3_from_l_pr(&vt, p, r);
        let carry = dot_diag(&u, &s);
        let (l0, p0, _) = msg[i - 1].dim();
        let merged = reshape_lp_r(&msg[i - 1]).dot(&carry);
        msg[i - 1] = to3_from_lp_r(&merged, l0, p0);
    }
    Ok(dw)
}

/// Build the process tensor for one bath over `n_steps` windows.
pub fn build_process_tensor(
    eta: &EtaTable,
    n_steps: usize,
    eigenvalues: &[f64],
    policy: &TruncationPolicy,
) -> Result<ProcessTensor> {
    if n_steps == 0 {
        return Err(Error::Argument("process tensor needs at least one step".into()));
    }
    if eta.memory_cutoff > n_steps {
        return Err(Error::Argument(format!(
            "memory cutoff {} exceeds step count {n_steps}",
            eta.memory_cutoff
        )));
    }
    let d = eigenvalues.len();
    let dd = d * d;
    let k_cut = eta.memory_cutoff.min(n_steps.saturating_sub(1)).max(if n_steps > 1 { 1 } else { 0 });

    // influence tables up to the cutoff
    let influences: Vec<Array2<C64>> = (0..=k_cut)
        .map(|m| influence_function(eta, m, eigenvalues).map(|f| f.values))
        .collect::<Result<_>>()?;

    // message MPS over future legs with a dangling left bond of size 1
    let span = k_cut.min(n_steps - 1);
    let mut msg: Vec<Array3<C64>> = (0..=span).map(|_| Array3::<C64>::ones((1, dd, 1))).collect();

    let mut cores: Vec<Array3<C64>> = Vec::with_capacity(n_steps);
    let mut max_bond = 1usize;
    let mut discarded = 0.0f64;

    for k in 1..=n_steps {
        let m_span = msg.len() - 1; // lags reachable from this step

        // absorb the step-k influence column (Hadamard on phys legs, tensor
        // product on bonds; the copy bond carries the value of s_k forward)
        for j in 0..=m_span {
            let col_l = if j == 0 { 1 } else { dd };
            let col_r = if j == m_span { 1 } else { dd };
            let (bl, _, br) = msg[j].dim();
            let mut merged = Array3::<C64>::zeros((bl * col_l, dd, br * col_r));
            for b in 0..bl {
                for s in 0..dd {
                    for bp in 0..br {
                        let base = msg[j][(b, s, bp)];
                        if base == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for a in 0..col_l {
                            for ap in 0..col_r {
                                let col = column_entry(&influences, j, m_span, s, a, ap, dd);
                                if col != C64::new(0.0, 0.0) {
                                    merged[(b * col_l + a, s, bp * col_r + ap)] = base * col;
                                }
                            }
                        }
                    }
                }
            }
            msg[j] = merged;
        }

        discarded += compress_message(&mut msg, policy)?;

        // emit the first tensor as this step's MPO core
        let first = msg.remove(0);
        if msg.is_empty() {
            max_bond = max_bond.max(first.dim().0);
            cores.push(first);
        } else {
            let (l, p, _) = first.dim();
            let (u, s, vt, dw) = guarded_svd(reshape_lp_r(&first), policy)?;
            discarded += dw;
            // keep the scalar weight in the emitted core: carrying it forward
            // instead would grow the message norm exponentially with the step
            // count and overflow on long builds
            let scale = s.first().copied().filter(|&x| x > 0.0).unwrap_or(1.0);
            let core = to3_from_lp_r(&u.mapv(|z| z * scale), l, p);
            max_bond = max_bond.max(core.dim().2.max(core.dim().0));
            cores.push(core);
            // the remaining S V^t (rescaled to unit top value) contracts
            // into the next tensor
            let s_scaled: Vec<f64> = s.iter().map(|x| x / scale).collect();
            let sv = diag_dot(&s_scaled, &vt);
            let (_, p2, r2) = msg[0].dim();
            let merged = sv.dot(&reshape_l_pr(&msg[0]));
            msg[0] = to3_from_l_pr(&merged, p2, r2);
        }

        // open a new trailing leg when the memory window still fits
        if k + k_cut < n_steps {
            msg.push(Array3::<C64>::ones((1, dd, 1)));
        }
    }

    Ok(ProcessTensor {
        n_steps,
        phys_dim: dd,
        delta_t: eta.delta_t,
        memory_cutoff: eta.memory_cutoff,
        cores,
        max_bond,
        discarded_weight: discarded,
    })
}

/// Entry of the step-k influence column MPS at position `j` of the window:
/// position 0 opens the copy bond (`delta(s, a_out) I_0(s)`), interior
/// positions pass it through (`delta(a_in, a_out) I_j(s, a_in)`), and the
/// last closes it (`I_span(s, a_in)`).
fn column_entry(
    influences: &[Array2<C64>],
    j: usize,
    span: usize,
    s: usize,
    a_in: usize,
    a_out: usize,
    _dd: usize,
) -> C64 {
    let zero = C64::new(0.0, 0.0);
    if span == 0 {
        return influences[0][(s, s)];
    }
    if j == 0 {
        if a_out == s {
            influences[0][(s, s)]
        } else {
            zero
        }
    } else if j < span {
        if a_in == a_out {
            influences[j][(s, a_in)]
        } else {
            zero
        }
    } else {
        influences[span][(s, a_in)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{eta_coefficients, SpectralDensity};

    fn fig_eta(alpha: f64, n: usize, cutoff: usize) -> EtaTable {
        let j = SpectralDensity::ohmic(alpha, 4.0).unwrap();
        eta_coefficients(&j, 0.2, 0.2, n, cutoff).unwrap()
    }

    fn qubit_eigs() -> Vec<f64> {
        vec![1.0, -1.0]
    }

    #[test]
    fn influence_zero_coupling_all_ones() {
        let eta = fig_eta(0.0, 4, 2);
        let f = influence_function(&eta, 1, &qubit_eigs()).unwrap();
        assert!(f.values.iter().all(|&z| z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn influence_diagonal_pairs_are_unity() {
        let eta = fig_eta(0.1, 4, 2);
        for m in 0..=2 {
            let f = influence_function(&eta, m, &qubit_eigs()).unwrap();
            // diagonal late pair (s+ = s-) leaves every entry at 1
            for late in [0usize, 3] {
                for early in 0..4 {
                    assert!((f.values[(late, early)] - C64::new(1.0, 0.0)).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn influence_matches_symbolic_formula() {
        // m=0, eta = 0.1 + 0.05i, eigenvalues +-1, pair (+1, -1):
        // exp(-(1 - (-1)) (eta (+1) - eta* (-1))) = exp(-2 (eta + eta*))
        //   with the cross pair (s+, s-) = (+1, -1) evaluated at itself
        let mut eta = fig_eta(0.1, 4, 2);
        eta.entries[0] = [0.1, 0.05];
        let f = influence_function(&eta, 0, &qubit_eigs()).unwrap();
        // late pair (+1, -1) is index (0*2+1) = 1 in the (i, j) ordering
        let got = f.values[(1, 1)];
        let e = C64::new(0.1, 0.05);
        let want = (-C64::new(2.0, 0.0) * (e - e.conj() * -1.0)).exp();
        // (s+ - s-) = 2; eta s+ - eta* s- = eta + eta*
        let direct = (-(C64::new(2.0, 0.0)) * (e + e.conj())).exp();
        assert!((got - want).norm() < 1e-15);
        assert!((got - direct).norm() < 1e-15);
    }

    #[test]
    fn influence_beyond_cutoff_is_identity() {
        let eta = fig_eta(0.1, 6, 2);
        let f = influence_function(&eta, 3, &qubit_eigs()).unwrap();
        assert!(f.values.iter().all(|&z| z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn build_zero_coupling_gives_trivial_bonds() {
        let eta = fig_eta(0.0, 5, 3);
        let pt =
            build_process_tensor(&eta, 5, &qubit_eigs(), &TruncationPolicy::exact()).unwrap();
        assert_eq!(pt.max_bond, 1);
        for config in [[0usize; 5], [3; 5], [1, 2, 0, 3, 1]] {
            let v = pt.path_value(&config).unwrap();
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-12, "path value {v}");
        }
    }

    // Exhaustive oracle: the MPO contraction over every Liouville path
    // equals the direct product of influence functions.
    #[test]
    fn full_contraction_matches_path_product_oracle() {
        let n = 3;
        let eta = fig_eta(0.1, n, n);
        let eigs = qubit_eigs();
        let policy = TruncationPolicy::new(1e-12, None).unwrap();
        let pt = build_process_tensor(&eta, n, &eigs, &policy).unwrap();
        let influences: Vec<Array2<C64>> = (0..n)
            .map(|m| influence_function(&eta, m, &eigs).unwrap().values)
            .collect();
        let dd = 4;
        for c0 in 0..dd {
            for c1 in 0..dd {
                for c2 in 0..dd {
                    let config = [c0, c1, c2];
                    let mut want = C64::new(1.0, 0.0);
                    for k in 0..n {
                        for kp in 0..=k {
                            want *= influences[k - kp][(config[k], config[kp])];
                        }
                    }
                    let got = pt.path_value(&config).unwrap();
                    assert!(
                        (got - want).norm() < 1e-10,
                        "config {config:?}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn markov_mode_has_small_bonds() {
        let n = 6;
        let eta = fig_eta(0.1, n, 1);
        let pt = build_process_tensor(&eta, n, &qubit_eigs(), &TruncationPolicy::exact())
            .unwrap();
        assert!(pt.max_bond <= 4, "max bond {} for one-step memory", pt.max_bond);
        // nearest-neighbor structure: the full contraction factorizes into
        // adjacent-step influence products
        let influences: Vec<Array2<C64>> = (0..=1)
            .map(|m| influence_function(&eta, m, &qubit_eigs()).unwrap().values)
            .collect();
        let config = [1usize, 2, 0, 3, 1, 2];
        let mut want = C64::new(1.0, 0.0);
        for k in 0..n {
            want *= influences[0][(config[k], config[k])];
            if k > 0 {
                want *= influences[1][(config[k], config[k - 1])];
            }
        }
        let got = pt.path_value(&config).unwrap();
        assert!((got - want).norm() < 1e-10);
    }

    #[test]
    fn restrict_full_length_is_identity_operation() {
        let n = 4;
        let eta = fig_eta(0.1, n, n);
        let pt = build_process_tensor(&eta, n, &qubit_eigs(), &TruncationPolicy::exact())
            .unwrap();
        let r = pt.restrict(n).unwrap();
        for config in [[0usize, 1, 2, 3], [3, 3, 3, 3], [2, 0, 1, 2]] {
            let a = pt.path_value(&config).unwrap();
            let b = r.path_value(&config).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn restrict_matches_direct_build() {
        let n = 4;
        let keep = 2;
        let eta = fig_eta(0.1, n, n);
        let eta_short = fig_eta(0.1, keep, keep);
        let policy = TruncationPolicy::new(1e-12, None).unwrap();
        let long = build_process_tensor(&eta, n, &qubit_eigs(), &policy).unwrap();
        let short = build_process_tensor(&eta_short, keep, &qubit_eigs(), &policy).unwrap();
        let restricted = long.restrict(keep).unwrap();
        for c0 in 0..4 {
            for c1 in 0..4 {
                let a = restricted.path_value(&[c0, c1]).unwrap();
                let b = short.path_value(&[c0, c1]).unwrap();
                assert!((a - b).norm() < 1e-9, "({c0},{c1}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn restrict_of_identity_process() {
        let eta = fig_eta(0.0, 3, 2);
        let pt = build_process_tensor(&eta, 3, &qubit_eigs(), &TruncationPolicy::exact())
            .unwrap();
        let r = pt.restrict(2).unwrap();
        assert_eq!(r.n_steps, 2);
        for c0 in 0..4 {
            for c1 in 0..4 {
                let v = r.path_value(&[c0, c1]).unwrap();
                assert!((v - C64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cap_normalization_at_zero_coupling() {
        let eta = fig_eta(0.0, 5, 3);
        let pt = build_process_tensor(&eta, 5, &qubit_eigs(), &TruncationPolicy::exact())
            .unwrap();
        let caps = pt.cap_vectors();
        // capping everything contracts the identity process to exactly 1
        assert!((caps[0][0] - C64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn capacity_error_on_hard_cap_without_tolerance() {
        let n = 6;
        let eta = fig_eta(0.5, n, n);
        let policy = TruncationPolicy::new(0.0, Some(2)).unwrap();
        match build_process_tensor(&eta, n, &qubit_eigs(), &policy) {
            Err(Error::Capacity(msg)) => assert!(msg.contains("epsilon")),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn restrict_rejects_out_of_range() {
        let eta = fig_eta(0.1, 3, 2);
        let pt = build_process_tensor(&eta, 3, &qubit_eigs(), &TruncationPolicy::exact())
            .unwrap();
        assert!(pt.restrict(0).is_err());
        assert!(pt.restrict(4).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let eta = fig_eta(0.1, 4, 3);
        let pt = build_process_tensor(
            &eta,
            4,
            &qubit_eigs(),
            &TruncationPolicy::new(1e-7, None).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        pt.write_to(&mut buf).unwrap();
        let back = ProcessTensor::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(pt.n_steps, back.n_steps);
        assert_eq!(pt.phys_dim, back.phys_dim);
        assert_eq!(pt.bonds(), back.bonds());
        for (a, b) in pt.cores.iter().zip(back.cores.iter()) {
            assert_eq!(a, b);
        }
    }
}
