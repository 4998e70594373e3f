//! Dense complex tensor algebra with truncated SVD.
//!
//! Everything downstream (process tensors, MPS evolution, reference solvers)
//! runs on these primitives. Storage is row-major and dense; the physical legs
//! in this problem are tiny (d² = 4 or 16), so sparsity buys nothing.

use ndarray::{ArrayD, Array2, IxDyn};
use ndarray_linalg::SVDInto;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Relative floor below which singular values are treated as numerical noise.
const NOISE_FLOOR: f64 = 1e-14;

/// Dense complex tensor of arbitrary rank, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    data: ArrayD<C64>,
}

impl DenseTensor {
    /// Build from a shape and a row-major entry list.
    pub fn new(shape: &[usize], entries: Vec<C64>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape("zero-length tensor axis".into()));
        }
        if entries.len() != count {
            return Err(Error::Shape(format!(
                "entry count {} does not match shape {:?} (product {})",
                entries.len(),
                shape,
                count
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("non-finite tensor entry".into()));
        }
        let data = ArrayD::from_shape_vec(IxDyn(shape), entries)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(Self { data })
    }

    pub fn from_array(data: ArrayD<C64>) -> Self {
        Self { data: as_standard(data) }
    }

    pub fn from_matrix(m: Array2<C64>) -> Self {
        Self { data: m.into_dyn() }
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn rank(&self) -> usize {
        self.data.ndim()
    }

    pub fn array(&self) -> &ArrayD<C64> {
        &self.data
    }

    pub fn into_array(self) -> ArrayD<C64> {
        self.data
    }

    /// View as a matrix; errors unless rank is exactly 2.
    pub fn as_matrix(&self) -> Result<Array2<C64>> {
        if self.rank() != 2 {
            return Err(Error::Shape(format!(
                "expected a matrix, got rank {}",
                self.rank()
            )));
        }
        let sh = (self.shape()[0], self.shape()[1]);
        Ok(self
            .data
            .clone()
            .into_shape(sh)
            .expect("rank-2 reshape cannot fail"))
    }

    /// Pairwise contraction over the given (axis-of-self, axis-of-other) pairs.
    ///
    /// Result legs are the unpaired legs of `self` followed by the unpaired
    /// legs of `other`, in their original order.
    pub fn contract(&self, other: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
        let ra = self.rank();
        let rb = other.rank();
        let mut seen_a = vec![false; ra];
        let mut seen_b = vec![false; rb];
        for &(ia, ib) in pairs {
            if ia >= ra || ib >= rb {
                return Err(Error::Argument(format!(
                    "contraction pair ({ia}, {ib}) out of range for ranks ({ra}, {rb})"
                )));
            }
            if seen_a[ia] || seen_b[ib] {
                return Err(Error::Argument(format!(
                    "axis repeated in contraction pairs: ({ia}, {ib})"
                )));
            }
            seen_a[ia] = true;
            seen_b[ib] = true;
            if self.shape()[ia] != other.shape()[ib] {
                return Err(Error::Shape(format!(
                    "contracted axes differ: {} (axis {ia}) vs {} (axis {ib})",
                    self.shape()[ia],
                    other.shape()[ib]
                )));
            }
        }

        let free_a: Vec<usize> = (0..ra).filter(|i| !seen_a[*i]).collect();
        let free_b: Vec<usize> = (0..rb).filter(|i| !seen_b[*i]).collect();

        // Move paired legs of `self` to the back and paired legs of `other`
        // to the front (both in pair order), then multiply as matrices.
        let mut order_a = free_a.clone();
        order_a.extend(pairs.iter().map(|p| p.0));
        let mut order_b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        order_b.extend(free_b.clone());

        let pa = as_standard(self.data.clone().permuted_axes(IxDyn(&order_a)));
        let pb = as_standard(other.data.clone().permuted_axes(IxDyn(&order_b)));

        let m: usize = free_a.iter().map(|&i| self.shape()[i]).product();
        let k: usize = pairs.iter().map(|p| self.shape()[p.0]).product();
        let n: usize = free_b.iter().map(|&i| other.shape()[i]).product();

        let ma = pa.into_shape((m, k)).expect("contiguous reshape");
        let mb = pb.into_shape((k, n)).expect("contiguous reshape");
        let prod = ma.dot(&mb);

        let mut out_shape: Vec<usize> = free_a.iter().map(|&i| self.shape()[i]).collect();
        out_shape.extend(free_b.iter().map(|&i| other.shape()[i]));
        if out_shape.is_empty() {
            out_shape.push(1);
            // scalar result kept as a 1-element rank-1 tensor
        }
        let data = prod
            .into_shape(IxDyn(&out_shape))
            .expect("contiguous reshape");
        Ok(DenseTensor { data })
    }

    /// Reorder axes so that result axis `order[i]`... i.e. result[i_order] = self[i].
    pub fn permute(&self, order: &[usize]) -> Result<DenseTensor> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if order.len() != r {
            return Err(Error::Argument(format!(
                "permutation length {} does not match rank {r}",
                order.len()
            )));
        }
        for &ax in order {
            if ax >= r || seen[ax] {
                return Err(Error::Argument(format!("not a permutation: {order:?}")));
            }
            seen[ax] = true;
        }
        let data = as_standard(self.data.clone().permuted_axes(IxDyn(order)));
        Ok(DenseTensor { data })
    }

    /// Truncated SVD of a rank-2 tensor under `policy`.
    pub fn truncated_svd(&self, policy: &TruncationPolicy) -> Result<SvdFactors> {
        let m = self.as_matrix()?;
        let (u, s, vt, dw) = truncated_svd_mat(m, policy)?;
        Ok(SvdFactors {
            u: DenseTensor::from_matrix(u),
            singular_values: s,
            vt: DenseTensor::from_matrix(vt),
            discarded_weight: dw,
        })
    }
}

/// Relative singular-value cutoff and optional hard bond cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    epsilon: f64,
    max_bond: Option<usize>,
}

impl TruncationPolicy {
    pub fn new(epsilon: f64, max_bond: Option<usize>) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Argument(format!(
                "truncation epsilon must satisfy 0 <= epsilon < 1, got {epsilon}"
            )));
        }
        if max_bond == Some(0) {
            return Err(Error::Argument("max_bond must be positive".into()));
        }
        Ok(Self { epsilon, max_bond })
    }

    /// Keep everything (up to the numerical noise floor).
    pub fn exact() -> Self {
        Self { epsilon: 0.0, max_bond: None }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn max_bond(&self) -> Option<usize> {
        self.max_bond
    }
}

/// Result of a truncated SVD: `u * diag(s) * vt` approximates the input.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseTensor,
    pub singular_values: Vec<f64>,
    pub vt: DenseTensor,
    pub discarded_weight: f64,
}

/// Truncated SVD on a plain matrix; the worker behind [`DenseTensor::truncated_svd`]
/// and all MPS/MPO compressions.
///
/// Kept singular values satisfy `s_i >= epsilon * s_max` (values below the
/// noise floor are zeroed first), with the rank additionally capped by
/// `max_bond`. The discarded weight is the sum of squares of dropped values.
pub(crate) fn truncated_svd_mat(
    m: Array2<C64>,
    policy: &TruncationPolicy,
) -> Result<(Array2<C64>, Vec<f64>, Array2<C64>, f64)> {
    let (rows, cols) = m.dim();
    let (u, s, vt) = m
        .svd_into(true, true)
        .map_err(|e| Error::Numeric(format!("SVD failed on {rows}x{cols} matrix: {e}")))?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested V^T");

    let s_max = s.iter().cloned().fold(0.0_f64, f64::max);
    let mut svals: Vec<f64> = s
        .iter()
        .map(|&x| if x < NOISE_FLOOR * s_max { 0.0 } else { x })
        .collect();

    let mut keep = svals
        .iter()
        .filter(|&&x| x > 0.0 && x >= policy.epsilon * s_max)
        .count()
        .max(1);
    if let Some(cap) = policy.max_bond {
        keep = keep.min(cap);
    }
    keep = keep.min(svals.len());

    let discarded: f64 = svals[keep..].iter().map(|x| x * x).sum();
    svals.truncate(keep);

    let u_t = u.slice(ndarray::s![.., ..keep]).to_owned();
    let vt_t = vt.slice(ndarray::s![..keep, ..]).to_owned();
    Ok((u_t, svals, vt_t, discarded))
}

/// Force a contiguous row-major copy after axis permutation.
fn as_standard(a: ArrayD<C64>) -> ArrayD<C64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().to_owned()
    }
}

/// Convenience: complex scalar from a real.
pub(crate) fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Frobenius norm of a complex matrix.
#[cfg(test)]
pub(crate) fn fro_norm(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value (spectral norm).
#[cfg(test)]
pub(crate) fn spectral_norm(m: &Array2<C64>) -> f64 {
    match m.clone().svd_into(false, false) {
        Ok((_, s, _)) => s.iter().cloned().fold(0.0, f64::max),
        Err(_) => fro_norm(m),
    }
}

/// Reconstruct `u * diag(s) * vt`.
#[cfg(test)]
pub(crate) fn svd_reconstruct(u: &Array2<C64>, s: &[f64], vt: &Array2<C64>) -> Array2<C64> {
    let sv = ndarray::Array1::from_iter(s.iter().map(|&x| cr(x)));
    let mut us = u.clone();
    for (mut col, &sig) in us.columns_mut().into_iter().zip(sv.iter()) {
        col.mapv_inplace(|z| z * sig);
    }
    us.dot(vt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> DenseTensor {
        let n: usize = shape.iter().product();
        let entries: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        DenseTensor::new(shape, entries).unwrap()
    }

    #[test]
    fn identity_contraction_returns_vector() {
        let id = DenseTensor::new(&[2, 2], vec![cr(1.0), cr(0.0), cr(0.0), cr(1.0)]).unwrap();
        let v = DenseTensor::new(&[2], vec![C64::new(0.3, 0.1), C64::new(-0.7, 0.2)]).unwrap();
        let out = id.contract(&v, &[(1, 0)]).unwrap();
        assert_eq!(out.shape(), &[2]);
        assert_eq!(out, v);
    }

    #[test]
    fn contraction_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_tensor(&mut rng, &[2, 3]);
        let b = random_tensor(&mut rng, &[3, 2]);
        let out = a.contract(&b, &[(1, 0)]).unwrap();
        let prod = a.as_matrix().unwrap().dot(&b.as_matrix().unwrap());
        let out_m = out.as_matrix().unwrap();
        for (x, y) in out_m.iter().zip(prod.iter()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    // Triple-loop oracle: contract a random 2x3x4 with a random 4x3 over
    // both matching legs and compare element by element.
    #[test]
    fn contraction_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_tensor(&mut rng, &[2, 3, 4]);
        let b = random_tensor(&mut rng, &[4, 3]);
        let out = a.contract(&b, &[(2, 0), (1, 1)]).unwrap();
        assert_eq!(out.shape(), &[2]);
        for i in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..3 {
                for k in 0..4 {
                    acc += a.array()[[i, j, k]] * b.array()[[k, j]];
                }
            }
            assert!((out.array()[[i]] - acc).norm() < 1e-12);
        }
    }

    #[test]
    fn contraction_rejects_dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor(&mut rng, &[2, 3]);
        let b = random_tensor(&mut rng, &[2, 2]);
        assert!(matches!(a.contract(&b, &[(1, 0)]), Err(Error::Shape(_))));
    }

    #[test]
    fn contraction_is_bilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_tensor(&mut rng, &[3, 4]);
        let b = random_tensor(&mut rng, &[3, 4]);
        let c = random_tensor(&mut rng, &[4, 2]);
        let alpha = C64::new(0.7, -0.3);
        let lhs_arr = a.array().mapv(|z| z * alpha) + b.array();
        let lhs = DenseTensor::from_array(lhs_arr).contract(&c, &[(1, 0)]).unwrap();
        let ac = a.contract(&c, &[(1, 0)]).unwrap();
        let bc = b.contract(&c, &[(1, 0)]).unwrap();
        let rhs = ac.array().mapv(|z| z * alpha) + bc.array();
        for (x, y) in lhs.array().iter().zip(rhs.iter()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn permute_transposes_and_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_tensor(&mut rng, &[4]);
        assert_eq!(v.permute(&[0]).unwrap(), v);

        let m = random_tensor(&mut rng, &[2, 3]);
        let t = m.permute(&[1, 0]).unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(m.array()[[i, j]], t.array()[[j, i]]);
            }
        }

        let a = random_tensor(&mut rng, &[2, 3, 4]);
        let sigma = [2, 0, 1];
        let inv = [1, 2, 0];
        let back = a.permute(&sigma).unwrap().permute(&inv).unwrap();
        assert_eq!(back, a);

        assert!(a.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn svd_identity_keeps_all_ones() {
        let id = Array2::<C64>::eye(4);
        let f = DenseTensor::from_matrix(id)
            .truncated_svd(&TruncationPolicy::new(1e-8, None).unwrap())
            .unwrap();
        assert_eq!(f.singular_values.len(), 4);
        for s in &f.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(f.discarded_weight.abs() < 1e-24);
    }

    #[test]
    fn svd_rank_one_keeps_single_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_tensor(&mut rng, &[5]);
        let v = random_tensor(&mut rng, &[3]);
        let mut m = Array2::<C64>::zeros((5, 3));
        for i in 0..5 {
            for j in 0..3 {
                m[[i, j]] = u.array()[[i]] * v.array()[[j]].conj();
            }
        }
        let f = DenseTensor::from_matrix(m)
            .truncated_svd(&TruncationPolicy::new(1e-10, None).unwrap())
            .unwrap();
        assert_eq!(f.singular_values.len(), 1);
    }

    // Full-decomposition oracle: truncate by hand and compare the spectral
    // reconstruction error bound.
    #[test]
    fn svd_respects_spectral_error_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_tensor(&mut rng, &[8, 8]).as_matrix().unwrap();
        let policy = TruncationPolicy::new(0.1, None).unwrap();
        let f = DenseTensor::from_matrix(m.clone()).truncated_svd(&policy).unwrap();
        let recon = svd_reconstruct(
            &f.u.as_matrix().unwrap(),
            &f.singular_values,
            &f.vt.as_matrix().unwrap(),
        );
        let s_max = f.singular_values[0];
        let err = spectral_norm(&(&m - &recon));
        assert!(err < 0.1 * s_max, "spectral error {err} vs bound {}", 0.1 * s_max);

        // oracle: full SVD, manual cut at the same threshold
        let (fu, fs, fvt) = m.clone().svd_into(true, true).unwrap();
        let fs: Vec<f64> = fs.to_vec();
        let keep = fs.iter().filter(|&&x| x >= 0.1 * fs[0]).count();
        assert_eq!(f.singular_values.len(), keep);
        let recon2 = svd_reconstruct(
            &fu.unwrap().slice(ndarray::s![.., ..keep]).to_owned(),
            &fs[..keep],
            &fvt.unwrap().slice(ndarray::s![..keep, ..]).to_owned(),
        );
        let gap = fro_norm(&(&recon - &recon2));
        assert!(gap < 1e-12, "truncated SVD deviates from oracle by {gap}");
    }

    #[test]
    fn svd_exact_policy_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_tensor(&mut rng, &[6, 9]).as_matrix().unwrap();
        let f = DenseTensor::from_matrix(m.clone())
            .truncated_svd(&TruncationPolicy::exact())
            .unwrap();
        let recon = svd_reconstruct(
            &f.u.as_matrix().unwrap(),
            &f.singular_values,
            &f.vt.as_matrix().unwrap(),
        );
        let max_err = (&m - &recon).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_err < 1e-12);
    }

    #[test]
    fn svd_discarded_weight_matches_frobenius_deficit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_tensor(&mut rng, &[7, 7]).as_matrix().unwrap();
        let policy = TruncationPolicy::new(0.3, None).unwrap();
        let f = DenseTensor::from_matrix(m.clone()).truncated_svd(&policy).unwrap();
        let recon = svd_reconstruct(
            &f.u.as_matrix().unwrap(),
            &f.singular_values,
            &f.vt.as_matrix().unwrap(),
        );
        let deficit = fro_norm(&m).powi(2) - fro_norm(&recon).powi(2);
        assert!((deficit - f.discarded_weight).abs() < 1e-10);
    }

    #[test]
    fn svd_max_bond_caps_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = random_tensor(&mut rng, &[6, 6]).as_matrix().unwrap();
        let policy = TruncationPolicy::new(0.0, Some(2)).unwrap();
        let f = DenseTensor::from_matrix(m).truncated_svd(&policy).unwrap();
        assert_eq!(f.singular_values.len(), 2);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(DenseTensor::new(&[2, 2], vec![cr(1.0); 3]).is_err());
        assert!(DenseTensor::new(&[2], vec![C64::new(f64::NAN, 0.0), cr(0.0)]).is_err());
        assert!(TruncationPolicy::new(1.0, None).is_err());
        assert!(TruncationPolicy::new(-0.1, None).is_err());
    }
}
