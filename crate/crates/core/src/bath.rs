//! Bosonic bath physics: spectral densities, the bath autocorrelation
//! function, and the discretized influence coefficients (eta table).
//!
//! Units: hbar = k_B = 1 throughout; temperatures and frequencies are
//! dimensionless in the system's energy unit.
//!
//! The eta coefficients are double time-integrals of the autocorrelation
//! kernel over the discretization windows. With the symmetric splitting used
//! here the bath propagator acts over N full-width windows, so the
//! coefficients depend only on the lag `k - k'` (stationary bath); the inner
//! time integrals are done in closed form per frequency and a single
//! adaptive quadrature over frequency remains.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::integrate_complex;

/// Relative tolerance for all bath quadratures.
const QUAD_REL_TOL: f64 = 1e-10;
/// Frequency-grid upper limit in units of the cutoff; both cutoff families
/// suppress the integrand below 1e-16 there.
const OMEGA_MAX_FACTOR: f64 = 40.0;

/// Cutoff family of a spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum CutoffFamily {
    /// `J(w) = 2 alpha w^zeta / w_c^{zeta-1} exp(-w/w_c)`.
    ExponentialCutoff { zeta: f64 },
    /// `J(w) = 2 alpha w exp(-w^2/w_c^2)`.
    GaussianCutoff,
}

/// Bath spectral density `J(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    #[serde(flatten)]
    pub family: CutoffFamily,
    pub alpha: f64,
    pub omega_c: f64,
}

impl SpectralDensity {
    pub fn exponential(alpha: f64, zeta: f64, omega_c: f64) -> Result<Self> {
        if zeta <= 0.0 {
            return Err(Error::Argument(format!("zeta must be positive, got {zeta}")));
        }
        Self::validated(CutoffFamily::ExponentialCutoff { zeta }, alpha, omega_c)
    }

    /// Ohmic with exponential cutoff (`zeta = 1`).
    pub fn ohmic(alpha: f64, omega_c: f64) -> Result<Self> {
        Self::exponential(alpha, 1.0, omega_c)
    }

    pub fn gaussian(alpha: f64, omega_c: f64) -> Result<Self> {
        Self::validated(CutoffFamily::GaussianCutoff, alpha, omega_c)
    }

    fn validated(family: CutoffFamily, alpha: f64, omega_c: f64) -> Result<Self> {
        if alpha < 0.0 {
            return Err(Error::Argument(format!("alpha must be nonnegative, got {alpha}")));
        }
        if omega_c <= 0.0 {
            return Err(Error::Argument(format!("omega_c must be positive, got {omega_c}")));
        }
        Ok(Self { family, alpha, omega_c })
    }

    /// Evaluate `J(omega)` for `omega >= 0`.
    pub fn value(&self, omega: f64) -> Result<f64> {
        if omega < 0.0 {
            return Err(Error::Argument(format!("omega must be nonnegative, got {omega}")));
        }
        Ok(self.value_unchecked(omega))
    }

    fn value_unchecked(&self, omega: f64) -> f64 {
        match self.family {
            CutoffFamily::ExponentialCutoff { zeta } => {
                if omega == 0.0 {
                    0.0
                } else {
                    2.0 * self.alpha * omega.powf(zeta) / self.omega_c.powf(zeta - 1.0)
                        * (-omega / self.omega_c).exp()
                }
            }
            CutoffFamily::GaussianCutoff => {
                2.0 * self.alpha * omega * (-(omega * omega) / (self.omega_c * self.omega_c)).exp()
            }
        }
    }

    fn omega_max(&self) -> f64 {
        match self.family {
            CutoffFamily::ExponentialCutoff { .. } => OMEGA_MAX_FACTOR * self.omega_c,
            // the Gaussian tail dies much faster; exp(-49) ~ 5e-22
            CutoffFamily::GaussianCutoff => 7.0 * self.omega_c,
        }
    }
}

/// `coth(x)` with the small-x pole handled by its Laurent series.
fn coth(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 / x + x / 3.0 - x * x * x / 45.0
    } else if x > 20.0 {
        1.0
    } else if x < -20.0 {
        -1.0
    } else {
        1.0 / x.tanh()
    }
}

/// Thermal factor `coth(w / 2T)`; `T = 0` is the `coth -> 1` limit.
fn thermal_factor(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        1.0
    } else {
        coth(omega / (2.0 * temperature))
    }
}

/// Quadrature over `[0, w_max]` with the substitution `w = u^3`, which
/// regularizes the sub-Ohmic `w^{zeta-1}` behavior at the origin.
fn bath_quadrature<F: Fn(f64) -> C64>(j: &SpectralDensity, f: F) -> Result<C64> {
    let u_max = j.omega_max().cbrt();
    integrate_complex(
        |u| {
            let w = u * u * u;
            f(w) * C64::new(3.0 * u * u, 0.0)
        },
        0.0,
        u_max,
        QUAD_REL_TOL,
        1e-16 * j.alpha.max(1e-30),
    )
}

/// Bath autocorrelation kernel
/// `C(t) = (1/pi) \int_0^inf dw J(w) [coth(w/2T) cos(wt) - i sin(wt)]`.
pub fn bath_correlation(j: &SpectralDensity, temperature: f64, t: f64) -> Result<C64> {
    if temperature < 0.0 {
        return Err(Error::Argument(format!(
            "temperature must be nonnegative, got {temperature}"
        )));
    }
    let v = bath_quadrature(j, |w| {
        let jw = j.value_unchecked(w);
        let th = thermal_factor(w, temperature);
        C64::new(jw * th * (w * t).cos(), -jw * (w * t).sin())
    })?;
    Ok(v / std::f64::consts::PI)
}

/// Discretized influence coefficients for one bath.
///
/// `entries[m]` is the coefficient at lag `m = k - k'`; lags beyond the
/// memory cutoff carry no influence. Because all bath windows have full
/// width `delta_t`, the first and last steps need no separate coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaTable {
    pub delta_t: f64,
    pub n_steps: usize,
    pub memory_cutoff: usize,
    /// `[re, im]` per lag, index 0 is the self term.
    pub entries: Vec<[f64; 2]>,
    /// Provenance, echoed into serialized tables.
    pub spectral_density: SpectralDensity,
    pub temperature: f64,
}

impl EtaTable {
    /// Coefficient `eta_{k k'}`; zero beyond the memory cutoff.
    pub fn eta(&self, k: usize, k_prime: usize) -> C64 {
        if k_prime > k {
            return C64::new(0.0, 0.0);
        }
        self.eta_lag(k - k_prime)
    }

    pub fn eta_lag(&self, lag: usize) -> C64 {
        match self.entries.get(lag) {
            Some(&[re, im]) => C64::new(re, im),
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("EtaTable serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad eta table JSON: {e}")))
    }

    /// SHA-256 of the entry list, for output provenance.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for &[re, im] in &self.entries {
            h.update(re.to_le_bytes());
            h.update(im.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Compute the eta table for a bath.
///
/// Self term (`m = 0`), from the ordered double integral over one window:
/// `eta_0 = (1/pi) \int dw J(w) [coth(w/2T) (1-cos(w dt))/w^2 - i (w dt - sin(w dt))/w^2]`.
/// Lag terms (`m >= 1`), from the double integral over two windows `m` steps
/// apart:
/// `eta_m = (1/pi) \int dw J(w) (2(1-cos(w dt))/w^2) [coth(w/2T) cos(w m dt) - i sin(w m dt)]`.
pub fn eta_coefficients(
    j: &SpectralDensity,
    temperature: f64,
    delta_t: f64,
    n_steps: usize,
    memory_cutoff: usize,
) -> Result<EtaTable> {
    if temperature < 0.0 {
        return Err(Error::Argument(format!(
            "temperature must be nonnegative, got {temperature}"
        )));
    }
    if delta_t <= 0.0 {
        return Err(Error::Argument(format!("delta_t must be positive, got {delta_t}")));
    }
    if memory_cutoff == 0 || memory_cutoff > n_steps {
        return Err(Error::Argument(format!(
            "memory cutoff {memory_cutoff} must satisfy 1 <= cutoff <= n_steps ({n_steps})"
        )));
    }

    let pi = std::f64::consts::PI;
    let mut entries = Vec::with_capacity(memory_cutoff + 1);

    if j.alpha == 0.0 {
        entries.resize(memory_cutoff + 1, [0.0, 0.0]);
    } else {
        // m = 0
        let self_term = bath_quadrature(j, |w| {
            let jw = j.value_unchecked(w);
            let th = thermal_factor(w, temperature);
            let x = w * delta_t;
            let re_win = one_minus_cos(x) / (w * w);
            let im_win = x_minus_sin(x) / (w * w);
            C64::new(jw * th * re_win, -jw * im_win)
        })? / pi;
        entries.push([self_term.re, self_term.im]);

        for m in 1..=memory_cutoff {
            let lag_term = bath_quadrature(j, |w| {
                let jw = j.value_unchecked(w);
                let th = thermal_factor(w, temperature);
                let x = w * delta_t;
                let win = 2.0 * one_minus_cos(x) / (w * w);
                let phase = w * (m as f64) * delta_t;
                C64::new(jw * th * win * phase.cos(), -jw * win * phase.sin())
            })? / pi;
            entries.push([lag_term.re, lag_term.im]);
        }
    }

    Ok(EtaTable {
        delta_t,
        n_steps,
        memory_cutoff,
        entries,
        spectral_density: *j,
        temperature,
    })
}

/// `1 - cos(x)` without cancellation for small `x`.
fn one_minus_cos(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    2.0 * s * s
}

/// `x - sin(x)` without cancellation for small `x`.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x3 = x * x * x;
        x3 / 6.0 - x3 * x * x / 120.0 + x3 * x3 * x / 5040.0
    } else {
        x - x.sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_complex;

    fn fig5_ohmic() -> SpectralDensity {
        SpectralDensity::ohmic(0.1, 4.0).unwrap()
    }

    #[test]
    fn spectral_density_vanishes_at_origin() {
        assert_eq!(fig5_ohmic().value(0.0).unwrap(), 0.0);
        assert_eq!(SpectralDensity::gaussian(0.1, 5.0).unwrap().value(0.0).unwrap(), 0.0);
    }

    #[test]
    fn ohmic_value_at_cutoff() {
        // 2*0.1*4*e^{-1} = 0.8/e
        let v = fig5_ohmic().value(4.0).unwrap();
        assert!((v - 0.8 * (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn sub_ohmic_dominates_at_low_frequency() {
        let sub = SpectralDensity::exponential(0.1, 0.6, 4.0).unwrap();
        let ohm = fig5_ohmic();
        let ratio = sub.value(0.01).unwrap() / ohm.value(0.01).unwrap();
        assert!(ratio > 1.0, "sub-Ohmic/Ohmic ratio {ratio} at w=0.01");
    }

    #[test]
    fn negative_frequency_rejected() {
        assert!(fig5_ohmic().value(-0.1).is_err());
    }

    #[test]
    fn correlation_at_zero_time() {
        let c = bath_correlation(&fig5_ohmic(), 0.2, 0.0).unwrap();
        assert!(c.re > 0.0);
        assert!(c.im.abs() < 1e-12);
    }

    #[test]
    fn correlation_conjugate_symmetry() {
        for (alpha, zeta, t, temp) in [(0.1, 1.0, 0.5, 0.2), (0.3, 0.6, 1.3, 0.7), (0.05, 2.0, 0.21, 0.0)] {
            let j = SpectralDensity::exponential(alpha, zeta, 4.0).unwrap();
            let plus = bath_correlation(&j, temp, t).unwrap();
            let minus = bath_correlation(&j, temp, -t).unwrap();
            assert!((minus - plus.conj()).norm() < 1e-10);
        }
    }

    // Independent oracle: same integral, doubled resolution, no substitution
    // in the interior region plus a small-omega remainder.
    #[test]
    fn correlation_matches_refined_quadrature() {
        let j = fig5_ohmic();
        let (temp, t) = (0.2, 0.5);
        let c = bath_correlation(&j, temp, t).unwrap();
        let integrand = |w: f64| {
            let jw = 2.0 * 0.1 * w * (-w / 4.0).exp();
            let th = if w == 0.0 { 0.0 } else { coth(w / (2.0 * temp)) };
            C64::new(jw * th * (w * t).cos(), -jw * (w * t).sin())
        };
        let head = integrate_complex(&integrand, 1e-12, 1.0, 1e-12, 1e-18).unwrap();
        let tail = integrate_complex(&integrand, 1.0, 200.0, 1e-12, 1e-18).unwrap();
        let oracle = (head + tail) / std::f64::consts::PI;
        assert!((c - oracle).norm() < 1e-8, "gap {}", (c - oracle).norm());
    }

    #[test]
    fn eta_zero_coupling_is_zero() {
        let j = SpectralDensity::ohmic(0.0, 4.0).unwrap();
        let table = eta_coefficients(&j, 0.2, 0.2, 10, 5).unwrap();
        assert!(table.entries.iter().all(|&[r, i]| r == 0.0 && i == 0.0));
    }

    #[test]
    fn eta_linear_in_alpha() {
        let j1 = SpectralDensity::ohmic(0.1, 4.0).unwrap();
        let j2 = SpectralDensity::ohmic(0.2, 4.0).unwrap();
        let t1 = eta_coefficients(&j1, 0.2, 0.2, 10, 5).unwrap();
        let t2 = eta_coefficients(&j2, 0.2, 0.2, 10, 5).unwrap();
        for (a, b) in t1.entries.iter().zip(t2.entries.iter()) {
            assert!((2.0 * a[0] - b[0]).abs() < 1e-12);
            assert!((2.0 * a[1] - b[1]).abs() < 1e-12);
        }
    }

    // Brute-force oracle: eta_1 as a nested double quadrature of C(t - t')
    // over adjacent windows.
    #[test]
    fn eta_lag_one_matches_double_quadrature() {
        let j = fig5_ohmic();
        let (temp, dt) = (0.2, 0.2);
        let table = eta_coefficients(&j, temp, dt, 4, 2).unwrap();
        // windows: t in [dt, 2dt], t' in [0, dt]
        let oracle = integrate_complex(
            |t| {
                integrate_complex(
                    |tp| bath_correlation(&j, temp, t - tp).unwrap(),
                    0.0,
                    dt,
                    1e-9,
                    1e-14,
                )
                .unwrap()
            },
            dt,
            2.0 * dt,
            1e-9,
            1e-14,
        )
        .unwrap();
        let gap = (table.eta_lag(1) - oracle).norm();
        assert!(gap < 1e-7, "eta_1 vs double-quadrature oracle gap {gap}");
    }

    #[test]
    fn eta_self_term_matches_ordered_double_quadrature() {
        let j = fig5_ohmic();
        let (temp, dt) = (0.2, 0.2);
        let table = eta_coefficients(&j, temp, dt, 4, 2).unwrap();
        let oracle = integrate_complex(
            |t| {
                if t <= 1e-12 {
                    return C64::new(0.0, 0.0);
                }
                integrate_complex(
                    |tp| bath_correlation(&j, temp, t - tp).unwrap(),
                    0.0,
                    t,
                    1e-9,
                    1e-14,
                )
                .unwrap()
            },
            0.0,
            dt,
            1e-8,
            1e-13,
        )
        .unwrap();
        let gap = (table.eta_lag(0) - oracle).norm();
        assert!(gap < 1e-6, "eta_0 vs ordered double-quadrature oracle gap {gap}");
    }

    #[test]
    fn eta_self_term_real_part_nonnegative() {
        for (alpha, zeta, temp) in [(0.1, 1.0, 0.2), (0.1, 0.6, 0.5), (0.1, 2.0, 0.0), (0.32, 1.0, 1.0)] {
            let j = SpectralDensity::exponential(alpha, zeta, 4.0).unwrap();
            let table = eta_coefficients(&j, temp, 0.2, 4, 2).unwrap();
            assert!(table.eta_lag(0).re >= 0.0);
        }
    }

    // Memory ordering at the paper's figure parameters: the sub-Ohmic
    // family, with the most low-frequency weight, retains the largest
    // long-lag coefficient.
    #[test]
    fn sub_ohmic_decays_slowest() {
        let cutoff = 10;
        let mags: Vec<f64> = [0.6, 1.0, 2.0]
            .iter()
            .map(|&zeta| {
                let j = SpectralDensity::exponential(0.1, zeta, 4.0).unwrap();
                let table = eta_coefficients(&j, 0.2, 0.2, 20, cutoff).unwrap();
                table.eta_lag(cutoff).norm()
            })
            .collect();
        assert!(mags[0] > mags[1] && mags[1] > mags[2], "|eta(10)| by zeta: {mags:?}");
        // entries decay with lag for each family
        for &zeta in &[0.6, 1.0, 2.0] {
            let j = SpectralDensity::exponential(0.1, zeta, 4.0).unwrap();
            let table = eta_coefficients(&j, 0.2, 0.2, 20, cutoff).unwrap();
            assert!(table.eta_lag(1).norm() > table.eta_lag(cutoff).norm());
        }
    }

    #[test]
    fn eta_independent_of_n_steps() {
        let j = fig5_ohmic();
        let a = eta_coefficients(&j, 0.2, 0.2, 10, 3).unwrap();
        let b = eta_coefficients(&j, 0.2, 0.2, 50, 3).unwrap();
        for (x, y) in a.entries.iter().zip(b.entries.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn eta_table_json_round_trip() {
        let j = fig5_ohmic();
        let table = eta_coefficients(&j, 0.2, 0.2, 10, 3).unwrap();
        let back = EtaTable::from_json(&table.to_json()).unwrap();
        assert_eq!(table.entries, back.entries);
        assert_eq!(table.checksum(), back.checksum());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpectralDensity::ohmic(-0.1, 4.0).is_err());
        assert!(SpectralDensity::ohmic(0.1, 0.0).is_err());
        assert!(SpectralDensity::exponential(0.1, 0.0, 4.0).is_err());
        let j = fig5_ohmic();
        assert!(bath_correlation(&j, -0.1, 0.0).is_err());
        assert!(eta_coefficients(&j, 0.2, 0.0, 10, 5).is_err());
        assert!(eta_coefficients(&j, 0.2, 0.2, 10, 0).is_err());
        assert!(eta_coefficients(&j, 0.2, 0.2, 10, 11).is_err());
    }
}
