//! Experiment execution: turn a validated configuration (or a preset plan)
//! into simulation jobs, run them on a worker pool, and emit deterministic
//! CSV/JSON outputs with atomic writes.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde_json::json;

use crate::bath::{eta_coefficients, EtaTable, SpectralDensity};
use crate::error::{Error, Result};
use crate::evolution::{
    closed_tebd_evolve, eigenvalues_for, markov_evolve, pt_tebd_evolve, EvolutionRecord,
    GateMode, QubitCoupling, SystemModel,
};
use crate::liouville::{
    devectorize, kron, liouvillian, trotter_factors, vectorize, DensityMatrix,
};
use crate::measures::{
    geometric_discord, imbalance, l1_coherence, occupations, partial_trace_keep,
    teleport_fidelity,
};
use crate::measures::concurrence as concurrence_measure;
use crate::models::{
    coupling_rotation_x, identity2, neel_bell_state, pauli_x, pauli_z, resonance_report,
    site_operator, AAChainModel, DrivenQubitModel, TwoQubitModel,
};
use crate::process_tensor::{build_process_tensor, ProcessTensor};
use crate::reference::{
    bloch_redfield_evolve, path_sum, PathBath, RedfieldBath, RedfieldOptions,
};
use crate::tensor::TruncationPolicy;

use super::config::{
    BathConfig, ExperimentConfig, MeasureName, ModelConfig, SweepParam, TwoQubitInitial,
};
use super::presets;

/// 17-significant-digit decimal form, round-trip exact for f64.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One bath attachment resolved from configuration.
#[derive(Debug, Clone)]
pub struct JobBath {
    pub site: usize,
    pub spectral_density: SpectralDensity,
    pub temperature: f64,
    pub delta_k_max: usize,
}

impl JobBath {
    fn eta_table(&self, delta_t: f64, n_steps: usize, cutoff: usize) -> Result<EtaTable> {
        eta_coefficients(
            &self.spectral_density,
            self.temperature,
            delta_t,
            n_steps,
            cutoff.min(n_steps),
        )
    }
}

/// A single simulation to execute.
#[derive(Debug, Clone)]
pub enum Job {
    /// Full-memory PT-TEBD.
    PtTebd {
        system: SystemModel,
        baths: Vec<JobBath>,
        rho0: DensityMatrix,
        n_steps: usize,
        delta_t: f64,
        epsilon: f64,
        xi: f64,
    },
    /// One-step-memory PT-TEBD reference.
    Markov {
        system: SystemModel,
        baths: Vec<JobBath>,
        rho0: DensityMatrix,
        n_steps: usize,
        delta_t: f64,
        epsilon: f64,
        xi: f64,
    },
    /// Closed pure-state TEBD on a chain.
    Closed {
        chain: AAChainModel,
        psi0: Array1<C64>,
        n_steps: usize,
        delta_t: f64,
        epsilon: f64,
    },
    /// Bloch-Redfield master-equation reference.
    Redfield {
        hamiltonian: Array2<C64>,
        couplings: Vec<(JobBath, Array2<C64>)>,
        rho0: DensityMatrix,
        n_steps: usize,
        delta_t: f64,
    },
    /// Two identical driven-qubit channels applied to the halves of a Bell
    /// pair; the channel is tomographically reconstructed from four runs
    /// sharing one process tensor.
    DrivenPair {
        model: DrivenQubitModel,
        bath: JobBath,
        n_steps: usize,
        delta_t: f64,
        epsilon: f64,
        xi: f64,
    },
}

impl Job {
    fn echo(&self) -> serde_json::Value {
        let baths_echo = |baths: &[JobBath]| -> serde_json::Value {
            baths
                .iter()
                .map(|b| {
                    json!({
                        "site": b.site,
                        "spectral_density": serde_json::to_value(&b.spectral_density)
                            .unwrap_or(serde_json::Value::Null),
                        "temperature": b.temperature,
                        "delta_k_max": b.delta_k_max,
                    })
                })
                .collect()
        };
        match self {
            Job::PtTebd { system, baths, n_steps, delta_t, epsilon, xi, .. } => json!({
                "solver": "pt-tebd",
                "system": system_kind(system),
                "n_sites": system.n_sites(),
                "baths": baths_echo(baths),
                "n_steps": n_steps,
                "delta_t": delta_t,
                "epsilon": epsilon,
                "xi": xi,
            }),
            Job::Markov { system, baths, n_steps, delta_t, epsilon, xi, .. } => json!({
                "solver": "pt-tebd-markov",
                "system": system_kind(system),
                "n_sites": system.n_sites(),
                "baths": baths_echo(baths),
                "n_steps": n_steps,
                "delta_t": delta_t,
                "epsilon": epsilon,
                "xi": xi,
            }),
            Job::Closed { chain, n_steps, delta_t, epsilon, .. } => json!({
                "solver": "closed-tebd",
                "system": "chain",
                "n_sites": chain.n_sites,
                "delta": chain.delta,
                "h": chain.h,
                "n_steps": n_steps,
                "delta_t": delta_t,
                "epsilon": epsilon,
            }),
            Job::Redfield { couplings, n_steps, delta_t, .. } => json!({
                "solver": "bloch-redfield",
                "baths": baths_echo(
                    &couplings.iter().map(|(b, _)| b.clone()).collect::<Vec<_>>()
                ),
                "n_steps": n_steps,
                "delta_t": delta_t,
            }),
            Job::DrivenPair { model, bath, n_steps, delta_t, epsilon, xi } => json!({
                "solver": "driven-pair",
                "omega": model.omega,
                "lambda": model.lambda,
                "drive_freq": model.drive_freq,
                "baths": baths_echo(std::slice::from_ref(bath)),
                "n_steps": n_steps,
                "delta_t": delta_t,
                "epsilon": epsilon,
                "xi": xi,
            }),
        }
    }
}

fn system_kind(system: &SystemModel) -> &'static str {
    match system {
        SystemModel::SingleQubit { .. } => "single-qubit",
        SystemModel::TwoQubit { .. } => "two-qubit",
        SystemModel::Chain(_) => "chain",
        SystemModel::DrivenQubit(_) => "driven-qubit",
    }
}

/// Uniform view of a finished run for measure evaluation and output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Stored (possibly reduced) states, one per readout time.
    pub states: Vec<DensityMatrix>,
    /// 1-based sites covered by `states`, in storage order.
    pub state_sites: Vec<usize>,
    pub n_sites: usize,
    pub occupations: Vec<Vec<f64>>,
    pub eta_checksums: Vec<String>,
    pub diagnostics: serde_json::Value,
}

impl Trajectory {
    fn from_record(rec: EvolutionRecord, eta_checksums: Vec<String>) -> Self {
        let diagnostics = rec.summary();
        Trajectory {
            times: rec.times,
            states: rec.states,
            state_sites: rec.readout_sites,
            n_sites: rec.n_sites,
            occupations: rec.occupations,
            eta_checksums,
            diagnostics,
        }
    }
}

/// One labeled curve of a figure (e.g. a temperature or a solver variant).
#[derive(Debug, Clone)]
pub struct Variant {
    pub label: String,
    pub job: Job,
    /// Site pair used by the two-site measures; defaults per model.
    pub pair: Option<(usize, usize)>,
}

/// A named multi-variant trajectory run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub name: String,
    pub variants: Vec<Variant>,
    pub measures: Vec<MeasureName>,
    pub stem: String,
}

/// Eigenmode resonance analysis across phases (no time evolution).
#[derive(Debug, Clone)]
pub struct ResonanceSpec {
    pub name: String,
    pub phases: Vec<(String, AAChainModel)>,
    pub spectral_density: SpectralDensity,
    pub temperature: f64,
    pub stem: String,
}

/// A parameter sweep over a single-variant base configuration.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub name: String,
    pub base: ExperimentConfig,
    pub stem: String,
}

#[derive(Debug, Clone)]
pub enum Plan {
    Run(RunSpec),
    Resonance(ResonanceSpec),
    Sweep(SweepSpec),
}

impl Plan {
    pub fn name(&self) -> &str {
        match self {
            Plan::Run(r) => &r.name,
            Plan::Resonance(r) => &r.name,
            Plan::Sweep(s) => &s.name,
        }
    }
}

/// Resolve a parsed configuration into an executable plan.
pub fn plan_from_config(cfg: &ExperimentConfig) -> Result<Plan> {
    if let Some(name) = &cfg.preset {
        return presets::build(name);
    }
    if cfg.sweep.is_some() {
        let stem = output_stem(cfg, "sweep");
        return Ok(Plan::Sweep(SweepSpec {
            name: stem.clone(),
            base: cfg.clone(),
            stem,
        }));
    }
    Ok(Plan::Run(explicit_run_spec(cfg)?))
}

fn output_stem(cfg: &ExperimentConfig, fallback: &str) -> String {
    cfg.output
        .as_ref()
        .and_then(|o| o.stem.clone())
        .unwrap_or_else(|| fallback.to_string())
}

/// Build the single-variant run described by an explicit configuration.
pub fn explicit_run_spec(cfg: &ExperimentConfig) -> Result<RunSpec> {
    let model = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Config("missing [model] block".into()))?;
    let evo = cfg
        .evolution
        .ok_or_else(|| Error::Config("missing [evolution] block".into()))?;
    let baths: Vec<JobBath> = cfg
        .baths
        .iter()
        .map(job_bath)
        .collect::<Result<Vec<_>>>()?;
    let (job, pair) = match model {
        ModelConfig::SingleQubit { omega, tunneling, coupling } => {
            let h = pauli_z().mapv(|z| z * (0.5 * omega))
                + pauli_x().mapv(|z| z * (0.5 * tunneling));
            let coupling = match coupling {
                super::config::CouplingName::SigmaX => QubitCoupling::SigmaX,
                super::config::CouplingName::SigmaZ => QubitCoupling::SigmaZ,
            };
            let system = SystemModel::SingleQubit { hamiltonian: h, coupling };
            let rho0 = excited_qubit()?;
            (
                Job::PtTebd {
                    system,
                    baths,
                    rho0,
                    n_steps: evo.n_steps,
                    delta_t: evo.delta_t,
                    epsilon: evo.epsilon,
                    xi: evo.xi,
                },
                None,
            )
        }
        ModelConfig::TwoQubit { omega1, omega2, j, initial, gate_mode } => {
            let model = TwoQubitModel { omega1: *omega1, omega2: *omega2, j: *j };
            let rho0 = two_qubit_initial(&model, *initial)?;
            let mode = match gate_mode {
                super::config::GateModeName::Exact => GateMode::ExactComposite,
                super::config::GateModeName::Split => GateMode::LocalBondSplit,
            };
            let system = SystemModel::TwoQubit { model, mode };
            (
                Job::PtTebd {
                    system,
                    baths,
                    rho0,
                    n_steps: evo.n_steps,
                    delta_t: evo.delta_t,
                    epsilon: evo.epsilon,
                    xi: evo.xi,
                },
                Some((1, 2)),
            )
        }
        ModelConfig::Chain { n_sites, delta, h, beta, closed } => {
            let mut chain = match beta {
                Some(b) => AAChainModel::with_beta(*n_sites, *delta, *h, *b)?,
                None => AAChainModel::new(*n_sites, *delta, *h)?,
            };
            for b in &baths {
                chain = chain.with_bath_site(b.site)?;
            }
            let psi0 = neel_bell_state(*n_sites)?;
            let pair = Some((1, *n_sites));
            if *closed {
                (
                    Job::Closed {
                        chain,
                        psi0,
                        n_steps: evo.n_steps,
                        delta_t: evo.delta_t,
                        epsilon: evo.epsilon,
                    },
                    pair,
                )
            } else {
                let rho0 = DensityMatrix::pure(&psi0)?;
                (
                    Job::PtTebd {
                        system: SystemModel::Chain(chain),
                        baths,
                        rho0,
                        n_steps: evo.n_steps,
                        delta_t: evo.delta_t,
                        epsilon: evo.epsilon,
                        xi: evo.xi,
                    },
                    pair,
                )
            }
        }
        ModelConfig::DrivenQubit { omega, lambda, drive_freq } => {
            let bath = baths.into_iter().next().ok_or_else(|| {
                Error::Config("driven-qubit model needs exactly one bath".into())
            })?;
            (
                Job::DrivenPair {
                    model: DrivenQubitModel::new(*omega, *lambda, *drive_freq),
                    bath,
                    n_steps: evo.n_steps,
                    delta_t: evo.delta_t,
                    epsilon: evo.epsilon,
                    xi: evo.xi,
                },
                Some((1, 2)),
            )
        }
    };
    let stem = output_stem(cfg, "run");
    Ok(RunSpec {
        name: stem.clone(),
        variants: vec![Variant { label: "run".into(), job, pair }],
        measures: cfg.measures.clone(),
        stem,
    })
}

pub fn job_bath(b: &BathConfig) -> Result<JobBath> {
    Ok(JobBath {
        site: b.site,
        spectral_density: b.spectral_density()?,
        temperature: b.temperature,
        delta_k_max: b.delta_k_max,
    })
}

/// `|0>` (the sigma_z = +1, higher-energy level for positive omega).
pub fn excited_qubit() -> Result<DensityMatrix> {
    let mut psi = Array1::<C64>::zeros(2);
    psi[0] = C64::new(1.0, 0.0);
    DensityMatrix::pure(&psi)
}

pub fn two_qubit_initial(
    model: &TwoQubitModel,
    which: TwoQubitInitial,
) -> Result<DensityMatrix> {
    match which {
        TwoQubitInitial::Ground => model.ground_state(),
        TwoQubitInitial::ZeroZero => {
            let mut psi = Array1::<C64>::zeros(4);
            psi[0] = C64::new(1.0, 0.0);
            DensityMatrix::pure(&psi)
        }
        TwoQubitInitial::Bell => {
            let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let mut psi = Array1::<C64>::zeros(4);
            psi[0] = r;
            psi[3] = r;
            DensityMatrix::pure(&psi)
        }
    }
}

/// Execute one job to a trajectory.
pub fn run_job(job: &Job) -> Result<Trajectory> {
    match job {
        Job::PtTebd { system, baths, rho0, n_steps, delta_t, epsilon, xi } => {
            let pt_policy = TruncationPolicy::new(*xi, None)?;
            let policy = TruncationPolicy::new(*epsilon, None)?;
            let mut tensors: Vec<(usize, ProcessTensor)> = Vec::with_capacity(baths.len());
            let mut checksums = Vec::with_capacity(baths.len());
            for b in baths {
                let eta = b.eta_table(*delta_t, *n_steps, b.delta_k_max)?;
                checksums.push(eta.checksum());
                let eigs = eigenvalues_for(system, b.site);
                tensors.push((b.site, build_process_tensor(&eta, *n_steps, &eigs, &pt_policy)?));
            }
            let refs: Vec<(usize, &ProcessTensor)> =
                tensors.iter().map(|(s, pt)| (*s, pt)).collect();
            let rec = pt_tebd_evolve(system, &refs, rho0, *n_steps, *delta_t, &policy)?;
            Ok(Trajectory::from_record(rec, checksums))
        }
        Job::Markov { system, baths, rho0, n_steps, delta_t, epsilon, xi } => {
            let pt_policy = TruncationPolicy::new(*xi, None)?;
            let policy = TruncationPolicy::new(*epsilon, None)?;
            let mut tables = Vec::with_capacity(baths.len());
            let mut checksums = Vec::with_capacity(baths.len());
            for b in baths {
                let eta = b.eta_table(*delta_t, *n_steps, 1)?;
                checksums.push(eta.checksum());
                tables.push((b.site, eta));
            }
            let refs: Vec<(usize, &EtaTable)> =
                tables.iter().map(|(s, t)| (*s, t)).collect();
            let rec =
                markov_evolve(system, &refs, rho0, *n_steps, *delta_t, &policy, &pt_policy)?;
            Ok(Trajectory::from_record(rec, checksums))
        }
        Job::Closed { chain, psi0, n_steps, delta_t, epsilon } => {
            let policy = TruncationPolicy::new(*epsilon, None)?;
            let rec = closed_tebd_evolve(chain, psi0, *n_steps, *delta_t, &policy)?;
            Ok(Trajectory::from_record(rec, Vec::new()))
        }
        Job::Redfield { hamiltonian, couplings, rho0, n_steps, delta_t } => {
            let baths: Vec<RedfieldBath> = couplings
                .iter()
                .map(|(b, op)| RedfieldBath {
                    spectral_density: b.spectral_density.clone(),
                    temperature: b.temperature,
                    coupling: op.clone(),
                })
                .collect();
            let raw = bloch_redfield_evolve(
                hamiltonian,
                &baths,
                &RedfieldOptions::default(),
                rho0,
                *delta_t,
                *n_steps,
            )?;
            // Bloch-Redfield is not completely positive and can leave the
            // PSD cone at strong coupling; project each state back so the
            // measures stay well defined, and record the worst excursion.
            let mut worst_min = f64::INFINITY;
            let states = raw
                .iter()
                .map(|s| {
                    let (p, min) = project_psd(s)?;
                    worst_min = worst_min.min(min);
                    Ok(p)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = (rho0.dim() as f64).log2().round() as usize;
            let times: Vec<f64> = (0..=*n_steps).map(|k| k as f64 * delta_t).collect();
            let occ = states
                .iter()
                .map(|s| occupations(s, n))
                .collect::<Result<Vec<_>>>()?;
            Ok(Trajectory {
                times,
                states,
                state_sites: (1..=n).collect(),
                n_sites: n,
                occupations: occ,
                eta_checksums: Vec::new(),
                diagnostics: json!({
                    "solver": "bloch-redfield",
                    "min_eigenvalue": worst_min,
                }),
            })
        }
        Job::DrivenPair { model, bath, n_steps, delta_t, epsilon, xi } => {
            run_driven_pair(model, bath, *n_steps, *delta_t, *epsilon, *xi)
        }
    }
}

/// Project a state onto the PSD cone: clamp negative eigenvalues to zero
/// and renormalize the trace. Returns the projected state together with the
/// smallest eigenvalue of the input (a diagnostic for how far outside the
/// cone the solver strayed).
fn project_psd(rho: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
    let (vecs, vals) = crate::models::dense_eigensolve(rho.matrix())?;
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        return Ok((rho.clone(), min));
    }
    let dim = vals.len();
    let clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let tr: f64 = clamped.iter().sum();
    if tr <= 0.0 {
        return Err(Error::Numeric("state has no positive weight to keep".into()));
    }
    let mut m = Array2::<C64>::zeros((dim, dim));
    for (k, &v) in clamped.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let col = vecs.column(k);
        let w = v / tr;
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] += col[i] * col[j].conj() * w;
            }
        }
    }
    Ok((DensityMatrix::new_unchecked(m), min))
}

/// Tomographic inputs spanning the qubit operator space.
fn tomography_inputs() -> Result<[DensityMatrix; 4]> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let e0 = {
        let mut psi = Array1::<C64>::zeros(2);
        psi[0] = C64::new(1.0, 0.0);
        DensityMatrix::pure(&psi)?
    };
    let e1 = {
        let mut psi = Array1::<C64>::zeros(2);
        psi[1] = C64::new(1.0, 0.0);
        DensityMatrix::pure(&psi)?
    };
    let plus = {
        let mut psi = Array1::<C64>::zeros(2);
        psi[0] = C64::new(r, 0.0);
        psi[1] = C64::new(r, 0.0);
        DensityMatrix::pure(&psi)?
    };
    let plus_i = {
        let mut psi = Array1::<C64>::zeros(2);
        psi[0] = C64::new(r, 0.0);
        psi[1] = C64::new(0.0, r);
        DensityMatrix::pure(&psi)?
    };
    Ok([e0, e1, plus, plus_i])
}

fn run_driven_pair(
    model: &DrivenQubitModel,
    bath: &JobBath,
    n_steps: usize,
    delta_t: f64,
    epsilon: f64,
    xi: f64,
) -> Result<Trajectory> {
    let system = SystemModel::DrivenQubit(*model);
    let eta = bath.eta_table(delta_t, n_steps, bath.delta_k_max)?;
    let checksum = eta.checksum();
    let eigs = eigenvalues_for(&system, 1);
    let pt_policy = TruncationPolicy::new(xi, None)?;
    let policy = TruncationPolicy::new(epsilon, None)?;
    let pt = build_process_tensor(&eta, n_steps, &eigs, &pt_policy)?;

    let inputs = tomography_inputs()?;
    let mut records = Vec::with_capacity(4);
    for rho0 in &inputs {
        records.push(pt_tebd_evolve(
            &system,
            &[(1, &pt)],
            rho0,
            n_steps,
            delta_t,
            &policy,
        )?);
    }
    let [r00, r11, rp, rq] = match records.as_slice() {
        [a, b, c, d] => [a, b, c, d],
        _ => unreachable!(),
    };

    let times = r00.times.clone();
    let mut states = Vec::with_capacity(times.len());
    let mut occ = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let e00 = r00.states[k].matrix().clone();
        let e11 = r11.states[k].matrix().clone();
        let ep = rp.states[k].matrix().clone();
        let eq = rq.states[k].matrix().clone();
        // channel action on the off-diagonal units |0><1| and |1><0|
        let a = ep.mapv(|z| z * 2.0) - &e00 - &e11;
        let b = (eq.mapv(|z| z * 2.0) - &e00 - &e11).mapv(|z| z * C64::new(0.0, -1.0));
        let e01 = (&a - &b).mapv(|z| z * 0.5);
        let e10 = (&a + &b).mapv(|z| z * 0.5);
        // both Bell halves pass through the same channel:
        // rho12 = (E (x) E)(|Bell><Bell|) = 1/2 sum_ij E(e_ij) (x) E(e_ij)
        let mut rho12 = kron(&e00, &e00);
        rho12 = rho12 + kron(&e01, &e01);
        rho12 = rho12 + kron(&e10, &e10);
        rho12 = rho12 + kron(&e11, &e11);
        rho12.mapv_inplace(|z| z * 0.5);
        // restore exact hermiticity/trace lost to reconstruction round-off
        let herm = (&rho12 + &rho12.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let tr: C64 = (0..4).map(|i| herm[(i, i)]).sum();
        if tr.norm() < 0.5 {
            return Err(Error::Numeric(format!(
                "reconstructed pair state trace collapsed to {tr}"
            )));
        }
        let dm = DensityMatrix::new_unchecked(herm.mapv(|z| z / tr));
        occ.push(occupations(&dm, 2)?);
        states.push(dm);
    }

    let mut diagnostics = r00.summary();
    if let Some(map) = diagnostics.as_object_mut() {
        map.insert("tomography_runs".into(), json!(4));
        let wall: f64 = records.iter().map(|r| r.wall_time).sum();
        map.insert("wall_time_s".into(), json!(wall));
    }
    Ok(Trajectory {
        times,
        states,
        state_sites: vec![1, 2],
        n_sites: 2,
        occupations: occ,
        eta_checksums: vec![checksum],
        diagnostics,
    })
}

/// Reduce a stored state to the requested 1-based site pair.
fn pair_state(traj: &Trajectory, k: usize, pair: (usize, usize)) -> Result<DensityMatrix> {
    let pos = |site: usize| -> Result<usize> {
        traj.state_sites
            .iter()
            .position(|&s| s == site)
            .map(|p| p + 1)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "site {site} is not covered by the stored reduction {:?}",
                    traj.state_sites
                ))
            })
    };
    let (p1, p2) = (pos(pair.0)?, pos(pair.1)?);
    let rho = if traj.state_sites.len() == 2 && p1 == 1 && p2 == 2 {
        traj.states[k].clone()
    } else {
        partial_trace_keep(&traj.states[k], &[p1, p2], traj.state_sites.len())?
    };
    // finite truncation can push a reduced state a hair outside the PSD
    // cone; clamp truncation-scale negativity so the strict measures see a
    // physical state, but refuse anything beyond that scale
    let (projected, min) = project_psd(&rho)?;
    if min < -1e-3 {
        return Err(Error::Numeric(format!(
            "reduced pair state left the positive cone (min eigenvalue {min:.3e})"
        )));
    }
    Ok(projected)
}

fn default_pair(traj: &Trajectory) -> (usize, usize) {
    (1, traj.n_sites)
}

/// Evaluate one measure over a trajectory, one value per readout time.
pub fn evaluate_measure(
    measure: MeasureName,
    traj: &Trajectory,
    pair: Option<(usize, usize)>,
) -> Result<Vec<f64>> {
    let pair = pair.unwrap_or_else(|| default_pair(traj));
    let mut out = Vec::with_capacity(traj.times.len());
    for k in 0..traj.times.len() {
        let v = match measure {
            MeasureName::Concurrence => concurrence_measure(&pair_state(traj, k, pair)?)?,
            MeasureName::GeometricDiscord => geometric_discord(&pair_state(traj, k, pair)?)?,
            MeasureName::TeleportFidelity => teleport_fidelity(&pair_state(traj, k, pair)?)?,
            MeasureName::Coherence => l1_coherence(&traj.states[k]),
            MeasureName::Imbalance => imbalance(&traj.occupations[k])?,
            MeasureName::Population => *traj.occupations[k].first().ok_or_else(|| {
                Error::Argument("trajectory carries no occupation data".into())
            })?,
        };
        out.push(v);
    }
    Ok(out)
}

/// Write `contents` to `path` through a temp file in the same directory, so
/// concurrent readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    builder
        .build()
        .map_err(|e| Error::Argument(format!("worker pool: {e}")))
}

/// Execute a plan and write its outputs; returns the created file paths.
pub fn execute_plan(
    plan: &Plan,
    out_dir: &Path,
    workers: usize,
    verify: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    match plan {
        Plan::Run(spec) => execute_run(spec, out_dir, workers, verify),
        Plan::Resonance(spec) => execute_resonance(spec, out_dir),
        Plan::Sweep(spec) => execute_sweep(spec, out_dir, workers),
    }
}

fn execute_run(
    spec: &RunSpec,
    out_dir: &Path,
    workers: usize,
    verify: bool,
) -> Result<Vec<PathBuf>> {
    if spec.measures.is_empty() {
        return Err(Error::Config("no observables requested".into()));
    }
    if verify {
        for line in verify_report(spec)? {
            println!("{line}");
        }
    }
    let pool = thread_pool(workers)?;
    let trajectories: Vec<Trajectory> = pool.install(|| {
        use rayon::prelude::*;
        spec.variants
            .par_iter()
            .map(|v| run_job(&v.job))
            .collect::<Result<Vec<_>>>()
    })?;

    let n_times = trajectories
        .first()
        .map(|t| t.times.len())
        .ok_or_else(|| Error::Config("run has no variants".into()))?;
    for (v, t) in spec.variants.iter().zip(&trajectories) {
        if t.times.len() != n_times {
            return Err(Error::Config(format!(
                "variant \"{}\" produced {} readouts, expected {n_times}",
                v.label,
                t.times.len()
            )));
        }
    }

    // columns: t, then <measure>[_<label>] in measure-major order
    let single = spec.variants.len() == 1;
    let mut header = vec!["t".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for m in &spec.measures {
        for (v, t) in spec.variants.iter().zip(&trajectories) {
            header.push(if single {
                m.column().to_string()
            } else {
                format!("{}_{}", m.column(), v.label)
            });
            columns.push(evaluate_measure(*m, t, v.pair)?);
        }
    }
    let mut csv = String::new();
    csv.push_str(&header.join(","));
    csv.push('\n');
    for k in 0..n_times {
        let mut row = vec![fmt17(trajectories[0].times[k])];
        for col in &columns {
            row.push(fmt17(col[k]));
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }

    let variants_json: Vec<serde_json::Value> = spec
        .variants
        .iter()
        .zip(&trajectories)
        .map(|(v, t)| {
            // drop wall-clock time so reruns stay byte-identical
            let mut diagnostics = t.diagnostics.clone();
            if let Some(map) = diagnostics.as_object_mut() {
                map.remove("wall_time_s");
            }
            json!({
                "label": v.label,
                "job": v.job.echo(),
                "pair": v.pair.map(|(a, b)| vec![a, b]),
                "eta_checksums": t.eta_checksums,
                "diagnostics": diagnostics,
            })
        })
        .collect();
    let meta = json!({
        "name": spec.name,
        "version": env!("CARGO_PKG_VERSION"),
        "measures": spec.measures.iter().map(|m| m.column()).collect::<Vec<_>>(),
        "variants": variants_json,
    });

    let csv_path = out_dir.join(format!("{}.csv", spec.stem));
    let json_path = out_dir.join(format!("{}.json", spec.stem));
    write_atomic(&csv_path, &csv)?;
    write_atomic(&json_path, &format!("{:#}\n", meta))?;
    Ok(vec![csv_path, json_path])
}

/// Cross-check small single-qubit PT-TEBD runs against the brute-force path
/// sum; returns one report line per variant.
pub fn verify_report(spec: &RunSpec) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for v in &spec.variants {
        let line = match &v.job {
            Job::PtTebd { system, baths, rho0, n_steps, delta_t, .. }
                if system.n_sites() == 1 && baths.len() == 1 && *n_steps <= 8 =>
            {
                let gap = path_sum_gap(system, &baths[0], rho0, *n_steps, *delta_t)?;
                format!("verify {}: path-sum max gap {:.3e}", v.label, gap)
            }
            _ => format!(
                "verify {}: skipped (needs a single-qubit run with at most 8 steps)",
                v.label
            ),
        };
        lines.push(line);
    }
    Ok(lines)
}

/// Max-norm gap between the PT-TEBD final state and the exhaustive path sum.
pub fn path_sum_gap(
    system: &SystemModel,
    bath: &JobBath,
    rho0: &DensityMatrix,
    n_steps: usize,
    delta_t: f64,
) -> Result<f64> {
    let (h, frame) = match system {
        SystemModel::SingleQubit { hamiltonian, coupling } => {
            let frame = match coupling {
                QubitCoupling::SigmaX => coupling_rotation_x(),
                QubitCoupling::SigmaZ => identity2(),
            };
            (hamiltonian.clone(), frame)
        }
        _ => {
            return Err(Error::Argument(
                "path-sum verification supports single-qubit systems only".into(),
            ))
        }
    };
    let eta = bath.eta_table(delta_t, n_steps, bath.delta_k_max)?;
    let eigs = eigenvalues_for(system, 1);
    let pt_policy = TruncationPolicy::new(1e-12, None)?;
    let policy = TruncationPolicy::new(1e-12, None)?;
    let pt = build_process_tensor(&eta, n_steps, &eigs, &pt_policy)?;
    let rec = pt_tebd_evolve(system, &[(1, &pt)], rho0, n_steps, delta_t, &policy)?;

    // path sum runs entirely in the coupling eigenbasis
    let vdag = frame.t().mapv(|z| z.conj());
    let h_rot = vdag.dot(&h).dot(&frame);
    let rho_rot = vdag.dot(rho0.matrix()).dot(&frame);
    let gh = trotter_factors(&liouvillian(&h_rot)?, delta_t)?;
    let path = PathBath { eta, eigenvalues: eigs };
    let out = path_sum(&gh, &[path], &vectorize(&rho_rot), n_steps)?;
    let out_rot = devectorize(&out)?;
    let oracle = frame.dot(&out_rot).dot(&vdag);

    let got = rec.states.last().unwrap().matrix();
    Ok((got - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

fn execute_resonance(spec: &ResonanceSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut csv = String::from("phase,gap,matrix_element_sq,weight\n");
    let mut flux_map = serde_json::Map::new();
    for (label, chain) in &spec.phases {
        let (resonances, flux) =
            resonance_report(chain, &spec.spectral_density, spec.temperature)?;
        for r in &resonances {
            csv.push_str(&format!(
                "{label},{},{},{}\n",
                fmt17(r.gap),
                fmt17(r.matrix_element_sq),
                fmt17(r.weight)
            ));
        }
        flux_map.insert(label.clone(), json!(flux));
    }
    let meta = json!({
        "name": spec.name,
        "version": env!("CARGO_PKG_VERSION"),
        "temperature": spec.temperature,
        "spectral_density": serde_json::to_value(&spec.spectral_density)
            .unwrap_or(serde_json::Value::Null),
        "flux": flux_map,
    });
    let csv_path = out_dir.join(format!("{}.csv", spec.stem));
    let json_path = out_dir.join(format!("{}.json", spec.stem));
    write_atomic(&csv_path, &csv)?;
    write_atomic(&json_path, &format!("{:#}\n", meta))?;
    Ok(vec![csv_path, json_path])
}

/// Apply one sweep value to a copy of the base configuration.
fn apply_sweep_value(cfg: &mut ExperimentConfig, param: SweepParam, value: f64) -> Result<()> {
    match param {
        SweepParam::DeltaKMax => {
            let k = value.round();
            if (value - k).abs() > 1e-9 || k < 1.0 {
                return Err(Error::Config(format!(
                    "delta-k-max sweep value {value} is not a positive integer"
                )));
            }
            for b in &mut cfg.baths {
                b.delta_k_max = k as usize;
            }
        }
        SweepParam::Temperature => {
            if value < 0.0 {
                return Err(Error::Config(format!(
                    "temperature sweep value {value} is negative"
                )));
            }
            for b in &mut cfg.baths {
                b.temperature = value;
            }
        }
        SweepParam::TemperatureDelta => {
            if cfg.baths.len() < 2 {
                return Err(Error::Config("temperature-delta sweep needs two baths".into()));
            }
            let base = cfg.baths[0].temperature;
            cfg.baths[1].temperature = base + value;
        }
    }
    Ok(())
}

fn execute_sweep(spec: &SweepSpec, out_dir: &Path, workers: usize) -> Result<Vec<PathBuf>> {
    let sweep = spec
        .base
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep plan without a [sweep] block".into()))?;
    let evo = spec
        .base
        .evolution
        .ok_or_else(|| Error::Config("missing [evolution] block".into()))?;
    let readout_step = (sweep.readout_time / evo.delta_t).round() as usize;
    if readout_step == 0 || readout_step > evo.n_steps {
        return Err(Error::Config(format!(
            "sweep.readout_time {} does not land within the run",
            sweep.readout_time
        )));
    }

    // grid points in row-major order (first axis outermost)
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &sweep.axes {
        let mut next = Vec::with_capacity(grid.len() * axis.values.len());
        for point in &grid {
            for &v in &axis.values {
                let mut p = point.clone();
                p.push(v);
                next.push(p);
            }
        }
        grid = next;
    }

    let pool = thread_pool(workers)?;
    let measures = spec.base.measures.clone();
    let results: Vec<Vec<f64>> = pool.install(|| {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|point| -> Result<Vec<f64>> {
                let mut cfg = spec.base.clone();
                cfg.sweep = None;
                for (axis, &v) in sweep.axes.iter().zip(point) {
                    apply_sweep_value(&mut cfg, axis.param, v)?;
                }
                // the run only needs to reach the readout time
                if let Some(e) = cfg.evolution.as_mut() {
                    e.n_steps = readout_step;
                }
                for b in &mut cfg.baths {
                    b.delta_k_max = b.delta_k_max.min(readout_step);
                }
                let run = explicit_run_spec(&cfg)?;
                let variant = &run.variants[0];
                let traj = run_job(&variant.job)?;
                let k = traj.times.len() - 1;
                let mut row = Vec::with_capacity(measures.len());
                for m in &measures {
                    row.push(evaluate_measure(*m, &traj, variant.pair)?[k]);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut header: Vec<String> =
        sweep.axes.iter().map(|a| a.param.column().to_string()).collect();
    header.extend(measures.iter().map(|m| m.column().to_string()));
    let mut csv = String::new();
    csv.push_str(&header.join(","));
    csv.push('\n');
    for (point, row) in grid.iter().zip(&results) {
        let mut cells: Vec<String> = point.iter().map(|&v| fmt17(v)).collect();
        cells.extend(row.iter().map(|&v| fmt17(v)));
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }

    let meta = json!({
        "name": spec.name,
        "version": env!("CARGO_PKG_VERSION"),
        "readout_time": sweep.readout_time,
        "readout_step": readout_step,
        "axes": sweep
            .axes
            .iter()
            .map(|a| json!({ "param": a.param.column(), "values": a.values }))
            .collect::<Vec<_>>(),
        "measures": measures.iter().map(|m| m.column()).collect::<Vec<_>>(),
    });
    let csv_path = out_dir.join(format!("{}.csv", spec.stem));
    let json_path = out_dir.join(format!("{}.json", spec.stem));
    write_atomic(&csv_path, &csv)?;
    write_atomic(&json_path, &format!("{:#}\n", meta))?;
    Ok(vec![csv_path, json_path])
}

/// Redfield coupling operator (`sigma_x` at `site`) for the two-qubit model.
pub fn two_qubit_redfield_coupling(site: usize) -> Result<Array2<C64>> {
    site_operator(&pauli_x(), site, 2)
}
