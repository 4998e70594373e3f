//! Shipped experiment scenarios. Each preset expands to a full plan with the
//! model, baths, evolution window, and measure set fixed.

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::bath::SpectralDensity;
use crate::error::{Error, Result};
use crate::evolution::{GateMode, SystemModel};
use crate::liouville::DensityMatrix;
use crate::models::{neel_bell_state, AAChainModel, DrivenQubitModel, TwoQubitModel};

use super::config::{
    ExperimentConfig, MeasureName, ModelConfig, OutputConfig, SweepAxisConfig, SweepConfig,
    SweepParam, TwoQubitInitial,
};
use super::runner::{
    two_qubit_initial, Job, JobBath, Plan, ResonanceSpec, RunSpec, SweepSpec, Variant,
};

/// Names and one-line descriptions of every shipped preset.
pub fn list() -> Vec<(&'static str, &'static str)> {
    vec![
        ("fig5", "two qubits, Ohmic baths in equilibrium: correlations vs temperature"),
        ("fig6", "two qubits, cold/hot Ohmic baths: correlations vs temperature gradient"),
        ("fig7", "two qubits, sub-Ohmic baths (zeta = 0.6) in equilibrium"),
        ("fig8", "two qubits, super-Ohmic baths (zeta = 2) in equilibrium"),
        ("fig9", "sweep: pair correlations at t = 20 over memory cutoff x gradient"),
        ("fig10a", "entanglement death, alpha = 0.001: full memory vs Markov vs Redfield"),
        ("fig10b", "entanglement death, alpha = 0.01: full memory vs Markov vs Redfield"),
        ("fig10c", "entanglement death and revival, alpha = 0.1"),
        ("fig11-closed", "closed chain (N = 6): imbalance and end-to-end concurrence"),
        ("fig11-closed-n8", "closed chain (N = 8): imbalance and end-to-end concurrence"),
        ("fig12", "localized chain, site-1 Ohmic bath: melting vs temperature"),
        ("fig13", "ergodic chain, site-1 Ohmic bath: decay vs temperature"),
        ("fig14", "localized chain, site-4 (bulk) Ohmic bath vs temperature"),
        ("fig15", "entangled pair behind buffer chains vs direct bath exposure"),
        ("fig16", "driven qubit pair: teleportation fidelity vs drive frequency"),
        ("fig17", "bath-assisted resonances J(w) n(w) per chain phase (N = 6)"),
        ("fig17-n8", "bath-assisted resonances per chain phase (N = 8)"),
    ]
}

/// Expand a preset name into an executable plan.
pub fn build(name: &str) -> Result<Plan> {
    match name {
        "fig5" => two_qubit_equilibrium(name, ohmic(0.1), 0.2, 150, 40),
        "fig6" => two_qubit_gradient(name),
        "fig7" => two_qubit_equilibrium(name, sub_ohmic(0.1), 0.2, 150, 50),
        "fig8" => two_qubit_equilibrium(name, super_ohmic(0.1), 0.025, 400, 40),
        "fig9" => correlation_sweep(name),
        "fig10a" => entanglement_death(name, 0.001),
        "fig10b" => entanglement_death(name, 0.01),
        "fig10c" => entanglement_death(name, 0.1),
        "fig11-closed" => closed_chain(name, 6),
        "fig11-closed-n8" => closed_chain(name, 8),
        "fig12" => open_chain(name, 6, 1.0, 4.0, 1),
        "fig13" => open_chain(name, 6, 1.0, 0.6, 1),
        "fig14" => open_chain(name, 6, 1.0, 4.0, 4),
        "fig15" => buffered_pair(name, 6),
        "fig16" => driven_pair(name),
        "fig17" => resonances(name, 6),
        "fig17-n8" => resonances(name, 8),
        _ => Err(Error::Config(format!(
            "unknown preset \"{name}\"; run `presets list` for the available names"
        ))),
    }
}

fn ohmic(alpha: f64) -> SpectralDensity {
    SpectralDensity::ohmic(alpha, 4.0).expect("valid Ohmic density")
}

fn sub_ohmic(alpha: f64) -> SpectralDensity {
    SpectralDensity::exponential(alpha, 0.6, 4.0).expect("valid sub-Ohmic density")
}

fn super_ohmic(alpha: f64) -> SpectralDensity {
    SpectralDensity::exponential(alpha, 2.0, 4.0).expect("valid super-Ohmic density")
}

fn pair_baths(j: &SpectralDensity, t1: f64, t2: f64, delta_k_max: usize) -> Vec<JobBath> {
    vec![
        JobBath { site: 1, spectral_density: j.clone(), temperature: t1, delta_k_max },
        JobBath { site: 2, spectral_density: j.clone(), temperature: t2, delta_k_max },
    ]
}

fn two_qubit_system() -> SystemModel {
    SystemModel::TwoQubit { model: TwoQubitModel::default(), mode: GateMode::ExactComposite }
}

fn label(prefix: &str, value: f64) -> String {
    // compact float labels: 0.1 -> "0.1", 1.0 -> "1"
    let s = format!("{value}");
    format!("{prefix}{s}")
}

/// Both qubits in equilibrium baths; one variant per temperature.
fn two_qubit_equilibrium(
    name: &str,
    j: SpectralDensity,
    delta_t: f64,
    n_steps: usize,
    delta_k_max: usize,
) -> Result<Plan> {
    let model = TwoQubitModel::default();
    let rho0 = two_qubit_initial(&model, TwoQubitInitial::Ground)?;
    let variants = [0.1, 0.5, 1.0]
        .into_iter()
        .map(|t| Variant {
            label: label("t", t),
            job: Job::PtTebd {
                system: two_qubit_system(),
                baths: pair_baths(&j, t, t, delta_k_max),
                rho0: rho0.clone(),
                n_steps,
                delta_t,
                epsilon: 1e-6,
                xi: 1e-6,
            },
            pair: Some((1, 2)),
        })
        .collect();
    Ok(Plan::Run(RunSpec {
        name: name.into(),
        variants,
        measures: vec![
            MeasureName::Concurrence,
            MeasureName::GeometricDiscord,
            MeasureName::Coherence,
        ],
        stem: name.into(),
    }))
}

/// Cold first bath, variants over the temperature offset of the second.
fn two_qubit_gradient(name: &str) -> Result<Plan> {
    let j = SpectralDensity::ohmic(0.32, 4.0)?;
    let model = TwoQubitModel::default();
    let rho0 = two_qubit_initial(&model, TwoQubitInitial::Ground)?;
    let t_cold = 0.01;
    let variants = [0.0, 0.5, 1.0]
        .into_iter()
        .map(|dt| Variant {
            label: label("dt", dt),
            job: Job::PtTebd {
                system: two_qubit_system(),
                baths: pair_baths(&j, t_cold, t_cold + dt, 40),
                rho0: rho0.clone(),
                n_steps: 100,
                delta_t: 0.2,
                epsilon: 1e-6,
                xi: 1e-6,
            },
            pair: Some((1, 2)),
        })
        .collect();
    Ok(Plan::Run(RunSpec {
        name: name.into(),
        variants,
        measures: vec![
            MeasureName::Concurrence,
            MeasureName::GeometricDiscord,
            MeasureName::Coherence,
        ],
        stem: name.into(),
    }))
}

/// Readout-time sweep over memory cutoff x temperature gradient.
fn correlation_sweep(name: &str) -> Result<Plan> {
    let bath = |site: usize| super::config::BathConfig {
        site,
        family: super::config::BathFamily::Ohmic,
        alpha: 0.32,
        zeta: None,
        omega_c: 4.0,
        temperature: 0.01,
        delta_k_max: 40,
    };
    let base = ExperimentConfig {
        preset: None,
        model: Some(ModelConfig::TwoQubit {
            omega1: 1.0,
            omega2: 1.0,
            j: 0.375,
            initial: TwoQubitInitial::Ground,
            gate_mode: super::config::GateModeName::Exact,
        }),
        baths: vec![bath(1), bath(2)],
        evolution: Some(super::config::EvolutionConfig {
            delta_t: 0.2,
            n_steps: 100,
            epsilon: 1e-6,
            xi: 1e-6,
        }),
        measures: vec![
            MeasureName::Concurrence,
            MeasureName::GeometricDiscord,
            MeasureName::Coherence,
        ],
        sweep: Some(SweepConfig {
            readout_time: 20.0,
            axes: vec![
                SweepAxisConfig {
                    param: SweepParam::DeltaKMax,
                    values: vec![1.0, 10.0, 20.0, 40.0],
                },
                SweepAxisConfig {
                    param: SweepParam::TemperatureDelta,
                    values: vec![0.0, 0.25, 0.5],
                },
            ],
        }),
        output: Some(OutputConfig { stem: Some(name.into()) }),
    };
    Ok(Plan::Sweep(SweepSpec { name: name.into(), base, stem: name.into() }))
}

/// Full-memory vs Markov vs Bloch-Redfield from `|00>`.
fn entanglement_death(name: &str, alpha: f64) -> Result<Plan> {
    let j = SpectralDensity::ohmic(alpha, 4.0)?;
    let model = TwoQubitModel::default();
    let rho0 = two_qubit_initial(&model, TwoQubitInitial::ZeroZero)?;
    let (n_steps, delta_t) = (150usize, 0.2);
    let baths = pair_baths(&j, 0.2, 0.2, 40);
    let full = Variant {
        label: "full".into(),
        job: Job::PtTebd {
            system: two_qubit_system(),
            baths: baths.clone(),
            rho0: rho0.clone(),
            n_steps,
            delta_t,
            epsilon: 1e-7,
            xi: 1e-7,
        },
        pair: Some((1, 2)),
    };
    let markov = Variant {
        label: "markov".into(),
        job: Job::Markov {
            system: two_qubit_system(),
            baths: baths.clone(),
            rho0: rho0.clone(),
            n_steps,
            delta_t,
            epsilon: 1e-7,
            xi: 1e-7,
        },
        pair: Some((1, 2)),
    };
    let redfield = Variant {
        label: "redfield".into(),
        job: Job::Redfield {
            hamiltonian: model.hamiltonian(),
            couplings: baths
                .iter()
                .map(|b| {
                    Ok((b.clone(), super::runner::two_qubit_redfield_coupling(b.site)?))
                })
                .collect::<Result<Vec<_>>>()?,
            rho0,
            n_steps,
            delta_t,
        },
        pair: Some((1, 2)),
    };
    Ok(Plan::Run(RunSpec {
        name: name.into(),
        variants: vec![full, markov, redfield],
        measures: vec![MeasureName::Concurrence],
        stem: name.into(),
    }))
}

fn chain_phases() -> Vec<(&'static str, f64, f64)> {
    // (label, delta, h): ergodic, many-body localized, Anderson localized
    vec![("ergodic", 1.0, 0.6), ("mbl", 1.0, 4.0), ("al", 0.0, 4.0)]
}

/// Closed chain from the Neel-Bell state, one variant per phase.
fn closed_chain(name: &str, n_sites: usize) -> Result<Plan> {
    let psi0 = neel_bell_state(n_sites)?;
    let variants = chain_phases()
        .into_iter()
        .map(|(lbl, delta, h)| {
            Ok(Variant {
                label: lbl.into(),
                job: Job::Closed {
                    chain: AAChainModel::new(n_sites, delta, h)?,
                    psi0: psi0.clone(),
                    n_steps: 200,
                    delta_t: 0.2,
                    epsilon: 1e-6,
                },
                pair: Some((1, n_sites)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Plan::Run(RunSpec {
        name: name.into(),
        variants,
        measures: vec![MeasureName::Imbalance, MeasureName::Concurrence],
        stem: name.into(),
    }))
}

/// Chain with one Ohmic bath; variants over the bath temperature.
fn open_chain(name: &str, n_sites: usize, delta: f64, h: f64, bath_site: usize) -> Result<Plan> {
    let j = ohmic(0.1);
    let psi0 = neel_bell_state(n_sites)?;
    let rho0 = DensityMatrix::pure(&psi0)?;
    let variants = [0.1, 1.0, 10.0]
        .into_iter()
        .map(|t| {
            Ok(Variant {
                label: label("t", t),
                job: Job::PtTebd {
                    system: SystemModel::Chain(
                        AAChainModel::new(n_sites, delta, h)?.with_bath_site(bath_site)?,
                    ),
                    baths: vec![JobBath {
                        site: bath_site,
                        spectral_density: j.clone(),
                        temperature: t,
                        delta_k_max: 40,
                    }],
                    rho0: rho0.clone(),
                    n_steps: 100,
                    delta_t: 0.2,
                    epsilon: 1e-5,
                    xi: 1e-5,
                },
                pair: Some((1, n_sites)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Plan::Run(RunSpec {
        name: name.into(),
        variants,
        measures: vec![MeasureName::Imbalance, MeasureName::Concurrence],
        stem: name.into(),
    }))
}

/// Chain state with a singlet-like Bell pair `(|01> + |10>)/sqrt(2)` on sites
/// `(a, a+1)` and the remaining sites in the Neel pattern (odd sites
/// occupied).
pub fn bell_pair_chain_state(n_sites: usize, a: usize) -> Result<Array1<C64>> {
    if a == 0 || a + 1 > n_sites {
        return Err(Error::Argument(format!(
            "pair ({a}, {}) out of range 1..={n_sites}",
            a + 1
        )));
    }
    let bit = |site: usize| 1usize << (n_sites - site);
    let mut background = 0usize;
    for site in 1..=n_sites {
        if site != a && site != a + 1 && site % 2 == 1 {
            background |= bit(site);
        }
    }
    let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut psi = Array1::<C64>::zeros(1 << n_sites);
    psi[background | bit(a + 1)] = amp;
    psi[background | bit(a)] = amp;
    Ok(psi)
}

/// Entangled central pair behind buffer chains, with hot/cold baths on the
/// chain ends, against direct bath exposure of a bare pair.
fn buffered_pair(name: &str, n_sites: usize) -> Result<Plan> {
    let j = ohmic(0.1);
    let (t_hot, t_cold) = (0.8, 0.2);
    let mid = n_sites / 2;
    let psi0 = bell_pair_chain_state(n_sites, mid)?;
    let rho0 = DensityMatrix::pure(&psi0)?;
    let end_baths = vec![
        JobBath { site: 1, spectral_density: j.clone(), temperature: t_hot, delta_k_max: 40 },
        JobBath {
            site: n_sites,
            spectral_density: j.clone(),
            temperature: t_cold,
            delta_k_max: 40,
        },
    ];
    let buffered = |lbl: &str, delta: f64, h: f64| -> Result<Variant> {
        Ok(Variant {
            label: lbl.into(),
            job: Job::PtTebd {
                system: SystemModel::Chain(
                    AAChainModel::new(n_sites, delta, h)?
                        .with_bath_site(1)?
                        .with_bath_site(n_sites)?,
                ),
                baths: end_baths.clone(),
                rho0: rho0.clone(),
                n_steps: 100,
                delta_t: 0.2,
                epsilon: 1e-5,
                xi: 1e-5,
            },
            pair: Some((mid, mid + 1)),
        })
    };

    // unprotected reference: the bare pair as a two-site segment of the same
    // chain (potential evaluated at the central sites), baths attached
    // directly to both pair members
    let bare_chain = AAChainModel::new(2, 1.0, 4.0)?
        .with_site_offset(mid - 1)
        .with_bath_site(1)?
        .with_bath_site(2)?;
    let bare_psi = bell_pair_chain_state(2, 1)?;
    let bare = Variant {
        label: "no-buffer".into(),
        job: Job::PtTebd {
            system: SystemModel::Chain(bare_chain),
            baths: vec![
                JobBath {
                    site: 1,
                    spectral_density: j.clone(),
                    temperature: t_hot,
                    delta_k_max: 40,
                },
                JobBath {
                    site: 2,
                    spectral_density: j.clone(),
                    temperature: t_cold,
                    delta_k_max: 40,
                },
            ],
            rho0: DensityMatrix::pure(&bare_psi)?,
            n_steps: 100,
            delta_t: 0.2,
            epsilon: 1e-5,
            xi: 1e-5,
        },
        pair: Some((1, 2)),
    };

    Ok(Plan::Run(RunSpec {
        name: name.into(),
        variants: vec![
            buffered("al-buffer", 0.0, 4.0)?,
            buffered("mbl-buffer", 1.0, 4.0)?,
            bare,
        ],
        measures: vec![MeasureName::Concurrence],
        stem: name.into(),
    }))
}

/// Bell pair whose halves each pass through the same driven open qubit.
fn driven_pair(name: &str) -> Result<Plan> {
    let j = SpectralDensity::gaussian(0.1, 5.0)?;
    let variants = [0.0, 10.0, 100.0]
        .into_iter()
        .map(|freq| Variant {
            label: label("omega", freq),
            job: Job::DrivenPair {
                model: DrivenQubitModel::new(1.0, 50.0, freq),
                bath: JobBath {
                    site: 1,
                    spectral_density: j.clone(),
                    temperature: 0.2,
                    delta_k_max: 30,
                },
                n_steps: 100,
                delta_t: 0.1,
                epsilon: 1e-6,
                xi: 1e-6,
            },
            pair: Some((1, 2)),
        })
        .collect();
    Ok(Plan::Run(RunSpec {
        name: name.into(),
        variants,
        measures: vec![MeasureName::TeleportFidelity, MeasureName::Concurrence],
        stem: name.into(),
    }))
}

/// Thermally driven eigenmode transitions per chain phase.
fn resonances(name: &str, n_sites: usize) -> Result<Plan> {
    let phases = chain_phases()
        .into_iter()
        .map(|(lbl, delta, h)| {
            Ok((
                lbl.to_string(),
                AAChainModel::new(n_sites, delta, h)?.with_bath_site(1)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Plan::Resonance(ResonanceSpec {
        name: name.into(),
        phases,
        spectral_density: ohmic(0.1),
        temperature: 1.0,
        stem: name.into(),
    }))
}
