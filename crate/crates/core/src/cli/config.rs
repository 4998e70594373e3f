//! TOML experiment configuration: either a preset name or explicit model /
//! bath / evolution blocks.

use serde::{Deserialize, Serialize};

use crate::bath::SpectralDensity;
use crate::error::{Error, Result};

/// Raw configuration file contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Shipped scenario name; mutually exclusive with the explicit blocks.
    pub preset: Option<String>,
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub baths: Vec<BathConfig>,
    pub evolution: Option<EvolutionConfig>,
    #[serde(default)]
    pub measures: Vec<MeasureName>,
    pub sweep: Option<SweepConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    SingleQubit {
        /// Coefficient of `sigma_z / 2`.
        #[serde(default = "one")]
        omega: f64,
        /// Coefficient of `sigma_x / 2`.
        #[serde(default)]
        tunneling: f64,
        #[serde(default = "default_coupling")]
        coupling: CouplingName,
    },
    TwoQubit {
        #[serde(default = "one")]
        omega1: f64,
        #[serde(default = "one")]
        omega2: f64,
        #[serde(default = "default_j")]
        j: f64,
        #[serde(default)]
        initial: TwoQubitInitial,
        #[serde(default)]
        gate_mode: GateModeName,
    },
    Chain {
        n_sites: usize,
        delta: f64,
        h: f64,
        beta: Option<f64>,
        /// Closed (pure-state TEBD) evolution instead of PT-TEBD.
        #[serde(default)]
        closed: bool,
    },
    DrivenQubit {
        #[serde(default = "one")]
        omega: f64,
        lambda: f64,
        drive_freq: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_j() -> f64 {
    0.375
}

fn default_coupling() -> CouplingName {
    CouplingName::SigmaZ
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingName {
    SigmaX,
    SigmaZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TwoQubitInitial {
    /// Interacting ground state of the system Hamiltonian.
    #[default]
    Ground,
    /// Computational `|00>`.
    ZeroZero,
    /// Maximally entangled `(|00> + |11>)/sqrt(2)`.
    Bell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GateModeName {
    #[default]
    Exact,
    Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    /// 1-based coupled site.
    pub site: usize,
    pub family: BathFamily,
    pub alpha: f64,
    /// Power-law exponent; required for `family = "exponential"`.
    pub zeta: Option<f64>,
    pub omega_c: f64,
    pub temperature: f64,
    pub delta_k_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BathFamily {
    Ohmic,
    Exponential,
    Gaussian,
}

impl BathConfig {
    pub fn spectral_density(&self) -> Result<SpectralDensity> {
        match self.family {
            BathFamily::Ohmic => SpectralDensity::ohmic(self.alpha, self.omega_c),
            BathFamily::Exponential => {
                let zeta = self.zeta.ok_or_else(|| {
                    Error::Config(
                        "bath family \"exponential\" requires the zeta field".into(),
                    )
                })?;
                SpectralDensity::exponential(self.alpha, zeta, self.omega_c)
            }
            BathFamily::Gaussian => SpectralDensity::gaussian(self.alpha, self.omega_c),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub delta_t: f64,
    pub n_steps: usize,
    /// TEBD truncation threshold.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Process-tensor construction truncation threshold.
    #[serde(default = "default_xi")]
    pub xi: f64,
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_xi() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureName {
    Concurrence,
    GeometricDiscord,
    Coherence,
    TeleportFidelity,
    Imbalance,
    Population,
}

impl MeasureName {
    pub fn column(&self) -> &'static str {
        match self {
            MeasureName::Concurrence => "concurrence",
            MeasureName::GeometricDiscord => "geometric_discord",
            MeasureName::Coherence => "coherence",
            MeasureName::TeleportFidelity => "fidelity",
            MeasureName::Imbalance => "imbalance",
            MeasureName::Population => "population",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Readout time for the combined matrix CSV.
    pub readout_time: f64,
    pub axes: Vec<SweepAxisConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxisConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Memory cutoff of every bath (values are step counts).
    DeltaKMax,
    /// Temperature of every bath.
    Temperature,
    /// Temperature of the second bath as an offset above the first bath's.
    TemperatureDelta,
}

impl SweepParam {
    pub fn column(&self) -> &'static str {
        match self {
            SweepParam::DeltaKMax => "delta_k_max",
            SweepParam::Temperature => "temperature",
            SweepParam::TemperatureDelta => "temperature_delta",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// File-name stem for the CSV/JSON outputs.
    pub stem: Option<String>,
}

/// Parse and structurally validate a config file's contents.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if let Some(name) = &cfg.preset {
        if cfg.model.is_some() || cfg.evolution.is_some() || !cfg.baths.is_empty() {
            return Err(Error::Config(format!(
                "preset \"{name}\" cannot be combined with explicit model/bath/evolution blocks"
            )));
        }
        return Ok(());
    }
    let model = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Config("missing [model] block (or a preset name)".into()))?;
    let evo = cfg
        .evolution
        .as_ref()
        .ok_or_else(|| Error::Config("missing [evolution] block".into()))?;
    if cfg.measures.is_empty() {
        return Err(Error::Config("no observables requested".into()));
    }
    if !(evo.delta_t > 0.0) {
        return Err(Error::Config(format!(
            "evolution.delta_t must be positive, got {}",
            evo.delta_t
        )));
    }
    if evo.n_steps == 0 {
        return Err(Error::Config("evolution.n_steps must be at least 1".into()));
    }
    for (name, v) in [("epsilon", evo.epsilon), ("xi", evo.xi)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Config(format!(
                "evolution.{name} must lie in (0, 1), got {v}"
            )));
        }
    }
    let n_sites = match model {
        ModelConfig::SingleQubit { .. } | ModelConfig::DrivenQubit { .. } => 1,
        ModelConfig::TwoQubit { .. } => 2,
        ModelConfig::Chain { n_sites, .. } => *n_sites,
    };
    let closed_chain = matches!(model, ModelConfig::Chain { closed: true, .. });
    if closed_chain && !cfg.baths.is_empty() {
        return Err(Error::Config(
            "a closed chain cannot carry bath blocks".into(),
        ));
    }
    for (i, bath) in cfg.baths.iter().enumerate() {
        if bath.site == 0 || bath.site > n_sites {
            return Err(Error::Config(format!(
                "baths[{i}].site = {} out of range 1..={n_sites}",
                bath.site
            )));
        }
        if bath.delta_k_max == 0 || bath.delta_k_max > evo.n_steps {
            return Err(Error::Config(format!(
                "baths[{i}].delta_k_max = {} must lie in 1..={}",
                bath.delta_k_max, evo.n_steps
            )));
        }
        bath.spectral_density()
            .map_err(|e| Error::Config(format!("baths[{i}]: {e}")))?;
        if bath.temperature < 0.0 {
            return Err(Error::Config(format!(
                "baths[{i}].temperature must be nonnegative, got {}",
                bath.temperature
            )));
        }
    }
    for m in &cfg.measures {
        match m {
            MeasureName::Concurrence
            | MeasureName::GeometricDiscord
            | MeasureName::TeleportFidelity => {
                if n_sites < 2 {
                    return Err(Error::Config(format!(
                        "measure {:?} needs at least two sites",
                        m
                    )));
                }
            }
            MeasureName::Imbalance => {
                if !matches!(model, ModelConfig::Chain { .. }) {
                    return Err(Error::Config(
                        "measure imbalance applies only to chain models".into(),
                    ));
                }
            }
            MeasureName::Coherence | MeasureName::Population => {}
        }
    }
    if let Some(sweep) = &cfg.sweep {
        if sweep.axes.is_empty() || sweep.axes.len() > 2 {
            return Err(Error::Config(format!(
                "sweep needs 1 or 2 axes, got {}",
                sweep.axes.len()
            )));
        }
        for (i, axis) in sweep.axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(Error::Config(format!("sweep.axes[{i}].values is empty")));
            }
            if matches!(axis.param, SweepParam::TemperatureDelta) && cfg.baths.len() < 2 {
                return Err(Error::Config(
                    "temperature-delta sweep needs two baths".into(),
                ));
            }
        }
        let readout_step = sweep.readout_time / evo.delta_t;
        if sweep.readout_time < 0.0 || readout_step > evo.n_steps as f64 + 1e-9 {
            return Err(Error::Config(format!(
                "sweep.readout_time {} outside the simulated window",
                sweep.readout_time
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPLICIT: &str = r#"
        measures = ["concurrence", "coherence"]
        [model]
        kind = "two-qubit"
        [[baths]]
        site = 1
        family = "ohmic"
        alpha = 0.1
        omega_c = 4.0
        temperature = 0.2
        delta_k_max = 10
        [evolution]
        delta_t = 0.2
        n_steps = 50
    "#;

    #[test]
    fn explicit_config_parses() {
        let cfg = parse_config(EXPLICIT).unwrap();
        assert!(cfg.preset.is_none());
        assert_eq!(cfg.baths.len(), 1);
        assert_eq!(cfg.measures.len(), 2);
        let evo = cfg.evolution.unwrap();
        assert_eq!(evo.epsilon, 1e-6);
        assert_eq!(evo.xi, 1e-5);
    }

    #[test]
    fn preset_config_parses() {
        let cfg = parse_config("preset = \"fig10a\"\n").unwrap();
        assert_eq!(cfg.preset.as_deref(), Some("fig10a"));
    }

    #[test]
    fn preset_and_blocks_conflict() {
        let text = format!("preset = \"fig5\"\n{EXPLICIT}");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn empty_measures_rejected() {
        let text = EXPLICIT.replace("measures = [\"concurrence\", \"coherence\"]", "measures = []");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("no observables requested"), "{err}");
    }

    #[test]
    fn cutoff_longer_than_run_rejected() {
        let text = EXPLICIT.replace("delta_k_max = 10", "delta_k_max = 60");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn bad_epsilon_rejected() {
        let text = EXPLICIT.replace("n_steps = 50", "n_steps = 50\nepsilon = 1.5");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        let text = format!("{EXPLICIT}\nbogus = 1\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn imbalance_needs_chain() {
        let text = EXPLICIT.replace(
            "measures = [\"concurrence\", \"coherence\"]",
            "measures = [\"imbalance\"]",
        );
        assert!(parse_config(&text).is_err());
    }
}
