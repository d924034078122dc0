//! Scenario configuration: TOML in, validated [`ScenarioConfig`] out.
//!
//! Every key is optional; missing keys take the defaults below and unknown
//! keys are rejected. Example:
//!
//! ```toml
//! elements = 64
//! p_t_dbm = 50.0
//! qos_rate_bps = 10e6
//!
//! [geometry]
//! carrier_hz = 18.5e9
//!
//! [solver]
//! ccp_iters = 10
//!
//! [sweeps]
//! power_dbm = [30.0, 32.5, 35.0, 37.5, 40.0, 42.5, 45.0, 47.5, 50.0]
//! ```

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::altopt::{AltOptConfig, PhaseInit};
use crate::beamforming::BeamformingConfig;
use crate::channel::{dbm_to_watts, thermal_noise_w, GeometryConfig};
use crate::error::{Error, Result};
use crate::noma::qos_rate_to_sinr;
use crate::power_alloc::PowerAllocOptions;
use crate::sdp::SdpOptions;

/// The three compared systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    /// Joint power and RIS phase optimisation.
    Proposed,
    /// Random fixed RIS phases, power optimised.
    BenchmarkFixedPhase,
    /// No RIS, power optimised.
    ConventionalNoRis,
}

impl Framework {
    pub const ALL: [Framework; 3] =
        [Framework::Proposed, Framework::BenchmarkFixedPhase, Framework::ConventionalNoRis];

    pub fn name(self) -> &'static str {
        match self {
            Framework::Proposed => "proposed",
            Framework::BenchmarkFixedPhase => "benchmark_fixed_phase",
            Framework::ConventionalNoRis => "conventional_no_ris",
        }
    }
}

impl std::fmt::Display for Framework {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Framework {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Framework::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown framework `{s}` (expected one of proposed, benchmark_fixed_phase, conventional_no_ris)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInitKind {
    Ones,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_eta: f64,
    pub max_dinkelbach: usize,
    pub max_sca: usize,
    pub max_dual_steps: usize,
    pub dual_step: f64,
    /// Relative EE change that stops the alternating loop.
    pub tol_outer: f64,
    pub max_outer: usize,
    pub ccp_iters: usize,
    pub ccp_tol: f64,
    pub randomization_samples: usize,
    pub sdp_tol: f64,
    /// Use the Schur-complement lifting with a rank penalty.
    pub schur_variant: bool,
    pub schur_penalty: f64,
    /// RIS-only QoS threshold for the phase step (SINR, linear); defaults
    /// to the power-step threshold.
    pub gamma_min_bar: Option<f64>,
    pub phase_init: PhaseInitKind,
    pub gate_resolution: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = PowerAllocOptions::default();
        Self {
            tol_eta: p.tol_eta,
            max_dinkelbach: p.max_dinkelbach,
            max_sca: p.max_sca,
            max_dual_steps: p.max_dual_steps,
            dual_step: p.dual_step,
            tol_outer: 1e-3,
            max_outer: 20,
            ccp_iters: 10,
            ccp_tol: 1e-4,
            randomization_samples: 200,
            sdp_tol: 1e-7,
            schur_variant: false,
            schur_penalty: 10.0,
            gamma_min_bar: None,
            phase_init: PhaseInitKind::Ones,
            gate_resolution: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub power_dbm: Vec<f64>,
    /// QoS rate grid in bit/s.
    pub qos_rate_bps: Vec<f64>,
    pub convergence_elements: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            power_dbm: vec![30.0, 32.5, 35.0, 37.5, 40.0, 42.5, 45.0, 47.5, 50.0],
            qos_rate_bps: vec![0.0, 5e6, 10e6, 15e6, 20e6, 25e6, 30e6],
            convergence_elements: vec![32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// RIS element count M; 0 removes the RIS.
    pub elements: i64,
    pub p_t_dbm: f64,
    pub p_c_w: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    /// Per-terminal QoS rate; ignored when `gamma_min` is set.
    pub qos_rate_bps: f64,
    /// Per-terminal QoS as a linear SINR.
    pub gamma_min: Option<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub frameworks: Vec<Framework>,
    pub geometry: GeometryConfig,
    pub solver: SolverConfig,
    pub sweeps: SweepConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            elements: 64,
            p_t_dbm: 50.0,
            p_c_w: 10.0,
            bandwidth_hz: 20e6,
            noise_figure_db: 7.0,
            qos_rate_bps: 10e6,
            gamma_min: None,
            trials: 200,
            master_seed: 1,
            frameworks: Framework::ALL.to_vec(),
            geometry: GeometryConfig::default(),
            solver: SolverConfig::default(),
            sweeps: SweepConfig::default(),
        }
    }
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), message: message.into() }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.elements < 0 {
            return Err(config_err("elements", format!("must be >= 0, got {}", self.elements)));
        }
        if !self.p_t_dbm.is_finite() {
            return Err(config_err("p_t_dbm", "must be finite"));
        }
        for (k, v) in [("p_c_w", self.p_c_w), ("bandwidth_hz", self.bandwidth_hz)] {
            if !positive(v) {
                return Err(config_err(k, format!("must be > 0, got {v}")));
            }
        }
        if !self.noise_figure_db.is_finite() {
            return Err(config_err("noise_figure_db", "must be finite"));
        }
        if !(self.qos_rate_bps >= 0.0 && self.qos_rate_bps.is_finite()) {
            return Err(config_err("qos_rate_bps", "must be >= 0"));
        }
        if let Some(g) = self.gamma_min {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(config_err("gamma_min", "must be >= 0"));
            }
        }
        if self.trials == 0 {
            return Err(config_err("trials", "must be >= 1"));
        }
        if self.frameworks.is_empty() {
            return Err(config_err("frameworks", "must list at least one framework"));
        }
        self.geometry.validate().map_err(|(k, m)| config_err(&k, m))?;

        let s = &self.solver;
        for (k, v) in [
            ("solver.tol_eta", s.tol_eta),
            ("solver.dual_step", s.dual_step),
            ("solver.tol_outer", s.tol_outer),
            ("solver.ccp_tol", s.ccp_tol),
            ("solver.sdp_tol", s.sdp_tol),
        ] {
            if !positive(v) {
                return Err(config_err(k, format!("must be > 0, got {v}")));
            }
        }
        for (k, v) in [
            ("solver.max_dinkelbach", s.max_dinkelbach),
            ("solver.max_sca", s.max_sca),
            ("solver.max_dual_steps", s.max_dual_steps),
            ("solver.max_outer", s.max_outer),
            ("solver.ccp_iters", s.ccp_iters),
            ("solver.randomization_samples", s.randomization_samples),
            ("solver.gate_resolution", s.gate_resolution),
        ] {
            if v == 0 {
                return Err(config_err(k, "must be >= 1"));
            }
        }
        if !(s.schur_penalty >= 0.0 && s.schur_penalty.is_finite()) {
            return Err(config_err("solver.schur_penalty", "must be >= 0"));
        }
        if let Some(g) = s.gamma_min_bar {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(config_err("solver.gamma_min_bar", "must be >= 0"));
            }
        }

        let ascending = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
        if !ascending(&self.sweeps.power_dbm) {
            return Err(config_err("sweeps.power_dbm", "must be finite and strictly ascending"));
        }
        if !ascending(&self.sweeps.qos_rate_bps) || self.sweeps.qos_rate_bps.iter().any(|&r| r < 0.0) {
            return Err(config_err("sweeps.qos_rate_bps", "must be >= 0 and strictly ascending"));
        }
        if self.sweeps.convergence_elements.is_empty() {
            return Err(config_err("sweeps.convergence_elements", "must not be empty"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            config_err(if key.is_empty() || key == "." { "<root>" } else { &key }, inner.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn element_count(&self) -> usize {
        self.elements.max(0) as usize
    }

    pub fn p_t_w(&self) -> f64 {
        dbm_to_watts(self.p_t_dbm)
    }

    pub fn noise_power_w(&self) -> f64 {
        thermal_noise_w(self.bandwidth_hz, self.noise_figure_db)
    }

    /// QoS threshold as a linear SINR.
    pub fn gamma_min(&self) -> f64 {
        self.gamma_min
            .unwrap_or_else(|| qos_rate_to_sinr(self.qos_rate_bps, self.bandwidth_hz).expect("validated"))
    }

    pub fn altopt(&self) -> AltOptConfig {
        let s = &self.solver;
        AltOptConfig {
            p_t_w: self.p_t_w(),
            p_c_w: self.p_c_w,
            gamma_min: self.gamma_min(),
            power: PowerAllocOptions {
                tol_eta: s.tol_eta,
                max_dinkelbach: s.max_dinkelbach,
                max_sca: s.max_sca,
                max_dual_steps: s.max_dual_steps,
                dual_step: s.dual_step,
                ..PowerAllocOptions::default()
            },
            beamforming: BeamformingConfig {
                max_ccp_iters: s.ccp_iters,
                ccp_tol: s.ccp_tol,
                samples: s.randomization_samples,
                schur: s.schur_variant,
                schur_penalty: s.schur_penalty,
                gamma_min_bar: s.gamma_min_bar,
                sdp: SdpOptions { tol: s.sdp_tol, ..SdpOptions::default() },
            },
            tol_outer: s.tol_outer,
            max_outer: s.max_outer,
            init: match s.phase_init {
                PhaseInitKind::Ones => PhaseInit::Ones,
                PhaseInitKind::Random => PhaseInit::Random,
            },
            gate_resolution: s.gate_resolution,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    ScenarioConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.elements, 64);
        assert_eq!(cfg.p_t_dbm, 50.0);
        assert_eq!(cfg.bandwidth_hz, 20e6);
        assert!((cfg.p_t_w() - 100.0).abs() < 1e-12);
        assert!((cfg.gamma_min() - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn negative_elements_names_the_key() {
        let err = ScenarioConfig::from_toml_str("elements = -1").unwrap_err();
        assert!(err.to_string().contains("`elements`"), "{err}");
    }

    #[test]
    fn unknown_and_mistyped_keys_report_paths() {
        let err = ScenarioConfig::from_toml_str("[solver]\nccp_iterz = 3").unwrap_err();
        assert!(err.to_string().contains("solver"), "{err}");
        assert!(err.to_string().contains("ccp_iterz"), "{err}");
        let err = ScenarioConfig::from_toml_str("[geometry]\ncarrier_hz = \"x\"").unwrap_err();
        assert!(err.to_string().contains("geometry.carrier_hz"), "{err}");
        let err = ScenarioConfig::from_toml_str("[geometry]\ncarrier_hz = 1e9").unwrap_err();
        assert!(err.to_string().contains("geometry.carrier_hz"), "{err}");
    }

    #[test]
    fn round_trip_normalises() {
        let text = "elements = 16\nframeworks = [\"proposed\"]\n[sweeps]\npower_dbm = [30.0, 40.0]\n";
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        let normal = cfg.to_toml_string();
        let again = ScenarioConfig::from_toml_str(&normal).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml_string(), normal);
    }

    #[test]
    fn framework_names_round_trip() {
        for f in Framework::ALL {
            assert_eq!(f.name().parse::<Framework>().unwrap(), f);
        }
        assert!("bogus".parse::<Framework>().is_err());
    }

    #[test]
    fn missing_file_reports_path() {
        let err = parse_config(Path::new("/nonexistent/risnoma.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/risnoma.toml"));
    }
}
