//! Link budget and fading models for the satellite → ground terminal,
//! satellite → RIS and RIS → ground terminal links.

mod bessel;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::PhaseShiftVector;
use crate::error::{invalid, Result};

pub use bessel::{bessel_j, bessel_j_scaled};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Beamwidth constant of the Bessel beam pattern: ϑ = 2.07123·sin θ / sin θ_3dB.
const BEAM_PATTERN_SCALE: f64 = 2.07123;

/// Which of the two NOMA ground terminals a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gt {
    I,
    J,
}

impl Gt {
    pub const BOTH: [Gt; 2] = [Gt::I, Gt::J];

    pub fn index(self) -> usize {
        match self {
            Gt::I => 0,
            Gt::J => 1,
        }
    }

    pub fn other(self) -> Gt {
        match self {
            Gt::I => Gt::J,
            Gt::J => Gt::I,
        }
    }
}

/// Physical layout and antenna parameters of the downlink.
///
/// Per-terminal quantities are stored as `[i, j]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub sat_altitude_m: f64,
    pub sat_gt_distance_m: [f64; 2],
    pub sat_ris_distance_m: f64,
    pub ris_gt_distance_m: [f64; 2],
    pub boresight_angle_rad: [f64; 2],
    /// Off-boresight angle of the RIS as seen from the satellite beam centre.
    pub ris_boresight_angle_rad: f64,
    pub theta_3db_rad: f64,
    pub carrier_hz: f64,
    /// Allowed carrier range, Ka-band downlink by default.
    pub carrier_range_hz: [f64; 2],
    pub pathloss_exponent: f64,
    pub g_max_dbi: f64,
    pub g_rx_dbi: f64,
    /// Receive gain of a single RIS element on the satellite → RIS link.
    pub ris_element_gain_dbi: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let deg = PI / 180.0;
        Self {
            sat_altitude_m: 600e3,
            sat_gt_distance_m: [600.5e3, 602e3],
            sat_ris_distance_m: 600.8e3,
            ris_gt_distance_m: [5.0, 6.0],
            boresight_angle_rad: [0.05 * deg, 0.25 * deg],
            ris_boresight_angle_rad: 0.1 * deg,
            theta_3db_rad: 0.4 * deg,
            carrier_hz: 18.5e9,
            carrier_range_hz: [17.7e9, 19.7e9],
            pathloss_exponent: 2.2,
            g_max_dbi: 50.0,
            g_rx_dbi: 0.0,
            ris_element_gain_dbi: 6.0,
        }
    }
}

impl GeometryConfig {
    /// Checks the invariants; on failure returns the offending key and reason.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let err = |k: &str, m: String| Err((k.to_string(), m));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.sat_altitude_m) {
            return err("geometry.sat_altitude_m", "must be > 0".into());
        }
        for (k, v) in [
            ("geometry.sat_gt_distance_m", self.sat_gt_distance_m),
            ("geometry.ris_gt_distance_m", self.ris_gt_distance_m),
        ] {
            if !v.iter().all(|&d| positive(d)) {
                return err(k, "distances must be > 0".into());
            }
        }
        if !positive(self.sat_ris_distance_m) {
            return err("geometry.sat_ris_distance_m", "must be > 0".into());
        }
        let angle_ok = |a: f64| a.is_finite() && (0.0..PI / 2.0).contains(&a);
        if !self.boresight_angle_rad.iter().all(|&a| angle_ok(a)) {
            return err("geometry.boresight_angle_rad", "must lie in [0, π/2)".into());
        }
        if !angle_ok(self.ris_boresight_angle_rad) {
            return err("geometry.ris_boresight_angle_rad", "must lie in [0, π/2)".into());
        }
        if !(positive(self.theta_3db_rad) && self.theta_3db_rad < PI / 2.0) {
            return err("geometry.theta_3db_rad", "must lie in (0, π/2)".into());
        }
        let [lo, hi] = self.carrier_range_hz;
        if !(positive(lo) && lo <= hi) {
            return err("geometry.carrier_range_hz", "expected 0 < min <= max".into());
        }
        if !(positive(self.carrier_hz) && (lo..=hi).contains(&self.carrier_hz)) {
            return err(
                "geometry.carrier_hz",
                format!("{} outside [{lo}, {hi}]", self.carrier_hz),
            );
        }
        if !(self.pathloss_exponent >= 2.0 && self.pathloss_exponent.is_finite()) {
            return err("geometry.pathloss_exponent", "must be >= 2".into());
        }
        for (k, v) in [
            ("geometry.g_max_dbi", self.g_max_dbi),
            ("geometry.g_rx_dbi", self.g_rx_dbi),
            ("geometry.ris_element_gain_dbi", self.ris_element_gain_dbi),
        ] {
            if !v.is_finite() {
                return err(k, "must be finite".into());
            }
        }
        Ok(())
    }

    pub fn g_max(&self) -> f64 {
        db_to_linear(self.g_max_dbi)
    }

    /// Amplitude of the satellite → terminal link, before the Doppler phase.
    pub fn direct_amplitude(&self, gt: Gt) -> f64 {
        let k = gt.index();
        let g_tx = satellite_antenna_gain(self.boresight_angle_rad[k], self);
        free_space_amplitude(
            g_tx,
            db_to_linear(self.g_rx_dbi),
            self.carrier_hz,
            self.sat_gt_distance_m[k],
        )
    }

    /// Per-element amplitude of the satellite → RIS link.
    pub fn sat_ris_amplitude(&self) -> f64 {
        let g_tx = satellite_antenna_gain(self.ris_boresight_angle_rad, self);
        free_space_amplitude(
            g_tx,
            db_to_linear(self.ris_element_gain_dbi),
            self.carrier_hz,
            self.sat_ris_distance_m,
        )
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Thermal noise power in watts: −174 dBm/Hz + 10·log10(B) + NF.
pub fn thermal_noise_w(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(-174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

/// Bessel beam pattern of the satellite antenna (linear gain).
///
/// Evaluated through J_n(ϑ)/ϑ^n so the beam centre needs no special
/// division; θ = 0 returns `G_max` exactly.
pub fn satellite_antenna_gain(theta_rad: f64, cfg: &GeometryConfig) -> f64 {
    let g_max = cfg.g_max();
    let vartheta = BEAM_PATTERN_SCALE * theta_rad.sin() / cfg.theta_3db_rad.sin();
    if vartheta == 0.0 {
        return g_max;
    }
    beam_pattern(vartheta.abs()) * g_max
}

/// [J1(ϑ)/(2ϑ) + 36·J3(ϑ)/ϑ³]², the normalised beam pattern.
pub fn beam_pattern(vartheta: f64) -> f64 {
    let j1 = bessel_j_scaled(1, vartheta).expect("order 1 is supported");
    let j3 = bessel_j_scaled(3, vartheta).expect("order 3 is supported");
    let bracket = j1 / 2.0 + 36.0 * j3;
    bracket * bracket
}

/// sqrt(G_tx · G_rx · (c / (4π f_c d))²).
pub fn free_space_amplitude(g_tx: f64, g_rx: f64, carrier_hz: f64, distance_m: f64) -> f64 {
    (g_tx * g_rx).sqrt() * SPEED_OF_LIGHT / (4.0 * PI * carrier_hz * distance_m)
}

/// A circularly-symmetric complex Gaussian draw with unit variance
/// (Box–Muller).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    // u1 in (0, 1] keeps the log finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * PI * u2)
}

/// Doppler term ζ, uniform on [0, 2) so that e^{jπζ} is a uniform phase.
pub fn sample_doppler<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    2.0 * rng.gen::<f64>()
}

/// h = ĥ·e^{jπζ} for a given Doppler term.
pub fn direct_channel(cfg: &GeometryConfig, gt: Gt, doppler: f64) -> Complex64 {
    Complex64::from_polar(cfg.direct_amplitude(gt), PI * doppler)
}

/// Draws the direct link coefficient and returns it with its Doppler term.
pub fn sample_direct_channel<R: Rng + ?Sized>(
    cfg: &GeometryConfig,
    gt: Gt,
    rng: &mut R,
) -> (Complex64, f64) {
    let zeta = sample_doppler(rng);
    (direct_channel(cfg, gt, zeta), zeta)
}

/// Satellite → RIS vector: deterministic link-budget amplitude per element
/// with independent uniform phases.
pub fn sample_sat_ris_channel<R: Rng + ?Sized>(
    cfg: &GeometryConfig,
    elements: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if elements == 0 {
        return Err(invalid("RIS channel needs at least one element"));
    }
    let amp = cfg.sat_ris_amplitude();
    Ok((0..elements)
        .map(|_| Complex64::from_polar(amp, 2.0 * PI * rng.gen::<f64>()))
        .collect())
}

/// RIS → terminal vector: Rayleigh fading scaled by d^{−β/2}.
pub fn sample_ris_gt_channel<R: Rng + ?Sized>(
    cfg: &GeometryConfig,
    gt: Gt,
    elements: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if elements == 0 {
        return Err(invalid("RIS channel needs at least one element"));
    }
    let scale = cfg.ris_gt_distance_m[gt.index()].powf(-cfg.pathloss_exponent / 2.0);
    Ok((0..elements).map(|_| complex_gaussian(rng) * scale).collect())
}

/// One draw of every channel coefficient in the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_direct: [Complex64; 2],
    pub g_sat_ris: Vec<Complex64>,
    pub f_ris_gt: [Vec<Complex64>; 2],
    pub doppler_phase: [f64; 2],
    pub noise_power_w: f64,
}

impl ChannelRealization {
    /// Draws a full realization. The draw order is fixed (direct i, direct j,
    /// satellite → RIS, RIS → i, RIS → j) so a seed pins every coefficient.
    pub fn sample<R: Rng + ?Sized>(
        cfg: &GeometryConfig,
        elements: usize,
        noise_power_w: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(noise_power_w > 0.0) || !noise_power_w.is_finite() {
            return Err(invalid(format!("noise power must be > 0, got {noise_power_w}")));
        }
        let (hi, zi) = sample_direct_channel(cfg, Gt::I, rng);
        let (hj, zj) = sample_direct_channel(cfg, Gt::J, rng);
        let (g, fi, fj) = if elements == 0 {
            (Vec::new(), Vec::new(), Vec::new())
        } else {
            (
                sample_sat_ris_channel(cfg, elements, rng)?,
                sample_ris_gt_channel(cfg, Gt::I, elements, rng)?,
                sample_ris_gt_channel(cfg, Gt::J, elements, rng)?,
            )
        };
        Ok(Self {
            h_direct: [hi, hj],
            g_sat_ris: g,
            f_ris_gt: [fi, fj],
            doppler_phase: [zi, zj],
            noise_power_w,
        })
    }

    pub fn elements(&self) -> usize {
        self.g_sat_ris.len()
    }

    /// The same draw with the RIS removed.
    pub fn without_ris(&self) -> Self {
        Self {
            g_sat_ris: Vec::new(),
            f_ris_gt: [Vec::new(), Vec::new()],
            ..self.clone()
        }
    }

    /// h + gΘf for terminal `gt`.
    pub fn effective_gain(&self, gt: Gt, phases: &PhaseShiftVector) -> Result<Complex64> {
        let k = gt.index();
        effective_gain(self.h_direct[k], &self.g_sat_ris, phases, &self.f_ris_gt[k])
    }

    /// Cascaded RIS channel g ∘ f for terminal `gt`.
    pub fn cascade(&self, gt: Gt) -> Vec<Complex64> {
        cascade_vector(&self.g_sat_ris, &self.f_ris_gt[gt.index()])
            .expect("realization vectors share one length")
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.elements();
        if self.f_ris_gt.iter().any(|f| f.len() != m) {
            return Err(invalid("RIS channel vectors differ in length"));
        }
        if !(self.noise_power_w > 0.0) {
            return Err(invalid("noise power must be > 0"));
        }
        if self.h_direct.iter().any(|h| !h.norm().is_finite()) {
            return Err(invalid("direct channel must be finite"));
        }
        Ok(())
    }
}

/// h + Σ_m g_m·α_m·f_m.
pub fn effective_gain(
    h: Complex64,
    g: &[Complex64],
    phases: &PhaseShiftVector,
    f: &[Complex64],
) -> Result<Complex64> {
    let alphas = phases.alphas();
    if g.len() != alphas.len() || f.len() != alphas.len() {
        return Err(invalid(format!(
            "length mismatch: g={}, phases={}, f={}",
            g.len(),
            alphas.len(),
            f.len()
        )));
    }
    Ok(g
        .iter()
        .zip(alphas)
        .zip(f)
        .fold(h, |acc, ((g, a), f)| acc + g * a * f))
}

/// Elementwise product g ∘ f.
pub fn cascade_vector(g: &[Complex64], f: &[Complex64]) -> Result<Vec<Complex64>> {
    if g.len() != f.len() {
        return Err(invalid(format!(
            "length mismatch: g={}, f={}",
            g.len(),
            f.len()
        )));
    }
    Ok(g.iter().zip(f).map(|(a, b)| a * b).collect())
}
