//! Two-user downlink NOMA: SIC ordering, SINRs, rates and energy efficiency.
//!
//! Terminal `i` always denotes the strong user (larger effective gain) that
//! cancels the weak user's signal before decoding its own.

use crate::error::{invalid, Result};

/// Power split between the two terminals plus the power budget it draws on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub rho_i: f64,
    pub rho_j: f64,
    pub p_l_w: f64,
    pub p_c_w: f64,
}

impl PowerSplit {
    pub fn total_fraction(&self) -> f64 {
        self.rho_i + self.rho_j
    }

    /// Radiated power P_l·(ρ_i + ρ_j).
    pub fn radiated_w(&self) -> f64 {
        self.p_l_w * self.total_fraction()
    }

    /// Consumed power P_l·(ρ_i + ρ_j) + p_c.
    pub fn consumed_w(&self) -> f64 {
        self.radiated_w() + self.p_c_w
    }

    /// Checks the budget `p_t_w`, ρ_i + ρ_j ≤ 1 and ρ ∈ [0, 1].
    pub fn validate(&self, p_t_w: f64) -> Result<()> {
        let unit = |r: f64| (0.0..=1.0).contains(&r);
        if !unit(self.rho_i) || !unit(self.rho_j) {
            return Err(invalid(format!(
                "power fractions must lie in [0, 1]: ({}, {})",
                self.rho_i, self.rho_j
            )));
        }
        if self.total_fraction() > 1.0 + 1e-12 {
            return Err(invalid("rho_i + rho_j exceeds 1"));
        }
        if self.radiated_w() > p_t_w * (1.0 + 1e-12) {
            return Err(invalid("radiated power exceeds the budget"));
        }
        Ok(())
    }
}

/// Minimum per-terminal SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosSpec {
    pub min_sinr: f64,
    pub derived_from_rate_bps: Option<f64>,
    pub bandwidth_hz: f64,
}

impl QosSpec {
    pub fn from_rate(rate_bps: f64, bandwidth_hz: f64) -> Result<Self> {
        Ok(Self {
            min_sinr: qos_rate_to_sinr(rate_bps, bandwidth_hz)?,
            derived_from_rate_bps: Some(rate_bps),
            bandwidth_hz,
        })
    }
}

/// Squared magnitudes of the composite channels, strong user first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveGains {
    pub o_i: f64,
    pub o_j: f64,
}

/// Decoding order of the two terminals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SicOrder {
    /// Index (0 or 1) of the terminal that performs SIC.
    pub strong: usize,
    pub weak: usize,
    pub gains: EffectiveGains,
}

/// Orders two channel power gains; ties keep the original order.
pub fn sic_order(gain_first: f64, gain_second: f64) -> SicOrder {
    if gain_second > gain_first {
        SicOrder {
            strong: 1,
            weak: 0,
            gains: EffectiveGains { o_i: gain_second, o_j: gain_first },
        }
    } else {
        SicOrder {
            strong: 0,
            weak: 1,
            gains: EffectiveGains { o_i: gain_first, o_j: gain_second },
        }
    }
}

pub fn sinr_strong(ps: &PowerSplit, gains: &EffectiveGains, sigma2: f64) -> f64 {
    ps.p_l_w * ps.rho_i * gains.o_i / sigma2
}

pub fn sinr_weak(ps: &PowerSplit, gains: &EffectiveGains, sigma2: f64) -> f64 {
    let signal = ps.p_l_w * ps.rho_j * gains.o_j;
    signal / (sigma2 + ps.p_l_w * ps.rho_i * gains.o_j)
}

/// log2(1 + sinr).
pub fn rate(sinr: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(invalid(format!("SINR must be >= 0, got {sinr}")));
    }
    Ok(sinr.ln_1p() / std::f64::consts::LN_2)
}

/// Sum rate over consumed power.
pub fn energy_efficiency(rate_sum: f64, ps: &PowerSplit) -> Result<f64> {
    let denom = ps.consumed_w();
    if !(denom > 0.0) {
        return Err(invalid(format!("consumed power must be > 0, got {denom}")));
    }
    Ok(rate_sum / denom)
}

/// Sum of both rates (bits/s/Hz) under a power split.
pub fn sum_rate(ps: &PowerSplit, gains: &EffectiveGains, sigma2: f64) -> f64 {
    let ri = rate(sinr_strong(ps, gains, sigma2)).unwrap_or(0.0);
    let rj = rate(sinr_weak(ps, gains, sigma2)).unwrap_or(0.0);
    ri + rj
}

/// 2^(R/B) − 1.
pub fn qos_rate_to_sinr(rate_bps: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(invalid(format!("bandwidth must be > 0, got {bandwidth_hz}")));
    }
    if !(rate_bps >= 0.0) {
        return Err(invalid(format!("rate must be >= 0, got {rate_bps}")));
    }
    Ok((rate_bps / bandwidth_hz).exp2() - 1.0)
}

/// Parameters of the feasible power region for fixed channel gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRegion {
    pub gains: EffectiveGains,
    pub sigma2: f64,
    pub p_l_w: f64,
    pub p_t_w: f64,
    pub gamma_min: f64,
}

impl PowerRegion {
    /// True when (ρ_i, ρ_j) satisfies every constraint, with `rel_tol`
    /// relative slack on the QoS constraints.
    pub fn contains(&self, rho_i: f64, rho_j: f64, rel_tol: f64) -> bool {
        let unit = |r: f64| (0.0..=1.0).contains(&r);
        if !unit(rho_i) || !unit(rho_j) || rho_i + rho_j > 1.0 {
            return false;
        }
        if self.p_l_w * (rho_i + rho_j) > self.p_t_w {
            return false;
        }
        let ps = PowerSplit { rho_i, rho_j, p_l_w: self.p_l_w, p_c_w: 0.0 };
        let floor = self.gamma_min * (1.0 - rel_tol);
        sinr_strong(&ps, &self.gains, self.sigma2) >= floor
            && sinr_weak(&ps, &self.gains, self.sigma2) >= floor
    }

    /// Smallest fractions meeting both QoS constraints: ρ_i at its floor and
    /// ρ_j at its floor given ρ_i. `None` if the gains vanish under a
    /// positive threshold.
    pub fn min_fractions(&self) -> Option<(f64, f64)> {
        let g = self.gamma_min;
        if g == 0.0 {
            return Some((0.0, 0.0));
        }
        if !(self.gains.o_i > 0.0 && self.gains.o_j > 0.0) {
            return None;
        }
        let ri = g * self.sigma2 / (self.p_l_w * self.gains.o_i);
        let rj = g * self.sigma2 / (self.p_l_w * self.gains.o_j) + g * ri;
        Some((ri, rj))
    }

    /// Largest admissible ρ_i + ρ_j under the budget and the unit sum.
    pub fn max_fraction(&self) -> f64 {
        (self.p_t_w / self.p_l_w).min(1.0)
    }

    /// Whether any split satisfies every constraint.
    pub fn is_feasible(&self) -> bool {
        match self.min_fractions() {
            Some((ri, rj)) => ri <= 1.0 && rj <= 1.0 && ri + rj <= self.max_fraction(),
            None => false,
        }
    }
}
