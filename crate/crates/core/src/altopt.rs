//! Alternating optimisation: power allocation with the RIS fixed, then RIS
//! phases with the power fixed, until the energy efficiency settles.

use std::time::Instant;

use rand::Rng;

use crate::beamforming::{passive_beamforming, BeamformingConfig, PhaseShiftVector};
use crate::channel::{ChannelRealization, Gt};
use crate::error::{Error, Result};
use crate::noma::{rate, sic_order, sinr_strong, sinr_weak, EffectiveGains, PowerSplit};
use crate::power_alloc::{dinkelbach_power_allocation, PowerAllocOptions, PowerProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseInit {
    Ones,
    Random,
}

#[derive(Debug, Clone)]
pub struct AltOptConfig {
    /// Satellite transmit power P_l, also the budget P_T.
    pub p_t_w: f64,
    pub p_c_w: f64,
    pub gamma_min: f64,
    pub power: PowerAllocOptions,
    pub beamforming: BeamformingConfig,
    /// Relative EE change that ends the loop.
    pub tol_outer: f64,
    pub max_outer: usize,
    pub init: PhaseInit,
    /// Points per axis of the feasibility gate grid.
    pub gate_resolution: usize,
}

impl Default for AltOptConfig {
    fn default() -> Self {
        Self {
            p_t_w: 100.0,
            p_c_w: 10.0,
            gamma_min: 0.0,
            power: PowerAllocOptions::default(),
            beamforming: BeamformingConfig::default(),
            tol_outer: 1e-3,
            max_outer: 20,
            init: PhaseInit::Ones,
            gate_resolution: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// bits/s/Hz/W
    pub ee: f64,
    pub phi: f64,
    pub eta: f64,
    pub rho_i: f64,
    pub rho_j: f64,
    pub rate_i: f64,
    pub rate_j: f64,
    pub feasible: bool,
    /// Terminal decoding first (strong user) after this iteration.
    pub strong: Gt,
    pub step1_ms: f64,
    pub step2_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EETrace {
    pub records: Vec<IterationRecord>,
}

impl EETrace {
    pub fn ee_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ee).collect()
    }

    /// True when no recorded EE drops by more than `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.records.windows(2).all(|w| w[1].ee >= w[0].ee - slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub power: PowerSplit,
    pub phases: PhaseShiftVector,
    pub strong: Gt,
    pub ee: f64,
    pub trace: EETrace,
    pub status: SolveStatus,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.trace.records.len()
    }
}

/// SIC ordering and the ordered channel gains |h + gΘf|² under `phases`.
pub fn role_gains(ch: &ChannelRealization, phases: &PhaseShiftVector) -> Result<(Gt, EffectiveGains)> {
    let oi = ch.effective_gain(Gt::I, phases)?.norm_sqr();
    let oj = ch.effective_gain(Gt::J, phases)?.norm_sqr();
    let order = sic_order(oi, oj);
    Ok((Gt::BOTH[order.strong], order.gains))
}

fn problem_for(gains: EffectiveGains, ch: &ChannelRealization, cfg: &AltOptConfig) -> PowerProblem {
    PowerProblem {
        gains,
        sigma2: ch.noise_power_w,
        p_l_w: cfg.p_t_w,
        p_t_w: cfg.p_t_w,
        p_c_w: cfg.p_c_w,
        gamma_min: cfg.gamma_min,
    }
}

/// Per-terminal rates (strong, weak) and EE of a split under `phases`.
pub fn evaluate(
    ch: &ChannelRealization,
    power: &PowerSplit,
    phases: &PhaseShiftVector,
) -> Result<(f64, f64, f64)> {
    let (_, gains) = role_gains(ch, phases)?;
    let sigma2 = ch.noise_power_w;
    let ri = rate(sinr_strong(power, &gains, sigma2))?;
    let rj = rate(sinr_weak(power, &gains, sigma2))?;
    let consumed = power.consumed_w();
    if !(consumed > 0.0) {
        return Err(Error::InvalidArgument(format!("consumed power must be > 0, got {consumed}")));
    }
    Ok((ri, rj, (ri + rj) / consumed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub diagnostic: String,
}

/// Whether any (ρ_i, ρ_j) on a `resolution`² grid meets both QoS
/// constraints at the full budget under `phases`.
pub fn check_feasibility(
    ch: &ChannelRealization,
    phases: &PhaseShiftVector,
    cfg: &AltOptConfig,
    resolution: usize,
) -> Result<Feasibility> {
    let (_, gains) = role_gains(ch, phases)?;
    let region = problem_for(gains, ch, cfg).region();
    let n = resolution.max(1);
    let step = 1.0 / n as f64;
    for a in 0..=n {
        for b in 0..=(n - a) {
            if region.contains(a as f64 * step, b as f64 * step, 1e-12) {
                return Ok(Feasibility {
                    feasible: true,
                    diagnostic: format!("grid point ({}, {}) meets γ_min = {}", a as f64 * step, b as f64 * step, cfg.gamma_min),
                });
            }
        }
    }
    let snr = cfg.p_t_w * gains.o_i / ch.noise_power_w;
    Ok(Feasibility {
        feasible: false,
        diagnostic: format!(
            "no split on the {n}×{n} grid meets γ_min = {} (strong-terminal full-power SNR {snr:.4e})",
            cfg.gamma_min
        ),
    })
}

fn initial_phases<R: Rng + ?Sized>(m: usize, init: PhaseInit, rng: &mut R) -> PhaseShiftVector {
    match init {
        PhaseInit::Ones => PhaseShiftVector::ones(m),
        PhaseInit::Random => PhaseShiftVector::random(m, rng),
    }
}

/// Phases adding every reflected path in phase with the direct link of `gt`.
pub fn aligned_phases(ch: &ChannelRealization, gt: Gt) -> PhaseShiftVector {
    let h = ch.h_direct[gt.index()].arg();
    let alphas = ch
        .cascade(gt)
        .iter()
        .map(|c| num_complex::Complex64::from_polar(1.0, h - c.arg()))
        .collect();
    PhaseShiftVector::new(alphas).expect("unit modulus by construction")
}

/// Runs the alternating loop on one channel realization. `rng` drives the
/// Gaussian randomization (and a random initial Θ when configured).
pub fn optimize<R: Rng + ?Sized>(ch: &ChannelRealization, cfg: &AltOptConfig, rng: &mut R) -> Result<Solution> {
    ch.validate()?;
    let mut theta = initial_phases(ch.elements(), cfg.init, rng);
    let mut gate = check_feasibility(ch, &theta, cfg, cfg.gate_resolution)?;
    // an infeasible start is retried with the RIS focused on either terminal
    if !gate.feasible && ch.elements() > 0 {
        for gt in [Gt::J, Gt::I] {
            let cand = aligned_phases(ch, gt);
            let g = check_feasibility(ch, &cand, cfg, cfg.gate_resolution)?;
            if g.feasible {
                theta = cand;
                gate = g;
                break;
            }
        }
    }
    let (mut strong, mut gains) = role_gains(ch, &theta)?;
    let zero_power = |theta: PhaseShiftVector, strong| Solution {
        power: PowerSplit { rho_i: 0.0, rho_j: 0.0, p_l_w: cfg.p_t_w, p_c_w: cfg.p_c_w },
        phases: theta,
        strong,
        ee: 0.0,
        trace: EETrace::default(),
        status: SolveStatus::Infeasible,
    };
    if !gate.feasible {
        log::debug!("feasibility gate: {}", gate.diagnostic);
        return Ok(zero_power(theta, strong));
    }

    let mut trace = EETrace::default();
    let mut power: Option<PowerSplit> = None;
    let mut status = SolveStatus::MaxIters;
    for r in 1..=cfg.max_outer {
        // Step 1: power with Θ fixed, warm-started from the last split
        let t1 = Instant::now();
        let problem = problem_for(gains, ch, cfg);
        let mut opts = cfg.power.clone();
        if let Some(p) = &power {
            opts.init = (p.rho_i, p.rho_j);
        }
        let (mut ps, st) = match dinkelbach_power_allocation(&problem, &opts) {
            Ok(v) => v,
            Err(Error::Infeasible(msg)) if power.is_none() => {
                log::debug!("step 1 infeasible: {msg}");
                return Ok(zero_power(theta, strong));
            }
            Err(Error::Infeasible(_)) => break,
            Err(e) => return Err(e),
        };
        let mut ee = problem.ee(ps.rho_i, ps.rho_j);
        if let Some(p) = &power {
            let prev = problem.ee(p.rho_i, p.rho_j);
            if problem.region().contains(p.rho_i, p.rho_j, 1e-9) && prev > ee {
                ps = *p;
                ee = prev;
            }
        }
        let step1_ms = t1.elapsed().as_secs_f64() * 1e3;

        // Step 2: phases with ρ fixed
        let t2 = Instant::now();
        let out = passive_beamforming(ch, &ps, strong, cfg.gamma_min, &theta, &cfg.beamforming, rng)?;
        let mut accepted = false;
        if !out.kept_incoming {
            let (s2, g2) = role_gains(ch, &out.phases)?;
            let p2 = problem_for(g2, ch, cfg);
            let ee2 = p2.ee(ps.rho_i, ps.rho_j);
            if p2.region().contains(ps.rho_i, ps.rho_j, 1e-9) && ee2 >= ee {
                theta = out.phases;
                strong = s2;
                gains = g2;
                ee = ee2;
                accepted = true;
            }
        }
        let step2_ms = t2.elapsed().as_secs_f64() * 1e3;

        let (rate_i, rate_j, ee_eval) = evaluate(ch, &ps, &theta)?;
        debug_assert!((ee_eval - ee).abs() <= 1e-9 * ee.abs().max(1.0));
        trace.records.push(IterationRecord {
            iteration: r,
            ee: ee_eval,
            phi: st.phi,
            eta: st.eta,
            rho_i: ps.rho_i,
            rho_j: ps.rho_j,
            rate_i,
            rate_j,
            feasible: problem_for(gains, ch, cfg).region().contains(ps.rho_i, ps.rho_j, 1e-9),
            strong,
            step1_ms,
            step2_ms,
        });
        let prev_ee = trace.records.iter().rev().nth(1).map(|rec| rec.ee);
        power = Some(ps);
        if !accepted {
            status = SolveStatus::Converged;
            break;
        }
        if let Some(prev) = prev_ee {
            if (ee_eval - prev).abs() <= cfg.tol_outer * prev.abs() {
                status = SolveStatus::Converged;
                break;
            }
        }
    }
    let Some(power) = power else {
        return Ok(zero_power(theta, strong));
    };
    let (_, _, ee) = evaluate(ch, &power, &theta)?;
    Ok(Solution { power, phases: theta, strong, ee, trace, status })
}
