//! Step 1 of the alternating optimizer: NOMA power allocation for a fixed
//! RIS configuration.
//!
//! The ratio objective is handled by Dinkelbach's transform. Each
//! parameterised problem is solved by successive convex approximation of
//! the rates (Ψ·log2 γ + Ω lower bounds), and each SCA surrogate through its
//! Lagrangian: the ρ_i stationarity condition is a quadratic solved in
//! closed form, ρ_j has a closed-form stationary point, and the multipliers
//! follow a projected subgradient schedule.
//!
//! Duals are kept in the units of the Lagrangian as written (raw powers);
//! the subgradient steps are preconditioned by per-constraint scales so
//! that every constraint moves at a comparable rate.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::noma::{
    energy_efficiency, sinr_strong, sinr_weak, sum_rate, EffectiveGains, PowerRegion, PowerSplit,
};

/// Lower clamp on ρ keeping log2 γ finite.
pub const RHO_EPS: f64 = 1e-6;

/// Step-1 problem data for one channel state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerProblem {
    pub gains: EffectiveGains,
    pub sigma2: f64,
    /// Satellite transmit power P_l the fractions apply to.
    pub p_l_w: f64,
    /// Power budget P_T.
    pub p_t_w: f64,
    pub p_c_w: f64,
    pub gamma_min: f64,
}

impl PowerProblem {
    pub fn region(&self) -> PowerRegion {
        PowerRegion {
            gains: self.gains,
            sigma2: self.sigma2,
            p_l_w: self.p_l_w,
            p_t_w: self.p_t_w,
            gamma_min: self.gamma_min,
        }
    }

    pub fn split(&self, rho_i: f64, rho_j: f64) -> PowerSplit {
        PowerSplit { rho_i, rho_j, p_l_w: self.p_l_w, p_c_w: self.p_c_w }
    }

    pub fn sinrs(&self, rho_i: f64, rho_j: f64) -> (f64, f64) {
        let ps = self.split(rho_i, rho_j);
        (
            sinr_strong(&ps, &self.gains, self.sigma2),
            sinr_weak(&ps, &self.gains, self.sigma2),
        )
    }

    pub fn sum_rate(&self, rho_i: f64, rho_j: f64) -> f64 {
        sum_rate(&self.split(rho_i, rho_j), &self.gains, self.sigma2)
    }

    pub fn consumed_w(&self, rho_i: f64, rho_j: f64) -> f64 {
        self.p_l_w * (rho_i + rho_j) + self.p_c_w
    }

    /// True energy efficiency.
    pub fn ee(&self, rho_i: f64, rho_j: f64) -> f64 {
        let ps = self.split(rho_i, rho_j);
        energy_efficiency(self.sum_rate(rho_i, rho_j), &ps).unwrap_or(0.0)
    }

    /// Normalisation of each constraint to units of ρ: QoS i, QoS j, budget, ρ_i + ρ_j ≤ 1.
    fn constraint_scales(&self) -> [f64; 4] {
        [
            (self.p_l_w * self.gains.o_i).max(f64::MIN_POSITIVE),
            (self.p_l_w * self.gains.o_j).max(f64::MIN_POSITIVE),
            self.p_l_w,
            1.0,
        ]
    }

    /// Raw constraint slacks, positive when satisfied.
    pub fn slacks(&self, rho_i: f64, rho_j: f64) -> [f64; 4] {
        let EffectiveGains { o_i, o_j } = self.gains;
        let p = self.p_l_w;
        let g = self.gamma_min;
        [
            p * rho_i * o_i - g * self.sigma2,
            p * rho_j * o_j - g * (self.sigma2 + p * rho_i * o_j),
            self.p_t_w - p * (rho_i + rho_j),
            1.0 - (rho_i + rho_j),
        ]
    }

    /// Moves (ρ_i, ρ_j) into the feasible polygon. Two repair orders are
    /// tried (trim ρ_j first, trim ρ_i first); both results are returned.
    fn repair(&self, rho_i: f64, rho_j: f64) -> Vec<(f64, f64)> {
        let region = self.region();
        let Some((ri_min, _)) = region.min_fractions() else {
            return Vec::new();
        };
        let g = self.gamma_min;
        let rj_floor = |ri: f64| match region.min_fractions() {
            Some((ri0, rj0)) => rj0 - g * ri0 + g * ri,
            None => f64::INFINITY,
        };
        let cap = region.max_fraction();
        let lo_i = ri_min.max(RHO_EPS);
        let mut out = Vec::with_capacity(2);

        // trim ρ_j first
        let ri = rho_i.clamp(lo_i, 1.0);
        let mut rj = rho_j.max(rj_floor(ri)).max(RHO_EPS).min(1.0);
        let mut ri_a = ri;
        if ri_a + rj > cap {
            rj = (cap - ri_a).max(rj_floor(ri_a)).max(RHO_EPS);
            if ri_a + rj > cap {
                ri_a = ((cap - rj_floor(0.0)) / (1.0 + g)).min(cap - RHO_EPS);
                rj = rj_floor(ri_a).max(RHO_EPS);
            }
        }
        out.push((ri_a, rj));

        // trim ρ_i first
        let rj = rho_j.max(RHO_EPS).min(1.0);
        let mut ri_b = rho_i.clamp(lo_i, 1.0).min(cap - rj);
        let mut rj_b = rj.max(rj_floor(ri_b));
        if ri_b < lo_i || ri_b + rj_b > cap {
            ri_b = lo_i;
            rj_b = rj_floor(ri_b).max(RHO_EPS).max(rj.min(cap - ri_b));
        }
        out.push((ri_b, rj_b));

        out.retain(|&(a, b)| {
            a >= ri_min && a > 0.0 && b > 0.0 && region.contains(a, b, 1e-9)
        });
        out
    }
}

/// One Dinkelbach iteration: (φ^t, η^t, ρ_i^t, ρ_j^t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachRecord {
    pub phi: f64,
    pub eta: f64,
    pub rho_i: f64,
    pub rho_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachState {
    pub phi: f64,
    pub eta: f64,
    pub iteration: usize,
    pub trace: Vec<DinkelbachRecord>,
    /// False when the iteration budget ran out before |η| < tol.
    pub converged: bool,
}

/// First-order SCA coefficients of log2(1 + γ) around an expansion point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaCoefficients {
    pub psi_i: f64,
    pub psi_j: f64,
    pub omega_i: f64,
    pub omega_j: f64,
}

impl ScaCoefficients {
    /// Ψ_i log2 γ_i + Ω_i + Ψ_j log2 γ_j + Ω_j.
    pub fn surrogate_sum(&self, gamma_i: f64, gamma_j: f64) -> f64 {
        self.psi_i * gamma_i.log2() + self.omega_i + self.psi_j * gamma_j.log2() + self.omega_j
    }
}

fn sca_pair(gamma: f64) -> (f64, f64) {
    let psi = gamma / (1.0 + gamma);
    (psi, gamma.ln_1p() / LN_2 - psi * gamma.log2())
}

/// Ψ = γ/(1+γ), Ω = log2(1+γ) − Ψ·log2 γ for both terminals.
pub fn sca_coefficients(gamma_i: f64, gamma_j: f64) -> Result<ScaCoefficients> {
    if !(gamma_i > 0.0 && gamma_j > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SCA expansion needs positive SINRs, got ({gamma_i}, {gamma_j})"
        )));
    }
    let (psi_i, omega_i) = sca_pair(gamma_i);
    let (psi_j, omega_j) = sca_pair(gamma_j);
    Ok(ScaCoefficients { psi_i, psi_j, omega_i, omega_j })
}

/// Multipliers of the QoS i, QoS j, budget and unit-sum constraints, and the base subgradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualVariables {
    pub lambda: [f64; 4],
    /// Base step c of the diminishing schedule c/√k.
    pub step: f64,
}

impl DualVariables {
    pub fn zero(step: f64) -> Self {
        Self { lambda: [0.0; 4], step }
    }
}

/// Projected subgradient step λ ← max(0, λ − (c/√k)·slack).
///
/// Positive slack means the constraint holds, so its multiplier shrinks.
pub fn dual_update(duals: &DualVariables, slacks: &[f64; 4], k: usize) -> DualVariables {
    let k = k.max(1) as f64;
    let step = duals.step / k.sqrt();
    let mut next = *duals;
    for (l, s) in next.lambda.iter_mut().zip(slacks) {
        *l = (*l - step * s).max(0.0);
    }
    next
}

/// The Lagrangian of the SCA surrogate problem, term by term as written.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_value(
    ps: &PowerSplit,
    duals: &DualVariables,
    sca: &ScaCoefficients,
    gains: &EffectiveGains,
    phi: f64,
    gamma_min: f64,
    sigma2: f64,
    p_t_w: f64,
) -> Result<f64> {
    let gi = sinr_strong(ps, gains, sigma2);
    let gj = sinr_weak(ps, gains, sigma2);
    if !(gi > 0.0 && gj > 0.0) {
        return Err(Error::Domain(format!(
            "log of nonpositive SINR in the Lagrangian: ({gi}, {gj})"
        )));
    }
    let p = ps.p_l_w;
    let delta = ps.rho_i + ps.rho_j;
    let [l1, l2, l3, l4] = duals.lambda;
    Ok(sca.surrogate_sum(gi, gj) - phi * (p * delta + ps.p_c_w)
        + l1 * (p * ps.rho_i * gains.o_i - gamma_min * sigma2)
        + l2 * (p * ps.rho_j * gains.o_j - gamma_min * (sigma2 + p * ps.rho_i * gains.o_j))
        + l3 * (p_t_w - p * delta)
        + l4 * (1.0 - delta))
}

/// Coefficients of the ρ_i stationarity condition of the Lagrangian.
///
/// Multiplying ∂L/∂ρ_i = 0 by ρ_i·(σ² + P ρ_i O_j)·ln 2 / σ² gives
/// `quad[0]·ρ² + quad[1]·ρ + quad[2] = 0`, normalised so the largest
/// coefficient has unit magnitude. The roots are (A ± √B)/C with
/// A = −quad[1], B = quad[1]² − 4·quad[0]·quad[2], C = 2·quad[0].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub quad: [f64; 3],
}

impl KktCoefficients {
    pub fn residual(&self, rho: f64) -> f64 {
        let [q2, q1, q0] = self.quad;
        (q2 * rho + q1) * rho + q0
    }
}

pub fn kkt_coefficients(
    duals: &DualVariables,
    sca: &ScaCoefficients,
    gains: &EffectiveGains,
    phi: f64,
    p_l_w: f64,
    sigma2: f64,
    gamma_min: f64,
) -> KktCoefficients {
    let [l1, l2, l3, l4] = duals.lambda;
    let p = p_l_w;
    // marginal price of ρ_i from the linear terms of L
    let k = l1 * p * gains.o_i - l2 * gamma_min * p * gains.o_j - (phi + l3) * p - l4;
    let snr_j = p * gains.o_j / sigma2;
    let mut quad = [
        k * LN_2 * snr_j,
        (sca.psi_i - sca.psi_j) * snr_j + k * LN_2,
        sca.psi_i,
    ];
    let scale = quad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        quad.iter_mut().for_each(|v| *v /= scale);
    }
    KktCoefficients {
        a: -quad[1],
        b: quad[1] * quad[1] - 4.0 * quad[0] * quad[2],
        c: 2.0 * quad[0],
        quad,
    }
}

/// Real stationary points ρ_i ∈ (0, 1) of the Lagrangian in ρ_i.
///
/// Both signs of (A ± √B)/C are returned; B < 0 yields no roots and C = 0
/// falls back to the linear remainder.
pub fn kkt_root(
    duals: &DualVariables,
    sca: &ScaCoefficients,
    gains: &EffectiveGains,
    phi: f64,
    p_l_w: f64,
    sigma2: f64,
    gamma_min: f64,
) -> Vec<f64> {
    let k = kkt_coefficients(duals, sca, gains, phi, p_l_w, sigma2, gamma_min);
    let [q2, q1, q0] = k.quad;
    let mut roots = Vec::with_capacity(2);
    if q2.abs() < 1e-14 {
        if q1 != 0.0 {
            roots.push(-q0 / q1);
        }
    } else if k.b >= -1e-12 {
        if k.b.abs() <= 1e-12 {
            roots.push(k.a / k.c);
        } else {
            // cancellation-free form of (A ± √B)/C
            let sq = k.b.sqrt();
            let q = -0.5 * (q1 + q1.signum() * sq);
            let q = if q1 == 0.0 { 0.5 * sq } else { q };
            roots.push(q / q2);
            if q != 0.0 {
                roots.push(q0 / q);
            }
        }
    }
    roots.retain(|r| r.is_finite() && *r > 0.0 && *r < 1.0);
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    roots
}

/// How ρ_j is paired with a candidate ρ_i.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoJRule {
    /// ρ_j = 1 − ρ_i: every candidate spends the full budget.
    Complement,
    /// A fixed ρ_j, capped at 1 − ρ_i.
    Given(f64),
}

/// Everything `select_root` needs to score a candidate.
#[derive(Debug, Clone, Copy)]
pub struct RootContext<'a> {
    pub problem: &'a PowerProblem,
    pub duals: &'a DualVariables,
    pub sca: &'a ScaCoefficients,
    pub phi: f64,
    pub rho_j: RhoJRule,
}

impl RootContext<'_> {
    fn pair(&self, rho_i: f64) -> (f64, f64) {
        let ri = rho_i.clamp(RHO_EPS, 1.0 - RHO_EPS);
        let rj = match self.rho_j {
            RhoJRule::Complement => 1.0 - ri,
            RhoJRule::Given(r) => r.min(1.0 - ri),
        };
        (ri, rj.clamp(RHO_EPS, 1.0 - RHO_EPS))
    }

    fn score(&self, rho_i: f64, rho_j: f64) -> Option<f64> {
        let p = self.problem;
        lagrangian_value(
            &p.split(rho_i, rho_j),
            self.duals,
            self.sca,
            &p.gains,
            self.phi,
            p.gamma_min,
            p.sigma2,
            p.p_t_w,
        )
        .ok()
        .filter(|v| v.is_finite())
    }
}

/// Picks the candidate with the largest Lagrangian.
///
/// Out-of-range candidates are dropped; when none survive the boundary
/// points {ε, 0.5, 1 − ε} are scanned instead.
pub fn select_root(candidates: &[f64], ctx: &RootContext<'_>) -> Result<PowerSplit> {
    let in_range: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|r| r.is_finite() && *r > 0.0 && *r < 1.0)
        .collect();
    let pool = if in_range.is_empty() {
        vec![RHO_EPS, 0.5, 1.0 - RHO_EPS]
    } else {
        in_range
    };
    pool.iter()
        .filter_map(|&r| {
            let (ri, rj) = ctx.pair(r);
            ctx.score(ri, rj).map(|v| (v, ri, rj))
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, ri, rj)| ctx.problem.split(ri, rj))
        .ok_or_else(|| Error::Infeasible("no candidate power split has a finite Lagrangian".into()))
}

/// Tolerances and budgets of the three nested loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerAllocOptions {
    pub tol_eta: f64,
    pub max_dinkelbach: usize,
    pub max_sca: usize,
    pub sca_tol: f64,
    pub max_dual_steps: usize,
    pub dual_step: f64,
    pub init: (f64, f64),
    /// Overrides φ⁰ (by default the EE of the initial split).
    pub phi_init: Option<f64>,
}

impl Default for PowerAllocOptions {
    fn default() -> Self {
        Self {
            tol_eta: 1e-4,
            max_dinkelbach: 20,
            max_sca: 10,
            sca_tol: 1e-5,
            max_dual_steps: 500,
            dual_step: 0.1,
            init: (0.3, 0.7),
            phi_init: None,
        }
    }
}

/// Value of the SCA surrogate minus the φ-weighted power.
fn surrogate_objective(p: &PowerProblem, sca: &ScaCoefficients, phi: f64, ri: f64, rj: f64) -> f64 {
    let (gi, gj) = p.sinrs(ri, rj);
    sca.surrogate_sum(gi, gj) - phi * p.consumed_w(ri, rj)
}

/// F(ρ) − φ·D(ρ) with the true rates.
fn parametric_objective(p: &PowerProblem, phi: f64, ri: f64, rj: f64) -> f64 {
    p.sum_rate(ri, rj) - phi * p.consumed_w(ri, rj)
}

/// Stationary ρ_j of the (separable) Lagrangian.
fn stationary_rho_j(p: &PowerProblem, duals: &DualVariables, sca: &ScaCoefficients, phi: f64) -> f64 {
    let [_, l2, l3, l4] = duals.lambda;
    let price = (phi + l3) * p.p_l_w + l4 - l2 * p.p_l_w * p.gains.o_j;
    if price <= 0.0 {
        1.0
    } else {
        (sca.psi_j / (LN_2 * price)).clamp(RHO_EPS, 1.0)
    }
}

/// ∂/∂ρ of the surrogate objective, (d/dρ_i, d/dρ_j), in bits per unit ρ.
fn surrogate_gradient(p: &PowerProblem, sca: &ScaCoefficients, phi: f64, ri: f64, rj: f64) -> [f64; 2] {
    let pj = p.p_l_w * p.gains.o_j;
    [
        (sca.psi_i / ri - sca.psi_j * pj / (p.sigma2 + ri * pj)) / LN_2 - phi * p.p_l_w,
        sca.psi_j / (rj * LN_2) - phi * p.p_l_w,
    ]
}

/// Interior maximisers of a 1-D function on [lo, hi] given its derivative:
/// sign changes from + to − on a geometric grid, refined by bisection.
fn edge_maximisers(lo: f64, hi: f64, deriv: impl Fn(f64) -> f64) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Vec::new();
    }
    const N: usize = 96;
    let lo_g = lo.max(RHO_EPS);
    let ratio = (hi / lo_g).powf(1.0 / N as f64);
    let mut out = Vec::new();
    let mut a = lo_g;
    let mut da = deriv(a);
    for k in 1..=N {
        let b = if k == N { hi } else { lo_g * ratio.powi(k as i32) };
        let db = deriv(b);
        if da > 0.0 && db <= 0.0 {
            let (mut x0, mut x1) = (a, b);
            for _ in 0..80 {
                let m = 0.5 * (x0 + x1);
                if deriv(m) > 0.0 {
                    x0 = m;
                } else {
                    x1 = m;
                }
            }
            out.push(0.5 * (x0 + x1));
        }
        a = b;
        da = db;
    }
    out
}

/// Enumerates the KKT points of the SCA surrogate over the feasible polygon,
/// one active set at a time, and returns the best feasible one.
///
/// The feasible set is {ρ_i ≥ r_i, ρ_j ≥ r_j + γ ρ_i, ρ_i + ρ_j ≤ cap}; the
/// surrogate is concave in (ln ρ_i, ln ρ_j), so the best KKT point is the
/// maximiser.
fn surrogate_kkt_point(p: &PowerProblem, sca: &ScaCoefficients, phi: f64) -> Option<(f64, f64)> {
    let region = p.region();
    let (r_i, r_j) = region.min_fractions()?;
    let g = p.gamma_min;
    let cap = region.max_fraction();
    let lo_i = r_i.max(RHO_EPS);
    let floor_j = |ri: f64| (r_j - g * r_i + g * ri).max(RHO_EPS);
    let free_j = if phi > 0.0 {
        sca.psi_j / (LN_2 * phi * p.p_l_w)
    } else {
        f64::INFINITY
    };
    let mut cands: Vec<(f64, f64)> = Vec::new();

    // ρ_j at its own stationary point (interior, or on the ρ_i floor)
    let zero = DualVariables::zero(0.0);
    let mut ri_opts = kkt_root(&zero, sca, &p.gains, phi, p.p_l_w, p.sigma2, p.gamma_min);
    ri_opts.push(lo_i);
    for ri in ri_opts {
        let (lo_j, hi_j) = (floor_j(ri), cap - ri);
        if !(lo_j <= hi_j) {
            continue;
        }
        let rj = free_j.clamp(lo_j, hi_j);
        cands.push((ri, rj));
    }
    // QoS edge of the weak terminal: ρ_j = floor_j(ρ_i)
    let hi_qos = ((cap - floor_j(0.0)) / (1.0 + g)).min(cap);
    for ri in edge_maximisers(lo_i, hi_qos, |ri| {
        let [di, dj] = surrogate_gradient(p, sca, phi, ri, floor_j(ri));
        di + g * dj
    }) {
        cands.push((ri, floor_j(ri)));
    }
    // budget edge: ρ_j = cap − ρ_i
    for ri in edge_maximisers(lo_i, cap - RHO_EPS, |ri| {
        let [di, dj] = surrogate_gradient(p, sca, phi, ri, cap - ri);
        di - dj
    }) {
        cands.push((ri, cap - ri));
    }
    // vertices
    cands.push((lo_i, floor_j(lo_i)));
    cands.push((lo_i, cap - lo_i));
    cands.push((hi_qos, floor_j(hi_qos)));

    cands
        .into_iter()
        .filter(|&(a, b)| a > 0.0 && b > 0.0 && region.contains(a, b, 1e-9))
        .max_by(|a, b| {
            surrogate_objective(p, sca, phi, a.0, a.1)
                .total_cmp(&surrogate_objective(p, sca, phi, b.0, b.1))
        })
}

/// Multipliers consistent with stationarity at (ρ_i, ρ_j) for the
/// constraints that are active there.
fn multipliers_at(p: &PowerProblem, sca: &ScaCoefficients, phi: f64, ri: f64, rj: f64, step: f64) -> DualVariables {
    let scales = p.constraint_scales();
    let slack = p.slacks(ri, rj);
    let active: [bool; 4] = std::array::from_fn(|c| (slack[c] / scales[c]).abs() < 1e-9);
    let [di, dj] = surrogate_gradient(p, sca, phi, ri, rj);
    // budget constraint carried by whichever of P_l·Δ ≤ P_T and Δ ≤ 1 binds
    let budget = if active[2] { Some(2) } else if active[3] { Some(3) } else { None };
    let mut lambda = [0.0; 4];
    // columns: ∂slack/∂ρ_i, ∂slack/∂ρ_j (raw units)
    let col = |c: usize| -> [f64; 2] {
        let pl = p.p_l_w;
        match c {
            0 => [pl * p.gains.o_i, 0.0],
            1 => [-p.gamma_min * pl * p.gains.o_j, pl * p.gains.o_j],
            2 => [-pl, -pl],
            _ => [-1.0, -1.0],
        }
    };
    let mut set: Vec<usize> = [0, 1].into_iter().filter(|&c| active[c]).collect();
    set.extend(budget);
    // ∇f + Σ λ_c ∇slack_c = 0
    match set.as_slice() {
        [] => {}
        [c] => {
            let v = col(*c);
            let k = if v[1] != 0.0 { 1 } else { 0 };
            let grad = [di, dj];
            lambda[*c] = -grad[k] / v[k];
        }
        [a, b, ..] => {
            let (u, v) = (col(*a), col(*b));
            let det = u[0] * v[1] - v[0] * u[1];
            if det.abs() > 0.0 {
                lambda[*a] = (-di * v[1] + dj * v[0]) / det;
                lambda[*b] = (-dj * u[0] + di * u[1]) / det;
            }
        }
    }
    DualVariables { lambda: lambda.map(|l: f64| if l.is_finite() { l.max(0.0) } else { 0.0 }), step }
}

/// Maximises the SCA surrogate at fixed φ. The active-set KKT point seeds
/// the multipliers; the projected subgradient loop then runs from there and
/// stops once the Lagrangian maximiser is feasible and complementary.
/// Returns the best feasible split seen, never worse than `start`.
fn solve_surrogate(
    p: &PowerProblem,
    sca: &ScaCoefficients,
    phi: f64,
    start: (f64, f64),
    opts: &PowerAllocOptions,
) -> (f64, f64) {
    let scales = p.constraint_scales();
    // The multipliers live on the scale of the marginal price φ·P_l.
    let step = opts.dual_step * (1.0 + phi * p.p_l_w);
    let mut best = start;
    let mut best_val = surrogate_objective(p, sca, phi, start.0, start.1);
    let mut duals = DualVariables::zero(step);
    if let Some((a, b)) = surrogate_kkt_point(p, sca, phi) {
        let v = surrogate_objective(p, sca, phi, a, b);
        if v > best_val {
            best_val = v;
            best = (a, b);
        }
        duals = multipliers_at(p, sca, phi, a, b, step);
    }

    for k in 1..=opts.max_dual_steps {
        let rj = stationary_rho_j(p, &duals, sca, phi);
        let mut cands = kkt_root(&duals, sca, &p.gains, phi, p.p_l_w, p.sigma2, p.gamma_min);
        cands.extend([RHO_EPS, 1.0 - RHO_EPS]);
        let ctx = RootContext { problem: p, duals: &duals, sca, phi, rho_j: RhoJRule::Given(rj) };
        let Ok(ps) = select_root(&cands, &ctx) else {
            break;
        };
        let ri = ps.rho_i;

        for (a, b) in p.repair(ri, rj) {
            let v = surrogate_objective(p, sca, phi, a, b);
            if v > best_val {
                best_val = v;
                best = (a, b);
            }
        }

        let raw = p.slacks(ri, rj);
        let normalised: [f64; 4] = std::array::from_fn(|c| raw[c] / scales[c]);
        let worst = normalised.iter().fold(0.0f64, |m, s| m.max(-s));
        let comp = duals
            .lambda
            .iter()
            .zip(&normalised)
            .zip(&scales)
            .map(|((l, s), sc)| (l * sc * s).abs())
            .fold(0.0f64, f64::max);
        if worst < 1e-8 && comp < 1e-8 * (1.0 + phi * p.p_l_w) {
            break;
        }
        // precondition: λ_raw moves by step·slack_raw/scale²
        let steps: [f64; 4] = std::array::from_fn(|c| normalised[c] / scales[c]);
        duals = dual_update(&duals, &steps, k);
    }
    best
}

/// SCA loop at fixed φ, started from `start`. Each accepted step raises the
/// true parametric objective.
fn sca_solve(
    p: &PowerProblem,
    phi: f64,
    start: (f64, f64),
    opts: &PowerAllocOptions,
) -> (f64, f64) {
    let mut cur = start;
    let mut cur_val = parametric_objective(p, phi, cur.0, cur.1);
    let mut last_surrogate = f64::NEG_INFINITY;
    for _ in 0..opts.max_sca {
        let (gi, gj) = p.sinrs(cur.0, cur.1);
        let Ok(sca) = sca_coefficients(gi.max(1e-300), gj.max(1e-300)) else {
            break;
        };
        let next = solve_surrogate(p, &sca, phi, cur, opts);
        let surrogate = surrogate_objective(p, &sca, phi, next.0, next.1);
        let val = parametric_objective(p, phi, next.0, next.1);
        if val < cur_val {
            break;
        }
        cur = next;
        cur_val = val;
        if (surrogate - last_surrogate).abs() < opts.sca_tol {
            break;
        }
        last_surrogate = surrogate;
    }
    cur
}

/// Dinkelbach iterations on the EE ratio.
///
/// Returns `Error::Infeasible` when no split meets the QoS constraints. When
/// the iteration budget runs out the best iterate is returned with
/// `converged = false`.
pub fn dinkelbach_power_allocation(
    problem: &PowerProblem,
    opts: &PowerAllocOptions,
) -> Result<(PowerSplit, DinkelbachState)> {
    let region = problem.region();
    if !region.is_feasible() {
        return Err(Error::Infeasible(format!(
            "QoS threshold {} unreachable within the power budget",
            problem.gamma_min
        )));
    }
    let (ri0, rj0) = opts.init;
    let mut rho = problem
        .repair(ri0, rj0)
        .into_iter()
        .max_by(|a, b| problem.ee(a.0, a.1).total_cmp(&problem.ee(b.0, b.1)))
        .ok_or_else(|| Error::Infeasible("initial split cannot be repaired".into()))?;
    let mut phi = opts.phi_init.unwrap_or_else(|| problem.ee(rho.0, rho.1));
    let mut state = DinkelbachState {
        phi,
        eta: f64::INFINITY,
        iteration: 0,
        trace: Vec::new(),
        converged: false,
    };

    for t in 1..=opts.max_dinkelbach {
        let next = sca_solve(problem, phi, rho, opts);
        let eta = parametric_objective(problem, phi, next.0, next.1);
        let phi_next = problem.ee(next.0, next.1);
        if phi_next >= problem.ee(rho.0, rho.1) {
            rho = next;
        }
        phi = phi_next.max(phi.min(problem.ee(rho.0, rho.1)));
        state.iteration = t;
        state.eta = eta;
        state.phi = phi;
        state.trace.push(DinkelbachRecord { phi, eta, rho_i: rho.0, rho_j: rho.1 });
        if eta.abs() < opts.tol_eta {
            state.converged = true;
            break;
        }
    }
    state.phi = problem.ee(rho.0, rho.1);
    Ok((problem.split(rho.0, rho.1), state))
}

/// Exhaustive grid maximisation of the true EE over feasible (ρ_i, ρ_j) on
/// the lattice {0, 1/n, …, 1}². Test oracle.
pub fn power_oracle_grid(problem: &PowerProblem, resolution: usize) -> Result<PowerSplit> {
    if resolution < 100 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be >= 100, got {resolution}"
        )));
    }
    let region = problem.region();
    let n = resolution as f64;
    let mut best: Option<(f64, f64, f64)> = None;
    for a in 0..=resolution {
        let ri = a as f64 / n;
        for b in 0..=(resolution - a) {
            let rj = b as f64 / n;
            if !region.contains(ri, rj, 1e-9) {
                continue;
            }
            let v = problem.ee(ri, rj);
            if best.map_or(true, |(bv, _, _)| v > bv) {
                best = Some((v, ri, rj));
            }
        }
    }
    best.map(|(_, ri, rj)| problem.split(ri, rj))
        .ok_or_else(|| Error::Infeasible("no feasible grid point".into()))
}
