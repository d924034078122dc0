//! Passive beamforming at the RIS for a fixed power split: semidefinite
//! relaxation of the phase vector, a convex-concave procedure on the
//! weak-terminal interference term, and Gaussian randomization back to
//! unit-modulus phases.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_gaussian, ChannelRealization, Gt};
use crate::error::{invalid, Error, Result};
use crate::noma::PowerSplit;
use crate::sdp::{
    feature_values, CMatrix, CVector, LinearConstraint, LogRate, SdpOptions, SdpProblem, SdpStatus,
};

/// Unit-modulus RIS coefficients α_m (the diagonal of Θ).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShiftVector {
    alphas: Vec<Complex64>,
}

impl PhaseShiftVector {
    pub fn new(alphas: Vec<Complex64>) -> Result<Self> {
        if let Some(a) = alphas.iter().find(|a| (a.norm() - 1.0).abs() > 1e-9) {
            return Err(invalid(format!("RIS coefficient {a} is not unit-modulus")));
        }
        Ok(Self { alphas })
    }

    pub fn ones(elements: usize) -> Self {
        Self { alphas: vec![Complex64::new(1.0, 0.0); elements] }
    }

    pub fn random<R: Rng + ?Sized>(elements: usize, rng: &mut R) -> Self {
        Self {
            alphas: (0..elements)
                .map(|_| Complex64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>()))
                .collect(),
        }
    }

    /// Projects arbitrary coefficients onto the unit circle.
    pub fn from_projection(values: &[Complex64]) -> Self {
        Self { alphas: values.iter().map(|z| Complex64::from_polar(1.0, z.arg())).collect() }
    }

    pub fn alphas(&self) -> &[Complex64] {
        &self.alphas
    }

    /// ξ with ξ_m = conj(α_m).
    pub fn xi(&self) -> Vec<Complex64> {
        self.alphas.iter().map(|a| a.conj()).collect()
    }

    pub fn from_xi(xi: &[Complex64]) -> Self {
        Self { alphas: xi.iter().map(|x| Complex64::from_polar(1.0, -x.arg())).collect() }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// Rank-one cascade matrices G_i = P·ρ_i·h_i h_iᴴ, G_j = P·ρ_j·h_j h_jᴴ and
/// Ḡ_j = P·ρ_i·h_j h_jᴴ, where h are the cascaded RIS channels of the strong
/// (i) and weak (j) terminal.
#[derive(Debug, Clone)]
pub struct CascadeMatrices {
    pub g_i: CMatrix,
    pub g_j: CMatrix,
    pub g_bar_j: CMatrix,
    pub h_i: CVector,
    pub h_j: CVector,
    pub p_l_w: f64,
    pub rho_i: f64,
    pub rho_j: f64,
}

pub fn build_cascade_matrices(
    h_hat_i: &[Complex64],
    h_hat_j: &[Complex64],
    ps: &PowerSplit,
) -> Result<CascadeMatrices> {
    if h_hat_i.len() != h_hat_j.len() {
        return Err(invalid(format!(
            "cascade length mismatch: {} vs {}",
            h_hat_i.len(),
            h_hat_j.len()
        )));
    }
    if !(ps.rho_i >= 0.0 && ps.rho_j >= 0.0 && ps.p_l_w > 0.0) {
        return Err(invalid("power split must have ρ ≥ 0 and P_l > 0"));
    }
    let h_i = CVector::from_column_slice(h_hat_i);
    let h_j = CVector::from_column_slice(h_hat_j);
    let outer = |h: &CVector, s: f64| (h * h.adjoint()).map(|z| z * s);
    Ok(CascadeMatrices {
        g_i: outer(&h_i, ps.p_l_w * ps.rho_i),
        g_j: outer(&h_j, ps.p_l_w * ps.rho_j),
        g_bar_j: outer(&h_j, ps.p_l_w * ps.rho_i),
        h_i,
        h_j,
        p_l_w: ps.p_l_w,
        rho_i: ps.rho_i,
        rho_j: ps.rho_j,
    })
}

impl CascadeMatrices {
    pub fn elements(&self) -> usize {
        self.h_i.len()
    }

    /// (Tr(ΞG_i), Tr(ΞG_j), Tr(ΞḠ_j)) from the vectors, O(M²).
    fn traces(&self, xi: &CMatrix) -> (f64, f64, f64) {
        let w = feature_values(&[self.h_i.clone(), self.h_j.clone()], xi);
        let p = self.p_l_w;
        (p * self.rho_i * w[0], p * self.rho_j * w[1], p * self.rho_i * w[1])
    }

    /// The same traces for Ξ = ξξᴴ, O(M).
    fn traces_rank_one(&self, xi: &[Complex64]) -> (f64, f64, f64) {
        let proj = |h: &CVector| -> f64 {
            xi.iter().zip(h.iter()).map(|(x, h)| x.conj() * h).sum::<Complex64>().norm_sqr()
        };
        let (a, b) = (proj(&self.h_i), proj(&self.h_j));
        let p = self.p_l_w;
        (p * self.rho_i * a, p * self.rho_j * b, p * self.rho_i * b)
    }
}

/// Re Tr(A·B).
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            s += (a[(r, c)] * b[(c, r)]).re;
        }
    }
    s
}

fn decomposed_rate(ti: f64, tj: f64, tbar: f64, sigma2: f64) -> Result<f64> {
    let args = [sigma2 + ti, tbar + sigma2 + tj, sigma2, tbar + sigma2];
    if args.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::Domain(format!("nonpositive log argument in {args:?}")));
    }
    Ok(args[0].log2() - args[2].log2() + args[1].log2() - args[3].log2())
}

/// RIS-only sum rate as the four-log difference
/// log2(σ²+Tr ΞG_i) − log2 σ² + log2(Tr ΞḠ_j+σ²+Tr ΞG_j) − log2(Tr ΞḠ_j+σ²).
pub fn dc_objective(xi: &CMatrix, cm: &CascadeMatrices, sigma2: f64) -> Result<f64> {
    let (ti, tj, tbar) = (
        trace_product(xi, &cm.g_i),
        trace_product(xi, &cm.g_j),
        trace_product(xi, &cm.g_bar_j),
    );
    decomposed_rate(ti, tj, tbar, sigma2)
}

/// RIS-only sum rate for a unit-modulus ξ (ξ_m = conj α_m).
pub fn ris_only_rate(xi: &[Complex64], cm: &CascadeMatrices, sigma2: f64) -> Result<f64> {
    let (ti, tj, tbar) = cm.traces_rank_one(xi);
    decomposed_rate(ti, tj, tbar, sigma2)
}

/// First-order expansion of log2(Tr ΞḠ_j + σ²) at Ξ_k. Because the term is
/// concave the expansion over-estimates it, so subtracting it gives a
/// concave lower bound of the sum rate that is tight at Ξ_k.
#[derive(Debug, Clone)]
pub struct CcpMajorant {
    /// Tr(Ξ_k Ḡ_j)
    pub anchor_trace: f64,
    pub sigma2: f64,
    /// Ḡ_j / (ln2·(Tr(Ξ_k Ḡ_j) + σ²))
    pub gradient: CMatrix,
}

impl CcpMajorant {
    fn from_trace(anchor_trace: f64, cm: &CascadeMatrices, sigma2: f64) -> Self {
        let d = LN_2 * (anchor_trace + sigma2);
        Self { anchor_trace, sigma2, gradient: cm.g_bar_j.map(|z| z / d) }
    }

    fn at_trace(&self, tbar: f64) -> f64 {
        let base = self.anchor_trace + self.sigma2;
        base.log2() + (tbar - self.anchor_trace) / (LN_2 * base)
    }

    /// Value of the expansion at Ξ.
    pub fn value(&self, xi: &CMatrix, cm: &CascadeMatrices) -> f64 {
        self.at_trace(trace_product(xi, &cm.g_bar_j))
    }
}

pub fn ccp_linearize(xi_k: &CMatrix, cm: &CascadeMatrices, sigma2: f64) -> CcpMajorant {
    CcpMajorant::from_trace(trace_product(xi_k, &cm.g_bar_j), cm, sigma2)
}

/// Sum rate with the subtracted term replaced by the majorant.
pub fn surrogate_objective(xi: &CMatrix, maj: &CcpMajorant, cm: &CascadeMatrices) -> Result<f64> {
    let (ti, tj, tbar) = cm.traces(xi);
    let s2 = maj.sigma2;
    let args = [s2 + ti, tbar + s2 + tj];
    if args.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::Domain(format!("nonpositive log argument in {args:?}")));
    }
    Ok(args[0].log2() + args[1].log2() - s2.log2() - maj.at_trace(tbar))
}

/// How the rank-one requirement is handled in the subproblem.
#[derive(Debug, Clone)]
pub enum Relaxation {
    /// Drop the rank constraint.
    Sdr,
    /// Lift to [[Ξ, ξ̂], [ξ̂ᴴ, 1]] ⪰ 0 and subtract μ·(Tr Ξ − ξ̂ᴴξ̂), with the
    /// convex ξ̂ᴴξ̂ term linearised at `anchor`.
    Schur { mu: f64, anchor: Vec<Complex64> },
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub xi_matrix: CMatrix,
    /// Surrogate sum rate (bits/s/Hz) at `xi_matrix`.
    pub objective: f64,
    pub solver_status: SdpStatus,
    /// ξ̂ of the Schur lifting, when used.
    pub xi_hat: Option<Vec<Complex64>>,
}

/// Maximises the surrogate sum rate over the relaxed phase set subject to
/// the RIS-only QoS constraints Tr(ΞG_i) ≥ γ̄σ² and Tr(ΞG_j) ≥ γ̄(Tr ΞḠ_j + σ²).
pub fn solve_sdp_subproblem(
    maj: &CcpMajorant,
    cm: &CascadeMatrices,
    gamma_min_bar: f64,
    sigma2: f64,
    relaxation: &Relaxation,
    opts: &SdpOptions,
) -> Result<SdpSolution> {
    let m = cm.elements();
    if m == 0 {
        return Err(invalid("beamforming needs at least one RIS element"));
    }
    if !(sigma2 > 0.0) || !(gamma_min_bar >= 0.0) {
        return Err(invalid("σ² must be > 0 and γ̄ ≥ 0"));
    }
    let infeasible = |x: CMatrix| SdpSolution {
        objective: f64::NAN,
        xi_matrix: x,
        solver_status: SdpStatus::Infeasible,
        xi_hat: None,
    };
    let (ri, rj) = (cm.rho_i, cm.rho_j);
    let weak_margin = rj - gamma_min_bar * ri;
    if gamma_min_bar > 0.0 && !(weak_margin > 0.0 && ri > 0.0) {
        return Ok(infeasible(CMatrix::identity(m, m)));
    }

    // u = a_iᴴΞa_i, v = a_jᴴΞa_j with a = h·sqrt(P/σ²)
    let scale = Complex64::new((cm.p_l_w / sigma2).sqrt(), 0.0);
    let (a_i, a_j) = (&cm.h_i * scale, &cm.h_j * scale);
    let s2 = maj.sigma2;
    let base = maj.anchor_trace + s2;
    let mut objective = LogRate {
        constant: s2.log2() - base.log2() + maj.anchor_trace / (LN_2 * base),
        logs: vec![(0, ri, 1.0), (1, ri + rj, 1.0)],
        linear: vec![(1, -sigma2 * ri / (LN_2 * base))],
    };
    let mut constraints = Vec::new();
    if gamma_min_bar > 0.0 {
        constraints.push(LinearConstraint { coef: vec![(0, ri / gamma_min_bar)], offset: -1.0 });
        constraints.push(LinearConstraint { coef: vec![(1, weak_margin / gamma_min_bar)], offset: -1.0 });
    }

    let (dim, features) = match relaxation {
        Relaxation::Sdr => (m, vec![a_i, a_j]),
        Relaxation::Schur { mu, anchor } => {
            if anchor.len() != m {
                return Err(invalid("Schur anchor length must equal M"));
            }
            let lift = |v: &CVector, last: Complex64| {
                CVector::from_iterator(m + 1, v.iter().copied().chain(std::iter::once(last)))
            };
            let anc = CVector::from_column_slice(anchor);
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            // Re(ξ̂_kᴴ ξ̂) = ¼(w₊ − w₋) with w± = (x̃ ± e)ᴴ Z (x̃ ± e)
            objective.linear.push((2, 0.5 * mu));
            objective.linear.push((3, -0.5 * mu));
            objective.constant -= mu * (anc.norm_squared() + m as f64);
            (m + 1, vec![lift(&a_i, zero), lift(&a_j, zero), lift(&anc, one), lift(&anc, -one)])
        }
    };
    let problem = SdpProblem { dim, features, objective, constraints };
    let res = problem.solve(opts);
    let xi_matrix = res.x.view((0, 0), (m, m)).into_owned();
    if res.status == SdpStatus::Infeasible {
        return Ok(infeasible(xi_matrix));
    }
    let xi_hat = match relaxation {
        Relaxation::Sdr => None,
        Relaxation::Schur { .. } => Some((0..m).map(|r| res.x[(r, m)]).collect()),
    };
    Ok(SdpSolution {
        objective: surrogate_objective(&xi_matrix, maj, cm)?,
        xi_matrix,
        solver_status: res.status,
        xi_hat,
    })
}

/// A unit-modulus candidate with its score.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub phases: PhaseShiftVector,
    pub rate: f64,
    pub feasible: bool,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    (a.feasible && !b.feasible) || (a.feasible == b.feasible && a.rate > b.rate)
}

/// Draws z ~ CN(0, Ξ), projects each draw to unit modulus and scores it
/// with `eval`, which returns the (possibly adjusted) ξ, its rate and its
/// feasibility. The projected dominant eigenvector and `extra` are always
/// among the candidates. Returns the best feasible candidate, else the
/// best-rate one flagged infeasible.
pub fn randomize_with<R, F>(
    xi: &CMatrix,
    n_samples: usize,
    extra: &[Vec<Complex64>],
    rng: &mut R,
    mut eval: F,
) -> Result<Candidate>
where
    R: Rng + ?Sized,
    F: FnMut(Vec<Complex64>) -> (Vec<Complex64>, f64, bool),
{
    let m = xi.nrows();
    if m == 0 || n_samples == 0 {
        return Err(invalid("randomization needs M ≥ 1 and at least one sample"));
    }
    let herm = (xi + xi.adjoint()).map(|z| z * 0.5);
    let eig = herm.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let roots: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > 1e-12 * lmax { l.sqrt() } else { 0.0 })
        .collect();
    let top = (0..m).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap_or(0);

    let project = |z: &CVector, rng: &mut R| -> Vec<Complex64> {
        z.iter()
            .map(|v| {
                if v.norm() > 1e-300 {
                    v / v.norm()
                } else {
                    Complex64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>())
                }
            })
            .collect()
    };

    let mut best: Option<Candidate> = None;
    let mut consider = |xi_c: Vec<Complex64>, best: &mut Option<Candidate>| {
        let (adj, rate, feasible) = eval(xi_c);
        let cand = Candidate { phases: PhaseShiftVector::from_xi(&adj), rate, feasible };
        if best.as_ref().map_or(true, |b| better(&cand, b)) {
            *best = Some(cand);
        }
    };
    let dominant = project(&eig.eigenvectors.column(top).into_owned(), rng);
    consider(dominant, &mut best);
    for e in extra {
        if e.len() == m {
            consider(PhaseShiftVector::from_projection(e).alphas.clone(), &mut best);
        }
    }
    let scaled = CMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, c)] * roots[c]);
    for _ in 0..n_samples {
        let r = CVector::from_fn(m, |_, _| complex_gaussian(rng));
        let z = &scaled * r;
        let cand = project(&z, rng);
        consider(cand, &mut best);
    }
    Ok(best.expect("at least one candidate"))
}

/// Randomization scored by the RIS-only sum rate and the RIS-only QoS
/// constraints with threshold γ̄.
pub fn gaussian_randomization<R: Rng + ?Sized>(
    sol: &SdpSolution,
    cm: &CascadeMatrices,
    gamma_min_bar: f64,
    sigma2: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<Candidate> {
    let extra: Vec<Vec<Complex64>> = sol.xi_hat.iter().cloned().collect();
    randomize_with(&sol.xi_matrix, n_samples, &extra, rng, |xi| {
        let (ti, tj, tbar) = cm.traces_rank_one(&xi);
        let rate = decomposed_rate(ti, tj, tbar, sigma2).unwrap_or(f64::NEG_INFINITY);
        let slack = 1.0 - 1e-9;
        let feasible = ti >= gamma_min_bar * sigma2 * slack && tj >= gamma_min_bar * (tbar + sigma2) * slack;
        (xi, rate, feasible)
    })
}

#[derive(Debug, Clone)]
pub struct BeamformingConfig {
    pub max_ccp_iters: usize,
    pub ccp_tol: f64,
    pub samples: usize,
    pub schur: bool,
    pub schur_penalty: f64,
    /// Threshold for the RIS-only QoS constraints; None uses γ_min.
    pub gamma_min_bar: Option<f64>,
    pub sdp: SdpOptions,
}

impl Default for BeamformingConfig {
    fn default() -> Self {
        Self {
            max_ccp_iters: 10,
            ccp_tol: 1e-4,
            samples: 200,
            schur: false,
            schur_penalty: 10.0,
            gamma_min_bar: None,
            sdp: SdpOptions::default(),
        }
    }
}

/// Result of the CCP loop on the relaxed problem.
#[derive(Debug, Clone)]
pub struct CcpRun {
    pub solution: SdpSolution,
    /// True RIS-only sum rate after each iteration, starting with the
    /// initial point.
    pub objectives: Vec<f64>,
    /// The QoS constraints were dropped because the first subproblem was
    /// infeasible.
    pub relaxed_qos: bool,
}

/// CCP on the relaxed problem from Ξ₀ = ξ₀ξ₀ᴴ.
pub fn ccp_relaxation(
    cm: &CascadeMatrices,
    sigma2: f64,
    gamma_min_bar: f64,
    start: &PhaseShiftVector,
    cfg: &BeamformingConfig,
) -> Result<CcpRun> {
    let xi0 = CVector::from_vec(start.xi());
    let mut xi_k = &xi0 * xi0.adjoint();
    let mut anchor = start.xi();
    let mut objectives = vec![dc_objective(&xi_k, cm, sigma2)?];
    let mut gamma = gamma_min_bar;
    let mut relaxed_qos = false;
    let mut last: Option<SdpSolution> = None;
    for it in 0..cfg.max_ccp_iters.max(1) {
        let maj = ccp_linearize(&xi_k, cm, sigma2);
        let relax = if cfg.schur {
            Relaxation::Schur { mu: cfg.schur_penalty, anchor: anchor.clone() }
        } else {
            Relaxation::Sdr
        };
        let mut sol = solve_sdp_subproblem(&maj, cm, gamma, sigma2, &relax, &cfg.sdp)?;
        if sol.solver_status == SdpStatus::Infeasible {
            if it > 0 || gamma == 0.0 {
                break;
            }
            log::debug!("step-2 QoS constraints infeasible with γ̄ = {gamma}; relaxing");
            gamma = 0.0;
            relaxed_qos = true;
            sol = solve_sdp_subproblem(&maj, cm, gamma, sigma2, &relax, &cfg.sdp)?;
            if sol.solver_status == SdpStatus::Infeasible {
                break;
            }
        }
        let value = dc_objective(&sol.xi_matrix, cm, sigma2)?;
        let prev = *objectives.last().expect("nonempty");
        objectives.push(value);
        xi_k = sol.xi_matrix.clone();
        if let Some(h) = &sol.xi_hat {
            anchor = h.clone();
        }
        last = Some(sol);
        if (value - prev).abs() < cfg.ccp_tol && it > 0 {
            break;
        }
    }
    let solution = last.ok_or_else(|| Error::Infeasible("relaxed beamforming problem is infeasible".into()))?;
    Ok(CcpRun { solution, objectives, relaxed_qos })
}

/// Full-channel evaluation of ξ for the given roles: sum rate, feasibility
/// against γ_min and the per-terminal SINRs.
fn full_channel_score(
    s_i: Complex64,
    s_j: Complex64,
    d_i: Complex64,
    d_j: Complex64,
    ps: &PowerSplit,
    sigma2: f64,
    gamma_min: f64,
) -> (f64, bool) {
    let o_i = (d_i + s_i).norm_sqr();
    let o_j = (d_j + s_j).norm_sqr();
    let p = ps.p_l_w;
    let g_i = p * ps.rho_i * o_i / sigma2;
    let g_j = p * ps.rho_j * o_j / (sigma2 + p * ps.rho_i * o_j);
    let rate = g_i.ln_1p() / LN_2 + g_j.ln_1p() / LN_2;
    let slack = 1.0 - 1e-9;
    (rate, g_i >= gamma_min * slack && g_j >= gamma_min * slack)
}

/// Picks the global phase e^{jθ} of ξ that maximises the full-channel score
/// (the RIS-only objective is blind to it): 32-point scan, then
/// golden-section refinement around the best point.
fn align_global_phase(
    xi: Vec<Complex64>,
    c_i: &[Complex64],
    c_j: &[Complex64],
    d: [Complex64; 2],
    ps: &PowerSplit,
    sigma2: f64,
    gamma_min: f64,
) -> (Vec<Complex64>, f64, bool) {
    let dot = |c: &[Complex64]| xi.iter().zip(c).map(|(x, c)| x.conj() * c).sum::<Complex64>();
    let (s_i, s_j) = (dot(c_i), dot(c_j));
    // ξ → ξe^{jθ} turns ξᴴc into e^{−jθ}ξᴴc
    let score = |theta: f64| {
        let r = Complex64::from_polar(1.0, -theta);
        let (rate, ok) = full_channel_score(r * s_i, r * s_j, d[0], d[1], ps, sigma2, gamma_min);
        (if ok { rate } else { rate - 1e6 }, rate, ok)
    };
    const N: usize = 32;
    let h = 2.0 * PI / N as f64;
    let mut best = (0.0, score(0.0));
    for k in 1..N {
        let th = k as f64 * h;
        let sc = score(th);
        if sc.0 > best.1 .0 {
            best = (th, sc);
        }
    }
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - gr * (b - a);
    let mut x2 = a + gr * (b - a);
    let (mut f1, mut f2) = (score(x1).0, score(x2).0);
    for _ in 0..40 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = score(x2).0;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = score(x1).0;
        }
    }
    let mid = 0.5 * (a + b);
    let refined = score(mid);
    let (theta, (_, rate, ok)) = if refined.0 > best.1 .0 { (mid, refined) } else { best };
    let rot = Complex64::from_polar(1.0, theta);
    (xi.into_iter().map(|x| x * rot).collect(), rate, ok)
}

#[derive(Debug, Clone)]
pub struct BeamformingOutcome {
    pub phases: PhaseShiftVector,
    /// Full-channel sum rate (direct links included), bits/s/Hz.
    pub rate: f64,
    /// Both terminals meet γ_min over the full channel.
    pub feasible: bool,
    /// The incoming phases were kept by the monotone safeguard.
    pub kept_incoming: bool,
    pub relaxed_qos: bool,
    pub ccp_objectives: Vec<f64>,
    pub status: SdpStatus,
}

/// Full-channel sum rate and feasibility of `phases` with terminal `strong`
/// decoding first.
pub fn full_channel_rate(
    ch: &ChannelRealization,
    ps: &PowerSplit,
    strong: Gt,
    gamma_min: f64,
    phases: &PhaseShiftVector,
) -> Result<(f64, bool)> {
    let weak = strong.other();
    let hi = ch.effective_gain(strong, phases)?;
    let hj = ch.effective_gain(weak, phases)?;
    let zero = Complex64::new(0.0, 0.0);
    Ok(full_channel_score(hi, hj, zero, zero, ps, ch.noise_power_w, gamma_min))
}

/// Optimises the RIS phases for a fixed power split. The relaxed problem
/// sees only the cascaded links; the direct links enter when candidates are
/// scored. The incoming phases are returned unless a candidate beats them.
pub fn passive_beamforming<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    ps: &PowerSplit,
    strong: Gt,
    gamma_min: f64,
    incoming: &PhaseShiftVector,
    cfg: &BeamformingConfig,
    rng: &mut R,
) -> Result<BeamformingOutcome> {
    let m = ch.elements();
    if incoming.len() != m {
        return Err(invalid(format!("incoming phases have length {}, expected {m}", incoming.len())));
    }
    let sigma2 = ch.noise_power_w;
    let (in_rate, in_ok) = full_channel_rate(ch, ps, strong, gamma_min, incoming)?;
    let keep = |status| BeamformingOutcome {
        phases: incoming.clone(),
        rate: in_rate,
        feasible: in_ok,
        kept_incoming: true,
        relaxed_qos: false,
        ccp_objectives: Vec::new(),
        status,
    };
    let c_i = ch.cascade(strong);
    let c_j = ch.cascade(strong.other());
    if m == 0 || c_i.iter().chain(&c_j).all(|z| z.norm() == 0.0) || ps.rho_i + ps.rho_j <= 0.0 {
        return Ok(keep(SdpStatus::Optimal));
    }
    let cm = build_cascade_matrices(&c_i, &c_j, ps)?;
    let gamma_bar = cfg.gamma_min_bar.unwrap_or(gamma_min);
    let run = match ccp_relaxation(&cm, sigma2, gamma_bar, incoming, cfg) {
        Ok(r) => r,
        Err(Error::Infeasible(msg)) => {
            log::debug!("{msg}; keeping incoming phases");
            return Ok(keep(SdpStatus::Infeasible));
        }
        Err(e) => return Err(e),
    };
    for w in run.objectives.windows(2).skip(1) {
        if w[1] < w[0] - 1e-6 {
            log::debug!("CCP objective decreased: {} → {}", w[0], w[1]);
        }
    }
    let d = [ch.h_direct[strong.index()], ch.h_direct[strong.other().index()]];
    let mut extra: Vec<Vec<Complex64>> = vec![incoming.xi()];
    extra.extend(run.solution.xi_hat.iter().cloned());
    let best = randomize_with(&run.solution.xi_matrix, cfg.samples, &extra, rng, |xi| {
        align_global_phase(xi, &c_i, &c_j, d, ps, sigma2, gamma_min)
    })?;
    let incoming_cand = Candidate { phases: incoming.clone(), rate: in_rate, feasible: in_ok };
    let kept = !better(&best, &incoming_cand);
    let chosen = if kept { incoming_cand } else { best };
    Ok(BeamformingOutcome {
        phases: chosen.phases,
        rate: chosen.rate,
        feasible: chosen.feasible,
        kept_incoming: kept,
        relaxed_qos: run.relaxed_qos,
        ccp_objectives: run.objectives,
        status: run.solution.solver_status,
    })
}

/// Exhaustive search over `grid_points` uniform phases per element with
/// the first element fixed, maximising the RIS-only sum rate subject to the
/// RIS-only QoS constraints (best infeasible point if none qualifies).
/// Returns the phases and their rate.
pub fn beamforming_oracle_grid(
    cm: &CascadeMatrices,
    sigma2: f64,
    gamma_min_bar: f64,
    grid_points: usize,
) -> Result<(PhaseShiftVector, f64)> {
    let m = cm.elements();
    if m == 0 || m > 3 {
        return Err(invalid(format!("phase-grid oracle supports 1 ≤ M ≤ 3, got {m}")));
    }
    if grid_points == 0 {
        return Err(invalid("grid needs at least one point"));
    }
    let phases: Vec<Complex64> =
        (0..grid_points).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / grid_points as f64)).collect();
    let total = grid_points.pow(m as u32 - 1);
    let mut best: Option<Candidate> = None;
    let mut xi = vec![Complex64::new(1.0, 0.0); m];
    for idx in 0..total {
        let mut rest = idx;
        for x in xi.iter_mut().skip(1) {
            *x = phases[rest % grid_points];
            rest /= grid_points;
        }
        let (ti, tj, tbar) = cm.traces_rank_one(&xi);
        let rate = decomposed_rate(ti, tj, tbar, sigma2)?;
        let feasible = ti >= gamma_min_bar * sigma2 && tj >= gamma_min_bar * (tbar + sigma2);
        let cand = Candidate { phases: PhaseShiftVector::from_xi(&xi), rate, feasible };
        if best.as_ref().map_or(true, |b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    let b = best.expect("nonempty grid");
    Ok((b.phases, b.rate))
}

/// Unit-diagonal Hermitian PSD matrix from a random factor (test helper and
/// diagnostics).
pub fn random_elliptope_point<R: Rng + ?Sized>(m: usize, rank: usize, rng: &mut R) -> CMatrix {
    let b = DMatrix::from_fn(m, rank.max(1), |_, _| complex_gaussian(rng));
    let mut x = &b * b.adjoint();
    let d: DVector<f64> = DVector::from_fn(m, |i, _| x[(i, i)].re.sqrt());
    for r in 0..m {
        for c in 0..m {
            x[(r, c)] /= d[r] * d[c];
        }
    }
    x
}
