//! Log-barrier interior-point solver over the complex elliptope
//! {Ξ Hermitian, diag(Ξ) = 1, Ξ ⪰ 0}.
//!
//! The objective and the inequality constraints see Ξ only through real
//! features w_k = a_kᴴ Ξ a_k. With p_k = Ξ a_k the Newton step of
//! −log det Ξ + φ(w) restricted to diag(Δ) = 0 is
//!
//!   Δ = Ξ − Σ_k q_k p_k p_kᴴ − Ξ Diag(y) Ξ,   q = ∇φ + ∇²φ · δw,
//!
//! where (y, δw) solve a dense real system of size M + K. No inverse of Ξ
//! is ever formed; Cholesky is only used to test positive definiteness.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// F(w) = constant + Σ coef·log2(1 + scale·w_k) + linᵀw, concave for coef ≥ 0.
#[derive(Debug, Clone, Default)]
pub struct LogRate {
    pub constant: f64,
    /// (feature index, scale, coef)
    pub logs: Vec<(usize, f64, f64)>,
    pub linear: Vec<(usize, f64)>,
}

impl LogRate {
    pub fn value(&self, w: &[f64]) -> Option<f64> {
        let mut v = self.constant;
        for &(k, a, c) in &self.logs {
            let arg = 1.0 + a * w[k];
            if !(arg > 0.0) {
                return None;
            }
            v += c * arg.log2();
        }
        for &(k, c) in &self.linear {
            v += c * w[k];
        }
        Some(v)
    }

    fn add_derivatives(&self, w: &[f64], scale: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        for &(k, a, c) in &self.logs {
            let d = 1.0 + a * w[k];
            grad[k] += scale * c * a / (LN_2 * d);
            hess[(k, k)] -= scale * c * a * a / (LN_2 * d * d);
        }
        for &(k, c) in &self.linear {
            grad[k] += scale * c;
        }
    }
}

/// c(w) = coefᵀw + offset ≥ 0.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub coef: Vec<(usize, f64)>,
    pub offset: f64,
}

impl LinearConstraint {
    pub fn value(&self, w: &[f64]) -> f64 {
        self.coef.iter().fold(self.offset, |acc, &(k, c)| acc + c * w[k])
    }
}

/// A smooth convex function of the features and `aux` extra scalars.
struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

trait Barrier {
    fn aux(&self) -> usize;
    fn eval(&self, w: &[f64], s: &[f64]) -> Option<Eval>;
}

/// −t·F(w) − Σ ln c_l(w)
struct PhaseTwo<'a> {
    t: f64,
    objective: &'a LogRate,
    constraints: &'a [LinearConstraint],
}

impl Barrier for PhaseTwo<'_> {
    fn aux(&self) -> usize {
        0
    }

    fn eval(&self, w: &[f64], _s: &[f64]) -> Option<Eval> {
        let k = w.len();
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        let mut value = -self.t * self.objective.value(w)?;
        self.objective.add_derivatives(w, -self.t, &mut grad, &mut hess);
        for c in self.constraints {
            let cv = c.value(w);
            if !(cv > 0.0) {
                return None;
            }
            value -= cv.ln();
            for &(a, ca) in &c.coef {
                grad[a] -= ca / cv;
                for &(b, cb) in &c.coef {
                    hess[(a, b)] += ca * cb / (cv * cv);
                }
            }
        }
        Some(Eval { value, grad, hess })
    }
}

/// −t·s − Σ ln(c_l(w) − s)
struct PhaseOne<'a> {
    t: f64,
    constraints: &'a [LinearConstraint],
}

impl Barrier for PhaseOne<'_> {
    fn aux(&self) -> usize {
        1
    }

    fn eval(&self, w: &[f64], s: &[f64]) -> Option<Eval> {
        let k = w.len();
        let n = k + 1;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut value = -self.t * s[0];
        grad[k] = -self.t;
        for c in self.constraints {
            let cv = c.value(w) - s[0];
            if !(cv > 0.0) {
                return None;
            }
            value -= cv.ln();
            let mut row: Vec<(usize, f64)> = c.coef.clone();
            row.push((k, -1.0));
            for &(a, ca) in &row {
                grad[a] -= ca / cv;
                for &(b, cb) in &row {
                    hess[(a, b)] += ca * cb / (cv * cv);
                }
            }
        }
        Some(Eval { value, grad, hess })
    }
}

/// log det of a Hermitian matrix, or None when it is not positive definite.
pub fn log_det_pd(x: &CMatrix) -> Option<f64> {
    let n = x.nrows();
    // row-major lower factor, row i holds L[i, 0..=i]
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    let mut logdet = 0.0;
    for j in 0..n {
        let (head, tail) = l.split_at_mut(j * n + n);
        let lj = &head[j * n..j * n + j];
        let d = x[(j, j)].re - lj.iter().map(|v| v.norm_sqr()).sum::<f64>();
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        logdet += 2.0 * djj.ln();
        for i in (j + 1)..n {
            let li = &mut tail[(i - j - 1) * n..(i - j - 1) * n + j + 1];
            let mut s = x[(i, j)];
            for (a, b) in li[..j].iter().zip(lj) {
                s -= a * b.conj();
            }
            li[j] = s / djj;
        }
        head[j * n + j] = Complex64::new(djj, 0.0);
    }
    Some(logdet)
}

/// Evaluates every feature a_kᴴ Ξ a_k (real part).
pub fn feature_values(features: &[CVector], x: &CMatrix) -> Vec<f64> {
    features.iter().map(|a| a.dotc(&(x * a)).re).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    NearOptimal,
    Infeasible,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    /// Target bound on the duality gap of the objective.
    pub tol: f64,
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
    pub t0: f64,
    pub max_newton: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-7, mu: 20.0, t0: 1.0, max_newton: 100 }
    }
}

/// maximize F(w(Ξ)) s.t. c_l(w(Ξ)) ≥ 0, diag(Ξ) = 1, Ξ ⪰ 0.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub dim: usize,
    pub features: Vec<CVector>,
    pub objective: LogRate,
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Clone)]
pub struct SdpResult {
    pub x: CMatrix,
    pub status: SdpStatus,
    /// F at the returned point.
    pub objective: f64,
    /// Upper bound on F* − objective from the barrier parameter.
    pub gap: f64,
    pub newton_steps: usize,
}

struct Centering {
    steps: usize,
    stalled: bool,
    stopped: bool,
}

impl SdpProblem {
    pub fn solve(&self, opts: &SdpOptions) -> SdpResult {
        self.solve_from(CMatrix::identity(self.dim, self.dim), opts)
    }

    /// Solves from a strictly feasible (positive definite, unit diagonal)
    /// starting point; the identity is used when `start` is not one.
    pub fn solve_from(&self, start: CMatrix, opts: &SdpOptions) -> SdpResult {
        let m = self.dim;
        let mut x = if log_det_pd(&start).is_some() { start } else { CMatrix::identity(m, m) };
        let mut steps = 0;
        let barrier_nu = (m + self.constraints.len()) as f64;

        // phase I
        let w0 = feature_values(&self.features, &x);
        let worst = self.constraints.iter().map(|c| c.value(&w0)).fold(f64::INFINITY, f64::min);
        if worst <= 0.0 {
            let mut s = vec![worst - 1.0];
            let mut t = opts.t0;
            let mut feasible = s[0] > 0.0;
            while !feasible {
                let bar = PhaseOne { t, constraints: &self.constraints };
                let rep = self.center(&mut x, &mut s, &bar, opts.max_newton, &mut |s| s[0] > 0.0);
                steps += rep.steps;
                if rep.stopped || s[0] > 0.0 {
                    feasible = true;
                    break;
                }
                let gap = barrier_nu / t;
                if s[0] + gap < 0.0 || gap < 1e-10 || (rep.stalled && gap < 1e-6) {
                    break;
                }
                t *= opts.mu;
            }
            if !feasible {
                let w = feature_values(&self.features, &x);
                return SdpResult {
                    objective: self.objective.value(&w).unwrap_or(f64::NAN),
                    x,
                    status: SdpStatus::Infeasible,
                    gap: f64::INFINITY,
                    newton_steps: steps,
                };
            }
        }

        // phase II
        let mut t = opts.t0;
        let mut status = SdpStatus::Optimal;
        loop {
            let bar = PhaseTwo { t, objective: &self.objective, constraints: &self.constraints };
            let rep = self.center(&mut x, &mut [], &bar, opts.max_newton, &mut |_| false);
            steps += rep.steps;
            let gap = barrier_nu / t;
            if gap < opts.tol {
                if rep.stalled {
                    status = SdpStatus::NearOptimal;
                }
                break;
            }
            if rep.stalled && gap < 1e3 * opts.tol {
                status = SdpStatus::NearOptimal;
                break;
            }
            t *= opts.mu;
        }
        let w = feature_values(&self.features, &x);
        SdpResult {
            objective: self.objective.value(&w).unwrap_or(f64::NAN),
            gap: barrier_nu / t,
            x,
            status,
            newton_steps: steps,
        }
    }

    fn merit(&self, x: &CMatrix, s: &[f64], f: &dyn Barrier) -> Option<(f64, Vec<f64>, Eval)> {
        let ld = log_det_pd(x)?;
        let w = feature_values(&self.features, x);
        let e = f.eval(&w, s)?;
        Some((e.value - ld, w, e))
    }

    fn center(
        &self,
        x: &mut CMatrix,
        s: &mut [f64],
        f: &dyn Barrier,
        max_steps: usize,
        stop: &mut dyn FnMut(&[f64]) -> bool,
    ) -> Centering {
        let m = self.dim;
        let kf = self.features.len();
        let na = f.aux();
        let n = m + kf + na;
        let Some((mut val, mut w, mut ev)) = self.merit(x, s, f) else {
            return Centering { steps: 0, stalled: true, stopped: false };
        };
        for step in 1..=max_steps {
            let p: Vec<CVector> = self.features.iter().map(|a| &*x * a).collect();
            let g = &ev.grad;
            let h = &ev.hess;

            let mut lhs = DMatrix::<f64>::zeros(n, n);
            let mut rhs = DVector::<f64>::zeros(n);
            for r in 0..m {
                for c in 0..m {
                    lhs[(r, c)] = x[(r, c)].norm_sqr();
                }
            }
            // P2[r, k] = |p_k[r]|², T[l, k] = |a_lᴴ p_k|²
            let p2 = DMatrix::<f64>::from_fn(m, kf, |r, k| p[k][r].norm_sqr());
            let tt = DMatrix::<f64>::from_fn(kf, kf, |l, k| self.features[l].dotc(&p[k]).norm_sqr());
            let hw = h.rows(0, kf).into_owned();
            let p2h = &p2 * &hw;
            let th = &tt * &hw;
            lhs.view_mut((0, m), (m, kf + na)).copy_from(&p2h);
            lhs.view_mut((m, 0), (kf, m)).copy_from(&p2.transpose());
            lhs.view_mut((m, m), (kf, kf + na)).copy_from(&th);
            for k in 0..kf {
                lhs[(m + k, m + k)] += 1.0;
            }
            if na > 0 {
                lhs.view_mut((m + kf, m), (na, kf + na)).copy_from(&h.rows(kf, na));
            }
            let gw = g.rows(0, kf).into_owned();
            let p2g = &p2 * &gw;
            let tg = &tt * &gw;
            for r in 0..m {
                rhs[r] = 1.0 - p2g[r];
            }
            for k in 0..kf {
                rhs[m + k] = w[k] - tg[k];
            }
            for a in 0..na {
                rhs[m + kf + a] = -g[kf + a];
            }
            let Some(sol) = lhs.lu().solve(&rhs) else {
                return Centering { steps: step, stalled: true, stopped: false };
            };
            let y = sol.rows(0, m);
            let dz = sol.rows(m, kf + na).into_owned();
            let q = &gw + h.rows(0, kf) * &dz;

            let mut delta = x.clone();
            for k in 0..kf {
                let pk = &p[k];
                for c in 0..m {
                    let pc = pk[c].conj() * q[k];
                    for r in 0..m {
                        delta[(r, c)] -= pk[r] * pc;
                    }
                }
            }
            let mut xy = x.clone();
            for c in 0..m {
                let yc = y[c];
                xy.column_mut(c).scale_mut(yc);
            }
            delta -= &xy * &*x;
            for r in 0..m {
                delta[(r, r)] = Complex64::new(0.0, 0.0);
                for c in (r + 1)..m {
                    let avg = (delta[(r, c)] + delta[(c, r)].conj()) * 0.5;
                    delta[(r, c)] = avg;
                    delta[(c, r)] = avg.conj();
                }
            }

            let qw: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
            let ysum: f64 = y.iter().sum();
            let mut dd = -(m as f64 - qw - ysum);
            for i in 0..(kf + na) {
                dd += g[i] * dz[i];
            }
            // decrement below rounding noise: −dd/2 bounds the barrier
            // suboptimality, i.e. an objective error of order 1e-6/t
            if !(dd < 0.0) || -dd * 0.5 < 1e-6 {
                return Centering { steps: step, stalled: false, stopped: false };
            }

            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let xn = &*x + &delta * Complex64::new(alpha, 0.0);
                let sn: Vec<f64> = s.iter().enumerate().map(|(a, v)| v + alpha * dz[kf + a]).collect();
                if let Some((vn, wn, en)) = self.merit(&xn, &sn, f) {
                    if vn <= val + 0.25 * alpha * dd {
                        accepted = Some((xn, sn, vn, wn, en));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((xn, sn, vn, wn, en)) = accepted else {
                return Centering { steps: step, stalled: true, stopped: false };
            };
            let flat = vn >= val;
            *x = xn;
            s.copy_from_slice(&sn);
            val = vn;
            w = wn;
            ev = en;
            if stop(s) {
                return Centering { steps: step, stalled: false, stopped: true };
            }
            if flat {
                return Centering { steps: step, stalled: false, stopped: false };
            }
        }
        Centering { steps: max_steps, stalled: true, stopped: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::channel::complex_gaussian;

    fn random_vec(m: usize, seed: u64) -> CVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CVector::from_fn(m, |_, _| complex_gaussian(&mut rng))
    }

    #[test]
    fn log_det_matches_diagonal_product() {
        let x = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
        ]));
        assert!((log_det_pd(&x).unwrap() - 6f64.ln()).abs() < 1e-14);
        let bad = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ]));
        assert!(log_det_pd(&bad).is_none());
    }

    #[test]
    fn single_feature_reaches_phase_aligned_optimum() {
        // max a^H Ξ a over the elliptope is (Σ|a_m|)², attained by the
        // phase-aligned rank-one point.
        for seed in 0..5 {
            let a = random_vec(5, seed);
            let best = a.iter().map(|z| z.norm()).sum::<f64>().powi(2);
            let prob = SdpProblem {
                dim: 5,
                features: vec![a.clone()],
                objective: LogRate { logs: vec![(0, 1.0, 1.0)], ..Default::default() },
                constraints: vec![],
            };
            let r = prob.solve(&SdpOptions::default());
            assert_eq!(r.status, SdpStatus::Optimal);
            let want = (1.0 + best).log2();
            assert!(r.objective <= want + 1e-9);
            assert!(want - r.objective < 1e-6, "{} vs {}", r.objective, want);
            for i in 0..5 {
                assert!((r.x[(i, i)].re - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constraints_are_honoured_and_infeasibility_detected() {
        let a = random_vec(4, 11);
        let b = random_vec(4, 12);
        let cap = a.iter().map(|z| z.norm()).sum::<f64>().powi(2);
        // maximise b-feature while keeping the a-feature at 80% of its max
        let prob = |frac: f64| SdpProblem {
            dim: 4,
            features: vec![a.clone(), b.clone()],
            objective: LogRate { logs: vec![(1, 1.0, 1.0)], ..Default::default() },
            constraints: vec![LinearConstraint { coef: vec![(0, 1.0 / (frac * cap))], offset: -1.0 }],
        };
        let r = prob(0.8).solve(&SdpOptions::default());
        assert_eq!(r.status, SdpStatus::Optimal);
        let w = feature_values(&[a.clone(), b.clone()], &r.x);
        assert!(w[0] >= 0.8 * cap * (1.0 - 1e-7));
        let r = prob(1.05).solve(&SdpOptions::default());
        assert_eq!(r.status, SdpStatus::Infeasible);
    }
}
