//! Mode assignment and reflect phases for a fixed transmit beamformer.
//!
//! The phases and the unit-modulus alignment variable `t` are stacked into
//! `theta_bar` (length `I_R + 1`), with `theta_bar_i = s_i conj(psi_i)`. The
//! three SNR constraints become `|d^H theta_bar| >= tau` for lifted vectors
//! `d`, and each gets its own copy `x_m` of `theta_bar`. Consensus ADMM then
//! alternates a separable update of `(theta_bar, s)`, three closed-form
//! projections, and scaled dual ascent.

use crate::channel::ChannelSet;
use crate::model::{ris_power_from_incident, EffectiveVectors, SystemParams};
use crate::{CVector, Error, Result, C64};

/// Penalty parameter choice, in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho {
    /// Search a ladder of penalties, see [`rho_ladder`].
    Auto,
    Fixed(f64),
}

/// Candidate penalties for [`Rho::Auto`], ascending.
///
/// At unit consensus an element keeps reflecting iff its cost
/// `u + eta |g_i|^2` is below `3 rho`, so rung `k` sits just above the k-th
/// smallest cost divided by 3 and keeps the `k + 1` cheapest elements on.
/// The top rung `10 (u + eta max |g_i|^2)` keeps every reflecting element
/// of the starting point on.
pub fn rho_ladder(g: &CVector, params: &SystemParams) -> Vec<f64> {
    let mut costs: Vec<f64> = g
        .iter()
        .map(|z| params.u + params.eta * z.norm_sqr())
        .collect();
    costs.sort_by(f64::total_cmp);
    let top = 10.0 * costs.last().copied().unwrap_or(params.u);
    let mut ladder: Vec<f64> = costs.iter().map(|c| c / 3.0 * (1.0 + 1e-9)).collect();
    ladder.dedup();
    ladder.push(top);
    ladder
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub rho: Rho,
    pub max_iters: usize,
    /// Stop when `max_m ||x_m - theta_bar||` is below this. `None` means
    /// `1e-6 sqrt(I_R + 1)`.
    pub primal_tol: Option<f64>,
    /// Stop when `||theta_bar^(n+1) - theta_bar^(n)||` is below this.
    /// `None` means `1e-6 sqrt(I_R + 1)`.
    pub dual_tol: Option<f64>,
    /// Relative inflation of the SNR thresholds inside the projections, so
    /// that iterates within the stopping tolerance still meet the true
    /// thresholds.
    pub threshold_margin: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: Rho::Auto,
            max_iters: 5000,
            primal_tol: None,
            dual_tol: None,
            threshold_margin: 1e-4,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |t: Option<f64>| t.is_none_or(|t| t > 0.0 && t.is_finite());
        if !ok(self.primal_tol) || !ok(self.dual_tol) {
            return Err(Error::Precondition(
                "ADMM tolerances must be positive".into(),
            ));
        }
        if let Rho::Fixed(r) = self.rho {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Precondition("rho must be positive".into()));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Precondition(
                "ADMM needs at least one iteration".into(),
            ));
        }
        if !(self.threshold_margin >= 0.0 && self.threshold_margin < 1.0) {
            return Err(Error::Precondition(
                "threshold margin must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn tolerances(&self, i_r: usize) -> (f64, f64) {
        let default = 1e-6 * ((i_r + 1) as f64).sqrt();
        (
            self.primal_tol.unwrap_or(default),
            self.dual_tol.unwrap_or(default),
        )
    }
}

/// The three constraint vectors of the stacked problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVectors {
    /// `[a; 0]`, backscatter link.
    pub b: CVector,
    /// `[sqrt(alpha) a; h_d^H w]`, active link with `c = +1`.
    pub c1: CVector,
    /// `[-sqrt(alpha) a; h_d^H w]`, active link with `c = -1`.
    pub c2: CVector,
}

impl LiftedVectors {
    pub fn new(a: &CVector, direct: C64, alpha: f64) -> Self {
        let i_r = a.len();
        let sa = alpha.sqrt();
        let zero = C64::new(0.0, 0.0);
        let b = CVector::from_fn(i_r + 1, |i, _| if i < i_r { a[i] } else { zero });
        let c1 = CVector::from_fn(i_r + 1, |i, _| if i < i_r { a[i] * sa } else { direct });
        let c2 = CVector::from_fn(i_r + 1, |i, _| if i < i_r { -a[i] * sa } else { direct });
        Self { b, c1, c2 }
    }

    pub fn from_beamformer(ch: &ChannelSet, w: &CVector, alpha: f64) -> (Self, EffectiveVectors) {
        let eff = EffectiveVectors::new(ch, w);
        let direct = ch.h_d.dotc(w);
        (Self::new(&eff.a, direct, alpha), eff)
    }

    /// `(vector, threshold)` for `x_0`, `x_1`, `x_2` in that order.
    pub fn rows(&self, params: &SystemParams, margin: f64) -> [(&CVector, f64); 3] {
        let inflate = (1.0 + margin).sqrt();
        let tau_b = params.backscatter_threshold().sqrt() * inflate;
        let tau_a = params.active_threshold().sqrt() * inflate;
        [(&self.b, tau_b), (&self.c1, tau_a), (&self.c2, tau_a)]
    }
}

/// Starting point for [`run_admm`]: auxiliary copies and scaled duals.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmWarmStart {
    pub x: [CVector; 3],
    pub mu: [CVector; 3],
}

impl AdmmWarmStart {
    /// `x_m = 1`, `mu_m = 0`.
    pub fn cold(i_r: usize) -> Self {
        let ones = CVector::from_element(i_r + 1, C64::new(1.0, 0.0));
        let zeros = CVector::zeros(i_r + 1);
        Self {
            x: [ones.clone(), ones.clone(), ones],
            mu: [zeros.clone(), zeros.clone(), zeros],
        }
    }

    fn check(&self, i_r: usize) -> Result<()> {
        for v in self.x.iter().chain(self.mu.iter()) {
            if v.len() != i_r + 1 {
                return Err(Error::DimensionMismatch {
                    what: "ADMM warm start",
                    expected: i_r + 1,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub theta_bar: CVector,
    pub s: Vec<bool>,
    pub x: [CVector; 3],
    pub mu: [CVector; 3],
    pub rho: f64,
    pub iteration: usize,
}

impl AdmmState {
    /// State before the first global update. `theta_bar` is set to `x_0` so
    /// that the first dual residual measures movement away from the start.
    pub fn from_warm(warm: AdmmWarmStart, rho: f64) -> Self {
        let i_r = warm.x[0].len() - 1;
        Self {
            theta_bar: warm.x[0].clone(),
            s: (0..i_r)
                .map(|i| warm.x[0][i] != C64::new(0.0, 0.0))
                .collect(),
            x: warm.x,
            mu: warm.mu,
            rho,
            iteration: 0,
        }
    }

    pub fn i_r(&self) -> usize {
        self.s.len()
    }

    /// `sum_m (x_m + mu_m)`, the consensus signal seen by the global update.
    pub fn consensus_signal(&self) -> CVector {
        let mut sum = CVector::zeros(self.theta_bar.len());
        for m in 0..3 {
            sum += &self.x[m];
            sum += &self.mu[m];
        }
        sum
    }

    /// `max_m ||x_m - theta_bar||`.
    pub fn primal_residual(&self) -> f64 {
        self.x
            .iter()
            .map(|x| (x - &self.theta_bar).norm())
            .fold(0.0, f64::max)
    }

    pub fn warm_start(&self) -> AdmmWarmStart {
        AdmmWarmStart {
            x: self.x.clone(),
            mu: self.mu.clone(),
        }
    }
}

fn unit_phase(z: C64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        C64::new(1.0, 0.0)
    } else {
        z / z.norm()
    }
}

/// Per-element mode score: element `i` harvests iff this is positive.
pub fn mode_score(g_sq: f64, signal_mod: f64, rho: f64, params: &SystemParams) -> f64 {
    params.eta * g_sq + params.u + 3.0 * rho - 2.0 * rho * signal_mod
}

/// Jointly minimize the separable global subproblem over modes and phases.
/// Returns the new `(theta_bar, s)`.
pub fn update_global(
    state: &AdmmState,
    g: &CVector,
    params: &SystemParams,
) -> (CVector, Vec<bool>) {
    let i_r = state.i_r();
    let sigma = state.consensus_signal();
    let mut theta = CVector::zeros(i_r + 1);
    let mut s = vec![false; i_r];
    for i in 0..i_r {
        let score = mode_score(g[i].norm_sqr(), sigma[i].norm(), state.rho, params);
        if score <= 0.0 {
            s[i] = true;
            theta[i] = unit_phase(sigma[i]);
        }
    }
    theta[i_r] = unit_phase(sigma[i_r]);
    (theta, s)
}

/// Closest point to `v` with `|d^H x| >= tau`.
pub fn project_quadratic_lower_bound(v: &CVector, d: &CVector, tau: f64) -> Result<CVector> {
    if v.len() != d.len() {
        return Err(Error::DimensionMismatch {
            what: "projection direction",
            expected: v.len(),
            found: d.len(),
        });
    }
    let inner = d.dotc(v);
    let modulus = inner.norm();
    if modulus >= tau {
        return Ok(v.clone());
    }
    let d_sq = d.norm_squared();
    if d_sq == 0.0 {
        return Err(Error::NoFeasiblePoint("constraint vector is zero"));
    }
    if modulus == 0.0 {
        return Ok(v + d * C64::new(tau / d_sq, 0.0));
    }
    let shift = inner * ((tau - modulus) / (d_sq * modulus));
    Ok(v + d * shift)
}

/// Project `theta_bar - mu_m` onto each constraint set.
pub fn update_auxiliaries(
    state: &AdmmState,
    lifted: &LiftedVectors,
    params: &SystemParams,
    margin: f64,
) -> Result<[CVector; 3]> {
    let rows = lifted.rows(params, margin);
    let project = |m: usize| {
        let (d, tau) = rows[m];
        project_quadratic_lower_bound(&(&state.theta_bar - &state.mu[m]), d, tau)
    };
    Ok([project(0)?, project(1)?, project(2)?])
}

/// `mu_m <- mu_m + x_m - theta_bar`.
pub fn update_duals(state: &AdmmState) -> [CVector; 3] {
    let step = |m: usize| &state.mu[m] + &state.x[m] - &state.theta_bar;
    [step(0), step(1), step(2)]
}

/// `psi_i = conj(theta_bar_i / theta_bar_last)` for reflecting elements,
/// 1 otherwise, renormalized to unit modulus.
pub fn extract_design(theta_bar: &CVector, s: &[bool]) -> CVector {
    let i_r = s.len();
    let t = unit_phase(theta_bar[i_r]);
    CVector::from_fn(i_r, |i, _| {
        if s[i] {
            unit_phase((theta_bar[i] / t).conj())
        } else {
            C64::new(1.0, 0.0)
        }
    })
}

/// One row of the per-iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmRecord {
    pub iter: usize,
    /// Net RIS power of the current modes, watts.
    pub objective: f64,
    pub primal: f64,
    pub dual: f64,
    /// Number of reflecting elements.
    pub reflecting: usize,
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub s: Vec<bool>,
    pub psi: CVector,
    pub state: AdmmState,
    pub converged: bool,
    /// Penalty of the returned run.
    pub rho: f64,
    /// Number of ADMM runs made to pick the penalty (1 for a fixed one).
    pub runs: usize,
    /// Iterations summed over every run.
    pub total_iterations: usize,
    pub trace: Vec<AdmmRecord>,
}

impl AdmmOutcome {
    pub fn iterations(&self) -> usize {
        self.state.iteration
    }

    pub fn warm_start(&self) -> AdmmWarmStart {
        self.state.warm_start()
    }
}

/// Whether `theta_bar` meets all three SNR thresholds (without margin).
pub fn consensus_feasible(
    theta_bar: &CVector,
    lifted: &LiftedVectors,
    params: &SystemParams,
) -> bool {
    lifted
        .rows(params, 0.0)
        .iter()
        .all(|(d, tau)| d.dotc(theta_bar).norm() >= *tau)
}

/// Run ADMM under a fixed beamformer `w` from `warm` (cold start when `None`).
///
/// With [`Rho::Auto`] the penalty is found by bisection over
/// [`rho_ladder`] for the smallest rung whose run converges to a point
/// meeting every SNR threshold. Among the converged feasible runs seen, the
/// one with the lowest RIS power is returned; if there is none, the top
/// rung's run is returned.
pub fn run_admm(
    w: &CVector,
    ch: &ChannelSet,
    params: &SystemParams,
    cfg: &AdmmConfig,
    warm: Option<&AdmmWarmStart>,
) -> Result<AdmmOutcome> {
    cfg.validate()?;
    ch.check(params)?;
    if w.len() != params.n {
        return Err(Error::DimensionMismatch {
            what: "beamformer w",
            expected: params.n,
            found: w.len(),
        });
    }
    let i_r = params.i_r;
    let warm = match warm {
        Some(ws) => {
            ws.check(i_r)?;
            ws.clone()
        }
        None => AdmmWarmStart::cold(i_r),
    };
    let (lifted, eff) = LiftedVectors::from_beamformer(ch, w, params.alpha);
    let run = |rho: f64| run_fixed(&lifted, &eff.g, params, cfg, warm.clone(), rho);
    let rho = match cfg.rho {
        Rho::Fixed(rho) => {
            let mut out = run(rho)?;
            out.runs = 1;
            return Ok(out);
        }
        Rho::Auto => rho_ladder(&eff.g, params),
    };

    let mut runs = 0;
    let mut total_iterations = 0;
    let mut best: Option<(f64, AdmmOutcome)> = None;
    let consider = |out: AdmmOutcome, best: &mut Option<(f64, AdmmOutcome)>| -> bool {
        let ok = out.converged && consensus_feasible(&out.state.theta_bar, &lifted, params);
        if ok {
            let e = ris_power_from_incident(&out.s, &eff.g, params);
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                *best = Some((e, out));
            }
        }
        ok
    };
    let top = rho.len() - 1;
    let top_run = run(rho[top])?;
    runs += 1;
    total_iterations += top_run.iterations();
    let fallback = top_run.clone();
    if consider(top_run, &mut best) {
        // Invariant: rung `hi` succeeded; rungs below `lo` are untested or failed.
        let (mut lo, mut hi) = (0usize, top);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let out = run(rho[mid])?;
            runs += 1;
            total_iterations += out.iterations();
            if consider(out, &mut best) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
    }
    let mut chosen = best.map(|(_, out)| out).unwrap_or(fallback);
    chosen.runs = runs;
    chosen.total_iterations = total_iterations;
    Ok(chosen)
}

fn run_fixed(
    lifted: &LiftedVectors,
    g: &CVector,
    params: &SystemParams,
    cfg: &AdmmConfig,
    warm: AdmmWarmStart,
    rho: f64,
) -> Result<AdmmOutcome> {
    let (primal_tol, dual_tol) = cfg.tolerances(params.i_r);
    let mut state = AdmmState::from_warm(warm, rho);
    let mut trace = Vec::new();
    let mut converged = false;
    while state.iteration < cfg.max_iters {
        let (theta, s) = update_global(&state, g, params);
        let dual = (&theta - &state.theta_bar).norm();
        state.theta_bar = theta;
        state.s = s;
        state.x = update_auxiliaries(&state, lifted, params, cfg.threshold_margin)?;
        state.mu = update_duals(&state);
        state.iteration += 1;
        let primal = state.primal_residual();
        trace.push(AdmmRecord {
            iter: state.iteration,
            objective: ris_power_from_incident(&state.s, g, params),
            primal,
            dual,
            reflecting: state.s.iter().filter(|&&b| b).count(),
        });
        if primal < primal_tol && dual < dual_tol {
            converged = true;
            break;
        }
    }
    let total_iterations = state.iteration;
    Ok(AdmmOutcome {
        psi: extract_design(&state.theta_bar, &state.s),
        s: state.s.clone(),
        state,
        converged,
        rho,
        runs: 1,
        total_iterations,
        trace,
    })
}
