//! Transmit beamforming for fixed modes and phases.
//!
//! The quadratic program over `w` is lifted to `W = w w^H`, the rank
//! constraint is dropped, and the resulting SDP is solved by the interior
//! point method in [`crate::numerics`]. A rank-one optimum is then recovered
//! by repeatedly stepping along Hermitian directions that leave every
//! constraint value unchanged.

use crate::channel::ChannelSet;
use crate::model::{ris_power_from_incident, SystemParams};
use crate::numerics::{
    herm_nullspace_direction, psd_factor, solve_small_sdp, HermitianMatrix, SdpConstraint,
    SdpProblem, SdpSolution, SdpStatus, RANK_TOL,
};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Relative objective slack accepted from the dominant-eigenvector fallback.
pub const FALLBACK_OBJECTIVE_TOL: f64 = 1e-4;

/// Indices of the constraints inside [`SdrInstance::problem`].
pub const ROW_ACTIVE_PLUS: usize = 0;
pub const ROW_ACTIVE_MINUS: usize = 1;
pub const ROW_BACKSCATTER: usize = 2;
pub const ROW_BUDGET: usize = 3;

/// The relaxed beamforming problem for one `(s, psi)`.
#[derive(Debug, Clone)]
pub struct SdrInstance {
    pub problem: SdpProblem,
    /// `h_d + v_b`.
    pub v_plus: CVector,
    /// `h_d - v_b`.
    pub v_minus: CVector,
    /// `sqrt(alpha) G^H Psi^H S^H h_r`.
    pub v_b: CVector,
    /// `u * (number of reflecting elements)`, dropped from the SDP objective.
    pub constant: f64,
    /// Set when a lower-bound row has an all-zero vector and a positive bound.
    pub structurally_infeasible: bool,
}

impl SdrInstance {
    /// Net RIS power of a beamformer under this instance's modes.
    pub fn energy(&self, w: &CVector) -> f64 {
        self.constant + self.problem.objective().quad_form(w)
    }

    /// Lower-bound rows as `(vector, bound)`.
    pub fn snr_rows(&self) -> [(&CVector, f64); 3] {
        let c = self.problem.constraints();
        [
            (&self.v_plus, c[ROW_ACTIVE_PLUS].bound),
            (&self.v_minus, c[ROW_ACTIVE_MINUS].bound),
            (&self.v_b, c[ROW_BACKSCATTER].bound),
        ]
    }

    pub fn budget(&self) -> f64 {
        self.problem.constraints()[ROW_BUDGET].bound
    }

    /// Largest relative violation of a rank-one point `w w^H`.
    pub fn violation(&self, w: &CVector) -> f64 {
        let mut worst = 0.0f64;
        for (v, bound) in self.snr_rows() {
            let value = v.dotc(w).norm_sqr();
            worst = worst.max((bound - value).max(0.0) / bound);
        }
        let p = self.budget();
        worst.max((w.norm_squared() - p).max(0.0) / p)
    }
}

fn check_modes(ch: &ChannelSet, params: &SystemParams, s: &[bool], psi: &CVector) -> Result<()> {
    ch.check(params)?;
    if s.len() != params.i_r || psi.len() != params.i_r {
        return Err(Error::DimensionMismatch {
            what: "mode/phase vectors",
            expected: params.i_r,
            found: s.len().min(psi.len()),
        });
    }
    Ok(())
}

/// Build the relaxed problem
///
/// ```text
/// minimize   tr(C W),  C = -eta G^H (I - S) G
/// subject to v_+^H W v_+ >= sigma^2 gamma_A
///            v_-^H W v_- >= sigma^2 gamma_A
///            v_b^H W v_b >= sigma^2 gamma_B / (alpha L)
///            tr(W) <= P,  W psd
/// ```
pub fn build_p12(
    ch: &ChannelSet,
    params: &SystemParams,
    s: &[bool],
    psi: &CVector,
) -> Result<SdrInstance> {
    check_modes(ch, params, s, psi)?;
    let n = params.n;
    let q = CVector::from_fn(params.i_r, |i, _| {
        if s[i] {
            psi[i].conj() * ch.h_r[i]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let v_b = ch.g.ad_mul(&q) * C64::new(params.alpha.sqrt(), 0.0);
    let v_plus = &ch.h_d + &v_b;
    let v_minus = &ch.h_d - &v_b;

    let harvesting: Vec<usize> = (0..params.i_r).filter(|&i| !s[i]).collect();
    let mut g_off = CMatrix::zeros(harvesting.len(), n);
    for (row, &i) in harvesting.iter().enumerate() {
        g_off.set_row(row, &ch.g.row(i));
    }
    let objective = HermitianMatrix::symmetrize(g_off.ad_mul(&g_off) * C64::new(-params.eta, 0.0));

    let active = params.active_threshold();
    let backscatter = params.backscatter_threshold();
    let structurally_infeasible = [(&v_plus, active), (&v_minus, active), (&v_b, backscatter)]
        .iter()
        .any(|(v, bound)| *bound > 0.0 && v.iter().all(|z| *z == C64::new(0.0, 0.0)));

    let constraints = vec![
        SdpConstraint::ge(HermitianMatrix::outer(&v_plus), active),
        SdpConstraint::ge(HermitianMatrix::outer(&v_minus), active),
        SdpConstraint::ge(HermitianMatrix::outer(&v_b), backscatter),
        SdpConstraint::le(HermitianMatrix::identity(n), params.p_bgt),
    ];
    Ok(SdrInstance {
        problem: SdpProblem::new(objective, constraints)?,
        v_plus,
        v_minus,
        v_b,
        constant: params.u * s.iter().filter(|&&b| b).count() as f64,
        structurally_infeasible,
    })
}

/// Bookkeeping from one rank reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReductionStats {
    /// Numerical rank of the SDP optimum.
    pub initial_rank: usize,
    /// Number of rank-reducing steps taken.
    pub steps: usize,
    /// Steps that dropped the trace condition because the budget was slack.
    pub trace_free_steps: usize,
    /// Whether the dominant-eigenvector fallback produced the result.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub w: CVector,
    pub stats: ReductionStats,
}

/// Bring a PSD optimum of `inst` down to a rank-one point `w w^H` with the
/// same constraint values and objective.
pub fn rank_one_reduce(w_star: &HermitianMatrix, inst: &SdrInstance) -> Result<Reduction> {
    let constraint_mats: Vec<HermitianMatrix> = inst
        .problem
        .constraints()
        .iter()
        .map(|c| c.matrix.clone())
        .collect();
    let target = inst.problem.objective_value(w_star);
    let mut w = w_star.clone();
    let mut stats = ReductionStats::default();
    let mut v = psd_factor(&w)?;
    stats.initial_rank = v.ncols();
    // Each step removes at least one column; the bound is a safety net.
    for _ in 0..w_star.dim() {
        let r = v.ncols();
        if r <= 1 {
            break;
        }
        let reduced: Vec<HermitianMatrix> =
            constraint_mats.iter().map(|m| m.congruence(&v)).collect();
        let mut z = herm_nullspace_direction(&reduced, r);
        if z.is_none() {
            // With a slack budget the trace row may be dropped as long as the
            // step does not increase the trace.
            let slack = inst.budget() - w.trace();
            if slack > 1e-6 * inst.budget() {
                z = herm_nullspace_direction(&reduced[..ROW_BUDGET], r).map(|z| {
                    let gram = HermitianMatrix::symmetrize(v.ad_mul(&v));
                    if gram.inner(&z) < 0.0 {
                        z.scale(-1.0)
                    } else {
                        z
                    }
                });
                if z.is_some() {
                    stats.trace_free_steps += 1;
                }
            }
        }
        let Some(z) = z else {
            return dominant_fallback(w_star, inst, target, r, stats);
        };
        let eig = z.eigen();
        let step = if eig.max_value() > 0.0 {
            eig.max_value()
        } else {
            eig.min_value()
        };
        let inner = CMatrix::identity(r, r) - z.as_matrix() * C64::new(1.0 / step, 0.0);
        w = HermitianMatrix::symmetrize(&v * inner * v.adjoint());
        let next = psd_factor(&w)?;
        stats.steps += 1;
        if next.ncols() >= r {
            // The smallest eigenvalue of I - Z/step is exactly zero in exact
            // arithmetic; force it when rounding leaves it above RANK_TOL.
            let trimmed = next.columns(0, r - 1).into_owned();
            w = HermitianMatrix::symmetrize(&trimmed * trimmed.adjoint());
            v = trimmed;
        } else {
            v = next;
        }
    }
    if v.ncols() == 0 {
        return Err(Error::SolverFailed("SDP optimum is the zero matrix".into()));
    }
    Ok(Reduction {
        w: v.column(0).into_owned(),
        stats,
    })
}

/// Take the principal eigen-pair, scale it up to the tightest violated
/// lower bound, and keep it only if it is feasible and near-optimal.
fn dominant_fallback(
    w_star: &HermitianMatrix,
    inst: &SdrInstance,
    target: f64,
    rank: usize,
    mut stats: ReductionStats,
) -> Result<Reduction> {
    let eig = w_star.eigen();
    let mut w = eig.max_vector() * C64::new(eig.max_value().max(0.0).sqrt(), 0.0);
    let mut factor = 1.0f64;
    for (v, bound) in inst.snr_rows() {
        let value = v.dotc(&w).norm_sqr();
        if value <= 0.0 {
            return Err(Error::ReductionStalled { rank });
        }
        factor = factor.max(bound / value);
    }
    w *= C64::new(factor.sqrt(), 0.0);
    let obj = inst.problem.objective().quad_form(&w);
    let feasible = inst.violation(&w) <= 1e-9;
    if feasible && (obj - target).abs() <= FALLBACK_OBJECTIVE_TOL * (1.0 + target.abs()) {
        stats.fallback = true;
        Ok(Reduction { w, stats })
    } else {
        Err(Error::ReductionStalled { rank })
    }
}

/// Scale a beamformer onto the power budget. The objective matrix is
/// negative semidefinite and all SNR rows are lower bounds, so this never
/// hurts the objective or feasibility; it also absorbs rounding left by the
/// solver on active SNR rows.
fn saturate_budget(w: &mut CVector, budget: f64) {
    let p = w.norm_squared();
    if p > 0.0 {
        *w *= C64::new((budget / p).sqrt(), 0.0);
    }
}

#[derive(Debug, Clone)]
pub struct TxbfSolution {
    pub w: CVector,
    /// Net RIS power at `w`, including the control cost of reflecting elements.
    pub objective: f64,
    /// SDP lower bound plus the same constant.
    pub sdp_bound: f64,
    pub reduction: ReductionStats,
    pub sdp_iterations: usize,
}

/// Optimize `w` for fixed `(s, psi)`.
pub fn optimize_w(
    ch: &ChannelSet,
    params: &SystemParams,
    s: &[bool],
    psi: &CVector,
) -> Result<TxbfSolution> {
    let inst = build_p12(ch, params, s, psi)?;
    if inst.structurally_infeasible {
        return Err(Error::Infeasible);
    }
    let sol = solve_small_sdp(&inst.problem);
    solve_from_sdp(ch, params, s, &inst, &sol)
}

fn solve_from_sdp(
    ch: &ChannelSet,
    params: &SystemParams,
    s: &[bool],
    inst: &SdrInstance,
    sol: &SdpSolution,
) -> Result<TxbfSolution> {
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => return Err(Error::Infeasible),
        SdpStatus::MaxIterations => {
            return Err(Error::SolverFailed(format!(
                "SDP stopped after {} iterations (gap {:.2e}, infeasibility {:.2e})",
                sol.iterations, sol.metrics.relative_gap, sol.metrics.primal_infeasibility
            )))
        }
    }
    let red = rank_one_reduce(&sol.w, inst)?;
    let mut w = red.w;
    saturate_budget(&mut w, inst.budget());
    let violation = inst.violation(&w);
    if violation > 1e-7 {
        return Err(Error::SolverFailed(format!(
            "recovered beamformer violates a constraint by {violation:.2e} (relative)"
        )));
    }
    let g = &ch.g * &w;
    Ok(TxbfSolution {
        objective: ris_power_from_incident(s, &g, params),
        sdp_bound: inst.constant + sol.objective_value,
        w,
        reduction: red.stats,
        sdp_iterations: sol.iterations,
    })
}

/// `sqrt(lambda_max) * principal eigenvector` of a PSD matrix.
pub fn principal_scaled(w: &HermitianMatrix) -> CVector {
    let eig = w.eigen();
    eig.max_vector() * C64::new(eig.max_value().max(0.0).sqrt(), 0.0)
}

/// Numerical rank used by the reduction loop.
pub fn reduction_rank(w: &HermitianMatrix) -> usize {
    let eig = w.eigen();
    let max = eig.max_value();
    eig.values.iter().filter(|&&l| l > RANK_TOL * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::tests::random_channels;
    use crate::model::{feasibility_report, Design, FeasibilityTol};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(n: usize, i_r: usize) -> SystemParams {
        SystemParams {
            n,
            i_r,
            ..SystemParams::default()
        }
    }

    fn random_modes(i_r: usize, seed: u64) -> (Vec<bool>, CVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s: Vec<bool> = (0..i_r).map(|_| rng.random_bool(0.7)).collect();
        s[0] = true;
        let psi = CVector::from_fn(i_r, |_, _| {
            C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        });
        (s, psi)
    }

    #[test]
    fn identity_modes_give_plain_sum() {
        let p = small(3, 5);
        let ch = random_channels(&p, 1);
        let ones = CVector::from_element(5, C64::new(1.0, 0.0));
        let inst = build_p12(&ch, &p, &[true; 5], &ones).unwrap();
        let expected = &ch.h_d + ch.g.ad_mul(&ch.h_r);
        assert!((&inst.v_plus - expected).norm() < 1e-15);
        assert!(!inst.structurally_infeasible);
        assert_eq!(inst.problem.objective().frobenius_norm(), 0.0);
    }

    #[test]
    fn all_harvesting_is_flagged() {
        let p = small(3, 4);
        let ch = random_channels(&p, 2);
        let ones = CVector::from_element(4, C64::new(1.0, 0.0));
        let inst = build_p12(&ch, &p, &[false; 4], &ones).unwrap();
        assert!(inst.structurally_infeasible);
        assert_eq!(
            optimize_w(&ch, &p, &[false; 4], &ones).unwrap_err(),
            Error::Infeasible
        );
    }

    #[test]
    fn rows_match_model_snrs() {
        let p = small(4, 6);
        let ch = random_channels(&p, 3);
        let (s, psi) = random_modes(6, 3);
        let inst = build_p12(&ch, &p, &s, &psi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = CVector::from_fn(4, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>())
        });
        let d = Design::new(w.clone(), s.clone(), psi.clone()).unwrap();
        let ww = HermitianMatrix::outer(&w);
        let rows = inst.problem.constraints();
        let plus = crate::model::snr_active(&d, &ch, &p, 1.0).unwrap() * p.sigma2;
        let minus = crate::model::snr_active(&d, &ch, &p, -1.0).unwrap() * p.sigma2;
        let back =
            crate::model::snr_backscatter(&d, &ch, &p).unwrap() * p.sigma2 / (p.alpha * p.l as f64);
        for (got, want) in [
            (rows[ROW_ACTIVE_PLUS].matrix.inner(&ww), plus),
            (rows[ROW_ACTIVE_MINUS].matrix.inner(&ww), minus),
            (rows[ROW_BACKSCATTER].matrix.inner(&ww), back),
        ] {
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1e-30),
                "{got} vs {want}"
            );
        }
        let e = crate::model::ris_power(&d, &ch, &p).unwrap();
        assert!((inst.energy(&w) - e).abs() <= 1e-12 * e.abs().max(1e-12));
    }

    #[test]
    fn rank_one_optimum_needs_no_steps() {
        let p = small(3, 3);
        let ch = random_channels(&p, 4);
        let (s, psi) = random_modes(3, 4);
        let inst = build_p12(&ch, &p, &s, &psi).unwrap();
        let w = CVector::from_vec(vec![
            C64::new(1.0, 0.5),
            C64::new(-0.2, 0.1),
            C64::new(0.0, 2.0),
        ]);
        let red = rank_one_reduce(&HermitianMatrix::outer(&w), &inst).unwrap();
        assert_eq!(red.stats.steps, 0);
        assert_eq!(red.stats.initial_rank, 1);
        // Equal up to a global phase.
        let phase = red.w.dotc(&w);
        assert!((phase.norm() - w.norm_squared()).abs() < 1e-12 * w.norm_squared());
    }

    /// The objective only sees the third coordinate, so `diag(1, 1, 0)` is a
    /// rank-two optimum with rank-one optima next to it.
    #[test]
    fn degenerate_rank_two_optimum_is_reduced() {
        let e = |k: usize| {
            let mut v = CVector::zeros(3);
            v[k] = C64::new(1.0, 0.0);
            v
        };
        let v_plus = &e(0) + &e(1);
        let v_minus = &e(0) - &e(1);
        let v_b = e(1) * C64::new(0.5, 0.0);
        let constraints = vec![
            SdpConstraint::ge(HermitianMatrix::outer(&v_plus), 0.5),
            SdpConstraint::ge(HermitianMatrix::outer(&v_minus), 0.5),
            SdpConstraint::ge(HermitianMatrix::outer(&v_b), 0.05),
            SdpConstraint::le(HermitianMatrix::identity(3), 4.0),
        ];
        let objective = HermitianMatrix::outer(&e(2));
        let inst = SdrInstance {
            problem: SdpProblem::new(objective, constraints).unwrap(),
            v_plus,
            v_minus,
            v_b,
            constant: 0.0,
            structurally_infeasible: false,
        };
        let w_star = HermitianMatrix::from_real_diagonal(&[1.0, 1.0, 0.0]);
        let f_star = inst.problem.objective_value(&w_star);
        let red = rank_one_reduce(&w_star, &inst).unwrap();
        assert!(red.stats.steps >= 1);
        let w1 = HermitianMatrix::outer(&red.w);
        assert!(inst.problem.max_relative_violation(&w1) < 1e-12);
        assert!((inst.problem.objective_value(&w1) - f_star).abs() < 1e-12);
        // Every row of the rank-two point is preserved exactly.
        for c in inst.problem.constraints() {
            let before = c.matrix.inner(&w_star);
            let after = c.matrix.inner(&w1);
            assert!(
                (before - after).abs() <= 1e-9 * before.abs().max(1.0),
                "{before} vs {after}"
            );
        }
    }

    #[test]
    fn step_output_stays_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let r = rng.random_range(2..6);
            let ms: Vec<HermitianMatrix> = (0..r.min(3))
                .map(|_| {
                    let v = CVector::from_fn(r, |_, _| {
                        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    });
                    HermitianMatrix::outer(&v)
                })
                .collect();
            let z = herm_nullspace_direction(&ms, r).unwrap();
            let eig = z.eigen();
            let step = if eig.max_value() > 0.0 {
                eig.max_value()
            } else {
                eig.min_value()
            };
            let m = CMatrix::identity(r, r) - z.as_matrix() * C64::new(1.0 / step, 0.0);
            let lmin = HermitianMatrix::symmetrize(m).eigen().min_value();
            assert!(lmin >= -1e-9, "lambda_min {lmin}");
        }
    }

    #[test]
    fn optimize_w_is_feasible_and_tight() {
        let tol = FeasibilityTol::default();
        let mut solved = 0;
        for seed in 0..20u64 {
            let n = if seed % 2 == 0 { 4 } else { 8 };
            let p = small(n, 64);
            let ch = random_channels(&p, 100 + seed);
            let (s, psi) = random_modes(64, seed);
            match optimize_w(&ch, &p, &s, &psi) {
                Ok(sol) => {
                    solved += 1;
                    let d = Design::new(sol.w.clone(), s.clone(), psi.clone()).unwrap();
                    let rep = feasibility_report(&d, &ch, &p, &tol).unwrap();
                    assert!(rep.feasible(), "seed {seed}: {rep:?}");
                    let gap = (sol.objective - sol.sdp_bound).abs() / (1.0 + sol.sdp_bound.abs());
                    assert!(gap < 1e-5, "seed {seed}: gap {gap}");
                    assert!(sol.objective >= sol.sdp_bound - 1e-9 * (1.0 + sol.sdp_bound.abs()));
                }
                Err(Error::Infeasible) => {}
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
        assert!(solved >= 10, "only {solved} feasible draws");
    }

    #[test]
    fn vanishing_thresholds_follow_rayleigh_quotient() {
        let p = SystemParams {
            gamma_a: 1e-12,
            gamma_b: 1e-12,
            ..small(4, 8)
        };
        let ch = random_channels(&p, 11);
        let (s, psi) = random_modes(8, 11);
        let sol = optimize_w(&ch, &p, &s, &psi).unwrap();
        let inst = build_p12(&ch, &p, &s, &psi).unwrap();
        let lmax = inst.problem.objective().scale(-1.0).eigen().max_value();
        let expected = inst.constant - p.p_bgt * lmax;
        assert!(
            (sol.objective - expected).abs() < 1e-6 * (1.0 + expected.abs()),
            "{} vs {expected}",
            sol.objective
        );
    }

    #[test]
    fn tiny_budget_is_infeasible() {
        let base = small(4, 8);
        let ch = random_channels(&base, 12);
        let (s, psi) = random_modes(8, 12);
        let p = SystemParams {
            p_bgt: 1e-12,
            ..base
        };
        assert_eq!(
            optimize_w(&ch, &p, &s, &psi).unwrap_err(),
            Error::Infeasible
        );
    }
}
