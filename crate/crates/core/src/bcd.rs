//! Block coordinate descent over the two blocks: the transmit beamformer, and
//! the modes with their phases.
//!
//! Every candidate from either block passes a gate before it replaces the
//! incumbent: it must be feasible and must not raise the RIS power. The
//! accepted objective is therefore nonincreasing by construction.

use crate::admm::{run_admm, AdmmConfig, AdmmWarmStart};
use crate::channel::ChannelSet;
use crate::model::{feasibility_report, ris_power, Design, FeasibilityTol, SystemParams};
use crate::txbf::optimize_w;
use crate::{CVector, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub admm: AdmmConfig,
    pub max_bcd_iters: usize,
    /// Stop once an outer iteration lowers the RIS power by less than
    /// `objective_tol + objective_rel_tol * |E|` watts.
    pub objective_tol: f64,
    pub objective_rel_tol: f64,
    pub feasibility: FeasibilityTol,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            admm: AdmmConfig::default(),
            max_bcd_iters: 50,
            objective_tol: 1e-9,
            objective_rel_tol: 1e-4,
            feasibility: FeasibilityTol::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.admm.validate()?;
        if self.max_bcd_iters == 0 {
            return Err(Error::Precondition(
                "max_bcd_iters must be at least 1".into(),
            ));
        }
        for (name, t) in [
            ("objective_tol", self.objective_tol),
            ("objective_rel_tol", self.objective_rel_tol),
        ] {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Precondition(format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    InfeasibleInstance,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::InfeasibleInstance => "infeasible_instance",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// RIS power after the beamforming step.
    pub objective_w: f64,
    /// ADMM iterations summed over the penalty search.
    pub admm_iters: usize,
    /// Whether the mode/phase candidate passed the gate.
    pub accepted: bool,
    /// Incumbent RIS power at the end of the iteration.
    pub e_ris: f64,
    /// Wall time spent in ADMM, seconds.
    pub admm_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub status: SolveStatus,
}

impl SolveTrace {
    /// Whether every end-of-iteration objective is at most the previous one.
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].e_ris <= w[0].e_ris)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub design: Design,
    /// RIS power of `design`, watts.
    pub e_min: f64,
    pub trace: SolveTrace,
}

/// Keep `candidate` iff it is feasible and its RIS power does not exceed
/// `current_e`. Ties go to the candidate. Returns the kept design, its power,
/// and whether the candidate won.
pub fn accept_gate(
    current: &Design,
    current_e: f64,
    candidate: &Design,
    ch: &ChannelSet,
    params: &SystemParams,
    tol: &FeasibilityTol,
) -> Result<(Design, f64, bool)> {
    let feasible = feasibility_report(candidate, ch, params, tol)?.feasible();
    if feasible {
        let e = ris_power(candidate, ch, params)?;
        if e <= current_e {
            return Ok((candidate.clone(), e, true));
        }
    }
    Ok((current.clone(), current_e, false))
}

/// Alternate beamforming and mode/phase updates from the all-reflecting,
/// zero-phase start.
///
/// Fails with [`Error::InfeasibleInstance`] when the starting modes admit no
/// feasible beamformer.
pub fn solve_p(ch: &ChannelSet, params: &SystemParams, cfg: &SolveConfig) -> Result<Solution> {
    cfg.validate()?;
    params.validate()?;
    ch.check(params)?;
    let tol = &cfg.feasibility;
    let i_r = params.i_r;
    let ones = CVector::from_element(i_r, C64::new(1.0, 0.0));
    let start = match optimize_w(ch, params, &vec![true; i_r], &ones) {
        Ok(sol) => sol,
        Err(Error::Infeasible) => return Err(Error::InfeasibleInstance),
        Err(e) => return Err(e),
    };
    let mut incumbent = Design::all_reflect(start.w, i_r);
    if !feasibility_report(&incumbent, ch, params, tol)?.feasible() {
        return Err(Error::SolverFailed(
            "starting beamformer fails the feasibility check".into(),
        ));
    }
    let mut e_inc = ris_power(&incumbent, ch, params)?;
    let mut warm: Option<AdmmWarmStart> = None;
    let mut records = Vec::new();
    let mut status = SolveStatus::MaxIters;

    for k in 0..cfg.max_bcd_iters {
        let e_before = if k == 0 { f64::INFINITY } else { e_inc };
        if k > 0 {
            // A failed or worse beamforming step leaves the incumbent alone.
            if let Ok(sol) = optimize_w(ch, params, &incumbent.s, &incumbent.psi) {
                let cand = Design {
                    w: sol.w,
                    ..incumbent.clone()
                };
                (incumbent, e_inc, _) = accept_gate(&incumbent, e_inc, &cand, ch, params, tol)?;
            }
        }
        let objective_w = e_inc;

        let clock = std::time::Instant::now();
        let admm = match run_admm(&incumbent.w, ch, params, &cfg.admm, warm.as_ref()) {
            Ok(out) => out,
            Err(Error::NoFeasiblePoint(_)) => {
                records.push(IterationRecord {
                    k,
                    objective_w,
                    admm_iters: 0,
                    accepted: false,
                    e_ris: e_inc,
                    admm_seconds: clock.elapsed().as_secs_f64(),
                });
                status = SolveStatus::Converged;
                break;
            }
            Err(e) => return Err(e),
        };
        let admm_seconds = clock.elapsed().as_secs_f64();
        warm = Some(admm.warm_start());
        let candidate = Design {
            w: incumbent.w.clone(),
            s: admm.s.clone(),
            psi: admm.psi.clone(),
        };
        let accepted;
        (incumbent, e_inc, accepted) = accept_gate(&incumbent, e_inc, &candidate, ch, params, tol)?;
        records.push(IterationRecord {
            k,
            objective_w,
            admm_iters: admm.total_iterations,
            accepted,
            e_ris: e_inc,
            admm_seconds,
        });
        if e_before - e_inc < cfg.objective_tol + cfg.objective_rel_tol * e_inc.abs() {
            status = SolveStatus::Converged;
            break;
        }
    }
    Ok(Solution {
        design: incumbent,
        e_min: e_inc,
        trace: SolveTrace { records, status },
    })
}
