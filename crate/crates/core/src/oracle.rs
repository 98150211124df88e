//! Brute-force references for the closed-form steps and for the full solver
//! at tiny sizes. Nothing in the production path calls into this module, and
//! none of it reuses the closed forms it is meant to check.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::admm::AdmmState;
use crate::channel::ChannelSet;
use crate::model::{feasibility_report, ris_power, Design, FeasibilityTol, SystemParams};
use crate::txbf::optimize_w;
use crate::{CVector, Error, Result, C64};

/// Largest enumeration [`tiny_brute_force`] accepts, in SDP solves.
pub const MAX_BRUTE_FORCE_SOLVES: u64 = 300_000;

/// Uniform phase grid on `[0, 2 pi)`, optionally crossed with every mode
/// vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub phase_points: usize,
    /// Enumerate all mode vectors. When false only the all-reflecting modes
    /// are searched.
    pub mode_enumeration: bool,
}

impl GridSpec {
    pub fn new(phase_points: usize, mode_enumeration: bool) -> Result<Self> {
        let g = Self {
            phase_points,
            mode_enumeration,
        };
        g.validate()?;
        Ok(g)
    }

    /// The default for joint searches.
    pub fn brute_force() -> Self {
        Self {
            phase_points: 64,
            mode_enumeration: true,
        }
    }

    /// The default for per-element searches.
    pub fn per_element() -> Self {
        Self {
            phase_points: 4096,
            mode_enumeration: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phase_points < 2 {
            return Err(Error::Precondition(
                "phase grid needs at least 2 points".into(),
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.phase_points as f64
    }

    pub fn phase(&self, k: usize) -> f64 {
        k as f64 * self.spacing()
    }
}

fn cis(phi: f64) -> C64 {
    C64::from_polar(1.0, phi)
}

/// Minimize a function that is unimodal on `[a, b]`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Closest point to `v` with `|d^H x| >= tau`, by search.
///
/// Any minimizer is either `v` itself or lies on the boundary, and the
/// closest boundary point with `d^H x = tau e^{j phi}` is
/// `v + d (tau e^{j phi} - d^H v) / ||d||^2`. The phase is swept over the
/// grid and the best grid point is refined by golden section. Ties keep the
/// earlier candidate.
pub fn projection_oracle_sweep(
    v: &CVector,
    d: &CVector,
    tau: f64,
    grid: &GridSpec,
) -> Result<CVector> {
    grid.validate()?;
    if v.len() != d.len() {
        return Err(Error::DimensionMismatch {
            what: "projection direction",
            expected: v.len(),
            found: d.len(),
        });
    }
    let d_sq = d.norm_squared();
    if d_sq == 0.0 {
        return Err(Error::Precondition(
            "projection direction must be nonzero".into(),
        ));
    }
    if d.dotc(v).norm() >= tau {
        return Ok(v.clone());
    }
    let on_boundary = |phi: f64| -> CVector {
        let target = cis(phi) * tau;
        // d^H v is recomputed here rather than hoisted, to keep this path
        // free of shared algebra with the closed form.
        v + d * ((target - d.dotc(v)) / d_sq)
    };
    let dist = |phi: f64| (on_boundary(phi) - v).norm();

    // Distances equal up to rounding count as ties, so that a degenerate
    // family (d^H v = 0, every phase equally close) resolves to phase 0.
    let better = |e: f64, best: f64| e < best * (1.0 - 1e-12);
    let mut best_k = 0;
    let mut best = dist(0.0);
    for k in 1..grid.phase_points {
        let e = dist(grid.phase(k));
        if better(e, best) {
            best = e;
            best_k = k;
        }
    }
    let h = grid.spacing();
    let center = grid.phase(best_k);
    let phi = golden_section(dist, center - h, center + h, 80);
    let refined = dist(phi);
    let phi = if better(refined, best) { phi } else { center };
    Ok(on_boundary(phi))
}

/// The `i`-th separable term of the global subproblem:
/// `s u - (1 - s) eta |g|^2 + rho sum_m |theta - (x_m,i + mu_m,i)|^2`.
fn separable_term(
    state: &AdmmState,
    i: usize,
    on: bool,
    theta: C64,
    g_sq: f64,
    params: &SystemParams,
) -> f64 {
    let physical = if on { params.u } else { -params.eta * g_sq };
    let penalty: f64 = (0..3)
        .map(|m| (theta - state.x[m][i] - state.mu[m][i]).norm_sqr())
        .sum();
    physical + state.rho * penalty
}

/// Global update by enumeration: each element independently tries harvesting
/// (`theta = 0`) and reflecting at every grid phase. The alignment entry
/// always reflects and carries no physical cost.
pub fn per_element_enum_oracle(
    state: &AdmmState,
    g: &CVector,
    params: &SystemParams,
    grid: &GridSpec,
) -> Result<(CVector, Vec<bool>)> {
    grid.validate()?;
    let i_r = state.i_r();
    if g.len() != i_r {
        return Err(Error::DimensionMismatch {
            what: "incident signal g",
            expected: i_r,
            found: g.len(),
        });
    }
    let zero = C64::new(0.0, 0.0);
    let best_phase = |i: usize, g_sq: f64, physical_on: bool| -> (f64, C64) {
        let mut best = (f64::INFINITY, zero);
        for k in 0..grid.phase_points {
            let theta = cis(grid.phase(k));
            let cost = if physical_on {
                separable_term(state, i, true, theta, g_sq, params)
            } else {
                state.rho
                    * (0..3)
                        .map(|m| (theta - state.x[m][i] - state.mu[m][i]).norm_sqr())
                        .sum::<f64>()
            };
            if cost < best.0 {
                best = (cost, theta);
            }
        }
        best
    };

    let mut theta = CVector::zeros(i_r + 1);
    let mut s = vec![false; i_r];
    for i in 0..i_r {
        let g_sq = g[i].norm_sqr();
        let off = separable_term(state, i, false, zero, g_sq, params);
        let (on, phase) = best_phase(i, g_sq, true);
        if on < off {
            s[i] = true;
            theta[i] = phase;
        }
    }
    theta[i_r] = best_phase(i_r, 0.0, false).1;
    Ok((theta, s))
}

/// Best design found by exhaustive search.
#[derive(Debug, Clone)]
pub struct BruteForce {
    pub design: Design,
    pub e_min: f64,
    /// Grid points searched.
    pub evaluated: usize,
    /// Grid points whose beamforming problem was infeasible or failed.
    pub rejected: usize,
}

/// Number of `(modes, phases)` points for `i_r` elements.
pub fn brute_force_size(i_r: usize, grid: &GridSpec) -> u64 {
    let p = grid.phase_points as u64;
    if grid.mode_enumeration {
        // Each element is either harvesting or reflecting at one of p phases.
        (p + 1).saturating_pow(i_r as u32)
    } else {
        p.saturating_pow(i_r as u32)
    }
}

fn grid_point(index: u64, i_r: usize, grid: &GridSpec) -> (Vec<bool>, CVector) {
    let radix = grid.phase_points as u64 + u64::from(grid.mode_enumeration);
    let mut rest = index;
    let mut s = vec![true; i_r];
    let mut psi = CVector::from_element(i_r, C64::new(1.0, 0.0));
    for i in 0..i_r {
        let digit = (rest % radix) as usize;
        rest /= radix;
        if grid.mode_enumeration && digit == grid.phase_points {
            s[i] = false;
        } else {
            psi[i] = cis(grid.phase(digit));
        }
    }
    (s, psi)
}

/// Exhaustive search over modes and grid phases, solving the beamforming
/// subproblem at every point, followed by a local polish of the best few
/// points. Only for `I_R <= 3` and at most 64 phases.
pub fn tiny_brute_force(
    ch: &ChannelSet,
    params: &SystemParams,
    grid: &GridSpec,
) -> Result<BruteForce> {
    grid.validate()?;
    params.validate()?;
    ch.check(params)?;
    if params.i_r > 3 {
        return Err(Error::Precondition(format!(
            "exhaustive search is limited to 3 elements, got {}",
            params.i_r
        )));
    }
    if grid.phase_points > 64 {
        return Err(Error::Precondition(format!(
            "exhaustive search is limited to 64 phases, got {}",
            grid.phase_points
        )));
    }
    let solves = brute_force_size(params.i_r, grid);
    if solves > MAX_BRUTE_FORCE_SOLVES {
        return Err(Error::EnumerationTooLarge {
            solves,
            limit: MAX_BRUTE_FORCE_SOLVES,
        });
    }
    let tol = FeasibilityTol::default();
    let evaluate = |s: Vec<bool>, psi: CVector| -> Option<(Design, f64)> {
        let w = optimize_w(ch, params, &s, &psi).ok()?.w;
        let design = Design { w, s, psi };
        if !feasibility_report(&design, ch, params, &tol)
            .ok()?
            .feasible()
        {
            return None;
        }
        let e = ris_power(&design, ch, params).ok()?;
        Some((design, e))
    };
    let results: Vec<Option<(Design, f64)>> = (0..solves)
        .into_par_iter()
        .map(|idx| {
            let (s, psi) = grid_point(idx, params.i_r, grid);
            evaluate(s, psi)
        })
        .collect();
    let rejected = results.iter().filter(|r| r.is_none()).count();

    // Polish the best few grid points so that the grid spacing does not
    // leave room for a continuous-phase method to come out ahead. Stable
    // sorting keeps the lowest index first among ties.
    let mut ranked: Vec<(Design, f64)> = results.into_iter().flatten().collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    ranked.truncate(POLISHED_CANDIDATES);
    let polished: Vec<(Design, f64)> = ranked
        .into_par_iter()
        .map(|start| polish_phases(start, grid.spacing(), &evaluate))
        .collect();
    let mut best: Option<(Design, f64)> = None;
    for (design, e) in polished {
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((design, e));
        }
    }
    let (design, e_min) = best.ok_or(Error::AllInfeasible)?;
    Ok(BruteForce {
        design,
        e_min,
        evaluated: solves as usize,
        rejected,
    })
}

/// Grid points refined after the exhaustive pass.
pub const POLISHED_CANDIDATES: usize = 4;

/// Coordinate-wise golden section on each reflecting phase within one grid
/// spacing. Infeasible phases score `+inf`; only improvements are kept.
fn polish_phases(
    start: (Design, f64),
    spacing: f64,
    evaluate: &(dyn Fn(Vec<bool>, CVector) -> Option<(Design, f64)> + Sync),
) -> (Design, f64) {
    let (mut design, mut e) = start;
    for _ in 0..3 {
        for i in 0..design.s.len() {
            if !design.s[i] {
                continue;
            }
            let center = design.psi[i].arg();
            let (s, psi) = (design.s.clone(), design.psi.clone());
            let with_phase = |phi: f64| {
                let mut psi = psi.clone();
                psi[i] = cis(phi);
                psi
            };
            let score =
                |phi: f64| evaluate(s.clone(), with_phase(phi)).map_or(f64::INFINITY, |r| r.1);
            let phi = golden_section(score, center - spacing, center + spacing, 40);
            if let Some((cand, ce)) = evaluate(s.clone(), with_phase(phi)) {
                if ce < e {
                    design = cand;
                    e = ce;
                }
            }
        }
    }
    (design, e)
}

/// Every element reflecting at zero phase with the optimal beamformer for
/// those modes. Nothing is harvested, so the power is `u I_R`.
pub fn baseline_all_reflect(ch: &ChannelSet, params: &SystemParams) -> Result<(Design, f64)> {
    let ones = CVector::from_element(params.i_r, C64::new(1.0, 0.0));
    let w = optimize_w(ch, params, &vec![true; params.i_r], &ones)?.w;
    let design = Design::all_reflect(w, params.i_r);
    let e = ris_power(&design, ch, params)?;
    Ok((design, e))
}
