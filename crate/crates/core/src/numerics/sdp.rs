//! Dense primal-dual interior-point solver for small complex SDPs.
//!
//! Problem form:
//!
//! ```text
//! minimize    tr(C W)
//! subject to  tr(A_k W) >= b_k   or   tr(A_k W) <= b_k
//!             W Hermitian PSD
//! ```
//!
//! The complex problem is mapped onto the real embedding (each Hermitian
//! matrix `H` becomes `[[Re H, -Im H], [Im H, Re H]] / 2`) and every
//! inequality receives a nonnegative slack, so the solver works on the cone
//! `S^n_+ x R^m_+`. Iterates follow an infeasible-start path with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector. Primal
//! infeasibility is reported once the normalized dual iterate is a Farkas
//! ray to within `INFEASIBILITY_TOL`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use super::herm::{real_compress, real_embed, HermitianMatrix};
use crate::{Error, Result};

pub const MAX_DIM: usize = 64;

/// Tolerance on the Farkas certificate of the scaled problem.
pub const INFEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `tr(A W) >= b`
    Ge,
    /// `tr(A W) <= b`
    Le,
}

#[derive(Debug, Clone)]
pub struct SdpConstraint {
    pub matrix: HermitianMatrix,
    pub sense: Sense,
    pub bound: f64,
}

impl SdpConstraint {
    pub fn ge(matrix: HermitianMatrix, bound: f64) -> Self {
        Self {
            matrix,
            sense: Sense::Ge,
            bound,
        }
    }

    pub fn le(matrix: HermitianMatrix, bound: f64) -> Self {
        Self {
            matrix,
            sense: Sense::Le,
            bound,
        }
    }

    /// Signed slack: nonnegative when satisfied.
    pub fn slack(&self, w: &HermitianMatrix) -> f64 {
        let value = self.matrix.inner(w);
        match self.sense {
            Sense::Ge => value - self.bound,
            Sense::Le => self.bound - value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    objective: HermitianMatrix,
    constraints: Vec<SdpConstraint>,
}

impl SdpProblem {
    pub fn new(objective: HermitianMatrix, constraints: Vec<SdpConstraint>) -> Result<Self> {
        let dim = objective.dim();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Precondition(format!(
                "SDP dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        for c in &constraints {
            if c.matrix.dim() != dim {
                return Err(Error::DimensionMismatch {
                    what: "SDP constraint matrix",
                    expected: dim,
                    found: c.matrix.dim(),
                });
            }
            if !c.bound.is_finite() {
                return Err(Error::Precondition("non-finite constraint bound".into()));
            }
        }
        Ok(Self {
            objective,
            constraints,
        })
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn objective(&self) -> &HermitianMatrix {
        &self.objective
    }

    pub fn constraints(&self) -> &[SdpConstraint] {
        &self.constraints
    }

    pub fn objective_value(&self, w: &HermitianMatrix) -> f64 {
        self.objective.inner(w)
    }

    /// Largest constraint violation, each normalized by `max(1, |b_k|)`.
    pub fn max_relative_violation(&self, w: &HermitianMatrix) -> f64 {
        self.constraints
            .iter()
            .map(|c| (-c.slack(w)).max(0.0) / c.bound.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Upper bound on `tr(W)` implied by a `<=` constraint with a positive
    /// definite matrix, if any.
    pub fn trace_bound(&self) -> Option<f64> {
        self.constraints
            .iter()
            .filter(|c| c.sense == Sense::Le)
            .filter_map(|c| {
                let lmin = c.matrix.eigen().min_value();
                (lmin > 0.0).then(|| c.bound / lmin)
            })
            .min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub w: HermitianMatrix,
    pub objective_value: f64,
    pub status: SdpStatus,
    /// Dual multipliers in the original constraint scaling, sign convention
    /// `y_k >= 0` for `>=` rows and `y_k <= 0` for `<=` rows.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Final residuals of the scaled problem.
    pub metrics: SdpMetrics,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SdpMetrics {
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    /// Duality gap relative to `1 + |objective|`.
    pub relative_gap: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpSettings {
    pub max_iter: usize,
    /// Target for gap and residuals inside the loop.
    pub target_tol: f64,
    /// Gap accepted as optimal when progress stops.
    pub gap_tol: f64,
    /// Residual accepted as optimal when progress stops.
    pub feas_tol: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            max_iter: 150,
            target_tol: 1e-11,
            gap_tol: 1e-7,
            feas_tol: 1e-8,
        }
    }
}

pub fn solve_small_sdp(p: &SdpProblem) -> SdpSolution {
    solve_sdp_with(p, &SdpSettings::default())
}

/// Scaled real-embedded data.
struct RealSdp {
    n: usize,
    a: Vec<DMatrix<f64>>,
    /// Slack sign: `-1` for `>=` rows, `+1` for `<=` rows.
    sign: DVector<f64>,
    b: DVector<f64>,
    c: DMatrix<f64>,
    row_scale: Vec<f64>,
    obj_scale: f64,
    x_scale: f64,
}

impl RealSdp {
    fn new(p: &SdpProblem) -> Self {
        let x_scale = match p.trace_bound() {
            Some(t) if t > 0.0 => t,
            _ => 1.0,
        };
        let embed = |h: &HermitianMatrix| real_embed(h) * (0.5 * x_scale);
        let mut a = Vec::new();
        let mut row_scale = Vec::new();
        let m = p.constraints.len();
        let mut b = DVector::zeros(m);
        let mut sign = DVector::zeros(m);
        for (k, c) in p.constraints.iter().enumerate() {
            let ak = embed(&c.matrix);
            let nrm = ak.norm();
            let nrm = if nrm > 0.0 { nrm } else { 1.0 };
            a.push(ak / nrm);
            row_scale.push(nrm);
            b[k] = c.bound / nrm;
            sign[k] = match c.sense {
                Sense::Ge => -1.0,
                Sense::Le => 1.0,
            };
        }
        let c = embed(&p.objective);
        let cn = c.norm();
        let obj_scale = if cn > 0.0 { cn } else { 1.0 };
        RealSdp {
            n: 2 * p.dim(),
            a,
            sign,
            b,
            c: c / obj_scale,
            row_scale,
            obj_scale,
            x_scale,
        }
    }

    fn m(&self) -> usize {
        self.a.len()
    }

    fn apply(&self, x: &DMatrix<f64>, xl: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.m(), |k, _| self.a[k].dot(x) + self.sign[k] * xl[k])
    }

    fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (k, ak) in self.a.iter().enumerate() {
            out += ak * y[k];
        }
        out
    }
}

struct Iterate {
    x: DMatrix<f64>,
    s: DMatrix<f64>,
    y: DVector<f64>,
    xl: DVector<f64>,
    zl: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd: DMatrix<f64>,
    rdl: DVector<f64>,
    mu: f64,
    metrics: SdpMetrics,
}

fn residuals(d: &RealSdp, it: &Iterate) -> Residuals {
    let rp = &d.b - d.apply(&it.x, &it.xl);
    let rd = &d.c - &it.s - d.adjoint(&it.y);
    let rdl = -&it.zl - it.y.component_mul(&d.sign);
    let comp = it.x.dot(&it.s) + it.xl.dot(&it.zl);
    let mu = comp / (d.n + d.m()) as f64;
    let pobj = d.c.dot(&it.x);
    let dobj = d.b.dot(&it.y);
    let metrics = SdpMetrics {
        primal_infeasibility: rp.norm() / (1.0 + d.b.norm()),
        dual_infeasibility: (rd.norm_squared() + rdl.norm_squared()).sqrt() / (1.0 + d.c.norm()),
        relative_gap: (pobj - dobj).abs().max(comp.abs()) / (1.0 + pobj.abs()),
        complementarity: comp,
    };
    Residuals {
        rp,
        rd,
        rdl,
        mu,
        metrics,
    }
}

/// Largest `alpha` keeping `x + alpha dx` PSD, given the Cholesky factor of `x`.
fn psd_step(chol_x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let n = dx.nrows();
    let Some(left) = chol_x.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(m) = chol_x.solve_lower_triangular(&left.transpose()) else {
        return 0.0;
    };
    let sym = (&m + m.transpose()) * 0.5;
    let lmin = if n == 1 {
        sym[(0, 0)]
    } else {
        SymmetricEigen::new(sym).eigenvalues.min()
    };
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn ratio_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

/// Nesterov-Todd scaling `G` with `G^{-1} X G^{-T} = G^T S G = diag(d)`.
struct NtScaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
    chol_x: DMatrix<f64>,
    chol_s: DMatrix<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<NtScaling> {
    let lx = Cholesky::new(x.clone())?.l();
    let ls = Cholesky::new(s.clone())?.l();
    let svd = SVD::new(ls.transpose() * &lx, true, true);
    let v = svd.v_t.as_ref()?.transpose();
    let sig = svd.singular_values.clone();
    if sig.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&sig.map(|v| 1.0 / v.sqrt()));
    let sqrt = DMatrix::from_diagonal(&sig.map(f64::sqrt));
    let g = &lx * &v * inv_sqrt;
    let lx_inv = lx
        .clone()
        .solve_lower_triangular(&DMatrix::identity(x.nrows(), x.nrows()))?;
    let g_inv = sqrt * v.transpose() * lx_inv;
    let w = &g * g.transpose();
    Some(NtScaling {
        g,
        g_inv,
        w,
        d: sig,
        chol_x: lx,
        chol_s: ls,
    })
}

struct Direction {
    dx: DMatrix<f64>,
    ds: DMatrix<f64>,
    dy: DVector<f64>,
    dxl: DVector<f64>,
    dzl: DVector<f64>,
}

struct NewtonSystem<'a> {
    data: &'a RealSdp,
    nt: &'a NtScaling,
    /// `W A_j W` for every row.
    wa: Vec<DMatrix<f64>>,
    schur: Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> NewtonSystem<'a> {
    fn new(data: &'a RealSdp, nt: &'a NtScaling, it: &Iterate) -> Option<Self> {
        let m = data.m();
        let wa: Vec<DMatrix<f64>> = data.a.iter().map(|a| &nt.w * a * &nt.w).collect();
        let mut schur = DMatrix::zeros(m, m);
        for k in 0..m {
            for j in k..m {
                let v = data.a[k].dot(&wa[j]);
                schur[(k, j)] = v;
                schur[(j, k)] = v;
            }
            schur[(k, k)] += it.xl[k] / it.zl[k];
        }
        // Tiny regularization guards rank-deficient rows (duplicate constraints).
        let reg = 1e-14 * (1.0 + schur.diagonal().amax());
        for k in 0..m {
            schur[(k, k)] += reg;
        }
        let schur = Cholesky::new(schur)?;
        Some(Self {
            data,
            nt,
            wa,
            schur,
        })
    }

    /// Solve with complementarity targets: `rc` in scaled PSD space (already
    /// the right-hand side of the symmetrized equation) and `rcl` for slacks.
    fn solve(
        &self,
        it: &Iterate,
        res: &Residuals,
        rc: &DMatrix<f64>,
        rcl: &DVector<f64>,
    ) -> Direction {
        let d = self.data;
        let nt = self.nt;
        let n = d.n;
        let h = DMatrix::from_fn(n, n, |i, j| rc[(i, j)] / (nt.d[i] + nt.d[j]));
        let ghg = &nt.g * h * nt.g.transpose();
        let wrdw = &nt.w * &res.rd * &nt.w;
        let target = &ghg - &wrdw;
        let m = d.m();
        let rhs = DVector::from_fn(m, |k, _| {
            res.rp[k]
                - d.a[k].dot(&target)
                - d.sign[k] * (rcl[k] - it.xl[k] * res.rdl[k]) / it.zl[k]
        });
        let dy = self.schur.solve(&rhs);
        let ds = &res.rd - d.adjoint(&dy);
        let mut wdsw = wrdw.clone();
        for (k, wak) in self.wa.iter().enumerate() {
            wdsw -= wak * dy[k];
        }
        let dx = &ghg - wdsw;
        let dx = (&dx + dx.transpose()) * 0.5;
        let dzl = &res.rdl - dy.component_mul(&d.sign);
        let dxl = DVector::from_fn(m, |k, _| (rcl[k] - it.xl[k] * dzl[k]) / it.zl[k]);
        Direction {
            dx,
            ds,
            dy,
            dxl,
            dzl,
        }
    }
}

fn step_lengths(nt: &NtScaling, it: &Iterate, dir: &Direction) -> (f64, f64) {
    let ap = psd_step(&nt.chol_x, &dir.dx).min(ratio_step(&it.xl, &dir.dxl));
    let ad = psd_step(&nt.chol_s, &dir.ds).min(ratio_step(&it.zl, &dir.dzl));
    (ap, ad)
}

/// Checks whether the normalized dual iterate certifies primal infeasibility.
fn farkas_certificate(d: &RealSdp, y: &DVector<f64>) -> bool {
    let by = d.b.dot(y);
    if !(by > 0.0) {
        return false;
    }
    let yh = y / by;
    let slack_ok = yh
        .iter()
        .zip(d.sign.iter())
        .all(|(&v, &s)| s * v <= INFEASIBILITY_TOL);
    if !slack_ok {
        return false;
    }
    let aty = d.adjoint(&yh);
    let lmax = if d.n == 1 {
        aty[(0, 0)]
    } else {
        SymmetricEigen::new(aty).eigenvalues.max()
    };
    lmax <= INFEASIBILITY_TOL
}

pub fn solve_sdp_with(p: &SdpProblem, settings: &SdpSettings) -> SdpSolution {
    let data = RealSdp::new(p);
    let n = data.n;
    let m = data.m();

    // A `<=` row with a PSD-definite matrix and a negative bound admits no PSD W.
    let trivially_infeasible = p.constraints.iter().any(|c| {
        let zero_row = c.matrix.frobenius_norm() == 0.0;
        match c.sense {
            Sense::Ge => zero_row && c.bound > 0.0,
            Sense::Le => zero_row && c.bound < 0.0,
        }
    }) || p.trace_bound().is_some_and(|t| t < 0.0);
    if trivially_infeasible {
        return finish(
            p,
            &data,
            None,
            SdpStatus::Infeasible,
            0,
            SdpMetrics::default(),
        );
    }

    let max_b = data
        .b
        .iter()
        .map(|v| (1.0 + v.abs()) / 2.0)
        .fold(0.0, f64::max);
    let xi = 10f64.max((n as f64).sqrt()).max(n as f64 * max_b);
    let zeta = 10f64.max((n as f64).sqrt()).max(data.c.norm());
    let mut it = Iterate {
        x: DMatrix::identity(n, n) * xi,
        s: DMatrix::identity(n, n) * zeta,
        y: DVector::zeros(m),
        xl: DVector::from_element(m, xi),
        zl: DVector::from_element(m, zeta),
    };

    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    let mut res = residuals(&data, &it);
    for iter in 0..settings.max_iter {
        iterations = iter;
        let met = res.metrics;
        if met.primal_infeasibility < settings.target_tol
            && met.dual_infeasibility < settings.target_tol
            && met.relative_gap < settings.target_tol
        {
            status = SdpStatus::Optimal;
            break;
        }
        if farkas_certificate(&data, &it.y) {
            status = SdpStatus::Infeasible;
            break;
        }
        let Some(nt) = nt_scaling(&it.x, &it.s) else {
            break;
        };
        let Some(sys) = NewtonSystem::new(&data, &nt, &it) else {
            break;
        };

        // Predictor.
        let d2 = DMatrix::from_diagonal(&nt.d.map(|v| -2.0 * v * v));
        let rcl_aff = -it.xl.component_mul(&it.zl);
        let aff = sys.solve(&it, &res, &d2, &rcl_aff);
        let (ap, ad) = step_lengths(&nt, &it, &aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let x_aff = &it.x + &aff.dx * ap;
        let s_aff = &it.s + &aff.ds * ad;
        let xl_aff = &it.xl + &aff.dxl * ap;
        let zl_aff = &it.zl + &aff.dzl * ad;
        let mu_aff = (x_aff.dot(&s_aff) + xl_aff.dot(&zl_aff)) / (n + m) as f64;
        let sigma = if res.mu > 0.0 {
            (mu_aff / res.mu).max(0.0).powi(3).min(1.0)
        } else {
            0.0
        };

        // Corrector with the second-order term in scaled space.
        let dxs = &nt.g_inv * &aff.dx * nt.g_inv.transpose();
        let dss = nt.g.transpose() * &aff.ds * &nt.g;
        let cross = &dxs * &dss;
        let mut rc = -(&cross + cross.transpose());
        for i in 0..n {
            rc[(i, i)] += 2.0 * sigma * res.mu - 2.0 * nt.d[i] * nt.d[i];
        }
        let rcl = DVector::from_fn(m, |k, _| {
            sigma * res.mu - it.xl[k] * it.zl[k] - aff.dxl[k] * aff.dzl[k]
        });
        let dir = sys.solve(&it, &res, &rc, &rcl);
        let (ap, ad) = step_lengths(&nt, &it, &dir);
        let gamma = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
        let next = Iterate {
            x: sym(&(&it.x + &dir.dx * ap)),
            s: sym(&(&it.s + &dir.ds * ad)),
            y: &it.y + &dir.dy * ad,
            xl: &it.xl + &dir.dxl * ap,
            zl: &it.zl + &dir.dzl * ad,
        };
        it = next;
        res = residuals(&data, &it);
        iterations = iter + 1;
    }

    let met = res.metrics;
    if status == SdpStatus::MaxIterations {
        if farkas_certificate(&data, &it.y) {
            status = SdpStatus::Infeasible;
        } else if met.primal_infeasibility < settings.feas_tol
            && met.dual_infeasibility < settings.feas_tol
            && met.relative_gap < settings.gap_tol
        {
            status = SdpStatus::Optimal;
        }
    }
    finish(p, &data, Some(&it), status, iterations, met)
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn finish(
    p: &SdpProblem,
    data: &RealSdp,
    it: Option<&Iterate>,
    status: SdpStatus,
    iterations: usize,
    metrics: SdpMetrics,
) -> SdpSolution {
    let dim = p.dim();
    let (w, duals) = match it {
        Some(it) => {
            let w = real_compress(&it.x).scale(data.x_scale);
            let duals = (0..data.m())
                .map(|k| it.y[k] * data.obj_scale / data.row_scale[k])
                .collect();
            (w, duals)
        }
        None => (HermitianMatrix::zeros(dim), vec![0.0; p.constraints.len()]),
    };
    let objective_value = p.objective_value(&w);
    SdpSolution {
        w,
        objective_value,
        status,
        duals,
        iterations,
        metrics,
    }
}
