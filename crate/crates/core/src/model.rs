//! System parameters, candidate designs and the physical quantities of the
//! power-minimization problem: active-link SNR, backscatter SNR and the net
//! RIS power (control cost minus harvested energy).

use crate::channel::ChannelSet;
use crate::units::{db_to_linear, dbm_to_watts};
use crate::{CVector, Error, Result, C64};

/// Scalars of the design problem, in linear SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Transmit antennas.
    pub n: usize,
    /// RIS elements.
    pub i_r: usize,
    /// Reflection efficiency.
    pub alpha: f64,
    /// Energy-harvesting efficiency.
    pub eta: f64,
    /// Control power per reflecting element, watts.
    pub u: f64,
    /// Active symbols per backscatter symbol.
    pub l: u32,
    /// Noise power, watts.
    pub sigma2: f64,
    /// Transmit power budget, watts.
    pub p_bgt: f64,
    /// Active-link SNR requirement (linear).
    pub gamma_a: f64,
    /// Backscatter SNR requirement (linear).
    pub gamma_b: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n: 10,
            i_r: 100,
            alpha: 1.0,
            eta: 1.0,
            u: 15e-6,
            l: 50,
            sigma2: dbm_to_watts(-45.0),
            p_bgt: dbm_to_watts(30.0),
            gamma_a: db_to_linear(15.0),
            gamma_b: db_to_linear(10.0),
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Precondition(format!("invalid parameter: {what}")));
        if self.n == 0 {
            return bad("N must be positive");
        }
        if self.i_r == 0 {
            return bad("I_R must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if self.l == 0 {
            return bad("L must be at least 1");
        }
        for (name, v) in [
            ("u", self.u),
            ("sigma2", self.sigma2),
            ("P_bgt", self.p_bgt),
            ("gamma_A", self.gamma_a),
            ("gamma_B", self.gamma_b),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive and finite"));
            }
        }
        Ok(())
    }

    /// `sigma^2 gamma_A`: required `|v^H w|^2` on both active-link constraints.
    pub fn active_threshold(&self) -> f64 {
        self.sigma2 * self.gamma_a
    }

    /// `sigma^2 gamma_B / (alpha L)`: required `|h_r^H S Psi G w|^2`.
    pub fn backscatter_threshold(&self) -> f64 {
        self.sigma2 * self.gamma_b / (self.alpha * self.l as f64)
    }
}

/// A candidate solution: transmit beamformer, element modes and phases.
///
/// `psi[i]` is kept at 1 for harvesting elements; it never enters any formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub w: CVector,
    /// `true` = reflecting, `false` = harvesting.
    pub s: Vec<bool>,
    pub psi: CVector,
}

impl Design {
    pub fn new(w: CVector, s: Vec<bool>, psi: CVector) -> Result<Self> {
        if s.len() != psi.len() {
            return Err(Error::DimensionMismatch {
                what: "phase vector",
                expected: s.len(),
                found: psi.len(),
            });
        }
        if let Some(bad) = psi.iter().find(|p| (p.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::Precondition(format!(
                "phase shift {bad} is not unit modulus"
            )));
        }
        Ok(Self { w, s, psi })
    }

    /// All elements reflecting with zero phase.
    pub fn all_reflect(w: CVector, i_r: usize) -> Self {
        Self {
            w,
            s: vec![true; i_r],
            psi: CVector::from_element(i_r, C64::new(1.0, 0.0)),
        }
    }

    pub fn reflecting_count(&self) -> usize {
        self.s.iter().filter(|&&b| b).count()
    }

    pub fn transmit_power(&self) -> f64 {
        self.w.norm_squared()
    }

    fn check(&self, ch: &ChannelSet, params: &SystemParams) -> Result<()> {
        ch.check(params)?;
        if self.w.len() != params.n {
            return Err(Error::DimensionMismatch {
                what: "beamformer w",
                expected: params.n,
                found: self.w.len(),
            });
        }
        if self.s.len() != params.i_r || self.psi.len() != params.i_r {
            return Err(Error::DimensionMismatch {
                what: "mode/phase vectors",
                expected: params.i_r,
                found: self.s.len().min(self.psi.len()),
            });
        }
        Ok(())
    }
}

/// Per-element quantities under a fixed beamformer.
#[derive(Debug, Clone)]
pub struct EffectiveVectors {
    /// Cascaded channel `a_i = conj(h_r,i) g_i`.
    pub a: CVector,
    /// Incident signal `g = G w`.
    pub g: CVector,
}

impl EffectiveVectors {
    pub fn new(ch: &ChannelSet, w: &CVector) -> Self {
        let g = &ch.g * w;
        let a = CVector::from_fn(g.len(), |i, _| ch.h_r[i].conj() * g[i]);
        Self { a, g }
    }
}

/// `h_r^H S Psi G w`, the reflected component at the receiver.
fn reflected(design: &Design, eff: &EffectiveVectors) -> C64 {
    design
        .s
        .iter()
        .zip(design.psi.iter())
        .zip(eff.a.iter())
        .filter(|((&on, _), _)| on)
        .map(|((_, psi), a)| psi * a)
        .sum()
}

/// Active-link SNR for backscatter symbol `c` (+1 or -1).
pub fn snr_active(design: &Design, ch: &ChannelSet, params: &SystemParams, c: f64) -> Result<f64> {
    design.check(ch, params)?;
    let eff = EffectiveVectors::new(ch, &design.w);
    let direct = ch.h_d.dotc(&design.w);
    let total = direct + reflected(design, &eff) * (c * params.alpha.sqrt());
    Ok(total.norm_sqr() / params.sigma2)
}

/// Backscatter SNR `(alpha L / sigma^2) |h_r^H S Psi G w|^2`.
pub fn snr_backscatter(design: &Design, ch: &ChannelSet, params: &SystemParams) -> Result<f64> {
    design.check(ch, params)?;
    let eff = EffectiveVectors::new(ch, &design.w);
    Ok(params.alpha * params.l as f64 / params.sigma2 * reflected(design, &eff).norm_sqr())
}

/// Net RIS power in watts: `u` per reflecting element minus `eta |g_i|^2`
/// harvested by every other element. Negative means net energy gain.
pub fn ris_power(design: &Design, ch: &ChannelSet, params: &SystemParams) -> Result<f64> {
    design.check(ch, params)?;
    let g = &ch.g * &design.w;
    Ok(ris_power_from_incident(&design.s, &g, params))
}

pub(crate) fn ris_power_from_incident(s: &[bool], g: &CVector, params: &SystemParams) -> f64 {
    let mut cost = 0.0;
    let mut harvested = 0.0;
    for (&on, gi) in s.iter().zip(g.iter()) {
        if on {
            cost += params.u;
        } else {
            harvested += gi.norm_sqr();
        }
    }
    cost - params.eta * harvested
}

/// Tolerances for [`feasibility_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityTol {
    /// Relative slack on SNR constraints and on unit modulus.
    pub snr_rel: f64,
    /// Absolute slack on the power budget, watts.
    pub power_abs: f64,
}

impl Default for FeasibilityTol {
    fn default() -> Self {
        Self {
            snr_rel: 1e-6,
            power_abs: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub pass: bool,
    /// Signed slack; negative means violated.
    pub margin: f64,
}

/// Constraint-by-constraint status of a design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// Active SNR with `c = +1`.
    pub c1_plus: ConstraintCheck,
    /// Active SNR with `c = -1`.
    pub c1_minus: ConstraintCheck,
    pub c2: ConstraintCheck,
    pub c3: ConstraintCheck,
    pub c4: ConstraintCheck,
    pub c5: ConstraintCheck,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }

    /// Only the SNR constraints, i.e. what depends on the modes and phases.
    pub fn snr_feasible(&self) -> bool {
        self.c1_plus.pass && self.c1_minus.pass && self.c2.pass
    }

    pub fn checks(&self) -> [ConstraintCheck; 6] {
        [
            self.c1_plus,
            self.c1_minus,
            self.c2,
            self.c3,
            self.c4,
            self.c5,
        ]
    }
}

pub fn feasibility_report(
    design: &Design,
    ch: &ChannelSet,
    params: &SystemParams,
    tol: &FeasibilityTol,
) -> Result<FeasibilityReport> {
    let snr = |value: f64, target: f64| ConstraintCheck {
        pass: value >= target * (1.0 - tol.snr_rel),
        margin: value - target,
    };
    let c1_plus = snr(snr_active(design, ch, params, 1.0)?, params.gamma_a);
    let c1_minus = snr(snr_active(design, ch, params, -1.0)?, params.gamma_a);
    let c2 = snr(snr_backscatter(design, ch, params)?, params.gamma_b);
    let power_margin = params.p_bgt - design.transmit_power();
    let c3 = ConstraintCheck {
        pass: power_margin >= -tol.power_abs,
        margin: power_margin,
    };
    let modulus_err = design
        .psi
        .iter()
        .map(|p| (p.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let c4 = ConstraintCheck {
        pass: modulus_err <= tol.snr_rel,
        margin: -modulus_err,
    };
    // Modes are stored as booleans, so binarity holds by construction.
    let c5 = ConstraintCheck {
        pass: true,
        margin: 0.0,
    };
    Ok(FeasibilityReport {
        c1_plus,
        c1_minus,
        c2,
        c3,
        c4,
        c5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::tests::random_channels;
    use crate::CMatrix;

    fn random_design(params: &SystemParams, seed: u64) -> Design {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w = CVector::from_fn(params.n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let s = (0..params.i_r).map(|_| rng.random::<bool>()).collect();
        let psi = CVector::from_fn(params.i_r, |_, _| {
            C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
        });
        Design::new(w, s, psi).unwrap()
    }

    fn small_params() -> SystemParams {
        SystemParams {
            n: 3,
            i_r: 4,
            ..SystemParams::default()
        }
    }

    #[test]
    fn no_reflection_ignores_symbol() {
        let p = small_params();
        let ch = random_channels(&p, 1);
        let mut d = random_design(&p, 2);
        d.s = vec![false; p.i_r];
        let plus = snr_active(&d, &ch, &p, 1.0).unwrap();
        let minus = snr_active(&d, &ch, &p, -1.0).unwrap();
        let direct = ch.h_d.dotc(&d.w).norm_sqr() / p.sigma2;
        assert!((plus - direct).abs() <= 1e-12 * direct);
        assert_eq!(plus, minus);
        assert_eq!(snr_backscatter(&d, &ch, &p).unwrap(), 0.0);
    }

    #[test]
    fn zero_beam_gives_zero() {
        let p = small_params();
        let ch = random_channels(&p, 1);
        let mut d = random_design(&p, 3);
        d.w = CVector::zeros(p.n);
        assert_eq!(snr_active(&d, &ch, &p, 1.0).unwrap(), 0.0);
        d.s = vec![false; p.i_r];
        assert_eq!(ris_power(&d, &ch, &p).unwrap(), 0.0);
    }

    /// Expands v^H (w w^H) v with explicit matrices for the lifted vectors.
    #[test]
    fn active_snr_matches_quadratic_form() {
        let p = small_params();
        let ch = random_channels(&p, 4);
        let d = random_design(&p, 5);
        let s_mat = CMatrix::from_diagonal(&CVector::from_iterator(
            p.i_r,
            d.s.iter()
                .map(|&b| C64::new(if b { 1.0 } else { 0.0 }, 0.0)),
        ));
        let psi_mat = CMatrix::from_diagonal(&d.psi);
        let ww = &d.w * d.w.adjoint();
        for c in [1.0, -1.0] {
            let v = &ch.h_d
                + ch.g.adjoint()
                    * psi_mat.adjoint()
                    * s_mat.adjoint()
                    * &ch.h_r
                    * C64::new(c * p.alpha.sqrt(), 0.0);
            let quad = (v.adjoint() * &ww * &v)[(0, 0)].re / p.sigma2;
            let direct = snr_active(&d, &ch, &p, c).unwrap();
            assert!((quad - direct).abs() <= 1e-10 * quad.abs());
        }
    }

    #[test]
    fn single_reflecting_element() {
        let p = small_params();
        let ch = random_channels(&p, 6);
        let mut d = random_design(&p, 7);
        d.s = vec![false, false, true, false];
        let g = &ch.g * &d.w;
        let expected = p.alpha * p.l as f64 / p.sigma2 * ch.h_r[2].norm_sqr() * g[2].norm_sqr();
        let got = snr_backscatter(&d, &ch, &p).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn backscatter_scalar_accumulation() {
        let p = small_params();
        let ch = random_channels(&p, 8);
        let d = random_design(&p, 9);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..p.i_r {
            if d.s[i] {
                let gi: C64 = (0..p.n).map(|n| ch.g[(i, n)] * d.w[n]).sum();
                acc += d.psi[i] * ch.h_r[i].conj() * gi;
            }
        }
        let expected = p.alpha * p.l as f64 / p.sigma2 * acc.norm_sqr();
        let got = snr_backscatter(&d, &ch, &p).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.max(1e-300));
    }

    #[test]
    fn ris_power_all_reflecting() {
        let p = small_params();
        let ch = random_channels(&p, 10);
        let mut d = random_design(&p, 11);
        d.s = vec![true; p.i_r];
        let e = ris_power(&d, &ch, &p).unwrap();
        assert!((e - p.u * p.i_r as f64).abs() < 1e-18);
    }

    #[test]
    fn ris_power_trace_form() {
        let p = small_params();
        let ch = random_channels(&p, 12);
        let d = random_design(&p, 13);
        let off = CMatrix::from_diagonal(&CVector::from_iterator(
            p.i_r,
            d.s.iter()
                .map(|&b| C64::new(if b { 0.0 } else { 1.0 }, 0.0)),
        ));
        let inner = &off * &ch.g * &d.w * d.w.adjoint() * ch.g.adjoint() * &off;
        let trace_form = p.u * d.reflecting_count() as f64 - p.eta * inner.trace().re;
        let scalar = ris_power(&d, &ch, &p).unwrap();
        assert!((trace_form - scalar).abs() <= 1e-12 * scalar.abs());
    }

    #[test]
    fn c2_fails_without_reflection() {
        let p = small_params();
        let ch = random_channels(&p, 14);
        let mut d = random_design(&p, 15);
        d.s = vec![false; p.i_r];
        let r = feasibility_report(&d, &ch, &p, &FeasibilityTol::default()).unwrap();
        assert!(!r.c2.pass);
        assert_eq!(r.c2.margin, -p.gamma_b);
        assert!(!r.feasible());
    }

    #[test]
    fn c3_on_budget() {
        let p = small_params();
        let ch = random_channels(&p, 16);
        let mut d = random_design(&p, 17);
        d.w *= C64::new((p.p_bgt / d.w.norm_squared()).sqrt(), 0.0);
        let r = feasibility_report(&d, &ch, &p, &FeasibilityTol::default()).unwrap();
        assert!(r.c3.pass);
        assert!(r.c3.margin.abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let p = small_params();
        let ch = random_channels(&p, 18);
        let mut d = random_design(&p, 19);
        d.w = CVector::zeros(p.n + 1);
        assert!(matches!(
            snr_active(&d, &ch, &p, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_unit_phase() {
        let psi = CVector::from_element(2, C64::new(0.5, 0.0));
        assert!(Design::new(CVector::zeros(1), vec![true, false], psi).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn common_phase_leaves_backscatter_snr(seed in 0u64..10_000, phi in 0.0f64..std::f64::consts::TAU) {
                let p = small_params();
                let ch = random_channels(&p, seed);
                let d = random_design(&p, seed + 1);
                let mut rotated = d.clone();
                let rot = C64::from_polar(1.0, phi);
                for (i, on) in d.s.iter().enumerate() {
                    if *on {
                        rotated.psi[i] *= rot;
                    }
                }
                let a = snr_backscatter(&d, &ch, &p).unwrap();
                let b = snr_backscatter(&rotated, &ch, &p).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
            }

            #[test]
            fn sign_absorbed_by_phase(seed in 0u64..10_000) {
                let p = small_params();
                let ch = random_channels(&p, seed);
                let d = random_design(&p, seed + 7);
                let mut flipped = d.clone();
                flipped.psi = -&d.psi;
                let a = snr_active(&flipped, &ch, &p, 1.0).unwrap();
                let b = snr_active(&d, &ch, &p, -1.0).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
            }

            #[test]
            fn ris_power_ignores_phases_and_receiver_channels(seed in 0u64..10_000) {
                let p = small_params();
                let ch = random_channels(&p, seed);
                let d = random_design(&p, seed + 3);
                let other = random_design(&p, seed + 4);
                let mut changed = d.clone();
                changed.psi = other.psi.clone();
                let mut ch2 = ch.clone();
                ch2.h_d = CVector::zeros(p.n);
                ch2.h_r = CVector::zeros(p.i_r);
                let a = ris_power(&d, &ch, &p).unwrap();
                let b = ris_power(&changed, &ch2, &p).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
