//! Run configuration: flat `key = value` text in user units.
//!
//! Powers are in dBm, SNR thresholds in dB, and the per-element control
//! power in microwatts. Everything is converted to linear SI units once,
//! here. Blank lines and `#` comments are ignored. Keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `n` | transmit antennas | 10 |
//! | `i_r` | RIS elements | 100 |
//! | `alpha` | reflection efficiency | 1 |
//! | `eta` | harvesting efficiency | 1 |
//! | `u_uw` | control power per reflecting element, µW | 15 |
//! | `l` | active symbols per backscatter symbol | 50 |
//! | `noise_dbm` | noise power | -45 |
//! | `p_bgt_dbm` | transmit budget | 30 |
//! | `gamma_a_db` | active-link SNR target | 15 |
//! | `gamma_b_db` | backscatter SNR target | 10 |
//! | `d_ar`, `d_rc`, `d_ac` | link distances, m | 15, 30, 40 |
//! | `rician_k` | Rician K-factor (linear) | 3 |
//! | `pathloss_ref_db` | path gain at 1 m | -20 |
//! | `exp_ris_links`, `exp_direct` | path-loss exponents | 2.2, 2.5 |
//! | `seed` | base channel seed | 0 |
//! | `seeds` | instances per sweep point | 1 |
//! | `max_bcd_iters` | outer iteration cap | 50 |
//! | `objective_tol`, `objective_rel_tol` | outer stop rule | 1e-9, 1e-4 |
//! | `admm_max_iters` | ADMM iteration cap per run | 5000 |
//! | `rho` | `auto` or a fixed penalty in watts | auto |
//! | `sweep` | `AXIS=v1,v2,...` | none |

use rispower::units::{db_to_linear, dbm_to_watts};
use rispower::{Error, FadingConfig, Geometry, Result, Rho, SolveConfig, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    GammaADb,
    GammaBDb,
    N,
    IR,
}

impl Axis {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gamma_a_db" => Some(Axis::GammaADb),
            "gamma_b_db" => Some(Axis::GammaBDb),
            "n" => Some(Axis::N),
            "i_r" => Some(Axis::IR),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Axis::GammaADb => "gamma_A_db",
            Axis::GammaBDb => "gamma_B_db",
            Axis::N => "N",
            Axis::IR => "I_R",
        }
    }

    /// `params` with this axis set to `value` (user units).
    pub fn apply(&self, params: &SystemParams, value: f64) -> SystemParams {
        let mut p = params.clone();
        match self {
            Axis::GammaADb => p.gamma_a = db_to_linear(value),
            Axis::GammaBDb => p.gamma_b = db_to_linear(value),
            Axis::N => p.n = value as usize,
            Axis::IR => p.i_r = value as usize,
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl Sweep {
    /// Parse `AXIS=v1,v2,...`.
    pub fn parse(spec: &str) -> std::result::Result<Self, String> {
        let (axis, values) = spec
            .split_once('=')
            .ok_or_else(|| format!("sweep must look like AXIS=v1,v2,..., found `{spec}`"))?;
        let axis = Axis::parse(axis).ok_or_else(|| {
            format!(
                "unknown sweep axis `{}` (expected gamma_A_db, gamma_B_db, N or I_R)",
                axis.trim()
            )
        })?;
        let values = values
            .split(',')
            .map(|v| {
                let x: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| format!("invalid sweep value `{}`", v.trim()))?;
                let integral = matches!(axis, Axis::N | Axis::IR);
                if !x.is_finite() || (integral && (x < 1.0 || x.fract() != 0.0)) {
                    return Err(format!("invalid value `{}` for {}", v.trim(), axis.name()));
                }
                Ok(x)
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        Ok(Self { axis, values })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: SystemParams,
    pub geometry: Geometry,
    pub fading: FadingConfig,
    pub solve: SolveConfig,
    pub seed: u64,
    pub seeds: u64,
    pub sweep: Option<Sweep>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            geometry: Geometry::default(),
            fading: FadingConfig::default(),
            solve: SolveConfig::default(),
            seed: 0,
            seeds: 1,
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|message| Error::Parse {
                    line: i + 1,
                    message,
                })?;
        }
        Ok(cfg)
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let real = || -> std::result::Result<f64, String> {
            value
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{key}` expects a number, found `{value}`"))
        };
        let count = || -> std::result::Result<u64, String> {
            value
                .parse::<u64>()
                .map_err(|_| format!("`{key}` expects a nonnegative integer, found `{value}`"))
        };
        let p = &mut self.params;
        match key {
            "n" => p.n = count()? as usize,
            "i_r" => p.i_r = count()? as usize,
            "alpha" => p.alpha = real()?,
            "eta" => p.eta = real()?,
            "u_uw" => p.u = real()? * 1e-6,
            "l" => {
                p.l = u32::try_from(count()?).map_err(|_| format!("`l` is too large: {value}"))?
            }
            "noise_dbm" => p.sigma2 = dbm_to_watts(real()?),
            "p_bgt_dbm" => p.p_bgt = dbm_to_watts(real()?),
            "gamma_a_db" => p.gamma_a = db_to_linear(real()?),
            "gamma_b_db" => p.gamma_b = db_to_linear(real()?),
            "d_ar" => self.geometry.d_ar = real()?,
            "d_rc" => self.geometry.d_rc = real()?,
            "d_ac" => self.geometry.d_ac = real()?,
            "rician_k" => self.fading.rician_k = real()?,
            "pathloss_ref_db" => self.fading.pathloss_ref_db = real()?,
            "exp_ris_links" => self.fading.exp_ris_links = real()?,
            "exp_direct" => self.fading.exp_direct = real()?,
            "seed" => self.seed = count()?,
            "seeds" => self.seeds = count()?,
            "max_bcd_iters" => self.solve.max_bcd_iters = count()? as usize,
            "objective_tol" => self.solve.objective_tol = real()?,
            "objective_rel_tol" => self.solve.objective_rel_tol = real()?,
            "admm_max_iters" => self.solve.admm.max_iters = count()? as usize,
            "rho" => {
                self.solve.admm.rho = if value.eq_ignore_ascii_case("auto") {
                    Rho::Auto
                } else {
                    Rho::Fixed(real()?)
                }
            }
            "sweep" => self.sweep = Some(Sweep::parse(value)?),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Check every parameter block, including each sweep point.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.geometry.validate()?;
        self.fading.validate()?;
        self.solve.validate()?;
        if let Some(sweep) = &self.sweep {
            for &v in &sweep.values {
                sweep.axis.apply(&self.params, v).validate()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_scenario() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.params, SystemParams::default());
        assert_eq!(cfg.seeds, 1);
    }

    #[test]
    fn units_are_converted_once() {
        let cfg =
            RunConfig::parse("p_bgt_dbm = 20\nu_uw = 10 # microwatts\ngamma_a_db=20\n").unwrap();
        assert!((cfg.params.p_bgt - 0.1).abs() < 1e-15);
        assert!((cfg.params.u - 1e-5).abs() < 1e-20);
        assert!((cfg.params.gamma_a - 100.0).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_the_line() {
        let err = RunConfig::parse("n = 4\n\n# ok\nbogus = 1\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 4,
                message: "unknown key `bogus`".into()
            }
        );
        let err = RunConfig::parse("n = four").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(matches!(
            RunConfig::parse("just text"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn sweep_specs() {
        let s = Sweep::parse("gamma_A_db=5,10,15").unwrap();
        assert_eq!(s.axis, Axis::GammaADb);
        assert_eq!(s.values, vec![5.0, 10.0, 15.0]);
        assert!(Sweep::parse("N=4.5").is_err());
        assert!(Sweep::parse("P=1").is_err());
        assert!(Sweep::parse("I_R").is_err());
        let cfg = RunConfig::parse("sweep = I_R=32,64").unwrap();
        assert_eq!(cfg.sweep.unwrap().axis, Axis::IR);
    }

    #[test]
    fn rho_accepts_auto_or_watts() {
        let cfg = RunConfig::parse("rho = 0.5").unwrap();
        assert_eq!(cfg.solve.admm.rho, Rho::Fixed(0.5));
        let cfg = RunConfig::parse("rho = Auto").unwrap();
        assert_eq!(cfg.solve.admm.rho, Rho::Auto);
    }
}
