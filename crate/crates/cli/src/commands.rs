use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rispower::channel::derived_seed;
use rispower::io::{channels_to_string, design_to_string, fmt_f64, parse_channels, trace_to_csv};
use rispower::oracle::{baseline_all_reflect, tiny_brute_force, GridSpec};
use rispower::{generate_channels, solve_p, ChannelSet, Error, SolveStatus, SystemParams};

use crate::config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARSE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_MAX_ITERS: u8 = 3;
pub const EXIT_TOO_LARGE: u8 = 4;
/// Solver or I/O failure not covered by the codes above.
pub const EXIT_FAILURE: u8 = 5;

pub const SWEEP_HEADER: &str = "# rispower-sweep v1";
pub const COMPARE_HEADER: &str = "# rispower-compare v1";

/// What a command produced: text for stdout, text for stderr, exit code.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: u8,
}

impl Outcome {
    fn fail(code: u8, message: impl std::fmt::Display) -> Self {
        Self {
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
            code,
        }
    }
}

fn instance(cfg: &RunConfig, params: &SystemParams, seed: u64) -> rispower::Result<ChannelSet> {
    generate_channels(params, &cfg.geometry, &cfg.fading.with_seed(seed))
}

fn write_file(path: &Path, text: &str) -> Result<(), Outcome> {
    std::fs::write(path, text).map_err(|e| {
        Outcome::fail(
            EXIT_FAILURE,
            format!("cannot write {}: {e}", path.display()),
        )
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::MaxIters => EXIT_MAX_ITERS,
        SolveStatus::InfeasibleInstance => EXIT_INFEASIBLE,
    }
}

/// Solve one instance. With `out`, writes `<out>.design`, `<out>.trace.csv`
/// and `<out>.channels`; otherwise the trace goes to stdout.
pub fn cmd_solve(
    cfg: &RunConfig,
    channels: Option<&Path>,
    out: Option<&Path>,
    oracle: bool,
) -> Outcome {
    let params = &cfg.params;
    let ch = match channels {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    return Outcome::fail(
                        EXIT_FAILURE,
                        format!("cannot read {}: {e}", path.display()),
                    )
                }
            };
            match parse_channels(&text).and_then(|ch| ch.check(params).map(|_| ch)) {
                Ok(ch) => ch,
                Err(e) => return Outcome::fail(EXIT_PARSE, format!("{}: {e}", path.display())),
            }
        }
        None => match instance(cfg, params, cfg.seed) {
            Ok(ch) => ch,
            Err(e) => return Outcome::fail(EXIT_PARSE, e),
        },
    };
    let sol = match solve_p(&ch, params, &cfg.solve) {
        Ok(sol) => sol,
        Err(Error::InfeasibleInstance) => {
            return Outcome {
                stdout: "status=infeasible_instance\n".into(),
                stderr: "error: no feasible beamformer with every element reflecting\n".into(),
                code: EXIT_INFEASIBLE,
            }
        }
        Err(e) => return Outcome::fail(EXIT_FAILURE, e),
    };

    let mut o = Outcome {
        code: status_code(sol.trace.status),
        ..Outcome::default()
    };
    let summary = format!(
        "status={} E_min_watts={} outer_iters={} reflecting={}\n",
        sol.trace.status,
        fmt_f64(sol.e_min),
        sol.trace.records.len(),
        sol.design.reflecting_count()
    );
    let trace = trace_to_csv(&sol.trace);
    match out {
        Some(prefix) => {
            let files = [
                (".design", design_to_string(&sol.design)),
                (".trace.csv", trace),
                (".channels", channels_to_string(&ch)),
            ];
            for (suffix, text) in &files {
                if let Err(fail) = write_file(&with_suffix(prefix, suffix), text) {
                    return fail;
                }
            }
            o.stdout.push_str(&summary);
        }
        None => {
            o.stderr.push_str(&summary);
            o.stdout.push_str(&trace);
        }
    }
    if oracle {
        match baseline_all_reflect(&ch, params) {
            Ok((_, e)) => {
                let _ = writeln!(o.stderr, "baseline_all_reflect_watts={}", fmt_f64(e));
            }
            Err(e) => {
                let _ = writeln!(o.stderr, "baseline_all_reflect failed: {e}");
            }
        }
        if params.i_r <= 3 {
            match tiny_brute_force(&ch, params, &GridSpec::brute_force()) {
                Ok(bf) => {
                    let _ = writeln!(o.stderr, "brute_force_watts={}", fmt_f64(bf.e_min));
                }
                Err(e) => {
                    let _ = writeln!(o.stderr, "brute force failed: {e}");
                }
            }
        }
    }
    o
}

struct SweepRow {
    value: f64,
    seed: u64,
    e_min: Option<f64>,
    status: String,
    outer_iters: usize,
    wall_ms: f64,
}

/// One row per (axis value, seed), solved in parallel and written in that
/// order. Row failures are reported in the status column.
pub fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>) -> Outcome {
    let Some(sweep) = &cfg.sweep else {
        return Outcome::fail(
            EXIT_PARSE,
            "sweep needs --sweep AXIS=v1,v2,... or a `sweep` key",
        );
    };
    let jobs: Vec<(f64, u64)> = sweep
        .values
        .iter()
        .flat_map(|&v| (0..cfg.seeds).map(move |i| (v, derived_seed(cfg.seed, i))))
        .collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(value, seed)| {
            let params = sweep.axis.apply(&cfg.params, value);
            let clock = Instant::now();
            let result =
                instance(cfg, &params, seed).and_then(|ch| solve_p(&ch, &params, &cfg.solve));
            let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
            let (e_min, status, outer_iters) = match result {
                Ok(sol) => (
                    Some(sol.e_min),
                    sol.trace.status.to_string(),
                    sol.trace.records.len(),
                ),
                Err(Error::InfeasibleInstance) => {
                    (None, SolveStatus::InfeasibleInstance.to_string(), 0)
                }
                Err(_) => (None, "error".to_string(), 0),
            };
            SweepRow {
                value,
                seed,
                e_min,
                status,
                outer_iters,
                wall_ms,
            }
        })
        .collect();

    let mut csv = format!(
        "{SWEEP_HEADER}\n{},seed,E_min_watts,status,outer_iters,wall_ms\n",
        sweep.axis.name()
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.3}",
            r.value,
            r.seed,
            r.e_min.map(fmt_f64).unwrap_or_default(),
            r.status,
            r.outer_iters,
            r.wall_ms
        );
    }
    emit(csv, out)
}

/// Heuristic against exhaustive search, per seed. Only for `I_R <= 3`.
pub fn cmd_compare(cfg: &RunConfig, out: Option<&Path>) -> Outcome {
    let params = &cfg.params;
    if params.i_r > 3 {
        return Outcome::fail(
            EXIT_TOO_LARGE,
            format!(
                "compare enumerates every design and is limited to I_R <= 3, got {}",
                params.i_r
            ),
        );
    }
    let grid = GridSpec::brute_force();
    let seeds: Vec<u64> = (0..cfg.seeds).map(|i| derived_seed(cfg.seed, i)).collect();
    let rows: Vec<String> = seeds
        .iter()
        .map(|&seed| {
            let ch = match instance(cfg, params, seed) {
                Ok(ch) => ch,
                Err(_) => return format!("{seed},,,,error"),
            };
            let solved = solve_p(&ch, params, &cfg.solve);
            let brute = tiny_brute_force(&ch, params, &grid);
            match (solved, brute) {
                (Ok(s), Ok(b)) => format!(
                    "{seed},{},{},{},{}",
                    fmt_f64(s.e_min),
                    fmt_f64(b.e_min),
                    fmt_f64(s.e_min - b.e_min),
                    s.trace.status
                ),
                (Err(Error::InfeasibleInstance), _) | (_, Err(Error::AllInfeasible)) => {
                    format!("{seed},,,,{}", SolveStatus::InfeasibleInstance)
                }
                _ => format!("{seed},,,,error"),
            }
        })
        .collect();
    let mut csv = format!("{COMPARE_HEADER}\nseed,E_solve,E_brute,gap,status\n");
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    emit(csv, out)
}

fn emit(csv: String, out: Option<&Path>) -> Outcome {
    match out {
        Some(path) => match write_file(path, &csv) {
            Ok(()) => Outcome::default(),
            Err(fail) => fail,
        },
        None => Outcome {
            stdout: csv,
            ..Outcome::default()
        },
    }
}
