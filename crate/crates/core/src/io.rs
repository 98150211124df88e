//! Plain-text formats for replaying instances and inspecting results.
//!
//! Every file starts with a `# rispower-<kind> v<version>` line. Floats are
//! written with 17 significant digits so values round-trip exactly.
//!
//! Channels:
//!
//! ```text
//! # rispower-channels v1
//! n=2
//! i_r=3
//! [h_d]
//! 1.0000000000000000e0,-2.5000000000000000e-1
//! ...
//! [h_r]
//! ...
//! [G]
//! ...            (I_R x N entries, row-major)
//! ```
//!
//! Designs use the same layout with a `[w]` section of `re,im` pairs,
//! `s=` followed by a bitstring (`1` reflects), and a `[psi]` section of
//! phases in radians.

use std::fmt::Write as _;

use crate::admm::AdmmRecord;
use crate::bcd::{IterationRecord, SolveStatus, SolveTrace};
use crate::channel::ChannelSet;
use crate::model::Design;
use crate::{CMatrix, CVector, Error, Result, C64};

pub const CHANNELS_HEADER: &str = "# rispower-channels v1";
pub const DESIGN_HEADER: &str = "# rispower-design v1";
pub const TRACE_HEADER: &str = "# rispower-trace v1";
pub const ADMM_TRACE_HEADER: &str = "# rispower-admm-trace v1";

pub const TRACE_COLUMNS: &str = "k,objective_w,admm_iters,accepted,E_ris";
pub const ADMM_TRACE_COLUMNS: &str = "iter,objective,primal_residual,dual_residual,reflecting";

/// Format a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_complex(out: &mut String, z: C64) {
    let _ = writeln!(out, "{},{}", fmt_f64(z.re), fmt_f64(z.im));
}

pub fn channels_to_string(ch: &ChannelSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHANNELS_HEADER}\nn={}\ni_r={}", ch.n(), ch.i_r());
    out.push_str("[h_d]\n");
    ch.h_d.iter().for_each(|&z| push_complex(&mut out, z));
    out.push_str("[h_r]\n");
    ch.h_r.iter().for_each(|&z| push_complex(&mut out, z));
    out.push_str("[G]\n");
    for r in 0..ch.g.nrows() {
        for c in 0..ch.g.ncols() {
            push_complex(&mut out, ch.g[(r, c)]);
        }
    }
    out
}

pub fn design_to_string(design: &Design) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{DESIGN_HEADER}\nn={}\ni_r={}",
        design.w.len(),
        design.s.len()
    );
    out.push_str("[w]\n");
    design.w.iter().for_each(|&z| push_complex(&mut out, z));
    let bits: String = design
        .s
        .iter()
        .map(|&b| if b { '1' } else { '0' })
        .collect();
    let _ = writeln!(out, "s={bits}");
    out.push_str("[psi]\n");
    for z in design.psi.iter() {
        let _ = writeln!(out, "{}", fmt_f64(z.arg()));
    }
    out
}

pub fn trace_to_csv(trace: &SolveTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{TRACE_HEADER} status={}\n{TRACE_COLUMNS}",
        trace.status
    );
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.k,
            fmt_f64(r.objective_w),
            r.admm_iters,
            u8::from(r.accepted),
            fmt_f64(r.e_ris)
        );
    }
    out
}

pub fn admm_trace_to_csv(records: &[AdmmRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{ADMM_TRACE_HEADER}\n{ADMM_TRACE_COLUMNS}");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iter,
            fmt_f64(r.objective),
            fmt_f64(r.primal),
            fmt_f64(r.dual),
            r.reflecting
        );
    }
    out
}

/// Line cursor that skips blank lines and reports 1-based line numbers.
struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
            last: 0,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                self.last = i + 1;
                return Ok((i + 1, l));
            }
        }
        Err(self.err(
            self.last + 1,
            format!("unexpected end of input, expected {what}"),
        ))
    }

    fn expect(&mut self, literal: &str) -> Result<()> {
        let (n, l) = self.next(literal)?;
        if l != literal {
            return Err(self.err(n, format!("expected `{literal}`, found `{l}`")));
        }
        Ok(())
    }

    fn value(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, l) = self.next(key)?;
        match l.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok((n, v.trim())),
            _ => Err(self.err(n, format!("expected `{key}=...`, found `{l}`"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (n, v) = self.value(key)?;
        v.parse().map_err(|_| {
            self.err(
                n,
                format!("`{key}` must be a nonnegative integer, found `{v}`"),
            )
        })
    }

    fn real(&mut self) -> Result<f64> {
        let (n, l) = self.next("a number")?;
        parse_f64(l).ok_or_else(|| self.err(n, format!("invalid number `{l}`")))
    }

    fn complex(&mut self) -> Result<C64> {
        let (n, l) = self.next("a complex entry")?;
        let parsed = l
            .split_once(',')
            .and_then(|(re, im)| Some(C64::new(parse_f64(re)?, parse_f64(im)?)));
        parsed.ok_or_else(|| self.err(n, format!("expected `re,im`, found `{l}`")))
    }

    fn complexes(&mut self, len: usize) -> Result<CVector> {
        let v: Vec<C64> = (0..len).map(|_| self.complex()).collect::<Result<_>>()?;
        Ok(CVector::from_vec(v))
    }

    fn finish(&mut self) -> Result<()> {
        match self.inner.by_ref().find(|(_, l)| !l.trim().is_empty()) {
            Some((i, l)) => Err(self.err(i + 1, format!("trailing content `{}`", l.trim()))),
            None => Ok(()),
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn parse_channels(text: &str) -> Result<ChannelSet> {
    let mut lines = Lines::new(text);
    lines.expect(CHANNELS_HEADER)?;
    let n = lines.count("n")?;
    let i_r = lines.count("i_r")?;
    lines.expect("[h_d]")?;
    let h_d = lines.complexes(n)?;
    lines.expect("[h_r]")?;
    let h_r = lines.complexes(i_r)?;
    lines.expect("[G]")?;
    let flat = lines.complexes(i_r * n)?;
    lines.finish()?;
    Ok(ChannelSet {
        h_d,
        h_r,
        g: CMatrix::from_row_iterator(i_r, n, flat.iter().copied()),
    })
}

pub fn parse_design(text: &str) -> Result<Design> {
    let mut lines = Lines::new(text);
    lines.expect(DESIGN_HEADER)?;
    let n = lines.count("n")?;
    let i_r = lines.count("i_r")?;
    lines.expect("[w]")?;
    let w = lines.complexes(n)?;
    let (line, bits) = lines.value("s")?;
    let s = bits
        .chars()
        .map(|c| match c {
            '1' => Ok(true),
            '0' => Ok(false),
            other => Err(lines.err(line, format!("mode bits must be 0 or 1, found `{other}`"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    if s.len() != i_r {
        return Err(lines.err(line, format!("expected {i_r} mode bits, found {}", s.len())));
    }
    lines.expect("[psi]")?;
    let phases = (0..i_r)
        .map(|_| lines.real())
        .collect::<Result<Vec<f64>>>()?;
    lines.finish()?;
    let psi = CVector::from_iterator(i_r, phases.into_iter().map(|p| C64::from_polar(1.0, p)));
    Design::new(w, s, psi)
}

pub fn parse_trace_csv(text: &str) -> Result<SolveTrace> {
    let mut lines = Lines::new(text);
    let (n, head) = lines.next("trace header")?;
    let status = head
        .strip_prefix(TRACE_HEADER)
        .and_then(|rest| rest.trim().strip_prefix("status="))
        .and_then(|s| match s {
            "converged" => Some(SolveStatus::Converged),
            "max_iters" => Some(SolveStatus::MaxIters),
            "infeasible_instance" => Some(SolveStatus::InfeasibleInstance),
            _ => None,
        })
        .ok_or_else(|| lines.err(n, format!("expected `{TRACE_HEADER} status=...`")))?;
    lines.expect(TRACE_COLUMNS)?;
    let mut records = Vec::new();
    while let Ok((n, l)) = lines.next("") {
        let f: Vec<&str> = l.split(',').collect();
        let bad = || lines.err(n, format!("malformed trace row `{l}`"));
        if f.len() != 5 {
            return Err(bad());
        }
        records.push(IterationRecord {
            k: f[0].parse().map_err(|_| bad())?,
            objective_w: parse_f64(f[1]).ok_or_else(bad)?,
            admm_iters: f[2].parse().map_err(|_| bad())?,
            accepted: match f[3] {
                "1" => true,
                "0" => false,
                _ => return Err(bad()),
            },
            e_ris: parse_f64(f[4]).ok_or_else(bad)?,
            admm_seconds: 0.0,
        });
    }
    Ok(SolveTrace { records, status })
}
