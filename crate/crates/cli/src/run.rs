//! Subcommand bodies. Each returns what it would print so the binary and the
//! tests share one code path.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use extem::angular_momentum::{decompose, realspace_omega_flux, FluxReport, RealspaceFlux};
use extem::field_config::ModeSet;
use extem::index_algebra::grade_basis;
use extem::multivector::{wedge, Multivector};
use rayon::prelude::*;

use crate::checks::{check_rng, CheckContext, CheckOutcome, CheckRegistry};
use crate::emit::{Emitter, Records};
use crate::{CliError, ScenarioConfig};

pub const EMPTY_FIELD_WARNING: &str = "empty field: every mode amplitude is zero";

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--threads: must be at least 1".into())),
        Some(n) => {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Output(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckLine {
    pub name: &'static str,
    pub outcome: CheckOutcome,
    /// Passed without running because the field is empty.
    pub trivial: bool,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub lines: Vec<CheckLine>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.outcome.passed())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let tag = if l.outcome.passed() { "PASS" } else { "FAIL" };
            let _ = write!(
                s,
                "{tag} {:<20} max_residual={:.3e} tolerance={:.0e} samples={}",
                l.name, l.outcome.max_residual, l.outcome.tolerance, l.outcome.samples
            );
            if l.trivial {
                s.push_str(" (empty field)");
            }
            s.push('\n');
        }
        s
    }
}

fn selected_checks(cfg: &ScenarioConfig, reg: &CheckRegistry) -> Vec<&'static str> {
    match &cfg.suites {
        Some(list) => reg.names().filter(|n| list.iter().any(|s| s == n)).collect(),
        None => reg.names().collect(),
    }
}

pub fn run_verify(cfg: &ScenarioConfig) -> Result<VerifyReport, CliError> {
    let (ms, empty) = cfg.build_modes()?;
    let reg = CheckRegistry::builtin();
    let names = selected_checks(cfg, &reg);
    let ctx = CheckContext { config: cfg, modes: &ms };
    let lines = names
        .par_iter()
        .map(|&name| {
            let check = reg.get(name).expect("selected from the registry");
            if empty && check.needs_field() {
                let outcome = CheckOutcome { max_residual: 0.0, tolerance: 0.0, samples: 0 };
                return Ok(CheckLine { name, outcome, trivial: true });
            }
            let outcome = check.run(&ctx, &mut check_rng(cfg.seed, name))?;
            Ok(CheckLine { name, outcome, trivial: false })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut warnings = Vec::new();
    if empty {
        warnings.push(EMPTY_FIELD_WARNING.to_string());
    }
    Ok(VerifyReport { lines, warnings })
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn write_table(dir: &Path, stem: &str, emitter: &dyn Emitter, records: &[(String, f64)]) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{stem}.{}", emitter.extension()));
    let mut w = BufWriter::new(File::create(&path)?);
    emitter.write(records, &mut w)?;
    w.flush()?;
    Ok(path)
}

fn prepare(cfg: &ScenarioConfig, out: &Path) -> Result<(ModeSet, Vec<String>), CliError> {
    let (ms, empty) = cfg.build_modes()?;
    fs::create_dir_all(out)?;
    let mut warnings = Vec::new();
    if empty {
        warnings.push(EMPTY_FIELD_WARNING.to_string());
    }
    if ms.dropped() > 0 {
        warnings.push(format!("{} grid frequencies fell outside the null shell and were dropped", ms.dropped()));
    }
    Ok((ms, warnings))
}

fn pair_label(p: extem::IndexList) -> String {
    p.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// `Pi[t]`, `Omega[i,j]`, `alpha[t]`, `x_ell`, then the lattice geometry and
/// the edge share.
pub fn realspace_records(f: &RealspaceFlux) -> Records {
    let mut out = Vec::new();
    for (t, c) in f.pi.coeffs().iter().enumerate() {
        out.push((format!("Pi[{t}]"), c.re));
    }
    for (p, c) in f.omega.iter() {
        out.push((format!("Omega[{}]", pair_label(p)), c.re));
    }
    for (t, a) in f.alpha.iter().enumerate() {
        out.push((format!("alpha[{t}]"), *a));
    }
    out.push(("x_ell".into(), f.x_ell));
    let lat = &f.lattice;
    for a in 0..lat.points.len() {
        out.push((format!("lattice.points[{a}]"), lat.points[a] as f64));
        out.push((format!("lattice.center[{a}]"), lat.center[a]));
        out.push((format!("lattice.half_width[{a}]"), lat.half_width[a]));
    }
    out.push(("edge_fraction".into(), f.edge_fraction));
    out
}

/// Component-wise `freq`, `real` and `rel_diff` for `Pi` and `Omega`, where
/// `rel_diff` divides by the largest frequency-space component of the same
/// quantity; then the two maxima.
pub fn comparison_records(freq: &FluxReport, real: &RealspaceFlux) -> Records {
    let mut out = Vec::new();
    let mut block = |name: &str, labels: Vec<String>, f: &Multivector, r: &Multivector| {
        let scale = f.max_abs();
        let mut worst: f64 = 0.0;
        for ((label, a), b) in labels.into_iter().zip(f.coeffs()).zip(r.coeffs()) {
            let rel = if scale > 0.0 { (b.re - a.re).abs() / scale } else { (b.re - a.re).abs() };
            worst = worst.max(rel);
            out.push((format!("{name}[{label}].freq"), a.re));
            out.push((format!("{name}[{label}].real"), b.re));
            out.push((format!("{name}[{label}].rel_diff"), rel));
        }
        out.push((format!("max_rel_diff.{name}"), worst));
    };
    let d = freq.sig.dim();
    block("Pi", (0..d).map(|t| t.to_string()).collect(), &freq.pi_part, &real.pi);
    block("Omega", grade_basis(d, 2).iter().map(|&p| pair_label(p)).collect(), &freq.omega, &real.omega);
    out
}

/// `Ω` at each multiple of `alpha`, plus the residual of the shift law
/// `Ω_s − Ω_0 = −(s α)∧Π` relative to `|Π| |s α| + |Ω_0|`.
pub fn alpha_sweep_records(ms: &ModeSet, x_ell: f64, alpha: &[f64], scales: &[f64]) -> Result<Records, CliError> {
    let sig = ms.sig();
    let base = decompose(ms, x_ell, &vec![0.0; sig.dim()])?;
    let mut out = Vec::new();
    for (i, &s) in scales.iter().enumerate() {
        let a: Vec<f64> = alpha.iter().map(|x| s * x).collect();
        let rep = decompose(ms, x_ell, &a)?;
        out.push((format!("sweep[{i}].scale"), s));
        for (t, v) in a.iter().enumerate() {
            out.push((format!("sweep[{i}].alpha[{t}]"), *v));
        }
        for (p, c) in rep.omega.iter() {
            out.push((format!("sweep[{i}].Omega[{}]", pair_label(p)), c.re));
        }
        let av = Multivector::vector(sig, &a)?;
        let expect = &base.omega - &wedge(&av, &base.pi_part)?;
        let size = base.pi_part.norm() * av.norm() + base.omega.max_abs();
        let resid = (&rep.omega - &expect).max_abs();
        out.push((format!("sweep[{i}].shift_residual"), if size > 0.0 { resid / size } else { resid }));
    }
    Ok(out)
}

fn realspace(cfg: &ScenarioConfig, ms: &ModeSet) -> Result<Option<RealspaceFlux>, CliError> {
    let Some(lat) = cfg.lattice()? else { return Ok(None) };
    Ok(Some(realspace_omega_flux(ms, cfg.flux.x_ell, &cfg.alpha(), &lat)?))
}

/// Writes `modes.txt`, `flux_report`, and when configured `realspace`,
/// `comparison` and `alpha_sweep`.
pub fn run_decompose(cfg: &ScenarioConfig, out: &Path, emitter: &dyn Emitter) -> Result<RunSummary, CliError> {
    let (ms, mut warnings) = prepare(cfg, out)?;
    let mut files = Vec::new();
    let modes_path = out.join("modes.txt");
    fs::write(&modes_path, ms.to_text())?;
    files.push(modes_path);

    let alpha = cfg.alpha();
    let report = decompose(&ms, cfg.flux.x_ell, &alpha)?;
    files.push(write_table(out, "flux_report", emitter, &report.records())?);

    if let Some(real) = realspace(cfg, &ms)? {
        warnings.extend(real.warning.clone());
        files.push(write_table(out, "realspace", emitter, &realspace_records(&real))?);
        files.push(write_table(out, "comparison", emitter, &comparison_records(&report, &real))?);
    }
    if let Some(scales) = &cfg.flux.alpha_sweep {
        let recs = alpha_sweep_records(&ms, cfg.flux.x_ell, &alpha, scales)?;
        files.push(write_table(out, "alpha_sweep", emitter, &recs)?);
    }
    Ok(RunSummary { files, warnings })
}

/// Real-space flux only; needs a `[lattice]` section.
pub fn run_flux(cfg: &ScenarioConfig, out: &Path, emitter: &dyn Emitter) -> Result<RunSummary, CliError> {
    if cfg.lattice.is_none() {
        return Err(CliError::Config("lattice: section required by the flux subcommand".into()));
    }
    let (ms, mut warnings) = prepare(cfg, out)?;
    let real = realspace(cfg, &ms)?.expect("lattice present");
    warnings.extend(real.warning.clone());
    let files = vec![write_table(out, "realspace", emitter, &realspace_records(&real))?];
    Ok(RunSummary { files, warnings })
}

/// Reads `flux_report.<ext>` from `dir` and renders it as a table, with the
/// closure residual `|Ω − (N + L + S − α∧Π)|`.
pub fn run_report(dir: &Path, emitter: &dyn Emitter) -> Result<String, CliError> {
    let path = dir.join(format!("flux_report.{}", emitter.extension()));
    let records = emitter.read(&mut File::open(&path)?)?;
    let rep = FluxReport::from_records(&records)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "signature ({}, {})  r = {}  ell = {}  x_ell = {}  modes = {}  dropped = {}",
        rep.sig.k(),
        rep.sig.n(),
        rep.r,
        rep.ell,
        rep.x_ell,
        rep.modes,
        rep.dropped
    );
    let _ = writeln!(s, "alpha = {:?}", rep.alpha);
    let _ = writeln!(s, "\n{:>6} {:>24}", "t", "Pi");
    for (t, c) in rep.pi_part.coeffs().iter().enumerate() {
        let _ = writeln!(s, "{t:>6} {:>24.16e}", c.re);
    }
    let _ = writeln!(s, "\n{:>6} {:>24} {:>24} {:>24} {:>24}", "pair", "Omega", "N", "L", "S");
    for (pos, p) in grade_basis(rep.sig.dim(), 2).iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>6} {:>24.16e} {:>24.16e} {:>24.16e} {:>24.16e}",
            pair_label(*p),
            rep.omega.coeffs()[pos].re,
            rep.n_part.coeffs()[pos].re,
            rep.l_part.coeffs()[pos].re,
            rep.s_part.coeffs()[pos].re
        );
    }
    let mut sum = &(&rep.n_part + &rep.l_part) + &rep.s_part;
    sum -= &wedge(&Multivector::vector(rep.sig, &rep.alpha)?, &rep.pi_part)?;
    let _ = writeln!(s, "\nclosure residual {:.3e}", (&sum - &rep.omega).max_abs());
    Ok(s)
}
