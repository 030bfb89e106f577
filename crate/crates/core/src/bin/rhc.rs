//! `rhc`: run a JSON problem file and write a JSON report (plus optional CSV
//! samples of the solution on a rectangular grid).
//!
//! Exit codes: 0 success, 1 input error, 2 failed hypothesis check,
//! 3 numerically singular operator.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use rhc::problem::{
    self, Mode, ProblemFile, Report, RunOptions, Sample, SampleGrid, ToleranceOverrides,
};
use rhc::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Solve,
    FactorizeScalar,
    FactorizeHermitian,
    CheckSymmetry,
    Index,
    Idnls,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Solve => Mode::Solve,
            ModeArg::FactorizeScalar => Mode::FactorizeScalar,
            ModeArg::FactorizeHermitian => Mode::FactorizeHermitian,
            ModeArg::CheckSymmetry => Mode::CheckSymmetry,
            ModeArg::Index => Mode::Index,
            ModeArg::Idnls => Mode::Idnls,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "rhc",
    version,
    about = "Riemann-Hilbert problems on unions of circles"
)]
struct Cli {
    mode: ModeArg,
    /// JSON problem file.
    #[arg(long)]
    problem: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    out: PathBuf,
    /// CSV file for samples of the solution on --grid over --bbox.
    #[arg(long, requires_all = ["grid", "bbox"])]
    samples: Option<PathBuf>,
    /// Grid size as NXxNY.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Sampling box as re0,re1,im0,im1.
    #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
    bbox: Option<[f64; 4]>,
    /// Node count for every circle (overrides the problem file).
    #[arg(long)]
    nodes: Option<usize>,
    /// Tolerance override KEY=VALUE (repeatable).
    #[arg(long = "tol", value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
    /// Include wall-clock timing in the report (makes it non-reproducible).
    #[arg(long)]
    timing: bool,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected NXxNY")?;
    let nx: usize = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let ny: usize = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if nx == 0 || ny == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((nx, ny))
}

fn parse_bbox(s: &str) -> Result<[f64; 4], String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    match v[..] {
        [a, b, c, d] if a < b && c < d && v.iter().all(|x| x.is_finite()) => Ok([a, b, c, d]),
        [_, _, _, _] => Err("need re0 < re1 and im0 < im1".into()),
        _ => Err("expected re0,re1,im0,im1".into()),
    }
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected KEY=VALUE")?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{v}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn write_report(path: &Path, report: &Report) -> std::io::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, report)?;
        writeln!(w)
    })
}

fn write_samples(path: &Path, samples: &[Sample]) -> std::io::Result<()> {
    write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        // header comes from the struct even when no point survived
        if samples.is_empty() {
            csv.write_record(["region", "re_z", "im_z", "row", "col", "re_m", "im_m"])?;
        }
        for s in samples {
            csv.serialize(s)?;
        }
        csv.flush()
    })
}

fn execute(cli: &Cli, mode: Mode) -> Result<(Report, Vec<Sample>), Error> {
    let text = std::fs::read_to_string(&cli.problem)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", cli.problem.display())))?;
    let problem = ProblemFile::from_json(&text)?;
    let mut tolerances = ToleranceOverrides::default();
    for (k, v) in &cli.tol {
        tolerances.set(k, *v)?;
    }
    let opts = RunOptions {
        nodes: cli.nodes,
        tolerances,
        samples: cli
            .grid
            .zip(cli.bbox)
            .filter(|_| cli.samples.is_some())
            .map(|((nx, ny), bbox)| SampleGrid { nx, ny, bbox }),
        timing: cli.timing,
    };
    let out = problem::run(&problem, mode, &opts)?;
    Ok((out.report, out.samples))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mode = Mode::from(cli.mode);
    let (report, code) = match execute(&cli, mode) {
        Ok((report, samples)) => {
            if let Some(path) = &cli.samples {
                if let Err(e) = write_samples(path, &samples) {
                    eprintln!("rhc: cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            let code = report.exit_code();
            (report, code)
        }
        Err(e) => {
            eprintln!("rhc: {e}");
            (Report::failure(mode, &e), problem::exit_code(&e))
        }
    };
    if let Err(e) = write_report(&cli.out, &report) {
        eprintln!("rhc: cannot write {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    if report.status == problem::Status::HypothesisFailed && code == 2 && report.error.is_none() {
        eprintln!("rhc: hypothesis check failed");
    }
    ExitCode::from(code as u8)
}
