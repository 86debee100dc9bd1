//! Command-line front end: configuration layering, suite execution, point
//! evaluation of the special functions, convergence tables and report rendering.
//!
//! Configuration is read from a TOML file (`--config` or `MODROP_CONFIG`), then
//! command-line flags override individual fields. Exit codes: 0 when every check
//! passes, 1 when a check fails, 2 for usage or configuration errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use modrop::specfun::{Estimate, GammaEvaluator};
use modrop::verify::{
    convergence_series, run_suite, ConvergenceTable, Outcome, RunConfig, RunReport, Suite, Summary,
};
use modrop::C64;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Report path used by `verify` when neither the flag nor the config names one.
pub const DEFAULT_REPORT: &str = "modrop-report.json";

#[derive(Debug, Parser)]
#[command(name = "modrop", version, about = "Verify the identities of the modular double R-operator")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, env = "MODROP_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a suite or selected relations and write a JSON report.
    Verify(VerifyArgs),
    /// Evaluate gamma, D or A at a point, or along a segment.
    Eval(EvalArgs),
    /// Residual of one relation over a list of resolutions, as CSV.
    Convergence(ConvergenceArgs),
    /// Render a JSON report as a text table.
    Report(ReportArgs),
}

/// Flags that override fields of the configuration.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    /// Scale b; ω = ib/2 and ω′ = i/(2b).
    #[arg(long)]
    pub b: Option<f64>,
    /// Spin of the one-coordinate checks.
    #[arg(long)]
    pub s: Option<f64>,
    /// Spin of the first site.
    #[arg(long)]
    pub s1: Option<f64>,
    /// Spin of the second site.
    #[arg(long)]
    pub s2: Option<f64>,
    /// Spin of the third site.
    #[arg(long)]
    pub s3: Option<f64>,
    /// First spectral parameter.
    #[arg(long)]
    pub u: Option<f64>,
    /// Second spectral parameter.
    #[arg(long)]
    pub v: Option<f64>,
    /// Half-width of the two-coordinate grid.
    #[arg(long = "grid-l")]
    pub grid_l: Option<f64>,
    /// Points per axis of the two-coordinate grid (a power of two).
    #[arg(long = "grid-n")]
    pub grid_n: Option<usize>,
    /// Target accuracy of the adaptive quadratures.
    #[arg(long = "quad-tol")]
    pub quad_tol: Option<f64>,
    /// Height of the lifted gamma contour.
    #[arg(long)]
    pub lift: Option<f64>,
    /// Half-width of the gamma integral; 0 chooses it adaptively.
    #[arg(long)]
    pub truncation: Option<f64>,
    /// Truncation of the Fourier integral.
    #[arg(long = "fourier-t")]
    pub fourier_t: Option<f64>,
    /// Recorded in the report; the checks themselves are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let set = |dst: &mut f64, src: Option<f64>| {
            if let Some(x) = src {
                *dst = x;
            }
        };
        set(&mut cfg.b, self.b);
        set(&mut cfg.spins.s, self.s);
        set(&mut cfg.spins.s1, self.s1);
        set(&mut cfg.spins.s2, self.s2);
        set(&mut cfg.spins.s3, self.s3);
        set(&mut cfg.spectral.u, self.u);
        set(&mut cfg.spectral.v, self.v);
        set(&mut cfg.grid.l, self.grid_l);
        set(&mut cfg.quad.tol, self.quad_tol);
        set(&mut cfg.quad.lift, self.lift);
        set(&mut cfg.quad.t, self.truncation);
        set(&mut cfg.quad.fourier_t, self.fourier_t);
        if let Some(n) = self.grid_n {
            cfg.grid.n = n;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct VerifyArgs {
    #[arg(long, value_parser = parse_suite)]
    pub suite: Option<Suite>,
    /// Include the slow checks; same as `--suite slow`.
    #[arg(long, conflicts_with = "suite")]
    pub slow: bool,
    /// Run only these relation ids (repeatable).
    #[arg(long = "relation")]
    pub relations: Vec<String>,
    /// Where to write the JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Function {
    #[value(name = "gamma")]
    Gamma,
    #[value(name = "D")]
    D,
    #[value(name = "A")]
    A,
}

const COMPLEX_HELP: &str = "complex literal written re+imi without spaces, e.g. 0.3-0.2i, 1.5, 2i";

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EvalArgs {
    pub function: Function,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, help = COMPLEX_HELP)]
    pub z: Option<C64>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, help = COMPLEX_HELP)]
    pub a: Option<C64>,
    /// End point of a sweep of the main argument (z, or a for A).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
    pub to: Option<C64>,
    /// Number of sweep points including both ends.
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    /// Write the sweep as CSV here instead of standard output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub relation: String,
    /// Resolutions: grid points N for grid relations, truncation T for FourierD.
    #[arg(long, alias = "resolutions", value_delimiter = ',', num_args = 1.., required = true)]
    pub grids: Vec<f64>,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A JSON report written by `verify`.
    pub path: PathBuf,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: modrop::Error| e.to_string())
}

/// Parses `re`, `imi`, or `re±imi` (no spaces); `i` alone means a unit coefficient.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let bad = || format!("{s:?} is not a complex literal; {COMPLEX_HELP}");
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(bad());
    }
    let num = |t: &str| -> Result<f64, String> {
        let x: f64 = t.parse().map_err(|_| bad())?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(bad())
        }
    };
    let coef = |t: &str| match t {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => num(t),
    };
    let Some(body) = s.strip_suffix('i') else {
        return Ok(C64::new(num(s)?, 0.0));
    };
    // The imaginary part starts at the last sign that is not an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Ok(C64::new(num(&body[..k])?, coef(&body[k..])?)),
        None => Ok(C64::new(0.0, coef(body)?)),
    }
}

/// Formats `z` in the syntax accepted by [`parse_complex`].
pub fn format_complex(z: C64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

/// A failure that maps to an exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_USAGE, message: msg.to_string() }
}

/// Reads the configuration file, if any, into a [`RunConfig`].
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

/// Runs the command line and returns the exit code; output goes to `out`.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn std::io::Write) -> Result<i32, Failure> {
    let io = |e: std::io::Error| Failure { code: EXIT_USAGE, message: e.to_string() };
    let mut cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Verify(a) => {
            a.overrides.apply(&mut cfg);
            if a.slow {
                cfg.suite = Suite::Slow;
            } else if let Some(s) = a.suite {
                cfg.suite = s;
            }
            if !a.relations.is_empty() {
                cfg.relations = Some(a.relations.clone());
            }
            if let Some(p) = &a.report {
                cfg.output.report = Some(p.display().to_string());
            }
            cfg.validate().map_err(usage)?;
            let reports = run_suite(&cfg).map_err(usage)?;
            let report = RunReport::new(&cfg, reports);
            let path = cfg.output.report.clone().unwrap_or_else(|| DEFAULT_REPORT.to_string());
            let json = serde_json::to_string_pretty(&report).expect("reports serialize");
            std::fs::write(&path, json + "\n").map_err(|e| usage(format!("cannot write {path}: {e}")))?;
            out.write_all(render(&report).as_bytes()).map_err(io)?;
            writeln!(out, "report written to {path}").map_err(io)?;
            Ok(if report.summary.all_passed() { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Eval(a) => {
            a.overrides.apply(&mut cfg);
            cfg.validate().map_err(usage)?;
            eval(&cfg, a, out)
        }
        Command::Convergence(a) => {
            a.overrides.apply(&mut cfg);
            cfg.validate().map_err(usage)?;
            let table = convergence_series(&cfg, &a.relation, &a.grids).map_err(usage)?;
            let csv = convergence_csv(&table).map_err(usage)?;
            match a.csv.clone().or_else(|| cfg.output.csv.as_ref().map(PathBuf::from)) {
                Some(p) => std::fs::write(&p, &csv).map_err(|e| usage(format!("cannot write {}: {e}", p.display())))?,
                None => out.write_all(csv.as_bytes()).map_err(io)?,
            }
            Ok(if table.non_increasing { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Report(a) => {
            let text = std::fs::read_to_string(&a.path)
                .map_err(|e| usage(format!("cannot read {}: {e}", a.path.display())))?;
            let report: RunReport = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{} is not a report: {e}", a.path.display())))?;
            if report.schema != modrop::verify::REPORT_SCHEMA {
                return Err(usage(format!("unsupported report schema {}", report.schema)));
            }
            out.write_all(render(&report).as_bytes()).map_err(io)?;
            Ok(EXIT_PASS)
        }
    }
}

/// The CSV form of a convergence table.
pub fn convergence_csv(table: &ConvergenceTable) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row_err = |e: csv::Error| e.to_string();
    w.write_record(["resolution", "residual", "wall_time_ms"]).map_err(row_err)?;
    for r in &table.rows {
        w.write_record([r.resolution.to_string(), format!("{:e}", r.residual), format!("{:.3}", r.wall_time_ms)])
            .map_err(row_err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

/// One line per relation and a summary line.
pub fn render(report: &RunReport) -> String {
    let mut s = String::new();
    let width = report.reports.iter().map(|r| r.relation_id.len()).max().unwrap_or(0);
    for r in &report.reports {
        let status = match &r.outcome {
            Outcome::Passed => "PASS",
            Outcome::Failed => "FAIL",
            Outcome::Error { .. } => "ERROR",
            Outcome::Skipped { .. } => "SKIP",
        };
        let residual = r.residual.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"));
        let _ = write!(
            s,
            "{status:5} {:width$}  residual {residual:>10}  tol {:.0e}  {:>9.1} ms  {}",
            r.relation_id, r.tolerance, r.wall_time_ms, r.resolution
        );
        match &r.outcome {
            Outcome::Error { message } => {
                let _ = write!(s, "  ({message})");
            }
            Outcome::Skipped { reason } => {
                let _ = write!(s, "  ({reason})");
            }
            _ => {}
        }
        s.push('\n');
    }
    let Summary { total, passed, failed, errors, skipped } = report.summary;
    let _ = writeln!(
        s,
        "{passed}/{total} passed, {failed} failed, {errors} errors, {skipped} skipped (modrop {}, schema {})",
        report.version, report.schema
    );
    s
}

fn eval(cfg: &RunConfig, a: &EvalArgs, out: &mut dyn std::io::Write) -> Result<i32, Failure> {
    let ev = GammaEvaluator::new(cfg.params().map_err(usage)?, cfg.numerics()).map_err(usage)?;
    let need = |x: Option<C64>, name: &str| x.ok_or_else(|| usage(format!("eval {:?} needs --{name}", a.function)));
    let (start, f): (C64, Box<dyn Fn(C64) -> modrop::Result<Estimate>>) = match a.function {
        Function::Gamma => (need(a.z, "z")?, Box::new(|z| ev.gamma_estimate(z))),
        Function::D => {
            let d = need(a.a, "a")?;
            (need(a.z, "z")?, Box::new(move |z| ev.d_estimate(d, z)))
        }
        Function::A => (need(a.a, "a")?, Box::new(|x| ev.a_estimate(x))),
    };
    let io = |e: std::io::Error| usage(e);
    let Some(end) = a.to else {
        // Singular points are reported with the offending lattice point.
        let e = f(start).map_err(|e| Failure { code: EXIT_FAIL, message: e.to_string() })?;
        writeln!(out, "value {}", format_complex(e.value)).map_err(io)?;
        writeln!(out, "relative error estimate {:e}", e.error).map_err(io)?;
        return Ok(EXIT_PASS);
    };
    if a.steps < 2 {
        return Err(usage("a sweep needs --steps of at least 2"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let rec = |e: csv::Error| usage(e);
    w.write_record(["arg_re", "arg_im", "re", "im", "error_estimate"]).map_err(rec)?;
    let mut code = EXIT_PASS;
    for k in 0..a.steps {
        let x = start + (end - start) * (k as f64 / (a.steps - 1) as f64);
        let row = match f(x) {
            Ok(e) => [x.re.to_string(), x.im.to_string(), e.value.re.to_string(), e.value.im.to_string(), e.error.to_string()],
            Err(err) => {
                code = EXIT_FAIL;
                let mut note = String::new();
                let _ = write!(note, "{err}");
                [x.re.to_string(), x.im.to_string(), "NaN".into(), "NaN".into(), note]
            }
        };
        w.write_record(&row).map_err(rec)?;
    }
    let bytes = w.into_inner().map_err(|e| usage(e.to_string()))?;
    match &a.csv {
        Some(p) => std::fs::write(p, bytes).map_err(|e| usage(format!("cannot write {}: {e}", p.display())))?,
        None => out.write_all(&bytes).map_err(io)?,
    }
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        let cases = [
            ("1.5", C64::new(1.5, 0.0)),
            ("-0.3+0.2i", C64::new(-0.3, 0.2)),
            ("0.3-0.2i", C64::new(0.3, -0.2)),
            ("2i", C64::new(0.0, 2.0)),
            ("-i", C64::new(0.0, -1.0)),
            ("1-i", C64::new(1.0, -1.0)),
            ("1e-3+2.5e+1i", C64::new(1e-3, 25.0)),
            ("-2e-3i", C64::new(0.0, -2e-3)),
        ];
        for (s, z) in cases {
            assert_eq!(parse_complex(s), Ok(z), "{s}");
        }
        for s in ["", "1 + 2i", "i2", "1+2j", "inf", "1++2i", "nan"] {
            assert!(parse_complex(s).is_err(), "{s}");
        }
    }

    #[test]
    fn formatted_literals_parse_back() {
        for z in [C64::new(0.25, -1.5), C64::new(-3.0, 0.0), C64::new(1e-20, 7e30)] {
            assert_eq!(parse_complex(&format_complex(z)), Ok(z));
        }
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut cfg = RunConfig::default();
        let o = Overrides { u: Some(0.9), grid_n: Some(64), seed: Some(3), ..Overrides::default() };
        o.apply(&mut cfg);
        assert_eq!((cfg.spectral.u, cfg.grid.n, cfg.seed), (0.9, 64, Some(3)));
        assert_eq!(cfg.spectral.v, RunConfig::default().spectral.v);
    }
}
