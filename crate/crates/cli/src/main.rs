//! `skly`: command-line front end for the verification harness.
//!
//! Exit codes: 0 all checks pass, 1 at least one failure, 2 configuration
//! error. Same config + seed reproduces the report byte for byte.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use skly_core::adops::sklyanin_generator;
use skly_core::params::{c64, EllipticParams, Sign, TruncationPolicy, I};
use skly_core::repn::{build_theta_module, operator_matrix};
use skly_core::specfun::{elliptic_gamma, r_delta, theta_variant};
use skly_core::verify::{all_checks, run_check, CheckContext};
use std::fmt::Write as _;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "skly", version, about = "elliptic difference-operator identity harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Modular parameter tau, as "a+bi" (Im tau > 0).
    #[arg(long, default_value = "0.9i")]
    tau: String,
    /// Step parameter eta, as "a+bi" (Im eta > 0).
    #[arg(long, default_value = "0.045+0.21i")]
    eta: String,
    /// Representation parameter nu, as "a+bi".
    #[arg(long, default_value = "0.03", conflicts_with = "mu")]
    nu: Option<String>,
    /// Multiplier mu = exp(8 i pi nu); alternative to --nu.
    #[arg(long)]
    mu: Option<String>,
    /// Quasi-period a_+ = -i tau; with --a-minus, overrides --tau/--eta.
    #[arg(long, requires = "a_minus")]
    a_plus: Option<String>,
    /// Quasi-period a_- = -2 i eta.
    #[arg(long, requires = "a_plus")]
    a_minus: Option<String>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<EllipticParams> {
        let nu = match (&self.nu, &self.mu) {
            (_, Some(mu)) => EllipticParams::nu_from_mu(parse_complex(mu)?),
            (Some(nu), None) => parse_complex(nu)?,
            (None, None) => c64(0.03, 0.0),
        };
        let params = if let (Some(ap), Some(am)) = (&self.a_plus, &self.a_minus) {
            EllipticParams::from_modular(parse_complex(ap)?, parse_complex(am)?, nu)
        } else {
            EllipticParams::from_lattice(parse_complex(&self.tau)?, parse_complex(&self.eta)?, nu)
        };
        params.map_err(|e| anyhow!("invalid parameters: {e}"))
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Seed for the deterministic sample draws.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Default tolerance override (also via SKLY_TOL).
    #[arg(long)]
    tol: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

impl RunArgs {
    fn context(&self) -> Result<CheckContext> {
        let params = self.params.resolve()?;
        let mut ctx = CheckContext::new(params).with_seed(self.seed);
        let tol = match self.tol {
            Some(t) => Some(t),
            None => match std::env::var("SKLY_TOL") {
                Ok(s) => Some(s.parse::<f64>().context("SKLY_TOL is not a number")?),
                Err(_) => None,
            },
        };
        if let Some(t) = tol {
            if !(t.is_finite() && t > 0.0) {
                bail!("tolerance must be positive and finite");
            }
            ctx = ctx.with_tol(t);
        }
        Ok(ctx)
    }

    fn emit(&self, body: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, body)
                .with_context(|| format!("writing {}", path.display()))?,
            None => print!("{body}"),
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run verification checks and print one record per check.
    Check {
        #[command(flatten)]
        run: RunArgs,
        /// Run the whole registry.
        #[arg(long, conflicts_with = "names")]
        all: bool,
        /// Check names (see `skly list`).
        names: Vec<String>,
    },
    /// Evaluate a single special function at a point.
    Eval {
        #[command(flatten)]
        params: ParamArgs,
        /// One of: theta1..theta4, gamma, rplus, rminus.
        function: String,
        /// Evaluation point, as "a+bi".
        #[arg(long)]
        z: String,
    },
    /// Fit the generator matrices on a finite theta module.
    Rep {
        #[command(flatten)]
        run: RunArgs,
        /// Module order N (dimension N+1).
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Module flavor: plus or minus.
        #[arg(long, default_value = "plus")]
        delta: String,
    },
    /// List the registered check names.
    List,
}

/// Parse a complex number in "a+bi" form (also plain "a", "bi", "i", "-i").
fn parse_complex(s: &str) -> Result<Complex64> {
    let t = s.trim().replace(' ', "");
    if t.is_empty() {
        bail!("empty complex literal");
    }
    let fail = || anyhow!("cannot parse {s:?} as a complex number (expected \"a+bi\")");
    if let Some(im) = t.strip_suffix(['i', 'I']) {
        // Split the imaginary tail from an optional real head at the last
        // sign that is not an exponent sign and not leading.
        let bytes = im.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let c = bytes[k] as char;
            if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                split = Some(k);
                break;
            }
        }
        match split {
            Some(k) => {
                let re: f64 = im[..k].parse().map_err(|_| fail())?;
                let imag = match &im[k..] {
                    "+" => 1.0,
                    "-" => -1.0,
                    rest => rest.parse().map_err(|_| fail())?,
                };
                Ok(c64(re, imag))
            }
            None => {
                let imag = match im {
                    "" => 1.0,
                    "-" => -1.0,
                    rest => rest.parse().map_err(|_| fail())?,
                };
                Ok(c64(0.0, imag))
            }
        }
    } else {
        let re: f64 = t.parse().map_err(|_| fail())?;
        Ok(c64(re, 0.0))
    }
}

fn fmt_c(z: Complex64) -> String {
    if z.im >= 0.0 {
        format!("{:.12e}+{:.12e}i", z.re, z.im)
    } else {
        format!("{:.12e}-{:.12e}i", z.re, -z.im)
    }
}

fn cmd_check(run: &RunArgs, all: bool, names: &[String]) -> Result<ExitCode> {
    let ctx = run.context()?;
    let registry = all_checks();
    let selected: Vec<&str> = if all || names.is_empty() {
        registry.iter().map(|(n, _)| *n).collect()
    } else {
        let mut sel: Vec<&str> = Vec::new();
        for want in names {
            let hit = registry
                .iter()
                .find(|(n, _)| *n == want)
                .ok_or_else(|| anyhow!("unknown check: {want} (see `skly list`)"))?;
            sel.push(hit.0);
        }
        sel.sort();
        sel.dedup();
        sel
    };
    let mut body = String::new();
    let mut all_pass = true;
    for name in selected {
        let report = match run_check(name, &ctx) {
            Ok(r) => r,
            Err(e) => ctx
                .report(name, f64::INFINITY, ctx.tol)
                .failed(format!("error: {e}")),
        };
        all_pass &= report.pass;
        writeln!(body, "{report}").unwrap();
    }
    run.emit(&body)?;
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_eval(params: &ParamArgs, function: &str, z: &str) -> Result<ExitCode> {
    let p = params.resolve()?;
    let z = parse_complex(z)?;
    let pol = TruncationPolicy::for_params(&p);
    let (value, note) = match function {
        "theta1" | "theta2" | "theta3" | "theta4" => {
            let t: u8 = function.as_bytes()[5] - b'0';
            (theta_variant(t, z, &p, &pol)?, String::new())
        }
        "gamma" => {
            let g = elliptic_gamma(z, &p, &pol)?;
            (g.v, if g.flagged { " flagged=near-pole".into() } else { String::new() })
        }
        "rplus" => (r_delta(Sign::Plus, z, &p, &pol)?, String::new()),
        "rminus" => (r_delta(Sign::Minus, z, &p, &pol)?, String::new()),
        other => bail!("unknown function: {other} (theta1..theta4, gamma, rplus, rminus)"),
    };
    println!(
        "{function}({}) = {}{} [product_eps={:.1e}]",
        fmt_c(z),
        fmt_c(value),
        note,
        pol.product_eps
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_rep(run: &RunArgs, n: usize, delta_label: &str) -> Result<ExitCode> {
    if n == 0 {
        bail!("module order must be at least 1");
    }
    let delta = match delta_label {
        "plus" | "+" => Sign::Plus,
        "minus" | "-" => Sign::Minus,
        other => bail!("unknown delta: {other} (plus or minus)"),
    };
    let base = run.context()?;
    // The generator multiplier exp(8 i pi nu) must match the module
    // multiplier exp(-2 N pi a_{-delta}), which pins nu.
    let nu = I * base.params.a_delta(delta.flip()) * (n as f64) / 4.0;
    let p = base.params.with_nu(nu);
    let ctx = CheckContext::new(p).with_seed(base.seed);
    let mut rng = ctx.rng(0x7e);
    let module = build_theta_module(delta, n, &p, &mut rng)
        .map_err(|e| anyhow!("module construction failed: {e}"))?;
    let mut body = String::new();
    writeln!(
        body,
        "module delta={delta_label} N={n} dim={} mu={} gap={:.3e} seed={}",
        module.dim,
        fmt_c(module.mu),
        module.gap,
        ctx.seed
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..4usize {
        let op = sklyanin_generator(t, &p).map_err(|e| anyhow!("generator {t}: {e}"))?;
        let m = operator_matrix(&op, &module).map_err(|e| anyhow!("fit of D{t}: {e}"))?;
        worst = worst.max(m.fit_residual);
        writeln!(body, "D{t} fit_residual={:.3e}", m.fit_residual).unwrap();
        for r in 0..m.dim {
            let row: Vec<String> = (0..m.dim).map(|c| fmt_c(m.entries[(r, c)])).collect();
            writeln!(body, "  [{}]", row.join(", ")).unwrap();
        }
    }
    run.emit(&body)?;
    Ok(if worst < ctx.tol.max(1e-6) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check { run, all, names } => cmd_check(run, *all, names),
        Command::Eval { params, function, z } => cmd_eval(params, function, z),
        Command::Rep { run, n, delta } => cmd_rep(run, *n, delta),
        Command::List => {
            for (name, _) in all_checks() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
