use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use qbe::artifacts::{self, AUDITS, CERTIFICATION, DIAGNOSTICS, RUN_META};
use qbe::scenario::{Overrides, Scenario};

#[derive(Parser)]
#[command(name = "qbe", version, about = "Radial quantum Boltzmann solver with a condensate")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve a scenario and write run artifacts
    Run(Common),
    /// Check a scenario and print derived constants without evolving
    Validate(Common),
    /// Compare the collision operators and surface weights against references
    Certify(Common),
    /// Recompute audits.json from the artifacts in --out
    Audit(Common),
}

#[derive(Args)]
struct Common {
    /// scenario file (.toml, or .json)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// worker threads (default: all cores)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// grid refinement multiplier
    #[arg(long, value_name = "K")]
    refine: Option<usize>,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let path = self.config.as_ref().context("--config is required")?;
        let mut s = Scenario::load(path).with_context(|| format!("loading {}", path.display()))?;
        s.apply(&Overrides {
            out: self.out.clone(),
            seed: self.seed,
            refine: self.refine,
        })?;
        Ok(s)
    }
}

fn init_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(c: &Common) -> Result<bool> {
    let s = c.scenario()?;
    let dir = artifacts::output_dir(&s)?;
    let out = artifacts::run(&s, &dir)?;
    let last = out.record.rows.last().context("no records")?;
    println!("config_hash {}", out.meta.config_hash);
    println!("steps {}  records {}  t {}", out.record.steps, out.record.rows.len(), last.t);
    println!("mass {}  energy {}  entropy {}", last.mass, last.energy, last.entropy);
    println!("wrote {} and {} in {}", RUN_META, DIAGNOSTICS, dir.display());
    if let Some(a) = &out.audits {
        println!(
            "audits: H-theorem {}  positivity {}  mass bound {}  moments {}",
            ok(a.h_theorem.monotone),
            ok(a.positivity.ok),
            ok(a.mass_growth.bound_holds),
            ok(a.moments.ok)
        );
    }
    if let Some(why) = &out.record.abort {
        eprintln!("run aborted: {why}");
        return Ok(false);
    }
    Ok(true)
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn validate(c: &Common) -> Result<bool> {
    let s = c.scenario()?;
    let r = artifacts::validate(&s)?;
    let d = &r.derived;
    println!("config_hash {}", r.config_hash);
    println!("kappa1 {}  kappa2 {}  p0 {}  gamma {}", d.kappa1, d.kappa2, d.p0, d.gamma);
    println!("grid nodes {}  E(u_max) {}", r.grid_nodes, r.e_max);
    println!("f0: mass {}  energy {}  m_nstar {}", r.mass, r.energy, r.m_nstar);
    if let Some(f) = &r.feasible {
        println!("feasible set: {}", ok(f.ok()));
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
    Ok(true)
}

fn certify(c: &Common) -> Result<bool> {
    let s = c.scenario()?;
    let dir = artifacts::output_dir(&s)?;
    let r = artifacts::certify_scenario(&s, &dir)?;
    for x in &r.rates {
        println!(
            "{} amplitude {} center {}: max error {:.3e} at node {} [{}]",
            x.operator,
            x.state.amplitude,
            x.state.center,
            x.max_error,
            x.worst_node,
            ok(x.pass)
        );
    }
    for x in &r.surfaces {
        println!("surface {:?} p {}: rel error {:.3e} [{}]", x.family, x.p, x.rel_error, ok(x.pass));
    }
    for x in &r.roots {
        println!("q_gamma p {} gamma {}: {} vs {} [{}]", x.p, x.gamma, x.bisection, x.scan, ok(x.pass));
    }
    println!("wrote {}", dir.join(CERTIFICATION).display());
    Ok(r.pass)
}

fn audit(c: &Common) -> Result<bool> {
    let dir = match (&c.out, &c.config) {
        (Some(d), _) => d.clone(),
        (None, Some(_)) => artifacts::output_dir(&c.scenario()?)?,
        (None, None) => bail!("audit needs --out DIR or --config PATH"),
    };
    let a = artifacts::audit_dir(&dir)?;
    println!("max energy drift {:e}", a.conservation.max_energy_drift);
    println!("H-theorem {} (tol {:e})", ok(a.h_theorem.monotone), a.h_theorem.tol_entropy);
    println!("positivity {}", ok(a.positivity.ok));
    println!("mass bound {} (C = {})", ok(a.mass_growth.bound_holds), a.mass_growth.c_hat);
    println!("moments {}", ok(a.moments.ok));
    for p in &a.probes {
        println!("probe {} {:?}: max {:e}", p.probe, p.which, p.max_ratio);
    }
    println!("wrote {}", dir.join(AUDITS).display());
    Ok(a.h_theorem.monotone && a.positivity.ok && a.mass_growth.bound_holds && a.moments.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.cmd {
        Cmd::Run(c) | Cmd::Validate(c) | Cmd::Certify(c) | Cmd::Audit(c) => c,
    };
    let res = init_threads(common.threads).and_then(|_| match &cli.cmd {
        Cmd::Run(c) => run(c),
        Cmd::Validate(c) => validate(c),
        Cmd::Certify(c) => certify(c),
        Cmd::Audit(c) => audit(c),
    });
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
