use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use cgb::commands::{self, EftsArgs, EftsOp, Status, USAGE_EXIT};
use cgb::exec::Rayon;
use cgb::manifest::{Backend, ManifoldRef, RunManifest};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cgb", version, about = "Supersymmetric sigma-model checks of Chern-Gauss-Bonnet")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the Pfaffian of curvature and compare with chi.
    Pfaffian(RunArgs),
    /// Locate critical points of a Morse function and sum their signs.
    Index(RunArgs),
    /// Evaluate Z(lambda) across couplings.
    Sweep(RunArgs),
    /// Run the fast invariant suite.
    Selftest {
        #[command(flatten)]
        run: RunArgs,
        /// Flip the curvature sign in the covariant action (the suite must then fail).
        #[arg(long)]
        inject_sign_fault: bool,
    },
    /// Operations on free topological superfunctions.
    Efts {
        #[arg(value_enum)]
        op: OpArg,
        /// Superfunctions (or a vector field for `cartan`).
        inputs: Vec<String>,
        #[arg(long, default_value_t = 1)]
        delta: usize,
        /// Number of base variables (inferred when omitted).
        #[arg(long, default_value_t = 0)]
        vars: usize,
        #[arg(long)]
        cap: Option<u32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Delta,
    Cartan,
    Concordance,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Float,
    Rational,
}

#[derive(Args, Default)]
struct RunArgs {
    /// JSON run manifest; the flags below override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    manifold: Option<String>,
    /// Comma-separated shape parameters.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Option<Vec<f64>>,
    #[arg(long)]
    morse: Option<String>,
    /// Comma-separated couplings.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Nodes per axis, one value or one per axis.
    #[arg(long, value_delimiter = ',')]
    resolution: Option<Vec<usize>>,
    #[arg(long, conflicts_with = "fixed")]
    adaptive: bool,
    #[arg(long)]
    fixed: bool,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Second manifold for an A/B sweep.
    #[arg(long)]
    compare: Option<String>,
}

impl RunArgs {
    fn manifest(&self) -> Result<RunManifest, String> {
        let mut m = match &self.manifest {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                RunManifest::from_json(&text)?
            }
            None => RunManifest::default(),
        };
        if let Some(name) = &self.manifold {
            m.manifold = ManifoldRef::named(name);
        }
        if let Some(p) = &self.params {
            m.manifold.params = p.clone();
        }
        if let Some(h) = &self.morse {
            m.morse = h.clone();
        }
        if let Some(l) = &self.lambda {
            m.lambdas = l.clone();
        }
        if let Some(r) = &self.resolution {
            m.resolution.base = Some(r.clone());
        }
        if self.adaptive {
            m.resolution.adaptive = true;
        }
        if self.fixed {
            m.resolution.adaptive = false;
        }
        if let Some(t) = self.tolerance {
            m.tolerance = t;
        }
        if let Some(o) = &self.out {
            m.out = Some(o.clone());
        }
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if let Some(b) = self.backend {
            m.backend = match b {
                BackendArg::Float => Backend::Float,
                BackendArg::Rational => Backend::Rational,
            };
        }
        if let Some(c) = &self.compare {
            m.compare = Some(ManifoldRef::named(c));
        }
        Ok(m)
    }
}

fn run(cli: Cli) -> Result<Status, String> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.cmd {
        Cmd::Pfaffian(a) => commands::cmd_pfaffian(&a.manifest()?, &Rayon::new(a.threads)?, &mut out),
        Cmd::Index(a) => commands::cmd_index(&a.manifest()?, &mut out),
        Cmd::Sweep(a) => commands::cmd_sweep(&a.manifest()?, &Rayon::new(a.threads)?, &mut out),
        Cmd::Selftest { run, inject_sign_fault } => {
            commands::cmd_selftest(&run.manifest()?, inject_sign_fault, &Rayon::new(run.threads)?, &mut out)
        }
        Cmd::Efts { op, inputs, delta, vars, cap } => {
            let op = match op {
                OpArg::Delta => EftsOp::Delta,
                OpArg::Cartan => EftsOp::Cartan,
                OpArg::Concordance => EftsOp::Concordance,
            };
            commands::cmd_efts(&EftsArgs { op, inputs, delta, vars, cap }, &mut out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(s) => ExitCode::from(s.code()),
        Err(e) => {
            let _ = io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(USAGE_EXIT)
        }
    }
}
