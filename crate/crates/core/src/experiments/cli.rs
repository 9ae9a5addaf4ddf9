//! Command-line front end. Settings are layered: built-in defaults, then
//! flags, then the `--config` file, which wins.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use super::config::{parse_eps_ladder, parse_model_param, ConfigFile, ExperimentConfig};
use super::io::{output_path, write_identity_csv, write_json, write_rows};
use super::{covariance, diagnostics, identity, isometry, sweep};
use crate::error::Result;
use crate::paths::{PathContext, VolterraWeights};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rlfbm", version, about = "Forward integrals against Riemann-Liouville fBm and their martingale representation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write simulated W and B paths, one CSV per path.
    Simulate(RunArgs),
    /// Monte Carlo covariance of B on coarse nodes against the exact kernel.
    Covariance(RunArgs),
    /// Forward estimates on the ε ladder against the representation.
    Identity(RunArgs),
    /// Identity run for a deterministic integrand, with the Wiener variance oracle.
    Wiener(RunArgs),
    /// Integrability diagnostics at n and 2n steps.
    Diagnostics(RunArgs),
    /// Second-moment expansion of the Nelson-derivative integral.
    Isometry(RunArgs),
    /// Representation and forward estimate at n/4, n/2 and n steps on shared paths.
    Sweep(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Hurst parameter, in (1/2, 1).
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Time horizon T.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Grid steps n on [0, T].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Extra grid steps past T (must cover the largest ε).
    #[arg(long)]
    pub ext_steps: Option<usize>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// zero | constant | time | linear | square | cube | cos | fracmart
    #[arg(long)]
    pub model: Option<String>,
    /// Model parameter, repeatable: c=2, alpha=0.25, z=one|cos.
    #[arg(long = "model-param", value_name = "K=V")]
    pub model_param: Vec<String>,
    /// Comma-separated multiples of Δ, e.g. "64Δ,32Δ,16Δ,8Δ,4Δ".
    #[arg(long)]
    pub eps_ladder: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// JSON config file; its fields override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl RunArgs {
    /// Defaults, then flags, then the config file.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(v) = self.hurst {
            cfg.hurst = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.paths {
            cfg.paths = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.model {
            cfg.model = v.clone();
        }
        for p in &self.model_param {
            let (k, v) = parse_model_param(p)?;
            cfg.model_params.insert(k, v);
        }
        if let Some(text) = &self.eps_ladder {
            cfg.eps_ladder = parse_eps_ladder(text)?;
            cfg.ext_steps = cfg.eps_ladder.iter().copied().max().unwrap_or(cfg.ext_steps);
        }
        if let Some(v) = self.ext_steps {
            cfg.ext_steps = v;
        }
        cfg.out = Some(self.out.clone().unwrap_or_else(|| PathBuf::from("results")));
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(path) = &self.config {
            cfg.apply(ConfigFile::load(path)?)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

pub fn run(cmd: &Command) -> Result<()> {
    let args = match cmd {
        Command::Simulate(a)
        | Command::Covariance(a)
        | Command::Identity(a)
        | Command::Wiener(a)
        | Command::Diagnostics(a)
        | Command::Isometry(a)
        | Command::Sweep(a) => a,
    };
    let cfg = args.resolve()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    match cmd {
        Command::Simulate(_) => simulate(&cfg, &out),
        Command::Covariance(_) => {
            let r = covariance::run_covariance_validation(&cfg)?;
            write_json(&output_path(&out, "covariance.json")?, &r)?;
            println!(
                "covariance: max relative error {:.3e}, max |z| {:.2}, Var(B_T) {:.5} (control variate {:.5}, exact {:.5})",
                r.max_rel_error, r.max_abs_z, r.terminal.plain, r.terminal.control_variate, r.terminal.exact
            );
            Ok(())
        }
        Command::Identity(_) | Command::Wiener(_) => {
            let (name, run) = if matches!(cmd, Command::Wiener(_)) {
                ("wiener", identity::run_wiener_experiment(&cfg)?)
            } else {
                ("identity", identity::run_identity_experiment(&cfg)?)
            };
            let csv = output_path(&out, &format!("{name}.csv"))?;
            let f = super::io::create(&csv)?;
            write_identity_csv(&run.rows(), f)?;
            write_json(&output_path(&out, &format!("{name}.json"))?, &run.summary)?;
            let s = &run.summary;
            println!(
                "{name} [{}]: rhs mean {:.5} ± {:.5}, variance {:.5}, drift {:.5}",
                s.model, s.rhs_total.mean, s.rhs_total.stderr, s.rhs_total.variance, s.drift
            );
            for e in &s.per_eps {
                println!("  ε = {:>3}Δ  gap {:.4e} ± {:.1e}  ratio {:.4}", e.eps_steps, e.gap.mean, e.gap.stderr, e.gap_ratio);
            }
            Ok(())
        }
        Command::Diagnostics(_) => {
            let r = diagnostics::run_assumption_diagnostics(&cfg)?;
            write_json(&output_path(&out, "diagnostics.json")?, &r)?;
            for e in &r.entries {
                println!("{}: n {:?}, 2n {:?}, {:?}", e.name, e.coarse, e.fine, e.status);
            }
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Isometry(_) => {
            let r = isometry::run_isometry_expansion(&cfg)?;
            write_rows(&output_path(&out, "isometry.csv")?, &r.rows)?;
            write_json(&output_path(&out, "isometry.json")?, &r)?;
            println!(
                "isometry [{}]: lhs {:.5e}, rhs {:.5e}, difference {:.2e} ± {:.2e}, agree {}",
                r.model, r.lhs.mean, r.rhs.mean, r.difference.mean, r.difference.stderr, r.agree
            );
            Ok(())
        }
        Command::Sweep(_) => {
            let r = sweep::run_refinement_sweep(&cfg)?;
            write_rows(&output_path(&out, "sweep.csv")?, &r.rows)?;
            write_json(&output_path(&out, "sweep.json")?, &r)?;
            for l in &r.levels {
                println!(
                    "n = {:>5}: chain-rule rmse {:?}, forward rmse {:.4e}",
                    l.steps, l.chain_rule_rmse, l.forward_rmse
                );
            }
            Ok(())
        }
    }
}

fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let grid = cfg.grid()?;
    let weights = Arc::new(VolterraWeights::new(cfg.hurst_config()?, grid));
    for p in 0..cfg.paths as u64 {
        let ctx = PathContext::simulate(weights.clone(), cfg.seed, p)?;
        ctx.save_csv(&output_path(out, &format!("path_{p:05}.csv"))?)?;
    }
    println!("wrote {} paths to {}", cfg.paths, out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> RunArgs {
        let mut v = vec!["rlfbm", "identity"];
        v.extend_from_slice(extra);
        match Cli::try_parse_from(v).unwrap().command {
            Command::Identity(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_defaults() {
        let c = args(&["--hurst", "0.6", "--model-param", "c=2", "--model", "constant", "--eps-ladder", "128Δ,4Δ"])
            .resolve()
            .unwrap();
        assert_eq!(c.hurst, 0.6);
        assert_eq!(c.model_params["c"], "2");
        assert_eq!(c.eps_ladder, vec![128, 4]);
        assert_eq!(c.ext_steps, 128);
    }

    #[test]
    fn config_file_overrides_flags() {
        let dir = std::env::temp_dir().join(format!("rlfbm-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("c.json");
        std::fs::write(&f, r#"{"hurst": 0.9, "paths": 7}"#).unwrap();
        let c = args(&["--hurst", "0.6", "--paths", "3", "--config", f.to_str().unwrap()]).resolve().unwrap();
        assert_eq!((c.hurst, c.paths), (0.9, 7));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(cli_main(["rlfbm", "identity", "--hurst", "0.5"]), EXIT_VALIDATION);
        assert_eq!(cli_main(["rlfbm", "identity", "--eps-ladder", "3.7Δ"]), EXIT_VALIDATION);
        assert_eq!(cli_main(["rlfbm", "bogus"]), EXIT_VALIDATION);
        assert_eq!(cli_main(["rlfbm", "--help"]), EXIT_OK);
    }
}
