//! `ebc`: rate regions, scheduling, simulation and density sizing for the
//! erasure broadcast channel with location-based state estimates.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use ebc_core::experiments::{self, ExperimentConfig};
use ebc_core::region::{
    baseline_regions, binding_constraints, fmt_sig, region_polygon, sym_rate_closed_forms, sym_rate_direct, AlphaTriple,
};
use ebc_core::sim::{self, policy_from_solution, Policy};
use ebc_core::solver::{self, Objective, SolveOptions};
use ebc_core::state::{load_joint, toy_model_joint, write_joint, Geometry, JointStateTable, VehicleProfile};
use ebc_core::Error;

/// Seed used when neither the flag nor the config file sets one.
const DEFAULT_SEED: u64 = 20_190_601;
const DEFAULT_RB: f64 = 0.2;
const DEFAULT_TS: f64 = 10.0;

#[derive(Parser, Debug)]
#[command(
    name = "ebc",
    version,
    about = "Erasure broadcast channel rate regions with location-based state estimates"
)]
struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for `reproduce` outputs.
    #[arg(long, global = true, env = "EBC_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Significant digits in printed numbers.
    #[arg(long, global = true)]
    digits: Option<usize>,
    /// Omit timestamp fields so repeated runs are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    /// Radio-site density per km².
    #[arg(long)]
    lambda: Option<f64>,
    /// LoS ball radius, km (default 0.2).
    #[arg(long)]
    rb: Option<f64>,
    /// Age of the location report, s (default 10).
    #[arg(long)]
    ts: Option<f64>,
    /// Vehicle velocities in km/h, one per receiver.
    #[arg(long = "v", num_args = 1..)]
    velocities: Option<Vec<f64>>,
    /// Joint table CSV (`s,shat,p`) instead of the geometric model.
    #[arg(long, conflicts_with_all = ["lambda", "rb", "ts", "velocities"])]
    joint: Option<PathBuf>,
    /// Accept a joint whose estimate marginals disagree with its state marginals.
    #[arg(long)]
    allow_marginal_mismatch: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the joint table of states and estimates.
    Model {
        #[command(flatten)]
        model: ModelArgs,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vertices of the two-receiver region, counter-clockwise.
    Region {
        #[command(flatten)]
        model: ModelArgs,
        /// Also print the feedback-only and TDMA regions.
        #[arg(long)]
        baselines: bool,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Symmetric rate with its binding weight.
    Symrate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Scheduling weights for any receiver count.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Symmetric)]
        objective: ObjectiveArg,
        /// Per-receiver weights for the weighted objective.
        #[arg(long, num_args = 1..)]
        weights: Option<Vec<f64>>,
        /// Number of starting points (default 10).
        #[arg(long)]
        starts: Option<usize>,
        /// Alternation rounds per start (default 200).
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Same scheduling weights for every estimate.
        #[arg(long)]
        alpha_constant: bool,
        /// Leave top-layer downgrading weights free.
        #[arg(long)]
        free_top_layer_beta: bool,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slot-level simulation of a two-receiver policy.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Slots to simulate (default 1000000).
        #[arg(long)]
        slots: Option<u64>,
        /// Random seed (default 20190601).
        #[arg(long)]
        seed: Option<u64>,
        /// Solution JSON from `solve`; the optimal policy is computed if absent.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Fraction of private and mixed weight moved to the common queue.
        #[arg(long, default_value_t = 0.0)]
        backoff: f64,
        /// Per-slot trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smallest site density reaching a target symmetric rate.
    SizeDensity {
        /// Target symmetric rate in (0, 1).
        #[arg(long)]
        target: f64,
        /// Common vehicle velocity, km/h.
        #[arg(long = "v")]
        velocity: f64,
        /// LoS ball radius, km (default 0.2).
        #[arg(long)]
        rb: Option<f64>,
        /// Age of the location report, s (default 10).
        #[arg(long)]
        ts: Option<f64>,
        /// Upper end of the density search, per km² (default 50).
        #[arg(long)]
        lambda_hi: Option<f64>,
        /// Bisection tolerance on the density (default 1e-4).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Write figure datasets to the output directory.
    Reproduce {
        /// Figure dataset to write.
        #[arg(long, value_parser = ["3", "4"])]
        fig: String,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ObjectiveArg {
    Symmetric,
    Weighted,
}

/// Config file grammar: top-level model and run keys, plus an optional
/// `[experiments]` table.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    lambda: Option<f64>,
    rb: Option<f64>,
    ts: Option<f64>,
    velocities: Option<Vec<f64>>,
    joint: Option<PathBuf>,
    allow_marginal_mismatch: Option<bool>,
    seed: Option<u64>,
    slots: Option<u64>,
    starts: Option<usize>,
    digits: Option<usize>,
    output_dir: Option<PathBuf>,
    experiments: Option<ExperimentConfig>,
}

struct Ctx {
    file: FileConfig,
    digits: usize,
    stamp: bool,
    output_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnreachableTarget { .. } | Error::NonMonotone(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> ebc_core::Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        digits: cli.digits.or(file.digits).unwrap_or(6),
        stamp: !cli.no_timestamp,
        output_dir: cli.output_dir.clone().or_else(|| file.output_dir.clone()),
        file,
    };
    if ctx.digits == 0 || ctx.digits > 17 {
        return Err(Error::Config("digits must be between 1 and 17".into()));
    }

    match cli.command {
        Command::Model { model, out } => {
            let joint = load_model(&model, &ctx)?;
            let mut buf = Vec::new();
            write_joint(&joint, &mut buf)?;
            emit(out.as_deref(), &buf)?;
        }
        Command::Region { model, baselines, out } => {
            let joint = load_model(&model, &ctx)?;
            let poly = region_polygon(&joint)?;
            let mut text = poly.to_csv(ctx.digits);
            if baselines {
                let b = baseline_regions(&joint)?;
                text.push_str("\n# feedback_only\n");
                text.push_str(&b.feedback_only.to_csv(ctx.digits));
                text.push_str("\n# tdma\n");
                text.push_str(&b.tdma.to_csv(ctx.digits));
            }
            emit(out.as_deref(), text.as_bytes())?;
        }
        Command::Symrate { model } => {
            let joint = load_model(&model, &ctx)?;
            let (rate, cert) = sym_rate_direct(&joint)?;
            let mut v = serde_json::json!({
                "sym_rate": fmt_sig(rate, ctx.digits).parse::<f64>().unwrap_or(rate),
                "certificate": cert,
                "constraints": binding_constraints(&joint)?.into_iter().map(|(c, _)| c).collect::<Vec<_>>(),
            });
            if let Some((geom, v0)) = symmetric_geometry(&model, &ctx)? {
                v["closed_forms"] = serde_json::to_value(sym_rate_closed_forms(&geom, &VehicleProfile::new(v0)?)?)?;
            }
            emit(None, (serde_json::to_string_pretty(&v)? + "\n").as_bytes())?;
        }
        Command::Solve {
            model,
            objective,
            weights,
            starts,
            max_rounds,
            alpha_constant,
            free_top_layer_beta,
            out,
        } => {
            let joint = load_model(&model, &ctx)?;
            let objective = match (objective, weights) {
                (ObjectiveArg::Symmetric, None) => Objective::Symmetric,
                (ObjectiveArg::Weighted, Some(w)) => Objective::Weighted(w),
                (ObjectiveArg::Symmetric, Some(_)) => {
                    return Err(Error::Config("--weights needs --objective weighted".into()))
                }
                (ObjectiveArg::Weighted, None) => {
                    return Err(Error::Config("--objective weighted needs --weights".into()))
                }
            };
            let defaults = SolveOptions::default();
            let opts = SolveOptions {
                objective,
                alpha_constant,
                free_top_layer_beta,
                starts: starts.or(ctx.file.starts).unwrap_or(defaults.starts),
                max_rounds: max_rounds.unwrap_or(defaults.max_rounds),
                ..defaults
            };
            let sol = solver::solve(&joint, &opts)?;
            emit(out.as_deref(), (serde_json::to_string_pretty(&sol)? + "\n").as_bytes())?;
            if !sol.converged {
                eprintln!("warning: alternating optimisation did not converge; best incumbent written");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Simulate {
            model,
            slots,
            seed,
            policy,
            backoff,
            trace,
            out,
        } => {
            let joint = load_model(&model, &ctx)?;
            let slots = slots.or(ctx.file.slots).unwrap_or(1_000_000);
            let seed = seed.or(ctx.file.seed).unwrap_or(DEFAULT_SEED);
            let alpha = match policy {
                Some(path) => read_policy(&path)?,
                None => sim::alpha_triple_from_solution(&solver::solve(&joint, &SolveOptions::default())?)?,
            };
            let policy: Policy = policy_from_solution(&alpha, backoff)?;
            let report = match trace {
                Some(path) => {
                    let mut f = fs::File::create(&path).map_err(|source| Error::Io { path, source })?;
                    sim::run_with_trace(&joint, &policy, slots, seed, Some(&mut f))?
                }
                None => sim::run(&joint, &policy, slots, seed)?,
            };
            emit(
                out.as_deref(),
                (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
            )?;
        }
        Command::SizeDensity {
            target,
            velocity,
            rb,
            ts,
            lambda_hi,
            tol,
        } => {
            let defaults = ctx.file.experiments.clone().unwrap_or_default();
            let geom = Geometry::new(
                1.0,
                rb.or(ctx.file.rb).unwrap_or(defaults.rb),
                ts.or(ctx.file.ts).unwrap_or(defaults.ts),
            )?;
            VehicleProfile::new(velocity)?;
            let l = experiments::min_density(
                target,
                velocity,
                &geom,
                lambda_hi.unwrap_or(defaults.lambda_hi),
                tol.unwrap_or(defaults.density_tol),
            )?;
            println!("{}", fmt_sig(l, ctx.digits));
        }
        Command::Reproduce { fig } => {
            let cfg = ctx.file.experiments.clone().unwrap_or_default();
            let dir = ctx
                .output_dir
                .clone()
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let written = if fig == "3" {
                experiments::write_fig3(&dir, &experiments::fig3_regions(&cfg)?, ctx.digits, ctx.stamp)?
            } else {
                let rows = experiments::fig4_curves(&cfg)?;
                let gains = experiments::gain_report(
                    &cfg.geometry()?,
                    cfg.gain_velocity,
                    cfg.gain_target,
                    cfg.lambda_hi,
                    cfg.density_tol,
                )?;
                vec![
                    experiments::write_fig4(&dir, &rows, ctx.digits)?,
                    experiments::write_gains(&dir, &gains, ctx.stamp)?,
                ]
            };
            for p in written {
                println!("{}", p.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> ebc_core::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => io::stdout().write_all(bytes).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn load_model(model: &ModelArgs, ctx: &Ctx) -> ebc_core::Result<JointStateTable> {
    let f = &ctx.file;
    let geometry_flags =
        model.lambda.is_some() || model.rb.is_some() || model.ts.is_some() || model.velocities.is_some();
    let joint_path = if geometry_flags {
        None
    } else {
        model.joint.clone().or_else(|| f.joint.clone())
    };
    let allow = model.allow_marginal_mismatch || f.allow_marginal_mismatch.unwrap_or(false);
    if let Some(path) = joint_path {
        let (joint, warnings) = load_joint(&path, allow)?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        return Ok(joint);
    }
    let (geom, velocities) = geometry_from(model, ctx)?;
    toy_model_joint(&geom, &velocities)
}

fn geometry_from(model: &ModelArgs, ctx: &Ctx) -> ebc_core::Result<(Geometry, Vec<f64>)> {
    let f = &ctx.file;
    let need = |flag: Option<f64>, file: Option<f64>, name: &str| {
        flag.or(file)
            .ok_or_else(|| Error::Config(format!("missing --{name} (or give --joint)")))
    };
    let geom = Geometry::new(
        need(model.lambda, f.lambda, "lambda")?,
        model.rb.or(f.rb).unwrap_or(DEFAULT_RB),
        model.ts.or(f.ts).unwrap_or(DEFAULT_TS),
    )?;
    let velocities = model
        .velocities
        .clone()
        .or_else(|| f.velocities.clone())
        .ok_or_else(|| Error::Config("missing --v (or give --joint)".into()))?;
    Ok((geom, velocities))
}

/// Geometry and common velocity when the model is the symmetric two-vehicle case.
fn symmetric_geometry(model: &ModelArgs, ctx: &Ctx) -> ebc_core::Result<Option<(Geometry, f64)>> {
    if model.joint.is_some() || (ctx.file.joint.is_some() && model.lambda.is_none()) {
        return Ok(None);
    }
    let (geom, v) = geometry_from(model, ctx)?;
    Ok((v.len() == 2 && v[0] == v[1]).then(|| (geom, v[0])))
}

/// Reads the two-receiver weights from a `solve` output.
fn read_policy(path: &Path) -> ebc_core::Result<AlphaTriple> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    #[derive(Deserialize)]
    struct Saved {
        #[serde(rename = "K")]
        k: usize,
        alpha: BTreeMap<String, Vec<f64>>,
    }
    let saved: Saved = serde_json::from_str(&text)?;
    if saved.k != 2 {
        return Err(Error::NotTwoReceivers(saved.k));
    }
    let row = |key: &str| -> ebc_core::Result<[f64; 4]> {
        let v = saved
            .alpha
            .get(key)
            .ok_or_else(|| Error::InvalidPolicy(format!("policy file lacks alpha[\"{key}\"]")))?;
        <[f64; 4]>::try_from(v.as_slice())
            .map_err(|_| Error::InvalidPolicy(format!("alpha[\"{key}\"] needs 4 entries")))
    };
    let mut t = AlphaTriple {
        private1: row("{1}")?,
        private2: row("{2}")?,
        mix: row("1x2")?,
    };
    for shat in 0..4 {
        for x in [&mut t.private1[shat], &mut t.private2[shat], &mut t.mix[shat]] {
            *x = x.max(0.0);
        }
        let total = t.private1[shat] + t.private2[shat] + t.mix[shat];
        if total > 1.0 && total < 1.0 + 1e-9 {
            for x in [&mut t.private1[shat], &mut t.private2[shat], &mut t.mix[shat]] {
                *x /= total;
            }
        }
    }
    t.validate(1e-9)?;
    Ok(t)
}
