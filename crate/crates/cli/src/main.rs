use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slhz_core::harness::{self, ArgmaxRecord, DecoderKind, ExperimentConfig, ExperimentKind};
use slhz_core::{Error, Result};

#[derive(Parser)]
#[command(name = "slhz", version, about = "Decoding experiments on parity-encoded spin systems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instances with exact ground states.
    GenInstances {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        coupling_bound: Option<f64>,
        #[arg(long)]
        no_ground_truth: bool,
        #[arg(long)]
        instance_dir: Option<PathBuf>,
    },
    /// Failure probability of BF / BP / MCMC decoding under i.i.d. noise.
    IidBench {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        decoders: Option<Vec<String>>,
        #[arg(long)]
        trials: Option<usize>,
        /// 5000 trials per point.
        #[arg(long, conflicts_with = "trials")]
        full: bool,
        #[arg(long)]
        bp_prior: Option<f64>,
        #[arg(long)]
        mcmc_gamma: Option<f64>,
    },
    /// Success-probability landscapes of MCMC and hybrid decoding.
    HybridLandscape(LandscapeFlags),
    /// Averaged error matrices at the best landscape points.
    ErrorMatrix {
        #[command(flatten)]
        landscape: LandscapeFlags,
        /// Argmax table of a previous landscape run.
        #[arg(long)]
        argmax: Option<PathBuf>,
    },
    /// Decode one matrix and write per-iteration frames.
    DecodeOne {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        decoder: Option<String>,
        /// Instance file providing the ground truth.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        bp_prior: Option<f64>,
    },
    /// Compare K = 4 chains with the exact Boltzmann distribution.
    SamplerValidate {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run the experiment named by `kind` in the config file.
    Run,
}

#[derive(Args)]
struct LandscapeFlags {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    instance_dir: Option<PathBuf>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    grid_beta: Option<usize>,
    #[arg(long)]
    grid_gamma: Option<usize>,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    #[arg(long)]
    gamma_min: Option<f64>,
    #[arg(long)]
    gamma_max: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl LandscapeFlags {
    fn apply(self, cfg: &mut ExperimentConfig) {
        let l = &mut cfg.landscape;
        set(&mut l.k, self.k);
        set(&mut l.n_instances, self.instances);
        set(&mut l.chains, self.chains);
        set(&mut l.grid_beta, self.grid_beta);
        set(&mut l.grid_gamma, self.grid_gamma);
        set(&mut l.beta_min, self.beta_min);
        set(&mut l.beta_max, self.beta_max);
        set(&mut l.gamma_min, self.gamma_min);
        set(&mut l.gamma_max, self.gamma_max);
        if self.instance_dir.is_some() {
            l.instance_dir = self.instance_dir;
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.seed, cli.common.seed);
    set(&mut cfg.output_dir, cli.common.output_dir);
    if cli.common.threads.is_some() {
        cfg.threads = cli.common.threads;
    }

    let kind = match cli.command {
        Command::GenInstances {
            k,
            count,
            coupling_bound,
            no_ground_truth,
            instance_dir,
        } => {
            set(&mut cfg.instances.k, k);
            set(&mut cfg.instances.count, count);
            set(&mut cfg.instances.coupling_bound, coupling_bound);
            if no_ground_truth {
                cfg.instances.with_ground_truth = false;
            }
            if instance_dir.is_some() {
                cfg.landscape.instance_dir = instance_dir;
            }
            ExperimentKind::GenInstances
        }
        Command::IidBench {
            sizes,
            epsilons,
            decoders,
            trials,
            full,
            bp_prior,
            mcmc_gamma,
        } => {
            set(&mut cfg.iid.sizes, sizes);
            set(&mut cfg.iid.epsilons, epsilons);
            if let Some(names) = decoders {
                cfg.iid.decoders = names.iter().map(|n| DecoderKind::parse(n)).collect::<Result<_>>()?;
            }
            set(&mut cfg.iid.trials, trials);
            if full {
                cfg.iid.trials = 5000;
            }
            if bp_prior.is_some() {
                cfg.iid.bp_prior = bp_prior;
            }
            set(&mut cfg.iid.mcmc_gamma, mcmc_gamma);
            ExperimentKind::IidBench
        }
        Command::HybridLandscape(flags) => {
            flags.apply(&mut cfg);
            ExperimentKind::HybridLandscape
        }
        Command::ErrorMatrix { landscape, argmax } => {
            landscape.apply(&mut cfg);
            return error_matrix(&cfg, argmax);
        }
        Command::DecodeOne {
            input,
            k,
            decoder,
            instance,
            bp_prior,
        } => {
            if input.is_some() {
                cfg.decode.input = input;
            }
            if k.is_some() {
                cfg.decode.k = k;
            }
            if let Some(d) = decoder {
                cfg.decode.decoder = DecoderKind::parse(&d)?;
            }
            if instance.is_some() {
                cfg.decode.instance = instance;
            }
            set(&mut cfg.decode.bp_prior, bp_prior);
            ExperimentKind::DecodeOne
        }
        Command::SamplerValidate { steps } => {
            set(&mut cfg.validate.steps, steps);
            ExperimentKind::SamplerValidate
        }
        Command::Run => cfg
            .kind
            .ok_or_else(|| Error::Config("`run` needs `kind` in the config file".into()))?,
    };
    execute(&cfg, kind)
}

fn error_matrix(cfg: &ExperimentConfig, argmax: Option<PathBuf>) -> Result<()> {
    let path = argmax.unwrap_or_else(|| cfg.output_dir.join("landscape_argmax.csv"));
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run hybrid-landscape first",
            path.display()
        )));
    }
    let records = ArgmaxRecord::load_all(&path)?;
    let reports = harness::run_error_matrix_report(cfg, &records)?;
    let paths = harness::write_error_matrices(&cfg.output_dir, &reports, cfg.seed)?;
    for (r, p) in reports.iter().zip(&paths) {
        let off_diag: Vec<f64> = (0..r.matrix.k)
            .flat_map(|i| (0..r.matrix.k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| r.matrix.get(i, j))
            .collect();
        let mean = off_diag.iter().sum::<f64>() / off_diag.len() as f64;
        println!(
            "instance {:2} set {} beta {:.3} gamma {:.3} mean <e> {:.4} -> {}",
            r.instance,
            r.set,
            r.beta,
            r.gamma,
            mean,
            p.display()
        );
    }
    Ok(())
}

fn execute(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    match kind {
        ExperimentKind::GenInstances => {
            for p in harness::gen_instances(cfg)? {
                println!("{}", p.display());
            }
        }
        ExperimentKind::IidBench => {
            let table = harness::run_iid_bench(cfg)?;
            let path = table.write(&cfg.output_dir)?;
            for r in &table.records {
                println!(
                    "{:5} K={:3} eps={:<5} P_fail={:.4} (+/- {:.4}) ties={}",
                    r.decoder.as_str(),
                    r.k,
                    r.epsilon,
                    r.failure_probability(),
                    r.sigma(),
                    r.ties
                );
            }
            println!("wrote {}", path.display());
        }
        ExperimentKind::HybridLandscape => {
            let table = harness::run_hybrid_landscape(cfg)?;
            table.write(&cfg.output_dir, &cfg.landscape)?;
            for a in &table.argmax {
                println!(
                    "instance {:2}: A beta {:.2} gamma {:.3} p {:.3} | B beta {:.2} gamma {:.3} p {:.3}",
                    a.instance, a.a.beta, a.a.gamma, a.a.p, a.b.beta, a.b.gamma, a.b.p
                );
            }
            println!("wrote {}", cfg.output_dir.join("landscape.csv").display());
        }
        ExperimentKind::ErrorMatrix => return error_matrix(cfg, None),
        ExperimentKind::DecodeOne => {
            let report = harness::decode_one(cfg)?;
            report.write(&cfg.output_dir)?;
            println!(
                "{} after {} iteration(s), flips {:?}",
                report.outcome.status.as_str(),
                report.outcome.iterations_used,
                report.outcome.flips_per_iteration
            );
        }
        ExperimentKind::SamplerValidate => {
            let rows = harness::sampler_validate(cfg)?;
            let path = cfg.output_dir.join("sampler_validate.csv");
            harness::validation_csv(&rows, cfg.seed).write(&path)?;
            for r in &rows {
                println!(
                    "{:?} beta {} gamma {}: TV {:.4}",
                    r.kernel, r.beta, r.gamma, r.total_variation
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
