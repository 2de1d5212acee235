//! Command-line front end: `price`, `run`, `simulate`, `sweep`, `verify`.
//!
//! Exit codes: 0 success, 1 property violation (unless `--findings-ok`),
//! 2 usage or parse error.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fpdm::mechanisms::{
    run_baseline, run_baseline_expectation, run_fpdm, run_fpdm_expectation, utilities,
    ClaimThreshold, MechanismConfig, RewardMode, TieMode, UtilityVector,
};
use fpdm::network::{ActionProfile, ProfileValidation};
use fpdm::pricing::{
    expected_revenue_base, expected_revenue_fpdm, optimal_price, revenue_curve_chain,
    revenue_point, RevenuePoint,
};
use fpdm::verification::{
    check_ic, check_ir, enumerate_rooted_trees, monte_carlo_baseline_revenue,
    monte_carlo_revenue, IcOptions, IcScope, IrOptions, PropertyReport, ValuationSource,
};

use fpdm_cli::formats::{self, parse_actions, parse_tree, parse_valuations, LoadedTree};
use fpdm_cli::report::{
    self, curve_csv, distribution_record, edges_string, full, mode_name, outcome_record,
    outcome_summary, sig6, RunMeta, VerifySection,
};

#[derive(Parser)]
#[command(
    name = "fpdm",
    version,
    about = "Fixed-price diffusion mechanism: pricing, execution, simulation, and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Literal,
    Clamped,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    Strict,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Seeded,
    Expect,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    Ir,
    Ic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Unilateral,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal posted price and expected revenue for a market of x buyers.
    Price {
        /// Number of buyers the seller can reach.
        x: usize,
    },
    /// Run the diffusion mechanism (or the baseline) on an instance.
    Run {
        /// Tree file: `edge <parent> <child>` lines, seller = 0.
        #[arg(long)]
        tree: PathBuf,
        /// Valuations file: `<buyer> <decimal>` lines.
        #[arg(long)]
        valuations: PathBuf,
        /// Actions file: `<buyer> -> <children|nil>`; omitted buyers diffuse
        /// fully.
        #[arg(long)]
        actions: Option<PathBuf>,
        /// Path reward scale factor in [0, 1].
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Path reward rule: the literal payment table or the zero-floored
        /// one.
        #[arg(long, value_enum, default_value_t = ModeArg::Clamped)]
        mode: ModeArg,
        /// Claim rule; defaults to weak (>=) for the diffusion mechanism and
        /// strict (>) for the baseline.
        #[arg(long, value_enum)]
        threshold: Option<ThresholdArg>,
        #[arg(long, value_enum, default_value_t = TieArg::Seeded)]
        tiebreak: TieArg,
        /// Sell only to the seller's neighbours at one posted price.
        #[arg(long)]
        baseline: bool,
        /// Posted price for --baseline; defaults to the optimal one.
        #[arg(long)]
        price: Option<f64>,
        /// Write a machine-readable outcome record here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo revenue estimate against the closed form.
    Simulate {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        actions: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Simulate the neighbourhood baseline instead.
        #[arg(long)]
        baseline: bool,
        /// Posted price for --baseline; defaults to the optimal one.
        #[arg(long)]
        price: Option<f64>,
    },
    /// Revenue-curve CSV: `k,x,e_fpdm,e_base,e_opt,ratio`.
    Sweep {
        /// Chain scenario: x seller neighbours, one of them with a deep
        /// branch; sweeps k over [k-min, k-max].
        #[arg(long)]
        chain_x: Option<usize>,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        /// Explicit branch sizes for a single row, e.g. `5,3,2`.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive property suites over all non-isomorphic small trees.
    Verify {
        #[arg(value_enum)]
        property: PropertyArg,
        /// Maximum number of buyers per enumerated tree.
        #[arg(long, default_value_t = 5)]
        max_nodes: usize,
        /// Offset valuation grid step.
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
        /// Use this many sampled profiles per tree instead of the grid.
        #[arg(long)]
        samples: Option<u64>,
        /// Seed for sampled profiles.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Reward factors to sweep (ir default: 0,0.1,1 / ic default: 0.1).
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = ModeArg::Clamped)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        threshold: Option<ThresholdArg>,
        /// Deviation scope for ic: others truthful, or all plan profiles
        /// (at most 6 buyers).
        #[arg(long, value_enum, default_value_t = ScopeArg::Unilateral)]
        scope: ScopeArg,
        /// Report findings without failing the exit status.
        #[arg(long)]
        findings_ok: bool,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct CliError(String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<formats::FileError> for CliError {
    fn from(e: formats::FileError) -> Self {
        CliError(e.to_string())
    }
}

impl From<fpdm::Error> for CliError {
    fn from(e: fpdm::Error) -> Self {
        CliError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Price { x } => cmd_price(x),
        Command::Run {
            tree,
            valuations,
            actions,
            alpha,
            seed,
            mode,
            threshold,
            tiebreak,
            baseline,
            price,
            out,
        } => cmd_run(RunArgs {
            tree,
            valuations,
            actions,
            alpha,
            seed,
            mode,
            threshold,
            tiebreak,
            baseline,
            price,
            out,
        }),
        Command::Simulate { tree, actions, reps, seed, alpha, baseline, price } => {
            cmd_simulate(tree, actions, reps, seed, alpha, baseline, price)
        }
        Command::Sweep { chain_x, k_min, k_max, sizes, out } => {
            cmd_sweep(chain_x, k_min, k_max, sizes, out)
        }
        Command::Verify {
            property,
            max_nodes,
            grid_step,
            samples,
            seed,
            alphas,
            mode,
            threshold,
            scope,
            findings_ok,
            out,
        } => cmd_verify(VerifyArgs {
            property,
            max_nodes,
            grid_step,
            samples,
            seed,
            alphas,
            mode,
            threshold,
            scope,
            findings_ok,
            out,
        }),
    }
}

fn cmd_price(x: usize) -> Result<ExitCode, CliError> {
    let price: f64 = optimal_price(x);
    let revenue: f64 = expected_revenue_base(x);
    println!("x = {x}");
    println!("p_opt = {}", sig6(price));
    println!("e_base = {}", sig6(revenue));
    if x == 0 {
        println!("note: no buyers; the price is the x -> 0 limit 1/e");
    }
    Ok(ExitCode::SUCCESS)
}

struct RunArgs {
    tree: PathBuf,
    valuations: PathBuf,
    actions: Option<PathBuf>,
    alpha: f64,
    seed: u64,
    mode: ModeArg,
    threshold: Option<ThresholdArg>,
    tiebreak: TieArg,
    baseline: bool,
    price: Option<f64>,
    out: Option<PathBuf>,
}

fn build_config(
    alpha: f64,
    mode: ModeArg,
    threshold: Option<ThresholdArg>,
    tiebreak: TieArg,
    baseline: bool,
) -> Result<MechanismConfig<f64>, CliError> {
    let mut config = if baseline {
        MechanismConfig::baseline()
    } else {
        MechanismConfig::fpdm(alpha)?
    };
    config.reward_mode = match mode {
        ModeArg::Literal => RewardMode::Literal,
        ModeArg::Clamped => RewardMode::Clamped,
    };
    if let Some(t) = threshold {
        config.threshold = match t {
            ThresholdArg::Strict => ClaimThreshold::Strict,
            ThresholdArg::Weak => ClaimThreshold::Weak,
        };
    }
    config.tie_mode = match tiebreak {
        TieArg::Seeded => TieMode::Seeded,
        TieArg::Expect => TieMode::Expectation,
    };
    Ok(config)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, CliError> {
    let loaded = parse_tree(&args.tree.display().to_string(), &read(&args.tree)?)?;
    let vals =
        parse_valuations(&args.valuations.display().to_string(), &read(&args.valuations)?, &loaded)?;
    let actions = match &args.actions {
        Some(path) => {
            parse_actions(&path.display().to_string(), &read(path)?, &loaded, ProfileValidation::Strict)?
        }
        None => ActionProfile::truthful(&loaded.tree),
    };
    let config = build_config(args.alpha, args.mode, args.threshold, args.tiebreak, args.baseline)?;

    let (record, summary) = if args.baseline {
        let neighbours = loaded.tree.seller_children().to_vec();
        let mut values = Vec::with_capacity(neighbours.len());
        for &c in &neighbours {
            values.push(vals.get(c).ok_or_else(|| {
                CliError(format!("missing valuation for seller neighbour {}", loaded.label(c)))
            })?);
        }
        let price = args.price.unwrap_or_else(|| optimal_price(neighbours.len()));
        let mut labels = vec![0u64];
        labels.extend(neighbours.iter().map(|&c| loaded.label(c)));
        let star: Vec<(usize, usize)> = (1..=neighbours.len()).map(|i| (0, i)).collect();
        let view = LoadedTree::with_labels(
            fpdm::network::SocialTree::from_edges(&star).expect("star is a valid tree"),
            labels,
        );
        match config.tie_mode {
            TieMode::Seeded => {
                let outcome = run_baseline(&values, price, &config, args.seed)?;
                let view_vals = fpdm::mechanisms::ValuationProfile::from_full(&values)?;
                let u = utilities(&outcome, &view_vals)?;
                let meta = RunMeta { mechanism: "baseline", config: &config, seed: args.seed };
                let record = outcome_record(&view, &meta, &outcome, &u);
                let summary = outcome_summary(&view, &outcome, &u);
                (record, summary)
            }
            TieMode::Expectation => {
                let dist = run_baseline_expectation(&values, price, &config)?;
                let view_vals = fpdm::mechanisms::ValuationProfile::from_full(&values)?;
                let us: Vec<UtilityVector<f64>> = dist
                    .outcomes()
                    .iter()
                    .map(|w| utilities(&w.outcome, &view_vals))
                    .collect::<Result<_, _>>()?;
                let meta = RunMeta { mechanism: "baseline", config: &config, seed: args.seed };
                let record = distribution_record(&view, &meta, &dist, &us);
                let mut summary = String::new();
                for (w, u) in dist.outcomes().iter().zip(&us) {
                    summary.push_str(&format!("outcome with weight {}:\n", sig6(w.weight)));
                    summary.push_str(&outcome_summary(&view, &w.outcome, u));
                }
                (record, summary)
            }
        }
    } else {
        let meta = RunMeta { mechanism: "fpdm", config: &config, seed: args.seed };
        match config.tie_mode {
            TieMode::Seeded => {
                let outcome = run_fpdm(&loaded.tree, &actions, &vals, &config, args.seed)?;
                let u = utilities(&outcome, &vals)?;
                let record = outcome_record(&loaded, &meta, &outcome, &u);
                let summary = outcome_summary(&loaded, &outcome, &u);
                (record, summary)
            }
            TieMode::Expectation => {
                let dist = run_fpdm_expectation(&loaded.tree, &actions, &vals, &config)?;
                let us: Vec<UtilityVector<f64>> = dist
                    .outcomes()
                    .iter()
                    .map(|w| utilities(&w.outcome, &vals))
                    .collect::<Result<_, _>>()?;
                let record = distribution_record(&loaded, &meta, &dist, &us);
                let mut summary = String::new();
                for (w, u) in dist.outcomes().iter().zip(&us) {
                    summary.push_str(&format!("outcome with weight {}:\n", sig6(w.weight)));
                    summary.push_str(&outcome_summary(&loaded, &w.outcome, u));
                }
                (record, summary)
            }
        }
    };
    print!("{summary}");
    if let Some(path) = &args.out {
        write_out(path, &record)?;
        println!("record written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(
    tree: PathBuf,
    actions: Option<PathBuf>,
    reps: usize,
    seed: u64,
    alpha: f64,
    baseline: bool,
    price: Option<f64>,
) -> Result<ExitCode, CliError> {
    let loaded = parse_tree(&tree.display().to_string(), &read(&tree)?)?;
    let actions = match &actions {
        Some(path) => {
            parse_actions(&path.display().to_string(), &read(path)?, &loaded, ProfileValidation::Strict)?
        }
        None => ActionProfile::truthful(&loaded.tree),
    };
    let (estimate, target, label) = if baseline {
        let x = loaded.tree.seller_children().len();
        let p = price.unwrap_or_else(|| optimal_price(x));
        let estimate =
            monte_carlo_baseline_revenue(x, p, ClaimThreshold::Strict, reps, seed)?;
        let target = (1.0 - p.powi(x as i32)) * p;
        (estimate, target, "baseline")
    } else {
        let config = MechanismConfig::fpdm(alpha)?;
        let estimate = monte_carlo_revenue(&loaded.tree, &actions, &config, reps, seed)?;
        let effective = loaded.tree.effective_tree(&actions, ProfileValidation::Strict)?;
        let sizes: Vec<usize> = effective.branches().iter().map(|b| b.size).collect();
        let target = expected_revenue_fpdm(&sizes)?;
        (estimate, target, "fpdm")
    };
    println!("mechanism = {label}");
    println!("replications = {}", estimate.replications);
    println!("seed = {}", estimate.seed);
    println!("mean = {}", full(estimate.mean));
    println!("std_error = {}", full(estimate.std_error));
    println!("closed_form = {}", full(target));
    println!("z = {}", sig6(estimate.z_score(target)));
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    chain_x: Option<usize>,
    k_min: Option<usize>,
    k_max: Option<usize>,
    sizes: Option<Vec<usize>>,
    out: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let points: Vec<RevenuePoint<f64>> = match (chain_x, sizes) {
        (Some(x), None) => {
            let k_max =
                k_max.ok_or_else(|| CliError("--chain-x needs --k-max".to_string()))?;
            let k_min = k_min.unwrap_or(x);
            revenue_curve_chain(x, k_min, k_max)?
        }
        (None, Some(mut sizes)) => {
            sizes.sort_unstable_by(|a, b| b.cmp(a));
            vec![revenue_point(&sizes)?]
        }
        _ => {
            return Err(CliError(
                "choose exactly one scenario: --chain-x <x> or --sizes <list>".to_string(),
            ))
        }
    };
    let csv = curve_csv(&points);
    match &out {
        Some(path) => {
            write_out(path, &csv)?;
            println!("wrote {} rows to {}", points.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

struct VerifyArgs {
    property: PropertyArg,
    max_nodes: usize,
    grid_step: f64,
    samples: Option<u64>,
    seed: u64,
    alphas: Option<Vec<f64>>,
    mode: ModeArg,
    threshold: Option<ThresholdArg>,
    scope: ScopeArg,
    findings_ok: bool,
    out: Option<PathBuf>,
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, CliError> {
    // Refuse oversized full-scope runs up front rather than erroring midway
    // through the enumeration.
    if matches!(args.property, PropertyArg::Ic)
        && matches!(args.scope, ScopeArg::Full)
        && args.max_nodes > 6
    {
        return Err(CliError(format!(
            "full scope supports at most 6 buyers, got --max-nodes {}",
            args.max_nodes
        )));
    }
    let source = match args.samples {
        Some(count) => ValuationSource::Sampled { count, seed: args.seed },
        None => ValuationSource::Grid { step: args.grid_step },
    };
    let alphas = args.alphas.clone().unwrap_or_else(|| match args.property {
        PropertyArg::Ir => vec![0.0, 0.1, 1.0],
        PropertyArg::Ic => vec![0.1],
    });
    let trees = enumerate_rooted_trees(args.max_nodes)?;

    let mut header: Vec<(String, String)> = vec![
        (
            "property".to_string(),
            match args.property {
                PropertyArg::Ir => "ir".to_string(),
                PropertyArg::Ic => "ic".to_string(),
            },
        ),
        ("max_nodes".to_string(), args.max_nodes.to_string()),
        (
            "source".to_string(),
            match source {
                ValuationSource::Grid { step } => format!("grid step {}", full(step)),
                ValuationSource::Sampled { count, seed } => {
                    format!("sampled count {count} seed {seed}")
                }
            },
        ),
        (
            "alphas".to_string(),
            alphas.iter().map(|&a| full(a)).collect::<Vec<_>>().join(","),
        ),
        (
            "mode".to_string(),
            mode_name(match args.mode {
                ModeArg::Literal => RewardMode::Literal,
                ModeArg::Clamped => RewardMode::Clamped,
            })
            .to_string(),
        ),
        ("trees".to_string(), trees.len().to_string()),
    ];
    if matches!(args.property, PropertyArg::Ic) {
        header.push((
            "scope".to_string(),
            match args.scope {
                ScopeArg::Unilateral => "unilateral".to_string(),
                ScopeArg::Full => "full".to_string(),
            },
        ));
    }

    let mut reports: Vec<(usize, String, f64, PropertyReport<f64>)> = Vec::new();
    for (tree_index, tree) in trees.iter().enumerate() {
        for &alpha in &alphas {
            let config = build_config(alpha, args.mode, args.threshold, TieArg::Expect, false)?;
            let report = match args.property {
                PropertyArg::Ir => {
                    let opts = IrOptions::new(source, config);
                    check_ir(tree, &opts)?
                }
                PropertyArg::Ic => {
                    let opts = IcOptions::new(source, config).with_scope(match args.scope {
                        ScopeArg::Unilateral => IcScope::Unilateral,
                        ScopeArg::Full => IcScope::Full,
                    });
                    check_ic(tree, &opts)?
                }
            };
            reports.push((tree_index, edges_string(tree), alpha, report));
        }
    }

    let sections: Vec<VerifySection<'_>> = reports
        .iter()
        .map(|(tree_index, edges, alpha, report)| VerifySection {
            tree_index: *tree_index,
            edges: edges.clone(),
            alpha: *alpha,
            report,
        })
        .collect();
    let text = report::verify_report(&header, &sections);
    print!("{text}");
    if let Some(path) = &args.out {
        write_out(path, &text)?;
    }

    let violations: u64 = reports.iter().map(|(_, _, _, r)| r.violation_count).sum();
    let breaches: usize = reports.iter().map(|(_, _, _, r)| r.invariant_breaches.len()).sum();
    if breaches > 0 {
        return Ok(ExitCode::from(1));
    }
    if violations > 0 && !args.findings_ok {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_defaults_follow_mechanism() {
        let fpdm_config =
            build_config(0.1, ModeArg::Clamped, None, TieArg::Seeded, false).unwrap();
        assert_eq!(fpdm_config.threshold, ClaimThreshold::Weak);
        let base_config =
            build_config(0.1, ModeArg::Clamped, None, TieArg::Seeded, true).unwrap();
        assert_eq!(base_config.threshold, ClaimThreshold::Strict);
        let forced =
            build_config(0.1, ModeArg::Clamped, Some(ThresholdArg::Strict), TieArg::Seeded, false)
                .unwrap();
        assert_eq!(forced.threshold, ClaimThreshold::Strict);
    }
}
