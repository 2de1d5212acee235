//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Criteria 2 and 4 pin golden constants that were derived from rounded
//! display values; full-precision evaluation misses them by a hair (payment
//! golden, by 1.7e-6 beyond its tolerance) or at a single boundary point
//! (revenue dominance at k = x, where no diffusion happens). Those two tests
//! assert the criteria exactly as stated and fail with the numbers spelled
//! out; everything else is green.

use std::path::PathBuf;
use std::process::Command;

use fpdm::mechanisms::{
    run_fpdm, run_fpdm_expectation, utilities, ClaimThreshold, MechanismConfig, RewardMode,
    ValuationProfile,
};
use fpdm::network::{ActionProfile, SocialTree};
use fpdm::pricing::{
    branch_prices, brute_force_optimal_price, chain_case_revenue, expected_revenue_base,
    expected_revenue_fpdm, expected_revenue_opt, optimal_price, revenue_curve_chain,
};
use fpdm::verification::{
    check_ic, check_ir, enumerate_rooted_trees, monte_carlo_baseline_revenue,
    monte_carlo_revenue, IcOptions, IrOptions, ValuationSource,
};

fn criterion(number: usize, name: &str, run: impl FnOnce() -> Result<(), String>) {
    match run() {
        Ok(()) => println!("[acceptance] criterion {number} ({name}): PASS"),
        Err(message) => {
            println!("[acceptance] criterion {number} ({name}): FAIL - {message}");
            panic!("criterion {number} ({name}): {message}");
        }
    }
}

fn ensure(condition: bool, message: impl Into<String>) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message.into())
    }
}

fn reference_tree() -> SocialTree {
    SocialTree::from_edges(&[
        (0, 1),
        (0, 2),
        (0, 3),
        (1, 4),
        (1, 5),
        (1, 6),
        (5, 10),
        (2, 7),
        (2, 8),
        (3, 9),
    ])
    .unwrap()
}

fn reference_valuations() -> ValuationProfile<f64> {
    ValuationProfile::from_full(&[0.6, 0.7, 0.7, 0.5, 0.8, 0.9, 0.3, 0.4, 0.1, 0.5]).unwrap()
}

/// A tree whose branches are chains of the given sizes.
fn tree_with_branch_sizes(sizes: &[usize]) -> SocialTree {
    let mut edges = Vec::new();
    let mut next = 1usize;
    for &size in sizes {
        let mut parent = 0usize;
        for _ in 0..size {
            edges.push((parent, next));
            parent = next;
            next += 1;
        }
    }
    SocialTree::from_edges(&edges).unwrap()
}

#[test]
fn criterion_1_pricing_goldens() {
    criterion(1, "pricing goldens", || {
        let p3: f64 = optimal_price(3);
        ensure((p3 - 0.6300).abs() <= 5e-4, format!("optimal_price(3) = {p3}, want 0.6300"))?;
        let decomp = reference_tree().branches();
        let prices: Vec<f64> = branch_prices(&decomp);
        for (price, golden) in prices.iter().zip([0.699, 0.743, 0.760]) {
            ensure(
                (price - golden).abs() <= 5e-4,
                format!("branch price {price} vs golden {golden}"),
            )?;
        }
        Ok(())
    });
}

#[test]
fn criterion_2_reference_instance_end_to_end() {
    criterion(2, "ten-buyer instance reproduction", || {
        let tree = reference_tree();
        let vals = reference_valuations();
        let config =
            MechanismConfig::fpdm(0.1).unwrap().with_reward_mode(RewardMode::Literal);
        let outcome =
            run_fpdm(&tree, &ActionProfile::truthful(&tree), &vals, &config, 0).unwrap();
        let mut problems = Vec::new();

        if outcome.winner != Some(5) {
            problems.push(format!("winner = {:?}, want buyer 5", outcome.winner));
        }
        let paid = outcome.payment(5);
        if (paid - 0.699).abs() > 5e-4 {
            problems.push(format!("winner payment {paid} vs 0.699 +- 5e-4"));
        }
        let reward = outcome.payment(1);
        if (reward - (-0.00345)).abs() > 5e-6 {
            problems.push(format!(
                "buyer-1 payment {reward} vs -0.00345 +- 5e-6 (gap {:.3e}); the exact \
                 payment table value is (p_base - p_1) * 0.1 * 0.5 = -0.0034433..., while \
                 -0.00345 only arises from the 3-decimal rounded prices 0.630 and 0.699",
                (reward + 0.00345).abs()
            ));
        }
        let u = utilities(&outcome, &vals).unwrap();
        if (u.get(5) - 0.101).abs() > 5e-4 {
            problems.push(format!("u_5 = {} vs 0.101 +- 5e-4", u.get(5)));
        }
        for buyer in [2usize, 3, 4, 6, 7, 8, 9, 10] {
            if outcome.payment(buyer) != 0.0 {
                problems.push(format!("payment of buyer {buyer} is {}", outcome.payment(buyer)));
            }
        }
        ensure(problems.is_empty(), problems.join("; "))
    });
}

#[test]
fn criterion_3_asymptotic_ratio() {
    criterion(3, "chain-case asymptotic ratio", || {
        let ratio: f64 =
            chain_case_revenue::<f64>(5, 1_000_000).unwrap() / expected_revenue_opt::<f64>(1_000_000);
        let limit = 0.2f64.powf(0.25);
        ensure(
            (ratio - limit).abs() <= 1e-3,
            format!("ratio {ratio} vs limit {limit}"),
        )
    });
}

#[test]
fn criterion_4_sweep_dominance_and_ratio_bound() {
    criterion(4, "chain sweep dominance and 50% bound", || {
        let curve = revenue_curve_chain::<f64>(5, 5, 200).unwrap();
        let mut problems = Vec::new();
        let min_ratio =
            curve.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
        if min_ratio < 0.5 {
            problems.push(format!("minimum ratio {min_ratio} < 0.5"));
        }
        let not_dominant: Vec<String> = curve
            .iter()
            .filter(|p| p.e_fpdm <= p.e_base)
            .map(|p| format!("k={}: e_fpdm {} <= e_base {}", p.k, p.e_fpdm, p.e_base))
            .collect();
        if !not_dominant.is_empty() {
            problems.push(format!(
                "dominance fails at [{}]; at k = x the chain degenerates to singleton \
                 branches sold sequentially, which loses to one simultaneous post (it holds \
                 for every k in [6, 200])",
                not_dominant.join(", ")
            ));
        }
        ensure(problems.is_empty(), problems.join("; "))
    });
}

#[test]
fn criterion_5_closed_form_vs_simulation() {
    criterion(5, "closed forms vs Monte Carlo", || {
        let reps = 100_000;
        let config = MechanismConfig::fpdm(0.1).unwrap();
        for (sizes, seed) in [(vec![5usize, 3, 2], 20_260_001u64), (vec![3, 2], 20_260_002u64)] {
            let tree = tree_with_branch_sizes(&sizes);
            let est =
                monte_carlo_revenue(&tree, &ActionProfile::truthful(&tree), &config, reps, seed)
                    .unwrap();
            let target: f64 = expected_revenue_fpdm(&sizes).unwrap();
            let z = est.z_score(target);
            ensure(
                z.abs() <= 3.0,
                format!("sizes {sizes:?}: mean {} vs {target}, z = {z}", est.mean),
            )?;
        }
        let price: f64 = optimal_price(3);
        let est = monte_carlo_baseline_revenue(3, price, ClaimThreshold::Strict, reps, 20_260_003)
            .unwrap();
        let target: f64 = expected_revenue_base(3);
        let z = est.z_score(target);
        ensure(z.abs() <= 3.0, format!("baseline star: mean {} vs {target}, z = {z}", est.mean))
    });
}

#[test]
fn criterion_6_oracle_agreement_and_monotonicity() {
    criterion(6, "grid oracle agreement and monotonicity", || {
        let step = 1e-5;
        for x in 1..=20usize {
            let grid: f64 = brute_force_optimal_price(x, step).unwrap();
            let closed: f64 = optimal_price(x);
            ensure(
                (grid - closed).abs() <= step,
                format!("x = {x}: grid {grid} vs closed form {closed}"),
            )?;
        }
        let mut last_price = 0.0f64;
        let mut last_revenue = -1.0f64;
        for x in 1..=10_000usize {
            let p: f64 = optimal_price(x);
            let e: f64 = expected_revenue_base(x);
            ensure(p > last_price, format!("price not strictly increasing at x = {x}"))?;
            ensure(e > last_revenue, format!("revenue not strictly increasing at x = {x}"))?;
            last_price = p;
            last_revenue = e;
        }
        Ok(())
    });
}

#[test]
fn criterion_7_ir_property_suite() {
    criterion(7, "exhaustive individual rationality", || {
        let trees = enumerate_rooted_trees(6).unwrap();

        // Clamped rewards: zero negative utilities across the whole grid.
        for &alpha in &[0.0, 0.1, 1.0] {
            let config = MechanismConfig::fpdm(alpha).unwrap();
            for (index, tree) in trees.iter().enumerate() {
                let report =
                    check_ir(tree, &IrOptions::new(ValuationSource::Grid { step: 0.1 }, config))
                        .unwrap();
                ensure(
                    report.violation_count == 0,
                    format!(
                        "clamped mode: {} violations on tree {index} at alpha {alpha}",
                        report.violation_count
                    ),
                )?;
            }
        }

        // Literal rewards: the reward sign flips wherever the winning
        // branch is priced below the base price, and the suite must catch it.
        let literal =
            MechanismConfig::fpdm(0.1).unwrap().with_reward_mode(RewardMode::Literal);
        let mut witnessed = false;
        for tree in &trees {
            let report =
                check_ir(tree, &IrOptions::new(ValuationSource::Grid { step: 0.1 }, literal))
                    .unwrap();
            if report.violation_count == 0 {
                continue;
            }
            let violation = &report.violations[0];
            let winner = violation.winner.unwrap();
            let decomp = tree.branches();
            let winning_branch =
                decomp.iter().find(|b| b.members.contains(&winner)).unwrap();
            let branch_price: f64 = optimal_price(winning_branch.outside);
            let p_base: f64 = optimal_price(tree.seller_children().len());
            ensure(
                branch_price < p_base,
                format!("violation on a branch priced {branch_price} >= base {p_base}"),
            )?;
            // Replayable: the stored instance reproduces the utility.
            let vals = ValuationProfile::from_full(&violation.valuations).unwrap();
            let dist =
                run_fpdm_expectation(tree, &ActionProfile::truthful(tree), &vals, &literal)
                    .unwrap();
            let outcome = dist
                .outcomes()
                .iter()
                .map(|w| &w.outcome)
                .find(|o| o.winner == violation.winner)
                .ok_or("recorded winner not reproducible")?;
            let u = utilities(outcome, &vals).unwrap();
            ensure(
                u.get(violation.buyer) == violation.truthful_utility,
                format!(
                    "replayed utility {} differs from recorded {}",
                    u.get(violation.buyer),
                    violation.truthful_utility
                ),
            )?;
            witnessed = true;
            break;
        }
        ensure(witnessed, "literal mode produced no recorded violation")
    });
}

#[test]
fn criterion_8_ic_hard_sub_invariants() {
    criterion(8, "incentive sub-invariants and deviation report", || {
        let trees = enumerate_rooted_trees(5).unwrap();
        let config = MechanismConfig::fpdm(0.1).unwrap();
        let mut comparisons = 0u64;
        for (index, tree) in trees.iter().enumerate() {
            let report =
                check_ic(tree, &IcOptions::new(ValuationSource::Grid { step: 0.1 }, config))
                    .unwrap();
            ensure(
                report.invariant_breaches.is_empty(),
                format!(
                    "{} invariant breaches on tree {index}: {:?}",
                    report.invariant_breaches.len(),
                    report.invariant_breaches.first()
                ),
            )?;
            comparisons += report.instances;
        }
        ensure(comparisons > 0, "no deviation comparisons were generated")?;

        // The deviation report must be replayable; literal mode guarantees
        // recorded findings to replay.
        let literal =
            MechanismConfig::fpdm(0.5).unwrap().with_reward_mode(RewardMode::Literal);
        let chain = SocialTree::from_edges(&[(0, 1), (1, 2), (2, 3)]).unwrap();
        let report =
            check_ic(&chain, &IcOptions::new(ValuationSource::Grid { step: 0.1 }, literal))
                .unwrap();
        ensure(report.violation_count > 0, "literal mode produced no findings to replay")?;
        let replay_config = literal
            .with_validation(fpdm::network::ProfileValidation::AllowOptOut);
        for v in &report.violations {
            let vals = ValuationProfile::from_full(&v.valuations).unwrap();
            let mut deviant_overrides = v.context_actions.clone();
            deviant_overrides.push((
                v.buyer,
                match v.deviation.as_ref().unwrap() {
                    fpdm::verification::DeviantAction::Report(set) => {
                        fpdm::network::Action::Report(set.clone())
                    }
                    fpdm::verification::DeviantAction::OptOut => fpdm::network::Action::Nil,
                },
            ));
            let deviant = ActionProfile::with_overrides(&chain, &deviant_overrides).unwrap();
            let truthful = ActionProfile::truthful(&chain);
            let u_truth = run_fpdm_expectation(&chain, &truthful, &vals, &replay_config)
                .unwrap()
                .expected_utility(v.buyer, &vals)
                .unwrap();
            let u_dev = run_fpdm_expectation(&chain, &deviant, &vals, &replay_config)
                .unwrap()
                .expected_utility(v.buyer, &vals)
                .unwrap();
            ensure(
                u_truth == v.truthful_utility && Some(u_dev) == v.deviant_utility,
                format!(
                    "replay mismatch: ({u_truth}, {u_dev}) vs ({}, {:?})",
                    v.truthful_utility, v.deviant_utility
                ),
            )?;
        }
        Ok(())
    });
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

struct CliRun {
    stdout: Vec<u8>,
    file: Option<Vec<u8>>,
    code: Option<i32>,
}

fn run_cli(args: &[&str], out_file: Option<&std::path::Path>, threads: &str) -> CliRun {
    let mut command = Command::new(env!("CARGO_BIN_EXE_fpdm"));
    command.args(args);
    if let Some(path) = out_file {
        command.arg("--out").arg(path);
    }
    command.env("RAYON_NUM_THREADS", threads);
    let output = command.output().expect("binary runs");
    CliRun {
        stdout: output.stdout,
        file: out_file.map(|p| std::fs::read(p).expect("output file written")),
        code: output.status.code(),
    }
}

#[test]
fn criterion_9_cli_determinism() {
    criterion(9, "byte-identical CLI output", || {
        let dir = tempfile::tempdir().unwrap();
        let tree = data("reference_tree.txt");
        let vals = data("reference_valuations.txt");
        let tree = tree.to_str().unwrap();
        let vals = vals.to_str().unwrap();
        let commands: Vec<(Vec<&str>, bool)> = vec![
            (vec!["price", "7"], false),
            (
                vec![
                    "run",
                    "--tree",
                    tree,
                    "--valuations",
                    vals,
                    "--alpha",
                    "0.1",
                    "--mode",
                    "literal",
                    "--seed",
                    "13",
                ],
                true,
            ),
            (
                vec!["run", "--tree", tree, "--valuations", vals, "--baseline", "--tiebreak", "expect"],
                true,
            ),
            (vec!["simulate", "--tree", tree, "--reps", "5000", "--seed", "21"], false),
            (vec!["sweep", "--chain-x", "5", "--k-max", "120"], true),
            (vec!["sweep", "--sizes", "5,3,2"], false),
            (
                vec![
                    "verify",
                    "ir",
                    "--max-nodes",
                    "4",
                    "--grid-step",
                    "0.2",
                    "--mode",
                    "literal",
                    "--findings-ok",
                ],
                true,
            ),
            (vec!["verify", "ic", "--max-nodes", "4", "--grid-step", "0.25"], true),
        ];
        for (index, (args, uses_file)) in commands.iter().enumerate() {
            let file_a = dir.path().join(format!("a{index}.txt"));
            let file_b = dir.path().join(format!("b{index}.txt"));
            let file_c = dir.path().join(format!("c{index}.txt"));
            let a = run_cli(args, uses_file.then_some(file_a.as_path()), "2");
            let b = run_cli(args, uses_file.then_some(file_b.as_path()), "2");
            // Across worker counts as well as across runs.
            let c = run_cli(args, uses_file.then_some(file_c.as_path()), "1");
            ensure(a.code == b.code && a.code == c.code, format!("exit codes differ for {args:?}"))?;
            // The `--out` path echo may differ between invocations; every
            // other stdout byte must match.
            let stdout_without_path = |run: &CliRun| {
                String::from_utf8(run.stdout.clone())
                    .unwrap()
                    .lines()
                    .filter(|l| !l.contains(dir.path().to_str().unwrap()))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            ensure(
                stdout_without_path(&a) == stdout_without_path(&b),
                format!("stdout differs between runs of {args:?}"),
            )?;
            ensure(
                stdout_without_path(&a) == stdout_without_path(&c),
                format!("stdout differs across worker counts for {args:?}"),
            )?;
            ensure(a.file == b.file, format!("output file differs between runs of {args:?}"))?;
            ensure(
                a.file == c.file,
                format!("output file differs across worker counts for {args:?}"),
            )?;
        }
        Ok(())
    });
}
