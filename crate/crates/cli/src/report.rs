//! Deterministic text output: human summaries at six significant digits,
//! flat key-value outcome records at full precision, verify reports, and
//! sweep CSV.

use std::fmt::Write as _;

use fpdm::mechanisms::{
    ClaimThreshold, MechanismConfig, Outcome, OutcomeDistribution, RewardMode, TieMode,
    UtilityVector,
};
use fpdm::pricing::RevenuePoint;
use fpdm::verification::{DeviantAction, IcInvariant, PropertyKind, PropertyReport, Violation};

use crate::formats::LoadedTree;

/// Six significant digits for display; records store full precision.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(5 - magnitude);
    let rounded = (x * factor).round() / factor;
    format!("{rounded}")
}

/// Shortest decimal that parses back to the same double.
pub fn full(x: f64) -> String {
    format!("{x}")
}

pub fn mode_name(mode: RewardMode) -> &'static str {
    match mode {
        RewardMode::Literal => "literal",
        RewardMode::Clamped => "clamped",
    }
}

pub fn threshold_name(threshold: ClaimThreshold) -> &'static str {
    match threshold {
        ClaimThreshold::Strict => "strict",
        ClaimThreshold::Weak => "weak",
    }
}

pub fn tie_name(tie: TieMode) -> &'static str {
    match tie {
        TieMode::Seeded => "seeded",
        TieMode::Expectation => "expect",
    }
}

fn node_list(loaded: &LoadedTree, nodes: &[usize]) -> String {
    let labels: Vec<String> = nodes.iter().map(|&n| loaded.label(n).to_string()).collect();
    labels.join(",")
}

fn push_outcome_block(
    out: &mut String,
    prefix: &str,
    loaded: &LoadedTree,
    outcome: &Outcome<f64>,
    utilities: &UtilityVector<f64>,
) {
    match outcome.winner {
        Some(w) => {
            let _ = writeln!(out, "{prefix}winner = {}", loaded.label(w));
            if let Some(branch) = outcome.winning_branch {
                let _ = writeln!(out, "{prefix}winning_branch = {}", loaded.label(branch));
            }
            let _ = writeln!(out, "{prefix}price = {}", full(outcome.price.unwrap()));
        }
        None => {
            let _ = writeln!(out, "{prefix}winner = none");
        }
    }
    let _ = writeln!(out, "{prefix}gross_revenue = {}", full(outcome.gross_revenue));
    let _ = writeln!(out, "{prefix}net_revenue = {}", full(outcome.net_revenue));
    for buyer in 1..=loaded.tree.buyer_count() {
        let _ =
            writeln!(out, "{prefix}payment.{} = {}", loaded.label(buyer), full(outcome.payment(buyer)));
    }
    for buyer in 1..=loaded.tree.buyer_count() {
        let _ = writeln!(
            out,
            "{prefix}utility.{} = {}",
            loaded.label(buyer),
            full(utilities.get(buyer))
        );
    }
    for (i, visit) in outcome.trace.visits.iter().enumerate() {
        let _ = writeln!(out, "{prefix}trace.visit.{i}.root = {}", loaded.label(visit.root));
        let _ = writeln!(out, "{prefix}trace.visit.{i}.price = {}", full(visit.price));
        let _ =
            writeln!(out, "{prefix}trace.visit.{i}.claimers = {}", node_list(loaded, &visit.claimers));
    }
    if let Some(tie) = &outcome.trace.tie_break {
        let _ = writeln!(out, "{prefix}trace.tie.claimers = {}", node_list(loaded, &tie.claimers));
        let _ =
            writeln!(out, "{prefix}trace.tie.after_depth = {}", node_list(loaded, &tie.after_depth));
        let _ = writeln!(
            out,
            "{prefix}trace.tie.after_children = {}",
            node_list(loaded, &tie.after_children)
        );
        let _ = writeln!(out, "{prefix}trace.tie.chosen = {}", loaded.label(tie.chosen));
        let _ = writeln!(out, "{prefix}trace.tie.seeded = {}", tie.seeded);
    }
}

pub struct RunMeta<'a> {
    pub mechanism: &'a str,
    pub config: &'a MechanismConfig<f64>,
    pub seed: u64,
}

fn push_run_header(out: &mut String, loaded: &LoadedTree, meta: &RunMeta<'_>) {
    let _ = writeln!(out, "mechanism = {}", meta.mechanism);
    let _ = writeln!(out, "alpha = {}", full(meta.config.alpha));
    let _ = writeln!(out, "reward_mode = {}", mode_name(meta.config.reward_mode));
    let _ = writeln!(out, "threshold = {}", threshold_name(meta.config.threshold));
    let _ = writeln!(out, "tiebreak = {}", tie_name(meta.config.tie_mode));
    let _ = writeln!(out, "seed = {}", meta.seed);
    let _ = writeln!(out, "buyers = {}", loaded.tree.buyer_count());
}

/// Flat machine-readable record of a single outcome.
pub fn outcome_record(
    loaded: &LoadedTree,
    meta: &RunMeta<'_>,
    outcome: &Outcome<f64>,
    utilities: &UtilityVector<f64>,
) -> String {
    let mut out = String::new();
    push_run_header(&mut out, loaded, meta);
    push_outcome_block(&mut out, "", loaded, outcome, utilities);
    out
}

/// Record of an outcome distribution (expectation tie mode): one block per
/// tied outcome.
pub fn distribution_record(
    loaded: &LoadedTree,
    meta: &RunMeta<'_>,
    dist: &OutcomeDistribution<f64>,
    utilities: &[UtilityVector<f64>],
) -> String {
    let mut out = String::new();
    push_run_header(&mut out, loaded, meta);
    let _ = writeln!(out, "outcomes = {}", dist.len());
    for (i, (weighted, utility)) in dist.outcomes().iter().zip(utilities).enumerate() {
        let _ = writeln!(out, "outcome.{i}.weight = {}", full(weighted.weight));
        push_outcome_block(&mut out, &format!("outcome.{i}."), loaded, &weighted.outcome, utility);
    }
    out
}

/// Human summary of one outcome.
pub fn outcome_summary(
    loaded: &LoadedTree,
    outcome: &Outcome<f64>,
    utilities: &UtilityVector<f64>,
) -> String {
    let mut out = String::new();
    match outcome.winner {
        Some(w) => {
            let branch = outcome
                .winning_branch
                .map(|b| format!(" (branch {})", loaded.label(b)))
                .unwrap_or_default();
            let _ = writeln!(out, "winner: buyer {}{branch}", loaded.label(w));
            let _ = writeln!(out, "price: {}", sig6(outcome.price.unwrap()));
        }
        None => {
            let _ = writeln!(out, "winner: none (seller keeps the item)");
        }
    }
    let _ = writeln!(out, "gross revenue: {}", sig6(outcome.gross_revenue));
    let _ = writeln!(out, "net revenue: {}", sig6(outcome.net_revenue));
    let nonzero: Vec<usize> = (1..=loaded.tree.buyer_count())
        .filter(|&b| outcome.payment(b) != 0.0 || utilities.get(b) != 0.0)
        .collect();
    if !nonzero.is_empty() {
        let _ = writeln!(out, "payments / utilities:");
        for b in nonzero {
            let _ = writeln!(
                out,
                "  buyer {}: pays {} utility {}",
                loaded.label(b),
                sig6(outcome.payment(b)),
                sig6(utilities.get(b))
            );
        }
    }
    for visit in &outcome.trace.visits {
        let _ = writeln!(
            out,
            "visited branch {} at price {}: claimers [{}]",
            loaded.label(visit.root),
            sig6(visit.price),
            node_list(loaded, &visit.claimers)
        );
    }
    if let Some(tie) = &outcome.trace.tie_break {
        let _ = writeln!(
            out,
            "tie-break: depth [{}] children [{}] chosen {}{}",
            node_list(loaded, &tie.after_depth),
            node_list(loaded, &tie.after_children),
            loaded.label(tie.chosen),
            if tie.seeded { " (seeded draw)" } else { "" }
        );
    }
    out
}

/// CSV sweep: header plus one full-precision row per point.
pub fn curve_csv(points: &[RevenuePoint<f64>]) -> String {
    let mut out = String::from("k,x,e_fpdm,e_base,e_opt,ratio\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.k,
            p.x,
            full(p.e_fpdm),
            full(p.e_base),
            full(p.e_opt),
            full(p.ratio)
        );
    }
    out
}

fn deviation_name(action: &DeviantAction) -> String {
    match action {
        DeviantAction::OptOut => "optout".to_string(),
        DeviantAction::Report(set) => {
            let ids: Vec<String> = set.iter().map(|c| c.to_string()).collect();
            format!("report:{}", ids.join(","))
        }
    }
}

/// One verify-report section per tree, plus violation exemplars. Tree edges
/// are printed in canonical dense ids (these reports describe enumerated
/// trees, not user files).
pub struct VerifySection<'a> {
    pub tree_index: usize,
    pub edges: String,
    pub alpha: f64,
    pub report: &'a PropertyReport<f64>,
}

pub fn verify_report(header: &[(String, String)], sections: &[VerifySection<'_>]) -> String {
    let mut out = String::new();
    for (key, value) in header {
        let _ = writeln!(out, "{key} = {value}");
    }
    let instances: u64 = sections.iter().map(|s| s.report.instances).sum();
    let violations: u64 = sections.iter().map(|s| s.report.violation_count).sum();
    let breaches: usize = sections.iter().map(|s| s.report.invariant_breaches.len()).sum();
    let _ = writeln!(out, "instances = {instances}");
    let _ = writeln!(out, "violations = {violations}");
    let _ = writeln!(out, "invariant_breaches = {breaches}");
    let clean = violations == 0 && breaches == 0;
    let _ = writeln!(out, "verdict = {}", if clean { "clean" } else { "findings" });
    for s in sections {
        if s.report.violation_count == 0 && s.report.invariant_breaches.is_empty() {
            continue;
        }
        let _ = writeln!(
            out,
            "tree.{}.alpha.{}.violations = {}",
            s.tree_index,
            full(s.alpha),
            s.report.violation_count
        );
    }
    let mut printed = 0usize;
    for s in sections {
        for v in &s.report.violations {
            if printed >= 20 {
                break;
            }
            push_violation(&mut out, printed, s, v);
            printed += 1;
        }
    }
    let mut breach_index = 0usize;
    for s in sections {
        for b in &s.report.invariant_breaches {
            if breach_index >= 20 {
                break;
            }
            let kind = match b.invariant {
                IcInvariant::BranchPriceInvariance => "branch_price",
                IcInvariant::PathUtilityInvariance => "path_utility",
                IcInvariant::OffPathZero => "off_path_zero",
            };
            let _ = writeln!(out, "breach.{breach_index}.tree = {}", s.tree_index);
            let _ = writeln!(out, "breach.{breach_index}.kind = {kind}");
            let _ = writeln!(out, "breach.{breach_index}.buyer = {}", b.buyer);
            breach_index += 1;
        }
    }
    out
}

fn push_violation(out: &mut String, index: usize, s: &VerifySection<'_>, v: &Violation<f64>) {
    let property = match s.report.property {
        PropertyKind::IndividualRationality => "ir",
        PropertyKind::IncentiveCompatibility => "ic",
    };
    let _ = writeln!(out, "violation.{index}.property = {property}");
    let _ = writeln!(out, "violation.{index}.tree = {}", s.tree_index);
    let _ = writeln!(out, "violation.{index}.edges = {}", s.edges);
    let _ = writeln!(out, "violation.{index}.alpha = {}", full(s.alpha));
    let values: Vec<String> = v.valuations.iter().map(|&x| full(x)).collect();
    let _ = writeln!(out, "violation.{index}.valuations = {}", values.join(","));
    let _ = writeln!(out, "violation.{index}.buyer = {}", v.buyer);
    if let Some(w) = v.winner {
        let _ = writeln!(out, "violation.{index}.winner = {w}");
    }
    if let Some(action) = &v.deviation {
        let _ = writeln!(out, "violation.{index}.deviation = {}", deviation_name(action));
    }
    let _ = writeln!(out, "violation.{index}.truthful_utility = {}", full(v.truthful_utility));
    if let Some(u) = v.deviant_utility {
        let _ = writeln!(out, "violation.{index}.deviant_utility = {}", full(u));
    }
}

/// Edges of an enumerated tree in dense ids, `p-c` space separated.
pub fn edges_string(tree: &fpdm::network::SocialTree) -> String {
    let parts: Vec<String> = (1..=tree.buyer_count())
        .map(|b| format!("{}-{}", tree.parent(b).unwrap(), b))
        .collect();
    parts.join(" ")
}
