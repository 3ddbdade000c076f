//! Subcommand implementations. Each returns a [`RunReport`] whose
//! `exit_status` is 0 for success and 1 for a failed check; hard failures
//! (unreadable or malformed files, mismatched shapes) surface as errors and
//! are mapped to exit codes by [`exit_code_for`].

use crate::args::{
    BoundArgs, CheckArgs, Command, CompareArgs, EvalArgs, MinimizeArgs, ModeArg, PolicyArg,
    QuotientArgs,
};
use crate::report::{CompareStats, ModelSummary, RefinementSummary, RunReport};
use nnbisim::approx::{
    check_delta_bisimulation, global_error_bound_with, max_blockwise_gap, quotient_delta,
    BoundMode, BoundOptions, RepresentativePolicy,
};
use nnbisim::bisim::{check_bisimulation, concretize_valuation, quotient};
use nnbisim::error::Error;
use nnbisim::io::{load_model, load_partition, save_model, save_partition};
use nnbisim::minimize::{minimize_with, MinimizeOptions, Schedule};
use nnbisim::network::{Network, Valuation};
use nnbisim::partition::NetPartition;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

/// Exit status for a hard error: unreadable or unparseable input files get
/// the I/O status, everything else (shape mismatches, violated
/// preconditions) the failure status.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Parse(_) | Error::Invalid(_) => 3,
        _ => 1,
    }
}

/// Runs one parsed subcommand to a finished report.
pub fn execute(command: &Command) -> Result<RunReport, Error> {
    match command {
        Command::Check(args) => cmd_check(args),
        Command::Minimize(args) => cmd_minimize(args),
        Command::Quotient(args) => cmd_quotient(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

struct Timer {
    enabled: bool,
    laps: BTreeMap<String, f64>,
    started: Instant,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Timer { enabled, laps: BTreeMap::new(), started: Instant::now() }
    }

    fn lap(&mut self, name: &str) {
        if self.enabled {
            let now = Instant::now();
            let ms = now.duration_since(self.started).as_secs_f64() * 1e3;
            self.laps.insert(name.to_string(), ms);
            self.started = now;
        }
    }

    fn finish(self, report: &mut RunReport) {
        if self.enabled {
            report.timings_ms = Some(self.laps);
        }
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(Error::Io)
}

fn write_file(path: &Path, text: &str, report: &mut RunReport) -> Result<(), Error> {
    std::fs::write(path, text).map_err(Error::Io)?;
    report.files_written.push(path.display().to_string());
    Ok(())
}

fn load_model_file(path: &Path) -> Result<Network, Error> {
    load_model(&read_file(path)?)
}

fn load_partition_file(path: &Path) -> Result<NetPartition, Error> {
    load_partition(&read_file(path)?)
}

pub fn cmd_check(args: &CheckArgs) -> Result<RunReport, Error> {
    let mut report = RunReport::new("check");
    report
        .input("model", args.model.display())
        .input("partition", args.partition.display())
        .input("delta", args.delta);
    let mut timer = Timer::new(args.common.timings);

    let net = load_model_file(&args.model)?;
    let p = load_partition_file(&args.partition)?;
    timer.lap("load");

    report.model = Some(ModelSummary::of(&net));
    report.delta = Some(args.delta);
    if args.delta == 0.0 {
        let outcome = check_bisimulation(&net, &p)?;
        report.verdict = Some(outcome.ok);
        report.witness = outcome.witness;
    } else {
        let outcome = check_delta_bisimulation(&net, &p, args.delta)?;
        report.verdict = Some(outcome.ok);
        report.max_bias_gap = Some(outcome.max_bias_gap);
        report.max_presum_gap = Some(outcome.max_presum_gap);
        report.witness = outcome.witness;
    }
    timer.lap("check");

    report.exit_status = if report.verdict == Some(true) { 0 } else { 1 };
    timer.finish(&mut report);
    Ok(report)
}

pub fn cmd_minimize(args: &MinimizeArgs) -> Result<RunReport, Error> {
    let mut report = RunReport::new("minimize");
    report
        .input("model", args.model.display())
        .input("merge_io", args.merge_io);
    let mut timer = Timer::new(args.common.timings);

    let net = load_model_file(&args.model)?;
    timer.lap("load");
    report.model = Some(ModelSummary::of(&net));

    let options = MinimizeOptions { preserve_io: !args.merge_io, schedule: Schedule::LowestFirst };
    let result = minimize_with(&net, &options);
    timer.lap("minimize");

    report.reduced = Some(ModelSummary::of(&result.reduced));
    report.refinement = Some(RefinementSummary {
        act_bias_splits: result.trace.act_bias_splits(),
        presum_splits: result.trace.presum_splits(),
        blocks_per_layer: result
            .partition
            .layers()
            .iter()
            .map(|lp| lp.num_blocks())
            .collect(),
    });

    if let Some(out) = &args.out {
        write_file(out, &save_model(&result.reduced), &mut report)?;
    }
    if let Some(map) = &args.map {
        write_file(map, &save_partition(&result.partition), &mut report)?;
    }
    timer.lap("write");
    timer.finish(&mut report);
    Ok(report)
}

fn policy_of(arg: PolicyArg) -> RepresentativePolicy {
    match arg {
        PolicyArg::MinIndex => RepresentativePolicy::MinIndex,
        PolicyArg::MaxIndex => RepresentativePolicy::MaxIndex,
        PolicyArg::PerValueMin => RepresentativePolicy::PerValueMin,
        PolicyArg::PerValueMax => RepresentativePolicy::PerValueMax,
    }
}

pub fn cmd_quotient(args: &QuotientArgs) -> Result<RunReport, Error> {
    let mut report = RunReport::new("quotient");
    report
        .input("model", args.model.display())
        .input("partition", args.partition.display())
        .input("delta", args.delta)
        .input("policy", format!("{:?}", args.policy));
    let mut timer = Timer::new(args.common.timings);

    let net = load_model_file(&args.model)?;
    let p = load_partition_file(&args.partition)?;
    timer.lap("load");
    report.model = Some(ModelSummary::of(&net));
    report.delta = Some(args.delta);

    // Refuse invalid partitions with the witness instead of collapsing.
    let reduced = if args.delta == 0.0 {
        let outcome = check_bisimulation(&net, &p)?;
        if !outcome.ok {
            report.verdict = Some(false);
            report.witness = outcome.witness;
            report.exit_status = 1;
            timer.finish(&mut report);
            return Ok(report);
        }
        quotient(&net, &p)?
    } else {
        let outcome = check_delta_bisimulation(&net, &p, args.delta)?;
        report.max_bias_gap = Some(outcome.max_bias_gap);
        report.max_presum_gap = Some(outcome.max_presum_gap);
        if !outcome.ok {
            report.verdict = Some(false);
            report.witness = outcome.witness;
            report.exit_status = 1;
            timer.finish(&mut report);
            return Ok(report);
        }
        quotient_delta(&net, &p, args.delta, &policy_of(args.policy))?
    };
    timer.lap("quotient");

    report.verdict = Some(true);
    report.reduced = Some(ModelSummary::of(&reduced));
    if let Some(out) = &args.out {
        write_file(out, &save_model(&reduced), &mut report)?;
    }
    timer.lap("write");
    timer.finish(&mut report);
    Ok(report)
}

pub fn cmd_bound(args: &BoundArgs) -> Result<RunReport, Error> {
    let mut report = RunReport::new("bound");
    report
        .input("model", args.model.display())
        .input("partition", args.partition.display())
        .input("delta", args.delta)
        .input("eps0", args.eps0)
        .input("vinf", args.vinf)
        .input("mode", format!("{:?}", args.mode));
    if let Some(l) = args.lipschitz {
        report.input("lipschitz", l);
    }
    let mut timer = Timer::new(args.common.timings);

    let net = load_model_file(&args.model)?;
    let p = load_partition_file(&args.partition)?;
    timer.lap("load");
    report.model = Some(ModelSummary::of(&net));
    report.delta = Some(args.delta);

    let options = BoundOptions {
        mode: match args.mode {
            ModeArg::Uniform => BoundMode::Uniform,
            ModeArg::PerLayer => BoundMode::PerLayerNorms,
        },
        lipschitz_override: args.lipschitz,
    };
    match global_error_bound_with(&net, &p, args.delta, args.eps0, args.vinf, &options) {
        Ok(bound) => {
            report.verdict = Some(true);
            report.bound = Some(bound);
        }
        Err(Error::NotDeltaBisimulation(outcome)) => {
            report.verdict = Some(false);
            report.max_bias_gap = Some(outcome.max_bias_gap);
            report.max_presum_gap = Some(outcome.max_presum_gap);
            report.witness = outcome.witness;
            report.exit_status = 1;
        }
        Err(other) => return Err(other),
    }
    timer.lap("bound");
    timer.finish(&mut report);
    Ok(report)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<RunReport, Error> {
    let mut report = RunReport::new("compare");
    report
        .input("original", args.original.display())
        .input("reduced", args.reduced.display())
        .input("map", args.map.display())
        .input("samples", args.samples)
        .input("seed", args.seed)
        .input("vinf", args.vinf);
    let mut timer = Timer::new(args.common.timings);

    let original = load_model_file(&args.original)?;
    let reduced = load_model_file(&args.reduced)?;
    let map = load_partition_file(&args.map)?;
    timer.lap("load");

    map.validate_against(&original)?;
    let expected: Vec<usize> = map.layers().iter().map(|lp| lp.num_blocks()).collect();
    if reduced.layer_sizes() != expected.as_slice() {
        return Err(Error::Contract(format!(
            "reduced model has sizes {:?}, the map's blocks imply {:?}",
            reduced.layer_sizes(),
            expected
        )));
    }
    report.model = Some(ModelSummary::of(&original));
    report.reduced = Some(ModelSummary::of(&reduced));

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let k = original.depth();
    let mut max_gap = 0.0f64;
    let mut gap_sum = 0.0f64;
    for _ in 0..args.samples {
        // One value per input block keeps the sample consistent by
        // construction, so both models see the same information.
        let block_values: Vec<f64> = (0..map.layer(0).num_blocks())
            .map(|_| {
                if args.vinf > 0.0 {
                    rng.random_range(-args.vinf..args.vinf)
                } else {
                    0.0
                }
            })
            .collect();
        let v0_hat = Valuation::new(0, block_values)?;
        let v0 = concretize_valuation(&v0_hat, map.layer(0))?;
        let out = original.eval(&v0)?;
        let out_hat = reduced.eval(&v0_hat)?;
        let gap = max_blockwise_gap(&out_hat, &out, map.layer(k));
        max_gap = max_gap.max(gap);
        gap_sum += gap;
    }
    timer.lap("sample");

    report.compare = Some(CompareStats {
        samples: args.samples,
        seed: args.seed,
        vinf: args.vinf,
        max_gap,
        mean_gap: if args.samples > 0 { gap_sum / args.samples as f64 } else { 0.0 },
    });
    timer.finish(&mut report);
    Ok(report)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<RunReport, Error> {
    let mut report = RunReport::new("eval");
    report
        .input("model", args.model.display())
        .input("input", format!("{:?}", args.input.0));
    let mut timer = Timer::new(args.common.timings);

    let net = load_model_file(&args.model)?;
    timer.lap("load");
    report.model = Some(ModelSummary::of(&net));

    if args.input.0.len() != net.layer_size(0) {
        return Err(Error::Contract(format!(
            "{} input values for {} input nodes",
            args.input.0.len(),
            net.layer_size(0)
        )));
    }
    let v0 = Valuation::new(0, args.input.0.clone())?;
    let out = net.eval(&v0)?;
    report.output = Some(out.values().to_vec());
    timer.lap("eval");
    timer.finish(&mut report);
    Ok(report)
}

/// Short human-readable lines for stderr, derived from the report.
pub fn summarize(report: &RunReport) -> Vec<String> {
    let mut lines = Vec::new();
    match report.command.as_str() {
        "check" => match report.verdict {
            Some(true) => lines.push(format!(
                "valid merge partition (delta = {})",
                report.delta.unwrap_or(0.0)
            )),
            Some(false) => {
                let mut line = "not a valid merge partition".to_string();
                if let Some(w) = &report.witness {
                    line.push_str(&format!(": {w}"));
                }
                lines.push(line);
            }
            None => {}
        },
        "minimize" | "quotient" => {
            if report.verdict == Some(false) {
                let mut line = "partition rejected".to_string();
                if let Some(w) = &report.witness {
                    line.push_str(&format!(": {w}"));
                }
                lines.push(line);
            } else if let (Some(before), Some(after)) = (&report.model, &report.reduced) {
                lines.push(format!(
                    "{} -> {} nodes, {} -> {} edges",
                    before.nodes, after.nodes, before.edges, after.edges
                ));
            }
        }
        "bound" => {
            if report.verdict == Some(false) {
                let mut line = "partition exceeds the delta budget".to_string();
                if let Some(w) = &report.witness {
                    line.push_str(&format!(": {w}"));
                }
                lines.push(line);
            } else if let Some(bound) = &report.bound {
                lines.push(format!("certified output deviation <= {}", bound.eps_final));
            }
        }
        "compare" => {
            if let Some(stats) = &report.compare {
                lines.push(format!(
                    "{} samples: max gap {}, mean gap {}",
                    stats.samples, stats.max_gap, stats.mean_gap
                ));
            }
        }
        "eval" => {
            if let Some(out) = &report.output {
                lines.push(format!("output: {out:?}"));
            }
        }
        _ => {}
    }
    for file in &report.files_written {
        lines.push(format!("wrote {file}"));
    }
    lines
}
