//! Sweep execution: turns a [`SweepSpec`] into CSV rows.
//!
//! Seeding contract: grid point `i` runs under `derive_seed(master,
//! [SWEEP_POINT, i])`. Every output at that point shares the seed, so the
//! Monte Carlo and exact columns see the *same* sampled realizations and
//! stay comparable point by point. Rows are flushed as they are produced.

use std::io::Write;
use std::time::Instant;

use aobc_core::analytics::{
    aob_upper_bound, aoc_upper_bound, exact_eaob, exact_eaoc, independent_bound_eaob,
};
use aobc_core::channel::NetworkParams;
use aobc_core::geometry::Realization;
use aobc_core::sim::{
    default_warmup, derive_seed, derive_stream, labels, run_instance, run_spatial_average,
    SimConfig,
};
use aobc_core::Error;

use crate::config::{Output, SweepSpec};
use crate::CliError;

pub const CSV_HEADER: &str =
    "sweep_param,value,output,mean,ci95,seed,slots,trials,realizations,runtime_s";

// ============================================================================
// Rows
// ============================================================================

/// One CSV record. Metadata fields describe the randomness actually spent:
/// closed-form rows carry zeros, exact rows carry the realization budget,
/// Monte Carlo rows carry the full slot budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_param: &'static str,
    pub value: f64,
    pub output: &'static str,
    pub mean: f64,
    pub ci95: f64,
    pub seed: u64,
    pub slots: u64,
    pub trials: u32,
    pub realizations: u32,
    pub runtime_s: f64,
}

impl Row {
    /// Value columns use 9 significant digits; `runtime_s` is milliseconds
    /// precision and stays 0.000 unless timings were requested, keeping the
    /// default output a deterministic function of the config.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.8e},{},{:.8e},{:.8e},{},{},{},{},{:.3}",
            self.sweep_param,
            self.value,
            self.output,
            self.mean,
            self.ci95,
            self.seed,
            self.slots,
            self.trials,
            self.realizations,
            self.runtime_s
        )
    }
}

/// What a finished run reports besides its rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunReport {
    pub rows: usize,
    /// Some requested value could not be computed and was emitted as NaN.
    pub partial: bool,
}

// ============================================================================
// Point evaluation
// ============================================================================

/// Errors that poison one cell but not the run: enumeration past the subset
/// cap and delay caps. Everything else aborts.
fn is_cell_failure(err: &Error) -> bool {
    matches!(
        err,
        Error::CapacityExceeded { .. } | Error::DelayTimeout { .. }
    )
}

struct Emitter<'a, W: Write> {
    out: &'a mut W,
    timings: bool,
    rows: usize,
    partial: bool,
}

impl<'a, W: Write> Emitter<'a, W> {
    fn new(out: &'a mut W, timings: bool) -> Result<Self, CliError> {
        writeln!(out, "{CSV_HEADER}").map_err(Error::from)?;
        Ok(Emitter {
            out,
            timings,
            rows: 0,
            partial: false,
        })
    }

    /// Writes one row, converting a cell failure into a NaN mean.
    fn emit(
        &mut self,
        mut row: Row,
        computed: Result<(f64, f64), Error>,
        started: Instant,
    ) -> Result<(), CliError> {
        match computed {
            Ok((mean, ci)) => {
                row.mean = mean;
                row.ci95 = ci;
            }
            Err(e) if is_cell_failure(&e) => return self.emit_unavailable(row, &e.to_string()),
            Err(e) => return Err(e.into()),
        }
        if self.timings {
            row.runtime_s = started.elapsed().as_secs_f64();
        }
        self.write_row(row)
    }

    /// Writes a NaN row for a cell that could not be computed and remembers
    /// that the run is incomplete.
    fn emit_unavailable(&mut self, mut row: Row, why: &str) -> Result<(), CliError> {
        eprintln!(
            "warning: {} at {} = {}: {why}",
            row.output, row.sweep_param, row.value
        );
        row.mean = f64::NAN;
        row.ci95 = f64::NAN;
        row.runtime_s = 0.0;
        self.partial = true;
        self.write_row(row)
    }

    fn write_row(&mut self, row: Row) -> Result<(), CliError> {
        writeln!(self.out, "{}", row.to_csv()).map_err(Error::from)?;
        self.out.flush().map_err(Error::from)?;
        self.rows += 1;
        Ok(())
    }

    fn finish(self) -> RunReport {
        RunReport {
            rows: self.rows,
            partial: self.partial,
        }
    }
}

/// Warmup for one grid point: twenty analytic mean delays, but never more
/// than a fifth of the trial, so at least 80% of every trial is measured.
fn resolve_warmup(params: &NetworkParams<f64>, slots_per_trial: u64) -> u64 {
    let hint = aob_upper_bound(params.r, params).ok();
    default_warmup(hint).min(slots_per_trial / 5)
}

/// Simulation config for one grid point.
fn point_config(spec: &SweepSpec, params: NetworkParams<f64>, point_seed: u64) -> SimConfig<f64> {
    let mut config = spec.base.clone();
    config.params = params;
    config.master_seed = point_seed;
    if spec.auto_warmup {
        config.warmup_slots = resolve_warmup(&config.params, config.slots_per_trial);
    }
    config
}

/// Mean and confidence half-width of a per-realization statistic over the
/// same realization stream the Monte Carlo estimators consume.
fn spatial_exact<F>(config: &SimConfig<f64>, eval: F) -> Result<(f64, f64), Error>
where
    F: Fn(&Realization<f64>) -> Result<f64, Error>,
{
    let window = config.window_radius()?;
    let mut values = Vec::with_capacity(config.realizations as usize);
    for ri in 0..config.realizations as u64 {
        let mut geo_rng = derive_stream(config.master_seed, &[labels::GEOMETRY, ri]);
        let realization =
            Realization::sample(config.params.lambda, config.params.r, window, &mut geo_rng)?;
        values.push(eval(&realization)?);
    }
    Ok(mean_and_ci(&values))
}

fn mean_and_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Node count the collection bound is quoted at when nothing pins it down:
/// the nearest integer to the mean number of nodes, at least one.
fn typical_node_count(params: &NetworkParams<f64>) -> usize {
    let mean = params.lambda * std::f64::consts::PI * params.r * params.r;
    (mean.round() as usize).max(1)
}

fn evaluate_output(
    output: Output,
    spec: &SweepSpec,
    config: &SimConfig<f64>,
) -> Result<(f64, f64), Error> {
    let params = &config.params;
    match output {
        Output::McAob | Output::McAoc => {
            let mut config = config.clone();
            config.mode = output.mode();
            let result = run_spatial_average(&config)?;
            Ok((result.mean_age, result.ci_half_width))
        }
        Output::ExactAob => {
            spatial_exact(config, |re| exact_eaob(re, params, spec.tail_tol))
        }
        Output::ExactAoc => {
            spatial_exact(config, |re| exact_eaoc(re, params, spec.mu_source))
        }
        Output::ConjIndepAob => spatial_exact(config, |re| independent_bound_eaob(re, params)),
        Output::BoundAobDiffeq => Ok((aob_upper_bound(params.r, params)?, 0.0)),
        Output::BoundAocCc => {
            let n = typical_node_count(params);
            Ok((aoc_upper_bound(n, params.r, spec.epsilon, params)?, 0.0))
        }
    }
}

/// Metadata skeleton for one cell; mean/ci are filled in by the emitter.
fn blank_row(spec: &SweepSpec, output: Output, value: f64, config: &SimConfig<f64>) -> Row {
    let (seed, slots, trials, realizations) = match output {
        Output::McAob | Output::McAoc => (
            config.master_seed,
            config.slots_per_trial,
            config.trials,
            config.realizations,
        ),
        Output::ExactAob | Output::ExactAoc | Output::ConjIndepAob => {
            (config.master_seed, 0, 0, config.realizations)
        }
        Output::BoundAobDiffeq | Output::BoundAocCc => (0, 0, 0, 0),
    };
    Row {
        sweep_param: spec.parameter.name(),
        value,
        output: output.name(),
        mean: f64::NAN,
        ci95: f64::NAN,
        seed,
        slots,
        trials,
        realizations,
        runtime_s: 0.0,
    }
}

// ============================================================================
// Runners
// ============================================================================

/// Runs the full sweep, writing CSV to `out`.
pub fn run_sweep<W: Write>(
    spec: &SweepSpec,
    out: &mut W,
    timings: bool,
) -> Result<RunReport, CliError> {
    let mut emitter = Emitter::new(out, timings)?;
    for (i, &value) in spec.grid.iter().enumerate() {
        let point_seed = derive_seed(spec.base.master_seed, &[labels::SWEEP_POINT, i as u64]);
        let params = spec.parameter.apply(&spec.base.params, value)?;
        let config = point_config(spec, params, point_seed);
        for &output in &spec.outputs {
            let started = Instant::now();
            let row = blank_row(spec, output, value, &config);
            let computed = evaluate_output(output, spec, &config);
            emitter.emit(row, computed, started)?;
        }
    }
    Ok(emitter.finish())
}

/// Closed-form bounds only, one pair of rows per grid point. Needs no
/// randomness and runs in milliseconds at any grid size.
pub fn run_bounds<W: Write>(spec: &SweepSpec, out: &mut W) -> Result<RunReport, CliError> {
    let mut emitter = Emitter::new(out, false)?;
    for &value in &spec.grid {
        let params = spec.parameter.apply(&spec.base.params, value)?;
        let config = point_config(spec, params, 0);
        for output in [Output::BoundAobDiffeq, Output::BoundAocCc] {
            let started = Instant::now();
            let row = blank_row(spec, output, value, &config);
            let computed = evaluate_output(output, spec, &config);
            emitter.emit(row, computed, started)?;
        }
    }
    Ok(emitter.finish())
}

/// Evaluates every requested output on one stored realization. The model
/// radius is overridden by the file's node disk so analytic columns describe
/// the geometry actually simulated; the value column reports the node count.
pub fn run_instance_file<W: Write>(
    spec: &SweepSpec,
    realization: &Realization<f64>,
    out: &mut W,
    timings: bool,
) -> Result<RunReport, CliError> {
    let params = spec
        .base
        .params
        .with_r(realization.node_radius())
        .map_err(Error::from)?;
    if spec.outputs.contains(&Output::BoundAocCc) && spec.epsilon >= params.r {
        return Err(CliError::Config {
            path: String::new(),
            line: 0,
            column: 0,
            why: format!(
                "analytics.epsilon = {} does not satisfy epsilon < r for this realization's radius {}",
                spec.epsilon, params.r
            ),
        });
    }
    let config = point_config(spec, params, spec.base.master_seed);
    let n = realization.node_count();

    let mut emitter = Emitter::new(out, timings)?;
    for &output in &spec.outputs {
        let started = Instant::now();
        let mut row = blank_row(spec, output, n as f64, &config);
        row.sweep_param = "n";
        // Exact values on a fixed instance consume no randomness.
        if !matches!(output, Output::McAob | Output::McAoc) {
            row.seed = 0;
            row.realizations = 0;
        } else {
            row.realizations = 1;
        }
        if output == Output::BoundAocCc && n == 0 {
            // The bound is conditional on at least one node; report the cell
            // as unavailable rather than inventing an n.
            emitter.emit_unavailable(row, "bound needs at least one node")?;
            continue;
        }
        let computed = match output {
            Output::McAob | Output::McAoc => {
                let mut config = config.clone();
                config.mode = output.mode();
                run_instance(realization, &config)
                    .map(|res| (res.mean_age, res.ci_half_width))
            }
            Output::ExactAob => exact_eaob(realization, &config.params, spec.tail_tol)
                .map(|v| (v, 0.0)),
            Output::ExactAoc => exact_eaoc(realization, &config.params, spec.mu_source)
                .map(|v| (v, 0.0)),
            Output::ConjIndepAob => {
                independent_bound_eaob(realization, &config.params).map(|v| (v, 0.0))
            }
            Output::BoundAobDiffeq => {
                aob_upper_bound(config.params.r, &config.params).map(|v| (v, 0.0))
            }
            Output::BoundAocCc => {
                aoc_upper_bound(n, config.params.r, spec.epsilon, &config.params)
                    .map(|v| (v, 0.0))
            }
        };
        emitter.emit(row, computed, started)?;
    }
    Ok(emitter.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use aobc_core::geometry::Point;
    use approx::assert_relative_eq;

    fn tiny_spec(extra: &str) -> SweepSpec {
        let base = "sim.slots_per_trial = 4000\nsim.warmup_slots = 500\n\
                    sim.trials = 2\nsim.realizations = 3\n";
        parse_config("test", &format!("{base}{extra}")).unwrap()
    }

    #[test]
    fn header_shape_matches_rows() {
        let spec = tiny_spec("sweep.grid = 2,4\noutputs = bound_aob_diffeq\n");
        let mut buf = Vec::new();
        let report = run_sweep(&spec, &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header, CSV_HEADER);
        let columns = header.split(',').count();
        for line in lines {
            assert_eq!(line.split(',').count(), columns, "bad row: {line}");
        }
        assert_eq!(report.rows, 2);
        assert!(!report.partial);
    }

    #[test]
    fn sweep_is_deterministic_without_timings() {
        let spec = tiny_spec("sweep.grid = 3,5\noutputs = mc_aob,exact_aob\n");
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_sweep(&spec, &mut a, false).unwrap();
        run_sweep(&spec, &mut b, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_rows_match_direct_evaluation() {
        let spec = tiny_spec("sweep.grid = 4,8\noutputs = bound_aob_diffeq,bound_aoc_cc\n");
        let mut buf = Vec::new();
        run_bounds(&spec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "r");
        assert_eq!(row[2], "bound_aob_diffeq");
        let params = spec.parameter.apply(&spec.base.params, 4.0).unwrap();
        let expect = aob_upper_bound(4.0, &params).unwrap();
        let got: f64 = row[3].parse().unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-8);
        // Closed-form rows carry no sampling metadata.
        assert_eq!(&row[5..9], &["0", "0", "0", "0"]);
    }

    #[test]
    fn capacity_overflow_becomes_nan_and_partial() {
        // Dense process: ~157 nodes on average, far past the subset cap.
        let spec = tiny_spec(
            "params.lambda = 0.5\nsweep.grid = 10\noutputs = exact_aob,bound_aob_diffeq\n",
        );
        let mut buf = Vec::new();
        let report = run_sweep(&spec, &mut buf, false).unwrap();
        assert!(report.partial);
        let text = String::from_utf8(buf).unwrap();
        let exact_row = text.lines().nth(1).unwrap();
        assert!(exact_row.contains("NaN"), "row was: {exact_row}");
        // The bound row after the failed cell is still produced.
        let bound_row = text.lines().nth(2).unwrap();
        assert!(!bound_row.contains("NaN"), "row was: {bound_row}");
    }

    #[test]
    fn instance_rows_report_node_count_and_overridden_radius() {
        let realization = Realization::new(
            vec![Point::new(1.0, 0.0), Point::new(0.0, 2.0)],
            vec![],
            4.0,
            40.0,
        )
        .unwrap();
        let spec = tiny_spec("outputs = exact_aob,exact_aoc,bound_aob_diffeq\n");
        let mut buf = Vec::new();
        let report = run_instance_file(&spec, &realization, &mut buf, false).unwrap();
        assert_eq!(report.rows, 3);
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines().skip(1) {
            let row: Vec<&str> = line.split(',').collect();
            assert_eq!(row[0], "n");
            let value: f64 = row[1].parse().unwrap();
            assert_eq!(value, 2.0);
        }
        // The bound is quoted at the file's radius, not the config default.
        let bound: f64 = text
            .lines()
            .nth(3)
            .unwrap()
            .split(',')
            .nth(3)
            .unwrap()
            .parse()
            .unwrap();
        let params = spec.base.params.with_r(4.0).unwrap();
        assert_relative_eq!(
            bound,
            aob_upper_bound(4.0, &params).unwrap(),
            max_relative = 1e-8
        );
    }

    #[test]
    fn empty_instance_yields_zero_ages() {
        let realization = Realization::new(vec![], vec![], 4.0, 40.0).unwrap();
        let spec = tiny_spec("outputs = mc_aob,exact_aob,exact_aoc\n");
        let mut buf = Vec::new();
        run_instance_file(&spec, &realization, &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines().skip(1) {
            let mean: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
            assert_eq!(mean, 0.0, "row was: {line}");
        }
    }

    #[test]
    fn warmup_resolution_respects_trial_budget() {
        let params = NetworkParams::new(0.01, 5.0, 0.2, 4.0, 10.0).unwrap();
        // Floor of the policy is 10^4, but a fifth of 4000 slots wins.
        assert_eq!(resolve_warmup(&params, 4000), 800);
        assert_eq!(resolve_warmup(&params, 1_000_000), 10_000);
    }

    #[test]
    fn typical_node_count_never_reports_zero() {
        let sparse = NetworkParams::new(1e-6, 5.0, 0.2, 4.0, 2.0).unwrap();
        assert_eq!(typical_node_count(&sparse), 1);
        let defaults = NetworkParams::new(0.01, 5.0, 0.2, 4.0, 10.0).unwrap();
        assert_eq!(typical_node_count(&defaults), 3);
    }
}
