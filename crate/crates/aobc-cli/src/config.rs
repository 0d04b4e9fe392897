//! Flat key-value sweep configuration.
//!
//! The format is dotted keys, one `key = value` per line, `#` comment lines,
//! chosen over flags so that a run is fully described by one diffable file.
//! Every key has a default; an empty file is the default experiment. Unknown
//! and duplicate keys are rejected with their position.

use std::fmt::Write as _;

use aobc_core::analytics::MuSource;
use aobc_core::channel::{Mode, NetworkParams};
use aobc_core::sim::SimConfig;

use crate::CliError;

// ============================================================================
// Vocabulary
// ============================================================================

/// Which model parameter the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    R,
    Lambda,
    P,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::R => "r",
            SweepParameter::Lambda => "lambda",
            SweepParameter::P => "p",
        }
    }

    fn parse(text: &str) -> Option<Self> {
        match text {
            "r" => Some(SweepParameter::R),
            "lambda" => Some(SweepParameter::Lambda),
            "p" => Some(SweepParameter::P),
            _ => None,
        }
    }

    /// The base parameters with this sweep parameter replaced by `value`.
    pub fn apply(
        self,
        base: &NetworkParams<f64>,
        value: f64,
    ) -> aobc_core::Result<NetworkParams<f64>> {
        match self {
            SweepParameter::R => base.with_r(value),
            SweepParameter::Lambda => base.with_lambda(value),
            SweepParameter::P => base.with_p(value),
        }
    }
}

/// One column family of the sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    McAob,
    McAoc,
    ExactAob,
    ExactAoc,
    BoundAobDiffeq,
    BoundAocCc,
    ConjIndepAob,
}

pub const ALL_OUTPUTS: [Output; 7] = [
    Output::McAob,
    Output::McAoc,
    Output::ExactAob,
    Output::ExactAoc,
    Output::BoundAobDiffeq,
    Output::BoundAocCc,
    Output::ConjIndepAob,
];

impl Output {
    pub fn name(self) -> &'static str {
        match self {
            Output::McAob => "mc_aob",
            Output::McAoc => "mc_aoc",
            Output::ExactAob => "exact_aob",
            Output::ExactAoc => "exact_aoc",
            Output::BoundAobDiffeq => "bound_aob_diffeq",
            Output::BoundAocCc => "bound_aoc_cc",
            Output::ConjIndepAob => "conj_indep_aob",
        }
    }

    fn parse(text: &str) -> Option<Self> {
        ALL_OUTPUTS.iter().copied().find(|o| o.name() == text)
    }

    pub fn mode(self) -> Mode {
        match self {
            Output::McAob | Output::ExactAob | Output::BoundAobDiffeq | Output::ConjIndepAob => {
                Mode::Broadcast
            }
            Output::McAoc | Output::ExactAoc | Output::BoundAocCc => Mode::Collection,
        }
    }
}

// ============================================================================
// The sweep spec itself
// ============================================================================

/// A fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    /// Strictly increasing, nonempty.
    pub grid: Vec<f64>,
    /// Base simulation setup; `warmup_slots` holds the explicit override and
    /// is ignored when `auto_warmup` is set.
    pub base: SimConfig<f64>,
    /// Warmup derived per grid point from the analytic bound instead of the
    /// explicit `sim.warmup_slots`.
    pub auto_warmup: bool,
    /// Emitted per grid point, in this order.
    pub outputs: Vec<Output>,
    /// Certified tail error of exact cover-time sums.
    pub tail_tol: f64,
    /// Minimum co-node separation of the collection bound.
    pub epsilon: f64,
    /// Which per-node success probability feeds exact collection values.
    pub mu_source: MuSource,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let params = NetworkParams::new(0.01, 5.0, 0.2, 4.0, 10.0)
            .expect("default parameters are valid");
        let base = SimConfig::new(params, Mode::Broadcast);
        SweepSpec {
            parameter: SweepParameter::R,
            grid: vec![10.0],
            base,
            auto_warmup: true,
            outputs: vec![Output::McAob, Output::McAoc],
            tail_tol: 1e-9,
            epsilon: 1.0,
            mu_source: MuSource::Conditional,
        }
    }
}

impl SweepSpec {
    /// Structural checks beyond per-key parsing: grid shape, grid-parameter
    /// compatibility, and bound applicability.
    fn validate(&self) -> Result<(), String> {
        if self.grid.is_empty() {
            return Err("sweep.grid: must contain at least one value".into());
        }
        for pair in self.grid.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(format!(
                    "sweep.grid: values must be strictly increasing ({} then {})",
                    pair[0], pair[1]
                ));
            }
        }
        for &v in &self.grid {
            self.parameter
                .apply(&self.base.params, v)
                .map_err(|e| format!("sweep.grid: value {v}: {e}"))?;
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err("analytics.tail_tol: must lie in (0, 1)".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err("analytics.epsilon: must be positive and finite".into());
        }
        if self.outputs.contains(&Output::BoundAocCc) {
            let min_r = match self.parameter {
                SweepParameter::R => self.grid[0],
                _ => self.base.params.r,
            };
            if self.epsilon >= min_r {
                return Err(format!(
                    "analytics.epsilon: {} does not satisfy epsilon < r for the smallest swept radius {min_r}",
                    self.epsilon
                ));
            }
        }
        self.base
            .validate()
            .map_err(|e| format!("sim: {e}"))?;
        Ok(())
    }
}

// ============================================================================
// Parsing
// ============================================================================

fn config_err(path: &str, line: usize, column: usize, why: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        line,
        column,
        why: why.into(),
    }
}

/// Parses a configuration file's text. `path` is used in error messages only.
pub fn parse_config(path: &str, text: &str) -> Result<SweepSpec, CliError> {
    let mut spec = SweepSpec::default();
    let mut explicit_warmup: Option<u64> = None;
    let mut seen: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let eq = raw.find('=').ok_or_else(|| {
            config_err(path, line_no, 1, "expected `key = value`")
        })?;
        let key = raw[..eq].trim();
        let value = raw[eq + 1..].trim();
        let value_col = eq + 2;
        if key.is_empty() {
            return Err(config_err(path, line_no, 1, "empty key"));
        }
        if seen.iter().any(|k| k == key) {
            return Err(config_err(
                path,
                line_no,
                1,
                format!("duplicate key `{key}`"),
            ));
        }
        seen.push(key.to_string());

        let fail = |why: String| config_err(path, line_no, value_col, why);
        match key {
            "params.lambda" => spec.base.params.lambda = parse_f64(key, value).map_err(fail)?,
            "params.theta" => spec.base.params.theta = parse_f64(key, value).map_err(fail)?,
            "params.p" => spec.base.params.p = parse_f64(key, value).map_err(fail)?,
            "params.beta" => spec.base.params.beta = parse_f64(key, value).map_err(fail)?,
            "params.r" => spec.base.params.r = parse_f64(key, value).map_err(fail)?,
            "sim.slots_per_trial" => {
                spec.base.slots_per_trial = parse_u64(key, value).map_err(fail)?
            }
            "sim.warmup_slots" => {
                if value == "auto" {
                    explicit_warmup = None;
                    spec.auto_warmup = true;
                } else {
                    explicit_warmup = Some(parse_u64(key, value).map_err(fail)?);
                    spec.auto_warmup = false;
                }
            }
            "sim.trials" => spec.base.trials = parse_u32(key, value).map_err(fail)?,
            "sim.realizations" => spec.base.realizations = parse_u32(key, value).map_err(fail)?,
            "sim.master_seed" => spec.base.master_seed = parse_u64(key, value).map_err(fail)?,
            "sim.truncation_rel_tol" => {
                spec.base.truncation_rel_tol = parse_f64(key, value).map_err(fail)?
            }
            "sweep.parameter" => {
                spec.parameter = SweepParameter::parse(value).ok_or_else(|| {
                    fail(format!(
                        "sweep.parameter: `{value}` is not one of r, lambda, p"
                    ))
                })?
            }
            "sweep.grid" => {
                let mut grid = Vec::new();
                for part in value.split(',') {
                    grid.push(parse_f64("sweep.grid entry", part.trim()).map_err(&fail)?);
                }
                spec.grid = grid;
            }
            "outputs" => {
                let mut outputs = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    let output = Output::parse(part).ok_or_else(|| {
                        fail(format!("outputs: `{part}` is not a known output"))
                    })?;
                    if outputs.contains(&output) {
                        return Err(fail(format!("outputs: `{part}` listed twice")));
                    }
                    outputs.push(output);
                }
                if outputs.is_empty() {
                    return Err(fail("outputs: list is empty".into()));
                }
                spec.outputs = outputs;
            }
            "analytics.tail_tol" => spec.tail_tol = parse_f64(key, value).map_err(fail)?,
            "analytics.epsilon" => spec.epsilon = parse_f64(key, value).map_err(fail)?,
            "analytics.collection_mu" => {
                spec.mu_source = match value {
                    "conditional" => MuSource::Conditional,
                    "semi" => MuSource::Semi,
                    other => {
                        return Err(fail(format!(
                            "analytics.collection_mu: `{other}` is not `conditional` or `semi`"
                        )))
                    }
                }
            }
            other => {
                return Err(config_err(
                    path,
                    line_no,
                    1,
                    format!("unknown key `{other}`"),
                ))
            }
        }
    }

    if let Some(w) = explicit_warmup {
        spec.base.warmup_slots = w;
    }
    // Structural validation; positions are gone by now, so report line 0.
    spec.validate()
        .map_err(|why| config_err(path, 0, 0, why))?;
    Ok(spec)
}

fn parse_f64(key: &str, value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("{key}: `{value}` is not a number"))
        .and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("{key}: `{value}` is not finite"))
            }
        })
}

fn parse_u64(key: &str, value: &str) -> Result<u64, String> {
    value
        .parse::<u64>()
        .map_err(|_| format!("{key}: `{value}` is not a nonnegative integer"))
}

fn parse_u32(key: &str, value: &str) -> Result<u32, String> {
    value
        .parse::<u32>()
        .map_err(|_| format!("{key}: `{value}` is not a nonnegative integer"))
}

// ============================================================================
// Emission
// ============================================================================

/// Serializes a spec so that `parse_config(emit_config(spec)) == spec`.
/// Floats use the shortest exact representation, so the round trip is
/// value-exact and re-emission is byte-identical.
pub fn emit_config(spec: &SweepSpec) -> String {
    let mut out = String::new();
    let p = &spec.base.params;
    writeln!(out, "# model").unwrap();
    writeln!(out, "params.lambda = {:?}", p.lambda).unwrap();
    writeln!(out, "params.theta = {:?}", p.theta).unwrap();
    writeln!(out, "params.p = {:?}", p.p).unwrap();
    writeln!(out, "params.beta = {:?}", p.beta).unwrap();
    writeln!(out, "params.r = {:?}", p.r).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "# estimation").unwrap();
    writeln!(out, "sim.slots_per_trial = {}", spec.base.slots_per_trial).unwrap();
    if spec.auto_warmup {
        writeln!(out, "sim.warmup_slots = auto").unwrap();
    } else {
        writeln!(out, "sim.warmup_slots = {}", spec.base.warmup_slots).unwrap();
    }
    writeln!(out, "sim.trials = {}", spec.base.trials).unwrap();
    writeln!(out, "sim.realizations = {}", spec.base.realizations).unwrap();
    writeln!(out, "sim.master_seed = {}", spec.base.master_seed).unwrap();
    writeln!(out, "sim.truncation_rel_tol = {:?}", spec.base.truncation_rel_tol).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "# sweep").unwrap();
    writeln!(out, "sweep.parameter = {}", spec.parameter.name()).unwrap();
    let grid: Vec<String> = spec.grid.iter().map(|v| format!("{v:?}")).collect();
    writeln!(out, "sweep.grid = {}", grid.join(",")).unwrap();
    let outputs: Vec<&str> = spec.outputs.iter().map(|o| o.name()).collect();
    writeln!(out, "outputs = {}", outputs.join(",")).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "# analytics").unwrap();
    writeln!(out, "analytics.tail_tol = {:?}", spec.tail_tol).unwrap();
    writeln!(out, "analytics.epsilon = {:?}", spec.epsilon).unwrap();
    let mu = match spec.mu_source {
        MuSource::Conditional => "conditional",
        MuSource::Semi => "semi",
    };
    writeln!(out, "analytics.collection_mu = {mu}").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_defaults_table() {
        let spec = parse_config("test", "").unwrap();
        assert_eq!(spec.base.params.lambda, 0.01);
        assert_eq!(spec.base.params.theta, 5.0);
        assert_eq!(spec.base.params.p, 0.2);
        assert_eq!(spec.base.params.beta, 4.0);
        assert_eq!(spec.base.params.r, 10.0);
        assert_eq!(spec.base.slots_per_trial, 250_000);
        assert_eq!(spec.base.trials, 30);
        assert!(spec.auto_warmup);
        assert_eq!(spec.parameter, SweepParameter::R);
        assert_eq!(spec.grid, vec![10.0]);
    }

    #[test]
    fn out_of_range_map_is_rejected_naming_the_field() {
        let err = parse_config("test", "params.p = 1.5\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("p"), "message was: {text}");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(parse_config("test", "params.gamma = 1\n").is_err());
        assert!(parse_config("test", "params.p = 0.2\nparams.p = 0.3\n").is_err());
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_config("conf", "params.p = oops\n") {
            Err(CliError::Config { line, column, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(column, 11);
            }
            other => panic!("expected config error, got {other:?}"),
        }
        match parse_config("conf", "# fine\nnot a line\n") {
            Err(CliError::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn grid_must_increase_strictly() {
        assert!(parse_config("t", "sweep.grid = 2,2\n").is_err());
        assert!(parse_config("t", "sweep.grid = 3,2\n").is_err());
        assert!(parse_config("t", "sweep.grid = 2,3,10\n").is_ok());
    }

    #[test]
    fn swept_values_must_satisfy_parameter_invariants() {
        // p is a probability: a grid reaching above 1 is invalid.
        let text = "sweep.parameter = p\nsweep.grid = 0.5,1.5\n";
        assert!(parse_config("t", text).is_err());
        // lambda = 0 is fine.
        let text = "sweep.parameter = lambda\nsweep.grid = 0,0.01\n";
        assert!(parse_config("t", text).is_ok());
    }

    #[test]
    fn epsilon_must_fit_under_the_smallest_radius() {
        let text = "sweep.grid = 0.5,10\noutputs = bound_aoc_cc\n";
        assert!(parse_config("t", text).is_err());
        let text = "sweep.grid = 2,10\noutputs = bound_aoc_cc\n";
        assert!(parse_config("t", text).is_ok());
    }

    #[test]
    fn round_trip_is_exact_and_stable() {
        let text = "params.lambda = 0.003\nsweep.parameter = lambda\n\
                    sweep.grid = 1e-3,0.01,0.1\noutputs = mc_aob,bound_aob_diffeq\n\
                    sim.warmup_slots = 777\nanalytics.collection_mu = semi\n";
        let spec = parse_config("t", text).unwrap();
        assert!(!spec.auto_warmup);
        let emitted = emit_config(&spec);
        let back = parse_config("t", &emitted).unwrap();
        assert_eq!(spec, back);
        assert_eq!(emitted, emit_config(&back));
    }

    #[test]
    fn warmup_auto_round_trips() {
        let spec = parse_config("t", "sim.warmup_slots = auto\n").unwrap();
        assert!(spec.auto_warmup);
        let back = parse_config("t", &emit_config(&spec)).unwrap();
        assert_eq!(spec, back);
    }
}
