//! Built-in smoke checks against frozen reference values.
//!
//! `aobc selftest` recomputes a handful of quantities with independently
//! verified values and checks determinism of the estimator. It is meant as a
//! seconds-long sanity gate after building on a new machine, not a test
//! suite.

use std::io::Write;

use aobc_core::analytics::{
    aob_upper_bound, aoc_upper_bound, exact_eaoc_from_probs, harmonic,
    independent_bound_from_probs, max_min_identity,
};
use aobc_core::channel::{constant_c, succ_prob_spatial_average, Mode, NetworkParams};
use aobc_core::geometry::{Point, Realization};
use aobc_core::sim::{run_instance, SimConfig};

fn default_params() -> NetworkParams<f64> {
    NetworkParams::new(0.01, 5.0, 0.2, 4.0, 10.0).expect("default parameters are valid")
}

fn close(got: f64, want: f64) -> bool {
    (got - want).abs() <= 1e-12 * want.abs().max(1.0)
}

/// Runs every check, printing one `ok`/`FAIL` line per check to `out`.
/// Returns whether all of them passed.
pub fn run<W: Write>(out: &mut W) -> std::io::Result<bool> {
    let params = default_params();
    let mut all_ok = true;

    let mut check = |out: &mut W, name: &str, got: f64, want: f64| -> std::io::Result<()> {
        if close(got, want) {
            writeln!(out, "ok   {name}")?;
        } else {
            all_ok = false;
            writeln!(out, "FAIL {name}: expected {want:.17}, got {got:.17}")?;
        }
        Ok(())
    };

    check(
        out,
        "interference constant (theta 5, beta 4)",
        constant_c(5.0, 4.0).unwrap(),
        3.5124073655203632,
    )?;
    check(
        out,
        "mean success probability at the cell edge",
        succ_prob_spatial_average(10.0, &params).unwrap(),
        0.022008015575927024,
    )?;
    check(
        out,
        "broadcast age bound at the default radius",
        aob_upper_bound(10.0, &params).unwrap(),
        57.564493765682177,
    )?;
    check(
        out,
        "collection age bound, one node at the edge",
        aoc_upper_bound(1, 10.0, 1.0, &params).unwrap(),
        45.43799037900662,
    )?;
    check(
        out,
        "exact collection age, decode probs 1/2 and 1/4",
        exact_eaoc_from_probs(&[0.5, 0.25]).unwrap(),
        14.0 / 3.0,
    )?;
    check(
        out,
        "exact collection age, three uniform decode probs",
        exact_eaoc_from_probs(&[1.0 / 3.0; 3]).unwrap(),
        5.5,
    )?;
    check(
        out,
        "independent-delay cover time, two coins of 1/2",
        independent_bound_from_probs(&[0.5, 0.5]).unwrap(),
        8.0 / 3.0,
    )?;
    check(out, "harmonic number H_4", harmonic(4), 25.0 / 12.0)?;
    check(
        out,
        "inclusion-exclusion max recovery",
        max_min_identity(&[0.5, 2.0, 1.25]).unwrap(),
        2.0,
    )?;

    // Determinism: the estimator is a pure function of its config.
    let realization = Realization::new(
        vec![Point::new(3.0, 0.0), Point::new(0.0, -5.0)],
        vec![Point::new(12.0, 4.0)],
        10.0,
        40.0,
    )
    .expect("fixture realization is valid");
    let mut config = SimConfig::new(params, Mode::Broadcast);
    config.slots_per_trial = 5_000;
    config.warmup_slots = 500;
    config.trials = 2;
    let first = run_instance(&realization, &config).unwrap().mean_age;
    let second = run_instance(&realization, &config).unwrap().mean_age;
    if first.to_bits() == second.to_bits() {
        writeln!(out, "ok   estimator determinism (bit-identical reruns)")?;
    } else {
        all_ok = false;
        writeln!(
            out,
            "FAIL estimator determinism: {first:.17} then {second:.17}"
        )?;
    }

    writeln!(
        out,
        "{}",
        if all_ok {
            "selftest passed"
        } else {
            "selftest FAILED"
        }
    )?;
    Ok(all_ok)
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes_and_prints_one_line_per_check() {
        let mut buf = Vec::new();
        let ok = super::run(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(ok, "selftest output:\n{text}");
        assert_eq!(text.lines().filter(|l| l.starts_with("ok")).count(), 10);
    }
}
