//! Spatial model: the node disk, the interferer window, and their samplers.
//!
//! Nodes live strictly inside a disk of radius `r` centred on the base station
//! at the origin; interferers live on a larger concentric disk of radius `Rw`
//! that stands in for the infinite plane. Both are homogeneous Poisson
//! processes sampled count-first (Poisson count, then i.i.d. uniform positions
//! on the disk).

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::{Error, Real, Result};

// ============================================================================
// Points
// ============================================================================

/// A location in the plane. The base station sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<F> {
    pub x: F,
    pub y: F,
}

impl<F: Real> Point<F> {
    pub fn new(x: F, y: F) -> Self {
        Point { x, y }
    }

    /// Euclidean distance from the origin.
    pub fn norm(&self) -> F {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(&self) -> F {
        self.x * self.x + self.y * self.y
    }

    pub fn distance(&self, other: &Point<F>) -> F {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_origin(&self) -> bool {
        self.x == F::zero() && self.y == F::zero()
    }
}

// ============================================================================
// Realizations
// ============================================================================

/// One sampled (or loaded) spatial layout: node and interferer positions plus
/// the two radii that define where they are allowed to be.
///
/// Invariants, enforced by [`Realization::new`]:
/// * `0 < node_radius <= window_radius`, both finite,
/// * every node lies strictly inside the node disk,
/// * every interferer lies within the window disk,
/// * no point sits exactly on the base station at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization<F> {
    nodes: Vec<Point<F>>,
    interferers: Vec<Point<F>>,
    node_radius: F,
    window_radius: F,
}

impl<F: Real> Realization<F> {
    pub fn new(
        nodes: Vec<Point<F>>,
        interferers: Vec<Point<F>>,
        node_radius: F,
        window_radius: F,
    ) -> Result<Self> {
        if !(node_radius > F::zero()) || !node_radius.is_finite() {
            return Err(Error::invalid(
                "node_radius",
                format!("{} is not a positive finite radius", node_radius.widen()),
            ));
        }
        if !(window_radius >= node_radius) || !window_radius.is_finite() {
            return Err(Error::invalid(
                "window_radius",
                format!(
                    "{} must be finite and at least node_radius = {}",
                    window_radius.widen(),
                    node_radius.widen()
                ),
            ));
        }
        for (i, n) in nodes.iter().enumerate() {
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(Error::invalid("node", format!("node {i} is not finite")));
            }
            if n.is_origin() {
                return Err(Error::invalid(
                    "node",
                    format!("node {i} coincides with the base station"),
                ));
            }
            if !(n.norm() < node_radius) {
                return Err(Error::invalid(
                    "node",
                    format!(
                        "node {i} at distance {} is not strictly inside the node disk of radius {}",
                        n.norm().widen(),
                        node_radius.widen()
                    ),
                ));
            }
        }
        for (i, p) in interferers.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::invalid(
                    "interferer",
                    format!("interferer {i} is not finite"),
                ));
            }
            if p.is_origin() {
                return Err(Error::invalid(
                    "interferer",
                    format!("interferer {i} coincides with the base station"),
                ));
            }
            if !(p.norm() <= window_radius) {
                return Err(Error::invalid(
                    "interferer",
                    format!(
                        "interferer {i} at distance {} lies outside the window of radius {}",
                        p.norm().widen(),
                        window_radius.widen()
                    ),
                ));
            }
        }
        Ok(Realization {
            nodes,
            interferers,
            node_radius,
            window_radius,
        })
    }

    /// Samples both point processes with a shared intensity `lambda`.
    pub fn sample<R: Rng + ?Sized>(
        lambda: F,
        node_radius: F,
        window_radius: F,
        rng: &mut R,
    ) -> Result<Self> {
        Self::sample_with_interferer_intensity(lambda, lambda, node_radius, window_radius, rng)
    }

    /// Samples with separate node / interferer intensities (exploration knob;
    /// the model itself uses a single intensity for both).
    pub fn sample_with_interferer_intensity<R: Rng + ?Sized>(
        lambda_nodes: F,
        lambda_interferers: F,
        node_radius: F,
        window_radius: F,
        rng: &mut R,
    ) -> Result<Self> {
        let nodes = sample_node_process(lambda_nodes, node_radius, rng)?;
        let interferers = sample_interferer_process(lambda_interferers, window_radius, rng)?;
        Realization::new(nodes, interferers, node_radius, window_radius)
    }

    pub fn nodes(&self) -> &[Point<F>] {
        &self.nodes
    }

    pub fn interferers(&self) -> &[Point<F>] {
        &self.interferers
    }

    pub fn node_radius(&self) -> F {
        self.node_radius
    }

    pub fn window_radius(&self) -> F {
        self.window_radius
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    // ------------------------------------------------------------------
    // Plain-text serialization
    // ------------------------------------------------------------------

    /// Serializes to the plain-text layout format:
    ///
    /// ```text
    /// r=<node_radius> Rw=<window_radius>
    /// N <x> <y>
    /// I <x> <y>
    /// ```
    ///
    /// Coordinates are written with 17 significant digits, enough to
    /// round-trip an `f64` exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "r={:.16e} Rw={:.16e}\n",
            self.node_radius.widen(),
            self.window_radius.widen()
        ));
        for n in &self.nodes {
            out.push_str(&format!("N {:.16e} {:.16e}\n", n.x.widen(), n.y.widen()));
        }
        for p in &self.interferers {
            out.push_str(&format!("I {:.16e} {:.16e}\n", p.x.widen(), p.y.widen()));
        }
        out
    }

    /// Parses the format written by [`Realization::to_text`]. Blank lines and
    /// `#` comment lines are ignored. All constructor invariants are enforced.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut node_radius: Option<F> = None;
        let mut window_radius: Option<F> = None;
        let mut nodes = Vec::new();
        let mut interferers = Vec::new();
        let mut saw_header = false;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end();
            let trimmed = line.trim_start();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let col = line.len() - trimmed.len() + 1;
            if !saw_header {
                // Header: `r=<val> Rw=<val>`.
                let mut parts = trimmed.split_whitespace();
                let r_part = parts.next().unwrap_or("");
                let rw_part = parts.next().unwrap_or("");
                if parts.next().is_some() || !r_part.starts_with("r=") || !rw_part.starts_with("Rw=")
                {
                    return Err(Error::Parse {
                        line: line_no,
                        column: col,
                        why: "expected header `r=<radius> Rw=<radius>`".into(),
                    });
                }
                node_radius = Some(parse_float(&r_part[2..], line_no, col + 2)?);
                let rw_col = col + r_part.len() + 1 + 3;
                window_radius = Some(parse_float(&rw_part[3..], line_no, rw_col)?);
                saw_header = true;
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let tag = parts.next().unwrap_or("");
            let xs = parts.next();
            let ys = parts.next();
            let (xs, ys) = match (xs, ys, parts.next()) {
                (Some(x), Some(y), None) => (x, y),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        column: col,
                        why: "expected `N <x> <y>` or `I <x> <y>`".into(),
                    })
                }
            };
            let x = parse_float(xs, line_no, col + tag.len() + 1)?;
            let y = parse_float(ys, line_no, col + tag.len() + xs.len() + 2)?;
            match tag {
                "N" => nodes.push(Point::new(x, y)),
                "I" => interferers.push(Point::new(x, y)),
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        column: col,
                        why: format!("unknown point tag `{other}` (expected N or I)"),
                    })
                }
            }
        }

        match (node_radius, window_radius) {
            (Some(r), Some(rw)) => Realization::new(nodes, interferers, r, rw),
            _ => Err(Error::Parse {
                line: 1,
                column: 1,
                why: "missing header `r=<radius> Rw=<radius>`".into(),
            }),
        }
    }
}

fn parse_float<F: Real>(s: &str, line: usize, column: usize) -> Result<F> {
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        line,
        column,
        why: format!("`{s}` is not a number"),
    })?;
    Ok(F::lit(v))
}

// ============================================================================
// Samplers
// ============================================================================

/// Poisson count with mean `lambda * area`, sampled in f64 regardless of `F`.
fn poisson_count<F: Real, R: Rng + ?Sized>(lambda: F, radius: F, rng: &mut R) -> Result<u64> {
    if lambda < F::zero() || !lambda.is_finite() {
        return Err(Error::invalid(
            "lambda",
            format!("{} is not a finite nonnegative intensity", lambda.widen()),
        ));
    }
    if !(radius > F::zero()) || !radius.is_finite() {
        return Err(Error::invalid(
            "radius",
            format!("{} is not a positive finite radius", radius.widen()),
        ));
    }
    let mean = lambda.widen() * std::f64::consts::PI * radius.widen() * radius.widen();
    if mean == 0.0 {
        return Ok(0);
    }
    let pois = Poisson::new(mean).map_err(|e| Error::invalid("poisson mean", e.to_string()))?;
    Ok(pois.sample(rng) as u64)
}

/// One point uniform on the disk of the given radius, never exactly at the
/// origin (resampled in the measure-zero case so downstream path loss stays
/// finite).
fn uniform_disk_point<F: Real, R: Rng + ?Sized>(radius: F, rng: &mut R) -> Point<F> {
    loop {
        // Area-uniform: radius scales with sqrt(U), angle is uniform.
        let rad = radius * F::sample_unit(rng).sqrt();
        let ang = F::lit(2.0) * F::PI() * F::sample_unit(rng);
        let p = Point::new(rad * ang.cos(), rad * ang.sin());
        if !p.is_origin() {
            return p;
        }
    }
}

/// Samples the node process: a homogeneous Poisson process of intensity
/// `lambda` on the open disk of radius `radius` around the base station.
pub fn sample_node_process<F: Real, R: Rng + ?Sized>(
    lambda: F,
    radius: F,
    rng: &mut R,
) -> Result<Vec<Point<F>>> {
    let count = poisson_count(lambda, radius, rng)?;
    Ok((0..count).map(|_| uniform_disk_point(radius, rng)).collect())
}

/// Samples the interferer process: a homogeneous Poisson process of intensity
/// `lambda` on the disk of radius `window_radius`, the finite stand-in for the
/// infinite interferer plane.
pub fn sample_interferer_process<F: Real, R: Rng + ?Sized>(
    lambda: F,
    window_radius: F,
    rng: &mut R,
) -> Result<Vec<Point<F>>> {
    let count = poisson_count(lambda, window_radius, rng)?;
    Ok((0..count)
        .map(|_| uniform_disk_point(window_radius, rng))
        .collect())
}

// ============================================================================
// Window sizing and distance utilities
// ============================================================================

/// Smallest window radius `Rw >= 2r` whose neglected far-field interference is
/// small relative to what an edge node already sees.
///
/// The mean interference power reaching any point of the node disk from
/// transmitters beyond `Rw` is at most `2 pi lambda p (Rw - r)^(2-beta) /
/// (beta - 2)`. That bound is required to be at most `rel_tol` times the same
/// far-field integral evaluated at separation `r` (the power an edge node
/// collects from beyond one disk radius away). The `lambda p` factors cancel,
/// so the condition reduces to `((Rw - r)/r)^(2-beta) <= rel_tol` and the
/// window depends only on `beta`, `r` and `rel_tol`.
pub fn truncation_window_radius<F: Real>(
    lambda: F,
    p: F,
    beta: F,
    r: F,
    rel_tol: F,
) -> Result<F> {
    if !beta.is_finite() || !(beta > F::lit(2.0)) {
        return Err(Error::DivergentInterference { beta: beta.widen() });
    }
    if lambda < F::zero() || !lambda.is_finite() {
        return Err(Error::invalid(
            "lambda",
            format!("{} is not a finite nonnegative intensity", lambda.widen()),
        ));
    }
    if !(p >= F::zero() && p <= F::one()) {
        return Err(Error::invalid(
            "p",
            format!("{} is not a probability", p.widen()),
        ));
    }
    if !(r > F::zero()) || !r.is_finite() {
        return Err(Error::invalid(
            "r",
            format!("{} is not a positive finite radius", r.widen()),
        ));
    }
    if !(rel_tol > F::zero() && rel_tol < F::one()) {
        return Err(Error::invalid(
            "rel_tol",
            format!("{} is not in (0, 1)", rel_tol.widen()),
        ));
    }
    let exponent = -(F::one() / (beta - F::lit(2.0)));
    let window = r * (F::one() + rel_tol.powf(exponent));
    Ok(window.max(F::lit(2.0) * r))
}

/// Squared distances from the origin, sorted ascending. For a homogeneous
/// Poisson process these are distributed like the arrival times of a 1-D
/// Poisson process of rate `lambda * pi`, which is what the statistical tests
/// check.
pub fn ordered_squared_distances<F: Real>(points: &[Point<F>]) -> Vec<F> {
    let mut sq: Vec<F> = points.iter().map(Point::norm_squared).collect();
    sq.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    sq
}
