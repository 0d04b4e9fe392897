//! Slot-level channel dynamics and the matching closed-form success
//! probabilities.
//!
//! Every transmitter is gated by an independent per-slot ALOHA coin with bias
//! `p`. Links fade independently per slot and per link; Rayleigh amplitude
//! fading makes the received power `H * l(d)` with `H` a unit-mean exponential
//! and `l(d) = d^(-beta)` the path loss. A packet is decoded iff its SIR
//! (noise is ignored) strictly exceeds the threshold `theta`; with zero
//! interference an active transmitter always succeeds.
//!
//! The closed forms all reduce to one per-interferer factor, the Laplace
//! transform of the faded, ALOHA-gated interference power:
//!
//! ```text
//! E[exp(-theta * Z * H * g_int / g_sig)] = 1 - p + p / (1 + theta * g_int / g_sig)
//! ```
//!
//! where `g_int` is the interferer-to-receiver gain and `g_sig` the
//! signal gain ([`FactorForm::Derived`]). The alternative
//! [`FactorForm::ThetaInverted`] applies the threshold to the inverse gain
//! ratio, `1 - p / (1 + theta * g_sig / g_int)`; it is kept so the two
//! conventions can be compared against the simulator, which arbitrates in
//! favour of `Derived` (see the slot-frequency tests).

use rand::Rng;

use crate::geometry::{Point, Realization};
use crate::numeric::sum_descending;
use crate::{Error, Real, Result};

/// Hard cap on subset sizes enumerated by the inclusion-exclusion helpers.
pub const MAX_SUBSET_NODES: usize = 20;

// ============================================================================
// Parameters and modes
// ============================================================================

/// Model parameters shared by the whole pipeline.
///
/// Invariants (checked by [`NetworkParams::new`]): `lambda >= 0`, `theta > 1`,
/// `0 < p <= 1`, `beta > 2`, `r > 0`, all finite. `theta > 1` matters: it
/// guarantees at most one collection reception per slot. `beta > 2` keeps the
/// interference integral finite, so `delta = 2 / beta` lies in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams<F> {
    /// Intensity of both Poisson processes (nodes and interferers), 1/m^2.
    pub lambda: F,
    /// SIR decoding threshold (linear, not dB).
    pub theta: F,
    /// Per-slot ALOHA access probability.
    pub p: F,
    /// Path-loss exponent.
    pub beta: F,
    /// Radius of the node disk, metres.
    pub r: F,
}

impl<F: Real> NetworkParams<F> {
    pub fn new(lambda: F, theta: F, p: F, beta: F, r: F) -> Result<Self> {
        let params = NetworkParams {
            lambda,
            theta,
            p,
            beta,
            r,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < F::zero() {
            return Err(Error::invalid(
                "lambda",
                format!("{} is not a finite nonnegative intensity", self.lambda.widen()),
            ));
        }
        if !self.theta.is_finite() || !(self.theta > F::one()) {
            return Err(Error::invalid(
                "theta",
                format!("{} must exceed 1", self.theta.widen()),
            ));
        }
        if !self.p.is_finite() || !(self.p > F::zero()) || self.p > F::one() {
            return Err(Error::invalid(
                "p",
                format!("{} is not in (0, 1]", self.p.widen()),
            ));
        }
        if !self.beta.is_finite() || !(self.beta > F::lit(2.0)) {
            return Err(Error::DivergentInterference {
                beta: self.beta.widen(),
            });
        }
        if !self.r.is_finite() || !(self.r > F::zero()) {
            return Err(Error::invalid(
                "r",
                format!("{} is not a positive finite radius", self.r.widen()),
            ));
        }
        Ok(())
    }

    /// `delta = 2 / beta`, always in `(0, 1)` for valid parameters.
    pub fn delta(&self) -> F {
        F::lit(2.0) / self.beta
    }

    pub fn with_lambda(&self, lambda: F) -> Result<Self> {
        Self::new(lambda, self.theta, self.p, self.beta, self.r)
    }

    pub fn with_p(&self, p: F) -> Result<Self> {
        Self::new(self.lambda, self.theta, p, self.beta, self.r)
    }

    pub fn with_r(&self, r: F) -> Result<Self> {
        Self::new(self.lambda, self.theta, self.p, self.beta, r)
    }
}

/// Transmission direction of a slot (and of a whole run).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Base station transmits, nodes listen. Many nodes can decode one slot.
    Broadcast,
    /// Nodes transmit, base listens. `theta > 1` allows at most one decode.
    Collection,
}

/// Which algebraic form of the per-interferer factor to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorForm {
    /// `1 - p + p / (1 + theta * g_int / g_sig)`: the Rayleigh/ALOHA Laplace
    /// transform. Matches the slot-level simulator.
    #[default]
    Derived,
    /// `1 - p / (1 + theta * g_sig / g_int)`: same shape with the threshold on
    /// the inverted gain ratio (equivalent to swapping `theta` for `1/theta`).
    /// Disagrees with the simulator; retained for comparison only.
    ThetaInverted,
}

// ============================================================================
// Closed forms
// ============================================================================

/// Path-loss gain `l(x) = |x|^(-beta)`. Singular at the origin.
pub fn path_loss<F: Real>(x: &Point<F>, beta: F) -> Result<F> {
    let d = x.norm();
    if d == F::zero() {
        return Err(Error::SingularPathLoss {
            context: "path_loss at zero separation",
        });
    }
    Ok(d.powf(-beta))
}

/// Interference constant `C = Gamma(1 + delta) Gamma(1 - delta) theta^delta`
/// with `delta = 2 / beta`, evaluated through the reflection identity
/// `Gamma(1 + delta) Gamma(1 - delta) = delta * pi / sin(pi * delta)` so no
/// gamma-function dependency is needed.
pub fn constant_c<F: Real>(theta: F, beta: F) -> Result<F> {
    if !theta.is_finite() || !(theta > F::zero()) {
        return Err(Error::invalid(
            "theta",
            format!("{} must be positive", theta.widen()),
        ));
    }
    if !beta.is_finite() || !(beta > F::lit(2.0)) {
        return Err(Error::DivergentInterference { beta: beta.widen() });
    }
    let delta = F::lit(2.0) / beta;
    let gamma_product = delta * F::PI() / (F::PI() * delta).sin();
    Ok(gamma_product * theta.powf(delta))
}

/// Success probability of a link of length `d` averaged over the interferer
/// field: `mu(d) = p * exp(-p * lambda * pi * C * d^2)`.
pub fn succ_prob_spatial_average<F: Real>(d: F, params: &NetworkParams<F>) -> Result<F> {
    params.validate()?;
    if !d.is_finite() || d < F::zero() {
        return Err(Error::invalid(
            "d",
            format!("{} is not a nonnegative distance", d.widen()),
        ));
    }
    let c = constant_c(params.theta, params.beta)?;
    Ok(params.p * (-params.p * params.lambda * F::PI() * c * d * d).exp())
}

/// One interferer's multiplicative factor in a conditional success
/// probability. `g_sig` is the signal gain at the receiver, `g_int` the
/// interferer's gain at the same receiver.
#[inline]
pub fn interferer_factor<F: Real>(form: FactorForm, g_sig: F, g_int: F, p: F, theta: F) -> F {
    match form {
        FactorForm::Derived => F::one() - p + p / (F::one() + theta * g_int / g_sig),
        FactorForm::ThetaInverted => F::one() - p / (F::one() + theta * g_sig / g_int),
    }
}

/// Product of interferer factors, switched to log space for very large
/// interferer sets so the result cannot underflow.
fn factor_product<F: Real>(factors: impl Iterator<Item = F>, count_hint: usize) -> F {
    const LOG_SPACE_THRESHOLD: usize = 64;
    if count_hint > LOG_SPACE_THRESHOLD {
        let mut log_sum = F::zero();
        for f in factors {
            log_sum += f.ln();
        }
        log_sum.exp()
    } else {
        let mut prod = F::one();
        for f in factors {
            prod = prod * f;
        }
        prod
    }
}

/// Broadcast success probability of the link to `y` conditioned on a fixed
/// interferer set: `p * prod_x factor(l(y), l(x - y))`.
pub fn succ_prob_broadcast_conditional<F: Real>(
    y: &Point<F>,
    interferers: &[Point<F>],
    params: &NetworkParams<F>,
) -> Result<F> {
    succ_prob_broadcast_conditional_form(FactorForm::Derived, y, interferers, params)
}

/// [`succ_prob_broadcast_conditional`] with an explicit factor form.
pub fn succ_prob_broadcast_conditional_form<F: Real>(
    form: FactorForm,
    y: &Point<F>,
    interferers: &[Point<F>],
    params: &NetworkParams<F>,
) -> Result<F> {
    params.validate()?;
    let g_sig = path_loss(y, params.beta)?;
    let mut gains = Vec::with_capacity(interferers.len());
    for x in interferers {
        let d = x.distance(y);
        if d == F::zero() {
            return Err(Error::SingularPathLoss {
                context: "interferer coincides with the receiver",
            });
        }
        gains.push(d.powf(-params.beta));
    }
    let prod = factor_product(
        gains
            .iter()
            .map(|&g| interferer_factor(form, g_sig, g, params.p, params.theta)),
        gains.len(),
    );
    Ok(params.p * prod)
}

/// Collection success probability of the node at `x` conditioned on every
/// other transmitter position (co-nodes and field interferers alike: at the
/// base station they are indistinguishable interference sources):
/// `p * prod_t factor(l(x), l(t))`.
pub fn succ_prob_collection_conditional<F: Real>(
    x: &Point<F>,
    other_transmitters: &[Point<F>],
    params: &NetworkParams<F>,
) -> Result<F> {
    succ_prob_collection_conditional_form(FactorForm::Derived, x, other_transmitters, params)
}

/// [`succ_prob_collection_conditional`] with an explicit factor form.
pub fn succ_prob_collection_conditional_form<F: Real>(
    form: FactorForm,
    x: &Point<F>,
    other_transmitters: &[Point<F>],
    params: &NetworkParams<F>,
) -> Result<F> {
    params.validate()?;
    let g_sig = path_loss(x, params.beta)?;
    let mut gains = Vec::with_capacity(other_transmitters.len());
    for t in other_transmitters {
        gains.push(path_loss(t, params.beta)?);
    }
    let prod = factor_product(
        gains
            .iter()
            .map(|&g| interferer_factor(form, g_sig, g, params.p, params.theta)),
        gains.len(),
    );
    Ok(params.p * prod)
}

/// Semi-conditional collection success probability: co-node interference kept
/// conditional, field interference averaged out. `mu(|y|) * prod_j
/// factor(l(y), l(j))` over co-nodes `j`.
pub fn succ_prob_collection_semi<F: Real>(
    y: &Point<F>,
    co_nodes: &[Point<F>],
    params: &NetworkParams<F>,
) -> Result<F> {
    succ_prob_collection_semi_form(FactorForm::Derived, y, co_nodes, params)
}

/// [`succ_prob_collection_semi`] with an explicit factor form.
pub fn succ_prob_collection_semi_form<F: Real>(
    form: FactorForm,
    y: &Point<F>,
    co_nodes: &[Point<F>],
    params: &NetworkParams<F>,
) -> Result<F> {
    let base = succ_prob_spatial_average(y.norm(), params)?;
    if y.is_origin() {
        return Err(Error::SingularPathLoss {
            context: "node at the base station",
        });
    }
    let g_sig = path_loss(y, params.beta)?;
    let mut gains = Vec::with_capacity(co_nodes.len());
    for j in co_nodes {
        gains.push(path_loss(j, params.beta)?);
    }
    let prod = factor_product(
        gains
            .iter()
            .map(|&g| interferer_factor(form, g_sig, g, params.p, params.theta)),
        gains.len(),
    );
    Ok(base * prod)
}

// ============================================================================
// Joint broadcast probabilities
// ============================================================================

fn check_subset<F: Real>(subset: &[usize], realization: &Realization<F>) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::invalid("subset", "subset of nodes must be nonempty"));
    }
    if subset.len() > MAX_SUBSET_NODES {
        return Err(Error::CapacityExceeded {
            n: subset.len(),
            cap: MAX_SUBSET_NODES,
        });
    }
    let n = realization.node_count();
    for (k, &i) in subset.iter().enumerate() {
        if i >= n {
            return Err(Error::invalid(
                "subset",
                format!("node index {i} out of range for {n} nodes"),
            ));
        }
        if subset[..k].contains(&i) {
            return Err(Error::invalid(
                "subset",
                format!("node index {i} repeated"),
            ));
        }
    }
    Ok(())
}

/// Probability that every node in `subset` decodes the same broadcast slot.
///
/// All receivers share the base's coin and each interferer's coin, while
/// fading is independent per link, so conditioning on the coins factorizes:
///
/// ```text
/// mu_R = p * prod_x [ 1 - p + p * prod_{i in R} 1 / (1 + theta * l(x - i) / l(i)) ]
/// ```
pub fn joint_succ_prob_broadcast<F: Real>(
    subset: &[usize],
    realization: &Realization<F>,
    params: &NetworkParams<F>,
) -> Result<F> {
    params.validate()?;
    check_subset(subset, realization)?;
    let nodes = realization.nodes();
    let beta = params.beta;
    let mut g_sig = Vec::with_capacity(subset.len());
    for &i in subset {
        g_sig.push(path_loss(&nodes[i], beta)?);
    }
    let interferers = realization.interferers();
    let mut factors = Vec::with_capacity(interferers.len());
    for x in interferers {
        let mut fade_prod = F::one();
        for (k, &i) in subset.iter().enumerate() {
            let d = x.distance(&nodes[i]);
            if d == F::zero() {
                return Err(Error::SingularPathLoss {
                    context: "interferer coincides with a node",
                });
            }
            let g_int = d.powf(-beta);
            fade_prod = fade_prod / (F::one() + params.theta * g_int / g_sig[k]);
        }
        factors.push(F::one() - params.p + params.p * fade_prod);
    }
    let count = factors.len();
    Ok(params.p * factor_product(factors.into_iter(), count))
}

/// Probability that no node in `subset` decodes a broadcast slot, from
/// inclusion-exclusion over the joint successes of its sub-subsets:
/// `w_J = sum_{S subseteq J} (-1)^|S| mu_S` with `mu_{empty} = 1`.
pub fn joint_fail_prob_broadcast<F: Real>(
    subset: &[usize],
    realization: &Realization<F>,
    params: &NetworkParams<F>,
) -> Result<F> {
    params.validate()?;
    check_subset(subset, realization)?;
    let k = subset.len();
    let mut terms = Vec::with_capacity(1usize << k);
    terms.push(F::one()); // empty sub-subset
    let mut scratch = Vec::with_capacity(k);
    for mask in 1u32..(1u32 << k) {
        scratch.clear();
        for (bit, &idx) in subset.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                scratch.push(idx);
            }
        }
        let mu = joint_succ_prob_broadcast(&scratch, realization, params)?;
        let sign = if scratch.len() % 2 == 0 { F::one() } else { -F::one() };
        terms.push(sign * mu);
    }
    Ok(sum_descending(terms))
}

// ============================================================================
// Slot simulation
// ============================================================================

/// Outcome of one simulated slot.
///
/// * Broadcast: `base_active` is the base's coin, `node_active` is empty, and
///   `received[i]` can only be set when the base was active.
/// * Collection: `base_active` is false, `node_active[i]` is node `i`'s coin,
///   and at most one entry of `received` is set per slot because `theta > 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlotOutcome {
    pub base_active: bool,
    pub node_active: Vec<bool>,
    pub received: Vec<bool>,
}

impl SlotOutcome {
    pub fn reception_count(&self) -> usize {
        self.received.iter().filter(|&&r| r).count()
    }
}

/// Reusable slot stepper for a fixed realization. Precomputes every link gain
/// once; `step` then costs one coin per potential transmitter plus one
/// exponential per active link.
#[derive(Debug, Clone)]
pub struct SlotSimulator<F> {
    mode: Mode,
    p: F,
    theta: F,
    node_count: usize,
    /// Signal gain of each node's link (base->node or node->base; identical).
    node_gain: Vec<F>,
    /// Broadcast only: interferer-to-node gains, row-major `[x * n + i]`.
    gain_at_node: Vec<F>,
    /// Collection only: interferer-to-base gains.
    gain_at_base: Vec<F>,
    active_interferers: Vec<u32>,
    node_power: Vec<F>,
    outcome: SlotOutcome,
}

impl<F: Real> SlotSimulator<F> {
    pub fn new(realization: &Realization<F>, mode: Mode, params: &NetworkParams<F>) -> Result<Self> {
        params.validate()?;
        let nodes = realization.nodes();
        let interferers = realization.interferers();
        let n = nodes.len();
        let beta = params.beta;

        let mut node_gain = Vec::with_capacity(n);
        for node in nodes {
            node_gain.push(path_loss(node, beta)?);
        }

        let mut gain_at_node = Vec::new();
        let mut gain_at_base = Vec::new();
        match mode {
            Mode::Broadcast => {
                gain_at_node.reserve(interferers.len() * n);
                for x in interferers {
                    for node in nodes {
                        let d = x.distance(node);
                        if d == F::zero() {
                            return Err(Error::SingularPathLoss {
                                context: "interferer coincides with a node",
                            });
                        }
                        gain_at_node.push(d.powf(-beta));
                    }
                }
            }
            Mode::Collection => {
                gain_at_base.reserve(interferers.len());
                for x in interferers {
                    gain_at_base.push(path_loss(x, beta)?);
                }
            }
        }

        Ok(SlotSimulator {
            mode,
            p: params.p,
            theta: params.theta,
            node_count: n,
            node_gain,
            gain_at_node,
            gain_at_base,
            active_interferers: Vec::with_capacity(interferers.len()),
            node_power: vec![F::zero(); n],
            outcome: SlotOutcome {
                base_active: false,
                node_active: Vec::with_capacity(n),
                received: vec![false; n],
            },
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Simulates one slot and returns the outcome (borrowed from an internal
    /// buffer; clone it to keep it).
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &SlotOutcome {
        match self.mode {
            Mode::Broadcast => self.step_broadcast(rng),
            Mode::Collection => self.step_collection(rng),
        }
        &self.outcome
    }

    fn step_broadcast<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let out = &mut self.outcome;
        out.node_active.clear();
        out.received.iter_mut().for_each(|r| *r = false);
        out.base_active = F::sample_unit(rng) < self.p;
        if !out.base_active || self.node_count == 0 {
            return;
        }
        let n = self.node_count;
        let m = self.gain_at_node.len() / n.max(1);
        self.active_interferers.clear();
        for x in 0..m {
            if F::sample_unit(rng) < self.p {
                self.active_interferers.push(x as u32);
            }
        }
        for i in 0..n {
            let signal = F::sample_exp1(rng) * self.node_gain[i];
            let mut interference = F::zero();
            for &x in &self.active_interferers {
                interference += F::sample_exp1(rng) * self.gain_at_node[x as usize * n + i];
            }
            // Zero interference with an active transmitter always decodes.
            out.received[i] =
                interference == F::zero() || signal > self.theta * interference;
        }
    }

    fn step_collection<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let out = &mut self.outcome;
        out.base_active = false;
        out.received.iter_mut().for_each(|r| *r = false);
        out.node_active.clear();
        let n = self.node_count;
        let mut any_active = false;
        for _ in 0..n {
            let active = F::sample_unit(rng) < self.p;
            any_active |= active;
            out.node_active.push(active);
        }
        if !any_active {
            // Nobody to decode; interferer coins are irrelevant this slot.
            return;
        }
        let mut total_node_power = F::zero();
        for i in 0..n {
            self.node_power[i] = if out.node_active[i] {
                let pw = F::sample_exp1(rng) * self.node_gain[i];
                total_node_power += pw;
                pw
            } else {
                F::zero()
            };
        }
        let mut interferer_power = F::zero();
        for &g in &self.gain_at_base {
            if F::sample_unit(rng) < self.p {
                interferer_power += F::sample_exp1(rng) * g;
            }
        }
        let mut receptions = 0usize;
        for i in 0..n {
            if !out.node_active[i] {
                continue;
            }
            let interference = (total_node_power - self.node_power[i]) + interferer_power;
            let ok = interference <= F::zero() || self.node_power[i] > self.theta * interference;
            out.received[i] = ok;
            receptions += ok as usize;
        }
        // theta > 1 makes simultaneous decodes impossible.
        debug_assert!(receptions <= 1, "multiple collection receptions in a slot");
    }
}

/// Convenience one-shot slot draw. Builds a fresh [`SlotSimulator`]; use the
/// simulator directly when stepping many slots of the same realization.
pub fn draw_slot<F: Real, R: Rng + ?Sized>(
    realization: &Realization<F>,
    mode: Mode,
    params: &NetworkParams<F>,
    rng: &mut R,
) -> Result<SlotOutcome> {
    let mut sim = SlotSimulator::new(realization, mode, params)?;
    Ok(sim.step(rng).clone())
}
