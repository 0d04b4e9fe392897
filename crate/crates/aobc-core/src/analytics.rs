//! Exact expected ages and closed-form upper bounds.
//!
//! For a fixed realization the reception process is i.i.d. across slots, so
//! both expected ages reduce to expected cover times of the node set:
//!
//! * broadcast: receptions within a slot are correlated (they share the base's
//!   coin and the interferer coins), so the cover time is evaluated through
//!   the joint failure probabilities `w_J` of every node subset,
//! * collection: at most one node is decoded per slot (the threshold exceeds
//!   1), so the cover time is a coupon-collector sum over per-node success
//!   probabilities.
//!
//! The bounds need no realization: a spatial growth argument for broadcast and
//! a worst-position argument for collection.

use crate::channel::{
    constant_c, interferer_factor, joint_succ_prob_broadcast, succ_prob_collection_conditional,
    succ_prob_collection_semi, succ_prob_spatial_average, FactorForm, NetworkParams,
    MAX_SUBSET_NODES,
};
use crate::geometry::Realization;
use crate::numeric::{sum_descending, CompensatedSum};
use crate::{Error, Real, Result};

/// Default node cap for the broadcast cover-time evaluation. Each of the 2^n
/// subsets costs a pass over the interferer field, which is where the budget
/// goes.
pub const DEFAULT_EAOB_NODE_CAP: usize = 12;

/// Default certified truncation error of the cover-time tail sum, in slots.
pub const DEFAULT_TAIL_TOL: f64 = 1e-9;

/// Iteration guard for the tail sum: a per-slot success probability so small
/// that certification needs more slots than this is treated as divergent.
const MAX_TAIL_SLOTS: u64 = 50_000_000;

// ============================================================================
// Subset probability table
// ============================================================================

/// Joint reception probabilities of every subset of a realization's nodes in
/// broadcast mode, indexed by bitmask.
///
/// `success[S]` is the probability that every node of `S` decodes one given
/// slot; `failure[J]` the probability that none of `J` does. The two are tied
/// by inclusion-exclusion over sub-subsets, with the empty subset at 1.
#[derive(Debug, Clone)]
pub struct SubsetProbabilityTable<F> {
    success: Vec<F>,
    failure: Vec<F>,
    n: usize,
}

impl<F: Real> SubsetProbabilityTable<F> {
    pub fn build(
        realization: &Realization<F>,
        params: &NetworkParams<F>,
        node_cap: usize,
    ) -> Result<Self> {
        params.validate()?;
        let n = realization.node_count();
        let cap = node_cap.min(MAX_SUBSET_NODES);
        if n > cap {
            return Err(Error::CapacityExceeded { n, cap });
        }
        let size = 1usize << n;

        let mut success = vec![F::one(); size];
        let mut subset = Vec::with_capacity(n);
        for mask in 1..size {
            subset.clear();
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    subset.push(i);
                }
            }
            success[mask] = joint_succ_prob_broadcast(&subset, realization, params)?;
        }

        let mut failure = vec![F::one(); size];
        for mask in 1..size {
            let mut terms = Vec::with_capacity(1 << mask.count_ones());
            let mut s = mask;
            loop {
                let sign = if s.count_ones() % 2 == 0 {
                    F::one()
                } else {
                    -F::one()
                };
                terms.push(sign * success[s]);
                if s == 0 {
                    break;
                }
                s = (s - 1) & mask;
            }
            failure[mask] = sum_descending(terms);
        }

        Ok(SubsetProbabilityTable {
            success,
            failure,
            n,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// `P(every node of the mask decodes a slot)`.
    pub fn success(&self, mask: usize) -> F {
        self.success[mask]
    }

    /// `P(no node of the mask decodes a slot)`.
    pub fn failure(&self, mask: usize) -> F {
        self.failure[mask]
    }

    pub fn singleton_success(&self, node: usize) -> F {
        self.success[1 << node]
    }
}

// ============================================================================
// Exact expected age of broadcast
// ============================================================================

/// Exact expected age of broadcast of one realization, i.e. the expected
/// number of slots until every node has decoded at least once, computed from
/// the subset failure probabilities:
///
/// ```text
/// P(D > k) = sum_{J != empty} (-1)^{|J|+1} w_J^k,    E[D] = sum_{k >= 0} P(D > k)
/// ```
///
/// The sum is truncated once the remainder, bounded by the geometric tail
/// `n q^{k+1} / (1 - q)` with `q` the worst single-node failure probability,
/// drops below `tail_tol`. An empty node set returns 0.
pub fn exact_eaob<F: Real>(
    realization: &Realization<F>,
    params: &NetworkParams<F>,
    tail_tol: F,
) -> Result<F> {
    exact_eaob_capped(realization, params, tail_tol, DEFAULT_EAOB_NODE_CAP)
}

/// [`exact_eaob`] with an explicit node cap.
pub fn exact_eaob_capped<F: Real>(
    realization: &Realization<F>,
    params: &NetworkParams<F>,
    tail_tol: F,
    node_cap: usize,
) -> Result<F> {
    if realization.node_count() == 0 {
        return Ok(F::zero());
    }
    let table = SubsetProbabilityTable::build(realization, params, node_cap)?;
    expected_cover_time(&table, tail_tol)
}

/// Survival-sum cover time of a built table. Shared by [`exact_eaob`] and the
/// delay-law evaluation.
pub fn expected_cover_time<F: Real>(
    table: &SubsetProbabilityTable<F>,
    tail_tol: F,
) -> Result<F> {
    let (q, horizon) = tail_horizon(table, tail_tol)?;
    let n = table.node_count();
    let size = 1usize << n;

    let mut pow = vec![F::one(); size];
    let mut total = CompensatedSum::new();
    let one_minus_q = F::one() - q;
    let mut tail = F::from_count(n) * q / one_minus_q;
    let mut k = 0u64;
    loop {
        // S(k) over the current powers w_J^k.
        let mut survival = CompensatedSum::new();
        for mask in 1..size {
            let sign = if mask.count_ones() % 2 == 1 {
                F::one()
            } else {
                -F::one()
            };
            survival.add(sign * pow[mask]);
        }
        total.add(survival.value());
        if tail < tail_tol || k >= horizon {
            break;
        }
        for (w, p) in table.failure.iter().zip(pow.iter_mut()).skip(1) {
            *p = *p * *w;
        }
        tail = tail * q;
        k += 1;
    }
    Ok(total.value())
}

/// Truncated law of the broadcast delay: element `k-1` is `P(D = k)`. The
/// truncated support carries all but at most `tail_tol` of the mass.
pub fn broadcast_delay_law<F: Real>(
    realization: &Realization<F>,
    params: &NetworkParams<F>,
    tail_tol: F,
) -> Result<Vec<F>> {
    let table = SubsetProbabilityTable::build(realization, params, DEFAULT_EAOB_NODE_CAP)?;
    if table.node_count() == 0 {
        return Ok(Vec::new());
    }
    let (q, horizon) = tail_horizon(&table, tail_tol)?;
    let n = table.node_count();
    let size = 1usize << n;

    let survival_at = |pow: &[F]| {
        let mut s = CompensatedSum::new();
        for mask in 1..size {
            let sign = if mask.count_ones() % 2 == 1 {
                F::one()
            } else {
                -F::one()
            };
            s.add(sign * pow[mask]);
        }
        s.value()
    };

    let mut pow = vec![F::one(); size];
    let mut prev = survival_at(&pow); // S(0) = 1
    let mut law = Vec::new();
    // P(D > k) <= n q^k, so mass beyond slot k is certified small.
    let mut bound = F::from_count(n);
    for _ in 0..=horizon {
        for (w, p) in table.failure.iter().zip(pow.iter_mut()).skip(1) {
            *p = *p * *w;
        }
        let cur = survival_at(&pow);
        law.push(prev - cur);
        prev = cur;
        bound = bound * q;
        if bound < tail_tol {
            break;
        }
    }
    Ok(law)
}

/// Worst single-node failure probability and the certified slot horizon for a
/// tail below `tail_tol`.
fn tail_horizon<F: Real>(table: &SubsetProbabilityTable<F>, tail_tol: F) -> Result<(F, u64)> {
    if !(tail_tol > F::zero() && tail_tol < F::one()) {
        return Err(Error::invalid("tail_tol", "must lie in (0, 1)"));
    }
    let n = table.node_count();
    let mut q = F::zero();
    for i in 0..n {
        let mu = table.singleton_success(i);
        if mu <= F::zero() {
            return Err(Error::invalid(
                "node success probability",
                "a node never receives; the cover time diverges",
            ));
        }
        q = q.max(F::one() - mu);
    }
    if q <= F::zero() {
        return Ok((F::zero(), 0));
    }
    // Smallest k with n q^{k+1} / (1-q) < tail_tol.
    let needed = (tail_tol * (F::one() - q) / F::from_count(n)).ln() / q.ln();
    let horizon = needed.widen().ceil().max(0.0) as u64;
    if horizon > MAX_TAIL_SLOTS {
        return Err(Error::invalid(
            "tail horizon",
            format!(
                "certifying a {tail_tol} tail needs {horizon} slots (cap {MAX_TAIL_SLOTS}); \
                 some node's success probability is vanishingly small"
            ),
        ));
    }
    Ok((q, horizon))
}

/// Closed form of the cover time, `sum_J (-1)^{|J|+1} / (1 - w_J)`. Exact in
/// real arithmetic but numerically fragile when some `w_J` is close to 1;
/// kept as a cross-check for the survival sum.
#[allow(dead_code)]
pub(crate) fn cover_time_closed_form<F: Real>(table: &SubsetProbabilityTable<F>) -> Result<F> {
    let n = table.node_count();
    let size = 1usize << n;
    let mut terms = Vec::with_capacity(size - 1);
    for mask in 1..size {
        let w = table.failure(mask);
        if w >= F::one() {
            return Err(Error::invalid(
                "failure probability",
                "a subset never receives; the cover time diverges",
            ));
        }
        let sign = if mask.count_ones() % 2 == 1 {
            F::one()
        } else {
            -F::one()
        };
        terms.push(sign / (F::one() - w));
    }
    Ok(sum_descending(terms))
}

// ============================================================================
// Independent-receptions comparator
// ============================================================================

/// Expected maximum of independent geometric variables with the given success
/// probabilities, via the alternating subset identity: the minimum over a
/// subset `A` of independent geometrics is geometric with parameter
/// `1 - prod_{i in A} (1 - mu_i)`.
pub fn independent_bound_from_probs<F: Real>(mus: &[F]) -> Result<F> {
    let n = mus.len();
    if n == 0 {
        return Ok(F::zero());
    }
    if n > MAX_SUBSET_NODES {
        return Err(Error::CapacityExceeded {
            n,
            cap: MAX_SUBSET_NODES,
        });
    }
    check_probs(mus)?;
    let size = 1usize << n;
    // fail_prod[A] = prod over A of (1 - mu_i), built from the next-smaller mask.
    let mut fail_prod = vec![F::one(); size];
    let mut terms = Vec::with_capacity(size - 1);
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        fail_prod[mask] = fail_prod[mask & (mask - 1)] * (F::one() - mus[low]);
        let sign = if mask.count_ones() % 2 == 1 {
            F::one()
        } else {
            -F::one()
        };
        terms.push(sign / (F::one() - fail_prod[mask]));
    }
    Ok(sum_descending(terms))
}

/// The comparator for one realization: expected cover time if each node's
/// receptions were an independent geometric stream with its actual marginal
/// probability. The true broadcast cover time is conjectured (and so far
/// always observed) to lie below it, because shared coins positively
/// correlate receptions.
pub fn independent_bound_eaob<F: Real>(
    realization: &Realization<F>,
    params: &NetworkParams<F>,
) -> Result<F> {
    params.validate()?;
    let nodes = realization.nodes();
    let mut mus = Vec::with_capacity(nodes.len());
    for (i, _) in nodes.iter().enumerate() {
        mus.push(joint_succ_prob_broadcast(&[i], realization, params)?);
    }
    independent_bound_from_probs(&mus)
}

// ============================================================================
// Exact expected age of collection
// ============================================================================

/// Which per-node collection success probability feeds [`exact_eaoc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MuSource {
    /// Conditional on every transmitter position, co-nodes and field
    /// interferers alike.
    #[default]
    Conditional,
    /// Co-node interference kept conditional, field interference averaged.
    Semi,
}

/// Per-node collection success probabilities of a realization.
pub fn collection_success_probs<F: Real>(
    realization: &Realization<F>,
    params: &NetworkParams<F>,
    source: MuSource,
) -> Result<Vec<F>> {
    params.validate()?;
    let nodes = realization.nodes();
    let interferers = realization.interferers();
    let mut mus = Vec::with_capacity(nodes.len());
    let mut others = Vec::with_capacity(nodes.len() + interferers.len());
    for (u, node) in nodes.iter().enumerate() {
        others.clear();
        others.extend(nodes.iter().enumerate().filter(|&(v, _)| v != u).map(|(_, x)| *x));
        mus.push(match source {
            MuSource::Conditional => {
                others.extend_from_slice(interferers);
                succ_prob_collection_conditional(node, &others, params)?
            }
            MuSource::Semi => succ_prob_collection_semi(node, &others, params)?,
        });
    }
    Ok(mus)
}

/// Exact expected age of collection from raw per-node success probabilities.
///
/// Decodes are disjoint within a slot (the threshold exceeds 1), so the slot
/// process is a coupon draw with cell probabilities `mu_u` and a null cell,
/// and the cover time follows from the alternating subset identity:
///
/// ```text
/// E[C] = sum_{A != empty} (-1)^{|A|+1} / sum_{u in A} mu_u
/// ```
pub fn exact_eaoc_from_probs<F: Real>(mus: &[F]) -> Result<F> {
    let n = mus.len();
    if n == 0 {
        return Ok(F::zero());
    }
    if n > MAX_SUBSET_NODES {
        return Err(Error::CapacityExceeded {
            n,
            cap: MAX_SUBSET_NODES,
        });
    }
    check_probs(mus)?;
    let total: F = mus.iter().copied().sum();
    if total > F::one() + F::lit(1e-9) {
        return Err(Error::invalid(
            "collection probabilities",
            "sum exceeds 1; per-slot decodes cannot be disjoint",
        ));
    }
    let size = 1usize << n;
    let mut sums = vec![F::zero(); size];
    let mut terms = Vec::with_capacity(size - 1);
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + mus[low];
        let sign = if mask.count_ones() % 2 == 1 {
            F::one()
        } else {
            -F::one()
        };
        terms.push(sign / sums[mask]);
    }
    Ok(sum_descending(terms))
}

/// Exact expected age of collection of one realization.
pub fn exact_eaoc<F: Real>(
    realization: &Realization<F>,
    params: &NetworkParams<F>,
    source: MuSource,
) -> Result<F> {
    let mus = collection_success_probs(realization, params, source)?;
    exact_eaoc_from_probs(&mus)
}

fn check_probs<F: Real>(mus: &[F]) -> Result<()> {
    for &mu in mus {
        if !(mu > F::zero() && mu <= F::one()) {
            return Err(Error::invalid(
                "success probability",
                format!("{} is outside (0, 1]", mu.widen()),
            ));
        }
    }
    Ok(())
}

// ============================================================================
// Identities and bounds
// ============================================================================

/// The maximum of a finite set written as the alternating sum of subset
/// minima. Numerically redundant (it *is* the maximum) but exposed as a test
/// oracle for the subset machinery above.
pub fn max_min_identity<F: Real>(values: &[F]) -> Result<F> {
    let n = values.len();
    if n == 0 {
        return Err(Error::invalid("values", "identity needs a nonempty set"));
    }
    if n > MAX_SUBSET_NODES {
        return Err(Error::CapacityExceeded {
            n,
            cap: MAX_SUBSET_NODES,
        });
    }
    let size = 1usize << n;
    let mut mins = vec![F::infinity(); size];
    let mut terms = Vec::with_capacity(size - 1);
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        mins[mask] = mins[mask & (mask - 1)].min(values[low]);
        let sign = if mask.count_ones() % 2 == 1 {
            F::one()
        } else {
            -F::one()
        };
        terms.push(sign * mins[mask]);
    }
    Ok(sum_descending(terms))
}

/// Closed-form upper bound on the spatially averaged expected age of
/// broadcast over a disk of radius `r`:
///
/// ```text
/// B(r) <= (1 / (p^2 C)) * (exp(p lambda pi C r^2) - 1)
/// ```
///
/// grown from `B(0) = 0` by bounding the cost of each infinitesimal annulus
/// by the edge node's mean geometric delay.
pub fn aob_upper_bound<F: Real>(r: F, params: &NetworkParams<F>) -> Result<F> {
    params.validate()?;
    if !(r >= F::zero() && r.is_finite()) {
        return Err(Error::invalid("radius", "must be finite and nonnegative"));
    }
    let c = constant_c(params.theta, params.beta)?;
    let growth = params.p * params.lambda * F::PI() * c * r * r;
    Ok(growth.exp_m1() / (params.p * params.p * c))
}

/// Upper bound on the expected age of collection given `n` nodes in the disk,
/// from the most disadvantaged placement: the tracked node at the edge, every
/// co-node at the minimum separation `epsilon`:
///
/// ```text
/// E[C | n] <= H_n / mu_bar,   mu_bar = (1 - p / (1 + theta (eps/r)^beta))^(n-1) * mu(r)
/// ```
pub fn aoc_upper_bound<F: Real>(
    n: usize,
    r: F,
    epsilon: F,
    params: &NetworkParams<F>,
) -> Result<F> {
    params.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "bound is conditional on n >= 1 nodes"));
    }
    if !(r > F::zero() && r.is_finite()) {
        return Err(Error::invalid("radius", "must be finite and positive"));
    }
    if !(epsilon > F::zero() && epsilon < r) {
        return Err(Error::invalid("epsilon", "must satisfy 0 < epsilon < r"));
    }
    let mu_edge = succ_prob_spatial_average(r, params)?;
    let g_sig = r.powf(-params.beta);
    let g_int = epsilon.powf(-params.beta);
    let worst = interferer_factor(
        FactorForm::ThetaInverted,
        g_sig,
        g_int,
        params.p,
        params.theta,
    );
    let mu_bar = worst.powi(n as i32 - 1) * mu_edge;
    Ok(harmonic::<F>(n) / mu_bar)
}

/// n-th harmonic number, summed smallest-first.
pub fn harmonic<F: Real>(n: usize) -> F {
    let mut acc = CompensatedSum::new();
    for k in (1..=n).rev() {
        acc.add(F::one() / F::from_count(k));
    }
    acc.value()
}
