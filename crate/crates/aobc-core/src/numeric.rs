//! Small numeric helpers shared by the formula modules.

use crate::Real;

/// Neumaier-compensated running sum. Exactness matters for the alternating
/// inclusion-exclusion sums, which cancel heavily as subsets grow.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CompensatedSum<F> {
    sum: F,
    comp: F,
}

impl<F: Real> CompensatedSum<F> {
    pub fn new() -> Self {
        CompensatedSum {
            sum: F::zero(),
            comp: F::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, term: F) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.comp += (self.sum - t) + term;
        } else {
            self.comp += (term - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> F {
        self.sum + self.comp
    }
}

/// Sums `terms` largest-magnitude-first with compensation. Consumes the
/// buffer; the caller usually built it just for this.
pub(crate) fn sum_descending<F: Real>(mut terms: Vec<F>) -> F {
    terms.sort_by(|a, b| {
        b.abs()
            .partial_cmp(&a.abs())
            .expect("finite inclusion-exclusion terms")
    });
    let mut acc = CompensatedSum::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}
