//! Exhaustive noncontextual hidden-variable enumeration.
//!
//! Both classical bounds are re-derived by brute force over all 2^13
//! deterministic assignments, in exact integer arithmetic.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{KsModel, NUM_RAYS};

const ASSIGNMENT_COUNT: u32 = 1 << NUM_RAYS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alphabet {
    /// Values of the `A_i` observables.
    PlusMinusOne,
    /// Values of the `V_i` projectors.
    ZeroOne,
}

impl Alphabet {
    fn name(self) -> &'static str {
        match self {
            Alphabet::PlusMinusOne => "+-1",
            Alphabet::ZeroOne => "0/1",
        }
    }
}

/// A deterministic value for each of the 13 observables, tagged with the
/// value alphabet it is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Assignment {
    alphabet: Alphabet,
    values: [i8; NUM_RAYS],
}

impl Assignment {
    /// Bit `k` set means ray `k+1` takes value -1.
    pub fn plus_minus_from_bits(bits: u32) -> Self {
        let values = std::array::from_fn(|k| if bits >> k & 1 == 1 { -1 } else { 1 });
        Assignment {
            alphabet: Alphabet::PlusMinusOne,
            values,
        }
    }

    /// Bit `k` set means ray `k+1` takes value 1.
    pub fn zero_one_from_bits(bits: u32) -> Self {
        let values = std::array::from_fn(|k| (bits >> k & 1) as i8);
        Assignment {
            alphabet: Alphabet::ZeroOne,
            values,
        }
    }

    pub fn new(alphabet: Alphabet, values: [i8; NUM_RAYS]) -> Result<Self> {
        let ok = values.iter().all(|&v| match alphabet {
            Alphabet::PlusMinusOne => v == 1 || v == -1,
            Alphabet::ZeroOne => v == 0 || v == 1,
        });
        if !ok {
            return Err(Error::AlphabetMismatch {
                expected: alphabet.name(),
                found: "out-of-alphabet value",
            });
        }
        Ok(Assignment { alphabet, values })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Value of ray `i`, 1-based.
    pub fn value(&self, i: usize) -> i64 {
        self.values[i - 1] as i64
    }

    /// The +-1 assignment `f_i = 1 - 2 g_i` induced by a 0/1 assignment.
    pub fn to_plus_minus(&self) -> Assignment {
        match self.alphabet {
            Alphabet::PlusMinusOne => *self,
            Alphabet::ZeroOne => Assignment {
                alphabet: Alphabet::PlusMinusOne,
                values: self.values.map(|g| 1 - 2 * g),
            },
        }
    }
}

/// Which classical functional to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// `sum mu_i f_i - sum_E mu_ij f_i f_j - sum_C mu_ijk f_i f_j f_k`.
    Chi13,
    /// Chi13 with the `8 V_i V_j V_k` part of each triangle term removed,
    /// i.e. `chi13 - sum_C mu_ijk (1 - f_i)(1 - f_j)(1 - f_k)`.
    Chi13DroppedTripleProduct,
    /// Chi13 with the triangle terms removed entirely.
    Chi13WithoutTriples,
    /// `sum_{i=10..13} g_i`.
    Chi4,
}

impl Functional {
    fn alphabet(self) -> Alphabet {
        match self {
            Functional::Chi13
            | Functional::Chi13DroppedTripleProduct
            | Functional::Chi13WithoutTriples => Alphabet::PlusMinusOne,
            Functional::Chi4 => Alphabet::ZeroOne,
        }
    }
}

pub fn evaluate_assignment(f: &Assignment, functional: Functional, model: &KsModel) -> Result<i64> {
    if f.alphabet != functional.alphabet() {
        return Err(Error::AlphabetMismatch {
            expected: functional.alphabet().name(),
            found: f.alphabet.name(),
        });
    }
    let c = &model.coefficients;
    Ok(match functional {
        Functional::Chi4 => (10..=13).map(|i| f.value(i)).sum(),
        Functional::Chi13 | Functional::Chi13DroppedTripleProduct | Functional::Chi13WithoutTriples => {
            let singles: i64 = (1..=NUM_RAYS).map(|i| c.mu(i) * f.value(i)).sum();
            let pairs: i64 = c
                .mu_ij
                .iter()
                .map(|(&(i, j), mu)| mu * f.value(i) * f.value(j))
                .sum();
            let triples: i64 = match functional {
                Functional::Chi13WithoutTriples => 0,
                _ => c
                    .mu_ijk
                    .iter()
                    .map(|(&(i, j, k), mu)| mu * f.value(i) * f.value(j) * f.value(k))
                    .sum(),
            };
            let dropped: i64 = match functional {
                Functional::Chi13DroppedTripleProduct => c
                    .mu_ijk
                    .iter()
                    .map(|(&(i, j, k), mu)| mu * (1 - f.value(i)) * (1 - f.value(j)) * (1 - f.value(k)))
                    .sum(),
                _ => 0,
            };
            singles - pairs - triples - dropped
        }
    })
}

/// Result of an exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundReport {
    pub functional: String,
    pub maximum: i64,
    pub argmax_count: usize,
    /// Assignments that passed the constraints (all of them when unconstrained).
    pub admissible_count: usize,
    pub enumerated: usize,
    pub histogram: BTreeMap<i64, usize>,
}

impl BoundReport {
    fn from_values(functional: &str, values: impl Iterator<Item = i64>, enumerated: usize) -> Option<Self> {
        let mut histogram = BTreeMap::new();
        for v in values {
            *histogram.entry(v).or_insert(0usize) += 1;
        }
        let (&maximum, &argmax_count) = histogram.iter().next_back()?;
        Some(BoundReport {
            functional: functional.to_string(),
            maximum,
            argmax_count,
            admissible_count: histogram.values().sum(),
            enumerated,
            histogram,
        })
    }

    /// Structured text rendering, including the full histogram.
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "functional {}", self.functional).unwrap();
        writeln!(s, "enumerated {}", self.enumerated).unwrap();
        writeln!(s, "admissible {}", self.admissible_count).unwrap();
        writeln!(s, "maximum {}", self.maximum).unwrap();
        writeln!(s, "argmax_count {}", self.argmax_count).unwrap();
        for (v, n) in &self.histogram {
            writeln!(s, "histogram {v} {n}").unwrap();
        }
        s
    }
}

fn enumerate_plus_minus(model: &KsModel, functional: Functional) -> BoundReport {
    let values = (0..ASSIGNMENT_COUNT).map(|bits| {
        evaluate_assignment(&Assignment::plus_minus_from_bits(bits), functional, model)
            .expect("alphabet matches")
    });
    let name = match functional {
        Functional::Chi13 => "chi13",
        Functional::Chi13DroppedTripleProduct => "chi13_dropped_triple_product",
        Functional::Chi13WithoutTriples => "chi13_without_triples",
        Functional::Chi4 => unreachable!("chi4 uses the 0/1 alphabet"),
    };
    BoundReport::from_values(name, values, ASSIGNMENT_COUNT as usize).expect("nonempty enumeration")
}

pub fn max_chi13_noncontextual(model: &KsModel) -> BoundReport {
    enumerate_plus_minus(model, Functional::Chi13)
}

/// Chi13 bound for the functional actually assembled from measured data,
/// where the nonnegative `<V_i V_j V_k>` contributions are dropped.
pub fn max_chi13_dropped_triple_product(model: &KsModel) -> BoundReport {
    enumerate_plus_minus(model, Functional::Chi13DroppedTripleProduct)
}

/// Chi13 bound with the whole triangle terms removed.
pub fn max_chi13_without_triples(model: &KsModel) -> BoundReport {
    enumerate_plus_minus(model, Functional::Chi13WithoutTriples)
}

/// Product rule on every edge and sum rule on every triangle.
pub fn is_admissible(g: &Assignment, model: &KsModel) -> bool {
    if g.alphabet != Alphabet::ZeroOne {
        return false;
    }
    let products = model
        .graph
        .edges
        .iter()
        .all(|&(i, j)| g.value(i) * g.value(j) == 0);
    let sums = model
        .graph
        .triangles
        .iter()
        .all(|&(i, j, k)| g.value(i) + g.value(j) + g.value(k) == 1);
    products && sums
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Chi4Outcome {
    Bound(BoundReport),
    /// No 0/1 assignment satisfies the rules.
    Uncolorable { enumerated: usize },
}

pub fn max_chi4_constrained(model: &KsModel) -> Chi4Outcome {
    let values = (0..ASSIGNMENT_COUNT)
        .map(Assignment::zero_one_from_bits)
        .filter(|g| is_admissible(g, model))
        .map(|g| evaluate_assignment(&g, Functional::Chi4, model).expect("alphabet matches"));
    match BoundReport::from_values("chi4", values, ASSIGNMENT_COUNT as usize) {
        Some(r) => Chi4Outcome::Bound(r),
        None => Chi4Outcome::Uncolorable {
            enumerated: ASSIGNMENT_COUNT as usize,
        },
    }
}

/// All admissible 0/1 assignments, in enumeration order.
pub fn admissible_assignments(model: &KsModel) -> Vec<Assignment> {
    (0..ASSIGNMENT_COUNT)
        .map(Assignment::zero_one_from_bits)
        .filter(|g| is_admissible(g, model))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CompatibilityGraph, QUANTUM_CHI13};

    #[test]
    fn chi13_bound_is_25() {
        let r = max_chi13_noncontextual(&KsModel::build());
        assert_eq!(r.maximum, 25);
        assert_eq!(r.enumerated, 8192);
        assert_eq!(r.histogram.values().sum::<usize>(), 8192);
        // Regression constant, cross-checked by an independent enumeration.
        assert_eq!(r.argmax_count, 140);
    }

    #[test]
    fn all_plus_one_value() {
        let m = KsModel::build();
        let f = Assignment::plus_minus_from_bits(0);
        // 17 - 39 - 9: every product of +1 values is +1.
        assert_eq!(evaluate_assignment(&f, Functional::Chi13, &m).unwrap(), -31);
    }

    #[test]
    fn chi4_bound_is_1() {
        let m = KsModel::build();
        let Chi4Outcome::Bound(r) = max_chi4_constrained(&m) else {
            panic!("set must be colorable");
        };
        assert_eq!(r.maximum, 1);
        assert_eq!(r.admissible_count, 24);
        assert_eq!(r.histogram[&0], 12);
        assert_eq!(r.histogram[&1], 12);
    }

    #[test]
    fn product_rule_rejects_adjacent_ones() {
        let m = KsModel::build();
        let g = Assignment::zero_one_from_bits(0b11);
        assert!(!is_admissible(&g, &m));
    }

    #[test]
    fn chi4_functional_examples() {
        let m = KsModel::build();
        let zero = Assignment::zero_one_from_bits(0);
        assert_eq!(evaluate_assignment(&zero, Functional::Chi4, &m).unwrap(), 0);
        let three = Assignment::zero_one_from_bits(1 << 2);
        assert_eq!(evaluate_assignment(&three, Functional::Chi4, &m).unwrap(), 0);
    }

    #[test]
    fn alphabet_mismatch_is_error() {
        let m = KsModel::build();
        let g = Assignment::zero_one_from_bits(0);
        assert!(matches!(
            evaluate_assignment(&g, Functional::Chi13, &m),
            Err(Error::AlphabetMismatch { .. })
        ));
        assert!(Assignment::new(Alphabet::ZeroOne, [2; NUM_RAYS]).is_err());
    }

    #[test]
    fn quantum_gap_is_eight_thirds() {
        let r = max_chi13_noncontextual(&KsModel::build());
        assert!((QUANTUM_CHI13 - r.maximum as f64 - 8.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn admissible_chi4_assignments_respect_chi13_bound() {
        let m = KsModel::build();
        for g in admissible_assignments(&m) {
            let v = evaluate_assignment(&g.to_plus_minus(), Functional::Chi13, &m).unwrap();
            assert!(v <= 25);
        }
    }

    #[test]
    fn dropping_triple_products_keeps_bound() {
        let r = max_chi13_dropped_triple_product(&KsModel::build());
        assert!(r.maximum <= 25, "max {}", r.maximum);
    }

    #[test]
    fn removing_whole_triangle_terms_breaks_bound() {
        // Only the V_i V_j V_k part may be dropped; the full terms matter.
        let r = max_chi13_without_triples(&KsModel::build());
        assert_eq!(r.maximum, 28);
    }

    #[test]
    fn enumeration_is_deterministic() {
        let m = KsModel::build();
        assert_eq!(max_chi13_noncontextual(&m), max_chi13_noncontextual(&m));
        assert_eq!(max_chi4_constrained(&m), max_chi4_constrained(&m));
    }

    #[test]
    fn uncolorable_graph_reported() {
        // K4: at most one vertex may be 1, leaving the opposite triangle at 0.
        let edges = [(1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4)].into_iter().collect();
        let m = KsModel::with_graph(CompatibilityGraph::from_edges(edges));
        assert!(matches!(max_chi4_constrained(&m), Chi4Outcome::Uncolorable { .. }));
    }

    #[test]
    fn render_contains_histogram() {
        let r = max_chi13_noncontextual(&KsModel::build());
        let text = r.render();
        assert!(text.contains("maximum 25"));
        assert_eq!(text.lines().filter(|l| l.starts_with("histogram")).count(), r.histogram.len());
    }
}
