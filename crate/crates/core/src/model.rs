//! The 13-ray qutrit contextuality model: rays, compatibility graph,
//! inequality weights, and the quantum operators of both inequalities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::linalg::{projector_from_ray, CMat3, CVec3, DensityMatrix};
use crate::error::{Error, Result};

pub const NUM_RAYS: usize = 13;

/// Unnormalized integer directions of the 13 rays, indexed 1..=13.
pub const RAY_COORDS: [[i32; 3]; NUM_RAYS] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [0, 1, -1],
    [1, 0, -1],
    [1, -1, 0],
    [0, 1, 1],
    [1, 0, 1],
    [1, 1, 0],
    [-1, 1, 1],
    [1, -1, 1],
    [1, 1, -1],
    [1, 1, 1],
];

/// The three triangles that carry weight 3 in the triple-correlation sum.
pub const WEIGHTED_TRIANGLES: [Triangle; 3] = [(1, 4, 7), (2, 5, 8), (3, 6, 9)];

pub const CLASSICAL_BOUND_CHI13: i64 = 25;
pub const CLASSICAL_BOUND_CHI4: i64 = 1;
/// Quantum value of chi13 as a multiple of the identity: 25 + 8/3.
pub const QUANTUM_CHI13: f64 = 83.0 / 3.0;
/// Quantum value of chi4 as a multiple of the identity: 1 + 1/3.
pub const QUANTUM_CHI4: f64 = 4.0 / 3.0;

/// Edge (i, j) with i < j, 1-based ray indices.
pub type Edge = (usize, usize);
/// Triangle (i, j, k) with i < j < k.
pub type Triangle = (usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ray {
    pub index: usize,
    pub coords: [i32; 3],
}

impl Ray {
    pub fn dot(&self, other: &Ray) -> i64 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(&a, &b)| a as i64 * b as i64)
            .sum()
    }

    pub fn vector(&self) -> CVec3 {
        let [a, b, c] = self.coords;
        CVec3::real(a as f64, b as f64, c as f64)
    }

    /// Unit vector along the ray.
    pub fn unit(&self) -> CVec3 {
        self.vector().normalized().expect("rays are nonzero")
    }
}

pub fn rays() -> [Ray; NUM_RAYS] {
    std::array::from_fn(|k| Ray {
        index: k + 1,
        coords: RAY_COORDS[k],
    })
}

/// Projectors `V_i` and observables `A_i = I - 2 V_i`.
#[derive(Debug, Clone)]
pub struct ObservableSet {
    projectors: [CMat3; NUM_RAYS],
    observables: [CMat3; NUM_RAYS],
}

impl ObservableSet {
    pub fn from_rays(rays: &[Ray; NUM_RAYS]) -> Result<Self> {
        let mut projectors = [CMat3::zeros(); NUM_RAYS];
        for (p, r) in projectors.iter_mut().zip(rays.iter()) {
            *p = projector_from_ray(&r.vector())?;
        }
        let observables = projectors.map(|v| CMat3::identity() - v.scale_real(2.0));
        Ok(ObservableSet {
            projectors,
            observables,
        })
    }

    /// `V_i`, 1-based.
    pub fn projector(&self, i: usize) -> &CMat3 {
        &self.projectors[i - 1]
    }

    /// `A_i`, 1-based.
    pub fn observable(&self, i: usize) -> &CMat3 {
        &self.observables[i - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompatibilityGraph {
    pub edges: BTreeSet<Edge>,
    pub triangles: BTreeSet<Triangle>,
}

impl CompatibilityGraph {
    /// Edges from exact integer orthogonality.
    pub fn from_rays(rays: &[Ray; NUM_RAYS]) -> Self {
        let mut edges = BTreeSet::new();
        for a in rays.iter() {
            for b in rays.iter().filter(|b| b.index > a.index) {
                if a.dot(b) == 0 {
                    edges.insert((a.index, b.index));
                }
            }
        }
        Self::from_edges(edges)
    }

    /// Builds the graph from an explicit edge set; triangles are found by
    /// clique search rather than taken from a table.
    pub fn from_edges(edges: BTreeSet<Edge>) -> Self {
        let edges: BTreeSet<Edge> = edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        let triangles = find_triangles(&edges);
        CompatibilityGraph { edges, triangles }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, i: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// All 3-cliques, via neighbor-set intersection over ordered vertex pairs.
fn find_triangles(edges: &BTreeSet<Edge>) -> BTreeSet<Triangle> {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let mut out = BTreeSet::new();
    for &(a, b) in edges {
        let (na, nb) = (&adj[&a], &adj[&b]);
        for &k in na.intersection(nb).filter(|&&k| k > b) {
            out.insert((a, b, k));
        }
    }
    out
}

fn triangle_contains_edge(t: &Triangle, e: &Edge) -> bool {
    let verts = [t.0, t.1, t.2];
    verts.contains(&e.0) && verts.contains(&e.1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InequalityCoefficients {
    pub mu_i: [i64; NUM_RAYS],
    pub mu_ij: BTreeMap<Edge, i64>,
    pub mu_ijk: BTreeMap<Triangle, i64>,
    pub classical_bound_chi13: i64,
    pub classical_bound_chi4: i64,
}

impl InequalityCoefficients {
    pub fn for_graph(graph: &CompatibilityGraph) -> Self {
        let mu_i = std::array::from_fn(|k| if k < 9 { 1 } else { 2 });
        let mu_ij = graph
            .edges
            .iter()
            .map(|e| {
                let inside = WEIGHTED_TRIANGLES
                    .iter()
                    .any(|t| triangle_contains_edge(t, e));
                (*e, if inside { 1 } else { 2 })
            })
            .collect();
        let mu_ijk = graph
            .triangles
            .iter()
            .map(|t| (*t, if WEIGHTED_TRIANGLES.contains(t) { 3 } else { 0 }))
            .collect();
        InequalityCoefficients {
            mu_i,
            mu_ij,
            mu_ijk,
            classical_bound_chi13: CLASSICAL_BOUND_CHI13,
            classical_bound_chi4: CLASSICAL_BOUND_CHI4,
        }
    }

    /// `mu_i`, 1-based.
    pub fn mu(&self, i: usize) -> i64 {
        self.mu_i[i - 1]
    }
}

/// The assembled model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct KsModel {
    pub rays: [Ray; NUM_RAYS],
    pub observables: ObservableSet,
    pub graph: CompatibilityGraph,
    pub coefficients: InequalityCoefficients,
}

impl KsModel {
    pub fn build() -> Self {
        let rays = rays();
        let graph = CompatibilityGraph::from_rays(&rays);
        Self::with_graph(graph)
    }

    /// Model over a caller-supplied graph; used for fault injection.
    pub fn with_graph(graph: CompatibilityGraph) -> Self {
        let rays = rays();
        let observables = ObservableSet::from_rays(&rays).expect("rays are nonzero");
        let coefficients = InequalityCoefficients::for_graph(&graph);
        KsModel {
            rays,
            observables,
            graph,
            coefficients,
        }
    }

    pub fn ray(&self, i: usize) -> &Ray {
        &self.rays[i - 1]
    }

    /// `sum mu_i A_i - sum_E mu_ij A_i A_j - sum_C mu_ijk A_i A_j A_k`.
    pub fn chi13_operator(&self) -> CMat3 {
        let a = |i: usize| *self.observables.observable(i);
        let mut chi = CMat3::zeros();
        for i in 1..=NUM_RAYS {
            chi = chi + a(i).scale_real(self.coefficients.mu(i) as f64);
        }
        for (&(i, j), &mu) in &self.coefficients.mu_ij {
            chi = chi - (a(i) * a(j)).scale_real(mu as f64);
        }
        for (&(i, j, k), &mu) in &self.coefficients.mu_ijk {
            chi = chi - (a(i) * a(j) * a(k)).scale_real(mu as f64);
        }
        chi
    }

    /// `sum_{i=10..13} V_i`.
    pub fn chi4_operator(&self) -> CMat3 {
        (10..=13).fold(CMat3::zeros(), |acc, i| acc + *self.observables.projector(i))
    }

    /// Structured text dump of rays, edges, triangles and weights.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# rays: index a b c").unwrap();
        for r in &self.rays {
            let [a, b, c] = r.coords;
            writeln!(s, "ray {} {} {} {}", r.index, a, b, c).unwrap();
        }
        writeln!(s, "# edges: i j mu_ij").unwrap();
        for (&(i, j), mu) in &self.coefficients.mu_ij {
            writeln!(s, "edge {i} {j} {mu}").unwrap();
        }
        writeln!(s, "# triangles: i j k mu_ijk").unwrap();
        for (&(i, j, k), mu) in &self.coefficients.mu_ijk {
            writeln!(s, "triangle {i} {j} {k} {mu}").unwrap();
        }
        writeln!(s, "# single weights: i mu_i").unwrap();
        for i in 1..=NUM_RAYS {
            writeln!(s, "mu {} {}", i, self.coefficients.mu(i)).unwrap();
        }
        writeln!(s, "bound chi13 {}", self.coefficients.classical_bound_chi13).unwrap();
        writeln!(s, "bound chi4 {}", self.coefficients.classical_bound_chi4).unwrap();
        s
    }
}

/// `Tr(rho O)` for Hermitian `O`; fails if the imaginary part is not roundoff.
pub fn quantum_expectation(rho: &DensityMatrix, observable: &CMat3) -> Result<f64> {
    let dev = observable.hermitian_deviation();
    if dev > crate::linalg::DENSITY_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let tr = (*rho.matrix() * *observable).trace();
    if tr.im.abs() >= 1e-8 {
        return Err(Error::Numerical(format!(
            "expectation has imaginary part {:.3e}",
            tr.im
        )));
    }
    Ok(tr.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_distance, random_density_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn edge_count_and_membership() {
        let m = KsModel::build();
        assert_eq!(m.graph.edges.len(), 24);
        assert!(m.graph.contains(4, 10));
        assert!(!m.graph.contains(10, 13));
    }

    #[test]
    fn four_triangles_found_by_search() {
        let m = KsModel::build();
        let want: BTreeSet<Triangle> = [(1, 2, 3), (1, 4, 7), (2, 5, 8), (3, 6, 9)].into();
        assert_eq!(m.graph.triangles, want);
    }

    #[test]
    fn coefficient_tables() {
        let m = KsModel::build();
        let c = &m.coefficients;
        assert_eq!(c.mu_i.iter().sum::<i64>(), 17);
        assert_eq!(c.mu_ij.values().sum::<i64>(), 39);
        assert_eq!(c.mu_ijk.values().sum::<i64>(), 9);
        assert_eq!(c.mu_ij[&(1, 4)], 1);
        assert_eq!(c.mu_ij[&(1, 2)], 2);
        assert_eq!(c.mu_ij[&(4, 10)], 2);
        assert_eq!(c.mu_ijk[&(1, 2, 3)], 0);
        assert_eq!(c.mu_ijk[&(3, 6, 9)], 3);
    }

    #[test]
    fn observables_square_to_identity() {
        let m = KsModel::build();
        for i in 1..=NUM_RAYS {
            let a = *m.observables.observable(i);
            let v = *m.observables.projector(i);
            assert!(frobenius_distance(&a, &(CMat3::identity() - v.scale_real(2.0))) < 1e-12);
            assert!(frobenius_distance(&(a * a), &CMat3::identity()) < 1e-10);
        }
    }

    #[test]
    fn edges_are_compatible() {
        let m = KsModel::build();
        for &(i, j) in &m.graph.edges {
            let (vi, vj) = (*m.observables.projector(i), *m.observables.projector(j));
            assert!((vi * vj).frobenius_norm() < 1e-12);
            let (ai, aj) = (*m.observables.observable(i), *m.observables.observable(j));
            assert!(ai.commutator(&aj).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn triangles_are_complete_bases() {
        let m = KsModel::build();
        for &(i, j, k) in &m.graph.triangles {
            let p = |x| *m.observables.projector(x);
            assert!(frobenius_distance(&(p(i) + p(j) + p(k)), &CMat3::identity()) < 1e-12);
            let a = |x| *m.observables.observable(x);
            let prod = a(i) * a(j) * a(k);
            assert!(frobenius_distance(&prod, &-CMat3::identity()) < 1e-10);
        }
    }

    #[test]
    fn projector_sums() {
        let m = KsModel::build();
        let s9 = (1..=9).fold(CMat3::zeros(), |acc, i| acc + *m.observables.projector(i));
        assert!(frobenius_distance(&s9, &CMat3::identity().scale_real(3.0)) < 1e-12);
        let s4 = m.chi4_operator();
        assert!(frobenius_distance(&s4, &CMat3::identity().scale_real(4.0 / 3.0)) < 1e-12);
    }

    #[test]
    fn chi13_is_multiple_of_identity() {
        let chi = KsModel::build().chi13_operator();
        assert!(frobenius_distance(&chi, &CMat3::identity().scale_real(QUANTUM_CHI13)) < 1e-9);
        assert!((chi[(0, 0)].re - 27.666_666_666_666_668).abs() < 1e-9);
        assert!(chi.max_off_diagonal() < 1e-9);
    }

    #[test]
    fn chi4_examples() {
        let chi = KsModel::build().chi4_operator();
        assert!((chi.trace().re - 4.0).abs() < 1e-12);
        assert!(chi[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn expectation_examples() {
        let m = KsModel::build();
        let one = DensityMatrix::basis(1);
        let e = quantum_expectation(&one, m.observables.projector(13)).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed();
        let e = quantum_expectation(&mixed, m.observables.observable(1)).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let mut o = CMat3::identity();
        o[(0, 1)] = crate::linalg::c(0.0, 1.0);
        assert!(quantum_expectation(&DensityMatrix::maximally_mixed(), &o).is_err());
    }

    #[test]
    fn chi13_state_independent() {
        let m = KsModel::build();
        let chi = m.chi13_operator();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let rho = random_density_matrix(&mut rng);
            let e = quantum_expectation(&rho, &chi).unwrap();
            assert!((e - QUANTUM_CHI13).abs() < 1e-9);
        }
    }

    #[test]
    fn dump_lists_everything() {
        let d = KsModel::build().dump();
        assert_eq!(d.lines().filter(|l| l.starts_with("edge ")).count(), 24);
        assert_eq!(d.lines().filter(|l| l.starts_with("triangle ")).count(), 4);
        assert!(d.contains("ray 13 1 1 1"));
    }
}
