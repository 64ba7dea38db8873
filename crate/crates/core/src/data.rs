//! Network-plus-covariate observations and their canonical vectorization.
//!
//! Feature coordinates follow one fixed order used by every file format and
//! every module: the `n(n-1)/2` upper-triangle edges in lexicographic `(k, l)`
//! order with `k < l`, followed by the node covariates node-major (all `d`
//! covariates of node 1, then node 2, ...). Nodes and coordinates are
//! 0-based in memory and 1-based in files; community labels are 1-based
//! everywhere.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            other => Err(Error::invalid(format!("unknown family `{other}`"))),
        }
    }
}

/// Assignment of each node to one of `K` communities labelled `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityMap {
    labels: Vec<usize>,
    k: usize,
    order: Vec<usize>,
}

impl CommunityMap {
    /// Builds a map from 1-based labels, one per node. Every label in `1..=K`
    /// must be used.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("community map has no nodes"));
        }
        if labels.contains(&0) {
            return Err(Error::invalid("community labels are 1-based"));
        }
        let k = *labels.iter().max().unwrap();
        let mut used = vec![false; k];
        for &c in &labels {
            used[c - 1] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::invalid(format!(
                "community labels must be contiguous 1..{k}; label {} is unused",
                missing + 1
            )));
        }
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&i| labels[i]);
        Ok(CommunityMap { labels, k, order })
    }

    /// Contiguous map with the given community sizes, in label order.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat(c + 1).take(s))
            .collect();
        Self::new(labels)
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_communities(&self) -> usize {
        self.k
    }

    /// 1-based label of a 0-based node.
    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Nodes sorted so that labels are non-decreasing (stable in node id).
    pub fn ordering(&self) -> &[usize] {
        &self.order
    }

    /// 0-based nodes of community `k` (1-based), ascending.
    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == k).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.labels {
            sizes[c - 1] += 1;
        }
        sizes
    }
}

/// Bijection between features and coordinates of the vectorized predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureIndex {
    n: usize,
    d: usize,
}

/// What a coordinate of the vectorized predictor refers to (0-based nodes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Edge { k: usize, l: usize },
    Covariate { node: usize, j: usize },
}

impl FeatureIndex {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("networks need at least two nodes"));
        }
        Ok(FeatureIndex { n, d })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_covariates(&self) -> usize {
        self.d
    }

    pub fn n_edges(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// `n(n-1)/2 + n d`
    pub fn p(&self) -> usize {
        self.n_edges() + self.n * self.d
    }

    /// Coordinate of the edge between nodes `k` and `l` (either order, `k != l`).
    pub fn edge_coord(&self, k: usize, l: usize) -> usize {
        let (k, l) = if k < l { (k, l) } else { (l, k) };
        debug_assert!(k != l && l < self.n);
        k * self.n - k * (k + 1) / 2 + (l - k - 1)
    }

    pub fn covariate_coord(&self, node: usize, j: usize) -> usize {
        debug_assert!(node < self.n && j < self.d);
        self.n_edges() + node * self.d + j
    }

    pub fn is_edge(&self, coord: usize) -> bool {
        coord < self.n_edges()
    }

    pub fn feature(&self, coord: usize) -> Feature {
        let ne = self.n_edges();
        if coord < ne {
            let mut k = 0;
            let mut start = 0;
            loop {
                let row = self.n - k - 1;
                if coord < start + row {
                    return Feature::Edge {
                        k,
                        l: k + 1 + (coord - start),
                    };
                }
                start += row;
                k += 1;
            }
        } else {
            let c = coord - ne;
            Feature::Covariate {
                node: c / self.d,
                j: c % self.d,
            }
        }
    }

    /// Human-readable, 1-based label: `A[k,l]` for edges, `X[k,j]` for covariates.
    pub fn label(&self, coord: usize) -> String {
        match self.feature(coord) {
            Feature::Edge { k, l } => format!("A[{},{}]", k + 1, l + 1),
            Feature::Covariate { node, j } => format!("X[{},{}]", node + 1, j + 1),
        }
    }

    /// `(k, l)` pairs in canonical order.
    pub fn edge_order(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |k| (k + 1..self.n).map(move |l| (k, l)))
    }

    /// `(node, covariate)` pairs in canonical order.
    pub fn node_order(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (0..self.d).map(move |j| (i, j)))
    }
}

/// One sample: adjacency matrix `A` (n x n, symmetric, zero diagonal), node
/// covariates `X` (n x d) and response `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    a: DMatrix<f64>,
    x: DMatrix<f64>,
    y: f64,
}

impl Observation {
    pub fn new(a: DMatrix<f64>, x: DMatrix<f64>, y: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::shape(format!("adjacency is {}x{}", n, a.ncols())));
        }
        if x.nrows() != n {
            return Err(Error::shape(format!(
                "covariates have {} rows for {} nodes",
                x.nrows(),
                n
            )));
        }
        for k in 0..n {
            if a[(k, k)] != 0.0 {
                return Err(Error::shape(format!("self-loop at node {}", k + 1)));
            }
            for l in k + 1..n {
                let (u, v) = (a[(k, l)], a[(l, k)]);
                if (u - v).abs() > SYMMETRY_TOL * u.abs().max(v.abs()).max(1.0) {
                    return Err(Error::shape(format!(
                        "adjacency not symmetric at ({}, {})",
                        k + 1,
                        l + 1
                    )));
                }
            }
        }
        Ok(Observation { a, x, y })
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn response(&self) -> f64 {
        self.y
    }

    pub fn index(&self) -> Result<FeatureIndex> {
        FeatureIndex::new(self.a.nrows(), self.x.ncols())
    }
}

/// Canonical vectorization of `(A, X)`.
pub fn vectorize(obs: &Observation, idx: &FeatureIndex) -> Result<Vec<f64>> {
    if obs.a.nrows() != idx.n || obs.x.ncols() != idx.d {
        return Err(Error::shape(format!(
            "observation has n={}, d={} but index expects n={}, d={}",
            obs.a.nrows(),
            obs.x.ncols(),
            idx.n,
            idx.d
        )));
    }
    let mut z = Vec::with_capacity(idx.p());
    z.extend(idx.edge_order().map(|(k, l)| obs.a[(k, l)]));
    z.extend(idx.node_order().map(|(i, j)| obs.x[(i, j)]));
    Ok(z)
}

/// Inverse of [`vectorize`]: rebuilds `(A, X)` from a canonical vector.
pub fn devectorize(z: &[f64], idx: &FeatureIndex) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if z.len() != idx.p() {
        return Err(Error::shape(format!(
            "vector has length {}, expected {}",
            z.len(),
            idx.p()
        )));
    }
    let mut a = DMatrix::zeros(idx.n, idx.n);
    for (c, (k, l)) in idx.edge_order().enumerate() {
        a[(k, l)] = z[c];
        a[(l, k)] = z[c];
    }
    let ne = idx.n_edges();
    let x = DMatrix::from_fn(idx.n, idx.d, |i, j| z[ne + i * idx.d + j]);
    Ok((a, x))
}

/// Stacked vectorized observations, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub index: FeatureIndex,
    pub z: DMatrix<f64>,
}

/// Stacks [`vectorize`] over observations in input order.
pub fn build_design(observations: &[Observation]) -> Result<DesignMatrix> {
    let first = observations.first().ok_or(Error::EmptyDataset)?;
    let index = first.index()?;
    let p = index.p();
    let mut z = DMatrix::zeros(observations.len(), p);
    for (i, obs) in observations.iter().enumerate() {
        let row = vectorize(obs, &index)?;
        for (j, v) in row.into_iter().enumerate() {
            z[(i, j)] = v;
        }
    }
    Ok(DesignMatrix { index, z })
}

/// Row lists (0-based) for the training and test parts of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn all_train(n: usize) -> Self {
        Split {
            train: (0..n).collect(),
            test: Vec::new(),
        }
    }

    pub fn validate(&self, n_obs: usize) -> Result<()> {
        let mut seen = vec![false; n_obs];
        for &r in self.train.iter().chain(&self.test) {
            if r >= n_obs {
                return Err(Error::invalid(format!("split row {} out of range", r + 1)));
            }
            if seen[r] {
                return Err(Error::invalid(format!(
                    "row {} listed twice in train/test split",
                    r + 1
                )));
            }
            seen[r] = true;
        }
        if self.train.is_empty() {
            return Err(Error::invalid("split has no training rows"));
        }
        Ok(())
    }
}

/// A full dataset: design, response, community map, optional nuisance
/// covariates and a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub design: DesignMatrix,
    pub response: DVector<f64>,
    pub family: Family,
    pub communities: CommunityMap,
    pub nuisance: Option<DMatrix<f64>>,
    pub split: Split,
}

impl Dataset {
    pub fn new(
        design: DesignMatrix,
        response: DVector<f64>,
        family: Family,
        communities: CommunityMap,
        nuisance: Option<DMatrix<f64>>,
        split: Split,
    ) -> Result<Self> {
        let n_obs = design.z.nrows();
        if n_obs == 0 {
            return Err(Error::EmptyDataset);
        }
        if design.z.ncols() != design.index.p() {
            return Err(Error::shape(format!(
                "design has {} columns, index expects {}",
                design.z.ncols(),
                design.index.p()
            )));
        }
        if response.len() != n_obs {
            return Err(Error::shape(format!(
                "{} responses for {} observations",
                response.len(),
                n_obs
            )));
        }
        if communities.n_nodes() != design.index.n_nodes() {
            return Err(Error::shape(format!(
                "community map covers {} nodes, networks have {}",
                communities.n_nodes(),
                design.index.n_nodes()
            )));
        }
        if let Some(w) = &nuisance {
            if w.nrows() != n_obs {
                return Err(Error::shape("nuisance rows differ from observations"));
            }
        }
        if family == Family::Binomial && response.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("binomial responses must be 0 or 1"));
        }
        split.validate(n_obs)?;
        Ok(Dataset {
            design,
            response,
            family,
            communities,
            nuisance,
            split,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.design.z.nrows()
    }

    pub fn index(&self) -> FeatureIndex {
        self.design.index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_observation() -> Observation {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 5.0, 6.0, 5.0, 0.0, 7.0, 6.0, 7.0, 0.0]);
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        Observation::new(a, x, 0.0).unwrap()
    }

    #[test]
    fn vectorize_follows_canonical_order() {
        let obs = toy_observation();
        let idx = obs.index().unwrap();
        assert_eq!(idx.p(), 6);
        assert_eq!(vectorize(&obs, &idx).unwrap(), vec![5.0, 6.0, 7.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_nodes_no_covariates() {
        let obs = Observation::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 0), 1.0).unwrap();
        let idx = obs.index().unwrap();
        assert_eq!(idx.p(), 1);
        assert_eq!(vectorize(&obs, &idx).unwrap(), vec![0.0]);
    }

    #[test]
    fn asymmetric_adjacency_is_a_shape_error() {
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 2.0;
        let err = Observation::new(a, DMatrix::zeros(3, 1), 0.0).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn self_loop_is_rejected() {
        let mut a = DMatrix::zeros(2, 2);
        a[(1, 1)] = 1.0;
        assert!(Observation::new(a, DMatrix::zeros(2, 0), 0.0).is_err());
    }

    #[test]
    fn vectorize_rejects_wrong_index() {
        let obs = toy_observation();
        let idx = FeatureIndex::new(4, 1).unwrap();
        assert!(matches!(vectorize(&obs, &idx), Err(Error::Shape(_))));
    }

    #[test]
    fn build_design_shapes() {
        let obs = vec![toy_observation(), toy_observation()];
        let d = build_design(&obs).unwrap();
        assert_eq!(d.z.shape(), (2, 6));
        assert!(matches!(build_design(&[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn inconsistent_observations_are_rejected() {
        let other = Observation::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1), 0.0).unwrap();
        assert!(build_design(&[toy_observation(), other]).is_err());
    }

    #[test]
    fn experiment_scale_dimension() {
        // 50 * 49 / 2 edges plus one covariate per node
        let idx = FeatureIndex::new(50, 1).unwrap();
        assert_eq!(idx.n_edges(), 1225);
        assert_eq!(idx.p(), 1275);
    }

    #[test]
    fn edge_coordinates_roundtrip() {
        let idx = FeatureIndex::new(7, 2).unwrap();
        for (c, (k, l)) in idx.edge_order().enumerate() {
            assert_eq!(idx.edge_coord(k, l), c);
            assert_eq!(idx.edge_coord(l, k), c);
            assert_eq!(idx.feature(c), Feature::Edge { k, l });
        }
        for (i, j) in idx.node_order() {
            let c = idx.covariate_coord(i, j);
            assert_eq!(idx.feature(c), Feature::Covariate { node: i, j });
        }
        assert_eq!(idx.label(0), "A[1,2]");
        assert_eq!(idx.label(idx.p() - 1), "X[7,2]");
    }

    #[test]
    fn community_map_validation() {
        assert!(CommunityMap::new(vec![1, 3, 3]).is_err());
        assert!(CommunityMap::new(vec![0, 1]).is_err());
        let cm = CommunityMap::new(vec![2, 1, 2, 1]).unwrap();
        assert_eq!(cm.n_communities(), 2);
        assert_eq!(cm.ordering(), &[1, 3, 0, 2]);
        assert_eq!(cm.members(2), vec![0, 2]);
        assert_eq!(cm.sizes(), vec![2, 2]);
    }

    fn arb_network() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (2usize..7, 0usize..3).prop_flat_map(|(n, d)| {
            let p = n * (n - 1) / 2 + n * d;
            (Just(n), Just(d), prop::collection::vec(-10.0f64..10.0, p))
        })
    }

    proptest! {
        #[test]
        fn vectorize_devectorize_roundtrip((n, d, z) in arb_network()) {
            let idx = FeatureIndex::new(n, d).unwrap();
            let (a, x) = devectorize(&z, &idx).unwrap();
            let obs = Observation::new(a.clone(), x.clone(), 0.0).unwrap();
            let back = vectorize(&obs, &idx).unwrap();
            prop_assert_eq!(&back, &z);
            let (a2, x2) = devectorize(&back, &idx).unwrap();
            prop_assert_eq!(a2, a);
            prop_assert_eq!(x2, x);
        }

        #[test]
        fn node_relabeling_permutes_columns((n, d, z) in arb_network(), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let idx = FeatureIndex::new(n, d).unwrap();
            let (a, x) = devectorize(&z, &idx).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            // node i of the original becomes node perm[i]
            let mut ap = DMatrix::zeros(n, n);
            let mut xp = DMatrix::zeros(n, d);
            for i in 0..n {
                for k in 0..n {
                    ap[(perm[i], perm[k])] = a[(i, k)];
                }
                for j in 0..d {
                    xp[(perm[i], j)] = x[(i, j)];
                }
            }
            let zp = vectorize(&Observation::new(ap, xp, 0.0).unwrap(), &idx).unwrap();
            for (c, (k, l)) in idx.edge_order().enumerate() {
                prop_assert_eq!(zp[idx.edge_coord(perm[k], perm[l])], z[c]);
            }
            for (i, j) in idx.node_order() {
                prop_assert_eq!(zp[idx.covariate_coord(perm[i], j)], z[idx.covariate_coord(i, j)]);
            }
        }
    }
}
