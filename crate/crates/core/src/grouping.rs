//! Community-based feature groups, overlap expansion and fold-back.
//!
//! A *block* holds the covariate coordinates of one community; a *cell* holds
//! the edge coordinates between a pair of communities. NBG and EBG groups are
//! unions of blocks and cells, so they overlap. [`ExpansionMap`] duplicates
//! shared coordinates so that groups become disjoint column blocks, and
//! [`ExpansionMap::fold_back`] sums duplicated coefficients back.

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CommunityMap, FeatureIndex};
use crate::error::{Error, Result};
use crate::linalg;

/// Community sizes of the 13-system Power parcellation after removing
/// unassigned nodes (236 nodes).
pub const POWER_COMMUNITIES: [(&str, usize); 13] = [
    ("Sensomotor Hand", 30),
    ("Sensomotor Mouth", 5),
    ("Cingulo-Opercular Task Control", 14),
    ("Auditory", 13),
    ("Default Mode", 58),
    ("Memory", 5),
    ("Visual", 31),
    ("Frontoparietal Task Control", 25),
    ("Salience", 18),
    ("Subcortical", 13),
    ("Ventral Attention", 9),
    ("Dorsal Attention", 11),
    ("Cerebellar", 4),
];

/// Contiguous community map for the Power layout.
pub fn power_communities() -> CommunityMap {
    let sizes: Vec<usize> = POWER_COMMUNITIES.iter().map(|&(_, s)| s).collect();
    CommunityMap::from_sizes(&sizes).expect("static sizes are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Nbg,
    Ebg,
    Singleton,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Nbg => "nbg",
            Scheme::Ebg => "ebg",
            Scheme::Singleton => "singleton",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nbg" => Ok(Scheme::Nbg),
            "ebg" => Ok(Scheme::Ebg),
            "singleton" | "lasso" => Ok(Scheme::Singleton),
            other => Err(Error::invalid(format!("unknown grouping scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub name: String,
    /// Sorted, distinct 0-based coordinates.
    pub features: Vec<usize>,
}

/// One cell: edges between communities `a <= b` (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub a: usize,
    pub b: usize,
    pub features: Vec<usize>,
}

/// Node-covariate coordinates of each community, indexed by `label - 1`.
pub fn blocks(cm: &CommunityMap, idx: &FeatureIndex) -> Result<Vec<Vec<usize>>> {
    check_nodes(cm, idx)?;
    let mut out = vec![Vec::new(); cm.n_communities()];
    for (node, j) in idx.node_order() {
        out[cm.label(node) - 1].push(idx.covariate_coord(node, j));
    }
    Ok(out)
}

/// Edge coordinates of each community pair, ordered `(1,1), (1,2), ..., (1,K), (2,2), ...`.
pub fn cells(cm: &CommunityMap, idx: &FeatureIndex) -> Result<Vec<Cell>> {
    check_nodes(cm, idx)?;
    let k = cm.n_communities();
    let mut out: Vec<Cell> = (1..=k)
        .flat_map(|a| (a..=k).map(move |b| Cell { a, b, features: Vec::new() }))
        .collect();
    for (c, (u, v)) in idx.edge_order().enumerate() {
        let (a, b) = ordered(cm.label(u), cm.label(v));
        out[cell_position(k, a, b)].features.push(c);
    }
    Ok(out)
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

// position of (a, b), a <= b, in the upper-triangle enumeration including the diagonal
fn cell_position(k: usize, a: usize, b: usize) -> usize {
    let (a0, b0) = (a - 1, b - 1);
    a0 * k - a0 * a0.saturating_sub(1) / 2 + (b0 - a0)
}

fn check_nodes(cm: &CommunityMap, idx: &FeatureIndex) -> Result<()> {
    if cm.n_nodes() != idx.n_nodes() {
        return Err(Error::shape(format!(
            "community map has {} nodes, feature index {}",
            cm.n_nodes(),
            idx.n_nodes()
        )));
    }
    Ok(())
}

pub fn ebg_name(a: usize, b: usize) -> String {
    let (a, b) = ordered(a, b);
    format!("({a},{b})")
}

/// Ordered collection of possibly overlapping groups covering `0..p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    scheme: Scheme,
    p: usize,
    groups: Vec<Group>,
}

impl GroupSpec {
    /// Validates and normalizes groups: features are sorted and deduplicated,
    /// empty groups are dropped with a warning, and every coordinate of
    /// `0..p` must be covered.
    pub fn new(scheme: Scheme, p: usize, groups: Vec<Group>) -> Result<Self> {
        let mut covered = vec![false; p];
        let mut kept = Vec::with_capacity(groups.len());
        for mut g in groups {
            g.features.sort_unstable();
            g.features.dedup();
            if g.features.is_empty() {
                log::warn!("dropping empty group {}", g.name);
                continue;
            }
            if let Some(&bad) = g.features.iter().find(|&&f| f >= p) {
                return Err(Error::invalid(format!(
                    "group {} references feature {} beyond p = {p}",
                    g.name,
                    bad + 1
                )));
            }
            for &f in &g.features {
                covered[f] = true;
            }
            kept.push(g);
        }
        if let Some(miss) = covered.iter().position(|c| !c) {
            return Err(Error::invalid(format!(
                "feature {} is not in any group",
                miss + 1
            )));
        }
        Ok(GroupSpec {
            scheme,
            p,
            groups: kept,
        })
    }

    /// Node-based groups: community `k`'s block plus every cell touching `k`.
    pub fn nbg(cm: &CommunityMap, idx: &FeatureIndex) -> Result<Self> {
        let blocks = blocks(cm, idx)?;
        let cells = cells(cm, idx)?;
        let groups = (1..=cm.n_communities())
            .map(|k| {
                let mut features = blocks[k - 1].clone();
                for cell in cells.iter().filter(|c| c.a == k || c.b == k) {
                    features.extend_from_slice(&cell.features);
                }
                Group {
                    name: k.to_string(),
                    features,
                }
            })
            .collect();
        Self::new(Scheme::Nbg, idx.p(), groups)
    }

    /// Edge-based groups: cell `(a, b)` plus the blocks of `a` and `b`.
    pub fn ebg(cm: &CommunityMap, idx: &FeatureIndex) -> Result<Self> {
        let blocks = blocks(cm, idx)?;
        let groups = cells(cm, idx)?
            .into_iter()
            .map(|cell| {
                let mut features = cell.features;
                features.extend_from_slice(&blocks[cell.a - 1]);
                if cell.b != cell.a {
                    features.extend_from_slice(&blocks[cell.b - 1]);
                }
                Group {
                    name: ebg_name(cell.a, cell.b),
                    features,
                }
            })
            .collect();
        Self::new(Scheme::Ebg, idx.p(), groups)
    }

    /// One group per feature; the group LASSO then reduces to the LASSO.
    pub fn singleton(idx: &FeatureIndex) -> Self {
        let groups = (0..idx.p())
            .map(|j| Group {
                name: idx.label(j),
                features: vec![j],
            })
            .collect();
        GroupSpec {
            scheme: Scheme::Singleton,
            p: idx.p(),
            groups,
        }
    }

    pub fn build(scheme: Scheme, cm: &CommunityMap, idx: &FeatureIndex) -> Result<Self> {
        match scheme {
            Scheme::Nbg => Self::nbg(cm, idx),
            Scheme::Ebg => Self::ebg(cm, idx),
            Scheme::Singleton => Ok(Self::singleton(idx)),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }

    /// Position of a group by name. EBG names may be given in either order
    /// (`(3,1)` finds `(1,3)`), NBG names with or without parentheses.
    pub fn position(&self, name: &str) -> Option<usize> {
        let key = self.normalize_name(name);
        self.groups.iter().position(|g| g.name == key)
    }

    fn normalize_name(&self, name: &str) -> String {
        let trimmed: String = name.chars().filter(|c| !c.is_whitespace()).collect();
        let inner = trimmed.trim_start_matches('(').trim_end_matches(')');
        match self.scheme {
            Scheme::Ebg => {
                let parts: Vec<_> = inner.split(',').map(str::parse::<usize>).collect();
                match parts.as_slice() {
                    [Ok(a), Ok(b)] => ebg_name(*a, *b),
                    _ => trimmed,
                }
            }
            Scheme::Nbg => inner.to_string(),
            Scheme::Singleton => trimmed,
        }
    }

    /// Union of the named groups' coordinates, sorted.
    pub fn union_of(&self, names: &[String]) -> Result<Vec<usize>> {
        let mut mark = vec![false; self.p];
        for name in names {
            let g = self
                .position(name)
                .ok_or_else(|| Error::UnknownGroup(name.clone()))?;
            for &f in &self.groups[g].features {
                mark[f] = true;
            }
        }
        Ok((0..self.p).filter(|&j| mark[j]).collect())
    }

    pub fn expansion(&self) -> ExpansionMap {
        ExpansionMap::new(self)
    }
}

/// Map from the duplicated (expanded) coordinate space back to `0..p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionMap {
    p: usize,
    expanded_to_original: Vec<usize>,
    ranges: Vec<Range<usize>>,
}

impl ExpansionMap {
    pub fn new(spec: &GroupSpec) -> Self {
        let mut expanded_to_original = Vec::new();
        let mut ranges = Vec::with_capacity(spec.len());
        for g in spec.groups() {
            let start = expanded_to_original.len();
            expanded_to_original.extend_from_slice(&g.features);
            ranges.push(start..expanded_to_original.len());
        }
        ExpansionMap {
            p: spec.p(),
            expanded_to_original,
            ranges,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Total number of expanded coordinates, the sum of group sizes.
    pub fn p_star(&self) -> usize {
        self.expanded_to_original.len()
    }

    pub fn expanded_to_original(&self) -> &[usize] {
        &self.expanded_to_original
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    /// Original coordinates of group `g`, in expanded order.
    pub fn group_features(&self, g: usize) -> &[usize] {
        &self.expanded_to_original[self.ranges[g].clone()]
    }

    /// `Z*`: concatenation of each group's column block of `z`.
    pub fn expand_columns(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.ncols() != self.p {
            return Err(Error::shape(format!(
                "design has {} columns, expected {}",
                z.ncols(),
                self.p
            )));
        }
        Ok(linalg::select_columns(z, &self.expanded_to_original))
    }

    /// Sums duplicated coefficients back into the original coordinates.
    pub fn fold_back(&self, beta_star: &[f64]) -> Result<DVector<f64>> {
        if beta_star.len() != self.p_star() {
            return Err(Error::shape(format!(
                "expanded vector has length {}, expected {}",
                beta_star.len(),
                self.p_star()
            )));
        }
        let mut beta = DVector::zeros(self.p);
        for (&j, &b) in self.expanded_to_original.iter().zip(beta_star) {
            beta[j] += b;
        }
        Ok(beta)
    }

    /// Places each coordinate of `beta` in its first duplicate, zeros elsewhere.
    pub fn inject(&self, beta: &[f64]) -> Result<DVector<f64>> {
        if beta.len() != self.p {
            return Err(Error::shape("vector length differs from p"));
        }
        let mut placed = vec![false; self.p];
        let mut out = DVector::zeros(self.p_star());
        for (e, &j) in self.expanded_to_original.iter().enumerate() {
            if !placed[j] {
                out[e] = beta[j];
                placed[j] = true;
            }
        }
        Ok(out)
    }
}

/// Number of chunks an oversized community of size `c` is cut into: the
/// ceiling of `c / target`, reduced while that would leave chunks smaller
/// than `target - 1`.
pub fn chunk_count(c: usize, target: usize) -> usize {
    let mut m = c.div_ceil(target).max(1);
    while m > 1 && c / m + 1 < target {
        m -= 1;
    }
    m
}

/// Randomly breaks communities into chunks of near-equal size close to
/// `target`. Chunk sizes within a community differ by at most one; labels
/// are reassigned `1..=K'` in order of the original communities.
pub fn split_communities(cm: &CommunityMap, target: usize, seed: u64) -> Result<CommunityMap> {
    if target < 2 {
        return Err(Error::invalid("split target size must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![0; cm.n_nodes()];
    let mut next = 1;
    for k in 1..=cm.n_communities() {
        let mut members = cm.members(k);
        members.shuffle(&mut rng);
        let c = members.len();
        let m = chunk_count(c, target);
        let (base, extra) = (c / m, c % m);
        let mut it = members.into_iter();
        for chunk in 0..m {
            let size = base + usize::from(chunk < extra);
            for node in it.by_ref().take(size) {
                labels[node] = next;
            }
            next += 1;
        }
    }
    CommunityMap::new(labels)
}
