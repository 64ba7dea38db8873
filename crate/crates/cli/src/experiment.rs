//! Expansion of an experiment configuration into grid cells and seeded
//! replicate jobs.

use anyhow::Context;
use netcov_core::grouping::split_communities;
use netcov_core::simgen::{
    alpha_grid, preset_groups, replicate_seed, simulate_semisynthetic, simulate_synthetic,
    Simulation, SyntheticConfig,
};
use netcov_core::{io, CommunityMap, Dataset, Family, FeatureIndex, GroupSpec, Scheme};

use crate::config::{config_error, Config};

/// One setting of the simulation grid.
#[derive(Debug, Clone)]
pub struct Cell {
    /// Directory-safe, unique within the grid.
    pub name: String,
    pub scheme: Scheme,
    pub family: Family,
    pub active: Vec<String>,
    pub alpha: f64,
}

/// One replicate of one cell.
#[derive(Debug, Clone)]
pub struct Job {
    pub cell: usize,
    pub replicate: usize,
    pub seed: u64,
}

pub struct Plan {
    pub cells: Vec<Cell>,
    pub jobs: Vec<Job>,
    /// Source of a semi-synthetic design, with any community split applied.
    pub base: Option<Dataset>,
}

/// Loads the source dataset of a semi-synthetic design.
pub fn load_base(cfg: &Config, seed: u64) -> anyhow::Result<Option<Dataset>> {
    let Some(dir) = &cfg.experiment.design else {
        return Ok(None);
    };
    let mut ds = io::read_dataset(dir).with_context(|| format!("reading design {}", dir.display()))?;
    if let Some(target) = cfg.experiment.split_communities {
        ds.communities = split_communities(&ds.communities, target, seed)?;
    }
    Ok(Some(ds))
}

fn layout(cfg: &Config, base: Option<&Dataset>) -> anyhow::Result<(CommunityMap, FeatureIndex)> {
    Ok(match base {
        Some(ds) => (ds.communities.clone(), ds.index()),
        None => {
            let e = &cfg.experiment;
            let cm = CommunityMap::from_sizes(&vec![e.nodes_per_community; e.n_communities])?;
            let idx = FeatureIndex::new(cm.n_nodes(), e.d)?;
            (cm, idx)
        }
    })
}

pub fn plan(cfg: &Config) -> anyhow::Result<Plan> {
    let seed = cfg.seed()?;
    let base = load_base(cfg, seed)?;
    let (cm, idx) = layout(cfg, base.as_ref())?;
    let e = &cfg.experiment;
    let mut cells = Vec::new();
    for &scheme in &e.scheme {
        let spec = GroupSpec::build(scheme, &cm, &idx)?;
        let actives: Vec<(String, Vec<String>)> = match &e.active_groups {
            Some(names) => vec![("custom".into(), names.clone())],
            None => e
                .active_count
                .iter()
                .map(|&k| Ok((format!("k{k}"), preset_groups(scheme, k)?)))
                .collect::<anyhow::Result<_>>()?,
        };
        for &family in &e.family {
            for (label, active) in &actives {
                let support = spec
                    .union_of(active)
                    .map_err(|err| config_error(format!("active groups under {scheme}: {err}")))?
                    .len();
                let alphas = match &e.alpha {
                    Some(a) => a.clone(),
                    None => alpha_grid(e.alpha_points, e.snr_min, e.snr_max, support)?,
                };
                for (ai, &alpha) in alphas.iter().enumerate() {
                    cells.push(Cell {
                        name: format!("{scheme}-{family}-{label}-a{ai:02}"),
                        scheme,
                        family,
                        active: active.clone(),
                        alpha,
                    });
                }
            }
        }
    }
    let jobs = (0..cells.len())
        .flat_map(|c| {
            (0..e.replicates).map(move |r| Job {
                cell: c,
                replicate: r,
                seed: replicate_seed(seed, c * e.replicates + r),
            })
        })
        .collect();
    Ok(Plan { cells, jobs, base })
}

impl Plan {
    pub fn simulate(&self, cfg: &Config, job: &Job) -> anyhow::Result<Simulation> {
        let cell = &self.cells[job.cell];
        let sim = match &self.base {
            Some(base) => simulate_semisynthetic(base, cell.scheme, &cell.active, cell.alpha, cell.family, job.seed)?,
            None => {
                let e = &cfg.experiment;
                let sc = SyntheticConfig {
                    scheme: cell.scheme,
                    active_groups: cell.active.clone(),
                    alpha: cell.alpha,
                    family: cell.family,
                    n_train: e.n_train,
                    n_test: e.n_test,
                    n_communities: e.n_communities,
                    nodes_per_community: e.nodes_per_community,
                    d: e.d,
                };
                simulate_synthetic(&sc, job.seed)?
            }
        };
        Ok(sim)
    }
}
