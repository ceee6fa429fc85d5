//! Parameter sweeps over `(c₀, seed)` and the homogeneous multi-instance
//! dataset they produce.

use std::sync::Arc;

use ndarray::{Array4, Axis as NdAxis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{make_initial, simulate, Channel, SimParams, SpatialForm, Trajectory};
use crate::grid::Grid2D;

/// Supersaturation and seed levels of the training sweep.
pub const STANDARD_SUPERSATURATIONS: [f64; 5] = [0.20, 0.21, 0.22, 0.23, 0.24];
pub const STANDARD_SEEDS: [u64; 5] = [494, 1111, 1482, 4446, 7410];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub supersaturations: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Full cross product when set; otherwise the two lists are zipped.
    #[serde(default = "default_cross")]
    pub cross: bool,
}

fn default_cross() -> bool {
    true
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self::standard()
    }
}

impl SweepSpec {
    pub fn standard() -> Self {
        Self {
            supersaturations: STANDARD_SUPERSATURATIONS.to_vec(),
            seeds: STANDARD_SEEDS.to_vec(),
            cross: true,
        }
    }

    pub fn single(c0: f64, seed: u64) -> Self {
        Self {
            supersaturations: vec![c0],
            seeds: vec![seed],
            cross: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.supersaturations.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("sweep needs at least one supersaturation and one seed"));
        }
        if let Some(c0) = self.supersaturations.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(Error::invalid(format!("supersaturation {c0} outside (0, 1)")));
        }
        if !self.cross && self.supersaturations.len() != self.seeds.len() {
            return Err(Error::invalid(format!(
                "paired sweep needs equal list lengths, got {} supersaturations and {} seeds",
                self.supersaturations.len(),
                self.seeds.len()
            )));
        }
        Ok(())
    }

    /// `(c₀, seed)` pairs sorted lexicographically, duplicates removed.
    pub fn combinations(&self) -> Vec<InstanceMeta> {
        let mut out: Vec<InstanceMeta> = if self.cross {
            self.supersaturations
                .iter()
                .flat_map(|&c0| self.seeds.iter().map(move |&seed| InstanceMeta { c0, seed }))
                .collect()
        } else {
            self.supersaturations
                .iter()
                .zip(&self.seeds)
                .map(|(&c0, &seed)| InstanceMeta { c0, seed })
                .collect()
        };
        out.sort_by(|a, b| a.c0.total_cmp(&b.c0).then(a.seed.cmp(&b.seed)));
        out.dedup();
        out
    }
}

/// Run length and initial-noise settings shared by every sweep instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepPlan {
    pub frames: usize,
    pub substeps: usize,
    pub noise_amp: f64,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            frames: 100,
            substeps: 10,
            noise_amp: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub c0: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub meta: InstanceMeta,
    pub trajectory: Trajectory,
}

/// `N` trajectories sharing grid, frame count, spacing, start time and
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        let first = instances
            .first()
            .ok_or_else(|| Error::invalid("a dataset needs at least one instance"))?;
        let t = &first.trajectory;
        for (i, inst) in instances.iter().enumerate().skip(1) {
            let u = &inst.trajectory;
            let same = u.grid() == t.grid()
                && u.len() == t.len()
                && u.dt() == t.dt()
                && u.start_time() == t.start_time()
                && u.params() == t.params();
            if !same {
                return Err(Error::invalid(format!(
                    "instance {i} (c0 = {}, seed = {}) differs from instance 0 in grid, frames, spacing or parameters",
                    inst.meta.c0, inst.meta.seed
                )));
            }
        }
        Ok(Self { instances })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<Instance> {
        self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    fn reference(&self) -> &Trajectory {
        &self.instances[0].trajectory
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        self.reference().grid()
    }

    pub fn frames(&self) -> usize {
        self.reference().len()
    }

    pub fn dt(&self) -> f64 {
        self.reference().dt()
    }

    pub fn start_time(&self) -> f64 {
        self.reference().start_time()
    }

    pub fn params(&self) -> &SimParams {
        self.reference().params()
    }

    pub fn spatial_form(&self) -> SpatialForm {
        self.params().ch_spatial_form
    }

    pub fn metas(&self) -> Vec<InstanceMeta> {
        self.instances.iter().map(|i| i.meta).collect()
    }

    /// `(N, T, nx, ny)` tensor of one channel.
    pub fn tensor(&self, ch: Channel) -> Array4<f64> {
        let (nx, ny) = self.grid().shape();
        let mut out = Array4::zeros((self.len(), self.frames(), nx, ny));
        for (mut slot, inst) in out.axis_iter_mut(NdAxis(0)).zip(&self.instances) {
            slot.assign(&inst.trajectory.channel_stack(ch));
        }
        out
    }

    fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&i| self.instances[i].clone()).collect())
    }
}

/// Simulates every `(c₀, seed)` combination of `spec`, in parallel, and
/// returns the instances in lexicographic `(c₀, seed)` order.
pub fn run_sweep(
    spec: &SweepSpec,
    params: &SimParams,
    grid: Arc<Grid2D>,
    plan: &SweepPlan,
) -> Result<Dataset> {
    spec.validate()?;
    params.validate()?;
    let instances = spec
        .combinations()
        .into_par_iter()
        .map(|meta| {
            let wrap = |e: Error| Error::Instance {
                c0: meta.c0,
                seed: meta.seed,
                source: Box::new(e),
            };
            let initial = make_initial(meta.c0, meta.seed, grid.clone(), plan.noise_amp).map_err(wrap)?;
            let trajectory = simulate(&initial, params, plan.frames, plan.substeps).map_err(wrap)?;
            log::info!("finished instance c0 = {}, seed = {}", meta.c0, meta.seed);
            Ok(Instance { meta, trajectory })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(instances)
}

/// Shuffled train/test indices; each side is returned in ascending order.
pub fn split_indices(n: usize, n_train: usize, selection_seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "n_train must satisfy 1 <= n_train < {n}, got {n_train}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(selection_seed));
    let (train, test) = order.split_at(n_train);
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(dataset: &Dataset, n_train: usize, selection_seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(dataset.len(), n_train, selection_seed)?;
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_plan() -> SweepPlan {
        SweepPlan {
            frames: 3,
            substeps: 2,
            noise_amp: 0.01,
        }
    }

    #[test]
    fn standard_sweep_has_25_sorted_combinations() {
        let combos = SweepSpec::standard().combinations();
        assert_eq!(combos.len(), 25);
        assert!(combos
            .windows(2)
            .all(|w| (w[0].c0, w[0].seed) < (w[1].c0, w[1].seed)));
        assert_eq!(combos[0], InstanceMeta { c0: 0.20, seed: 494 });
    }

    #[test]
    fn paired_sweep_zips_rows() {
        let spec = SweepSpec {
            cross: false,
            ..SweepSpec::standard()
        };
        let combos = spec.combinations();
        assert_eq!(combos.len(), 5);
        assert_eq!(combos[1], InstanceMeta { c0: 0.21, seed: 1111 });
    }

    #[test]
    fn single_instance_equals_direct_simulation() {
        let grid = Arc::new(Grid2D::unit_square(8).unwrap());
        let p = SimParams::default();
        let plan = tiny_plan();
        let ds = run_sweep(&SweepSpec::single(0.22, 1482), &p, grid.clone(), &plan).unwrap();
        let direct = simulate(
            &make_initial(0.22, 1482, grid, plan.noise_amp).unwrap(),
            &p,
            plan.frames,
            plan.substeps,
        )
        .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.instances()[0].trajectory, direct);
    }

    #[test]
    fn blowup_names_the_instance() {
        let grid = Arc::new(Grid2D::unit_square(8).unwrap());
        let mut p = SimParams::default();
        p.elastic = p.elastic.without_eigenstrain();
        p.dt = 50.0;
        p.kappa_eta = 1e-6;
        let plan = SweepPlan {
            frames: 40,
            substeps: 1,
            noise_amp: 0.5,
        };
        match run_sweep(&SweepSpec::single(0.2, 7), &p, grid, &plan) {
            Err(Error::Instance { c0, seed, source }) => {
                assert_eq!((c0, seed), (0.2, 7));
                assert!(matches!(*source, Error::Blowup { .. }));
            }
            other => panic!("expected instance error, got {:?}", other.map(|d| d.len())),
        }
    }

    #[test]
    fn split_is_disjoint_covering_and_deterministic() {
        let (tr, te) = split_indices(25, 12, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (12, 13));
        let mut all: Vec<_> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..25).collect::<Vec<_>>());
        assert_eq!(split_indices(25, 12, 3).unwrap(), (tr, te));
        assert_eq!(split_indices(25, 24, 0).unwrap().1.len(), 1);
        assert!(split_indices(25, 25, 0).is_err());
        assert!(split_indices(25, 0, 0).is_err());
    }

    #[test]
    fn heterogeneous_instances_rejected() {
        let p = SimParams::default();
        let mk = |n| {
            let g = Arc::new(Grid2D::unit_square(n).unwrap());
            simulate(&make_initial(0.2, 1, g, 0.0).unwrap(), &p, 2, 1).unwrap()
        };
        let meta = InstanceMeta { c0: 0.2, seed: 1 };
        let r = Dataset::new(vec![
            Instance { meta, trajectory: mk(8) },
            Instance { meta, trajectory: mk(16) },
        ]);
        assert!(r.is_err());
    }
}
