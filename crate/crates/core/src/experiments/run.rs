use indexmap::IndexMap;
use rayon::prelude::*;

use crate::data::{load_dataset, transform_sample, DatasetOptions, DomainDataset, LabeledSample, Normalization};
use crate::error::{Error, Result};
use crate::experiments::config::{DataSource, ExperimentConfig};
use crate::experiments::latent::{ingest_assignments, latent_name, partition_domains, renumber};
use crate::experiments::report::{CellStats, ExperimentReport, LatentSummary, AVERAGE_COLUMN};
use crate::experiments::splits::split_repetition;
use crate::experiments::synthetic::generate_synthetic;
use crate::experiments::{accuracy, count_correct};
use crate::model::SourceModel;
use crate::trainers::{train_assvm, train_assvm_all, train_hassvm, train_ssvm, Method, TrainOptions};
use crate::tree::{validate_tree, AdaptationTree, TreeSpec};

/// Raw (untransformed) data an experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentInputs {
    pub source: DomainDataset,
    pub targets: Vec<DomainDataset>,
    /// Tree used when the config names none (the generator's ground truth).
    pub default_tree: Option<TreeSpec>,
}

impl ExperimentInputs {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let (all, default_tree) = match &cfg.data {
            DataSource::Synthetic(s) => {
                let data = generate_synthetic(s)?;
                let mut all = vec![data.source];
                all.extend(data.targets);
                (all, Some(data.tree))
            }
            DataSource::Files(paths) => (load_files(paths)?, None),
        };
        Self::select(all, &cfg.source_domain, cfg.target_domains.as_deref(), default_tree)
    }

    fn select(
        mut all: Vec<DomainDataset>,
        source: &str,
        targets: Option<&[String]>,
        default_tree: Option<TreeSpec>,
    ) -> Result<Self> {
        let known = |all: &[DomainDataset]| all.iter().map(|d| d.domain_id.clone()).collect::<Vec<_>>().join(", ");
        let pos = all
            .iter()
            .position(|d| d.domain_id == source)
            .ok_or_else(|| Error::Config(format!("no source domain `{source}` (domains: {})", known(&all))))?;
        let source = all.remove(pos);
        let targets = match targets {
            None => all,
            Some(ids) => ids
                .iter()
                .map(|id| {
                    all.iter()
                        .find(|d| &d.domain_id == id)
                        .cloned()
                        .ok_or_else(|| Error::Config(format!("no target domain `{id}` (domains: {})", known(&all))))
                })
                .collect::<Result<_>>()?,
        };
        if targets.is_empty() {
            return Err(Error::Config("no target domains".into()));
        }
        Ok(Self {
            source,
            targets,
            default_tree,
        })
    }
}

fn load_files(paths: &[std::path::PathBuf]) -> Result<Vec<DomainDataset>> {
    let mut all: Vec<DomainDataset> = Vec::new();
    let mut k = 0;
    for path in paths {
        let loaded = load_dataset(path, &DatasetOptions::raw())?;
        k = k.max(loaded.k);
        for d in loaded.datasets {
            if all.iter().any(|a| a.domain_id == d.domain_id) {
                return Err(Error::Config(format!(
                    "domain `{}` appears in more than one file",
                    d.domain_id
                )));
            }
            all.push(d);
        }
    }
    let n = all.first().map_or(0, |d| d.n);
    all.into_iter()
        .map(|d| DomainDataset::new(d.domain_id, d.samples, n, k))
        .collect()
}

/// Loads the inputs named by `cfg` and runs it.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    run_with_inputs(cfg, &ExperimentInputs::load(cfg)?, jobs)
}

/// Runs every repetition, in parallel on up to `jobs` threads. The report
/// does not depend on `jobs`.
pub fn run_with_inputs(cfg: &ExperimentConfig, inputs: &ExperimentInputs, jobs: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    let plan = Plan::new(cfg, inputs)?;
    let reps = cfg.protocol.repetitions;
    let outcomes: Vec<Outcome> = if jobs <= 1 {
        (0..reps).map(|r| plan.repetition(r)).collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?
            .install(|| {
                (0..reps)
                    .into_par_iter()
                    .map(|r| plan.repetition(r))
                    .collect::<Result<_>>()
            })?
    };
    Ok(plan.aggregate(outcomes))
}

struct Plan<'a> {
    cfg: &'a ExperimentConfig,
    source: &'a DomainDataset,
    /// Adaptation units: the target domains, or the discovered domains.
    units: Vec<DomainDataset>,
    /// Report columns. Samples are credited to the domain they carry.
    domains: Vec<String>,
    tree: Option<AdaptationTree>,
    rows: Vec<String>,
    latent: Option<LatentSummary>,
    opts: TrainOptions,
}

struct Outcome {
    seed: u64,
    rows: IndexMap<String, IndexMap<String, f64>>,
    source_holdout: Option<f64>,
    deficiencies: Vec<String>,
}

impl<'a> Plan<'a> {
    fn new(cfg: &'a ExperimentConfig, inputs: &'a ExperimentInputs) -> Result<Self> {
        let domains: Vec<String> = inputs.targets.iter().map(|d| d.domain_id.clone()).collect();
        let (units, latent) = match &cfg.latent {
            None => (inputs.targets.clone(), None),
            Some(l) => {
                let pool: Vec<LabeledSample> = inputs.targets.iter().flat_map(|d| d.samples.iter().cloned()).collect();
                let (raw, origin) = match &l.assignments {
                    Some(path) => (ingest_assignments(path, pool.len())?, path.display().to_string()),
                    None => (partition_domains(&pool, l.domains, l.seed)?, "partition".to_string()),
                };
                let ids = renumber(&raw);
                discovered(&inputs.source, pool, &ids, origin)?
            }
        };
        let unit_ids: Vec<String> = units.iter().map(|u| u.domain_id.clone()).collect();

        let needs_tree = cfg.methods.contains(&Method::Hassvm);
        let tree = if !needs_tree {
            None
        } else {
            let tree = match (&cfg.tree, &inputs.default_tree) {
                (Some(src), _) => src.resolve()?,
                (None, Some(spec)) if latent.is_none() => validate_tree(spec)?,
                _ => AdaptationTree::flat("N0", &unit_ids)?,
            };
            let mut leaves = tree.domains().to_vec();
            let mut expected = unit_ids.clone();
            leaves.sort();
            expected.sort();
            if leaves != expected {
                return Err(Error::Config(format!(
                    "tree leaves [{}] do not match the target domains [{}]",
                    tree.domains().join(", "),
                    unit_ids.join(", ")
                )));
            }
            for node in &cfg.report_nodes {
                if tree.node_index(node).is_none() {
                    return Err(Error::Config(format!(
                        "unknown node `{node}` (nodes: {})",
                        tree.node_names().collect::<Vec<_>>().join(", ")
                    )));
                }
            }
            Some(tree)
        };

        let mut rows = Vec::new();
        for m in &cfg.methods {
            rows.push(m.name().to_string());
            if *m == Method::Hassvm {
                rows.extend(cfg.report_nodes.iter().map(|n| format!("{}-{n}", m.name())));
            }
        }
        Ok(Self {
            cfg,
            source: &inputs.source,
            units,
            domains,
            tree,
            rows,
            latent,
            opts: TrainOptions {
                optimizer: cfg.optimizer,
                ..TrainOptions::default()
            },
        })
    }

    fn repetition(&self, rep: usize) -> Result<Outcome> {
        let cfg = self.cfg;
        let unit_refs: Vec<&DomainDataset> = self.units.iter().collect();
        let split = split_repetition(self.source, &unit_refs, &cfg.protocol, rep, cfg.latent.is_some())?;

        let norm = if cfg.normalize {
            Some(Normalization::fit(&split.source.train.samples)?)
        } else {
            None
        };
        let n = self.source.n + usize::from(cfg.append_bias);
        let prep = |d: &DomainDataset| {
            let samples = d
                .samples
                .iter()
                .map(|s| transform_sample(s.clone(), norm.as_ref(), cfg.append_bias))
                .collect();
            DomainDataset::new(d.domain_id.clone(), samples, n, d.k)
        };
        let source_train = prep(&split.source.train)?;
        let source_test = prep(&split.source.test)?;
        let train: Vec<DomainDataset> = split.targets.iter().map(|t| prep(&t.train)).collect::<Result<_>>()?;
        let test: Vec<DomainDataset> = split.targets.iter().map(|t| prep(&t.test)).collect::<Result<_>>()?;
        let train_refs: Vec<&DomainDataset> = train.iter().collect();

        let c = cfg.c;
        let opts = &self.opts;
        let src_model = train_ssvm(&[&source_train], c, opts)?;
        let src_w = src_model.single_weights().unwrap_or_default().to_vec();
        let src = SourceModel::new(src_w.clone(), n, source_train.k, false, None)?;

        let mut rows = IndexMap::new();
        for m in &cfg.methods {
            let per_unit: Vec<Vec<f64>> = match m {
                Method::Src => vec![src_w.clone(); train.len()],
                Method::Tar => train
                    .iter()
                    .map(|t| single(train_ssvm(&[t], c, opts)?))
                    .collect::<Result<_>>()?,
                Method::Mix => train
                    .iter()
                    .map(|t| single(train_ssvm(&[&source_train, t], c, opts)?))
                    .collect::<Result<_>>()?,
                Method::Assvm => train
                    .iter()
                    .map(|t| single(train_assvm(&src, t, c, opts)?))
                    .collect::<Result<_>>()?,
                Method::AssvmAll => vec![single(train_assvm_all(&src, &train_refs, c, opts)?)?; train.len()],
                Method::Hassvm => {
                    let tree = self
                        .tree
                        .as_ref()
                        .ok_or_else(|| Error::Config("HA-SSVM needs a tree".into()))?;
                    let model = train_hassvm(&src, tree, &train, c, opts)?;
                    let leaf = |t: &DomainDataset| {
                        model
                            .weights_for_domain(&t.domain_id)
                            .map(<[f64]>::to_vec)
                            .ok_or_else(|| Error::Config(format!("no leaf for `{}`", t.domain_id)))
                    };
                    let leaves: Vec<Vec<f64>> = train.iter().map(leaf).collect::<Result<_>>()?;
                    rows.insert(m.name().to_string(), self.tally(&test, &leaves)?);
                    for node in &cfg.report_nodes {
                        let w = model.node_weights(node).unwrap_or_default().to_vec();
                        let row = self.tally(&test, &vec![w; train.len()])?;
                        rows.insert(format!("{}-{node}", m.name()), row);
                    }
                    continue;
                }
            };
            rows.insert(m.name().to_string(), self.tally(&test, &per_unit)?);
        }

        let source_holdout = if source_test.is_empty() {
            None
        } else {
            Some(accuracy(&src_w, &source_test.samples)?)
        };
        Ok(Outcome {
            seed: split.seed,
            rows,
            source_holdout,
            deficiencies: split.deficiencies,
        })
    }

    /// Per-domain accuracy when unit `i` is classified with `weights[i]`,
    /// plus the mean over domains.
    fn tally(&self, test: &[DomainDataset], weights: &[Vec<f64>]) -> Result<IndexMap<String, f64>> {
        let mut counts: IndexMap<&str, (usize, usize)> = self.domains.iter().map(|d| (d.as_str(), (0, 0))).collect();
        for (unit, w) in test.iter().zip(weights) {
            for s in &unit.samples {
                let entry = counts
                    .get_mut(s.domain.as_str())
                    .ok_or_else(|| Error::Config(format!("test sample from unknown domain `{}`", s.domain)))?;
                entry.0 += count_correct(w, std::slice::from_ref(s))?;
                entry.1 += 1;
            }
        }
        let mut out = IndexMap::new();
        for (d, (correct, total)) in counts {
            if total == 0 {
                return Err(Error::Protocol(format!("domain `{d}` has no test samples left")));
            }
            out.insert(d.to_string(), correct as f64 / total as f64);
        }
        let avg = out.values().sum::<f64>() / out.len() as f64;
        out.insert(AVERAGE_COLUMN.to_string(), avg);
        Ok(out)
    }

    fn aggregate(self, outcomes: Vec<Outcome>) -> ExperimentReport {
        let mut results = IndexMap::new();
        for row in &self.rows {
            let mut cells = IndexMap::new();
            for col in self.domains.iter().map(String::as_str).chain([AVERAGE_COLUMN]) {
                let values = outcomes.iter().map(|o| o.rows[row.as_str()][col]).collect();
                cells.insert(col.to_string(), CellStats::from_values(values));
            }
            results.insert(row.clone(), cells);
        }
        let holdout: Option<Vec<f64>> = outcomes.iter().map(|o| o.source_holdout).collect();
        let deficiencies = outcomes
            .iter()
            .flat_map(|o| {
                o.deficiencies
                    .iter()
                    .map(move |d| format!("repetition {}: {d}", o.seed))
            })
            .collect();
        ExperimentReport {
            domains: self.domains,
            results,
            source_holdout: holdout.map(CellStats::from_values),
            repetitions: outcomes.len(),
            seeds: outcomes.iter().map(|o| o.seed).collect(),
            deficiencies,
            latent: self.latent,
            config: self.cfg.clone(),
        }
    }
}

fn single(model: crate::trainers::TrainedModel) -> Result<Vec<f64>> {
    model
        .single_weights()
        .map(<[f64]>::to_vec)
        .ok_or_else(|| Error::Config(format!("{} returned a hierarchical model", model.kind)))
}

/// Groups the pooled samples by discovered domain. Samples keep their
/// original domain so results are still credited to it.
fn discovered(
    source: &DomainDataset,
    pool: Vec<LabeledSample>,
    ids: &[usize],
    origin: String,
) -> Result<(Vec<DomainDataset>, Option<LatentSummary>)> {
    let count = ids.iter().copied().max().unwrap_or(0);
    let mut groups: Vec<Vec<LabeledSample>> = vec![Vec::new(); count];
    let mut composition: IndexMap<String, IndexMap<String, usize>> =
        (1..=count).map(|d| (latent_name(d), IndexMap::new())).collect();
    for (s, &id) in pool.into_iter().zip(ids) {
        *composition[id - 1].entry(s.domain.clone()).or_insert(0) += 1;
        groups[id - 1].push(s);
    }
    let units = groups
        .into_iter()
        .enumerate()
        .map(|(i, samples)| DomainDataset::new(latent_name(i + 1), samples, source.n, source.k))
        .collect::<Result<_>>()?;
    Ok((
        units,
        Some(LatentSummary {
            domains: count,
            assignments: origin,
            composition,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{LatentConfig, TreeSource};
    use crate::experiments::splits::SplitProtocol;
    use crate::experiments::synthetic::SyntheticConfig;

    fn small() -> ExperimentConfig {
        let data = SyntheticConfig {
            k: 3,
            n: 4,
            source_per_category: 10,
            target_per_category: 8,
            ..SyntheticConfig::default()
        };
        ExperimentConfig::synthetic(data, SplitProtocol::new(5, 3, 3, 11))
    }

    #[test]
    fn rows_columns_and_ranges() {
        let mut cfg = small();
        cfg.report_nodes = vec!["N0".into()];
        let r = run_experiment(&cfg, 1).unwrap();
        assert_eq!(r.domains, ["T1", "T2", "T3"]);
        let rows: Vec<&str> = r.results.keys().map(String::as_str).collect();
        assert_eq!(
            rows,
            ["SRC", "TAR", "MIX", "A-SSVM", "A-SSVM-ALL", "HA-SSVM", "HA-SSVM-N0"]
        );
        assert_eq!(r.seeds, [11, 12, 13]);
        for cells in r.results.values() {
            for c in cells.values() {
                assert!((0.0..=1.0).contains(&c.mean) && c.std >= 0.0);
                assert_eq!(c.accuracies.len(), 3);
            }
        }
        assert!(r.source_holdout.is_some());
        let tsv = r.to_tsv();
        assert!(tsv.starts_with("method\tT1\tT2\tT3\tavg\n"));
        assert_eq!(tsv.lines().count(), 8);
    }

    #[test]
    fn one_repetition_has_zero_std() {
        let mut cfg = small();
        cfg.protocol.repetitions = 1;
        let r = run_experiment(&cfg, 1).unwrap();
        assert!(r.results.values().flat_map(|c| c.values()).all(|c| c.std == 0.0));
    }

    #[test]
    fn parallel_and_serial_reports_are_identical() {
        let cfg = small();
        let a = run_experiment(&cfg, 1).unwrap().to_json().unwrap();
        let b = run_experiment(&cfg, 3).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_tree_and_unknown_node() {
        let mut cfg = small();
        cfg.tree = Some(TreeSource::Brackets("[T1,T2]".into()));
        assert!(matches!(run_experiment(&cfg, 1), Err(Error::Config(_))));
        let mut cfg = small();
        cfg.report_nodes = vec!["bogus".into()];
        let msg = run_experiment(&cfg, 1).unwrap_err().to_string();
        assert!(msg.contains("bogus") && msg.contains("N0"), "{msg}");
    }

    #[test]
    fn latent_units_report_by_original_domain() {
        let mut cfg = small();
        cfg.latent = Some(LatentConfig {
            domains: 2,
            assignments: None,
            seed: 1,
        });
        let r = run_experiment(&cfg, 1).unwrap();
        assert_eq!(r.domains, ["T1", "T2", "T3"]);
        let latent = r.latent.as_ref().unwrap();
        assert_eq!(latent.domains, 2);
        let total: usize = latent.composition.values().flat_map(|c| c.values()).sum();
        assert_eq!(total, 3 * 3 * 8);
    }

    #[test]
    fn files_and_target_selection() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate_synthetic(&SyntheticConfig {
            k: 2,
            n: 2,
            source_per_category: 6,
            target_per_category: 5,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        crate::data::save_dataset(&p1, [&data.source, &data.targets[0]]).unwrap();
        crate::data::save_dataset(&p2, &data.targets[1..]).unwrap();
        let mut cfg = ExperimentConfig::synthetic(SyntheticConfig::default(), SplitProtocol::new(3, 2, 2, 0));
        cfg.data = DataSource::Files(vec![p1.clone(), p2]);
        cfg.target_domains = Some(vec!["T3".into(), "T1".into()]);
        let r = run_experiment(&cfg, 1).unwrap();
        assert_eq!(r.domains, ["T3", "T1"]);

        cfg.data = DataSource::Files(vec![p1.clone(), p1]);
        assert!(run_experiment(&cfg, 1).is_err());
        cfg.data = DataSource::Synthetic(SyntheticConfig::default());
        cfg.source_domain = "nope".into();
        let msg = run_experiment(&cfg, 1).unwrap_err().to_string();
        assert!(msg.contains("nope"), "{msg}");
    }
}
