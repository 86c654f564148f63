use std::fs;
use std::path::Path;
use std::time::Instant;

use hassvm::data::save_dataset;
use hassvm::experiments::{
    self, generate_synthetic, partition_domains, predict_labels, run_experiment, ExperimentConfig, SyntheticConfig,
};
use hassvm::model::{load_model, save_model};
use hassvm::trainers::{train_assvm, train_assvm_all, train_hassvm_weighted, train_ssvm};
use hassvm::tree::{validate_tree, TreeFile};
use hassvm::{DomainDataset, Error, Method, Normalization, Result, SourceModel, TrainOptions, TrainedModel, TreeSpec};

use crate::input::{for_model, pool, prepare, raw_domains};
use crate::{
    AdaptArgs, Command, Common, EvalArgs, ExperimentArgs, HassvmArgs, LatentCommand, PartitionArgs, PredictArgs,
    SourceArgs, SsvmArgs, SynthArgs, TrainCommand,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(TrainCommand::Ssvm(a)) => ssvm(a),
        Command::Train(TrainCommand::Assvm(a)) => adapt(a, false),
        Command::Train(TrainCommand::AssvmAll(a)) => adapt(a, true),
        Command::Train(TrainCommand::Hassvm(a)) => hassvm(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a),
        Command::Synth(a) => synth(a),
        Command::Latent(LatentCommand::Predict(a)) => latent_predict(a),
        Command::Latent(LatentCommand::Partition(a)) => latent_partition(a),
    }
}

fn options(common: &Common) -> TrainOptions {
    TrainOptions {
        optimizer: common.optimizer,
        ..TrainOptions::default()
    }
}

fn finish(model: &TrainedModel, out: &Path, started: Instant) -> Result<()> {
    save_model(model, out)?;
    println!("objective {:.9}", model.objective);
    println!("iterations {}", model.iterations);
    if let Some(status) = model.status {
        println!("status {}", serde_json::to_value(status)?.as_str().unwrap_or_default());
    }
    println!("time {:.3}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn ssvm(a: SsvmArgs) -> Result<()> {
    let kind: Method = a.kind.parse()?;
    if kind.is_adaptive() {
        return Err(Error::Config(format!("--kind must be SRC, TAR or MIX, not {kind}")));
    }
    let started = Instant::now();
    let raw = raw_domains(&a.common.data, &a.common.domain, a.k)?;
    let norm = if a.normalize {
        Some(Normalization::fit(raw.iter().flat_map(|d| d.samples.iter()))?)
    } else {
        None
    };
    let bias = !a.no_bias;
    let data = prepare(raw, norm.as_ref(), bias)?;
    let refs: Vec<&DomainDataset> = data.iter().collect();
    let model = train_ssvm(&refs, a.common.c, &options(&a.common))?
        .as_baseline(kind)?
        .with_preprocessing(bias, norm);
    finish(&model, &a.common.out, started)
}

fn source(a: &SourceArgs) -> Result<SourceModel> {
    load_model(&a.source_model)?.source_model(a.source_node.as_deref())
}

fn adapt(a: AdaptArgs, pooled: bool) -> Result<()> {
    let started = Instant::now();
    let src = source(&a.source)?;
    let data = for_model(&a.common.data, &a.common.domain, &src)?;
    let opts = options(&a.common);
    let model = if pooled {
        let refs: Vec<&DomainDataset> = data.iter().collect();
        train_assvm_all(&src, &refs, a.common.c, &opts)?
    } else {
        match data.as_slice() {
            [one] => train_assvm(&src, one, a.common.c, &opts)?,
            _ => {
                let ids: Vec<&str> = data.iter().map(|d| d.domain_id.as_str()).collect();
                return Err(Error::Config(format!(
                    "assvm adapts to one domain, the data has {} ({}); pick one with --domain",
                    ids.len(),
                    ids.join(", ")
                )));
            }
        }
    };
    finish(&model, &a.common.out, started)
}

fn hassvm(a: HassvmArgs) -> Result<()> {
    let started = Instant::now();
    let spec = match (&a.tree, &a.brackets) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let file: TreeFile =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            file.root.ok_or(hassvm::TreeError::Empty)?
        }
        (None, Some(text)) => TreeSpec::parse_brackets(text)?,
        (None, None) => return Err(Error::Config("--tree or --brackets is required".into())),
    };
    let tree = validate_tree(&spec)?;
    let src = source(&a.source)?;
    let data = for_model(&a.common.data, &a.common.domain, &src)?;
    let model = train_hassvm_weighted(&src, &tree, &data, a.common.c, a.node_multipliers, &options(&a.common))?;
    finish(&model, &a.common.out, started)
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    if let Some(node) = &a.node {
        if model.node_weights(node).is_none() {
            let names = model.node_names();
            return Err(Error::Config(if names.is_empty() {
                format!("unknown node `{node}`: {} model has no tree nodes", model.kind)
            } else {
                format!("unknown node `{node}` (valid nodes: {})", names.join(", "))
            }));
        }
    }
    let src = SourceModel::new(
        vec![0.0; model.k * model.n],
        model.n,
        model.k,
        model.bias_appended,
        model.normalization.clone(),
    )?;
    let data = for_model(&a.data, &[], &src)?;
    let (mut correct, mut total) = (0, 0);
    for d in &data {
        let w = match &a.node {
            Some(node) => model.node_weights(node),
            None => model.weights_for_domain(&d.domain_id),
        }
        .ok_or_else(|| {
            Error::Config(format!(
                "domain `{}` has no leaf in the model; choose a node with --node",
                d.domain_id
            ))
        })?;
        let c = experiments::count_correct(w, &d.samples)?;
        println!("{}\taccuracy {:.4} ({c}/{})", d.domain_id, ratio(c, d.len()), d.len());
        correct += c;
        total += d.len();
    }
    println!("accuracy {:.4}", ratio(correct, total));
    Ok(())
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let report = run_experiment(&cfg, a.jobs.max(1))?;
    let table = report.to_tsv();
    if let Some(path) = &a.out {
        write(path, &report.to_json()?)?;
    }
    if let Some(path) = &a.tsv {
        write(path, &table)?;
    }
    print!("{table}");
    if let Some(h) = &report.source_holdout {
        println!("# SRC on held-out source: {:.1}±{:.1}", 100.0 * h.mean, 100.0 * h.std);
    }
    for d in &report.deficiencies {
        println!("# short cell: {d}");
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str::<SyntheticConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticConfig::default(),
    };
    cfg.seed = a.seed;
    macro_rules! apply {
        ($($field:ident),*) => {$(
            if let Some(v) = a.$field.clone() {
                cfg.$field = v;
            }
        )*};
    }
    apply!(
        k,
        n,
        depth,
        branching,
        source_per_category,
        target_per_category,
        class_mean_scale,
        shifts,
        noise
    );
    let data = generate_synthetic(&cfg)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    save_dataset(a.out.join("source.csv"), [&data.source])?;
    save_dataset(a.out.join("targets.csv"), &data.targets)?;
    let tree = TreeFile { root: Some(data.tree) };
    write(&a.out.join("tree.json"), &(serde_json::to_string_pretty(&tree)? + "\n"))?;
    write(&a.out.join("synth.json"), &(serde_json::to_string_pretty(&cfg)? + "\n"))?;
    println!(
        "wrote {} source and {} target samples over {} leaves to {}",
        data.source.len(),
        data.targets.iter().map(DomainDataset::len).sum::<usize>(),
        data.targets.len(),
        a.out.display()
    );
    Ok(())
}

fn latent_predict(a: PredictArgs) -> Result<()> {
    let src = source(&a.source)?;
    let raw = raw_domains(&a.data, &[], Some(src.k))?;
    let labeled = predict_labels(&src, &pool(&raw))?;
    let n = raw.first().map_or(0, |d| d.n);
    let out = DomainDataset::new("pool", labeled, n, src.k)?;
    save_dataset(&a.out, [&out])?;
    println!("labeled {} samples", out.len());
    Ok(())
}

fn latent_partition(a: PartitionArgs) -> Result<()> {
    let raw = raw_domains(&a.data, &[], None)?;
    let assignment = partition_domains(&pool(&raw), a.domains, a.seed)?;
    let mut text = String::new();
    for d in &assignment {
        text.push_str(&d.to_string());
        text.push('\n');
    }
    write(&a.out, &text)?;
    for d in 1..=a.domains {
        println!("domain {d}: {} samples", assignment.iter().filter(|x| **x == d).count());
    }
    Ok(())
}
