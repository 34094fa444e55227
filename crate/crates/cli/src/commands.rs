use std::fs;
use std::path::{Path, PathBuf};

use pedcc::centroids::{centroid_stats, generate_centroids, CentroidSet};
use pedcc::classifier::{predict_batch, subset_predict_batch};
use pedcc::data::{load_csv, load_idx, stratified_split, synth_blobs};
use pedcc::incremental::{
    evaluate, load_model, manifest_path, member_file_name, persist, restore, save_model,
};
use pedcc::trainer::train_task;
use pedcc::{ClassId, EnsembleModel, Error, LabeledDataset, Result};
use serde_json::json;

use crate::config::{load_config, load_spec, ConfigFile};
use crate::manifest::RunManifest;
use crate::{DataArgs, LossOverrides};

fn load_data(args: &DataArgs, manifest: &mut RunManifest, name: &str) -> Result<LabeledDataset> {
    manifest.input(name, &args.path);
    match &args.labels {
        Some(labels) => {
            manifest.input(&format!("{name}_labels"), labels);
            load_idx(&args.path, labels)
        }
        None => load_csv(&args.path),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn resolve_config(path: Option<&Path>, overrides: &LossOverrides) -> Result<pedcc::TrainConfig> {
    let file = load_config(path)?;
    ConfigFile {
        scale: overrides.scale.or(file.scale),
        margin: overrides.margin.or(file.margin),
        root: overrides.root.or(file.root),
        epochs: overrides.epochs.or(file.epochs),
        seed: overrides.seed.or(file.seed),
        ..file
    }
    .resolve()
}

pub fn gen_centroids(
    classes: usize,
    dim: usize,
    seed: u64,
    iterations: usize,
    out: &Path,
) -> Result<()> {
    let mut manifest = RunManifest::start("gen-centroids");
    manifest
        .config(json!({ "classes": classes, "dim": dim, "iterations": iterations }))
        .seed("centroids", seed);
    let c = generate_centroids(classes, dim, seed, iterations)?;
    ensure_parent(out)?;
    c.save(out)?;
    let stats = centroid_stats(&c);
    println!(
        "{classes} centroids in {dim} dims: max cosine {:.6}, min angle {:.3} deg",
        stats.max_cosine, stats.min_angle_deg
    );
    manifest.output("centroids", out).finish(out)?;
    Ok(())
}

pub struct TrainArgs<'a> {
    pub data: &'a DataArgs,
    pub spec: &'a Path,
    pub config: Option<&'a Path>,
    pub overrides: &'a LossOverrides,
    pub centroids: &'a Path,
    pub out: &'a Path,
}

pub fn train(a: TrainArgs<'_>) -> Result<()> {
    let mut manifest = RunManifest::start("train");
    let spec = load_spec(a.spec)?;
    let cfg = resolve_config(a.config, a.overrides)?;
    manifest
        .input("spec", a.spec)
        .input("centroids", a.centroids);
    if let Some(c) = a.config {
        manifest.input("config", c);
    }
    let data = load_data(a.data, &mut manifest, "data")?;
    let head = CentroidSet::load(a.centroids)?;
    let (model, trace) = train_task(&data, &head, &spec, &cfg)?;

    ensure_parent(a.out)?;
    save_model(&model, a.out)?;
    let trace_path = with_suffix(a.out, ".trace.csv");
    trace.write_csv(&trace_path)?;
    if let Some(last) = trace.last() {
        println!(
            "trained {} classes: final loss {:.6}, train accuracy {:.4}",
            model.n_classes(),
            last.mean_loss,
            last.train_accuracy
        );
    }
    manifest
        .config(json!({ "spec": spec, "train": cfg }))
        .seed("train", cfg.seed)
        .seed("centroids", head.seed())
        .output("model", a.out)
        .output("trace", &trace_path)
        .finish(a.out)?;
    Ok(())
}

pub struct IncrAddArgs<'a> {
    pub ensemble: &'a Path,
    pub data: &'a DataArgs,
    pub spec: &'a Path,
    pub config: Option<&'a Path>,
    pub overrides: &'a LossOverrides,
}

pub fn incr_add(a: IncrAddArgs<'_>) -> Result<()> {
    let mut manifest = RunManifest::start("incr-add");
    let spec = load_spec(a.spec)?;
    let cfg = resolve_config(a.config, a.overrides)?;
    manifest.input("spec", a.spec);
    if let Some(c) = a.config {
        manifest.input("config", c);
    }
    let data = load_data(a.data, &mut manifest, "data")?;
    let mut ensemble = if manifest_path(a.ensemble).exists() {
        manifest.input("ensemble", &manifest_path(a.ensemble));
        restore(a.ensemble)?
    } else {
        EnsembleModel::new()
    };
    let trace = ensemble.add_task(&data, &spec, &cfg)?;
    persist(&ensemble, a.ensemble)?;

    let index = ensemble.len() - 1;
    let member = a.ensemble.join(member_file_name(index));
    let trace_path = with_suffix(&member, ".trace.csv");
    trace.write_csv(&trace_path)?;
    println!(
        "added member {index} with {} classes; ensemble now has {} members",
        data.class_set().len(),
        ensemble.len()
    );
    manifest
        .config(json!({ "spec": spec, "train": cfg }))
        .seed("train", cfg.seed)
        .seed("centroids", ensemble.members()[index].head().seed())
        .output("member", &member)
        .output("manifest", &manifest_path(a.ensemble))
        .output("trace", &trace_path)
        .finish(&member)?;
    Ok(())
}

pub fn eval(ensemble: &Path, test: &DataArgs, report_path: &Path) -> Result<()> {
    let mut manifest = RunManifest::start("eval");
    manifest.input("ensemble", &manifest_path(ensemble));
    let e = restore(ensemble)?;
    let test = load_data(test, &mut manifest, "test")?;
    let report = evaluate(&e, &test)?;
    ensure_parent(report_path)?;
    report.write_csv(report_path)?;
    println!("{}", report.table_row());
    manifest
        .config(json!({ "members": e.len() }))
        .output("report", report_path)
        .finish(report_path)?;
    Ok(())
}

pub const SUBSET_CSV_HEADER: &str = "subset,samples,full_accuracy,subset_accuracy";

/// `subset` holds global class labels of the model.
pub fn subset_eval(
    model_path: &Path,
    test: &DataArgs,
    subset: &[ClassId],
    report_path: &Path,
) -> Result<()> {
    let mut manifest = RunManifest::start("subset-eval");
    manifest.input("model", model_path);
    let model = load_model(model_path)?;
    let test = load_data(test, &mut manifest, "test")?;
    let local: Vec<usize> = subset
        .iter()
        .map(|g| {
            model
                .label_map()
                .iter()
                .position(|l| l == g)
                .ok_or(Error::UnknownLabel(*g))
        })
        .collect::<Result<_>>()?;
    let inside = test.filter_classes(subset);
    if inside.is_empty() {
        return Err(Error::Coverage(
            "no test samples belong to the subset".to_string(),
        ));
    }
    let x = inside.features().view();
    let hits = |preds: Vec<pedcc::Prediction>| {
        preds
            .iter()
            .zip(inside.labels())
            .filter(|(p, &y)| p.global_label == y)
            .count() as f64
            / inside.len() as f64
    };
    let full = hits(predict_batch(&model, x)?);
    let restricted = hits(subset_predict_batch(&model, x, &local)?);

    let names: Vec<String> = subset.iter().map(ToString::to_string).collect();
    let csv = format!(
        "{SUBSET_CSV_HEADER}\n{},{},{full:.4},{restricted:.4}\n",
        names.join(" "),
        inside.len()
    );
    ensure_parent(report_path)?;
    fs::write(report_path, csv).map_err(|e| Error::io(report_path, e))?;
    println!(
        "subset {{{}}} on {} samples: full {:.2}%, subset {:.2}%",
        names.join(","),
        inside.len(),
        full * 100.0,
        restricted * 100.0
    );
    manifest
        .config(json!({ "subset": subset }))
        .output("report", report_path)
        .finish(report_path)?;
    Ok(())
}

pub struct SynthArgs<'a> {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub seed: u64,
    pub out: &'a Path,
    pub test_per_class: usize,
    pub test_out: Option<&'a Path>,
}

pub fn synth(a: SynthArgs<'_>) -> Result<()> {
    let mut manifest = RunManifest::start("synth");
    manifest
        .config(json!({
            "classes": a.classes,
            "dim": a.dim,
            "per_class": a.per_class,
            "separation": a.separation,
            "test_per_class": a.test_per_class,
        }))
        .seed("data", a.seed);
    let (train, test) = match (a.test_out, a.test_per_class) {
        (Some(_), 0) => {
            return Err(Error::Domain(
                "--test-out needs --test-per-class >= 1".to_string(),
            ))
        }
        (Some(_), n) => {
            let all = synth_blobs(a.classes, a.dim, a.per_class + n, a.separation, a.seed)?;
            let frac = a.per_class as f64 / (a.per_class + n) as f64;
            let (train, test) = stratified_split(&all, frac, a.seed)?;
            (train, Some(test))
        }
        (None, _) => (
            synth_blobs(a.classes, a.dim, a.per_class, a.separation, a.seed)?,
            None,
        ),
    };
    ensure_parent(a.out)?;
    train.save_csv(a.out)?;
    manifest.output("data", a.out);
    if let (Some(path), Some(test)) = (a.test_out, test) {
        ensure_parent(path)?;
        test.save_csv(path)?;
        manifest.output("test", path);
    }
    println!("wrote {} samples of {} classes", train.len(), a.classes);
    manifest.finish(a.out)?;
    Ok(())
}
