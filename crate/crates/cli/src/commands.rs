use std::fs;
use std::path::Path;

use earconv::data::{
    decode_and_resize_to, load_manifest, split_by_subject, split_dataset, AugmentConfig, ManifestDataset,
    ManifestRecord, SampleSource,
};
use earconv::features::save_feature_grid;
use earconv::metrics::{predict_class, render_report, CLASS_NAMES};
use earconv::model::{build, load_checkpoint, render_architecture, save_checkpoint};
use earconv::train::{evaluate, train_loop, TrainConfig};
use earconv::{ArchConfig, Error, ModelGraph, Tensor};

use crate::{EvalArgs, FeatureArgs, InspectArgs, PredictArgs, SynthArgs, TrainArgs};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_CHECKPOINT: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Checkpoint(_) => EXIT_CHECKPOINT,
            Error::Manifest(_) | Error::Decode { .. } | Error::Label(_) | Error::Io { .. } => EXIT_DATA,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

/// Any failure while reading the checkpoint, a missing file included, is a
/// checkpoint failure.
fn open_checkpoint(path: &Path) -> Result<ModelGraph<f32>, Failure> {
    load_checkpoint(path).map_err(|e| fail(EXIT_CHECKPOINT, e.to_string()))
}

fn write(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| fail(EXIT_DATA, format!("cannot write {}: {e}", path.display())))
}

fn load_image(model: &ModelGraph<f32>, path: &Path) -> Result<Tensor<f32>, Failure> {
    let &[h, w, _] = model.input_shape() else { unreachable!("input layers are (h, w, c)") };
    let img = decode_and_resize_to(path, h, w)?;
    let shape: Vec<usize> = std::iter::once(1).chain(img.shape().iter().copied()).collect();
    Ok(img.reshape(&shape)?)
}

fn split(records: &[ManifestRecord], args: &TrainArgs) -> Result<(Vec<usize>, Vec<usize>), Failure> {
    let s = if args.subject_disjoint {
        if records.iter().any(|r| r.subject_id.is_none()) {
            log::warn!("some manifest rows have no subject_id; each counts as its own subject");
        }
        split_by_subject(records, args.train_fraction, args.seed.seed)?
    } else {
        split_dataset(records, args.train_fraction, args.seed.seed)?
    };
    Ok((s.train, s.test))
}

pub fn train(args: TrainArgs) -> CmdResult {
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        dropout_rate: args.dropout,
        seed: args.seed.seed,
        augment: if args.no_augment { AugmentConfig::disabled() } else { AugmentConfig::default() },
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let arch = ArchConfig::by_name(&args.arch)?.with_dropout(cfg.dropout_rate);
    if !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
        return Err(fail(EXIT_CONFIG, format!("--train-fraction {} must lie in (0, 1)", args.train_fraction)));
    }
    println!(
        "earconv train: arch={} input={}x{} lr={} epochs={} batch={} dropout={} beta1={} beta2={} eps={:e} \
         augment={} seed={} split={}",
        arch.name,
        arch.input_size,
        arch.input_size,
        cfg.learning_rate,
        cfg.epochs,
        cfg.batch_size,
        cfg.dropout_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.epsilon,
        if cfg.augment.enabled { "flip+rotate" } else { "off" },
        cfg.seed,
        if args.subject_disjoint { "subject-disjoint" } else { "stratified" },
    );

    let records = load_manifest(&args.manifest)?;
    let (train_idx, test_idx) = split(&records, &args)?;
    let all = ManifestDataset::new(&records, arch.input_size);
    let (train_set, test_set) = (all.subset(&train_idx), all.subset(&test_idx));
    println!("images: {} train, {} test", train_idx.len(), test_idx.len());

    fs::create_dir_all(&args.out)
        .map_err(|e| fail(EXIT_DATA, format!("cannot create {}: {e}", args.out.display())))?;
    let mut model = build::<f32>(&arch, cfg.seed)?;
    let test = (!test_set.is_empty()).then_some(&test_set as &dyn SampleSource);
    let log = train_loop(&mut model, &train_set, test, &cfg, |r, _| {
        let test = r.test_acc.map(|a| format!(" test_acc {a:.4}")).unwrap_or_default();
        println!("epoch {:>3}/{}  loss {:.4}  train_acc {:.4}{test}", r.epoch, cfg.epochs, r.train_loss, r.train_acc);
        Ok(())
    })?;

    let ckpt = args.out.join("model.ckpt");
    save_checkpoint(&model, &ckpt)?;
    write(&args.out.join("train_log.csv"), &log.to_csv())?;
    let report_set = if test_set.is_empty() { &train_set } else { &test_set };
    let report = evaluate(&model, report_set, cfg.batch_size)?;
    write(&args.out.join("report.json"), &report.to_json())?;
    print!("{}", render_report("Proposed Model", &report, model.param_count()));
    println!("wrote {}, train_log.csv and report.json", ckpt.display());
    Ok(())
}

pub fn eval(args: EvalArgs) -> CmdResult {
    let model = open_checkpoint(&args.checkpoint)?;
    let records = load_manifest(&args.manifest)?;
    let data = ManifestDataset::new(&records, model.input_shape()[0]);
    let report = evaluate(&model, &data, args.batch)?;
    print!("{}", render_report("Proposed Model", &report, model.param_count()));
    match &args.out {
        Some(path) => write(path, &report.to_json()),
        None => {
            println!("{}", report.to_json());
            Ok(())
        }
    }
}

pub fn predict(args: PredictArgs) -> CmdResult {
    let model = open_checkpoint(&args.checkpoint)?;
    let x = load_image(&model, &args.image)?;
    let p = model.predict(&x)?;
    let (p0, p1) = (p.data()[0] as f64, p.data()[1] as f64);
    let class = predict_class(p0, p1) as usize;
    println!("{} {p0:.6} {} {p1:.6} → {}", CLASS_NAMES[0], CLASS_NAMES[1], CLASS_NAMES[class]);
    Ok(())
}

pub fn featuremaps(args: FeatureArgs) -> CmdResult {
    let model = open_checkpoint(&args.checkpoint)?;
    // resolve every name before doing any work
    let ids: Vec<String> = args
        .layers
        .iter()
        .map(|name| model.find_layer(name.trim()).map(|i| model.layers()[i].id.clone()))
        .collect::<Result<_, _>>()?;
    let x = load_image(&model, &args.image)?;
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let maps = model.extract_feature_maps(&x, &refs)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| fail(EXIT_DATA, format!("cannot create {}: {e}", args.out.display())))?;
    for (id, map) in ids.iter().zip(&maps) {
        let path = args.out.join(format!("{id}.png"));
        save_feature_grid(map, &path)?;
        let s = map.shape();
        println!("{id}: {}x{}x{} -> {}", s[1], s[2], s[3], path.display());
    }
    Ok(())
}

pub fn inspect(args: InspectArgs) -> CmdResult {
    let layers = match (&args.checkpoint, &args.arch) {
        (Some(path), _) => open_checkpoint(path)?.layers().to_vec(),
        (None, Some(name)) => ArchConfig::by_name(name)?.layers(),
        (None, None) => unreachable!("clap requires one of --checkpoint or --arch"),
    };
    print!("{}", render_architecture(&layers)?);
    Ok(())
}

pub fn synth(args: SynthArgs) -> CmdResult {
    if args.count == 0 || args.size < 8 {
        return Err(fail(EXIT_CONFIG, "--count must be positive and --size at least 8"));
    }
    let manifest = earconv::data::write_synthetic_corpus(&args.out, args.count, args.size, args.seed.seed)?;
    println!("wrote {} images and {}", args.count, manifest.display());
    Ok(())
}
