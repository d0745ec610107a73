use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use earconv::data::{load_manifest, AugmentConfig, ManifestDataset};
use earconv::model::{parse_architecture, save_checkpoint};
use earconv::train::{train_loop, TrainConfig};
use earconv::{build_earnet, build_shrunken, ArchConfig};
use tempfile::TempDir;

fn earconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_earconv"))
        .args(args)
        .env_remove("EARCONV_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn corpus(dir: &TempDir, count: usize) -> PathBuf {
    let out = dir.path().join("data");
    let o = earconv(&["synth", "--out", p(&out), "--count", &count.to_string(), "--size", "40", "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("manifest.csv")
}

#[test]
fn inspect_prints_the_layer_table() {
    let o = earconv(&["inspect", "--arch", "earnet"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("Total params: 2,280,578"));
    let conv1 = text.lines().find(|l| l.contains("Conv_2D_1")).unwrap();
    assert!(conv1.contains("(None, 126, 126, 512)") && conv1.contains("38,912"), "{conv1}");
    assert_eq!(parse_architecture(&text).unwrap(), ArchConfig::earnet().layers());
}

#[test]
fn inspect_reads_checkpoints() {
    let dir = TempDir::new().unwrap();
    let ckpt = dir.path().join("s.ckpt");
    save_checkpoint(&build_shrunken::<f32>(1), &ckpt).unwrap();
    let o = earconv(&["inspect", "--checkpoint", p(&ckpt)]);
    assert!(o.status.success());
    assert_eq!(parse_architecture(&stdout(&o)).unwrap(), ArchConfig::shrunken().layers());
}

#[test]
fn banner_echoes_defaults_before_reading_data() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.csv");
    let o = earconv(&["train", "--manifest", p(&missing), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let banner = stdout(&o);
    for field in ["lr=0.001", "epochs=100", "batch=32", "dropout=0.2"] {
        assert!(banner.contains(field), "{field} missing from {banner}");
    }
}

#[test]
fn exit_code_matrix() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(&dir, 4);
    let ckpt = dir.path().join("m.ckpt");
    save_checkpoint(&build_shrunken::<f32>(2), &ckpt).unwrap();
    let bytes = fs::read(&ckpt).unwrap();
    let truncated = dir.path().join("cut.ckpt");
    fs::write(&truncated, &bytes[..bytes.len() - 10]).unwrap();
    let garbage = dir.path().join("garbage.png");
    fs::write(&garbage, b"not an image").unwrap();
    let out = dir.path().join("out");

    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["train", "--manifest", p(&manifest), "--out", p(&out), "--epochs", "0"], 2),
        (vec!["train", "--manifest", p(&manifest), "--out", p(&out), "--lr", "0"], 2),
        (vec!["train", "--manifest", p(&manifest), "--out", p(&out), "--batch", "0"], 2),
        (vec!["train", "--manifest", p(&manifest), "--out", p(&out), "--arch", "vgg19"], 2),
        (vec!["inspect"], 2),
        (vec!["eval", "--manifest", p(&manifest), "--checkpoint", p(&truncated)], 4),
        (vec!["eval", "--manifest", p(&manifest), "--checkpoint", p(&garbage)], 4),
        (vec!["eval", "--manifest", p(&garbage), "--checkpoint", p(&ckpt)], 3),
        (vec!["predict", "--image", p(&garbage), "--checkpoint", p(&ckpt)], 3),
        (vec!["predict", "--image", p(&garbage), "--checkpoint", p(&out)], 4),
    ];
    for (args, code) in cases {
        let o = earconv(&args);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn unknown_layer_lists_valid_names() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(&dir, 2);
    let image = manifest.parent().unwrap().join("synth_0000_0.png");
    let ckpt = dir.path().join("m.ckpt");
    save_checkpoint(&build_shrunken::<f32>(3), &ckpt).unwrap();
    let o = earconv(&[
        "featuremaps", "--image", p(&image), "--checkpoint", p(&ckpt), "--layers", "conv1,Conv_2D_9", "--out",
        p(&dir.path().join("maps")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Conv_2D_9") && stderr(&o).contains("conv7"));
    assert!(!dir.path().join("maps").exists());
}

#[test]
fn train_eval_predict_end_to_end() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(&dir, 16);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = earconv(&[
            "train", "--manifest", p(&manifest), "--out", p(&out), "--arch", "shrunken", "--epochs", "4", "--batch",
            "4", "--seed", "7",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for artifact in ["model.ckpt", "train_log.csv", "report.json"] {
        assert_eq!(fs::read(a.join(artifact)).unwrap(), fs::read(b.join(artifact)).unwrap(), "{artifact}");
    }
    let log = fs::read_to_string(a.join("train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,train_loss,train_acc,test_acc\n"));
    assert_eq!(log.lines().count(), 5);

    let ckpt = a.join("model.ckpt");
    let eval = |name: &str| {
        let json = dir.path().join(name);
        let o = earconv(&["eval", "--manifest", p(&manifest), "--checkpoint", p(&ckpt), "--out", p(&json)]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(json).unwrap()
    };
    let (j1, j2) = (eval("r1.json"), eval("r2.json"));
    assert_eq!(j1, j2);
    let v: serde_json::Value = serde_json::from_str(&j1).unwrap();
    let total: u64 = v["confusion"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(total, 16);

    let image = manifest.parent().unwrap().join("synth_0003_1.png");
    let predict = || stdout(&earconv(&["predict", "--image", p(&image), "--checkpoint", p(&ckpt)]));
    let first = predict();
    assert_eq!(first, predict());
    let fields: Vec<&str> = first.split_whitespace().collect();
    assert_eq!((fields[0], fields[2], fields[4]), ("female", "male", "→"));
    let (p0, p1): (f64, f64) = (fields[1].parse().unwrap(), fields[3].parse().unwrap());
    assert!((p0 + p1 - 1.0).abs() < 1e-5);
}

#[test]
fn overfit_model_scores_perfectly_on_its_training_set() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(&dir, 8);
    let records = load_manifest(&manifest).unwrap();
    let data = ManifestDataset::new(&records, 36);
    let mut model = build_shrunken::<f32>(0);
    let cfg = TrainConfig { epochs: 150, batch_size: 4, augment: AugmentConfig::disabled(), ..Default::default() };
    train_loop(&mut model, &data, None, &cfg, |_, _| Ok(())).unwrap();
    let ckpt = dir.path().join("fit.ckpt");
    save_checkpoint(&model, &ckpt).unwrap();

    let json = dir.path().join("r.json");
    let o = earconv(&["eval", "--manifest", p(&manifest), "--checkpoint", p(&ckpt), "--out", p(&json)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["accuracy"].as_f64(), Some(1.0));
}

#[test]
fn symmetric_logits_predict_the_tie_class() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(&dir, 2);
    let mut model = build_shrunken::<f32>(4);
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    for (name, t) in names.iter().zip(model.params_mut()) {
        if name.starts_with("dense.") {
            t.data_mut().fill(0.0);
        }
    }
    let ckpt = dir.path().join("sym.ckpt");
    save_checkpoint(&model, &ckpt).unwrap();
    let image = manifest.parent().unwrap().join("synth_0000_0.png");
    let o = earconv(&["predict", "--image", p(&image), "--checkpoint", p(&ckpt)]);
    assert_eq!(stdout(&o).trim(), "female 0.500000 male 0.500000 → male");
}

#[test]
fn feature_grids_for_the_full_network() {
    let dir = TempDir::new().unwrap();
    let ckpt = dir.path().join("full.ckpt");
    save_checkpoint(&build_earnet(5), &ckpt).unwrap();
    // an all-black image and zero biases leave every channel constant
    let black = dir.path().join("black.png");
    image::GrayImage::new(256, 256).save(&black).unwrap();
    let out = dir.path().join("maps");
    let args = ["featuremaps", "--image", p(&black), "--checkpoint", p(&ckpt), "--layers", "Conv_2D_1,conv7", "--out", p(&out)];
    let o = earconv(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let conv1 = image::open(out.join("conv1.png")).unwrap().to_luma8();
    assert_eq!(conv1.dimensions(), (8 * 126, 8 * 126));
    let conv7 = image::open(out.join("conv7.png")).unwrap().to_luma8();
    assert_eq!(conv7.dimensions(), (8 * 4, 8 * 4));
    assert!(conv1.pixels().chain(conv7.pixels()).all(|px| px.0[0] == 128));

    let again = dir.path().join("again");
    let o = earconv(&["featuremaps", "--image", p(&black), "--checkpoint", p(&ckpt), "--layers", "conv7", "--out", p(&again)]);
    assert!(o.status.success());
    assert_eq!(fs::read(out.join("conv7.png")).unwrap(), fs::read(again.join("conv7.png")).unwrap());
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, env_seed: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_earconv"));
        cmd.args(["synth", "--out", p(&out), "--count", "2", "--size", "16"]).env_remove("EARCONV_SEED");
        if let Some(s) = env_seed {
            cmd.env("EARCONV_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(out.join("synth_0000_0.png")).unwrap()
    };
    let from_env = run("env", Some("5"), None);
    assert_eq!(from_env, run("flag", None, Some("5")));
    assert_eq!(run("both", Some("9"), Some("5")), from_env);
    assert_ne!(from_env, run("other", None, Some("6")));
}
