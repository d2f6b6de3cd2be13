use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use vesselfuse::io::{read_hypervolume, read_mask, read_volume, write_mask};
use vesselfuse::BinaryMask;

fn vf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vesselfuse")).args(args).env("RUST_LOG", "info").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn phantom(dir: &Path, kind: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(kind);
    let mut args = vec!["phantom", kind, "--out", s(&out)];
    args.extend_from_slice(extra);
    let o = vf(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn exit_codes() {
    assert_eq!(code(&vf(&["--help"])), 0);
    assert_eq!(code(&vf(&["--version"])), 0);
    assert_eq!(code(&vf(&["frobnicate"])), 1);
    assert_eq!(code(&vf(&["phantom", "tube"])), 1, "no output directory");
    let tmp = tempfile::tempdir().unwrap();
    let o = vf(&["enhance", "/nonexistent/scan.nii.gz", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent/scan.nii.gz"), "{}", stderr(&o));

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[filters]\nscale = [1.0]\n").unwrap();
    let o = vf(&["--config", s(&cfg), "phantom", "tube", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("scale"), "{}", stderr(&o));
    std::fs::write(&cfg, "[filters]\nscales = [2.0, 1.0]\n").unwrap();
    assert_eq!(code(&vf(&["--config", s(&cfg), "phantom", "tube", "--out", s(tmp.path())])), 1);
    assert_eq!(code(&vf(&["phantom", "tube", "--radius", "-1", "--out", s(tmp.path())])), 1);
}

#[test]
fn phantom_tube_volume_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let a = phantom(tmp.path(), "tube", &[]);
    let meta = json(&a.join("meta.json"));
    let vox = 0.5f64.powi(3);
    let analytic = std::f64::consts::PI * 4.0 * 40.0 / vox;
    let count = read_mask(a.join("gt.nii.gz")).unwrap().count() as f64;
    assert_eq!(meta["voxel_count"].as_f64().unwrap(), count);
    assert!((count - analytic).abs() / analytic < 0.03, "{count} vs {analytic}");
    assert_eq!(meta["segments"][0]["radius"], 2.0);

    let o1 = tmp.path().join("n1");
    let o2 = tmp.path().join("n2");
    for o in [&o1, &o2] {
        assert_eq!(code(&vf(&["phantom", "noisy-tube", "--seed", "9", "--out", s(o)])), 0);
    }
    for f in ["volume.nii.gz", "gt.nii.gz", "meta.json", "provenance.json"] {
        assert_eq!(std::fs::read(o1.join(f)).unwrap(), std::fs::read(o2.join(f)).unwrap(), "{f}");
    }
    let o3 = tmp.path().join("n3");
    assert_eq!(code(&vf(&["phantom", "noisy-tube", "--seed", "10", "--out", s(&o3)])), 0);
    assert_ne!(std::fs::read(o1.join("volume.nii.gz")).unwrap(), std::fs::read(o3.join("volume.nii.gz")).unwrap());
    assert_eq!(json(&o1.join("meta.json"))["noise_sigma"], 0.1);
}

#[test]
fn resample_spacing_and_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let p = phantom(tmp.path(), "tube", &[]);
    let out = tmp.path().join("r.nii.gz");
    let o = vf(&["resample", s(&p.join("volume.nii.gz")), "--spacing", "auto", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("target spacing [0.5, 0.5, 0.5]"), "{}", stderr(&o));
    assert_eq!(read_volume::<f32>(&out).unwrap().spacing(), [0.5; 3]);
    assert!(tmp.path().join("r.provenance.json").exists());

    let o = vf(&["resample", s(&p.join("volume.nii.gz")), "--spacing", "0.5,0.75,1", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let v = read_volume::<f32>(&out).unwrap();
    assert_eq!(v.spacing(), [0.5, 0.75, 1.0]);
    assert_eq!(v.dims(), [25, 17, 48]);

    let m = tmp.path().join("m.nii.gz");
    let o = vf(&["resample", s(&p.join("gt.nii.gz")), "--spacing", "0.7", "--mask-mode", "nn", "--out", s(&m)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let vol = read_volume::<f32>(&m).unwrap();
    assert!(vol.data().iter().all(|&x| x == 0.0 || x == 1.0));
    let o = vf(&["resample", s(&p.join("gt.nii.gz")), "--spacing", "0.7", "--mask-mode", "bspline", "--out", s(&m)]);
    assert_eq!(code(&o), 0);
    assert!(read_volume::<f32>(&m).unwrap().data().iter().all(|&x| x == 0.0 || x == 1.0));
    assert_eq!(code(&vf(&["resample", s(&p.join("gt.nii.gz")), "--spacing", "0,1,1", "--out", s(&m)])), 1);
}

#[test]
fn enhance_writes_seven_channels() {
    let tmp = tempfile::tempdir().unwrap();
    let p = phantom(tmp.path(), "noisy-tube", &[]);
    let out = tmp.path().join("enh");
    let o = vf(&["enhance", s(&p.join("volume.nii.gz")), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("built-in defaults"), "{err}");
    assert!(err.contains("RORPO took"), "{err}");
    let hv = read_hypervolume::<f32>(out.join("hypervolume.nii.gz")).unwrap();
    assert_eq!(hv.num_channels(), 7);
    let side = json(&out.join("hypervolume.json"));
    assert_eq!(side["channels"], serde_json::json!(["Original", "Frangi", "Jerman", "Sato", "Zhang", "Meijering", "RORPO"]));
    let prov = json(&out.join("provenance.json"));
    assert_eq!(prov["tool"], "vesselfuse");
    assert_eq!(prov["inputs"]["input"].as_str().unwrap().len(), 64);
    assert!(prov["config_sha256"].is_string());

    let o = vf(&["enhance", s(&p.join("volume.nii.gz")), "--out", s(&out), "--channels", "frangi,rorpo"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("fixed 7-channel contract"), "{}", stderr(&o));
}

#[test]
fn config_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let p = phantom(tmp.path(), "tube", &[]);
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, format!("output_dir = {:?}\n[filters]\nscales = [1.0, 2.0]\n", s(&tmp.path().join("from_cfg")))).unwrap();
    let o = vf(&["--config", s(&cfg), "enhance", s(&p.join("volume.nii.gz")), "--scales", "1.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let prov = json(&tmp.path().join("from_cfg/provenance.json"));
    assert_eq!(prov["parameters"]["scales"], serde_json::json!([1.5]));
}

#[test]
fn partition_y_and_presets() {
    let tmp = tempfile::tempdir().unwrap();
    let y = phantom(tmp.path(), "y", &[]);
    assert_eq!(json(&y.join("meta.json"))["junctions"].as_array().unwrap().len(), 1);

    let out = tmp.path().join("ircad");
    let o = vf(&["partition", s(&y.join("gt.nii.gz")), "--preset", "ircad", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let part = json(&out.join("partition.json"));
    assert_eq!(part["summary"]["branches"], 3);
    assert_eq!(part["summary"]["bifurcations"], 1);
    assert_eq!(part["summary"]["branches_per_class"]["small"], 2);
    assert_eq!(part["summary"]["branches_per_class"]["large"], 1);
    assert_eq!(part["intervals"]["large"], "]6,+∞[");
    let hist: usize = part["summary"]["size_histogram"].as_array().unwrap().iter().map(|b| b["count"].as_u64().unwrap() as usize).sum();
    assert_eq!(hist, 3);
    let gt = read_mask(y.join("gt.nii.gz")).unwrap();
    let union = ["m_small", "m_medium", "m_large"]
        .iter()
        .fold(BinaryMask::empty(*gt.geometry()), |acc, n| acc.or(&read_mask(out.join(format!("{n}.nii.gz"))).unwrap()));
    assert_eq!(union, gt);
    assert!(read_mask(out.join("m_bif.nii.gz")).unwrap().is_subset_of(&gt));
    let graph = json(&out.join("graph.json"));
    assert_eq!(graph["bifurcations"].as_array().unwrap().len(), 1);

    let out = tmp.path().join("bullitt");
    assert_eq!(code(&vf(&["partition", s(&y.join("gt.nii.gz")), "--preset", "bullitt", "--out", s(&out)])), 0);
    assert!(out.join("m_small.nii.gz").exists() && out.join("m_medium.nii.gz").exists());
    assert!(!out.join("m_large.nii.gz").exists());

    let cfg = tmp.path().join("custom.toml");
    std::fs::write(&cfg, "[partition]\npreset = \"custom\"\nclasses = [\"small\", \"large\"]\ncuts = [4.0]\nbifurcation_radius = { fixed = 3.0 }\n").unwrap();
    let out = tmp.path().join("custom");
    let o = vf(&["--config", s(&cfg), "partition", s(&y.join("gt.nii.gz")), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let part = json(&out.join("partition.json"));
    assert_eq!(part["intervals"]["small"], "[0,4]");
    assert_eq!(part["intervals"]["large"], "]4,+∞[");
    assert_eq!(part["bifurcation_radius"], serde_json::json!({ "fixed": 3.0 }));

    let empty = tmp.path().join("empty.nii.gz");
    write_mask(&BinaryMask::empty(*gt.geometry()), &empty).unwrap();
    assert_eq!(code(&vf(&["partition", s(&empty), "--out", s(&tmp.path().join("e"))])), 2);
}

#[test]
fn evaluate_single_and_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let t = phantom(tmp.path(), "two-tubes", &["--radius", "1.2", "--radius2", "4.5"]);
    let gt_path = t.join("gt.nii.gz");
    let gt = read_mask(&gt_path).unwrap();

    let rep = tmp.path().join("same/report.json");
    let o = vf(&["evaluate", s(&gt_path), s(&gt_path), "--preset", "ircad", "--intensity", s(&t.join("volume.nii.gz")), "--out", s(&rep)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&rep);
    for region in r["regions"].as_array().unwrap() {
        if region["present"] == true {
            assert_eq!(region["dice"], 1.0, "{region}");
            assert_eq!(region["cl_dice"], 1.0, "{region}");
        }
    }
    assert_eq!(r["psnr"]["values"]["intensity"], "inf");
    let csv = std::fs::read_to_string(tmp.path().join("same/report.csv")).unwrap();
    assert!(csv.starts_with("case,region,metric,value\n"));
    assert!(tmp.path().join("same/report.provenance.json").exists());

    // Removing a 3-slice slab: Dice follows from voxel counts alone.
    let cut = BinaryMask::from_fn(*gt.geometry(), |_, _, z| (40..43).contains(&z));
    let pred = gt.minus(&cut);
    let pred_path = tmp.path().join("pred.nii.gz");
    write_mask(&pred, &pred_path).unwrap();
    let rep = tmp.path().join("cut.json");
    assert_eq!(code(&vf(&["evaluate", s(&pred_path), s(&gt_path), "--out", s(&rep)])), 0);
    let (n, k) = (gt.count() as f64, pred.count() as f64);
    let got = json(&rep)["regions"][0]["dice"].as_f64().unwrap();
    assert!((got - 2.0 * k / (n + k)).abs() < 1e-12);

    // Poor scores are data, not errors.
    let none = tmp.path().join("none.nii.gz");
    write_mask(&BinaryMask::empty(*gt.geometry()), &none).unwrap();
    let rep = tmp.path().join("none.json");
    assert_eq!(code(&vf(&["evaluate", s(&none), s(&gt_path), "--out", s(&rep)])), 0);
    assert_eq!(json(&rep)["regions"][0]["dice"], 0.0);

    // Mismatched geometry is a data error.
    let other = phantom(tmp.path(), "tube", &[]);
    let o = vf(&["evaluate", s(&other.join("gt.nii.gz")), s(&gt_path), "--out", s(&rep)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let batch = tmp.path().join("batch");
    for (case, p) in [("a", &gt_path), ("b", &pred_path), ("c", &none)] {
        std::fs::create_dir_all(batch.join(case)).unwrap();
        std::fs::copy(p, batch.join(case).join("pred.nii.gz")).unwrap();
        std::fs::copy(&gt_path, batch.join(case).join("gt.nii.gz")).unwrap();
    }
    let rep = tmp.path().join("agg/batch.json");
    let o = vf(&["evaluate", "--batch", s(&batch), "--preset", "ircad", "--out", s(&rep)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&rep);
    assert_eq!(r["cases"].as_array().unwrap().len(), 3);
    let global = &r["aggregate"]["regions"][0];
    assert_eq!(global["region"], "global");
    assert_eq!(global["dice"]["n"], 3);
    let want = (1.0 + 2.0 * k / (n + k)) / 3.0;
    assert!((global["dice"]["mean"].as_f64().unwrap() - want).abs() < 1e-12);
    let agg_csv = std::fs::read_to_string(tmp.path().join("agg/batch_aggregate.csv")).unwrap();
    assert!(agg_csv.starts_with("region,metric,n,mean,std\n"));
    assert_eq!(code(&vf(&["evaluate", s(&gt_path), "--out", s(&rep)])), 1);
}
