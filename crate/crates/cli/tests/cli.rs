use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn projconn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_projconn"))
        .env_remove("PROJCONN_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = projconn(args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        Work {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, rel: &str) -> String {
        self.dir.path().join(rel).to_string_lossy().into_owned()
    }

    fn read(&self, rel: &str) -> String {
        fs::read_to_string(self.dir.path().join(rel)).unwrap()
    }

    fn json(&self, rel: &str) -> Value {
        serde_json::from_str(&self.read(rel)).unwrap()
    }

    fn write(&self, rel: &str, text: &str) -> String {
        let p = self.dir.path().join(rel);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn gap_fixture(&self) {
        ok(&["synth", "--preset", "gap", "--out", &self.path("s/gap")]);
    }
}

fn metrics(csv: &str) -> Vec<(String, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

const LINE_SWC: &str = "# straight line along z\n1 0 16 16 0 1 -1\n2 0 16 16 31 1 1\n";

#[test]
fn gengt_writes_volume_and_records_defaults() {
    let w = Work::new();
    let swc = w.write("line.swc", LINE_SWC);
    ok(&[
        "gengt",
        "--graph",
        &swc,
        "--dims",
        "32,32,32",
        "--out",
        &w.path("out/gt"),
    ]);
    assert_eq!(
        fs::metadata(w.path("out/gt.vol")).unwrap().len(),
        32 * 32 * 32 * 4
    );
    let side = w.json("out/gt.json");
    assert_eq!(side["kind"], "ground-truth");
    assert_eq!(side["dims"], serde_json::json!([32, 32, 32]));

    let run = w.json("out/run.json");
    assert_eq!(run["version"], env!("CARGO_PKG_VERSION"));
    let cmd = &run["command"]["gengt"];
    assert_eq!(cmd["dmax"], 15.0);
    assert!(Path::new(cmd["graph"].as_str().unwrap()).is_absolute());
    assert!(run.get("threads").is_none());
}

#[test]
fn malformed_swc_exits_2_and_names_the_line() {
    let w = Work::new();
    let swc = w.write("bad.swc", "1 0 1 1 1 1 -1\n# comment\n2 0 3 nope 1 1 1\n");
    let o = projconn(&[
        "gengt",
        "--graph",
        &swc,
        "--dims",
        "8,8,8",
        "--out",
        &w.path("gt"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.swc:3"), "{err}");
}

#[test]
fn bad_arguments_exit_2() {
    let w = Work::new();
    let o = projconn(&[
        "gengt",
        "--graph",
        "x.swc",
        "--dims",
        "8,8",
        "--out",
        &w.path("gt"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = projconn(&[
        "loss",
        "--pred",
        &w.path("missing"),
        "--gt",
        &w.path("missing"),
        "--out",
        &w.path("r.json"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn loss_on_the_gap_fixture() {
    let w = Work::new();
    w.gap_fixture();
    let (pred, gt) = (w.path("s/gap_pred"), w.path("s/gap_gt"));

    ok(&[
        "loss",
        "--pred",
        &gt,
        "--gt",
        &gt,
        "--out",
        &w.path("truth/r.json"),
    ]);
    assert_eq!(w.json("truth/r.json")["total"], 0.0);

    ok(&[
        "loss",
        "--pred",
        &pred,
        "--gt",
        &gt,
        "--out",
        &w.path("l/r.json"),
        "--grad-out",
        &w.path("l/grad"),
        "--events-out",
        &w.path("l/events.csv"),
    ]);
    let r = w.json("l/r.json");
    assert!(r["axes"]["x"]["l_conn"].as_f64().unwrap() > 0.0);
    assert!(r["axes"]["y"]["l_conn"].as_f64().unwrap() > 0.0);
    assert_eq!(r["axes"]["z"]["l_conn"], 0.0);
    assert_eq!(
        (r["alpha"].as_f64(), r["beta"].as_f64()),
        (Some(1e-3), Some(0.1))
    );
    assert_eq!(w.json("l/grad.json")["kind"], "gradient");
    assert!(w
        .read("l/events.csv")
        .starts_with("axis,window_x,window_y,qx,qy,value,cross_pairs,same_pairs\n"));
}

#[test]
fn two_dimensional_mode_needs_three_annotations() {
    let w = Work::new();
    w.gap_fixture();
    let plane = w.write("plane.swc", "1 0 16 0 0 1 -1\n2 0 16 31 0 1 1\n");
    let two = format!("{plane},{plane}");
    let o = projconn(&[
        "loss",
        "--pred",
        &w.path("s/gap_pred"),
        "--mode",
        "2d",
        "--gt2d",
        &two,
        "--out",
        &w.path("r.json"),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let three = format!("{plane},{plane},{plane}");
    ok(&[
        "loss",
        "--pred",
        &w.path("s/gap_pred"),
        "--mode",
        "2d",
        "--gt2d",
        &three,
        "--out",
        &w.path("l2/r.json"),
    ]);
    assert!(w.json("l2/r.json")["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn optimize_traces_every_step() {
    let w = Work::new();
    w.gap_fixture();
    ok(&[
        "optimize",
        "--pred",
        &w.path("s/gap_pred"),
        "--gt",
        &w.path("s/gap_gt"),
        "--withhold",
        &w.path("s/gap_withheld"),
        "--steps",
        "20",
        "--rate",
        "0.5",
        "--out",
        &w.path("o/vol"),
        "--trace-out",
        &w.path("o/trace.csv"),
    ]);
    let trace = w.read("o/trace.csv");
    assert_eq!(trace.lines().count(), 1 + 21);
    assert!(trace.starts_with("step,total,mse,"));
    assert_eq!(w.json("o/vol.json")["kind"], "predicted");
}

#[test]
fn eval_orders_perfect_above_gap() {
    let w = Work::new();
    w.gap_fixture();
    let swc = w.path("s/gap.swc");
    ok(&[
        "eval",
        "--pred-vol",
        &w.path("s/gap_gt"),
        "--gt-graph",
        &swc,
        "--out",
        &w.path("perfect/m.csv"),
    ]);
    ok(&[
        "eval",
        "--pred-vol",
        &w.path("s/gap_pred"),
        "--gt-graph",
        &swc,
        "--out",
        &w.path("gap/m.csv"),
    ]);
    let perfect = metrics(&w.read("perfect/m.csv"));
    assert!(perfect.iter().all(|(_, v)| *v == 1.0), "{perfect:?}");
    let gap = metrics(&w.read("gap/m.csv"));
    let get = |m: &[(String, f64)], k: &str| m.iter().find(|(n, _)| n == k).unwrap().1;
    assert!(get(&gap, "apls") < 1.0 && get(&gap, "tlts") < 1.0);
    assert_eq!(get(&gap, "correctness"), 1.0);

    // a predicted graph identical to the annotation scores 1 everywhere
    ok(&[
        "eval",
        "--pred-graph",
        &swc,
        "--dims",
        "32,32,32",
        "--gt-graph",
        &swc,
        "--seed",
        "9",
        "--out",
        &w.path("graph/m.csv"),
    ]);
    assert!(metrics(&w.read("graph/m.csv"))
        .iter()
        .all(|(_, v)| *v == 1.0));
    let o = projconn(&[
        "eval",
        "--pred-graph",
        &swc,
        "--gt-graph",
        &swc,
        "--out",
        &w.path("nodims/m.csv"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_with_a_fixed_seed_is_byte_identical() {
    let w = Work::new();
    w.gap_fixture();
    let run = |out: &str| {
        ok(&[
            "eval",
            "--pred-vol",
            &w.path("s/gap_pred"),
            "--gt-graph",
            &w.path("s/gap.swc"),
            "--seed",
            "4",
            "--pairs",
            "20",
            "--out",
            &w.path(out),
        ]);
        fs::read(w.path(out)).unwrap()
    };
    assert_eq!(run("a/m.csv"), run("b/m.csv"));
}

#[test]
fn gradcheck_exit_codes() {
    let w = Work::new();
    for mode in ["3d", "2d"] {
        let out = w.path(&format!("{mode}/r.json"));
        ok(&[
            "gradcheck",
            "--size",
            "8",
            "--seed",
            "1",
            "--mode",
            mode,
            "--out",
            &out,
        ]);
        let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!(r["max_rel_error"].as_f64().unwrap() < 1e-3);
        assert_eq!(r["passed"], true);
    }
    let o = projconn(&[
        "gradcheck",
        "--size",
        "8",
        "--corrupt-gradient",
        "--out",
        &w.path("bad/r.json"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(w.json("bad/r.json")["passed"], false);
}

#[test]
fn synth_from_a_scene_file() {
    let w = Work::new();
    let scene = w.write(
        "scene.json",
        r#"{"dims":[16,16,16],"tubes":[{"points":[[8,8,0],[8,8,15]],"radius":2}],
            "corruptions":[{"type":"gap","center":[8,8,8],"length":4}]}"#,
    );
    ok(&["synth", "--scene", &scene, "--out", &w.path("out/t")]);
    for f in [
        "t_gt.vol",
        "t_pred.vol",
        "t_withheld.vol",
        "t.swc",
        "run.json",
    ] {
        assert!(w.dir.path().join("out").join(f).exists(), "{f}");
    }
    let bad = w.write(
        "bad.json",
        r#"{"dims":[16,16,16],"tubes":[{"points":[[8,8,0]],"radius":2}]}"#,
    );
    assert_eq!(
        projconn(&["synth", "--scene", &bad, "--out", &w.path("bad/t")])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn project_writes_a_pgm() {
    let w = Work::new();
    w.gap_fixture();
    ok(&[
        "project",
        "--vol",
        &w.path("s/gap_pred"),
        "--axis",
        "x",
        "--out",
        &w.path("p/x.pgm"),
    ]);
    let bytes = fs::read(w.path("p/x.pgm")).unwrap();
    let header = b"P5\n32 32\n65535\n";
    assert!(bytes.starts_with(header));
    assert_eq!(bytes.len(), header.len() + 32 * 32 * 2);
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.clone(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn replay_reproduces_outputs_from_another_directory() {
    let w = Work::new();
    w.gap_fixture();
    ok(&[
        "loss",
        "--pred",
        &w.path("s/gap_pred"),
        "--gt",
        &w.path("s/gap_gt"),
        "--out",
        &w.path("l/r.json"),
        "--grad-out",
        &w.path("l/grad"),
    ]);
    let before = files(&w.dir.path().join("l"));
    let record = w.path("loss.run.json");
    fs::copy(w.path("l/run.json"), &record).unwrap();
    fs::remove_dir_all(w.path("l")).unwrap();

    let o = Command::new(env!("CARGO_BIN_EXE_projconn"))
        .current_dir(std::env::temp_dir())
        .env("PROJCONN_THREADS", "1")
        .args(["replay", &record])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&w.dir.path().join("l")), before);
}

#[test]
fn replay_rejects_missing_or_invalid_records() {
    let w = Work::new();
    assert_eq!(
        projconn(&["replay", &w.path("nope.json")]).status.code(),
        Some(2)
    );
    let bad = w.write(
        "run.json",
        r#"{"tool":"projconn","version":"0","command":{"unknown":{}}}"#,
    );
    assert_eq!(projconn(&["replay", &bad]).status.code(), Some(2));
}
