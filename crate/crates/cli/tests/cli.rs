use std::path::Path;

use qcfd_cli::report::{read_score_lines, ReportDocument, MANIFEST};
use qcfd_cli::run_with;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str], env_seed: Option<&str>) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("qcfd").chain(args.iter().copied());
    let code = run_with(argv, env_seed, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn ok(args: &[&str]) -> Run {
    let r = run(args, None);
    assert_eq!(r.code, 0, "{args:?}: {}", r.err);
    r
}

fn cat<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<&'a str> {
    [a, b].concat()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TABLE: &str = "model,sigma2,delta,c_ratio,e_rms
real,0.031,,,
mi-gan,0.042,0.214,0.56,11.2
ours-a,0.039,0.187,0.68,9.6
ours,0.033,0.157,0.91,3.8
";

#[test]
fn scores_reproduce_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.csv");
    std::fs::write(&input, TABLE).unwrap();
    let printed = ok(&["scores", "--input", s(&input)]);
    assert!(printed
        .out
        .starts_with("model,sigma2,delta,c_ratio,e_rms,r_sigma,rho_delta,gamma,kappa"));
    ok(&["scores", "--input", s(&input), "--out", s(dir.path())]);
    let lines = read_score_lines(&dir.path().join("scores.csv")).unwrap();
    let expected = [
        [1.000, 0.000, 1.000, 1.000],
        [0.727, 0.126, 1.214, 0.857],
        [0.182, 0.266, 1.625, 0.339],
    ];
    assert_eq!(lines[0].model, "real");
    for (l, e) in lines[1..].iter().zip(expected) {
        let got = [l.r_sigma, l.rho_delta, l.gamma, l.kappa].map(Option::unwrap);
        for (g, x) in got.iter().zip(e) {
            assert!((g - x).abs() <= 1e-3, "{}: {got:?}", l.model);
        }
    }
}

#[test]
fn usage_errors_exit_one() {
    let r = run(&["frobnicate"], None);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("Usage"), "{}", r.err);
    assert_eq!(run(&[], None).code, 1);
    assert_eq!(run(&["scores"], None).code, 1);
    assert_eq!(
        run(&["simulate", "--out", "x", "--set", "novalue"], None).code,
        1
    );
    let help = run(&["--help"], None);
    assert_eq!(help.code, 0);
    assert!(help.out.contains("simulate"));
}

#[test]
fn data_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let beats = dir.path().join("beats.csv");
    std::fs::write(&beats, "label,a,b\n0,1,2\n1,1,2\n0,1,2\n1,1\n").unwrap();
    let out = dir.path().join("pre");
    let r = run(
        &["preprocess", "--beats", s(&beats), "--out", s(&out)],
        None,
    );
    assert_eq!(r.code, 2);
    assert!(r.err.contains("row 5"), "{}", r.err);
    assert_eq!(r.err.trim_end().lines().count(), 1);
    assert!(!out.exists());

    let r = run(
        &["simulate", "--out", s(&out), "--set", "train.epoch=3"],
        None,
    );
    assert_eq!(r.code, 2, "{}", r.err);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[sim]\nn_per_clas = 4\n").unwrap();
    assert_eq!(
        run(&["simulate", "--out", s(&out), "--config", s(&cfg)], None).code,
        2
    );
    assert_eq!(run(&["simulate", "--out", s(&out)], Some("abc")).code, 2);
    let missing = dir.path().join("nope.csv");
    assert_eq!(run(&["scores", "--input", s(&missing)], None).code, 2);
}

#[test]
fn seed_precedence_is_file_env_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 1\n[sim]\nn_per_class = 2\n").unwrap();
    let beats = |name: &str, env: Option<&str>, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", s(&cfg), "--out", s(&out)];
        args.extend_from_slice(extra);
        assert_eq!(run(&args, env).code, 0);
        std::fs::read(out.join("beats.csv")).unwrap()
    };
    let file = beats("a", None, &[]);
    let env = beats("b", Some("2"), &[]);
    let flag = beats("c", Some("2"), &["--seed", "1"]);
    let set = beats("d", Some("1"), &["--set", "seed=2"]);
    assert_ne!(file, env);
    assert_eq!(file, flag);
    assert_eq!(env, set);
}

#[test]
fn self_comparison_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let pre = dir.path().join("pre");
    let rep = dir.path().join("report");
    let small = [
        "--set",
        "sim.n_per_class=24",
        "--set",
        "train.reference_epochs=10",
    ];
    ok(&cat(&["simulate", "--out", s(&sim)], &small));
    ok(&cat(
        &[
            "preprocess",
            "--beats",
            s(&sim.join("beats.csv")),
            "--fiducials",
            s(&sim.join("fiducials.csv")),
            "--out",
            s(&pre),
        ],
        &small,
    ));
    let same = format!("same={}", s(&pre));
    ok(&cat(
        &[
            "evaluate",
            "--real",
            s(&pre),
            "--synth",
            &same,
            "--out",
            s(&rep),
        ],
        &small,
    ));

    let mut files: Vec<String> = std::fs::read_dir(&rep)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    let mut manifest: Vec<String> = MANIFEST.iter().map(|m| m.to_string()).collect();
    manifest.sort();
    assert_eq!(files, manifest);

    let doc: ReportDocument =
        serde_json::from_str(&std::fs::read_to_string(rep.join("report.json")).unwrap()).unwrap();
    let set = &doc.report.sets[0];
    assert_eq!(set.raw.delta, 0.0);
    assert_eq!(set.raw.e_rms, 0.0);
    assert!((set.raw.c_ratio - 1.0).abs() <= 0.05);
    assert_eq!(doc.config.sim.n_per_class, 24);
    assert_eq!(doc.config_hash, doc.config.hash());
    let scores = read_score_lines(&rep.join("scores.csv")).unwrap();
    assert_eq!(scores[1].r_sigma, Some(0.0));
    assert_eq!(scores[1].delta, Some(0.0));
}

fn pipeline(root: &Path, args: &[&str]) {
    let sim = root.join("sim");
    let pre = root.join("pre");
    let model = root.join("model");
    let gen = root.join("gen");
    let rep = root.join("report");
    ok(&cat(&["simulate", "--out", s(&sim)], args));
    ok(&cat(
        &[
            "preprocess",
            "--beats",
            s(&sim.join("beats.csv")),
            "--fiducials",
            s(&sim.join("fiducials.csv")),
            "--out",
            s(&pre),
        ],
        args,
    ));
    ok(&cat(
        &["train", "--data", s(&pre), "--out", s(&model)],
        args,
    ));
    let ckpt = model.join("checkpoint.json");
    ok(&cat(
        &["generate", "--checkpoint", s(&ckpt), "--out", s(&gen)],
        args,
    ));
    let synth = format!("model={}", s(&gen));
    ok(&cat(
        &[
            "evaluate",
            "--real",
            s(&model.join("test")),
            "--synth",
            &synth,
            "--checkpoint",
            s(&ckpt),
            "--out",
            s(&rep),
        ],
        args,
    ));
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const TINY: [&str; 16] = [
    "--set",
    "sim.n_per_class=48",
    "--set",
    "train.epochs=2",
    "--set",
    "train.batch=16",
    "--set",
    "train.critic_steps=1",
    "--set",
    "train.probe_per_class=16",
    "--set",
    "train.reference_epochs=5",
    "--seed",
    "3",
    "--set",
    "eval.hist_bins=5",
];

#[test]
fn full_pipeline_is_bit_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), &TINY);
    pipeline(b.path(), &TINY);
    let ta = tree(a.path());
    assert_eq!(ta, tree(b.path()));
    let names: Vec<&str> = ta.iter().map(|(n, _)| n.as_str()).collect();
    for f in [
        "model/checkpoint.json",
        "model/history.csv",
        "model/test/t.tensor",
        "gen/s.tensor",
        "report/report.json",
    ] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
    let history = std::fs::read_to_string(a.path().join("model/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
}

#[test]
fn diverging_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let pre = dir.path().join("pre");
    let args = [&TINY[..], &["--set", "train.learning_rate=1e300"]].concat();
    ok(&cat(&["simulate", "--out", s(&sim)], &args));
    ok(&cat(
        &[
            "preprocess",
            "--beats",
            s(&sim.join("beats.csv")),
            "--out",
            s(&pre),
        ],
        &args,
    ));
    let r = run(
        &cat(
            &[
                "train",
                "--data",
                s(&pre),
                "--out",
                s(&dir.path().join("m")),
            ],
            &args,
        ),
        None,
    );
    assert_eq!(r.code, 3, "{}", r.err);
    assert!(r.err.contains("non-finite"), "{}", r.err);
}
