use std::fs;
use std::path::Path;

use milstat::cli::run;
use milstat::data::TaskKind;
use milstat::format::read_predictions_file;
use milstat::reader::{write_readers, Condition, Experience, ReaderObservation, Sequence};
use milstat::report::manifest_path;
use milstat::rng::CounterRng;
use milstat::synth::SynthConfig;
use serde_json::Value;

fn ok(args: &[&str]) {
    let mut argv = vec!["milstat", "--seed", "3"];
    argv.extend_from_slice(args);
    assert_eq!(run(argv.iter().copied()), 0, "milstat {}", args.join(" "));
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn synth(dir: &Path, task: TaskKind) -> String {
    let cfg = SynthConfig { n_cases: 30, n_patches_min: 20, n_patches_max: 40, dim: 8, ..SynthConfig::new(task, 1) };
    let cfg_path = dir.join("synth.json");
    fs::write(&cfg_path, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let out = dir.join("bags");
    ok(&["synth", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    out.to_string_lossy().into_owned()
}

#[test]
fn classification_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let bags = synth(dir.path(), TaskKind::Binary);
    assert!(Path::new(&bags).join("ground_truth.json").exists());

    ok(&["train", "--bags", &bags, "--task", "binary", "--hidden", "4", "--max-epochs", "30", "--out", &p("m.pfm")]);
    let train_report = json(Path::new(&p("m.pfm.train.json")));
    assert!(train_report["best_epoch"].as_u64().unwrap() < 30);
    assert!(manifest_path(Path::new(&p("m.pfm"))).exists());

    ok(&["predict", "--model", &p("m.pfm"), "--bags", &bags, "--split", &p("m.pfm.split.csv"), "--subset", "test", "--out", &p("test.csv")]);
    ok(&["predict", "--model", &p("m.pfm"), "--bags", &bags, "--out", &p("all.csv")]);
    let test = read_predictions_file(p("test.csv")).unwrap();
    let all = read_predictions_file(p("all.csv")).unwrap();
    assert_eq!(all.len(), 60);
    assert_eq!(test.len(), 12);

    let bag = fs::read_dir(&bags).unwrap().map(|e| e.unwrap().path()).find(|f| f.extension().is_some_and(|x| x == "pfb")).unwrap();
    ok(&["attend", "--model", &p("m.pfm"), "--bag", bag.to_str().unwrap(), "--top", "5", "--out", &p("attn.csv")]);
    let attn = fs::read_to_string(p("attn.csv")).unwrap();
    assert_eq!(attn.lines().count(), 6);
    assert!(attn.starts_with("patch_index,slide_id,x,y,patch_size,weight,rank"));

    ok(&["eval", "--pred", &p("all.csv"), "--reps", "100", "--report", &p("eval.json")]);
    let eval = json(Path::new(&p("eval.json")));
    let auc = eval["metrics"]["macro_auc"]["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    assert!(fs::read_to_string(p("eval.json.metrics.csv")).unwrap().contains("macro_auc"));

    ok(&["bootstrap", "--pred", &p("all.csv"), "--metric", "macro_auc", "--reps", "100", "--out", &p("boot.json")]);
    assert_eq!(json(Path::new(&p("boot.json")))["result"]["replicates"].as_array().unwrap().len(), 100);

    ok(&["compare", "--pred-a", &p("all.csv"), "--pred-b", &p("all.csv"), "--metric", "macro_auc", "--metric", "macro_sensitivity", "--reps", "100", "--holm", "--out", &p("cmp.json")]);
    let cmp = fs::read_to_string(p("cmp.json")).unwrap();
    assert!(cmp.contains("p_holm"));

    ok(&["dca", "--pred", &p("all.csv"), "--out", &p("dca.csv")]);
    let dca = fs::read_to_string(p("dca.csv")).unwrap();
    assert_eq!(dca.lines().next().unwrap(), "p_t,nb_model,nb_all,nb_none");
    assert_eq!(dca.lines().count(), 100);

    ok(&["triage", "--pred", &p("all.csv"), "--ppv-floor", "0.5", "--spec-floor", "0.9", "--out", &p("t1.json")]);
    ok(&["triage", "--pred", &p("test.csv"), "--ppv-floor", "0.5", "--out", &p("t2.json")]);
    ok(&["triage-pool", "--points", &p("t1.json"), &p("t2.json"), "--out", &p("pool.json")]);
    let t1 = json(Path::new(&p("t1.json")));
    let t2 = json(Path::new(&p("t2.json")));
    let pool = json(Path::new(&p("pool.json")));
    let deferred = |v: &Value| v["point"]["deferred_count"].as_u64().unwrap();
    assert_eq!(pool["pooled"]["deferred"].as_u64().unwrap(), deferred(&t1) + deferred(&t2));
    assert!(t1["missed_at_specificity"].is_object());
}

#[test]
fn survival_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let bags = synth(dir.path(), TaskKind::Survival { bins: 4 });
    ok(&["train", "--bags", &bags, "--task", "survival:4", "--hidden", "4", "--max-epochs", "20", "--patience", "10", "--out", &p("s.pfm")]);
    ok(&["predict", "--model", &p("s.pfm"), "--bags", &bags, "--out", &p("s.csv")]);
    ok(&["survival", "--pred", &p("s.csv"), "--reps", "50", "--out", &p("surv.json")]);
    let report = fs::read_to_string(p("surv.json")).unwrap();
    assert!(report.contains("c_index"));
    assert!(report.contains("logrank"));
    assert!(fs::read_to_string(p("surv.json.km.csv")).unwrap().lines().count() > 1);
}

fn crossover_reads() -> Vec<ReaderObservation> {
    let mut rng = CounterRng::new(17, 0);
    let mut obs = Vec::new();
    for r in 0..6 {
        let sequence = if r % 2 == 0 { Sequence::A } else { Sequence::B };
        for c in 0..20 {
            let truth = if c % 2 == 0 { "luad" } else { "lusc" };
            for condition in [Condition::Unassisted, Condition::Assisted] {
                let assisted = condition == Condition::Assisted;
                let right = rng.next_f64() < if assisted { 0.85 } else { 0.65 };
                let period = if (sequence == Sequence::A) == assisted { 2 } else { 1 };
                obs.push(ReaderObservation {
                    reader_id: format!("R{r}"),
                    experience: if r < 3 { Experience::Junior } else { Experience::Senior },
                    sequence,
                    period,
                    condition,
                    task: "subtype".into(),
                    case_id: format!("c{c}"),
                    diagnosis: if right { truth } else if truth == "luad" { "lusc" } else { "luad" }.into(),
                    truth: truth.into(),
                    model_prediction: assisted.then(|| truth.to_string()),
                    time_sec: 30.0 + 30.0 * rng.next_f64(),
                    confidence: (6.0 + 3.0 * rng.next_f64()).round(),
                });
            }
        }
    }
    obs
}

#[test]
fn rct_tables() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("readers.csv");
    write_readers(&crossover_reads(), fs::File::create(&csv).unwrap()).unwrap();
    let out = dir.path().join("rct.json");
    ok(&["rct", "--readers", csv.to_str().unwrap(), "--reps", "100", "--perms", "200", "--out", out.to_str().unwrap()]);
    let report = json(&out);
    let tables = &report["tables"];
    for key in ["primary", "secondary", "interrater", "ai_utility"] {
        assert!(tables[key].is_object(), "missing table {key}");
    }
    assert!(tables["secondary"]["accuracy"].as_str().unwrap().contains('('));
    assert_eq!(report["detail"]["n_readers"], 6);
}

#[test]
fn tile_writes_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tiles.csv");
    ok(&["tile", "--width", "1024", "--height", "512", "--mag", "20", "--slide-id", "s1", "--out", out.to_str().unwrap()]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(text.lines().nth(1).unwrap().starts_with("s1,0,0,256"));
}
