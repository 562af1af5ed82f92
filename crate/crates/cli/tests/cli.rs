use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

const TSV: &str = include_str!("data/coach.tsv");

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_homosem"));
    c.env_remove("HOMOSEM_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f32 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 40) as f32 / (1u64 << 24) as f32) * 2.0 - 1.0
    }
}

/// Plain sentences with their (lemma, sense, slot) keys.
fn sentences() -> Vec<(String, String, u8, String)> {
    TSV.lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            let text = c[7].replace("[[", "").replace("]]", "");
            (c[0].to_string(), c[2].to_string(), c[4].parse().unwrap(), text)
        })
        .collect()
}

fn words(text: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut start = None;
    let chars: Vec<char> = text.chars().collect();
    for (i, ch) in chars.iter().enumerate() {
        let word = ch.is_alphanumeric() || *ch == '\'';
        match (word, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i, chars[s..i].iter().collect()));
                start = None;
            }
            _ => {}
        }
        if !word && !ch.is_whitespace() {
            out.push((i, i + 1, ch.to_string()));
        }
    }
    if let Some(s) = start {
        out.push((s, chars.len(), chars[s..].iter().collect()));
    }
    out
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("coach.tsv"), TSV).unwrap();
        let o = run(&[
            "convert",
            "--language",
            "en",
            "--input",
            root.join("coach.tsv").to_str().unwrap(),
            "--out",
            root.join("coach.json").to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_str().unwrap().to_string()
    }

    fn dataset(&self) -> String {
        self.path("coach.json")
    }

    fn vectors(&self) -> String {
        let mut vocab: Vec<String> = sentences()
            .iter()
            .flat_map(|s| words(&s.3).into_iter().map(|w| w.2))
            .collect();
        vocab.sort();
        vocab.dedup();
        let mut rng = Lcg(7);
        let mut s = format!("{} 5\n", vocab.len());
        for w in &vocab {
            let row: Vec<String> = (0..5).map(|_| format!("{:.5}", rng.next())).collect();
            let _ = writeln!(s, "{w} {}", row.join(" "));
        }
        let p = self.path("vec.txt");
        fs::write(&p, s).unwrap();
        p
    }

    /// Flat parses: the first word is the root, everything else hangs off it.
    fn parses(&self) -> String {
        let mut s = String::new();
        for (lemma, sense, slot, text) in sentences() {
            let _ = writeln!(s, "# sent_id = {lemma}/{sense}/{slot}\n# text = {text}");
            for (i, (_, _, w)) in words(&text).iter().enumerate() {
                let (head, rel, upos) = if i == 0 { (0, "root", "VERB") } else { (1, "obj", "NOUN") };
                let _ = writeln!(s, "{}\t{w}\t{}\t{upos}\t_\t_\t{head}\t{rel}\t_\t_", i + 1, w.to_lowercase());
            }
            s.push('\n');
        }
        let p = self.path("parses.conllu");
        fs::write(&p, s).unwrap();
        p
    }

    fn ceif(&self, layers: usize, hidden: usize) -> String {
        let mut rng = Lcg(11);
        let mut s = String::new();
        for (lemma, sense, slot, text) in sentences() {
            let mut toks = vec![r#"{"text":"[CLS]","start":0,"end":0,"special":true,"word_index":null}"#.to_string()];
            let ws = words(&text);
            for (i, (a, b, w)) in ws.iter().enumerate() {
                toks.push(format!(
                    r#"{{"text":{w:?},"start":{a},"end":{b},"special":false,"word_index":{i}}}"#
                ));
            }
            toks.push(r#"{"text":"[SEP]","start":0,"end":0,"special":true,"word_index":null}"#.to_string());
            let n = toks.len();
            let stack: Vec<String> = (0..layers)
                .map(|_| {
                    let rows: Vec<String> = (0..n)
                        .map(|_| {
                            let v: Vec<String> = (0..hidden).map(|_| format!("{:.4}", rng.next())).collect();
                            format!("[{}]", v.join(","))
                        })
                        .collect();
                    format!("[{}]", rows.join(","))
                })
                .collect();
            let _ = writeln!(
                s,
                r#"{{"version":"ceif/1","sentence_key":"{lemma}/{sense}/{slot}","model_id":"toy","num_layers":{layers},"hidden_size":{hidden},"text":{text:?},"tokens":[{}],"stack":[{}]}}"#,
                toks.join(","),
                stack.join(",")
            );
        }
        let p = self.path(&format!("toy{layers}.ceif"));
        fs::write(&p, s).unwrap();
        p
    }
}

#[test]
fn validate_and_stats() {
    let f = Fixture::new();
    let o = run(&["validate", "--dataset", &f.dataset()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("ok (1 homonyms, 0 warning(s))"));
    let o = run(&["stats", "--dataset", &f.dataset()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().nth(1), Some("en\t1\t2\t10\t0\t54\t32\t8"));
}

#[test]
fn validate_reports_broken_dataset() {
    let f = Fixture::new();
    let broken = fs::read_to_string(f.dataset()).unwrap().replacen("\"2:frame\"", "\"zz\"", 1);
    let p = f.path("broken.json");
    fs::write(&p, broken).unwrap();
    let o = run(&["validate", "--dataset", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("sense 2 sentence"), "{}", stdout(&o));
}

#[test]
fn triples_filtered_file() {
    let f = Fixture::new();
    let out = f.path("t.tsv");
    let o = run(&["triples", "--dataset", &f.dataset(), "--same-pos", "--experiment", "exp1", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(stdout(&o).contains("4 triples"));
}

#[test]
fn triples_diff_against_file() {
    let f = Fixture::new();
    let full = f.path("all.tsv");
    assert!(run(&["triples", "--dataset", &f.dataset(), "--out", &full]).status.success());
    let o = run(&["triples", "--dataset", &f.dataset(), "--diff", &full]);
    assert!(o.status.success());
    assert!(stdout(&o).is_empty());
    let trimmed: String = fs::read_to_string(&full).unwrap().lines().take(50).map(|l| format!("{l}\n")).collect();
    fs::write(&full, trimmed).unwrap();
    let o = run(&["triples", "--dataset", &f.dataset(), "--diff", &full]);
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with('-')).count(), 5);
}

#[test]
fn incompatible_strategy_is_usage_error() {
    let f = Fixture::new();
    let v = f.vectors();
    let o = run(&["eval", "--dataset", &f.dataset(), "--provider", "static", "--strategy", "layer:5", "--vectors", &v]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["eval", "--dataset", &f.dataset(), "--provider", "contextual", "--strategy", "wv", "--ceif", &v]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["eval", "--dataset", &f.dataset(), "--provider", "static", "--strategy", "syn:9", "--vectors", &v]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wv | sent | syn:<k> | cat | add | layer:<n>"));
    let o = run(&["eval", "--dataset", &f.dataset(), "--provider", "static", "--strategy", "syn:3", "--vectors", &v]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_is_pipeline_error() {
    let f = Fixture::new();
    let o = run(&[
        "eval", "--dataset", &f.dataset(), "--provider", "static", "--strategy", "wv", "--vectors", "/nonexistent/v.txt",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

fn eval_static(f: &Fixture, strategy: &str, extra: &[&str], workers: &str) -> String {
    let v = f.vectors();
    let d = f.dataset();
    let mut args = vec!["eval", "--dataset", &d, "--provider", "static", "--strategy", strategy, "--vectors", &v];
    args.extend_from_slice(extra);
    let o = bin().args(&args).env("HOMOSEM_WORKERS", workers).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o)
}

#[test]
fn static_reports_are_deterministic() {
    let f = Fixture::new();
    let a = eval_static(&f, "wv", &["--format", "json"], "1");
    let b = eval_static(&f, "wv", &["--format", "json"], "4");
    assert_eq!(a, b);
    let tsv = eval_static(&f, "sent", &[], "2");
    assert_eq!(tsv.lines().next(), Some("exp1\texp2\texp3\texp4\tmacro\tmicro\tfull"));
    assert_eq!(tsv.lines().nth(1).unwrap().split('\t').count(), 7);
}

#[test]
fn static_syn_with_parses() {
    let f = Fixture::new();
    let p = f.parses();
    let out = eval_static(&f, "syn:3", &["--parses", &p, "--format", "json"], "2");
    assert!(out.contains("\"strategy\": \"syn:3\""), "{out}");
}

#[test]
fn wv_ignores_context() {
    // identical target forms get identical vectors, so every exp1 triple ties
    let f = Fixture::new();
    let tsv = eval_static(&f, "wv", &[], "1");
    let row: Vec<&str> = tsv.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "0.000");
}

#[test]
fn contextual_eval_and_layers() {
    let f = Fixture::new();
    let c = f.ceif(5, 3);
    for s in ["cat", "add", "sent", "layer:2"] {
        let o = run(&["eval", "--dataset", &f.dataset(), "--provider", "contextual", "--strategy", s, "--ceif", &c]);
        assert!(o.status.success(), "{s}: {}", stderr(&o));
    }
    let o = run(&["eval", "--dataset", &f.dataset(), "--provider", "contextual", "--strategy", "layer:6", "--ceif", &c, "--format", "json"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("outside 1..=5"));
    let o = run(&["layers", "--dataset", &f.dataset(), "--ceif", &c, "--same-pos"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("layer\texp1\texp2\texp3\texp4\tmacro"));
    assert_eq!(out.lines().count(), 6);
    let one = f.ceif(1, 3);
    let o = run(&["layers", "--dataset", &f.dataset(), "--ceif", &one]);
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn sample_and_kappa() {
    let f = Fixture::new();
    let a = f.path("a.tsv");
    let o = run(&["sample", "--dataset", &f.dataset(), "-n", "10", "--seed", "3", "--out", &a]);
    assert!(o.status.success(), "{}", stderr(&o));
    let blank = fs::read_to_string(&a).unwrap();
    let o = run(&["sample", "--dataset", &f.dataset(), "-n", "10", "--seed", "3"]);
    assert_eq!(stdout(&o), blank);
    assert_eq!(run(&["sample", "--dataset", &f.dataset(), "-n", "33"]).status.code(), Some(1));

    let label = |flip: usize| -> String {
        let mut s = String::from("pair_ref\tlabel\n");
        for (i, line) in blank.lines().skip(1).enumerate() {
            let r = line.split('\t').next().unwrap();
            let l = if (i % 2 == 0) != (i < flip) { "T" } else { "F" };
            let _ = writeln!(s, "{r}\t{l}");
        }
        s
    };
    let (pa, pb) = (f.path("ann1.tsv"), f.path("ann2.tsv"));
    fs::write(&pa, label(0)).unwrap();
    fs::write(&pb, label(0)).unwrap();
    let o = run(&["kappa", &pa, &pb]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "ann1\tann2\t10\t1.0000");
    assert_eq!(run(&["kappa", &pa, &pb, &pa]).status.code(), Some(2));
    let o = run(&["kappa", &pa, &pb, &pa, &pb]);
    assert!(stdout(&o).contains("pooled\t\t20\t1.0000"));
    fs::write(&pb, label(10)).unwrap();
    let o = run(&["kappa", &pa, &pb]);
    assert_eq!(stdout(&o).trim(), "ann1\tann2\t10\t-1.0000");
}

#[test]
fn export_pairs_counts() {
    let f = Fixture::new();
    let o = run(&["export-pairs", "--dataset", &f.dataset(), "--wic"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 9);
    assert!(stderr(&o).contains("8 pairs"));
}
