//! The full command-line pipeline driven in-process: generate train and test
//! families, train UGCN and the dense baseline, evaluate both and merge the
//! reports. Files go to a temporary directory.
//!
//! `cargo run --release --example cli_pipeline`

fn ugcn(args: &[&str]) {
    let mut full = vec!["ugcn"];
    full.extend(args);
    println!("$ {}", full.join(" "));
    let code = ugcn::cli::run(full);
    assert_eq!(code, 0, "command failed");
}

fn main() {
    let root = std::env::temp_dir().join(format!("ugcn-cli-{}", std::process::id()));
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let (train, test, run, dense, eval) = (p("train"), p("test"), p("run"), p("dense"), p("eval"));
    let small = ["--set", "gen.scenario.t_total=96"];
    let quick = ["--set", "train.epochs=5", "--set", "model.k_t=1", "--set", "model.d=32"];

    let mut gen_train = vec!["gen", "--q", "8", "--seed", "7", "--out", &train, "--set", "gen.include_base=true"];
    gen_train.extend(small);
    ugcn(&gen_train);
    let mut gen_test = vec!["gen", "--q", "3", "--seed", "8", "--out", &test];
    gen_test.extend(small);
    ugcn(&gen_test);

    let mut t = vec!["train", "--data", &train, "--out", &run, "--seed", "7"];
    t.extend(quick);
    ugcn(&t);
    ugcn(&["train", "--model", "dense", "--data", &train, "--out", &dense, "--set", "dense.epochs=5"]);

    let ck = format!("{run}/checkpoint.ugcn");
    let dj = format!("{dense}/dense.json");
    ugcn(&["eval", "--checkpoint", &ck, "--model", "dense", "--dense", &dj, "--data", &test, "--out", &eval]);
    let merged = format!("{eval}/merged.csv");
    ugcn(&["report", &format!("{eval}/ugcn.json"), &format!("{eval}/dense.json"), "--out", &merged]);
    println!("{}", std::fs::read_to_string(format!("{eval}/comparison.csv")).unwrap());
    std::fs::remove_dir_all(&root).ok();
}
