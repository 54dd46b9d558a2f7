use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zivr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zivr"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ZIVR_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const PROBLEM: &str = r#"
[problem]
kind = "quadratic"
n = 12
d = 4
cond = 10.0
lambda = 0.0
data_seed = 3

[run]
budget = 3000
seeds = [1, 2]
output = "out"
"#;

const SOLVERS: &str = r#"
[[solver]]
kind = "zivr"
r = 2
beta = 1e-7

[[solver]]
kind = "vanilla_zo"
beta = 1e-7
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn empty_solver_list_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), PROBLEM);
    let o = zivr(&["run", &cfg], tmp.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("solver"));
}

#[test]
fn schema_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{PROBLEM}\n[[solver]]\nkind = \"zivr\"\nstep = 0.1\n"));
    let o = zivr(&["run", &cfg], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("step"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), &format!("{PROBLEM}\n[[solver]]\nkind = \"newton\"\n"));
    assert_eq!(code(&zivr(&["run", &cfg], tmp.path())), 2);

    let cfg = write_config(tmp.path(), &format!("{}{SOLVERS}", PROBLEM.replace("budget = 3000", "budget = 0")));
    let o = zivr(&["run", &cfg], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("budget"));
}

#[test]
fn missing_dataset_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let body = PROBLEM.replace("kind = \"quadratic\"", "kind = \"logistic\"\ndataset = \"a9a\"") + SOLVERS;
    let cfg = write_config(tmp.path(), &body);
    let o = zivr(&["run", &cfg], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("problem.dataset"));
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && !p.ends_with("summary.csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn runs_are_reproducible_from_config_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{PROBLEM}{SOLVERS}"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert_eq!(code(&zivr(&["run", &cfg, "--output", a.to_str().unwrap()], tmp.path())), 0);
    assert_eq!(code(&zivr(&["run", &cfg, "--output", b.to_str().unwrap(), "--threads", "1"], tmp.path())), 0);
    let manifest = a.join("manifest.toml");
    let o = zivr(&["run", manifest.to_str().unwrap(), "--output", c.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (ca, cb, cc) = (csvs(&a), csvs(&b), csvs(&c));
    assert_eq!(ca.len(), 4);
    assert_eq!(ca, cb);
    assert_eq!(ca, cc);
    let header = String::from_utf8(ca[0].1.clone()).unwrap();
    assert!(header.starts_with("oracle_calls,iter,objective,gap,grad_map_norm,wall_ms\n"));

    let text = fs::read_to_string(&manifest).unwrap();
    for key in ["alpha", "beta", "sigma", "nu", "smoothness", "reference_value"] {
        assert!(text.contains(&format!("{key} = ")), "manifest lacks {key}");
    }
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{PROBLEM}\n[[solver]]\nkind = \"full_batch_zo\"\nalpha = 1e3\nbeta = 1e-7\n");
    let cfg = write_config(tmp.path(), &body);
    let o = zivr(&["run", &cfg], tmp.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    // the partial trace is still written
    assert!(tmp.path().join("out/full_batch_zo_seed1.csv").is_file());
}

#[test]
fn compare_tabulates_endpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let body = PROBLEM.replace("seeds = [1, 2]", "seeds = [1]") + SOLVERS;
    let cfg = write_config(tmp.path(), &body);
    assert_eq!(code(&zivr(&["run", &cfg], tmp.path())), 0);
    let o = zivr(&["compare", "out", "--threshold", "1e-30", "--threshold", "10"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(tmp.path().join("out/summary.csv")).unwrap();
    let headers = rd.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for row in &rows {
        assert_eq!(&row[headers.len() - 2], "not reached");
        assert_eq!(&row[headers.len() - 1], "0");
        // endpoint equals the last CSV row
        let trace = fs::read_to_string(tmp.path().join(format!("out/{}_seed1.csv", &row[col("label")]))).unwrap();
        let last: Vec<&str> = trace.lines().last().unwrap().split(',').collect();
        assert_eq!(&row[col("oracle_calls")], last[0]);
        assert_eq!(&row[col("final_objective")], last[2]);
        assert_eq!(&row[col("final_gap")], last[3]);
    }
}

#[test]
fn compare_without_manifest_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&zivr(&["compare", "."], tmp.path())), 2);
}

#[test]
fn verify_passes_and_catches_injected_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zivr(&["verify", "--samples", "5000", "--csv", "v.csv"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = fs::read_to_string(tmp.path().join("v.csv")).unwrap();
    assert!(text.starts_with("check,pass,samples,worst_z,k_sigma,detail"));
    let o = zivr(&["verify", "--samples", "5000", "--inject-sigma-scale", "2"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL sigma/"));
}

#[test]
fn gen_data_survival_and_quadratic() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["gen-data", "survival", "--n", "112", "--d", "160", "--seed", "4", "--out", "s.csv"];
    assert_eq!(code(&zivr(&args, tmp.path())), 0);
    let first = fs::read(tmp.path().join("s.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 113);
    assert!(fs::read_to_string(tmp.path().join("s.csv.meta.toml")).unwrap().contains("seed = 4"));
    assert_eq!(code(&zivr(&args, tmp.path())), 0);
    assert_eq!(fs::read(tmp.path().join("s.csv")).unwrap(), first);

    let args = ["gen-data", "quadratic", "--n", "50", "--d", "20", "--out", "q.toml"];
    assert_eq!(code(&zivr(&args, tmp.path())), 0);
    let q = fs::read_to_string(tmp.path().join("q.toml")).unwrap();
    assert!(q.contains("x_star = ["));

    // the serialized quadratic loads as a problem and recovers its optimum
    let body = format!(
        "[problem]\nkind = \"quadratic\"\ndataset = \"q.toml\"\nlambda = 0.0\n[run]\nbudget = 10\n{SOLVERS}"
    );
    let cfg = write_config(tmp.path(), &body);
    assert_eq!(code(&zivr(&["run", &cfg], tmp.path())), 0);
    let manifest = fs::read_to_string(tmp.path().join("out/manifest.toml")).unwrap();
    let value_line = q.lines().find(|l| l.starts_with("value = ")).unwrap().replace("value = ", "");
    assert!(manifest.contains(&format!("reference_value = {value_line}")));

    let bad = ["gen-data", "survival", "--n", "0", "--out", "x.csv"];
    assert_eq!(code(&zivr(&bad, tmp.path())), 2);
}

#[test]
fn cox_and_classification_configs_run() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["gen-data", "classification", "--n", "200", "--d", "8", "--out", "c.libsvm"];
    assert_eq!(code(&zivr(&args, tmp.path())), 0);
    let body = format!("[problem]\nkind = \"logistic\"\ndataset = \"c.libsvm\"\n[run]\nbudget = 2000\n{SOLVERS}");
    let cfg = write_config(tmp.path(), &body);
    let o = zivr(&["run", &cfg], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let body = format!("[problem]\nkind = \"cox\"\nn = 30\nd = 5\n[run]\nbudget = 2000\n{SOLVERS}");
    let cfg = write_config(tmp.path(), &body);
    let o = zivr(&["run", &cfg], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let body = "[problem]\nkind = \"sigmoid\"\nn = 40\nd = 5\n[run]\nbudget = 2000\n[[solver]]\nkind = \"zivr\"\nbeta = 1e-6\n";
    let cfg = write_config(tmp.path(), body);
    let o = zivr(&["run", &cfg], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = fs::read_to_string(tmp.path().join("out/zivr_impl1_R1_seed1.csv")).unwrap();
    // no gap for the non-convex problem, gradient mapping present
    let row: Vec<&str> = trace.lines().nth(1).unwrap().split(',').collect();
    assert!(row[3].is_empty() && !row[4].is_empty());
}

#[test]
fn datasets_lists_known_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zivr(&["datasets"], tmp.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("a9a") && out.contains("w8a"));
}

#[test]
fn shipped_a9a_config_runs_on_a_stand_in_file() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["gen-data", "classification", "--n", "300", "--d", "123", "--nnz", "14", "--out", "a9a"];
    assert_eq!(code(&zivr(&args, tmp.path())), 0);
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/a9a.toml");
    let o = Command::new(env!("CARGO_BIN_EXE_zivr"))
        .args(["run", config.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("ZIVR_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = tmp.path().join("out/a9a");
    assert_eq!(csvs(&out).len(), 2);
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("mu = 0.0001") && manifest.contains("lambda = 0.0001"), "{manifest}");
}
