use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etc-jigsaw")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn picture(path: &Path) {
    let mut bytes = b"P6\n64 48\n255\n".to_vec();
    for y in 0..48u32 {
        for x in 0..64u32 {
            let r = (x * 3 + y) as u8;
            let g = (128.0 + 80.0 * ((x as f64) / 9.0).sin() * ((y as f64) / 7.0).cos()) as u8;
            let b = (x * y / 16) as u8;
            bytes.extend_from_slice(&[r, g, b]);
        }
    }
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn encrypt_decrypt_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (img, key, enc, dec) = (dir.path().join("in.ppm"), dir.path().join("k.json"), dir.path().join("e.png"), dir.path().join("d.ppm"));
    picture(&img);
    ok(&["keygen", "--type", "INC", "--block", "16", "--seed", "9", "--out", p(&key)]);
    ok(&["encrypt", "--key", p(&key), "--in", p(&img), "--out", p(&enc)]);
    ok(&["decrypt", "--key", p(&key), "--in", p(&enc), "--out", p(&dec)]);
    assert_eq!(std::fs::read(&img).unwrap(), std::fs::read(&dec).unwrap());
    assert_ne!(std::fs::read(&enc).unwrap(), std::fs::read(&img).unwrap());
}

#[test]
fn keygen_with_seed_is_reproducible() {
    let a = ok(&["keygen", "--type", "2", "--seed", "5"]);
    assert_eq!(a, ok(&["keygen", "--type", "2", "--seed", "5"]));
    assert_ne!(a, ok(&["keygen", "--type", "2", "--seed", "6"]));
    assert!(a.contains("\"2\""));
}

#[test]
fn keyspace_reports_the_default_grid() {
    let out = ok(&["keyspace", "--type", "INC"]);
    assert!(out.contains("blocks 315"), "{out}");
    assert!(out.contains("log2 4423.804"), "{out}");
    let one = ok(&["keyspace", "--type", "1", "--blocks", "4"]);
    assert!(one.contains("keys 24\n"), "{one}");
}

#[test]
fn channel_writes_intermediates() {
    let dir = tempfile::tempdir().unwrap();
    let (img, out) = (dir.path().join("in.ppm"), dir.path().join("rx.png"));
    picture(&img);
    ok(&["channel", "--in", p(&img), "--out", p(&out), "--quser", "90", "--qsns", "70", "--keep-intermediates"]);
    assert!(out.exists());
    for hop in ["rx.user.jpg", "rx.sns.jpg"] {
        let bytes = std::fs::read(dir.path().join(hop)).unwrap();
        assert_eq!(&bytes[..2], &[0xFF, 0xD8]);
    }
}

#[test]
fn attack_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    picture(&d("in.ppm"));
    ok(&["keygen", "--type", "1", "--block", "16", "--seed", "3", "--out", p(&d("k.json"))]);
    ok(&["encrypt", "--key", p(&d("k.json")), "--in", p(&d("in.ppm")), "--out", p(&d("e.ppm")), "--truth", p(&d("t.json"))]);
    ok(&[
        "attack", "--type", "1", "--block", "16", "--in", p(&d("e.ppm")), "--out", p(&d("a.json")),
        "--emit-assembled", p(&d("a.png")), "--emit-table", p(&d("table.csv")),
    ]);
    assert!(d("a.png").exists());
    let table = std::fs::read_to_string(d("table.csv")).unwrap();
    assert!(table.starts_with("i,j,direction,cost,transform\n"));
    assert_eq!(table.lines().count(), 1 + 12 * 11 * 4);
    let score = ok(&["score", "--result", p(&d("a.json")), "--truth", p(&d("t.json"))]);
    let mut lines = score.lines();
    assert_eq!(lines.next(), Some("dc,nc,lc"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(values.len(), 3);
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    let perfect = ok(&["score", "--result", p(&d("t.json")), "--truth", p(&d("t.json"))]);
    assert!(perfect.contains("1.000,1.000,1.000"));
}

#[test]
fn experiment_writes_results_and_timings() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("images")).unwrap();
    picture(&dir.path().join("images/x.ppm"));
    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, r#"{"images": "images", "types": ["2"], "qualities": ["bypass", 90], "keys_per_image": 2, "block": 16, "master_seed": 1}"#).unwrap();
    let out = dir.path().join("r.csv");
    ok(&["experiment", "--plan", p(&plan), "--out", p(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("attempt")).count(), 4);
    assert!(dir.path().join("r.timings.csv").exists());
    let again = dir.path().join("r2.csv");
    ok(&["experiment", "--plan", p(&plan), "--out", p(&again), "--budget", "6"]);
    assert!(std::fs::read_to_string(&again).unwrap().contains("mean_all"));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert!(!run(&["experiment", "--plan", p(&missing), "--out", p(&dir.path().join("r.csv"))]).status.success());
    std::fs::write(dir.path().join("bad.json"), "{").unwrap();
    let out = run(&["decrypt", "--key", p(&dir.path().join("bad.json")), "--in", "x.ppm", "--out", "y.ppm"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!run(&["keygen", "--type", "Q"]).status.success());
}
