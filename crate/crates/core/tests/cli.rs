use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bitslice_ntt::field::{negacyclic_mul_ref, Poly};
use bitslice_ntt::netlist::{interpret_program, CircuitKind, WordEnv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bsntt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsntt")).args(args).output().expect("spawn bsntt")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_poly(path: &Path, poly: &Poly) {
    fs::write(path, poly.to_json()).unwrap();
}

fn read_poly(path: &Path) -> Poly {
    Poly::parse_any(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn ntt_zero_and_delta() {
    let dir = tempfile::tempdir().unwrap();
    let (zero, delta, out) = (dir.path().join("z"), dir.path().join("d"), dir.path().join("o"));
    write_poly(&zero, &Poly::zero());
    write_poly(&delta, &Poly::monomial(0));

    let o = bsntt(&["ntt", p(&zero), "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_poly(&out), Poly::zero());

    let o = bsntt(&["ntt", p(&delta), "--protected", "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_poly(&out), Poly::splat(1));
}

#[test]
fn ntt_roundtrip_restores_file_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, hat, back) = (dir.path().join("a"), dir.path().join("hat"), dir.path().join("back"));
    write_poly(&a, &Poly::random(&mut ChaCha8Rng::seed_from_u64(1)));
    assert!(bsntt(&["ntt", p(&a), "-o", p(&hat)]).status.success());
    assert!(bsntt(&["ntt", p(&hat), "--inverse", "-o", p(&back)]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&back).unwrap());

    let bin = dir.path().join("bin");
    assert!(bsntt(&["ntt", p(&a), "--format", "binary", "-o", p(&bin)]).status.success());
    assert_eq!(fs::read(&bin).unwrap().len(), 1024);
    assert_eq!(read_poly(&bin), read_poly(&hat));
}

#[test]
fn malformed_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad");
    fs::write(&bad, "[1, 2, 3]").unwrap();
    let o = bsntt(&["ntt", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    assert_eq!(bsntt(&["ntt", p(&dir.path().join("missing"))]).status.code(), Some(1));
    assert_eq!(bsntt(&["ntt", p(&bad), "--bogus"]).status.code(), Some(1));
    assert_eq!(bsntt(&["campaign", p(&bad)]).status.code(), Some(1));
    assert_eq!(bsntt(&["--help"]).status.code(), Some(0));
}

#[test]
fn polymul() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (a, b) = (Poly::random(&mut rng), Poly::random(&mut rng));
    let (fa, fb, fone, fz, out) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("one"),
        dir.path().join("zero"),
        dir.path().join("out"),
    );
    write_poly(&fa, &a);
    write_poly(&fb, &b);
    write_poly(&fone, &Poly::constant(1));
    write_poly(&fz, &Poly::zero());

    assert!(bsntt(&["polymul", p(&fa), p(&fone), "-o", p(&out)]).status.success());
    assert_eq!(read_poly(&out), a);
    assert!(bsntt(&["polymul", p(&fa), p(&fz), "-o", p(&out)]).status.success());
    assert_eq!(read_poly(&out), Poly::zero());
    assert!(bsntt(&["polymul", p(&fa), p(&fb), "-o", p(&out)]).status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), negacyclic_mul_ref(&a, &b).to_json());
}

#[test]
fn gencode_butterfly() {
    let dir = tempfile::tempdir().unwrap();
    let (prog, hist) = (dir.path().join("bf.txt"), dir.path().join("bf.json"));
    let o = bsntt(&["gencode", "--circuit", "butterfly", "-o", p(&prog), "--histogram", p(&hist)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&prog).unwrap();
    let h: serde_json::Value = serde_json::from_str(&fs::read_to_string(&hist).unwrap()).unwrap();
    let instructions = text
        .lines()
        .filter(|l| !l.starts_with('#') && !["IN ", "STATE ", "OUT "].iter().any(|k| l.starts_with(k)))
        .count();
    assert_eq!(h["total"].as_u64().unwrap() as usize, instructions);

    let n = CircuitKind::Butterfly.build();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut env = WordEnv::new();
    for g in n.inputs() {
        env.bind(&g.name, (0..32).map(|_| rng.gen()).collect());
    }
    assert_eq!(interpret_program(&text, &env).unwrap(), n.evaluate(&env).unwrap());

    assert_eq!(bsntt(&["gencode", "--circuit", "sbox"]).status.code(), Some(1));
}

#[test]
fn campaign_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let (json, csv) = (dir.path().join("r.json"), dir.path().join("r.csv"));

    fs::write(&cfg, r#"{"models":["bit_flip"],"strategy":{"kind":"random","trials":0}}"#).unwrap();
    let o = bsntt(&["campaign", p(&cfg), "--seed", "1", "--json", p(&json), "--csv", p(&csv)]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(r["trials"], 0);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1);

    fs::write(
        &cfg,
        r#"{"models":["aligned_pair"],"buffers":["trans_in1"],"time":[20,30],"strategy":{"kind":"stratified","per_hook":4}}"#,
    )
    .unwrap();
    assert!(bsntt(&["campaign", p(&cfg), "--seed", "2", "--json", p(&json)]).status.success());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let nd = r["summary"].as_array().unwrap().iter().find(|row| row["classification"] == "fault_not_detected");
    assert!(nd.unwrap()["amount"].as_u64().unwrap() > 0);

    // the seed is mandatory
    assert_eq!(bsntt(&["campaign", p(&cfg)]).status.code(), Some(1));
}
