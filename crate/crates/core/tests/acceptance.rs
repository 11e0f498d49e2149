//! Acceptance gate. Prints one PASS/FAIL line per criterion; criteria 1-10
//! gate the exit status, 11 is informational.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bitslice_ntt::engine::Engine;
use bitslice_ntt::faultsim::{run_campaign, CampaignConfig, CampaignReport, Classification, CRASH_NOTE};
use bitslice_ntt::field::{fq_add, fq_mul, intt_ref, negacyclic_mul_ref, ntt_ref, Poly, Q};
use bitslice_ntt::netlist::{emit_program, gate_histogram, CircuitKind, Program, WordEnv};
use bitslice_ntt::slicing::SliceBlock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion<'a> = (u32, &'static str, Box<dyn Fn() -> Verdict + 'a>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn random_polys(seed: u64, count: usize) -> Vec<Poly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Poly::random(&mut rng)).collect()
}

fn c1_ntt_oracle(e: &Engine) -> Verdict {
    let start = Instant::now();
    let polys = random_polys(1, 1000);
    let bad = polys.iter().filter(|a| e.ntt256(a) != ntt_ref(a)).count();
    let t = start.elapsed();
    verdict(bad == 0 && t < Duration::from_secs(60), format!("1000 polys, {bad} mismatches, {}", secs(t)))
}

fn c2_intt_oracle(e: &Engine) -> Verdict {
    let polys = random_polys(2, 1000);
    let round = polys.iter().filter(|a| e.intt256(&e.ntt256(a)) != **a).count();
    let direct = polys.iter().filter(|a| e.intt256(a) != intt_ref(a)).count();
    verdict(round + direct == 0, format!("1000 polys, roundtrip {round} / oracle {direct} mismatches"))
}

fn scalar_matvec(m: &[Vec<Poly>], v: &[Poly]) -> Vec<Poly> {
    m.iter()
        .map(|row| {
            intt_ref(&Poly::from_fn(|i| {
                row.iter().zip(v).fold(0, |s, (x, y)| fq_add(s, fq_mul(x.coeffs()[i], y.coeffs()[i])))
            }))
        })
        .collect()
}

fn c3_polymul(e: &Engine) -> Verdict {
    let polys = random_polys(3, 400);
    let bad = polys.chunks(2).filter(|p| e.poly_mul(&p[0], &p[1]) != negacyclic_mul_ref(&p[0], &p[1])).count();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut mv_bad = 0;
    for k in [2usize, 4] {
        let m: Vec<Vec<Poly>> = (0..k).map(|_| (0..k).map(|_| Poly::random(&mut rng)).collect()).collect();
        let v: Vec<Poly> = (0..k).map(|_| Poly::random(&mut rng)).collect();
        if e.matvec_mul(&m, &v).unwrap() != scalar_matvec(&m, &v) {
            mv_bad += 1;
        }
    }
    verdict(bad + mv_bad == 0, format!("200 products {bad} mismatches, matvec 2x2/4x4 {mv_bad} mismatches"))
}

fn c4_circuits() -> Verdict {
    let kinds = [
        CircuitKind::ModAdder,
        CircuitKind::ModSubtractor,
        CircuitKind::ModMultiplier,
        CircuitKind::Butterfly,
        CircuitKind::PointwiseAccumulator,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut scratch = Vec::new();
    let mut failures = Vec::new();
    for kind in kinds {
        let n = kind.build();
        let groups = n.bound_groups().count();
        let outs = n.outputs().len();
        let mut bad = 0usize;
        for _ in 0..100_000 {
            let args: Vec<[u32; 32]> = (0..groups).map(|_| std::array::from_fn(|_| rng.gen_range(0..Q))).collect();
            let blocks: Vec<SliceBlock> = args.iter().map(SliceBlock::from_values).collect();
            let inputs: Vec<&[u32]> = blocks.iter().map(|b| &b.0[..]).collect();
            let mut out = vec![SliceBlock::ZERO; outs];
            let mut refs: Vec<&mut [u32]> = out.iter_mut().map(|b| &mut b.0[..]).collect();
            n.eval_words(&inputs, &mut refs, &mut scratch, None);
            let got: Vec<[u32; 32]> = out.iter().map(SliceBlock::values).collect();
            for lane in 0..32 {
                let expect = kind.scalar(&args.iter().map(|a| a[lane]).collect::<Vec<_>>());
                if expect.iter().zip(&got).any(|(x, g)| *x != g[lane]) {
                    bad += 1;
                    break;
                }
            }
        }
        if bad > 0 {
            failures.push(format!("{kind}: {bad}"));
        }
    }
    verdict(failures.is_empty(), format!("5 circuits x 100000 environments, failures [{}]", failures.join(", ")))
}

fn c5_codegen() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = Vec::new();
    for kind in CircuitKind::ALL {
        let n = kind.build();
        let prog = Program::parse(&emit_program(&n)).expect("emitted program parses");
        let mismatches = (0..1000)
            .filter(|_| {
                let mut env = WordEnv::new();
                for g in n.bound_groups() {
                    env.bind(&g.name, (0..g.width()).map(|_| rng.gen()).collect());
                }
                prog.run(&env).unwrap() != n.evaluate(&env).unwrap()
            })
            .count();
        if mismatches > 0 {
            bad.push(format!("{kind}: {mismatches}"));
        }
    }
    verdict(bad.is_empty(), format!("6 circuits x 1000 environments, mismatches [{}]", bad.join(", ")))
}

fn campaign(json: &str) -> CampaignReport {
    run_campaign(&CampaignConfig::from_json(json).expect("config")).expect("campaign")
}

fn c6_soundness() -> Verdict {
    let start = Instant::now();
    let r = campaign(r#"{"target":"ntt","models":["bit_flip"],"strategy":{"kind":"exhaustive"},"seed":6}"#);
    let t = start.elapsed();
    let nd = r.count(Classification::FaultNotDetected);
    let hooks = r.records.iter().map(|x| x.fault.time()).max().map_or(0, |m| m + 1);
    verdict(
        nd == 0 && t < Duration::from_secs(30 * 60),
        format!(
            "exhaustive {} flips over {hooks} hooks x 4 buffers x 256 words x 32 bits: {} detected, {} no effect, {nd} not detected, {}",
            r.trials,
            r.count(Classification::FaultDetected),
            r.count(Classification::NoEffect),
            secs(t)
        ),
    )
}

fn c7_bypass() -> Verdict {
    let r = campaign(
        r#"{"target":"ntt","models":["aligned_pair"],"strategy":{"kind":"stratified","per_hook":8},"seed":7}"#,
    );
    let bypass = r
        .records
        .iter()
        .filter(|x| x.classification == Classification::FaultNotDetected && x.differing_coeffs > 0)
        .count();
    verdict(bypass >= 1, format!("{} aligned pairs, {bypass} undetected with faulty output", r.trials))
}

fn c8_skip() -> Verdict {
    let r = campaign(r#"{"target":"ntt","models":["skip_op"],"strategy":{"kind":"exhaustive"},"seed":8}"#);
    let detected = r.count(Classification::FaultDetected);
    let changed = r.records.iter().filter(|x| x.differing_coeffs > 0).count();
    let changed_nd = r
        .records
        .iter()
        .filter(|x| x.differing_coeffs > 0 && x.classification == Classification::FaultNotDetected)
        .count();
    verdict(
        detected == 0 && changed == changed_nd && changed > 0,
        format!(
            "{} skips, {changed} change the output, {changed_nd} of them undetected, {detected} detected",
            r.trials
        ),
    )
}

fn c9_report() -> Verdict {
    let r = campaign(
        r#"{"target":"ntt","models":["bit_flip","aligned_pair","word_corrupt","skip_op","stuck_at_0","stuck_at_1"],"strategy":{"kind":"random","trials":600},"seed":9}"#,
    );
    let names: Vec<&str> = r.summary.iter().map(|row| row.classification.as_str()).collect();
    let order = names == ["no_effect", "crash", "fault_not_detected", "fault_detected"];
    let crash = r.summary[1].amount == 0 && r.crash_note == CRASH_NOTE;
    let sums = r.summary.iter().map(|row| row.amount).sum::<usize>() == r.trials;
    let split = r.summary.iter().all(|row| row.potentially_exploitable + row.non_exploitable == row.amount);
    let pct: f64 = r.summary.iter().map(|row| row.percentage).sum();
    let pct_ok = (pct - 100.0).abs() < 0.01;
    let partition = r.records.iter().all(|x| match x.classification {
        Classification::NoEffect => !x.detected && x.differing_coeffs == 0,
        Classification::FaultDetected => x.detected,
        Classification::FaultNotDetected => !x.detected && x.differing_coeffs > 0,
    });
    let csv = r.to_csv();
    let csv_ok = csv.lines().next() == Some("model,time,buffer,word,bit,classification,exploitable")
        && csv.lines().count() == r.trials + 1;
    let row = |i: usize| {
        let s = &r.summary[i];
        format!("{} {}/{}/{}", s.classification, s.amount, s.potentially_exploitable, s.non_exploitable)
    };
    verdict(
        order && crash && sums && split && pct_ok && partition && csv_ok,
        format!("{} trials: {}, {}, {}, {}; percentages sum {pct:.4}", r.trials, row(0), row(1), row(2), row(3)),
    )
}

fn c10_determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"target":"ntt","models":["bit_flip","aligned_pair","word_corrupt","skip_op","stuck_at_1"],"strategy":{"kind":"random","trials":300}}"#,
    )
    .unwrap();
    let run = |tag: &str, threads: &str| -> (Vec<u8>, Vec<u8>) {
        let json = dir.path().join(format!("{tag}.json"));
        let csv = dir.path().join(format!("{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_bsntt"))
            .args(["campaign", path(&config), "--seed", "10", "--threads", threads, "--json", path(&json)])
            .args(["--csv", path(&csv)])
            .status()
            .expect("spawn bsntt");
        assert!(status.success());
        (std::fs::read(json).unwrap(), std::fs::read(csv).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "8");
    let same = a == b && b == c;
    verdict(same, format!("seed 10: runs 1,1,8 threads identical json ({} B) and csv ({} B)", a.0.len(), a.1.len()))
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn c11_histogram() -> Verdict {
    let h = gate_histogram(&CircuitKind::Butterfly.build());
    let within = |ours: usize, theirs: usize| {
        let r = ours as f64 / theirs as f64;
        (0.1..=10.0).contains(&r)
    };
    verdict(
        within(h.or2, 1830) && within(h.xor2, 2957) && within(h.and2, 3994),
        format!(
            "butterfly OR2 {} / XOR2 {} / AND2 {} / NOT1 {} vs ORR 1830 / EOR 2957 / AND 3994",
            h.or2, h.xor2, h.and2, h.not1
        ),
    )
}

fn main() {
    let e = Engine::shared();
    let criteria: Vec<Criterion> = vec![
        (1, "ntt256 equals direct evaluation", Box::new(|| c1_ntt_oracle(e))),
        (2, "intt256 roundtrip and direct evaluation", Box::new(|| c2_intt_oracle(e))),
        (3, "poly_mul and matvec_mul against schoolbook", Box::new(|| c3_polymul(e))),
        (4, "circuit fidelity per slice", Box::new(c4_circuits)),
        (5, "program text roundtrip", Box::new(c5_codegen)),
        (6, "single bit flips never go undetected", Box::new(c6_soundness)),
        (7, "aligned pair bypasses the check", Box::new(c7_bypass)),
        (8, "skipped operations are never detected", Box::new(c8_skip)),
        (9, "report taxonomy and exploitability split", Box::new(c9_report)),
        (10, "campaign reports are byte-identical", Box::new(c10_determinism)),
        (11, "butterfly gate mix vs reference (informational)", Box::new(c11_histogram)),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {}", v.detail);
        if !v.pass && id <= 10 {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        eprintln!("gating criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
