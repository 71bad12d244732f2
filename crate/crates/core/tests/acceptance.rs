//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach stdout.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use gendpr::protocol::wire::encode_payload;
use gendpr::protocol::{MessageKind, Payload, PayloadClass, ProtocolMessage};
use gendpr::stats::{
    allele_counts, identification_power, ld_p_value, lr_matrix, merge_pair_stats, pair_stats,
    positions_in, r_squared, AlleleCountVector, AlleleFreqVector, PairCorrelationStats,
};
use gendpr::transport::{attest_handshake, Enclave, SecureChannel, ENVELOPE_OVERHEAD, TRUSTED_MEASUREMENT};
use gendpr::{
    centralized_collusion_pipeline, centralized_pipeline, enumerate_combinations,
    generate_synthetic, naive_pipeline, run_collusion_pipeline, run_protocol, CollusionMode,
    CollusionPlan, Error, FederationDataset, GenotypeMatrix, NodeId, Population, ProtocolOptions,
    StudyConfig, SyntheticProfile,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn gendpr_lists(ds: &FederationDataset, cfg: &StudyConfig) -> gendpr::PhaseLists {
    run_protocol(ds, cfg, &ProtocolOptions::default()).unwrap().verdict.lists
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let (mut ld_active, mut lr_active) = (0, 0);
    let mut seed = 100;
    for l in [100, 1000] {
        for n in [500, 2000] {
            for g in [2, 3, 5, 7] {
                seed += 1;
                let (plain, cfg) = common::synthetic(l, n, g, seed);
                for ds in [common::linked(&plain, seed), plain] {
                    let distributed = gendpr_lists(&ds, &cfg);
                    let central = centralized_pipeline(&ds.pooled_case(), ds.reference(), &cfg).unwrap();
                    ensure!(
                        distributed == central.lists,
                        "L={l} N={n} G={g} seed={seed}: protocol and centralized lists differ"
                    );
                    checked += 1;
                    ld_active += usize::from(central.lists.ld.len() < central.lists.maf.len());
                    lr_active += usize::from(central.lists.lr.len() < central.lists.ld.len());
                }
            }
        }
    }
    Ok(format!(
        "{checked} datasets identical ({ld_active} with LD removals, {lr_active} with LR removals) in {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn g_invariance() -> Outcome {
    let (base, _) = common::synthetic(300, 1400, 2, 7);
    let base = common::linked(&base, 7);
    let mut verdicts = Vec::new();
    for g in [2, 3, 5, 7] {
        let ds = base.reshard(g).unwrap();
        let cfg = StudyConfig::new(ds.snps().to_vec(), g, 7);
        verdicts.push(gendpr_lists(&ds, &cfg));
    }
    ensure!(verdicts.windows(2).all(|w| w[0] == w[1]), "verdicts differ across G");
    let v = &verdicts[0];
    Ok(format!("G in {{2,3,5,7}} -> |L'|={} |L''|={} |L_safe|={}", v.maf.len(), v.ld.len(), v.lr.len()))
}

fn naive_divergence() -> Outcome {
    let (ds, cfg) = common::simpson_fixture();
    let naive = naive_pipeline(ds.shards(), ds.reference(), &cfg).unwrap();
    let central = centralized_pipeline(&ds.pooled_case(), ds.reference(), &cfg).unwrap();
    ensure!(naive.lists.ld != central.lists.ld, "heterogeneous fixture: naive LD list equals centralized");
    ensure!(gendpr_lists(&ds, &cfg) == central.lists, "protocol differs from centralized on the fixture");
    for g in [2, 3, 4] {
        let (ds, cfg) = common::homogeneous_fixture(g);
        let naive = naive_pipeline(ds.shards(), ds.reference(), &cfg).unwrap();
        let central = centralized_pipeline(&ds.pooled_case(), ds.reference(), &cfg).unwrap();
        ensure!(naive.lists == central.lists, "homogeneous G={g}: naive differs from centralized");
    }
    Ok(format!(
        "heterogeneous LD: naive {} vs centralized {}; homogeneous shards agree",
        naive.lists.ld.len(),
        central.lists.ld.len()
    ))
}

fn random_partition(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let g = rng.gen_range(2..=7.min(n));
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, n - 1, g - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort();
    let mut parts = Vec::new();
    let mut prev = 0;
    for c in cuts.into_iter().chain([n]) {
        parts.push(rows[prev..c].to_vec());
        prev = c;
    }
    parts
}

fn aggregation_homomorphism() -> Outcome {
    let profile = SyntheticProfile::random(25, 3);
    let ds = generate_synthetic(240, 200, &profile, 2, 3).unwrap();
    let pooled = ds.pooled_case();
    let snps = pooled.snps().to_vec();
    let pooled_counts = allele_counts(&pooled, &snps).unwrap();
    let case_freqs = pooled_counts.frequencies();
    let ref_freqs = allele_counts(ds.reference(), &snps).unwrap().frequencies();
    let pooled_lr = lr_matrix(&pooled, &snps, &case_freqs, &ref_freqs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let parts: Vec<GenotypeMatrix> = random_partition(pooled.n_individuals(), &mut rng)
            .iter()
            .map(|rows| pooled.select_rows(rows).unwrap())
            .collect();
        let counts: Vec<AlleleCountVector> = parts.iter().map(|p| allele_counts(p, &snps).unwrap()).collect();
        let refs: Vec<&AlleleCountVector> = counts.iter().collect();
        ensure!(AlleleCountVector::merge(&refs).unwrap() == pooled_counts, "trial {trial}: counts differ");
        for w in snps.windows(2).chain([[snps[0].clone(), snps[24].clone()].as_slice()]) {
            let merged = merge_pair_stats(
                &parts.iter().map(|p| pair_stats(p, &w[0], &w[1]).unwrap()).collect::<Vec<PairCorrelationStats>>(),
            )
            .unwrap();
            ensure!(merged == pair_stats(&pooled, &w[0], &w[1]).unwrap(), "trial {trial}: pair sums differ");
        }
        for p in &parts {
            let lr = lr_matrix(p, &snps, &case_freqs, &ref_freqs).unwrap();
            for (r, id) in p.individuals().iter().enumerate() {
                let pr = pooled.individuals().iter().position(|x| x == id).unwrap();
                for (a, b) in lr.row(r).iter().zip(pooled_lr.row(pr)) {
                    let rel = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
                    worst = worst.max(if a == b { 0.0 } else { rel });
                }
            }
        }
    }
    ensure!(worst <= 1e-12, "LR relative error {worst:e} exceeds 1e-12");
    Ok(format!("100 random shardings, worst LR relative error {worst:e}"))
}

fn pearson(x: &[u8], y: &[u8]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().map(|&v| v as f64).sum::<f64>() / n;
    let my = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a as f64 - mx, b as f64 - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

fn formula_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ids = common::snps(2);
    let mut worst = 0.0f64;
    let mut trials = 0;
    while trials < 500 {
        let n = rng.gen_range(2..200);
        let (pl, pr) = (rng.gen::<f64>(), rng.gen::<f64>());
        let rows: Vec<Vec<u8>> = (0..n).map(|_| vec![rng.gen_bool(pl) as u8, rng.gen_bool(pr) as u8]).collect();
        let m = GenotypeMatrix::from_rows(Population::Case, (0..n).map(|i| format!("i{i}")).collect(), ids.clone(), &rows).unwrap();
        let (x, y) = (m.column(0), m.column(1));
        let constant = |c: &[u8]| c.iter().all(|&v| v == c[0]);
        if constant(x) || constant(y) {
            continue;
        }
        let r2 = r_squared(&pair_stats(&m, &ids[0], &ids[1]).unwrap()).unwrap();
        worst = worst.max((r2 - pearson(x, y).powi(2)).abs());
        trials += 1;
    }
    ensure!(worst <= 1e-12, "r^2 differs from squared Pearson by {worst:e}");
    ensure!(ld_p_value(0.0, 1000) == 1.0, "ld_p_value(0, n) != 1");
    let p = ld_p_value(3.841 / 1000.0, 1000);
    ensure!((0.049..=0.051).contains(&p), "ld_p_value at n*r^2 = 3.841 is {p}");

    let (ds, cfg) = common::synthetic(40, 300, 2, 8);
    let freqs = allele_counts(ds.reference(), &cfg.desired).unwrap().frequencies();
    let lr = lr_matrix(&ds.pooled_case(), &cfg.desired, &freqs, &freqs).unwrap();
    ensure!(lr.values.iter().all(|&v| v == 0.0), "p_hat = p gives a non-zero LR cell");
    Ok(format!("500 random pairs, worst |r^2 - pearson^2| = {worst:e}; chi2 p at 3.841 = {p:.5}"))
}

fn lr_power_contract() -> Outcome {
    let mut max_power = 0.0f64;
    for seed in 0..6 {
        let (ds, cfg) = common::synthetic(150, 1500, 3, 40 + seed);
        let central = centralized_pipeline(&ds.pooled_case(), ds.reference(), &cfg).unwrap();
        let ld = &central.lists.ld;
        let pos = positions_in(&cfg.desired, ld).unwrap();
        let case_freqs = allele_counts(&ds.pooled_case(), &cfg.desired).unwrap().select(&pos).frequencies();
        let ref_freqs = allele_counts(ds.reference(), &cfg.desired).unwrap().select(&pos).frequencies();
        let case_lr = lr_matrix(&ds.pooled_case(), ld, &case_freqs, &ref_freqs).unwrap();
        let null_lr = lr_matrix(ds.reference(), ld, &case_freqs, &ref_freqs).unwrap();
        let power = identification_power(&case_lr, &null_lr, &central.lists.lr, cfg.alpha).unwrap();
        ensure!(power < cfg.power_threshold, "seed {seed}: power on L_safe is {power}");
        max_power = max_power.max(power);
    }

    // case and reference share one distribution
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let freqs: Vec<f64> = (0..20).map(|_| rng.gen_range(0.1..0.5)).collect();
    let profile = SyntheticProfile::uniform(&freqs);
    let ds = generate_synthetic(4000, 4000, &profile, 2, 77).unwrap();
    let snps = profile.snp_ids();
    let case_freqs: AlleleFreqVector = allele_counts(&ds.pooled_case(), &snps).unwrap().frequencies();
    let ref_freqs = allele_counts(ds.reference(), &snps).unwrap().frequencies();
    let case_lr = lr_matrix(&ds.pooled_case(), &snps, &case_freqs, &ref_freqs).unwrap();
    let null_lr = lr_matrix(ds.reference(), &snps, &case_freqs, &ref_freqs).unwrap();
    let null_power = identification_power(&case_lr, &null_lr, &snps, 0.1).unwrap();
    ensure!((null_power - 0.1).abs() <= 0.05, "power under the null is {null_power}, expected 0.1 +- 0.05");
    Ok(format!("max power on L_safe {max_power:.3} < 0.9; null power {null_power:.3}"))
}

fn collusion_semantics() -> Outcome {
    let binom = |n: usize, k: usize| (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
    let mut runs = 0;
    for g in [3, 4, 5] {
        let (plain, _) = common::synthetic(60, 600, g, 200 + g as u64);
        let ds = common::linked(&plain, 3);
        let cfg = StudyConfig::new(ds.snps().to_vec(), g, 11);
        let mut modes: Vec<CollusionMode> = (1..g).map(CollusionMode::Fixed).collect();
        modes.push(CollusionMode::Conservative);
        for mode in modes {
            let plan = CollusionPlan::new(g, mode).unwrap();
            let expected = match mode {
                CollusionMode::Fixed(f) => binom(g, g - f),
                CollusionMode::Conservative => (1..g).map(|k| binom(g, k)).sum(),
            };
            ensure!(plan.combinations.len() == expected, "G={g} {mode:?}: {} combinations", plan.combinations.len());
            let cfg = cfg.clone().with_collusion(mode);
            let distributed = run_collusion_pipeline(&ds, &cfg, &plan).unwrap();
            let oracle = centralized_collusion_pipeline(&ds, &cfg, &plan).unwrap();
            ensure!(distributed.lists == oracle.lists, "G={g} {mode:?}: distributed and oracle lists differ");
            runs += 1;
        }
        let trivial = CollusionPlan::new(g, CollusionMode::Fixed(0)).unwrap();
        ensure!(
            run_collusion_pipeline(&ds, &cfg, &trivial).unwrap().lists == gendpr_lists(&ds, &cfg),
            "G={g}: Fixed(0) differs from the plain protocol"
        );
        ensure!(enumerate_combinations(g, 0).unwrap().len() == 1, "Fixed(0) is not a single combination");
    }
    Ok(format!("{runs} collusion runs match the phase-wise oracle"))
}

fn sample_messages(l: usize) -> Vec<Payload> {
    vec![
        Payload::AttestHello { measurement: TRUSTED_MEASUREMENT.into() },
        Payload::AttestAck { measurement: TRUSTED_MEASUREMENT.into(), case_size: 12 },
        Payload::CaseCounts { counts: (0..l as u32).collect() },
        Payload::PairStatsRequest { left: 1, right: 2 },
        Payload::PairStats {
            left: 1,
            right: 2,
            stats: PairCorrelationStats { sum_l: 3, sum_r: 4, sum_lr: 2, sum_l2: 3, sum_r2: 4, n: 9 },
        },
        Payload::LrSubmatrix { rows: 2, cols: 2, values: vec![0.5, -0.25, 1e-9, 3.0] },
        Payload::BroadcastMaf { retained: vec![0, 2, 5] },
        Payload::BroadcastLd { retained: vec![0, 5], case_freqs: vec![0.1, 0.2], ref_freqs: vec![0.3, 0.4] },
        Payload::BroadcastSafe { retained: vec![5] },
    ]
}

fn transport() -> Outcome {
    let a = Enclave::new(NodeId(0), TRUSTED_MEASUREMENT);
    let b = Enclave::new(NodeId(1), TRUSTED_MEASUREMENT);
    let (ka, kb) = attest_handshake(&a, &b, 3).unwrap();
    let mut tx = SecureChannel::new(NodeId(0), NodeId(1), &ka);
    let mut rx = SecureChannel::new(NodeId(1), NodeId(0), &kb);
    let payloads = sample_messages(50);
    let kinds: BTreeSet<MessageKind> = payloads.iter().map(|p| p.kind()).collect();
    ensure!(kinds.len() == MessageKind::ALL.len(), "sample does not cover every message kind");
    for p in payloads {
        let msg = ProtocolMessage::new(NodeId(0), NodeId(1), Some(4), p);
        let env = tx.seal(&msg).unwrap();
        ensure!(rx.unseal(&env).unwrap() == msg, "{:?} did not round-trip", msg.kind());
        ensure!(
            matches!(rx.unseal(&env), Err(Error::Replay { .. })),
            "{:?} replay accepted",
            msg.kind()
        );
        let mut flipped = tx.seal(&msg).unwrap();
        flipped.ciphertext[0] ^= 1;
        ensure!(
            matches!(rx.unseal(&flipped), Err(Error::Authentication { .. })),
            "{:?} bit flip accepted",
            msg.kind()
        );
    }

    let l = 1000;
    let (ds, cfg) = common::synthetic(l, 600, 3, 21);
    let out = run_protocol(&ds, &cfg, &ProtocolOptions { record_messages: true, ..Default::default() }).unwrap();
    let counts: Vec<_> = out.trace.iter().filter(|t| t.kind == MessageKind::CaseCounts).collect();
    ensure!(counts.len() == 2, "expected two count messages, saw {}", counts.len());
    ensure!(counts.iter().all(|t| t.plaintext_len == 4 * l), "CaseCounts payload is not 4*L bytes");

    let total = out.metrics.total();
    let trace_plain: u64 = out.trace.iter().map(|t| t.plaintext_len as u64).sum();
    let trace_sealed: u64 = out.trace.iter().map(|t| t.sealed_len as u64).sum();
    let encoded: u64 = out.messages.iter().map(|m| encode_payload(&m.payload).len() as u64).sum();
    ensure!(total.messages == out.trace.len() as u64, "message count mismatch");
    ensure!(total.plaintext_bytes == trace_plain && trace_plain == encoded, "plaintext byte totals disagree");
    ensure!(
        total.sealed_bytes == trace_sealed
            && trace_sealed == encoded + ENVELOPE_OVERHEAD as u64 * out.trace.len() as u64,
        "sealed byte totals disagree"
    );
    let cc = out.metrics.get(gendpr::protocol::Phase::Maf, MessageKind::CaseCounts);
    Ok(format!(
        "all {} kinds round-trip; {} messages, {} plaintext bytes; CaseCounts overhead {:.2}%",
        MessageKind::ALL.len(),
        total.messages,
        total.plaintext_bytes,
        100.0 * cc.relative_overhead()
    ))
}

/// Exhaustive over payload variants: adding one fails to compile here.
fn leaks_genome(p: &Payload) -> bool {
    match p {
        Payload::AttestHello { .. }
        | Payload::AttestAck { .. }
        | Payload::CaseCounts { .. }
        | Payload::PairStatsRequest { .. }
        | Payload::PairStats { .. }
        | Payload::LrSubmatrix { .. }
        | Payload::BroadcastMaf { .. }
        | Payload::BroadcastLd { .. }
        | Payload::BroadcastSafe { .. } => false,
    }
}

fn no_genome_leakage() -> Outcome {
    let allowed: BTreeSet<PayloadClass> = [
        PayloadClass::Attestation,
        PayloadClass::Counts,
        PayloadClass::PairSums,
        PayloadClass::Frequencies,
        PayloadClass::LrValues,
        PayloadClass::IndexList,
    ]
    .into();
    let (plain, _) = common::synthetic(80, 500, 4, 31);
    let ds = common::linked(&plain, 31);
    let mut seen = BTreeSet::new();
    let mut n = 0;
    for mode in [CollusionMode::Fixed(0), CollusionMode::Conservative] {
        let cfg = StudyConfig::new(ds.snps().to_vec(), 4, 31).with_collusion(mode);
        let out = run_protocol(&ds, &cfg, &ProtocolOptions { record_messages: true, ..Default::default() }).unwrap();
        ensure!(out.messages.len() == out.trace.len(), "recorded messages do not cover the trace");
        for m in &out.messages {
            ensure!(!leaks_genome(&m.payload), "{:?} carries genotype rows", m.kind());
            ensure!(m.payload.classes().iter().all(|c| allowed.contains(c)), "{:?} has a disallowed class", m.kind());
            // no payload is sized like a member's raw genotype rows
            if let Payload::LrSubmatrix { values, .. } = &m.payload {
                ensure!(values.iter().all(|v| v.is_finite()), "non-finite LR value");
            }
            seen.insert(m.kind());
        }
        n += out.messages.len();
    }
    ensure!(seen.len() == MessageKind::ALL.len(), "run did not exercise every message kind: {seen:?}");
    Ok(format!("{n} messages audited across {} kinds", seen.len()))
}

fn main() {
    let _ = env_logger::builder().is_test(true).try_init();
    let criteria: [Criterion; 9] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "G-invariance", g_invariance),
        (3, "naive divergence", naive_divergence),
        (4, "aggregation homomorphism", aggregation_homomorphism),
        (5, "formula identities", formula_identities),
        (6, "LR-test power contract", lr_power_contract),
        (7, "collusion semantics", collusion_semantics),
        (8, "transport", transport),
        (9, "no genome leakage", no_genome_leakage),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {n} {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL ({why})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
