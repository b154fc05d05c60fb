//! Acceptance gate: ten desk-scale criteria, one test per criterion.  Each
//! test prints exactly one "criterion N: PASS — …" line on success; a
//! failure panics with the offending instance spelled out.

use nilfactor::equidist::{
    character_sum_estimate, direct_defect, replay_witness, total_from_plain, total_verdict,
    EquidistOptions, ProgressionSpec,
};
use nilfactor::factor::{
    build_tree, factorise_once, leaf_elements, smooth_failure_search, ConstantsConfig,
    FactorisationTree, Leaf, TreeNode, TreeParams,
};
use nilfactor::group::{FilteredGroup, GroupElement, GroupRef};
use nilfactor::polyseq::{PolySequence, SequenceWalker};
use nilfactor::scalar::{phi, Rat, Scalar};
use nilfactor::smooth::SmoothBase;
use nilfactor::subgroup::Chart;
use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::Instant;

// ---------------------------------------------------------------------------
// deterministic generators
// ---------------------------------------------------------------------------

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Denominators for corpus rationals.  Two constraints keep every tree
/// certifiable at desk scale: each value is {2,3,5,7}-smooth (so any period a
/// leaf inherits stays inside the corpus smooth base), and each value is at
/// most the obstruction box k_box = 8 (so when a rational slope makes a window
/// verdict fail, the character that witnesses it is inside the search box and
/// the rational part can actually be absorbed).  Values above the verdict's
/// q_max (4 at the root scale) still exercise genuine tree splits.
const SMOOTH_DENS: &[i64] = &[1, 2, 3, 4, 5, 6, 7, 8];

fn exact_rational(r: &mut ChaCha8Rng) -> Scalar {
    let d = SMOOTH_DENS[r.gen_range(0..SMOOTH_DENS.len())];
    let mut n = r.gen_range(-2 * d..=2 * d);
    if n == 0 {
        n = 1;
    }
    Scalar::from_rat(Rat::new(n.into(), d.into()))
}

/// Mixed coefficient: mostly exact rationals, sometimes perturbed by a tiny
/// golden-ratio multiple of a dyadic.  The perturbation scale 2^-28..2^-36 is
/// chosen so that even a degree-2 coefficient keeps its drift norm N^2 * |θ|
/// below the obstruction-absorption threshold at N <= 2048: the irrational
/// part is then always certifiably slow-varying and lands in the smooth
/// factor, while the rational part drives the interesting splits.  Larger
/// irrational parts sit in a regime this window length cannot certify either
/// way (window averages over ~delta*N points are noise-dominated), so they do
/// not belong in a regression corpus that demands a clean verdict at every
/// leaf.
fn mixed_scalar(r: &mut ChaCha8Rng) -> Scalar {
    if r.gen_range(0..10) < 6 {
        exact_rational(r)
    } else {
        let e: u32 = r.gen_range(28..=36);
        let p: i64 = r.gen_range(1..=7);
        let dy = Rat::new(BigInt::from(p), BigInt::from(1i64) << e);
        phi(192).scale(&dy).add(&exact_rational(r))
    }
}

/// Denominator families for corpus sequences, one family per sequence.
/// Reindexing onto a progression rewrites coefficients as integer
/// combinations of the old ones, so child denominators always divide the lcm
/// of the parent's.  Keeping that lcm at most the obstruction box (8) means
/// one in-box character clears any rational part a split can manufacture.
/// Mixing families across coefficients (say 5 and 8) can produce a
/// denominator like 10 whose clearing character lies outside the box, while
/// the height cap may forbid the extra split that would reduce it.
const DEN_FAMILIES: &[&[i64]] = &[&[1, 2, 4, 8], &[1, 3, 6], &[1, 5], &[1, 7], &[1, 2, 3, 6]];

fn family_scalar(r: &mut ChaCha8Rng, fam: &[i64]) -> Scalar {
    let exact = |r: &mut ChaCha8Rng| {
        let d = fam[r.gen_range(0..fam.len())];
        let mut n = r.gen_range(-2 * d..=2 * d);
        if n == 0 {
            n = 1;
        }
        Scalar::from_rat(Rat::new(n.into(), d.into()))
    };
    if r.gen_range(0..10) < 6 {
        exact(r)
    } else {
        let e: u32 = r.gen_range(28..=36);
        let p: i64 = r.gen_range(1..=7);
        let dy = Rat::new(BigInt::from(p), BigInt::from(1i64) << e);
        phi(192).scale(&dy).add(&exact(r))
    }
}

/// Random sequence with level-j coefficient supported on the j-th filtration
/// subgroup (g_0 unrestricted).
fn random_seq(
    group: &GroupRef,
    r: &mut ChaCha8Rng,
    gen: &mut dyn FnMut(&mut ChaCha8Rng) -> Scalar,
) -> PolySequence {
    let mut coeffs = Vec::new();
    for j in 0..=group.degree {
        let mut coords = vec![Scalar::zero(); group.dim];
        if j == 0 {
            for c in coords.iter_mut() {
                *c = gen(r);
            }
        } else {
            for &i in &group.filtration[j] {
                coords[i] = gen(r);
            }
        }
        coeffs.push(GroupElement::new(coords));
    }
    PolySequence::from_taylor(group.clone(), coeffs).expect("generated sequence")
}

fn corpus_presets() -> Vec<GroupRef> {
    vec![
        FilteredGroup::preset("torus:1", 1).unwrap(),
        FilteredGroup::preset("torus:1", 2).unwrap(),
        FilteredGroup::preset("torus:2", 1).unwrap(),
        FilteredGroup::preset("heisenberg", 2).unwrap(),
    ]
}

fn corpus_config() -> ConstantsConfig {
    ConstantsConfig {
        k_box: 8,
        cap_exp: 8,
        ..ConstantsConfig::default()
    }
}

// The corpus base must contain every prime up to the obstruction box k_box
// (= 8 in corpus_config): rational parts produced during descent have
// denominators dividing character gcds ≤ k_box, so a narrower base could be
// handed leaf periods it can never call smooth.
fn corpus_params(n: u64, e_param: u32, r_param: u64, seed: u64) -> TreeParams {
    TreeParams {
        n_len: n,
        t_len: n,
        b_exp: 2,
        e_param,
        r_param,
        q0: 2,
        base: SmoothBase::Fixed(8),
        seed,
    }
}

struct CorpusTree {
    label: String,
    seq: PolySequence,
    params: TreeParams,
    config: ConstantsConfig,
    tree: FactorisationTree,
}

/// The shared regression corpus: 100 randomized trees over the presets,
/// reused by the height/partition/period/search criteria.
fn corpus() -> &'static Vec<CorpusTree> {
    static CORPUS: OnceLock<Vec<CorpusTree>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let presets = corpus_presets();
        let config = corpus_config();
        let mut out = Vec::new();
        for i in 0..100u64 {
            let mut r = rng(0xC0FFEE + i);
            let group = &presets[(i as usize) % presets.len()];
            let n = [1024u64, 2048][(i as usize / 4) % 2];
            let (e_param, r_param) = if i % 3 == 0 { (2, 8) } else { (1, 2) };
            let fam = DEN_FAMILIES[(i as usize) % DEN_FAMILIES.len()];
            let mut gen = |rr: &mut ChaCha8Rng| family_scalar(rr, fam);
            let seq = random_seq(group, &mut r, &mut gen);
            let params = corpus_params(n, e_param, r_param, 7000 + i);
            let tree = build_tree(&seq, &params, &config)
                .unwrap_or_else(|e| panic!("corpus tree {i} failed to build: {e}"));
            out.push(CorpusTree {
                label: format!("corpus[{i}] {} N={n} E={e_param} R={r_param}", group.name),
                seq,
                params,
                config: config.clone(),
                tree,
            });
        }
        out
    })
}

fn walk_leaves<'a>(node: &'a TreeNode, out: &mut Vec<(&'a TreeNode, &'a Leaf)>) {
    if let Some(l) = &node.leaf {
        out.push((node, l));
    }
    if let Some(s) = &node.split {
        for c in &s.children {
            walk_leaves(c, out);
        }
    }
}

fn exact_equal(a: &GroupElement, b: &GroupElement) -> bool {
    a.coords.len() == b.coords.len()
        && a.coords.iter().zip(&b.coords).all(|(x, y)| match (x, y) {
            (Scalar::Exact(p), Scalar::Exact(q)) => p == q,
            _ => false,
        })
}

/// Walk two sequences over [from, from+count) and require exact pointwise
/// equality of every coordinate (all values must stay exact rationals).
fn assert_pointwise_exact(a: &PolySequence, b: &PolySequence, from: i64, count: u64, what: &str) {
    let mut wa = SequenceWalker::new(a, from).expect(what);
    let mut wb = SequenceWalker::new(b, from).expect(what);
    for step in 0..count {
        let (x, y) = (wa.current(), wb.current());
        assert!(
            exact_equal(x, y),
            "{what}: mismatch at n = {} ({x:?} vs {y:?})",
            from + step as i64
        );
        wa.step().expect(what);
        wb.step().expect(what);
    }
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_reconstruction_identity_exact() {
    let start = Instant::now();
    let n_len: u64 = 1 << 12;
    let presets = corpus_presets();
    let config = corpus_config();
    let mut leaves_checked = 0usize;
    for i in 0..50u64 {
        let mut r = rng(0xAB1E + i);
        let group = &presets[(i as usize) % presets.len()];
        let seq = random_seq(group, &mut r, &mut exact_rational);

        let f = factorise_once(&seq, n_len, 2.0, 2, &config, 100 + i)
            .unwrap_or_else(|e| panic!("factorise {i} on {}: {e}", group.name));
        let recon = f.reconstruct().unwrap();
        assert_pointwise_exact(&recon, &seq, 0, n_len, &format!("single-step {i}"));

        let params = corpus_params(n_len, 1, 2, 500 + i);
        let tree = build_tree(&seq, &params, &config)
            .unwrap_or_else(|e| panic!("tree {i} on {}: {e}", group.name));
        let mut pairs = Vec::new();
        walk_leaves(&tree.root, &mut pairs);
        for (node, leaf) in pairs {
            let recon = leaf
                .epsilon_tilde
                .pointwise_product(&leaf.g_prime)
                .and_then(|p| p.pointwise_product(&leaf.gamma_tilde))
                .unwrap();
            let restricted = seq.reindex(leaf.q as i64, leaf.r as i64).unwrap();
            assert_pointwise_exact(
                &recon,
                &restricted,
                leaf.m_lo,
                node.node_len,
                &format!("tree {i} leaf q={} r={}", leaf.q, leaf.r),
            );
            leaves_checked += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 120,
        "runtime budget exceeded: {elapsed:?}"
    );
    println!(
        "criterion 1: PASS — 50 exact sequences over 4 presets, {} leaves, \
         reconstruction exact at zero tolerance in {elapsed:?}",
        leaves_checked
    );
}

#[test]
fn criterion_02_tree_height_bounded_by_dimension() {
    for t in corpus() {
        let m = t.seq.group.dim;
        assert!(
            t.tree.height <= m,
            "{}: height {} exceeds dim {m}",
            t.label,
            t.tree.height
        );
    }
    println!(
        "criterion 2: PASS — {} randomized trees, height ≤ dim G in every case",
        corpus().len()
    );
}

#[test]
fn criterion_03_leaf_progressions_partition_range() {
    let mut total_leaves = 0usize;
    for t in corpus() {
        let t_len = t.params.t_len;
        let base = t.params.base.resolve(&BigInt::from(t.params.n_len));
        let cap = t.params.r_param.max(2).pow(t.config.cap_exp);
        let mut counts = vec![0u32; (t_len + 1) as usize];
        let mut pairs = Vec::new();
        walk_leaves(&t.tree.root, &mut pairs);
        for (_, leaf) in &pairs {
            assert!(
                base.is_smooth(leaf.q),
                "{}: difference {} not smooth",
                t.label,
                leaf.q
            );
            assert!(
                leaf.q <= cap,
                "{}: difference {} exceeds R-power cap {cap}",
                t.label,
                leaf.q
            );
            for n in leaf_elements(leaf, t_len) {
                counts[n as usize] += 1;
            }
        }
        for n in 1..=t_len {
            assert!(
                counts[n as usize] == 1,
                "{}: element {n} covered {} times",
                t.label,
                counts[n as usize]
            );
        }
        total_leaves += pairs.len();
    }
    println!(
        "criterion 3: PASS — {} trees / {} leaves: progressions partition 1..=T, \
         all differences smooth and within the R-power cap",
        corpus().len(),
        total_leaves
    );
}

#[test]
fn criterion_04_leaf_periods_smooth_bounded() {
    for t in corpus() {
        let base = t.params.base.resolve(&BigInt::from(t.params.n_len));
        let m = t.seq.group.dim;
        let q_bound = t.tree.q_final.max(1);
        let mut pairs = Vec::new();
        walk_leaves(&t.tree.root, &mut pairs);
        for (_, leaf) in &pairs {
            assert!(
                leaf.q_gamma <= q_bound,
                "{}: period {} exceeds Q = {q_bound}",
                t.label,
                leaf.q_gamma
            );
            assert!(
                base.is_smooth(leaf.q_gamma),
                "{}: period {} not smooth",
                t.label,
                leaf.q_gamma
            );
            assert!(
                leaf.verification.rational_factor_count <= m,
                "{}: {} rational factors exceed dim {m}",
                t.label,
                leaf.verification.rational_factor_count
            );
        }
    }
    println!(
        "criterion 4: PASS — every leaf period ≤ Q, smooth, and composed of ≤ dim G \
         rational factors"
    );
}

#[test]
fn criterion_05_oracle_envelope_brackets_defect() {
    let group = FilteredGroup::preset("torus:1", 1).unwrap();
    let chart = Chart::ambient(group.clone()).unwrap();
    let n_len: u64 = 4096;
    let opts = EquidistOptions {
        k_box: 8,
        ..EquidistOptions::default()
    };
    let prog = ProgressionSpec {
        q_max: 8,
        min_len: 1,
    };
    let mut worst: f64 = 1.0;
    for i in 0..50u64 {
        let mut r = rng(0x05AC + i);
        let seq = random_seq(&group, &mut r, &mut mixed_scalar);
        let report = direct_defect(&chart, &seq, n_len, &opts, prog).unwrap();
        let estimate = character_sum_estimate(&chart, &seq, n_len, &opts, prog).unwrap();
        assert!(
            report.defect > 0.0,
            "instance {i}: degenerate zero defect (generator bug)"
        );
        let ratio = estimate / report.defect;
        assert!(
            (1.0..=4.0).contains(&ratio),
            "instance {i}: defect {:.6e} vs envelope {estimate:.6e} (ratio {ratio:.3}) \
             outside [1, 4]",
            report.defect
        );
        worst = if (ratio - 1.0).abs() > (worst - 1.0).abs() {
            ratio
        } else {
            worst
        };
    }
    println!(
        "criterion 5: PASS — 50 sequences: envelope/defect ratio within [1, 4] \
         (most extreme ratio {worst:.3})"
    );
}

#[test]
fn criterion_06_golden_ratio_benchmark() {
    let group = FilteredGroup::preset("torus:1", 1).unwrap();
    let chart = Chart::ambient(group.clone()).unwrap();
    let n_len: u64 = 1 << 16;
    let seq = PolySequence::from_taylor(
        group.clone(),
        vec![
            group.identity(),
            GroupElement::new(vec![phi(nilfactor::scalar::DEFAULT_PRECISION_BITS)]),
        ],
    )
    .unwrap();
    let opts = EquidistOptions {
        k_box: 16,
        ..EquidistOptions::default()
    };
    let prog = ProgressionSpec {
        q_max: 16,
        min_len: 1,
    };
    let report = direct_defect(&chart, &seq, n_len, &opts, prog).unwrap();
    let bound = 10.0 * (n_len as f64).ln() / n_len as f64;
    assert!(
        report.defect <= bound,
        "defect {:.6e} exceeds 10·ln(N)/N = {bound:.6e}",
        report.defect
    );
    // frozen oracle value from the certified sweep itself (determinism guard)
    let frozen = 1.563_971_266_169_114_5e-3;
    assert!(
        (report.defect - frozen).abs() < 1e-15,
        "defect {:.16e} drifted from frozen oracle value {frozen:.16e}",
        report.defect
    );
    let w = report.witness.as_ref().expect("nonzero defect has witness");
    let replay = replay_witness(&chart, &seq, n_len, w).unwrap();
    assert!(
        (replay - report.defect).abs() < 1e-15,
        "witness replay {replay:.6e} does not reproduce defect"
    );
    println!(
        "criterion 6: PASS — golden line at N = 2^16: defect {:.6e} ≤ {bound:.6e}, \
         witness (k = {}, q = {}, r = {}) replays exactly",
        report.defect,
        w.k[0],
        w.q,
        w.r
    );
}

#[test]
fn criterion_07_plain_to_total_transfer_sweep() {
    let group = FilteredGroup::preset("torus:1", 1).unwrap();
    let chart = Chart::ambient(group.clone()).unwrap();
    let n_len: u64 = 4096;
    let delta: f64 = 0.5;
    let a_exp = 4.0;
    let b_cfg = 2.0;
    let exponent = total_from_plain(a_exp, b_cfg).unwrap();
    let plain_bound = delta.powf(a_exp);
    let total_delta = delta.powf(exponent);

    // plain certification must cover every frequency k·q the total verdict
    // can form: |k| ≤ 12 with effective q ≤ 1/total_delta = 4.
    let cert_opts = EquidistOptions {
        k_box: 48,
        ..EquidistOptions::default()
    };
    let cert_prog = ProgressionSpec {
        q_max: 1,
        min_len: n_len,
    };
    let verdict_opts = EquidistOptions {
        k_box: 12,
        q_max_override: Some(64),
        ..EquidistOptions::default()
    };

    let mut certified = 0usize;
    let mut draws = 0u64;
    while certified < 20 {
        draws += 1;
        assert!(draws < 400, "generator failed to certify 20 sequences");
        let mut r = rng(0x7AA0 + draws);
        let seq = random_seq(&group, &mut r, &mut mixed_scalar);
        let plain = direct_defect(&chart, &seq, n_len, &cert_opts, cert_prog).unwrap();
        if plain.defect > plain_bound {
            continue; // not certified plain-equidistributed; skip
        }
        certified += 1;
        let (pass, rep) = total_verdict(&chart, &seq, n_len, total_delta, &verdict_opts).unwrap();
        assert!(
            pass,
            "certified sequence (draw {draws}, plain defect {:.6e} ≤ {plain_bound:.6e}) \
             fails the total verdict at {total_delta} (witness {:?})",
            plain.defect, rep.witness
        );
    }
    println!(
        "criterion 7: PASS — 20 sequences with plain defect ≤ {plain_bound} all pass the \
         total verdict at tolerance {total_delta} with q ≤ 64 fully enumerated \
         ({draws} draws)"
    );
}

#[test]
fn criterion_08_leaf_residuals_survive_failure_search() {
    let mut searched = 0usize;
    for t in corpus() {
        let base = t.params.base.resolve(&BigInt::from(t.params.n_len));
        let capped = ConstantsConfig {
            q_tilde_cap: 1000,
            ..t.config.clone()
        };
        let mut pairs = Vec::new();
        walk_leaves(&t.tree.root, &mut pairs);
        for (node, leaf) in &pairs {
            let (found, bound) = smooth_failure_search(
                &leaf.subgroup,
                &leaf.g_prime,
                node.node_len,
                leaf.q,
                leaf.q_gamma,
                t.params.r_param,
                t.params.e_param,
                2,
                t.tree.q_final,
                &base,
                &capped,
            )
            .unwrap();
            assert!(
                found.is_none(),
                "{}: leaf q={} r={} fails at dilation {} (bound {bound})",
                t.label,
                leaf.q,
                leaf.r,
                found.unwrap().q_tilde
            );
            searched += 1;
        }
    }
    println!(
        "criterion 8: PASS — {searched} leaf residuals searched to cap 10³: no smooth \
         dilation defeats the declared tolerance"
    );
}

#[test]
fn criterion_09_planted_failure_detected_and_resolved() {
    let group = FilteredGroup::preset("torus:1", 1).unwrap();
    let chart = Chart::ambient(group.clone()).unwrap();
    let n_len: u64 = 1 << 20;
    // α = 2⁻¹² + φ·2⁻³⁰: rational spike visible only after dilation by 16
    let alpha = phi(256)
        .scale(&Rat::new(BigInt::from(1), BigInt::from(1u64 << 30)))
        .add(&Scalar::from_rat(Rat::new(
            BigInt::from(1),
            BigInt::from(1u64 << 12),
        )));
    let seq = PolySequence::from_taylor(
        group.clone(),
        vec![group.identity(), GroupElement::new(vec![alpha])],
    )
    .unwrap();
    let base = SmoothBase::Primes([2].into_iter().collect());
    let resolved = base.resolve(&BigInt::from(n_len));
    let config = ConstantsConfig {
        k_box: 256,
        cap_exp: 8,
        ..ConstantsConfig::default()
    };
    let (found, bound) =
        smooth_failure_search(&chart, &seq, n_len, 1, 1, 8, 2, 2, 2, &resolved, &config).unwrap();
    let failure = found.unwrap_or_else(|| panic!("planted failure not found (bound {bound})"));
    assert_eq!(failure.q_tilde, 16, "expected the planted dilation 16");
    assert_eq!(
        failure.witness.k,
        vec!["256".to_string()],
        "expected the planted witness frequency 256"
    );

    let params = TreeParams {
        n_len,
        t_len: n_len,
        b_exp: 2,
        e_param: 2,
        r_param: 8,
        q0: 2,
        base,
        seed: 9,
    };
    let tree = build_tree(&seq, &params, &config).unwrap();
    assert!(
        tree.all_leaves_pass(),
        "leaf verification failed: {:?}",
        tree.leaves()
            .iter()
            .filter(|l| !l.verification.pass)
            .map(|l| (l.q, l.r, l.verification.reasons.clone()))
            .collect::<Vec<_>>()
    );
    println!(
        "criterion 9: PASS — planted α = 2⁻¹² + φ·2⁻³⁰ detected at dilation 16 with \
         witness k = 256; resulting {}-leaf tree verifies",
        tree.leaf_count
    );
}

#[test]
fn criterion_10_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(
        &spec_path,
        r#"{
  "group": "torus:1",
  "coeffs": [["0"], ["phi"]],
  "N": 16384,
  "R": 2,
  "E": 1,
  "seed": 11
}"#,
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_nilfactor");
    let mut artifacts = Vec::new();
    for cmd in ["tree", "equidist", "factorise", "oracle"] {
        let mut outs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{cmd}_{run}.json"));
            let status = std::process::Command::new(bin)
                .args([
                    cmd,
                    "--spec",
                    spec_path.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ])
                .status()
                .unwrap();
            assert!(status.success(), "{cmd} run {run} exited {status}");
            outs.push(std::fs::read(&out).unwrap());
        }
        assert!(
            outs[0] == outs[1],
            "{cmd}: two runs with identical spec+seed differ"
        );
        artifacts.push((cmd, outs[0].len()));
    }
    println!(
        "criterion 10: PASS — repeated runs byte-identical for {:?}",
        artifacts
    );
}

