//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::{BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rmsub::code::{
    complexity_score, rm_dimension, rm_generator, score_all_selections, search_selection, GeneratorSpec, Objective,
    SearchOptions, SEARCH_CAP,
};
use rmsub::decoders::{fht_map_rm1, map_decode, soft_map, Aggregation, BlockDecoder, MlDecoder, RpaDecoder, RpaVariant};
use rmsub::gf2::{enumerate_codebook, BinMatrix, BinVector, XorBasis, ENUMERATION_CAP_LOG2};
use rmsub::llr::hard_decision;
use rmsub::plan::{BottomCode, DecodingPlan};
use rmsub::projection::{one_dim_subspaces, project_generator, project_hard, CosetMap};
use rmsub::pruning::{
    retained_ranks, select_by_rank, select_random, train_weights, PruningProfile, RankDirection, TrainConfig,
};
use rmsub::sim::channel::{awgn_llr, random_codeword, sigma_from_ebn0_db};
use rmsub::sim::stats::{crossing_db, paired_difference_se, standard_error};
use rmsub::sim::{run_bler, stream_seed, DecoderEntry, GridAxis, SimOptions, SimReport, TimeSharing};

const N_MAX: usize = 3;
const TRIALS: u64 = 10_000;
const SEED: u64 = 7;

type Outcome = (bool, String);

fn best15_spec() -> GeneratorSpec {
    GeneratorSpec::new(6, 14, vec![15, 23, 27, 29, 30, 39, 43]).unwrap()
}

fn entry<'a>(decoder: &'a dyn BlockDecoder, label: &str) -> DecoderEntry<'a> {
    DecoderEntry {
        decoder,
        label: label.into(),
        pruning: label.into(),
        q0: None,
    }
}

fn soft<'a>(plan: &'a DecodingPlan, profile: &PruningProfile) -> RpaDecoder<'a> {
    RpaDecoder::new(plan, profile, RpaVariant::Soft(Aggregation::Soft), N_MAX).unwrap()
}

fn gap_db(report: &SimReport, worse: &str, better: &str) -> Option<f64> {
    let w = crossing_db(&report.curve(worse), 1e-2)?;
    let b = crossing_db(&report.curve(better), 1e-2)?;
    Some(w - b)
}

/// Errors, discordance and paired SE of decoder `a` against `b` at point `p`.
fn paired(report: &SimReport, p: usize, a: usize, b: usize) -> (u64, u64, f64) {
    let pt = &report.points[p];
    let se = paired_difference_se(pt.discord[a][b], pt.discord[b][a], pt.trials);
    (pt.block_errors[a], pt.block_errors[b], se * pt.trials as f64)
}

fn c1_extremes() -> Outcome {
    let all = score_all_selections(6, 14, SEARCH_CAP).unwrap();
    let values: BTreeSet<u64> = all.iter().map(|(_, s)| s.full_l).collect();
    let v: Vec<u64> = values.iter().copied().collect();
    let (min, max, second) = (v[0], v[v.len() - 1], v[v.len() - 2]);
    (
        all.len() == 6435 && max == 2568 && second == 2532 && min == 1482,
        format!("{} selections, max {max}, second max {second}, min {min}", all.len()),
    )
}

fn c2_best_subset() -> Outcome {
    let out = search_selection(6, 14, Objective::MinSubsetL(15), SearchOptions::default()).unwrap();
    let all = score_all_selections(6, 14, SEARCH_CAP).unwrap();
    let brute = all.iter().map(|(_, s)| s.best_subset_l(15)).min().unwrap();
    (
        out.value == 108 && brute == 108 && out.score.full_l == 2412 && out.exhaustive,
        format!(
            "min best-15 L {} (brute {brute}), full L {}, rows {:?}",
            out.value, out.score.full_l, out.spec.extra_rows
        ),
    )
}

fn c3_rank_profiles() -> Outcome {
    let plan = DecodingPlan::build(&best15_spec()).unwrap();
    let mut max = retained_ranks(&plan, &select_by_rank(&plan, 15, RankDirection::Max).unwrap()).unwrap();
    let mut min = retained_ranks(&plan, &select_by_rank(&plan, 15, RankDirection::Min).unwrap()).unwrap();
    max.sort_unstable();
    min.sort_unstable();
    let want_min: Vec<usize> = [2, 2, 2].into_iter().chain([3; 12]).collect();
    (
        max == vec![6; 15] && min == want_min,
        format!("maxRank {max:?}, minRank {min:?}"),
    )
}

fn random_spec(rng: &mut ChaCha8Rng, m: usize) -> GeneratorSpec {
    let r = rng.random_range(1..m);
    let (lo, hi) = (rm_dimension(m, r - 1), rm_dimension(m, r));
    let k = rng.random_range(lo + 1..=hi);
    let candidates: Vec<usize> = (0..1usize << m).filter(|i| i.count_ones() as usize == m - r).collect();
    let extra = sample(rng, candidates.len(), k - lo)
        .into_iter()
        .map(|j| candidates[j])
        .collect();
    GeneratorSpec::new(m, k, extra).unwrap()
}

fn c4_rank_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut violations, mut bottoms) = (0usize, 0usize);
    for i in 0..100 {
        let m = [4, 5, 6][i % 3];
        let spec = random_spec(&mut rng, m);
        let bound = m - spec.order() + 2;
        let score = complexity_score(&spec).unwrap();
        bottoms += score.bottom_count();
        violations += score.bottom_ranks.iter().filter(|&&r| r > bound).count();
        if m <= 5 {
            let plan = DecodingPlan::build(&spec).unwrap();
            let direct: Vec<usize> = plan.bottoms().iter().map(|(_, b)| b.rank()).collect();
            violations += direct.iter().filter(|&&r| r > bound).count();
            assert_eq!(direct, score.bottom_ranks, "plan and table ranks disagree for {spec:?}");
        }
    }
    (violations == 0, format!("{violations} violations over {bottoms} bottom projections"))
}

fn c5_projected_codebooks() -> Outcome {
    let mut specs = Vec::new();
    let candidates: Vec<usize> = (0..16usize).filter(|i| i.count_ones() == 2).collect();
    for mask in 1u32..(1 << candidates.len()) {
        let extra: Vec<usize> = (0..candidates.len()).filter(|&j| mask >> j & 1 == 1).map(|j| candidates[j]).collect();
        if (1..=5).contains(&extra.len()) {
            specs.push(GeneratorSpec::new(4, 5 + extra.len(), extra).unwrap());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let chosen = sample(&mut rng, specs.len(), 50).into_vec();

    let rm31 = rm_generator(3, 1).unwrap();
    let mut basis = XorBasis::new(8);
    for r in 0..rm31.rows() {
        basis.insert(rm31.row_words(r));
    }
    let lines: Vec<CosetMap> = one_dim_subspaces(4).iter().map(CosetMap::new).collect();
    let (mut violations, mut checked) = (0usize, 0usize);
    for &i in &chosen {
        let gen = rmsub::code::subcode_generator(&specs[i]).unwrap();
        let book = enumerate_codebook(&gen, ENUMERATION_CAP_LOG2).unwrap();
        for line in &lines {
            let projected: HashSet<BinVector> = (0..book.codewords.rows())
                .map(|w| project_hard(&book.codewords.row(w), line).unwrap())
                .collect();
            let via_gen = enumerate_codebook(&project_generator(&gen, line).unwrap(), ENUMERATION_CAP_LOG2).unwrap();
            let via_gen: HashSet<BinVector> = (0..via_gen.codewords.rows()).map(|w| via_gen.codewords.row(w)).collect();
            if projected != via_gen {
                violations += 1;
            }
            violations += projected.iter().filter(|c| !basis.contains(c.words())).count();
            checked += projected.len();
        }
    }
    (
        violations == 0 && chosen.len() == 50,
        format!("{} specs x {} lines, {checked} projected codewords, {violations} violations", chosen.len(), lines.len()),
    )
}

fn gaussian_llr(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = rng.random_range(0.5..4.0);
    (0..n)
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            scale * x
        })
        .collect()
}

/// True if the best two correlations are within numerical tie distance.
fn has_tie(llr: &[f64], book: &BinMatrix) -> bool {
    let mut s: Vec<f64> = (0..book.rows())
        .map(|i| llr.iter().enumerate().map(|(z, l)| if book.get(i, z) { -l } else { *l }).sum())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let mag: f64 = llr.iter().map(|l| l.abs()).sum();
    s.len() > 1 && s[0] - s[1] <= 1e-9 * mag.max(1.0)
}

fn c6_soft_map() -> Outcome {
    let mut classes: Vec<BottomCode> = Vec::new();
    let mut seen = HashSet::new();
    let plans = [
        DecodingPlan::build(&best15_spec()).unwrap(),
        DecodingPlan::build(&GeneratorSpec::new(5, 20, vec![3, 5, 6, 9]).unwrap()).unwrap(),
    ];
    for plan in &plans {
        for (_, b) in plan.bottoms() {
            let book = &b.codebook().codewords;
            let key: BTreeSet<Vec<u8>> = (0..book.rows()).map(|i| book.row(i).to_bits()).collect();
            if seen.insert(key) {
                classes.push(b.clone());
            }
        }
    }
    let draws = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst, mut untied) = (1.0f64, 0usize);
    let mut ranks = BTreeSet::new();
    for b in &classes {
        let book = &b.codebook().codewords;
        let mut agree = 0;
        for _ in 0..draws {
            let l = gaussian_llr(&mut rng, b.len());
            let soft = hard_decision(&soft_map(&l, b).unwrap());
            if soft == map_decode(&l, book).unwrap().codeword {
                agree += 1;
            } else if !has_tie(&l, book) {
                untied += 1;
            }
        }
        worst = worst.min(agree as f64 / draws as f64);
        ranks.insert(b.rank());
    }
    (
        worst >= 0.999 && untied == 0,
        format!(
            "{} classes (ranks {ranks:?}), worst agreement {:.4}, {untied} untied discrepancies",
            classes.len(),
            worst
        ),
    )
}

fn c7_fht() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut mismatches, mut ties, mut total) = (0usize, 0usize, 0usize);
    for m in 2..=6 {
        let book = enumerate_codebook(&rm_generator(m, 1).unwrap(), ENUMERATION_CAP_LOG2).unwrap().codewords;
        for _ in 0..1000 {
            let l = gaussian_llr(&mut rng, 1 << m);
            if has_tie(&l, &book) {
                ties += 1;
                continue;
            }
            total += 1;
            if fht_map_rm1(&l, m).unwrap().codeword != map_decode(&l, &book).unwrap().codeword {
                mismatches += 1;
            }
        }
    }
    (mismatches == 0, format!("{total} untied draws, {mismatches} mismatches, {ties} ties excluded"))
}

/// Shared run for the ordering and pruning criteria.
fn ordering_report() -> SimReport {
    let spec = best15_spec();
    let plan = DecodingPlan::build(&spec).unwrap();
    let full = PruningProfile::full();
    let ml = MlDecoder::new(&spec).unwrap();
    let s_full = soft(&plan, &full);
    let hard = RpaDecoder::new(&plan, &full, RpaVariant::Hard, N_MAX).unwrap();
    let min15 = select_by_rank(&plan, 15, RankDirection::Min).unwrap();
    let max15 = select_by_rank(&plan, 15, RankDirection::Max).unwrap();
    let (s_min, s_max) = (soft(&plan, &min15), soft(&plan, &max15));
    let entries = [
        entry(&ml, "map"),
        entry(&s_full, "soft"),
        entry(&hard, "hard"),
        entry(&s_min, "min15"),
        entry(&s_max, "max15"),
    ];
    let grid: Vec<f64> = (0..=8).map(|i| 1.0 + 0.5 * i as f64).collect();
    run_bler(&spec, &entries, GridAxis::EbN0, &grid, &SimOptions::new(TRIALS, SEED)).unwrap()
}

fn c8_ordering(report: &SimReport) -> Outcome {
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for (p, row) in report.rows_for("map").enumerate() {
        if row.ebn0_db > 4.0 + 1e-9 {
            continue;
        }
        let (e_map, e_soft, _) = paired(report, p, 0, 1);
        let (e_soft2, e_hard, se) = paired(report, p, 1, 2);
        ok &= e_map <= e_soft && e_soft2 as f64 <= e_hard as f64 + 3.0 * se;
        worst = worst.max((e_soft2 as f64 - e_hard as f64) / se.max(1e-12));
    }
    let gain = gap_db(report, "hard", "soft");
    let consistent = gain.is_some_and(|g| g > 0.0 && g <= 0.3);
    (
        ok && consistent,
        format!(
            "MAP <= soft <= hard + 3SE on 1-4 dB (worst soft-hard {worst:.2} SE); soft gain over hard at 1e-2: {}",
            gain.map_or("n/a".into(), |g| format!("{g:.3} dB"))
        ),
    )
}

fn c9_pruning(report: &SimReport) -> Outcome {
    let min_gap = gap_db(report, "min15", "soft");
    let max_gap = gap_db(report, "max15", "soft");
    let ok = min_gap.is_some_and(|g| g <= 0.2) && max_gap.is_some_and(|g| g >= 0.5);
    let fmt = |g: Option<f64>| g.map_or("n/a".into(), |g| format!("{g:.3} dB"));
    (ok, format!("minRank-15 gap {}, maxRank-15 gap {}", fmt(min_gap), fmt(max_gap)))
}

fn c10_trainer() -> Outcome {
    let spec = best15_spec();
    let plan = DecodingPlan::build(&spec).unwrap();
    let cfg = TrainConfig::default();
    let t = Instant::now();
    let trained = train_weights(&plan, &cfg).unwrap();
    let train_secs = t.elapsed().as_secs_f64();

    let mut profiles = vec![
        trained.profile.clone(),
        select_by_rank(&plan, 15, RankDirection::Min).unwrap(),
        PruningProfile::full(),
    ];
    profiles.extend((0..5).map(|s| select_random(&plan, 15, 100 + s).unwrap()));
    let decoders: Vec<RpaDecoder> = profiles.iter().map(|p| soft(&plan, p)).collect();
    let labels = ["trained", "min15", "full", "rand0", "rand1", "rand2", "rand3", "rand4"];
    let entries: Vec<DecoderEntry> = decoders.iter().zip(labels).map(|(d, l)| entry(d, l)).collect();
    let grid = [3.0, 3.5, 4.0];
    let report = run_bler(&spec, &entries, GridAxis::EbN0, &grid, &SimOptions::new(TRIALS, SEED + 3)).unwrap();

    // test point: 3.5 dB, close to the training SNR
    let p = 1;
    let (e_tr, e_min, se_min) = paired(&report, p, 0, 1);
    let mut rand: Vec<(u64, usize)> = (3..8).map(|i| (report.points[p].block_errors[i], i)).collect();
    rand.sort_unstable();
    let median = rand[2].1;
    let (_, e_med, se_med) = paired(&report, p, 0, median);
    let vs_min = e_tr as f64 <= e_min as f64 + 3.0 * se_min;
    let vs_rand = e_tr as f64 <= e_med as f64 - 3.0 * se_med;
    let full_gap = gap_db(&report, "trained", "full");
    let vs_full = full_gap.is_some_and(|g| g <= 0.15);
    let n = TRIALS as f64;
    (
        vs_min && vs_rand && vs_full,
        format!(
            "trained {:.4} vs minRank {:.4} (+3SE {:.4}), random median {:.4} (-3SE {:.4}); gap to full {}; ranks {:?}; train {train_secs:.0}s",
            e_tr as f64 / n,
            e_min as f64 / n,
            3.0 * se_min / n,
            e_med as f64 / n,
            3.0 * se_med / n,
            full_gap.map_or("n/a".into(), |g| format!("{g:.3} dB")),
            retained_ranks(&plan, &trained.profile).unwrap(),
        ),
    )
}

fn fmt_db(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |x| format!("{x:.3} dB"))
}

fn c11_time_sharing() -> Outcome {
    let spec = best15_spec();
    let ml = MlDecoder::new(&spec).unwrap();
    let opts = SimOptions::new(TRIALS, SEED + 4);
    let sub = run_bler(&spec, &[entry(&ml, "map")], GridAxis::EbN0, &[2.5, 3.0, 3.5, 4.0], &opts).unwrap();
    let ts = TimeSharing::new(6, 7.0 / 15.0).unwrap();
    let ts_report = ts.run(&[3.5, 4.0, 4.5, 5.0], &opts).unwrap();
    let x_sub = crossing_db(&sub.curve("map"), 1e-2);
    let x_ts = crossing_db(&ts_report.curve("ts-map"), 1e-2);
    let gain = x_sub.zip(x_ts).map(|(a, b)| b - a);
    (
        gain.is_some_and(|g| g >= 0.5) && (ts.rate() - 14.0 / 64.0).abs() < 1e-12,
        format!(
            "subcode crosses 1e-2 at {}, time sharing at {}, gain {}",
            fmt_db(x_sub),
            fmt_db(x_ts),
            gain.map_or("n/a".into(), |g| format!("{g:.3} dB"))
        ),
    )
}

fn c12_aggregation() -> Outcome {
    let spec = best15_spec();
    let plan = DecodingPlan::build(&spec).unwrap();
    let full = PruningProfile::full();
    let a = RpaDecoder::new(&plan, &full, RpaVariant::Soft(Aggregation::Soft), N_MAX).unwrap();
    let b = RpaDecoder::new(&plan, &full, RpaVariant::Soft(Aggregation::LogSum), N_MAX).unwrap();
    let gen = rmsub::code::subcode_generator(&spec).unwrap();
    let sigma = sigma_from_ebn0_db(3.0, 64, 14.0);
    let trials = 1000u64;
    let (mut agree, mut err_a, mut err_b) = (0u64, 0u64, 0u64);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(SEED, 12, t));
        let (_, c) = random_codeword(&gen, &mut rng);
        let l = awgn_llr(&c, sigma, &mut rng);
        let da = a.decode(&l).unwrap().codeword;
        let db = b.decode(&l).unwrap().codeword;
        agree += (da == db) as u64;
        err_a += (da != c) as u64;
        err_b += (db != c) as u64;
    }
    let frac = agree as f64 / trials as f64;
    (
        frac >= 0.99,
        format!(
            "{frac:.3} of blocks agree; BLER {:.3} vs {:.3} (SE {:.3})",
            err_a as f64 / trials as f64,
            err_b as f64 / trials as f64,
            standard_error(err_a, trials)
        ),
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome, failed: &mut Vec<usize>) {
    let t = Instant::now();
    let (ok, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    });
    if !ok {
        failed.push(id);
    }
    println!(
        "criterion {id:>2} {:<4} {name}: {detail} [{:.1}s]",
        if ok { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
}

fn main() {
    let mut failed = Vec::new();
    run(1, "complexity extremes", c1_extremes, &mut failed);
    run(2, "best-15 complexity", c2_best_subset, &mut failed);
    run(3, "rank profiles under pruning", c3_rank_profiles, &mut failed);
    run(4, "bottom rank bound", c4_rank_bound, &mut failed);
    run(5, "projected codebooks", c5_projected_codebooks, &mut failed);
    run(6, "soft-MAP matches MAP", c6_soft_map, &mut failed);
    run(7, "FHT matches brute force", c7_fht, &mut failed);
    let t = Instant::now();
    let report = catch_unwind(ordering_report).ok();
    println!("shared BLER run for criteria 8 and 9 [{:.1}s]", t.elapsed().as_secs_f64());
    match &report {
        Some(r) => {
            run(8, "decoder ordering", || c8_ordering(r), &mut failed);
            run(9, "pruning gaps", || c9_pruning(r), &mut failed);
        }
        None => {
            run(8, "decoder ordering", || (false, "simulation panicked".into()), &mut failed);
            run(9, "pruning gaps", || (false, "simulation panicked".into()), &mut failed);
        }
    }
    run(10, "trainer efficacy", c10_trainer, &mut failed);
    run(11, "time-sharing gain", c11_time_sharing, &mut failed);
    run(12, "aggregation agreement", c12_aggregation, &mut failed);
    if failed.is_empty() {
        println!("acceptance: all 12 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
