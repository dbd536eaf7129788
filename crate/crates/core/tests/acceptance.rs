//! Gating acceptance checks. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails.
//!
//! Lines go straight to the process stdout so they show up without
//! `--nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use vsum_core::eval::{aggregate_users, knapsack_select, precision_recall_f1, split_average, Aggregation, SplitSpec};
use vsum_core::frames::{
    consistency, cosine_alpha, cosine_smooth, elbow_k, inherit, kmeans_path, segment_weight, uniqueness,
};
use vsum_core::io::synthetic::synth_video;
use vsum_core::pseudo_label::{segment_scores, FrameAnnotations};
use vsum_core::rubric::Rubric;
use vsum_core::scene::{hash_frames, refine_short_scenes, segment, select_threshold_from_counts, ThresholdGrid};
use vsum_core::scoring::{mock_rubric_score, MockSceneFeatures, Novelty};
use vsum_core::{FrameEmbeddings, SceneSegmentation};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn report(name: &str, outcome: &Check) {
    let line = match outcome {
        Ok(detail) => format!("ACCEPTANCE PASS {name}: {detail}"),
        Err(why) => format!("ACCEPTANCE FAIL {name}: {why}"),
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

// Boundaries within one frame on 5 synthetic videos, under 5 s.
fn segmentation_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let videos: Vec<_> = (0..5)
        .map(|i| {
            let n_blocks = rng.gen_range(3..=5);
            let blocks: Vec<usize> = (0..n_blocks).map(|_| rng.gen_range(150..=240)).collect();
            synth_video(&format!("seg{i}"), &blocks, 30.0, 1, rng.gen()).unwrap()
        })
        .collect();
    let frames: Vec<_> = videos.iter().map(|v| v.frames()).collect();
    let grid = ThresholdGrid::default();
    let start = Instant::now();
    for (v, f) in videos.iter().zip(&frames) {
        let hashes = hash_frames(f).map_err(|e| e.to_string())?;
        let found = segment(&hashes, &grid)
            .map_err(|e| e.to_string())?
            .segmentation
            .boundaries();
        let truth = v.true_boundaries();
        ensure(found.len() == truth.len(), || {
            format!("{}: found {found:?}, expected {truth:?}", v.id)
        })?;
        for (a, b) in found.iter().zip(&truth) {
            ensure(a.abs_diff(*b) <= 1, || {
                format!("{}: found {found:?}, expected {truth:?}", v.id)
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "5 videos exact within 1 frame in {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// Brute-force steepest drop over random scene-count curves.
fn threshold_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let grid = ThresholdGrid::default();
    let taus = grid.points();
    for case in 0..100 {
        let mut counts = vec![0usize; taus.len()];
        let mut n = rng.gen_range(1..400);
        for c in counts.iter_mut() {
            *c = n;
            n -= rng.gen_range(0..=n.min(40)).min(n - 1);
        }
        let drops: Vec<usize> = counts.windows(2).map(|w| w[0] - w[1]).collect();
        let best = *drops.iter().max().unwrap();
        let expected = taus[drops.iter().position(|&d| d == best).unwrap()];
        let got = select_threshold_from_counts(&taus, &counts, grid.delta_tau()).map_err(|e| e.to_string())?;
        ensure(got == expected, || {
            format!("case {case}: {counts:?} gave {got}, expected {expected}")
        })?;
    }
    Ok("100/100 curves".into())
}

// Short scenes planted between long ones, with embeddings built so the
// nearer neighbor is known in closed form.
fn refinement_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for case in 0..50 {
        let n_long = rng.gen_range(2..=6);
        let dim = n_long;
        // Scene list: (length, embedding, index of the long scene it should end up in).
        let mut scenes: Vec<(usize, Vec<f32>, usize)> = Vec::new();
        let basis = |k: usize| -> Vec<f32> { (0..dim).map(|j| if j == k { 1.0 } else { 0.0 }).collect() };
        for k in 0..n_long {
            let left_edge = k == 0;
            if rng.gen_bool(0.5) {
                // Short scene before long scene k.
                let len = rng.gen_range(5..150);
                let (emb, owner) = if left_edge {
                    (basis(0), 0)
                } else {
                    let toward_right = rng.gen_bool(0.5);
                    let (near, far) = if toward_right { (k, k - 1) } else { (k - 1, k) };
                    let mut e = vec![0.0f32; dim];
                    e[near] = 0.9;
                    e[far] = 0.3;
                    (e, near)
                };
                scenes.push((len, emb, owner));
            }
            scenes.push((rng.gen_range(150..260), basis(k), k));
        }
        if rng.gen_bool(0.3) {
            scenes.push((rng.gen_range(5..150), basis(n_long - 1), n_long - 1));
        }
        let lengths: Vec<usize> = scenes.iter().map(|s| s.0).collect();
        let rows: Vec<Vec<f32>> = scenes
            .iter()
            .flat_map(|(len, e, _)| std::iter::repeat_n(e.clone(), *len))
            .collect();
        let seg = SceneSegmentation::from_lengths(&lengths).unwrap();
        let emb = FrameEmbeddings::from_rows(&rows).unwrap();

        let mut expected = vec![0usize; n_long];
        for (len, _, owner) in &scenes {
            expected[*owner] += len;
        }
        let expected = SceneSegmentation::from_lengths(&expected).unwrap();
        let got = refine_short_scenes(&seg, &emb, 150).map_err(|e| e.to_string())?;
        ensure(got == expected, || {
            format!(
                "case {case}: lengths {lengths:?} gave {:?}, expected {:?}",
                got.intervals(),
                expected.intervals()
            )
        })?;
        ensure(got.intervals().iter().all(|(s, e)| e - s >= 150), || {
            format!("case {case}: residual short scene")
        })?;
    }
    Ok("50/50 segmentations".into())
}

fn pseudo_label_mapping() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n_scenes = rng.gen_range(1..12);
        let lengths: Vec<usize> = (0..n_scenes).map(|_| rng.gen_range(1..60)).collect();
        let n: usize = lengths.iter().sum();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let seg = SceneSegmentation::from_lengths(&lengths).unwrap();
        let got = segment_scores(&FrameAnnotations::new(g.clone()).unwrap(), &seg).map_err(|e| e.to_string())?;
        let mut start = 0;
        for (j, len) in lengths.iter().enumerate() {
            let mut sum = 0.0;
            for v in &g[start..start + len] {
                sum += v;
            }
            let err = (got.scores[j] - sum / *len as f64).abs();
            worst = worst.max(err);
            ensure(err <= 1e-12, || format!("case {case} scene {j}: error {err:e}"))?;
            start += len;
        }
    }
    Ok(format!("100/100 instances, max error {worst:.1e}"))
}

/// Integer oracle: weights in hundredths, dimension values are multiples of 25.
fn rubric_oracle(dims: &[i64; 5], penalty: i64, pref: i64, context: i64) -> i64 {
    let weights = [35, 20, 15, 15, 15];
    let hundredths: i64 = weights.iter().zip(dims).map(|(w, d)| w * d).sum::<i64>() + 100 * (penalty + pref + context);
    let rounded = hundredths.signum() * ((hundredths.abs() + 50) / 100);
    rounded.clamp(0, 100)
}

fn rubric_formula() -> Check {
    let rubric = Rubric::tvsum();
    let keys: Vec<String> = rubric.dimensions.iter().map(|d| d.key.clone()).collect();
    let penalty_names: Vec<String> = rubric.penalties.iter().map(|p| p.name.clone()).collect();
    let penalty_values: Vec<i64> = rubric.penalties.iter().map(|p| i64::from(p.value)).collect();
    let levels = [0i64, 25, 50, 75, 100];
    let novelties = [(Novelty::New, 5i64), (Novelty::Duplicated, -5), (Novelty::Mixed, 0)];
    let mut checked = 0usize;
    for code in 0..levels.len().pow(5) {
        let mut dims = [0i64; 5];
        let mut c = code;
        for d in dims.iter_mut() {
            *d = levels[c % 5];
            c /= 5;
        }
        let dimensions: BTreeMap<String, f64> = keys.iter().cloned().zip(dims.iter().map(|&d| d as f64)).collect();
        for mask in 0u32..(1 << penalty_names.len()) {
            let chosen: Vec<String> = (0..penalty_names.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| penalty_names[i].clone())
                .collect();
            let penalty: i64 = (0..penalty_values.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| penalty_values[i])
                .sum();
            for pref in [-5i64, 0, 5] {
                for (novelty, context) in novelties {
                    let features = MockSceneFeatures {
                        dimensions: dimensions.clone(),
                        penalties: chosen.clone(),
                        novelty,
                        preference_match: pref as i32,
                    };
                    let got = i64::from(mock_rubric_score(&features, &rubric, true));
                    let want = rubric_oracle(&dims, penalty, pref, context);
                    ensure(got == want, || {
                        format!("dims {dims:?} penalties {chosen:?} pref {pref} {novelty:?}: {got} != {want}")
                    })?;
                    checked += 1;
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for pair in 0..1000 {
        let base: BTreeMap<String, f64> = keys.iter().map(|k| (k.clone(), rng.gen_range(0.0..=100.0))).collect();
        let mut raised = base.clone();
        for v in raised.values_mut() {
            if rng.gen_bool(0.5) {
                *v = rng.gen_range(*v..=100.0);
            }
        }
        let penalties: Vec<String> = penalty_names.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
        let novelty = novelties[rng.gen_range(0..3)].0;
        let pref = rng.gen_range(-5..=5);
        let make = |dimensions: BTreeMap<String, f64>| MockSceneFeatures {
            dimensions,
            penalties: penalties.clone(),
            novelty,
            preference_match: pref,
        };
        let lo = mock_rubric_score(&make(base), &rubric, true);
        let hi = mock_rubric_score(&make(raised), &rubric, true);
        ensure(hi >= lo, || {
            format!("pair {pair}: raising dimensions lowered {lo} to {hi}")
        })?;
    }
    Ok(format!("{checked} grid points exact, 1000 monotone pairs"))
}

fn smoothing() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for case in 0..100 {
        let n_scenes = rng.gen_range(2..10);
        let lengths: Vec<usize> = (0..n_scenes).map(|_| rng.gen_range(1..80)).collect();
        let seg = SceneSegmentation::from_lengths(&lengths).unwrap();
        let mids = seg.midpoints();
        for w in mids.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = (a + b) / 2.0;
            ensure(
                cosine_alpha(a, a, b) == 0.0 && cosine_alpha(mid, a, b) == 0.5 && cosine_alpha(b, a, b) == 1.0,
                || format!("case {case}: alpha not exact between {a} and {b}"),
            )?;
        }
        let mut values: Vec<f64> = (0..n_scenes).map(|_| rng.gen_range(0.0..=1.0)).collect();
        // Force an equal-neighbor pair.
        let twin = rng.gen_range(0..n_scenes - 1);
        values[twin + 1] = values[twin];
        let z0 = inherit(&values, &seg).map_err(|e| e.to_string())?;
        let z1 = cosine_smooth(&z0, &seg).map_err(|e| e.to_string())?;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ensure(z1.values.iter().all(|&v| v >= lo && v <= hi), || {
            format!("case {case}: curve leaves [{lo}, {hi}]")
        })?;
        let (a, b) = (mids[twin], mids[twin + 1]);
        for t in (a.ceil() as usize)..=(b.floor() as usize) {
            ensure(z1.values[t] == values[twin], || {
                format!(
                    "case {case}: frame {t} is {} between equal scenes {}",
                    z1.values[t], values[twin]
                )
            })?;
        }
    }
    Ok("100/100 instances".into())
}

fn clustering_and_weights() -> Check {
    let side = 20.0;
    let centers = [[0.0, 0.0], [side, 0.0], [side / 2.0, side * 3f64.sqrt() / 2.0]];
    let noise = Normal::new(0.0, 1.0).unwrap();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = centers
            .iter()
            .flat_map(|c| {
                (0..30)
                    .map(|_| vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)])
                    .collect::<Vec<_>>()
            })
            .collect();
        let path = kmeans_path(&points, 10, seed).map_err(|e| e.to_string())?;
        let wcss: Vec<f64> = path.iter().map(|m| m.wcss).collect();
        let k = elbow_k(&wcss);
        ensure(k == 3, || format!("seed {seed}: elbow picked {k}, wcss {wcss:?}"))?;
    }
    ensure(consistency(&[4; 12]) == 1.0, || {
        "consistency of a constant window is not 1".into()
    })?;
    ensure(uniqueness(&vec![vec![0.3, -2.0, 7.5]; 12]) == 0.0, || {
        "uniqueness of a constant window is not 0".into()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for _ in 0..1000 {
        let (c, u, s) = (
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.0..=5.0),
            rng.gen_range(0.0..=1.0),
        );
        let w = segment_weight(c, u, s);
        let lo = c.min(u) - 1e-12;
        let hi = c.max(u) + 1e-12;
        ensure(w >= lo && w <= hi, || {
            format!("weight {w} outside [{c}, {u}] for sigma {s}")
        })?;
        ensure((w - (s * c + (1.0 - s) * u)).abs() < 1e-12, || {
            format!("weight {w} is not the convex mix")
        })?;
    }
    Ok("elbow K=3 on 20/20 seeds, constant windows, 1000 convex triples".into())
}

fn knapsack_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for case in 0..200 {
        let n = rng.gen_range(1..=15);
        // Values in thousandths so sums are exact integers.
        let milli: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=1000)).collect();
        let lengths: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=40)).collect();
        let capacity = rng.gen_range(0..=lengths.iter().sum::<usize>());
        let values: Vec<f64> = milli.iter().map(|&v| v as f64 / 1000.0).collect();

        let mut best: Option<(i64, Vec<usize>)> = None;
        for mask in 0u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            if set.iter().map(|&i| lengths[i]).sum::<usize>() > capacity {
                continue;
            }
            let value: i64 = set.iter().map(|&i| milli[i]).sum();
            let better = match &best {
                None => true,
                Some((bv, bs)) => value > *bv || (value == *bv && set < *bs),
            };
            if better {
                best = Some((value, set));
            }
        }
        let (want_value, want_set) = best.unwrap();
        let got: Vec<usize> = knapsack_select(&values, &lengths, capacity)
            .map_err(|e| e.to_string())?
            .into_iter()
            .collect();
        let got_value: i64 = got.iter().map(|&i| milli[i]).sum();
        ensure(got_value == want_value && got == want_set, || {
            format!("case {case}: got {got:?} ({got_value}), expected {want_set:?} ({want_value})")
        })?;
    }
    Ok("200/200 instances".into())
}

fn masks(n: usize, a: usize, b: usize, both: usize) -> (Vec<bool>, Vec<bool>) {
    // Overlap first, then the rest of A, then the rest of B.
    let mut pa = vec![false; n];
    let mut pb = vec![false; n];
    for i in 0..both {
        pa[i] = true;
        pb[i] = true;
    }
    for x in pa.iter_mut().skip(both).take(a - both) {
        *x = true;
    }
    for x in pb.iter_mut().skip(a).take(b - both) {
        *x = true;
    }
    (pa, pb)
}

fn metric_correctness() -> Check {
    let cases: [(usize, usize, usize, usize); 20] = [
        (200, 100, 50, 25),
        (10, 5, 5, 5),
        (10, 5, 5, 0),
        (10, 0, 5, 0),
        (10, 5, 0, 0),
        (10, 0, 0, 0),
        (10, 10, 10, 10),
        (10, 10, 1, 1),
        (10, 1, 10, 1),
        (30, 12, 9, 6),
        (30, 7, 3, 2),
        (30, 3, 7, 2),
        (100, 40, 60, 20),
        (100, 15, 15, 15),
        (100, 15, 15, 7),
        (100, 50, 50, 0),
        (100, 33, 66, 33),
        (7, 4, 4, 1),
        (7, 3, 4, 0),
        (1000, 150, 150, 75),
    ];
    for (n, a, b, both) in cases {
        let (pa, pb) = masks(n, a, b, both);
        let r = precision_recall_f1(&pa, &pb).map_err(|e| e.to_string())?;
        let p = if a == 0 { 0.0 } else { both as f64 / a as f64 };
        let rc = if b == 0 { 0.0 } else { both as f64 / b as f64 };
        let f = if both == 0 {
            0.0
        } else {
            2.0 * both as f64 / (a + b) as f64
        };
        ensure(
            (r.precision - p).abs() < 1e-12 && (r.recall - rc).abs() < 1e-12 && (r.f1 - f).abs() < 1e-12,
            || format!("|A|={a} |B|={b} overlap={both}: got {r:?}"),
        )?;
    }
    let third = precision_recall_f1(&masks(200, 100, 50, 25).0, &masks(200, 100, 50, 25).1)
        .unwrap()
        .f1;
    ensure((third - 1.0 / 3.0).abs() < 1e-12, || {
        format!("F1 {third} for the 100/50/25 case")
    })?;

    let users = [0.2, 0.9, 0.4];
    let max = aggregate_users(&users, Aggregation::Max).unwrap();
    let mean = aggregate_users(&users, Aggregation::Mean).unwrap();
    ensure(max == 0.9 && (mean - 0.5).abs() < 1e-12, || {
        format!("max {max}, mean {mean}")
    })?;

    let ids: Vec<String> = (0..25).map(|i| format!("v{i:02}")).collect();
    let excluded: BTreeSet<String> = ["v03".to_string(), "v17".to_string()].into();
    let spec = SplitSpec::generate(&ids, &excluded, 5, 9).map_err(|e| e.to_string())?;
    ensure(spec.test_ids.len() == 5, || "expected 5 splits".into())?;
    ensure(spec.test_ids.iter().flatten().all(|id| !excluded.contains(id)), || {
        "excluded id in a split".into()
    })?;
    let f1_of = |id: &str| id[1..].parse::<f64>().unwrap() / 100.0;
    let per_split: Vec<Vec<f64>> = spec
        .test_ids
        .iter()
        .map(|s| s.iter().map(|id| f1_of(id)).collect())
        .collect();
    let mut total = 0.0;
    for s in &per_split {
        total += s.iter().sum::<f64>() / s.len() as f64;
    }
    let got = split_average(&per_split, &spec).map_err(|e| e.to_string())?;
    ensure((got - total / 5.0).abs() < 1e-12, || {
        format!("split average {got}, expected {}", total / 5.0)
    })?;
    Ok("20 mask pairs, aggregation, 5-split average".into())
}

fn vsum(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_vsum"))
        .args(args)
        .current_dir(dir)
        .env_remove("VSUM_CACHE_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "`vsum {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    vsum(&["synth", "--videos", "3", "--seed", "11", "--out", "data"], dir.path())?;
    for run in ["run_a", "run_b"] {
        vsum(
            &[
                "pipeline",
                "--mock",
                "--seed",
                "11",
                "--manifest",
                "data/manifest.json",
                "--out",
                run,
            ],
            dir.path(),
        )?;
    }
    let elapsed = start.elapsed();
    let a = tree(&dir.path().join("run_a"));
    let b = tree(&dir.path().join("run_b"));
    ensure(a.keys().eq(b.keys()), || "runs wrote different file sets".into())?;
    let differing: Vec<&String> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k).collect();
    ensure(differing.iter().all(|k| *k == "timings.json"), || {
        format!("outputs differ: {differing:?}")
    })?;

    let videos: Vec<&String> = a.keys().filter(|k| k.ends_with("record.json")).collect();
    ensure(videos.len() == 3, || format!("{} records", videos.len()))?;
    for rec_path in videos {
        let rec: serde_json::Value = serde_json::from_slice(&a[rec_path]).unwrap();
        for stage in [
            "segmentation",
            "refined",
            "captions",
            "scores",
            "frames",
            "summary",
            "eval",
        ] {
            ensure(rec[stage].is_object(), || {
                format!("{rec_path}: stage `{stage}` missing")
            })?;
        }
        let video_dir = rec_path.trim_end_matches("record.json");
        for name in vsum_core::io::plot::PLOT_FILES {
            let key = format!("{video_dir}plot/{name}");
            ensure(a.contains_key(&key), || format!("missing {key}"))?;
        }
    }
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "byte-identical except timings.json, 3 complete records, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("segmentation correctness", segmentation_correctness),
        ("threshold oracle", threshold_oracle),
        ("refinement oracle", refinement_oracle),
        ("pseudo-label mapping", pseudo_label_mapping),
        ("rubric formula", rubric_formula),
        ("smoothing", smoothing),
        ("clustering and weights", clustering_and_weights),
        ("selection optimality", knapsack_optimality),
        ("metric correctness", metric_correctness),
        ("end-to-end determinism", end_to_end),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let outcome = check();
        report(name, &outcome);
        if outcome.is_err() {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
