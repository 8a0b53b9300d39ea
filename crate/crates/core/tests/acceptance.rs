//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Pass criterion numbers as arguments to run a subset.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use actannot::eval::abo;
use actannot::foreground::{initial_proposal_score, mrf_energy, smooth_mrf_labels, MrfParams, ScoreVolume};
use actannot::gmcp::{solve, GmcpGraph, GmcpNode, SolverOptions, DEFAULT_ALPHA};
use actannot::model::{ActionProposal, BoundingBox, Tube};
use actannot::pipeline::run::foreground_volume;
use actannot::pipeline::{ablate, generate_synthetic, run, PipelineConfig, SynthSpec};
use actannot::similarity::{dtw_distance, hungarian, ShapeSeries};
use actannot::subset::{select_subset, SubsetParams, WeightScore};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---------------------------------------------------------------- 1 ------

fn random_graph(rng: &mut ChaCha8Rng, groups: usize, nodes: usize) -> GmcpGraph {
    let groups: Vec<Vec<GmcpNode>> = (0..groups)
        .map(|_| {
            (0..nodes as u32)
                .map(|k| GmcpNode::new(k, rng.random(), rng.random_range(0.2..=1.0)))
                .collect()
        })
        .collect();
    GmcpGraph::new(groups, DEFAULT_ALPHA, |_, _, _, _| rng.random()).unwrap()
}

/// Objective written out term by term over ordered pairs.
fn brute_objective(g: &GmcpGraph, pick: &[usize]) -> f64 {
    let n = pick.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += g.alpha() * g.groups()[i][pick[i]].omega + g.edge(i, pick[i], j, pick[j]);
            }
        }
    }
    total
}

fn exhaustive_max(g: &GmcpGraph) -> f64 {
    let sizes: Vec<usize> = g.groups().iter().map(Vec::len).collect();
    let mut pick = vec![0; sizes.len()];
    let mut best = f64::NEG_INFINITY;
    'outer: loop {
        best = best.max(brute_objective(g, &pick));
        for k in 0..pick.len() {
            pick[k] += 1;
            if pick[k] < sizes[k] {
                continue 'outer;
            }
            pick[k] = 0;
        }
        return best;
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let opts = SolverOptions {
        restarts: 8,
        seed: 17,
        ..SolverOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut exceeded = 0;
    let mut hits = [0usize; 2];
    for (slot, (size, count)) in [(3usize, 100usize), (4, 50)].into_iter().enumerate() {
        for _ in 0..count {
            let g = random_graph(&mut rng, size, size);
            let s = solve(&g, &opts);
            let best = exhaustive_max(&g);
            let tol = 1e-12 * best.abs().max(1.0);
            if s.objective > best + tol {
                exceeded += 1;
            }
            if (s.objective - best).abs() <= tol {
                hits[slot] += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = exceeded == 0 && hits[0] >= 95 && hits[1] * 100 >= 85 * 50 && elapsed < Duration::from_secs(10);
    verdict(
        pass,
        format!(
            "restarts {}: 3x3 optimal {}/100, 4x4 optimal {}/50, above optimum {exceeded}, {}",
            opts.restarts,
            hits[0],
            hits[1],
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------- 2 ------

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut mismatches = 0;
    for (n, count) in [(4usize, 500usize), (5, 100)] {
        let perms = permutations(n);
        for t in 0..count {
            // Every third matrix has small integer costs, which produces ties.
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| if t % 3 == 0 { rng.random_range(0..4) as f64 } else { rng.random_range(-50.0..50.0) })
                        .collect()
                })
                .collect();
            let best = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let a = hungarian(&cost).unwrap();
            let recomputed: f64 = a.permutation.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            if a.cost != best || recomputed != best {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("600 matrices, {mismatches} differ from enumeration, {}", secs(elapsed)),
    )
}

// ---------------------------------------------------------------- 3 ------

/// Every monotone path from (0, 0) to the far corner; keeps the cheapest,
/// then the shortest.
fn dtw_oracle(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, cost: f64, len: u32, best: &mut (f64, u32)) {
        let cost = cost + (a[i] - b[j]).abs();
        let len = len + 1;
        if i + 1 == a.len() && j + 1 == b.len() {
            if cost < best.0 || (cost == best.0 && len < best.1) {
                *best = (cost, len);
            }
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, cost, len, best);
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, cost, len, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, cost, len, best);
        }
    }
    let mut best = (f64::INFINITY, 0);
    walk(a, b, 0, 0, 0.0, 0, &mut best);
    best.0 / best.1 as f64
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let a: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0.2..3.0)).collect();
        let b: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0.2..3.0)).collect();
        let d = dtw_distance(&ShapeSeries::new(a.clone()).unwrap(), &ShapeSeries::new(b.clone()).unwrap());
        worst = worst.max((d - dtw_oracle(&a, &b)).abs());
    }
    let mut warped_nonzero = 0;
    for _ in 0..200 {
        let a: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0.2..3.0)).collect();
        let stretched: Vec<f64> = a.iter().flat_map(|&x| std::iter::repeat_n(x, rng.random_range(1..=3))).collect();
        let d = dtw_distance(&ShapeSeries::new(a).unwrap(), &ShapeSeries::new(stretched).unwrap());
        if d != 0.0 {
            warped_nonzero += 1;
        }
    }
    verdict(
        worst <= 1e-9 && warped_nonzero == 0,
        format!("max |dtw - oracle| {worst:.2e} over 200 pairs, {warped_nonzero}/200 repetitions with nonzero distance"),
    )
}

// ---------------------------------------------------------------- 4 ------

fn chain_optimum(observed: &[f64], params: &MrfParams) -> f64 {
    let nl = params.num_labels;
    let mut cost: Vec<f64> = (0..nl).map(|l| params.unary(l, observed[0])).collect();
    for &o in &observed[1..] {
        cost = (0..nl)
            .map(|l| (0..nl).map(|k| cost[k] + params.pairwise(k, l)).fold(f64::INFINITY, f64::min) + params.unary(l, o))
            .collect();
    }
    cost.into_iter().fold(f64::INFINITY, f64::min)
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4004);
    // Messages need one sweep per voxel to cross a 64-voxel chain.
    let params = MrfParams {
        max_iterations: 200,
        ..MrfParams::default()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let obs: Vec<f64> = (0..64).map(|_| rng.random()).collect();
        let out = smooth_mrf_labels(&ScoreVolume::new(1, 1, 64, obs.clone()).unwrap(), &params).unwrap();
        worst = worst.max((out.energy - chain_optimum(&obs, &params)).abs());
    }
    let defaults = MrfParams::default();
    let mut above = 0;
    for _ in 0..20 {
        let obs: Vec<f64> = (0..512).map(|_| rng.random()).collect();
        let out = smooth_mrf_labels(&ScoreVolume::new(8, 8, 8, obs.clone()).unwrap(), &defaults).unwrap();
        let quantized: Vec<usize> = obs.iter().map(|&o| defaults.quantize(o)).collect();
        let qe = mrf_energy(&quantized, &obs, 8, 8, 8, &defaults);
        let e = mrf_energy(&out.labels, &obs, 8, 8, 8, &defaults);
        if e > qe {
            above += 1;
        }
    }
    verdict(
        worst <= 1e-9 && above == 0,
        format!("max chain gap {worst:.2e} over 50 chains, {above}/20 volumes above quantized energy"),
    )
}

// ---------------------------------------------------------------- 5 ------

fn random_proposal(rng: &mut ChaCha8Rng, id: u32) -> ActionProposal {
    let start = rng.random_range(0..3);
    let len = rng.random_range(1..5);
    let (x, y) = (rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
    let (w, h) = (rng.random_range(4.0..25.0), rng.random_range(4.0..25.0));
    let tube = Tube::new((start..start + len).map(|f| BoundingBox::new(f, x, y, w, h).unwrap()).collect()).unwrap();
    let mut p = ActionProposal::new(id, "v", tube);
    p.initial_score = rng.random_range(0.01..1.0);
    p
}

/// Every non-empty exemplar set with every assignment of the rest.
fn exhaustive_map(pool: &[ActionProposal], params: &SubsetParams) -> f64 {
    let n = pool.len();
    let iou = |a: usize, b: usize| pool[a].tube.overlap(&pool[b].tube);
    let score = |i: usize, j: usize| match params.weight_score {
        WeightScore::Member => pool[i].initial_score,
        WeightScore::Exemplar => pool[j].initial_score,
    };
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << n) {
        let s: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
        if s.len() > params.target_count {
            continue;
        }
        let rest: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 0).collect();
        let mut base = -params.phi * s.len() as f64;
        for &a in &s {
            base += (iou(a, a) * score(a, a)).ln();
            for &b in &s {
                if a != b {
                    base -= params.gamma_nms * iou(a, b);
                }
            }
        }
        let mut z = vec![0usize; rest.len()];
        'assign: loop {
            let mut v = base;
            for (k, &i) in rest.iter().enumerate() {
                v += if z[k] == s.len() {
                    params.lambda_bg.ln()
                } else {
                    (iou(i, s[z[k]]) * score(i, s[z[k]])).ln()
                };
            }
            best = best.max(v);
            for k in 0..z.len() {
                z[k] += 1;
                if z[k] <= s.len() {
                    continue 'assign;
                }
                z[k] = 0;
            }
            break;
        }
    }
    best
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5005);
    let mut worst: f64 = 0.0;
    for t in 0..100 {
        let n = rng.random_range(1..=6);
        let pool: Vec<ActionProposal> = (0..n).map(|k| random_proposal(&mut rng, k as u32)).collect();
        let params = SubsetParams {
            phi: if t % 2 == 0 { 0.0 } else { rng.random_range(0.0..1.0) },
            weight_score: if t % 4 == 3 { WeightScore::Exemplar } else { WeightScore::Member },
            ..SubsetParams::default()
        };
        let sel = select_subset(&pool, &params).unwrap();
        worst = worst.max((sel.log_posterior - exhaustive_map(&pool, &params)).abs());
    }

    let spec = SynthSpec {
        classes: 4,
        videos_per_class: 5,
        proposals_per_video: 500,
        ..SynthSpec::default()
    };
    let ds = generate_synthetic(&spec, 55).unwrap();
    let cfg = PipelineConfig::default();
    let mut full_abo = Vec::new();
    let mut subset_abo = Vec::new();
    let mut largest = 0;
    for class in ds.classes() {
        let mut full = BTreeMap::new();
        let mut kept = BTreeMap::new();
        let mut gts = Vec::new();
        for v in &class.videos {
            let volume = foreground_volume(v, &cfg).unwrap();
            let mut props = v.proposals.clone();
            for p in &mut props {
                p.initial_score = initial_proposal_score(p, &volume).unwrap();
            }
            let sel = select_subset(&props, &cfg.subset).unwrap();
            largest = largest.max(sel.exemplars.len());
            let id = v.meta.video_id.clone();
            full.insert(id.clone(), props.iter().map(|p| p.tube.clone()).collect::<Vec<_>>());
            kept.insert(
                id,
                props.iter().filter(|p| sel.exemplars.contains(&p.id)).map(|p| p.tube.clone()).collect::<Vec<_>>(),
            );
            gts.extend(v.ground_truth.iter().cloned());
        }
        full_abo.push(abo(&full, &gts).unwrap());
        subset_abo.push(abo(&kept, &gts).unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (f, s) = (mean(&full_abo), mean(&subset_abo));
    verdict(
        worst <= 1e-9 && s >= 0.85 * f && largest <= 100,
        format!(
            "max |log posterior - exhaustive| {worst:.2e} over 100 pools; 500-proposal pools: subset MABO {s:.4} vs full {f:.4} ({:.1}%), largest |S| {largest}",
            100.0 * s / f
        ),
    )
}

// ---------------------------------------------------------------- 6 ------

fn criterion_6() -> Verdict {
    let spec = SynthSpec::default();
    let ds = generate_synthetic(&spec, 0).unwrap();
    let cfg = PipelineConfig {
        seed: 0,
        ..PipelineConfig::default()
    };
    let start = Instant::now();
    let out = run(&ds, &cfg).unwrap();
    let run_time = start.elapsed();
    let accuracy = out.report.eval.as_ref().map_or(0.0, |e| e.localization_accuracy);

    let mut not_worse = 0;
    for seed in 0..20u64 {
        let t = Instant::now();
        let ds = generate_synthetic(&spec, seed).unwrap();
        let rows = ablate(&ds, &PipelineConfig { seed, ..PipelineConfig::default() }).unwrap();
        let initial = rows.first().unwrap().localization_accuracy;
        let full = rows.last().unwrap().localization_accuracy;
        not_worse += (full >= initial) as usize;
        eprintln!("  seed {seed:2}: initial-only {initial:.3}, full {full:.3} ({})", secs(t.elapsed()));
    }
    verdict(
        accuracy >= 0.9 && not_worse >= 18 && run_time < Duration::from_secs(300),
        format!(
            "localization at 0.2 = {accuracy:.4}, full run {}, full >= initial-only in {not_worse}/20 seeds",
            secs(run_time)
        ),
    )
}

// ---------------------------------------------------------------- 7 ------

fn criterion_7() -> Verdict {
    let spec = SynthSpec {
        classes: 1,
        videos_per_class: 6,
        proposals_per_video: 100,
        instances: 2,
        ..SynthSpec::default()
    };
    let mut recovered = 0;
    for seed in 0..20u64 {
        let ds = generate_synthetic(&spec, seed).unwrap();
        let out = run(&ds, &PipelineConfig { seed, ..PipelineConfig::default() }).unwrap();
        let records: Vec<_> = out.annotations.values().flatten().collect();
        let all = ds.videos.iter().all(|v| {
            v.ground_truth.iter().all(|gt| {
                records
                    .iter()
                    .filter(|r| r.video_id == v.meta.video_id)
                    .map(|r| {
                        let tube = actannot::pipeline::format::tube_from_records(&r.boxes, v.meta.frames, v.meta.width, v.meta.height)
                            .unwrap();
                        tube.overlap(&gt.tube)
                    })
                    .fold(0.0, f64::max)
                    >= 0.5
            })
        });
        recovered += all as usize;
    }
    verdict(recovered >= 18, format!("both instances in every video at IOU >= 0.5 in {recovered}/20 seeds"))
}

// ---------------------------------------------------------------- 8 ------

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_8() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_actannot");
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cli = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let synth = cli(&[
        "synth", "--seed", "8", "--out", data.to_str().unwrap(), "--classes", "3", "--videos-per-class", "5",
        "--proposals-per-video", "60",
    ]);
    if !synth.status.success() {
        return verdict(false, format!("synth failed: {}", String::from_utf8_lossy(&synth.stderr)));
    }
    let manifest = data.join("manifest.jsonl");
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let r = cli(&[
            "run", "--seed", "8", "--manifest", manifest.to_str().unwrap(), "--out", out.to_str().unwrap(), "--top-k", "40",
        ]);
        if r.status.code() != Some(0) {
            return verdict(false, format!("run exited {:?}: {}", r.status.code(), String::from_utf8_lossy(&r.stderr)));
        }
        trees.push(read_tree(&out));
    }
    let same = trees[0] == trees[1];
    verdict(
        same && trees[0].len() == 4,
        format!("{} output files, byte-identical: {same}", trees[0].len()),
    )
}

// ---------------------------------------------------------------- 9 ------

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9009);
    let mut worst: f64 = 0.0;
    let mut bad_trajectories = 0;
    let mut trajectories = 0;
    for _ in 0..100 {
        let groups = rng.random_range(2..=5);
        let nodes = rng.random_range(2..=6);
        let g = random_graph(&mut rng, groups, nodes);
        let c = rng.random_range(0.1..10.0);
        let scaled = g.rescaled(c, g.alpha() / c).unwrap();
        for _ in 0..5 {
            let pick: BTreeMap<usize, usize> = (0..groups).map(|k| (k, rng.random_range(0..nodes))).collect();
            let (a, b) = (g.objective(&pick).unwrap(), scaled.objective(&pick).unwrap());
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
        for graph in [&g, &scaled] {
            let s = solve(graph, &SolverOptions { restarts: 2, seed: 3, ..SolverOptions::default() });
            trajectories += 1;
            if !s.trajectory.windows(2).all(|w| w[1] > w[0]) {
                bad_trajectories += 1;
            }
        }
    }
    verdict(
        worst <= 1e-12 && bad_trajectories == 0,
        format!("max relative change under rescaling {worst:.2e}; {bad_trajectories}/{trajectories} trajectories not strictly increasing"),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 9] = [
        (1, "local search vs exhaustive optimum", criterion_1),
        (2, "assignment vs enumeration", criterion_2),
        (3, "time warping vs path enumeration", criterion_3),
        (4, "field smoothing energies", criterion_4),
        (5, "subset selection", criterion_5),
        (6, "synthetic benchmark and ablation", criterion_6),
        (7, "two-instance recovery", criterion_7),
        (8, "run determinism", criterion_8),
        (9, "score scaling and monotone search", criterion_9),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {n} ({name}): {} [{}]", v.detail, secs(start.elapsed()));
        failed += !v.pass as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
