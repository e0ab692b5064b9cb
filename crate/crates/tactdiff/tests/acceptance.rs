//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion.
//!
//! Failures are reported but do not fail the run unless
//! `TACTDIFF_ACCEPTANCE_STRICT=1` is set.
//!
//! `TACTDIFF_ACCEPTANCE=quick` skips the trained-model criteria (6, 7) and
//! the end-to-end CLI run (10). `TACTDIFF_ACCEPTANCE_STEPS=codec,base,control`
//! overrides the training budget of criteria 6 and 7.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use tactdiff::exec::Pool;
use tactdiff_core::control::{process_frame, CalibrationParams, FrameOutcome};
use tactdiff_core::dataset::fixtures::{all_objects, fixture_mesh, sample_poses, NOVEL_OBJECTS, SEEN_OBJECTS};
use tactdiff_core::dataset::{stratified_split, synth_targets, verify_alignment, Manifest, Partition, SampleRecord, SynthStyleParams};
use tactdiff_core::diffusion::gradcheck::gradient_check;
use tactdiff_core::diffusion::{
    cfg_fuse, ddim_sample, example, forward_noise, CodecMode, DenoiserConfig, Example, LatentCodec, Model,
    NoiseSchedule, SamplerConfig, ScheduleConfig, Denoiser, Tensor, TrainConfig,
};
use tactdiff_core::geometry::{ContactPose, SensorModality};
use tactdiff_core::image::Image;
use tactdiff_core::metrics::{frechet_distance, mse, psnr, ssim, FeatureSet};
use tactdiff_core::prompts::{ConditionEmbedding, PromptSchema};
use tactdiff_core::render::OrthoCamera;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, t: Instant) -> (bool, String) {
    let e = t.elapsed();
    (e <= limit, format!("{:.1}s of {:.0}s", e.as_secs_f64(), limit.as_secs_f64()))
}

fn c1_alignment() -> Outcome {
    let t = Instant::now();
    let cal = CalibrationParams::default();
    let camera = OrthoCamera::default();
    let (mut ok, mut total, mut rejected) = (0, 0, 0);
    for id in all_objects() {
        let (d, mask) = tactdiff::controlset::canonical_render(&fixture_mesh(id).unwrap(), &camera).unwrap();
        for p in sample_poses(0, id, 100) {
            total += 1;
            match process_frame(&d, &mask, id, &p, &cal) {
                FrameOutcome::Accepted { alignment_error_px, .. } if alignment_error_px < 5.0 => ok += 1,
                FrameOutcome::Accepted { .. } => {}
                FrameOutcome::Rejected { .. } => rejected += 1,
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(60), t);
    let frac = ok as f64 / total as f64;
    outcome(
        frac >= 0.99 && ok + rejected == total && fast,
        format!("{ok}/{total} frames under 5 px ({:.1}%), {rejected} in rejects, {time}", 100.0 * frac),
    )
}

fn c2_zero_init() -> Outcome {
    let t = Instant::now();
    let sched = NoiseSchedule::linear(ScheduleConfig::default()).unwrap();
    let mut identical = 0;
    for seed in 0..20u64 {
        let codec = LatentCodec::<f32>::new(CodecMode::Conv, seed);
        let den = Denoiser::<f32>::new(DenoiserConfig::default(), codec.latent_shape, seed).unwrap();
        let cfg = SamplerConfig {
            steps: 10,
            w_cfg: 3.0,
            eta: 0.0,
            seed,
        };
        let mut r = common::rng(seed);
        let cond: Vec<f32> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
        let ctrl = Tensor {
            shape: [1, 16, 16],
            data: (0..256).map(|_| r.random::<f32>()).collect(),
        };
        let with = ddim_sample(&den, &codec, &sched, &cfg, Some(&cond), Some(&ctrl), seed).unwrap();
        let without = ddim_sample(&den, &codec, &sched, &cfg, Some(&cond), None, seed).unwrap();
        if with.data().iter().zip(without.data()).all(|(a, b)| a.to_bits() == b.to_bits()) {
            identical += 1;
        }
    }
    let (fast, time) = within(Duration::from_secs(30), t);
    outcome(identical == 20 && fast, format!("{identical}/20 seeds bit-identical, {time}"))
}

fn c3_cfg() -> Outcome {
    let t = Instant::now();
    let mut r = common::rng(3);
    let mut bad = 0;
    for _ in 0..1000 {
        let n = r.random_range(1..512);
        let draw = |r: &mut rand_chacha::ChaCha20Rng| Tensor::vector((0..n).map(|_| r.random_range(-10.0f64..10.0)).collect());
        let (u, c) = (draw(&mut r), draw(&mut r));
        let w = r.random_range(0.0..10.0);
        let ok = cfg_fuse(&u, &c, 0.0).unwrap() == u && cfg_fuse(&u, &c, 1.0).unwrap() == c && cfg_fuse(&c, &c, w).unwrap() == c;
        if !ok {
            bad += 1;
        }
    }
    let (fast, time) = within(Duration::from_secs(5), t);
    outcome(bad == 0 && fast, format!("{} of 1000 tensors satisfy all three identities, {time}", 1000 - bad))
}

fn c4_gradients() -> Outcome {
    let t = Instant::now();
    let samples = gradient_check(4, 10).unwrap();
    let mut per_class: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for s in &samples {
        let e = per_class.entry(s.class).or_default();
        e.0 += 1;
        e.1 = e.1.max(s.relative_error());
    }
    let worst = per_class.values().map(|v| v.1).fold(0.0, f64::max);
    let enough = per_class.values().all(|v| v.0 >= 10);
    let (fast, time) = within(Duration::from_secs(300), t);
    outcome(
        worst < 1e-4 && enough && fast,
        format!("{} classes x >=10 samples, max relative error {worst:.2e}, {time}", per_class.len()),
    )
}

fn c5_variance() -> Outcome {
    let t = Instant::now();
    let sched = NoiseSchedule::linear(ScheduleConfig::default()).unwrap();
    let mut r = common::rng(5);
    let n = 100_000;
    let var_z0: f64 = 0.25;
    let mut worst = 0.0f64;
    for t_step in [250, 500, 1000] {
        let z0 = Tensor::vector((0..n).map(|_| var_z0.sqrt() * common::gauss(&mut r)).collect::<Vec<f64>>());
        let eps = Tensor::vector((0..n).map(|_| common::gauss(&mut r)).collect::<Vec<f64>>());
        let zt = forward_noise(&z0, t_step, &eps, &sched).unwrap();
        let mean = zt.data.iter().sum::<f64>() / n as f64;
        let var = zt.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let ab = sched.alpha_bar(t_step);
        let expected = ab * var_z0 + (1.0 - ab);
        worst = worst.max((var / expected - 1.0).abs());
    }
    let (fast, time) = within(Duration::from_secs(30), t);
    outcome(worst < 0.02 && fast, format!("max relative variance error {:.3}% at t in {{250, 500, 1000}}, {time}", 100.0 * worst))
}

fn c8_metrics() -> Outcome {
    let t = Instant::now();
    let mut r = common::rng(8);
    let (mut e_mse, mut e_psnr, mut e_ssim) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..100 {
        let (w, h) = (r.random_range(11..40), r.random_range(11..40));
        let c = if k % 2 == 0 { 3 } else { 1 };
        let a = common::random_image(&mut r, w, h, c);
        let b = common::random_image(&mut r, w, h, c);
        e_mse = e_mse.max((mse(&a, &b).unwrap() - common::mse(&a, &b)).abs());
        e_psnr = e_psnr.max((psnr(&a, &b, 1.0).unwrap() - common::psnr(&a, &b)).abs());
        e_ssim = e_ssim.max((ssim(&a, &b).unwrap() - common::ssim(&a, &b)).abs());
    }
    // Gaussians with known moments, rotated by a fixed reflection so the
    // covariances are not diagonal; the distance is rotation invariant.
    let d = 8;
    let n = 10 * d;
    let mu_a = vec![0.0; d];
    let mu_b: Vec<f64> = (0..d).map(|k| if k % 2 == 0 { 1.5 } else { -1.0 }).collect();
    let sd_a: Vec<f64> = (0..d).map(|k| 0.5 + 0.1 * k as f64).collect();
    let sd_b: Vec<f64> = (0..d).map(|k| 1.5 - 0.1 * k as f64).collect();
    let v: Vec<f64> = (0..d).map(|k| 1.0 + k as f64).collect();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let reflect = |x: Vec<f64>| -> Vec<f64> {
        let dot: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
        x.iter().zip(&v).map(|(a, b)| a - 2.0 * dot / vv * b).collect()
    };
    let analytic = common::frechet_diagonal(&mu_a, &sd_a, &mu_b, &sd_b);
    let trials = 20;
    let (mut rel_sum, mut e_oracle) = (0.0f64, 0.0f64);
    for trial in 0..trials {
        let mut g = common::rng(800 + trial);
        let mut draw = |mu: &[f64], sd: &[f64]| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| reflect((0..d).map(|k| mu[k] + sd[k] * common::gauss(&mut g)).collect()))
                .collect()
        };
        let (ra, rb) = (draw(&mu_a, &sd_a), draw(&mu_b, &sd_b));
        let set = |rows: &[Vec<f64>]| {
            let mut s = FeatureSet::new("gaussian", d);
            rows.iter().for_each(|r| s.push(r).unwrap());
            s
        };
        let fd = frechet_distance(&set(&ra), &set(&rb)).unwrap().distance;
        let exact = common::frechet_from_samples(&ra, &rb);
        e_oracle = e_oracle.max((fd - exact).abs() / exact);
        rel_sum += fd / analytic - 1.0;
    }
    let bias = rel_sum / trials as f64;
    let (fast, time) = within(Duration::from_secs(120), t);
    outcome(
        e_mse < 1e-10 && e_psnr < 1e-10 && e_ssim < 1e-6 && e_oracle < 1e-8 && bias.abs() < 0.05 && fast,
        format!(
            "max |diff| mse {e_mse:.1e}, psnr {e_psnr:.1e}, ssim {e_ssim:.1e}; frechet vs sample-moment oracle {e_oracle:.1e}, \
             mean deviation from analytic at n = 10d {:+.1}% over {trials} draws; {time}",
            100.0 * bias
        ),
    )
}

fn c9_split() -> Outcome {
    let t = Instant::now();
    let objects = ["a", "b", "c", "d", "e"];
    let mut r = common::rng(9);
    let mut recs = Vec::new();
    for o in objects {
        for f in 0..500u32 {
            let pose = ContactPose::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(-1.0..1.0), 0.0);
            for m in SensorModality::ALL {
                recs.push(SampleRecord {
                    object_id: o.into(),
                    frame_id: f,
                    pose,
                    modality: m,
                    control_path: String::new(),
                    prompt_path: String::new(),
                    target_path: String::new(),
                    partition: Partition::Unassigned,
                });
            }
        }
    }
    let m = Manifest::from_records(recs);
    let s = stratified_split(&m, [0.7, 0.15, 0.15], 42).unwrap();
    let again = stratified_split(&m, [0.7, 0.15, 0.15], 42).unwrap();
    let c = s.partition_counts();
    let totals = [Partition::Train, Partition::Val, Partition::Test].map(|p| c.get(&p).copied().unwrap_or(0));
    let per_mod_ok = SensorModality::ALL.iter().all(|&md| {
        let n = |p| s.records.iter().filter(|r| r.modality == md && r.partition == p).count();
        [n(Partition::Train), n(Partition::Val), n(Partition::Test)] == [1750, 375, 375]
    });
    let aligned = verify_alignment(&s).is_aligned();
    let (fast, time) = within(Duration::from_secs(5), t);
    outcome(
        totals == [5250, 1125, 1125] && per_mod_ok && aligned && s == again && fast,
        format!("partitions {totals:?}, 1750/375/375 per modality: {per_mod_ok}, aligned: {aligned}, {time}"),
    )
}

struct Key {
    object: &'static str,
    frame: u32,
    pose: ContactPose,
    targets: Vec<Image>,
    examples: Vec<Example<f32>>,
}

fn build_keys(objects: &[&'static str], per_object: usize, seed: u64) -> Vec<Key> {
    let cal = CalibrationParams::default();
    let camera = OrthoCamera::default();
    let style = SynthStyleParams::default();
    let mut keys = Vec::new();
    for &id in objects {
        let (d, mask) = tactdiff::controlset::canonical_render(&fixture_mesh(id).unwrap(), &camera).unwrap();
        for (frame, p) in sample_poses(seed, id, per_object).into_iter().enumerate() {
            let FrameOutcome::Accepted { control, .. } = process_frame(&d, &mask, id, &p, &cal) else {
                continue;
            };
            let small = control.image.area_downsample(8).unwrap();
            let mut targets = Vec::new();
            let mut examples = Vec::new();
            for m in SensorModality::ALL {
                let tgt = synth_targets(&small, m, &style);
                let e = ConditionEmbedding::new(m, &p, PromptSchema::Short);
                examples.push(example::<f32>(&tgt, &small, &e, 16).unwrap());
                targets.push(tgt);
            }
            keys.push(Key {
                object: id,
                frame: frame as u32,
                pose: p,
                targets,
                examples,
            });
        }
    }
    keys
}

fn split_keys(keys: &[Key], seed: u64) -> BTreeMap<(String, u32), Partition> {
    let recs = keys
        .iter()
        .flat_map(|k| {
            SensorModality::ALL.map(|m| SampleRecord {
                object_id: k.object.into(),
                frame_id: k.frame,
                pose: k.pose,
                modality: m,
                control_path: String::new(),
                prompt_path: String::new(),
                target_path: String::new(),
                partition: Partition::Unassigned,
            })
        })
        .collect();
    let s = stratified_split(&Manifest::from_records(recs), [0.7, 0.15, 0.15], seed).unwrap();
    s.records.into_iter().map(|r| ((r.object_id, r.frame_id), r.partition)).collect()
}

#[derive(Debug, Clone, Copy)]
struct Scores {
    accuracy: f64,
    matched_better: f64,
    mean_ssim: [f64; 3],
}

fn score(model: &Model<f32>, keys: &[&Key], sampler: &SamplerConfig, seed: u64) -> Scores {
    let pool = Pool::new(None).unwrap();
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.shuffle(&mut common::rng(seed));
    let mut shuffled = vec![0; keys.len()];
    for i in 0..order.len() {
        shuffled[order[i]] = order[(i + 1) % order.len()];
    }
    let jobs: Vec<(usize, usize)> = (0..keys.len()).flat_map(|k| (0..3).map(move |m| (k, m))).collect();
    let results: Vec<(bool, bool, usize, f64)> = tactdiff_core::diffusion::BatchExecutor::map(&pool, jobs.len(), &|j| {
        let (k, m) = jobs[j];
        let ex = &keys[k].examples[m];
        let img = ddim_sample(&model.denoiser, &model.codec, &model.schedule, sampler, Some(&ex.cond), Some(&ex.control), j as u64)
            .unwrap();
        let errs: Vec<f64> = keys[k].targets.iter().map(|t| mse(&img, t).unwrap()).collect();
        let nearest = (0..3).min_by(|&a, &b| errs[a].total_cmp(&errs[b])).unwrap();
        let matched = ssim(&img, &keys[k].targets[m]).unwrap();
        let other = ssim(&img, &keys[shuffled[k]].targets[m]).unwrap();
        (nearest == m, matched > other, m, matched)
    });
    let n = results.len() as f64;
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for r in &results {
        sums[r.2] += r.3;
        counts[r.2] += 1;
    }
    Scores {
        accuracy: results.iter().filter(|r| r.0).count() as f64 / n,
        matched_better: results.iter().filter(|r| r.1).count() as f64 / n,
        mean_ssim: std::array::from_fn(|i| sums[i] / counts[i].max(1) as f64),
    }
}

fn training_budget() -> TrainConfig {
    let mut cfg = TrainConfig::default();
    if let Ok(s) = std::env::var("TACTDIFF_ACCEPTANCE_STEPS") {
        let steps: Vec<usize> = s.split(',').map(|v| v.trim().parse().expect("step count")).collect();
        for (st, n) in cfg.stages.iter_mut().zip(steps) {
            st.steps = n;
        }
    }
    cfg
}

fn c6_c7_trained() -> (Outcome, Outcome) {
    let t = Instant::now();
    let seed = 6;
    let seen = build_keys(&SEEN_OBJECTS, 100, seed);
    let novel = build_keys(&NOVEL_OBJECTS, 25, seed);
    let parts = split_keys(&seen, seed);
    let part = |k: &Key| parts[&(k.object.to_string(), k.frame)];
    let collect = |p: Partition| -> Vec<Example<f32>> {
        seen.iter().filter(|k| part(k) == p).flat_map(|k| k.examples.iter().cloned()).collect()
    };
    let (train, val) = (collect(Partition::Train), collect(Partition::Val));
    let test: Vec<&Key> = seen.iter().filter(|k| part(k) == Partition::Test).collect();
    let pool = Pool::new(None).unwrap();
    let cfg = training_budget();
    let budget: Vec<usize> = cfg.planned_steps();
    let out = tactdiff::model::train_examples(cfg, &train, &val, None, &pool, &mut |_| {}).unwrap();
    let train_time = t.elapsed();
    let sampler = SamplerConfig {
        steps: 20,
        w_cfg: 3.0,
        eta: 0.0,
        seed,
    };
    let s = score(&out.model, &test, &sampler, seed);
    let novel_refs: Vec<&Key> = novel.iter().collect();
    let nv = score(&out.model, &novel_refs, &sampler, seed);
    let [tactip, vitac, vitactip] = [SensorModality::TacTip, SensorModality::ViTac, SensorModality::ViTacTip].map(|m| s.mean_ssim[m.index()]);
    let ordered = vitac >= vitactip && vitactip >= tactip;
    let fast = t.elapsed() <= Duration::from_secs(7200);
    let c6 = outcome(
        s.accuracy >= 0.90 && s.matched_better >= 0.95 && ordered && fast,
        format!(
            "held-out seen poses ({} samples): modality accuracy {:.1}%, matched > shuffled SSIM {:.1}%, mean SSIM ViTac {vitac:.3} / ViTacTip {vitactip:.3} / TacTip {tactip:.3} (ordering held: {ordered}); stages {budget:?}, trained in {:.0}s, total {:.0}s",
            3 * test.len(),
            100.0 * s.accuracy,
            100.0 * s.matched_better,
            train_time.as_secs_f64(),
            t.elapsed().as_secs_f64()
        ),
    );
    let drop_a = 100.0 * (s.accuracy - nv.accuracy);
    let drop_b = 100.0 * (s.matched_better - nv.matched_better);
    let c7 = outcome(
        drop_a <= 15.0 && drop_b <= 15.0,
        format!(
            "novel shapes ({} samples): accuracy {:.1}% (drop {drop_a:.1} pp), matched > shuffled {:.1}% (drop {drop_b:.1} pp)",
            3 * novel.len(),
            100.0 * nv.accuracy,
            100.0 * nv.matched_better
        ),
    );
    (c6, c7)
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli(args: &[&str], dir: &Path) -> i32 {
    let st = Command::new(env!("CARGO_BIN_EXE_tactdiff"))
        .args(args)
        .args(["--seed", "10", "--reproducible", "--config", "config.json"])
        .current_dir(dir)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap();
    st.code().unwrap_or(-1)
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let config = serde_json::json!({ "sampler": { "steps": 20, "w_cfg": 3.0, "eta": 0.0, "seed": 0 } });
    std::fs::write(dir.join("config.json"), config.to_string()).unwrap();
    let steps: [&[&str]; 8] = [
        &["make-fixtures", "--out", "fx", "--poses", "20", "--objects", "seen"],
        &[
            "render-control", "--calib", "fx/calibration.json", "--out", "controls", "--stl", "fx/stl/edge.stl", "--poses", "fx/poses/edge.csv",
            "--stl", "fx/stl/sphere.stl", "--poses", "fx/poses/sphere.csv",
        ],
        &["gen-prompts", "--manifest", "controls/manifest.jsonl", "--out", "prompts"],
        &["synth-targets", "--manifest", "controls/manifest.jsonl", "--prompts", "prompts", "--out", "data"],
        &["split", "--manifest", "data/manifest.jsonl", "--out", "data/split.jsonl"],
        &["train", "--manifest", "data/split.jsonl", "--out", "run", "--max-steps", "500"],
        &["sample", "--checkpoint", "run/model.ckpt", "--manifest", "data/split.jsonl", "--limit", "10", "--out", "gen"],
        &["evaluate", "--manifest", "data/split.jsonl", "--generated", "gen", "--limit", "10", "--out", "report.json"],
    ];
    for s in steps {
        let code = cli(s, dir);
        if code != 0 {
            return Err(format!("`{}` exited with {code}", s[0]));
        }
    }
    Ok(())
}

fn c10_reproducible() -> Outcome {
    let t = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if let Err(e) = pipeline(a.path()).and_then(|_| pipeline(b.path())) {
        return outcome(false, e);
    }
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    let csv_rows = fa.get("run/loss.csv").map_or(0, |c| c.iter().filter(|&&b| b == b'\n').count().saturating_sub(1));
    let images = fa.keys().filter(|k| k.starts_with("gen/")).count();
    let (fast, time) = within(Duration::from_secs(600), t);
    outcome(
        differing.is_empty() && fa.len() == fb.len() && csv_rows == 500 && images == 10 && fast,
        format!(
            "{} files compared, {} differ; {csv_rows} loss rows, {images} samples; {time}",
            fa.len(),
            differing.len()
        ),
    )
}

fn main() {
    let quick = std::env::var("TACTDIFF_ACCEPTANCE").is_ok_and(|v| v == "quick");
    let mut results: Vec<(u32, Option<Outcome>)> = vec![
        (1, Some(c1_alignment())),
        (2, Some(c2_zero_init())),
        (3, Some(c3_cfg())),
        (4, Some(c4_gradients())),
        (5, Some(c5_variance())),
    ];
    if quick {
        results.push((6, None));
        results.push((7, None));
    } else {
        let (c6, c7) = c6_c7_trained();
        results.push((6, Some(c6)));
        results.push((7, Some(c7)));
    }
    results.push((8, Some(c8_metrics())));
    results.push((9, Some(c9_split())));
    results.push((10, if quick { None } else { Some(c10_reproducible()) }));
    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Some(o) => {
                println!("criterion {n:>2}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
                failed += usize::from(!o.pass);
            }
            None => println!("criterion {n:>2}: SKIP - quick mode"),
        }
    }
    let run = results.iter().filter(|r| r.1.is_some()).count();
    println!("{} of {run} criteria passed", run - failed);
    if failed > 0 && std::env::var("TACTDIFF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
