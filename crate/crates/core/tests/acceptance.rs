//! End-to-end acceptance checks, one pass/fail line per criterion.
//!
//! Criteria 7 to 9 share the toy training runs (three seeds plus a repeat of
//! the first seed) and take about twenty minutes on one core. Set
//! `METRICGAN_ACCEPTANCE=1,2,5` to run a subset. Criterion 10 reproduces the
//! noisy VoiceBank-DEMAND row only when `METRICGAN_VBD_ROOT` (corpus root)
//! and `METRICGAN_PESQ_CMD` (whitespace-separated command with `{ref}` and
//! `{deg}` placeholders) are set.

mod common;

/// Writes straight to stdout so the lines survive libtest's output capture.
macro_rules! report {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, $($arg)*);
        let _ = out.flush();
    }};
}

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::gradcheck::{discriminator_groups, masknet_groups};
use common::replay;
use common::stoi_oracle::stoi_reference;
use metricgan::data::synth::{noise, speech_proxy, synthesize_corpus, synthesize_pair, NoiseKind, SynthConfig};
use metricgan::data::{load_manifest, load_split, mix_at_snr, ManifestLayout, Split, Utterance};
use metricgan::evalcli::{evaluate_testset, AppConfig, Enhancer, ReportSnapshot, Role};
use metricgan::metrics::{normalize, stoi, ExternalCommand, MetricEvaluator, MetricId};
use metricgan::models::{Checkpoint, DiscrimConfig, Discriminator};
use metricgan::signal::{compute_features, enhance_frames, snr_db, stft, AudioSignal, FeatureMatrix, FrameParams, Mask};
use metricgan::training::{
    buffer_update, loss_degenerator, loss_discriminator, loss_generator, regression_epoch, regression_mse, train,
    Adam, DiscriminatorTerms, Mode, RegressionSample, ReplayBuffer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn signal_round_trip() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = FrameParams::default();
    let mut worst = f64::INFINITY;
    for _ in 0..10 {
        let len = rng.gen_range(16_000..=48_000);
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let frames = stft(&x, &params).map_err(|e| e.to_string())?;
        let y = enhance_frames(&frames, &Mask::ones(frames.n_frames(), frames.n_bins()), 16_000)
            .map_err(|e| e.to_string())?;
        if y.len() != x.len() {
            return Err(format!("length {} != {}", y.len(), x.len()));
        }
        worst = worst.min(snr_db(&x, y.samples()));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst >= 50.0 && secs < 5.0,
        format!("worst SNR {worst:.1} dB over 10 signals, {secs:.2} s"),
    )
}

fn stoi_equivalence() -> Check {
    let kinds = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Babble];
    let mut worst = 0.0f64;
    for k in 0..20 {
        let snr = -10.0 + 30.0 * k as f64 / 19.0;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let len = 24_000;
        let clean = AudioSignal::new(speech_proxy(len, 16_000, &mut rng), 16_000).unwrap();
        let v = AudioSignal::new(noise(kinds[k % 3], len, 16_000, &mut rng), 16_000).unwrap();
        let m = mix_at_snr(&clean, &v, snr).map_err(|e| e.to_string())?;
        let native = stoi(&m.noisy, &m.clean).map_err(|e| e.to_string())?.unclamped;
        let oracle = stoi_reference(m.clean.samples(), m.noisy.samples(), 16_000);
        worst = worst.max((native - oracle).abs());
    }
    let (clean, noisy, _) = synthesize_pair(&SynthConfig::default(), 3).unwrap();
    let identity = (stoi(&clean, &clean).unwrap().value - 1.0).abs();
    let a = stoi(&noisy, &clean).unwrap().value;
    let scale = (stoi(&noisy.scaled(0.25), &clean).unwrap().value - a)
        .abs()
        .max((stoi(&noisy, &clean.scaled(4.0)).unwrap().value - a).abs());
    ensure(
        worst <= 1e-3 && identity <= 1e-6 && scale <= 1e-6,
        format!("max |native - oracle| {worst:.2e} on 20 pairs, |stoi(s,s) - 1| {identity:.1e}, scale {scale:.1e}"),
    )
}

fn gradient_checks() -> Check {
    let mut groups = masknet_groups(6, 21);
    groups.extend(discriminator_groups(6, 22).into_iter().map(|mut g| {
        g.name = format!("discriminator.{}", g.name);
        g
    }));
    let has_scale = groups.iter().any(|g| g.name == "sigmoid.alpha") && groups.iter().any(|g| g.name == "sigmoid.beta");
    let worst = groups
        .iter()
        .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
        .expect("groups");
    ensure(
        has_scale && worst.max_rel_err < 1e-3,
        format!(
            "{} groups incl. sigmoid alpha/beta: {has_scale}; worst {} {:.2e}",
            groups.len(),
            worst.name,
            worst.max_rel_err
        ),
    )
}

fn loss_algebra() -> Check {
    let (pc, pe, pn, pd) = (0.9, 0.55, 0.31, 0.62);
    let (qe, qn, qd) = (0.7, 0.25, 0.5);
    let base = DiscriminatorTerms {
        pred_clean: pc,
        pred_enh: pe,
        pred_noisy: pn,
        q_enh: qe,
        q_noisy: qn,
        deenh: None,
    };
    let full = DiscriminatorTerms {
        deenh: Some((pd, qd)),
        ..base
    };
    let l1 = loss_discriminator(&base).map_err(|e| e.to_string())?;
    let l3 = loss_discriminator(&full).map_err(|e| e.to_string())?;
    let hand1 = 0.1f64 * 0.1 + 0.15 * 0.15 + 0.06 * 0.06;
    let hand3 = hand1 + 0.12 * 0.12;
    let checks = [
        (l1 - hand1).abs(),
        (l3 - hand3).abs(),
        (loss_generator(0.83) - 0.17 * 0.17).abs(),
        (loss_degenerator(0.62, 0.45) - 0.17 * 0.17).abs(),
        (l3 - (pd - qd).powi(2) - l1).abs(),
    ];
    let worst = checks.iter().cloned().fold(0.0, f64::max);
    let zeroed = DiscriminatorTerms {
        deenh: Some((qd, qd)),
        ..base
    };
    let exact = loss_discriminator(&zeroed).unwrap() == l1;
    ensure(
        worst <= 1e-12 && exact,
        format!("max deviation from hand values {worst:.1e}; zero fourth term reproduces the baseline exactly: {exact}"),
    )
}

fn buffer_arithmetic() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut lines = Vec::new();
    for (i, h) in [(100usize, 0.2f64), (100, 0.4), (10, 0.1)] {
        let per_epoch = (h * i as f64 + 1e-9).floor() as usize;
        let mut plus = ReplayBuffer::new();
        let mut both = ReplayBuffer::new();
        for epoch in 1..=5 {
            buffer_update(&mut plus, replay::entries(i, Mode::MgPlus), h, i, Mode::MgPlus, &mut rng)
                .map_err(|e| e.to_string())?;
            buffer_update(&mut both, replay::entries(i, Mode::MgPlusMinus), h, i, Mode::MgPlusMinus, &mut rng)
                .map_err(|e| e.to_string())?;
            if plus.len() != epoch * per_epoch || both.len() != 2 * epoch * per_epoch {
                return Err(format!(
                    "(I={i}, H={h}) epoch {epoch}: {} / {} entries, expected {} / {}",
                    plus.len(),
                    both.len(),
                    epoch * per_epoch,
                    2 * epoch * per_epoch
                ));
            }
        }
        lines.push(format!("(I={i}, H={h}) -> {} / {}", plus.len(), both.len()));
    }
    Ok(format!("after 5 epochs: {}", lines.join(", ")))
}

fn discriminator_regression() -> Check {
    let start = Instant::now();
    let config = SynthConfig {
        n_pairs: 500,
        min_duration: 0.5,
        max_duration: 0.5,
        snr_grid: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
        seed: 7,
        ..SynthConfig::default()
    };
    let params = FrameParams::default();
    let mut samples = Vec::with_capacity(500);
    for i in 0..config.n_pairs {
        let (clean, noisy, _) = synthesize_pair(&config, i).map_err(|e| e.to_string())?;
        let q = normalize(MetricId::Stoi, stoi(&noisy, &clean).map_err(|e| e.to_string())?.value).value();
        let (fx, _) = compute_features(&noisy, &params).map_err(|e| e.to_string())?;
        let (fs, _) = compute_features(&clean, &params).map_err(|e| e.to_string())?;
        samples.push(RegressionSample::new(fx.values(), fs.values(), q));
    }
    let (train_set, held_out) = samples.split_at(400);
    let mut d = Discriminator::<f32>::init(DiscrimConfig::default(), 5);
    let mut opt = Adam::new(&d, 5e-4, 0.9, 0.999, 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..6 {
        regression_epoch(&mut d, &mut opt, train_set, &mut rng).map_err(|e| e.to_string())?;
    }
    let mse = regression_mse(&d, held_out).map_err(|e| e.to_string())?;
    let mean = held_out.iter().map(|s| s.target).sum::<f64>() / held_out.len() as f64;
    let var = held_out.iter().map(|s| (s.target - mean).powi(2)).sum::<f64>() / held_out.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        mse < 0.02 && secs < 600.0,
        format!("held-out MSE {mse:.4} (label variance {var:.4}) on 100 pairs after 6 passes over 400, {secs:.0} s"),
    )
}

/// Outputs of one toy training run used by criteria 7 to 9.
struct ToyRun {
    seed: u64,
    dir: PathBuf,
    secs: f64,
    degenerator_pred: f64,
    enhanced_stoi: f64,
}

struct ToyRuns {
    _tmp: tempfile::TempDir,
    runs: Vec<ToyRun>,
    noisy_stoi: f64,
    repeat_dir: PathBuf,
}

fn toy_setup(root: &Path) -> Result<(AppConfig, Vec<Utterance>, Vec<Utterance>), String> {
    let app = AppConfig::load(Some(&repo_root().join("configs/toy.toml")), &[]).map_err(|e| e.to_string())?;
    let corpus = root.join("corpus");
    synthesize_corpus(&app.synth, &corpus).map_err(|e| e.to_string())?;
    let manifest = load_manifest(corpus.join("manifest.csv"), app.data.layout).map_err(|e| e.to_string())?;
    let train_set = load_split(&manifest, Split::Train).map_err(|e| e.to_string())?;
    let test_set = load_split(&manifest, Split::Test).map_err(|e| e.to_string())?;
    Ok((app, train_set, test_set))
}

fn mean_degenerator_prediction(ck: &Checkpoint, test_set: &[Utterance]) -> Result<f64, String> {
    let n = Enhancer::from_checkpoint(ck, Role::DeGenerator).map_err(|e| e.to_string())?;
    let d = ck.discriminator::<f64>().map_err(|e| e.to_string())?;
    let params = FrameParams::default();
    let mut total = 0.0;
    for u in test_set {
        let (fx, frames) = compute_features(&u.noisy, &params).map_err(|e| e.to_string())?;
        let (fs, _) = compute_features(&u.clean, &params).map_err(|e| e.to_string())?;
        let mask = n.mask(&fx).map_err(|e| e.to_string())?;
        let out = FeatureMatrix::from_magnitude(&(mask.values() * &frames.magnitude));
        total += d.forward(out.values().view(), fs.values().view()).map_err(|e| e.to_string())?;
    }
    Ok(total / test_set.len() as f64)
}

fn mean_stoi(enhancer: &Enhancer, test_set: &[Utterance]) -> Result<f64, String> {
    evaluate_testset(
        enhancer,
        test_set,
        &[MetricId::Stoi],
        &MetricEvaluator::native_only(),
        ReportSnapshot::passthrough(),
    )
    .map_err(|e| e.to_string())?
    .mean(MetricId::Stoi)
    .ok_or_else(|| "no STOI scores".to_string())
}

fn toy_runs() -> Result<ToyRuns, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (app, train_set, test_set) = toy_setup(tmp.path())?;
    let noisy_stoi = mean_stoi(&Enhancer::Passthrough, &test_set)?;
    let run = |seed: u64, dir: PathBuf| -> Result<(Checkpoint, f64), String> {
        let mut config = app.train.clone();
        config.seed = seed;
        let start = Instant::now();
        let out = train(config, &train_set, app.metrics.evaluator(), Some(&dir)).map_err(|e| e.to_string())?;
        Ok((out.final_checkpoint, start.elapsed().as_secs_f64()))
    };
    let mut runs = Vec::new();
    for seed in [1, 2, 3] {
        let dir = tmp.path().join(format!("seed{seed}"));
        let (ck, secs) = run(seed, dir.clone())?;
        let g = Enhancer::from_checkpoint(&ck, Role::Generator).map_err(|e| e.to_string())?;
        let r = ToyRun {
            seed,
            dir,
            secs,
            degenerator_pred: mean_degenerator_prediction(&ck, &test_set)?,
            enhanced_stoi: mean_stoi(&g, &test_set)?,
        };
        report!(
            "  toy seed {}: {:.0} s, held-out STOI {:.3} (noisy {:.3}), mean D(N(x)) {:.3}",
            r.seed, r.secs, r.enhanced_stoi, noisy_stoi, r.degenerator_pred
        );
        runs.push(r);
    }
    let repeat_dir = tmp.path().join("seed1_repeat");
    run(1, repeat_dir.clone())?;
    Ok(ToyRuns {
        _tmp: tmp,
        runs,
        noisy_stoi,
        repeat_dir,
    })
}

fn degenerator_targeting(t: &ToyRuns) -> Check {
    let mean = t.runs.iter().map(|r| r.degenerator_pred).sum::<f64>() / t.runs.len() as f64;
    let per: Vec<String> = t.runs.iter().map(|r| format!("{:.3}", r.degenerator_pred)).collect();
    ensure(
        (mean - 0.5).abs() <= 0.15,
        format!("mean predicted score of de-generator outputs {mean:.3} (seeds: {})", per.join(", ")),
    )
}

fn end_to_end_improvement(t: &ToyRuns) -> Check {
    let wins = t.runs.iter().filter(|r| r.enhanced_stoi > t.noisy_stoi).count();
    let secs: f64 = t.runs.iter().map(|r| r.secs).sum();
    let per: Vec<String> = t.runs.iter().map(|r| format!("{:.3}", r.enhanced_stoi)).collect();
    ensure(
        wins >= 2 && secs < 1800.0,
        format!(
            "enhanced STOI beats noisy {:.3} in {wins}/3 seeds ({}); 3-seed training {:.1} min",
            t.noisy_stoi,
            per.join(", "),
            secs / 60.0
        ),
    )
}

fn dir_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        out.insert(name, std::fs::read(&p).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn determinism(t: &ToyRuns) -> Check {
    let a = dir_bytes(&t.runs[0].dir)?;
    let b = dir_bytes(&t.repeat_dir)?;
    let names: Vec<&String> = a.keys().collect();
    if !a.contains_key("history.jsonl") || a.len() < 2 {
        return Err(format!("run directory lacks history or checkpoints: {names:?}"));
    }
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    ensure(
        differing.is_empty() && a.len() == b.len(),
        format!("{} files compared byte for byte ({names:?}); differing: {differing:?}", a.len()),
    )
}

/// Expected (mode, objective, w, H, learn_beta) of each shipped VoiceBank training row.
fn voicebank_rows() -> Vec<(&'static str, Mode, MetricId, Option<f64>, f64, bool)> {
    use MetricId::{Pesq, Stoi};
    use Mode::{MgPlus, MgPlusMinus};
    vec![
        ("01_mg_plus_pesq_h0.2", MgPlus, Pesq, None, 0.2, false),
        ("02_mg_plus_stoi_h0.2", MgPlus, Stoi, None, 0.2, false),
        ("03_mg_plus_pesq_h0.4", MgPlus, Pesq, None, 0.4, false),
        ("04_mg_pm_pesq_w1.0_h0.2", MgPlusMinus, Pesq, Some(1.0), 0.2, false),
        ("05_mg_pm_pesq_w0.50_h0.2", MgPlusMinus, Pesq, Some(0.5), 0.2, false),
        ("06_mg_pm_pesq_w0.45_h0.2", MgPlusMinus, Pesq, Some(0.45), 0.2, false),
        ("07_mg_pm_pesq_w0.45_h0.2_learn_beta", MgPlusMinus, Pesq, Some(0.45), 0.2, true),
        ("08_mg_pm_pesq_w0.45_h0.1", MgPlusMinus, Pesq, Some(0.45), 0.1, false),
        ("09_mg_pm_pesq_w0.30_h0.2", MgPlusMinus, Pesq, Some(0.3), 0.2, false),
        ("10_mg_pm_stoi_w0.45_h0.1", MgPlusMinus, Stoi, Some(0.45), 0.1, false),
        ("11_mg_pm_stoi_w0.30_h0.2", MgPlusMinus, Stoi, Some(0.3), 0.2, false),
    ]
}

fn noisy_row(vbd_root: &str, pesq_cmd: &str) -> Check {
    let dir = repo_root().join("configs/voicebank");
    let mut app = AppConfig::load(Some(&dir.join("00_noisy_baseline.toml")), &[]).map_err(|e| e.to_string())?;
    app.data.manifest = Some(PathBuf::from(vbd_root));
    app.metrics.pesq = Some(ExternalCommand::new(pesq_cmd.split_whitespace()));
    let manifest = load_manifest(vbd_root, app.data.layout).map_err(|e| e.to_string())?;
    let test_set = load_split(&manifest, Split::Test).map_err(|e| e.to_string())?;
    let report = evaluate_testset(
        &Enhancer::Passthrough,
        &test_set,
        &[MetricId::Pesq, MetricId::Stoi],
        &app.metrics.evaluator(),
        ReportSnapshot::passthrough(),
    )
    .map_err(|e| e.to_string())?;
    let pesq = report.mean(MetricId::Pesq).ok_or("no PESQ scores")?;
    let stoi100 = 100.0 * report.mean(MetricId::Stoi).ok_or("no STOI scores")?;
    ensure(
        (pesq - 1.97).abs() <= 0.02 && (stoi100 - 92.0).abs() <= 0.5,
        format!("noisy row on {} pairs: PESQ {pesq:.3}, STOI {stoi100:.2}", test_set.len()),
    )
}

fn recipe_configs() -> Check {
    let dir = repo_root().join("configs/voicebank");
    let baseline = AppConfig::load(Some(&dir.join("00_noisy_baseline.toml")), &[]).map_err(|e| e.to_string())?;
    if baseline.evaluate.metrics != [MetricId::Pesq, MetricId::Stoi, MetricId::Csig, MetricId::Cbak, MetricId::Covl] {
        return Err("noisy baseline does not request the five report metrics".into());
    }
    for (name, mode, objective, w, h, learn_beta) in voicebank_rows() {
        let c = AppConfig::load(Some(&dir.join(format!("{name}.toml"))), &[]).map_err(|e| format!("{name}: {e}"))?;
        let t = &c.train;
        let ok = t.mode == mode
            && t.objective == objective
            && w.is_none_or(|w| t.w == w)
            && t.history_portion == h
            && t.learn_beta == learn_beta
            && t.segments_per_epoch == 100
            && t.learning_rate == 5e-4
            && c.evaluate.metrics.len() == 5;
        if !ok {
            return Err(format!("{name} does not match its recipe row"));
        }
    }
    for part in ["et05_real", "et05_simu"] {
        let path = repo_root().join(format!("configs/chime3/{part}.toml"));
        let c = AppConfig::load(Some(&path), &[]).map_err(|e| format!("{part}: {e}"))?;
        if c.data.layout != (ManifestLayout::Chime3 { channel: Some(5) }) {
            return Err(format!("{part} does not select channel 5"));
        }
    }
    let recipe = "12 VoiceBank recipe configs (noisy + 11 trained rows) parse and match, CHiME3 test configs parse";
    match (std::env::var("METRICGAN_VBD_ROOT"), std::env::var("METRICGAN_PESQ_CMD")) {
        (Ok(root), Ok(cmd)) => noisy_row(&root, &cmd).map(|d| format!("{recipe}; {d}")),
        _ => Ok(format!(
            "{recipe}; noisy-row reproduction NOT RUN (set METRICGAN_VBD_ROOT and METRICGAN_PESQ_CMD)"
        )),
    }
}

fn selected() -> Vec<usize> {
    match std::env::var("METRICGAN_ACCEPTANCE") {
        Ok(list) if !list.trim().is_empty() => list.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        _ => (1..=10).collect(),
    }
}

fn report(n: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    report!("{tag} criterion {n:>2} {name}: {detail} [{:.1} s]", start.elapsed().as_secs_f64());
    outcome.is_ok()
}

#[test]
fn acceptance() {
    let want = selected();
    let on = |n: usize| want.contains(&n);
    let mut failed = Vec::new();
    let mut check = |n: usize, name: &str, f: &mut dyn FnMut() -> Check| {
        if on(n) && !report(n, name, f) {
            failed.push(n);
        }
    };
    check(1, "signal round trip", &mut signal_round_trip);
    check(2, "STOI oracle equivalence", &mut stoi_equivalence);
    check(3, "gradient checks", &mut gradient_checks);
    check(4, "loss algebra", &mut loss_algebra);
    check(5, "replay buffer arithmetic", &mut buffer_arithmetic);
    check(6, "discriminator as regressor", &mut discriminator_regression);
    if on(7) || on(8) || on(9) {
        let runs = catch_unwind(toy_runs).unwrap_or_else(|_| Err("toy training panicked".into()));
        let with = |f: fn(&ToyRuns) -> Check| match &runs {
            Ok(t) => f(t),
            Err(e) => Err(format!("toy runs failed: {e}")),
        };
        check(7, "de-generator targeting", &mut || with(degenerator_targeting));
        check(8, "end-to-end improvement", &mut || with(end_to_end_improvement));
        check(9, "determinism", &mut || with(determinism));
    }
    check(10, "full recipe support", &mut recipe_configs);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
