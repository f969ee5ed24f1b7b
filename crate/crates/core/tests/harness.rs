use sde_core::harness::{
    evaluate, generate_task, log_jsonl, perturbed_eval, precision_at_1, train, EncoderParams, TaskConfig, TrainConfig,
    TrainMode,
};
use sde_core::rng::gaussian_matrix;
use sde_core::RngState;

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn random_embeddings_score_at_chance() {
    let pairs = 10;
    let scores: Vec<f64> = (0..400)
        .map(|seed| {
            let mut rng = RngState::new(seed);
            let x = gaussian_matrix(&mut rng, pairs, 6, 1.0).unwrap();
            let y = gaussian_matrix(&mut rng, pairs, 6, 1.0).unwrap();
            precision_at_1(&x, &y).unwrap()
        })
        .collect();
    let (mean, se) = mean_and_se(&scores);
    assert!((mean - 1.0 / pairs as f64).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn no_shared_latent_means_chance_retrieval() {
    let cfg = TaskConfig { latent_dim: 0, pairs: 128, ..TaskConfig::default() };
    let task = generate_task(&cfg, 8).unwrap();
    let p = task.test.len() as f64;
    let scores: Vec<f64> = (0..60)
        .map(|seed| {
            let enc = EncoderParams::init(task.x.cols(), task.y.cols(), 16, seed).unwrap();
            evaluate(&enc, &task).unwrap()
        })
        .collect();
    let (mean, se) = mean_and_se(&scores);
    assert!((mean - 1.0 / p).abs() <= 3.0 * se.max(1e-3), "{mean} ± {se}");
}

#[test]
fn infonce_training_descends() {
    let task = generate_task(&TaskConfig { pairs: 128, ambient_dim: 24, ..TaskConfig::default() }, 8).unwrap();
    let cfg = TrainConfig {
        mode: TrainMode::InfonceOnly,
        embed_dim: 16,
        batch_size: 8,
        total_steps: 300,
        ..TrainConfig::default()
    };
    let out = train(&task, &cfg).unwrap();
    let head: f64 = out.log[..20].iter().map(|r| r.report.feat).sum::<f64>() / 20.0;
    let tail: f64 = out.log[280..].iter().map(|r| r.report.feat).sum::<f64>() / 20.0;
    assert!(tail < head, "{head} -> {tail}");
}

#[test]
fn perturbation_does_not_help_on_average() {
    let task = generate_task(&TaskConfig { pairs: 256, ..TaskConfig::default() }, 16).unwrap();
    let cfg = TrainConfig { total_steps: 150, batch_size: 16, ..TrainConfig::default() };
    let out = train(&task, &cfg).unwrap();
    let clean = evaluate(&out.params, &task).unwrap();
    let drops: Vec<f64> = (0..30)
        .map(|s| clean - perturbed_eval(&out.params, &task, 0.2, &mut RngState::new(s)).unwrap())
        .collect();
    let (mean, se) = mean_and_se(&drops);
    assert!(mean >= -se, "{mean} ± {se}");
}

#[test]
fn training_log_is_json_lines() {
    let task = generate_task(&TaskConfig { pairs: 64, ambient_dim: 16, ..TaskConfig::default() }, 8).unwrap();
    let cfg = TrainConfig { total_steps: 5, batch_size: 8, embed_dim: 8, ..TrainConfig::default() };
    let out = train(&task, &cfg).unwrap();
    let text = log_jsonl(&out.log);
    assert_eq!(text.lines().count(), 5);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["report"]["feat"].is_number());
        assert!(v["schedule"]["alpha"].is_number());
    }
}
