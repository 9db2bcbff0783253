use egoword::evalx::{model_accuracy, render_test_set, PreparedTestSet};
use egoword::learner::{argmax, softmax, train_prepared, History, PreparedEvent, StopReason};
use egoword::scene::make_inventory;
use egoword::{Model, ModelConfig, TrainConfig};
use proptest::prelude::*;

fn config(seed: u64) -> ModelConfig {
    ModelConfig {
        input_size: 32,
        init_seed: seed,
        ..ModelConfig::default()
    }
}

fn test_set() -> PreparedTestSet {
    render_test_set(&make_inventory(0), 1, 160, 120, 4).prepare(32)
}

/// One clean image per category, each as a one-frame event.
fn one_per_category(test: &PreparedTestSet) -> Vec<PreparedEvent> {
    (0..24u8)
        .map(|c| PreparedEvent {
            target: c,
            frames: vec![test.inputs[test.labels.iter().position(|&l| l == c).unwrap()].clone()],
        })
        .collect()
}

fn run(events: &[PreparedEvent], tcfg: &TrainConfig, seed: u64) -> (Model, History) {
    let refs: Vec<&PreparedEvent> = events.iter().collect();
    train_prepared(Model::new(&config(seed)).unwrap(), &refs, tcfg).unwrap()
}

#[test]
fn memorizes_a_tiny_set() {
    // Nine events, so nothing is held out and the training loss drives the
    // schedule; four rotated views per event.
    let test = test_set();
    let events: Vec<PreparedEvent> = (0..9u8)
        .map(|c| PreparedEvent {
            target: c,
            frames: test
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == c)
                .take(4)
                .map(|(i, _)| test.inputs[i].clone())
                .collect(),
        })
        .collect();
    let tcfg = TrainConfig {
        batch_size: 4,
        max_epochs: 80,
        plateau_patience: 10,
        lr_init: 0.003,
        lr_final: 1e-6,
        seed: 2,
        ..TrainConfig::default()
    };
    let (model, history) = run(&events, &tcfg, 3);
    let last = history.epochs.last().unwrap();
    println!("epochs {} train loss {:.4} stop {:?}", history.epochs.len(), last.train_loss, history.stop_reason);
    let best = history.epochs.iter().map(|e| e.train_loss).fold(f64::INFINITY, f64::min);
    assert!(best < 0.1, "training loss never fell below 0.1 (best {best})");
    let train_set = PreparedTestSet {
        labels: events.iter().flat_map(|e| vec![e.target; e.frames.len()]).collect(),
        inputs: events.iter().flat_map(|e| e.frames.clone()).collect(),
    };
    assert_eq!(model_accuracy(&model, &train_set), 1.0);
}

#[test]
fn training_is_deterministic() {
    let test = test_set();
    let events = one_per_category(&test);
    let tcfg = TrainConfig {
        max_epochs: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let (a, ha) = run(&events, &tcfg, 1);
    let (b, hb) = run(&events, &tcfg, 1);
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(ha.stop_reason, StopReason::MaxEpochs);
    let (c, _) = run(&events, &TrainConfig { seed: 10, ..tcfg }, 1);
    assert_ne!(a, c);
}

#[test]
fn untrained_accuracy_is_near_chance() {
    let test = render_test_set(&make_inventory(0), 2, 160, 120, 4).prepare(32);
    let accs: Vec<f64> = (0..10)
        .map(|s| model_accuracy(&Model::new(&config(100 + s)).unwrap(), &test))
        .collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    println!("untrained accuracies {accs:?}");
    assert!((0.01..=0.09).contains(&mean), "mean untrained accuracy {mean}");
}

proptest! {
    #![proptest_config(ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(256)
    })]

    /// The predicted class only depends on the order of the logits.
    #[test]
    fn prediction_invariant_under_monotone_maps(
        logits in prop::collection::vec(-20.0f64..20.0, 24),
        shift in -50.0f64..50.0,
        gain in 0.01f64..10.0,
    ) {
        let k = argmax(&logits);
        prop_assert_eq!(argmax(&softmax(&logits)), k);
        let affine: Vec<f64> = logits.iter().map(|l| gain * l + shift).collect();
        prop_assert_eq!(argmax(&affine), k);
        let cubed: Vec<f64> = logits.iter().map(|l| l.powi(3)).collect();
        prop_assert_eq!(argmax(&cubed), k);
        let probs = softmax(&logits);
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
