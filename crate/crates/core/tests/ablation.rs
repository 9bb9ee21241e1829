use cgstae::config::{Ablation, ExperimentConfig};
use cgstae::harness::{run_ablations, write_synth_experiment, SynthOptions};

#[test]
fn ablation_report_covers_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    let opts = SynthOptions {
        train_length: 400,
        test_length: 200,
        onset: 80,
        fault_variables: vec![0],
        ..SynthOptions::default()
    };
    let cfg_path = write_synth_experiment(&opts, dir.path()).unwrap();
    let mut cfg = ExperimentConfig::load(&cfg_path).unwrap();
    cfg.train.epochs_pretrain = 3;
    cfg.train.epochs_graph = 3;
    cfg.train.epochs_finetune = 3;
    let rows = run_ablations(&cfg).unwrap();
    let variants: Vec<Ablation> = rows.iter().map(|r| r.ablation).collect();
    assert_eq!(variants, Ablation::ALL.to_vec());
    let table = std::fs::read_to_string(cfg.run.dir.join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.contains("\nno-invariance,"));
    for v in Ablation::ALL {
        assert!(cfg.run.dir.join("ablation").join(v.as_str()).join("metrics.json").exists());
    }
    // the no-prior and full runs share step 1 exactly
    let pre = |v: Ablation| {
        std::fs::read(cfg.run.dir.join("ablation").join(v.as_str()).join("checkpoints/pretrain.json"))
            .unwrap()
    };
    assert_eq!(pre(Ablation::None), pre(Ablation::NoPrior));
}
