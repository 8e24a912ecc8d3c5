//! One pass over the whole pipeline, through real files: dataset on disk →
//! reward model → response scores → margin-scaled policy training →
//! evaluation, with every artifact surviving its serialization round trip.

mod common;

use prefalign::data::Dataset;
use prefalign::eval::{
    eval_reward_model, implicit_reward_accuracy, score_dataset, CritiqueMode,
};
use prefalign::pairs::attach_margins;
use prefalign::reward::{score_records_from_jsonl, score_records_to_jsonl, score_table};
use prefalign::trainer::{
    extract_pairs, train_policy, train_reward, Checkpoint, MarginSource, TrainConfig,
};

use common::planted_preference_dataset;

#[test]
fn dataset_to_trained_policy_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, _) = planted_preference_dataset(40, 7);

    // The items survive a disk round trip. The file format carries no
    // vocabulary size, so loading infers the tightest one — highest
    // referenced token id plus one — and the rest of the pipeline runs on
    // the loaded dataset.
    let data_path = dir.path().join("train.jsonl");
    dataset.save(&data_path).unwrap();
    let loaded = Dataset::load(&data_path).unwrap();
    assert_eq!(loaded.items(), dataset.items());
    let max_id = loaded
        .items()
        .iter()
        .flat_map(|item| &item.responses)
        .flat_map(|r| r.tokens.iter().chain(r.critique.iter()))
        .copied()
        .max()
        .unwrap();
    assert_eq!(loaded.vocab_size(), max_id as usize + 1);

    // Train a reward model on the annotations.
    let reward_config = TrainConfig {
        lr: 0.3,
        steps: 60,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let reward_run = train_reward(&loaded, &reward_config).unwrap();
    assert!(
        reward_run.history.last().unwrap().loss < reward_run.history[0].loss,
        "reward training must reduce its loss"
    );

    // Its benchmark report is well-formed and the planted order is learned.
    let report =
        eval_reward_model(&reward_run.reward_model, &loaded, CritiqueMode::GroundTruth, 8)
            .unwrap();
    assert_eq!(report.overall.n_pairs, 40);
    assert!(report.overall.acc >= 0.9, "reward ACC {} too low", report.overall.acc);

    // Scores flow through their JSONL representation unchanged.
    let records =
        score_dataset(&reward_run.reward_model, &loaded, CritiqueMode::Inferred, 8).unwrap();
    let scores_path = dir.path().join("scores.jsonl");
    std::fs::write(&scores_path, score_records_to_jsonl(&records)).unwrap();
    let reread = score_records_from_jsonl(&std::fs::read_to_string(&scores_path).unwrap()).unwrap();
    assert_eq!(reread.len(), records.len());
    let table = score_table(&reread);

    // The margins those scores induce drive policy training.
    let mut pairs = extract_pairs(&loaded);
    attach_margins(&mut pairs, &table).unwrap();
    let config = TrainConfig {
        objective: "margin-dpo".to_string(),
        lr: 0.1,
        steps: 150,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let run = train_policy(&loaded, &config, &MarginSource::Table(&table)).unwrap();
    let acc = implicit_reward_accuracy(&run.policy, &run.reference, &pairs).unwrap();
    assert_eq!(acc, 1.0, "planted preference must be fully recovered");

    // The final checkpoint round-trips.
    let ckpt_path = dir.path().join("policy.ckpt.json");
    let checkpoint = Checkpoint::for_policy_run(&config, &run);
    checkpoint.save(&ckpt_path).unwrap();
    assert_eq!(Checkpoint::load(&ckpt_path).unwrap(), checkpoint);
}

#[test]
fn margins_from_reward_model_match_margins_from_its_score_file() {
    let (dataset, _) = planted_preference_dataset(12, 19);
    let reward_config = TrainConfig {
        lr: 0.3,
        steps: 40,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let rm = train_reward(&dataset, &reward_config).unwrap().reward_model;

    let config = TrainConfig {
        lr: 0.05,
        steps: 10,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let via_model = train_policy(&dataset, &config, &MarginSource::Model(&rm)).unwrap();

    let records = score_dataset(&rm, &dataset, CritiqueMode::Inferred, config.max_critique_len)
        .unwrap();
    let table = score_table(&records);
    let via_table = train_policy(&dataset, &config, &MarginSource::Table(&table)).unwrap();

    assert_eq!(via_model.policy, via_table.policy);
    assert_eq!(via_model.history, via_table.history);
}
