use rlfd_core::learn::RewardSpec;
use rlfd_core::residual::ExplorationLocus;
use rlfd_core::Error;
use rlfd_harness::experiments::{
    ablation_conditions, emit_outputs, fullpose_conditions, locus_conditions, mean_stderr, merge_spec, render_report,
    run_family, strategy_conditions, stratified_starts, task_config, transfer_conditions, ExperimentSpec, Family,
    ResidualKind, ResultTable, Session,
};
use rlfd_harness::runner::ControlMode;

fn invalid(r: rlfd_core::Result<ExperimentSpec>) -> bool {
    matches!(r, Err(Error::InvalidArgument(_)))
}

#[test]
fn dotted_keys_and_nested_tables_merge_over_defaults() {
    let base = ExperimentSpec::for_family(Family::Locus);
    let flat = merge_spec("episodes = 12\nlearner.ppo.epochs = 2\nseeds = [4]", base.clone()).unwrap();
    let nested = merge_spec("episodes = 12\nseeds = [4]\n[learner.ppo]\nepochs = 2", base.clone()).unwrap();
    assert_eq!(flat, nested);
    assert_eq!(flat.episodes, 12);
    assert_eq!(flat.learner.ppo.epochs, 2);
    assert_eq!(flat.learner.ppo.clip, base.learner.ppo.clip);
    assert_eq!(flat.learner.sac, base.learner.sac);
    assert_eq!(flat.seeds, vec![4]);
    assert_eq!(flat.eval_tasks, base.eval_tasks);

    let s = merge_spec("learner_episodes.sac = 300", base).unwrap();
    assert_eq!(s.budget(ResidualKind::Sac), 300);
    assert_eq!(s.budget(ResidualKind::Ppo), 2000);
    assert_eq!(s.budget(ResidualKind::Random), 0);
}

#[test]
fn reward_table_is_replaced_not_merged() {
    let base = ExperimentSpec {
        reward: Some(RewardSpec::dense_default()),
        ..ExperimentSpec::default()
    };
    let s = merge_spec("[reward]\nkind = \"sparse\"\nkappa = 0.003", base).unwrap();
    assert_eq!(s.reward, Some(RewardSpec::sparse(0.003)));
}

#[test]
fn invalid_specs_are_rejected() {
    let base = ExperimentSpec::default();
    assert!(invalid(merge_spec("episodes = 0", base.clone())));
    assert!(invalid(merge_spec("seeds = []", base.clone())));
    assert!(invalid(merge_spec("eval_episodes = 0", base.clone())));
    assert!(invalid(merge_spec("eval_tasks = [\"easy\", \"nope\"]", base.clone())));
    assert!(invalid(merge_spec("train_task = \"nope\"", base.clone())));
    assert!(invalid(merge_spec("success_target = 1.5", base.clone())));
    assert!(invalid(merge_spec("bins = 4\nbin_size = 0", base.clone())));
    assert!(invalid(merge_spec("learner_episodes.linear = 10", base.clone())));
    assert!(invalid(merge_spec("learner_episodes.sac = 0", base.clone())));
    // Residual, locus and mode must agree.
    assert!(invalid(merge_spec("residual = \"none\"\nlocus = \"task-space\"", base.clone())));
    assert!(invalid(merge_spec("residual = \"random\"\nlocus = \"coupling-term\"", base.clone())));
    assert!(invalid(merge_spec("residual = \"ppo\"\nlocus = \"none\"", base.clone())));
    assert!(invalid(merge_spec("residual = \"sac\"\nlocus = \"parameter-space\"\nmode = \"pure-rl\"", base.clone())));
    assert!(merge_spec("residual = \"none\"\nlocus = \"none\"", base.clone()).is_ok());
    assert!(merge_spec("residual = \"sac\"\nlocus = \"task-space\"\nmode = \"hybrid\"", base.clone()).is_ok());
    assert!(matches!(merge_spec("episodes = \"many\"", base.clone()), Err(Error::Format(_))));
    assert!(matches!(merge_spec("episodes = ", base), Err(Error::Format(_))));
}

#[test]
fn mean_and_standard_error() {
    let (m, e) = mean_stderr(&[]);
    assert!(m.is_nan() && e.is_none());
    assert_eq!(mean_stderr(&[42.0]), (42.0, None));
    // Sample variance of {2, 4, 6} is 4, so the standard error is 2 / sqrt(3).
    let (m, e) = mean_stderr(&[2.0, 4.0, 6.0]);
    assert_eq!(m, 4.0);
    assert!((e.unwrap() - 2.0 / 3f64.sqrt()).abs() < 1e-15);
    assert_eq!(mean_stderr(&[5.0; 4]).1, Some(0.0));
}

#[test]
fn empty_inputs_report_no_data() {
    assert!(render_report(&[]).contains("| no data |"));
    let empty = ResultTable {
        experiment: "locus".into(),
        seeds: vec![0],
        ..ResultTable::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let written = emit_outputs(&[empty], dir.path()).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["locus_0.csv", "locus_summary.csv", "report.md"]);
    let report = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(report.contains("## locus") && report.contains("| no data |"));
    let summary = std::fs::read_to_string(dir.path().join("locus_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn family_condition_lists() {
    let spec = ExperimentSpec::for_family(Family::Locus);
    let locus = locus_conditions(&spec);
    let labels: Vec<&str> = locus.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, ["None", "CouplingTerm", "ParameterSpace", "TaskSpace"]);
    assert_eq!(locus[0].translation, ResidualKind::None);
    assert_eq!(locus[0].episodes, 0);
    assert!(locus[1..].iter().all(|c| c.translation == ResidualKind::Ppo && c.episodes == 2000));
    assert_eq!(locus[1].reward, RewardSpec::ExpL1);
    assert_eq!(locus[2].reward, RewardSpec::ExpL1);
    assert!(matches!(locus[3].reward, RewardSpec::Sparse { .. }));
    let unmirrored = ExperimentSpec {
        mirror_paper_rewards: false,
        ..spec.clone()
    };
    assert!(locus_conditions(&unmirrored).iter().all(|c| matches!(c.reward, RewardSpec::Sparse { .. })));

    let strategy = strategy_conditions(&ExperimentSpec::for_family(Family::Strategy));
    let labels: Vec<&str> = strategy.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, ["Random", "Linear", "SAC", "PPO"]);
    assert!(strategy.iter().all(|c| c.locus == ExplorationLocus::TaskSpace));
    assert_eq!(strategy[2].episodes, 1000);
    assert_eq!(strategy[3].episodes, 6000);
    assert_eq!(strategy[0].episodes, 0);

    let ablation = ablation_conditions(&ExperimentSpec::for_family(Family::Ablation));
    let modes: Vec<(&str, ControlMode)> = ablation.iter().map(|c| (c.label.as_str(), c.mode)).collect();
    assert_eq!(
        modes,
        [
            ("DMP", ControlMode::Residual),
            ("PureRL", ControlMode::PureRl),
            ("Hybrid", ControlMode::Hybrid),
            ("rLfD", ControlMode::Residual)
        ]
    );
    assert_eq!(ablation[1].episodes, 6000);
    assert_eq!(ablation[1].reward, RewardSpec::dense_default());

    let fp = fullpose_conditions(&ExperimentSpec::for_family(Family::FullPose));
    assert_eq!(fp.len(), 18);
    for (chunk, task) in fp.chunks(6).zip(["peg", "gear", "rj45"]) {
        assert!(chunk.iter().all(|c| c.train_task == task && c.eval_tasks == [task]));
        let labels: Vec<&str> = chunk.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["None/None", "Linear/None", "PPO/None", "Linear/Random", "Random/Random", "PPO/PPO"]);
        assert!(chunk.iter().all(|c| c.validate().is_ok()));
        assert_eq!(chunk[5].episodes, 3000);
    }

    let tr = transfer_conditions(&ExperimentSpec::for_family(Family::Transfer));
    assert_eq!(tr[0].train_task, "hard");
    assert_eq!(tr[1].train_task, "easy");
    assert_eq!(tr[1].eval_tasks, ["hard"]);
    assert_eq!(tr[2].max_updates, Some(3));
    assert!(tr[2].fine_tune_from.is_none());
    assert_eq!(tr[3].fine_tune_from.as_ref().unwrap().train_task, "easy");
}

#[test]
fn stratified_starts_land_in_their_bins() {
    let config = task_config("peg", RewardSpec::sparse(0.002)).unwrap();
    let bins = stratified_starts(&config, 8, 5, 0);
    assert_eq!(bins.len(), 8);
    for (b, lo, hi, starts) in &bins {
        assert!((hi - lo - 5.0).abs() < 1e-9, "bin {b}: [{lo}, {hi})");
        assert_eq!(starts.len(), 5);
        for st in starts {
            let deg = st.orientation.geodesic_distance(&rlfd_core::orientation::UnitQuaternion::identity()).to_degrees();
            assert!(deg >= lo - 1e-9 && deg <= hi + 1e-9);
        }
    }
    assert_eq!(stratified_starts(&config, 8, 5, 0)[3].3, bins[3].3);
}

fn tiny_spec(threads: usize) -> ExperimentSpec {
    merge_spec(
        r#"
        name = "tiny"
        episodes = 6
        eval_episodes = 2
        eval_tasks = ["easy"]
        seeds = [0, 1]
        curve_window = 2
        learner.ppo.batch_episodes = 3
        learner.ppo.epochs = 1
        "#,
        ExperimentSpec {
            threads,
            ..ExperimentSpec::for_family(Family::Locus)
        },
    )
    .unwrap()
}

#[test]
fn tiny_family_run_is_identical_across_thread_counts() {
    let a = run_family(&Session::new(None).unwrap(), Family::Locus, &tiny_spec(1)).unwrap();
    let b = run_family(&Session::new(None).unwrap(), Family::Locus, &tiny_spec(2)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 4);
    assert_eq!(a.runs.len(), 8);
    for r in a.runs.iter().filter(|r| r.condition != "None") {
        assert_eq!(r.eff, Some(6));
        assert_eq!(r.updates, 2);
        assert_eq!(r.curve.len(), 6);
    }
    assert!(a.rows.iter().all(|r| r.stderr.is_some() && r.per_seed.len() == 2));

    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let wa = emit_outputs(&[a], da.path()).unwrap();
    let wb = emit_outputs(&[b], db.path()).unwrap();
    assert_eq!(wa.len(), wb.len());
    for (pa, pb) in wa.iter().zip(&wb) {
        assert_eq!(pa.file_name(), pb.file_name());
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap(), "{pa:?}");
    }
    let names: Vec<String> = wa.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert!(names.contains(&"tiny_summary.csv".to_string()));
    assert!(names.contains(&"tiny_curve_taskspace_easy_1.csv".to_string()));
}
