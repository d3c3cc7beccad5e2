use prbm::config::{ConfigEntries, MappingSpec, MaskSpec, MethodChoice, Mode, NoisePhase, KEYS};
use prbm::prbm_core::trainer::NegativePhase;
use prbm::{parse_config, parse_config_str, Error, ExperimentPlan};

#[test]
fn minimal_config_gets_documented_defaults() {
    let plan = parse_config_str("mode = sweep\ntrain_data = a.csv\ntest_data = b.csv\n").unwrap();
    assert_eq!(plan.mode, Mode::Sweep);
    assert_eq!(plan.train.k, 15);
    assert_eq!(plan.train.learning_rate, 0.01);
    assert_eq!(plan.train.batch_size, 100);
    assert_eq!(plan.train.num_chains, 100);
    assert_eq!(plan.train.num_hidden, 500);
    assert_eq!(plan.train.init_weight_std, 0.01);
    assert_eq!(plan.train.negative_phase, NegativePhase::SimulatedPhysical);
    assert_eq!(plan.sigma_w, vec![0.0]);
    assert_eq!(plan.cap, vec![f64::INFINITY]);
    assert_eq!(plan.masks, vec![MaskSpec::Dense]);
    assert_eq!(plan.seeds, vec![0]);
    assert_eq!(plan.noise_phase, NoisePhase::Both);
    assert_eq!(plan.noise_draws, 5);
    assert_eq!(plan.nll_method, MethodChoice::Auto);
    assert_eq!((plan.ais_betas, plan.ais_particles), (10_000, 100));
    assert_eq!(plan.chimera, (14, 14, 4));
    assert_eq!(plan.mapping, MappingSpec::Identity);
    assert_eq!(plan.num_cells(), 1);
}

#[test]
fn lists_become_grids() {
    let plan = parse_config_str(
        "mode = sweep\ntrain_data = a\ntest_data = b\nsigma_w = 0.1, 0.3\nseeds = 1,2,3\n\
         mask = dense, random_drop:0.5, chimera, file:m.mask\ncap = inf, 1\n",
    )
    .unwrap();
    assert_eq!(plan.sigma_w, vec![0.1, 0.3]);
    assert_eq!(plan.seeds, vec![1, 2, 3]);
    assert_eq!(plan.cap, vec![f64::INFINITY, 1.0]);
    assert_eq!(
        plan.masks,
        vec![
            MaskSpec::Dense,
            MaskSpec::RandomDrop(0.5),
            MaskSpec::Chimera,
            MaskSpec::File("m.mask".into())
        ]
    );
    assert_eq!(plan.num_cells(), 2 * 3 * 4 * 2);
}

#[test]
fn misspelled_key_names_the_nearest_key() {
    let e = parse_config_str("mode = sweep\nsigmaw = 0.1\n").unwrap_err();
    match &e {
        Error::UnknownKey { key, line, suggestion } => {
            assert_eq!((key.as_str(), *line, suggestion.as_deref()), ("sigmaw", 2, Some("sigma_w")));
        }
        other => panic!("{other}"),
    }
    assert!(e.to_string().contains("did you mean `sigma_w`"));
    let e = parse_config_str("mode = train\nlearnin_rate = 1\n").unwrap_err();
    assert!(e.to_string().contains("learning_rate"));
}

#[test]
fn bad_values_and_missing_keys_are_reported() {
    let e = parse_config_str("mode = sweep\ntrain_data = a\ntest_data = b\nk = many\n").unwrap_err();
    assert!(matches!(e, Error::InvalidValue { ref key, .. } if key == "k"), "{e}");
    let e = parse_config_str("train_data = a\n").unwrap_err();
    assert!(matches!(e, Error::MissingKey(ref k) if k == "mode"));
    let e = parse_config_str("mode = sweep\ntest_data = b\n").unwrap_err();
    assert!(e.to_string().contains("train_data"), "{e}");
    let e = parse_config_str("mode = sweep\ntrain_data = a\ntest_data = b\nseeds = 1, 1\n").unwrap_err();
    assert!(e.to_string().contains("twice"));
    let e = parse_config_str("mode = sweep\ntrain_data = a\ntest_data = b\nsigma_w = \n").unwrap_err();
    assert!(e.to_string().contains("empty"));
    let e = parse_config_str("mode = sweep\ntrain_data = a\ntest_data = b\nsigma_w = -1\n").unwrap_err();
    assert!(matches!(e, Error::InvalidValue { .. }));
    let e = parse_config_str("mode = sweep\nmode = train\n").unwrap_err();
    assert!(e.to_string().contains("line 2"), "{e}");
    let e = parse_config_str("mode sweep\n").unwrap_err();
    assert!(matches!(e, Error::Syntax { line: 1, .. }));
    let e = parse_config_str("mode = sweep\ntrain_data = a\ntest_data = b\nmask = sparse\n").unwrap_err();
    assert!(e.to_string().contains("random_drop"));
    assert!(parse_config_str("mode = topology-info\n").is_ok());
}

#[test]
fn flags_override_file_values() {
    let file = ConfigEntries::parse("mode = sweep\ntrain_data = a\ntest_data = b\nk = 3\nepochs = 2\n").unwrap();
    let mut flags = ConfigEntries::default();
    flags.set("k", "7").unwrap();
    assert!(flags.set("kk", "7").is_err());
    let plan = ExperimentPlan::from_entries(&file.merge(flags)).unwrap();
    assert_eq!((plan.train.k, plan.train.epochs), (7, 2));
}

#[test]
fn metadata_header_echoes_every_key() {
    let plan = parse_config_str("mode = sweep\ntrain_data = a\ntest_data = b\n# comment\nk = 3 # trailing\n").unwrap();
    let header = plan.metadata_header();
    assert_eq!(header.lines().count(), KEYS.len());
    assert!(header.contains("# k = 3\n"));
    assert!(header.contains("# learning_rate = 0.01\n"));
    assert!(header.contains("# model = \n"));
    assert!(header.lines().all(|l| l.starts_with("# ")));
}

#[test]
fn parse_config_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.conf");
    std::fs::write(&p, "mode = topology-info\nchimera = 8, 8, 4\n").unwrap();
    assert_eq!(parse_config(&p).unwrap().chimera, (8, 8, 4));
    assert!(matches!(parse_config(&dir.path().join("none")), Err(Error::Io { .. })));
}
