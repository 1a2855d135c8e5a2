use std::path::{Path, PathBuf};

use exemplar_core::fixtures::PipelineSource;
use exemplar_core::{ConfigFile, ConvergeOn, Error, EsConfig, GdConfig, PipelineSpec, SweepAxis};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn example_config_spells_out_the_defaults() {
    let cfg = ConfigFile::load(&fixtures().join("example.toml")).unwrap();
    assert_eq!(cfg.es_config(4).unwrap(), EsConfig::default());
    assert_eq!(cfg.gd_config(4).unwrap(), GdConfig::default());
    let spec = cfg.sweep_spec(&EsConfig::default()).unwrap().unwrap();
    let axes: Vec<SweepAxis> = spec.axes.iter().map(|(a, _)| *a).collect();
    assert_eq!(axes, vec![SweepAxis::K, SweepAxis::M, SweepAxis::Alpha]);
    assert_eq!(spec.points().unwrap().len(), 8);
}

#[test]
fn every_shipped_config_opens_a_pipeline() {
    for name in ["easy", "multimodal", "saddle", "files", "example"] {
        let cfg = ConfigFile::load(&fixtures().join(name)).unwrap();
        let pipeline = PipelineSpec::from_config(&cfg).unwrap().open().unwrap();
        cfg.es_config(pipeline.generator.latent_dim()).unwrap();
    }
}

#[test]
fn overrides_win_and_are_type_checked() {
    let path = fixtures().join("example.toml");
    let cfg =
        ConfigFile::load_with_overrides(&path, &["k=5".into(), "converge_on=best".into(), "alpha=0".into()]).unwrap();
    let es = cfg.es_config(4).unwrap();
    assert_eq!((es.k, es.alpha, es.converge_on), (5, 0.0, ConvergeOn::Best));

    assert!(ConfigFile::load_with_overrides(&path, &["k=five".into()]).is_err());
    let err = ConfigFile::load_with_overrides(&path, &["kk=1".into()]).unwrap_err();
    assert!(err.to_string().contains("unknown config key"), "{err}");
    let err = ConfigFile::load_with_overrides(&path, &["k=11".into(), "t=10".into()])
        .unwrap()
        .es_config(4)
        .unwrap_err();
    assert!(err.to_string().contains("k must not exceed t"), "{err}");
}

#[test]
fn missing_and_unknown() {
    let err = ConfigFile::load(&fixtures().join("absent")).unwrap_err();
    assert!(matches!(err, Error::ConfigNotFound(_)));
    assert!(err.to_string().contains("config not found"));
    assert!(ConfigFile::parse("population = 5").is_err());
    assert!(ConfigFile::parse("fixture = \"easy\"\n[oracle]\nkind = \"mlp\"\npath = \"x\"").is_err());
}
