use std::path::{Path, PathBuf};

use exemplar_core::mlp::Mlp;
use exemplar_core::{AffineDecoder, CentroidSoftmaxModel, Error, MlpDecoder, Oracle, ToyMlpModel};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn shipped_mlp_has_expected_widths() {
    // extension may be omitted
    let model = ToyMlpModel::load(&fixture("mlp_2x8x3")).unwrap();
    assert_eq!(model.widths(), vec![2, 8, 3]);
    assert_eq!(model.num_classes(), 3);
    let rows = model.predict_batch(&[vec![0.5, -1.0], vec![3.0, 3.0]]).unwrap();
    for r in rows {
        assert!((r.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn broken_chain_is_reported() {
    let zeros = |n: usize| vec!["0"; n].join(" ");
    let mut lines = vec![
        "mlp".to_string(),
        "output softmax".into(),
        "layers 2".into(),
        "layer 2 8".into(),
    ];
    lines.extend((0..8).map(|_| zeros(2)));
    lines.push(zeros(8));
    lines.push("layer 7 3".into());
    lines.extend((0..3).map(|_| zeros(7)));
    lines.push(zeros(3));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.mlp");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let err = ToyMlpModel::load(&path).unwrap_err();
    assert!(matches!(err, Error::ModelFormat { .. }));
    assert!(
        err.to_string()
            .contains("layer 1 input width 7 ≠ previous output width 8"),
        "{err}"
    );
}

#[test]
fn shipped_model_files_are_canonical() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "mlp_2x8x3.mlp",
        "classifier_4x8x3.mlp",
        "affine_3x4.mlp",
        "decoder_3x6x4.mlp",
    ] {
        let original = std::fs::read(fixture(name)).unwrap();
        let out = dir.path().join(name);
        Mlp::load(&fixture(name)).unwrap().save(&out).unwrap();
        assert_eq!(std::fs::read(&out).unwrap(), original, "{name}");
    }
    for name in ["multimodal.centroid", "centroid_4x3.centroid"] {
        let original = std::fs::read(fixture(name)).unwrap();
        let out = dir.path().join(name);
        CentroidSoftmaxModel::load(&fixture(name)).unwrap().save(&out).unwrap();
        assert_eq!(std::fs::read(&out).unwrap(), original, "{name}");
    }
}

#[test]
fn shipped_files_match_builtin_fixtures() {
    use exemplar_core::fixtures;
    assert_eq!(
        CentroidSoftmaxModel::load(&fixture("multimodal.centroid")).unwrap(),
        fixtures::multimodal_oracle()
    );
    assert_eq!(
        CentroidSoftmaxModel::load(&fixture("centroid_4x3.centroid")).unwrap(),
        fixtures::random_centroid()
    );
    assert_eq!(
        AffineDecoder::load(&fixture("affine_3x4.mlp")).unwrap(),
        fixtures::random_affine()
    );
    assert_eq!(
        MlpDecoder::load(&fixture("decoder_3x6x4.mlp")).unwrap(),
        fixtures::random_decoder()
    );
    assert_eq!(
        ToyMlpModel::load(&fixture("classifier_4x8x3.mlp")).unwrap().mlp(),
        fixtures::random_classifier().mlp()
    );
}

#[test]
fn wrong_family_rejected() {
    // a softmax network is not a decoder and an affine map is not a classifier
    assert!(MlpDecoder::load(&fixture("mlp_2x8x3.mlp")).is_err());
    assert!(ToyMlpModel::load(&fixture("affine_3x4.mlp")).is_err());
    assert!(ToyMlpModel::load(&fixture("does_not_exist.mlp")).is_err());
}
