//! Writing and reading feature files, and loading a model zoo from a manifest.
//!
//! ```sh
//! cargo run --example npy_io
//! ```

use nalgebra::DMatrix;
use taskprior::data_io::{load_features, save_features_csv, save_npy, DatasetManifest, FeatureFormat, FeatureMatrix, ManifestEntry};

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("taskprior-npy-io");
    std::fs::create_dir_all(&dir)?;

    let a = DMatrix::from_fn(6, 3, |i, j| (i * 3 + j) as f64 / 10.0);
    let b = DMatrix::from_fn(6, 2, |i, j| if i % 2 == j { 1.0 } else { 0.0 });
    save_npy(&a, &dir.join("a.npy"))?;
    let ids: Vec<String> = (0..6).map(|i| format!("img{i}")).collect();
    save_features_csv(&FeatureMatrix::new(b, ids.clone(), "b")?, &dir.join("b.csv"))?;

    let loaded = load_features(&dir.join("a.npy"), FeatureFormat::Npy)?;
    println!("a.npy: {} x {}, model id {:?}", loaded.n_samples(), loaded.dim(), loaded.model_id());
    assert_eq!(loaded.data(), &a);

    let manifest = DatasetManifest {
        sample_ids: Some(ids),
        models: vec![
            ManifestEntry { model_id: "model-a".into(), path: "a.npy".into(), format: None },
            ManifestEntry { model_id: "model-b".into(), path: "b.csv".into(), format: None },
        ],
        base_dir: Default::default(),
    };
    manifest.save(&dir.join("zoo.json"))?;
    for m in DatasetManifest::load(&dir.join("zoo.json"))?.load_all()? {
        println!("{}: {} samples, dim {}, first id {}", m.model_id(), m.n_samples(), m.dim(), m.sample_ids()[0]);
    }
    Ok(())
}
