//! The four default-probability models on a generated table with the
//! Kaggle column layout.

use credit_mixture::classifiers::{fit_model, ClassifierConfig, ModelTag};
use credit_mixture::metrics::{classification_report, DEFAULT_THRESHOLD};
use credit_mixture::pipeline::{prepare_data, RunConfig, SyntheticData};

fn main() -> credit_mixture::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.data.synthetic = Some(SyntheticData { rows: 6000, seed: 1 });
    let data = prepare_data(&cfg)?;
    println!(
        "fit {} rows, test {} rows, default rate {:.3}",
        data.fit.n(),
        data.test.n(),
        data.summary.default_rate
    );

    let mut models = ClassifierConfig::default();
    models.rf.n_trees = 50;
    models.ab.n_rounds = 50;
    println!("model  precision  recall     f1    auc");
    for tag in ModelTag::ALL {
        let model = fit_model(tag, &data.fit, &models, 7)?;
        let q = model.predict_rows(data.test.features())?;
        let r = classification_report(&q, data.test.labels(), DEFAULT_THRESHOLD)?;
        println!(
            "{:<5}  {:>9.4}  {:>6.4}  {:>5.4}  {:.4}",
            tag, r.positive.precision, r.positive.recall, r.positive.f1, r.auc
        );
    }
    Ok(())
}
