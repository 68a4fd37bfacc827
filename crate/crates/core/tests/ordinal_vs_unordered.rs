use hatestack::learners::{LearnerConfig, LogisticParams, Standardizer};
use hatestack::ordinal::{fit_one_vs_rest, fit_ordinal, SeverityDistribution, DEFAULT_ABSTAIN_THRESHOLD};
use hatestack::rng::seeded;
use hatestack::SeverityLabel;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

/// Classes cut from one latent severity axis; every feature is a noisy
/// view of that axis.
fn latent_data(n: usize, seed: u64) -> (Array2<f64>, Vec<SeverityLabel>) {
    let mut r = seeded(seed);
    let d = 6;
    let loadings: Vec<f64> = (0..d).map(|j| 0.5 + j as f64 / d as f64).collect();
    let mut x = Array2::zeros((n, d));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let z: f64 = r.sample(StandardNormal);
        for j in 0..d {
            let e: f64 = r.sample(StandardNormal);
            x[[i, j]] = loadings[j] * z + e;
        }
        let t = z + 0.3 * r.sample::<f64, _>(StandardNormal);
        y.push(if t < 0.0 {
            SeverityLabel::Clean
        } else if t < 0.9 {
            SeverityLabel::Offensive
        } else {
            SeverityLabel::Hate
        });
    }
    (x, y)
}

fn accuracy(d: &[SeverityDistribution], y: &[SeverityLabel]) -> f64 {
    d.iter().zip(y).filter(|(d, y)| d.label() == **y).count() as f64 / y.len() as f64
}

#[test]
fn frank_hall_beats_one_vs_rest_on_latent_axis_data() {
    let cfg = LearnerConfig::Logistic(LogisticParams::default());
    let mut wins = 0;
    let mut clean_as_hate = 0;
    let mut clean_as_offensive = 0;
    for seed in 0..10u64 {
        let (xtr, ytr) = latent_data(600, 2 * seed);
        let (xte, yte) = latent_data(600, 2 * seed + 1);
        let s = Standardizer::fit(xtr.view(), false).unwrap();
        let (xtr, xte) = (s.transform(xtr.view()).unwrap(), s.transform(xte.view()).unwrap());
        let ord = fit_ordinal(xtr.view(), &ytr, &cfg, DEFAULT_ABSTAIN_THRESHOLD).unwrap();
        let ovr = fit_one_vs_rest(xtr.view(), &ytr, &cfg).unwrap();
        let po: Vec<_> = xte.rows().into_iter().map(|r| ord.predict(r).unwrap()).collect();
        let pu: Vec<_> = xte.rows().into_iter().map(|r| ovr.predict(r).unwrap()).collect();
        let (ao, au) = (accuracy(&po, &yte), accuracy(&pu, &yte));
        if ao >= au {
            wins += 1;
        }
        for (p, y) in po.iter().zip(&yte) {
            if *y == SeverityLabel::Clean {
                match p.label() {
                    SeverityLabel::Hate => clean_as_hate += 1,
                    SeverityLabel::Offensive => clean_as_offensive += 1,
                    SeverityLabel::Clean => {}
                }
            }
        }
        println!("seed {seed}: ordinal {ao:.3} one-vs-rest {au:.3}");
    }
    assert!(wins >= 7, "ordinal won {wins}/10");
    assert!(
        clean_as_hate < clean_as_offensive,
        "clean->hate {clean_as_hate} vs clean->offensive {clean_as_offensive}"
    );
}
