//! On-disk JSON contracts: self-describing recalibration maps, exact
//! GLAR-map reload, and the oracle atom schema.

use regretcal_core::binning::EqualMassBinning;
use regretcal_core::dataset::{split, ScoredDataset, ScoredSample, SplitParts, SplitSpec};
use regretcal_core::grouping::{glar_apply, glar_fit, GlarConfig, GlarMap};
use regretcal_core::recalibration::{
    LinearLogitModel, RecalibrationMap, SigmoidMap, StepMap,
};
use regretcal_core::rng::SplitMix64;
use regretcal_core::synthetic::{sample, OracleAtom, OracleDistribution};

#[test]
fn recalibration_maps_serialize_with_kind_tags() {
    let step = StepMap::new(vec![0.0, 0.5], vec![0.2, 0.8]).unwrap();
    let cases = [
        (RecalibrationMap::Isotonic(step.clone()), "isotonic"),
        (
            RecalibrationMap::Platt(SigmoidMap {
                slope: 2.0,
                intercept: -1.0,
            }),
            "platt",
        ),
        (RecalibrationMap::Histogram(step), "histogram"),
        (
            RecalibrationMap::Linear(LinearLogitModel {
                weights: vec![1.0, -0.5],
                bias: 0.25,
            }),
            "linear",
        ),
    ];
    for (map, kind) in cases {
        let json = serde_json::to_value(&map).unwrap();
        assert_eq!(json["kind"], kind, "{json}");
        let back: RecalibrationMap = serde_json::from_value(json).unwrap();
        assert_eq!(back, map);
    }
}

#[test]
fn glar_map_reloads_exactly_from_json() {
    let mut rng = SplitMix64::new(31);
    let samples: Vec<ScoredSample> = (0..4000)
        .map(|_| {
            let hot = rng.bernoulli(0.5);
            let (x, p) = if hot { (1.0, 0.85) } else { (-1.0, 0.15) };
            ScoredSample::with_features(0.5, rng.bernoulli(p), vec![x])
        })
        .collect();
    let ds = ScoredDataset::new(samples).unwrap();
    let SplitParts::Plain { fit, eval } =
        split(&ds, &SplitSpec::new(0.5, 0.5, 1, false)).unwrap()
    else {
        unreachable!()
    };
    let binning = EqualMassBinning::fit(&fit.scores(), 1).unwrap();
    let map = glar_fit(&fit, &eval, &binning, &GlarConfig::new(0.5)).unwrap();
    assert!(map.active());

    let json = serde_json::to_string(&map).unwrap();
    assert!(json.contains("threshold") || json.contains("region"), "{json}");
    let reloaded: GlarMap = serde_json::from_str(&json).unwrap();
    assert_eq!(reloaded, map);
    for s in ds.samples().iter().take(200) {
        assert_eq!(
            glar_apply(&reloaded, s).unwrap(),
            glar_apply(&map, s).unwrap()
        );
    }
}

#[test]
fn oracle_json_uses_the_atom_schema() {
    let oracle = OracleDistribution::new(vec![
        OracleAtom {
            mass: 0.25,
            true_prob: 0.2,
            score: 0.4,
            tag: 0,
        },
        OracleAtom {
            mass: 0.75,
            true_prob: 0.7,
            score: 0.6,
            tag: 1,
        },
    ])
    .unwrap();
    let json = serde_json::to_value(&oracle).unwrap();
    assert_eq!(json["atoms"][0]["z"], 0.25);
    assert_eq!(json["atoms"][0]["fstar"], 0.2);
    assert_eq!(json["atoms"][0]["f"], 0.4);
    assert_eq!(json["atoms"][1]["x"], 1);
    let back: OracleDistribution = serde_json::from_value(json).unwrap();
    assert_eq!(back, oracle);
    // Reloaded oracles sample identically.
    assert_eq!(sample(&back, 100, 9).unwrap(), sample(&oracle, 100, 9).unwrap());
}
