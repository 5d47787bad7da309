use std::collections::BTreeMap;
use std::fs;

use proptest::prelude::*;
use tfr_core::generator::{
    generate_dataset, read_manifest, sample_powers, write_dataset, Dataset, DatasetPlan, SetTag, SolverConfig,
};
use tfr_core::layout::{builtin_layout_with, rasterize, CaseOptions, CaseTag};
use tfr_core::observation::place_monitors;

fn plan(counts: &[(SetTag, usize)], base_seed: u64) -> DatasetPlan {
    let spec = builtin_layout_with(CaseTag::HSink, &CaseOptions { grid_n: 32, ..Default::default() }).unwrap();
    let layout = rasterize(&spec).unwrap();
    let monitors = place_monitors(&spec, &layout, 5).unwrap();
    DatasetPlan {
        spec,
        monitors,
        monitor_seed: 5,
        counts: counts.iter().copied().collect::<BTreeMap<_, _>>(),
        base_seed,
        solver: SolverConfig::direct(),
    }
}

fn zeros(q: &[f64]) -> usize {
    q.iter().filter(|&&v| v == 0.0).count()
}

#[test]
fn strategies_over_many_seeds() {
    for sources in [10usize, 12] {
        let expected = [
            (SetTag::Test2, (sources as f64 / 4.0 + 0.5).floor() as usize),
            (SetTag::Test3, sources / 2),
            (SetTag::Test4, (3.0 * sources as f64 / 4.0 + 0.5).floor() as usize),
        ];
        let mut sum = 0.0;
        for seed in 0..1000u64 {
            let t1 = sample_powers(sources, SetTag::Test1, seed);
            assert!(t1.iter().all(|&v| v == t1[0]));
            for (tag, z) in expected {
                assert_eq!(zeros(&sample_powers(sources, tag, seed)), z, "{tag} Λ={sources}");
            }
            assert_eq!(zeros(&sample_powers(sources, SetTag::Test5, seed)), sources - 1);
            let t0 = sample_powers(sources, SetTag::Test0, seed);
            assert!(t0.iter().all(|v| (0.0..=30000.0).contains(v)));
            sum += t0.iter().sum::<f64>();
        }
        let mean = sum / (1000 * sources) as f64;
        assert!((mean / 15000.0 - 1.0).abs() <= 0.02, "mean {mean}");
    }
}

#[test]
fn written_dataset_round_trips_and_is_reproducible() {
    let p = plan(&[(SetTag::Train, 3), (SetTag::Test0, 2), (SetTag::Test1, 3)], 11);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_dataset(&p, a.path()).unwrap();
    generate_dataset(&p).unwrap().write(b.path()).unwrap();
    for file in ["manifest.json", "train.tfrs", "test0.tfrs", "test1.tfrs"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
    let back = Dataset::read(a.path()).unwrap();
    let fresh = generate_dataset(&p).unwrap();
    assert_eq!(back.sets, fresh.sets);
    let manifest = read_manifest(a.path()).unwrap();
    assert_eq!(manifest.sets.len(), 3);
    for s in &back.sets[&SetTag::Test1] {
        assert!(s.q.iter().all(|&v| v == s.q[0]));
    }
}

#[test]
fn harness_scale_composition() {
    let mut counts = vec![(SetTag::Train, 20), (SetTag::Test0, 10)];
    counts.extend(SetTag::TESTS[1..].iter().map(|&t| (t, 4)));
    let ds = generate_dataset(&plan(&counts, 1)).unwrap();
    assert_eq!(ds.manifest.sets.len(), 7);
    assert_eq!(ds.sets.values().map(Vec::len).sum::<usize>(), 50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sample_seeds_do_not_depend_on_set_size(base in any::<u64>()) {
        let small = generate_dataset(&plan(&[(SetTag::Test2, 2)], base)).unwrap();
        let large = generate_dataset(&plan(&[(SetTag::Test2, 4)], base)).unwrap();
        prop_assert_eq!(&small.sets[&SetTag::Test2][..], &large.sets[&SetTag::Test2][..2]);
    }
}
