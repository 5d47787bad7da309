use proptest::prelude::*;
use tfr_core::generator::{sample_powers, FieldSolver, SetTag, SolverConfig};
use tfr_core::layout::{builtin_layout_with, rasterize, CaseOptions, CaseTag};
use tfr_core::metrics::{build_masks, evaluate};
use tfr_core::observation::{observe, place_monitors, MonitorSet, Observation};
use tfr_core::reconstruct::{
    cell_center_queries, fit_predict_gpr, fit_predict_poly, global_interpolate, knn_interpolate, reconstruct_field,
    GprConfig, Method, MlpPointConfig, MlpPointModel, DEFAULT_GPR_LENGTH_SCALE, DEFAULT_JITTER,
};

const N: usize = 64;

fn hsink_monitors() -> MonitorSet {
    let spec = builtin_layout_with(CaseTag::HSink, &CaseOptions { grid_n: N, ..Default::default() }).unwrap();
    place_monitors(&spec, &rasterize(&spec).unwrap(), 7).unwrap()
}

fn queries() -> Vec<[f64; 2]> {
    cell_center_queries(N, 0.1)
}

fn observation() -> impl Strategy<Value = Observation> {
    prop::collection::vec(298.0..420.0f64, 32).prop_map(Observation)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn interpolators_are_bounded_equivariant_and_consistent(obs in observation(), c in -50.0..50.0f64, k in 1usize..=32) {
        let m = hsink_monitors();
        let q = queries();
        let (lo, hi) = (obs.min(), obs.max());
        let shifted = Observation(obs.values().iter().map(|v| v + c).collect());
        let knn = knn_interpolate(&obs, &m, &q, k, 0.1).unwrap();
        let glob = global_interpolate(&obs, &m, &q, 0.1).unwrap();
        for p in knn.iter().chain(&glob) {
            prop_assert!(*p >= lo && *p <= hi);
        }
        let knn_s = knn_interpolate(&shifted, &m, &q, k, 0.1).unwrap();
        let glob_s = global_interpolate(&shifted, &m, &q, 0.1).unwrap();
        for i in 0..q.len() {
            prop_assert!((knn_s[i] - knn[i] - c).abs() <= 1e-10);
            prop_assert!((glob_s[i] - glob[i] - c).abs() <= 1e-10);
        }
        let all = knn_interpolate(&obs, &m, &q, 32, 0.1).unwrap();
        prop_assert_eq!(all, glob);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn degree_five_fit_reproduces_degree_five_fields(coef in prop::collection::vec(-10.0..10.0f64, 21), degree in 0usize..=5) {
        let m = hsink_monitors();
        let poly = |x: f64, y: f64| {
            let (u, v) = (x / 0.1, y / 0.1);
            let mut t = 298.0;
            let mut i = 0;
            for total in 0..=degree {
                for b in 0..=total {
                    t += coef[i] * u.powi((total - b) as i32) * v.powi(b as i32);
                    i += 1;
                }
            }
            t
        };
        let obs = Observation(m.monitors.iter().map(|p| poly(p.x, p.y)).collect());
        let q = queries();
        let (pred, warning) = fit_predict_poly(&obs, &m, &q, 5).unwrap();
        prop_assert!(warning.is_none());
        for (p, xy) in pred.iter().zip(&q) {
            prop_assert!((p - poly(xy[0], xy[1])).abs() <= 1e-6, "{} vs {}", p, poly(xy[0], xy[1]));
        }
    }

    #[test]
    fn gpr_interpolates_every_monitor(seed in any::<u64>()) {
        let spec = builtin_layout_with(CaseTag::HSink, &CaseOptions { grid_n: N, ..Default::default() }).unwrap();
        let m = place_monitors(&spec, &rasterize(&spec).unwrap(), 7).unwrap();
        let q = sample_powers(10, SetTag::Test0, seed);
        let field = FieldSolver::new(&spec, SolverConfig::direct()).unwrap().solve(&q).unwrap();
        let obs = observe(&field, &m).unwrap();
        let at: Vec<[f64; 2]> = m.monitors.iter().map(|p| [p.x, p.y]).collect();
        let pred = fit_predict_gpr(&obs, &m, &at, DEFAULT_GPR_LENGTH_SCALE, DEFAULT_JITTER).unwrap();
        for (p, o) in pred.iter().zip(obs.values()) {
            prop_assert!((p - o).abs() <= 1e-3);
        }
    }
}

#[test]
fn per_instance_methods_are_pure_and_score_finite() {
    let spec = builtin_layout_with(CaseTag::HSink, &CaseOptions { grid_n: N, ..Default::default() }).unwrap();
    let layout = rasterize(&spec).unwrap();
    let m = place_monitors(&spec, &layout, 7).unwrap();
    let q = sample_powers(10, SetTag::Test0, 4);
    let field = FieldSolver::new(&spec, SolverConfig::direct()).unwrap().solve(&q).unwrap();
    let obs = observe(&field, &m).unwrap();
    let masks = build_masks(&layout, 1).unwrap();
    let mut methods: Vec<Method> = ["knn_interp", "global_interp", "poly", "gpr"]
        .iter()
        .map(|n| Method::from_name(n).unwrap())
        .collect();
    methods.push(Method::Gpr(GprConfig {
        median_heuristic: true,
        ..Default::default()
    }));
    methods.push(Method::MlpPoint(MlpPointConfig {
        epochs: 200,
        ..Default::default()
    }));
    for method in &methods {
        let a = reconstruct_field(method, &obs, &m).unwrap();
        let b = reconstruct_field(method, &obs, &m).unwrap();
        assert_eq!(a, b, "{}", method.name());
        let report = evaluate(&a, &field, &masks).unwrap();
        assert!(report.values().iter().all(|v| v.is_finite()), "{}", method.name());
        assert!(report.mae < 20.0, "{}: {report:?}", method.name());
    }
}

#[test]
fn ambient_observations_give_ambient_field() {
    let m = hsink_monitors();
    let f = reconstruct_field(&Method::from_name("global_interp").unwrap(), &Observation(vec![298.0; 32]), &m).unwrap();
    assert!(f.values().iter().all(|&v| v == 298.0));
}

#[test]
fn point_network_learns_a_constant() {
    let m = hsink_monitors();
    let model = MlpPointModel::fit(&Observation(vec![315.0; 32]), &m, &MlpPointConfig::default()).unwrap();
    let at: Vec<[f64; 2]> = m.monitors.iter().map(|p| [p.x, p.y]).collect();
    assert!(model.predict(&at).iter().all(|p| (p - 315.0).abs() <= 0.1));
    assert!(model.loss_curve.last().unwrap() <= &model.loss_curve[0]);
    assert!(model.loss_is_monotone());
}
