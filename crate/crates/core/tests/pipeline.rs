use cloner_core::channel::{apply_cloner, fock_oracle_cloner, ClonerConfig};
use cloner_core::metrics::average_clone_fidelity;
use cloner_core::montecarlo::{reherald, run_experiment, ExperimentData, LoSchedule};
use cloner_core::optimizer::{optimize_x, run_sweep, write_sweep_csv, SweepSpec, XGrid};
use cloner_core::states::ensemble_to_density;
use cloner_core::tomography::{fidelity_between, maxlik_reconstruct, QuadratureSampleSet, DEFAULT_TOL};

#[test]
fn backends_agree_on_clone_means() {
    for (alpha, x, m) in [(0.5, 0.6, 1), (1.0, 0.4, 3), (0.9, 0.6, 2)] {
        let cfg = ClonerConfig::experimental(alpha, x, m);
        let exact = apply_cloner(&cfg).unwrap();
        let oracle = fock_oracle_cloner(&cfg, 20, false).unwrap();
        assert!((exact.success_probability.unwrap() - oracle.success_probability).abs() < 1e-6);
        let (qe, qo) = (exact.clone_ensemble().quadrature_stats(), oracle.clone.quadrature_stats());
        assert!((qe.mean_x - qo.mean_x).abs() < 1e-6 && (qe.mean_p - qo.mean_p).abs() < 1e-6);
        let f = average_clone_fidelity(&exact, cfg.alpha).unwrap();
        assert!((f - oracle.clone.fidelity_with_coherent(cfg.alpha).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn monte_carlo_independent_of_thread_count() {
    let cfg = ClonerConfig::experimental(1.0, 0.5, 0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(&cfg, 300_000, 99, LoSchedule::Uniform).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn sweep_is_deterministic() {
    let spec = SweepSpec {
        alphas: vec![0.6, 1.2],
        thresholds: vec![0, 2, 4],
        ..SweepSpec::experimental_range()
    };
    let csv = || {
        let mut buf = Vec::new();
        write_sweep_csv(&run_sweep(&spec).unwrap(), &mut buf).unwrap();
        buf
    };
    assert_eq!(csv(), csv());
}

#[test]
fn golden_refinement_never_worse_than_grid() {
    let grid = XGrid {
        min: 0.0,
        max: 1.0,
        step: 0.05,
    };
    for m in [1, 3, 5] {
        let base = ClonerConfig::experimental(0.9, 0.0, m);
        let opt = optimize_x(&base, &grid).unwrap();
        for x in grid.points() {
            let f = average_clone_fidelity(&apply_cloner(&base.with_x(x)).unwrap(), base.alpha).unwrap();
            assert!(opt.fidelity >= f);
        }
    }
}

#[test]
fn stored_experiment_feeds_tomography() {
    let cfg = ClonerConfig::experimental(0.8, 0.5, 0);
    let data = run_experiment(&cfg, 60_000, 5, LoSchedule::Uniform).unwrap();
    let dir = tempfile::tempdir().unwrap();
    data.write_dir(dir.path()).unwrap();
    let back = ExperimentData::read_dir(dir.path()).unwrap();
    let view = reherald(&back, 1).unwrap();
    let set = QuadratureSampleSet::new(view.clone_samples(2).unwrap()).unwrap();
    let res = maxlik_reconstruct(&set, 10, 500, DEFAULT_TOL).unwrap();
    res.rho.validate().unwrap();
    assert!(res.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    let truth = ensemble_to_density(&apply_cloner(&cfg.with_threshold(1)).unwrap().clone_ensemble(), 10).unwrap();
    let f = fidelity_between(&res.rho, &truth).unwrap();
    assert!(f > 0.98, "{f}");
}
