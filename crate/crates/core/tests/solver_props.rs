use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fedheat::element::ElementKind;
use fedheat::oracle;
use fedheat::solver::{self, NodalLoad, RunControls, TimeStep};
use fedheat::{Engine, Mesh, ResolvedBoundary, TissueMaterial};

fn mesh_for(seed: u64, cells: [usize; 3]) -> Mesh {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let kinds: Vec<ElementKind> = (0..cells[0] * cells[1] * cells[2])
        .map(|_| if r.random_bool(0.5) { ElementKind::Tet4 } else { ElementKind::Hex8 })
        .collect();
    let mut next = kinds.into_iter();
    let base = fedheat::meshgen::box_mesh_with(cells, [0.01 * cells[0] as f64, 0.01, 0.012], |_| next.next().unwrap());
    let h = 0.01 * 0.05;
    fedheat::meshgen::perturbed(&base, |_| [0; 3].map(|_| r.random_range(-h..h)))
}

fn random_field(seed: u64, n: usize) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n).map(|_| r.random_range(30.0..60.0)).collect()
}

fn controls(workers: usize, steps: u64, td_mode: bool) -> RunControls {
    RunControls {
        time_step: TimeStep::Auto(0.5),
        steps,
        td_mode,
        probe_nodes: vec![0],
        workers,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scatter_matches_assembled_conduction(seed in any::<u64>(), nx in 1usize..5, td in any::<bool>()) {
        let mesh = mesh_for(seed, [nx, 2, 2]);
        let mat = if td { TissueMaterial::liver_temperature_dependent() } else { TissueMaterial::liver_constant() };
        let t = random_field(seed, mesh.node_count());
        let mut engine = Engine::new(&mesh, &mat, ResolvedBoundary::none(), true, 1, &t).unwrap();
        let mut loads = vec![0.0; t.len()];
        engine.scatter_loads(&t, &mut loads);
        let sys = oracle::assemble(&mesh, &mat, &t).unwrap();
        let kt = sys.k.matvec(&t);
        let scale = kt.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for (a, b) in loads.iter().zip(&kt) {
            prop_assert!((a + b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn results_independent_of_worker_count(seed in any::<u64>(), workers in 2usize..6, td in any::<bool>()) {
        let mesh = mesh_for(seed, [3, 2, 2]);
        let mat = TissueMaterial::liver_temperature_dependent().with_perfusion(20.0, 3617.0, 37.0).unwrap();
        let t = random_field(seed, mesh.node_count());
        let load = NodalLoad { nodes: vec![1, 2], power: 0.5, start: 0.0, end: f64::INFINITY };
        let boundary = ResolvedBoundary::new(mesh.node_count(), vec![(0, 37.0)], vec![load]).unwrap();
        let one = solver::run(&mesh, &mat, boundary.clone(), &t, &controls(1, 40, td), |_| {}).unwrap();
        let many = solver::run(&mesh, &mat, boundary, &t, &controls(workers, 40, td), |_| {}).unwrap();
        prop_assert_eq!(one.state.temperature, many.state.temperature);
        prop_assert_eq!(one.probes, many.probes);
    }

    #[test]
    fn adiabatic_conduction_conserves_energy(seed in any::<u64>(), nx in 1usize..4) {
        let mesh = mesh_for(seed, [nx, 2, 2]);
        let mat = TissueMaterial::liver_constant();
        let t = random_field(seed, mesh.node_count());
        let mut energy = Vec::new();
        let mut engine = Engine::new(&mesh, &mat, ResolvedBoundary::none(), false, 1, &t).unwrap();
        let dt = 0.5 * engine.critical_dt();
        let mut state = engine.initial_state(&t, 0.0, dt).unwrap();
        let c = engine.mass().to_vec();
        for _ in 0..200 {
            energy.push(c.iter().zip(&state.temperature).map(|(c, t)| c * t).sum::<f64>());
            engine.step(&mut state).unwrap();
        }
        let e0 = energy[0];
        for e in energy {
            prop_assert!((e - e0).abs() <= 1e-12 * e0.abs());
        }
    }

    #[test]
    fn conduction_only_respects_initial_bounds(seed in any::<u64>(), nx in 1usize..4) {
        // structured Kuhn tets give an M-matrix conductance
        let mesh = fedheat::meshgen::box_mesh(ElementKind::Tet4, [nx, 2, 2], [0.01 * nx as f64, 0.01, 0.01]);
        let mat = TissueMaterial::liver_constant();
        let t = random_field(seed, mesh.node_count());
        let (lo, hi) = t.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        let out = solver::run(&mesh, &mat, ResolvedBoundary::none(), &t, &controls(1, 300, false), |s| {
            assert!(s.temperature.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
        }).unwrap();
        prop_assert_eq!(out.state.step, 300);
    }
}
